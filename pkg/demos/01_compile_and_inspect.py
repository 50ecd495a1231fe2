# coding: utf-8

# # Compiling a plan library
#
# A plan library is a set of KAs. Each one says which goal it achieves,
# when it applies and which steps it takes. `plan2bn` turns the library into a
# belief network whose variables stand for goals, steps, context conditions
# and noisy sensor readings.

# %%

from pathlib import Path

import numpy as np

from plan2bn import compile_library, parse_plan_file, pretty_print, validate_library

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

text = (FIXTURES / "recon.plan").read_text()
lib = parse_plan_file(text)
print(pretty_print(lib))

# %% [markdown]
# The two goals nobody asks for as a subgoal are the top-level ones.

# %%

print(lib.top_level_goals)
print(validate_library(lib).to_json())

# %% [markdown]
# Compile with the defaults: temporal arcs between steps, a sensor child
# per primitive step, inhibition inside OR branches and between top-level goals.

# %%

net, vmap = compile_library(lib)
print(len(net), "variables,", len(net.arcs), "arcs")

for name in net.topological_order():
    print(f"{vmap.role(name):14s} {name}")

# %% [markdown]
# Names are path-qualified. `perform_bound/0/moved_to_next_viapt` is the
# subgoal in slot 0 of `perform_bound`, and the KA that achieves it is
# expanded underneath it.

# %%

sub = vmap.resolve_one("moved_to_next_viapt")
print(sub, "<-", net[sub].parents)
print([v for v in net.variables if v.startswith(sub + "/")])

# %% [markdown]
# Default tables. A step whose predecessor has not happened yet is unlikely
# to be performed, whatever the goal is doing.

# %%

find_cover = vmap.resolve_one("find_cover")
print(net[find_cover].parents)
print(np.round(net[find_cover].rows, 3))

# %% [markdown]
# Context conditions must hold whenever their goal is Active or Achieved.

# %%

ctx = vmap.resolve_one("hide/enemy_detected")
print(net[ctx].rows)

# %% [markdown]
# The same library without OR-branch inhibition loses exactly one arc.

# %%

from plan2bn import CompileOptions

loose, _ = compile_library(lib, opts=CompileOptions(or_branch_inhibition=False))
print(set(net.arcs) - set(loose.arcs))
