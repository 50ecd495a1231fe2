# coding: utf-8

# # Checking exact inference against brute force
#
# Variable elimination answers queries on the compiled networks. On small
# networks the answer can be checked by summing the whole joint table.

# %%

import time

import numpy as np

from plan2bn import BeliefNetwork, posterior_by_elimination, posterior_by_enumeration

rng = np.random.default_rng(0)

# %% [markdown]
# A small random network: each variable takes up to three earlier ones as
# parents, with Dirichlet-distributed rows.

# %%

net = BeliefNetwork()
names = [f"x{i}" for i in range(9)]
for name in names:
    net.add_variable(name, ["lo", "mid", "hi"][: rng.integers(2, 4)])
for j, child in enumerate(names[1:], start=1):
    for i in sorted(rng.permutation(j)[: rng.integers(0, 4)]):
        net.add_arc(names[i], child)
for name in names:
    var = net[name]
    net.set_cpt(name, rng.dirichlet(np.ones(var.card), size=len(var.rows)))

print({n: net[n].parents for n in names})

# %%

evidence = {names[-1]: "lo", names[2]: "mid" if net[names[2]].card > 2 else "lo"}
for query in names[:4]:
    fast = posterior_by_elimination(net, evidence, query)
    slow = posterior_by_enumeration(net, evidence, query)
    gap = max(abs(fast[s] - slow[s]) for s in fast)
    print(query, {s: round(p, 4) for s, p in fast.items()}, f"gap={gap:.1e}")

# %% [markdown]
# The brute-force sum grows with the product of all domain sizes, which is
# why it only serves as a check.

# %%

for query in ("x0", "x8"):
    t = time.perf_counter()
    posterior_by_enumeration(net, {}, query)
    slow = time.perf_counter() - t
    t = time.perf_counter()
    posterior_by_elimination(net, {}, query)
    print(query, f"enumeration {slow * 1e3:.1f} ms,",
          f"elimination {(time.perf_counter() - t) * 1e3:.1f} ms")
