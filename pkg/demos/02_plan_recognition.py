# coding: utf-8

# # Watching another agent
#
# Agent A watches agent B during a bounding-overwatch patrol. Each thing A
# sees is entered as evidence and the goal beliefs are recomputed.
# The probabilities come from `fixtures/recon_overlay.json`. They were
# assessed by hand, so only the direction of each change means anything.

# %%

from pathlib import Path

from plan2bn import CptOverlay, Observation, compile_library, new_session, parse_plan_file

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

lib = parse_plan_file((FIXTURES / "recon.plan").read_text())
net, vmap = compile_library(lib, CptOverlay.load(FIXTURES / "recon_overlay.json"))

session = new_session(net, vmap)
print(session.report().to_table())
print(session.rank_goals())

# %% [markdown]
# Before anything is seen, dealing with an enemy looks likelier.
# Then B is seen arriving at its next via point. That observation is on a
# subgoal, not on a primitive action.

# %%

report = session.observe(Observation(1, "moved_to_next_viapt", "Achieved"))
print(report.to_table())
print("change:", {g: round(d["Active"], 3) for g, d in report.delta.items()})

# %% [markdown]
# Next the cover sensor fires.

# %%

report = session.observe(Observation(2, "ev_find_cover", "Performed"))
print(report.to_table())
print(session.rank_goals())

# %% [markdown]
# Suppose the cover reading was a mistake. Retracting it is the same as
# never having entered it.

# %%

print(session.retract(2).to_table())

# %% [markdown]
# ## A different afternoon
#
# This time B slips into some foliage, and A knows an enemy has been seen.
# The context condition is shared by both enemy-handling KAs, so the
# observation asks for every candidate.

# %%

watch = new_session(net, vmap, tracked=["dealt_with_enemy", "hide", "engage_enemy"])
watch.observe(Observation(1, "ev_move_into_foliage", "Performed"))
report = watch.observe(Observation(2, "enemy_detected", "True", all_candidates=True))
print(report.to_table())

hide = report.beliefs["hide"]
print("B is hiding or has hidden:", round(hide["Active"] + hide["Achieved"], 3))

# %% [markdown]
# Ambiguous sightings can go in as soft evidence. A likelihood vector over
# several candidate sensors is spread over all of them.

# %%

vague = new_session(net, vmap)
vague.observe(Observation(
    1, ("ev_move_toward_viapt", "ev_move_into_foliage", "ev_move_behind_object"),
    likelihood=(0.8, 0.2)))
print(vague.report().to_table())
