"""Random observe/retract scripts over the bounding-overwatch network."""
import numpy as np

from plan2bn.bayes_net import Evidence, posterior_by_elimination
from plan2bn.recognition import Observation, new_session

# Targets whose hard values can never make the evidence impossible on the
# shipped overlay: noisy sensors, context conditions and one subgoal.
HARD_POOL = [
    ("ev_move_toward_viapt", ("Performed", "NotPerformed")),
    ("ev_arrive_at_viapt", ("Performed", "NotPerformed")),
    ("ev_find_cover", ("Performed", "NotPerformed")),
    ("ev_find_concealing_foliage", ("Performed", "NotPerformed")),
    ("ev_move_into_foliage", ("Performed", "NotPerformed")),
    ("ev_move_behind_object", ("Performed", "NotPerformed")),
    ("ev_aim_at_enemy", ("Performed", "NotPerformed")),
    ("ev_fire_at_enemy", ("Performed", "NotPerformed")),
    ("hide/enemy_detected", ("True", "False")),
    ("engage_enemy/enemy_detected", ("True", "False")),
    ("moved_to_next_viapt", ("Inactive", "Active", "Achieved")),
]
SOFT_POOL = ["move_toward_viapt", "find_concealing_object", "fire_at_enemy"]


def random_script(rng, steps):
    """A list of ("observe", Observation) / ("retract", t) operations."""
    live, script, t = {}, [], 0
    for _ in range(steps):
        if live and rng.random() < 0.35:
            victim = sorted(live)[rng.integers(len(live))]
            script.append(("retract", victim))
            del live[victim]
            continue
        t += int(rng.integers(1, 3))
        used = set(live.values())
        if rng.random() < 0.3:
            target = SOFT_POOL[rng.integers(len(SOFT_POOL))]
            lik = rng.uniform(0.05, 1.0, size=2)
            obs = Observation(t, target, likelihood=tuple(lik))
        else:
            free = [p for p in HARD_POOL if p[0] not in used]
            if not free:
                continue
            target, values = free[rng.integers(len(free))]
            obs = Observation(t, target, value=values[rng.integers(len(values))])
        live[t] = target
        script.append(("observe", obs))
    return script


def run_script(net, vmap, script, tracked=None):
    """Apply ``script``; return (session, replayed session of the survivors)."""
    session = new_session(net, vmap, tracked)
    for op, arg in script:
        if op == "observe":
            session.observe(arg)
        else:
            session.retract(arg)
    replay = new_session(net, vmap, tracked)
    for obs, _ in session.history:
        replay.observe(obs)
    return session, replay


def max_gap(a, b):
    return max((abs(a.beliefs[g][s] - b.beliefs[g][s])
                for g in a.beliefs for s in a.beliefs[g]), default=0.0)


def direct_beliefs(net, vmap, observations, goals):
    """Posteriors given ``observations`` without going through a session."""
    hard, soft = {}, {}
    for obs in observations:
        refs = (obs.target,) if isinstance(obs.target, str) else obs.target
        for ref in refs:
            (var,) = vmap.resolve(ref)
            if obs.value is not None:
                hard[var] = obs.value
            else:
                soft[var] = soft.get(var, 1.0) * np.asarray(obs.likelihood)
    evidence = Evidence(hard, soft)
    return {g: posterior_by_elimination(net, evidence, g, reverse_ties=True)
            for g in goals}
