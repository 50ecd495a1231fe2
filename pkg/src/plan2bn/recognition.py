"""Incremental plan recognition over a compiled network.

A :class:`RecognitionSession` accumulates observations of the observed
agent, re-runs exact inference after each one and reports posterior beliefs
over a set of tracked goal variables.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .bayes_net import (BeliefNetwork, Evidence, NetworkError,
                        ZeroProbabilityEvidence, posterior_by_elimination)
from .compiler import GOAL_DOMAIN, VariableMap

UNKNOWN_GOAL = "UNKNOWN_GOAL"
UNKNOWN_TARGET = "UNKNOWN_TARGET"
AMBIGUOUS_TARGET = "AMBIGUOUS_TARGET"
BAD_VALUE = "BAD_VALUE"
CONFLICTING_EVIDENCE = "CONFLICTING_EVIDENCE"
ZERO_PROBABILITY = "ZERO_PROBABILITY"
STALE_INDEX = "STALE_INDEX"
UNKNOWN_INDEX = "UNKNOWN_INDEX"


class RecognitionError(ValueError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


@dataclass(frozen=True)
class Observation:
    """One observed event.

    ``target`` is a plan-entity reference (or several).  Give either a hard
    ``value`` or a soft ``likelihood`` vector.  When a reference matches
    several variables, e.g. a context condition shared by alternative KAs,
    set ``all_candidates`` to instantiate the evidence on each of them.
    """

    t: int
    target: str | tuple[str, ...]
    value: str | None = None
    likelihood: tuple[float, ...] | None = None
    all_candidates: bool = False

    def __post_init__(self):
        if (self.value is None) == (self.likelihood is None):
            raise ValueError("an observation needs exactly one of value / likelihood")
        if isinstance(self.target, list):
            object.__setattr__(self, "target", tuple(self.target))
        if self.likelihood is not None:
            object.__setattr__(self, "likelihood",
                               tuple(float(x) for x in self.likelihood))

    @property
    def targets(self) -> tuple[str, ...]:
        return (self.target,) if isinstance(self.target, str) else self.target

    @classmethod
    def from_dict(cls, d: dict) -> Observation:
        unknown = set(d) - {"t", "target", "value", "likelihood", "all_candidates"}
        if unknown:
            raise ValueError(f"unknown observation field(s) {sorted(unknown)}")
        if not isinstance(d.get("t"), int) or isinstance(d.get("t"), bool):
            raise ValueError("observation needs an integer 't'")
        target = d.get("target")
        if not (isinstance(target, str) or (isinstance(target, list) and target
                                            and all(isinstance(x, str) for x in target))):
            raise ValueError("observation needs a 'target' name or list of names")
        return cls(d["t"], target, d.get("value"), d.get("likelihood"),
                   bool(d.get("all_candidates", False)))

    def to_dict(self) -> dict:
        d: dict = {"t": self.t,
                   "target": self.target if isinstance(self.target, str)
                   else list(self.target)}
        if self.value is not None:
            d["value"] = self.value
        else:
            d["likelihood"] = list(self.likelihood)
        if self.all_candidates:
            d["all_candidates"] = True
        return d


def read_observations(source) -> list[Observation]:
    """Parse a JSON-lines observation stream (path or text)."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and Path(source).exists()):
        source = Path(source).read_text(encoding="utf-8")
    out = []
    for lineno, line in enumerate(source.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("//"):
            continue
        try:
            out.append(Observation.from_dict(json.loads(line)))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return out


@dataclass
class BeliefReport:
    t: int | None
    beliefs: dict[str, dict[str, float]]
    delta: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def argmax(self) -> dict[str, str]:
        return {g: max(dist, key=dist.__getitem__)
                for g, dist in self.beliefs.items()}

    def to_dict(self) -> dict:
        return {"t": self.t,
                "beliefs": {g: dict(d) for g, d in self.beliefs.items()},
                "argmax": self.argmax,
                "delta": {g: dict(d) for g, d in self.delta.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_table(self) -> str:
        header = ["goal", *GOAL_DOMAIN, "argmax"]
        rows = [[g, *(f"{d[s]:.4f}" for s in GOAL_DOMAIN), self.argmax[g]]
                for g, d in self.beliefs.items()]
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
        fmt = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
        title = "prior" if self.t is None else f"t={self.t}"
        return "\n".join([title, fmt(header)] + [fmt(r) for r in rows]) + "\n"


def _fold(net: BeliefNetwork, items: Iterable[tuple[str, Observation]]) -> Evidence:
    hard: dict[str, str] = {}
    soft: dict[str, np.ndarray] = {}
    for var, obs in items:
        if obs.value is not None:
            if var in hard and hard[var] != obs.value:
                raise RecognitionError(
                    CONFLICTING_EVIDENCE,
                    f"{var!r} already observed as {hard[var]!r}, "
                    f"cannot also be {obs.value!r}")
            hard[var] = obs.value
        else:
            lik = np.asarray(obs.likelihood, dtype=float)
            soft[var] = soft[var] * lik if var in soft else lik
    for var in list(soft):
        if var in hard:
            if soft[var][net[var].index(hard[var])] <= 0.0:
                raise RecognitionError(
                    ZERO_PROBABILITY,
                    f"likelihood for {var!r} is zero at its observed value")
            del soft[var]
    return Evidence(hard, soft)


class RecognitionSession:
    def __init__(self, net: BeliefNetwork, vmap: VariableMap,
                 tracked: Iterable[str] = ()):
        self.net = net
        self.map = vmap
        goals = vmap.goal_variables()
        self.tracked: list[str] = []
        for ref in tracked:
            found = [v for v in vmap.resolve(ref) if v in goals]
            if len(found) != 1:
                why = "is ambiguous" if found else "is not a goal variable"
                raise RecognitionError(UNKNOWN_GOAL, f"{ref!r} {why}")
            self.tracked.append(found[0])
        self.history: list[tuple[Observation, BeliefReport]] = []
        self._bound: list[list[str]] = []  # variables each observation hit
        self._last_t: int | None = None
        self.evidence = Evidence()
        self.prior = self._report(None, self.evidence, None)

    def report(self) -> BeliefReport:
        return self.history[-1][1] if self.history else self.prior

    def _bind(self, obs: Observation) -> list[str]:
        variables: list[str] = []
        for ref in obs.targets:
            found = self.map.resolve(ref)
            if not found:
                raise RecognitionError(UNKNOWN_TARGET, f"{ref!r} names no variable")
            if len(found) > 1 and not obs.all_candidates:
                raise RecognitionError(
                    AMBIGUOUS_TARGET, f"{ref!r} matches {found}; set "
                    "all_candidates to observe every candidate")
            variables.extend(v for v in found if v not in variables)
        for var in variables:
            rv = self.net[var]
            if obs.value is not None and obs.value not in rv.domain:
                raise RecognitionError(BAD_VALUE, f"{obs.value!r} is not an "
                                       f"outcome of {var!r} {list(rv.domain)}")
            if obs.likelihood is not None:
                lik = np.asarray(obs.likelihood)
                if lik.shape != (rv.card,) or lik.min() < 0 or not lik.any():
                    raise RecognitionError(
                        BAD_VALUE, f"likelihood for {var!r} needs {rv.card} "
                        "non-negative entries, not all zero")
        return variables

    def _posteriors(self, evidence: Evidence) -> dict[str, dict[str, float]]:
        return {g: posterior_by_elimination(self.net, evidence, g)
                for g in self.tracked}

    def _report(self, t, evidence: Evidence, previous: BeliefReport | None,
                probe: str | None = None) -> BeliefReport:
        try:
            beliefs = self._posteriors(evidence)
            if probe is not None and not beliefs:
                posterior_by_elimination(self.net, evidence, probe)
        except ZeroProbabilityEvidence as exc:
            raise RecognitionError(ZERO_PROBABILITY, str(exc)) from None
        delta = {}
        if previous is not None:
            delta = {g: {s: beliefs[g][s] - previous.beliefs[g][s] for s in d}
                     for g, d in beliefs.items()}
        return BeliefReport(t, beliefs, delta)

    def _items(self, observations, bound):
        return [(v, obs) for obs, vs in zip(observations, bound) for v in vs]

    def observe(self, obs: Observation) -> BeliefReport:
        if self._last_t is not None and obs.t <= self._last_t:
            raise RecognitionError(STALE_INDEX, f"t={obs.t} is not after "
                                   f"t={self._last_t}")
        variables = self._bind(obs)
        observations = [o for o, _ in self.history] + [obs]
        bound = self._bound + [variables]
        evidence = _fold(self.net, self._items(observations, bound))
        report = self._report(obs.t, evidence, self.report(), probe=variables[0])
        self.history.append((obs, report))
        self._bound.append(variables)
        self.evidence = evidence
        self._last_t = obs.t
        return report

    def retract(self, t: int) -> BeliefReport:
        """Drop the observation made at ``t`` and replay the rest."""
        idx = [i for i, (o, _) in enumerate(self.history) if o.t == t]
        if not idx:
            raise RecognitionError(UNKNOWN_INDEX, f"no observation at t={t}")
        keep = [o for i, (o, _) in enumerate(self.history) if i != idx[0]]
        last_t = self._last_t
        self.history, self._bound, self.evidence = [], [], Evidence()
        self._last_t = None
        for obs in keep:
            self.observe(obs)
        self._last_t = last_t
        return self.report()

    def rank_goals(self) -> list[tuple[str, float]]:
        """Tracked goals by P(Active) + P(Achieved), best first."""
        beliefs = self.report().beliefs
        scored = [(g, d["Active"] + d["Achieved"]) for g, d in beliefs.items()]
        return sorted(scored, key=lambda gs: (-gs[1], gs[0]))


def new_session(net: BeliefNetwork, vmap: VariableMap,
                tracked: Iterable[str] | None = None) -> RecognitionSession:
    """Start a session; ``tracked`` defaults to the top-level goal variables."""
    if tracked is None:
        tracked = vmap.top_level
    return RecognitionSession(net, vmap, tracked)
