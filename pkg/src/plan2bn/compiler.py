"""Translate a validated plan library into a belief network.

Structure rules, one per plan construct:

* goal: every compiled KA gets a goal variable over ``GOAL_DOMAIN``.
* action sequence: each step becomes a child of the KA goal variable;
  consecutive steps are joined by temporal arcs.
* evidence: each primitive-like step gets a noisy sensor child.
* context: each context condition becomes a child of the KA goal variable.
* subgoal: an ``!goal`` step is itself a goal variable and the root of a
  fresh expansion of the KA(s) achieving that goal.
* OR / AND branch: alternatives compile as separate chains hanging off the
  step before the branch; OR alternatives inhibit each other through arcs
  between their first steps.
* several KAs for one goal: an abstract goal variable is the parent of each
  alternative's goal variable.
* several top-level goals: pairwise inhibitory arcs in declaration order.

Variable names are path-qualified: a step at body path ``(1, 0, 2)`` of the
KA instance rooted at ``perform_bound`` is ``perform_bound/1/0/2/<target>``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .bayes_net import ArcKind, BeliefNetwork, NetworkError
from .plan_model import (Branch, BranchKind, KA, PlanLibrary, Sequence, Step,
                         ValidationReport, validate_library)

GOAL_DOMAIN = ("Inactive", "Active", "Achieved")
ACTION_DOMAIN = ("Performed", "NotPerformed")
CONTEXT_DOMAIN = ("True", "False")

# P(successor=Performed | a temporal predecessor is not yet done)
TEMPORAL_LAG = 0.1
# fraction of a later top-level goal's Active mass kept while an earlier one is Active
GOAL_EXCLUSION_RETENTION = 0.1
DEFAULT_FALSE_POSITIVE = 0.05
DEFAULT_FALSE_NEGATIVE = 0.05

_DONE = {"Performed", "Achieved"}
_ENGAGED = {"Performed", "Active", "Achieved"}


class CompileError(ValueError):
    def __init__(self, message: str, report: ValidationReport | None = None):
        self.report = report
        super().__init__(message)


class OverlayError(CompileError):
    pass


class SchemaError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class CompileOptions:
    explicit_evidence_vars: bool = True
    temporal_arcs: bool = True
    or_branch_inhibition: bool = True
    top_level_inhibition: bool = True


@dataclass(frozen=True)
class SensorModel:
    false_positive_rate: float = DEFAULT_FALSE_POSITIVE
    false_negative_rate: float = DEFAULT_FALSE_NEGATIVE

    def __post_init__(self):
        for rate in (self.false_positive_rate, self.false_negative_rate):
            if not 0.0 <= rate <= 1.0:
                raise OverlayError("sensor rates must lie in [0, 1]")

    def row(self, action_value: str) -> list[float]:
        if action_value == "Performed":
            return [1.0 - self.false_negative_rate, self.false_negative_rate]
        return [self.false_positive_rate, 1.0 - self.false_positive_rate]


@dataclass
class CptOverlay:
    """User probabilities layered over the compiled defaults.

    ``entries`` maps a variable reference to ``{"cpt": [[...], ...]}`` (full
    row-major replacement) or ``{"rows": {"parent=outcome,...": [...]}}``
    (patch of named rows).  ``priors`` is for root variables only.  A
    ``sensor`` of ``None`` keeps whatever sensor rows the network already has.
    """

    entries: dict[str, dict] = field(default_factory=dict)
    priors: dict[str, list[float]] = field(default_factory=dict)
    sensor: SensorModel | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> CptOverlay:
        if not isinstance(doc, dict):
            raise OverlayError("overlay document must be a JSON object")
        entries, priors, sensor = {}, {}, None
        for key, entry in doc.items():
            if key == "$sensor":
                try:
                    sensor = SensorModel(**entry)
                except TypeError:
                    raise OverlayError("'$sensor' takes false_positive_rate and "
                                       "false_negative_rate") from None
                continue
            if key.startswith("$"):  # "$comment" and friends
                continue
            if not isinstance(entry, dict) or not entry.keys() <= {"prior", "rows", "cpt"}:
                raise OverlayError(f"overlay entry {key!r} must hold 'prior', "
                                   "'rows' or 'cpt'")
            if "prior" in entry:
                priors[key] = entry["prior"]
            rest = {k: v for k, v in entry.items() if k != "prior"}
            if rest:
                entries[key] = rest
        return cls(entries, priors, sensor)

    @classmethod
    def load(cls, path) -> CptOverlay:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class VariableMap:
    """Index from plan entities to network variable names.

    Goal-keyed and KA-keyed entries hold one variable per compiled
    occurrence; a subgoal used twice is expanded twice.
    """

    top_level: list[str] = field(default_factory=list)
    goal_vars: dict[str, list[str]] = field(default_factory=dict)
    ka_vars: dict[str, list[str]] = field(default_factory=dict)
    abstract_goal_vars: dict[str, list[str]] = field(default_factory=dict)
    action_vars: dict[tuple[str, tuple[int, ...]], str] = field(default_factory=dict)
    evidence_vars: dict[str, str] = field(default_factory=dict)
    context_vars: dict[tuple[str, str], str] = field(default_factory=dict)

    def goal_variables(self) -> set[str]:
        """Every variable over GOAL_DOMAIN."""
        out = {v for vs in self.goal_vars.values() for v in vs}
        out.update(v for vs in self.ka_vars.values() for v in vs)
        out.update(v for vs in self.abstract_goal_vars.values() for v in vs)
        return out

    def names(self) -> list[str]:
        seen: dict[str, None] = {}
        for group in (self.goal_variables(), self.action_vars.values(),
                      self.evidence_vars.values(), self.context_vars.values()):
            for v in sorted(group):
                seen[v] = None
        return list(seen)

    def role(self, name: str) -> str:
        if name in self.evidence_vars.values():
            return "evidence"
        if name in self.context_vars.values():
            return "context"
        if any(name in vs for vs in self.abstract_goal_vars.values()):
            return "abstract_goal"
        if name in self.goal_variables():
            return "goal"
        if name in self.action_vars.values():
            return "action"
        raise KeyError(name)

    def resolve(self, ref: str) -> list[str]:
        """Variables a user reference may denote.

        A reference is a full variable name, a goal name (with or without
        ``!``), a KA name, or the last path component of a variable (action
        target, ``ev_<target>`` or context condition).
        """
        ref = ref[1:] if ref.startswith("!") else ref
        names = self.names()
        if ref in names:
            return [ref]
        out: dict[str, None] = {}
        for v in self.goal_vars.get(ref, ()):
            out[v] = None
        for v in self.ka_vars.get(ref, ()):
            out[v] = None
        for v in names:
            if v.rsplit("/", 1)[-1] == ref:
                out[v] = None
        return list(out)

    def resolve_one(self, ref: str) -> str:
        found = self.resolve(ref)
        if not found:
            raise KeyError(f"{ref!r} does not name any network variable")
        if len(found) > 1:
            raise KeyError(f"{ref!r} is ambiguous: {found}")
        return found[0]

    def to_dict(self) -> dict:
        return {
            "top_level": list(self.top_level),
            "goal_vars": {k: list(v) for k, v in self.goal_vars.items()},
            "ka_vars": {k: list(v) for k, v in self.ka_vars.items()},
            "abstract_goal_vars": {k: list(v) for k, v in self.abstract_goal_vars.items()},
            "action_vars": [{"ka": ka, "path": list(path), "var": var}
                            for (ka, path), var in self.action_vars.items()],
            "evidence_vars": dict(self.evidence_vars),
            "context_vars": [{"ka": ka, "condition": cond, "var": var}
                             for (ka, cond), var in self.context_vars.items()],
        }

    @classmethod
    def from_dict(cls, doc: dict, path: str = "$.map") -> VariableMap:
        def need(d, key, typ, where):
            if not isinstance(d, dict) or key not in d:
                raise SchemaError(where, f"missing key {key!r}")
            if not isinstance(d[key], typ):
                raise SchemaError(f"{where}.{key}", f"expected {typ.__name__}")
            return d[key]

        def str_lists(key):
            d = need(doc, key, dict, path)
            for k, v in d.items():
                if not (isinstance(v, list) and all(isinstance(x, str) for x in v)):
                    raise SchemaError(f"{path}.{key}.{k}", "expected list of names")
            return {k: list(v) for k, v in d.items()}

        top = need(doc, "top_level", list, path)
        vmap = cls(top_level=list(top), goal_vars=str_lists("goal_vars"),
                   ka_vars=str_lists("ka_vars"),
                   abstract_goal_vars=str_lists("abstract_goal_vars"))
        for i, item in enumerate(need(doc, "action_vars", list, path)):
            where = f"{path}.action_vars[{i}]"
            vmap.action_vars[(need(item, "ka", str, where),
                              tuple(need(item, "path", list, where)))] = \
                need(item, "var", str, where)
        vmap.evidence_vars = dict(need(doc, "evidence_vars", dict, path))
        for i, item in enumerate(need(doc, "context_vars", list, path)):
            where = f"{path}.context_vars[{i}]"
            vmap.context_vars[(need(item, "ka", str, where),
                               need(item, "condition", str, where))] = \
                need(item, "var", str, where)
        return vmap


# ---------------------------------------------------------------------------

@dataclass
class _Meta:
    role: str
    join: str = "all"  # how several temporal predecessors combine: "all" | "any"


class _Builder:
    def __init__(self, lib: PlanLibrary, opts: CompileOptions):
        self.lib = lib
        self.opts = opts
        self.net = BeliefNetwork()
        self.vmap = VariableMap()
        self.meta: dict[str, _Meta] = {}

    def var(self, name: str, domain, role: str) -> str:
        try:
            self.net.add_variable(name, domain)
        except NetworkError as exc:
            raise CompileError(str(exc)) from None
        self.meta[name] = _Meta(role)
        return name

    def build(self) -> None:
        tops = [self.goal(g, None) for g in self.lib.top_level_goals]
        self.vmap.top_level = tops
        if self.opts.top_level_inhibition:
            for i, earlier in enumerate(tops):
                for later in tops[i + 1:]:
                    self.net.add_arc(earlier, later, ArcKind.INHIBITORY)

    def goal(self, goal: str, anchor: str | None) -> str:
        kas = self.lib.kas_for(goal)
        if len(kas) == 1:
            root = anchor or self.var(kas[0].name, GOAL_DOMAIN, "goal")
            self.ka_instance(kas[0], root)
        else:
            root = anchor or self.var(goal, GOAL_DOMAIN, "abstract_goal")
            self.vmap.abstract_goal_vars.setdefault(goal, []).append(root)
            for ka in kas:
                name = ka.name if anchor is None else f"{anchor}/{ka.name}"
                kvar = self.var(name, GOAL_DOMAIN, "goal")
                self.net.add_arc(root, kvar, ArcKind.SUBACTION)
                self.ka_instance(ka, kvar)
        self.vmap.goal_vars.setdefault(goal, []).append(root)
        return root

    def ka_instance(self, ka: KA, root: str) -> None:
        self.vmap.ka_vars.setdefault(ka.name, []).append(root)
        self.sequence(ka.body, root, (), [], "all")
        for cond in ka.context:
            cvar = self.var(f"{root}/{cond}", CONTEXT_DOMAIN, "context")
            self.net.add_arc(root, cvar, ArcKind.CONTEXT)
            self.vmap.context_vars[(root, cond)] = cvar

    def sequence(self, seq: Sequence, root: str, prefix: tuple[int, ...],
                 preds: list[str], join: str) -> tuple[list[str], list[str]]:
        """Compile ``seq``; return (its last step vars, its first step vars)."""
        firsts: list[str] | None = None
        for i, element in enumerate(seq.steps):
            path = prefix + (i,)
            if isinstance(element, Step):
                v = self.step(element, root, path, preds, join)
                heads, preds, join = [v], [v], "all"
            else:
                heads, preds, join = self.branch(element, root, path, preds, join)
            if firsts is None:
                firsts = heads
        return preds, firsts

    def branch(self, br: Branch, root: str, path: tuple[int, ...],
               preds: list[str], join: str):
        heads_per_alt, lasts = [], []
        for j, alt in enumerate(br.branches):
            alt_lasts, alt_heads = self.sequence(alt, root, path + (j,), preds, join)
            heads_per_alt.append(alt_heads)
            lasts.extend(alt_lasts)
        if br.kind is BranchKind.OR and self.opts.or_branch_inhibition:
            for a, earlier in enumerate(heads_per_alt):
                for later in heads_per_alt[a + 1:]:
                    for u in earlier:
                        for w in later:
                            self.net.add_arc(u, w, ArcKind.INHIBITORY)
        heads = [v for hs in heads_per_alt for v in hs]
        return heads, lasts, "any" if br.kind is BranchKind.OR else "all"

    def step(self, step: Step, root: str, path: tuple[int, ...],
             preds: list[str], join: str) -> str:
        stem = f"{root}/{'/'.join(map(str, path))}"
        if step.is_subgoal:
            v = self.var(f"{stem}/{step.target}", GOAL_DOMAIN, "subgoal")
        else:
            v = self.var(f"{stem}/{step.target}", ACTION_DOMAIN, "action")
        self.meta[v].join = join
        self.net.add_arc(root, v, ArcKind.SUBACTION)
        if self.opts.temporal_arcs:
            for p in preds:
                self.net.add_arc(p, v, ArcKind.TEMPORAL)
        self.vmap.action_vars[(root, path)] = v
        if step.is_subgoal:
            self.goal(step.target, v)
        elif self.opts.explicit_evidence_vars:
            e = self.var(f"{stem}/ev_{step.target}", ACTION_DOMAIN, "evidence")
            self.net.add_arc(v, e, ArcKind.EVIDENCE)
            self.vmap.evidence_vars[v] = e
        return v

    # -- default probabilities ----------------------------------------------

    def fill_defaults(self, sensor: SensorModel) -> None:
        for name in self.net.variables:
            var = self.net[name]
            meta = self.meta[name]
            kinds = [self.net.arc_kind(p, name) for p in var.parents]
            rows = [default_row(meta.role, meta.join, var.domain,
                                list(zip(var.parents, kinds)), assignment,
                                sensor)
                    for assignment in self.net.parent_assignments(name)]
            self.net.set_cpt(name, rows)


def default_row(role: str, join: str, domain, parents, assignment,
                sensor: SensorModel) -> list[float]:
    """Default distribution of one CPT row.

    ``parents`` is a list of (parent name, ArcKind); ``assignment`` maps
    parent names to outcome labels.
    """
    n = len(domain)
    uniform = [1.0 / n] * n
    if role == "evidence":
        (action, _), = parents
        return sensor.row(assignment[action])
    if role == "context":
        (goal, _), = parents
        if assignment[goal] in ("Active", "Achieved"):
            return [1.0, 0.0]
        return uniform
    if role in ("action", "subgoal"):
        inhibitors = [p for p, k in parents if k is ArcKind.INHIBITORY]
        if any(assignment[p] in _ENGAGED for p in inhibitors):
            return [0.0, 1.0] if role == "action" else [1.0, 0.0, 0.0]
        temporal = [assignment[p] in _DONE for p, k in parents
                    if k is ArcKind.TEMPORAL]
        if role == "action" and temporal:
            enabled = any(temporal) if join == "any" else all(temporal)
            if not enabled:
                return [TEMPORAL_LAG, 1.0 - TEMPORAL_LAG]
        return uniform
    # goal or abstract goal: soft exclusion from earlier top-level goals
    row = np.array(uniform)
    for p, k in parents:
        if k is ArcKind.INHIBITORY and assignment[p] == "Active":
            moved = row[1] * (1.0 - GOAL_EXCLUSION_RETENTION)
            row[1] -= moved
            row[0] += moved
    return list(row / row.sum())


def _parse_row_key(net: BeliefNetwork, name: str, key: str) -> dict[str, str]:
    parents = net[name].parents
    assignment: dict[str, str] = {}
    for part in filter(None, (s.strip() for s in key.split(","))):
        ref, sep, label = part.partition("=")
        if not sep:
            raise OverlayError(f"row key {key!r} for {name!r}: expected "
                               "'parent=outcome'")
        ref = ref.strip()
        matches = [p for p in parents if p == ref or p.rsplit("/", 1)[-1] == ref]
        if len(matches) != 1:
            raise OverlayError(f"row key {key!r}: {ref!r} does not name exactly "
                               f"one parent of {name!r} (parents {list(parents)})")
        assignment[matches[0]] = label.strip()
    return assignment


def apply_overlay(net: BeliefNetwork, vmap: VariableMap,
                  overlay: CptOverlay | None) -> BeliefNetwork:
    """Return a frozen copy of ``net`` with the overlay applied."""
    out = net.copy()
    overlay = overlay or CptOverlay()
    try:
        if overlay.sensor is not None:
            for action, ev in vmap.evidence_vars.items():
                out.set_cpt(ev, [overlay.sensor.row(a) for a in ACTION_DOMAIN])
        for ref, prior in overlay.priors.items():
            name = _overlay_target(vmap, ref)
            if out[name].parents:
                raise OverlayError(f"prior given for {ref!r}, which has parents "
                                   f"{list(out[name].parents)}; use 'rows'")
            out.set_cpt(name, prior)
        for ref, entry in overlay.entries.items():
            name = _overlay_target(vmap, ref)
            if "cpt" in entry:
                out.set_cpt(name, entry["cpt"])
            for key, probs in entry.get("rows", {}).items():
                out.set_row(name, _parse_row_key(out, name, key), probs)
    except NetworkError as exc:
        raise OverlayError(f"bad overlay: {exc}") from None
    return out.freeze()


def _overlay_target(vmap: VariableMap, ref: str) -> str:
    try:
        return vmap.resolve_one(ref)
    except KeyError as exc:
        raise OverlayError(f"overlay: {exc.args[0]}") from None


def compile_library(lib: PlanLibrary, overlay: CptOverlay | None = None,
                    opts: CompileOptions | None = None
                    ) -> tuple[BeliefNetwork, VariableMap]:
    report = validate_library(lib)
    if report.errors:
        first = report.errors[0]
        raise CompileError(f"library does not validate: {first.code} at "
                           f"{first.location}: {first.message}", report)
    overlay = overlay or CptOverlay()
    builder = _Builder(lib, opts or CompileOptions())
    builder.build()
    builder.fill_defaults(overlay.sensor or SensorModel())
    return apply_overlay(builder.net, builder.vmap, overlay), builder.vmap


compile = compile_library


# ---------------------------------------------------------------------------
# JSON round trip

def dump_network(net: BeliefNetwork, vmap: VariableMap) -> str:
    doc = net.to_dict()
    doc["map"] = vmap.to_dict()
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def load_network(doc: str | bytes | dict[str, Any]) -> tuple[BeliefNetwork, VariableMap]:
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected an object")
    for key in ("variables", "arcs", "map"):
        if key not in doc:
            raise SchemaError("$", f"missing key {key!r}")
    if not isinstance(doc["variables"], list):
        raise SchemaError("$.variables", "expected a list")
    if not isinstance(doc["arcs"], list):
        raise SchemaError("$.arcs", "expected a list")

    net = BeliefNetwork()
    for i, v in enumerate(doc["variables"]):
        where = f"$.variables[{i}]"
        if not isinstance(v, dict):
            raise SchemaError(where, "expected an object")
        for key, typ in (("name", str), ("domain", list), ("parents", list),
                         ("cpt", list)):
            if not isinstance(v.get(key), typ):
                raise SchemaError(f"{where}.{key}", f"expected {typ.__name__}")
        try:
            net.add_variable(v["name"], v["domain"])
        except NetworkError as exc:
            raise SchemaError(where, str(exc)) from None
    for i, a in enumerate(doc["arcs"]):
        where = f"$.arcs[{i}]"
        if not isinstance(a, dict):
            raise SchemaError(where, "expected an object")
        try:
            net.add_arc(a["from"], a["to"], ArcKind(a["kind"]))
        except KeyError as exc:
            raise SchemaError(where, f"missing key {exc.args[0]!r}") from None
        except ValueError as exc:
            raise SchemaError(where, str(exc)) from None
    for i, v in enumerate(doc["variables"]):
        where = f"$.variables[{i}]"
        if list(net[v["name"]].parents) != v["parents"]:
            raise SchemaError(f"{where}.parents", "does not match the arc list "
                              f"(arcs give {list(net[v['name']].parents)})")
        for r, row in enumerate(v["cpt"]):
            if not isinstance(row, list) or len(row) != len(v["domain"]):
                raise SchemaError(f"{where}.cpt[{r}]",
                                  f"expected {len(v['domain'])} probabilities")
        try:
            net.set_cpt(v["name"], v["cpt"])
        except (NetworkError, TypeError, ValueError) as exc:
            raise SchemaError(f"{where}.cpt", str(exc)) from None
    if not isinstance(doc["map"], dict):
        raise SchemaError("$.map", "expected an object")
    vmap = VariableMap.from_dict(doc["map"])
    for name in vmap.names():
        if name not in net:
            raise SchemaError("$.map", f"names unknown variable {name!r}")
    return net.freeze(), vmap
