"""Discrete belief networks with exact inference.

Two inference routes are provided.  :func:`posterior_by_elimination` is the
production path (variable elimination over numpy factors with a min-degree
ordering).  :func:`posterior_by_enumeration` materialises and sums the full joint
and exists as a test oracle for small networks.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

ROW_TOL = 1e-9
ENUMERATION_LIMIT = 25


class NetworkError(ValueError):
    pass


class CycleError(NetworkError):
    def __init__(self, path: list[str]):
        self.path = path
        super().__init__("arc would create a directed cycle: "
                         + " -> ".join(path))


class EvidenceError(NetworkError):
    pass


class ZeroProbabilityEvidence(EvidenceError):
    """The evidence has probability zero under the network."""


class ArcKind(str, enum.Enum):
    SUBACTION = "subaction"
    TEMPORAL = "temporal"
    CONTEXT = "context"
    INHIBITORY = "inhibitory"
    EVIDENCE = "evidence"


class Arc(NamedTuple):
    parent: str
    child: str
    kind: ArcKind


@dataclass
class RandomVariable:
    """A discrete variable and its CPT.

    ``table`` has shape ``(*parent_cardinalities, len(domain))``; flattening
    the leading axes in C order gives the row-major row layout used on disk.
    """

    name: str
    domain: tuple[str, ...]
    parents: tuple[str, ...] = ()
    table: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.domain = tuple(self.domain)
        if self.table is None:
            self.table = np.full(len(self.domain), 1.0 / len(self.domain))

    @property
    def card(self) -> int:
        return len(self.domain)

    def index(self, label: str) -> int:
        try:
            return self.domain.index(label)
        except ValueError:
            raise NetworkError(f"{label!r} is not an outcome of {self.name!r} "
                               f"(domain {list(self.domain)})") from None

    @property
    def rows(self) -> np.ndarray:
        """CPT as a 2-D array, one row per parent assignment."""
        return self.table.reshape(-1, self.card)


class BeliefNetwork:
    """A DAG of :class:`RandomVariable` objects with kind-tagged arcs.

    Construction is single-writer; :meth:`freeze` makes the network
    read-only, after which it is safe to share between sessions and threads.
    """

    def __init__(self):
        self.variables: dict[str, RandomVariable] = {}
        self.arcs: list[Arc] = []
        self._children: dict[str, list[str]] = {}
        self.frozen = False

    def __contains__(self, name: str) -> bool:
        return name in self.variables

    def __getitem__(self, name: str) -> RandomVariable:
        try:
            return self.variables[name]
        except KeyError:
            raise NetworkError(f"unknown variable {name!r}") from None

    def __len__(self) -> int:
        return len(self.variables)

    def __eq__(self, other):
        if not isinstance(other, BeliefNetwork):
            return NotImplemented
        if list(self.variables) != list(other.variables):
            return False
        if sorted(self.arcs) != sorted(other.arcs):
            return False
        for name, var in self.variables.items():
            o = other.variables[name]
            if (var.domain != o.domain or var.parents != o.parents
                    or not np.array_equal(var.table, o.table)):
                return False
        return True

    def _check_mutable(self):
        if self.frozen:
            raise NetworkError("network is frozen")

    def freeze(self) -> BeliefNetwork:
        self.frozen = True
        for var in self.variables.values():
            var.table.setflags(write=False)
        return self

    def copy(self) -> BeliefNetwork:
        """Mutable deep copy."""
        net = BeliefNetwork()
        for var in self.variables.values():
            net.variables[var.name] = RandomVariable(
                var.name, var.domain, var.parents, var.table.copy())
            net._children[var.name] = list(self._children[var.name])
        net.arcs = list(self.arcs)
        return net

    def children(self, name: str) -> list[str]:
        return list(self._children[name])

    def parents(self, name: str) -> tuple[str, ...]:
        return self[name].parents

    def arc_kind(self, parent: str, child: str) -> ArcKind:
        for arc in self.arcs:
            if arc.parent == parent and arc.child == child:
                return arc.kind
        raise NetworkError(f"no arc {parent} -> {child}")

    # -- construction -----------------------------------------------------

    def add_variable(self, name: str, domain: Sequence[str]) -> RandomVariable:
        self._check_mutable()
        domain = tuple(domain)
        if name in self.variables:
            raise NetworkError(f"duplicate variable name {name!r}")
        if len(domain) < 2:
            raise NetworkError(f"variable {name!r} needs at least two outcomes")
        if len(set(domain)) != len(domain):
            raise NetworkError(f"variable {name!r} has repeated outcome labels")
        var = RandomVariable(name, domain)
        self.variables[name] = var
        self._children[name] = []
        return var

    def _path(self, src: str, dst: str) -> list[str] | None:
        stack = [(src, [src])]
        seen = {src}
        while stack:
            node, path = stack.pop()
            if node == dst:
                return path
            for child in self._children[node]:
                if child not in seen:
                    seen.add(child)
                    stack.append((child, path + [child]))
        return None

    def add_arc(self, parent: str, child: str,
                kind: ArcKind | str = ArcKind.SUBACTION) -> None:
        """Add ``parent -> child``; the child's rows are replicated over the
        new parent's outcomes so its conditional distribution is unchanged."""
        self._check_mutable()
        kind = ArcKind(kind)
        p, c = self[parent], self[child]
        if parent in c.parents:
            raise NetworkError(f"duplicate arc {parent} -> {child}")
        back = self._path(child, parent)
        if back is not None:
            raise CycleError([parent] + back)
        c.table = np.repeat(np.expand_dims(c.table, -2), p.card, axis=-2)
        c.parents = c.parents + (parent,)
        self._children[parent].append(child)
        self.arcs.append(Arc(parent, child, kind))

    def set_cpt(self, name: str, table) -> None:
        """Replace a CPT; accepts either the full tensor or 2-D rows."""
        self._check_mutable()
        var = self[name]
        shape = tuple(self[p].card for p in var.parents) + (var.card,)
        arr = np.asarray(table, dtype=float)
        if arr.size != int(np.prod(shape)):
            raise NetworkError(f"CPT for {name!r} must have shape {shape}, "
                               f"got {arr.shape}")
        arr = arr.reshape(shape)
        _check_rows(name, arr.reshape(-1, var.card))
        var.table = arr.copy()

    def row_index(self, name: str, assignment: Mapping[str, str]) -> tuple[int, ...]:
        var = self[name]
        if set(assignment) != set(var.parents):
            raise NetworkError(
                f"row for {name!r} must assign exactly its parents "
                f"{list(var.parents)}, got {sorted(assignment)}")
        return tuple(self[p].index(assignment[p]) for p in var.parents)

    def set_row(self, name: str, assignment: Mapping[str, str], probs) -> None:
        self._check_mutable()
        var = self[name]
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (var.card,):
            raise NetworkError(f"row for {name!r} needs {var.card} entries, "
                               f"got {probs.size}")
        _check_rows(name, probs[None, :])
        var.table[self.row_index(name, assignment)] = probs

    def parent_assignments(self, name: str) -> Iterable[dict[str, str]]:
        """All parent assignments of ``name`` in row-major storage order."""
        parents = self[name].parents
        for combo in itertools.product(*(self[p].domain for p in parents)):
            yield dict(zip(parents, combo))

    def topological_order(self) -> list[str]:
        indeg = {n: len(v.parents) for n, v in self.variables.items()}
        ready = [n for n in self.variables if indeg[n] == 0]
        out = []
        while ready:
            n = ready.pop(0)
            out.append(n)
            for c in self._children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        return out

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "variables": [
                {"name": v.name, "domain": list(v.domain),
                 "parents": list(v.parents), "cpt": v.rows.tolist()}
                for v in self.variables.values()
            ],
            "arcs": [{"from": a.parent, "to": a.child, "kind": a.kind.value}
                     for a in self.arcs],
        }

    def to_dot(self, name: str = "belief_network") -> str:
        return to_dot(self, name)


def _check_rows(name: str, rows: np.ndarray) -> None:
    if not np.all(np.isfinite(rows)) or rows.min() < 0 or rows.max() > 1:
        raise NetworkError(f"CPT for {name!r} has entries outside [0, 1]")
    bad = np.abs(rows.sum(axis=1) - 1.0) > ROW_TOL
    if bad.any():
        raise NetworkError(f"CPT row {int(np.argmax(bad))} of {name!r} does "
                           f"not sum to 1")


# ---------------------------------------------------------------------------
# DOT export

_ARC_STYLE = {
    ArcKind.SUBACTION: 'style=solid, penwidth=1',
    ArcKind.INHIBITORY: 'style=dashed, penwidth=1',
    ArcKind.TEMPORAL: 'style=dashed, penwidth=3',
    ArcKind.CONTEXT: 'style=solid, penwidth=3',
    ArcKind.EVIDENCE: 'style=dotted, penwidth=1',
}


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(net: BeliefNetwork, name: str = "belief_network") -> str:
    """Render the DAG; evidence variables get a heavy outline."""
    evidence_nodes = {a.child for a in net.arcs if a.kind is ArcKind.EVIDENCE}
    lines = [f"digraph {_q(name)} {{", "  rankdir=TB;",
             "  node [shape=ellipse, fontsize=10];"]
    for var in net.variables.values():
        attrs = [f"label={_q(var.name)}"]
        if var.name in evidence_nodes:
            attrs.append("penwidth=3")
        lines.append(f"  {_q(var.name)} [{', '.join(attrs)}];")
    for arc in net.arcs:
        lines.append(f"  {_q(arc.parent)} -> {_q(arc.child)} "
                     f"[{_ARC_STYLE[arc.kind]}, tooltip={_q(arc.kind.value)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Evidence

@dataclass
class Evidence:
    hard: dict[str, str] = field(default_factory=dict)
    soft: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.soft = {k: np.asarray(v, dtype=float) for k, v in self.soft.items()}

    def __bool__(self):
        return bool(self.hard or self.soft)

    def variables(self) -> set[str]:
        return set(self.hard) | set(self.soft)

    def validate(self, net: BeliefNetwork) -> None:
        both = set(self.hard) & set(self.soft)
        if both:
            raise EvidenceError(f"variable(s) {sorted(both)} carry both hard "
                                "and soft evidence")
        for name, label in self.hard.items():
            net[name].index(label)
        for name, lik in self.soft.items():
            var = net[name]
            if lik.shape != (var.card,):
                raise EvidenceError(f"likelihood for {name!r} needs "
                                    f"{var.card} entries")
            if not np.all(np.isfinite(lik)) or lik.min() < 0 or not lik.any():
                raise EvidenceError(f"likelihood for {name!r} must be "
                                    "non-negative and not all zero")


def _as_evidence(evidence) -> Evidence:
    if evidence is None:
        return Evidence()
    if isinstance(evidence, Evidence):
        return evidence
    return Evidence(hard=dict(evidence))


# ---------------------------------------------------------------------------
# Enumeration oracle

def posterior_by_enumeration(net: BeliefNetwork, evidence, query: str,
                             chunk_size: int = 1 << 20) -> dict[str, float]:
    """P(query | evidence) by summing every entry of the full joint.

    The joint is materialised in blocks of at most ``chunk_size`` entries:
    leading variables are fixed one assignment at a time and the remaining
    axes are filled by broadcasting each CPT into the block.
    """
    evidence = _as_evidence(evidence)
    evidence.validate(net)
    qvar = net[query]
    if len(net) > ENUMERATION_LIMIT:
        raise NetworkError(f"enumeration is limited to {ENUMERATION_LIMIT} "
                           f"variables, network has {len(net)}")
    names = list(net.variables)
    cards = [net[n].card for n in names]
    split = len(names)
    while split > 0 and int(np.prod(cards[split - 1:])) <= chunk_size:
        split -= 1
    lead, rest = names[:split], names[split:]
    rest_axis = {n: i for i, n in enumerate(rest)}
    rest_shape = [net[n].card for n in rest]

    def lead_range(n):
        if n in evidence.hard:
            return [net[n].index(evidence.hard[n])]
        return range(net[n].card)

    masks = []
    for n in rest:
        weights = np.ones(net[n].card)
        if n in evidence.hard:
            weights = np.zeros(net[n].card)
            weights[net[n].index(evidence.hard[n])] = 1.0
        if n in evidence.soft:
            weights = weights * evidence.soft[n]
        shape = [1] * len(rest)
        shape[rest_axis[n]] = net[n].card
        masks.append(weights.reshape(shape))

    totals = np.zeros(qvar.card)
    for fixed in itertools.product(*(lead_range(n) for n in lead)):
        at = dict(zip(lead, fixed))
        weight = 1.0
        for n in lead:
            if n in evidence.soft:
                weight *= evidence.soft[n][at[n]]
        block = np.full(rest_shape, weight)
        for var in net.variables.values():
            scope = var.parents + (var.name,)
            table = var.table[tuple(at[v] if v in at else slice(None)
                                    for v in scope)]
            free = [v for v in scope if v not in at]
            table = np.transpose(table, np.argsort([rest_axis[v] for v in free]))
            shape = [1] * len(rest)
            for v in free:
                shape[rest_axis[v]] = net[v].card
            block *= table.reshape(shape)
        for m in masks:
            block *= m
        if query in at:
            totals[at[query]] += block.sum()
        else:
            axes = tuple(i for i in range(len(rest)) if rest[i] != query)
            totals += block.sum(axis=axes)
    z = totals.sum()
    if not z > 0.0:
        raise ZeroProbabilityEvidence("evidence has zero probability")
    return {label: float(t / z) for label, t in zip(qvar.domain, totals)}


# ---------------------------------------------------------------------------
# Variable elimination

@dataclass
class Factor:
    scope: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        self.scope = tuple(self.scope)
        if self.values.ndim != len(self.scope):
            raise ValueError("factor values must have one axis per scope variable")

    def _aligned(self, scope: tuple[str, ...]) -> np.ndarray:
        present = [v for v in scope if v in self.scope]
        arr = np.transpose(self.values, [self.scope.index(v) for v in present])
        shape = [arr.shape[present.index(v)] if v in self.scope else 1
                 for v in scope]
        return arr.reshape(shape)

    def __mul__(self, other: Factor) -> Factor:
        scope = self.scope + tuple(v for v in other.scope if v not in self.scope)
        return Factor(scope, self._aligned(scope) * other._aligned(scope))

    def sum_out(self, name: str) -> Factor:
        axis = self.scope.index(name)
        return Factor(self.scope[:axis] + self.scope[axis + 1:],
                      self.values.sum(axis=axis))


def _relevant(net: BeliefNetwork, targets: set[str]) -> set[str]:
    """Ancestral closure of ``targets``; everything else is barren."""
    keep = set()
    stack = list(targets)
    while stack:
        n = stack.pop()
        if n not in keep:
            keep.add(n)
            stack.extend(net[n].parents)
    return keep


def elimination_order(scopes: Iterable[Iterable[str]], keep: Iterable[str] = (),
                      reverse_ties: bool = False) -> list[str]:
    """Greedy min-degree order over the interaction graph of ``scopes``.

    Ties go to the lexicographically smallest name (largest when
    ``reverse_ties``).  Variables in ``keep`` are never eliminated.
    """
    adj: dict[str, set[str]] = {}
    for scope in scopes:
        scope = list(scope)
        for v in scope:
            adj.setdefault(v, set()).update(u for u in scope if u != v)
    keep = set(keep)
    remaining = {v for v in adj if v not in keep}
    order = []
    while remaining:
        if reverse_ties:
            v = min(remaining, key=lambda n: (len(adj[n]), _Desc(n)))
        else:
            v = min(remaining, key=lambda n: (len(adj[n]), n))
        nbrs = adj.pop(v)
        for a in nbrs:
            adj[a].discard(v)
            adj[a].update(nbrs - {a})
        remaining.discard(v)
        order.append(v)
    return order


class _Desc(str):
    def __lt__(self, other):
        return str.__gt__(self, other)


def network_factors(net: BeliefNetwork, evidence: Evidence,
                    variables: Iterable[str] | None = None) -> list[Factor]:
    names = net.variables if variables is None else variables
    factors = []
    for name in names:
        var = net[name]
        factors.append(Factor(var.parents + (name,), np.asarray(var.table, float)))
    for name, label in evidence.hard.items():
        if variables is None or name in variables:
            ind = np.zeros(net[name].card)
            ind[net[name].index(label)] = 1.0
            factors.append(Factor((name,), ind))
    for name, lik in evidence.soft.items():
        if variables is None or name in variables:
            factors.append(Factor((name,), lik))
    return factors


def posterior_by_elimination(net: BeliefNetwork, evidence, query: str,
                             order: Sequence[str] | None = None,
                             reverse_ties: bool = False) -> dict[str, float]:
    """P(query | evidence) by variable elimination.

    ``order`` overrides the min-degree heuristic; it must list every
    relevant non-query variable exactly once (extra names are ignored).
    """
    evidence = _as_evidence(evidence)
    evidence.validate(net)
    qvar = net[query]
    relevant = _relevant(net, {query} | evidence.variables())
    factors = network_factors(net, evidence, [n for n in net.variables
                                              if n in relevant])
    if order is None:
        order = elimination_order((f.scope for f in factors), keep=[query],
                                  reverse_ties=reverse_ties)
    else:
        order = [v for v in order if v in relevant and v != query]
        missing = relevant - set(order) - {query}
        if missing:
            raise NetworkError(f"elimination order misses {sorted(missing)}")

    for v in order:
        touching = [f for f in factors if v in f.scope]
        if not touching:
            continue
        factors = [f for f in factors if v not in f.scope]
        prod = touching[0]
        for f in touching[1:]:
            prod = prod * f
        factors.append(prod.sum_out(v))

    result = np.ones(qvar.card)
    for f in factors:
        if f.scope == (query,):
            result = result * f.values
        elif f.scope:
            raise AssertionError(f"leftover scope {f.scope}")
        else:
            result = result * float(f.values)
    z = result.sum()
    if not z > 0.0:
        raise ZeroProbabilityEvidence("evidence has zero probability")
    result = result / z
    return {label: float(p) for label, p in zip(qvar.domain, result)}


def posterior(net: BeliefNetwork, evidence, query: str) -> dict[str, float]:
    return posterior_by_elimination(net, evidence, query)
