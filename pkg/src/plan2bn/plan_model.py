"""Plan-language AST, a line-oriented textual syntax, and structural validation.

A library is a set of Knowledge Areas (KAs).  Each KA names the goal it
achieves (its purpose), the context conditions under which it applies and a
body made of sequences, AND/OR branches and leaf steps::

    # comment
    ka perform_bound achieves !bound_performed context enemy_detected {
        *move_to_viapt
        *find_cover
    }

    ka hide achieves !dealt_with_enemy {
        or { { *find_concealing_foliage } { *find_concealing_object } }
    }

A ``#`` directly followed by an identifier is the maintain sigil; any other
``#`` starts a comment that runs to the end of the line.
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Iterator, Union


class StepKind(enum.Enum):
    PRIMITIVE = "*"
    ACHIEVE = "!"
    MAINTAIN = "#"
    TEST = "?"
    WAIT = "^"
    ASSERT = "->"
    RETRACT = "<-"

    @property
    def sigil(self) -> str:
        return self.value


class BranchKind(enum.Enum):
    AND = "and"
    OR = "or"


@dataclass(frozen=True)
class Step:
    kind: StepKind
    target: str

    @property
    def is_subgoal(self) -> bool:
        return self.kind is StepKind.ACHIEVE


@dataclass(frozen=True)
class Sequence:
    steps: tuple[Element, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a sequence needs at least one element")


@dataclass(frozen=True)
class Branch:
    kind: BranchKind
    branches: tuple[Sequence, ...]

    def __post_init__(self):
        if len(self.branches) < 2:
            raise ValueError("a branch needs at least two alternatives")


Element = Union[Step, Branch]
Body = Sequence


@dataclass(frozen=True)
class KA:
    name: str
    purpose: str  # goal name without the leading "!"
    context: tuple[str, ...]
    body: Body

    def __post_init__(self):
        if not _IDENT.fullmatch(self.purpose or ""):
            raise ValueError(f"KA {self.name!r}: purpose must be an identifier")
        if len(set(self.context)) != len(self.context):
            raise ValueError(f"KA {self.name!r}: duplicate context condition")

    def steps(self) -> Iterator[tuple[tuple[int, ...], Step]]:
        """Yield ``(path, step)`` for every leaf step in body order."""
        yield from _walk(self.body, ())


def _walk(seq: Sequence, prefix: tuple[int, ...]):
    for i, element in enumerate(seq.steps):
        if isinstance(element, Step):
            yield prefix + (i,), element
        else:
            for j, branch in enumerate(element.branches):
                yield from _walk(branch, prefix + (i, j))


@dataclass(frozen=True)
class PlanLibrary:
    kas: tuple[KA, ...]
    top_level_goals: tuple[str, ...]

    def kas_for(self, goal: str) -> tuple[KA, ...]:
        return tuple(ka for ka in self.kas if ka.purpose == goal)

    def ka(self, name: str) -> KA:
        for ka in self.kas:
            if ka.name == name:
                return ka
        raise KeyError(name)

    @classmethod
    def from_kas(cls, kas) -> PlanLibrary:
        """Build a library, deriving the top-level goals.

        Top-level goals are the purposes never used as a subgoal by any KA,
        in order of first appearance.
        """
        kas = tuple(kas)
        names = [ka.name for ka in kas]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"duplicate KA name {dupes[0]!r}")
        used = {s.target for ka in kas for _, s in ka.steps() if s.is_subgoal}
        top: list[str] = []
        for ka in kas:
            if ka.purpose not in used and ka.purpose not in top:
                top.append(ka.purpose)
        return cls(kas, tuple(top))


# ---------------------------------------------------------------------------
# Parsing

class PlanSyntaxError(ValueError):
    """Raised for malformed plan text; carries a 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0,
                 expected: tuple[str, ...] = ()):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        self.reason = message
        where = f"line {line}, column {column}: " if line else ""
        hint = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"{where}{message}{hint}")


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_SIGILS = ("->", "<-", "*", "!", "#", "?", "^")


@dataclass
class _Token:
    kind: str  # "word", "sigil", "punct", "eof"
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        col = 0
        n = len(line)
        while col < n:
            ch = line[col]
            if ch.isspace():
                col += 1
                continue
            if ch == "#" and not _IDENT.match(line, col + 1):
                break
            m = _IDENT.match(line, col)
            if m:
                tokens.append(_Token("word", m.group(), lineno, col + 1))
                col = m.end()
                continue
            if ch in "{},":
                tokens.append(_Token("punct", ch, lineno, col + 1))
                col += 1
                continue
            for sigil in _SIGILS:
                if line.startswith(sigil, col):
                    tokens.append(_Token("sigil", sigil, lineno, col + 1))
                    col += len(sigil)
                    break
            else:
                raise PlanSyntaxError(f"unknown step-kind sigil {ch!r}",
                                      lineno, col + 1, _SIGILS)
    last = len(text.splitlines())
    tokens.append(_Token("eof", "", max(last, 1) + (1 if last else 0), 1))
    return tokens


_KIND_NAMES = {"word": "identifier", "sigil": "step sigil", "punct": "punctuation"}


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def _fail(self, expected: tuple[str, ...], what: str | None = None):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise PlanSyntaxError(what or f"unexpected {found}", t.line, t.column,
                              expected)

    def expect(self, kind: str, text: str | None = None) -> _Token:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            self._fail((repr(text) if text else _KIND_NAMES[kind],))
        self.pos += 1
        return t

    def accept(self, kind: str, text: str) -> bool:
        if self.tok.kind == kind and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def library(self) -> PlanLibrary:
        if self.tok.kind == "eof":
            raise PlanSyntaxError("library must contain at least one KA",
                                  self.tok.line, self.tok.column, ("'ka'",))
        kas: list[KA] = []
        seen: set[str] = set()
        while self.tok.kind != "eof":
            start = self.tok
            ka = self.ka()
            if ka.name in seen:
                raise PlanSyntaxError(f"duplicate KA name {ka.name!r}",
                                      start.line, start.column)
            seen.add(ka.name)
            kas.append(ka)
        return PlanLibrary.from_kas(kas)

    def ka(self) -> KA:
        self.expect("word", "ka")
        name = self.expect("word").text
        self.expect("word", "achieves")
        self.expect("sigil", "!")
        purpose = self.expect("word").text
        context: list[str] = []
        if self.accept("word", "context"):
            ctx_tok = self.tok
            context.append(self.expect("word").text)
            while self.accept("punct", ","):
                ctx_tok = self.tok
                cond = self.expect("word").text
                if cond in context:
                    raise PlanSyntaxError(
                        f"duplicate context condition {cond!r}",
                        ctx_tok.line, ctx_tok.column)
                context.append(cond)
        self.expect("punct", "{")
        body = self.body()
        self.expect("punct", "}")
        return KA(name, purpose, tuple(context), body)

    def body(self) -> Sequence:
        elements: list[Element] = []
        while True:
            t = self.tok
            if t.kind == "sigil":
                self.pos += 1
                kind = StepKind(t.text)
                elements.append(Step(kind, self.expect("word").text))
            elif t.kind == "word" and t.text in ("and", "or"):
                self.pos += 1
                elements.append(self.branch(BranchKind(t.text)))
            else:
                break
        if not elements:
            self._fail(_SIGILS + ("'and'", "'or'"), "empty body")
        return Sequence(tuple(elements))

    def branch(self, kind: BranchKind) -> Branch:
        self.expect("punct", "{")
        alternatives: list[Sequence] = []
        while self.accept("punct", "{"):
            alternatives.append(self.body())
            self.expect("punct", "}")
        if len(alternatives) < 2:
            self._fail(("'{'",), f"{kind.value} branch needs at least two "
                                 "alternatives")
        self.expect("punct", "}")
        return Branch(kind, tuple(alternatives))


def parse_plan_file(text: str | bytes) -> PlanLibrary:
    """Parse plan text into a :class:`PlanLibrary`.

    Raises :class:`PlanSyntaxError` on any malformed input, including bytes
    that are not valid UTF-8.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            head = bytes(text[:exc.start])
            line = head.count(b"\n") + 1
            column = len(head) - (head.rfind(b"\n") + 1) + 1
            raise PlanSyntaxError(f"input is not valid UTF-8 ({exc.reason} "
                                  f"at byte {exc.start})", line, column) from None
    return _Parser(text).library()


def pretty_print(lib: PlanLibrary, indent: str = "    ") -> str:
    out: list[str] = []

    def emit_body(seq: Sequence, depth: int):
        pad = indent * depth
        for element in seq.steps:
            if isinstance(element, Step):
                out.append(f"{pad}{element.kind.sigil}{element.target}")
            else:
                out.append(f"{pad}{element.kind.value} {{")
                for alt in element.branches:
                    out.append(f"{pad}{indent}{{")
                    emit_body(alt, depth + 2)
                    out.append(f"{pad}{indent}}}")
                out.append(f"{pad}}}")

    for i, ka in enumerate(lib.kas):
        if i:
            out.append("")
        header = f"ka {ka.name} achieves !{ka.purpose}"
        if ka.context:
            header += " context " + ", ".join(ka.context)
        out.append(header + " {")
        emit_body(ka.body, 1)
        out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Validation

RECURSION = "RECURSION"
UNRESOLVED_SUBGOAL = "UNRESOLVED_SUBGOAL"
NO_TOP_LEVEL_GOAL = "NO_TOP_LEVEL_GOAL"
NAME_CLASH = "NAME_CLASH"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    location: str
    message: str

    def to_dict(self) -> dict:
        return {"code": self.code, "location": self.location,
                "message": self.message}


@dataclass
class ValidationReport:
    errors: list[Diagnostic] = field(default_factory=list)
    warnings: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> list[str]:
        return [d.code for d in self.errors]

    def to_json(self) -> str:
        doc = {"errors": [d.to_dict() for d in self.errors],
               "warnings": [d.to_dict() for d in self.warnings]}
        return json.dumps(doc, indent=2)


def _goal_graph(lib: PlanLibrary) -> dict[str, list[str]]:
    graph: dict[str, list[str]] = {ka.purpose: [] for ka in lib.kas}
    for ka in lib.kas:
        succ = graph[ka.purpose]
        for _, step in ka.steps():
            # dangling subgoals are reported separately and cannot close a cycle
            if step.is_subgoal and step.target in graph and step.target not in succ:
                succ.append(step.target)
    return graph


def _goal_cycles(graph: dict[str, list[str]]) -> list[list[str]]:
    """One representative cycle per cyclic strongly connected component."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on_stack: set[str] = set()
    sccs: list[list[str]] = []

    def strongconnect(v: str):
        index[v] = low[v] = len(index)
        stack.append(v)
        on_stack.add(v)
        for w in graph.get(v, ()):
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            sccs.append(comp)

    for v in graph:
        if v not in index:
            strongconnect(v)

    order = {g: i for i, g in enumerate(graph)}
    cycles = []
    for comp in sccs:
        members = set(comp)
        start = min(comp, key=order.__getitem__)
        if len(comp) == 1 and start not in graph.get(start, ()):
            continue
        path = [start]
        if start not in graph.get(start, ()):
            # shortest way back to ``start`` inside the component
            prev: dict[str, str] = {start: start}
            frontier, last = [start], None
            while last is None:
                nxt = []
                for v in frontier:
                    for w in graph.get(v, ()):
                        if w in members and w not in prev:
                            prev[w] = v
                            nxt.append(w)
                            if last is None and start in graph.get(w, ()):
                                last = w
                frontier = nxt
            tail = [last]
            while prev[tail[-1]] != start:
                tail.append(prev[tail[-1]])
            path += reversed(tail)
        path.append(start)
        cycles.append(path)
    cycles.sort(key=lambda c: order[c[0]])
    return cycles


def validate_library(lib: PlanLibrary) -> ValidationReport:
    """Check a parsed library for recursion, dangling subgoals and name clashes."""
    report = ValidationReport()
    purposes = {ka.purpose for ka in lib.kas}

    for ka in lib.kas:
        for path, step in ka.steps():
            if step.is_subgoal and step.target not in purposes:
                report.errors.append(Diagnostic(
                    UNRESOLVED_SUBGOAL, f"{ka.name}:{_fmt_path(path)}",
                    f"no KA achieves !{step.target}"))

    for cycle in _goal_cycles(_goal_graph(lib)):
        involved = [ka.name for ka in lib.kas if ka.purpose in cycle[:-1]
                    and any(s.is_subgoal and s.target in cycle
                            for _, s in ka.steps())]
        chain = " -> ".join("!" + g for g in cycle)
        report.errors.append(Diagnostic(
            RECURSION, involved[0] if involved else cycle[0],
            f"recursive goal cycle {chain} through KA(s) {', '.join(involved)}"))

    if not lib.top_level_goals:
        report.errors.append(Diagnostic(
            NO_TOP_LEVEL_GOAL, "<library>",
            "every goal is used as a subgoal; no top-level goal remains"))

    # Goals with several KAs get an abstract variable named after the goal.
    ka_names = {ka.name for ka in lib.kas}
    for goal in sorted(purposes):
        if goal in ka_names and len(lib.kas_for(goal)) > 1:
            report.errors.append(Diagnostic(
                NAME_CLASH, goal,
                f"KA name {goal!r} collides with the abstract goal variable "
                f"for !{goal}"))

    return report


def _fmt_path(path: tuple[int, ...]) -> str:
    return "/".join(map(str, path))
