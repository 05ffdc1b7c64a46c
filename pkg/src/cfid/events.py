"""Counterfactual events, conjunctions and the query grammar.

A value is either a literal token (``str``) or a :class:`Bound` symbol introduced by a
summation.  Distinct literal tokens always denote distinct values; a bound symbol may
coincide with anything, so only token identity ever licenses "same value".
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from typing import Union

__all__ = [
    "Bound",
    "CfConjunction",
    "CfEvent",
    "CfVariable",
    "Intervention",
    "Query",
    "QuerySyntaxError",
    "Value",
    "canonicalize",
    "classify_self_events",
    "is_literal",
    "parse_query",
    "render_query",
    "value_key",
]


@dataclass(frozen=True, order=True)
class Bound:
    """A summation index ranging over the domain of ``base``."""

    name: str
    base: str

    def __str__(self) -> str:
        return self.name


Value = Union[str, Bound]


def is_literal(v: Value) -> bool:
    return isinstance(v, str)


def value_key(v: Value) -> tuple:
    return (0, v, "") if isinstance(v, str) else (1, v.name, v.base)


@dataclass(frozen=True)
class Intervention(Mapping):
    """An immutable, canonically ordered assignment ``{variable: value}``."""

    items_: tuple[tuple[str, Value], ...] = ()

    def __post_init__(self):
        seen = set()
        for k, _ in self.items_:
            if k in seen:
                raise ValueError(f"variable {k!r} assigned twice in one intervention")
            seen.add(k)
        object.__setattr__(self, "items_", tuple(sorted(self.items_, key=lambda kv: kv[0])))
        object.__setattr__(self, "_hash", hash(self.items_))

    @classmethod
    def of(cls, mapping: Mapping[str, Value] | Iterable[tuple[str, Value]] = ()) -> Intervention:
        if isinstance(mapping, Intervention):
            return mapping
        pairs = mapping.items() if isinstance(mapping, Mapping) else mapping
        return cls(tuple(pairs))

    def __getitem__(self, key: str) -> Value:
        for k, v in self.items_:
            if k == key:
                return v
        raise KeyError(key)

    def __iter__(self) -> Iterator[str]:
        return (k for k, _ in self.items_)

    def __len__(self) -> int:
        return len(self.items_)

    # The Mapping mixins go through __getitem__, which is linear; these are hot.
    def __contains__(self, key) -> bool:
        return any(k == key for k, _ in self.items_)

    def keys(self):
        return dict(self.items_).keys()

    def values(self):
        return [v for _, v in self.items_]

    def items(self):
        return self.items_

    def get(self, key, default=None):
        for k, v in self.items_:
            if k == key:
                return v
        return default

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if isinstance(other, Intervention):
            return self.items_ == other.items_
        return NotImplemented

    def union(self, other: Mapping[str, Value]) -> Intervention:
        merged = dict(self.items_)
        for k, v in other.items():
            if k in merged and merged[k] != v:
                raise ValueError(f"conflicting assignments to {k}")
            merged[k] = v
        return Intervention.of(merged)

    def restrict(self, keep: Iterable[str]) -> Intervention:
        keep = set(keep)
        return Intervention(tuple((k, v) for k, v in self.items_ if k in keep))

    def sort_key(self) -> tuple:
        return tuple((k, value_key(v)) for k, v in self.items_)

    def __str__(self) -> str:
        return ",".join(f"{k}={v}" for k, v in self.items_)

    def __repr__(self) -> str:
        return f"Intervention({{{str(self)}}})"


@dataclass(frozen=True)
class CfVariable:
    """``base`` evaluated in the submodel ``do(subscript)``."""

    base: str
    sub: Intervention = Intervention()

    def sort_key(self) -> tuple:
        return (self.base, len(self.sub), self.sub.sort_key())

    def __str__(self) -> str:
        return f"{self.base}[{self.sub}]" if self.sub else self.base


@dataclass(frozen=True)
class CfEvent:
    var: CfVariable
    value: Value

    @classmethod
    def of(cls, base: str, value: Value, sub: Mapping[str, Value] | None = None) -> CfEvent:
        return cls(CfVariable(base, Intervention.of(sub or {})), value)

    def sort_key(self) -> tuple:
        return (self.var.sort_key(), value_key(self.value))

    def __str__(self) -> str:
        return f"{self.var}={self.value}"


@dataclass(frozen=True)
class CfConjunction:
    """A canonically ordered, duplicate-free set of events."""

    events: tuple[CfEvent, ...] = ()

    def __post_init__(self):
        uniq = {e: None for e in self.events}
        object.__setattr__(self, "events", tuple(sorted(uniq, key=CfEvent.sort_key)))

    @classmethod
    def of(cls, events: Iterable[CfEvent]) -> CfConjunction:
        return cls(tuple(events))

    def __iter__(self) -> Iterator[CfEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def __bool__(self) -> bool:
        return bool(self.events)

    def __and__(self, other: CfConjunction) -> CfConjunction:
        return CfConjunction(self.events + other.events)

    def without(self, *drop: CfEvent) -> CfConjunction:
        return CfConjunction(tuple(e for e in self.events if e not in drop))

    def subscripts(self) -> set[Intervention]:
        """``sub(.)``: the distinct interventions mentioned."""
        return {e.var.sub for e in self.events}

    def variables(self) -> set[CfVariable]:
        return {e.var for e in self.events}

    def bases(self) -> set[str]:
        out = set()
        for e in self.events:
            out.add(e.var.base)
            out.update(e.var.sub)
        return out

    def __str__(self) -> str:
        return ", ".join(str(e) for e in self.events)


def canonicalize(c: CfConjunction | Iterable[CfEvent]) -> CfConjunction:
    return CfConjunction(tuple(c))


def classify_self_events(c: CfConjunction) -> tuple[set[CfEvent], set[CfEvent]]:
    """Split events whose own variable is in their subscript into (contradictions, tautologies).

    Only differing *literal* tokens count as a contradiction; an event whose value or
    subscript value is a bound symbol falls into neither set unless the tokens are identical.
    """
    contradictions, tautologies = set(), set()
    for e in c:
        base = e.var.base
        if base not in e.var.sub:
            continue
        forced = e.var.sub[base]
        if forced == e.value:
            tautologies.add(e)
        elif is_literal(forced) and is_literal(e.value):
            contradictions.add(e)
    return contradictions, tautologies


@dataclass(frozen=True)
class Query:
    gamma: CfConjunction
    delta: CfConjunction = CfConjunction()

    def __post_init__(self):
        if not self.gamma:
            raise ValueError("query needs at least one event before '|'")

    def __str__(self) -> str:
        return render_query(self)


# -- grammar -----------------------------------------------------------------


class QuerySyntaxError(ValueError):
    def __init__(self, text: str, col: int, reason: str):
        self.col = col
        super().__init__(f"column {col + 1}: {reason}\n  {text}\n  {' ' * col}^")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, reason: str):
        raise QuerySyntaxError(self.text, self.pos, reason)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, tok: str):
        self.skip_ws()
        if not self.text.startswith(tok, self.pos):
            self.error(f"expected {tok!r}")
        self.pos += len(tok)

    def token(self, what: str, first_alpha: bool) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] in "_'"):
            self.pos += 1
        tok = self.text[start:self.pos]
        if not tok or (first_alpha and not (tok[0].isalpha() or tok[0] == "_")):
            self.pos = start
            self.error(f"expected {what}")
        return tok

    def query(self) -> Query:
        self.expect("P")
        self.expect("(")
        gamma = self.events()
        delta: list[CfEvent] = []
        if self.peek() == "|":
            self.expect("|")
            delta = self.events()
        self.expect(")")
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("unexpected trailing input")
        return Query(CfConjunction.of(gamma), CfConjunction.of(delta))

    def events(self) -> list[CfEvent]:
        out = [self.event()]
        while self.peek() == ",":
            self.expect(",")
            out.append(self.event())
        return out

    def event(self) -> CfEvent:
        base = self.token("variable name", True)
        sub: dict[str, str] = {}
        if self.peek() == "[":
            self.expect("[")
            while True:
                at = self.pos
                var = self.token("variable name", True)
                if var in sub:
                    self.pos = at
                    self.skip_ws()
                    self.error(f"variable {var!r} repeated in subscript")
                self.expect("=")
                sub[var] = self.token("value", False)
                if self.peek() == ",":
                    self.expect(",")
                    continue
                self.expect("]")
                break
        self.expect("=")
        value = self.token("value", False)
        return CfEvent.of(base, value, sub)


def parse_query(text: str) -> Query:
    """Parse ``P(Y[X=x0]=y0 | X=x1, Z[D=d0]=z0, D=d0)`` style queries."""
    return _Parser(text).query()


def _render_events(c: CfConjunction) -> str:
    return ", ".join(str(e) for e in c)


def render_query(q: Query) -> str:
    if q.delta:
        return f"P({_render_events(q.gamma)} | {_render_events(q.delta)})"
    return f"P({_render_events(q.gamma)})"
