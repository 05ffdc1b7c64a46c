"""Symbolic probability expressions over the experimental family P*.

Trees are built from :class:`Const`, :class:`PStar`, :class:`Product`, :class:`SumOver`
and :class:`Ratio`.  Values inside :class:`PStar` terms are literal tokens or
:class:`~cfid.events.Bound` summation indices.
"""

from __future__ import annotations

import functools
import itertools
import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Union

from .events import Bound, Value

__all__ = [
    "SCHEMA_VERSION",
    "Const",
    "EvaluationError",
    "Expression",
    "PStar",
    "Product",
    "Ratio",
    "SumOver",
    "canonicalize",
    "evaluate",
    "free_bounds",
    "from_json",
    "product",
    "render",
    "structurally_equal",
    "substitute",
    "to_json",
    "validate",
]

SCHEMA_VERSION = 1


def _pairs(mapping) -> tuple[tuple[str, Value], ...]:
    items = mapping.items() if isinstance(mapping, Mapping) else mapping
    return tuple(sorted(items, key=lambda kv: kv[0]))


@dataclass(frozen=True)
class Const:
    value: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError("constants are 0 or 1")


@dataclass(frozen=True)
class PStar:
    """``P_do(joint)``: the interventional distribution under ``do`` evaluated at ``joint``."""

    do: tuple[tuple[str, Value], ...]
    joint: tuple[tuple[str, Value], ...]

    def __post_init__(self):
        object.__setattr__(self, "do", _pairs(self.do))
        object.__setattr__(self, "joint", _pairs(self.joint))
        if not self.joint:
            raise ValueError("P* term needs at least one event")
        overlap = {k for k, _ in self.do} & {k for k, _ in self.joint}
        if overlap:
            raise ValueError(f"variables both intervened on and measured: {sorted(overlap)}")


@dataclass(frozen=True)
class Product:
    factors: tuple[Expression, ...]


@dataclass(frozen=True)
class SumOver:
    bound: tuple[Bound, ...]
    body: Expression


@dataclass(frozen=True)
class Ratio:
    num: Expression
    den: Expression


Expression = Union[Const, PStar, Product, SumOver, Ratio]


class EvaluationError(ValueError):
    pass


class MissingTable(EvaluationError):
    pass


class UnboundSymbol(EvaluationError):
    pass


class ZeroDenominator(EvaluationError):
    pass


def product(factors: Iterable[Expression]) -> Expression:
    fs = list(factors)
    if not fs:
        return Const(1)
    if len(fs) == 1:
        return fs[0]
    return Product(tuple(fs))


# -- traversal helpers -------------------------------------------------------


def free_bounds(e: Expression) -> set[Bound]:
    if isinstance(e, PStar):
        return {v for _, v in e.do + e.joint if isinstance(v, Bound)}
    if isinstance(e, Product):
        return set().union(*(free_bounds(f) for f in e.factors))
    if isinstance(e, SumOver):
        return free_bounds(e.body) - set(e.bound)
    if isinstance(e, Ratio):
        return free_bounds(e.num) | free_bounds(e.den)
    return set()


def substitute(e: Expression, mapping: Mapping[Value, Value], var: str | None = None) -> Expression:
    """Replace symbols (optionally only those attached to variable ``var``)."""

    def sub(pairs):
        return tuple((k, mapping.get(v, v) if var is None or k == var else v) for k, v in pairs)

    if isinstance(e, PStar):
        return PStar(sub(e.do), sub(e.joint))
    if isinstance(e, Product):
        return Product(tuple(substitute(f, mapping, var) for f in e.factors))
    if isinstance(e, SumOver):
        inner = {k: v for k, v in mapping.items() if k not in e.bound}
        return SumOver(e.bound, substitute(e.body, inner, var))
    if isinstance(e, Ratio):
        return Ratio(substitute(e.num, mapping, var), substitute(e.den, mapping, var))
    return e


def validate(e: Expression) -> None:
    """Check well-formedness: hygiene of binders and node-shape invariants."""
    seen: set[Bound] = set()

    def walk(x, scope: frozenset):
        if isinstance(x, Const):
            return
        if isinstance(x, PStar):
            for var, v in x.do + x.joint:
                if isinstance(v, Bound) and v not in scope:
                    raise ValueError(f"free bound symbol {v.name}")
                if isinstance(v, Bound) and v.base != var:
                    raise ValueError(f"symbol {v.name} ranges over {v.base} but is used for {var}")
        elif isinstance(x, Product):
            if len(x.factors) < 2:
                raise ValueError("product with fewer than two factors")
            for f in x.factors:
                if isinstance(f, Const):
                    raise ValueError("constant inside product")
                walk(f, scope)
        elif isinstance(x, SumOver):
            if not x.bound:
                raise ValueError("sum binds nothing")
            for b in x.bound:
                if b in seen:
                    raise ValueError(f"symbol {b.name} bound twice")
                seen.add(b)
            walk(x.body, scope | set(x.bound))
        elif isinstance(x, Ratio):
            walk(x.num, scope)
            walk(x.den, scope)
        else:
            raise TypeError(f"not an expression: {x!r}")

    walk(e, frozenset())


# -- canonical form ----------------------------------------------------------


def _shape_key(e: Expression, names: Mapping[Bound, str]) -> tuple:
    def vk(v):
        if isinstance(v, Bound):
            return (1, names.get(v, "?" + v.base))
        return (0, v)

    if isinstance(e, Const):
        return (0, e.value)
    if isinstance(e, PStar):
        return (1, tuple((k, vk(v)) for k, v in e.joint), tuple((k, vk(v)) for k, v in e.do))
    if isinstance(e, Product):
        return (2, tuple(_shape_key(f, names) for f in e.factors))
    if isinstance(e, SumOver):
        return (3, tuple(b.base for b in e.bound), _shape_key(e.body, names))
    return (4, _shape_key(e.num, names), _shape_key(e.den, names))


def _simplify(e: Expression) -> Expression:
    if isinstance(e, (Const, PStar)):
        return e
    if isinstance(e, Product):
        flat: list[Expression] = []
        for f in e.factors:
            f = _simplify(f)
            if isinstance(f, Product):
                flat.extend(f.factors)
            elif isinstance(f, Const):
                if f.value == 0:
                    return Const(0)
            else:
                flat.append(f)
        return product(flat)
    if isinstance(e, SumOver):
        body = _simplify(e.body)
        bound = tuple(e.bound)
        if isinstance(body, SumOver):
            bound, body = bound + body.bound, body.body
        if body == Const(0):
            return Const(0)
        return SumOver(bound, body)
    num, den = _simplify(e.num), _simplify(e.den)
    if num == Const(0) and den != Const(0):
        return Const(0)
    return Ratio(num, den)


def _order(e: Expression, names: Mapping[Bound, str]) -> Expression:
    if isinstance(e, Product):
        fs = [_order(f, names) for f in e.factors]
        return Product(tuple(sorted(fs, key=lambda f: _shape_key(f, names))))
    if isinstance(e, SumOver):
        return SumOver(e.bound, _order(e.body, names))
    if isinstance(e, Ratio):
        return Ratio(_order(e.num, names), _order(e.den, names))
    return e


def _rename(e: Expression) -> tuple[Expression, dict[Bound, str]]:
    """Rename binders w1, w2, ... in first-use order of a depth-first traversal."""
    names: dict[Bound, str] = {}
    counter = itertools.count(1)

    def visit(x):
        if isinstance(x, PStar):
            for _, v in x.joint + x.do:
                if isinstance(v, Bound) and v in pending and v not in names:
                    names[v] = f"w{next(counter)}"
        elif isinstance(x, Product):
            for f in x.factors:
                visit(f)
        elif isinstance(x, SumOver):
            pending.update(x.bound)
            visit(x.body)
            for b in x.bound:  # bound but unused
                if b not in names:
                    names[b] = f"w{next(counter)}"
        elif isinstance(x, Ratio):
            visit(x.num)
            visit(x.den)

    pending: set[Bound] = set()
    # Binder identity is per SumOver node; make them unique first so shared Bound
    # objects in num/den of a ratio get distinct names.
    e = _freshen(e)
    visit(e)
    mapping = {b: Bound(n, b.base) for b, n in names.items()}
    return _apply_binders(e, mapping), names


def _freshen(e: Expression) -> Expression:
    counter = itertools.count()

    def walk(x, env):
        if isinstance(x, PStar):
            f = lambda pairs: tuple((k, env.get(v, v)) for k, v in pairs)  # noqa: E731
            return PStar(f(x.do), f(x.joint))
        if isinstance(x, Product):
            return Product(tuple(walk(f, env) for f in x.factors))
        if isinstance(x, SumOver):
            new = tuple(Bound(f"%{next(counter)}", b.base) for b in x.bound)
            return SumOver(new, walk(x.body, {**env, **dict(zip(x.bound, new))}))
        if isinstance(x, Ratio):
            return Ratio(walk(x.num, env), walk(x.den, env))
        return x

    return walk(e, {})


def _apply_binders(e: Expression, mapping: Mapping[Bound, Bound]) -> Expression:
    if isinstance(e, PStar):
        f = lambda pairs: tuple((k, mapping.get(v, v)) for k, v in pairs)  # noqa: E731
        return PStar(f(e.do), f(e.joint))
    if isinstance(e, Product):
        return Product(tuple(_apply_binders(x, mapping) for x in e.factors))
    if isinstance(e, SumOver):
        bound = tuple(sorted((mapping.get(b, b) for b in e.bound), key=lambda b: _bkey(b.name)))
        return SumOver(bound, _apply_binders(e.body, mapping))
    if isinstance(e, Ratio):
        return Ratio(_apply_binders(e.num, mapping), _apply_binders(e.den, mapping))
    return e


def _bkey(name: str):
    return (len(name), name)


@functools.lru_cache(maxsize=1 << 16)
def canonicalize(e: Expression) -> Expression:
    """Flatten, drop unit factors, sort factors and rename binders deterministically."""
    e = _simplify(e)
    prev = None
    names: dict[Bound, str] = {}
    for _ in range(8):
        e = _order(e, names)
        e, _ = _rename(e)
        names = {b: b.name for b in _all_bound(e)}
        if e == prev:
            break
        prev = e
    return e


def _all_bound(e: Expression) -> set[Bound]:
    if isinstance(e, SumOver):
        return set(e.bound) | _all_bound(e.body)
    if isinstance(e, Product):
        return set().union(*(_all_bound(f) for f in e.factors))
    if isinstance(e, Ratio):
        return _all_bound(e.num) | _all_bound(e.den)
    return set()


def structurally_equal(a: Expression, b: Expression) -> bool:
    return canonicalize(a) == canonicalize(b)


# -- evaluation --------------------------------------------------------------


def evaluate(e: Expression, tables, binding: Mapping[str, str] | None = None, domains=None) -> float:
    """Evaluate ``e`` numerically.

    ``tables`` must offer ``prob(do: dict, joint: dict)`` (a :class:`~cfid.oracle.PStarFamily`)
    and ``domains`` (or pass ``domains`` explicitly) mapping each variable to its values.
    ``binding`` maps literal tokens to domain values; unmapped literals stand for themselves.
    """
    binding = dict(binding or {})
    domains = domains if domains is not None else getattr(tables, "domains", None)

    def val(v, env):
        if isinstance(v, Bound):
            if v not in env:
                raise UnboundSymbol(f"unbound symbol {v.name}")
            return env[v]
        return binding.get(v, v)

    def go(x, env):
        if isinstance(x, Const):
            return float(x.value)
        if isinstance(x, PStar):
            do = {k: val(v, env) for k, v in x.do}
            joint = {k: val(v, env) for k, v in x.joint}
            return float(tables.prob(do, joint))
        if isinstance(x, Product):
            out = 1.0
            for f in x.factors:
                out *= go(f, env)
                if out == 0.0:
                    break
            return out
        if isinstance(x, SumOver):
            if domains is None:
                raise EvaluationError("no domains available for summation")
            ranges = []
            for b in x.bound:
                if b.base not in domains:
                    raise EvaluationError(f"no domain for variable {b.base}")
                ranges.append(domains[b.base])
            total = 0.0
            for combo in itertools.product(*ranges):
                total += go(x.body, {**env, **dict(zip(x.bound, combo))})
            return total
        if isinstance(x, Ratio):
            den = go(x.den, env)
            if den == 0.0:
                raise ZeroDenominator("conditioning event has probability zero")
            return go(x.num, env) / den
        raise TypeError(f"not an expression: {x!r}")

    return go(e, {})


# -- rendering ---------------------------------------------------------------


def _tok(v: Value) -> str:
    return v.name if isinstance(v, Bound) else str(v)


def _reads_as(var: str, token: str) -> bool:
    """Whether ``token`` alone makes clear which variable it belongs to (``y0`` for ``Y``)."""
    return token.lower().startswith(var.lower())


def _entry(var: str, v: Value, show) -> str:
    shown = show(v)
    return shown if _reads_as(var, _tok(v)) else f"{var}={shown}"


def _text(e: Expression, top: bool = True) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, PStar):
        inside = ", ".join(_entry(k, v, _tok) for k, v in e.joint)
        if e.do:
            return f"P[{','.join(_entry(k, v, _tok) for k, v in e.do)}]({inside})"
        return f"P({inside})"
    if isinstance(e, Product):
        return " * ".join(_text(f, False) if not isinstance(f, (SumOver, Ratio)) else f"({_text(f)})" for f in e.factors)
    if isinstance(e, SumOver):
        s = f"sum_{{{','.join(b.name for b in e.bound)}}} {_text(e.body, False)}"
        return s if top else f"[{s}]"
    return f"({_text(e.num)}) / ({_text(e.den)})"


def _ltok(v: Value) -> str:
    if isinstance(v, Bound):
        name = v.name
        head = name.rstrip("0123456789")
        idx = name[len(head):]
        return f"{head}_{{{idx}}}" if idx and head else name
    return str(v)


def _latex(e: Expression) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, PStar):
        inside = ", ".join(_entry(k, v, _ltok) for k, v in e.joint)
        if e.do:
            return f"P_{{{','.join(_entry(k, v, _ltok) for k, v in e.do)}}}({inside})"
        return f"P({inside})"
    if isinstance(e, Product):
        parts = []
        for f in e.factors:
            s = _latex(f)
            parts.append(f"\\left({s}\\right)" if isinstance(f, SumOver) else s)
        return "".join(parts)
    if isinstance(e, SumOver):
        return f"\\sum_{{{','.join(_ltok(b) for b in e.bound)}}} {_latex(e.body)}"
    return f"\\frac{{{_latex(e.num)}}}{{{_latex(e.den)}}}"


def _sym_json(v: Value) -> dict:
    if isinstance(v, Bound):
        return {"bound": v.name}
    return {"literal": v}


def _to_obj(e: Expression) -> dict:
    if isinstance(e, Const):
        return {"kind": "const", "value": e.value}
    if isinstance(e, PStar):
        return {
            "kind": "pstar",
            "do": [{"var": k, "value": _sym_json(v)} for k, v in e.do],
            "joint": [{"var": k, "value": _sym_json(v)} for k, v in e.joint],
        }
    if isinstance(e, Product):
        return {"kind": "product", "factors": [_to_obj(f) for f in e.factors]}
    if isinstance(e, SumOver):
        return {
            "kind": "sum",
            "bind": [{"name": b.name, "var": b.base} for b in e.bound],
            "body": _to_obj(e.body),
        }
    return {"kind": "ratio", "num": _to_obj(e.num), "den": _to_obj(e.den)}


def to_json(e: Expression, indent: int | None = None) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, "expression": _to_obj(e)}, indent=indent, sort_keys=True)


def _from_obj(o: dict, scope: dict[str, Bound]) -> Expression:
    kind = o["kind"]
    if kind == "const":
        return Const(o["value"])
    if kind == "pstar":

        def sym(d):
            if "bound" in d:
                if d["bound"] not in scope:
                    raise ValueError(f"unbound symbol {d['bound']} in JSON expression")
                return scope[d["bound"]]
            return d["literal"]

        return PStar(
            tuple((x["var"], sym(x["value"])) for x in o["do"]),
            tuple((x["var"], sym(x["value"])) for x in o["joint"]),
        )
    if kind == "product":
        return Product(tuple(_from_obj(f, scope) for f in o["factors"]))
    if kind == "sum":
        bound = tuple(Bound(b["name"], b["var"]) for b in o["bind"])
        return SumOver(bound, _from_obj(o["body"], {**scope, **{b.name: b for b in bound}}))
    if kind == "ratio":
        return Ratio(_from_obj(o["num"], scope), _from_obj(o["den"], scope))
    raise ValueError(f"unknown expression kind {kind!r}")


def from_json(text: str) -> Expression:
    obj = json.loads(text)
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {obj.get('schema_version')!r}")
    return _from_obj(obj["expression"], {})


def render(e: Expression, format: str = "text") -> str:
    if format == "text":
        return _text(e)
    if format == "latex":
        return _latex(e)
    if format == "json":
        return to_json(e)
    raise ValueError(f"unknown format {format!r}")

