"""Counterfactual identification: ID* for P(gamma) and IDC* for P(gamma | delta).

Both recursions work on the counterfactual graph produced by :func:`~cfid.worlds.make_cg`
and emit expressions over interventional distributions.  Non-identifiable queries raise
internally and surface as a ``fail`` result carrying a graphical witness.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

from . import expr as ex
from .events import Bound, CfConjunction, CfEvent, CfVariable, Intervention, Value, classify_self_events, value_key
from .graph import CausalDiagram, c_components, cut_outgoing, d_separated, descendants
from .worlds import INCONSISTENT, CounterfactualGraph, IndeterminateMerge, make_cg

__all__ = [
    "IdResult",
    "Theorem5Witness",
    "TraceStep",
    "Unidentifiable",
    "id_star",
    "idc_star",
    "theorem5_witness",
]

logger = logging.getLogger(__name__)

IDENTIFIED, ZERO, FAIL, UNDEFINED = "identified", "zero", "fail", "undefined"
PARENT_SET_TWICE, OBSERVED_INSIDE = "parent_set_twice", "observed_inside"


@dataclass(frozen=True)
class Theorem5Witness:
    """A c-component ``S`` in which parent variable ``X`` is held at two values.

    ``value_in_sub`` is the value ``X`` is set to as a parent of ``S``; ``conflicting_value``
    is the other value, either from another parent copy of ``X``
    (``parent_set_twice``) or from a copy of ``X`` inside ``S`` (``observed_inside``).
    ``None`` stands for an unobserved copy, whose value is left free.
    """

    component: frozenset[str]
    conflict_var: str
    value_in_sub: Value | None
    conflicting_value: Value | None
    conflict_kind: str
    nodes: tuple[str, str] = ()

    def describe(self) -> str:
        def show(v):
            return "<unobserved>" if v is None else str(v)

        where = "another parent of S" if self.conflict_kind == PARENT_SET_TWICE else "a node of S"
        return (
            f"c-component {{{', '.join(sorted(self.component))}}}: {self.conflict_var} is set to "
            f"{show(self.value_in_sub)} ({self.nodes[0]}) and to {show(self.conflicting_value)} "
            f"({self.nodes[1]}, {where})"
        )

    def to_dict(self) -> dict:
        return {
            "component": sorted(self.component),
            "conflict_var": self.conflict_var,
            "value_in_sub": None if self.value_in_sub is None else str(self.value_in_sub),
            "conflicting_value": None if self.conflicting_value is None else str(self.conflicting_value),
            "conflict_kind": self.conflict_kind,
            "nodes": list(self.nodes),
        }


class Unidentifiable(Exception):
    """Raised with a witness; ``conjunction`` is the input of the outermost failing ID* call."""

    def __init__(self, witness: Theorem5Witness):
        self.witness = witness
        self.conjunction: CfConjunction | None = None
        super().__init__(witness.describe())


@dataclass(frozen=True)
class TraceStep:
    depth: int
    rule: str
    detail: str

    def __str__(self):
        return f"{'  ' * self.depth}[{self.rule}] {self.detail}"


@dataclass(frozen=True)
class IdResult:
    verdict: str
    expression: ex.Expression | None = None
    witness: Theorem5Witness | None = None
    trace: tuple[TraceStep, ...] = ()
    failed_on: CfConjunction | None = None

    @property
    def identified(self) -> bool:
        return self.verdict == IDENTIFIED

    @property
    def is_zero(self) -> bool:
        return self.verdict == ZERO

    @property
    def failed(self) -> bool:
        return self.verdict == FAIL

    @property
    def undefined(self) -> bool:
        return self.verdict == UNDEFINED


@dataclass
class _Ctx:
    trace: list[TraceStep] = field(default_factory=list)
    counter: itertools.count = field(default_factory=itertools.count)

    def fresh(self, base: str) -> Bound:
        return Bound(f"s{next(self.counter)}", base)

    def log(self, depth: int, rule: str, detail: str):
        self.trace.append(TraceStep(depth, rule, detail))


class _Free:
    """Stand-in value of an unobserved node when comparing values."""

    __slots__ = ("node",)

    def __init__(self, node: str):
        self.node = node

    def __eq__(self, other):
        return isinstance(other, _Free) and other.node == self.node

    def __hash__(self):
        return hash(("free", self.node))


def _token(graph: CounterfactualGraph, node: str):
    v = graph.value(node)
    return _Free(node) if v is None else v


def _public(v):
    return None if isinstance(v, _Free) else v


def _tok_key(v):
    return (2, v.node, "") if isinstance(v, _Free) else value_key(v)


# -- graphical criterion -------------------------------------------------------


def _random_components(graph: CounterfactualGraph) -> list[frozenset[str]]:
    return c_components(graph.admg.subgraph(graph.random_nodes()))


def _component_conflict(graph: CounterfactualGraph, S: frozenset[str]) -> Theorem5Witness | None:
    by_var: dict[str, dict] = {}
    for n in sorted(S):
        for p in sorted(graph.admg.parents(n)):
            if p not in S:
                by_var.setdefault(graph.base[p], {}).setdefault(_token(graph, p), p)
    for var in sorted(by_var):
        tokens = sorted(by_var[var].items(), key=lambda kv: _tok_key(kv[0]))
        (x, px) = tokens[0]
        if len(tokens) > 1:
            x2, px2 = tokens[1]
            return Theorem5Witness(S, var, _public(x), _public(x2), PARENT_SET_TWICE, (px, px2))
        for m in sorted(S):
            if graph.base[m] == var and _token(graph, m) != x:
                return Theorem5Witness(S, var, _public(x), _public(_token(graph, m)), OBSERVED_INSIDE, (px, m))
    return None


def theorem5_witness(graph: CounterfactualGraph, gamma: CfConjunction | None = None) -> Theorem5Witness | None:
    """Find a c-component of the counterfactual graph whose parents are held inconsistently.

    ``graph`` must be the output of ``make_cg`` and is already restricted to ancestors
    of the rewritten conjunction.  Returns the first witness in canonical component
    order, or ``None``.
    """
    for S in _random_components(graph):
        w = _component_conflict(graph, S)
        if w is not None:
            return w
    return None


# -- ID* ---------------------------------------------------------------------------


def _pushed_subscript(graph: CounterfactualGraph, S: frozenset[str], node: str, values: dict):
    """Values of the nodes outside ``S`` that reach ``node`` through ``S`` only."""
    sub: dict[str, tuple[Value, str]] = {}
    seen, stack = {node}, [node]
    while stack:
        for p in sorted(graph.admg.parents(stack.pop())):
            if p in seen:
                continue
            seen.add(p)
            if p in S:
                stack.append(p)
                continue
            var, val = graph.base[p], values[p]
            if var in sub and sub[var][0] != val:
                other_val, other = sub[var]
                raise Unidentifiable(Theorem5Witness(S, var, other_val, val, PARENT_SET_TWICE, (other, p)))
            sub[var] = (val, p)
    return Intervention.of({k: v for k, (v, _) in sub.items()})


def _single_component(graph: CounterfactualGraph, S: frozenset[str], ctx: _Ctx, depth: int) -> ex.Expression:
    set_values: dict[str, dict] = {}
    for n in sorted(S):
        for var, val in graph.subscript_map[n].items():
            set_values.setdefault(var, {}).setdefault(val, n)
    fixed_by_var = {}
    for n in graph.fixed_nodes():
        fixed_by_var.setdefault((graph.base[n], graph.value(n)), n)
    for var in sorted(set_values):
        vals = sorted(set_values[var], key=_tok_key)
        x = vals[0]
        src = fixed_by_var.get((var, x), set_values[var][x])
        if len(vals) > 1:
            other = fixed_by_var.get((var, vals[1]), set_values[var][vals[1]])
            w = Theorem5Witness(S, var, x, vals[1], PARENT_SET_TWICE, (src, other))
            ctx.log(depth, "ID* 8", "FAIL: " + w.describe())
            raise Unidentifiable(w)
        for m in sorted(S):
            if graph.base[m] == var and _token(graph, m) != x:
                w = Theorem5Witness(S, var, x, _public(_token(graph, m)), OBSERVED_INSIDE, (src, m))
                ctx.log(depth, "ID* 8", "FAIL: " + w.describe())
                raise Unidentifiable(w)
    joint: dict[str, Value] = {}
    for n in sorted(S):
        v = graph.value(n)
        if v is None:
            continue
        var = graph.base[n]
        if var in joint and joint[var] != v:
            raise AssertionError(f"two values for {var} in one c-component without a conflict")
        joint[var] = v
    do = {var: next(iter(vals)) for var, vals in set_values.items() if var not in joint}
    term = ex.PStar(tuple(do.items()), tuple(joint.items()))
    ctx.log(depth, "ID* 9", ex.render(term))
    return term


def _id_star(G: CausalDiagram, gamma: CfConjunction, ctx: _Ctx, depth: int) -> ex.Expression:
    try:
        return _id_star_body(G, gamma, ctx, depth)
    except Unidentifiable as fail:
        fail.conjunction = gamma
        raise


def _id_star_body(G: CausalDiagram, gamma: CfConjunction, ctx: _Ctx, depth: int) -> ex.Expression:
    ctx.log(depth, "ID*", f"P({gamma})")
    if not gamma:
        ctx.log(depth, "ID* 1", "empty conjunction: 1")
        return ex.Const(1)
    contradictions, tautologies = classify_self_events(gamma)
    if contradictions:
        e = min(contradictions, key=CfEvent.sort_key)
        ctx.log(depth, "ID* 2", f"{e} contradicts its own intervention: 0")
        return ex.Const(0)
    if tautologies:
        ctx.log(depth, "ID* 3", "drop " + ", ".join(str(e) for e in sorted(tautologies, key=CfEvent.sort_key)))
        return _id_star(G, gamma.without(*tautologies), ctx, depth)
    graph, rewritten = make_cg(G, gamma)
    ctx.log(depth, "ID* 4", f"make-cg: {len(graph.merges)} merges, P({rewritten})" if rewritten is not INCONSISTENT else "make-cg")
    if rewritten is INCONSISTENT:
        ctx.log(depth, "ID* 5", "inconsistent: 0")
        return ex.Const(0)
    if not rewritten:
        return ex.Const(1)
    components = _random_components(graph)
    if len(components) > 1:
        values: dict[str, Value] = {}
        summed: list[Bound] = []
        for n in sorted(graph.random_nodes()):
            v = graph.value(n)
            if v is None:
                v = ctx.fresh(graph.base[n])
                summed.append(v)
            values[n] = v
        for n in graph.fixed_nodes():
            values[n] = graph.value(n)
        ctx.log(
            depth,
            "ID* 6",
            f"{len(components)} c-components: "
            + " | ".join("{" + ", ".join(sorted(S)) + "}" for S in components)
            + (f"; sum over {', '.join(b.name for b in summed)}" if summed else ""),
        )
        factors = []
        for S in components:
            events = []
            for n in sorted(S):
                sub = _pushed_subscript(graph, S, n, values)
                events.append(CfEvent(CfVariable(graph.base[n], sub), values[n]))
            factors.append(_id_star(G, CfConjunction.of(events), ctx, depth + 1))
        body = ex.product(factors)
        return ex.SumOver(tuple(summed), body) if summed else body
    (S,) = components
    ctx.log(depth, "ID* 7", "single c-component {" + ", ".join(sorted(S)) + "}")
    return _single_component(graph, S, ctx, depth)


def _finish(expression: ex.Expression, trace) -> IdResult:
    e = ex.canonicalize(expression)
    if e == ex.Const(0):
        return IdResult(ZERO, e, trace=tuple(trace))
    ex.validate(e)
    return IdResult(IDENTIFIED, e, trace=tuple(trace))


def id_star(G: CausalDiagram, gamma: CfConjunction) -> IdResult:
    """Identify ``P(gamma)`` from the family of all interventional distributions."""
    ctx = _Ctx()
    try:
        expression = _id_star(G, gamma, ctx, 0)
    except Unidentifiable as fail:
        return IdResult(FAIL, witness=fail.witness, trace=tuple(ctx.trace), failed_on=fail.conjunction)
    return _finish(expression, ctx.trace)


# -- IDC* --------------------------------------------------------------------------


def _is_zero(e: ex.Expression) -> bool:
    return ex.canonicalize(e) == ex.Const(0)


def _try(G, gamma, ctx, depth):
    try:
        return _id_star(G, gamma, ctx, depth), None
    except Unidentifiable as fail:
        return None, fail
    except IndeterminateMerge:
        return None, None


def _add_subscript(e: CfEvent, var: str, value: Value) -> CfEvent | None:
    sub = e.var.sub
    if var in sub:
        return e if sub[var] == value else None
    return CfEvent(CfVariable(e.var.base, sub.union({var: value})), e.value)


def _idc_star(G: CausalDiagram, gamma: CfConjunction, delta: CfConjunction, ctx: _Ctx, depth: int):
    ctx.log(depth, "IDC*", f"P({gamma} | {delta})")
    if not delta:
        return _id_star(G, gamma, ctx, depth)
    delta_expr, delta_fail = _try(G, delta, ctx, depth + 1)
    if delta_expr is not None and _is_zero(delta_expr):
        ctx.log(depth, "IDC* 1", "P(delta) = 0: undefined")
        return UNDEFINED
    graph, joint = make_cg(G, gamma & delta)
    if joint is INCONSISTENT:
        ctx.log(depth, "IDC* 3", "inconsistent: 0")
        return ex.Const(0)
    gamma_p = CfConjunction.of(graph.rewrites[e] for e in gamma if graph.rewrites[e] is not None)
    delta_p = CfConjunction.of(graph.rewrites[e] for e in delta if graph.rewrites[e] is not None)
    gamma_p = gamma_p.without(*delta_p.events)
    ctx.log(depth, "IDC* 2", f"make-cg: P({gamma_p} | {delta_p})")
    if not _rewrite_keeps_delta(G, delta, delta_p):
        # the joint rewriting used facts from gamma, so delta' is a different event than delta
        ctx.log(depth, "IDC* 2", "rewriting of the conditioning event depends on the query; skip to line 5")
        return _ratio(G, gamma, delta, delta_expr, delta_fail, ctx, depth)
    if not gamma_p:
        return ex.Const(1)
    if not delta_p:
        return _id_star(G, gamma_p, ctx, depth)

    gamma_nodes = {graph.event_node[e] for e in gamma_p}
    for y in delta_p:
        node = graph.event_node[y]
        if node in gamma_nodes:
            continue
        rest = delta_p.without(y)
        given = ({graph.event_node[e] for e in rest} | graph.fixed_nodes()) - gamma_nodes - {node}
        if not d_separated(cut_outgoing(graph.admg, {node}), {node}, gamma_nodes, given):
            continue
        below = descendants(graph.admg, {node}) - {node}
        var = y.var.base

        def push(conj):
            out = []
            for e in conj:
                new = _add_subscript(e, var, y.value) if graph.event_node[e] in below else e
                if new is None:
                    return None
                out.append(new)
            return CfConjunction.of(out)

        new_gamma, new_delta = push(gamma_p), push(rest)
        if new_gamma is None or new_delta is None:
            continue
        ctx.log(depth, "IDC* 4", f"{y} is separated from the query; move it into the subscripts")
        return _idc_star(G, new_gamma, new_delta, ctx, depth + 1)

    return _ratio(G, gamma, delta, delta_expr, delta_fail, ctx, depth)


def _rewrite_keeps_delta(G: CausalDiagram, delta: CfConjunction, delta_p: CfConjunction) -> bool:
    """True when rewriting ``delta`` on its own yields the same conjunction as the joint rewriting."""
    try:
        _, alone = make_cg(G, delta)
    except IndeterminateMerge:
        return False
    if alone is INCONSISTENT:
        return False
    return alone == delta_p


def _ratio(G, gamma, delta, delta_expr, delta_fail, ctx, depth):
    ctx.log(depth, "IDC* 5", f"P' = ID*({gamma & delta})")
    numerator = _id_star(G, gamma & delta, ctx, depth + 1)
    if _is_zero(numerator):
        return ex.Const(0)
    return ex.Ratio(numerator, _denominator(G, gamma, delta, numerator, delta_expr, delta_fail, ctx, depth))


def _denominator(G, gamma, delta, numerator, delta_expr, delta_fail, ctx, depth):
    """``P'(delta)``: the numerator with the query values summed out."""
    bound = {}
    generic = []
    for e in gamma:
        b = ctx.fresh(e.var.base)
        bound[b] = e.value
        generic.append(CfEvent(e.var, b))
    general, _ = _try(G, CfConjunction.of(generic) & delta, ctx, depth + 1)
    if general is not None and ex.structurally_equal(ex.substitute(general, bound), numerator):
        ctx.log(depth, "IDC* 5", "P'(delta) = sum over the query values of P'")
        return ex.SumOver(tuple(bound), general)
    if delta_expr is not None:
        ctx.log(depth, "IDC* 5", "P'(delta) taken from ID*(delta)")
        return delta_expr
    if general is not None:
        return ex.SumOver(tuple(bound), general)
    if delta_fail is not None:
        raise delta_fail
    raise IndeterminateMerge("cannot express the conditioning event")


def idc_star(G: CausalDiagram, gamma: CfConjunction, delta: CfConjunction = CfConjunction()) -> IdResult:
    """Identify ``P(gamma | delta)``; ``undefined`` when ``P(delta)`` is identically zero."""
    ctx = _Ctx()
    try:
        out = _idc_star(G, gamma, delta, ctx, 0)
    except Unidentifiable as fail:
        return IdResult(FAIL, witness=fail.witness, trace=tuple(ctx.trace), failed_on=fail.conjunction)
    if out is UNDEFINED:
        return IdResult(UNDEFINED, trace=tuple(ctx.trace))
    return _finish(out, ctx.trace)
