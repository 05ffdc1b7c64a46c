"""Parallel-worlds graphs and counterfactual graphs (make-cg).

Every world is a copy of the diagram under one intervention; copies of a variable share
its exogenous parent, which shows up as bidirected edges across worlds.  Copies that are
provably the same random variable are merged parents-first, and the conjunction is
rewritten onto the merged nodes with minimal subscripts.
"""

from __future__ import annotations

import functools
import itertools
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import NamedTuple

from .events import CfConjunction, CfEvent, CfVariable, Intervention, Value, is_literal
from .graph import CausalDiagram, GraphError, ancestors, topological_order

__all__ = [
    "INCONSISTENT",
    "CounterfactualGraph",
    "IndeterminateMerge",
    "MergeRecord",
    "NodeLabel",
    "PwNode",
    "make_cg",
    "merge",
    "parallel_worlds",
    "same_by_lemma2",
]

FREE, FIXED, OBSERVED = "free", "fixed", "observed"


class _Inconsistent:
    def __repr__(self):
        return "INCONSISTENT"

    def __bool__(self):
        return False


INCONSISTENT = _Inconsistent()


class IndeterminateMerge(Exception):
    """Two identified copies carry different tokens and at least one is a bound symbol.

    Whether the conjunction is satisfiable then depends on the value the symbol takes,
    which a symbolic result cannot express.
    """


class PwNode(NamedTuple):
    """A copy of ``base`` in the world ``do(world)``."""

    base: str
    world: Intervention

    def sort_key(self):
        return (self.world.sort_key(), self.base)

    def __str__(self):
        return f"{self.base}[{self.world}]" if self.world else self.base


class NodeLabel(NamedTuple):
    status: str
    value: Value | None


@dataclass(frozen=True)
class MergeRecord:
    kept: PwNode
    dropped: PwNode
    reason: str


@dataclass(frozen=True)
class CounterfactualGraph:
    """A parallel-worlds graph, possibly with merged nodes.

    Node names are strings of the form ``Y`` or ``Y[X=x]`` (the subscript is the node's
    minimal subscript after merging, or its world before merging).
    """

    admg: CausalDiagram
    labels: dict[str, NodeLabel]
    base: dict[str, str]
    subscript_map: dict[str, Intervention]
    merge_map: dict[PwNode, str]
    merges: tuple[MergeRecord, ...] = ()
    worlds: tuple[Intervention, ...] = ()
    event_node: dict[CfEvent, str] = field(default_factory=dict)
    rewrites: dict[CfEvent, CfEvent | None] = field(default_factory=dict)

    @property
    def nodes(self) -> frozenset[str]:
        return self.admg.nodes

    def status(self, node: str) -> str:
        return self.labels[node].status

    def value(self, node: str) -> Value | None:
        return self.labels[node].value

    def is_fixed(self, node: str) -> bool:
        return self.labels[node].status == FIXED

    def random_nodes(self) -> frozenset[str]:
        return frozenset(n for n in self.admg.nodes if not self.is_fixed(n))

    def fixed_nodes(self) -> frozenset[str]:
        return frozenset(n for n in self.admg.nodes if self.is_fixed(n))

    def node_of(self, base: str, world: Intervention) -> str:
        return self.merge_map[PwNode(base, world)]

    def cf_variable(self, node: str) -> CfVariable:
        return CfVariable(self.base[node], self.subscript_map[node])

    def render(self) -> str:
        """Graph text format plus ``node X = value [observed|fixed]`` annotation lines."""
        lines = [line for line in str(self.admg).splitlines() if not line.startswith("node ")]
        for n in sorted(self.admg.nodes):
            lab = self.labels[n]
            if lab.status == FREE:
                lines.append(f"node {n}")
            else:
                lines.append(f"node {n} = {lab.value} [{lab.status}]")
        return "\n".join(lines) + "\n"


class _Work:
    """Mutable working copy of a parallel-worlds graph during merging."""

    def __init__(self, G: CausalDiagram, worlds: list[Intervention]):
        self.G = G
        self.worlds = worlds
        self.label: dict[PwNode, NodeLabel] = {}
        self.parents: dict[PwNode, dict[str, PwNode]] = {}
        self.rep: dict[PwNode, PwNode] = {}
        self.originals: list[PwNode] = []
        self.merges: list[MergeRecord] = []
        for w in worlds:
            for v in sorted(G.nodes):
                n = PwNode(v, w)
                self.originals.append(n)
                self.rep[n] = n
                if v in w:
                    self.label[n] = NodeLabel(FIXED, w[v])
                    self.parents[n] = {}
                else:
                    self.label[n] = NodeLabel(FREE, None)
                    self.parents[n] = {p: PwNode(p, w) for p in sorted(G.parents(v))}

    def find(self, n: PwNode) -> PwNode:
        while self.rep[n] != n:
            n = self.rep[n]
        return n

    def current(self) -> list[PwNode]:
        return sorted({self.find(n) for n in self.originals}, key=PwNode.sort_key)

    def observe(self, n: PwNode, value: Value) -> bool:
        """Attach an observed value; False on a literal conflict."""
        n = self.find(n)
        lab = self.label[n]
        if lab.value is None:
            self.label[n] = NodeLabel(OBSERVED, value)
            return True
        if lab.value == value:
            return True
        if is_literal(lab.value) and is_literal(value):
            return False
        raise IndeterminateMerge(f"{n}: {lab.value} vs {value}")

    def same_value(self, a: PwNode, b: PwNode) -> bool:
        va, vb = self.label[a].value, self.label[b].value
        return va is not None and va == vb

    def lemma2(self, a: PwNode, b: PwNode) -> str | None:
        """Return a justification if ``a`` and ``b`` are provably the same variable."""
        if a.base != b.base or FIXED in (self.label[a].status, self.label[b].status):
            return None
        reasons = []
        for p in sorted(self.parents[a]):
            pa, pb = self.find(self.parents[a][p]), self.find(self.parents[b][p])
            if pa == pb:
                reasons.append(f"{p}: shared")
            elif self.same_value(pa, pb):
                reasons.append(f"{p}: both {self.label[pa].status}/{self.label[pb].status} = {self.label[pa].value}")
            else:
                return None
        return "; ".join(reasons) if reasons else "no parents"

    def merge(self, a: PwNode, b: PwNode, reason: str) -> bool:
        """Merge ``b`` into ``a`` (``a`` is the preferred copy); False on a value conflict."""
        la, lb = self.label[a], self.label[b]
        if la.value is not None and lb.value is not None and la.value != lb.value:
            if is_literal(la.value) and is_literal(lb.value):
                return False
            raise IndeterminateMerge(f"{a} = {b} but {la.value} vs {lb.value}")
        if la.value is None and lb.value is not None:
            self.label[a] = lb
        self.rep[b] = a
        for n in self.parents:
            for p, q in self.parents[n].items():
                if q == b:
                    self.parents[n][p] = a
        self.merges.append(MergeRecord(a, b, reason))
        return True

    def run_merges(self) -> bool:
        """Merge duplicates in topological order of base variables; False if inconsistent."""
        for v in topological_order(self.G):
            while True:
                reps = [n for n in self.current() if n.base == v]
                merged = False
                for a, b in itertools.combinations(reps, 2):
                    if self.label[a].status == FIXED and self.label[b].status == FIXED:
                        reason = "same constant" if self.label[a].value == self.label[b].value else None
                    else:
                        reason = self.lemma2(a, b)
                    if reason is not None:
                        if not self.merge(a, b, reason):
                            return False
                        merged = True
                        break
                if not merged:
                    break
        return True

    def directed_edges(self) -> set[tuple[PwNode, PwNode]]:
        out = set()
        for n in self.current():
            for p in self.parents[n].values():
                out.add((self.find(p), n))
        return out

    def bidirected_edges(self) -> set[frozenset]:
        out = set()
        by_base: dict[str, list[PwNode]] = {}
        for n in self.originals:
            if n.base not in n.world:
                by_base.setdefault(n.base, []).append(n)
        pairs = []
        for copies in by_base.values():
            pairs += itertools.combinations(copies, 2)
        for a, b in self.G.bidirected:
            pairs += itertools.product(by_base.get(a, []), by_base.get(b, []))
        for x, y in pairs:
            rx, ry = self.find(x), self.find(y)
            if rx != ry:
                out.add(frozenset((rx, ry)))
        return out

    def snapshot(self, naming: dict[PwNode, str] | None = None, keep: Iterable[PwNode] | None = None,
                 subscripts: dict[PwNode, Intervention] | None = None,
                 event_node: dict[CfEvent, str] | None = None,
                 rewrites: dict[CfEvent, CfEvent | None] | None = None) -> CounterfactualGraph:
        nodes = self.current() if keep is None else sorted(set(keep), key=PwNode.sort_key)
        keep_set = set(nodes)
        if naming is None:
            naming = {n: str(n) for n in nodes}
        if subscripts is None:
            subscripts = {n: n.world.restrict(self.G.nodes) for n in nodes}
        directed = {(naming[a], naming[b]) for a, b in self.directed_edges() if a in keep_set and b in keep_set}
        bidirected = {
            tuple(sorted(naming[x] for x in pair)) for pair in self.bidirected_edges() if pair <= keep_set
        }
        admg = CausalDiagram(frozenset(naming[n] for n in nodes), frozenset(directed), frozenset(bidirected))
        merge_map = {o: naming[self.find(o)] for o in self.originals if self.find(o) in keep_set}
        return CounterfactualGraph(
            admg=admg,
            labels={naming[n]: self.label[n] for n in nodes},
            base={naming[n]: n.base for n in nodes},
            subscript_map={naming[n]: subscripts[n] for n in nodes},
            merge_map=merge_map,
            merges=tuple(self.merges),
            worlds=tuple(self.worlds),
            event_node=dict(event_node or {}),
            rewrites=dict(rewrites or {}),
        )


def _worlds_of(q: CfConjunction, extra: Iterable[Intervention] = ()) -> list[Intervention]:
    ws = {e.var.sub for e in q} | set(extra)
    return sorted(ws, key=Intervention.sort_key)


def _setup(G: CausalDiagram, q: CfConjunction, extra_worlds=()) -> tuple[_Work, bool]:
    G.check_vars(q.bases())
    work = _Work(G, _worlds_of(q, extra_worlds))
    ok = True
    for e in q:
        ok = work.observe(PwNode(e.var.base, e.var.sub), e.value) and ok
    return work, ok


def parallel_worlds(G: CausalDiagram, q: CfConjunction, extra_worlds: Iterable[Intervention] = ()) -> CounterfactualGraph:
    """The unmerged parallel-worlds graph of ``q``: one copy of ``G`` per mentioned world."""
    work, _ = _setup(G, q, extra_worlds)
    return work.snapshot()


def same_by_lemma2(graph: CounterfactualGraph, a: str, b: str) -> bool:
    """Whether nodes ``a`` and ``b`` of ``graph`` are provably the same random variable.

    Both must be non-fixed copies of the same base variable; every pair of corresponding
    parents must be one node, or carry the same value by intervention or observation.
    """
    if graph.base[a] != graph.base[b] or graph.is_fixed(a) or graph.is_fixed(b):
        return False
    pa = {graph.base[p]: p for p in graph.admg.parents(a)}
    pb = {graph.base[p]: p for p in graph.admg.parents(b)}
    if pa.keys() != pb.keys():
        return False
    for v, x in pa.items():
        y = pb[v]
        if x == y:
            continue
        vx, vy = graph.value(x), graph.value(y)
        if vx is None or vx != vy:
            return False
    return True


def merge(graph: CounterfactualGraph, a: str, b: str):
    """Merge nodes ``a`` and ``b`` of ``graph`` into one node.

    The copy whose subscript sorts first is kept, together with its parents; it gains the
    children and bidirected neighbours of the other copy.  An observed value carried by
    either copy is kept.  Returns the new graph, or :data:`INCONSISTENT` when both carry
    different literal values.
    """
    if not same_by_lemma2(graph, a, b):
        raise GraphError(f"{a} and {b} are not provably the same variable")
    keep, drop = sorted((a, b), key=lambda n: (graph.subscript_map[n].sort_key(), n))
    la, lb = graph.labels[keep], graph.labels[drop]
    label = la
    if la.value is not None and lb.value is not None and la.value != lb.value:
        if is_literal(la.value) and is_literal(lb.value):
            return INCONSISTENT
        raise IndeterminateMerge(f"{keep} = {drop} but {la.value} vs {lb.value}")
    if la.value is None:
        label = lb

    def rename(n: str) -> str:
        return keep if n == drop else n

    G = graph.admg
    directed = {(rename(x), rename(y)) for x, y in G.directed if y != drop}
    bidirected = {tuple(sorted((rename(x), rename(y)))) for x, y in G.bidirected}
    bidirected = {e for e in bidirected if e[0] != e[1]}
    admg = CausalDiagram(G.nodes - {drop}, frozenset(directed), frozenset(bidirected))
    labels = {n: lab for n, lab in graph.labels.items() if n != drop}
    labels[keep] = label
    kept_node = next(o for o, n in graph.merge_map.items() if n == keep)
    dropped_node = next(o for o, n in graph.merge_map.items() if n == drop)
    return CounterfactualGraph(
        admg=admg,
        labels=labels,
        base={n: v for n, v in graph.base.items() if n != drop},
        subscript_map={n: v for n, v in graph.subscript_map.items() if n != drop},
        merge_map={o: rename(n) for o, n in graph.merge_map.items()},
        merges=graph.merges + (MergeRecord(kept_node, dropped_node, "explicit merge"),),
        worlds=graph.worlds,
        event_node={e: rename(n) for e, n in graph.event_node.items()},
        rewrites=dict(graph.rewrites),
    )


@dataclass
class _Naming:
    names: dict[PwNode, str] = field(default_factory=dict)
    used: set[str] = field(default_factory=set)

    def assign(self, n: PwNode, base: str, sub: Intervention) -> str:
        name = f"{base}[{sub}]" if sub else base
        candidate, i = name, 2
        while candidate in self.used:
            candidate = f"{name}#{i}"
            i += 1
        self.used.add(candidate)
        self.names[n] = candidate
        return candidate


def _minimal_subscripts(work: _Work) -> dict[PwNode, Intervention]:
    """Subscript of each node: the fixed nodes among its ancestors."""
    nodes = work.current()
    parents = {n: {work.find(p) for p in work.parents[n].values()} for n in nodes}
    out = {}
    for n in nodes:
        seen, stack = {n}, [n]
        while stack:
            for p in parents[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        sub: dict[str, Value] = {}
        for a in seen:
            if work.label[a].status == FIXED:
                if a.base in sub and sub[a.base] != work.label[a].value:
                    raise GraphError(f"node {n} has conflicting fixed ancestors for {a.base}")
                sub[a.base] = work.label[a].value
        out[n] = Intervention.of(sub)
    return out


def make_cg(G: CausalDiagram, q: CfConjunction, extra_worlds: Iterable[Intervention] = ()):
    """Build the counterfactual graph of ``q``.

    Returns ``(graph, rewritten)`` where ``rewritten`` is the conjunction over merged
    nodes, or ``(graph, INCONSISTENT)`` when two events that denote the same variable
    demand different values.  The graph is restricted to ancestors of the rewritten
    conjunction; on inconsistency the unrestricted graph is returned.
    The result is memoised and must be treated as read-only.
    """
    return _make_cg(G, q, tuple(Intervention.of(w) for w in extra_worlds))


@functools.lru_cache(maxsize=1 << 16)
def _make_cg(G: CausalDiagram, q: CfConjunction, extra_worlds: tuple[Intervention, ...]):
    work, ok = _setup(G, q, extra_worlds)
    if not ok or not work.run_merges():
        return work.snapshot(), INCONSISTENT

    subs = _minimal_subscripts(work)
    naming = _Naming()
    for n in work.current():
        naming.assign(n, n.base, subs[n])

    events = {}
    rewrites: dict[CfEvent, CfEvent | None] = {}
    for e in q:
        n = work.find(PwNode(e.var.base, e.var.sub))
        if work.label[n].status == FIXED:
            rewrites[e] = None  # x_{x..} = x: always true
            continue
        new = CfEvent(CfVariable(n.base, subs[n]), e.value)
        events[new] = n
        rewrites[e] = new
    targets = set(events.values())

    parents = {n: {work.find(p) for p in work.parents[n].values()} for n in work.current()}
    keep, stack = set(targets), list(targets)
    while stack:
        for p in parents[stack.pop()]:
            if p not in keep:
                keep.add(p)
                stack.append(p)
    event_node = {e: naming.names[n] for e, n in events.items()}
    graph = work.snapshot(naming.names, keep, subs, event_node, rewrites)
    return graph, CfConjunction.of(events)


def ancestral_nodes(graph: CounterfactualGraph, nodes: Iterable[str]) -> frozenset[str]:
    return ancestors(graph.admg, nodes)
