"""Acyclic directed mixed graphs (ADMGs) and the graph primitives used by identification."""

from __future__ import annotations

import re
from collections.abc import Iterable
from dataclasses import dataclass, field

__all__ = [
    "CausalDiagram",
    "CycleError",
    "GraphError",
    "GraphSyntaxError",
    "ancestors",
    "c_components",
    "cut_incoming",
    "cut_outgoing",
    "d_separated",
    "descendants",
    "parse_graph",
    "render_graph",
    "topological_order",
]


class GraphError(ValueError):
    """Raised for malformed graphs or unknown variables."""


class CycleError(GraphError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("directed cycle: " + " -> ".join(cycle))


class GraphSyntaxError(GraphError):
    def __init__(self, lineno: int, line: str, reason: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {reason}: {line.strip()!r}")


def _bi(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class CausalDiagram:
    """An immutable ADMG.

    ``directed`` holds ``(parent, child)`` pairs, ``bidirected`` holds sorted
    ``(a, b)`` pairs.  Acyclicity of the directed part is checked on construction.
    """

    nodes: frozenset[str]
    directed: frozenset[tuple[str, str]] = frozenset()
    bidirected: frozenset[tuple[str, str]] = frozenset()
    _parents: dict = field(default=None, init=False, repr=False, compare=False, hash=False)
    _children: dict = field(default=None, init=False, repr=False, compare=False, hash=False)
    _spouses: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        nodes = frozenset(self.nodes)
        directed = frozenset(self.directed)
        bidirected = frozenset(_bi(a, b) for a, b in self.bidirected)
        for n in nodes:
            if not isinstance(n, str) or not n:
                raise GraphError(f"invalid variable name {n!r}")
        for a, b in directed | bidirected:
            if a == b:
                raise GraphError(f"self-loop on {a}")
            for v in (a, b):
                if v not in nodes:
                    raise GraphError(f"edge endpoint {v!r} is not a node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "bidirected", bidirected)

        parents: dict[str, set[str]] = {n: set() for n in nodes}
        children: dict[str, set[str]] = {n: set() for n in nodes}
        spouses: dict[str, set[str]] = {n: set() for n in nodes}
        for a, b in directed:
            parents[b].add(a)
            children[a].add(b)
        for a, b in bidirected:
            spouses[a].add(b)
            spouses[b].add(a)
        object.__setattr__(self, "_parents", {k: frozenset(v) for k, v in parents.items()})
        object.__setattr__(self, "_children", {k: frozenset(v) for k, v in children.items()})
        object.__setattr__(self, "_spouses", {k: frozenset(v) for k, v in spouses.items()})
        cycle = _find_cycle(nodes, self._children)
        if cycle:
            raise CycleError(cycle)

    @classmethod
    def from_edges(
        cls,
        directed: Iterable[tuple[str, str]] = (),
        bidirected: Iterable[tuple[str, str]] = (),
        nodes: Iterable[str] = (),
    ) -> CausalDiagram:
        directed = list(directed)
        bidirected = list(bidirected)
        all_nodes = set(nodes)
        for a, b in directed + bidirected:
            all_nodes.update((a, b))
        return cls(frozenset(all_nodes), frozenset(directed), frozenset(bidirected))

    def parents(self, v: str) -> frozenset[str]:
        return self._parents[self._check(v)]

    def children(self, v: str) -> frozenset[str]:
        return self._children[self._check(v)]

    def spouses(self, v: str) -> frozenset[str]:
        """Nodes joined to ``v`` by a bidirected edge."""
        return self._spouses[self._check(v)]

    def _check(self, v: str) -> str:
        if v not in self.nodes:
            raise GraphError(f"unknown variable {v!r}")
        return v

    def check_vars(self, vs: Iterable[str]) -> frozenset[str]:
        vs = frozenset(vs)
        for v in sorted(vs):
            self._check(v)
        return vs

    def subgraph(self, keep: Iterable[str]) -> CausalDiagram:
        keep = self.check_vars(keep)
        return CausalDiagram(
            keep,
            frozenset((a, b) for a, b in self.directed if a in keep and b in keep),
            frozenset((a, b) for a, b in self.bidirected if a in keep and b in keep),
        )

    def __str__(self) -> str:
        return render_graph(self)


def _find_cycle(nodes, children) -> list[str] | None:
    white, grey, black = 0, 1, 2
    color = dict.fromkeys(nodes, white)
    for root in sorted(nodes):
        if color[root] != white:
            continue
        stack = [(root, iter(sorted(children[root])))]
        path = [root]
        color[root] = grey
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = black
                stack.pop()
                path.pop()
            elif color[nxt] == grey:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == white:
                color[nxt] = grey
                stack.append((nxt, iter(sorted(children[nxt]))))
                path.append(nxt)
    return None


def ancestors(G: CausalDiagram, S: Iterable[str]) -> frozenset[str]:
    """Reflexive ancestors of ``S`` along directed edges."""
    seen = set(G.check_vars(S))
    stack = list(seen)
    while stack:
        for p in G.parents(stack.pop()):
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return frozenset(seen)


def descendants(G: CausalDiagram, S: Iterable[str]) -> frozenset[str]:
    """Reflexive descendants of ``S`` along directed edges."""
    seen = set(G.check_vars(S))
    stack = list(seen)
    while stack:
        for c in G.children(stack.pop()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return frozenset(seen)


def c_components(G: CausalDiagram) -> list[frozenset[str]]:
    """Connected components of the bidirected skeleton, sorted by smallest member."""
    seen: set[str] = set()
    out = []
    for start in sorted(G.nodes):
        if start in seen:
            continue
        block = {start}
        stack = [start]
        while stack:
            for s in G.spouses(stack.pop()):
                if s not in block:
                    block.add(s)
                    stack.append(s)
        seen |= block
        out.append(frozenset(block))
    return out


def d_separated(G: CausalDiagram, A: Iterable[str], B: Iterable[str], Z: Iterable[str] = ()) -> bool:
    """Test ``A`` and ``B`` for d-separation given ``Z``.

    Bidirected edges are read as ``a <- H -> b`` with a fresh latent ``H``.  Uses the
    reachable-set ("Bayes ball") algorithm: explore (node, direction) states from ``A``
    and report separation iff no node of ``B`` is reached.
    """
    A = G.check_vars(A)
    B = G.check_vars(B)
    Z = G.check_vars(Z)
    if (A | B) & Z:
        raise GraphError("conditioning set must be disjoint from A and B")
    if A & B:
        return False
    if not A or not B:
        return True
    z_anc = ancestors(G, Z)
    # direction "up": arrived from a child (or start); "down": arrived along an arrowhead
    visited: set[tuple[str, str]] = set()
    stack = [(a, "up") for a in A]
    while stack:
        node, direction = stack.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node in B and node not in Z:
            return False
        if direction == "up":
            if node in Z:
                continue
            for p in G.parents(node):
                stack.append((p, "up"))
            for c in G.children(node):
                stack.append((c, "down"))
            for s in G.spouses(node):
                stack.append((s, "down"))
        else:
            if node not in Z:
                for c in G.children(node):
                    stack.append((c, "down"))
            if node in z_anc:
                # collider (arrowhead in) is open
                for p in G.parents(node):
                    stack.append((p, "up"))
                for s in G.spouses(node):
                    stack.append((s, "down"))
    return True


def cut_outgoing(G: CausalDiagram, S: Iterable[str]) -> CausalDiagram:
    """Remove directed edges leaving ``S``; bidirected edges are kept."""
    S = G.check_vars(S)
    return CausalDiagram(G.nodes, frozenset(e for e in G.directed if e[0] not in S), G.bidirected)


def cut_incoming(G: CausalDiagram, S: Iterable[str]) -> CausalDiagram:
    """Graph of the submodel ``do(S)``: edges into ``S`` and bidirected edges touching it go."""
    S = G.check_vars(S)
    return CausalDiagram(
        G.nodes,
        frozenset(e for e in G.directed if e[1] not in S),
        frozenset(e for e in G.bidirected if e[0] not in S and e[1] not in S),
    )


def topological_order(G: CausalDiagram) -> list[str]:
    """Kahn's algorithm with lexicographically smallest ready node first."""
    import heapq

    indeg = {n: len(G.parents(n)) for n in G.nodes}
    ready = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for c in G.children(n):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    return order


# -- text format -------------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_']*"
_DIRECTED = re.compile(rf"^({_NAME})\s*->\s*({_NAME})$")
_BIDIRECTED = re.compile(rf"^({_NAME})\s*<->\s*({_NAME})$")
_NODE = re.compile(rf"^node\s+({_NAME})$")


def parse_graph(text: str) -> CausalDiagram:
    """Parse the line-oriented graph format (``X -> Y``, ``X <-> Y``, ``node X``)."""
    nodes: list[str] = []
    directed: set[tuple[str, str]] = set()
    bidirected: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _BIDIRECTED.match(line):
            a, b = m.groups()
            if a == b:
                raise GraphSyntaxError(lineno, raw, "self-loop")
            key = _bi(a, b)
            if key in bidirected:
                raise GraphSyntaxError(lineno, raw, "duplicate edge")
            bidirected.add(key)
            nodes += [a, b]
        elif m := _DIRECTED.match(line):
            a, b = m.groups()
            if a == b:
                raise GraphSyntaxError(lineno, raw, "self-loop")
            if (a, b) in directed:
                raise GraphSyntaxError(lineno, raw, "duplicate edge")
            directed.add((a, b))
            nodes += [a, b]
        elif m := _NODE.match(line):
            nodes.append(m.group(1))
        else:
            raise GraphSyntaxError(lineno, raw, "syntax error")
    return CausalDiagram(frozenset(nodes), frozenset(directed), frozenset(bidirected))


def render_graph(G: CausalDiagram) -> str:
    lines = []
    touched = set()
    for a, b in sorted(G.directed):
        lines.append(f"{a} -> {b}")
        touched.update((a, b))
    for a, b in sorted(G.bidirected):
        lines.append(f"{a} <-> {b}")
        touched.update((a, b))
    lines += [f"node {n}" for n in sorted(G.nodes - touched)]
    return "\n".join(lines) + "\n"

