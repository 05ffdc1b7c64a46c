import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfid.graph import (
    CausalDiagram,
    CycleError,
    GraphError,
    GraphSyntaxError,
    ancestors,
    c_components,
    cut_incoming,
    cut_outgoing,
    d_separated,
    descendants,
    parse_graph,
    render_graph,
    topological_order,
)
from cfid.oracle import interventional_family, random_scm

from .strategies import admgs, subsets


# -- independent oracles -----------------------------------------------------------


def reach_oracle(G, S):
    """Reflexive ancestors by DFS over reversed directed edges."""
    rev = {v: [] for v in G.nodes}
    for a, b in G.directed:
        rev[b].append(a)
    seen, stack = set(S), list(S)
    while stack:
        for p in rev[stack.pop()]:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


def union_find_oracle(G):
    parent = {v: v for v in G.nodes}

    def find(v):
        while parent[v] != v:
            v = parent[v]
        return v

    for a, b in G.bidirected:
        parent[find(a)] = find(b)
    blocks = {}
    for v in G.nodes:
        blocks.setdefault(find(v), set()).add(v)
    return sorted((frozenset(b) for b in blocks.values()), key=sorted)


def dsep_oracle(G, A, B, Z):
    """Moralisation test on the ancestral graph, with each bidirected edge as a latent fork."""
    edges = set(G.directed)
    for a, b in G.bidirected:
        h = f"H[{a},{b}]"
        edges |= {(h, a), (h, b)}
    nodes = set(G.nodes) | {x for e in edges for x in e}
    parents = {v: {a for a, b in edges if b == v} for v in nodes}
    keep = set(A) | set(B) | set(Z)
    stack = list(keep)
    while stack:
        for p in parents[stack.pop()]:
            if p not in keep:
                keep.add(p)
                stack.append(p)
    nbrs = {v: set() for v in keep}
    for v in keep:
        ps = parents[v] & keep
        for p in ps:
            nbrs[v].add(p)
            nbrs[p].add(v)
        for p, q in itertools.combinations(ps, 2):
            nbrs[p].add(q)
            nbrs[q].add(p)
    seen = set(A)
    stack = list(A)
    while stack:
        for w in nbrs[stack.pop()]:
            if w in Z or w in seen:
                continue
            if w in B:
                return False
            seen.add(w)
            stack.append(w)
    return True


# -- construction ------------------------------------------------------------------


def test_cycle_is_rejected_with_the_cycle():
    with pytest.raises(CycleError) as err:
        parse_graph("X -> Y\nY -> X\n")
    assert set(err.value.cycle) >= {"X", "Y"}
    assert "X" in str(err.value) and "Y" in str(err.value)


def test_self_loops_and_unknown_endpoints():
    with pytest.raises(GraphError):
        CausalDiagram(frozenset({"X"}), frozenset({("X", "X")}))
    with pytest.raises(GraphError):
        CausalDiagram(frozenset({"X"}), frozenset(), frozenset({("X", "X")}))
    with pytest.raises(GraphError):
        CausalDiagram(frozenset({"X"}), frozenset({("X", "Y")}))


def test_bidirected_pairs_are_unordered():
    G1 = CausalDiagram.from_edges([], [("Y", "X")])
    G2 = CausalDiagram.from_edges([], [("X", "Y")])
    assert G1 == G2
    assert G1.spouses("X") == {"Y"}


def test_parse_counts_and_comments():
    G = parse_graph("# comment\nX -> Y   # trailing\n\nX <-> Y\nnode Z\n")
    assert G.nodes == {"X", "Y", "Z"}
    assert len(G.directed) == 1 and len(G.bidirected) == 1


@pytest.mark.parametrize(
    "text, lineno",
    [("X -> Y\nX -> Y\n", 2), ("X -> Y\nY <-> X\nX <-> Y\n", 3), ("X -> \n", 1), ("X => Y\n", 1), ("X -> Y\n1X -> Z\n", 2)],
)
def test_parse_errors_report_the_line(text, lineno):
    with pytest.raises(GraphSyntaxError) as err:
        parse_graph(text)
    assert err.value.lineno == lineno
    assert f"line {lineno}" in str(err.value)


def test_fig1a_fixture(fig1a):
    assert fig1a.nodes == {"X", "W", "Y", "D", "Z"}
    assert len(fig1a.directed) == 4 and len(fig1a.bidirected) == 1


@given(admgs())
def test_render_parse_round_trip(G):
    assert parse_graph(render_graph(G)) == G


# -- ancestry ----------------------------------------------------------------------


def test_chain_ancestors():
    G = parse_graph("X -> Y\nY -> Z\n")
    assert ancestors(G, {"Z"}) == {"X", "Y", "Z"}
    assert ancestors(G, set()) == set()
    assert descendants(G, {"X"}) == {"X", "Y", "Z"}


def test_ancestors_ignore_bidirected_edges():
    G = parse_graph("X <-> Y\n")
    assert ancestors(G, {"Y"}) == {"Y"}


def test_unknown_variable_is_named():
    G = parse_graph("X -> Y\n")
    with pytest.raises(GraphError, match="Q"):
        ancestors(G, {"Q"})


@given(admgs(max_nodes=8), st.data())
def test_ancestors_match_dfs_oracle(G, data):
    S = data.draw(subsets(G.nodes))
    assert ancestors(G, S) == reach_oracle(G, S)


# -- c-components ------------------------------------------------------------------


def test_no_bidirected_edges_gives_singletons():
    G = parse_graph("X -> Y\nY -> Z\n")
    assert c_components(G) == [frozenset({v}) for v in "XYZ"]


def test_parity_graph_components():
    G = parse_graph("X -> Y\nX -> Z\nY <-> W1\nW1 <-> Z\n")
    assert set(c_components(G)) == {frozenset({"Y", "W1", "Z"}), frozenset({"X"})}


@given(admgs(max_nodes=8))
def test_c_components_match_union_find(G):
    blocks = c_components(G)
    assert sorted(blocks, key=sorted) == union_find_oracle(G)
    assert set().union(*blocks) == G.nodes
    assert sum(len(b) for b in blocks) == len(G.nodes)


# -- d-separation ------------------------------------------------------------------


def test_collider():
    G = parse_graph("X -> C\nY -> C\n")
    assert d_separated(G, {"X"}, {"Y"}, set())
    assert not d_separated(G, {"X"}, {"Y"}, {"C"})


def test_latent_fork_is_open():
    G = parse_graph("X <-> Y\n")
    assert not d_separated(G, {"X"}, {"Y"}, set())


def test_conditioning_on_query_node_is_rejected():
    G = parse_graph("X -> Y\n")
    with pytest.raises(GraphError):
        d_separated(G, {"X"}, {"Y"}, {"X"})


@given(admgs(max_nodes=6), st.data())
def test_d_separation_matches_moralisation_oracle(G, data):
    nodes = sorted(G.nodes)
    A = data.draw(st.sets(st.sampled_from(nodes), min_size=1, max_size=2))
    rest = [v for v in nodes if v not in A]
    if not rest:
        return
    B = data.draw(st.sets(st.sampled_from(rest), min_size=1, max_size=2))
    Z = data.draw(subsets(set(rest) - B))
    assert d_separated(G, A, B, Z) == dsep_oracle(G, A, B, Z)


def _conditionally_independent(joint, names, A, B, Z, tol):
    """Check P(a,b|z) = P(a|z)P(b|z) on every stratum of a full joint array."""
    axes = {v: i for i, v in enumerate(names)}

    def marg(keep):
        drop = tuple(i for v, i in axes.items() if v not in keep)
        return joint.sum(axis=drop, keepdims=True)

    pabz, paz, pbz, pz = marg(A | B | Z), marg(A | Z), marg(B | Z), marg(Z)
    return np.all(np.abs(pabz * pz - paz * pbz) <= tol)


@settings(max_examples=25)
@given(admgs(min_nodes=3, max_nodes=5), st.integers(0, 10_000))
def test_d_separation_implies_independence_in_random_models(G, seed):
    M = random_scm(G, seed, exo_size=2)
    names = sorted(G.nodes)
    fam = interventional_family(M, up_to=0)
    joint = fam.marginal({}, names)
    for a, b in itertools.combinations(names, 2):
        others = [v for v in names if v not in (a, b)]
        for r in range(len(others) + 1):
            for Z in itertools.combinations(others, r):
                if d_separated(G, {a}, {b}, set(Z)):
                    assert _conditionally_independent(joint, names, {a}, {b}, set(Z), 1e-9)


# -- surgery and order ---------------------------------------------------------------


def test_cut_outgoing():
    G = parse_graph("X -> Y\n")
    H = cut_outgoing(G, {"X"})
    assert H.nodes == {"X", "Y"} and not H.directed


def test_cut_incoming_drops_latents_of_intervened_nodes():
    G = parse_graph("X -> Y\nY -> Z\nY <-> Z\n")
    H = cut_incoming(G, {"Y"})
    assert H.directed == {("Y", "Z")} and not H.bidirected


def test_cut_outgoing_keeps_bidirected():
    G = parse_graph("X -> Y\nX <-> Y\n")
    assert cut_outgoing(G, {"X"}).bidirected == G.bidirected


@given(admgs(), st.data())
def test_cuts_are_idempotent(G, data):
    S = data.draw(subsets(G.nodes))
    once = cut_incoming(G, S)
    assert cut_incoming(once, S) == once
    out = cut_outgoing(G, S)
    assert cut_outgoing(out, S) == out


@given(admgs(max_nodes=8))
def test_topological_order_respects_edges_and_is_deterministic(G):
    order = topological_order(G)
    pos = {v: i for i, v in enumerate(order)}
    assert sorted(order) == sorted(G.nodes)
    assert all(pos[a] < pos[b] for a, b in G.directed)
    assert order == topological_order(parse_graph(render_graph(G)))


def test_topological_order_breaks_ties_lexicographically():
    G = parse_graph("node C\nnode A\nnode B\nB -> A\n")
    assert topological_order(G) == ["B", "A", "C"]
