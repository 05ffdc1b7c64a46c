"""Hypothesis strategies shared by the test modules."""

from hypothesis import strategies as st

from cfid import expr as ex
from cfid.events import Bound
from cfid.graph import CausalDiagram

NAMES = ["A", "B", "C", "D", "E", "F", "G", "H"]


@st.composite
def admgs(draw, min_nodes=1, max_nodes=6, bidirected=True):
    """Random ADMGs; directed edges only go forward in a drawn node order."""
    n = draw(st.integers(min_nodes, max_nodes))
    nodes = draw(st.permutations(NAMES[:n]))
    pairs = [(nodes[i], nodes[j]) for i in range(n) for j in range(i + 1, n)]
    directed = [p for p in pairs if draw(st.booleans())]
    bi = [p for p in pairs if bidirected and draw(st.integers(0, 3)) == 0]
    return CausalDiagram.from_edges(directed, bi, nodes=nodes)


def subsets(items):
    return st.sets(st.sampled_from(sorted(items))) if items else st.just(set())


VARS = ["X", "Y", "Z"]
TOKENS = ["0", "1"]


@st.composite
def expressions(draw, depth=3, scope=()):
    """Well-formed expression trees whose bound symbols are always in scope."""
    def value(var):
        return draw(st.sampled_from(TOKENS + [b for b in scope if b.base == var]))

    def pstar():
        vs = draw(st.permutations(VARS))
        k = draw(st.integers(0, 2))
        j = draw(st.integers(1, 3 - k))
        do = tuple((v, value(v)) for v in vs[:k])
        joint = tuple((v, value(v)) for v in vs[k:k + j])
        return ex.PStar(do, joint)

    kinds = ["const", "pstar"] + (["product", "sum", "ratio"] if depth > 0 else [])
    kind = draw(st.sampled_from(kinds))
    if kind == "const":
        return ex.Const(draw(st.sampled_from([0, 1])))
    if kind == "pstar":
        return pstar()
    if kind == "product":
        return ex.Product(tuple(draw(st.lists(expressions(depth - 1, scope), min_size=2, max_size=3))))
    if kind == "sum":
        var = draw(st.sampled_from(VARS))
        b = Bound(f"b{depth}{len(scope)}", var)
        return ex.SumOver((b,), draw(expressions(depth - 1, scope + (b,))))
    return ex.Ratio(draw(expressions(depth - 1, scope)), draw(expressions(depth - 1, scope)))
