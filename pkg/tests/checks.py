"""Numeric checks shared by the oracle tests and the acceptance suite."""

import itertools

import numpy as np

from cfid.graph import c_components, cut_incoming, d_separated
from cfid.oracle import PStarFamily, interventional_family


def factorization_gap(M, x: str) -> float:
    """Largest |P_x(v) - prod_S P_{v minus S}(s)| over values of ``x`` and assignments ``v``.

    ``S`` ranges over the c-components of the diagram with ``x`` removed.
    """
    G = M.diagram
    fam = PStarFamily(M)
    blocks = [S for S in c_components(cut_incoming(G, {x})) if S != frozenset({x})]
    rest = sorted(G.nodes - {x})
    worst = 0.0
    for xv in M.domains[x]:
        for values in itertools.product(*(M.domains[v] for v in rest)):
            v = dict(zip(rest, values))
            lhs = fam.prob({x: xv}, v)
            rhs = 1.0
            for S in blocks:
                do = {w: val for w, val in {**v, x: xv}.items() if w not in S}
                rhs *= fam.prob(do, {w: v[w] for w in S})
            worst = max(worst, abs(float(lhs) - rhs))
    return worst


def independence_gap(M) -> tuple[float, int]:
    """Largest violation of P(a,b,z)P(z) = P(a,z)P(b,z) over d-separated single-node pairs.

    Returns the gap and the number of d-separated triples checked.
    """
    G = M.diagram
    names = sorted(G.nodes)
    joint = interventional_family(M, up_to=0).marginal({}, names)
    axes = {v: i for i, v in enumerate(names)}

    def marg(keep):
        return joint.sum(axis=tuple(i for v, i in axes.items() if v not in keep), keepdims=True)

    worst, n = 0.0, 0
    for a, b in itertools.combinations(names, 2):
        others = [v for v in names if v not in (a, b)]
        for r in range(len(others) + 1):
            for Z in itertools.combinations(others, r):
                if not d_separated(G, {a}, {b}, set(Z)):
                    continue
                n += 1
                Z = set(Z)
                gap = np.abs(marg({a, b} | Z) * marg(Z) - marg({a} | Z) * marg({b} | Z)).max()
                worst = max(worst, float(gap))
    return worst, n
