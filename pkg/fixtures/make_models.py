"""Regenerate the model fixtures in this directory: ``python3 fixtures/make_models.py``."""

from fractions import Fraction
from pathlib import Path

from cfid.events import parse_query
from cfid.graph import CausalDiagram
from cfid.oracle import DiscreteSCM, Exogenous, Mechanism, parity_pair, search_agreeing_pair

HERE = Path(__file__).parent


def chain() -> DiscreteSCM:
    """X -> Y with P(X=1) = 1/4; Y copies X unless a 1/3-probability noise bit flips it."""
    G = CausalDiagram.from_edges([("X", "Y")])
    exo = (Exogenous("U_X", (Fraction(3, 4), Fraction(1, 4))), Exogenous("U_Y", (Fraction(2, 3), Fraction(1, 3))))
    mechs = {
        "X": Mechanism((), ("U_X",), (0, 1)),
        "Y": Mechanism(("X",), ("U_Y",), (0, 1, 1, 0)),
    }
    return DiscreteSCM(G, {"X": ("0", "1"), "Y": ("0", "1")}, exo, mechs)


def main():
    (HERE / "chain_scm.json").write_text(chain().to_json() + "\n")
    M1, M2, _ = parity_pair(1)
    (HERE / "parity_k1_m1.json").write_text(M1.to_json() + "\n")
    (HERE / "parity_k1_m2.json").write_text(M2.to_json() + "\n")
    G = CausalDiagram.from_edges([("X", "Y")])
    pair = search_agreeing_pair(G, parse_query("P(Y[X=0]=0, Y[X=1]=1)").gamma)
    for i, M in enumerate(pair, 1):
        (HERE / f"wgraph_m{i}.json").write_text(M.to_json() + "\n")


if __name__ == "__main__":
    main()
