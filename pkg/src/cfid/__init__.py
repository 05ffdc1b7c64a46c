"""Counterfactual identification in acyclic directed mixed graphs."""

from .events import Bound, CfConjunction, CfEvent, CfVariable, Intervention, Query, parse_query
from .expr import evaluate, render, structurally_equal
from .graph import CausalDiagram, c_components, d_separated, parse_graph
from .identify import IdResult, id_star, idc_star, theorem5_witness
from .kernels import BACKEND
from .oracle import DiscreteSCM, counterfactual_prob, interventional_family, parity_pair, random_scm
from .worlds import INCONSISTENT, make_cg

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "INCONSISTENT",
    "Bound",
    "CausalDiagram",
    "CfConjunction",
    "CfEvent",
    "CfVariable",
    "DiscreteSCM",
    "IdResult",
    "Intervention",
    "Query",
    "c_components",
    "counterfactual_prob",
    "d_separated",
    "evaluate",
    "id_star",
    "idc_star",
    "interventional_family",
    "make_cg",
    "parity_pair",
    "parse_graph",
    "parse_query",
    "random_scm",
    "render",
    "structurally_equal",
    "theorem5_witness",
]
