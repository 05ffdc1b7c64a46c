"""Finite structural causal models and brute-force counterfactual semantics.

A :class:`DiscreteSCM` assigns each observable a finite domain and a table-driven
mechanism of its graph parents and attached exogenous variables.  Probabilities of
counterfactual conjunctions are computed by enumerating every joint exogenous state and
evaluating each mentioned submodel on it.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .events import CfConjunction, CfEvent, Intervention
from .graph import CausalDiagram, parse_graph, render_graph, topological_order

__all__ = [
    "BudgetExceeded",
    "DiscreteSCM",
    "Exogenous",
    "Mechanism",
    "PStarFamily",
    "conditional_counterfactual_prob",
    "counterfactual_prob",
    "interventional_family",
    "parity_pair",
    "random_scm",
    "search_agreeing_pair",
]

MAX_STATES = 2**20


class BudgetExceeded(ValueError):
    def __init__(self, states: int, budget: int):
        self.states = states
        super().__init__(f"model has {states} exogenous states, budget is {budget}")


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class Exogenous:
    name: str
    probs: tuple  # floats or Fractions, one per value 0..k-1

    @property
    def size(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class Mechanism:
    """``table`` lists value indices in mixed-radix order of (parents..., exogenous...)."""

    parents: tuple[str, ...]
    exogenous: tuple[str, ...]
    table: tuple[int, ...]


@dataclass(frozen=True)
class DiscreteSCM:
    diagram: CausalDiagram
    domains: Mapping[str, tuple[str, ...]]
    exogenous: tuple[Exogenous, ...]
    mechanisms: Mapping[str, Mechanism]
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        G = self.diagram
        exo = {u.name: u for u in self.exogenous}
        if set(self.domains) != set(G.nodes) or set(self.mechanisms) != set(G.nodes):
            raise OracleError("domains and mechanisms must cover exactly the diagram's nodes")
        attached: dict[str, set[str]] = {u: set() for u in exo}
        for v, m in self.mechanisms.items():
            if set(m.parents) != set(G.parents(v)):
                raise OracleError(f"mechanism of {v} must read exactly its graph parents")
            expected = 1
            for p in m.parents:
                expected *= len(self.domains[p])
            for u in m.exogenous:
                if u not in exo:
                    raise OracleError(f"unknown exogenous variable {u}")
                attached[u].add(v)
                expected *= exo[u].size
            if len(m.table) != expected:
                raise OracleError(f"mechanism table of {v} has {len(m.table)} entries, expected {expected}")
            if any(not 0 <= t < len(self.domains[v]) for t in m.table):
                raise OracleError(f"mechanism of {v} produces a value outside its domain")
        for u in self.exogenous:
            total = sum(u.probs)
            exact = all(isinstance(p, (Fraction, int)) for p in u.probs)
            if (total != 1) if exact else abs(total - 1) > 1e-12:
                raise OracleError(f"probabilities of {u.name} sum to {total}")
        shared = set()
        for vs in attached.values():
            for a, b in itertools.combinations(sorted(vs), 2):
                shared.add((a, b))
        if shared != set(G.bidirected):
            raise OracleError("exogenous sharing must match the bidirected edges exactly")

    # -- enumeration ---------------------------------------------------------

    @property
    def n_states(self) -> int:
        n = 1
        for u in self.exogenous:
            n *= u.size
        return n

    def value_index(self, var: str, value: str) -> int:
        try:
            return self.domains[var].index(value)
        except ValueError:
            raise OracleError(f"value {value!r} is not in the domain of {var}") from None

    def _packed(self):
        if "packed" not in self._cache:
            names = sorted(self.diagram.nodes)
            pos = {v: i for i, v in enumerate(names)}
            exo_names = [u.name for u in self.exogenous]
            epos = {u: j for j, u in enumerate(exo_names)}
            sizes = np.array([u.size for u in self.exogenous], dtype=np.int64)
            strides = np.ones(len(sizes), dtype=np.int64)
            for j in range(len(sizes) - 2, -1, -1):
                strides[j] = strides[j + 1] * sizes[j + 1]
            par_ptr, par_idx, par_mult = [0], [], []
            exo_ptr, exo_idx, exo_mult = [0], [], []
            tab_ptr, tables = [], []
            for v in names:
                m = self.mechanisms[v]
                radices = [len(self.domains[p]) for p in m.parents] + [self.exogenous[epos[u]].size for u in m.exogenous]
                mults = [1] * len(radices)
                for i in range(len(radices) - 2, -1, -1):
                    mults[i] = mults[i + 1] * radices[i + 1]
                for i, p in enumerate(m.parents):
                    par_idx.append(pos[p])
                    par_mult.append(mults[i])
                for i, u in enumerate(m.exogenous):
                    exo_idx.append(epos[u])
                    exo_mult.append(mults[len(m.parents) + i])
                par_ptr.append(len(par_idx))
                exo_ptr.append(len(exo_idx))
                tab_ptr.append(len(tables))
                tables.extend(m.table)
            i64 = lambda xs: np.ascontiguousarray(xs, dtype=np.int64)  # noqa: E731
            self._cache["packed"] = (
                names,
                pos,
                dict(
                    exo_sizes=i64(sizes),
                    exo_strides=i64(strides),
                    order=i64([pos[v] for v in topological_order(self.diagram)]),
                    par_ptr=i64(par_ptr),
                    par_idx=i64(par_idx),
                    par_mult=i64(par_mult),
                    exo_ptr=i64(exo_ptr),
                    exo_idx=i64(exo_idx),
                    exo_mult=i64(exo_mult),
                    tab_ptr=i64(tab_ptr),
                    tables=np.ascontiguousarray(tables, dtype=np.int32),
                ),
            )
        return self._cache["packed"]

    def state_probs(self, exact: bool = False):
        """Probability of every joint exogenous state, in kernel state order."""
        key = ("p", exact)
        if key not in self._cache:
            if self.n_states > MAX_STATES:
                raise BudgetExceeded(self.n_states, MAX_STATES)
            if exact:
                probs = [Fraction(1)]
                for u in self.exogenous:
                    probs = [a * Fraction(b) for a in probs for b in u.probs]
                self._cache[key] = probs
            else:
                p = np.ones(1)
                for u in self.exogenous:
                    p = np.multiply.outer(p, np.asarray(u.probs, dtype=float)).ravel()
                self._cache[key] = p
        return self._cache[key]

    def world(self, intervention: Mapping[str, str]) -> np.ndarray:
        """Domain indices of all observables in every exogenous state under ``do(intervention)``."""
        intervention = Intervention.of(intervention)
        key = ("world", intervention)
        if key not in self._cache:
            if self.n_states > MAX_STATES:
                raise BudgetExceeded(self.n_states, MAX_STATES)
            names, pos, packed = self._packed()
            fixed = np.full(len(names), -1, dtype=np.int32)
            for var, val in intervention.items():
                if var not in pos:
                    raise OracleError(f"unknown variable {var!r}")
                fixed[pos[var]] = self.value_index(var, val)
            self._cache[key] = kernels.evaluate_world(self.n_states, fixed=fixed, **packed)
        return self._cache[key]

    def column(self, var: str) -> int:
        return self._packed()[1][var]

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        def prob(p):
            return str(p) if isinstance(p, Fraction) else float(p)

        return {
            "graph": render_graph(self.diagram),
            "domains": {v: list(self.domains[v]) for v in sorted(self.domains)},
            "exogenous": [{"name": u.name, "probs": [prob(p) for p in u.probs]} for u in self.exogenous],
            "mechanisms": {
                v: {
                    "parents": list(m.parents),
                    "exogenous": list(m.exogenous),
                    "table": [self.domains[v][t] for t in m.table],
                }
                for v, m in sorted(self.mechanisms.items())
            },
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> DiscreteSCM:
        def prob(p):
            return Fraction(p) if isinstance(p, str) else float(p)

        G = parse_graph(d["graph"])
        domains = {v: tuple(str(x) for x in vals) for v, vals in d["domains"].items()}
        exo = tuple(Exogenous(u["name"], tuple(prob(p) for p in u["probs"])) for u in d["exogenous"])
        mechs = {}
        for v, m in d["mechanisms"].items():
            table = tuple(domains[v].index(str(x)) for x in m["table"])
            mechs[v] = Mechanism(tuple(m["parents"]), tuple(m["exogenous"]), table)
        return cls(G, domains, exo, mechs)

    @classmethod
    def from_json(cls, text: str) -> DiscreteSCM:
        return cls.from_dict(json.loads(text))


# -- counterfactual semantics ------------------------------------------------------


def _mask(M: DiscreteSCM, gamma: Iterable[CfEvent]) -> np.ndarray:
    mask = np.ones(M.n_states, dtype=bool)
    for e in gamma:
        M.diagram.check_vars([e.var.base, *e.var.sub])
        vals = M.world(e.var.sub)
        mask &= vals[:, M.column(e.var.base)] == M.value_index(e.var.base, e.value)
    return mask


def counterfactual_prob(M: DiscreteSCM, gamma: CfConjunction | Iterable[CfEvent], exact: bool = False):
    """Sum of ``P(u)`` over exogenous states in which every event of ``gamma`` holds."""
    mask = _mask(M, gamma)
    if exact:
        probs = M.state_probs(exact=True)
        return sum((probs[i] for i in np.flatnonzero(mask)), Fraction(0))
    return float(M.state_probs()[mask].sum())


class Undefined:
    def __repr__(self):
        return "UNDEFINED"


UNDEFINED = Undefined()


def conditional_counterfactual_prob(M: DiscreteSCM, gamma, delta, exact: bool = False):
    """``P(gamma | delta)``, or :data:`UNDEFINED` when ``P(delta) = 0``."""
    den = counterfactual_prob(M, delta, exact)
    if den == 0:
        return UNDEFINED
    return counterfactual_prob(M, list(gamma) + list(delta), exact) / den


class PStarFamily:
    """Interventional distributions ``P_x(v \\ x)`` of a model, tabulated on demand.

    ``tables`` (when materialised by :func:`interventional_family`) maps each
    intervention to ``{assignment tuple over the remaining variables (sorted): prob}``.
    """

    def __init__(self, model: DiscreteSCM, exact: bool = False, up_to: int | None = None):
        self.model = model
        self.exact = exact
        self.up_to = up_to
        self.domains = dict(model.domains)
        self._marginals: dict = {}
        self._probs: dict = {}
        self.tables: dict[Intervention, dict[tuple, object]] = {}

    def _check_do(self, do: Intervention):
        if self.up_to is not None and len(do) > self.up_to:
            from .expr import MissingTable

            raise MissingTable(f"no table for interventions on {len(do)} variables (limit {self.up_to})")

    def marginal(self, do: Mapping[str, str], variables: Iterable[str]):
        """Joint table of ``variables`` under ``do`` as a numpy array (float mode)."""
        do = Intervention.of(do)
        self._check_do(do)
        variables = tuple(sorted(variables))
        key = (do, variables)
        if key not in self._marginals:
            M = self.model
            vals = M.world(do)
            shape = [len(M.domains[v]) for v in variables]
            code = np.zeros(M.n_states, dtype=np.int64)
            for v in variables:
                code = code * len(M.domains[v]) + vals[:, M.column(v)]
            size = int(np.prod(shape)) if shape else 1
            if self.exact:
                probs = M.state_probs(exact=True)
                acc = [Fraction(0)] * size
                for i, c in enumerate(code):
                    acc[c] += probs[i]
                table = np.array(acc, dtype=object).reshape(shape)
            else:
                table = np.bincount(code, weights=M.state_probs(), minlength=size).reshape(shape)
            self._marginals[key] = table
        return self._marginals[key]

    def prob(self, do: Mapping[str, str], joint: Mapping[str, str]):
        key = (tuple(sorted(do.items())), tuple(sorted(joint.items())))
        hit = self._probs.get(key)
        if hit is None:
            hit = self._probs[key] = self._prob(do, joint)
        return hit

    def _prob(self, do: Mapping[str, str], joint: Mapping[str, str]):
        M = self.model
        do = Intervention.of(do)
        for var in joint:
            if var in do:
                raise OracleError(f"{var} is both intervened on and measured")
        variables = tuple(sorted(joint))
        table = self.marginal(do, variables)
        idx = tuple(M.value_index(v, joint[v]) for v in variables)
        return table[idx]


def interventional_family(M: DiscreteSCM, up_to: int | None = None, exact: bool = False) -> PStarFamily:
    """Tabulate ``P_x(v \\ x)`` for every intervention on at most ``up_to`` variables."""
    fam = PStarFamily(M, exact=exact, up_to=up_to)
    names = sorted(M.diagram.nodes)
    limit = len(names) if up_to is None else up_to
    for k in range(limit + 1):
        for X in itertools.combinations(names, k):
            rest = [v for v in names if v not in X]
            for xs in itertools.product(*(M.domains[v] for v in X)):
                do = Intervention.of(dict(zip(X, xs)))
                if not rest:
                    fam.tables[do] = {(): Fraction(1) if exact else 1.0}
                    continue
                arr = fam.marginal(do, rest)
                table = {}
                for idx in itertools.product(*(range(len(M.domains[v])) for v in rest)):
                    table[tuple(M.domains[v][i] for v, i in zip(rest, idx))] = arr[idx]
                fam.tables[do] = table
    return fam


# -- model generators ---------------------------------------------------------------


def random_scm(
    G: CausalDiagram,
    seed: int,
    domain_sizes: Mapping[str, int] | int = 2,
    exo_size: int = 3,
    budget: int = MAX_STATES,
) -> DiscreteSCM:
    """Seeded random model: one exogenous variable per node and per bidirected edge.

    Exogenous probabilities are rationals with denominators of at most ``20 * exo_size``,
    so exact mode is available for every generated model.
    """
    rng = np.random.default_rng(seed)
    names = sorted(G.nodes)
    if isinstance(domain_sizes, int):
        domain_sizes = dict.fromkeys(names, domain_sizes)
    for v in names:
        if domain_sizes.get(v, 0) < 2:
            raise OracleError(f"domain of {v} needs at least two values")
    exo_names = [f"U_{v}" for v in names] + [f"U_{a}_{b}" for a, b in sorted(G.bidirected)]
    states = exo_size ** len(exo_names)
    if states > budget:
        raise BudgetExceeded(states, budget)
    exogenous = []
    for name in exo_names:
        w = [int(x) for x in rng.integers(1, 21, size=exo_size)]
        exogenous.append(Exogenous(name, tuple(Fraction(x, sum(w)) for x in w)))
    domains = {v: tuple(str(i) for i in range(domain_sizes[v])) for v in names}
    mechanisms = {}
    for v in names:
        parents = tuple(sorted(G.parents(v)))
        exo = (f"U_{v}",) + tuple(f"U_{a}_{b}" for a, b in sorted(G.bidirected) if v in (a, b))
        n = exo_size ** len(exo)
        for p in parents:
            n *= domain_sizes[p]
        table = tuple(int(t) for t in rng.integers(0, domain_sizes[v], size=n))
        mechanisms[v] = Mechanism(parents, exo, table)
    return DiscreteSCM(G, domains, tuple(exogenous), mechanisms)


def _parity_table(n_inputs: int) -> tuple[int, ...]:
    return tuple(sum(bits) % 2 for bits in itertools.product((0, 1), repeat=n_inputs))


def _ignore_first(n_inputs: int) -> tuple[int, ...]:
    return tuple(sum(bits[1:]) % 2 for bits in itertools.product((0, 1), repeat=n_inputs))


def parity_pair(k: int, flip: Fraction | None = None):
    """Two binary models that agree on every interventional distribution but not on a counterfactual.

    The graph has ``X -> Y``, ``X -> Z`` and a bidirected path ``Y <-> W1 <-> ... <-> Wk <-> Z``.
    All exogenous variables are uniform bits.  In the first model every observable is the
    parity of its inputs; in the second ``Y`` and ``Z`` ignore ``X``.  With ``flip`` set, ``Y``
    additionally flips with that probability.  Returns ``(M1, M2, gamma)`` where ``gamma`` is
    ``Y_{X=0}=1, W1=0, ..., Wk=0, Z_{X=1}=0``, an odd-parity event that is impossible in ``M2``.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    path = ["Y"] + [f"W{i}" for i in range(1, k + 1)] + ["Z"]
    bidirected = list(zip(path, path[1:]))
    G = CausalDiagram.from_edges([("X", "Y"), ("X", "Z")], bidirected)
    half = (Fraction(1, 2), Fraction(1, 2))
    exogenous = [Exogenous("U_X", half)] + [Exogenous(f"U_{a}_{b}", half) for a, b in bidirected]
    if flip is not None:
        exogenous.append(Exogenous("U_flip", (1 - Fraction(flip), Fraction(flip))))
    domains = {v: ("0", "1") for v in G.nodes}

    def build(ignore_x: bool) -> DiscreteSCM:
        mechs = {"X": Mechanism((), ("U_X",), (0, 1))}
        for i, v in enumerate(path):
            exo = tuple(f"U_{a}_{b}" for a, b in bidirected if v in (a, b))
            parents: tuple[str, ...] = ()
            if v in ("Y", "Z"):
                parents = ("X",)
            if v == "Y" and flip is not None:
                exo = exo + ("U_flip",)
            n = len(parents) + len(exo)
            table = _ignore_first(n) if (ignore_x and parents) else _parity_table(n)
            mechs[v] = Mechanism(parents, exo, table)
        return DiscreteSCM(G, domains, tuple(exogenous), mechs)

    gamma = CfConjunction.of(
        [CfEvent.of("Y", "1", {"X": "0"}), CfEvent.of("Z", "0", {"X": "1"})]
        + [CfEvent.of(f"W{i}", "0") for i in range(1, k + 1)]
    )
    return build(False), build(True), gamma


def _family_fingerprint(M: DiscreteSCM) -> tuple:
    fam = interventional_family(M, exact=True)
    return tuple((do.items_, tuple(sorted(t.items()))) for do, t in sorted(fam.tables.items(), key=lambda kv: kv[0].sort_key()))


def search_agreeing_pair(
    G: CausalDiagram,
    gamma: Iterable[CfEvent],
    domain_size: int = 2,
    exo_size: int = 2,
    limit: int = 200_000,
):
    """Find two models on ``G`` with identical interventional families but different ``P(gamma)``.

    Exogenous variables (one per node and one per bidirected edge) are uniform over
    ``exo_size`` values; every combination of mechanism tables is tried in a fixed order,
    so the result is deterministic.  Returns ``(M1, M2)`` or ``None`` when no pair exists
    among the first ``limit`` models.
    """
    gamma = list(gamma)
    names = sorted(G.nodes)
    domains = {v: tuple(str(i) for i in range(domain_size)) for v in names}
    u = tuple(Fraction(1, exo_size) for _ in range(exo_size))
    exo_names = [f"U_{v}" for v in names] + [f"U_{a}_{b}" for a, b in sorted(G.bidirected)]
    exogenous = tuple(Exogenous(n, u) for n in exo_names)
    layouts = {}
    for v in names:
        parents = tuple(sorted(G.parents(v)))
        exo = (f"U_{v}",) + tuple(f"U_{a}_{b}" for a, b in sorted(G.bidirected) if v in (a, b))
        size = exo_size ** len(exo) * domain_size ** len(parents)
        layouts[v] = (parents, exo, size)
    choices = [itertools.product(range(domain_size), repeat=layouts[v][2]) for v in names]
    seen: dict[tuple, tuple[object, DiscreteSCM]] = {}
    for count, tables in enumerate(itertools.product(*choices)):
        if count >= limit:
            break
        mechs = {v: Mechanism(layouts[v][0], layouts[v][1], t) for v, t in zip(names, tables)}
        M = DiscreteSCM(G, domains, exogenous, mechs)
        key = _family_fingerprint(M)
        p = counterfactual_prob(M, gamma, exact=True)
        if key in seen and seen[key][0] != p:
            return seen[key][1], M
        seen.setdefault(key, (p, M))
    return None
