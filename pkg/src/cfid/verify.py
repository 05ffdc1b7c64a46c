"""Differential testing of the identification algorithms against the enumeration oracle."""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .events import CfConjunction, CfEvent, CfVariable, Intervention, Query, render_query
from .graph import CausalDiagram, render_graph
from .identify import FAIL, IDENTIFIED, UNDEFINED, ZERO, IdResult, idc_star, theorem5_witness
from .oracle import BudgetExceeded, DiscreteSCM, PStarFamily, random_scm
from .worlds import INCONSISTENT, IndeterminateMerge, make_cg

__all__ = ["Mismatch", "VerifyReport", "check_model", "enumerate_queries", "verify"]

TOLERANCE = 1e-9


def enumerate_queries(
    G: CausalDiagram,
    max_events: int = 3,
    max_worlds: int = 2,
    max_sub: int = 1,
    values: tuple[str, ...] = ("0", "1"),
    conditional: bool = True,
) -> list[Query]:
    """All queries with at most ``max_events`` events drawn from at most ``max_worlds`` worlds.

    A world is an intervention on at most ``max_sub`` variables.  Queries that differ only by
    a renaming of value tokens within a variable are listed once, and the result is sorted.
    """
    nodes = sorted(G.nodes)
    subs = [Intervention()]
    for k in range(1, max_sub + 1):
        for X in itertools.combinations(nodes, k):
            for xs in itertools.product(values, repeat=k):
                subs.append(Intervention.of(dict(zip(X, xs))))
    atoms = [(v, s, val) for s in subs for v in nodes if v not in s for val in values]
    index = {a: i for i, a in enumerate(atoms)}
    perms = list(itertools.permutations(range(len(values))))
    pos = {val: i for i, val in enumerate(values)}

    # touched[i]: variables whose renaming moves atom i; image[i][r]: atom index under the
    # renaming that applies perms[r[j]] to touched[i][j]
    touched, image = [], []
    for v, s, val in atoms:
        tv = (v,) + tuple(s)
        table = {}
        for r in itertools.product(range(len(perms)), repeat=len(tv)):
            ren = dict(zip(tv, r))
            sub = Intervention.of({k: values[perms[ren[k]][pos[x]]] for k, x in s.items()})
            table[r] = index[(v, sub, values[perms[ren[v]][pos[val]]])]
        touched.append(tv)
        image.append(table)

    splits = {}
    for n in range(1, max_events + 1):
        all_masks = [m for m in itertools.product((True, False), repeat=n) if any(m)]
        splits[n] = all_masks if conditional else [(True,) * n]

    out = []
    for n in range(1, max_events + 1):
        for combo in itertools.combinations(range(len(atoms)), n):
            if len({atoms[i][1] for i in combo}) > max_worlds:
                continue
            if len({atoms[i][:2] for i in combo}) < n:
                continue  # two values for one counterfactual variable: trivially zero
            T = sorted({x for i in combo for x in touched[i]})
            stabilizer = []
            smallest = True
            for r in itertools.product(range(len(perms)), repeat=len(T)):
                ren = dict(zip(T, r))
                mapped = [image[i][tuple(ren[x] for x in touched[i])] for i in combo]
                ordered = sorted(mapped)
                if tuple(ordered) < combo:
                    smallest = False
                    break
                if tuple(ordered) == combo:
                    stabilizer.append([combo.index(m) for m in mapped])
            if not smallest:
                continue
            seen = set()
            for mask in splits[n]:
                # the same split up to a renaming that maps the combination onto itself
                key = min(tuple(mask[j] for j in sorted(range(n), key=lambda j: p[j])) for p in stabilizer)
                if key in seen:
                    continue
                seen.add(key)
                gamma = [_event(atoms[i]) for i, g in zip(combo, mask) if g]
                delta = [_event(atoms[i]) for i, g in zip(combo, mask) if not g]
                out.append(Query(CfConjunction.of(gamma), CfConjunction.of(delta)))
    out.sort(key=lambda q: (len(q.gamma) + len(q.delta), render_query(q)))
    return out


def _event(atom) -> CfEvent:
    v, s, val = atom
    return CfEvent(CfVariable(v, s), val)


@dataclass
class Mismatch:
    seed: int
    query: str
    verdict: str
    detail: str
    model: DiscreteSCM | None = None

    def to_dict(self) -> dict:
        d = {"seed": self.seed, "query": self.query, "verdict": self.verdict, "detail": self.detail}
        if self.model is not None:
            d["model"] = self.model.to_dict()
        return d


@dataclass
class VerifyReport:
    graph: str
    seeds: list[int]
    n_queries: int
    verdicts: Counter = field(default_factory=Counter)
    checks: int = 0
    skipped: list[str] = field(default_factory=list)
    mismatches: list[Mismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_dict(self) -> dict:
        return {
            "graph": self.graph,
            "seeds": self.seeds,
            "queries": self.n_queries,
            "verdicts": dict(sorted(self.verdicts.items())),
            "checks": self.checks,
            "skipped": self.skipped,
            "mismatches": [{k: v for k, v in m.to_dict().items() if k != "model"} for m in self.mismatches],
            "ok": self.ok,
        }

    def summary(self) -> str:
        verdicts = ", ".join(f"{k}={v}" for k, v in sorted(self.verdicts.items()))
        lines = [
            f"queries: {self.n_queries} ({verdicts})",
            f"models: {len(self.seeds)} (seeds {self.seeds[0]}..{self.seeds[-1]})" if self.seeds else "models: 0",
            f"oracle comparisons: {self.checks}",
            f"mismatches: {len(self.mismatches)}",
        ]
        lines += [f"skipped: {s}" for s in self.skipped]
        lines += [f"MISMATCH seed={m.seed} {m.query}: {m.detail}" for m in self.mismatches]
        return "\n".join(lines)


def _valid_witness(G: CausalDiagram, result: IdResult) -> bool:
    """The reported witness is well formed and the failing conjunction's graph has one."""
    w = result.witness
    if w is None or w.value_in_sub == w.conflicting_value or result.failed_on is None:
        return False
    graph, rewritten = make_cg(G, result.failed_on)
    if rewritten is INCONSISTENT:
        return False
    return theorem5_witness(graph, rewritten) is not None


class _ModelOracle:
    """Per-model caches of event masks and the interventional family."""

    def __init__(self, M: DiscreteSCM):
        self.M = M
        self.family = PStarFamily(M)
        self.probs = M.state_probs()
        self._masks: dict[CfEvent, np.ndarray] = {}

    def mask(self, events) -> np.ndarray:
        out = np.ones(self.M.n_states, dtype=bool)
        for e in events:
            if e not in self._masks:
                vals = self.M.world(e.var.sub)
                self._masks[e] = vals[:, self.M.column(e.var.base)] == self.M.value_index(e.var.base, e.value)
            out &= self._masks[e]
        return out

    def prob(self, events) -> float:
        return float(self.probs[self.mask(events)].sum())


def check_model(G: CausalDiagram, oracle: _ModelOracle, query: Query, result: IdResult) -> str | None:
    """Compare one verdict with the oracle; returns a description of any disagreement."""
    p_delta = oracle.prob(query.delta) if query.delta else 1.0
    if result.verdict == UNDEFINED:
        return None if p_delta == 0.0 else f"undefined verdict but P(delta) = {p_delta!r}"
    if p_delta == 0.0:
        return None  # the conditional is undefined in this model; nothing to compare
    truth = oracle.prob(list(query.gamma) + list(query.delta)) / p_delta
    if result.verdict == ZERO:
        return None if truth == 0.0 else f"zero verdict but oracle gives {truth!r}"
    if result.verdict == IDENTIFIED:
        try:
            got = ex.evaluate(result.expression, oracle.family)
        except ex.ZeroDenominator:
            return f"expression has a zero denominator but P(delta) = {p_delta!r}"
        if abs(got - truth) > TOLERANCE:
            return f"expression gives {got!r}, oracle gives {truth!r}"
    return None


def identify_query(G: CausalDiagram, query: Query) -> IdResult:
    return idc_star(G, query.gamma, query.delta)


def verify(
    G: CausalDiagram,
    n_models: int = 20,
    seed: int = 0,
    queries: list[Query] | None = None,
    domain_size: int = 2,
    exo_size: int = 2,
    budget: int = 2**16,
    keep_models: bool = False,
) -> VerifyReport:
    """Identify every query once, then check each verdict on ``n_models`` seeded models."""
    if queries is None:
        queries = enumerate_queries(G)
    seeds = list(range(seed, seed + n_models))
    report = VerifyReport(render_graph(G), seeds, len(queries))
    results = []
    for q in queries:
        try:
            r = identify_query(G, q)
        except IndeterminateMerge as exc:
            report.mismatches.append(Mismatch(-1, render_query(q), "error", f"indeterminate merge: {exc}"))
            continue
        report.verdicts[r.verdict] += 1
        if r.verdict == FAIL and not _valid_witness(G, r):
            report.mismatches.append(Mismatch(-1, render_query(q), FAIL, "no valid non-identifiability witness"))
        results.append((q, r))
    for s in seeds:
        try:
            M = random_scm(G, s, domain_size, exo_size, budget=budget)
        except BudgetExceeded as exc:
            report.skipped.append(f"seed {s}: {exc}")
            continue
        oracle = _ModelOracle(M)
        for q, r in results:
            if r.verdict == FAIL:
                continue
            report.checks += 1
            problem = check_model(G, oracle, q, r)
            if problem:
                report.mismatches.append(Mismatch(s, render_query(q), r.verdict, problem, M if keep_models else None))
    return report


def dump_failures(report: VerifyReport) -> str:
    """JSON document with the graph and each failing (query, model) pair."""
    return json.dumps(
        {"graph": report.graph, "failures": [m.to_dict() for m in report.mismatches]},
        indent=2,
        sort_keys=True,
    )
