"""Command-line entry point: ``cfid identify | explain | verify | oracle``.

Exit codes: 0 identified or zero, 1 input error, 2 not identifiable, 3 undefined.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction
from pathlib import Path

import click

from . import expr as ex
from .events import Query, QuerySyntaxError, parse_query, render_query
from .graph import CausalDiagram, GraphError, parse_graph
from .identify import FAIL, IDENTIFIED, UNDEFINED, ZERO, IdResult, idc_star
from .oracle import (
    UNDEFINED as ORACLE_UNDEFINED,
    BudgetExceeded,
    DiscreteSCM,
    OracleError,
    conditional_counterfactual_prob,
    counterfactual_prob,
    interventional_family,
    parity_pair,
)
from .verify import dump_failures as _dump_failures, enumerate_queries, verify
from .worlds import INCONSISTENT, IndeterminateMerge, make_cg, parallel_worlds

EXIT_OK, EXIT_INPUT, EXIT_FAIL, EXIT_UNDEFINED = 0, 1, 2, 3

_EXIT = {IDENTIFIED: EXIT_OK, ZERO: EXIT_OK, FAIL: EXIT_FAIL, UNDEFINED: EXIT_UNDEFINED}


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


def _load_graph(path: str) -> CausalDiagram:
    try:
        return parse_graph(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read graph file: {exc}") from exc
    except GraphError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_query(text: str, G: CausalDiagram | None = None) -> Query:
    try:
        q = parse_query(text)
    except QuerySyntaxError as exc:
        raise InputError(f"query syntax error at {exc}") from exc
    if G is not None:
        try:
            for e in list(q.gamma) + list(q.delta):
                G.check_vars([e.var.base, *e.var.sub])
        except GraphError as exc:
            raise InputError(str(exc)) from exc
    return q


def _verdict_label(result: IdResult) -> str:
    if result.verdict == ZERO and any(step.detail.startswith("inconsistent") for step in result.trace):
        return "inconsistent-zero"
    return result.verdict


def _explain_lines(G: CausalDiagram, q: Query, result: IdResult) -> list[str]:
    joint = q.gamma & q.delta
    lines = ["parallel worlds graph:"]
    lines += [f"  {line}" for line in parallel_worlds(G, joint).render().splitlines()]
    lines.append("make-cg:")
    try:
        graph, rewritten = make_cg(G, joint)
    except IndeterminateMerge as exc:  # pragma: no cover - literal queries never hit this
        lines.append(f"  {exc}")
    else:
        for m in graph.merges:
            lines.append(f"  merge {m.dropped} into {m.kept} ({m.reason})")
        if not graph.merges:
            lines.append("  no merges")
        if rewritten is INCONSISTENT:
            lines.append("  rewritten: INCONSISTENT")
        else:
            lines.append(f"  rewritten: {rewritten}")
            lines.append("counterfactual graph:")
            lines += [f"  {line}" for line in graph.render().splitlines()]
    lines.append("trace:")
    lines += [f"  {step}" for step in result.trace]
    return lines


def run_report(G: CausalDiagram, q: Query, result: IdResult, explain: bool = False) -> dict:
    report = {"query": render_query(q), "verdict": _verdict_label(result)}
    if result.verdict in (IDENTIFIED, ZERO):
        report["expression"] = {
            "text": ex.render(result.expression, "text"),
            "latex": ex.render(result.expression, "latex"),
            "json": json.loads(ex.render(result.expression, "json")),
        }
    if result.verdict == FAIL:
        report["witness"] = result.witness.to_dict() if result.witness else None
    if explain:
        report["explain"] = _explain_lines(G, q, result)
    return report


def _identify(graph_path: str, query_text: str, fmt: str, as_json: bool, explain: bool):
    G = _load_graph(graph_path)
    q = _load_query(query_text, G)
    try:
        result = idc_star(G, q.gamma, q.delta)
    except IndeterminateMerge as exc:
        raise InputError(f"query cannot be compiled: {exc}") from exc
    report = run_report(G, q, result, explain)
    if as_json:
        click.echo(json.dumps(report, indent=2, sort_keys=True))
    else:
        click.echo(f"query: {report['query']}")
        click.echo(f"verdict: {report['verdict']}")
        if "expression" in report:
            click.echo(ex.render(result.expression, fmt))
        if result.verdict == FAIL and result.witness is not None:
            click.echo("witness: " + result.witness.describe())
        if explain:
            click.echo("\n".join(report["explain"]))
    sys.exit(_EXIT[result.verdict])


@click.group()
@click.version_option(package_name="artifact")
def cli():
    """Counterfactual identification from interventional distributions."""


_FORMAT = click.option("--format", "fmt", type=click.Choice(["text", "latex", "json"]), default="text", show_default=True)


@cli.command()
@click.argument("graph", type=click.Path(dir_okay=False))
@click.argument("query")
@_FORMAT
@click.option("--json", "as_json", is_flag=True, help="Print the full run report as JSON.")
@click.option("--explain", is_flag=True, help="Append the merge log and the recursion trace.")
def identify(graph, query, fmt, as_json, explain):
    """Identify QUERY (e.g. 'P(Y[X=x]=y | X=x1)') in the diagram stored in GRAPH."""
    _identify(graph, query, fmt, as_json, explain)


@cli.command()
@click.argument("graph", type=click.Path(dir_okay=False))
@click.argument("query")
@_FORMAT
@click.option("--json", "as_json", is_flag=True)
def explain(graph, query, fmt, as_json):
    """Same as ``identify --explain``."""
    _identify(graph, query, fmt, as_json, True)


def _parity_k(G: CausalDiagram) -> int | None:
    k = len(G.nodes) - 3
    if k < 0:
        return None
    reference, _, _ = parity_pair(k)
    return k if reference.diagram == G else None


def _verify_parity(G: CausalDiagram, as_json: bool) -> int:
    k = _parity_k(G)
    if k is None:
        raise InputError("--parity needs the parity diagram: X -> Y, X -> Z and a bidirected path Y <-> W1 <-> ... <-> Z")
    rows = []
    ok = True
    for flip in (None, "1/256"):
        M1, M2, gamma = parity_pair(k, None if flip is None else Fraction(flip))
        f1, f2 = interventional_family(M1, exact=True), interventional_family(M2, exact=True)
        agree = f1.tables == f2.tables
        p1, p2 = counterfactual_prob(M1, gamma, exact=True), counterfactual_prob(M2, gamma, exact=True)
        ok &= agree and p1 != p2
        rows.append({"flip": flip or "0", "tables": len(f1.tables), "agree": agree, "p1": str(p1), "p2": str(p2)})
    if as_json:
        click.echo(json.dumps({"k": k, "query": f"P({gamma})", "results": rows, "ok": ok}, indent=2, sort_keys=True))
    else:
        click.echo(f"parity construction, k={k}, query P({gamma})")
        for r in rows:
            click.echo(
                f"flip={r['flip']}: {r['tables']} interventional tables {'identical' if r['agree'] else 'DIFFER'}; "
                f"P1={r['p1']} P2={r['p2']}"
            )
        click.echo("ok" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_FAIL


@cli.command(name="verify")
@click.argument("graph", type=click.Path(dir_okay=False))
@click.option("--models", default=20, show_default=True, help="Number of random models.")
@click.option("--seed", default=0, show_default=True, help="Seed of the first model.")
@click.option("--queries", "query_list", default=None, help="Queries separated by ';' (default: enumerate).")
@click.option("--all-up-to", "up_to", default=3, show_default=True, help="Maximum events per enumerated query.")
@click.option("--worlds", default=2, show_default=True, help="Maximum worlds per enumerated query.")
@click.option("--domain-size", default=2, show_default=True)
@click.option("--exo-size", default=2, show_default=True, help="Values per exogenous variable.")
@click.option("--dump-failures", type=click.Path(dir_okay=False), default=None, help="Write failing models here (JSON).")
@click.option("--parity", is_flag=True, help="Check the parity construction on GRAPH instead.")
@click.option("--json", "as_json", is_flag=True)
def verify_cmd(graph, models, seed, query_list, up_to, worlds, domain_size, exo_size, dump_failures, parity, as_json):
    """Check verdicts on GRAPH against brute-force enumeration in random models."""
    G = _load_graph(graph)
    if parity:
        sys.exit(_verify_parity(G, as_json))
    if query_list:
        queries = [_load_query(t.strip(), G) for t in query_list.split(";") if t.strip()]
    else:
        queries = enumerate_queries(G, max_events=up_to, max_worlds=worlds)
    report = verify(G, models, seed, queries, domain_size, exo_size, keep_models=bool(dump_failures))
    if as_json:
        click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        click.echo(report.summary())
    if dump_failures and report.mismatches:
        Path(dump_failures).write_text(_dump_failures(report))
        click.echo(f"failing fixtures written to {dump_failures}", err=True)
    sys.exit(EXIT_OK if report.ok else EXIT_FAIL)


def _world_lines(M: DiscreteSCM, q: Query) -> list[str]:
    worlds: dict = {}
    for e in list(q.gamma) + list(q.delta):
        worlds.setdefault(e.var.sub, []).append(e)
    lines = []
    for sub in sorted(worlds, key=lambda s: s.sort_key()):
        name = f"do({sub})" if sub else "actual world"
        lines.append(f"  {name}: " + ", ".join(f"{e.var.base}={e.value}" for e in worlds[sub]))
    return lines


@cli.command()
@click.argument("model", type=click.Path(dir_okay=False))
@click.argument("query")
@click.option("--exact", is_flag=True, help="Exact rational arithmetic (needs rational exogenous tables).")
@click.option("--json", "as_json", is_flag=True)
def oracle(model, query, exact, as_json):
    """Compute QUERY in the model stored in MODEL by enumerating exogenous states."""
    try:
        M = DiscreteSCM.from_json(Path(model).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot load model: {exc}") from exc
    q = _load_query(query, M.diagram)
    try:
        if q.delta:
            p = conditional_counterfactual_prob(M, q.gamma, q.delta, exact)
        else:
            p = counterfactual_prob(M, q.gamma, exact)
    except (OracleError, BudgetExceeded) as exc:
        raise InputError(str(exc)) from exc
    undefined = p is ORACLE_UNDEFINED
    if as_json:
        out = {"query": render_query(q), "probability": None if undefined else str(p), "undefined": undefined}
        out["states"] = M.n_states
        out["worlds"] = [line.strip() for line in _world_lines(M, q)]
        click.echo(json.dumps(out, indent=2, sort_keys=True))
    else:
        click.echo(f"query: {render_query(q)}")
        click.echo(f"exogenous states: {M.n_states}")
        click.echo("worlds:")
        click.echo("\n".join(_world_lines(M, q)))
        click.echo("probability: " + ("undefined (conditioning event has probability zero)" if undefined else str(p)))
    sys.exit(EXIT_UNDEFINED if undefined else EXIT_OK)


def main(argv=None):
    """Console-script entry; click usage errors map to exit code 1, not click's default 2."""
    try:
        cli.main(args=argv, prog_name="cfid", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        sys.exit(EXIT_INPUT)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_INPUT)
    sys.exit(EXIT_OK)


if __name__ == "__main__":  # pragma: no cover
    main()
