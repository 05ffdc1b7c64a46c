import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfid import expr as ex
from cfid.events import Bound
from cfid.graph import parse_graph
from cfid.oracle import interventional_family, random_scm

from .strategies import expressions

X, Y = Bound("a", "X"), Bound("b", "X")


@pytest.fixture(scope="module")
def family():
    G = parse_graph("X -> Y\nY -> Z\nX <-> Z\n")
    return interventional_family(random_scm(G, 3, domain_sizes=2, exo_size=3))


def sum_x(name, body_value="1"):
    b = Bound(name, "X")
    return ex.SumOver((b,), ex.PStar((), (("X", b), ("Y", body_value))))


def test_binder_names_do_not_matter():
    assert ex.structurally_equal(sum_x("a"), sum_x("zz"))
    assert not ex.structurally_equal(sum_x("a"), sum_x("a", "0"))


def test_canonical_binders_are_numbered_in_order():
    inner = ex.Product((sum_x("q"), ex.PStar((("X", "0"),), (("Y", "1"),))))
    c = ex.canonicalize(inner)
    assert {b.name for b in ex._all_bound(c)} == {"w1"}


def test_factor_order_does_not_matter():
    p = ex.PStar((), (("X", "0"),))
    q = ex.PStar((("X", "1"),), (("Y", "0"),))
    assert ex.structurally_equal(ex.Product((p, q)), ex.Product((q, p)))


def test_simplification():
    p = ex.PStar((), (("X", "0"),))
    assert ex.canonicalize(ex.Product((p, ex.Const(1)))) == p
    assert ex.canonicalize(ex.Product((p, ex.Const(0)))) == ex.Const(0)
    assert ex.canonicalize(ex.Product((p, ex.Product((p, p))))) == ex.Product((p, p, p))
    nested = ex.SumOver((X,), ex.SumOver((Bound("c", "Y"),), ex.PStar((), (("X", X), ("Y", Bound("c", "Y"))))))
    c = ex.canonicalize(nested)
    assert isinstance(c, ex.SumOver) and len(c.bound) == 2 and isinstance(c.body, ex.PStar)


def test_pstar_rejects_overlap_and_empty_joint():
    with pytest.raises(ValueError):
        ex.PStar((("X", "0"),), (("X", "0"),))
    with pytest.raises(ValueError):
        ex.PStar((("X", "0"),), ())


def test_validate_rejects_malformed_trees():
    with pytest.raises(ValueError, match="free"):
        ex.validate(ex.PStar((), (("X", X),)))
    with pytest.raises(ValueError, match="ranges over"):
        ex.validate(ex.SumOver((X,), ex.PStar((), (("Y", X),))))
    with pytest.raises(ValueError):
        ex.validate(ex.Product((ex.PStar((), (("X", "0"),)),)))


@given(expressions())
def test_canonical_form_is_valid(e):
    ex.validate(ex.canonicalize(e))


@given(expressions())
def test_canonicalize_is_idempotent(e):
    c = ex.canonicalize(e)
    assert ex.canonicalize(c) == c


@given(expressions())
def test_json_round_trip(e):
    c = ex.canonicalize(e)
    text = ex.to_json(c)
    assert ex.from_json(text) == c
    assert ex.to_json(ex.from_json(text)) == text
    assert json.loads(text)["schema_version"] == 1


def test_json_rejects_other_versions_and_unbound_symbols():
    with pytest.raises(ValueError, match="schema"):
        ex.from_json('{"schema_version": 2, "expression": {"kind": "const", "value": 1}}')
    bad = {"schema_version": 1, "expression": {"kind": "pstar", "do": [], "joint": [{"var": "X", "value": {"bound": "w1"}}]}}
    with pytest.raises(ValueError, match="unbound"):
        ex.from_json(json.dumps(bad))


def _eval(e, family):
    try:
        return ex.evaluate(e, family)
    except ex.ZeroDenominator:
        return None


@given(expressions())
def test_evaluation_is_invariant_under_canonicalization(family, e):
    raw = _eval(e, family)
    if raw is None:
        return
    canon = _eval(ex.canonicalize(e), family)
    assert canon is not None and math.isclose(raw, canon, rel_tol=1e-9, abs_tol=1e-12)


def test_sum_over_joint_is_one(family):
    b, c = Bound("b", "Y"), Bound("c", "Z")
    e = ex.SumOver((b, c), ex.PStar((("X", "1"),), (("Y", b), ("Z", c))))
    assert ex.evaluate(e, family) == pytest.approx(1.0)


def test_evaluation_errors(family):
    with pytest.raises(ex.UnboundSymbol):
        ex.evaluate(ex.PStar((), (("X", X),)), family)
    zero = ex.Ratio(ex.Const(1), ex.Const(0))
    with pytest.raises(ex.ZeroDenominator):
        ex.evaluate(zero, family)
    limited = interventional_family(family.model, up_to=0)
    with pytest.raises(ex.MissingTable):
        ex.evaluate(ex.PStar((("X", "0"),), (("Y", "1"),)), limited)


def test_binding_maps_tokens_to_values(family):
    e = ex.PStar((("X", "x"),), (("Y", "y"),))
    direct = ex.evaluate(ex.PStar((("X", "1"),), (("Y", "0"),)), family)
    assert ex.evaluate(e, family, binding={"x": "1", "y": "0"}) == direct


def test_renderings():
    w = Bound("w1", "W")
    e = ex.SumOver(
        (w,),
        ex.Product((ex.PStar((("X", "x"),), (("W", w),)), ex.PStar((("W", w), ("Z", "z")), (("X", "x'"), ("Y", "y"))))),
    )
    assert ex.render(e) == "sum_{w1} P[x](w1) * P[w1,z](x', y)"
    assert ex.render(e, "latex") == r"\sum_{w_{1}} P_{x}(w_{1})P_{w_{1},z}(x', y)"
    assert ex.render(ex.PStar((("D", "0"),), (("Z", "1"),))) == "P[D=0](Z=1)"
    with pytest.raises(ValueError):
        ex.render(e, "html")


@given(st.sampled_from(["0", "1", "y", "u"]))
def test_tokens_that_do_not_read_as_the_variable_are_qualified(tok):
    text = ex.render(ex.PStar((), (("Y", tok),)))
    assert text == ("P(y)" if tok == "y" else f"P(Y={tok})")
