import numpy as np
import pytest

from sclp.basis import BasisFamily
from sclp.discretize import assemble_discounted_lp, assemble_lta_lp, build_grid
from sclp.problems import finite_fuel_problem, inventory_problem
from sclp.simplex import export_mps, parse_mps, solve


def small_lps():
    p = inventory_problem()
    g = build_grid(p, 11, 3)
    b = BasisFamily.cubic_on_interval(p.state.x_lo, p.state.x_hi, 5)
    yield assemble_lta_lp(p, g, b)
    p = finite_fuel_problem()
    g = build_grid(p, 11, 2)
    b = BasisFamily.cubic_on_interval(p.state.x_lo, p.state.x_hi, 5)
    yield assemble_discounted_lp(p, g, b)


@pytest.mark.parametrize("idx", [0, 1])
def test_roundtrip_exact(idx):
    lp = list(small_lps())[idx]
    back = parse_mps(export_mps(lp))
    assert np.array_equal(back.c, lp.c)
    assert np.array_equal(back.a_eq, lp.a_eq)
    assert np.array_equal(back.b_eq, lp.b_eq)
    assert np.array_equal(back.a_ub, lp.a_ub)
    assert np.array_equal(back.b_ub, lp.b_ub)
    assert back.n0 == lp.n0 and back.n1 == lp.n1
    assert back.eq_labels == lp.eq_labels
    assert back.ub_labels == lp.ub_labels


def test_export_idempotent():
    lp = next(iter(small_lps()))
    text = export_mps(lp)
    assert export_mps(parse_mps(text)) == text


def test_sections_present():
    lp = next(iter(small_lps()))
    text = export_mps(lp, name="CHECK")
    lines = text.splitlines()
    assert lines[0].startswith("NAME") and "CHECK" in lines[0]
    for section in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
        assert section in lines
    assert " N  COST" in lines


def test_roundtrip_preserves_optimum():
    for lp in small_lps():
        s0 = solve(lp)
        s1 = solve(parse_mps(export_mps(lp)))
        assert s0.status == s1.status == "optimal"
        assert s1.objective == pytest.approx(s0.objective, rel=1e-12)


def test_parse_rejects_unknown_row_type():
    bad = "NAME x\nROWS\n G  R1\nENDATA\n"
    with pytest.raises(ValueError, match="row type"):
        parse_mps(bad)


def test_parse_rejects_unknown_label():
    bad = ("NAME x\nROWS\n N  COST\n E  R1\nCOLUMNS\n"
           "    W0_000000  R2        1.0\nENDATA\n")
    with pytest.raises(ValueError, match="unknown row label"):
        parse_mps(bad)
