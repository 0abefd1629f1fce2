import numpy as np
import pytest

from sclp.basis import BasisFamily
from sclp.discretize import assemble_lta_lp, build_grid
from sclp.model import DISCOUNTED, GRADIENT, JUMP, LONG_TERM_AVERAGE
from sclp.problems import (ProblemFileError, finite_fuel_problem,
                           inventory_problem, load_problem, parse_function)
from sclp.simplex import solve

INVENTORY_INI = """\
[problem]
name = file-inventory
[state]
x_lo = -6
x_hi = 4
[control]
u_lo = 0
u_hi = 8
admissible = all
[dynamics]
drift = constant -1
diffusion = constant 1
[singular]
kind = jump
displacement = control
[costs]
c0 = piecewise_linear 0 2 1
c1 = linear 1 0 0.5
[criterion]
kind = lta
"""

FUEL_INI = """\
[problem]
name = file-fuel
[state]
x_lo = -4
x_hi = 4
[control]
u_lo = -1
u_hi = 1
admissible = abs_equals 1
[dynamics]
drift = constant 0
diffusion = constant 1
[singular]
kind = gradient
direction = control
[costs]
c0 = quadratic 0 0 0 1 0
c1 = constant 0
[criterion]
kind = discounted
alpha = 1.0
nu0 = 0:1.0
[budget.fuel]
g = constant 0
h = abs_control 0 1
cap = 1.0
"""


def test_builtin_shapes():
    inv = inventory_problem()
    assert inv.criterion.kind == LONG_TERM_AVERAGE
    assert inv.gen_b.kind == JUMP
    fuel = finite_fuel_problem()
    assert fuel.criterion.kind == DISCOUNTED
    assert fuel.gen_b.kind == GRADIENT
    assert len(fuel.costs.budgets) == 1
    # Fuel density is bounded away from zero on the admissible set |u| = 1.
    assert fuel.costs.budgets[0].h(0.0, -1.0) == 1.0


def test_file_matches_builtin(tmp_path):
    path = tmp_path / "inv.ini"
    path.write_text(INVENTORY_INI)
    p_file = load_problem(str(path))
    p_builtin = inventory_problem()
    assert p_file.name == "file-inventory"
    g = build_grid(p_file, 21, 5)
    b = BasisFamily.cubic_on_interval(-6.0, 4.0, 8)
    obj_file = solve(assemble_lta_lp(p_file, g, b)).objective
    g2 = build_grid(p_builtin, 21, 5)
    obj_builtin = solve(assemble_lta_lp(p_builtin, g2, b)).objective
    assert obj_file == pytest.approx(obj_builtin, rel=1e-12)


def test_file_fuel_loads(tmp_path):
    path = tmp_path / "fuel.ini"
    path.write_text(FUEL_INI)
    p = load_problem(str(path))
    assert p.criterion.alpha == 1.0
    assert p.criterion.nu0 == ((0.0, 1.0),)
    assert p.costs.budgets[0].cap == 1.0
    assert p.gen_b.kind == GRADIENT
    adm = p.control.admits(np.zeros(3), np.array([-1.0, 0.0, 1.0]))
    assert list(adm) == [True, False, True]


def test_catalog_functions():
    x = np.array([-1.0, 0.0, 2.0])
    u = np.array([0.5, 0.5, 0.5])
    assert np.allclose(parse_function("constant 3")(x, u), 3.0)
    assert np.allclose(parse_function("linear 1 2 3")(x, u), 1 + 2 * x + 3 * u)
    assert np.allclose(parse_function("quadratic 0 0 0 1 2")(x, u),
                       x ** 2 + 2 * u ** 2)
    assert np.allclose(parse_function("piecewise_linear 0 2 1")(x, u),
                       2 * np.maximum(-x, 0) + np.maximum(x, 0))
    assert np.allclose(parse_function("abs_control 1 2")(x, u), 1 + 2 * np.abs(u))
    assert np.allclose(parse_function("control")(x, u), u)
    tab = parse_function("tabulated -1:0 0:1 2:3")
    assert np.allclose(tab(x, u), [0.0, 1.0, 3.0])
    assert tab(np.array([-0.5]), np.array([0.0]))[0] == pytest.approx(0.5)


def test_catalog_errors():
    for spec in ("", "mystery 1", "constant", "constant a", "linear 1 2",
                 "control 1", "tabulated 0:1", "tabulated 0:1 0:2",
                 "tabulated 0-1 1-2"):
        with pytest.raises(ProblemFileError):
            parse_function(spec)


def test_load_errors(tmp_path):
    with pytest.raises(ProblemFileError, match="cannot read"):
        load_problem(str(tmp_path / "missing.ini"))
    bad = tmp_path / "bad.ini"
    bad.write_text("[state]\nx_lo = 0\nx_hi = 1\n")
    with pytest.raises(ProblemFileError, match="missing"):
        load_problem(str(bad))
    bad.write_text(INVENTORY_INI.replace("kind = jump", "kind = teleport"))
    with pytest.raises(ProblemFileError, match="singular kind"):
        load_problem(str(bad))
    bad.write_text(INVENTORY_INI.replace("kind = lta", "kind = mystery"))
    with pytest.raises(ProblemFileError, match="criterion"):
        load_problem(str(bad))
    bad.write_text(INVENTORY_INI.replace("admissible = all",
                                         "admissible = sometimes"))
    with pytest.raises(ProblemFileError, match="admissible"):
        load_problem(str(bad))
