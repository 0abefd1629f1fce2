import numpy as np
import pytest

from sclp.basis import BasisFamily, C2Function, constant_one
from sclp.discretize import build_grid
from sclp.model import (DISCOUNTED, GRADIENT, JUMP, LONG_TERM_AVERAGE, Budget,
                        ControlSpace, CostSpec, Criterion, DomainError,
                        GeneratorA, GeneratorB, ProblemSpec, StateSpace,
                        eval_Af, eval_Bf, validate_conditions)
from sclp.problems import finite_fuel_problem, inventory_problem

QUAD = C2Function(lambda x: x ** 2, lambda x: 2.0 * x,
                  lambda x: np.full_like(x, 2.0), name="x^2")


def test_eval_Af_quadratic():
    # Af = (sigma^2/2) f'' + b f' with f = x^2: sigma^2 + 2 b x.
    gen = GeneratorA(drift=lambda x, u: -np.ones_like(x),
                     diffusion=lambda x, u: 2.0 * np.ones_like(x))
    assert eval_Af(gen, QUAD, 1.5, 0.0) == pytest.approx(4.0 - 3.0)
    out = eval_Af(gen, QUAD, np.array([0.0, 1.0]), np.array([0.0, 0.0]))
    assert np.allclose(out, [4.0, 2.0])


def test_eval_Af_annihilates_constant():
    gen = GeneratorA(drift=lambda x, u: x + u, diffusion=lambda x, u: 1.0 + x * x)
    x = np.linspace(-2, 2, 9)
    assert np.all(eval_Af(gen, constant_one(), x, x) == 0.0)


def test_eval_Bf_jump_and_gradient():
    jump = GeneratorB(kind=JUMP, displacement=lambda x, u: u)
    assert eval_Bf(jump, QUAD, 1.0, 2.0) == pytest.approx(9.0 - 1.0)
    grad = GeneratorB(kind=GRADIENT, direction=lambda x, u: -np.ones_like(x))
    assert eval_Bf(grad, QUAD, 3.0, 0.0) == pytest.approx(-6.0)
    assert eval_Bf(jump, constant_one(), 1.0, 2.0) == 0.0
    assert eval_Bf(grad, constant_one(), 1.0, 2.0) == 0.0


def test_domain_errors():
    st = StateSpace(-1.0, 1.0)
    gen = GeneratorA(drift=lambda x, u: x, diffusion=lambda x, u: np.ones_like(x))
    with pytest.raises(DomainError):
        eval_Af(gen, QUAD, 2.0, 0.0, state=st)
    jump = GeneratorB(kind=JUMP, displacement=lambda x, u: u)
    with pytest.raises(DomainError, match="jump target"):
        eval_Bf(jump, QUAD, 0.5, 1.0, state=st)


def test_generator_b_validation():
    with pytest.raises(ValueError):
        GeneratorB(kind="teleport")
    with pytest.raises(ValueError):
        GeneratorB(kind=JUMP)
    with pytest.raises(ValueError):
        GeneratorB(kind=GRADIENT)


def test_criterion_validation():
    with pytest.raises(ValueError):
        Criterion(kind=DISCOUNTED, alpha=0.0, nu0=((0.0, 1.0),))
    with pytest.raises(ValueError):
        Criterion(kind=DISCOUNTED, alpha=1.0)
    with pytest.raises(ValueError):
        Criterion(kind=DISCOUNTED, alpha=1.0, nu0=((0.0, 0.5), (1.0, 0.6)))
    Criterion(kind=LONG_TERM_AVERAGE)


def test_budget_cap_validation():
    zero = lambda x, u: np.zeros_like(x)
    with pytest.raises(ValueError):
        Budget(g=zero, h=zero, cap=0.0)
    with pytest.raises(ValueError):
        Budget(g=zero, h=zero, cap=np.inf)


def test_state_control_validation():
    with pytest.raises(ValueError):
        StateSpace(1.0, 1.0)
    with pytest.raises(ValueError):
        ControlSpace(2.0, 1.0)


def test_validate_conditions_builtins_pass():
    for problem, nc in ((inventory_problem(), 5), (finite_fuel_problem(), 2)):
        grid = build_grid(problem, 21, nc)
        rep = validate_conditions(problem, grid)
        assert rep.passed, rep.lines()
        assert rep.unit_annihilated
        assert rep.generators_finite


def test_validate_conditions_flags_negative_cost():
    p0 = inventory_problem()
    bad = ProblemSpec(state=p0.state, control=p0.control, gen_a=p0.gen_a,
                      gen_b=p0.gen_b,
                      costs=CostSpec(c0=lambda x, u: x,  # negative for x < 0
                                     c1=p0.costs.c1),
                      criterion=p0.criterion, name="bad")
    grid = build_grid(bad, 21, 5)
    rep = validate_conditions(bad, grid)
    assert not rep.costs_nonnegative
    assert not rep.passed


def test_validate_conditions_flags_unbounded_singular_cost():
    p0 = inventory_problem()
    zero = lambda x, u: np.zeros_like(np.asarray(x, float))
    bad = ProblemSpec(state=p0.state, control=p0.control, gen_a=p0.gen_a,
                      gen_b=p0.gen_b,
                      costs=CostSpec(c0=p0.costs.c0, c1=zero),
                      criterion=p0.criterion, name="freejumps")
    grid = build_grid(bad, 21, 5)
    rep = validate_conditions(bad, grid)
    assert not rep.singular_cost_bounded_away
