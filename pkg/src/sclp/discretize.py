"""Finite LP assembly from a problem, an atom grid and a test-function family.

The infinite-dimensional measure LP is imaged onto atom weights: one column
per mu0 atom and per mu1 atom, one adjoint equality row per test function,
a probability-mass row where required, and one inequality row per budget.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisFamily
from .model import (DISCOUNTED, JUMP, LONG_TERM_AVERAGE, ProblemSpec, eval2,
                    eval_Af, eval_Bf)

log = logging.getLogger(__name__)

NORMALIZED = "normalized"
RESCALED = "rescaled"


class GridError(ValueError):
    """Grid construction failed (e.g. a state node with no admissible control)."""


@dataclass(frozen=True)
class Grid:
    """Atom sets for the two occupation measures plus the distinct state nodes."""

    mu0_atoms: np.ndarray  # (n0, 2) columns (x, u)
    mu1_atoms: np.ndarray  # (n1, 2)
    state_nodes: np.ndarray  # sorted distinct x values
    control_nodes: np.ndarray
    n_dropped_jump_atoms: int = 0

    @property
    def n0(self) -> int:
        return self.mu0_atoms.shape[0]

    @property
    def n1(self) -> int:
        return self.mu1_atoms.shape[0]


def build_grid(problem: ProblemSpec, n_state: int, n_control: int) -> Grid:
    """Uniform product grid of admissible atoms.

    Jump problems additionally drop mu1 atoms whose jump target leaves the
    state interval; the drop count is recorded on the grid.
    """
    if n_state < 3:
        raise GridError("n_state must be at least 3")
    if n_control < 1:
        raise GridError("n_control must be at least 1")
    st, ct = problem.state, problem.control
    state_nodes = np.linspace(st.x_lo, st.x_hi, n_state)
    if n_control == 1:
        control_nodes = np.array([0.5 * (ct.u_lo + ct.u_hi)])
    else:
        control_nodes = np.linspace(ct.u_lo, ct.u_hi, n_control)

    xx, uu = np.meshgrid(state_nodes, control_nodes, indexing="ij")
    admissible = ct.admits(xx, uu)
    for i, x in enumerate(state_nodes):
        if not admissible[i].any():
            raise GridError(f"no admissible control at state node x={x!r}")
    mu0_atoms = np.column_stack([xx[admissible], uu[admissible]])

    mu1_atoms = mu0_atoms
    dropped = 0
    if problem.gen_b.kind == JUMP:
        targets = mu0_atoms[:, 0] + eval2(problem.gen_b.displacement,
                                          mu0_atoms[:, 0], mu0_atoms[:, 1])
        inside = st.contains(targets)
        dropped = int((~inside).sum())
        mu1_atoms = mu0_atoms[inside]

    return Grid(mu0_atoms=mu0_atoms, mu1_atoms=mu1_atoms.copy(),
                state_nodes=state_nodes, control_nodes=control_nodes,
                n_dropped_jump_atoms=dropped)


@dataclass(frozen=True)
class DiscreteLP:
    """min c.w  s.t.  A_eq w = b_eq,  A_ub w <= b_ub,  w >= 0.

    Columns are the mu0 atom weights followed by the mu1 atom weights.
    """

    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    n0: int
    n1: int
    eq_labels: tuple[str, ...]
    ub_labels: tuple[str, ...]
    name: str = "lp"

    @property
    def n_cols(self) -> int:
        return self.c.size

    def column_names(self) -> list[str]:
        return ([f"W0_{j:06d}" for j in range(self.n0)]
                + [f"W1_{j:06d}" for j in range(self.n1)])

    def to_csv(self, prefix: str) -> list[str]:
        """Write objective/eq/ineq as three plain CSV files; returns the paths."""
        paths = []
        p = f"{prefix}_objective.csv"
        np.savetxt(p, self.c.reshape(1, -1), delimiter=",")
        paths.append(p)
        p = f"{prefix}_eq.csv"
        np.savetxt(p, np.column_stack([self.a_eq, self.b_eq]) if self.a_eq.size
                   else np.zeros((0, self.n_cols + 1)), delimiter=",")
        paths.append(p)
        p = f"{prefix}_ineq.csv"
        np.savetxt(p, np.column_stack([self.a_ub, self.b_ub]) if self.a_ub.size
                   else np.zeros((0, self.n_cols + 1)), delimiter=",")
        paths.append(p)
        return paths


def _adjoint_coefficients(problem: ProblemSpec, grid: Grid, f):
    """Row coefficients (Af on mu0 atoms, Bf on mu1 atoms) for one test function."""
    x0, u0 = grid.mu0_atoms[:, 0], grid.mu0_atoms[:, 1]
    a = eval_Af(problem.gen_a, f, x0, u0, state=problem.state)
    if grid.n1:
        x1, u1 = grid.mu1_atoms[:, 0], grid.mu1_atoms[:, 1]
        b = eval_Bf(problem.gen_b, f, x1, u1, state=problem.state)
    else:
        b = np.zeros(0)
    return a, b


def _budget_rows(problem: ProblemSpec, grid: Grid, rhs_scale: float):
    rows, rhs, labels = [], [], []
    x0, u0 = grid.mu0_atoms[:, 0], grid.mu0_atoms[:, 1]
    for i, bud in enumerate(problem.costs.budgets):
        gv = eval2(bud.g, x0, u0)
        if grid.n1:
            hv = eval2(bud.h, grid.mu1_atoms[:, 0], grid.mu1_atoms[:, 1])
        else:
            hv = np.zeros(0)
        rows.append(np.concatenate([gv, hv]))
        rhs.append(rhs_scale * bud.cap)
        labels.append(f"BUD{i:04d}")
    return rows, rhs, labels


def _assemble(problem: ProblemSpec, grid: Grid, basis: BasisFamily,
              row_fn, mass_row: bool, obj_scale: float, budget_scale: float,
              name: str) -> DiscreteLP:
    if len(basis.functions) < 2:
        raise ValueError("basis must contain at least 2 elements")
    n = grid.n0 + grid.n1
    eq_rows, eq_rhs, eq_labels = [], [], []
    dropped = 0
    for k, f in enumerate(basis.functions):
        row, rhs = row_fn(f)
        if not np.any(row) and rhs == 0.0:
            # The f = 1 row (and any spline not touching an atom) is all-zero.
            dropped += 1
            continue
        eq_rows.append(row)
        eq_rhs.append(rhs)
        eq_labels.append(f"ADJ{k:04d}")
    if dropped:
        log.info("%s: dropped %d all-zero adjoint rows", name, dropped)
    if mass_row:
        row = np.zeros(n)
        row[:grid.n0] = 1.0
        eq_rows.append(row)
        eq_rhs.append(1.0)
        eq_labels.append("MASS")

    ub_rows, ub_rhs, ub_labels = _budget_rows(problem, grid, budget_scale)

    x0, u0 = grid.mu0_atoms[:, 0], grid.mu0_atoms[:, 1]
    c0v = eval2(problem.costs.c0, x0, u0)
    if grid.n1:
        c1v = eval2(problem.costs.c1, grid.mu1_atoms[:, 0], grid.mu1_atoms[:, 1])
    else:
        c1v = np.zeros(0)
    c = obj_scale * np.concatenate([c0v, c1v])

    return DiscreteLP(
        c=c,
        a_eq=np.array(eq_rows) if eq_rows else np.zeros((0, n)),
        b_eq=np.array(eq_rhs),
        a_ub=np.array(ub_rows) if ub_rows else np.zeros((0, n)),
        b_ub=np.array(ub_rhs),
        n0=grid.n0, n1=grid.n1,
        eq_labels=tuple(eq_labels), ub_labels=tuple(ub_labels),
        name=name,
    )


def assemble_lta_lp(problem: ProblemSpec, grid: Grid, basis: BasisFamily) -> DiscreteLP:
    """Long-term average LP: adjoint rows, mass row, budget rows, running objective."""

    def row_fn(f):
        a, b = _adjoint_coefficients(problem, grid, f)
        return np.concatenate([a, b]), 0.0

    return _assemble(problem, grid, basis, row_fn, mass_row=True,
                     obj_scale=1.0, budget_scale=1.0,
                     name=f"{problem.name}:lta")


def _nu0_weights(problem: ProblemSpec, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Match nu0 support points to state nodes; error on mass or support mismatch."""
    pts = np.array([x for x, _ in problem.criterion.nu0])
    probs = np.array([p for _, p in problem.criterion.nu0])
    if abs(probs.sum() - 1.0) > 1e-12:
        raise ValueError(f"nu0 mass {probs.sum()!r} differs from 1 by more than 1e-12")
    nodes = grid.state_nodes
    idx = np.searchsorted(nodes, pts)
    idx = np.clip(idx, 0, nodes.size - 1)
    left = np.clip(idx - 1, 0, nodes.size - 1)
    pick = np.where(np.abs(nodes[left] - pts) < np.abs(nodes[idx] - pts), left, idx)
    if np.any(np.abs(nodes[pick] - pts) > 1e-9):
        raise ValueError("nu0 has support off the state nodes")
    return nodes[pick], probs


def assemble_discounted_lp(problem: ProblemSpec, grid: Grid, basis: BasisFamily,
                           form: str = NORMALIZED) -> DiscreteLP:
    """Discounted LP in normalized or rescaled form.

    normalized: adjoint rows use Af + alpha*(nu0-average of f - f); the mass
    row forces total mu0 weight 1; the objective carries the 1/alpha factor
    and budget rows the alpha factor.

    rescaled: adjoint rows use Af - alpha*f with right-hand side equal to
    minus the nu0-average of f; there is no explicit mass row (the constant
    test-function row forces total mu0 weight 1/alpha); objective and budget
    rows are unscaled.
    """
    if problem.criterion.kind != DISCOUNTED:
        raise ValueError("assemble_discounted_lp requires a discounted criterion")
    if form not in (NORMALIZED, RESCALED):
        raise ValueError(f"unknown discounted form: {form!r}")
    alpha = problem.criterion.alpha
    nu_x, nu_p = _nu0_weights(problem, grid)

    def row_fn(f):
        a, b = _adjoint_coefficients(problem, grid, f)
        fbar = float(np.dot(f.value(nu_x), nu_p))
        fx = f.value(grid.mu0_atoms[:, 0])
        if form == NORMALIZED:
            return np.concatenate([a + alpha * (fbar - fx), b]), 0.0
        return np.concatenate([a - alpha * fx, b]), -fbar

    if form == NORMALIZED:
        return _assemble(problem, grid, basis, row_fn, mass_row=True,
                         obj_scale=1.0 / alpha, budget_scale=alpha,
                         name=f"{problem.name}:disc-normalized")
    return _assemble(problem, grid, basis, row_fn, mass_row=False,
                     obj_scale=1.0, budget_scale=1.0,
                     name=f"{problem.name}:disc-rescaled")


def constraint_residual(lp: DiscreteLP, weights) -> tuple[float, float]:
    """Infinity norms of the equality residual and of positive budget violations.

    weights may be a MeasurePair or a flat vector over all columns.
    """
    w = np.asarray(getattr(weights, "flat_weights", weights), dtype=float)
    if w.size != lp.n_cols:
        raise ValueError(f"weight vector has {w.size} entries, LP has {lp.n_cols} columns")
    eq = float(np.abs(lp.a_eq @ w - lp.b_eq).max()) if lp.b_eq.size else 0.0
    if lp.b_ub.size:
        viol = np.maximum(lp.a_ub @ w - lp.b_ub, 0.0)
        ub = float(viol.max())
    else:
        ub = 0.0
    return eq, ub
