"""Test-function families: cubic B-splines with exact analytic derivatives.

The adjoint rows of the measure LPs need test functions f that are twice
continuously differentiable with compact support, together with exact f'
and f''.  Uniform cardinal cubic B-splines provide both; the family also
carries an explicit constant element so the span contains f = 1 (which
generates the mass condition in the rescaled discounted form).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class C2Function:
    """A twice continuously differentiable function with analytic derivatives.

    value, d1 and d2 must accept and return numpy arrays (scalars are fine
    too; they are promoted on evaluation).
    """

    def __init__(self, value: Callable, d1: Callable, d2: Callable, name: str = "f"):
        self._value = value
        self._d1 = d1
        self._d2 = d2
        self.name = name

    def value(self, x):
        return np.asarray(self._value(np.asarray(x, dtype=float)), dtype=float)

    def d1(self, x):
        return np.asarray(self._d1(np.asarray(x, dtype=float)), dtype=float)

    def d2(self, x):
        return np.asarray(self._d2(np.asarray(x, dtype=float)), dtype=float)

    def __repr__(self):
        return f"C2Function({self.name})"


def constant_one() -> C2Function:
    """The constant function f = 1; its derivatives are exactly zero."""
    return C2Function(
        lambda x: np.ones_like(x),
        lambda x: np.zeros_like(x),
        lambda x: np.zeros_like(x),
        name="1",
    )


# Cardinal cubic B-spline N(s) supported on [0, 4], unit knot spacing.
# Piecewise cubic polynomials; C^2 at the interior knots.
def _cardinal_value(s):
    return np.select(
        [(0.0 <= s) & (s < 1.0), (1.0 <= s) & (s < 2.0),
         (2.0 <= s) & (s < 3.0), (3.0 <= s) & (s <= 4.0)],
        [s ** 3 / 6.0,
         (-3.0 * s ** 3 + 12.0 * s ** 2 - 12.0 * s + 4.0) / 6.0,
         (3.0 * s ** 3 - 24.0 * s ** 2 + 60.0 * s - 44.0) / 6.0,
         (4.0 - s) ** 3 / 6.0],
        default=0.0,
    )


def _cardinal_d1(s):
    return np.select(
        [(0.0 <= s) & (s < 1.0), (1.0 <= s) & (s < 2.0),
         (2.0 <= s) & (s < 3.0), (3.0 <= s) & (s <= 4.0)],
        [s ** 2 / 2.0,
         (-9.0 * s ** 2 + 24.0 * s - 12.0) / 6.0,
         (9.0 * s ** 2 - 48.0 * s + 60.0) / 6.0,
         -((4.0 - s) ** 2) / 2.0],
        default=0.0,
    )


def _cardinal_d2(s):
    return np.select(
        [(0.0 <= s) & (s < 1.0), (1.0 <= s) & (s < 2.0),
         (2.0 <= s) & (s < 3.0), (3.0 <= s) & (s <= 4.0)],
        [s,
         -3.0 * s + 4.0,
         3.0 * s - 8.0,
         4.0 - s],
        default=0.0,
    )


class CubicBSpline(C2Function):
    """Cubic B-spline on uniform knots t0, t0+h, ..., t0+4h (compact support)."""

    def __init__(self, t0: float, h: float, name: str | None = None):
        if h <= 0:
            raise ValueError("knot spacing must be positive")
        self.t0 = float(t0)
        self.h = float(h)
        super().__init__(self._v, self._g, self._gg, name=name or f"B[{t0:.6g},{t0 + 4 * h:.6g}]")

    @property
    def support(self) -> tuple[float, float]:
        return (self.t0, self.t0 + 4.0 * self.h)

    def _v(self, x):
        return _cardinal_value((x - self.t0) / self.h)

    def _g(self, x):
        return _cardinal_d1((x - self.t0) / self.h) / self.h

    def _gg(self, x):
        return _cardinal_d2((x - self.t0) / self.h) / self.h ** 2


@dataclass(frozen=True)
class BasisFamily:
    """An ordered family of C^2 test functions used for the adjoint rows.

    includes_constant records whether the constant function is a member
    (by convention it is appended last when present).
    """

    functions: tuple[C2Function, ...]
    includes_constant: bool = False

    def __len__(self):
        return len(self.functions)

    @staticmethod
    def cubic_on_interval(x_lo: float, x_hi: float, n: int,
                          include_constant: bool = True) -> "BasisFamily":
        """n uniform cubic B-splines whose supports all lie inside [x_lo, x_hi].

        Knot spacing h = (x_hi - x_lo) / (n + 3); element j is supported on
        [x_lo + j h, x_lo + (j + 4) h].
        """
        if n < 1:
            raise ValueError("need at least one spline element")
        if not x_lo < x_hi:
            raise ValueError("x_lo must be below x_hi")
        h = (x_hi - x_lo) / (n + 3)
        elems: list[C2Function] = [
            CubicBSpline(x_lo + j * h, h, name=f"bspl{j:03d}") for j in range(n)
        ]
        if include_constant:
            elems.append(constant_one())
        return BasisFamily(tuple(elems), includes_constant=include_constant)
