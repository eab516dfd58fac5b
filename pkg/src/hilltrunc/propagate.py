"""Transfer matrices of Hill's equation on the state (y, p y').

All propagators act on the column (y(x0), p(x0) y'(x0)) and return
(y(x1), p(x1) y'(x1)). In this chart every transfer matrix is unimodular and
the state stays continuous across jumps of p. The discriminant is the trace
of the one-period propagator at base point 0; for p(0) = 1 this is the usual
phi_1(a) + phi_2'(a).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .coeffs import PeriodicCoefficients, cosine_series

RTOL = 1e-12
ATOL = 1e-14


class PropagationError(ArithmeticError):
    """Integration failed (step-size underflow); the message carries the location."""


@dataclass(frozen=True)
class TransferMatrix:
    m11: float
    m12: float
    m21: float
    m22: float

    @classmethod
    def identity(cls) -> "TransferMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, arr) -> "TransferMatrix":
        arr = np.asarray(arr, dtype=float).reshape(2, 2)
        return cls(float(arr[0, 0]), float(arr[0, 1]), float(arr[1, 0]), float(arr[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    def apply(self, y: float, py: float) -> tuple[float, float]:
        return (self.m11 * y + self.m12 * py, self.m21 * y + self.m22 * py)

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        return TransferMatrix(
            self.m11 * other.m11 + self.m12 * other.m21,
            self.m11 * other.m12 + self.m12 * other.m22,
            self.m21 * other.m11 + self.m22 * other.m21,
            self.m21 * other.m12 + self.m22 * other.m22,
        )

    def multipliers(self) -> tuple[complex, complex]:
        """Eigenvalues rho, 1/rho (Floquet multipliers when this is a monodromy)."""
        tr = self.trace
        disc = complex(tr * tr / 4.0 - self.det)
        root = disc ** 0.5
        return (tr / 2.0 + root, tr / 2.0 - root)


@dataclass(frozen=True)
class SolutionSamples:
    grid: np.ndarray
    values_y: np.ndarray
    values_py: np.ndarray
    lam: float
    c1: float | None = None
    c2: float | None = None


def segment_pieces(coeffs: PeriodicCoefficients, x0: float, x1: float):
    """Constant pieces covering [x0, x1] as arrays (widths, p, q, s)."""
    a = coeffs.period_a
    segs = coeffs.segments
    starts = coeffs.breakpoints
    nseg = len(segs)
    k = math.floor(x0 / a)
    r = x0 - k * a
    if r >= a:
        k += 1
        r = 0.0
    i = int(np.searchsorted(starts, r, side="right") - 1)
    i = min(max(i, 0), nseg - 1)
    widths, ps, qs, ss = [], [], [], []
    x = x0
    while x < x1:
        end = (k * a + starts[i + 1]) if i + 1 < nseg else (k + 1) * a
        stop = min(end, x1)
        w = stop - x
        if w > 0:
            seg = segs[i]
            widths.append(w)
            ps.append(seg.p)
            qs.append(seg.q)
            ss.append(seg.s)
        x = stop
        i += 1
        if i == nseg:
            i = 0
            k += 1
    return (np.array(widths, dtype=float), np.array(ps, dtype=float),
            np.array(qs, dtype=float), np.array(ss, dtype=float))


def propagate(coeffs: PeriodicCoefficients, lam: float, x0: float, x1: float) -> TransferMatrix:
    """Transfer matrix of the equation at spectral parameter ``lam`` from x0 to x1."""
    if x1 < x0:
        raise ValueError(f"propagate needs x0 <= x1, got {x0!r} > {x1!r}")
    if x1 == x0:
        return TransferMatrix.identity()
    if coeffs.smooth:
        try:
            m = kernels.cosine_transfer(cosine_series(coeffs), coeffs.period_a, float(lam),
                                        float(x0), float(x1), RTOL, ATOL)
        except FloatingPointError as exc:
            raise PropagationError(f"lambda={lam!r}, interval [{x0!r}, {x1!r}]: {exc}") from None
        return TransferMatrix(*m)
    w, p, q, s = segment_pieces(coeffs, float(x0), float(x1))
    return TransferMatrix(*kernels.transfer_product(w, p, q, s, float(lam)))


def propagate_many(coeffs: PeriodicCoefficients, lams, x0: float, x1: float) -> np.ndarray:
    """Propagators for an array of lambdas; rows are (m11, m12, m21, m22)."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if coeffs.smooth:
        return np.array([propagate(coeffs, lam, x0, x1).as_array().ravel() for lam in lams])
    if x1 < x0:
        raise ValueError(f"propagate needs x0 <= x1, got {x0!r} > {x1!r}")
    w, p, q, s = segment_pieces(coeffs, float(x0), float(x1))
    return kernels.transfer_product_many(w, p, q, s, lams)


def monodromy(coeffs: PeriodicCoefficients, lam: float, tau: float = 0.0) -> TransferMatrix:
    """One-period propagator from tau to tau + a."""
    return propagate(coeffs, lam, tau, tau + coeffs.period_a)


def discriminant(coeffs: PeriodicCoefficients, lam: float) -> float:
    return monodromy(coeffs, lam, 0.0).trace


def discriminant_many(coeffs: PeriodicCoefficients, lams) -> np.ndarray:
    m = propagate_many(coeffs, lams, 0.0, coeffs.period_a)
    return m[:, 0] + m[:, 3]


def solve_ivp(coeffs: PeriodicCoefficients, lam: float, tau: float, y0: float, py0: float,
              grid) -> SolutionSamples:
    """Sample the solution with state (y0, py0) at tau on an increasing grid
    starting at tau."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-D sequence")
    if grid[0] != tau:
        raise ValueError(f"grid must start at tau={tau!r}, starts at {grid[0]!r}")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    ys = np.empty_like(grid)
    pys = np.empty_like(grid)
    ys[0], pys[0] = y0, py0
    y, py = float(y0), float(py0)
    for i in range(1, len(grid)):
        y, py = propagate(coeffs, lam, grid[i - 1], grid[i]).apply(y, py)
        ys[i], pys[i] = y, py
    return SolutionSamples(grid, ys, pys, float(lam))


def value_at(coeffs: PeriodicCoefficients, lam: float, x0: float, state, x: float):
    """State at x >= x0 of the solution with the given state at x0."""
    return propagate(coeffs, lam, x0, x).apply(*state)
