"""Finite-difference reference solver for the truncated problem.

Second-order three-point discretization of (p y')' + (lam s - q) y = 0 on
[tau, tau + L], written as the symmetric pencil K y = lam S y with S diagonal.
Eigenvalues come from Sturm-sequence inertia counts plus bisection, so the
number of eigenvalues below any cap is exact for the discrete problem.

Coefficients enter through exact cell averages: q and s are averaged over the
dual cell around each node, p through the harmonic mean over each grid
interval. Jumps anywhere inside a cell then cost O(h^2) rather than O(h), so
no snapping of breakpoints to nodes is needed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .coeffs import PeriodicCoefficients, ensure_valid, primitive

BOUNDARY_KINDS = ("dirichlet", "periodic", "antiperiodic")
MIN_POINTS_PER_CELL = 64
BISECT_RTOL = 1e-12
DEFAULT_GRIDSIZE_PER_CELL = 1024


class IncommensurateGrid(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteOperator:
    n_points: int
    diag: np.ndarray
    offdiag: np.ndarray
    mass_diag: np.ndarray
    boundary_kind: str
    tau: float
    length: float
    h: float
    corner: float = 0.0

    def counts(self, shifts) -> np.ndarray:
        """Number of eigenvalues strictly below each shift."""
        if self.boundary_kind == "dirichlet":
            return kernels.sturm_counts(self.diag, self.offdiag, self.mass_diag, shifts)
        return kernels.sturm_counts_cyclic(self.diag, self.offdiag, self.corner,
                                           self.mass_diag, shifts)

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """(K, S) as dense arrays; for tests on small grids."""
        n = self.n_points
        K = np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        if self.boundary_kind != "dirichlet":
            K[0, n - 1] += self.corner
            K[n - 1, 0] += self.corner
        return K, np.diag(self.mass_diag)

    def gershgorin_lower(self) -> float:
        radius = np.zeros(self.n_points)
        radius[:-1] += np.abs(self.offdiag)
        radius[1:] += np.abs(self.offdiag)
        if self.boundary_kind != "dirichlet":
            radius[0] += abs(self.corner)
            radius[-1] += abs(self.corner)
        return float(np.min((self.diag - radius) / self.mass_diag))


def _averages(coeffs, which, left, right):
    return (primitive(coeffs, which, right) - primitive(coeffs, which, left)) / (right - left)


def assemble(coeffs: PeriodicCoefficients, tau: float, n_cells: int, n_points: int,
             boundary_kind: str = "dirichlet", enforce_resolution: bool = True) -> DiscreteOperator:
    """Assemble the pencil on [tau, tau + n_cells a] with ``n_points`` unknowns.

    Dirichlet: unknowns at tau + i h, i = 1..M, h = L / (M + 1).
    Periodic / antiperiodic: unknowns at tau + i h, i = 0..M-1, h = L / M,
    with y(tau + L) = +-y(tau).

    At least 64 unknowns per cell are required; ``enforce_resolution=False``
    lifts that floor (commensurability is still checked) for tiny textbook grids.
    """
    ensure_valid(coeffs)
    if boundary_kind not in BOUNDARY_KINDS:
        raise ValueError(f"boundary_kind must be one of {BOUNDARY_KINDS}, got {boundary_kind!r}")
    if n_cells < 1 or int(n_cells) != n_cells:
        raise ValueError(f"n_cells must be a positive integer, got {n_cells!r}")
    M = int(n_points)
    if enforce_resolution and M < MIN_POINTS_PER_CELL * n_cells:
        raise IncommensurateGrid(
            f"gridsize {M} is below the minimum {MIN_POINTS_PER_CELL} points per cell "
            f"({MIN_POINTS_PER_CELL * n_cells} for {n_cells} cells)")
    if M % n_cells:
        raise IncommensurateGrid(f"gridsize {M} is not a multiple of the cell count {n_cells}")
    if boundary_kind != "dirichlet" and M < 3:
        raise ValueError("periodic wrap needs at least 3 unknowns")

    tau = float(tau)
    L = n_cells * coeffs.period_a
    if boundary_kind == "dirichlet":
        h = L / (M + 1)
        nodes = tau + h * np.arange(1, M + 1)
        # intervals between consecutive nodes, including the two boundary ones
        edges = tau + h * np.arange(M + 2)
    else:
        h = L / M
        nodes = tau + h * np.arange(M)
        edges = tau + h * np.arange(M + 1)

    p_half = h / (primitive(coeffs, "inv_p", edges[1:]) - primitive(coeffs, "inv_p", edges[:-1]))
    q_node = _averages(coeffs, "q", nodes - h / 2, nodes + h / 2)
    s_node = _averages(coeffs, "s", nodes - h / 2, nodes + h / 2)

    if boundary_kind == "dirichlet":
        # p_half[i] sits between node i and i + 1 (node 0 is the left boundary)
        p_left, p_right = p_half[:-1], p_half[1:]
        off = -p_half[1:-1] / h
        corner = 0.0
    else:
        # p_half[i] sits between node i and i + 1, node M wraps to node 0
        p_right = p_half
        p_left = np.roll(p_half, 1)
        off = -p_half[:-1] / h
        sign = 1.0 if boundary_kind == "periodic" else -1.0
        corner = -sign * p_half[-1] / h

    diag = (p_left + p_right) / h + q_node * h
    mass = s_node * h
    return DiscreteOperator(M, np.ascontiguousarray(diag), np.ascontiguousarray(off),
                            np.ascontiguousarray(mass), boundary_kind, tau, L, h, float(corner))


def eigenvalues_below(op: DiscreteOperator, lambda_cap: float) -> np.ndarray:
    """All eigenvalues of the pencil below ``lambda_cap``, ascending, to about
    1e-12 relative. The length always equals the inertia count at the cap."""
    n = int(op.counts([lambda_cap])[0])
    if n == 0:
        return np.empty(0)
    lo = np.full(n, min(op.gershgorin_lower(), lambda_cap) - 1.0)
    hi = np.full(n, float(lambda_cap))
    target = np.arange(n)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        active = (hi - lo) > BISECT_RTOL * np.maximum(np.abs(mid), 1.0)
        active &= (mid > lo) & (mid < hi)
        if not active.any():
            break
        c = op.counts(mid[active])
        below = c <= target[active]  # the (k+1)-th eigenvalue lies above mid
        idx = np.flatnonzero(active)
        lo[idx[below]] = mid[active][below]
        hi[idx[~below]] = mid[active][~below]
    return 0.5 * (lo + hi)


def richardson(h1: float, lam1, h2: float, lam2):
    """Eliminate the h^2 term from two grid solutions."""
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    return (h1 * h1 * lam2 - h2 * h2 * lam1) / (h1 * h1 - h2 * h2)


@dataclass(frozen=True)
class OracleSpectrum:
    values: np.ndarray
    coarse: np.ndarray
    fine: np.ndarray | None
    h: tuple[float, ...]
    boundary_kind: str


def oracle_spectrum(coeffs: PeriodicCoefficients, tau: float, n_cells: int, n_points: int,
                    lambda_cap: float, boundary_kind: str = "dirichlet",
                    extrapolate: bool = True) -> OracleSpectrum:
    """Eigenvalues below the cap on grid M and (optionally) 2M, Richardson
    combined. The count is fixed by the coarse grid; a count change between the
    two grids means an eigenvalue sits at the cap and is reported as an error."""
    op1 = assemble(coeffs, tau, n_cells, n_points, boundary_kind)
    lam1 = eigenvalues_below(op1, lambda_cap)
    if not extrapolate:
        return OracleSpectrum(lam1, lam1, None, (op1.h,), boundary_kind)
    op2 = assemble(coeffs, tau, n_cells, 2 * n_points, boundary_kind)
    lam2 = eigenvalues_below(op2, lambda_cap)
    if len(lam2) != len(lam1):
        raise ValueError(
            f"eigenvalue count below cap {lambda_cap!r} changes with the grid "
            f"({len(lam1)} vs {len(lam2)}); choose a cap away from the spectrum")
    return OracleSpectrum(richardson(op1.h, lam1, op2.h, lam2), lam1, lam2,
                          (op1.h, op2.h), boundary_kind)


@dataclass(frozen=True)
class StateComparison:
    predicted: float
    oracle: float
    rel_err: float
    label: str = ""


@dataclass(frozen=True)
class ComparisonReport:
    status: str
    rel_tol: float
    n_predicted: int
    n_oracle: int
    matches: tuple[StateComparison, ...]
    worst_rel_err: float
    unmatched_predicted: tuple[float, ...] = ()
    unmatched_oracle: tuple[float, ...] = ()
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "PASS"


def _rel(a, b):
    return abs(a - b) / max(abs(a), 1.0)


def compare(oracle_vals, predicted, rel_tol: float, labels=None) -> ComparisonReport:
    """Match predicted and oracle eigenvalues one-to-one in sorted order.

    ``predicted`` is a TruncatedSpectrum or a plain sequence of values. On a
    count mismatch the lists are aligned greedily (nearest-first walk) so the
    unmatched values can be listed, and the report fails.
    """
    if hasattr(predicted, "merged"):
        merged = predicted.merged
        pred = np.array([s.lam for s in merged])
        labels = [_label(s) for s in merged]
    else:
        pred = np.sort(np.asarray(predicted, dtype=float))
        labels = list(labels) if labels is not None else [""] * len(pred)
    orc = np.sort(np.asarray(oracle_vals, dtype=float))

    if len(pred) == len(orc):
        matches = tuple(StateComparison(float(p), float(o), _rel(p, o), lab)
                        for p, o, lab in zip(pred, orc, labels))
        worst = max((m.rel_err for m in matches), default=0.0)
        status = "PASS" if worst < rel_tol else "FAIL"
        msg = "" if status == "PASS" else f"worst relative error {worst:.3e} >= {rel_tol:g}"
        return ComparisonReport(status, rel_tol, len(pred), len(orc), matches, worst, message=msg)

    matches, un_p, un_o = [], [], []
    i = j = 0
    while i < len(pred) and j < len(orc):
        if _rel(pred[i], orc[j]) < rel_tol:
            matches.append(StateComparison(float(pred[i]), float(orc[j]), _rel(pred[i], orc[j]), labels[i]))
            i += 1
            j += 1
        elif pred[i] < orc[j]:
            un_p.append(float(pred[i]))
            i += 1
        else:
            un_o.append(float(orc[j]))
            j += 1
    un_p.extend(float(v) for v in pred[i:])
    un_o.extend(float(v) for v in orc[j:])
    worst = max((m.rel_err for m in matches), default=0.0)
    msg = (f"count mismatch: {len(pred)} predicted vs {len(orc)} oracle; "
           f"unmatched predicted {un_p}, unmatched oracle {un_o}")
    return ComparisonReport("FAIL", rel_tol, len(pred), len(orc), tuple(matches), worst,
                            tuple(un_p), tuple(un_o), msg)


def _label(state) -> str:
    if hasattr(state, "band_index"):
        return f"band {state.band_index} j={state.j}"
    return f"gap {state.gap_index} {state.subtype}"
