"""Dirichlet spectrum of Hill's equation truncated to [tau, tau + N a].

Two families of eigenvalues:

* band states: N - 1 per band, fixed by D(lam) = 2 cos(j pi / N), so they
  depend on N but not on tau;
* gap states: exactly one per finite gap, the root of y(tau + a; lam) = 0 for
  the solution with y(tau) = 0. That condition does not involve N, so the
  eigenvalue depends on tau but not on N.

A gap state is classified through the multiplier rho = (p y')(tau + a) /
(p y')(tau) of its eigenfunction: |rho| < 1 decays away from the left end,
|rho| > 1 away from the right end, rho = +-1 is a band-edge state.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from ._parallel import map_ordered
from .coeffs import PeriodicCoefficients, ensure_valid, sample
from .propagate import SolutionSamples, discriminant, monodromy, propagate_many, solve_ivp
from .spectrum import Band, BandEdges, Gap, _bisect, find_band_edges

EDGE_RHO_TOL = 1e-6
PRESCAN = 64
FINE_SCAN = 512
SWEEP_FLAT_RTOL = 1e-9
ENDPOINT_RTOL = 1e-6
TOUCH_TAU_TOL = 1e-12
DEFAULT_GRID_PER_CELL = 256


class GapStateError(RuntimeError):
    """The gap-state shooting function did not have exactly one root."""


class RootNotBracketed(RuntimeError):
    pass


class StaleEigenvalue(ValueError):
    pass


class GapSubtype(str, enum.Enum):
    SURFACE_LEFT = "SurfaceLeft"
    SURFACE_RIGHT = "SurfaceRight"
    BAND_EDGE_PERIODIC = "BandEdgePeriodic"
    BAND_EDGE_SEMI_PERIODIC = "BandEdgeSemiPeriodic"
    DEGENERATE_GAP = "DegenerateGap"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TruncationConfig:
    tau: float
    n_cells: int
    period_a: float

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError(f"n_cells must be a positive integer, got {self.n_cells!r}")
        if not self.period_a > 0:
            raise ValueError("period must be positive")
        object.__setattr__(self, "n_cells", int(self.n_cells))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def length(self) -> float:
        return self.n_cells * self.period_a


@dataclass(frozen=True)
class BandState:
    band_index: int
    j: int
    lam: float


@dataclass(frozen=True)
class GapState:
    gap_index: int
    kind: str
    lam: float
    multiplier_rho: float
    subtype: GapSubtype
    tau: float

    @property
    def log_abs_rho(self) -> float:
        return math.log(abs(self.multiplier_rho))


@dataclass(frozen=True)
class TruncatedSpectrum:
    config: TruncationConfig
    band_states: tuple[BandState, ...]
    gap_states: tuple[GapState, ...]
    lambda_cap: float

    @property
    def merged(self) -> list:
        """Band and gap states sorted by (lambda, type)."""
        keyed = [((s.lam, 0, s.band_index, s.j), s) for s in self.band_states]
        keyed += [((s.lam, 1, s.gap_index, 0), s) for s in self.gap_states]
        return [s for _, s in sorted(keyed, key=lambda t: t[0])]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([s.lam for s in self.merged])


@dataclass(frozen=True)
class Touch:
    tau: float
    lam: float
    edge: str  # "lower" or "upper"


@dataclass(frozen=True)
class TauSweep:
    gap_index: int
    gap: Gap
    tau_grid: np.ndarray
    lambdas: np.ndarray
    rhos: np.ndarray
    subtypes: tuple[GapSubtype, ...]
    extrema_count: int
    touches: tuple[Touch, ...] = ()

    @property
    def lambda_min(self) -> float:
        return float(min(np.min(self.lambdas), *(t.lam for t in self.touches))) if self.touches \
            else float(np.min(self.lambdas))

    @property
    def lambda_max(self) -> float:
        return float(max(np.max(self.lambdas), *(t.lam for t in self.touches))) if self.touches \
            else float(np.max(self.lambdas))


@dataclass(frozen=True)
class Eigenfunction:
    samples: SolutionSamples
    endpoint_residual: float
    mass_first_cell: float
    mass_last_cell: float
    cell_zero_residual: float


def _edges_for(coeffs, n_gaps, edges):
    if edges is not None and edges.n_gaps >= n_gaps:
        return edges
    return find_band_edges(coeffs, n_gaps)


def band_states(coeffs: PeriodicCoefficients, band_index: int, n_cells: int,
                edges: BandEdges | None = None) -> list[BandState]:
    """The N - 1 states of one band: roots of D(lam) = 2 cos(j pi / N), j = 1..N-1."""
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    edges = _edges_for(coeffs, band_index + 1, edges)
    band = edges.band(band_index)
    return map_ordered(lambda j: _band_root(coeffs, band, j, n_cells), range(1, n_cells))


def _band_root(coeffs, band: Band, j: int, n_cells: int) -> BandState:
    target = 2.0 * math.cos(j * math.pi / n_cells)
    g = lambda lam: discriminant(coeffs, lam) - target
    glo, ghi = g(band.lower), g(band.upper)
    if glo == 0.0:
        return BandState(band.index, j, band.lower)
    if glo * ghi > 0:
        raise RootNotBracketed(
            f"band {band.index}, j={j}: D - 2cos(j pi/N) has the same sign at both band edges "
            f"({glo!r}, {ghi!r})")
    return BandState(band.index, j, _bisect(g, band.lower, band.upper, glo))


def _classify(rho: float) -> GapSubtype:
    if abs(rho - 1.0) < EDGE_RHO_TOL:
        return GapSubtype.BAND_EDGE_PERIODIC
    if abs(rho + 1.0) < EDGE_RHO_TOL:
        return GapSubtype.BAND_EDGE_SEMI_PERIODIC
    return GapSubtype.SURFACE_LEFT if abs(rho) < 1.0 else GapSubtype.SURFACE_RIGHT


def gap_state(coeffs: PeriodicCoefficients, gap: Gap, tau: float) -> GapState:
    """The unique lam in the closed gap with y(tau) = y(tau + a) = 0."""
    a = coeffs.period_a
    if gap.degenerate:
        lam = 0.5 * (gap.lower + gap.upper)
        rho = monodromy(coeffs, lam, tau).m22
        return GapState(gap.index, gap.kind, lam, rho, GapSubtype.DEGENERATE_GAP, tau)

    # g has no zeros inside bands, so a small margin past the edges is safe
    # and keeps a root sitting exactly on an edge bracketed
    margin = 1e-7 * max(1.0, abs(gap.upper))
    lo, hi = gap.lower - margin, gap.upper + margin
    g = lambda lam: propagate_many(coeffs, [lam], tau, tau + a)[0, 1]

    lam = None
    for n in (PRESCAN, FINE_SCAN):
        grid = np.linspace(lo, hi, n)
        vals = propagate_many(coeffs, grid, tau, tau + a)[:, 1]
        exact = np.flatnonzero(vals == 0.0)
        signs = np.sign(vals)
        changes = np.flatnonzero(signs[:-1] * signs[1:] < 0)
        roots = len(exact) + len(changes)
        if roots == 1:
            if len(exact):
                lam = float(grid[exact[0]])
            else:
                i = int(changes[0])
                lam = _bisect(g, float(grid[i]), float(grid[i + 1]), float(vals[i]))
            break
    if lam is None:
        raise GapStateError(
            f"gap {gap.index} at tau={tau!r}: shooting function has {roots} roots on "
            f"[{lo!r}, {hi!r}] after refinement; exactly one is required")
    lam = min(max(lam, gap.lower), gap.upper)
    rho = monodromy(coeffs, lam, tau).m22
    return GapState(gap.index, gap.kind, lam, rho, _classify(rho), tau)


def classify_spectrum(coeffs: PeriodicCoefficients, config: TruncationConfig, n_bands: int,
                      edges: BandEdges | None = None) -> TruncatedSpectrum:
    """Band states of bands 0..n_bands-1 and gap states of the gaps between them.

    ``lambda_cap`` lies halfway between the highest listed state and the gap
    state of the gap above the last band, so exactly the listed states are
    below it.
    """
    ensure_valid(coeffs)
    if n_bands < 1:
        raise ValueError("n_bands must be >= 1")
    edges = _edges_for(coeffs, n_bands, edges)
    bands = []
    for k in range(n_bands):
        bands.extend(band_states(coeffs, k, config.n_cells, edges))
    gaps = map_ordered(lambda k: gap_state(coeffs, edges.gap(k), config.tau), range(n_bands))
    listed = [s.lam for s in bands] + [s.lam for s in gaps[:-1]]
    top = max(listed) if listed else edges.nu[0]
    cap = 0.5 * (top + gaps[-1].lam)
    return TruncatedSpectrum(config, tuple(bands), tuple(gaps[:-1]), cap)


def tau_sweep(coeffs: PeriodicCoefficients, gap: Gap, tau0: float = 0.0, n_points: int = 512) -> TauSweep:
    """Gap-state eigenvalue as tau runs over [tau0, tau0 + a].

    Besides the uniform grid, the sweep locates each tau where the state
    touches a gap edge (log|rho| changes sign there) by bisection in tau.
    """
    if n_points < 64:
        raise ValueError("n_points must be >= 64")
    a = coeffs.period_a
    taus = np.linspace(tau0, tau0 + a, n_points)
    states = map_ordered(lambda t: gap_state(coeffs, gap, float(t)), taus)
    lams = np.array([s.lam for s in states])
    rhos = np.array([s.multiplier_rho for s in states])
    subtypes = tuple(s.subtype for s in states)

    touches = []
    if not gap.degenerate:
        # a touch is where the state crosses from one end to the other, i.e.
        # log|rho| changes sign; locate it by bisection in tau
        side = np.sign(np.log(np.abs(rhos)))
        for i in range(n_points - 1):
            if side[i] == 0.0:
                touches.append(_touch(gap, taus[i], lams[i]))
            elif side[i] * side[i + 1] < 0:
                touches.append(_refine_touch(coeffs, gap, states[i], states[i + 1]))
    touches = _dedupe_touches(touches, tau0, a)

    return TauSweep(gap.index, gap, taus, lams, rhos, subtypes,
                    count_ups_and_downs(lams[:-1], gap.width), touches)


def _dedupe_touches(touches, tau0, a):
    # tau0 and tau0 + a are the same truncation point
    out = []
    for t in sorted((Touch(t.tau - a if t.tau >= tau0 + a * (1 - 1e-9) else t.tau, t.lam, t.edge)
                     for t in touches), key=lambda t: t.tau):
        if not out or t.tau - out[-1].tau > 1e-9 * a:
            out.append(t)
    return tuple(out)


def _touch(gap, tau, lam):
    edge = "lower" if abs(lam - gap.lower) <= abs(lam - gap.upper) else "upper"
    return Touch(float(tau), float(lam), edge)


def _refine_touch(coeffs, gap, s0: GapState, s1: GapState) -> Touch:
    lo, hi = s0.tau, s1.tau
    left_sign = s0.log_abs_rho > 0
    best = s0 if abs(s0.log_abs_rho) <= abs(s1.log_abs_rho) else s1
    while hi - lo > TOUCH_TAU_TOL * coeffs.period_a:
        mid = 0.5 * (lo + hi)
        s = gap_state(coeffs, gap, mid)
        if abs(s.log_abs_rho) <= abs(best.log_abs_rho):
            best = s
        if s.log_abs_rho == 0.0:
            break
        if (s.log_abs_rho > 0) == left_sign:
            lo = mid
        else:
            hi = mid
    return _touch(gap, best.tau, best.lam)


def count_ups_and_downs(values, width: float) -> int:
    """Completed up-down pairs of a periodic sequence (one sample per period
    point, endpoint not repeated). Steps smaller than 1e-9 * width are ignored."""
    values = np.asarray(values, dtype=float)
    d = np.diff(np.append(values, values[0]))
    thr = SWEEP_FLAT_RTOL * max(width, 0.0)
    signs = np.sign(d[np.abs(d) > thr])
    if len(signs) < 2:
        return 0
    changes = int(np.count_nonzero(signs != np.roll(signs, 1)))
    return changes // 2


def eigenfunction(coeffs: PeriodicCoefficients, lam: float, config: TruncationConfig,
                  grid_per_cell: int = DEFAULT_GRID_PER_CELL, check: bool = True) -> Eigenfunction:
    """Eigenfunction on [tau, tau + L] from y(tau) = 0, (p y')(tau) = 1, normalized
    so that the integral of s y^2 is 1 (composite trapezoid).

    When y(tau + a) vanishes (a gap state) the solution obeys y(x + a) = rho y(x)
    exactly, so later cells are scaled copies of the first. This avoids the
    roundoff growth of shooting across many cells against a decaying solution.
    """
    a, n = coeffs.period_a, config.n_cells
    tau = config.tau
    cell = tau + a * np.arange(grid_per_cell + 1) / grid_per_cell
    first = solve_ivp(coeffs, lam, tau, 0.0, 1.0, cell)
    scale1 = float(np.max(np.abs(first.values_y)))
    if n > 1 and abs(first.values_y[-1]) < 1e-8 * scale1:
        rho = first.values_py[-1]
        powers = rho ** np.arange(n)
        y = np.concatenate([[0.0], (powers[:, None] * first.values_y[None, 1:]).ravel()])
        py = np.concatenate([[1.0], (powers[:, None] * first.values_py[None, 1:]).ravel()])
        grid = tau + a * np.arange(n * grid_per_cell + 1) / grid_per_cell
        # the scaled copy puts an exact zero at the far end; report the true one
        far = rho ** (n - 1) * first.values_y[-1]
    else:
        grid = tau + a * np.arange(n * grid_per_cell + 1) / grid_per_cell
        raw = solve_ivp(coeffs, lam, tau, 0.0, 1.0, grid)
        y, py = raw.values_y, raw.values_py
        far = y[-1]
    amp = float(np.max(np.abs(y)))
    residual = abs(far) / amp
    if check and residual >= ENDPOINT_RTOL:
        raise StaleEigenvalue(
            f"|y(tau + L)| / max|y| = {residual:.3e} >= {ENDPOINT_RTOL:g} at lambda={lam!r}; "
            "recompute the eigenvalue")
    cell_nodes = np.arange(1, n + 1) * grid_per_cell
    cell_zero = float(np.max(np.abs(y[cell_nodes]))) / amp

    _, _, s = sample(coeffs, grid)
    dens = s * y * y
    total = trapezoid(dens, grid)
    norm = 1.0 / math.sqrt(total)
    m = grid_per_cell + 1
    mass_first = trapezoid(dens[:m], grid[:m]) / total
    mass_last = trapezoid(dens[-m:], grid[-m:]) / total
    samples = SolutionSamples(grid, y * norm, py * norm, float(lam), c1=0.0, c2=norm)
    return Eigenfunction(samples, residual, float(mass_first), float(mass_last), cell_zero)


def dirichlet_eigenvalues_shooting(coeffs: PeriodicCoefficients, config: TruncationConfig,
                                   lower: float, upper: float, n_scan: int | None = None) -> np.ndarray:
    """Roots of y(tau + L; lam) on (lower, upper) for the solution with
    y(tau) = 0, (p y')(tau) = 1. A direct, tau-dependent route to the
    truncated Dirichlet eigenvalues, independent of the band/gap split."""
    L = config.length
    n_scan = n_scan or 256 * config.n_cells
    grid = np.linspace(lower, upper, n_scan)
    vals = propagate_many(coeffs, grid, config.tau, config.tau + L)[:, 1]
    g = lambda lam: propagate_many(coeffs, [lam], config.tau, config.tau + L)[0, 1]
    roots = []
    for i in range(n_scan - 1):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(_bisect(g, float(grid[i]), float(grid[i + 1]), float(vals[i])))
    return np.array(roots)
