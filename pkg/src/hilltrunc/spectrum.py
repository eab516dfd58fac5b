"""Band edges, the band/gap partition, dispersion and decay rates, and the
periodic / semi-periodic band-edge eigenfunctions.

Edge naming follows the usual Hill ordering

    nu_0 < mu_0 <= mu_1 < nu_1 <= nu_2 < mu_2 <= mu_3 < nu_3 <= nu_4 < ...

Gap k (k = 0, 1, 2, ...) is [mu_k, mu_{k+1}] for even k (D <= -2 there) and
[nu_k, nu_{k+1}] for odd k (D >= 2). Band 0 is (nu_0, mu_0) and band k > 0
runs from the upper edge of gap k-1 to the lower edge of gap k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coeffs import PeriodicCoefficients, coefficient_bounds, ensure_valid, lambda_lower_bound
from .propagate import SolutionSamples, discriminant, monodromy, propagate, solve_ivp

DEGENERACY_RTOL = 1e-8
EDGE_SNAP = 1e-13
STALE_EDGE_TOL = 1e-6
ZERO_GRID = 2048
ZERO_XTOL = 1e-10


class ScanExhausted(RuntimeError):
    """The edge scan hit its lambda cap before finding the requested gaps."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


class OutsideBand(ValueError):
    pass


class InsideBand(ValueError):
    pass


class StaleEdge(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    kind: str  # "nu" (periodic) or "mu" (semi-periodic)
    index: int
    lam: float
    degenerate: bool

    @property
    def sign(self) -> int:
        return 1 if self.kind == "nu" else -1


@dataclass(frozen=True)
class Gap:
    index: int
    kind: str  # "semi-periodic" or "periodic"
    lower: float
    upper: float
    degenerate: bool

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def sign(self) -> int:
        """Sign of D on the gap."""
        return -1 if self.kind == "semi-periodic" else 1

    @property
    def edge_kind(self) -> str:
        return "mu" if self.kind == "semi-periodic" else "nu"


@dataclass(frozen=True)
class Band:
    index: int
    lower: float
    upper: float

    @property
    def decreasing(self) -> bool:
        """True when D falls from 2 to -2 across the band."""
        return self.index % 2 == 0


@dataclass(frozen=True)
class BandEdges:
    nu: tuple[float, ...]
    mu: tuple[float, ...]
    degenerate: tuple[bool, ...]

    @property
    def n_gaps(self) -> int:
        return len(self.degenerate)

    def gap(self, k: int) -> Gap:
        if not 0 <= k < self.n_gaps:
            raise IndexError(f"gap {k} not computed (have {self.n_gaps})")
        if k % 2 == 0:
            return Gap(k, "semi-periodic", self.mu[k], self.mu[k + 1], self.degenerate[k])
        return Gap(k, "periodic", self.nu[k], self.nu[k + 1], self.degenerate[k])

    def band(self, k: int) -> Band:
        if not 0 <= k < self.n_gaps:
            raise IndexError(f"band {k} not bounded by computed edges (have {self.n_gaps} gaps)")
        lower = self.nu[0] if k == 0 else self.gap(k - 1).upper
        return Band(k, lower, self.gap(k).lower)

    def edge(self, kind: str, n: int) -> Edge:
        values = self.nu if kind == "nu" else self.mu
        if kind not in ("nu", "mu") or not 0 <= n < len(values):
            raise IndexError(f"edge {kind}_{n} not computed")
        if kind == "nu" and n == 0:
            return Edge(kind, n, values[n], False)
        lower_of_gap = (n % 2 == 0) if kind == "mu" else (n % 2 == 1)
        return Edge(kind, n, values[n], self.degenerate[n if lower_of_gap else n - 1])

    def edges(self) -> list[Edge]:
        """All edges in ascending order."""
        out = [Edge("nu", 0, self.nu[0], False)]
        for k in range(self.n_gaps):
            g = self.gap(k)
            out.append(Edge(g.edge_kind, k, g.lower, g.degenerate))
            out.append(Edge(g.edge_kind, k + 1, g.upper, g.degenerate))
        return out

    def locate(self, lam: float) -> str:
        """Human-readable description of where lam falls."""
        if lam <= self.nu[0]:
            return f"below nu_0 = {self.nu[0]!r}"
        for k in range(self.n_gaps):
            g = self.gap(k)
            if g.lower <= lam <= g.upper:
                return f"gap {k} [{g.lower!r}, {g.upper!r}]"
            if lam < g.lower:
                return f"band {k}"
        return "above the computed edges"


@dataclass(frozen=True)
class SpectralPartition:
    bands: tuple[Band, ...]
    gaps: tuple[Gap, ...]


def partition(edges: BandEdges) -> SpectralPartition:
    return SpectralPartition(tuple(edges.band(k) for k in range(edges.n_gaps)),
                             tuple(edges.gap(k) for k in range(edges.n_gaps)))


def _bisect(f, lo, hi, flo=None):
    """Root of f on [lo, hi] given a sign change, to machine precision."""
    if flo is None:
        flo = f(lo)
    if flo == 0.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _golden_max(f, lo, hi):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(200):
        if hi - lo <= 1e-15 * max(1.0, abs(lo)):
            break
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def _default_cap(coeffs, lam_low, n_gaps):
    b = coefficient_bounds(coeffs)
    a = coeffs.period_a
    kinetic = 4.0 * (n_gaps + 2) ** 2 * math.pi ** 2 * b["p_max"] / (a * a * b["s_min"])
    return lam_low + kinetic + (b["q_max"] - b["q_min"]) / b["s_min"] + 10.0


def find_band_edges(coeffs: PeriodicCoefficients, n_gaps: int, lambda_max: float | None = None) -> BandEdges:
    """Locate nu_0 and the edges of the first ``n_gaps`` gaps.

    The scan walks lambda upward with a step that grows like sqrt(lambda).
    Within a band D is strictly monotone, so a reversal of sigma*D between
    samples means a gap was stepped over; it is then resolved by maximizing
    sigma*D on the bracket. Gaps narrower than 1e-8 * max(1, |lambda|) are
    flagged degenerate and their double edge is pinned by the sign change of
    the off-diagonal monodromy entry.
    """
    if n_gaps < 1:
        raise ValueError("n_gaps must be >= 1")
    ensure_valid(coeffs)
    a = coeffs.period_a
    D = lambda lam: discriminant(coeffs, lam)

    lam_low = lambda_lower_bound(coeffs)
    while D(lam_low) <= 2.0:
        lam_low -= 1.0 + abs(lam_low)
    cap = _default_cap(coeffs, lam_low, n_gaps) if lambda_max is None else float(lambda_max)
    base = min(0.25, (math.pi / a) ** 2 / 8.0)

    def step(lam):
        return base * max(1.0, a * math.sqrt(max(lam - lam_low, 0.0)) / math.pi)

    nu, mu, degenerate = [], [], []

    def partial():
        return BandEdges(tuple(nu), tuple(mu), tuple(degenerate))

    def exhausted(what):
        raise ScanExhausted(f"lambda cap {cap!r} reached before {what}", partial())

    # nu_0: first downward crossing of D = 2
    prev, lam = lam_low, lam_low
    while True:
        lam = prev + step(prev)
        if lam > cap:
            exhausted("nu_0")
        if D(lam) < 2.0:
            break
        prev = lam
    nu.append(_bisect(lambda x: D(x) - 2.0, prev, lam))

    start = nu[0]
    for k in range(n_gaps):
        sigma = -1.0 if k % 2 == 0 else 1.0
        f = lambda x, s=sigma: s * D(x)
        xs = [start]
        fs = [-2.0]
        lower = upper = None
        while True:
            x = xs[-1] + step(xs[-1])
            if x > cap:
                exhausted(f"gap {k}")
            fx = f(x)
            if fx >= 2.0:
                lower = _bisect(lambda t: f(t) - 2.0, xs[-1], x)
                y = x
                while True:
                    y_next = y + step(y)
                    if y_next > cap:
                        exhausted(f"upper edge of gap {k}")
                    if f(y_next) < 2.0:
                        upper = _bisect(lambda t: f(t) - 2.0, y, y_next)
                        break
                    y = y_next
                break
            if fx < fs[-1]:
                left = xs[-2] if len(xs) >= 2 else xs[-1]
                peak, fpeak = _golden_max(f, left, x)
                if fpeak >= 2.0:
                    lower = _bisect(lambda t: f(t) - 2.0, left, peak)
                    upper = _bisect(lambda t: f(t) - 2.0, peak, x)
                elif fpeak >= 2.0 - 1e-7:
                    lower = upper = peak
                else:
                    raise RuntimeError(
                        f"gap {k}: sigma*D peaks at {fpeak!r} < 2 near lambda={peak!r}; "
                        "discriminant is inconsistent with Hill theory (integration error?)")
                break
            xs.append(x)
            fs.append(fx)

        is_degenerate = (upper - lower) < DEGENERACY_RTOL * max(1.0, abs(lower))
        if is_degenerate:
            lower = upper = _pin_double_edge(coeffs, 0.5 * (lower + upper))
        target = mu if sigma < 0 else nu
        target.extend([lower, upper])
        degenerate.append(is_degenerate)
        start = upper
    return partial()


def _pin_double_edge(coeffs, guess):
    """At a closed gap the monodromy is +-I; m12 changes sign there."""
    m12 = lambda lam: monodromy(coeffs, lam, 0.0).m12
    h = 1e-6 * max(1.0, abs(guess))
    lo, hi = guess - h, guess + h
    flo, fhi = m12(lo), m12(hi)
    if flo * fhi < 0:
        root = _bisect(m12, lo, hi, flo)
        if abs(root - guess) <= 1e-7 * max(1.0, abs(guess)):
            return root
    return guess


def band_orientation_check(coeffs, band: Band, n: int = 256) -> bool:
    """True when D is strictly monotone across the band on an n-point grid."""
    lams = np.linspace(band.lower, band.upper, n + 2)[1:-1]
    d = np.diff([discriminant(coeffs, lam) for lam in lams])
    return bool(np.all(d < 0) or np.all(d > 0))


def dispersion_alpha(coeffs: PeriodicCoefficients, lam: float, edges: BandEdges | None = None) -> float:
    """Bloch wavenumber alpha = arccos(D/2) / a in (0, pi/a); lam must be in a band."""
    d = discriminant(coeffs, lam)
    if abs(d) >= 2.0:
        where = edges.locate(lam) if edges is not None else f"|D| = {abs(d)!r} >= 2"
        raise OutsideBand(f"lambda={lam!r} is not inside a band: {where}")
    return math.acos(d / 2.0) / coeffs.period_a


def decay_beta(coeffs: PeriodicCoefficients, lam: float, edges: BandEdges | None = None) -> float:
    """Decay rate beta = arccosh(|D|/2) / a >= 0; lam must be in a gap or on an edge."""
    d = discriminant(coeffs, lam)
    half = abs(d) / 2.0
    if half - 1.0 < -EDGE_SNAP:
        where = edges.locate(lam) if edges is not None else f"|D| = {abs(d)!r} < 2"
        raise InsideBand(f"lambda={lam!r} is inside a band: {where}")
    if half - 1.0 <= EDGE_SNAP:
        return 0.0
    return math.acosh(half) / coeffs.period_a


@dataclass(frozen=True)
class EdgeEigenfunction:
    edge: Edge
    kind: str  # "periodic" (zeta) or "semi-periodic" (xi)
    samples: SolutionSamples
    zeros: np.ndarray

    @property
    def boundary_residual(self) -> float:
        """max(|y(a) - sign y(0)|, |py(a) - sign py(0)|) relative to max |y|, |py|."""
        s = self.edge.sign
        y, py = self.samples.values_y, self.samples.values_py
        scale = max(np.max(np.abs(y)), np.max(np.abs(py)))
        return max(abs(y[-1] - s * y[0]), abs(py[-1] - s * py[0])) / scale


def edge_eigenfunction(coeffs: PeriodicCoefficients, edge: Edge, n_grid: int = ZERO_GRID) -> list[EdgeEigenfunction]:
    """(Semi-)periodic eigenfunction(s) at a band edge, sampled on [0, a].

    Returns one eigenfunction, or two independent ones when the adjacent gap
    is closed (the monodromy is then +-I).
    """
    sign = edge.sign
    m = monodromy(coeffs, edge.lam, 0.0)
    if abs(m.trace - 2.0 * sign) > STALE_EDGE_TOL:
        raise StaleEdge(f"D({edge.lam!r}) = {m.trace!r} is not {2 * sign} (stale edge data)")
    if edge.degenerate:
        vectors = [(1.0, 0.0), (0.0, 1.0)]
    else:
        v1 = (m.m12, sign - m.m11)
        v2 = (sign - m.m22, m.m21)
        v = v1 if math.hypot(*v1) >= math.hypot(*v2) else v2
        norm = math.hypot(*v)
        if norm == 0.0:
            raise StaleEdge(f"monodromy at {edge.lam!r} has no usable eigenvector")
        vectors = [(v[0] / norm, v[1] / norm)]
    kind = "periodic" if sign > 0 else "semi-periodic"
    out = []
    for y0, py0 in vectors:
        samples, zeros = _sample_with_zeros(coeffs, edge.lam, y0, py0, n_grid)
        out.append(EdgeEigenfunction(edge, kind, samples, zeros))
    return out


def _sample_with_zeros(coeffs, lam, y0, py0, n_grid, max_doublings=4):
    a = coeffs.period_a
    for _ in range(max_doublings + 1):
        grid = np.linspace(0.0, a, n_grid)
        samples = solve_ivp(coeffs, lam, 0.0, y0, py0, grid)
        if not _unresolved(samples):
            break
        n_grid *= 2
    return samples, _zeros(coeffs, lam, samples, a)


def _unresolved(samples) -> bool:
    # an interval where y keeps its sign while p y' flips near a small |y|
    # may hide a pair of zeros
    y, py = samples.values_y, samples.values_py
    small = 0.05 * np.max(np.abs(y))
    same = y[:-1] * y[1:] > 0
    turn = py[:-1] * py[1:] < 0
    low = np.minimum(np.abs(y[:-1]), np.abs(y[1:])) < small
    return bool(np.any(same & turn & low))


def _zeros(coeffs, lam, samples, a):
    x, y, py = samples.grid, samples.values_y, samples.values_py
    tiny = 1e-12 * np.max(np.abs(y))
    at_node = np.abs(y) <= tiny
    zeros = [float(x[i]) for i in np.flatnonzero(at_node) if x[i] < a]
    for i in range(len(x) - 1):
        if at_node[i] or at_node[i + 1] or y[i] * y[i + 1] > 0:
            continue
        state = (y[i], py[i])
        f = lambda t, i=i, state=state: propagate(coeffs, lam, x[i], t).apply(*state)[0]
        lo, hi, flo = float(x[i]), float(x[i + 1]), float(y[i])
        while hi - lo > ZERO_XTOL * 1e-2:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            fm = f(mid)
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        zeros.append(0.5 * (lo + hi))
    return _dedupe_cyclic(zeros, a)


def _dedupe_cyclic(zeros, a, tol=1e-9):
    # a zero at (or just below) x = a is the image of the zero at x = 0
    reduced = sorted(0.0 if z >= a * (1.0 - tol) else z for z in zeros)
    out = []
    for z in reduced:
        if not out or z - out[-1] > tol * a:
            out.append(z)
    return np.array(out)
