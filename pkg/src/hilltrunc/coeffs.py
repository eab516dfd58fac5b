"""Periodic coefficient triples (p, q, s) for

    (p(x) y'(x))' + (lam s(x) - q(x)) y(x) = 0

and the concrete potential models shipped with the package.

Piecewise-constant models (free particle, constant shift, Kronig-Penney,
general segments) expose their segments so propagation can switch analytic
branches exactly at breakpoints. ``PiecewiseConstant`` allows p itself to jump;
this goes beyond the usual continuity assumption on p and is handled by
keeping the state (y, p y') continuous across breakpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

DENSE_SAMPLES = 4096
TILE_RTOL = 1e-12


class InvalidCoefficients(ValueError):
    """Raised when a coefficient triple violates the model hypotheses."""


class Segment(NamedTuple):
    width: float
    p: float
    q: float
    s: float


@dataclass(frozen=True)
class FreeParticle:
    pass


@dataclass(frozen=True)
class ConstantShift:
    v0: float


@dataclass(frozen=True)
class KronigPenney:
    """Barrier of ``barrier_height`` on [0, barrier_width), zero potential on
    the rest of the period."""

    barrier_height: float
    barrier_width: float


@dataclass(frozen=True)
class Mathieu:
    """q(x) = amplitude * cos(2 pi x / a), p = s = 1."""

    amplitude: float


@dataclass(frozen=True)
class PiecewiseConstant:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(Segment(*map(float, seg)) for seg in self.segments))


Model = Union[FreeParticle, ConstantShift, KronigPenney, Mathieu, PiecewiseConstant]


@dataclass(frozen=True)
class PeriodicCoefficients:
    period_a: float
    model: Model
    s_min: float | None = None
    _segments: tuple[Segment, ...] | None = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "period_a", float(self.period_a))
        object.__setattr__(self, "_segments", _model_segments(self.model, self.period_a))

    @property
    def smooth(self) -> bool:
        return self._segments is None

    @property
    def segments(self) -> tuple[Segment, ...] | None:
        """Constant pieces tiling one period starting at x = 0, or None for
        smooth models."""
        return self._segments

    @property
    def breakpoints(self) -> np.ndarray:
        """Segment boundaries within [0, a), always starting at 0."""
        if self._segments is None:
            return np.array([0.0])
        widths = [seg.width for seg in self._segments]
        return np.concatenate([[0.0], np.cumsum(widths)[:-1]])

    def reduce(self, x):
        """Reduce coordinates into [0, a)."""
        a = self.period_a
        r = np.asarray(x, dtype=float) - a * np.floor(np.asarray(x, dtype=float) / a)
        # floor can leave r == a after rounding
        return np.where(r >= a, 0.0, r)


def _model_segments(model, a):
    if isinstance(model, FreeParticle):
        return (Segment(a, 1.0, 0.0, 1.0),)
    if isinstance(model, ConstantShift):
        return (Segment(a, 1.0, float(model.v0), 1.0),)
    if isinstance(model, KronigPenney):
        w = float(model.barrier_width)
        h = float(model.barrier_height)
        if w <= 0.0:
            return (Segment(a, 1.0, 0.0, 1.0),)
        if w >= a:
            return (Segment(a, 1.0, h, 1.0),)
        return (Segment(w, 1.0, h, 1.0), Segment(a - w, 1.0, 0.0, 1.0))
    if isinstance(model, PiecewiseConstant):
        return model.segments
    if isinstance(model, Mathieu):
        return None
    raise TypeError(f"unknown model {model!r}")


def cosine_series(coeffs: PeriodicCoefficients) -> np.ndarray:
    """Coefficients c_k of q(x) = sum_k c_k cos(2 pi k x / a) for smooth models."""
    if isinstance(coeffs.model, Mathieu):
        return np.array([0.0, float(coeffs.model.amplitude)])
    raise TypeError(f"{type(coeffs.model).__name__} has no cosine series")


def sample(coeffs: PeriodicCoefficients, x):
    """Vectorized (p, q, s) at coordinates x."""
    r = coeffs.reduce(x)
    if coeffs.smooth:
        c = cosine_series(coeffs)
        kappa = 2.0 * math.pi / coeffs.period_a
        q = sum(ck * np.cos(kappa * k * r) for k, ck in enumerate(c))
        q = np.broadcast_to(q, r.shape).astype(float)
        return np.ones_like(r), q, np.ones_like(r)
    segs = coeffs.segments
    idx = np.searchsorted(coeffs.breakpoints, r, side="right") - 1
    idx = np.clip(idx, 0, len(segs) - 1)
    table = np.array([[seg.p, seg.q, seg.s] for seg in segs])
    vals = table[idx]
    return vals[..., 0], vals[..., 1], vals[..., 2]


def evaluate(coeffs: PeriodicCoefficients, x: float) -> tuple[float, float, float]:
    """Coefficient values (p, q, s) at x, reduced into [0, a)."""
    p, q, s = sample(coeffs, np.asarray(float(x)))
    return float(p), float(q), float(s)


def primitive(coeffs: PeriodicCoefficients, which: str, x):
    """Antiderivative from 0 of q, s or 1/p (``which`` in {"q", "s", "inv_p"}),
    exact for every shipped model. Used for cell averages in the
    finite-difference oracle."""
    x = np.asarray(x, dtype=float)
    a = coeffs.period_a
    k = np.floor(x / a)
    r = x - k * a
    if coeffs.smooth:
        if which in ("s", "inv_p"):
            return x.copy()
        if which != "q":
            raise ValueError(which)
        c = cosine_series(coeffs)
        kappa = 2.0 * math.pi / a
        total = c[0] * x
        for j in range(1, len(c)):
            total = total + c[j] * np.sin(kappa * j * x) / (kappa * j)
        return total
    segs = coeffs.segments
    if which == "q":
        vals = np.array([seg.q for seg in segs])
    elif which == "s":
        vals = np.array([seg.s for seg in segs])
    elif which == "inv_p":
        vals = np.array([1.0 / seg.p for seg in segs])
    else:
        raise ValueError(which)
    widths = np.array([seg.width for seg in segs])
    starts = coeffs.breakpoints
    cum = np.concatenate([[0.0], np.cumsum(widths * vals)])
    idx = np.clip(np.searchsorted(starts, r, side="right") - 1, 0, len(segs) - 1)
    return k * cum[-1] + cum[idx] + vals[idx] * (r - starts[idx])


@dataclass(frozen=True)
class ValidationReport:
    accepted: bool
    s_min: float
    reasons: tuple[str, ...] = ()

    def raise_if_rejected(self):
        if not self.accepted:
            raise InvalidCoefficients("; ".join(self.reasons))


def validate(coeffs: PeriodicCoefficients) -> ValidationReport:
    """Check the hypotheses on a dense grid plus every breakpoint.

    Rejects non-positive period, empty or non-tiling segment lists,
    p <= 0 anywhere and s below the declared (or a non-positive) lower bound.
    """
    reasons = []
    a = coeffs.period_a
    if not (math.isfinite(a) and a > 0):
        return ValidationReport(False, float("nan"), ("period must be positive",))

    model = coeffs.model
    if isinstance(model, PiecewiseConstant):
        if not model.segments:
            return ValidationReport(False, float("nan"), ("empty segment list",))
        widths = [seg.width for seg in model.segments]
        if any(not (w > 0) for w in widths):
            reasons.append("segment widths must be positive")
        if not math.isclose(math.fsum(widths), a, rel_tol=TILE_RTOL, abs_tol=0.0):
            reasons.append(
                f"segments do not tile the period (widths sum to {math.fsum(widths)!r}, period is {a!r})"
            )
        vals = np.array([[seg.p, seg.q, seg.s] for seg in model.segments])
        if not np.all(np.isfinite(vals)):
            reasons.append("non-finite segment values")
    if isinstance(model, KronigPenney) and not (0.0 <= model.barrier_width <= a):
        reasons.append("barrier width must lie in [0, a]")

    if reasons:
        return ValidationReport(False, float("nan"), tuple(reasons))

    xs = np.concatenate([np.linspace(0.0, a, DENSE_SAMPLES, endpoint=False), coeffs.breakpoints])
    p, q, s = sample(coeffs, xs)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q)) and np.all(np.isfinite(s))):
        reasons.append("non-finite coefficient values")
    if np.any(p == 0.0):
        reasons.append("p vanishes")
    elif np.any(p < 0.0):
        reasons.append("p must be positive (sign-indefinite or negative p is not supported)")
    witnessed = float(np.min(s))
    if witnessed <= 0.0:
        reasons.append(f"s must be bounded below by a positive constant (min s = {witnessed!r})")
    if coeffs.s_min is not None:
        if not coeffs.s_min > 0:
            reasons.append("declared s_min must be positive")
        elif witnessed < coeffs.s_min:
            reasons.append(f"s < s_min: min s = {witnessed!r} below declared {coeffs.s_min!r}")
    return ValidationReport(not reasons, witnessed, tuple(reasons))


def ensure_valid(coeffs: PeriodicCoefficients) -> PeriodicCoefficients:
    validate(coeffs).raise_if_rejected()
    return coeffs


def lambda_lower_bound(coeffs: PeriodicCoefficients) -> float:
    """A value strictly below the lowest periodic eigenvalue: min(q/s) - 1."""
    xs = np.concatenate([np.linspace(0.0, coeffs.period_a, DENSE_SAMPLES, endpoint=False),
                         coeffs.breakpoints])
    _, q, s = sample(coeffs, xs)
    return float(np.min(q / s)) - 1.0


def coefficient_bounds(coeffs: PeriodicCoefficients) -> dict:
    xs = np.concatenate([np.linspace(0.0, coeffs.period_a, DENSE_SAMPLES, endpoint=False),
                         coeffs.breakpoints])
    p, q, s = sample(coeffs, xs)
    return {"p_min": float(p.min()), "p_max": float(p.max()),
            "q_min": float(q.min()), "q_max": float(q.max()),
            "s_min": float(s.min()), "s_max": float(s.max())}
