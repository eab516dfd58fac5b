import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hilltrunc.coeffs import KronigPenney, Mathieu, PeriodicCoefficients, PiecewiseConstant
from hilltrunc.propagate import (TransferMatrix, discriminant, discriminant_many, monodromy,
                                 propagate, propagate_many, segment_pieces, solve_ivp, value_at)


def _free(k, x):
    return np.array([[math.cos(k * x), math.sin(k * x) / k], [-k * math.sin(k * x), math.cos(k * x)]])


def _kp_closed(lam, x):
    """Propagator of KronigPenney(10, 0.5) from 0 to x <= 1 by hand."""
    kb = math.sqrt(10.0 - lam)
    xb = min(x, 0.5)
    barrier = np.array([[math.cosh(kb * xb), math.sinh(kb * xb) / kb],
                        [kb * math.sinh(kb * xb), math.cosh(kb * xb)]])
    if x <= 0.5:
        return barrier
    return _free(math.sqrt(lam), x - 0.5) @ barrier


def test_free_particle_half_turn(free, backend):
    m = propagate(free, math.pi ** 2, 0.0, 1.0)
    assert np.allclose(m.as_array(), -np.eye(2), atol=1e-14)


def test_free_particle_discriminant_below_spectrum(free, backend):
    assert discriminant(free, -1.0) == pytest.approx(2 * math.cosh(1.0), rel=1e-14)
    assert discriminant(free, 0.0) == 2.0


def test_kronig_penney_two_segment_product(kp, backend):
    m = propagate(kp, 5.0, 0.0, 1.0)
    assert np.allclose(m.as_array(), _kp_closed(5.0, 1.0), rtol=1e-12, atol=1e-12)


def test_kronig_penney_agrees_with_integrator(kp):
    # independent route: scipy DOP853 on the piecewise right-hand side
    from scipy.integrate import solve_ivp as ivp

    lam = 5.0

    def rhs(x, u):
        q = 10.0 if x < 0.5 else 0.0
        return [u[1], (q - lam) * u[0], u[3], (q - lam) * u[2]]

    cols = [ivp(rhs, (0, 0.5), [1, 0, 0, 1], method="DOP853", rtol=1e-13, atol=1e-14).y[:, -1]]
    cols.append(ivp(rhs, (0.5, 1.0), cols[0], method="DOP853", rtol=1e-13, atol=1e-14).y[:, -1])
    y1, py1, y2, py2 = cols[1]
    m = propagate(kp, lam, 0.0, 1.0)
    assert np.allclose([m.m11, m.m12, m.m21, m.m22], [y1, y2, py1, py2], rtol=1e-10, atol=1e-10)


def test_identity_and_reversed_interval(kp):
    assert propagate(kp, 3.0, 0.4, 0.4) == TransferMatrix.identity()
    with pytest.raises(ValueError):
        propagate(kp, 3.0, 1.0, 0.5)


def test_segment_pieces_split_at_breakpoints(kp):
    w, p, q, s = segment_pieces(kp, 0.25, 2.0)
    assert np.allclose(w, [0.25, 0.5, 0.5, 0.5])
    assert np.allclose(q, [10, 0, 10, 0])


def test_composition(stepped_p, backend):
    lam = 3.3
    a = propagate(stepped_p, lam, 0.2, 1.1)
    b = propagate(stepped_p, lam, 1.1, 4.9)
    ab = propagate(stepped_p, lam, 0.2, 4.9)
    assert np.allclose((b @ a).as_array(), ab.as_array(), rtol=1e-11, atol=1e-11)


def test_composition_smooth(mathieu, backend):
    lam = 17.0
    a = propagate(mathieu, lam, 0.0, 0.4)
    b = propagate(mathieu, lam, 0.4, 1.0)
    assert np.allclose((b @ a).as_array(), monodromy(mathieu, lam).as_array(), rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("tau", [0.1, 0.37, 0.5, 0.93])
def test_trace_does_not_depend_on_base_point(kp, mathieu, stepped_p, tau):
    for c in (kp, stepped_p):
        for lam in (2.0, 20.0, 95.0):
            assert monodromy(c, lam, tau).trace == pytest.approx(discriminant(c, lam), rel=1e-11, abs=1e-11)
    assert monodromy(mathieu, 30.0, tau).trace == pytest.approx(discriminant(mathieu, 30.0), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(lam=st.floats(-40, 400), tau=st.floats(-2, 2), span=st.floats(0, 5))
def test_unimodular(lam, tau, span):
    c = PeriodicCoefficients(2.0, PiecewiseConstant(((0.7, 1.0, 2.0, 1.0), (0.8, 2.5, -1.0, 0.5),
                                                     (0.5, 0.8, 4.0, 1.5))))
    m = propagate(c, lam, tau, tau + span)
    scale = max(1.0, abs(m.m11 * m.m22))
    assert abs(m.det - 1.0) < 1e-10 * scale


def test_discriminant_many_matches_scalar(kp, mathieu):
    lams = np.linspace(-3, 120, 9)
    for c in (kp, mathieu):
        want = [discriminant(c, lam) for lam in lams]
        assert np.allclose(discriminant_many(c, lams), want, rtol=1e-12)
    assert propagate_many(kp, lams, 0, 1).shape == (9, 4)


def test_multipliers_multiply_to_one(kp):
    r1, r2 = monodromy(kp, 14.0).multipliers()
    assert abs(r1 * r2 - 1) < 1e-12
    assert (r1 + r2).real == pytest.approx(discriminant(kp, 14.0))


def test_solve_ivp_matches_closed_form(kp):
    grid = np.linspace(0.0, 1.0, 11)
    sol = solve_ivp(kp, 5.0, 0.0, 1.0, 0.0, grid)
    for x, y, py in zip(grid, sol.values_y, sol.values_py):
        want = _kp_closed(5.0, x) @ [1.0, 0.0]
        assert y == pytest.approx(want[0], rel=1e-10, abs=1e-12)
        assert py == pytest.approx(want[1], rel=1e-10, abs=1e-12)


def test_solve_ivp_grid_checks(kp):
    with pytest.raises(ValueError, match="start at tau"):
        solve_ivp(kp, 1.0, 0.0, 1.0, 0.0, [0.1, 0.2])
    with pytest.raises(ValueError, match="increasing"):
        solve_ivp(kp, 1.0, 0.0, 1.0, 0.0, [0.0, 0.2, 0.2])


def test_value_at(kp):
    y, py = value_at(kp, 5.0, 0.0, (0.0, 1.0), 0.7)
    want = _kp_closed(5.0, 0.7) @ [0.0, 1.0]
    assert (y, py) == pytest.approx(tuple(want), rel=1e-12)


def test_state_continuous_across_p_jump():
    # p jumps 1 -> 4 at 0.5; with y'' = 0 on both sides, p y' stays constant
    c = PeriodicCoefficients(1.0, PiecewiseConstant(((0.5, 1.0, 0.0, 1.0), (0.5, 4.0, 0.0, 1.0))))
    m = propagate(c, 0.0, 0.0, 1.0)
    assert np.allclose(m.as_array(), [[1.0, 0.5 + 0.5 / 4.0], [0.0, 1.0]], atol=1e-15)
