import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh, expm

from hilltrunc import _pykernels
from hilltrunc._backend import BACKEND, available_backends
from hilltrunc.coeffs import KronigPenney, PeriodicCoefficients
from hilltrunc.oracle import assemble
from hilltrunc.propagate import segment_pieces

BACKENDS = available_backends()


def _segment_expm(w, p, q, s, lam):
    # (y, p y')' = [[0, 1/p], [q - lam s, 0]] (y, p y')
    return expm(w * np.array([[0.0, 1.0 / p], [q - lam * s, 0.0]]))


@pytest.mark.parametrize("lam", [-20.0, -1e-9, 0.0, 1e-12, 3.0, 400.0])
def test_segment_matches_matrix_exponential(backend, lam):
    w, p, q, s = 0.37, 1.7, 0.4, 0.9
    got = np.array(backend.transfer_product(np.array([w]), np.array([p]), np.array([q]),
                                            np.array([s]), lam)).reshape(2, 2)
    assert np.allclose(got, _segment_expm(w, p, q, s, lam), rtol=1e-12, atol=1e-14)


def test_series_branch_is_continuous(backend):
    w = np.array([1.0])
    one = np.array([1.0])
    zero = np.array([0.0])
    # k2 w^2 straddles the series threshold
    for lam in (0.99e-8, 1.01e-8, -0.99e-8, -1.01e-8):
        got = np.array(backend.transfer_product(w, one, zero, one, lam)).reshape(2, 2)
        assert np.allclose(got, _segment_expm(1.0, 1.0, 0.0, 1.0, lam), rtol=1e-14, atol=1e-15)


def test_backends_agree_on_products():
    if "compiled" not in BACKENDS:
        pytest.skip("compiled extension not built")
    kp = PeriodicCoefficients(1.0, KronigPenney(10.0, 0.5))
    w, p, q, s = segment_pieces(kp, 0.3, 8.3)
    lams = np.linspace(-5.0, 300.0, 517)
    a = BACKENDS["python"].transfer_product_many(w, p, q, s, lams)
    b = BACKENDS["compiled"].transfer_product_many(w, p, q, s, lams)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.max(np.abs(a)))


def test_cosine_transfer_matches_between_backends():
    if "compiled" not in BACKENDS:
        pytest.skip("compiled extension not built")
    c = np.array([0.0, 20.0])
    for lam in (-5.0, 12.0, 150.0):
        a = np.array(BACKENDS["python"].cosine_transfer(c, 1.0, lam, 0.2, 1.7, 1e-12, 1e-14))
        b = np.array(BACKENDS["compiled"].cosine_transfer(c, 1.0, lam, 0.2, 1.7, 1e-12, 1e-14))
        assert np.allclose(a, b, rtol=1e-9, atol=1e-9 * np.max(np.abs(a)))


def test_cosine_transfer_constant_potential(backend):
    # q = 0 reduces to the free propagator
    lam = 7.0
    m = np.array(backend.cosine_transfer(np.array([0.0, 0.0]), 1.0, lam, 0.0, 1.3, 1e-12, 1e-14))
    k = np.sqrt(lam)
    want = [np.cos(1.3 * k), np.sin(1.3 * k) / k, -k * np.sin(1.3 * k), np.cos(1.3 * k)]
    assert np.allclose(m, want, rtol=1e-11, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(-50, 500), x0=st.floats(0, 3), span=st.floats(1e-6, 4),
       amp=st.floats(-30, 30))
def test_cosine_transfer_is_unimodular(lam, x0, span, amp):
    for mod in BACKENDS.values():
        m11, m12, m21, m22 = mod.cosine_transfer(np.array([0.0, amp]), 1.0, lam, x0, x0 + span,
                                                 1e-12, 1e-14)
        scale = max(1.0, abs(m11 * m22), abs(m12 * m21))
        assert abs(m11 * m22 - m12 * m21 - 1.0) < 1e-9 * scale


def _random_pencil(rng, n):
    diag = rng.uniform(1, 5, n)
    off = rng.uniform(-1, 1, n - 1)
    mass = rng.uniform(0.5, 2, n)
    return diag, off, mass


def test_sturm_counts_match_dense(backend, rng):
    diag, off, mass = _random_pencil(rng, 40)
    K = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    ev = eigh(K, np.diag(mass), eigvals_only=True)
    shifts = 0.5 * (ev[:-1] + ev[1:])
    assert list(backend.sturm_counts(diag, off, mass, shifts)) == list(range(1, 40))
    assert backend.sturm_counts(diag, off, mass, [ev[0] - 1])[0] == 0


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_cyclic_counts_match_dense(backend, rng, sign):
    n = 30
    diag, off, mass = _random_pencil(rng, n)
    corner = -sign * 0.7
    K = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    K[0, -1] = K[-1, 0] = corner
    ev = eigh(K, np.diag(mass), eigvals_only=True)
    shifts = np.concatenate([[ev[0] - 1], 0.5 * (ev[:-1] + ev[1:]), [ev[-1] + 1]])
    assert list(backend.sturm_counts_cyclic(diag, off, corner, mass, shifts)) == list(range(n + 1))


def test_cyclic_count_needs_three_unknowns(backend):
    with pytest.raises(ValueError):
        backend.sturm_counts_cyclic(np.ones(2), np.ones(1), 0.0, np.ones(2), [0.0])


def test_sturm_counts_survive_zero_pivots(backend):
    # a shift of 2 zeroes the first pivot but is not an eigenvalue
    diag = np.array([2.0, 2.0, 5.0])
    off = np.array([-1.0, -1.0])
    mass = np.ones(3)
    K = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    ev = np.linalg.eigvalsh(K)
    counts = backend.sturm_counts(diag, off, mass, [2.0, 0.0, 10.0])
    assert list(counts) == [int(np.sum(ev < 2.0)), 0, 3]


def test_fd_operator_counts_agree_between_backends():
    if "compiled" not in BACKENDS:
        pytest.skip("compiled extension not built")
    kp = PeriodicCoefficients(1.0, KronigPenney(10.0, 0.5))
    shifts = np.linspace(0, 200, 101)
    for kind in ("dirichlet", "periodic", "antiperiodic"):
        op = assemble(kp, 0.13, 2, 512, kind)
        args = (op.diag, op.offdiag, op.mass_diag) if kind == "dirichlet" else \
            (op.diag, op.offdiag, op.corner, op.mass_diag)
        fn = "sturm_counts" if kind == "dirichlet" else "sturm_counts_cyclic"
        a = getattr(BACKENDS["python"], fn)(*args, shifts)
        b = getattr(BACKENDS["compiled"], fn)(*args, shifts)
        assert np.array_equal(a, b)


def test_pure_python_env_selects_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, HILL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import hilltrunc._backend as b; print(b.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert BACKEND in BACKENDS
    assert "python" in BACKENDS and BACKENDS["python"] is _pykernels
