"""Pure numpy/scipy implementations of the numerical kernels.

Mirrors the surface of the compiled ``_ckernels`` module. Used when the
extension is not built or when ``HILL_PURE_PYTHON=1`` is set.
"""
import numpy as np
from scipy.integrate import solve_ivp

SERIES_THRESHOLD = 1e-8


def _segment_entries(w, p, q, s, lam):
    """Entries (c, S/p, -p*k2*S, c) of one constant-coefficient segment.

    Works elementwise on numpy arrays of ``lam``.
    """
    lam = np.asarray(lam, dtype=float)
    k2 = (lam * s - q) / p
    z = k2 * w * w
    small = np.abs(z) < SERIES_THRESHOLD
    c = np.empty_like(k2)
    S = np.empty_like(k2)

    c[small] = 1.0 - z[small] / 2.0 + z[small] ** 2 / 24.0
    S[small] = w * (1.0 - z[small] / 6.0 + z[small] ** 2 / 120.0)

    pos = (~small) & (k2 > 0)
    k = np.sqrt(k2[pos])
    c[pos] = np.cos(k * w)
    S[pos] = np.sin(k * w) / k

    neg = (~small) & (k2 <= 0)
    k = np.sqrt(-k2[neg])
    c[neg] = np.cosh(k * w)
    S[neg] = np.sinh(k * w) / k
    return c, S / p, -p * k2 * S, c


def transfer_product_many(widths, p, q, s, lams):
    """Transfer matrices through consecutive constant segments, one per lambda.

    Returns an array of shape (len(lams), 4) holding (m11, m12, m21, m22).
    """
    lams = np.ascontiguousarray(lams, dtype=float)
    m11 = np.ones_like(lams)
    m12 = np.zeros_like(lams)
    m21 = np.zeros_like(lams)
    m22 = np.ones_like(lams)
    for w, pi, qi, si in zip(widths, p, q, s):
        a11, a12, a21, a22 = _segment_entries(w, pi, qi, si, lams)
        m11, m12, m21, m22 = (
            a11 * m11 + a12 * m21,
            a11 * m12 + a12 * m22,
            a21 * m11 + a22 * m21,
            a21 * m12 + a22 * m22,
        )
    return np.stack([m11, m12, m21, m22], axis=1)


def transfer_product(widths, p, q, s, lam):
    out = transfer_product_many(widths, p, q, s, np.array([lam], dtype=float))
    return tuple(float(v) for v in out[0])


def cosine_transfer(cos_coeffs, period, lam, x0, x1, rtol, atol):
    """Propagator of (y, y')' = [[0, 1], [q(x) - lam, 0]] (y, y') with
    q(x) = sum_k cos_coeffs[k] * cos(2 pi k x / period).

    Uses scipy's DOP853 on both fundamental columns at once.
    """
    cos_coeffs = np.asarray(cos_coeffs, dtype=float)
    ks = 2.0 * np.pi * np.arange(len(cos_coeffs)) / period

    def rhs(x, u):
        f = float(np.dot(cos_coeffs, np.cos(ks * x))) - lam
        return [u[1], f * u[0], u[3], f * u[2]]

    if x1 == x0:
        return (1.0, 0.0, 0.0, 1.0)
    sol = solve_ivp(rhs, (x0, x1), [1.0, 0.0, 0.0, 1.0], method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise FloatingPointError(f"integration failed near x={sol.t[-1]!r}: {sol.message}")
    y1, py1, y2, py2 = sol.y[:, -1]
    return (float(y1), float(y2), float(py1), float(py2))


def sturm_counts(diag, off, mass, shifts):
    """Number of generalized eigenvalues of (K, diag(mass)) below each shift.

    K is symmetric tridiagonal with diagonal ``diag`` and off-diagonal ``off``.
    Vectorized over shifts; the recurrence itself runs in a Python loop.
    """
    diag = np.asarray(diag, dtype=float)
    off2 = np.asarray(off, dtype=float) ** 2
    mass = np.asarray(mass, dtype=float)
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    pivmin = _pivmin(off2)
    u = diag[0] - shifts * mass[0]
    u = np.where(np.abs(u) < pivmin, -pivmin, u)
    count = (u < 0).astype(np.int64)
    for i in range(1, diag.shape[0]):
        u = diag[i] - shifts * mass[i] - off2[i - 1] / u
        u = np.where(np.abs(u) < pivmin, -pivmin, u)
        count += u < 0
    return count


def sturm_counts_cyclic(diag, off, corner, mass, shifts):
    """Like ``sturm_counts`` for a tridiagonal matrix with one corner entry
    coupling the first and last unknowns (periodic wrap).

    Inertia is the inertia of the leading (n-1)-block plus the sign of the
    Schur complement of the last unknown.
    """
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    mass = np.asarray(mass, dtype=float)
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    n = diag.shape[0]
    if n < 3:
        raise ValueError("cyclic count needs at least 3 unknowns")
    with np.errstate(over="ignore", invalid="ignore"):
        return _cyclic(diag, off, corner, mass, shifts, n)


def _cyclic(diag, off, corner, mass, shifts, n):
    pivmin = _pivmin(np.append(off ** 2, corner ** 2))

    u = diag[0] - shifts * mass[0]
    u = np.where(np.abs(u) < pivmin, -pivmin, u)
    count = (u < 0).astype(np.int64)
    z = np.full_like(shifts, corner)
    acc = z * z / u
    for i in range(1, n - 1):
        l = off[i - 1] / u
        u = diag[i] - shifts * mass[i] - off[i - 1] * l
        u = np.where(np.abs(u) < pivmin, -pivmin, u)
        count += u < 0
        b = off[n - 2] if i == n - 2 else 0.0
        z = b - l * z
        acc = acc + z * z / u
    schur = diag[n - 1] - shifts * mass[n - 1] - acc
    count += schur < 0
    return count


def _pivmin(off2):
    m = float(np.max(off2)) if len(off2) else 1.0
    return max(m, 1.0) * 1e-290
