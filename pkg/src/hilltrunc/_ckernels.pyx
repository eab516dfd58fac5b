# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: segment transfer products, Magnus propagation for
cosine-series potentials, and Sturm-sequence inertia counts."""

from libc.math cimport sin, cos, sinh, cosh, sqrt, fabs, fmax, fmin, pow, M_PI

import numpy as np

cdef double SERIES_THRESHOLD = 1e-8
cdef double SQRT3_12 = 0.14433756729740643  # sqrt(3) / 12
cdef double GAUSS_C1 = 0.21132486540518713  # 1/2 - sqrt(3)/6
cdef double GAUSS_C2 = 0.78867513459481287  # 1/2 + sqrt(3)/6


cdef inline void _segment(double w, double p, double q, double s, double lam,
                          double* out) noexcept nogil:
    cdef double k2 = (lam * s - q) / p
    cdef double z = k2 * w * w
    cdef double c, S, k
    if fabs(z) < SERIES_THRESHOLD:
        c = 1.0 - z / 2.0 + z * z / 24.0
        S = w * (1.0 - z / 6.0 + z * z / 120.0)
    elif k2 > 0:
        k = sqrt(k2)
        c = cos(k * w)
        S = sin(k * w) / k
    else:
        k = sqrt(-k2)
        c = cosh(k * w)
        S = sinh(k * w) / k
    out[0] = c
    out[1] = S / p
    out[2] = -p * k2 * S
    out[3] = c


cdef inline void _product(const double[::1] w, const double[::1] p,
                          const double[::1] q, const double[::1] s,
                          double lam, double* m) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a[4]
    cdef double t11, t12, t21, t22
    m[0] = 1.0
    m[1] = 0.0
    m[2] = 0.0
    m[3] = 1.0
    for i in range(w.shape[0]):
        _segment(w[i], p[i], q[i], s[i], lam, a)
        t11 = a[0] * m[0] + a[1] * m[2]
        t12 = a[0] * m[1] + a[1] * m[3]
        t21 = a[2] * m[0] + a[3] * m[2]
        t22 = a[2] * m[1] + a[3] * m[3]
        m[0] = t11
        m[1] = t12
        m[2] = t21
        m[3] = t22


def transfer_product(const double[::1] widths, const double[::1] p,
                     const double[::1] q, const double[::1] s, double lam):
    cdef double m[4]
    with nogil:
        _product(widths, p, q, s, lam, m)
    return (m[0], m[1], m[2], m[3])


def transfer_product_many(const double[::1] widths, const double[::1] p,
                          const double[::1] q, const double[::1] s, lams):
    cdef double[::1] lv = np.ascontiguousarray(lams, dtype=np.float64)
    out_arr = np.empty((lv.shape[0], 4), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double m[4]
    cdef Py_ssize_t j
    with nogil:
        for j in range(lv.shape[0]):
            _product(widths, p, q, s, lv[j], m)
            out[j, 0] = m[0]
            out[j, 1] = m[1]
            out[j, 2] = m[2]
            out[j, 3] = m[3]
    return out_arr


cdef inline double _cos_series(const double[::1] c, double kappa, double x) noexcept nogil:
    cdef double total = c[0]
    cdef Py_ssize_t k
    for k in range(1, c.shape[0]):
        total += c[k] * cos(kappa * k * x)
    return total


cdef inline void _magnus_step(const double[::1] c, double kappa, double lam,
                              double x, double h, double* e) noexcept nogil:
    # Fourth-order Magnus step for A(x) = [[0, 1], [q(x) - lam, 0]];
    # exp of a traceless 2x2 matrix in closed form, so det(e) = 1.
    cdef double f1 = _cos_series(c, kappa, x + GAUSS_C1 * h) - lam
    cdef double f2 = _cos_series(c, kappa, x + GAUSS_C2 * h) - lam
    cdef double o11 = SQRT3_12 * h * h * (f1 - f2)
    cdef double o12 = h
    cdef double o21 = 0.5 * h * (f1 + f2)
    cdef double th2 = o11 * o11 + o12 * o21
    cdef double C, S, th
    if fabs(th2) < 1e-8:
        C = 1.0 + th2 / 2.0 + th2 * th2 / 24.0
        S = 1.0 + th2 / 6.0 + th2 * th2 / 120.0
    elif th2 > 0:
        th = sqrt(th2)
        C = cosh(th)
        S = sinh(th) / th
    else:
        th = sqrt(-th2)
        C = cos(th)
        S = sin(th) / th
    e[0] = C + S * o11
    e[1] = S * o12
    e[2] = S * o21
    e[3] = C - S * o11


cdef inline void _apply(double* e, double* m, double* out) noexcept nogil:
    out[0] = e[0] * m[0] + e[1] * m[2]
    out[1] = e[0] * m[1] + e[1] * m[3]
    out[2] = e[2] * m[0] + e[3] * m[2]
    out[3] = e[2] * m[1] + e[3] * m[3]


cdef int _magnus(const double[::1] c, double period, double lam, double x0,
                 double x1, double rtol, double atol, double* m,
                 double* fail_x) noexcept nogil:
    cdef double kappa = 2.0 * M_PI / period
    cdef double span = x1 - x0
    cdef double qmax = 0.0
    cdef Py_ssize_t k
    for k in range(c.shape[0]):
        qmax += fabs(c[k])
    cdef double freq = sqrt(fabs(lam) + qmax) + kappa * c.shape[0]
    cdef double h = fmin(span, 0.05 / fmax(freq, 1e-3))
    cdef double hmin = 1e-14 * fmax(1.0, fabs(span))
    cdef double x = x0
    cdef double e[4]
    cdef double big[4]
    cdef double half[4]
    cdef double small[4]
    cdef double err, scale, fac, tol
    cdef int i
    m[0] = 1.0
    m[1] = 0.0
    m[2] = 0.0
    m[3] = 1.0
    # error per unit length, so the accumulated error tracks rtol over the span
    cdef long long steps = 0
    while x < x1:
        steps += 1
        if steps > 50000000:
            fail_x[0] = x
            return 1
        if x + h > x1:
            h = x1 - x
        _magnus_step(c, kappa, lam, x, h, e)
        _apply(e, m, big)
        _magnus_step(c, kappa, lam, x, 0.5 * h, e)
        _apply(e, m, half)
        _magnus_step(c, kappa, lam, x + 0.5 * h, 0.5 * h, e)
        _apply(e, half, small)
        err = 0.0
        scale = 0.0
        for i in range(4):
            err = fmax(err, fabs(small[i] - big[i]) / 15.0)
            scale = fmax(scale, fabs(small[i]))
        # floor at roundoff so short trailing steps are not rejected forever
        tol = fmax((atol + rtol * scale) * h / span, 64.0 * 2.220446049250313e-16 * scale)
        if err <= tol or h <= hmin:
            if h <= hmin and err > tol:
                fail_x[0] = x
                return 1
            x += h
            for i in range(4):
                m[i] = small[i]
            if err == 0.0:
                fac = 4.0
            else:
                fac = fmin(4.0, fmax(0.2, 0.9 * pow(tol / err, 0.25)))
            h *= fac
        else:
            h *= fmax(0.2, 0.9 * pow(tol / err, 0.25))
            if h < hmin:
                h = hmin
    return 0


def cosine_transfer(cos_coeffs, double period, double lam, double x0, double x1,
                    double rtol, double atol):
    cdef double[::1] c = np.ascontiguousarray(cos_coeffs, dtype=np.float64)
    cdef double m[4]
    cdef double fail_x = 0.0
    cdef int status
    if x1 == x0:
        return (1.0, 0.0, 0.0, 1.0)
    with nogil:
        status = _magnus(c, period, lam, x0, x1, rtol, atol, m, &fail_x)
    if status:
        raise FloatingPointError(f"step size underflow near x={fail_x!r}")
    return (m[0], m[1], m[2], m[3])


cdef inline double _pivot(double u, double pivmin) noexcept nogil:
    if fabs(u) < pivmin:
        return -pivmin
    return u


cdef double _pivmin(const double[::1] off, double corner) noexcept nogil:
    cdef double mx = corner * corner
    cdef Py_ssize_t i
    for i in range(off.shape[0]):
        mx = fmax(mx, off[i] * off[i])
    return fmax(mx, 1.0) * 1e-290


def sturm_counts(const double[::1] diag, const double[::1] off,
                 const double[::1] mass, shifts):
    cdef double[::1] sv = np.atleast_1d(np.ascontiguousarray(shifts, dtype=np.float64))
    out_arr = np.zeros(sv.shape[0], dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i, j
    cdef double u, sig
    cdef long long cnt
    cdef double pivmin = _pivmin(off, 0.0)
    with nogil:
        for j in range(sv.shape[0]):
            sig = sv[j]
            u = _pivot(diag[0] - sig * mass[0], pivmin)
            cnt = 1 if u < 0 else 0
            for i in range(1, n):
                u = _pivot(diag[i] - sig * mass[i] - off[i - 1] * off[i - 1] / u, pivmin)
                if u < 0:
                    cnt += 1
            out[j] = cnt
    return out_arr


def sturm_counts_cyclic(const double[::1] diag, const double[::1] off,
                        double corner, const double[::1] mass, shifts):
    cdef double[::1] sv = np.atleast_1d(np.ascontiguousarray(shifts, dtype=np.float64))
    out_arr = np.zeros(sv.shape[0], dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t n = diag.shape[0]
    if n < 3:
        raise ValueError("cyclic count needs at least 3 unknowns")
    cdef Py_ssize_t i, j
    cdef double u, sig, z, acc, l, b, schur
    cdef long long cnt
    cdef double pivmin = _pivmin(off, corner)
    with nogil:
        for j in range(sv.shape[0]):
            sig = sv[j]
            u = _pivot(diag[0] - sig * mass[0], pivmin)
            cnt = 1 if u < 0 else 0
            z = corner
            acc = z * z / u
            for i in range(1, n - 1):
                l = off[i - 1] / u
                u = _pivot(diag[i] - sig * mass[i] - off[i - 1] * l, pivmin)
                if u < 0:
                    cnt += 1
                b = off[n - 2] if i == n - 2 else 0.0
                z = b - l * z
                acc += z * z / u
            schur = diag[n - 1] - sig * mass[n - 1] - acc
            if schur < 0:
                cnt += 1
            out[j] = cnt
    return out_arr
