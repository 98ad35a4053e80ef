# cython: boundscheck=False, wraparound=False, cdivision=True
"""Fused elementwise/reduction kernels for the hot training path.

Same signatures as sle.backend.numpy_kernels; reductions accumulate in double.
"""

import numpy as np

cimport cython
from libc.math cimport exp, expf, sqrt, fabs

ctypedef fused floating:
    float
    double

NAME = "compiled"


cdef inline floating _sigmoid(floating x) noexcept nogil:
    if floating is float:
        return <float>1.0 / (<float>1.0 + expf(-x))
    else:
        return 1.0 / (1.0 + exp(-x))


def _silu_fwd(floating[::1] x, floating[::1] y):
    cdef Py_ssize_t i
    cdef floating s
    with nogil:
        for i in range(x.shape[0]):
            s = _sigmoid(x[i])
            y[i] = x[i] * s


def _silu_bwd(floating[::1] x, floating[::1] gy, floating[::1] gx):
    cdef Py_ssize_t i
    cdef floating s
    with nogil:
        for i in range(x.shape[0]):
            s = _sigmoid(x[i])
            gx[i] = gy[i] * (s * (1 + x[i] * (1 - s)))


def _rmsnorm_fwd(floating[:, ::1] x, double eps, floating[:, ::1] y,
                 floating[:, ::1] inv):
    cdef Py_ssize_t r, i, d = x.shape[1]
    cdef double ms
    cdef floating s
    with nogil:
        for r in range(x.shape[0]):
            ms = 0.0
            for i in range(d):
                ms += <double>x[r, i] * <double>x[r, i]
            s = <floating>(1.0 / sqrt(ms / d + eps))
            inv[r, 0] = s
            for i in range(d):
                y[r, i] = x[r, i] * s


def _rmsnorm_bwd(floating[:, ::1] x, floating[:, ::1] inv,
                 floating[:, ::1] gy, floating[:, ::1] gx):
    cdef Py_ssize_t r, i, d = x.shape[1]
    cdef double dot
    cdef floating s, coef
    with nogil:
        for r in range(x.shape[0]):
            dot = 0.0
            for i in range(d):
                dot += <double>gy[r, i] * <double>x[r, i]
            s = inv[r, 0]
            coef = <floating>(s * s * s * (dot / d))
            for i in range(d):
                gx[r, i] = s * gy[r, i] - coef * x[r, i]


def _l1_fwd(floating[::1] a, floating[::1] b):
    cdef Py_ssize_t i
    cdef double acc = 0.0
    with nogil:
        for i in range(a.shape[0]):
            acc += fabs(<double>a[i] - <double>b[i])
    return acc / a.shape[0]


def _l1_bwd(floating[::1] a, floating[::1] b, double g, floating[::1] ga):
    cdef Py_ssize_t i
    cdef floating scale = <floating>(g / a.shape[0])
    cdef floating d
    with nogil:
        for i in range(a.shape[0]):
            d = a[i] - b[i]
            if d > 0:
                ga[i] = scale
            elif d < 0:
                ga[i] = -scale
            else:
                ga[i] = 0


def _cosine_fwd(floating[:, ::1] a, floating[:, ::1] b,
                double[::1] dot, double[::1] na, double[::1] nb):
    cdef Py_ssize_t r, i, d = a.shape[1]
    cdef double sd, sa, sb, acc = 0.0
    with nogil:
        for r in range(a.shape[0]):
            sd = 0.0
            sa = 0.0
            sb = 0.0
            for i in range(d):
                sd += <double>a[r, i] * <double>b[r, i]
                sa += <double>a[r, i] * <double>a[r, i]
                sb += <double>b[r, i] * <double>b[r, i]
            dot[r] = sd
            na[r] = sqrt(sa)
            nb[r] = sqrt(sb)
            acc += 1.0 - sd / (na[r] * nb[r])
    return acc / a.shape[0]


def _cosine_bwd(floating[:, ::1] a, floating[:, ::1] b,
                double[::1] dot, double[::1] na, double[::1] nb, double g,
                floating[:, ::1] ga, floating[:, ::1] gb):
    cdef Py_ssize_t r, i, d = a.shape[1]
    cdef double c = -g / a.shape[0]
    cdef double inv_ab, ca, cb
    with nogil:
        for r in range(a.shape[0]):
            inv_ab = 1.0 / (na[r] * nb[r])
            ca = dot[r] / (na[r] * na[r] * na[r] * nb[r])
            cb = dot[r] / (na[r] * nb[r] * nb[r] * nb[r])
            for i in range(d):
                ga[r, i] = <floating>(c * (<double>b[r, i] * inv_ab - <double>a[r, i] * ca))
                gb[r, i] = <floating>(c * (<double>a[r, i] * inv_ab - <double>b[r, i] * cb))


def _adamw(floating[::1] p, floating[::1] g, floating[::1] m, floating[::1] v,
           double lr, double beta1, double beta2, double eps,
           double weight_decay, double bc1, double bc2):
    cdef Py_ssize_t i
    cdef floating b1 = <floating>beta1, b2 = <floating>beta2
    cdef floating c1 = <floating>(1.0 - beta1), c2 = <floating>(1.0 - beta2)
    cdef floating flr = <floating>lr, feps = <floating>eps, fwd_ = <floating>weight_decay
    cdef floating fbc1 = <floating>bc1, fbc2 = <floating>bc2
    cdef floating mhat, vhat
    with nogil:
        for i in range(p.shape[0]):
            m[i] = b1 * m[i] + c1 * g[i]
            v[i] = b2 * v[i] + c2 * (g[i] * g[i])
            mhat = m[i] / fbc1
            vhat = v[i] / fbc2
            p[i] = p[i] - flr * (mhat / (<floating>sqrt(<double>vhat) + feps) + fwd_ * p[i])


def _ema(floating[::1] shadow, floating[::1] p, double decay):
    cdef Py_ssize_t i
    cdef floating d = <floating>decay, c = <floating>(1.0 - decay)
    with nogil:
        for i in range(shadow.shape[0]):
            shadow[i] = d * shadow[i] + c * p[i]


def silu_fwd(x):
    y = np.empty_like(x)
    _silu_fwd(np.ascontiguousarray(x).reshape(-1), y.reshape(-1))
    return y


def silu_bwd(x, gy):
    gx = np.empty_like(x)
    _silu_bwd(np.ascontiguousarray(x).reshape(-1),
              np.ascontiguousarray(gy).reshape(-1), gx.reshape(-1))
    return gx


def rmsnorm_fwd(x, eps):
    x2 = np.ascontiguousarray(x if x.ndim == 2 else x.reshape(1, -1))
    y = np.empty_like(x2)
    inv = np.empty((x2.shape[0], 1), dtype=x.dtype)
    _rmsnorm_fwd(x2, float(eps), y, inv)
    return y.reshape(x.shape), inv


def rmsnorm_bwd(x, inv, gy):
    x2 = np.ascontiguousarray(x if x.ndim == 2 else x.reshape(1, -1))
    gy2 = np.ascontiguousarray(gy if gy.ndim == 2 else gy.reshape(1, -1))
    gx = np.empty_like(x2)
    _rmsnorm_bwd(x2, inv, gy2, gx)
    return gx.reshape(x.shape)


def l1_fwd(a, b):
    return float(_l1_fwd(np.ascontiguousarray(a).reshape(-1),
                         np.ascontiguousarray(b).reshape(-1)))


def l1_bwd(a, b, g):
    ga = np.empty_like(a)
    _l1_bwd(np.ascontiguousarray(a).reshape(-1),
            np.ascontiguousarray(b).reshape(-1), float(g), ga.reshape(-1))
    return ga


def cosine_fwd(a, b):
    a2 = np.ascontiguousarray(a if a.ndim == 2 else a.reshape(1, -1))
    b2 = np.ascontiguousarray(b if b.ndim == 2 else b.reshape(1, -1))
    n = a2.shape[0]
    dot = np.empty(n, dtype=np.float64)
    na = np.empty(n, dtype=np.float64)
    nb = np.empty(n, dtype=np.float64)
    loss = _cosine_fwd(a2, b2, dot, na, nb)
    return float(loss), dot, na, nb


def cosine_bwd(a, b, dot, na, nb, g):
    a2 = np.ascontiguousarray(a if a.ndim == 2 else a.reshape(1, -1))
    b2 = np.ascontiguousarray(b if b.ndim == 2 else b.reshape(1, -1))
    ga = np.empty_like(a2)
    gb = np.empty_like(b2)
    _cosine_bwd(a2, b2, dot, na, nb, float(g), ga, gb)
    return ga.reshape(a.shape), gb.reshape(b.shape)


def adamw_step(p, g, m, v, lr, beta1, beta2, eps, weight_decay, bc1, bc2):
    _adamw(p.reshape(-1), np.ascontiguousarray(g).reshape(-1), m.reshape(-1),
           v.reshape(-1), float(lr), float(beta1), float(beta2), float(eps),
           float(weight_decay), float(bc1), float(bc2))


def ema_step(shadow, p, decay):
    _ema(shadow.reshape(-1), np.ascontiguousarray(p).reshape(-1), float(decay))
