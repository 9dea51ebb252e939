# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels. Semantics match ``_pykernels`` exactly."""
import numpy as np

from libc.math cimport sqrt, fabs, cos, sin, M_PI

cdef extern from "<complex.h>" nogil:
    double complex ctanh(double complex z)

cdef int _AGM_MAXITER = 64


def ellipke_agm(double k, double kp):
    """Return (K(k), E(k)) from one AGM run."""
    cdef double a = 1.0, b = kp, c = k, an
    cdef double s = 0.5 * c * c, p = 1.0
    cdef int i
    for i in range(_AGM_MAXITER):
        if fabs(a - b) <= 1e-16 * a:
            break
        an = 0.5 * (a + b)
        c = 0.5 * (a - b)
        b = sqrt(a * b)
        a = an
        p *= 2.0
        s += 0.5 * p * c * c
    cdef double big_k = M_PI / (2.0 * a)
    return big_k, big_k * (1.0 - s)


def notch_model(f, double f0, double ql, double qc, double phi,
                double a, double alpha, double tau):
    cdef double[::1] fv = np.ascontiguousarray(f, dtype=np.float64).ravel()
    cdef Py_ssize_t n = fv.shape[0], i
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef double complex num = (ql / qc) * (cos(phi) + 1j * sin(phi))
    cdef double ph
    with nogil:
        for i in range(n):
            ph = alpha - 2.0 * M_PI * fv[i] * tau
            ov[i] = a * (cos(ph) + 1j * sin(ph)) * (
                1.0 - num / (1.0 + 2j * ql * (fv[i] / f0 - 1.0)))
    return out.reshape(np.shape(f))


def abcd_shunt_s21(f, double z_feed, double z_res, double length,
                   double c_kappa, double v_ph, double atten_per_rad,
                   double feed_length):
    cdef double[::1] fv = np.ascontiguousarray(f, dtype=np.float64).ravel()
    cdef Py_ssize_t n = fv.shape[0], i
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef double w, beta, bf, cs, sn
    cdef double complex z_in, y, gl
    cdef double complex a11, a12, a21, a22, b11, b12, b21, b22
    with nogil:
        for i in range(n):
            w = 2.0 * M_PI * fv[i]
            beta = w / v_ph
            gl = atten_per_rad * beta * length + 1j * (beta * length)
            z_in = z_res * ctanh(gl)
            if c_kappa > 0.0:
                y = 1.0 / (1.0 / (1j * w * c_kappa) + z_in)
            else:
                y = 0.0
            bf = beta * feed_length
            cs = cos(bf)
            sn = sin(bf)
            # line @ shunt
            a11 = cs + 1j * z_feed * sn * y
            a12 = 1j * z_feed * sn
            a21 = 1j * sn / z_feed + cs * y
            a22 = cs
            # (line @ shunt) @ line
            b11 = a11 * cs + a12 * 1j * sn / z_feed
            b12 = a11 * 1j * z_feed * sn + a12 * cs
            b21 = a21 * cs + a22 * 1j * sn / z_feed
            b22 = a21 * 1j * z_feed * sn + a22 * cs
            ov[i] = 2.0 / (b11 + b12 / z_feed + b21 * z_feed + b22)
    return out.reshape(np.shape(f))
