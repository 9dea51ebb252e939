"""Pure-Python/numpy implementations of the numerical kernels.

These mirror ``_ckernels.pyx`` one for one and are used whenever the
compiled extension is unavailable (or ``CPWLAB_PURE_PYTHON=1``).
"""
import math

import numpy as np

_AGM_MAXITER = 64


def ellipke_agm(k, kp):
    """Return (K(k), E(k)) from one AGM run.

    Both moduli are passed so callers can supply an accurately computed
    complement near k = 1.
    """
    a = 1.0
    b = kp
    c = k
    s = 0.5 * c * c
    p = 1.0
    for _ in range(_AGM_MAXITER):
        if abs(a - b) <= 1e-16 * a:
            break
        an = 0.5 * (a + b)
        c = 0.5 * (a - b)
        b = math.sqrt(a * b)
        a = an
        p *= 2.0
        s += 0.5 * p * c * c
    big_k = math.pi / (2.0 * a)
    return big_k, big_k * (1.0 - s)


def notch_model(f, f0, ql, qc, phi, a, alpha, tau):
    """Notch-port S21 with environment, evaluated on a float array."""
    f = np.asarray(f, dtype=float)
    env = a * np.exp(1j * (alpha - 2.0 * math.pi * f * tau))
    return env * (1.0 - (ql / qc) * np.exp(1j * phi) / (1.0 + 2j * ql * (f / f0 - 1.0)))


def abcd_shunt_s21(f, z_feed, z_res, length, c_kappa, v_ph, atten_per_rad, feed_length):
    """S21 of a matched line with a capacitively coupled shorted stub.

    The stub hangs at the midpoint between two lossless feed sections of
    ``feed_length`` each. ``atten_per_rad`` is alpha/beta for the stub.
    """
    f = np.asarray(f, dtype=float)
    out = np.empty(f.shape, dtype=complex)
    for i, fi in enumerate(f):
        w = 2.0 * math.pi * fi
        beta = w / v_ph
        gl = complex(atten_per_rad * beta * length, beta * length)
        z_in = z_res * np.tanh(gl)
        if c_kappa > 0.0:
            y = 1.0 / (1.0 / (1j * w * c_kappa) + z_in)
        else:
            y = 0.0
        bf = beta * feed_length
        cs, sn = math.cos(bf), math.sin(bf)
        line = np.array([[cs, 1j * z_feed * sn], [1j * sn / z_feed, cs]])
        shunt = np.array([[1.0, 0.0], [y, 1.0]])
        m = line @ shunt @ line
        out[i] = 2.0 / (m[0, 0] + m[0, 1] / z_feed + m[1, 0] * z_feed + m[1, 1])
    return out
