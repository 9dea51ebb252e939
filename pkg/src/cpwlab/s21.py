"""Notch-port S21 model, synthetic traces and an ABCD circuit oracle.

Model (diameter-corrected notch with environment)::

    S21(f) = a e^{i alpha} e^{-2 pi i f tau} [1 - (Ql/|Qc|) e^{i phi} / (1 + 2i Ql (f/f0 - 1))]

Trace files are CSV with header ``freq_hz,re_s21,im_s21``; optional
``# key=value`` metadata lines may precede the header.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C0
from scipy.optimize import brentq

from . import kernels
from .errors import DomainError, SchemaError, UnphysicalParametersError

TRACE_HEADER = "freq_hz,re_s21,im_s21"


@dataclass(frozen=True)
class NotchParams:
    f0: float
    q_l: float
    q_c_mag: float
    phi: float = 0.0
    env_a: float = 1.0
    env_alpha: float = 0.0
    env_tau: float = 0.0

    def __post_init__(self):
        if not (self.q_l > 0 and self.q_c_mag > 0):
            raise DomainError("q_l and q_c_mag must be positive")
        if not abs(self.phi) < math.pi / 2:
            raise DomainError(f"|phi| must be < pi/2, got {self.phi!r}")

    @property
    def q_i(self):
        return qi_from_diameter_correction(self.q_l, self.q_c_mag, self.phi)

    def as_tuple(self):
        return (self.f0, self.q_l, self.q_c_mag, self.phi,
                self.env_a, self.env_alpha, self.env_tau)

    @classmethod
    def from_internal(cls, f0, q_i, q_c_mag, phi=0.0, **env):
        """Build parameters from Q_i instead of Q_l."""
        q_l = 1.0 / (1.0 / q_i + math.cos(phi) / q_c_mag)
        return cls(f0, q_l, q_c_mag, phi, **env)


@dataclass
class Trace:
    """Sampled complex transmission. Samples are sorted by frequency."""

    freqs: np.ndarray
    s21: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float).ravel()
        z = np.asarray(self.s21, dtype=complex).ravel()
        if f.shape != z.shape:
            raise DomainError(f"length mismatch: {f.size} freqs vs {z.size} s21 values")
        order = np.argsort(f, kind="stable")
        f, z = f[order], z[order]
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise DomainError("duplicate frequencies in trace")
        self.freqs = f
        self.s21 = z

    def __len__(self):
        return self.freqs.size

    @property
    def span(self):
        return float(self.freqs[-1] - self.freqs[0])


def notch_s21(p: NotchParams, f):
    """Evaluate the notch model at frequency ``f`` (scalar or array)."""
    out = kernels.notch_model(np.asarray(f, dtype=float), *p.as_tuple())
    return complex(out) if np.ndim(f) == 0 else out


def qi_from_diameter_correction(q_l, q_c_mag, phi):
    """Internal Q from loaded Q, |Qc| and mismatch angle phi."""
    denom = 1.0 / q_l - math.cos(phi) / q_c_mag
    if not denom > 0:
        raise UnphysicalParametersError(
            f"1/q_l - cos(phi)/q_c_mag = {denom!r} <= 0 "
            f"(q_l={q_l!r}, q_c_mag={q_c_mag!r}, phi={phi!r})"
        )
    return 1.0 / denom


def synth_trace(p: NotchParams, f_center, span, n_points=201, noise_sigma=0.0,
                seed=None, metadata=None) -> Trace:
    """Uniformly sampled model trace with complex white Gaussian noise.

    ``noise_sigma`` is the standard deviation per quadrature.
    """
    if n_points < 16:
        raise DomainError("n_points must be >= 16")
    if not span > 0 or not noise_sigma >= 0:
        raise DomainError("span must be positive and noise_sigma non-negative")
    f = np.linspace(f_center - span / 2.0, f_center + span / 2.0, n_points)
    z = kernels.notch_model(f, *p.as_tuple())
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        z = z + noise_sigma * (rng.standard_normal(n_points) + 1j * rng.standard_normal(n_points))
    return Trace(f, z, dict(metadata or {}))


def abcd_notch_sim(z_feed, z_res, length, c_kappa, q_i_assumed, freqs,
                   eps_eff=6.225, feed_length=0.0) -> Trace:
    """Circuit-level S21 of a feedline with one capacitively coupled lambda/4 stub.

    The stub (impedance ``z_res``, shorted at the far end) is coupled
    through ``c_kappa`` at the midpoint of a matched feedline. Loss is put
    in the stub's propagation constant, alpha/beta = 1/(2 q_i_assumed);
    pass ``math.inf`` for a lossless stub.
    """
    v_ph = C0 / math.sqrt(eps_eff)
    atten = 0.0 if math.isinf(q_i_assumed) else 1.0 / (2.0 * q_i_assumed)
    f = np.asarray(freqs, dtype=float)
    z = kernels.abcd_shunt_s21(f, z_feed, z_res, length, c_kappa, v_ph, atten, feed_length)
    return Trace(f, z)


def abcd_notch_resonance(z_res, length, c_kappa, eps_eff=6.225):
    """Frequency where the lossless shunt branch of :func:`abcd_notch_sim` is a short.

    Coupling pulls the resonance below the bare c / (4 L sqrt(eps_eff)).
    """
    v_ph = C0 / math.sqrt(eps_eff)
    f_qw = v_ph / (4.0 * length)
    if c_kappa <= 0:
        return f_qw

    def branch_reactance(f):
        w = 2.0 * math.pi * f
        return z_res * math.tan(w * length / v_ph) - 1.0 / (w * c_kappa)

    hi = f_qw * (1.0 - 1e-15)
    lo = f_qw * 0.5
    return brentq(branch_reactance, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)


def write_trace_csv(trace: Trace, fh=None):
    """Write ``trace`` as CSV. Returns the text when ``fh`` is None."""
    out = io.StringIO() if fh is None else fh
    for key, value in trace.metadata.items():
        out.write(f"# {key}={value}\n")
    out.write(TRACE_HEADER + "\n")
    for f, z in zip(trace.freqs, trace.s21):
        out.write(f"{float(f)!r},{float(z.real)!r},{float(z.imag)!r}\n")
    if fh is None:
        return out.getvalue()
    return None


def read_trace_csv(source) -> Trace:
    """Parse trace CSV from text or a file object."""
    text = source if isinstance(source, str) else source.read()
    metadata = {}
    rows = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if not header_seen:
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    metadata[key.strip()] = value.strip()
                continue
            if line.replace(" ", "") != TRACE_HEADER:
                raise SchemaError(f"line {lineno}: expected header {TRACE_HEADER!r}, got {line!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise SchemaError(f"line {lineno}: expected 3 columns, got {len(parts)}")
        try:
            rows.append(tuple(float(x) for x in parts))
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
    if not header_seen:
        raise SchemaError(f"missing header {TRACE_HEADER!r}")
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    return Trace(arr[:, 0], arr[:, 1] + 1j * arr[:, 2], metadata)
