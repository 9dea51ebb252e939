"""Intracavity photon number and TLS power dependence of Q_i.

Photon number convention: <n> = 2 Ql^2 P / (|Qc| hbar w0^2).
TLS model::

    1/Qi(n) = F*delta0 * tanh(hbar w0 / 2 kB T) * (1 + n/n_c)^(-beta) + 1/Q_other
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import hbar, k as K_B

from .errors import (DomainError, FitFailure, IllPosedFitWarning,
                     InsufficientDataError, SchemaError)
from .lsq import levenberg_marquardt

DEFAULT_TEMP_K = 0.05
DEFAULT_ATTEN_DB = 90.0
LOW_POWER_N = 1.0
HIGH_POWER_N = 1e7
POINTS_HEADER = "n_photons,q_i"
BETA_MAX = 2.0


@dataclass(frozen=True)
class PowerPoint:
    p_vna_dbm: float
    atten_db: float
    p_applied_w: float
    n_photons: float

    @classmethod
    def calibrate(cls, p_vna_dbm, atten_db, f0, q_l, q_c_mag):
        p = applied_power(p_vna_dbm, atten_db)
        return cls(p_vna_dbm, atten_db, p, photon_number(p, f0, q_l, q_c_mag))


@dataclass(frozen=True)
class TlsParams:
    f_delta0: float
    n_c: float
    beta: float = 0.5
    q_other: float = math.inf
    temp_k: float = DEFAULT_TEMP_K

    def __post_init__(self):
        if not (self.f_delta0 >= 0 and self.n_c > 0 and self.q_other > 0 and self.temp_k > 0):
            raise DomainError("TLS parameters must be positive")
        if not 0 < self.beta <= BETA_MAX:
            raise DomainError(f"beta must lie in (0, {BETA_MAX}], got {self.beta!r}")


def applied_power(p_vna_dbm, atten_db):
    """Power at the device in watts."""
    if atten_db < 0:
        raise DomainError("attenuation is a loss and must be >= 0 dB")
    return 10.0 ** ((p_vna_dbm - atten_db - 30.0) / 10.0)


def photon_number(p_applied_w, f0, q_l, q_c_mag):
    w0 = 2.0 * math.pi * f0
    return 2.0 * q_l * q_l * p_applied_w / (q_c_mag * hbar * w0 * w0)


def thermal_factor(f0, temp_k):
    return math.tanh(hbar * 2.0 * math.pi * f0 / (2.0 * K_B * temp_k))


def tls_qi(n, p: TlsParams, f0):
    """Internal Q at mean photon number ``n`` (scalar or array)."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise DomainError("photon number must be >= 0")
    loss = p.f_delta0 * thermal_factor(f0, p.temp_k) * (1.0 + n / p.n_c) ** (-p.beta) + 1.0 / p.q_other
    qi = 1.0 / loss
    return float(qi) if qi.ndim == 0 else qi


def qi_low_power(p: TlsParams, f0):
    return tls_qi(LOW_POWER_N, p, f0)


def qi_high_power(p: TlsParams, f0):
    return tls_qi(HIGH_POWER_N, p, f0)


@dataclass
class TlsFit:
    params: TlsParams
    stderr: dict = field(default_factory=dict)
    n_iterations: int = 0
    converged: bool = False

    def to_record(self, f0=None):
        p = self.params
        rec = {
            "f_delta0": p.f_delta0,
            "n_c": p.n_c,
            "beta": p.beta,
            "q_other": p.q_other,
            "temp_k": p.temp_k,
        }
        if f0 is not None:
            rec["q_i_lp"] = qi_low_power(p, f0)
            rec["q_i_hp"] = qi_high_power(p, f0)
        rec["converged"] = self.converged
        return rec


def _beta(s):
    return BETA_MAX / (1.0 + np.exp(-s))


def fit_tls(points, f0, temp_k=DEFAULT_TEMP_K, max_iter=200, xtol=1e-10) -> TlsFit:
    """Fit the TLS model to (n, q_i) pairs by least squares on log(1/q_i).

    Raises:
        InsufficientDataError: fewer than 5 points.
        FitFailure: no convergence.

    Warns:
        IllPosedFitWarning: the photon numbers span less than 3 decades.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 5:
        raise InsufficientDataError(f"TLS fit needs >= 5 points, got {pts.shape[0]}")
    n, qi = pts[:, 0], pts[:, 1]
    if np.any(qi <= 0) or np.any(n < 0):
        raise DomainError("q_i must be positive and n non-negative")
    pos = n[n > 0]
    if pos.size < 2 or math.log10(pos.max() / pos.min()) < 3.0:
        warnings.warn("photon numbers span fewer than 3 decades; TLS parameters are ill-posed",
                      IllPosedFitWarning, stacklevel=2)
    th = thermal_factor(f0, temp_k)
    y = np.log(qi)

    def unpack(x):
        with np.errstate(over="ignore"):
            return np.exp(x[0]), np.exp(x[1]), _beta(x[2]), np.exp(x[3])

    def resid(x):
        fd, nc, beta, qo = unpack(x)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            loss = fd * th * (1.0 + n / nc) ** (-beta) + 1.0 / qo
            return y + np.log(loss)

    order = np.argsort(n)
    qo0 = 1.1 * float(np.max(qi[order][-max(1, n.size // 5):]))
    excess = 1.0 / float(np.min(qi[order][:max(1, n.size // 5)])) - 1.0 / qo0
    fd0 = max(excess, 1e-3 / qo0) / th
    lo, hi = max(pos.min(), 1e-6) if pos.size else 1e-3, max(n.max(), 1.0)
    best = None
    for nc0 in np.geomspace(lo, hi, 7):
        x0 = np.array([math.log(fd0), math.log(nc0), 0.0, math.log(qo0)])
        res = levenberg_marquardt(resid, x0, max_iter=max_iter, xtol=xtol)
        if best is None or (res.converged, -res.cost) > (best.converged, -best.cost):
            best = res
    fd, nc, beta, qo = (float(v) for v in unpack(best.x))
    if not best.converged:
        raise FitFailure(f"TLS fit: {best.message}", stage="tls_fit",
                         best={"f_delta0": fd, "n_c": nc, "beta": beta, "q_other": qo})
    cov = best.covariance()
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    dbeta = beta * (1.0 - beta / BETA_MAX)
    stderr = {"f_delta0": fd * sd[0], "n_c": nc * sd[1], "beta": dbeta * sd[2], "q_other": qo * sd[3]}
    params = TlsParams(fd, nc, min(beta, BETA_MAX), qo, temp_k)
    return TlsFit(params, stderr, best.n_iterations, best.converged)


def read_points_csv(source):
    text = source if isinstance(source, str) else source.read()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0].replace(" ", "") != POINTS_HEADER:
        raise SchemaError(f"expected header {POINTS_HEADER!r}")
    out = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 2:
            raise SchemaError(f"row {i}: expected 2 columns")
        try:
            out.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise SchemaError(f"row {i}: {exc}") from None
    return out


def write_points_csv(points):
    rows = [POINTS_HEADER] + [f"{float(n)!r},{float(q)!r}" for n, q in points]
    return "\n".join(rows) + "\n"
