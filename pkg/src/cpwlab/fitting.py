"""Notch-port resonator fitting.

Pipeline: cable-delay estimate -> delay removal -> algebraic circle fit ->
phase-vs-frequency fit -> environment normalization from the off-resonant
point -> mismatch angle and |Qc| from the circle -> joint damped
least-squares refinement of all seven parameters on complex residuals.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig

from .errors import (CpwlabError, DegenerateGeometryError, FitFailure,
                     InsufficientDataError, NoResonanceError,
                     UnphysicalParametersError)
from .lsq import levenberg_marquardt
from .s21 import NotchParams, Trace, notch_s21, qi_from_diameter_correction
from . import kernels

MIN_POINTS = 16
RECORD_FIELDS = ("f0_hz", "q_l", "q_c_mag", "phi_rad", "q_i", "env_a",
                 "env_alpha_rad", "env_tau_s", "rms_residual", "converged")
PARAM_NAMES = ("f0", "q_l", "q_c_mag", "phi", "env_a", "env_alpha", "env_tau")

_MAD_TO_SIGMA = 1.4826


def _wrap(x):
    return (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass
class FitOptions:
    max_iter: int = 200
    xtol: float = 1e-10
    delay: float | None = None          # fixed cable delay, skips estimation
    no_resonance_factor: float = 5.0
    check_physical: bool = True         # raise when the fitted Q_i <= 0
    raise_on_failure: bool = True


@dataclass
class FitResult:
    params: NotchParams
    q_i: float
    stderr: dict = field(default_factory=dict)
    rms_residual: float = math.nan
    n_iterations: int = 0
    converged: bool = False

    def to_record(self):
        p = self.params
        return {
            "f0_hz": p.f0,
            "q_l": p.q_l,
            "q_c_mag": p.q_c_mag,
            "phi_rad": p.phi,
            "q_i": self.q_i,
            "env_a": p.env_a,
            "env_alpha_rad": p.env_alpha,
            "env_tau_s": p.env_tau,
            "rms_residual": self.rms_residual,
            "converged": self.converged,
        }


@dataclass
class FitError:
    """Per-trace failure entry returned by :func:`batch_fit`."""

    index: int
    stage: str
    message: str

    def to_record(self):
        return {"index": self.index, "error": self.stage, "message": self.message}


def _check_trace(trace):
    if len(trace) < MIN_POINTS:
        raise InsufficientDataError(f"need at least {MIN_POINTS} samples, got {len(trace)}")


def estimate_delay(trace: Trace):
    """Cable delay from the phase slope over the outer 20% at each edge.

    Both edges share one slope and get separate intercepts. A 1/(f - f_r)
    regressor absorbs the odd off-resonant phase tail of the resonance,
    with f_r taken at the transmission minimum.
    """
    f, z = trace.freqs, trace.s21
    n = f.size
    m = math.ceil(0.2 * n)
    if 2 * m < 8 or 2 * m > n:
        raise InsufficientDataError(f"need 8 edge samples for delay estimate, have {min(2 * m, n)}")
    f_r = f[np.argmin(np.abs(z))]
    scale = trace.span
    rows, rhs = [], []
    for sl, col in ((slice(0, m), 0), (slice(n - m, n), 1)):
        fe = f[sl]
        ph = np.unwrap(np.angle(z[sl]))
        for fi, p in zip(fe, ph):
            rows.append(((fi - f_r) / scale,
                         1.0 if col == 0 else 0.0,
                         1.0 if col == 1 else 0.0,
                         0.0 if fi == f_r else scale / (fi - f_r) * 1e-3))
            rhs.append(p)
    A = np.array(rows)
    b = np.array(rhs)
    if np.all(A[:, 3] == 0) or not np.all(np.isfinite(A)):
        A = A[:, :3]
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return -coef[0] / scale / (2.0 * math.pi)


def circle_fit(points):
    """Algebraic circle fit with Pratt's constraint.

    Minimizes the algebraic distance via the generalized eigenproblem of the
    moment matrix. Returns ``(center, radius)``.
    """
    z = np.asarray(points, dtype=complex).ravel()
    if z.size < 8:
        raise InsufficientDataError(f"circle fit needs >= 8 points, got {z.size}")
    mu = z.mean()
    spread = np.sqrt(np.mean(np.abs(z - mu) ** 2))
    if not spread > 1e-14 * max(abs(mu), 1e-300):
        raise DegenerateGeometryError("points are (numerically) identical")
    w = (z - mu) / spread
    x, y = w.real, w.imag
    Z = np.column_stack((x * x + y * y, x, y, np.ones_like(x)))
    M = Z.T @ Z / z.size
    B = np.array([[0.0, 0, 0, -2], [0, 1, 0, 0], [0, 0, 1, 0], [-2, 0, 0, 0]])
    vals, vecs = eig(M, B)
    vals = vals.real
    ok = np.isfinite(vals) & (vals > -1e-9 * np.max(np.abs(vals[np.isfinite(vals)])))
    if not np.any(ok):
        raise DegenerateGeometryError("no admissible circle solution")
    idx = np.flatnonzero(ok)[np.argmin(vals[ok])]
    A, Bc, Cc, D = vecs[:, idx].real
    if abs(A) < 1e-10 * np.linalg.norm((A, Bc, Cc, D)):
        raise DegenerateGeometryError("points are collinear")
    xc, yc = -Bc / (2 * A), -Cc / (2 * A)
    r2 = (Bc * Bc + Cc * Cc - 4 * A * D) / (4 * A * A)
    if not r2 > 0:
        raise DegenerateGeometryError("fitted circle has non-positive radius")
    center = mu + spread * complex(xc, yc)
    return center, spread * math.sqrt(r2)


def _crossing(f, theta, level):
    # first frequency where theta falls through level, by linear interpolation
    s = theta - level
    idx = np.flatnonzero((s[:-1] >= 0) & (s[1:] < 0))
    if idx.size == 0:
        return None
    i = idx[np.argmin(np.abs(f[idx] - f[np.argmin(np.abs(s))]))]
    return f[i] + (f[i + 1] - f[i]) * s[i] / (s[i] - s[i + 1])


def _phase_model(f, f0, ql, theta0):
    return theta0 + 2.0 * np.arctan(2.0 * ql * (1.0 - f / f0))


def phase_fit(trace: Trace, center, max_iter=200, xtol=1e-10):
    """Fit theta(f) = theta0 + 2 arctan(2 Ql (1 - f/f0)) to arg(S21 - center).

    Returns ``(f0, q_l, theta0)`` with theta0 wrapped to (-pi, pi].

    Raises:
        FitFailure: no convergence within ``max_iter``; ``best`` holds the
            last iterate.
    """
    f = trace.freqs
    theta = np.unwrap(np.angle(trace.s21 - center))
    n = f.size
    m = max(n // 10, 2)
    t_start, t_end = np.median(theta[:m]), np.median(theta[-m:])
    t_mid = 0.5 * (t_start + t_end)
    f0 = _crossing(f, theta, t_mid)
    if f0 is None:
        f0 = f[np.argmin(np.abs(theta - t_mid))]
    f_plus = _crossing(f, theta, t_mid + math.pi / 2)
    f_minus = _crossing(f, theta, t_mid - math.pi / 2)
    if f_plus is not None and f_minus is not None and f_minus > f_plus:
        ql = f0 / (f_minus - f_plus)
    else:
        k = int(np.argmin(np.abs(f - f0)))
        lo, hi = max(k - 2, 0), min(k + 2, n - 1)
        slope = (theta[hi] - theta[lo]) / (f[hi] - f[lo])
        ql = max(-slope * f0 / 4.0, 10.0)
    span = trace.span
    f_ref = 0.5 * (f[0] + f[-1])

    def unpack(p):
        return f_ref + p[0] * span, math.exp(p[1]), p[2]

    def resid(p):
        f0_, ql_, t0 = unpack(p)
        return _wrap(theta - _phase_model(f, f0_, ql_, t0))

    # staged: (Ql, theta0) with f0 held, then all three
    x0 = np.array([(f0 - f_ref) / span, math.log(ql), t_mid])
    stage = levenberg_marquardt(lambda p: resid(np.array([x0[0], p[0], p[1]])),
                                x0[1:], max_iter=max_iter, xtol=xtol)
    x0[1:] = stage.x
    res = levenberg_marquardt(resid, x0, max_iter=max_iter, xtol=xtol)
    f0_, ql_, t0 = unpack(res.x)
    if not res.converged:
        raise FitFailure(f"phase fit: {res.message}", stage="phase_fit",
                         best={"f0": f0_, "q_l": ql_, "theta0": t0})
    return f0_, ql_, float(_wrap(t0))


class _Refiner:
    """Scaled 7-parameter residual for the final joint refinement.

    Coordinates: ((f0 - f_ref)/span, ln Ql, ln|Qc|, phi, ln a,
    alpha - 2 pi f_ref tau, 2 pi span tau).
    """

    def __init__(self, trace):
        self.f = trace.freqs
        self.z = trace.s21
        self.f_ref = 0.5 * (self.f[0] + self.f[-1])
        self.span = trace.span

    def to_internal(self, p: NotchParams):
        return np.array([
            (p.f0 - self.f_ref) / self.span,
            math.log(p.q_l),
            math.log(p.q_c_mag),
            p.phi,
            math.log(p.env_a),
            p.env_alpha - 2.0 * math.pi * self.f_ref * p.env_tau,
            2.0 * math.pi * self.span * p.env_tau,
        ])

    def unpack(self, x):
        tau = x[6] / (2.0 * math.pi * self.span)
        return (self.f_ref + x[0] * self.span, math.exp(x[1]), math.exp(x[2]), x[3],
                math.exp(x[4]), x[5] + 2.0 * math.pi * self.f_ref * tau, tau)

    def model(self, x):
        return kernels.notch_model(self.f, *self.unpack(x))

    def residual(self, x):
        d = self.z - self.model(x)
        return np.concatenate((d.real, d.imag))


def _initial_params(trace, options):
    tau = options.delay if options.delay is not None else estimate_delay(trace)
    z1 = trace.s21 * np.exp(2j * math.pi * trace.freqs * tau)
    try:
        zc, r = circle_fit(z1)
    except DegenerateGeometryError as exc:
        raise NoResonanceError(f"no resonance: {exc}", stage="circle_fit") from None
    dev = np.abs(np.abs(z1 - zc) - r)
    noise = _MAD_TO_SIGMA * float(np.median(dev))
    if 2.0 * r < options.no_resonance_factor * noise or 2.0 * r < 1e-9 * np.max(np.abs(z1)):
        raise NoResonanceError(
            f"no resonance: circle diameter {2 * r:.3g} below {options.no_resonance_factor:g}x "
            f"noise estimate {noise:.3g}", stage="circle_fit")
    try:
        f0, ql, theta0 = phase_fit(Trace(trace.freqs, z1), zc,
                                   max_iter=options.max_iter, xtol=options.xtol)
    except FitFailure as exc:
        if options.raise_on_failure:
            raise
        f0, ql, theta0 = exc.best["f0"], exc.best["q_l"], exc.best["theta0"]
    p_off = zc + r * np.exp(1j * (theta0 + math.pi))
    a, alpha = abs(p_off), float(np.angle(p_off))
    dn = 1.0 - zc / p_off
    phi = float(np.angle(dn))
    lim = math.pi / 2 - 1e-6
    phi = min(max(phi, -lim), lim)
    qc = ql * a / (2.0 * r)
    return NotchParams(f0, ql, qc, phi, a, alpha, tau)


def _stderr(ref, res, x, n_points):
    cov = res.covariance(2 * n_points)
    var = np.clip(np.diag(cov), 0.0, None)
    f0, ql, qc, phi, a, alpha, tau = ref.unpack(x)
    k = ref.f_ref / ref.span
    var_alpha = var[5] + k * k * var[6] + 2.0 * k * cov[5, 6]
    out = {
        "f0": ref.span * math.sqrt(var[0]),
        "q_l": ql * math.sqrt(var[1]),
        "q_c_mag": qc * math.sqrt(var[2]),
        "phi": math.sqrt(var[3]),
        "env_a": a * math.sqrt(var[4]),
        "env_alpha": math.sqrt(max(var_alpha, 0.0)),
        "env_tau": math.sqrt(var[6]) / (2.0 * math.pi * ref.span),
    }
    inv_qi = 1.0 / ql - math.cos(phi) / qc
    if inv_qi > 0:
        g = np.zeros(7)
        g[1] = -1.0 / ql
        g[2] = math.cos(phi) / qc
        g[3] = math.sin(phi) / qc
        out["q_i"] = math.sqrt(max(float(g @ cov @ g), 0.0)) / inv_qi ** 2
    else:
        out["q_i"] = math.inf
    return out


def fit_notch(trace: Trace, options: FitOptions | None = None) -> FitResult:
    """Extract f0, Ql, |Qc|, phi, Qi and environment terms from a notch trace.

    Raises:
        NoResonanceError: circle diameter below ``no_resonance_factor`` times
            the robust noise estimate, or degenerate circle.
        UnphysicalParametersError: fitted Qi <= 0 (unless
            ``options.check_physical`` is False, then q_i is inf).
        FitFailure: a stage hit the iteration cap.
    """
    options = options or FitOptions()
    _check_trace(trace)
    p0 = _initial_params(trace, options)
    ref = _Refiner(trace)
    x0 = ref.to_internal(p0)
    res = levenberg_marquardt(ref.residual, x0, max_iter=options.max_iter, xtol=options.xtol)
    f0, ql, qc, phi, a, alpha, tau = ref.unpack(res.x)
    alpha = float(_wrap(alpha))
    phi = float(phi)
    if abs(phi) >= math.pi / 2:
        # equivalent description with the other branch of the circle orientation
        raise UnphysicalParametersError(f"refined mismatch angle {phi!r} outside (-pi/2, pi/2)")
    params = NotchParams(f0, ql, qc, phi, a, alpha, tau)
    if not res.converged and options.raise_on_failure:
        raise FitFailure(f"refinement: {res.message}", stage="refine", best=params)
    try:
        q_i = qi_from_diameter_correction(ql, qc, phi)
    except UnphysicalParametersError:
        if options.check_physical:
            raise
        q_i = math.inf
    resid = trace.s21 - notch_s21(params, trace.freqs)
    return FitResult(
        params=params,
        q_i=q_i,
        stderr=_stderr(ref, res, res.x, len(trace)),
        rms_residual=float(np.sqrt(np.mean(np.abs(resid) ** 2))),
        n_iterations=res.n_iterations,
        converged=res.converged,
    )


def _fit_one(args):
    i, trace, options = args
    try:
        return fit_notch(trace, options)
    except CpwlabError as exc:
        stage = getattr(exc, "stage", None) or type(exc).__name__
        return FitError(i, stage, str(exc))


def batch_fit(traces, options: FitOptions | None = None, jobs=1):
    """Fit each trace independently; failures become :class:`FitError` entries.

    Output order matches input order. ``jobs > 1`` uses worker processes;
    results are identical to a sequential run.
    """
    work = [(i, t, options) for i, t in enumerate(traces)]
    if jobs <= 1 or len(work) <= 1:
        return [_fit_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_fit_one, work))


def average_fits(results, field="q_i"):
    """Mean and sample std of one record field over repeated fits.

    Failed entries (:class:`FitError`) are skipped. Returns a record with
    ``field``, ``n``, ``mean`` and ``std`` (0 for a single fit).
    """
    if field not in RECORD_FIELDS or field == "converged":
        raise ValueError(f"cannot average field {field!r}")
    vals = [r.to_record()[field] for r in results if not isinstance(r, FitError)]
    if not vals:
        raise InsufficientDataError("no successful fits to average")
    arr = np.asarray(vals, dtype=float)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"average": field, "n": int(arr.size), "mean": float(arr.mean()), "std": std}
