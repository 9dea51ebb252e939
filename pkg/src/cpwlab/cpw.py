"""CPW line and quarter-wave resonator design from geometry.

Conformal-mapping model on a semi-infinite substrate. A trench of depth d
in the gaps is modelled as removal of a uniform surface layer: the
filling factor of a layer of thickness d is subtracted from the half-space
value, so eps_eff falls from (eps_r + 1)/2 at d = 0 towards 1 as d grows.
Kinetic inductance and conductor thickness are neglected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.constants import c as C0

from .ellip import k_ratio
from .errors import DomainError, NoSolutionError

DEFAULT_EPS_R = 11.45
_Z0_PREFACTOR = 30.0 * math.pi

W_MIN = 0.1e-6
W_MAX = 1e-3


@dataclass(frozen=True)
class CpwGeometry:
    """Cross-section of a CPW line. All lengths in meters."""

    w: float
    gap: float
    trench_depth: float = 0.0
    eps_r: float = DEFAULT_EPS_R

    def __post_init__(self):
        if not (self.w > 0 and self.gap > 0):
            raise DomainError(f"w and gap must be positive, got w={self.w!r}, gap={self.gap!r}")
        if not self.trench_depth >= 0:
            raise DomainError(f"trench_depth must be >= 0, got {self.trench_depth!r}")
        if not self.eps_r >= 1:
            raise DomainError(f"eps_r must be >= 1, got {self.eps_r!r}")

    @property
    def k0(self):
        return self.w / (self.w + 2.0 * self.gap)


@dataclass(frozen=True)
class LineParams:
    z0: float
    eps_eff: float
    v_ph: float
    c_per_len: float
    l_per_len: float


@dataclass(frozen=True)
class ResonatorDesign:
    """Quarter-wave resonator: a shorted CPW stub of the given length."""

    geometry: CpwGeometry
    length: float
    mode: str = field(default="quarter-wave")

    @property
    def f0(self):
        return resonator_frequency(self.length, self.geometry)


def _layer_ratio(w, gap, d):
    # k_d = sinh(pi w / 4d) / sinh(pi (w + 2 gap) / 4d), written to avoid overflow
    if math.pi * gap / (2.0 * d) > 745.0:
        return 0.0
    a = math.pi * w / (4.0 * d)
    b = math.pi * (w + 2.0 * gap) / (4.0 * d)
    kd = math.exp(a - b) * (-math.expm1(-2.0 * a)) / (-math.expm1(-2.0 * b))
    if kd == 0.0:
        return 0.0
    return k_ratio(kd)


def filling_factor(geom: CpwGeometry, depth=None):
    """Partial-capacitance filling factor of a surface layer of thickness ``depth``.

    Zero for an empty layer, 1/2 for an infinitely thick one.
    """
    d = geom.trench_depth if depth is None else depth
    if d == 0:
        return 0.0
    return 0.5 * _layer_ratio(geom.w, geom.gap, d) / k_ratio(geom.k0)


def eps_eff_trenched(geom: CpwGeometry):
    """Effective permittivity with the top ``trench_depth`` of substrate removed."""
    return 1.0 + (geom.eps_r - 1.0) * (0.5 - filling_factor(geom))


def line_params(geom: CpwGeometry) -> LineParams:
    eps_eff = eps_eff_trenched(geom)
    z0 = _Z0_PREFACTOR / (math.sqrt(eps_eff) * k_ratio(geom.k0))
    v_ph = C0 / math.sqrt(eps_eff)
    return LineParams(
        z0=z0,
        eps_eff=eps_eff,
        v_ph=v_ph,
        c_per_len=1.0 / (z0 * v_ph),
        l_per_len=z0 / v_ph,
    )


def _eps_of(geom_or_eps):
    if isinstance(geom_or_eps, CpwGeometry):
        return eps_eff_trenched(geom_or_eps)
    return float(geom_or_eps)


def resonator_frequency(length, geom_or_eps):
    """Fundamental of a quarter-wave resonator, f0 = c / (4 L sqrt(eps_eff)).

    ``geom_or_eps`` is a :class:`CpwGeometry` or an effective permittivity.
    """
    if not length > 0:
        raise DomainError(f"length must be positive, got {length!r}")
    return C0 / (4.0 * length * math.sqrt(_eps_of(geom_or_eps)))


def length_for_frequency(f0, geom_or_eps):
    if not f0 > 0:
        raise DomainError(f"f0 must be positive, got {f0!r}")
    return C0 / (4.0 * f0 * math.sqrt(_eps_of(geom_or_eps)))


def width_for_impedance(target_z0, gap, eps_r=DEFAULT_EPS_R, trench_depth=0.0,
                        tol=1e-6, w_min=W_MIN, w_max=W_MAX):
    """Center-trace width giving ``target_z0`` for a fixed gap.

    Bisection on w; z0 falls monotonically as w grows.

    Raises:
        NoSolutionError: target outside [z0(w_max), z0(w_min)]; the
            reachable interval is attached as ``bracket``.
    """

    def z0_of(w):
        return line_params(CpwGeometry(w, gap, trench_depth, eps_r)).z0

    lo, hi = w_min, w_max
    z_lo, z_hi = z0_of(lo), z0_of(hi)
    if not (z_hi <= target_z0 <= z_lo):
        raise NoSolutionError(
            f"target {target_z0!r} ohm outside achievable range "
            f"[{z_hi:.6g}, {z_lo:.6g}] ohm for w in [{lo:g}, {hi:g}] m",
            bracket=(z_hi, z_lo),
        )
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        z = z0_of(mid)
        if abs(z - target_z0) < tol and hi - lo < 1e-12:
            break
        if z > target_z0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    return mid


def qc_capacitive(c_kappa, f0, z_res=50.0, z_feed=50.0):
    """Coupling Q of a quarter-wave stub hung on a feedline through ``c_kappa``."""
    w0 = 2.0 * math.pi * f0
    return math.pi / (2.0 * w0 * w0 * c_kappa * c_kappa * z_res * z_feed)


def coupling_for_qc(target_qc, f0, z_res=50.0, z_feed=50.0):
    if not target_qc > 0:
        raise DomainError(f"target_qc must be positive, got {target_qc!r}")
    w0 = 2.0 * math.pi * f0
    return math.sqrt(math.pi / (2.0 * w0 * w0 * target_qc * z_res * z_feed))
