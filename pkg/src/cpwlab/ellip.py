"""Complete elliptic integrals by arithmetic-geometric mean.

Every conformal-mapping formula in :mod:`cpwlab.cpw` goes through
:func:`k_ratio`, which switches to logarithmic asymptotics at extreme
moduli where K(k') would otherwise be evaluated from a rounded k'.
"""
import math

from . import kernels
from .errors import DivergenceError, DomainError

#: Moduli closer than this to 1 are treated as K = infinity.
DIVERGENCE_EPS = 1e-15
#: Threshold for the asymptotic branch of :func:`k_ratio`.
ASYMPTOTIC_EPS = 1e-7


def complement(k):
    """Complementary modulus sqrt(1 - k^2), accurate near k = 1."""
    return math.sqrt((1.0 - k) * (1.0 + k))


def _check_modulus(k):
    if not (0.0 <= k <= 1.0) or math.isnan(k):
        raise DomainError(f"elliptic modulus must lie in [0, 1], got {k!r}")


def elliptic_k(k):
    """Complete elliptic integral of the first kind K(k).

    Args:
        k: modulus, 0 <= k < 1.

    Raises:
        DomainError: k outside [0, 1].
        DivergenceError: k within 1e-15 of 1.
    """
    _check_modulus(k)
    if 1.0 - k < DIVERGENCE_EPS:
        raise DivergenceError(f"K(k) diverges at k = {k!r}")
    return kernels.ellipke_agm(k, complement(k))[0]


def elliptic_e(k):
    """Complete elliptic integral of the second kind E(k), 0 <= k <= 1."""
    _check_modulus(k)
    if k == 1.0:
        return 1.0
    kp = complement(k)
    if kp == 0.0:
        return 1.0
    return kernels.ellipke_agm(k, kp)[1]


def _ratio_small(k):
    # K(k)/K(k') for k -> 0; error O(k^4 log k)
    q = k * k / 4.0
    lg = math.log(4.0) - math.log(k)
    return (math.pi / 2.0) * (1.0 + q) / (lg + q * (lg - 1.0))


def k_ratio(k):
    """Return K(k)/K(k') for 0 < k < 1.

    Raises:
        DivergenceError: k is 0 or 1, where the ratio is 0 or infinite.
    """
    _check_modulus(k)
    if k == 0.0 or k == 1.0:
        raise DivergenceError(f"K(k)/K(k') is degenerate at k = {k!r}")
    kp = complement(k)
    if k < ASYMPTOTIC_EPS:
        return _ratio_small(k)
    if 1.0 - k < ASYMPTOTIC_EPS:
        if kp == 0.0:
            raise DivergenceError(f"K(k)/K(k') overflows at k = {k!r}")
        return 1.0 / _ratio_small(kp)
    big_k = kernels.ellipke_agm(k, kp)[0]
    big_kp = kernels.ellipke_agm(kp, k)[0]
    return big_k / big_kp
