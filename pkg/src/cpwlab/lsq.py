"""Damped iterative least squares (Levenberg-Marquardt) for real residuals.

Used by the notch refinement, the phase fit and the TLS fit. The Jacobian
is taken by central differences in the caller's (scaled) coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LsqResult:
    x: np.ndarray
    cost: float
    jac: np.ndarray
    n_iterations: int
    converged: bool
    message: str

    def covariance(self, n_residuals=None):
        """Linearized covariance s^2 (J^T J)^-1 at the optimum."""
        m = self.jac.shape[0] if n_residuals is None else n_residuals
        dof = max(m - self.x.size, 1)
        s2 = 2.0 * self.cost / dof
        jtj = self.jac.T @ self.jac
        try:
            return s2 * np.linalg.inv(jtj)
        except np.linalg.LinAlgError:
            return s2 * np.linalg.pinv(jtj)


def numeric_jacobian(fun, x, r0=None, rel_step=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        h = rel_step * max(abs(x[j]), 1.0)
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        cols.append((fun(xp) - fun(xm)) / (2.0 * h))
    return np.column_stack(cols)


def levenberg_marquardt(fun, x0, max_iter=200, xtol=1e-10, ftol=1e-15,
                        lam0=1e-3, rel_step=1e-6, jac=None):
    """Minimize 0.5 * ||fun(x)||^2.

    Damping is multiplied by 2 on a rejected step and divided by 3 on an
    accepted one. Converges when the relative step drops below ``xtol``,
    when the relative cost reduction of an accepted step is below ``ftol``,
    or when no step can lower the cost any further.
    """
    jac = jac or (lambda x, r: numeric_jacobian(fun, x, r, rel_step))
    x = np.array(x0, dtype=float)
    r = fun(x)
    cost = 0.5 * float(r @ r)
    lam = lam0
    J = jac(x, r)
    it = 0
    while it < max_iter:
        it += 1
        g = J.T @ r
        A = J.T @ J
        d = np.diag(A).copy()
        d[d <= 0] = 1.0
        accepted = False
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(A + lam * np.diag(d), -g, rcond=None)[0]
            x_new = x + step
            r_new = fun(x_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= 2.0
            if lam > 1e20:
                break
        if not accepted:
            return LsqResult(x, cost, J, it, True, "no further decrease possible")
        small_step = np.linalg.norm(step) <= xtol * (np.linalg.norm(x_new) + xtol)
        small_drop = (cost - cost_new) <= ftol * cost
        x, r, cost = x_new, r_new, cost_new
        lam = max(lam / 3.0, 1e-15)
        J = jac(x, r)
        if cost == 0.0 or small_step or small_drop:
            return LsqResult(x, cost, J, it, True, "converged")
    return LsqResult(x, cost, J, it, False, f"iteration cap {max_iter} reached")
