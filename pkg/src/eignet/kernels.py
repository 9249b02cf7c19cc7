"""Localized kernels Phi_n and the summability operators sigma_n, tau_j.

Phi_n(H; x, y) = sum_{lambda_k < n * sup supp H} H(lambda_k / n) phi_k(x) phi_k(y).

With H = h (low-pass) sigma_n reproduces every band-(n/2) function; the
dyadic differences tau_j = sigma_{2^j} - sigma_{2^(j-1)} equal the band-pass
kernel sums with H = g and their sup norms encode local smoothness.

Fast evaluation paths: the torus (q=1) kernel is a cosine series in the
wrapped difference, the sphere kernel is a Legendre series in the dot
product (addition formula); everything else goes through the basis matrix.
"""

import numpy as np

from .filters import DEFAULT_FILTER
from .systems import Sphere2, Torus, as_points, _torus_kmax

__all__ = ["LocalizedKernel", "sigma", "tau", "filtered_coefficients"]


class GridResolutionError(ValueError):
    pass


class LocalizedKernel:
    """Handle for Phi_n on a system, with mode 'low' (h) or 'band' (g)."""

    def __init__(self, system, n, mode="low", filt=DEFAULT_FILTER):
        if n <= 0:
            raise ValueError("scale n must be positive")
        if mode not in ("low", "band"):
            raise ValueError("mode must be 'low' or 'band'")
        self.system = system
        self.n = float(n)
        self.mode = mode
        self.filt = filt

    def _H(self, t):
        return self.filt.low(t) if self.mode == "low" else self.filt.band(t)

    def coefficients(self):
        """H(lambda_k / n) over the band lambda_k < n, aligned with eval_basis."""
        lam = self.system.eigenvalues(self.n)
        return np.atleast_1d(self._H(lam / self.n))

    def eval(self, X, Y):
        """Kernel matrix Phi_n(x_i, y_j)."""
        sys = self.system
        if isinstance(sys, Torus) and sys.q == 1:
            X = as_points(X, 1)
            Y = as_points(Y, 1)
            kmax = _torus_kmax(self.n)
            coef = self._H(np.arange(kmax + 1, dtype=float) / self.n)
            diff = X[:, 0][:, None] - Y[:, 0][None, :]
            out = np.full(diff.shape, coef[0])
            if kmax >= 1:
                c1 = np.cos(diff)
                ck_prev = np.ones_like(diff)
                ck = c1
                out = out + 2.0 * coef[1] * ck
                for k in range(2, kmax + 1):
                    ck_prev, ck = ck, 2.0 * c1 * ck - ck_prev
                    if coef[k] != 0.0:
                        out = out + 2.0 * coef[k] * ck
            return out
        if isinstance(sys, Sphere2):
            X = as_points(X, 3)
            Y = as_points(Y, 3)
            lmax = sys._lmax(self.n)
            t = np.clip(X @ Y.T, -1.0, 1.0)
            coef = self._H(np.arange(lmax + 1, dtype=float) / self.n)
            coef = coef * (2.0 * np.arange(lmax + 1) + 1.0) / (4 * np.pi)
            out = np.full(t.shape, coef[0])
            if lmax >= 1:
                p_prev = np.ones_like(t)
                p = t
                out = out + coef[1] * p
                for l in range(1, lmax):
                    p_prev, p = p, ((2 * l + 1) * t * p - l * p_prev) / (l + 1)
                    if coef[l + 1] != 0.0:
                        out = out + coef[l + 1] * p
            return out
        BX = sys.eval_basis(X, self.n)
        BY = sys.eval_basis(Y, self.n)
        return (BX * self.coefficients()) @ BY.T


def _check_grid(grid, n):
    if grid.n_max < n:
        raise GridResolutionError(
            f"grid under-resolved: grid exact to band {grid.n_max}, operator needs {n}"
        )


def filtered_coefficients(system, grid, f_values, n, mode="low", filt=DEFAULT_FILTER):
    """H(lambda_k/n) * fhat(k) with fhat computed on the reference grid."""
    _check_grid(grid, n)
    f_values = np.asarray(f_values, dtype=float)
    B = system.eval_basis(grid.points, n)
    fhat = B.T @ (grid.weights * f_values)
    H = filt.low if mode == "low" else filt.band
    lam = system.eigenvalues(n)
    return np.atleast_1d(H(lam / float(n))) * fhat


def sigma(system, grid, f_values, n, X, filt=DEFAULT_FILTER, mode="low"):
    """sigma_n(f) at points X from grid samples of f."""
    coef = filtered_coefficients(system, grid, f_values, n, mode=mode, filt=filt)
    return system.eval_basis(X, n) @ coef


def tau(system, grid, f_values, j, X, filt=DEFAULT_FILTER):
    """tau_j(f) at points X: sigma_1(f) for j = 0, else the dyadic difference."""
    if j == 0:
        return sigma(system, grid, f_values, 1, X, filt=filt)
    hi = sigma(system, grid, f_values, 2.0**j, X, filt=filt)
    lo = sigma(system, grid, f_values, 2.0 ** (j - 1), X, filt=filt)
    return hi - lo
