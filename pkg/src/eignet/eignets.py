"""Smooth masks, eignet kernels G, dual kernels, and prefabricated networks.

A smooth mask b (positive, non-increasing, with b(B* t)/b(t) fast decreasing)
defines a kernel through the expansion W(y) G(x, y) = sum_k b(lambda_k)
phi_k(x) phi_k(y). The dual kernel D_n carries coefficients h(lambda_k/n) /
b(lambda_k); discretizing integral of G(x,z) W(z) D_n(z,y) with an admissible
product quadrature of order B*n gives the prefabricated network G_n, which
agrees with the localized kernel Phi_n up to a fast-decreasing error.

Numerical note: the dual coefficients grow like 1/b(n) (about e^{n^2/2} for
the Gaussian mask), so the literal node sum is exponentially ill-conditioned:
float64 summation loses everything beyond n ~ 8, and a moment residual eps in
the rule is amplified by the same factor. ``PrefabNetwork`` therefore
evaluates through the algebraically identical split

    G_n = Phi_n  +  (band moment-error term)  +  (mask tail term)

with coefficient ratios b_l / b_k formed in log space. For structured rules
the band term vanishes identically (product exactness by construction); for
scattered rules it is the rule's certified residual, honestly amplified. The
literal node sum stays available as ``method="direct"``.
"""

import json
import math

import numpy as np

from .filters import DEFAULT_FILTER
from .kernels import LocalizedKernel
from .systems import HermiteLine, Sphere2, Torus, as_points

__all__ = [
    "Mask",
    "gaussian_mask",
    "exp_decay_mask",
    "heat_mask",
    "mehler_mask",
    "decay_certificate",
    "EignetKernel",
    "DualKernel",
    "PrefabNetwork",
]

_LOG_TINY = -745.0  # below this, double precision has no normal numbers


class Mask:
    """Positive non-increasing coefficient function with log-scale access."""

    def __init__(self, name, b, log_b, B_star=2.0, params=None):
        self.name = name
        self._b = b
        self._log_b = log_b
        self.B_star = float(B_star)
        self.params = dict(params or {})

    def __call__(self, t):
        return self._b(np.asarray(t, dtype=float))

    def log(self, t):
        return self._log_b(np.asarray(t, dtype=float))

    def __repr__(self):
        ps = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"Mask({self.name}{'[' + ps + ']' if ps else ''}, B*={self.B_star:g})"


def gaussian_mask(q=1):
    """b(t) = (2 pi)^(q/2) exp(-t^2 / 2), the periodized-Gaussian coefficient law."""
    c = 0.5 * q * np.log(2 * np.pi)
    return Mask(
        "gaussian",
        lambda t: np.exp(c - 0.5 * t * t),
        lambda t: c - 0.5 * t * t,
        B_star=2.0,
        params={"q": q},
    )


def exp_decay_mask(alpha=1.0, q=1):
    """b(t) = C exp(-alpha t): the (periodized) Hardy multiquadric coefficient law."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    c = 0.5 * (q + 1) * np.log(np.pi) - math.lgamma(0.5 * (q + 1)) - np.log(alpha)
    return Mask(
        "exp_decay",
        lambda t: np.exp(c - alpha * t),
        lambda t: c - alpha * t,
        B_star=2.0,
        params={"alpha": alpha, "q": q},
    )


def heat_mask(time=0.5):
    """b(t) = exp(-t^2 * time), the heat-kernel coefficient law."""
    if time <= 0:
        raise ValueError("time must be positive")
    return Mask(
        "heat",
        lambda t: np.exp(-time * t * t),
        lambda t: -time * t * t,
        B_star=2.0,
        params={"time": time},
    )


def mehler_mask(q=1):
    """b(t) = (2 pi / 3)^(q/2) 3^(-t^2/2): the Gaussian-network pair on the Hermite line.

    With lambda_k = sqrt(|k|_1) this gives coefficients 3^(-|k|_1/2), i.e. the
    expansion of exp(-|x - (sqrt(3)/2) y|^2) exp(-|y|^2/4).
    """
    c = 0.5 * q * np.log(2 * np.pi / 3.0)
    ln3 = np.log(3.0)
    return Mask(
        "mehler",
        lambda t: np.exp(c - 0.5 * ln3 * t * t),
        lambda t: c - 0.5 * ln3 * t * t,
        B_star=2.0,
        params={"q": q},
    )


MASK_BUILDERS = {
    "gaussian": gaussian_mask,
    "exp_decay": exp_decay_mask,
    "heat": heat_mask,
    "mehler": mehler_mask,
}


def decay_certificate(mask, ts=(4.0, 8.0, 16.0, 32.0), orders=(1, 2, 4)):
    """Check b(B* t) / b(t) <= t^(-R) at the given t for each decay order R."""
    ts = np.asarray(ts, dtype=float)
    ratio_log = mask.log(mask.B_star * ts) - mask.log(ts)
    ok = True
    for R in orders:
        ok = ok and bool(np.all(ratio_log <= -R * np.log(ts)))
    return ok


class EignetKernel:
    """Kernel G with expansion W(y) G(x, y) = sum_k b(lambda_k) phi_k(x) phi_k(y)."""

    def __init__(self, system, mask, weight=None):
        self.system = system
        self.mask = mask
        if weight is None and isinstance(system, HermiteLine) and mask.name == "mehler":
            a = system.scale
            weight = lambda y: np.exp(-0.25 * (a * np.asarray(y, dtype=float)) ** 2)
        self.weight = weight  # None means W == 1

    def weight_values(self, pts):
        P = as_points(pts, self.system.dim)
        if self.weight is None:
            return np.ones(P.shape[0])
        return np.asarray(self.weight(P[:, 0] if self.system.dim == 1 else P))

    def truncation_band(self, tol=1e-12):
        """Smallest power of two L with L^q b(L) <= tol."""
        L = 1.0
        for _ in range(60):
            if L**self.system.q * float(self.mask(L)) <= tol:
                return L
            L *= 2.0
        raise ValueError("mask decays too slowly for the requested tolerance")

    def _band_or_raise(self, band, tol):
        if band is None:
            return self.truncation_band(tol)
        err = band**self.system.q * float(self.mask(band))
        if err > tol:
            need = self.truncation_band(tol)
            raise ValueError(
                f"truncation band {band:g} too small for tolerance {tol:g}: "
                f"residual bound {err:.3g}; requires band >= {need:g}"
            )
        return band

    def weighted_eval(self, X, Y, band=None, tol=1e-12):
        """W(y) G(x, y): the plain truncated expansion."""
        band = self._band_or_raise(band, tol)
        sys = self.system
        if isinstance(sys, Torus) and sys.q == 1:
            X = as_points(X, 1)
            Y = as_points(Y, 1)
            kmax = int(np.ceil(band - 1e-12)) - 1
            coef = self.mask(np.arange(kmax + 1, dtype=float))
            diff = X[:, 0][:, None] - Y[:, 0][None, :]
            out = np.full(diff.shape, coef[0])
            if kmax >= 1:
                c1 = np.cos(diff)
                ck_prev, ck = np.ones_like(diff), c1
                out = out + 2.0 * coef[1] * ck
                for k in range(2, kmax + 1):
                    ck_prev, ck = ck, 2.0 * c1 * ck - ck_prev
                    out = out + 2.0 * coef[k] * ck
            return out
        if isinstance(sys, Sphere2):
            X = as_points(X, 3)
            Y = as_points(Y, 3)
            lmax = int(np.ceil(band - 1e-12)) - 1
            t = np.clip(X @ Y.T, -1.0, 1.0)
            ls = np.arange(lmax + 1, dtype=float)
            coef = self.mask(ls) * (2 * ls + 1) / (4 * np.pi)
            out = np.full(t.shape, coef[0])
            if lmax >= 1:
                p_prev, p = np.ones_like(t), t
                out = out + coef[1] * p
                for l in range(1, lmax):
                    p_prev, p = p, ((2 * l + 1) * t * p - l * p_prev) / (l + 1)
                    out = out + coef[l + 1] * p
            return out
        BX = sys.eval_basis(X, band)
        BY = sys.eval_basis(Y, band)
        return (BX * self.mask(sys.eigenvalues(band))) @ BY.T

    def eval(self, X, Y, band=None, tol=1e-12):
        """G(x, y) from the truncated expansion (divides the weight back out)."""
        vals = self.weighted_eval(X, Y, band=band, tol=tol)
        if self.weight is None:
            return vals
        return vals / self.weight_values(Y)[None, :]


class DualKernel:
    """D_n(z, y) = sum_{lambda_k < n} h(lambda_k / n) b(lambda_k)^{-1} phi_k(z) phi_k(y)."""

    def __init__(self, kernel, n, filt=DEFAULT_FILTER):
        self.kernel = kernel
        self.n = float(n)
        self.filt = filt
        sys = kernel.system
        lam = sys.eigenvalues(self.n)
        h = np.atleast_1d(filt.low(lam / self.n))
        log_b = kernel.mask.log(lam)
        live = h > 0
        if np.any(live & (log_b < np.log(1e-300))):
            raise ValueError("mask too small at band edge; reduce n or rescale the mask")
        with np.errstate(divide="ignore"):
            log_h = np.where(live, np.log(np.where(live, h, 1.0)), -np.inf)
        if np.any(log_h[live] - log_b[live] > _LOG_TINY * -1):
            raise ValueError("mask too small at band edge; reduce n or rescale the mask")
        self.coefficients = np.where(live, np.exp(log_h - log_b), 0.0)
        self._lam = lam

    def eval(self, Z, Y):
        sys = self.kernel.system
        BZ = sys.eval_basis(Z, self.n)
        BY = sys.eval_basis(Y, self.n)
        return (BZ * self.coefficients) @ BY.T


class PrefabNetwork:
    """Quadrature discretization of integral G(x,z) W(z) D_n(z,y) dnu(z).

    ``rule`` must be an admissible product quadrature of order >= B* n.
    """

    def __init__(self, kernel, rule, n, filt=DEFAULT_FILTER):
        self.kernel = kernel
        self.rule = rule
        self.n = float(n)
        self.filt = filt
        need = kernel.mask.B_star * self.n
        if rule.product_order is None or rule.product_order < need - 1e-9:
            raise ValueError(
                f"rule order below B*n: need product order >= {need:g}, "
                f"got {rule.product_order}"
            )
        self.dual = DualKernel(kernel, n, filt=filt)
        self._phi = LocalizedKernel(kernel.system, n, mode="low", filt=filt)
        self._prepare_spectral()

    # -- spectral pieces ------------------------------------------------------

    def _tail_eigenvalues(self):
        """Eigenvalues in [B*n, Lcap] whose correction coefficients are representable."""
        sys = self.kernel.system
        mask = self.kernel.mask
        lo = mask.B_star * self.n
        live = self.dual.coefficients > 0
        if not live.any():
            return np.empty(0)
        log_gain = np.max(np.log(self.dual.coefficients[live]))  # log max h/b
        hi = lo
        step = max(self.n, 1.0)
        # extend while b(hi) can still make a representable contribution,
        # capped so the tail basis stays a tractable size
        while (
            mask.log(np.asarray(hi + step)) + log_gain > _LOG_TINY
            and sys.num_basis(hi + step) <= 100000
        ):
            hi += step
        if hi == lo and mask.log(np.asarray(lo)) + log_gain <= _LOG_TINY:
            return np.empty(0)
        lam_all = sys.eigenvalues(hi + 1e-9)
        return lam_all[(lam_all >= lo - 1e-12)]

    def _prepare_spectral(self):
        sys = self.kernel.system
        mask = self.kernel.mask
        rule = self.rule
        lam_band = self.dual._lam
        h_coef = np.atleast_1d(self.filt.low(lam_band / self.n))
        log_b_band = mask.log(lam_band)

        tail = self._tail_eigenvalues()
        if tail.size:
            self._tail_top = float(tail.max()) + 1e-9
            B_all = sys.eval_basis(rule.points, self._tail_top)
            lam_all = sys.eigenvalues(self._tail_top)
            tail_sel = lam_all >= mask.B_star * self.n - 1e-12
            B_tail = B_all[:, tail_sel]
            lam_tail = lam_all[tail_sel]
            B_band = B_all[:, : lam_band.size]
            # S_tail[l, k] = sum_j w_j phi_l(z_j) phi_k(z_j)
            S_tail = B_tail.T @ (rule.weights[:, None] * B_band)
            with np.errstate(divide="ignore"):
                log_h = np.where(h_coef > 0, np.log(np.where(h_coef > 0, h_coef, 1.0)), -np.inf)
            logC = mask.log(lam_tail)[:, None] + (log_h - log_b_band)[None, :]
            C = np.exp(np.minimum(logC, 700.0))
            self._tail_matrix = C * S_tail
            self._lam_tail_count = lam_tail.size
        else:
            self._tail_top = None
            self._tail_matrix = None
        if not rule.structured:
            B_band = sys.eval_basis(rule.points, self.n)
            S_band = B_band.T @ (rule.weights[:, None] * B_band)
            with np.errstate(divide="ignore"):
                log_h = np.where(h_coef > 0, np.log(np.where(h_coef > 0, h_coef, 1.0)), -np.inf)
            logC = log_b_band[:, None] + (log_h - log_b_band)[None, :]
            C = np.exp(np.minimum(logC, 700.0))
            self._band_matrix = C * (S_band - np.eye(lam_band.size))
        else:
            self._band_matrix = None  # vanishes by construction for structured rules

    def _tail_basis(self, X):
        sys = self.kernel.system
        B_all = sys.eval_basis(X, self._tail_top)
        lam_all = sys.eigenvalues(self._tail_top)
        return B_all[:, lam_all >= self.kernel.mask.B_star * self.n - 1e-12]

    # -- evaluation -----------------------------------------------------------

    def eval(self, X, Y, method="auto"):
        """Network values G_n(x_i, y_j)."""
        if method not in ("auto", "spectral", "direct"):
            raise ValueError("method must be auto, spectral, or direct")
        if method == "direct":
            return self._eval_direct(X, Y)
        out = self._phi.eval(X, Y)
        BY = self.kernel.system.eval_basis(Y, self.n)
        if self._band_matrix is not None:
            BX = self.kernel.system.eval_basis(X, self.n)
            out = out + BX @ self._band_matrix.T @ BY.T
        if self._tail_matrix is not None:
            out = out + self._tail_basis(X) @ self._tail_matrix @ BY.T
        return out

    def _eval_direct(self, X, Y):
        Z = self.rule.points
        WG = self.kernel.weighted_eval(X, Z, band=max(self._tail_top or 0.0, self.n))
        D = self.dual.eval(Z, Y)
        return (WG * self.rule.weights) @ D

    def estimate(self, samples, values, X, chunk=200000):
        """(1 / |Y|) sum_i F_i G_n(x, y_i): the sample-driven network estimator."""
        sys = self.kernel.system
        Ys = as_points(samples, sys.dim)
        F = np.asarray(values, dtype=float)
        if Ys.shape[0] == 0:
            raise ValueError("empty sample set")
        if F.shape[0] != Ys.shape[0]:
            raise ValueError("samples/values length mismatch")
        K = self.dual._lam.size
        u = np.zeros(K)
        for i0 in range(0, Ys.shape[0], chunk):
            B = sys.eval_basis(Ys[i0 : i0 + chunk], self.n)
            u += B.T @ F[i0 : i0 + chunk]
        u /= Ys.shape[0]
        h_coef = np.atleast_1d(self.filt.low(self.dual._lam / self.n))
        out = sys.eval_basis(X, self.n) @ (h_coef * u)
        if self._band_matrix is not None:
            BX = sys.eval_basis(X, self.n)
            out = out + BX @ (self._band_matrix.T @ u)
        if self._tail_matrix is not None:
            out = out + self._tail_basis(X) @ (self._tail_matrix @ u)
        return out

    # -- serialization ---------------------------------------------------------

    def coefficients_for(self, y_probes):
        """Per-node combination coefficients c_j(y) with G_n(., y) = sum_j c_j(y) G(., z_j)."""
        Z = self.rule.points
        D = self.dual.eval(Z, y_probes)
        return (self.rule.weights * self.kernel.weight_values(Z))[:, None] * D

    def to_csv(self, y_probes, csv_path, json_path=None):
        Y = as_points(y_probes, self.kernel.system.dim)
        C = self.coefficients_for(Y)
        d = self.rule.points.shape[1]
        header = ",".join(
            [f"x{i}" for i in range(d)] + [f"coef_y{j}" for j in range(Y.shape[0])]
        )
        with open(csv_path, "w") as fh:
            fh.write(header + "\n")
            for row in np.column_stack([self.rule.points, C]):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        if json_path:
            meta = {
                "mask": self.kernel.mask.name,
                "mask_params": self.kernel.mask.params,
                "B_star": self.kernel.mask.B_star,
                "n": self.n,
                "rule_residual": self.rule.residual,
                "rule_size": int(self.rule.size),
                "system": self.kernel.system.kind,
            }
            with open(json_path, "w") as fh:
                json.dump(meta, fh, indent=2, sort_keys=True)
                fh.write("\n")
