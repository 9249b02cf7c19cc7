"""Concrete data spaces: torus, sphere, Hermite line.

Each system bundles an orthonormal eigenbasis (eigenvalues ``lambda_k``,
eigenfunctions ``phi_k``), a metric, a reference measure, and discretization
helpers (a high-accuracy reference grid, i.i.d. sampling, analytic moments).
Bands are indexed by a cutoff ``n``: the band holds every basis function with
``lambda_k < n``.

Conventions:

* torus ``T^q`` (q = 1, 2): points in ``[0, 2*pi)^q``, metric
  ``max_i |dx_i mod 2pi|``, probability measure, real trigonometric basis
  ``1, sqrt(2)cos(kx), sqrt(2)sin(kx)`` with ``lambda = |k|_inf``;
* sphere ``S^2``: unit vectors in R^3, geodesic metric, *area* measure
  (total mass 4*pi), real spherical harmonics orthonormal under the area
  measure with ``lambda = degree l`` (so ``phi_0 = (4pi)^{-1/2}``, a positive
  constant; this matches the addition-formula normalization
  ``sum_k Y_{l,k}(x)^2 = (2l+1)/(4pi)``);
* Hermite line: points in R, absolute-value metric, Lebesgue measure,
  orthonormal Hermite functions with ``lambda_k = sqrt(k)``; sampling and
  quadrature are confined to windows ``[-c*n, c*n]``.
"""

import numpy as np
from scipy.special import roots_hermite, roots_legendre

__all__ = [
    "GridMeasure",
    "SystemSpec",
    "Torus",
    "Sphere2",
    "HermiteLine",
    "from_config",
]


def as_points(x, dim):
    """Coerce input to an (N, dim) float array; 1-d input is allowed for dim=1."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1) if dim == 1 else a.reshape(1, -1)
    if a.ndim != 2 or a.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    if not np.isfinite(a).all():
        raise ValueError("non-finite point coordinates")
    return a


class GridMeasure:
    """Discrete stand-in for the reference measure: nodes plus positive weights.

    Built so that inner products of two band-``n_max`` basis functions are
    integrated exactly (up to rounding); used for Fourier coefficients, norms,
    and normalizers.
    """

    def __init__(self, points, weights, n_max, system_kind):
        self.points = np.asarray(points, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.n_max = n_max
        self.system_kind = system_kind
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("points/weights length mismatch")

    def __len__(self):
        return self.points.shape[0]

    def integrate(self, values):
        """Integrate grid samples (last axis may be vector-valued)."""
        values = np.asarray(values, dtype=float)
        return np.tensordot(self.weights, values, axes=(0, 0))

    def to_csv(self, path):
        """Write nodes and weights as CSV (coordinate columns, then weight)."""
        d = self.points.shape[1]
        header = ",".join([f"x{i}" for i in range(d)] + ["weight"])
        data = np.column_stack([self.points, self.weights])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


class SystemSpec:
    """Base class for a concrete data space."""

    kind = "abstract"
    q = None              # exponent in the ball-measure condition
    dim = None            # ambient coordinate dimension of point arrays
    product_constant = None   # A*: products of band-n functions live in band A*n
    bernstein_rate = 1.0      # c in B_n = c*n

    def __init__(self):
        self._grid_cache = {}

    # -- basis ---------------------------------------------------------------

    def eigenvalues(self, n):
        """lambda_k for the band lambda_k < n, aligned with eval_basis columns."""
        raise NotImplementedError

    def num_basis(self, n):
        return self.eigenvalues(n).size

    def eval_basis(self, pts, n):
        """Matrix phi_k(x): one row per point, one column per basis index."""
        raise NotImplementedError

    def christoffel(self, pts, n):
        """sum_{lambda_k < n} phi_k(x)^2 at each point."""
        B = self.eval_basis(pts, n)
        return np.einsum("ij,ij->i", B, B)

    def moments(self, n):
        """Analytic moments m_j = integral of phi_j against the reference measure."""
        raise NotImplementedError

    # -- geometry ------------------------------------------------------------

    def pairwise_distance(self, X, Y):
        raise NotImplementedError

    def distance(self, x, y):
        """Metric between two single points."""
        X = as_points(x, self.dim)
        Y = as_points(y, self.dim)
        return float(self.pairwise_distance(X, Y)[0, 0])

    def bernstein(self, n):
        """Bernstein-Lipschitz factor B_n = c*n."""
        return self.bernstein_rate * float(n)

    # -- measure / discretization --------------------------------------------

    def reference_grid(self, n_max):
        if n_max not in self._grid_cache:
            self._grid_cache[n_max] = self._build_grid(n_max)
        return self._grid_cache[n_max]

    def _build_grid(self, n_max):
        raise NotImplementedError

    def sample_reference(self, m, seed, band=None):
        """m i.i.d. draws from the (window-restricted, normalized) reference measure."""
        raise NotImplementedError


# ---------------------------------------------------------------------------
# torus
# ---------------------------------------------------------------------------


def _torus_kmax(n):
    """Largest integer frequency with |k| < n."""
    if n <= 0:
        raise ValueError("band must be positive")
    return int(np.ceil(n - 1e-12)) - 1


def _trig_table(x, kmax):
    """Columns [1, sqrt2*cos(x), sqrt2*sin(x), ..., sqrt2*cos(kmax x), sqrt2*sin(kmax x)]."""
    cols = [np.ones_like(x)]
    if kmax >= 1:
        c, s = np.cos(x), np.sin(x)
        ck, sk = c.copy(), s.copy()
        cols += [np.sqrt(2.0) * ck, np.sqrt(2.0) * sk]
        for _ in range(2, kmax + 1):
            ck, sk = ck * c - sk * s, sk * c + ck * s
            cols += [np.sqrt(2.0) * ck, np.sqrt(2.0) * sk]
    return np.stack(cols, axis=1)


class Torus(SystemSpec):
    """T^q with the max-of-wrapped-coordinates metric, q in {1, 2}."""

    product_constant = 2.0

    def __init__(self, q=1):
        super().__init__()
        if q not in (1, 2):
            raise ValueError("torus supported for q in {1, 2}")
        self.q = q
        self.dim = q
        self.kind = f"torus:{q}"
        if q == 2:
            self._pair_cache = {}

    def _freqs(self, kmax):
        # 1-d column index -> frequency: col 0 is constant, cols 2k-1, 2k have freq k
        m = np.zeros(2 * kmax + 1, dtype=int)
        for k in range(1, kmax + 1):
            m[2 * k - 1] = k
            m[2 * k] = k
        return m

    def _pairs(self, kmax):
        # q=2 column layout: all pairs of 1-d columns, sorted by max frequency
        key = kmax
        if key not in self._pair_cache:
            f = self._freqs(kmax)
            M = f.size
            i1, i2 = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
            i1, i2 = i1.ravel(), i2.ravel()
            lam = np.maximum(f[i1], f[i2])
            order = np.lexsort((i2, i1, lam))
            self._pair_cache[key] = (i1[order], i2[order], lam[order].astype(float))
        return self._pair_cache[key]

    def eigenvalues(self, n):
        kmax = _torus_kmax(n)
        if self.q == 1:
            f = self._freqs(kmax)
            return f.astype(float)
        return self._pairs(kmax)[2].copy()

    def eval_basis(self, pts, n):
        P = as_points(pts, self.dim)
        kmax = _torus_kmax(n)
        if self.q == 1:
            return _trig_table(P[:, 0], kmax)
        i1, i2, _ = self._pairs(kmax)
        B1 = _trig_table(P[:, 0], kmax)
        B2 = _trig_table(P[:, 1], kmax)
        return B1[:, i1] * B2[:, i2]

    def moments(self, n):
        m = np.zeros(self.num_basis(n))
        m[0] = 1.0
        return m

    def pairwise_distance(self, X, Y):
        X = as_points(X, self.dim)
        Y = as_points(Y, self.dim)
        d = np.abs(X[:, None, :] - Y[None, :, :]) % (2 * np.pi)
        d = np.minimum(d, 2 * np.pi - d)
        return d.max(axis=2)

    def _build_grid(self, n_max):
        # 4*n_max points per axis: exact for products of two band-n_max functions
        m = 4 * int(np.ceil(n_max))
        axis = np.arange(m) * (2 * np.pi / m)
        if self.q == 1:
            pts = axis.reshape(-1, 1)
            w = np.full(m, 1.0 / m)
        else:
            A, B = np.meshgrid(axis, axis, indexing="ij")
            pts = np.stack([A.ravel(), B.ravel()], axis=1)
            w = np.full(m * m, 1.0 / (m * m))
        return GridMeasure(pts, w, n_max, self.kind)

    def sample_reference(self, m, seed, band=None):
        rng = np.random.default_rng(seed)
        return rng.uniform(0.0, 2 * np.pi, size=(m, self.q))


# ---------------------------------------------------------------------------
# sphere
# ---------------------------------------------------------------------------


class Sphere2(SystemSpec):
    """Unit sphere in R^3 with geodesic metric and area measure (mass 4*pi).

    Basis: real spherical harmonics orthonormal under the area measure,
    column order l = 0, 1, ..., within degree l: m = 0, then (cos, sin)
    pairs for m = 1..l.
    """

    q = 2
    dim = 3
    kind = "sphere2"
    product_constant = 2.0

    def _lmax(self, n):
        if n <= 0:
            raise ValueError("band must be positive")
        return int(np.ceil(n - 1e-12)) - 1

    def eigenvalues(self, n):
        lmax = self._lmax(n)
        lam = []
        for l in range(lmax + 1):
            lam += [float(l)] * (2 * l + 1)
        return np.array(lam)

    def eval_basis(self, pts, n):
        P = as_points(pts, self.dim)
        lmax = self._lmax(n)
        L = lmax + 1
        t = np.clip(P[:, 2], -1.0, 1.0)
        phi = np.arctan2(P[:, 1], P[:, 0])
        s = np.sqrt(np.maximum(0.0, 1.0 - t * t))
        N = P.shape[0]
        out = np.empty((N, L * L))
        # fully normalized associated Legendre values (include the 1/sqrt(4pi))
        legendre = {}
        Pmm = np.full(N, np.sqrt(1.0 / (4 * np.pi)))
        for m in range(L):
            if m > 0:
                Pmm = Pmm * s * np.sqrt((2 * m + 1.0) / (2 * m))
            prev, cur = None, Pmm
            for l in range(m, L):
                if l == m:
                    val = Pmm
                elif l == m + 1:
                    val = np.sqrt(2 * m + 3.0) * t * Pmm
                else:
                    a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                    b = np.sqrt(
                        ((2.0 * l + 1.0) * ((l - 1.0) ** 2 - m * m))
                        / ((2.0 * l - 3.0) * (l * l - m * m))
                    )
                    val = a * t * cur - b * prev
                prev, cur = cur, val
                legendre[(l, m)] = val
        idx = 0
        for l in range(L):
            out[:, idx] = legendre[(l, 0)]
            idx += 1
            for m in range(1, l + 1):
                base = np.sqrt(2.0) * legendre[(l, m)]
                out[:, idx] = base * np.cos(m * phi)
                out[:, idx + 1] = base * np.sin(m * phi)
                idx += 2
        return out

    def moments(self, n):
        m = np.zeros(self.num_basis(n))
        m[0] = np.sqrt(4 * np.pi)  # integral of (4pi)^{-1/2} over the sphere
        return m

    def pairwise_distance(self, X, Y):
        X = as_points(X, 3)
        Y = as_points(Y, 3)
        return np.arccos(np.clip(X @ Y.T, -1.0, 1.0))

    def _build_grid(self, n_max):
        # Gauss-Legendre in cos(theta) x uniform azimuth, (2 n_max)^2 nodes
        m = 2 * int(np.ceil(n_max))
        tg, wg = roots_legendre(m)
        ph = 2 * np.pi * np.arange(m) / m
        T, PH = np.meshgrid(tg, ph, indexing="ij")
        S = np.sqrt(np.maximum(0.0, 1.0 - T**2))
        pts = np.stack([S * np.cos(PH), S * np.sin(PH), T], axis=-1).reshape(-1, 3)
        w = np.repeat(wg * (2 * np.pi / m), m)
        return GridMeasure(pts, w, n_max, self.kind)

    def sample_reference(self, m, seed, band=None):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=(m, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Hermite line
# ---------------------------------------------------------------------------


def _hermite_values(x, K):
    """Orthonormal Hermite functions phi_0..phi_{K-1} at points x.

    Three-term recurrence with per-point exponent tracking so that the
    Gaussian envelope exp(-x^2/2) can be carried for |x| far beyond the
    float underflow threshold (needed at large Gauss-Hermite nodes).
    """
    x = np.asarray(x, dtype=float).ravel()
    N = x.size
    out = np.zeros((N, K))
    E = -0.5 * x * x  # running log-scale
    u_prev = np.full(N, np.pi ** -0.25)
    out[:, 0] = u_prev * np.exp(E)
    if K == 1:
        return out
    u = np.sqrt(2.0) * x * u_prev
    out[:, 1] = u * np.exp(E)
    BIG = 1e120
    LOG_BIG = np.log(BIG)
    for k in range(2, K):
        u_prev, u = u, np.sqrt(2.0 / k) * x * u - np.sqrt((k - 1.0) / k) * u_prev
        over = np.abs(u) > BIG
        if over.any():
            u[over] /= BIG
            u_prev[over] /= BIG
            E[over] += LOG_BIG
        out[:, k] = u * np.exp(E)
    return out


class HermiteLine(SystemSpec):
    """R with Hermite functions, lambda_k = sqrt(k), Lebesgue measure.

    ``scale`` gives the dilated system phi_k^(a)(x) = sqrt(a) phi_k(a x)
    (used to build product quadrature rules from plain rules of the
    sqrt(2)-rescaled system). ``window_c`` is the constant in the working
    windows K_n = [-c n, c n] (for scale a, [-c n / a, c n / a]).
    """

    q = 1
    dim = 1
    product_constant = np.sqrt(2.0)

    def __init__(self, scale=1.0, window_c=2.0):
        super().__init__()
        self.scale = float(scale)
        self.window_c = float(window_c)
        self.kind = "hermite" if scale == 1.0 else f"hermite@{scale:g}"

    def rescaled(self, factor=np.sqrt(2.0)):
        return HermiteLine(scale=self.scale * factor, window_c=self.window_c)

    def _count(self, n):
        if n <= 0:
            raise ValueError("band must be positive")
        K = int(np.floor(n * n * (1.0 - 1e-12))) + 1  # indices k with sqrt(k) < n
        return K

    def eigenvalues(self, n):
        K = self._count(n)
        return np.sqrt(np.arange(K, dtype=float))

    def eval_basis(self, pts, n):
        P = as_points(pts, 1)
        K = self._count(n)
        vals = _hermite_values(self.scale * P[:, 0], K)
        return np.sqrt(self.scale) * vals

    def moments(self, n):
        # integral of phi_k over R: sqrt(2pi) * (-1)^(k/2) * phi_k(0) for even k
        K = self._count(n)
        phi0 = _hermite_values(np.zeros(1), K)[0]
        k = np.arange(K)
        m = np.where(k % 2 == 0, np.sqrt(2 * np.pi) * (-1.0) ** (k // 2) * phi0, 0.0)
        # scaled system: integral of sqrt(a) phi_k(a x) dx = m_k / sqrt(a)
        return m / np.sqrt(self.scale)

    def pairwise_distance(self, X, Y):
        X = as_points(X, 1)
        Y = as_points(Y, 1)
        return np.abs(X[:, 0][:, None] - Y[:, 0][None, :])

    def window(self, n):
        """Half-width of the working window K_n."""
        return self.window_c * float(n) / self.scale

    def _build_grid(self, n_max):
        # Gauss-Hermite rule with Lebesgue weights w_i e^{x_i^2} = 1/(m phi_{m-1}(x_i)^2);
        # exact for (polynomial) * exp(-x^2), hence for products of two band functions
        m = 4 * int(np.ceil(n_max)) ** 2
        x, _ = roots_hermite(m)
        phi_last = _hermite_values(x, m)[:, m - 1]
        w = 1.0 / (m * phi_last**2)
        pts = (x / self.scale).reshape(-1, 1)
        return GridMeasure(pts, w / self.scale, n_max, self.kind)

    def sample_reference(self, m, seed, band=None):
        if band is None:
            raise ValueError("Hermite sampling needs a band to fix the window K_n")
        rng = np.random.default_rng(seed)
        half = self.window(band)
        return rng.uniform(-half, half, size=(m, 1))


def from_config(name):
    """Build a system from a config string: torus:1, torus:2, sphere2, hermite."""
    tag = name.strip().lower()
    if tag in ("torus", "torus:1"):
        return Torus(1)
    if tag == "torus:2":
        return Torus(2)
    if tag == "sphere2":
        return Sphere2()
    if tag == "hermite":
        return HermiteLine()
    raise ValueError(f"unknown system {name!r}")
