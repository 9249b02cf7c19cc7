"""Admissible quadrature from scattered nodes, plus structured exact rules.

Pipeline for scattered nodes (random or given):

1. ``greedy_net`` — maximal eps-separated subset, mesh norm / separation report;
2. ``voronoi_weights`` — nonnegative proxy weights W_k = reference mass of the
   nearest-node cell;
3. ``solve_exact_weights`` — signed weights w_k matching all band moments,
   found by minimizing the weighted sup norm max |w_k| / W_k (linear program);
   accepted when the optimum is <= 2 and the moment residual is below
   tolerance, with a weighted least-norm solve as fallback.

``structured_rule`` wraps the per-system reference discretizations
(equispaced / Gauss-Legendre x uniform / Gauss-Hermite), which are product
exact by construction; ``product_rule`` relabels a rule exact at an inflated
order as an admissible product quadrature after randomized verification.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .systems import HermiteLine, Sphere2, Torus, as_points, from_config

__all__ = [
    "QuadratureError",
    "NetReport",
    "QuadratureRule",
    "greedy_net",
    "thin",
    "mesh_norm",
    "separation",
    "covering_grid",
    "voronoi_weights",
    "voronoi_grid",
    "solve_exact_weights",
    "scattered_rule",
    "structured_rule",
    "product_rule",
    "covering_budget",
    "covering_probability_check",
]


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# nets and geometry
# ---------------------------------------------------------------------------


def covering_grid(sys, band=None, resolution=4096):
    """Fine point set covering the working compact set, for mesh-norm estimates."""
    if isinstance(sys, Torus):
        if sys.q == 1:
            return (np.arange(resolution) * (2 * np.pi / resolution)).reshape(-1, 1)
        m = int(np.sqrt(resolution))
        ax = np.arange(m) * (2 * np.pi / m)
        A, B = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([A.ravel(), B.ravel()], axis=1)
    if isinstance(sys, Sphere2):
        m = max(48, int(np.sqrt(resolution / 2)))
        return sys.reference_grid(m).points
    if isinstance(sys, HermiteLine):
        if band is None:
            raise ValueError("Hermite covering grid needs a band for the window")
        half = sys.window(band)
        return np.linspace(-half, half, resolution).reshape(-1, 1)
    raise TypeError(f"unsupported system {sys!r}")


def mesh_norm(sys, compact_points, nodes, chunk=4096):
    """delta(K, C): largest distance from the compact set to the node set."""
    nodes = as_points(nodes, sys.dim)
    K = as_points(compact_points, sys.dim)
    worst = 0.0
    for i0 in range(0, K.shape[0], chunk):
        d = sys.pairwise_distance(K[i0 : i0 + chunk], nodes).min(axis=1)
        worst = max(worst, float(d.max()))
    return worst


def separation(sys, nodes):
    """eta(C): minimal pairwise distance; +inf for a single node."""
    nodes = as_points(nodes, sys.dim)
    M = nodes.shape[0]
    if M < 2:
        return np.inf
    d = sys.pairwise_distance(nodes, nodes)
    d[np.diag_indices(M)] = np.inf
    return float(d.min())


@dataclass
class NetReport:
    """A node set with its fill distance and separation on a compact set."""

    nodes: np.ndarray
    mesh_norm: float
    separation: float
    compact_set: str

    @property
    def size(self):
        return self.nodes.shape[0]


def greedy_net(sys, points, eps, band=None, grid=None):
    """Maximal eps-distinguishable subset of ``points``, kept in input order.

    A point is kept iff its distance to every previously kept point is
    >= eps. The report's mesh norm is measured against ``grid`` (default:
    a fine covering grid of the working compact set).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    P = as_points(points, sys.dim)
    if P.shape[0] == 0:
        raise ValueError("empty input point set")
    kept_idx = [0]
    mind = sys.pairwise_distance(P, P[:1])[:, 0]
    while True:
        cand = np.nonzero(mind >= eps)[0]
        if cand.size == 0:
            break
        i = int(cand[0])
        kept_idx.append(i)
        mind = np.minimum(mind, sys.pairwise_distance(P, P[i : i + 1])[:, 0])
    nodes = P[kept_idx]
    if grid is None:
        grid = covering_grid(sys, band=band)
    desc = sys.kind if not isinstance(sys, HermiteLine) else f"window(band={band})"
    return NetReport(
        nodes=nodes,
        mesh_norm=mesh_norm(sys, grid, nodes),
        separation=separation(sys, nodes),
        compact_set=desc,
    )


def thin(sys, points, eps, band=None, grid=None):
    """Maximal eps-distinguishable subset (alias of greedy_net on a point set)."""
    return greedy_net(sys, points, eps, band=band, grid=grid)


# ---------------------------------------------------------------------------
# proxy weights
# ---------------------------------------------------------------------------


def voronoi_grid(sys, n_nodes, band=None, per_cell=30):
    """Reference grid fine enough to resolve nearest-node cells (points, weights)."""
    target = per_cell * int(n_nodes)
    if isinstance(sys, Torus):
        if sys.q == 1:
            m = max(target, 512)
            pts = (np.arange(m) * (2 * np.pi / m)).reshape(-1, 1)
            return pts, np.full(m, 1.0 / m)
        m = max(int(np.sqrt(target)) + 1, 64)
        ax = np.arange(m) * (2 * np.pi / m)
        A, B = np.meshgrid(ax, ax, indexing="ij")
        pts = np.stack([A.ravel(), B.ravel()], axis=1)
        return pts, np.full(m * m, 1.0 / (m * m))
    if isinstance(sys, Sphere2):
        m = max(int(np.sqrt(target / 2)) + 1, 32)
        g = sys.reference_grid(m)
        return g.points, g.weights
    if isinstance(sys, HermiteLine):
        if band is None:
            raise ValueError("Hermite Voronoi grid needs a band for the window")
        half = sys.window(band)
        m = max(target, 512)
        pts = np.linspace(-half, half, m, endpoint=False) + half / m
        return pts.reshape(-1, 1), np.full(m, 2.0 * half / m)
    raise TypeError(f"unsupported system {sys!r}")


def voronoi_weights(sys, nodes, grid_points, grid_weights, chunk=4096):
    """Proxy weights W_k: reference mass of each node's nearest-point cell.

    Ties go to the lowest node index. Empty cells get W_k = 0 with a warning
    (the LP bound |w_k| <= 2 W_k then forces w_k = 0, i.e. the node is merged
    away).
    """
    nodes = as_points(nodes, sys.dim)
    G = as_points(grid_points, sys.dim)
    gw = np.asarray(grid_weights, dtype=float)
    W = np.zeros(nodes.shape[0])
    for i0 in range(0, G.shape[0], chunk):
        d = sys.pairwise_distance(G[i0 : i0 + chunk], nodes)
        a = np.argmin(d, axis=1)
        np.add.at(W, a, gw[i0 : i0 + chunk])
    if (W == 0).any():
        warnings.warn(
            f"{int((W == 0).sum())} empty Voronoi cell(s); merged into neighbours",
            RuntimeWarning,
        )
    return W


# ---------------------------------------------------------------------------
# exact signed weights
# ---------------------------------------------------------------------------


def _polish(A, W, w, m):
    """Weighted least-norm correction so the moment system holds to rounding."""
    r = m - A.T @ w
    WA = W[:, None] * A
    corr = WA @ np.linalg.solve(A.T @ WA, r)
    return w + corr


def solve_exact_weights(sys, nodes, proxy, n, tol=1e-8):
    """Signed weights w with sum_k w_k P(z_k) = integral of P for all P in band n.

    Minimizes max_k |w_k| / W_k subject to the moment equations (linear
    program), then polishes the residual by a weighted least-norm correction.
    Accepts when max |w_k| / W_k <= 2 and the residual is <= tol; falls back
    to the plain weighted least-norm solution if the LP fails.

    Returns (w, residual). Raises QuadratureError when the nodes cannot
    support the requested order.
    """
    nodes = as_points(nodes, sys.dim)
    W = np.asarray(proxy, dtype=float)
    M = nodes.shape[0]
    A = sys.eval_basis(nodes, n)
    m = sys.moments(n)
    K = A.shape[1]
    if M < K:
        raise QuadratureError(
            f"nodes insufficient for order n={n}: {M} nodes for {K} moments"
        )

    def certify(w):
        w = w.copy()
        w[W == 0] = 0.0
        try:
            w = _polish(A, W, w, m)
        except np.linalg.LinAlgError:
            raise QuadratureError(f"nodes insufficient for order n={n}: singular moments")
        resid = float(np.max(np.abs(A.T @ w - m)))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(W > 0, np.abs(w) / np.where(W > 0, W, 1.0), 0.0)
        return w, resid, float(ratio.max())

    # LP: minimize t subject to -t W_k <= w_k <= t W_k, A^T w = m
    c = np.zeros(M + 1)
    c[-1] = 1.0
    eye = sp.eye(M, format="csc")
    col = sp.csc_matrix(-W[:, None])
    A_ub = sp.vstack([sp.hstack([eye, col]), sp.hstack([-eye, col])], format="csc")
    b_ub = np.zeros(2 * M)
    A_eq = sp.hstack([sp.csc_matrix(A.T), sp.csc_matrix((K, 1))], format="csc")
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=m,
        bounds=[(None, None)] * M + [(0, None)],
        method="highs",
    )
    if res.status == 0:
        w, resid, ratio = certify(res.x[:M])
        if ratio <= 2.0 and resid <= tol:
            return w, resid
    # fallback: min sum w_k^2 / W_k subject to the moment equations
    try:
        WA = W[:, None] * A
        alpha = np.linalg.solve(A.T @ WA, m)
    except np.linalg.LinAlgError:
        raise QuadratureError(f"nodes insufficient for order n={n}: singular moments")
    w, resid, ratio = certify(WA @ alpha)
    if ratio <= 2.0 and resid <= tol:
        return w, resid
    raise QuadratureError(
        f"nodes insufficient for order n={n}: ratio {ratio:.3g} (limit 2), "
        f"residual {resid:.3g} (tol {tol:g})"
    )


# ---------------------------------------------------------------------------
# rules
# ---------------------------------------------------------------------------


@dataclass
class QuadratureRule:
    """Nodes, nonnegative proxy weights, and exact signed weights for one band."""

    system_kind: str
    order: float
    points: np.ndarray
    proxy: np.ndarray
    weights: np.ndarray
    residual: float
    product_order: float = None
    mesh_norm: float = np.nan
    separation: float = np.nan
    structured: bool = False
    seed: int = None
    meta: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.points.shape[0]

    def integrate(self, values):
        values = np.asarray(values, dtype=float)
        return np.tensordot(self.weights, values, axes=(0, 0))

    def moment_residual(self, sys, order=None):
        order = self.order if order is None else order
        A = sys.eval_basis(self.points, order)
        return float(np.max(np.abs(A.T @ self.weights - sys.moments(order))))

    def to_csv(self, path):
        d = self.points.shape[1]
        header = ",".join([f"x{i}" for i in range(d)] + ["proxy_weight", "weight"])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in np.column_stack([self.points, self.proxy, self.weights]):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    def sidecar(self):
        return {
            "system": self.system_kind,
            "order": self.order,
            "product_order": self.product_order,
            "residual": self.residual,
            "mesh_norm": None if np.isnan(self.mesh_norm) else self.mesh_norm,
            "separation": None if np.isnan(self.separation) else self.separation,
            "structured": self.structured,
            "seed": self.seed,
            "size": int(self.size),
            **self.meta,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def from_csv(csv_path, json_path):
        with open(json_path) as fh:
            meta = json.load(fh)
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        pts, proxy, w = data[:, :-2], data[:, -2], data[:, -1]
        return QuadratureRule(
            system_kind=meta["system"],
            order=meta["order"],
            points=pts,
            proxy=proxy,
            weights=w,
            residual=meta["residual"],
            product_order=meta.get("product_order"),
            mesh_norm=meta.get("mesh_norm") or np.nan,
            separation=meta.get("separation") or np.nan,
            structured=meta.get("structured", False),
            seed=meta.get("seed"),
        )


def scattered_rule(sys, nodes, order, tol=1e-8, band=None, seed=None, per_cell=30):
    """Full pipeline: Voronoi proxy weights + exact signed weights for a node set."""
    nodes = as_points(nodes, sys.dim)
    gp, gw = voronoi_grid(sys, nodes.shape[0], band=band if band is not None else 2 * order)
    W = voronoi_weights(sys, nodes, gp, gw)
    w, resid = solve_exact_weights(sys, nodes, W, order, tol=tol)
    cover = covering_grid(sys, band=band if band is not None else 2 * order)
    return QuadratureRule(
        system_kind=sys.kind,
        order=float(order),
        points=nodes,
        proxy=W,
        weights=w,
        residual=resid,
        mesh_norm=mesh_norm(sys, cover, nodes),
        separation=separation(sys, nodes),
        seed=seed,
        meta={"method": "voronoi+minmax_lp", "tol": tol},
    )


def structured_rule(sys, order, verify=True):
    """Product-exact rule from the system's reference discretization.

    Equispaced (torus), Gauss-Legendre x uniform azimuth (sphere), or
    Gauss-Hermite with Lebesgue weights (Hermite line). Exactness for
    products of two band-``order`` functions holds by construction; the
    moment residual is measured when ``verify`` is set.
    """
    g = sys.reference_grid(order)
    resid = np.nan
    if verify:
        A = sys.eval_basis(g.points, order)
        resid = float(np.max(np.abs(A.T @ g.weights - sys.moments(order))))
    return QuadratureRule(
        system_kind=sys.kind,
        order=float(order),
        points=g.points,
        proxy=g.weights.copy(),
        weights=g.weights.copy(),
        residual=resid,
        product_order=float(order),
        structured=True,
        meta={"method": "structured"},
    )


def product_rule(sys, rule, n, tol=1e-10, trials=50, seed=0):
    """Certify ``rule`` as an admissible product quadrature of order ``n``.

    Draws random pairs P1, P2 in the band-``n`` space of ``sys`` (unit
    coefficient vectors) and checks sum_k w_k P1(z_k) P2(z_k) against the
    exact value <c1, c2> from orthonormality. On success returns a copy
    tagged with ``product_order = n``.
    """
    B = sys.eval_basis(rule.points, n)
    rng = np.random.default_rng(seed)
    K = B.shape[1]
    worst = 0.0
    for _ in range(trials):
        c1 = rng.standard_normal(K)
        c2 = rng.standard_normal(K)
        c1 /= np.linalg.norm(c1)
        c2 /= np.linalg.norm(c2)
        quad = float(np.sum(rule.weights * (B @ c1) * (B @ c2)))
        worst = max(worst, abs(quad - float(c1 @ c2)))
    if worst > tol:
        raise QuadratureError(
            f"product exactness failed at order {n}: residual {worst:.3g} > {tol:g}"
        )
    return QuadratureRule(
        system_kind=sys.kind,
        order=rule.order,
        points=rule.points,
        proxy=rule.proxy,
        weights=rule.weights,
        residual=rule.residual,
        product_order=float(n),
        mesh_norm=rule.mesh_norm,
        separation=rule.separation,
        structured=rule.structured,
        seed=rule.seed,
        meta={**rule.meta, "product_residual": worst},
    )


# ---------------------------------------------------------------------------
# covering probability
# ---------------------------------------------------------------------------


def covering_budget(sys, eps, delta, band=None):
    """Sample count from the covering bound (unit desk-scale constants).

    M = ceil( nu_eps^{-1} * log( mu*(B(K, eps)) / (delta * eps^q) ) ), where
    nu_eps is the smallest sampling mass of a ball of radius eps/2.
    """
    if isinstance(sys, Torus):
        nu = (min(eps, 2 * np.pi) / (2 * np.pi)) ** sys.q
        vol = 1.0
    elif isinstance(sys, Sphere2):
        nu = (1.0 - np.cos(min(eps / 2, np.pi))) / 2.0
        vol = 4 * np.pi
    elif isinstance(sys, HermiteLine):
        if band is None:
            raise ValueError("Hermite covering budget needs a band")
        half = sys.window(2 * band)
        nu = (eps / 2) / (2 * half)
        vol = 2 * half + 2 * eps
    else:
        raise TypeError(f"unsupported system {sys!r}")
    return int(np.ceil(np.log(vol / (delta * eps**sys.q)) / nu))


def covering_probability_check(sys, n, M, trials, seed, eps=None, grid=None):
    """Empirical probability that M reference draws are an eps-cover.

    eps defaults to min(1/n, 1/B_{2n}). Returns the fraction of trials with
    mesh norm <= eps.
    """
    if eps is None:
        eps = min(1.0 / n, 1.0 / sys.bernstein(2 * n))
    if grid is None:
        grid = covering_grid(sys, band=2 * n)
    hits = 0
    for t in range(trials):
        pts = sys.sample_reference(M, seed=seed * 100003 + t, band=2 * n)
        if mesh_norm(sys, grid, pts) <= eps:
            hits += 1
    return hits / trials
