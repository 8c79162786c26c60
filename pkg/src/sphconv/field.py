"""Geostatistics with the convolution covariance.

Empirical variograms, weighted least-squares model fitting, ordinary kriging
that exploits compact support, and unconditional simulation by convolving a
step kernel with white noise on a quasi-uniform lattice.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg
from scipy.spatial import cKDTree

from .covariance import CovarianceModel, covariance_at, model_value, tabulate
from .kernel import SmoothKernelParams, StepKernel, discretize, normalize
from .sphere_geom import PI, UnitVec3, pairwise_distance

__all__ = [
    "FitError",
    "KrigingError",
    "SampleSet",
    "BinnedVariogram",
    "NoiseLattice",
    "FitParams",
    "FitBounds",
    "FitResult",
    "fibonacci_lattice",
    "empirical_variogram",
    "build_model",
    "fit_wls",
    "initial_guess",
    "krige",
    "simulate_unconditional",
    "gaussian_draws",
]

DENSE_LIMIT = 2000


class FitError(RuntimeError):
    pass


class KrigingError(RuntimeError):
    pass


def _xyz(locations) -> np.ndarray:
    if len(locations) and isinstance(locations[0], UnitVec3):
        arr = np.array([p.as_array() for p in locations])
    else:
        arr = np.asarray(locations, dtype=float).reshape(-1, 3)
    return arr


@dataclass(frozen=True, eq=False)
class SampleSet:
    locations: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        loc = _xyz(self.locations)
        val = np.asarray(self.values, dtype=float).ravel()
        if loc.shape[0] != val.shape[0]:
            raise ValueError("locations and values differ in length")
        if loc.shape[0] < 1:
            raise ValueError("a sample set needs at least one sample")
        if not (np.all(np.isfinite(loc)) and np.all(np.isfinite(val))):
            raise ValueError("sample locations and values must be finite")
        norms = np.linalg.norm(loc, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("sample locations must be unit vectors")
        object.__setattr__(self, "locations", loc / norms[:, None])
        object.__setattr__(self, "values", val)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class BinnedVariogram:
    edges: np.ndarray
    mean_dist: np.ndarray
    gamma: np.ndarray
    counts: np.ndarray

    @property
    def nonempty(self) -> np.ndarray:
        return self.counts > 0


def fibonacci_lattice(n: int) -> np.ndarray:
    """``n`` quasi-uniform points on the sphere (golden-angle spiral)."""
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    phi = i * (PI * (3.0 - math.sqrt(5.0)))
    s = np.sqrt(1.0 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


@dataclass(frozen=True, eq=False)
class NoiseLattice:
    """White-noise carrier: nodes with equal cell weight ``4π/N``."""

    n_nodes: int
    seed: int = 0
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_nodes < 100:
            raise ValueError("the noise lattice needs at least 100 nodes")
        object.__setattr__(self, "nodes", fibonacci_lattice(self.n_nodes))

    @property
    def cell_weight(self) -> float:
        return 4.0 * PI / self.n_nodes


def _close_pairs(xyz: np.ndarray, max_dist: float):
    """Index pairs (i < j) with spherical distance at most ``max_dist``, and their distances."""
    chord = 2.0 * math.sin(0.5 * min(max_dist, PI)) * (1.0 + 1e-12)
    pairs = cKDTree(xyz).query_pairs(chord, output_type="ndarray")
    if pairs.size == 0:
        return pairs.reshape(0, 2), np.empty(0)
    diff = xyz[pairs[:, 0]] - xyz[pairs[:, 1]]
    d = 2.0 * np.arcsin(np.clip(0.5 * np.linalg.norm(diff, axis=1), 0.0, 1.0))
    keep = d <= max_dist
    return pairs[keep], d[keep]


def empirical_variogram(s: SampleSet, n_bins: int, max_lag: float) -> BinnedVariogram:
    """Classical (Matheron) semivariogram on equal-width distance bins."""
    if len(s) < 2:
        raise ValueError("a variogram needs at least two samples")
    if not 0.0 < max_lag <= PI:
        raise ValueError("max_lag must lie in (0, π]")
    if n_bins < 1:
        raise ValueError("n_bins must be positive")
    edges = np.linspace(0.0, max_lag, n_bins + 1)
    pairs, d = _close_pairs(s.locations, max_lag)
    sq = 0.5 * (s.values[pairs[:, 0]] - s.values[pairs[:, 1]]) ** 2
    idx = np.clip(np.searchsorted(edges, d, side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=sq, minlength=n_bins)
    dsum = np.bincount(idx, weights=d, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        mean_dist = np.where(counts > 0, dsum / np.maximum(counts, 1), 0.5 * (edges[:-1] + edges[1:]))
    return BinnedVariogram(edges, mean_dist, gamma, counts)


# ------------------------------------------------------------------ fitting

@dataclass(frozen=True)
class FitParams:
    range: float
    mu: float
    nu: float
    partial_sill: float
    nugget: float


@dataclass(frozen=True)
class FitBounds:
    range: tuple = (1e-3, 2.0 * PI)
    mu: tuple = (0.1, 10.0)
    nu: tuple = (0.1, 10.0)
    # sill bounds are relative to the data variance scale
    sill_factor: tuple = (1e-6, 10.0)


@dataclass(frozen=True, eq=False)
class FitResult:
    model: CovarianceModel
    params: FitParams
    objective: float
    history: np.ndarray


def build_model(p: FitParams, n_steps: int = 64) -> CovarianceModel:
    k = normalize(discretize(SmoothKernelParams(p.mu, p.nu, p.range), n_steps))
    return CovarianceModel(p.nugget, p.partial_sill, tabulate(k))


def initial_guess(v: BinnedVariogram) -> FitParams:
    """Rough starting point: sill from the far bins, range at half-sill crossing."""
    ok = v.nonempty
    if not np.any(ok):
        raise FitError("all variogram bins are empty")
    d, g = v.mean_dist[ok], v.gamma[ok]
    sill = float(np.mean(g[-max(1, len(g) // 4):]))
    sill = sill if sill > 0 else 1.0
    nugget = max(float(g[0]) - 0.25 * (float(g[min(1, len(g) - 1)]) - float(g[0])), 0.0)
    nugget = min(nugget, 0.5 * sill)
    above = np.flatnonzero(g >= 0.5 * (sill + nugget))
    half = float(d[above[0]]) if above.size else float(d[-1])
    return FitParams(range=min(max(2.5 * half, 1e-2), 2.0 * PI), mu=1.0, nu=1.0,
                     partial_sill=max(sill - nugget, 1e-3 * sill), nugget=max(nugget, 1e-3 * sill))


def fit_wls(v: BinnedVariogram, init: FitParams | None = None, bounds: FitBounds = FitBounds(),
            n_steps: int = 64, restarts: int = 3, maxiter: int = 400) -> FitResult:
    """Fit range, shape and sills by pair-count weighted least squares.

    Minimizes ``sum_b n_b (g_b - nugget - psill (1 - C(d_b)))**2`` with
    Nelder-Mead over ``(range, log mu, log nu, log psill, log nugget)``.
    Each restart begins a fresh simplex at the best point so far.
    """
    ok = v.nonempty
    if not np.any(ok):
        raise FitError("all variogram bins are empty")
    if np.count_nonzero(ok) < 4:
        raise FitError("need at least 4 non-empty variogram bins")
    d = v.mean_dist[ok]
    g = v.gamma[ok]
    w = v.counts[ok].astype(float)
    init = init or initial_guess(v)
    if not np.any(g > 0.0):
        warnings.warn("variogram is identically zero (constant data); returning a null model")
        p = FitParams(init.range, init.mu, init.nu, 1e-12, 0.0)
        return FitResult(build_model(p, n_steps), p, 0.0, np.zeros(1))
    scale = max(float(np.max(g)), init.partial_sill + init.nugget, 1e-300)

    lo_s, hi_s = (math.log(f * scale) for f in bounds.sill_factor)
    box = [bounds.range, tuple(map(math.log, bounds.mu)), tuple(map(math.log, bounds.nu)),
           (lo_s, hi_s), (lo_s, hi_s)]
    wnorm = float(np.sum(w)) * scale ** 2
    dd = np.clip(d, 0.0, PI)

    def unpack(x):
        return FitParams(float(x[0]), math.exp(x[1]), math.exp(x[2]), math.exp(x[3]), math.exp(x[4]))

    def objective(x):
        p = unpack(x)
        k = normalize(discretize(SmoothKernelParams(p.mu, p.nu, p.range), n_steps))
        model = p.nugget + p.partial_sill * (1.0 - covariance_at(k, dd))
        val = float(np.sum(w * (g - model) ** 2)) / wnorm
        if not math.isfinite(val):
            raise FitError(f"non-finite objective at {p}")
        return val

    x0 = np.array([init.range, math.log(init.mu), math.log(init.nu),
                   math.log(max(init.partial_sill, math.exp(lo_s))),
                   math.log(max(init.nugget, math.exp(lo_s)))])
    x0 = np.clip(x0, [b[0] for b in box], [b[1] for b in box])
    best_x, best_f = x0, objective(x0)
    history = [best_f]

    def track(xk):
        nonlocal best_x, best_f
        fk = objective(xk)
        if fk < best_f:
            best_x, best_f = np.array(xk), fk
        history.append(best_f)

    for _ in range(restarts):
        res = scipy.optimize.minimize(objective, best_x, method="Nelder-Mead", bounds=box,
                                      callback=track,
                                      options=dict(maxiter=maxiter, xatol=1e-6, fatol=1e-12))
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
            history.append(best_f)

    p = unpack(best_x)
    return FitResult(build_model(p, n_steps), p, best_f, np.array(history))


# ------------------------------------------------------------------ kriging

def _assemble_dense(m: CovarianceModel, xyz: np.ndarray) -> np.ndarray:
    D = pairwise_distance(xyz)
    K = model_value(m, D)
    return K


def _assemble_sparse(m: CovarianceModel, xyz: np.ndarray):
    n = xyz.shape[0]
    pairs, d = _close_pairs(xyz, min(m.range, PI))
    vals = model_value(m, d)
    keep = vals != 0.0
    i, j, vals = pairs[keep, 0], pairs[keep, 1], vals[keep]
    diag = np.full(n, m.sill)
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    return scipy.sparse.csc_matrix((np.concatenate([vals, vals, diag]), (rows, cols)), shape=(n, n))


def krige(m: CovarianceModel, s: SampleSet, targets, method: str = "auto", chunk: int = 2048):
    """Ordinary kriging. Returns ``(prediction, variance, weights_sum)`` arrays.

    The covariance matrix keeps only pairs closer than the range. Systems with
    up to ``DENSE_LIMIT`` samples are LU-factored densely, larger ones with a
    sparse LU; ``method`` forces either path.
    """
    t = _xyz(targets) if len(targets) else np.empty((0, 3))
    n = len(s)
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "sparse"
    if method not in ("dense", "sparse"):
        raise ValueError(f"unknown method {method!r}")
    reg = m.nugget + 1e-12 * m.sill
    xyz = s.locations

    if method == "dense":
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = _assemble_dense(m, xyz)
        A[np.arange(n), np.arange(n)] += reg - m.nugget  # diagonal already holds the nugget
        A[:n, n] = A[n, :n] = 1.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            try:
                lu = scipy.linalg.lu_factor(A, check_finite=True)
            except (scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
                raise KrigingError(f"singular kriging system for {n} samples "
                                   f"(nugget={m.nugget}): {exc}") from None
        solve = lambda rhs: scipy.linalg.lu_solve(lu, rhs)  # noqa: E731
    else:
        K = _assemble_sparse(m, xyz)
        K = K + scipy.sparse.identity(n, format="csc") * (reg - m.nugget)
        ones = scipy.sparse.csc_matrix(np.ones((n, 1)))
        A = scipy.sparse.bmat([[K, ones], [ones.T, None]], format="csc")
        try:
            lu = scipy.sparse.linalg.splu(A)
        except RuntimeError as exc:
            raise KrigingError(f"singular kriging system for {n} samples "
                               f"(nugget={m.nugget}): {exc}") from None
        solve = lu.solve

    preds, vars_, wsum = [], [], []
    for i0 in range(0, t.shape[0], chunk):
        c = model_value(m, pairwise_distance(xyz, t[i0:i0 + chunk]))
        rhs = np.vstack([c, np.ones((1, c.shape[1]))])
        sol = solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise KrigingError(f"kriging solve produced non-finite weights for {n} samples")
        lam, mu_l = sol[:n], sol[n]
        preds.append(lam.T @ s.values)
        vars_.append(m.sill - np.einsum("ij,ij->j", lam, c) - mu_l)
        wsum.append(lam.sum(axis=0))
    if not preds:
        return np.empty(0), np.empty(0), np.empty(0)
    return np.concatenate(preds), np.concatenate(vars_), np.concatenate(wsum)


# ------------------------------------------------------------- simulation

def simulate_unconditional(k: StepKernel, lattice: NoiseLattice, targets,
                           n_realizations: int = 1, chunk: int = 256) -> np.ndarray:
    """Kernel-smoothed white noise: ``sqrt(4π/N) sum_i k(|t - node_i|) xi_i``.

    Returns shape ``(n_targets, n_realizations)``. Noise is drawn from
    ``lattice.seed`` in fixed-size blocks, so output is reproducible.
    """
    t = _xyz(targets) if len(targets) else np.empty((0, 3))
    W = np.zeros((t.shape[0], lattice.n_nodes))
    if t.shape[0]:
        pairs = cKDTree(lattice.nodes).query_ball_point(
            t, 2.0 * math.sin(0.5 * min(k.support, PI)) * (1.0 + 1e-12) + 1e-15)
        for row, idx in enumerate(pairs):
            idx = np.asarray(idx, dtype=int)
            if idx.size:
                dist = pairwise_distance(t[row:row + 1], lattice.nodes[idx])[0]
                W[row, idx] = k.value(dist)
    W *= math.sqrt(lattice.cell_weight)
    rng = np.random.default_rng(lattice.seed)
    out = np.empty((t.shape[0], n_realizations))
    for j0 in range(0, n_realizations, chunk):
        m = min(chunk, n_realizations - j0)
        xi = rng.standard_normal((lattice.n_nodes, m))
        out[:, j0:j0 + m] = W @ xi
    return out


def gaussian_draws(m: CovarianceModel, locations, n_draws: int = 1, seed=0) -> np.ndarray:
    """Exact Gaussian draws with model covariance (Cholesky); shape (n, n_draws)."""
    xyz = _xyz(locations)
    K = model_value(m, pairwise_distance(xyz))
    K[np.diag_indices_from(K)] += 1e-10 * m.sill
    L = np.linalg.cholesky(K)
    rng = np.random.default_rng(seed)
    return L @ rng.standard_normal((xyz.shape[0], n_draws))
