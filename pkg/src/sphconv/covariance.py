"""Covariance of a step-kernel convolution: closed form, tabulation, I/O.

For a kernel written as nested caps ``k = sum_j b_j [dist < r_j]`` the
convolution of two copies whose centres are ``d`` apart is

    C(d) = sum_j b_j^2 I(r_j, r_j, d) + 2 sum_{j2 < j1} b_j1 b_j2 I(r_j1, r_j2, d)

with ``I`` the cap intersection area. The function is smooth between the
lags where some pair of caps changes branch (tangency), and has
``(d - d*)**1.5`` behaviour at those lags. Tabulation therefore splits at
those lags and refines cubic pieces geometrically towards them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .kernel import StepKernel
from .sphere_geom import HALF_PI, PI, _intersection_hc, pairwise_distance

__all__ = [
    "TabulationError",
    "TabulatedCovariance",
    "CovarianceModel",
    "PsdReport",
    "covariance_at",
    "covariance_many",
    "branch_lags",
    "tabulate",
    "evaluate",
    "check_psd",
    "model_value",
    "write_table",
    "read_table",
]

OVERSHOOT_TOL = 1e-9


class TabulationError(RuntimeError):
    """A tabulated curve left its admissible band by more than rounding noise."""


@njit(cache=True)
def _convolution_sums(radii, b, ds):
    m, n = b.shape
    sr = np.sin(0.5 * radii)
    cr = np.cos(0.5 * radii)
    # prefix[k, j] = sum_{l <= j} b[k, l] * cap_area(r_l): nested caps
    # contribute the smaller cap's area, so a whole run of them is one lookup
    prefix = np.empty((m, n))
    for k in range(m):
        acc = 0.0
        for j in range(n):
            acc += b[k, j] * 4.0 * math.pi * sr[j] * sr[j]
            prefix[k, j] = acc
    out = np.zeros((m, ds.shape[0]))
    for q in range(ds.shape[0]):
        d = ds[q]
        sd = math.sin(0.5 * d)
        cd = math.cos(0.5 * d)
        for i in range(n):
            ri = radii[i]
            a = _intersection_hc(ri, sr[i], cr[i], ri, sr[i], cr[i], d, sd, cd)
            if a != 0.0:
                for k in range(m):
                    out[k, q] += b[k, i] * b[k, i] * a
            for j in range(i - 1, -1, -1):
                rj = radii[j]
                if ri <= HALF_PI:
                    # radii are sorted, so once cap j is disjoint from (or
                    # nested in) cap i, every smaller cap is as well
                    if ri + rj <= d:
                        break
                    if rj <= ri - d:
                        for k in range(m):
                            out[k, q] += 2.0 * b[k, i] * prefix[k, j]
                        break
                a = _intersection_hc(ri, sr[i], cr[i], rj, sr[j], cr[j], d, sd, cd)
                if a != 0.0:
                    for k in range(m):
                        out[k, q] += 2.0 * b[k, i] * b[k, j] * a
    return out


def _check_lags(d):
    d = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(d)) or np.any(d < 0.0) or np.any(d > PI + 1e-12):
        raise ValueError("lag distances must lie in [0, π]")
    return np.clip(d, 0.0, PI)


def covariance_many(kernels, d) -> np.ndarray:
    """Closed-form covariance of several kernels sharing one radius grid.

    Returns an array of shape ``(len(kernels), len(d))``. The pairwise cap
    areas are computed once and reused for every kernel.
    """
    kernels = list(kernels)
    radii = kernels[0].radii
    for k in kernels[1:]:
        if k.radii.shape != radii.shape or np.any(k.radii != radii):
            raise ValueError("kernels must share the same radii")
    d = np.atleast_1d(_check_lags(d))
    b = np.stack([k.diffs for k in kernels])
    return _convolution_sums(np.ascontiguousarray(radii), np.ascontiguousarray(b), np.ascontiguousarray(d))


def covariance_at(k: StepKernel, d, require_normalized: bool = True):
    """Covariance between two points ``d`` radians apart, for kernel ``k``.

    With ``require_normalized=False`` the raw convolution integral is returned
    for any kernel.
    """
    if require_normalized and not k.is_normalized():
        raise ValueError("covariance_at needs a normalized kernel (unit squared integral)")
    scalar = np.ndim(d) == 0
    out = covariance_many([k], d)[0]
    return float(out[0]) if scalar else out


def branch_lags(k: StepKernel) -> np.ndarray:
    """Sorted lags in [0, π] where some pair of caps changes branch."""
    r = k.radii[k.diffs != 0.0]
    s = (r[:, None] + r[None, :]).ravel()
    s = np.where(s > PI, 2.0 * PI - s, s)
    t = np.abs(r[:, None] - r[None, :]).ravel()
    lags = np.concatenate([[0.0, PI], s, t])
    lags = np.unique(np.clip(lags, 0.0, PI))
    keep = np.concatenate([[True], np.diff(lags) > 1e-13])
    lags = lags[keep]
    lags[-1] = PI
    return lags


@dataclass(frozen=True, eq=False)
class TabulatedCovariance:
    """Piecewise-cubic covariance curve on [0, π].

    ``coeffs[i]`` holds ``c0..c3`` of ``sum c_p (d - knots[i])**p`` on
    ``[knots[i], knots[i+1]]``.
    """

    range: float
    mu: float
    nu: float
    n_steps: int
    breakpoints: np.ndarray
    knots: np.ndarray
    coeffs: np.ndarray
    support: float
    lower: float = 0.0
    kernel: StepKernel | None = field(default=None, repr=False)

    @property
    def n_pieces(self) -> int:
        return self.coeffs.shape[0]

    def __call__(self, d):
        return evaluate(self, d)


_CHEB4 = 0.5 * (1.0 - np.cos(np.pi * np.arange(4) / 3.0))  # 0, .25, .75, 1
_PROBE = np.array([0.08, 0.5, 0.92])


def _cubic_from_samples(u, v, f):
    # f sampled at u + (v - u) * _CHEB4; returns monomial coeffs in (d - u)
    h = v - u
    x = h * _CHEB4
    V = np.vander(x, 4, increasing=True)
    c = np.linalg.solve(V, f)
    c[0] = f[0]
    return c


def _horner(c, t):
    return c[..., 0] + t * (c[..., 1] + t * (c[..., 2] + t * c[..., 3]))


def tabulate(k: StepKernel, nodes_per_interval: int = 4, tol: float = 1e-10,
             min_width: float = 1e-12, max_pieces: int = 200_000) -> TabulatedCovariance:
    """Tabulate ``covariance_at`` as cubic pieces.

    Each smooth interval between branch lags starts with
    ``nodes_per_interval`` Chebyshev-Lobatto knots; each piece interpolates
    four Chebyshev-Lobatto samples and is bisected while its error at probe
    points exceeds ``tol``.
    """
    if nodes_per_interval < 4:
        raise ValueError("nodes_per_interval must be at least 4")
    if not k.is_normalized():
        raise ValueError("tabulate needs a normalized kernel")
    radius = k.support
    support = 2.0 * radius if 2.0 * radius <= PI else math.inf
    bps = branch_lags(k)
    end = min(support, PI)
    bps = bps[bps <= end]
    if bps[-1] < end:
        bps = np.append(bps, end)

    m = int(nodes_per_interval)
    cheb = 0.5 * (1.0 - np.cos(np.pi * np.arange(m) / (m - 1)))
    pending = []
    for p, q in zip(bps[:-1], bps[1:]):
        pts = p + (q - p) * cheb
        pts[0], pts[-1] = p, q
        pending.extend(zip(pts[:-1], pts[1:]))

    b = k.diffs[None, :]
    radii = np.ascontiguousarray(k.radii)

    def f(ds):
        return _convolution_sums(radii, b, np.ascontiguousarray(np.clip(ds, 0.0, PI)))[0]

    done = []
    while pending:
        if len(done) + len(pending) > max_pieces:
            raise TabulationError("tabulation did not converge within max_pieces")
        lo = np.array([p[0] for p in pending])
        hi = np.array([p[1] for p in pending])
        h = hi - lo
        nodes = lo[:, None] + h[:, None] * _CHEB4[None, :]
        nodes[:, 0], nodes[:, -1] = lo, hi
        probes = lo[:, None] + h[:, None] * _PROBE[None, :]
        vals = f(np.concatenate([nodes.ravel(), probes.ravel()]))
        fn = vals[:nodes.size].reshape(nodes.shape)
        fp = vals[nodes.size:].reshape(probes.shape)
        nxt = []
        for i in range(len(pending)):
            c = _cubic_from_samples(lo[i], hi[i], fn[i])
            err = np.max(np.abs(_horner(c, probes[i] - lo[i]) - fp[i]))
            if err > tol and h[i] > min_width:
                mid = 0.5 * (lo[i] + hi[i])
                nxt.extend([(lo[i], mid), (mid, hi[i])])
            else:
                done.append((lo[i], c))
        pending = nxt

    done.sort(key=lambda t: t[0])
    knots = np.array([t[0] for t in done] + [end])
    coeffs = np.array([t[1] for t in done])
    lower = 0.0 if np.all(k.levels >= 0.0) else -1.0
    params = k.params
    return TabulatedCovariance(
        range=float(2.0 * radius),
        mu=float(params.mu) if params else math.nan,
        nu=float(params.nu) if params else math.nan,
        n_steps=k.n_steps,
        breakpoints=bps,
        knots=knots,
        coeffs=coeffs,
        support=float(support),
        lower=lower,
        kernel=k,
    )


def evaluate(t: TabulatedCovariance, d):
    """Piecewise-cubic covariance value; exactly zero beyond the support."""
    scalar = np.ndim(d) == 0
    d = np.atleast_1d(_check_lags(d))
    out = np.zeros_like(d)
    inside = d < t.support
    if np.any(inside):
        dd = d[inside]
        idx = np.clip(np.searchsorted(t.knots, dd, side="right") - 1, 0, t.n_pieces - 1)
        val = _horner(t.coeffs[idx], dd - t.knots[idx])
        bad = (val > 1.0 + OVERSHOOT_TOL) | (val < t.lower - OVERSHOOT_TOL)
        if np.any(bad):
            worst = dd[bad][0]
            raise TabulationError(f"tabulated covariance leaves [{t.lower}, 1] at d={worst!r}")
        out[inside] = np.clip(val, t.lower, 1.0)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class PsdReport:
    min_eig: float
    max_eig: float
    passed: bool


def _uniform_sphere(n, rng):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def check_psd(t: TabulatedCovariance, n_points: int = 200, seed=0, points=None) -> PsdReport:
    """Extreme eigenvalues of a Gram matrix at random (or given) points."""
    if points is None:
        if n_points < 2:
            raise ValueError("need at least two points")
        points = _uniform_sphere(n_points, np.random.default_rng(seed))
    K = evaluate(t, pairwise_distance(points).ravel()).reshape(len(points), len(points))
    eig = np.linalg.eigvalsh(0.5 * (K + K.T))
    lo, hi = float(eig[0]), float(eig[-1])
    return PsdReport(lo, hi, lo >= -1e-10 * hi)


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    nugget: float
    partial_sill: float
    structure: TabulatedCovariance

    def __post_init__(self):
        if not self.nugget >= 0.0:
            raise ValueError("nugget must be nonnegative")
        if not self.partial_sill > 0.0:
            raise ValueError("partial sill must be positive")

    @property
    def sill(self) -> float:
        return self.nugget + self.partial_sill

    @property
    def range(self) -> float:
        return self.structure.range

    def __call__(self, d):
        return model_value(self, d)


def model_value(m: CovarianceModel, d):
    """``nugget * [d == 0] + partial_sill * C(d)``."""
    d = np.asarray(d, dtype=float)
    val = m.partial_sill * np.asarray(evaluate(m.structure, d.ravel())).reshape(d.shape)
    val = val + np.where(d == 0.0, m.nugget, 0.0)
    return float(val) if val.ndim == 0 else val


# ---------------------------------------------------------------- file format

def _fmt(x: float) -> str:
    return repr(float(x))


def write_table(path, t: TabulatedCovariance, model: CovarianceModel | None = None,
                n_curve: int = 1024) -> None:
    """Write a tabulated model as plain text.

    Header line, optional ``[model]`` line, a ``d,C`` curve for humans, then
    the machine blocks that :func:`read_table` reconstructs from. Floats are
    written with ``repr`` (shortest round-trip form, at most 17 digits).
    """
    lines = [f"range={_fmt(t.range)} mu={_fmt(t.mu)} nu={_fmt(t.nu)} n_steps={t.n_steps}"]
    lines.append(f"support={_fmt(t.support)} lower={_fmt(t.lower)}")
    if model is not None:
        lines.append(f"[model] nugget={_fmt(model.nugget)} partial_sill={_fmt(model.partial_sill)}")
    grid = np.linspace(0.0, PI, n_curve)
    lines.append("[curve]")
    lines.append("d,C")
    lines.extend(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(grid, evaluate(t, grid)))
    lines.append("[breakpoints]")
    lines.extend(_fmt(x) for x in t.breakpoints)
    lines.append("[pieces]")
    lines.append("left,c0,c1,c2,c3")
    for x, c in zip(t.knots[:-1], t.coeffs):
        lines.append(",".join(_fmt(v) for v in (x, *c)))
    lines.append(f"[end] {_fmt(t.knots[-1])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _parse_kv(line: str) -> dict:
    out = {}
    for tok in line.split():
        if "=" in tok:
            key, val = tok.split("=", 1)
            out[key] = val
    return out


def read_table(path):
    """Read a file from :func:`write_table`; returns ``(table, model_or_None)``."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text:
        raise ValueError(f"{path}: empty model file")
    head = _parse_kv(text[0])
    try:
        rng_, mu, nu, n_steps = (float(head["range"]), float(head["mu"]),
                                 float(head["nu"]), int(head["n_steps"]))
        extra = _parse_kv(text[1])
        support, lower = float(extra["support"]), float(extra["lower"])
    except (KeyError, ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed header ({exc})") from None
    model_kv = None
    section = None
    bps, left, coeffs, end = [], [], [], None
    for lineno, line in enumerate(text[2:], start=3):
        if line.startswith("[model]"):
            model_kv = _parse_kv(line)
            continue
        if line.startswith("[end]"):
            end = float(line.split()[1])
            continue
        if line.startswith("["):
            section = line.strip()
            continue
        try:
            if section == "[breakpoints]":
                bps.append(float(line))
            elif section == "[pieces]" and not line.startswith("left"):
                vals = [float(v) for v in line.split(",")]
                if len(vals) != 5:
                    raise ValueError("expected 5 fields")
                left.append(vals[0])
                coeffs.append(vals[1:])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    if end is None or not coeffs:
        raise ValueError(f"{path}: missing tabulation block")
    table = TabulatedCovariance(
        range=rng_, mu=mu, nu=nu, n_steps=n_steps,
        breakpoints=np.array(bps), knots=np.array(left + [end]),
        coeffs=np.array(coeffs), support=support, lower=lower,
    )
    model = None
    if model_kv is not None:
        model = CovarianceModel(float(model_kv["nugget"]), float(model_kv["partial_sill"]), table)
    return table, model
