"""Brute-force reference values: surface quadrature and Monte-Carlo areas.

Nothing here calls the closed-form cap geometry, so these routines can be
used to check it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import SmoothKernelParams, smooth_kernel_value

__all__ = [
    "QuadratureSpec",
    "quad_covariance",
    "mc_area",
    "mc_cap_intersection",
]


@dataclass(frozen=True)
class QuadratureSpec:
    n_theta: int = 512
    n_phi: int = 1024

    def __post_init__(self):
        if self.n_theta < 16 or self.n_phi < 16:
            raise ValueError("quadrature needs at least 16 nodes per direction")


def quad_covariance(params: SmoothKernelParams, d, spec: QuadratureSpec = QuadratureSpec()):
    """Convolution of two smooth kernels with centres ``d`` apart, by quadrature.

    Polar coordinates around the first centre: Gauss-Legendre in colatitude
    over the first kernel's support, uniform midpoints in longitude. The
    kernel is normalized with the same rule.
    """
    scalar = np.ndim(d) == 0
    ds = np.atleast_1d(np.asarray(d, dtype=float))
    top = min(params.radius, np.pi)
    x, w = np.polynomial.legendre.leggauss(spec.n_theta)
    theta = 0.5 * top * (x + 1.0)
    w_theta = 0.5 * top * w * np.sin(theta)
    phi = (np.arange(spec.n_phi) + 0.5) * (2.0 * np.pi / spec.n_phi)
    w_phi = 2.0 * np.pi / spec.n_phi

    def k(dist):
        return smooth_kernel_value(dist / params.radius, params.mu, params.nu)

    k1 = k(theta)
    norm2 = 2.0 * np.pi * np.sum(w_theta * k1 ** 2)

    st, ct = np.sin(theta)[:, None], np.cos(theta)[:, None]
    sp, cp = np.sin(phi)[None, :], np.cos(phi)[None, :]
    out = np.empty(ds.size)
    for i, dd in enumerate(ds):
        if dd >= 2.0 * params.radius:
            out[i] = 0.0
            continue
        # point (cos t, sin t cos p, sin t sin p) vs centre (cos d, sin d, 0)
        dx = ct - np.cos(dd)
        dy = st * cp - np.sin(dd)
        dz = st * sp
        chord = np.sqrt(dx * dx + dy * dy + dz * dz)
        dist = 2.0 * np.arcsin(np.minimum(0.5 * chord, 1.0))
        inner = k(dist).sum(axis=1) * w_phi
        out[i] = np.sum(w_theta * k1 * inner) / norm2
    return float(out[0]) if scalar else out


def _jittered_sphere(n, rng):
    # One uniform point in each cell of an equal-area (height x longitude)
    # grid; by Archimedes, equal height slabs have equal area. Leftover
    # points beyond the full grid are iid uniform.
    nz = max(1, int(np.sqrt(n / np.pi)))
    nphi = n // nz
    iz, ip = np.divmod(np.arange(nz * nphi), nphi)
    z = -1.0 + (iz + rng.random(iz.size)) * (2.0 / nz)
    phi = (ip + rng.random(ip.size)) * (2.0 * np.pi / nphi)
    rest = n - nz * nphi
    z = np.concatenate([z, rng.uniform(-1.0, 1.0, rest)])
    phi = np.concatenate([phi, rng.uniform(0.0, 2.0 * np.pi, rest)])
    s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def mc_area(inside, n_samples: int, seed=0, chunk: int = 1_000_000):
    """Monte-Carlo area of the region ``inside(points) -> bool`` on the sphere.

    Returns ``(estimate, std_error)``. Samples are uniform on the sphere,
    drawn as jittered equal-area grids; the reported error is the plain
    binomial one, an upper bound for the stratified estimator.
    """
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        # each chunk is its own stratified sweep of the sphere
        pts = _jittered_sphere(m, rng)
        hits += int(np.count_nonzero(inside(pts)))
        done += m
    p = hits / n_samples
    return 4.0 * np.pi * p, 4.0 * np.pi * np.sqrt(p * (1.0 - p) / n_samples)


def mc_cap_intersection(r0, r1, d, n_samples: int = 10_000_000, seed=0):
    """Monte-Carlo estimate of the area shared by two caps."""
    if n_samples < 100_000:
        raise ValueError("n_samples must be at least 1e5")
    a = np.array([0.0, 0.0, 1.0])
    b = np.array([np.sin(d), 0.0, np.cos(d)])
    c0, c1 = np.cos(r0), np.cos(r1)

    def inside(p):
        return (p @ a >= c0) & (p @ b >= c1)

    return mc_area(inside, n_samples, seed)
