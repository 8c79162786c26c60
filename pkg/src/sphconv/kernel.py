"""Zonal kernels: the smooth two-parameter family and its step-function form."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sphere_geom import FOUR_PI, PI

__all__ = [
    "DegenerateKernelError",
    "SmoothKernelParams",
    "StepKernel",
    "smooth_kernel_value",
    "discretize",
    "normalize",
    "ring_areas",
]


class DegenerateKernelError(ValueError):
    """Raised when a kernel has no mass to normalize."""


@dataclass(frozen=True)
class SmoothKernelParams:
    """Shape ``mu``, ``nu`` and covariance ``range`` (kernel radius is range/2)."""

    mu: float
    nu: float
    range: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"shape parameter must satisfy μ > 0, got mu={self.mu}")
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise ValueError(f"shape parameter must satisfy ν > 0, got nu={self.nu}")
        if not (math.isfinite(self.range) and 0 < self.range <= 2 * PI):
            raise ValueError(f"range must lie in (0, 2π], got {self.range}")

    @property
    def radius(self) -> float:
        return 0.5 * self.range


def smooth_kernel_value(h, mu, nu):
    """``(1 - h**mu)**nu`` for ``h < 1``, zero otherwise."""
    h = np.asarray(h, dtype=float)
    inside = h < 1.0
    hh = np.where(inside, h, 0.0)
    val = np.where(inside, (1.0 - hh ** mu) ** nu, 0.0)
    return float(val) if val.ndim == 0 else val


def ring_areas(radii) -> np.ndarray:
    """Areas of the rings between consecutive radii (first ring is a cap)."""
    r = np.concatenate([[0.0], np.asarray(radii, dtype=float)])
    s = np.sin(0.5 * r) ** 2
    return FOUR_PI * np.diff(s)


@dataclass(frozen=True, eq=False)
class StepKernel:
    """Piecewise-constant zonal kernel.

    ``levels[j]`` is the kernel value for distances in
    ``[radii[j-1], radii[j])`` (with an implicit leading radius 0).
    """

    radii: np.ndarray
    levels: np.ndarray
    params: SmoothKernelParams | None = field(default=None, compare=False)

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float).copy()
        levels = np.asarray(self.levels, dtype=float).copy()
        if radii.ndim != 1 or radii.shape != levels.shape or radii.size == 0:
            raise ValueError("radii and levels must be equal-length 1-d arrays")
        if not (np.all(np.isfinite(radii)) and np.all(np.isfinite(levels))):
            raise ValueError("kernel radii and levels must be finite")
        if radii[0] <= 0 or radii[-1] > PI or np.any(np.diff(radii) <= 0):
            raise ValueError("radii must be strictly increasing within (0, π]")
        radii.setflags(write=False)
        levels.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "levels", levels)

    @property
    def n_steps(self) -> int:
        return self.radii.size

    @property
    def diffs(self) -> np.ndarray:
        """Coefficients of the nested-cap form: ``b_j = a_j - a_{j+1}``, ``b_n = a_n``."""
        return np.append(self.levels[:-1] - self.levels[1:], self.levels[-1])

    @property
    def support(self) -> float:
        """Outermost radius carrying a nonzero level (0 for the zero kernel)."""
        nz = np.flatnonzero(self.levels)
        return float(self.radii[nz[-1]]) if nz.size else 0.0

    def squared_norm(self) -> float:
        """Surface integral of the squared kernel."""
        return float(np.sum(self.levels ** 2 * ring_areas(self.radii)))

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.squared_norm() - 1.0) <= tol

    def value(self, dist):
        """Kernel value at spherical distance ``dist`` from its centre."""
        dist = np.asarray(dist, dtype=float)
        idx = np.searchsorted(self.radii, dist, side="right")
        padded = np.append(self.levels, 0.0)
        val = padded[idx]
        return float(val) if val.ndim == 0 else val

    def scaled(self, factor: float) -> "StepKernel":
        return StepKernel(self.radii, self.levels * factor, self.params)


def discretize(params: SmoothKernelParams, n_steps: int) -> StepKernel:
    """Step approximation: uniform radii in normalized distance, midpoint levels."""
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError(f"n_steps must be a positive integer, got {n_steps}")
    n = int(n_steps)
    j = np.arange(1, n + 1)
    radii = params.radius * j / n
    radii[-1] = params.radius
    levels = smooth_kernel_value((j - 0.5) / n, params.mu, params.nu)
    return StepKernel(radii, np.atleast_1d(levels), params)


def normalize(k: StepKernel) -> StepKernel:
    """Rescale levels so the kernel has unit squared surface integral."""
    norm2 = k.squared_norm()
    if not norm2 > 0.0:
        raise DegenerateKernelError("kernel has no nonzero level to normalize")
    return StepKernel(k.radii, k.levels / math.sqrt(norm2), k.params)
