"""Spherical trigonometry on the unit sphere.

All angles are in radians. Wherever a quantity can be computed either from a
cosine or from a squared half-angle sine, the sine form is used: it keeps full
relative precision for small angles, where ``1 - cos`` cancels.

The heavy lifting is :func:`cap_intersection_area`, the exact area shared by
two spherical caps. Its scalar core is compiled with numba because the
covariance construction calls it O(n^2) times per lag.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "UnitVec3",
    "unit_vec_from_lonlat",
    "lonlat_to_xyz",
    "spherical_distance",
    "pairwise_distance",
    "cap_area",
    "right_triangle_area",
    "sector_area",
    "segment_area",
    "cap_split_offset",
    "half_chord_angle",
    "cap_intersection_area",
]

PI = math.pi
HALF_PI = 0.5 * math.pi
FOUR_PI = 4.0 * math.pi

# slack for angles that drift past a domain edge by rounding
_ANGLE_SLACK = 1e-12


@dataclass(frozen=True)
class UnitVec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        v = np.array([self.x, self.y, self.z], dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite coordinates {tuple(v)}")
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        if abs(norm - 1.0) > 1e-15:
            v = v / norm
            object.__setattr__(self, "x", float(v[0]))
            object.__setattr__(self, "y", float(v[1]))
            object.__setattr__(self, "z", float(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_array(cls, v) -> "UnitVec3":
        return cls(float(v[0]), float(v[1]), float(v[2]))


def lonlat_to_xyz(lon_deg, lat_deg) -> np.ndarray:
    """Vectorized geographic-to-Cartesian mapping, returns shape (..., 3)."""
    lon = np.asarray(lon_deg, dtype=float)
    lat = np.asarray(lat_deg, dtype=float)
    if not (np.all(np.isfinite(lon)) and np.all(np.isfinite(lat))):
        raise ValueError("longitude/latitude must be finite")
    if np.any(np.abs(lat) > 90.0):
        raise ValueError("latitude must lie in [-90, 90]")
    lon = np.mod(lon, 360.0)
    lam = np.deg2rad(lon)
    phi = np.deg2rad(lat)
    cphi = np.cos(phi)
    xyz = np.stack([cphi * np.cos(lam), cphi * np.sin(lam), np.sin(phi)], axis=-1)
    # exact zeros on the axes instead of 6e-17 residues
    xyz = np.where(np.abs(xyz) < 1e-16, 0.0, xyz)
    return xyz / np.linalg.norm(xyz, axis=-1, keepdims=True)


def unit_vec_from_lonlat(lon_deg: float, lat_deg: float) -> UnitVec3:
    return UnitVec3.from_array(lonlat_to_xyz(lon_deg, lat_deg))


def _as_xyz(p) -> np.ndarray:
    if isinstance(p, UnitVec3):
        return p.as_array()
    return np.asarray(p, dtype=float)


def spherical_distance(p, q):
    """Great-circle distance ``2 asin(|q - p| / 2)``.

    Accepts :class:`UnitVec3` or arrays of shape (..., 3); broadcasts.
    """
    a = _as_xyz(p)
    b = _as_xyz(q)
    chord = np.linalg.norm(b - a, axis=-1)
    d = 2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0))
    return float(d) if np.ndim(d) == 0 else d


def pairwise_distance(a, b=None) -> np.ndarray:
    """Matrix of spherical distances between rows of ``a`` and rows of ``b``."""
    a = np.asarray(a, dtype=float)
    b = a if b is None else np.asarray(b, dtype=float)
    # |a - b|^2 = 2 - 2 a.b loses precision for close points; use differences.
    out = np.empty((a.shape[0], b.shape[0]))
    for i0 in range(0, a.shape[0], 512):
        diff = a[i0:i0 + 512, None, :] - b[None, :, :]
        chord = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        out[i0:i0 + 512] = 2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0))
    return out


def _check_range(name, value, lo, hi):
    v = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    if np.any(v < lo - _ANGLE_SLACK) or np.any(v > hi + _ANGLE_SLACK):
        raise ValueError(f"{name} must lie in [{lo:g}, {hi:g}], got {value}")
    return np.clip(v, lo, hi)


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def cap_area(r):
    """Area of a spherical cap (disk) of angular radius ``r``: 4 pi sin^2(r/2)."""
    r = _check_range("cap radius", r, 0.0, PI)
    return _out(FOUR_PI * np.sin(0.5 * r) ** 2)


def right_triangle_area(a, b):
    """Signed area of the spherical right triangle with legs ``a`` and ``b``.

    ``b`` may be negative; the area then carries its sign.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return _out(2.0 * np.arctan(np.tan(0.5 * a) * np.tan(0.5 * b)))


def sector_area(alpha, r):
    alpha = _check_range("sector angle", alpha, 0.0, 2.0 * PI)
    r = _check_range("sector radius", r, 0.0, PI)
    return _out(2.0 * alpha * np.sin(0.5 * r) ** 2)


def segment_area(alpha, r, a, b):
    """Area cut from a cap of radius ``r`` by a chord.

    ``alpha`` is the half opening angle at the cap centre, ``a`` the half
    chord and ``b`` the signed centre-to-chord distance.
    """
    return _out(2.0 * (np.asarray(sector_area(alpha, r)) - np.asarray(right_triangle_area(a, b))))


@njit(cache=True)
def _split_offset_core(r0, r1, d):
    # sin^2(r0/2) - sin^2(r1/2) and 1 - sin^2(r0/2) - sin^2(r1/2), both
    # rewritten as products so neither cancels near r0 = r1 or near pi/2.
    num = math.sin(0.5 * (r0 - r1)) * math.sin(0.5 * (r0 + r1))
    den = math.cos(0.5 * (r0 + r1)) * math.cos(0.5 * (r0 - r1))
    if num == 0.0:
        return 0.0
    t = math.tan(0.5 * d)
    return math.atan2(num, den * t)


@njit(cache=True)
def _half_chord_core(r, t):
    num = math.sin(0.5 * (r - t)) * math.sin(0.5 * (r + t))
    den = math.cos(t)
    if num <= 0.0:
        return 0.0
    if den <= 0.0:
        return r
    q = min(num / den, 1.0)
    # the half chord never exceeds the radius
    return min(2.0 * math.asin(math.sqrt(q)), r)


@njit(cache=True)
def _cap_area_core(r):
    s = math.sin(0.5 * r)
    return FOUR_PI * s * s


@njit(cache=True)
def _segment_hc(s_r, st, ct, q):
    # Cap with sin(r/2) = s_r cut by a chord at signed distance t from its
    # centre (sin t, cos t given); q = sin^2(c/2) for the half chord c.
    sc = 2.0 * math.sqrt(q * (1.0 - q))
    cc = 1.0 - 2.0 * q
    # half opening angle at the centre: tan(alpha) = tan(c) / sin(t)
    alpha = math.atan2(sc, st * cc)
    tri = 2.0 * math.atan(math.sqrt(q / (1.0 - q)) * st / (1.0 + ct))
    return 2.0 * (2.0 * alpha * s_r * s_r - tri)


@njit(cache=True)
def _lens_hc(s0, c0, s1, c1, sd, cd):
    # Intersecting caps, both radii <= pi/2. Every angle enters through the
    # sine and cosine of its half, so complements are exact swaps.
    num = (s0 * c1 - c0 * s1) * (s0 * c1 + c0 * s1)   # sin^2(r0/2) - sin^2(r1/2)
    den = (c0 * c1 - s0 * s1) * (c0 * c1 + s0 * s1)   # 1 - sin^2(r0/2) - sin^2(r1/2)
    if num == 0.0:
        cx, sx = 1.0, 0.0
    else:
        # split offset x = atan(cot(d/2) num / den)
        yy = num * cd
        xx = den * sd
        h = math.hypot(xx, yy)
        cx, sx = xx / h, yy / h
    # t0 = d/2 + x and t1 = d/2 - x, centre-to-chord distances
    st0 = sd * cx + cd * sx
    ct0 = cd * cx - sd * sx
    st1 = sd * cx - cd * sx
    ct1 = cd * cx + sd * sx
    # half chord from the better-conditioned right triangle
    if ct0 >= ct1:
        q = (s0 * s0 - st0 * st0 / (2.0 * (1.0 + ct0))) / ct0
    else:
        q = (s1 * s1 - st1 * st1 / (2.0 * (1.0 + ct1))) / ct1
    if q <= 0.0:
        return 0.0
    if q > 0.5:
        q = 0.5
    return _segment_hc(s0, st0, ct0, q) + _segment_hc(s1, st1, ct1, q)


@njit(cache=True)
def _small_hc(r0, s0, c0, r1, s1, c1, d, sd, cd):
    if r0 + r1 <= d:
        return 0.0
    if r1 <= r0 - d:
        return FOUR_PI * s1 * s1
    if r0 <= r1 - d:
        return FOUR_PI * s0 * s0
    area = _lens_hc(s0, c0, s1, c1, sd, cd)
    lim = FOUR_PI * min(s0 * s0, s1 * s1)
    if area < 0.0:
        return 0.0
    if area > lim:
        return lim
    return area


@njit(cache=True)
def _intersection_hc(r0, s0, c0, r1, s1, c1, d, sd, cd):
    """Cap intersection area given each angle with its half-angle sin/cos."""
    big0 = r0 > HALF_PI
    big1 = r1 > HALF_PI
    if big0 and big1:
        return (FOUR_PI * (s0 * s0 + s1 * s1 - 1.0)
                + _small_hc(PI - r0, c0, s0, PI - r1, c1, s1, d, sd, cd))
    if big0:
        return FOUR_PI * s1 * s1 - _small_hc(PI - r0, c0, s0, r1, s1, c1, PI - d, cd, sd)
    if big1:
        return FOUR_PI * s0 * s0 - _small_hc(r0, s0, c0, PI - r1, c1, s1, PI - d, cd, sd)
    return _small_hc(r0, s0, c0, r1, s1, c1, d, sd, cd)


@njit(cache=True)
def _intersection_core(r0, r1, d):
    return _intersection_hc(r0, math.sin(0.5 * r0), math.cos(0.5 * r0),
                            r1, math.sin(0.5 * r1), math.cos(0.5 * r1),
                            d, math.sin(0.5 * d), math.cos(0.5 * d))


@njit(cache=True)
def _intersection_many(r0, r1, d):
    out = np.empty(r0.shape[0])
    for i in range(r0.shape[0]):
        out[i] = _intersection_core(r0[i], r1[i], d[i])
    return out


def cap_split_offset(r0, r1, d) -> float:
    """Offset ``x`` of the chord foot C from the midpoint of the centre arc.

    The centre-to-chord distances are ``d/2 + x`` (first cap) and
    ``d/2 - x`` (second cap). Returns 0 when both radii are exactly pi/2.
    """
    r0 = float(_check_range("r0", r0, 0.0, HALF_PI))
    r1 = float(_check_range("r1", r1, 0.0, HALF_PI))
    d = float(_check_range("d", d, 0.0, PI))
    return _split_offset_core(r0, r1, d)


def half_chord_angle(r, t) -> float:
    """Half chord of a cap of radius ``r`` cut at distance ``t`` from its centre."""
    r = float(_check_range("r", r, 0.0, HALF_PI))
    t = float(t)
    if abs(t) > r + _ANGLE_SLACK:
        raise ValueError(f"|t| = {abs(t)} exceeds cap radius {r}")
    return _half_chord_core(r, t)


def cap_intersection_area(r0, r1, d):
    """Exact area of the intersection of two caps with radii ``r0``, ``r1``
    whose centres are ``d`` apart. Broadcasts over array inputs.

    Caps wider than a hemisphere are replaced by their complements, so the
    geometric core only ever sees radii up to pi/2. Configurations exactly on
    a branch boundary (tangency) resolve to the disjoint/containment value.
    """
    r0 = _check_range("r0", r0, 0.0, PI)
    r1 = _check_range("r1", r1, 0.0, PI)
    d = _check_range("d", d, 0.0, PI)
    r0, r1, d = np.broadcast_arrays(r0, r1, d)
    shape = r0.shape
    out = _intersection_many(
        np.ascontiguousarray(r0, dtype=float).ravel(),
        np.ascontiguousarray(r1, dtype=float).ravel(),
        np.ascontiguousarray(d, dtype=float).ravel(),
    ).reshape(shape)
    return _out(out)
