import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from sphconv.kernel import (
    DegenerateKernelError,
    SmoothKernelParams,
    StepKernel,
    discretize,
    normalize,
    ring_areas,
    smooth_kernel_value,
)
from sphconv.sphere_geom import cap_area

shape = st.floats(0.1, 10.0)
ranges = st.floats(0.01, 2 * math.pi)


def squared_integral_by_quadrature(k: StepKernel, order=20):
    # Gauss-Legendre inside each ring, where the integrand is smooth
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.concatenate([[0.0], k.radii])
    total = 0.0
    for lo, hi, a in zip(edges[:-1], edges[1:], k.levels):
        th = lo + 0.5 * (hi - lo) * (x + 1)
        total += a * a * 2 * math.pi * 0.5 * (hi - lo) * np.sum(w * np.sin(th))
    return total


@pytest.mark.parametrize("h, mu, nu, expected", [
    (1.5, 1.0, 1.0, 0.0),
    (0.0, 2.0, 3.0, 1.0),
    (0.5, 1.0, 1.0, 0.5),
    (1.0, 1.0, 1.0, 0.0),
])
def test_smooth_kernel_examples(h, mu, nu, expected):
    assert smooth_kernel_value(h, mu, nu) == expected


@pytest.mark.parametrize("mu, nu, rng_, msg", [
    (0.0, 1.0, 1.0, "μ > 0"),
    (1.0, 0.0, 1.0, "ν > 0"),
    (1.0, 1.0, 0.0, "range"),
    (1.0, 1.0, 7.0, "range"),
    (math.nan, 1.0, 1.0, "μ > 0"),
])
def test_params_validation(mu, nu, rng_, msg):
    with pytest.raises(ValueError, match=msg):
        SmoothKernelParams(mu, nu, rng_)


def test_params_radius():
    assert SmoothKernelParams(1, 1, 2 * math.pi).radius == math.pi


def test_single_step_linear():
    k = discretize(SmoothKernelParams(1.0, 1.0, 1.2), 1)
    assert k.n_steps == 1
    assert k.levels[0] == 0.5
    assert k.radii[0] == 0.6


@given(shape, shape, ranges, st.integers(1, 300))
def test_discretize_monotone_and_nonnegative_diffs(mu, nu, r, n):
    k = discretize(SmoothKernelParams(mu, nu, r), n)
    assert np.all(np.diff(k.levels) <= 0)
    assert np.all(k.diffs >= 0)
    assert k.radii[-1] == SmoothKernelParams(mu, nu, r).radius


def test_sixteen_steps_bracket_smooth_kernel():
    p = SmoothKernelParams(1.0, 2.0, 2.0)
    k = discretize(p, 16)
    edges = np.concatenate([[0.0], k.radii])
    for lo, hi, a in zip(edges[:-1], edges[1:], k.levels):
        assert smooth_kernel_value(hi / p.radius, p.mu, p.nu) <= a <= smooth_kernel_value(lo / p.radius, p.mu, p.nu)


def test_discretize_rejects_bad_counts():
    p = SmoothKernelParams(1, 1, 1)
    for n in (0, -3, 2.5):
        with pytest.raises(ValueError):
            discretize(p, n)


def test_step_kernel_validation():
    with pytest.raises(ValueError):
        StepKernel([0.2, 0.1], [1.0, 0.5])
    with pytest.raises(ValueError):
        StepKernel([0.1, 4.0], [1.0, 0.5])
    with pytest.raises(ValueError):
        StepKernel([0.1], [1.0, 0.5])
    with pytest.raises(ValueError):
        StepKernel([0.1], [math.inf])


def test_step_kernel_is_immutable():
    k = discretize(SmoothKernelParams(1, 1, 1), 8)
    with pytest.raises(ValueError):
        k.levels[0] = 3.0


def test_step_kernel_value_lookup():
    k = StepKernel([0.1, 0.3], [2.0, 1.0])
    assert_allclose(k.value([0.0, 0.05, 0.1, 0.2, 0.3, 1.0]), [2.0, 2.0, 1.0, 1.0, 0.0, 0.0])


def test_support_preserved():
    # levels beyond the smooth support would be zero; here the last ring is the support
    k = StepKernel([0.1, 0.2, 0.3], [1.0, 0.5, 0.0])
    assert k.support == 0.2
    assert StepKernel([0.1], [0.0]).support == 0.0
    p = SmoothKernelParams(2.0, 3.0, 1.4)
    assert discretize(p, 40).support == p.radius


def test_sup_error_decreases_like_one_over_n():
    p = SmoothKernelParams(1.0, 1.0, 2.0)
    dist = np.linspace(0, p.radius, 10_000, endpoint=False)
    smooth = smooth_kernel_value(dist / p.radius, 1, 1)
    errs = []
    for n in (4, 8, 16, 32, 64, 128):
        errs.append(np.max(np.abs(discretize(p, n).value(dist) - smooth)))
    errs = np.array(errs)
    assert np.all(np.diff(errs) < 0)
    n = np.array([4, 8, 16, 32, 64, 128])
    assert_allclose(errs * n, 0.5, rtol=0.05)


def test_ring_areas_sum_to_cap():
    radii = np.linspace(0.1, 2.9, 29)
    assert ring_areas(radii).sum() == pytest.approx(cap_area(2.9), rel=1e-14)


def test_normalize_uniform_cap():
    R = 0.8
    k = normalize(StepKernel([R], [1.0]))
    assert k.levels[0] == pytest.approx(1 / math.sqrt(cap_area(R)), rel=1e-15)


@given(shape, shape, ranges, st.integers(1, 200))
def test_normalize_properties(mu, nu, r, n):
    k = discretize(SmoothKernelParams(mu, nu, r), n)
    nk = normalize(k)
    assert nk.is_normalized()
    assert_allclose(normalize(nk).levels, nk.levels, rtol=1e-14)
    nz = k.levels > 0
    assert_allclose(nk.levels[nz] / nk.levels[0], k.levels[nz] / k.levels[0], rtol=1e-14)
    assert nk.radii is not None and np.array_equal(nk.radii, k.radii)


@pytest.mark.parametrize("mu, nu, r, n", [(1, 1, 1.0, 64), (1, 8, math.pi, 256), (3, 0.5, 0.2, 10)])
def test_normalize_quadrature_oracle(mu, nu, r, n):
    k = normalize(discretize(SmoothKernelParams(mu, nu, r), n))
    assert squared_integral_by_quadrature(k) == pytest.approx(1.0, abs=1e-6)


def test_normalize_zero_kernel():
    with pytest.raises(DegenerateKernelError):
        normalize(StepKernel([0.5, 1.0], [0.0, 0.0]))


def test_scaled():
    k = StepKernel([0.5], [2.0])
    assert k.scaled(3).levels[0] == 6.0
