import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intrinsic_graphs.catalog import catalog_get, catalog_names
from intrinsic_graphs.errors import DomainError, PreconditionError
from intrinsic_graphs.variation import (LinearCombination, TestFunction, _extrapolate, area,
                                        area_with_error, first_variation, random_bumps,
                                        second_variation, variation_fd_check)

ENTRIES = ["plane:a=2,b=-1"] + [n for n in catalog_names() if not n.startswith("plane")]


@pytest.mark.parametrize("a", [0.0, 1.0, -3.0])
def test_plane_area_is_sqrt_one_plus_a_squared_times_region(a):
    g = catalog_get(f"plane:a={a},b=0.5").graph(17, 17)
    K = (-1.0, 0.5, -0.25, 1.0)
    assert area(g, K) == pytest.approx(math.sqrt(1 + a * a) * 1.5 * 1.25, rel=1e-13)


def test_young_area_on_the_unit_window():
    g = catalog_get("young").graph()
    val, err, region = area_with_error(g, (0.0, 1.0, 1.0, 2.0))
    assert abs(val - math.sqrt(5)) < 1e-12
    assert err < 1e-10
    assert region.rectangle == (0.0, 1.0, 1.0, 2.0)


def test_area_region_outside_the_grid_is_rejected():
    g = catalog_get("plane").graph(9, 9)
    with pytest.raises(DomainError):
        area(g, (0, 3, 0, 1))


def test_area_across_the_singular_line_converges():
    # grad^f f = 2 on both sides, so the integrand is constant
    g = catalog_get("young").graph()
    assert area(g, (-1, 1, -1, 1)) == pytest.approx(4 * math.sqrt(5), rel=1e-12)


def test_bump_vanishes_outside_its_support():
    b = TestFunction((0.1, -0.2), (0.5, 0.3), 2.0)
    e0, e1, t0, t1 = b.support()
    assert (e0, e1, t0, t1) == pytest.approx((-0.4, 0.6, -0.5, 0.1))
    pts = np.array([[e0 - 0.01, -0.2], [0.1, t1 + 1e-9], [0.6, 0.1]])
    assert np.all(b(pts[:, 0], pts[:, 1]) == 0)
    assert b(0.1, -0.2) == pytest.approx(2.0)
    assert b.sup_norm == 2.0


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_bump_partials_match_finite_differences(x, y):
    b = TestFunction((0.0, 0.0), (1.0, 1.0), 1.0)
    h = 1e-6
    assert b.d_eta(x, y) == pytest.approx((b(x + h, y) - b(x - h, y)) / (2 * h), abs=1e-6)
    assert b.d_tau(x, y) == pytest.approx((b(x, y + h) - b(x, y - h)) / (2 * h), abs=1e-6)


def test_random_bumps_stay_inside_the_window(rng):
    rect = (-1.0, 1.0, 0.5, 1.5)
    for b in random_bumps(rect, 50, rng):
        e0, e1, t0, t1 = b.support()
        assert rect[0] <= e0 and e1 <= rect[1] and rect[2] <= t0 and t1 <= rect[3]


def test_linear_combination_adds_terms():
    b1 = TestFunction((0, 0), (0.5, 0.5), 1.0)
    b2 = TestFunction((0.2, 0.1), (0.3, 0.6), -0.5)
    c = LinearCombination(((1.0, b1), (1.0, b2)))
    assert c(0.1, 0.1) == pytest.approx(b1(0.1, 0.1) + b2(0.1, 0.1))
    assert c.support() == pytest.approx((-0.5, 0.5, -0.5, 0.7))


@pytest.mark.parametrize("ab", [(0, 0), (1, 0), (2, -1)])
def test_plane_first_variation_vanishes(ab, rng):
    g = catalog_get(f"plane:a={ab[0]},b={ab[1]}").graph()
    for phi in random_bumps(catalog_get("plane").bump_window, 5, rng):
        assert abs(first_variation(g, phi).value) < 1e-9


def test_variation_error_estimate_is_reported(rng):
    g = catalog_get("sine").graph()
    phi = random_bumps((-1, 1, -1, 1), 1, rng)[0]
    r = first_variation(g, phi)
    assert r.quadrature_error_estimate >= 0
    assert r.region.rectangle == pytest.approx(phi.support())


def test_probe_outside_the_grid_is_rejected():
    g = catalog_get("plane").graph(9, 9)
    with pytest.raises(PreconditionError):
        first_variation(g, TestFunction((1.9, 0), (0.5, 0.5), 1.0))


def test_sine_is_not_stationary():
    g = catalog_get("sine").graph()
    phis = [TestFunction((0.0, c), (0.8, 0.6), 1.0) for c in (-1.0, 0.0, 1.0)]
    assert max(abs(first_variation(g, p).value) for p in phis) > 1e-3


@pytest.mark.parametrize("name", ENTRIES)
def test_variations_match_richardson_differences(name, rng):
    entry = catalog_get(name)
    g = entry.graph()
    for phi in random_bumps(entry.bump_window, 2, rng):
        chk = variation_fd_check(g, phi)
        assert chk.first_error < 1e-8
        assert chk.second_error < 1e-5


def test_second_variation_is_quadratic_in_phi(rng):
    g = catalog_get("hyperbolic-fan").graph()
    phi = random_bumps((-1, 1, -1, 1), 1, rng)[0]
    base = second_variation(g, phi).value
    assert second_variation(g, phi.scaled(-3.0)).value == pytest.approx(9 * base, rel=1e-12)


def test_plane_second_variation_is_nonnegative(rng):
    g = catalog_get("plane:a=1,b=0").graph()
    for phi in random_bumps((-1.5, 1.5, -1.5, 1.5), 5, rng):
        assert second_variation(g, phi).value >= -1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_extrapolation_is_exact_on_quadratics_in_eps_squared(c):
    eps = np.array([1e-1, 3e-2, 1e-2])
    vals = c[0] + c[1] * eps ** 2 + c[2] * eps ** 4
    assert _extrapolate(eps, vals) == pytest.approx(c[0], abs=1e-9)
