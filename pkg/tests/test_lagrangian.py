import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intrinsic_graphs.catalog import catalog_get
from intrinsic_graphs.errors import ConditioningError, PreconditionError
from intrinsic_graphs.field import GridSpec, ScalarField, build_graph_function
from intrinsic_graphs.lagrangian import (closed_form_inverse, conjugation_residual,
                                         extract_ruling, forward_map,
                                         horizontal_lift_straightness, integrate_flow,
                                         ruling_residual, stationarity_lagrangian_residual,
                                         trace_characteristic, vandermonde_extract,
                                         vandermonde_matrix_inverse)
from intrinsic_graphs.variation import TestFunction


def _grid(flow):
    return np.meshgrid(flow.t_grid, flow.zeta_grid, indexing="ij")


@pytest.mark.parametrize("a,b", [(0, 0), (1, 0), (2, -1), (-0.5, 0.3)])
def test_plane_flow_is_an_explicit_parabola(a, b):
    g = catalog_get(f"plane:a={a},b={b}").graph(rectangle=(-2, 2, -10, 10))
    zg = np.linspace(-1, 1, 21)
    fl = integrate_flow(g, 0.0, zg, (-2, 2))
    T, Z = _grid(fl)
    assert not fl.short.any()
    assert np.max(np.abs(fl.chi - (a * T ** 2 / 2 + b * T + Z))) < 1e-9


def test_flow_is_normalized_on_the_base_line():
    g = catalog_get("sine").graph()
    zg = np.linspace(-1.5, 1.5, 13)
    fl = integrate_flow(g, 0.4, zg, (-1, 1.5))
    assert np.array_equal(fl.chi[fl.i0], zg)
    assert fl.t_grid[fl.i0] == 0.4


def test_fan_flow_matches_closed_form():
    g = catalog_get("hyperbolic-fan").graph()
    zg = np.linspace(-1, 1, 41)
    fl = integrate_flow(g, 0.0, zg, (-2, 2))
    T, Z = _grid(fl)
    assert np.nanmax(np.abs(fl.chi - Z * (1 + T ** 2))) < 1e-7
    # trajectories with |zeta (1 + t^2)| > 2 leave the rectangle
    assert fl.short[np.abs(zg) * 5 > 2].all()
    assert not fl.short[np.abs(zg) * 5 < 2 - 1e-9].any()


def test_young_flow_matches_closed_form_before_the_singular_line():
    g = catalog_get("young").graph(rectangle=(-2, 4, -2, 20))
    zg = np.linspace(0.25, 2, 36)
    fl = integrate_flow(g, 0.0, zg, (-2, 3))
    T, Z = _grid(fl)
    ok = fl.valid
    assert np.all(T[ok] >= -np.sqrt(Z[ok]))
    assert np.max(np.abs(fl.chi[ok] - (T[ok] + np.sqrt(Z[ok])) ** 2)) < 1e-6
    # every trajectory is stopped at tau = 0 going backward
    assert fl.short.all()


def test_flow_is_monotone_in_zeta():
    g = catalog_get("sine").graph()
    fl = integrate_flow(g, 0.0, np.linspace(-1.9, 1.9, 39), (-2, 2))
    d = np.diff(fl.chi, axis=1)
    assert np.all(d[np.isfinite(d)] > 0)


def test_single_trajectory_agrees_with_the_sampled_flow():
    g = catalog_get("sine").graph()
    fl = integrate_flow(g, 0.0, np.array([0.3, 0.5]), (-1, 1), tol=1e-11)
    i = int(np.argmin(np.abs(fl.t_grid - 0.7)))
    assert trace_characteristic(g, 0.0, 0.5, fl.t_grid[i], 1e-11) == pytest.approx(
        fl.chi[i, 1], abs=1e-9)


def test_flow_rejects_base_points_outside_the_grid():
    g = catalog_get("plane").graph()
    with pytest.raises(PreconditionError):
        integrate_flow(g, 0.0, [0.0, 3.0], (-1, 1))
    with pytest.raises(PreconditionError):
        integrate_flow(g, 0.0, [0.5, 0.1], (-1, 1))


def test_sampled_field_flow():
    # no analytic evaluator: the right-hand side is interpolated bilinearly,
    # which is exact for f = a eta + b
    spec = GridSpec(-2, 2, -6, 6, 33, 49)
    E, T = spec.mesh()
    g = build_graph_function(ScalarField(spec, 1.5 * E - 0.5))
    fl = integrate_flow(g, 0.0, np.linspace(-1, 1, 11), (-1.5, 1.5))
    Tt, Z = _grid(fl)
    assert np.max(np.abs(fl.chi - (0.75 * Tt ** 2 - 0.5 * Tt + Z))) < 1e-8


def test_conjugation_residuals_plane_and_young():
    g = catalog_get("plane:a=2,b=-1").graph(rectangle=(-2, 2, -10, 10))
    fl = integrate_flow(g, 0.0, np.linspace(-1, 1, 21), (-2, 2))
    r1, r2 = conjugation_residual(fl, g)
    assert r1 < 1e-8 and r2 < 1e-8
    g = catalog_get("young").graph(rectangle=(-2, 4, -2, 20))
    fl = integrate_flow(g, 0.0, np.linspace(1, 2, 21), (-0.5, 2))
    r1, _ = conjugation_residual(fl, g)
    assert r1 < 1e-6


def test_fan_conjugation_residuals_small_for_every_zeta_spacing():
    g = catalog_get("hyperbolic-fan").graph()
    res = []
    for n in (11, 21, 41):
        fl = integrate_flow(g, 0.0, np.linspace(-0.3, 0.3, n), (-1, 1), tol=1e-11)
        res.append(conjugation_residual(fl, g))
    assert max(r[0] for r in res) < 1e-6
    assert all(r[1] < 1e-6 for r in res)


def test_extract_ruling_examples():
    g = catalog_get("plane:a=3,b=1").graph(rectangle=(-2, 2, -15, 15))
    pr = extract_ruling(integrate_flow(g, 0.0, np.linspace(-1, 1, 9), (-1, 1)), g)
    assert np.allclose(pr.a, 3) and np.allclose(pr.b, 1)
    assert np.allclose(pr.da, 0) and np.allclose(pr.db, 0)

    g = catalog_get("hyperbolic-fan").graph()
    zg = np.linspace(-1, 1, 21)
    pr = extract_ruling(integrate_flow(g, 0.0, zg, (-1, 1)), g)
    assert np.allclose(pr.a, 2 * zg, atol=1e-14)
    assert np.allclose(pr.b, 0) and np.allclose(pr.da, 2, atol=1e-12)

    g = catalog_get("young").graph()
    zg = np.linspace(0.5, 1.5, 11)
    pr = extract_ruling(integrate_flow(g, 0.0, zg, (-0.5, 0.5)), g)
    assert np.allclose(pr.a, 2) and np.allclose(pr.b, 2 * np.sqrt(zg))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3, unique=True))
def test_vandermonde_inverse_is_an_inverse(s):
    s = sorted(s)
    if min(np.diff(s)) < 1e-2:
        return
    V = np.array([[x * x / 2, x, 1.0] for x in s])
    assert np.allclose(vandermonde_matrix_inverse(*s) @ V, np.eye(3), atol=1e-9)


def test_vandermonde_recovers_an_exact_quadratic_flow():
    g = catalog_get("plane:a=2,b=-1").graph(rectangle=(-2, 2, -10, 10))
    zg = np.linspace(-1, 1, 11)
    fl = integrate_flow(g, 0.0, zg, (-2, 2))
    a, b, c = vandermonde_extract(fl, -1.3, 0.2, 1.77)   # off-node times too
    assert np.max(np.abs(a - 2)) < 1e-10
    assert np.max(np.abs(b + 1)) < 1e-10
    assert np.max(np.abs(c - zg)) < 1e-10


def test_vandermonde_refuses_coincident_times():
    g = catalog_get("plane").graph()
    fl = integrate_flow(g, 0.0, np.linspace(-1, 1, 5), (-1, 1))
    with pytest.raises(ConditioningError):
        vandermonde_extract(fl, 0.1, 0.1 + 1e-9, 0.5)
    with pytest.raises(PreconditionError):
        vandermonde_extract(fl, 0.1, 0.2, 1.5)


def test_sine_is_not_ruled():
    g = catalog_get("sine").graph()
    fl = integrate_flow(g, 0.0, np.linspace(-1.5, 1.5, 31), (-2, 2))
    assert ruling_residual(fl, extract_ruling(fl, g)) > 1e-2
    assert horizontal_lift_straightness(g, fl) > 1e-2


def test_halving_the_ode_tolerance_reduces_the_ruling_residual():
    g = catalog_get("hyperbolic-fan").graph()
    zg = np.linspace(-1, 1, 21)
    res = [ruling_residual(fl := integrate_flow(g, 0.0, zg, (-1, 1), tol=t), extract_ruling(fl, g))
           for t in (1e-4, 1e-5, 1e-6, 1e-7)]
    assert all(r1 < r0 for r0, r1 in zip(res, res[1:]))
    # roughly proportional: a decade in tol buys at least a factor of three
    assert all(r1 < r0 / 3 for r0, r1 in zip(res, res[1:]))


@pytest.mark.parametrize("name", ["plane:a=2,b=-1", "hyperbolic-fan"])
def test_round_trip_inverse(name):
    g = catalog_get(name).graph(rectangle=(-2, 2, -12, 12))
    E, T = np.meshgrid(np.linspace(-2, 2, 21), np.linspace(-2, 2, 21), indexing="ij")
    _, Z = closed_form_inverse(g)(E, T)
    _, back = forward_map(g)(E, Z)
    assert np.max(np.abs(back - T)) < 1e-12
    # and against the integrated flow itself
    zg = np.linspace(-1, 1, 11)
    fl = integrate_flow(g, 0.0, zg, (-2, 2))
    Tf, Zf = _grid(fl)
    ok = fl.valid
    _, zeta = closed_form_inverse(g)(Tf[ok], fl.chi[ok])
    assert np.max(np.abs(zeta - Zf[ok])) < 1e-6


def test_stationarity_residual_in_characteristic_coordinates():
    thetas = [TestFunction((0.1, 0.0), (0.6, 0.3), 1.0),
              TestFunction((-0.3, 0.15), (0.5, 0.2), -0.7)]
    out = {}
    for name in ("plane:a=2,b=-1", "hyperbolic-fan", "sine"):
        g = catalog_get(name).graph(rectangle=(-2, 2, -10, 10))
        fl = integrate_flow(g, 0.0, np.linspace(-0.5, 0.5, 41), (-1, 1))
        out[name] = stationarity_lagrangian_residual(fl, thetas)
    assert out["plane:a=2,b=-1"] < 1e-12
    assert out["hyperbolic-fan"] < 1e-6
    assert out["sine"] > 1e-3


def test_flow_and_ruling_csv_headers(tmp_path):
    g = catalog_get("hyperbolic-fan").graph()
    fl = integrate_flow(g, 0.0, np.linspace(-0.5, 0.5, 5), (-1, 1), n_t=11)
    fl.dump_csv(tmp_path / "flow.csv")
    extract_ruling(fl, g).dump_csv(tmp_path / "ruling.csv")
    lines = (tmp_path / "flow.csv").read_text().splitlines()
    assert lines[0] == "t,zeta,chi,dchi_dt,d2chi_dt2"
    assert len(lines) == 1 + int(fl.valid.sum())
    assert (tmp_path / "ruling.csv").read_text().splitlines()[0] == "zeta,a,b,da,db"
