import numpy as np
import pytest

from intrinsic_graphs.catalog import catalog_get
from intrinsic_graphs.probe import _tau_nodes, integrability_probe


def test_tau_quadrature_integrates_inverse_square_exactly():
    for eps in (1e-1, 1e-3, 1e-5):
        x, w = _tau_nodes(-1.0, 1.0, (0.0,), eps)
        assert np.all(np.abs(x) >= eps)
        assert np.sum(w * x ** -2) == pytest.approx(2 * (1 / eps - 1), rel=1e-10)
        assert np.sum(w) == pytest.approx(2 * (1 - eps), rel=1e-13)


def test_plane_moments_are_constant():
    r = integrability_probe(catalog_get("plane:a=1,b=2"), 4, 1.0)
    assert r.moment_trend == "bounded" and r.exp_trend == "bounded"
    assert np.allclose(r.moment, 0.0)
    assert np.allclose(r.exp_moment, 16.0)


def test_young_fails_both_integrability_hypotheses():
    r = integrability_probe(catalog_get("young"), 4, 1.0, window=(0, 1, -1, 1))
    m = np.array(r.moment)
    # int_eps^1 tau^-2 on both sides of the line: 2 (1/eps - 1)
    assert np.allclose(m, [2 * (1 / e - 1) for e in r.cutoffs], rtol=1e-9)
    assert np.all(m[1:] / m[:-1] >= 10)
    assert r.moment_trend == "diverging"
    assert r.moment_rate == pytest.approx(1.0, abs=0.01)
    assert r.exp_trend == "diverging"
    assert np.all(np.diff(r.exp_moment) > 0)


def test_log_profile_has_every_moment_but_not_the_unit_exponential():
    e = catalog_get("log-sobolev")
    r = integrability_probe(e, 4, 1.0)
    assert r.moment_trend == "bounded"
    # exp(|log tau + 1|) ~ e / tau near zero: logarithmic growth
    assert r.exp_trend == "diverging"
    assert integrability_probe(e, 4, 0.5).exp_trend == "bounded"
