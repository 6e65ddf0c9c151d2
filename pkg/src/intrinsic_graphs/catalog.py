"""Named example functions with exact partials and declared singular sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import Analytic, GraphFunction, GridSpec, ScalarField, build_graph_function


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    analytic: Analytic
    rectangle: tuple          # default (eta_min, eta_max, tau_min, tau_max)
    bump_window: tuple        # where probes avoid the singular set
    stationary: bool
    note: str

    @property
    def singular_tau(self) -> tuple:
        return self.analytic.singular_tau

    def grid(self, n_eta: int = 65, n_tau: int = 65, rectangle=None) -> GridSpec:
        r = self.rectangle if rectangle is None else rectangle
        return GridSpec(*r, n_eta, n_tau)

    def graph(self, n_eta: int = 65, n_tau: int = 65, rectangle=None) -> GraphFunction:
        spec = self.grid(n_eta, n_tau, rectangle)
        return build_graph_function(ScalarField.from_analytic(spec, self.analytic))


def _plane(a: float, b: float) -> CatalogEntry:
    an = Analytic(
        lambda e, t: a * np.asarray(e, dtype=float) + b + 0.0 * np.asarray(t, dtype=float),
        lambda e, t: a + 0.0 * (np.asarray(e, dtype=float) + np.asarray(t, dtype=float)),
        lambda e, t: 0.0 * (np.asarray(e, dtype=float) + np.asarray(t, dtype=float)),
    )
    return CatalogEntry(
        f"plane:a={a:g},b={b:g}", an, (-2.0, 2.0, -2.0, 2.0), (-1.9, 1.9, -1.9, 1.9), True,
        "f = a*eta + b; its intrinsic graph is the vertical plane {x = a*y + b}.",
    )


def _young_f(e, t):
    t = np.asarray(t, dtype=float)
    return 2.0 * np.sign(t) * np.sqrt(np.abs(t)) + 0.0 * np.asarray(e, dtype=float)


def _young_dt(e, t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return 1.0 / np.sqrt(np.abs(t)) + 0.0 * np.asarray(e, dtype=float)


def _zero(e, t):
    return 0.0 * (np.asarray(e, dtype=float) + np.asarray(t, dtype=float))


def _fan_f(e, t):
    e = np.asarray(e, dtype=float)
    return 2.0 * e * np.asarray(t, dtype=float) / (1.0 + e * e)


def _fan_de(e, t):
    e = np.asarray(e, dtype=float)
    return 2.0 * np.asarray(t, dtype=float) * (1.0 - e * e) / (1.0 + e * e) ** 2


def _fan_dt(e, t):
    e = np.asarray(e, dtype=float)
    return 2.0 * e / (1.0 + e * e) + 0.0 * np.asarray(t, dtype=float)


def _log_f(e, t):
    t = np.asarray(t, dtype=float)
    pos = t > 0
    safe = np.where(pos, t, 1.0)
    return np.where(pos, 1.0 + safe * np.log(safe), 0.0) + 0.0 * np.asarray(e, dtype=float)


def _log_dt(e, t):
    t = np.asarray(t, dtype=float)
    pos = t > 0
    safe = np.where(pos, t, 1.0)
    return np.where(pos, np.log(safe) + 1.0, 0.0) + 0.0 * np.asarray(e, dtype=float)


_FIXED = {
    "young": CatalogEntry(
        "young",
        Analytic(_young_f, _zero, _young_dt, (0.0,)),
        (-2.0, 2.0, -2.0, 2.0), (-1.9, 1.9, 0.5, 1.95), True,
        "f = 2 sgn(tau) sqrt|tau|: an area-minimizing, non-affine graph whose "
        "d_tau f = |tau|^(-1/2) is not in L^4_loc and has no exponential moment. "
        "Written for the group law z + (x y' - x' y)/2; the law z - 2 (x y' - x' y) "
        "is related by (x, y, z) -> (x, y, -z/4).",
    ),
    "hyperbolic-fan": CatalogEntry(
        "hyperbolic-fan",
        Analytic(_fan_f, _fan_de, _fan_dt),
        (-2.0, 2.0, -2.0, 2.0), (-1.9, 1.9, -1.9, 1.9), True,
        "f = 2 eta tau / (1 + eta^2): ruled with a(zeta) = 2 zeta, b = 0, so "
        "chi = zeta (1 + t^2); stationary, smooth, and unstable.",
    ),
    "log-sobolev": CatalogEntry(
        "log-sobolev",
        Analytic(_log_f, _zero, _log_dt, (0.0,)),
        (-1.0, 1.0, -1.0, 1.0), (-0.95, 0.95, 0.1, 0.95), False,
        "f = g(tau) with g = 1 + tau log tau for tau > 0 and 0 otherwise: "
        "g' lies in every L^p_loc but grad^f f = g g' is unbounded near tau = 0.",
    ),
    "sine": CatalogEntry(
        "sine",
        Analytic(lambda e, t: np.sin(np.asarray(t, dtype=float)) + _zero(e, t),
                 _zero,
                 lambda e, t: np.cos(np.asarray(t, dtype=float)) + _zero(e, t)),
        (-2.0, 2.0, -2.0, 2.0), (-1.9, 1.9, -1.9, 1.9), False,
        "f = sin tau: smooth, not stationary, not ruled; a negative control.",
    ),
}


def catalog_names():
    return ["plane:a=<a>,b=<b>"] + sorted(_FIXED)


def catalog_get(name: str) -> CatalogEntry:
    """Look up an entry; ``plane`` takes optional ``:a=..,b=..`` parameters."""
    key = name.strip()
    if key == "plane" or key.startswith("plane:"):
        params = {"a": 0.0, "b": 0.0}
        if ":" in key:
            for part in key.split(":", 1)[1].split(","):
                if not part.strip():
                    continue
                k, _, v = part.partition("=")
                if k.strip() not in params or not v.strip():
                    raise KeyError(f"bad plane parameter {part!r}; use plane:a=<a>,b=<b>")
                params[k.strip()] = float(v)
        return _plane(params["a"], params["b"])
    try:
        return _FIXED[key]
    except KeyError:
        raise KeyError(
            f"unknown catalog entry {name!r}; available: {', '.join(catalog_names())}"
        ) from None
