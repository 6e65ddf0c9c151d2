"""Scalar fields on rectangles of the (eta, tau) plane and their intrinsic calculus.

A field ``f`` describes the intrinsic graph
``{(f(eta, tau), eta, tau - eta * f(eta, tau) / 2)}`` in the first Heisenberg
group.  The vector field ``d_eta + f d_tau`` acting on ``f`` itself gives the
intrinsic gradient, a Burgers-type derivative that drives every other module.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NonFiniteError

_SLACK = 1e-12


@dataclass(frozen=True)
class GridSpec:
    eta_min: float
    eta_max: float
    tau_min: float
    tau_max: float
    n_eta: int
    n_tau: int

    def __post_init__(self):
        if not self.eta_min < self.eta_max:
            raise ValueError(f"eta_min={self.eta_min} must be < eta_max={self.eta_max}")
        if not self.tau_min < self.tau_max:
            raise ValueError(f"tau_min={self.tau_min} must be < tau_max={self.tau_max}")
        if self.n_eta < 2 or self.n_tau < 2:
            raise ValueError("need at least two samples per axis")

    @property
    def h_eta(self) -> float:
        return (self.eta_max - self.eta_min) / (self.n_eta - 1)

    @property
    def h_tau(self) -> float:
        return (self.tau_max - self.tau_min) / (self.n_tau - 1)

    @property
    def etas(self) -> np.ndarray:
        return np.linspace(self.eta_min, self.eta_max, self.n_eta)

    @property
    def taus(self) -> np.ndarray:
        return np.linspace(self.tau_min, self.tau_max, self.n_tau)

    @property
    def rectangle(self):
        return (self.eta_min, self.eta_max, self.tau_min, self.tau_max)

    def mesh(self):
        return np.meshgrid(self.etas, self.taus, indexing="ij")

    def contains(self, eta, tau) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        tau = np.asarray(tau, dtype=float)
        return (
            (eta >= self.eta_min - _SLACK)
            & (eta <= self.eta_max + _SLACK)
            & (tau >= self.tau_min - _SLACK)
            & (tau <= self.tau_max + _SLACK)
        )

    def contains_rectangle(self, rect) -> bool:
        e0, e1, t0, t1 = rect
        return bool(self.contains(e0, t0) and self.contains(e1, t1))

    def with_resolution(self, n_eta: int, n_tau: int) -> "GridSpec":
        return GridSpec(self.eta_min, self.eta_max, self.tau_min, self.tau_max, n_eta, n_tau)


@dataclass(frozen=True)
class Analytic:
    """Closed-form evaluator for f, with optional exact partials.

    All callables take broadcastable ``(eta, tau)`` arrays.  ``singular_tau``
    lists horizontal lines ``tau = c`` on which the partials do not exist.
    """

    f: Callable
    d_eta: Optional[Callable] = None
    d_tau: Optional[Callable] = None
    singular_tau: tuple = ()

    @property
    def has_partials(self) -> bool:
        return self.d_eta is not None and self.d_tau is not None


class ScalarField:
    """Node samples of a function over a :class:`GridSpec`.

    ``source`` is ``"analytic"`` when an evaluator backs the samples and
    ``"sampled"`` otherwise; sampled fields are interpolated bilinearly.
    """

    def __init__(self, spec: GridSpec, values, analytic: Optional[Analytic] = None):
        values = np.array(values, dtype=float)
        if values.shape != (spec.n_eta, spec.n_tau):
            raise ValueError(
                f"values shape {values.shape} does not match grid ({spec.n_eta}, {spec.n_tau})"
            )
        values.setflags(write=False)
        self.spec = spec
        self.values = values
        self.analytic = analytic

    @classmethod
    def from_analytic(cls, spec: GridSpec, analytic: Analytic) -> "ScalarField":
        E, T = spec.mesh()
        with np.errstate(all="ignore"):
            vals = np.broadcast_to(analytic.f(E, T), E.shape)
        return cls(spec, vals, analytic)

    @classmethod
    def from_function(cls, spec: GridSpec, func: Callable, d_eta=None, d_tau=None,
                      singular_tau=()) -> "ScalarField":
        return cls.from_analytic(spec, Analytic(func, d_eta, d_tau, tuple(singular_tau)))

    @property
    def source(self) -> str:
        return "sampled" if self.analytic is None else "analytic"

    def __call__(self, eta, tau):
        if self.analytic is not None:
            return self.analytic.f(eta, tau)
        return bilinear(self.spec, self.values, eta, tau)

    def dump_csv(self, path) -> None:
        """Write ``eta,tau,value`` rows, row-major by eta then tau."""
        spec = self.spec
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eta", "tau", "value"])
            for i, eta in enumerate(spec.etas):
                for j, tau in enumerate(spec.taus):
                    w.writerow([f"{eta:.17g}", f"{tau:.17g}", f"{self.values[i, j]:.17g}"])

    @classmethod
    def load_csv(cls, path) -> "ScalarField":
        """Read a grid dump written by :meth:`dump_csv`."""
        with open(Path(path), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["eta", "tau", "value"]:
                raise ValueError(f"{path}: expected header eta,tau,value, got {header}")
            rows = np.array([[float(x) for x in row] for row in reader if row])
        etas = np.unique(rows[:, 0])
        taus = np.unique(rows[:, 1])
        if len(etas) * len(taus) != len(rows):
            raise ValueError(f"{path}: rows do not form a tensor grid")
        spec = GridSpec(etas[0], etas[-1], taus[0], taus[-1], len(etas), len(taus))
        order = np.lexsort((rows[:, 1], rows[:, 0]))
        values = rows[order, 2].reshape(len(etas), len(taus))
        if not np.allclose(etas, spec.etas, rtol=0, atol=1e-9 * (1 + np.abs(etas).max())):
            raise ValueError(f"{path}: eta samples are not uniformly spaced")
        if not np.allclose(taus, spec.taus, rtol=0, atol=1e-9 * (1 + np.abs(taus).max())):
            raise ValueError(f"{path}: tau samples are not uniformly spaced")
        return cls(spec, values)


def bilinear(spec: GridSpec, values: np.ndarray, eta, tau):
    """Bilinear interpolation of node values; points are clamped to the grid."""
    eta = np.asarray(eta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    x = np.clip((eta - spec.eta_min) / spec.h_eta, 0.0, spec.n_eta - 1)
    y = np.clip((tau - spec.tau_min) / spec.h_tau, 0.0, spec.n_tau - 1)
    i = np.minimum(np.floor(x).astype(int), spec.n_eta - 2)
    j = np.minimum(np.floor(y).astype(int), spec.n_tau - 2)
    u = x - i
    v = y - j
    return (
        (1 - u) * (1 - v) * values[i, j]
        + u * (1 - v) * values[i + 1, j]
        + (1 - u) * v * values[i, j + 1]
        + u * v * values[i + 1, j + 1]
    )


@dataclass(frozen=True)
class GraphFunction:
    """A field f together with d_eta f, d_tau f and the intrinsic gradient."""

    f: ScalarField
    d_eta: ScalarField
    d_tau: ScalarField
    intrinsic_grad: ScalarField
    singular_tau: tuple = field(default=())

    @property
    def spec(self) -> GridSpec:
        return self.f.spec

    def _check(self, eta, tau):
        e, t = np.broadcast_arrays(np.atleast_1d(eta), np.atleast_1d(tau))
        inside = self.spec.contains(e, t)
        if not inside.all():
            k = int(np.argmin(inside.ravel()))
            raise DomainError(
                f"point (eta={e.ravel()[k]:.6g}, tau={t.ravel()[k]:.6g}) lies outside "
                f"the grid rectangle {self.spec.rectangle}"
            )

    def evaluate(self, eta, tau, check: bool = True):
        """Return ``(f, d_eta f, d_tau f)`` at arbitrary points.

        Analytic fields use their evaluator (exact partials when supplied);
        sampled quantities are interpolated bilinearly.  With ``check=False``
        out-of-rectangle points are allowed (analytic) or clamped (sampled).
        """
        if check:
            self._check(eta, tau)
        an = self.f.analytic
        with np.errstate(all="ignore"):
            if an is not None:
                fv = an.f(eta, tau)
                if an.has_partials:
                    return fv, an.d_eta(eta, tau), an.d_tau(eta, tau)
            else:
                fv = bilinear(self.spec, self.f.values, eta, tau)
            fe = bilinear(self.spec, self.d_eta.values, eta, tau)
            ft = bilinear(self.spec, self.d_tau.values, eta, tau)
        return fv, fe, ft

    def value(self, eta, tau, check: bool = True):
        if check:
            self._check(eta, tau)
        return self.f(eta, tau)

    def grad(self, eta, tau, check: bool = True):
        """Intrinsic gradient ``d_eta f + f d_tau f`` at arbitrary points."""
        fv, fe, ft = self.evaluate(eta, tau, check)
        return fe + fv * ft

    def perturbed(self, phi, eps: float) -> "GraphFunction":
        """The graph function of ``f + eps * phi`` with exact probe partials."""
        base = self

        def f(eta, tau):
            return base.evaluate(eta, tau, check=False)[0] + eps * phi(eta, tau)

        def d_eta(eta, tau):
            return base.evaluate(eta, tau, check=False)[1] + eps * phi.d_eta(eta, tau)

        def d_tau(eta, tau):
            return base.evaluate(eta, tau, check=False)[2] + eps * phi.d_tau(eta, tau)

        an = Analytic(f, d_eta, d_tau, self.singular_tau)
        return build_graph_function(ScalarField.from_analytic(self.spec, an), self.singular_tau)


def _singular_mask(spec: GridSpec, singular_tau) -> np.ndarray:
    mask = np.zeros((spec.n_eta, spec.n_tau), dtype=bool)
    taus = spec.taus
    for c in singular_tau:
        mask[:, np.abs(taus - c) <= 1e-12 * (1 + abs(c))] = True
    return mask


def build_graph_function(f: ScalarField, singular_tau=None) -> GraphFunction:
    """Attach partials and the intrinsic gradient to ``f``.

    Partials come from the analytic evaluator when it supplies them and from
    second-order central differences (one-sided at the boundary) otherwise.
    Nodes on a declared singular line ``tau = c`` carry NaN partials.
    """
    spec = f.spec
    if singular_tau is None:
        singular_tau = f.analytic.singular_tau if f.analytic is not None else ()
    singular_tau = tuple(float(c) for c in singular_tau)

    bad = ~np.isfinite(f.values)
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        raise NonFiniteError(
            f"non-finite value {f.values[i, j]} at node ({i}, {j}) "
            f"= (eta={spec.etas[i]:.6g}, tau={spec.taus[j]:.6g})",
            node=(i, j),
        )

    an = f.analytic
    if an is not None and an.has_partials:
        E, T = spec.mesh()
        with np.errstate(all="ignore"):
            fe = np.array(np.broadcast_to(an.d_eta(E, T), E.shape), dtype=float)
            ft = np.array(np.broadcast_to(an.d_tau(E, T), E.shape), dtype=float)
    else:
        fe = np.gradient(f.values, spec.h_eta, axis=0, edge_order=2)
        ft = np.gradient(f.values, spec.h_tau, axis=1, edge_order=2)

    sing = _singular_mask(spec, singular_tau)
    fe[sing] = np.nan
    ft[sing] = np.nan
    for arr, name in ((fe, "d_eta f"), (ft, "d_tau f")):
        bad = ~np.isfinite(arr) & ~sing
        if bad.any():
            i, j = map(int, np.argwhere(bad)[0])
            raise NonFiniteError(
                f"non-finite {name} at node ({i}, {j}) "
                f"= (eta={spec.etas[i]:.6g}, tau={spec.taus[j]:.6g})",
                node=(i, j),
            )

    grad = fe + f.values * ft
    # the nodewise identity is the definition; keep it exact
    assert np.array_equal(grad[~sing], (fe + f.values * ft)[~sing])
    return GraphFunction(
        f,
        ScalarField(spec, fe),
        ScalarField(spec, ft),
        ScalarField(spec, grad),
        singular_tau,
    )


def graph_embed(g: GraphFunction, eta: float, tau: float):
    """Point of the intrinsic graph over ``(eta, tau)``: ``(f, eta, tau - eta f / 2)``."""
    fv = float(g.value(eta, tau))
    return (fv, float(eta), float(tau) - 0.5 * float(eta) * fv)


def plane_fit(g: GraphFunction):
    """Least-squares fit ``f ~ a eta + b`` over the grid.

    Returns ``(a, b, residual)`` with ``residual`` the largest nodewise
    deviation; it vanishes exactly when the graph is a vertical plane.
    """
    E, _ = g.spec.mesh()
    vals = g.f.values
    design = np.column_stack([E.ravel(), np.ones(E.size)])
    (a, b), *_ = np.linalg.lstsq(design, vals.ravel(), rcond=None)
    residual = float(np.max(np.abs(vals - (a * E + b))))
    return float(a), float(b), residual
