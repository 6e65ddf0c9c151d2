"""Graph area and its first and second variations.

All integrals use the same tensor-product midpoint rule: the region is cut
into cells about one grid spacing wide, every cell is split ``2**refine``
times per axis, and cells next to a declared singular line ``tau = c`` are
graded geometrically toward the line so it is never sampled.  Because the
area and the variation integrals share nodes, finite differences of the
discrete area reproduce the discrete variations up to O(eps**2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, PreconditionError
from .field import GraphFunction, GridSpec

SINGULAR_DEPTH = 4
# mollifier integrands need ~100 nodes per radius to reach 1e-8
VARIATION_REFINE = 4


def _rho(u):
    """Standard mollifier profile ``exp(1 - 1/(1 - u^2))``, zero for ``|u| >= 1``."""
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    s = np.where(inside, 1.0 - u * u, 1.0)
    return np.where(inside, np.exp(1.0 - 1.0 / s), 0.0)


def _drho(u):
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    s = np.where(inside, 1.0 - u * u, 1.0)
    return np.where(inside, np.exp(1.0 - 1.0 / s) * (-2.0 * u / (s * s)), 0.0)


@dataclass(frozen=True)
class TestFunction:
    """Smooth tensor bump ``amplitude * rho((eta-eta0)/r_eta) * rho((tau-tau0)/r_tau)``.

    The same object serves as a probe ``theta(t, zeta)`` in Lagrangian
    coordinates; the first coordinate then plays the role of ``t``.
    """

    __test__ = False  # not a pytest class

    center: tuple
    radii: tuple
    amplitude: float = 1.0

    def __post_init__(self):
        if min(self.radii) <= 0:
            raise ValueError(f"radii must be positive, got {self.radii}")

    def _uv(self, eta, tau):
        return (
            (np.asarray(eta, dtype=float) - self.center[0]) / self.radii[0],
            (np.asarray(tau, dtype=float) - self.center[1]) / self.radii[1],
        )

    def __call__(self, eta, tau):
        u, v = self._uv(eta, tau)
        return self.amplitude * _rho(u) * _rho(v)

    def d_eta(self, eta, tau):
        u, v = self._uv(eta, tau)
        return self.amplitude * _drho(u) * _rho(v) / self.radii[0]

    def d_tau(self, eta, tau):
        u, v = self._uv(eta, tau)
        return self.amplitude * _rho(u) * _drho(v) / self.radii[1]

    def support(self):
        (c0, c1), (r0, r1) = self.center, self.radii
        return (c0 - r0, c0 + r0, c1 - r1, c1 + r1)

    @property
    def sup_norm(self) -> float:
        return abs(self.amplitude)

    def scaled(self, factor: float) -> "TestFunction":
        return TestFunction(self.center, self.radii, self.amplitude * factor)


@dataclass(frozen=True)
class LinearCombination:
    """Finite sum ``sum_k c_k phi_k`` of probes."""

    terms: tuple  # ((coef, probe), ...)

    def __call__(self, eta, tau):
        return sum(c * p(eta, tau) for c, p in self.terms)

    def d_eta(self, eta, tau):
        return sum(c * p.d_eta(eta, tau) for c, p in self.terms)

    def d_tau(self, eta, tau):
        return sum(c * p.d_tau(eta, tau) for c, p in self.terms)

    def support(self):
        boxes = np.array([p.support() for _, p in self.terms])
        return (boxes[:, 0].min(), boxes[:, 1].max(), boxes[:, 2].min(), boxes[:, 3].max())

    @property
    def sup_norm(self) -> float:
        return sum(abs(c) * p.sup_norm for c, p in self.terms)


def random_bumps(rect, n: int, rng: np.random.Generator, radius_range=(0.2, 0.6),
                 amplitude_range=(-1.0, 1.0)):
    """``n`` bumps with support inside ``rect = (eta0, eta1, tau0, tau1)``."""
    e0, e1, t0, t1 = rect
    rmax = min(radius_range[1], 0.499 * (e1 - e0), 0.499 * (t1 - t0))
    rmin = min(radius_range[0], rmax)
    out = []
    for _ in range(n):
        r_eta, r_tau = rng.uniform(rmin, rmax, size=2)
        c_eta = rng.uniform(e0 + r_eta, e1 - r_eta)
        c_tau = rng.uniform(t0 + r_tau, t1 - r_tau)
        amp = rng.uniform(*amplitude_range)
        out.append(TestFunction((float(c_eta), float(c_tau)), (float(r_eta), float(r_tau)),
                                float(amp)))
    return out


@dataclass(frozen=True)
class VariationResult:
    value: float
    quadrature_error_estimate: float
    region: GridSpec

    def __post_init__(self):
        if not self.quadrature_error_estimate >= 0:
            raise ValueError("error estimate must be non-negative")


# -- quadrature ---------------------------------------------------------------

def _axis_edges(lo, hi, h, singular=(), depth=SINGULAR_DEPTH):
    """Cell edges on ``[lo, hi]``: split at singular points, graded toward them."""
    tol = 1e-12 * (1.0 + abs(lo) + abs(hi))
    cuts = sorted({float(lo), float(hi)} | {float(c) for c in singular if lo + tol < c < hi - tol})
    edges = [cuts[0]]
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(np.ceil((b - a) / h - 1e-9)))
        seg = np.linspace(a, b, n + 1)
        inner = list(seg[1:-1])
        near_a = any(abs(a - c) <= tol for c in singular)
        near_b = any(abs(b - c) <= tol for c in singular)
        d = (b - a) / n
        if near_a:
            inner = [a + d * 2.0 ** -k for k in range(depth, 0, -1)] + inner
        if near_b:
            inner = inner + [b - d * 2.0 ** -k for k in range(1, depth + 1)]
        edges.extend(sorted(set(inner)))
        edges.append(b)
    return np.array(edges)


def _midpoints(edges, refine):
    m = 2 ** refine
    frac = (np.arange(m) + 0.5) / m
    widths = np.diff(edges)
    x = (edges[:-1, None] + widths[:, None] * frac[None, :]).ravel()
    w = np.repeat(widths / m, m)
    return x, w


def quadrature_nodes(region, spec: GridSpec, refine: int, singular_tau=()):
    """Flattened midpoint nodes ``(eta, tau, weight)`` covering ``region``."""
    e0, e1, t0, t1 = region
    ee = _axis_edges(e0, e1, spec.h_eta)
    te = _axis_edges(t0, t1, spec.h_tau, singular_tau)
    xe, we = _midpoints(ee, refine)
    xt, wt = _midpoints(te, refine)
    E, T = np.meshgrid(xe, xt, indexing="ij")
    W = np.outer(we, wt)
    return E.ravel(), T.ravel(), W.ravel(), (len(ee), len(te))


def _integrate(integrand, region, spec, refine, singular_tau):
    if refine < 1:
        raise ValueError("refine must be >= 1 to form an error estimate")
    coarse = fine = None
    for r in (refine - 1, refine):
        E, T, W, (ne, nt) = quadrature_nodes(region, spec, r, singular_tau)
        val = float(np.sum(integrand(E, T) * W))
        coarse, fine = fine, val
    err = abs(fine - coarse) / 3.0
    m = 2 ** refine
    grid = GridSpec(region[0], region[1], region[2], region[3],
                    (ne - 1) * m + 1, (nt - 1) * m + 1)
    return fine, err, grid


def _check_region(g: GraphFunction, region, what: str, exc=DomainError):
    if not g.spec.contains_rectangle(region):
        raise exc(f"{what} {tuple(float(x) for x in region)} is not inside the grid "
                  f"rectangle {g.spec.rectangle}")


# -- functionals --------------------------------------------------------------

def _area_integrand(g):
    def integrand(E, T):
        G = g.grad(E, T, check=False)
        return np.sqrt(1.0 + G * G)
    return integrand


def area_with_error(g: GraphFunction, K=None, refine: int = 2):
    K = g.spec.rectangle if K is None else tuple(K)
    _check_region(g, K, "region K")
    return _integrate(_area_integrand(g), K, g.spec, refine, g.singular_tau)


def area(g: GraphFunction, K=None, refine: int = 2) -> float:
    """Sub-Riemannian area ``int_K sqrt(1 + (grad^f f)^2)`` of the graph over ``K``."""
    return area_with_error(g, K, refine)[0]


def _probe_terms(g, phi, E, T):
    fv, fe, ft = g.evaluate(E, T, check=False)
    G = fe + fv * ft
    p = phi(E, T)
    pe = phi.d_eta(E, T)
    pt = phi.d_tau(E, T)
    lin = pe + fv * pt + ft * p  # grad^f phi + (d_tau f) phi
    return G, p, pt, lin


def _support_region(g, phi):
    region = tuple(float(x) for x in phi.support())
    _check_region(g, region, "support of phi", PreconditionError)
    return region


def first_variation(g: GraphFunction, phi, refine: int = VARIATION_REFINE) -> VariationResult:
    """First variation ``d/deps area(f + eps phi)`` at ``eps = 0``.

    Computed as ``int grad^f f / sqrt(1 + (grad^f f)^2) * (grad^f phi + d_tau f phi)``
    over the support box of ``phi``, with ``grad^f phi = d_eta phi + f d_tau phi``.
    """
    region = _support_region(g, phi)

    def integrand(E, T):
        G, _, _, lin = _probe_terms(g, phi, E, T)
        return G / np.sqrt(1.0 + G * G) * lin

    return VariationResult(*_integrate(integrand, region, g.spec, refine, g.singular_tau))


def second_variation(g: GraphFunction, phi, refine: int = VARIATION_REFINE) -> VariationResult:
    """``II_f(phi)``: the second derivative of the area along ``f + eps phi``."""
    region = _support_region(g, phi)

    def integrand(E, T):
        G, p, pt, lin = _probe_terms(g, phi, E, T)
        s = 1.0 + G * G
        return lin * lin / s ** 1.5 + G / np.sqrt(s) * (2.0 * p * pt)

    return VariationResult(*_integrate(integrand, region, g.spec, refine, g.singular_tau))


def perturbed_area(g: GraphFunction, phi, eps: float, refine: int = VARIATION_REFINE) -> float:
    """Area of ``f + eps phi`` over the support box of ``phi``."""
    region = _support_region(g, phi)
    gp = g.perturbed(phi, eps)
    E, T, W, _ = quadrature_nodes(region, g.spec, refine, g.singular_tau)
    return float(np.sum(_area_integrand(gp)(E, T) * W))


def _extrapolate(eps, values):
    """Polynomial extrapolation in ``eps**2`` to ``eps = 0``."""
    eps = np.asarray(eps, dtype=float)
    x = (eps / eps.max()) ** 2
    V = np.vander(x, len(x), increasing=True)
    return float(np.linalg.solve(V, np.asarray(values, dtype=float))[0])


@dataclass
class FDCheck:
    first: float
    second: float
    rows: list = field(default_factory=list)  # (eps, |I - dA|, |II - d2A|)
    first_fd: float = float("nan")
    second_fd: float = float("nan")

    @property
    def first_error(self) -> float:
        return abs(self.first - self.first_fd)

    @property
    def second_error(self) -> float:
        return abs(self.second - self.second_fd)


def variation_fd_check(g: GraphFunction, phi, eps_list: Sequence[float] = (1e-3, 3e-4, 1e-4),
                       refine: int = VARIATION_REFINE) -> FDCheck:
    """Compare I_f and II_f against centered differences of the area.

    The extrapolated difference quotients (in ``eps**2``) are stored in
    ``first_fd`` and ``second_fd``.
    """
    I = first_variation(g, phi, refine).value
    II = second_variation(g, phi, refine).value
    A0 = perturbed_area(g, phi, 0.0, refine)
    d1, d2, rows = [], [], []
    for eps in eps_list:
        ap = perturbed_area(g, phi, eps, refine)
        am = perturbed_area(g, phi, -eps, refine)
        q1 = (ap - am) / (2.0 * eps)
        q2 = (ap - 2.0 * A0 + am) / (eps * eps)
        d1.append(q1)
        d2.append(q2)
        rows.append((float(eps), abs(I - q1), abs(II - q2)))
    check = FDCheck(I, II, rows)
    if len(eps_list) > 1:
        check.first_fd = _extrapolate(eps_list, d1)
        check.second_fd = _extrapolate(eps_list, d2)
    else:
        check.first_fd, check.second_fd = d1[0], d2[0]
    return check


@dataclass(frozen=True)
class PulledBackProbe:
    """Probe ``phi = theta o Psi^{-1}`` built from a Lagrangian-coordinate probe.

    ``inverse`` maps ``(eta, tau) -> zeta`` and ``d_inverse`` returns its
    partials ``(d_eta zeta, d_tau zeta)``; ``theta`` exposes ``d_eta`` and
    ``d_tau`` as its ``t`` and ``zeta`` partials.
    """

    theta: object
    inverse: object
    d_inverse: object
    box: tuple

    def __call__(self, eta, tau):
        return self.theta(eta, self.inverse(eta, tau))

    def d_eta(self, eta, tau):
        z = self.inverse(eta, tau)
        ze, _ = self.d_inverse(eta, tau)
        return self.theta.d_eta(eta, z) + self.theta.d_tau(eta, z) * ze

    def d_tau(self, eta, tau):
        z = self.inverse(eta, tau)
        _, zt = self.d_inverse(eta, tau)
        return self.theta.d_tau(eta, z) * zt

    def support(self):
        return self.box

    @property
    def sup_norm(self) -> float:
        return self.theta.sup_norm
