"""Characteristic (Lagrangian) coordinates of a graph function.

The map ``Psi(t, zeta) = (t, chi(t, zeta))`` with ``d_t chi = f(t, chi)`` and
``chi(eta0, zeta) = zeta`` straightens the vector field ``d_eta + f d_tau``.
For stationary ``f`` every characteristic is a parabola
``chi = a(zeta) s^2 / 2 + b(zeta) s + zeta`` (``s = t - eta0``), which lifts to a
horizontal straight line on the graph.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import RegularGridInterpolator

from .errors import ConditioningError, FlowCrossingError, NumericalError, PreconditionError
from .field import GraphFunction, bilinear
from .variation import VARIATION_REFINE, PulledBackProbe, _axis_edges, _midpoints


@dataclass(frozen=True)
class LagrangianFlow:
    """Sampled characteristics; rows index ``t_grid``, columns ``zeta_grid``.

    Samples after a trajectory leaves the rectangle (or meets a singular
    line) are NaN and the trajectory is marked in ``short``.
    """

    eta0: float
    zeta_grid: np.ndarray
    t_grid: np.ndarray
    chi: np.ndarray
    dchi_dt: np.ndarray
    d2chi_dt2: np.ndarray
    dchi_dzeta: np.ndarray
    ode_tolerance: float
    short: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.chi)

    @property
    def i0(self) -> int:
        return int(np.argmin(np.abs(self.t_grid - self.eta0)))

    def dump_csv(self, path) -> None:
        """Write ``t,zeta,chi,dchi_dt,d2chi_dt2`` for every valid sample."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "zeta", "chi", "dchi_dt", "d2chi_dt2"])
            for j, z in enumerate(self.zeta_grid):
                for i, t in enumerate(self.t_grid):
                    if np.isfinite(self.chi[i, j]):
                        w.writerow([f"{x:.17g}" for x in (t, z, self.chi[i, j],
                                                          self.dchi_dt[i, j],
                                                          self.d2chi_dt2[i, j])])


@dataclass(frozen=True)
class RulingProfile:
    zeta_grid: np.ndarray
    a: np.ndarray
    b: np.ndarray
    da: np.ndarray
    db: np.ndarray

    def __post_init__(self):
        n = len(self.zeta_grid)
        if not all(len(v) == n for v in (self.a, self.b, self.da, self.db)):
            raise ValueError("ruling arrays must share the zeta grid length")

    def rows(self):
        return [(float(z), float(a), float(b), float(da), float(db))
                for z, a, b, da, db in zip(self.zeta_grid, self.a, self.b, self.da, self.db)]

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["zeta", "a", "b", "da", "db"])
            for row in self.rows():
                w.writerow([f"{x:.17g}" for x in row])


def _d(values, coords, axis):
    if len(coords) < 3:
        return np.gradient(values, coords, axis=axis)
    return np.gradient(values, coords, axis=axis, edge_order=2)


def _t_grid(eta0, t_span, n_t):
    if len(t_span) == 2 and n_t is not None:
        t0, t1 = float(t_span[0]), float(t_span[1])
        if not t0 <= eta0 <= t1:
            raise PreconditionError(f"eta0={eta0} must lie in t_span [{t0}, {t1}]")
        h = (t1 - t0) / max(n_t - 1, 1)
        left = np.linspace(t0, eta0, max(int(round((eta0 - t0) / h)), 0) + 1)
        right = np.linspace(eta0, t1, max(int(round((t1 - eta0) / h)), 0) + 1)
        return np.concatenate([left[:-1], right])
    grid = np.unique(np.asarray(t_span, dtype=float))
    if not np.any(np.abs(grid - eta0) <= 1e-12 * (1 + abs(eta0))):
        raise PreconditionError("an explicit t grid must contain eta0")
    return grid


def _rhs(g: GraphFunction):
    an = g.f.analytic
    if an is not None:
        return lambda t, y: an.f(t, y)
    return lambda t, y: bilinear(g.spec, g.f.values, t, y)


def _events(g: GraphFunction, zeta, tol):
    spec = g.spec
    pad = 1e-10 * (1.0 + abs(spec.tau_min) + abs(spec.tau_max))
    evs = []
    # boundary events sit just outside the rectangle so a trajectory ending
    # exactly on it is not a (degenerate) event
    bounds = [spec.tau_min - pad, spec.tau_max + pad]
    # singular lines are met tangentially when f vanishes there (sqrt-type
    # profiles) and the solver stalls within about atol of them, so stop
    # short of them on the starting side
    for c in g.singular_tau:
        if abs(zeta - c) <= 1e-14:
            continue
        gap = min(10.0 * tol * (1.0 + abs(c)), 0.5 * abs(zeta - c))
        bounds.append(c + np.sign(zeta - c) * gap)
    for c in bounds:

        def ev(t, y, c=c):
            return y[0] - c

        ev.terminal = True
        evs.append(ev)
    return evs


def integrate_flow(g: GraphFunction, eta0: float, zeta_grid, t_span, tol: float = 1e-9,
                   n_t: int | None = 201) -> LagrangianFlow:
    """Integrate ``d_t chi = f(t, chi)``, ``chi(eta0, zeta) = zeta`` for each zeta.

    ``t_span`` is either ``(t0, t1)`` (sampled with about ``n_t`` points,
    always including ``eta0``) or an explicit sorted grid containing ``eta0``.
    Each trajectory is integrated with an adaptive Dormand-Prince 5(4) pair
    at ``rtol = atol = tol`` and truncated where it leaves the rectangle or
    meets a singular line.  Raises :class:`FlowCrossingError` when two
    characteristics cross.
    """
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    spec = g.spec
    zeta_grid = np.asarray(zeta_grid, dtype=float)
    if np.any(np.diff(zeta_grid) <= 0):
        raise PreconditionError("zeta_grid must be strictly increasing")
    if not np.all(spec.contains(eta0, zeta_grid)):
        raise PreconditionError(
            f"base points (eta0={eta0}, zeta) must lie in the rectangle {spec.rectangle}")
    t_grid = _t_grid(float(eta0), t_span, n_t)
    i0 = int(np.argmin(np.abs(t_grid - eta0)))
    t_lo = max(t_grid[0], spec.eta_min)
    t_hi = min(t_grid[-1], spec.eta_max)

    rhs = _rhs(g)
    chi = np.full((len(t_grid), len(zeta_grid)), np.nan)
    short = np.zeros(len(zeta_grid), dtype=bool)
    for j, z in enumerate(zeta_grid):
        chi[i0, j] = z
        events = _events(g, z, tol)
        on_singular = any(abs(z - c) <= 1e-14 for c in g.singular_tau)
        for idx, end in ((np.arange(i0 + 1, len(t_grid)), t_hi),
                         (np.arange(i0 - 1, -1, -1), t_lo)):
            if len(idx) == 0:
                continue
            want = idx[(t_grid[idx] <= t_hi + 1e-12) & (t_grid[idx] >= t_lo - 1e-12)]
            if on_singular or len(want) == 0 or end == eta0:
                short[j] = True
                continue
            sol = solve_ivp(rhs, (eta0, end), [z], method="RK45", rtol=tol, atol=tol,
                            t_eval=np.clip(t_grid[want], min(eta0, end), max(eta0, end)),
                            events=events)
            if sol.status == -1:
                raise NumericalError(f"flow integration failed at zeta={z}: {sol.message}")
            got = len(sol.t)
            if got:
                chi[want[:got], j] = np.asarray(sol.y)[0]
            if got < len(idx):
                short[j] = True

    # monotonicity in zeta at every t
    for i, t in enumerate(t_grid):
        row = chi[i]
        ok = np.isfinite(row[:-1]) & np.isfinite(row[1:])
        if not ok.any():
            continue
        gap = np.diff(row)
        scale = 10.0 * tol * (1.0 + np.nanmax(np.abs(row)))
        bad = ok & (gap < -scale)
        if bad.any():
            k = int(np.argmax(bad))
            raise FlowCrossingError(float(t), float(zeta_grid[k]), float(zeta_grid[k + 1]),
                                    float(gap[k]))

    T = np.broadcast_to(t_grid[:, None], chi.shape)
    valid = np.isfinite(chi)
    dchi_dt = np.full_like(chi, np.nan)
    d2chi = np.full_like(chi, np.nan)
    if valid.any():
        fv, fe, ft = g.evaluate(T[valid], chi[valid], check=False)
        dchi_dt[valid] = fv
        d2chi[valid] = fe + fv * ft
    dchi_dzeta = _d(chi, zeta_grid, axis=1) if len(zeta_grid) > 1 else np.ones_like(chi)
    return LagrangianFlow(float(eta0), zeta_grid, t_grid, chi, dchi_dt, d2chi, dchi_dzeta,
                          float(tol), short)


def trace_characteristic(g: GraphFunction, eta0: float, zeta: float, t: float,
                         tol: float = 1e-10) -> float:
    """``chi(t, zeta)`` for a single characteristic, without domain clipping."""
    if t == eta0:
        return float(zeta)
    sol = solve_ivp(_rhs(g), (eta0, t), [zeta], method="RK45", rtol=tol, atol=tol)
    if sol.status != 0:
        raise NumericalError(f"characteristic from zeta={zeta} failed: {sol.message}")
    return float(sol.y[0, -1])


def conjugation_residual(flow: LagrangianFlow, g: GraphFunction):
    """Residuals of ``d_t^2 chi = grad^f f o Psi`` and
    ``d_zeta d_t chi = (d_tau f o Psi) d_zeta chi``.

    The left-hand sides are difference quotients of the stored ``d_t chi``
    in ``t`` and in ``zeta``; NaN samples are skipped.
    """
    dtt = _d(flow.dchi_dt, flow.t_grid, axis=0)
    res1 = np.abs(dtt - flow.d2chi_dt2)
    T = np.broadcast_to(flow.t_grid[:, None], flow.chi.shape)
    valid = flow.valid
    ft = np.full_like(flow.chi, np.nan)
    if valid.any():
        ft[valid] = g.evaluate(T[valid], flow.chi[valid], check=False)[2]
    dzt = _d(flow.dchi_dt, flow.zeta_grid, axis=1)
    res2 = np.abs(dzt - ft * flow.dchi_dzeta)
    return _nanmax(res1), _nanmax(res2)


def _nanmax(a) -> float:
    a = np.asarray(a)
    fin = a[np.isfinite(a)]
    return float(fin.max()) if fin.size else float("nan")


def extract_ruling(flow: LagrangianFlow, g: GraphFunction) -> RulingProfile:
    """``a(zeta) = grad^f f(eta0, zeta)``, ``b(zeta) = f(eta0, zeta)`` and their
    central difference quotients."""
    z = flow.zeta_grid
    e = np.full_like(z, flow.eta0)
    fv, fe, ft = g.evaluate(e, z)
    a = np.asarray(fe + fv * ft, dtype=float)
    b = np.asarray(fv, dtype=float)
    if len(z) > 1:
        da, db = _d(a, z, 0), _d(b, z, 0)
    else:
        da, db = np.zeros(1), np.zeros(1)
    return RulingProfile(z, a, b, da, db)


def _chi_at(flow: LagrangianFlow, t: float) -> np.ndarray:
    tg = flow.t_grid
    k = int(np.argmin(np.abs(tg - t)))
    if abs(tg[k] - t) <= 1e-12 * (1 + abs(t)):
        return flow.chi[k].copy()
    # local three-point Lagrange interpolation; exact on quadratic rulings
    k = min(max(k, 1), len(tg) - 2)
    x = tg[k - 1:k + 2]
    out = np.zeros(flow.chi.shape[1])
    for m in range(3):
        others = [x[n] for n in range(3) if n != m]
        w = (t - others[0]) * (t - others[1]) / ((x[m] - others[0]) * (x[m] - others[1]))
        out += w * flow.chi[k - 1 + m]
    return out


def vandermonde_matrix_inverse(s1: float, s2: float, s3: float) -> np.ndarray:
    """Closed-form inverse of ``[[s_j^2/2, s_j, 1]]_{j=1..3}``."""
    d1 = s1 * s1 - s1 * s2 - s1 * s3 + s2 * s3
    d2 = s1 * s2 - s1 * s3 - s2 * s2 + s2 * s3
    d3 = s1 * s2 - s1 * s3 - s2 * s3 + s3 * s3
    return np.array([
        [2.0 / d1, -2.0 / d2, 2.0 / d3],
        [(-s2 - s3) / d1, (s1 + s3) / d2, (-s1 - s2) / d3],
        [s2 * s3 / d1, -s1 * s3 / d2, s1 * s2 / d3],
    ])


def vandermonde_extract(flow: LagrangianFlow, t1: float, t2: float, t3: float):
    """Recover ``(a, b, c)`` with ``chi(t_j) = a s_j^2/2 + b s_j + c`` from three times."""
    ts = np.array([t1, t2, t3], dtype=float)
    lo, hi = flow.t_grid[0], flow.t_grid[-1]
    span = hi - lo
    if np.any(ts < lo - 1e-12) or np.any(ts > hi + 1e-12):
        raise PreconditionError(f"times {ts} must lie in the sampled range [{lo}, {hi}]")
    gaps = np.abs(ts[:, None] - ts[None, :])[np.triu_indices(3, 1)]
    if gaps.min() < 1e-6 * span:
        raise ConditioningError(
            f"sample times {tuple(ts)} are nearly coincident (gap {gaps.min():.3e})")
    s = ts - flow.eta0
    inv = vandermonde_matrix_inverse(*s)
    rhs = np.vstack([_chi_at(flow, t) for t in ts])
    a, b, c = inv @ rhs
    return a, b, c


def ruling_residual(flow: LagrangianFlow, profile: RulingProfile) -> float:
    """``sup |chi - (a s^2/2 + b s + zeta)|`` over all valid samples."""
    if len(profile.zeta_grid) != len(flow.zeta_grid) or not np.allclose(
            profile.zeta_grid, flow.zeta_grid, rtol=0, atol=1e-12):
        raise PreconditionError("profile and flow must share the zeta grid")
    s = (flow.t_grid - flow.eta0)[:, None]
    model = profile.a[None, :] * s * s / 2 + profile.b[None, :] * s + flow.zeta_grid[None, :]
    return _nanmax(np.abs(flow.chi - model))


def closed_form_inverse(g: GraphFunction, eta0: float = 0.0, check: bool = True):
    """``(eta, tau) -> (eta, tau + grad^f f (eta-eta0)^2 / 2 - f (eta-eta0))``.

    This inverts the global quadratic flow of a stationary ``f``.
    """
    def inverse(eta, tau):
        fv, fe, ft = g.evaluate(eta, tau, check)
        s = np.asarray(eta, dtype=float) - eta0
        return eta, tau + (fe + fv * ft) * s * s / 2 - fv * s

    return inverse


def forward_map(g: GraphFunction, eta0: float = 0.0):
    """``(t, zeta) -> (t, a(zeta) s^2/2 + b(zeta) s + zeta)`` from the base line ``eta0``."""
    def forward(t, zeta):
        fv, fe, ft = g.evaluate(np.full_like(np.asarray(zeta, dtype=float), eta0), zeta,
                                check=False)
        s = np.asarray(t, dtype=float) - eta0
        return t, (fe + fv * ft) * s * s / 2 + fv * s + zeta

    return forward


def horizontal_lift_straightness(g: GraphFunction, flow: LagrangianFlow) -> float:
    """Largest distance of lifted characteristic points from the chord through
    the first and last lifted point of the same characteristic."""
    worst = 0.0
    for j in range(len(flow.zeta_grid)):
        rows = np.flatnonzero(flow.valid[:, j])
        if len(rows) < 3:
            continue
        t = flow.t_grid[rows]
        chi = flow.chi[rows, j]
        fv = np.asarray(g.value(t, chi, check=False), dtype=float)
        P = np.column_stack([fv, t, chi - 0.5 * t * fv])
        d = P[-1] - P[0]
        u = d / np.linalg.norm(d)
        rel = P - P[0]
        perp = rel - np.outer(rel @ u, u)
        worst = max(worst, float(np.linalg.norm(perp, axis=1).max()))
    return worst


def stationarity_lagrangian_residual(flow: LagrangianFlow, theta_set,
                                     refine: int = VARIATION_REFINE) -> float:
    """``max_theta |int d_t^2 chi / sqrt(1 + (d_t^2 chi)^2) d_t theta dt dzeta|``."""
    tg, zg = flow.t_grid, flow.zeta_grid
    interp = RegularGridInterpolator((tg, zg), flow.d2chi_dt2, method="linear")
    ht = float(np.min(np.diff(tg)))
    hz = float(np.min(np.diff(zg)))
    worst = 0.0
    for theta in theta_set:
        t0, t1, z0, z1 = theta.support()
        if t0 < tg[0] - 1e-12 or t1 > tg[-1] + 1e-12 or z0 < zg[0] - 1e-12 or z1 > zg[-1] + 1e-12:
            raise PreconditionError(
                f"theta support {theta.support()} escapes the flow window "
                f"[{tg[0]}, {tg[-1]}] x [{zg[0]}, {zg[-1]}]")
        rows = (tg >= t0 - ht) & (tg <= t1 + ht)
        cols = (zg >= z0 - hz) & (zg <= z1 + hz)
        if not np.all(np.isfinite(flow.d2chi_dt2[np.ix_(rows, cols)])):
            raise PreconditionError("flow is truncated inside the support of theta")
        xt, wt = _midpoints(_axis_edges(t0, t1, ht), refine)
        xz, wz = _midpoints(_axis_edges(z0, z1, hz), refine)
        T, Z = np.meshgrid(xt, xz, indexing="ij")
        acc = interp(np.column_stack([T.ravel(), Z.ravel()])).reshape(T.shape)
        val = np.sum(acc / np.sqrt(1.0 + acc * acc) * theta.d_eta(T, Z) * np.outer(wt, wz))
        worst = max(worst, abs(float(val)))
    return worst


def pull_back(theta, g: GraphFunction, eta0: float = 0.0, step: float = 1e-6) -> PulledBackProbe:
    """The probe ``theta o Psi^{-1}`` on the (eta, tau) plane for a stationary ``f``.

    ``theta`` is a probe in ``(t, zeta)``; ``Psi`` is the global quadratic
    flow and its inverse the closed form above.  Partials of the inverse use
    centered differences with the given step.
    """
    inv = closed_form_inverse(g, eta0, check=False)
    fwd = forward_map(g, eta0)

    def zeta_of(eta, tau):
        return inv(eta, tau)[1]

    def d_zeta(eta, tau):
        ze = (zeta_of(eta + step, tau) - zeta_of(eta - step, tau)) / (2 * step)
        zt = (zeta_of(eta, tau + step) - zeta_of(eta, tau - step)) / (2 * step)
        return ze, zt

    t0, t1, z0, z1 = theta.support()
    T, Z = np.meshgrid(np.linspace(t0, t1, 81), np.linspace(z0, z1, 81), indexing="ij")
    _, tau = fwd(T, Z)
    pad = 1e-9 * (1 + np.abs(tau).max())
    box = (float(t0), float(t1), float(tau.min() - pad), float(tau.max() + pad))
    return PulledBackProbe(theta, zeta_of, d_zeta, box)
