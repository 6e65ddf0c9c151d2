"""Second-variation stability of ruled graphs in characteristic coordinates.

For a ruling ``a(zeta), b(zeta)`` the second variation pulled back to
``(t, zeta)`` is the quadratic form

    Q[theta] = int int theta_t^2 h w - theta^2 (2 a' - b'^2) w / h

with ``h = a' t^2/2 + b' t + 1`` and ``w = (1 + a^2)^(-3/2)``.  A negative
eigenvalue of ``Q`` against the L2 mass is a certificate of instability.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import AssemblyError, DomainError, NumericalError, PreconditionError
from .field import GraphFunction
from .lagrangian import RulingProfile, extract_ruling, integrate_flow, ruling_residual

UNSTABLE_THRESHOLD = -1e-10

# three-point Gauss-Legendre on [0, 1]
_GX = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GW = np.array([5.0, 8.0, 5.0]) / 18.0


@dataclass(frozen=True)
class PairVerdict:
    passed: bool
    worst_pair: tuple | None      # (zeta1, zeta2) of the largest violation margin
    margin: float                 # (db^2 - 1e-9) - 2 da dzeta at the worst pair
    n_pairs: int


def discriminant_pairs(profile: RulingProfile, max_pairs: int = 10**6) -> PairVerdict:
    """Check ``(da, db) = 0`` or ``2 da dzeta > db^2 - 1e-9`` over sample pairs."""
    z, a, b = (np.asarray(v, dtype=float) for v in (profile.zeta_grid, profile.a, profile.b))
    n = len(z)
    idx = np.arange(n)
    if n * (n - 1) // 2 > max_pairs:
        m = int((1 + np.sqrt(1 + 8 * max_pairs)) / 2)
        idx = np.unique(np.linspace(0, n - 1, m).round().astype(int))
    i, j = np.triu_indices(len(idx), 1)
    i, j = idx[i], idx[j]
    dz, da, db = z[j] - z[i], a[j] - a[i], b[j] - b[i]
    equal = np.abs(da) + np.abs(db) < 1e-10
    margin = (db * db - 1e-9) - 2.0 * da * dz
    margin = np.where(equal, -np.inf, margin)
    if len(margin) == 0:
        return PairVerdict(True, None, -np.inf, 0)
    k = int(np.argmax(margin))
    bad = margin[k] >= 0
    return PairVerdict(not bad, (float(z[i[k]]), float(z[j[k]])), float(margin[k]), len(margin))


@dataclass(frozen=True)
class PointVerdict:
    passed: bool
    worst_zeta: float | None
    margin: float                 # b'^2 - 1e-8 - 2 a' at the worst sample


def pointwise_discriminant(profile: RulingProfile) -> PointVerdict:
    da, db = np.asarray(profile.da, dtype=float), np.asarray(profile.db, dtype=float)
    zero = np.abs(da) + np.abs(db) < 1e-8
    margin = np.where(zero, -np.inf, db * db - 1e-8 - 2.0 * da)
    if len(margin) == 0:
        return PointVerdict(True, None, -np.inf)
    k = int(np.argmax(margin))
    return PointVerdict(bool(margin[k] < 0), float(profile.zeta_grid[k]), float(margin[k]))


def jacobian_positivity(a_prime: float, b_prime: float, window=None) -> bool:
    """Whether ``a' t^2/2 + b' t + 1 > 0`` on the real line, or on ``window=(t0, t1)``."""
    if window is not None:
        t0, t1 = map(float, window)
        cand = [t0, t1]
        if a_prime != 0:
            v = -b_prime / a_prime
            if t0 < v < t1:
                cand.append(v)
        return all(a_prime * t * t / 2 + b_prime * t + 1 > 0 for t in cand)
    if a_prime == 0:
        return b_prime == 0
    return a_prime > 0 and b_prime * b_prime < 2 * a_prime


@dataclass(frozen=True)
class DiscreteForm:
    t_grid: np.ndarray
    zeta_grid: np.ndarray
    weight_h: np.ndarray          # h at the nodes, (n_t, n_zeta)
    weight_w: np.ndarray          # w at the nodes
    stiffness: sp.csr_matrix      # int theta_t^2 h w
    potential: sp.csr_matrix      # int theta^2 (2a' - b'^2) w / h
    mass: sp.csr_matrix
    potential_bound: float        # max |(2a' - b'^2) w / h| over quadrature points

    @property
    def Q(self) -> sp.csr_matrix:
        return (self.stiffness - self.potential).tocsr()

    @property
    def interior_shape(self) -> tuple:
        return len(self.t_grid) - 2, len(self.zeta_grid) - 2


def _profile_at(profile: RulingProfile, z):
    zg = profile.zeta_grid
    return (np.interp(z, zg, profile.a), np.interp(z, zg, profile.da),
            np.interp(z, zg, profile.db))


def assemble_form(profile: RulingProfile, t_window, n_t: int, n_zeta: int,
                  zeta_window=None) -> DiscreteForm:
    """Bilinear elements on ``n_t x n_zeta`` cells with zero boundary values."""
    t0, t1 = map(float, t_window)
    zg = np.asarray(profile.zeta_grid, dtype=float)
    z0, z1 = (float(zg[0]), float(zg[-1])) if zeta_window is None else map(float, zeta_window)
    if n_t < 2 or n_zeta < 2 or not (t1 > t0 and z1 > z0):
        raise PreconditionError("window must be non-degenerate with at least 2 cells per axis")
    if z0 < zg[0] - 1e-12 or z1 > zg[-1] + 1e-12:
        raise PreconditionError(
            f"zeta window [{z0}, {z1}] exceeds the profile range [{zg[0]}, {zg[-1]}]")
    tn = np.linspace(t0, t1, n_t + 1)
    zn = np.linspace(z0, z1, n_zeta + 1)
    ht, hz = tn[1] - tn[0], zn[1] - zn[0]

    # quadrature points: (cell_t, k) and (cell_z, l)
    tq = tn[:-1, None] + ht * _GX[None, :]
    zq = zn[:-1, None] + hz * _GX[None, :]
    a_q, da_q, db_q = _profile_at(profile, zq)
    H = (da_q[None, None, :, :] * tq[:, :, None, None] ** 2 / 2
         + db_q[None, None, :, :] * tq[:, :, None, None] + 1.0)        # (ct, k, cz, l)
    W = (1.0 + a_q * a_q) ** -1.5
    bad = H <= 0
    if bad.any():
        ci, k, cj, l = np.argwhere(bad)[0]
        raise AssemblyError(
            f"Jacobian weight h = {H[ci, k, cj, l]:.3e} <= 0 at t={tq[ci, k]:.6g}, "
            f"zeta={zq[cj, l]:.6g}: the characteristic map folds on this window")
    Cs = H * W[None, None, :, :]
    Cp = (2.0 * da_q - db_q ** 2)[None, None, :, :] * W[None, None, :, :] / H

    N = np.stack([1.0 - _GX, _GX])                  # (alpha, k)
    dN = np.array([-1.0, 1.0]) / ht                 # (alpha,)
    wq = np.outer(_GW * ht, _GW * hz)               # (k, l)
    # local matrices per cell, indices (alpha beta, alpha' beta')
    Ks = np.einsum("a,c,bl,dl,ikjl,kl->ijabcd", dN, dN, N, N, Cs, wq, optimize=True)
    Kp = np.einsum("ak,ck,bl,dl,ikjl,kl->ijabcd", N, N, N, N, Cp, wq, optimize=True)
    Km = np.einsum("ak,ck,bl,dl,kl->abcd", N, N, N, N, wq, optimize=True)

    nt_i, nz_i = n_t - 1, n_zeta - 1
    if nt_i < 1 or nz_i < 1:
        raise PreconditionError("need at least one interior node per axis")

    def dof(i, j):
        ok = (i >= 1) & (i <= n_t - 1) & (j >= 1) & (j <= n_zeta - 1)
        return np.where(ok, (i - 1) * nz_i + (j - 1), -1)

    ci, cj = np.meshgrid(np.arange(n_t), np.arange(n_zeta), indexing="ij")
    loc = np.stack([np.stack([dof(ci + al, cj + be) for be in (0, 1)]) for al in (0, 1)])
    loc = np.moveaxis(loc, (0, 1), (2, 3))          # (ct, cz, alpha, beta)
    R = np.broadcast_to(loc[:, :, :, :, None, None], Ks.shape)
    C = np.broadcast_to(loc[:, :, None, None, :, :], Ks.shape)
    keep = (R >= 0) & (C >= 0)
    size = nt_i * nz_i

    def build(vals):
        vals = np.broadcast_to(vals, Ks.shape)
        m = sp.coo_matrix((vals[keep], (R[keep], C[keep])), shape=(size, size)).tocsr()
        return ((m + m.T) * 0.5).tocsr()

    T, Z = np.meshgrid(tn, zn, indexing="ij")
    a_n, da_n, db_n = _profile_at(profile, zn)
    return DiscreteForm(
        tn, zn,
        da_n[None, :] * T ** 2 / 2 + db_n[None, :] * T + 1.0,
        np.broadcast_to((1.0 + a_n * a_n) ** -1.5, T.shape).copy(),
        build(Ks), build(Kp), build(Km[None, None]),
        float(np.abs(Cp).max()),
    )


@dataclass
class StabilityReport:
    lambda_min: float
    witness: np.ndarray | None    # theta at all nodes (boundary zeros), (n_t+1, n_zeta+1)
    verdict: str                  # stable-on-window | unstable | degenerate
    window: tuple
    resolution: tuple
    residual: float = float("nan")
    conclusive: bool = False
    reason: str = ""
    t_grid: np.ndarray | None = None
    zeta_grid: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self, witness_csv=None) -> dict:
        out = {
            "lambda_min": self.lambda_min,
            "verdict": self.verdict,
            "conclusive": self.conclusive,
            "window": list(self.window),
            "resolution": list(self.resolution),
            "rayleigh_residual": self.residual,
            "reason": self.reason,
        }
        out.update(self.diagnostics)
        if witness_csv is not None:
            out["witness_csv"] = str(witness_csv)
        return out

    def dump_witness(self, path) -> None:
        """Grid dump ``t,zeta,theta``."""
        if self.witness is None:
            raise ValueError("no witness available for this report")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "zeta", "theta"])
            for i, t in enumerate(self.t_grid):
                for j, z in enumerate(self.zeta_grid):
                    w.writerow([f"{t:.17g}", f"{z:.17g}", f"{self.witness[i, j]:.17g}"])


def _smallest_pair(Q, M, sigma, maxiter):
    try:
        vals, vecs = eigsh(Q, k=1, M=M, sigma=sigma, which="LM", maxiter=maxiter, tol=1e-12)
    except ArpackNoConvergence as exc:
        raise NumericalError("eigen-solve did not converge", residual=float("nan")) from exc
    x = vecs[:, 0]
    x = x / np.linalg.norm(x)
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return float(vals[0]), x


def min_eigenvalue(form: DiscreteForm, maxiter: int = 5000) -> StabilityReport:
    """Smallest ``lambda`` of ``Q x = lambda M x`` by shift-invert Lanczos.

    ``K`` is positive semidefinite and ``x^T P x <= bound x^T M x``, so the
    shift ``-(bound + 1)`` lies strictly below the spectrum and the eigenvalue
    nearest to it is the smallest.
    """
    Q, M = form.Q, form.mass
    lam, x = _smallest_pair(Q, M, -(form.potential_bound + 1.0), maxiter)
    resid = abs(float(x @ (Q @ x)) - lam * float(x @ (M @ x)))
    if resid > 1e-8:
        raise NumericalError(f"Rayleigh consistency failed: residual {resid:.3e}",
                             residual=resid)
    full = np.zeros((len(form.t_grid), len(form.zeta_grid)))
    full[1:-1, 1:-1] = x.reshape(form.interior_shape)
    verdict = "unstable" if lam < UNSTABLE_THRESHOLD else "stable-on-window"
    win = (float(form.t_grid[0]), float(form.t_grid[-1]),
           float(form.zeta_grid[0]), float(form.zeta_grid[-1]))
    return StabilityReport(lam, full, verdict, win,
                           (len(form.t_grid) - 1, len(form.zeta_grid) - 1), resid,
                           conclusive=verdict == "unstable",
                           t_grid=form.t_grid, zeta_grid=form.zeta_grid)


@dataclass(frozen=True)
class HardyResult:
    inf_quotient: float
    t: np.ndarray
    witness: np.ndarray           # minimizer at the nodes, zero at both ends
    rhs: float                    # 2A - B^2
    holds: bool                   # inf_quotient >= rhs on this window


def rayleigh_quotient_min(weight, lo: float, hi: float, n: int):
    """Minimize ``int phi'^2 h / int phi^2 / h`` over P1 functions vanishing at the ends.

    ``weight`` must be a quadratic polynomial in ``t`` (Simpson is exact for
    the stiffness), the potential uses 3-point Gauss.
    """
    t = np.linspace(lo, hi, n + 1)
    dx = t[1] - t[0]
    hl, hm, hr = weight(t[:-1]), weight(0.5 * (t[:-1] + t[1:])), weight(t[1:])
    ke = (hl + 4 * hm + hr) / 6.0 / dx                            # int h / dx^2 over a cell
    tq = t[:-1, None] + dx * _GX[None, :]
    hq = weight(tq)
    if np.any(hq < 0) or np.any(weight(t) < 0):
        raise DomainError("weight h is negative on the window")
    Nl, Nr = 1.0 - _GX, _GX
    inv = np.divide(1.0, hq, out=np.full_like(hq, np.inf), where=hq > 0)
    m_ll = dx * np.sum(_GW * Nl * Nl * inv, axis=1)
    m_rr = dx * np.sum(_GW * Nr * Nr * inv, axis=1)
    m_lr = dx * np.sum(_GW * Nl * Nr * inv, axis=1)
    if not np.all(np.isfinite(m_ll + m_rr + m_lr)):
        raise DomainError("weight h vanishes at a quadrature point")
    # interior nodes 1..n-1; cell c joins nodes c and c+1
    diagK = ke[:-1] + ke[1:]
    offK = -ke[1:-1]
    diagM = m_rr[:-1] + m_ll[1:]
    offM = m_lr[1:-1]
    K = sp.diags([offK, diagK, offK], [-1, 0, 1], format="csc")
    M = sp.diags([offM, diagM, offM], [-1, 0, 1], format="csc")
    lam, x = _smallest_pair(K, M, -1.0, 5000)
    phi = np.zeros(n + 1)
    phi[1:-1] = x
    return lam, t, phi


def hardy_rayleigh(A: float, B: float, L: float, n: int, center: float = 0.0) -> HardyResult:
    """Discrete infimum of ``int phi'^2 h / int phi^2 / h`` on ``[center - L, center + L]``
    for ``h = A t^2/2 + B t + 1``."""
    if B * B > 2 * A + 1e-12:
        raise PreconditionError(f"need B^2 <= 2A, got A={A}, B={B}")
    if L <= 0 or n < 16:
        raise PreconditionError("need L > 0 and n >= 16")

    def h(t):
        return A * t * t / 2 + B * t + 1.0

    lam, t, phi = rayleigh_quotient_min(h, center - L, center + L, n)
    rhs = 2 * A - B * B
    return HardyResult(lam, t, phi, rhs, bool(lam >= rhs - 1e-12))


def stability_verdict(g: GraphFunction, windows, eta0: float = 0.0, n_t: int = 200,
                      n_zeta: int = 40, ruled_tol: float = 1e-6,
                      ode_tol: float = 1e-9) -> StabilityReport:
    """Flow, ruling, discriminant diagnostics and a spectral test per window.

    ``windows`` holds ``(t0, t1, zeta0, zeta1)`` boxes.  The first unstable
    window is returned; otherwise the last stable one, labelled
    non-conclusive since stability quantifies over all compact supports.
    """
    windows = list(windows)
    if not windows:
        raise PreconditionError("at least one window is required")
    last = None
    for win in windows:
        t0, t1, z0, z1 = map(float, win)
        zg = np.linspace(z0, z1, 2 * n_zeta + 1)
        span = (max(min(t0, eta0), g.spec.eta_min), min(max(t1, eta0), g.spec.eta_max))
        flow = integrate_flow(g, eta0, zg, span, tol=ode_tol)
        prof = extract_ruling(flow, g)
        res = ruling_residual(flow, prof)
        scale = 1.0 + float(np.nanmax(np.abs(flow.chi)))
        pairs = discriminant_pairs(prof)
        point = pointwise_discriminant(prof)
        diag = {
            "ruling_residual": res,
            "discriminant_pairs": pairs.passed,
            "discriminant_worst_pair": pairs.worst_pair,
            "pointwise_discriminant": point.passed,
        }
        if not np.isfinite(res) or res > ruled_tol * scale:
            return StabilityReport(float("nan"), None, "degenerate", (t0, t1, z0, z1),
                                   (n_t, n_zeta), reason="not ruled on this window",
                                   diagnostics=diag)
        try:
            form = assemble_form(prof, (t0, t1), n_t, n_zeta, (z0, z1))
        except AssemblyError as exc:
            return StabilityReport(float("nan"), None, "degenerate", (t0, t1, z0, z1),
                                   (n_t, n_zeta), reason=str(exc), diagnostics=diag)
        rep = min_eigenvalue(form)
        rep.diagnostics = diag
        if rep.verdict == "unstable":
            return rep
        rep.reason = "no negative direction on this window; not a global certificate"
        last = rep
    return last
