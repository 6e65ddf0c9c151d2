"""Integrability exponents and the threshold conditions A1-A4.

For ``p > 2`` and ``q > 1``:

    q' = q / (q - 1)
    s  = p q (p - 2) / (p^2 + q (p - 2))      composition exponent
    alpha = p - 1
    beta  = 2 q / (q - 2)                     (q > 2 only)
    r  = (q/p + 2/(p - 2))^(-1)               distortion exponent

Conditions (strict unless noted):

    A1  p^2 / ((p - 1)(p - 2)) < q
    A2  s > q'
    A3  s > beta > q'
    A4  1/p + 1/s + 2/alpha <= 1              (inclusive)
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError

CMP_TOL = 1e-12
CONDITIONS = ("A1", "A2", "A3", "A4")
# smallest q for which each condition eventually holds as p grows
_Q_RANGE = {"A1": 1.0, "A2": 2.0, "A3": 4.0, "A4": 1.0}


def conj(q: float) -> float:
    return q / (q - 1.0)


def _lt(x, y) -> bool:
    return y - x > CMP_TOL


def _le(x, y) -> bool:
    return x - y <= CMP_TOL


@dataclass(frozen=True)
class ExponentSet:
    p: float
    q: float
    q_conj: float
    s: float
    alpha: float
    beta: float | None
    r: float

    def as_dict(self) -> dict:
        return asdict(self)


def build_exponents(p: float, q: float) -> ExponentSet:
    if not p > 2:
        raise DomainError(f"need p > 2, got p={p}")
    if not q > 1:
        raise DomainError(f"need q > 1, got q={q}")
    s = p * q * (p - 2) / (p * p + q * (p - 2))
    beta = 2 * q / (q - 2) if q > 2 else None
    r = 1.0 / (q / p + 2 / (p - 2))
    return ExponentSet(float(p), float(q), conj(q), s, p - 1.0, beta, r)


def q_from_ps(p: float, s: float) -> float:
    """Invert the composition exponent: ``q = p^2 s / ((p - s)(p - 2))``."""
    if not p > 2:
        raise DomainError(f"need p > 2, got p={p}")
    if not 1 <= s < p:
        raise DomainError(f"need 1 <= s < p, got s={s}, p={p}")
    return p * p * s / ((p - s) * (p - 2))


def exponents_from_ps(p: float, s: float) -> ExponentSet:
    return build_exponents(p, q_from_ps(p, s))


def check_conditions(e: ExponentSet) -> dict:
    """``{"A1": bool, ..., "A4": bool}``; A3 is ``None`` (not applicable) for q <= 2."""
    p, q, s = e.p, e.q, e.s
    out = {
        "A1": _lt(p * p / ((p - 1) * (p - 2)), q),
        "A2": _lt(e.q_conj, s),
        "A3": None if e.beta is None else (_lt(e.beta, s) and _lt(e.q_conj, e.beta)),
        "A4": _le(1 / p + 1 / s + 2 / e.alpha, 1.0),
    }
    return out


def _holds(p: float, q: float, cond: str) -> bool:
    return bool(check_conditions(build_exponents(p, q))[cond])


@dataclass(frozen=True)
class Threshold:
    condition: str
    q: float
    p_hat: float
    monotone: bool                # no violation above a satisfied grid point


def find_min_p(q: float, cond: str, p_max: float = 1e6, n_scan: int = 4000,
               tol: float = 1e-9) -> Threshold:
    """Smallest ``p_hat`` such that ``cond`` holds for every sampled ``p > p_hat``.

    A log-spaced scan of ``p - 2`` over ``[1e-6, p_max]`` locates the last
    violation; bisection then refines the boundary to ``tol``.  When the
    scan is not monotone the returned value is the supremum of the
    violation set and ``monotone`` is False.
    """
    cond = cond.upper().replace(".", "")
    if cond not in _Q_RANGE:
        raise KeyError(f"unknown condition {cond!r}; available: {', '.join(CONDITIONS)}")
    if not q > _Q_RANGE[cond]:
        raise DomainError(f"{cond} needs q > {_Q_RANGE[cond]:g}, got q={q}")
    ps = 2.0 + np.geomspace(1e-6, p_max - 2.0, n_scan)
    ok = np.array([_holds(p, q, cond) for p in ps])
    if not ok[-1]:
        raise DomainError(f"{cond} still fails at p={p_max:g} for q={q}")
    fails = np.flatnonzero(~ok)
    if len(fails) == 0:
        return Threshold(cond, float(q), 2.0, True)
    k = int(fails[-1])
    monotone = not np.any(ok[:k])
    lo, hi = ps[k], ps[k + 1]
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if _holds(mid, q, cond):
            hi = mid
        else:
            lo = mid
    return Threshold(cond, float(q), float(hi), bool(monotone))


def exponent_row(p: float, q: float) -> dict:
    e = build_exponents(p, q)
    row = e.as_dict()
    row.update(check_conditions(e))
    return row


_COLS = ("p", "q", "q_conj", "s", "alpha", "beta", "r") + CONDITIONS


def _cell(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, bool):
        return "yes" if v else "no"
    return f"{v:.10g}"


def format_table(rows) -> str:
    cells = [[c for c in _COLS]] + [[_cell(r[c]) for c in _COLS] for r in rows]
    width = [max(len(line[i]) for line in cells) for i in range(len(_COLS))]
    return "\n".join("  ".join(x.rjust(w) for x, w in zip(line, width)) for line in cells)


def format_json(rows) -> str:
    def clean(v):
        return None if isinstance(v, float) and not math.isfinite(v) else v
    return json.dumps([{c: clean(r[c]) for c in _COLS} for r in rows], indent=2)
