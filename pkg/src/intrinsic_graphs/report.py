"""Config-driven analysis pipeline with a deterministic JSON report.

The config is a flat ``key = value`` file; ``#`` starts a comment.  Lists are
comma separated.  Stages run in a fixed order and each one records its
output (or its error) in the ``stages`` array of the report.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import exponents as ex
from .catalog import catalog_get
from .errors import PreconditionError
from .field import GridSpec, ScalarField, build_graph_function, plane_fit
from .lagrangian import (conjugation_residual, extract_ruling, horizontal_lift_straightness,
                         integrate_flow, ruling_residual, stationarity_lagrangian_residual,
                         vandermonde_extract)
from .probe import integrability_probe
from .stability import (discriminant_pairs, hardy_rayleigh, pointwise_discriminant,
                        stability_verdict)
from .variation import (TestFunction, area_with_error, first_variation, random_bumps,
                        second_variation)

log = logging.getLogger(__name__)

ANALYSES = ("area", "variation", "flow", "ruling", "stability", "exponents", "hardy", "probe")
STAGE_ORDER = ("field",) + ANALYSES


class ConfigError(ValueError):
    pass


@dataclass
class ReportConfig:
    source: str = "plane"
    window: tuple | None = None           # (eta0, eta1, tau0, tau1); default: entry rectangle
    n_eta: int = 65
    n_tau: int = 65
    tolerance: float = 1e-9               # ODE tolerance
    analyses: tuple = ("area", "variation", "flow", "ruling", "stability")
    out_dir: str = "out"
    report_name: str = "report.json"
    plots: bool = True
    seed: int = 0
    n_bumps: int = 5
    area_region: tuple | None = None
    eta0: float = 0.0
    zeta_window: tuple | None = None      # default: tau range of the bump window
    n_zeta: int = 41
    stability_window: tuple = (-20.0, 20.0, -1.0, 1.0)
    stability_resolution: tuple = (200, 40)
    exponents_q: tuple = (4.1, 5.0, 10.0)
    exponents_p: tuple = (10.0, 30.0, 100.0)
    hardy_A: float = 2.0
    hardy_B: float = 0.0
    hardy_L: tuple = (5.0, 10.0, 20.0, 40.0)
    hardy_n: int = 4000
    probe_exponent: float = 4.0
    probe_kappa: float = 1.0
    probe_window: tuple | None = None

    def validate(self) -> "ReportConfig":
        for name in ("n_eta", "n_tau", "n_zeta"):
            if getattr(self, name) < 16:
                raise ConfigError(f"{name} must be >= 16, got {getattr(self, name)}")
        if min(self.stability_resolution) < 16:
            raise ConfigError("stability_resolution entries must be >= 16")
        if not 1e-12 <= self.tolerance <= 1e-3:
            raise ConfigError(f"tolerance must lie in [1e-12, 1e-3], got {self.tolerance}")
        bad = [a for a in self.analyses if a not in ANALYSES]
        if bad:
            raise ConfigError(f"unknown analyses {bad}; available: {', '.join(ANALYSES)}")
        for name in ("window", "area_region", "zeta_window", "stability_window", "probe_window"):
            v = getattr(self, name)
            if v is not None and len(v) not in ((2,) if name == "zeta_window" else (4,)):
                raise ConfigError(f"{name} has the wrong number of bounds: {v}")
        if self.n_bumps < 1:
            raise ConfigError("n_bumps must be positive")
        return self


_TUPLE_KEYS = {"window", "area_region", "zeta_window", "stability_window", "probe_window",
               "exponents_q", "exponents_p", "hardy_L"}


def _convert(key, raw, current):
    raw = raw.strip()
    try:
        if key == "analyses":
            return tuple(a.strip() for a in raw.split(",") if a.strip())
        if key == "stability_resolution":
            return tuple(int(v) for v in raw.split(","))
        if key in _TUPLE_KEYS:
            if raw.lower() in ("", "none", "default"):
                return None
            return tuple(float(v) for v in raw.split(","))
        if key == "plots":
            if raw.lower() not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "yes", "1")
        if isinstance(current, bool):
            return raw.lower() in ("true", "yes", "1")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, base: ReportConfig | None = None) -> ReportConfig:
    cfg = ReportConfig() if base is None else base
    known = {f.name for f in fields(ReportConfig)}
    updates = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        updates[key] = _convert(key, value, getattr(cfg, key))
    return replace(cfg, **updates).validate()


def load_config(path) -> ReportConfig:
    return parse_config(Path(path).read_text())


# -- deterministic JSON -------------------------------------------------------

def _num(x: float) -> str:
    return format(x, ".17g") if math.isfinite(x) else "null"


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with 17 significant digits for floats and NaN/inf as null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- pipeline -----------------------------------------------------------------

@dataclass
class Report:
    document: dict
    series: dict = field(default_factory=dict)   # name -> (header, rows)
    exit_code: int = 0

    def stage(self, name):
        for s in self.document["stages"]:
            if s["name"] == name:
                return s
        raise KeyError(name)


@dataclass
class _Context:
    cfg: ReportConfig
    out: Path
    entry: object = None
    g: object = None
    flow: object = None
    profile: object = None

    def bump_window(self):
        spec = self.g.spec
        if self.entry is not None and self.cfg.window is None:
            return self.entry.bump_window
        e0, e1, t0, t1 = spec.rectangle
        me, mt = 0.05 * (e1 - e0), 0.05 * (t1 - t0)
        return (e0 + me, e1 - me, t0 + mt, t1 - mt)


def _region_dict(spec: GridSpec):
    return [spec.eta_min, spec.eta_max, spec.tau_min, spec.tau_max]


def _stage_field(ctx: _Context, series):
    cfg = ctx.cfg
    src = cfg.source
    if Path(src).suffix == ".csv" or Path(src).is_file():
        f = ScalarField.load_csv(src)
        ctx.g = build_graph_function(f)
        kind = "csv"
    else:
        ctx.entry = catalog_get(src)
        ctx.g = ctx.entry.graph(cfg.n_eta, cfg.n_tau, cfg.window)
        kind = "catalog"
    spec = ctx.g.spec
    a, b, res = plane_fit(ctx.g)
    grad = np.asarray(ctx.g.intrinsic_grad.values, dtype=float)
    return {
        "source": src, "kind": kind, "rectangle": list(spec.rectangle),
        "resolution": [spec.n_eta, spec.n_tau], "singular_tau": list(ctx.g.singular_tau),
        "max_abs_intrinsic_grad": float(np.nanmax(np.abs(grad))),
        "plane_fit": {"a": a, "b": b, "residual": res},
    }


def _stage_area(ctx: _Context, series):
    val, err, region = area_with_error(ctx.g, ctx.cfg.area_region)
    return {"op": "area", "value": val, "err_est": err, "region": _region_dict(region)}


def _bumps(ctx: _Context):
    rng = np.random.default_rng(ctx.cfg.seed)
    return random_bumps(ctx.bump_window(), ctx.cfg.n_bumps, rng)


def _stage_variation(ctx: _Context, series):
    entries = []
    worst = 0.0
    min_second = math.inf
    for k, phi in enumerate(_bumps(ctx)):
        r1 = first_variation(ctx.g, phi)
        r2 = second_variation(ctx.g, phi)
        for op, r in (("first", r1), ("second", r2)):
            entries.append({"op": op, "bump": k, "center": list(phi.center),
                            "radii": list(phi.radii), "amplitude": phi.amplitude,
                            "value": r.value, "err_est": r.quadrature_error_estimate,
                            "region": _region_dict(r.region)})
        worst = max(worst, abs(r1.value) / (1.0 + phi.sup_norm))
        min_second = min(min_second, r2.value)
    return {"entries": entries, "max_rel_first": worst, "min_second": min_second}


def _zeta_window(ctx: _Context):
    if ctx.cfg.zeta_window is not None:
        return ctx.cfg.zeta_window
    bw = ctx.bump_window()
    return bw[2], bw[3]


def _ensure_flow(ctx: _Context):
    if ctx.flow is None:
        z0, z1 = _zeta_window(ctx)
        spec = ctx.g.spec
        ctx.flow = integrate_flow(ctx.g, ctx.cfg.eta0, np.linspace(z0, z1, ctx.cfg.n_zeta),
                                  (spec.eta_min, spec.eta_max), tol=ctx.cfg.tolerance)
    return ctx.flow


def _lagrangian_bumps(ctx: _Context, flow):
    """Probes in (t, zeta) whose support sees only untruncated samples."""
    rng = np.random.default_rng(ctx.cfg.seed + 1)
    tg, zg = flow.t_grid, flow.zeta_grid
    out, tries = [], 0
    while len(out) < ctx.cfg.n_bumps and tries < 50 * ctx.cfg.n_bumps:
        tries += 1
        rt = rng.uniform(0.05, 0.25) * (tg[-1] - tg[0])
        rz = rng.uniform(0.05, 0.25) * (zg[-1] - zg[0])
        ct = rng.uniform(tg[0] + rt, tg[-1] - rt)
        cz = rng.uniform(zg[0] + rz, zg[-1] - rz)
        rows = (tg >= ct - rt - (tg[1] - tg[0])) & (tg <= ct + rt + (tg[1] - tg[0]))
        cols = (zg >= cz - rz - (zg[1] - zg[0])) & (zg <= cz + rz + (zg[1] - zg[0]))
        if np.all(np.isfinite(flow.d2chi_dt2[np.ix_(rows, cols)])):
            out.append(TestFunction((ct, cz), (rt, rz), float(rng.uniform(-1, 1))))
    return out


def _stage_flow(ctx: _Context, series):
    flow = _ensure_flow(ctx)
    r1, r2 = conjugation_residual(flow, ctx.g)
    path = ctx.out / "flow.csv"
    flow.dump_csv(path)
    rows = [(float(t), float(z), float(flow.chi[i, j]))
            for j, z in enumerate(flow.zeta_grid) for i, t in enumerate(flow.t_grid)
            if np.isfinite(flow.chi[i, j])]
    series["flow"] = (("t", "zeta", "chi"), rows)
    thetas = _lagrangian_bumps(ctx, flow)
    stat = stationarity_lagrangian_residual(flow, thetas) if thetas else None
    return {
        "eta0": flow.eta0, "zeta_range": [flow.zeta_grid[0], flow.zeta_grid[-1]],
        "n_zeta": len(flow.zeta_grid), "n_t": len(flow.t_grid),
        "ode_tolerance": flow.ode_tolerance, "truncated": int(flow.short.sum()),
        "conjugation_residual": [r1, r2],
        "stationarity_residual": stat, "stationarity_probes": len(thetas),
        "flow_csv": str(path),
    }


def _stage_ruling(ctx: _Context, series):
    flow = _ensure_flow(ctx)
    prof = extract_ruling(flow, ctx.g)
    ctx.profile = prof
    path = ctx.out / "ruling.csv"
    prof.dump_csv(path)
    series["ruling"] = (("zeta", "a", "b", "da", "db"), prof.rows())
    # Vandermonde cross-check on three times near eta0 where most samples are valid
    counts = flow.valid.sum(axis=1)
    good = np.flatnonzero(counts == counts.max())
    vander = None
    if len(good) >= 3:
        pick = good[[0, len(good) // 2, -1]]
        if len(set(pick)) == 3:
            a, b, c = vandermonde_extract(flow, *flow.t_grid[pick])
            ok = np.isfinite(a)
            vander = {
                "times": [float(t) for t in flow.t_grid[pick]],
                "max_abs_da": float(np.max(np.abs(a[ok] - prof.a[ok]))) if ok.any() else None,
                "max_abs_db": float(np.max(np.abs(b[ok] - prof.b[ok]))) if ok.any() else None,
                "max_abs_c_minus_zeta": float(np.max(np.abs(c[ok] - flow.zeta_grid[ok])))
                if ok.any() else None,
            }
    pairs = discriminant_pairs(prof)
    point = pointwise_discriminant(prof)
    return {
        "ruling_residual": ruling_residual(flow, prof),
        "straightness": horizontal_lift_straightness(ctx.g, flow),
        "vandermonde": vander,
        "discriminant_pairs": {"passed": pairs.passed, "worst_pair": pairs.worst_pair,
                               "margin": pairs.margin, "n_pairs": pairs.n_pairs},
        "pointwise_discriminant": {"passed": point.passed, "worst_zeta": point.worst_zeta,
                                   "margin": point.margin},
        "ruling_csv": str(path),
    }


def _stage_stability(ctx: _Context, series):
    n_t, n_z = ctx.cfg.stability_resolution
    rep = stability_verdict(ctx.g, [ctx.cfg.stability_window], ctx.cfg.eta0, n_t, n_z,
                            ode_tol=ctx.cfg.tolerance)
    wpath = None
    if rep.witness is not None:
        wpath = ctx.out / "witness.csv"
        rep.dump_witness(wpath)
        series["witness"] = (("t", "zeta", "theta"),
                             [(float(t), float(z), float(rep.witness[i, j]))
                              for i, t in enumerate(rep.t_grid)
                              for j, z in enumerate(rep.zeta_grid)])
    return rep.to_dict(wpath)


def _stage_exponents(ctx: _Context, series):
    rows = [ex.exponent_row(p, q) for q in ctx.cfg.exponents_q for p in ctx.cfg.exponents_p]
    thresholds = []
    for q in ctx.cfg.exponents_q:
        for c in ex.CONDITIONS:
            try:
                th = ex.find_min_p(q, c)
                thresholds.append({"q": q, "condition": c, "p_hat": th.p_hat,
                                   "monotone": th.monotone})
            except ex.DomainError as exc:
                thresholds.append({"q": q, "condition": c, "p_hat": None, "note": str(exc)})
    series["exponents"] = (ex._COLS, [[r[c] for c in ex._COLS] for r in rows])
    return {"rows": rows, "thresholds": thresholds}


def _stage_hardy(ctx: _Context, series):
    cfg = ctx.cfg
    out = []
    for L in cfg.hardy_L:
        r = hardy_rayleigh(cfg.hardy_A, cfg.hardy_B, L, cfg.hardy_n)
        out.append({"L": L, "n": cfg.hardy_n, "inf_quotient": r.inf_quotient,
                    "rhs": r.rhs, "holds": r.holds})
    series["hardy"] = (("L", "n", "inf_quotient"),
                       [(o["L"], o["n"], o["inf_quotient"]) for o in out])
    return {"A": cfg.hardy_A, "B": cfg.hardy_B, "sweep": out}


def _stage_probe(ctx: _Context, series):
    if ctx.entry is None:
        raise PreconditionError("the integrability probe needs a catalog entry")
    r = integrability_probe(ctx.entry, ctx.cfg.probe_exponent, ctx.cfg.probe_kappa,
                            window=ctx.cfg.probe_window)
    series["probe"] = (("cutoff", "moment", "exp_moment"), r.rows())
    return r.as_dict()


_STAGES = {
    "field": _stage_field, "area": _stage_area, "variation": _stage_variation,
    "flow": _stage_flow, "ruling": _stage_ruling, "stability": _stage_stability,
    "exponents": _stage_exponents, "hardy": _stage_hardy, "probe": _stage_probe,
}
# stages that need a graph function
_NEEDS_FIELD = {"area", "variation", "flow", "ruling", "stability", "probe"}


def run_report(cfg: ReportConfig, write: bool = True) -> Report:
    """Run the requested analyses in pipeline order and (optionally) write the
    JSON report, CSV series and figures under ``cfg.out_dir``."""
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(cfg, out)
    wanted = set(cfg.analyses)
    todo = [s for s in STAGE_ORDER if s in wanted]
    if wanted & _NEEDS_FIELD:
        todo.insert(0, "field")
    stages, series, failed = [], {}, False
    for name in todo:
        log.info("stage %s", name)
        entry = {"name": name}
        if failed and name != "field" and name in _NEEDS_FIELD and ctx.g is None:
            entry.update(status="skipped", message="field stage failed")
            stages.append(entry)
            continue
        try:
            entry["result"] = _STAGES[name](ctx, series)
            entry["status"] = "ok"
        except Exception as exc:      # recorded, reported through the exit code
            log.debug("stage %s failed", name, exc_info=True)
            entry.update(status="error", error=type(exc).__name__, message=str(exc))
            failed = True
        stages.append(entry)
    doc = {"config": _config_dict(cfg), "stages": stages,
           "status": "error" if failed else "ok"}
    report = Report(doc, series, 2 if failed else 0)
    if write:
        (out / cfg.report_name).write_text(dumps(doc) + "\n")
        # flow, ruling and witness stages already dumped their full CSVs
        for name in sorted(series.keys() - {"flow", "ruling", "witness"}):
            emit_plot_data(report, name, out / f"{name}.csv")
        if cfg.plots:
            from .plotting import render_series
            for name in sorted(series):
                render_series(name, *series[name], out / f"{name}.png")
    return report


def _config_dict(cfg: ReportConfig) -> dict:
    return {f.name: (list(v) if isinstance(v, tuple) else v)
            for f in fields(cfg) for v in [getattr(cfg, f.name)]}


def emit_plot_data(report: Report, what: str, path) -> Path:
    """Write one series as CSV with a header row; rows keep pipeline order."""
    if what not in report.series:
        raise KeyError(f"no series {what!r} in report; available: "
                       f"{', '.join(sorted(report.series)) or 'none'}")
    header, rows = report.series[what]
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (f"{v:.17g}" if isinstance(v, float) else v)
                        for v in row])
    return path
