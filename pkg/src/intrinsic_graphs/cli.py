"""Command line entry point.

Every analysis subcommand runs the report pipeline with a single analysis,
so ``igraph flow young`` and a config with ``analyses = flow`` agree.
Exit codes: 0 success, 1 usage error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import exponents as ex
from .catalog import catalog_names
from .errors import DomainError
from .report import ConfigError, ReportConfig, dumps, load_config, run_report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(n):
    def parse(text):
        try:
            vals = tuple(float(v) for v in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers") from None
        if n is not None and len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
        return vals
    return parse


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None


def build_parser() -> argparse.ArgumentParser:
    def add_globals(parser, default):
        parser.add_argument("--config", default=default,
                            help="flat key=value config file (defaults for every command)")
        parser.add_argument("--out", default=default,
                            help="output directory for JSON, CSV and PNG files")
        parser.add_argument("--seed", type=int, default=default,
                            help="seed for random bump placement")
        parser.add_argument("--verbose", "-v", action="store_true", default=default or False)
        parser.add_argument("--no-plots", action="store_true", default=default or False,
                            help="skip PNG figures")

    p = _Parser(prog="igraph", description="Area variations, characteristic flows and "
                "stability tests for intrinsic graphs in the Heisenberg group.")
    add_globals(p, None)
    # the same flags after the subcommand; SUPPRESS keeps top-level values
    common = argparse.ArgumentParser(add_help=False)
    add_globals(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, text):
        return sub.add_parser(name, help=text, parents=[common])

    entries = ", ".join(catalog_names())

    def with_source(sp):
        sp.add_argument("source", nargs="?",
                        help=f"catalog entry ({entries}) or a CSV field eta,tau,value")
        sp.add_argument("--window", type=_floats(4), metavar="E0,E1,T0,T1",
                        help="sampling rectangle")
        sp.add_argument("--resolution", type=_ints, metavar="NE,NT")
        return sp

    a = with_source(command("area", "area of the graph over a region"))
    a.add_argument("--region", type=_floats(4), metavar="E0,E1,T0,T1")

    v = with_source(command("variation", "first and second variation on random bumps"))
    v.add_argument("--bumps", type=int)

    for name, text in (("flow", "integrate characteristics"),
                       ("ruling", "extract the quadratic ruling a, b")):
        s = with_source(command(name, text))
        s.add_argument("--eta0", type=float)
        s.add_argument("--zeta", type=_floats(2), metavar="Z0,Z1")
        s.add_argument("--n-zeta", type=int)
        s.add_argument("--tol", type=float, help="ODE tolerance")

    s = with_source(command("stability", "minimum eigenvalue of the second variation"))
    s.add_argument("--stab-window", type=_floats(4), metavar="T0,T1,Z0,Z1")
    s.add_argument("--stab-resolution", type=_ints, metavar="NT,NZ")
    s.add_argument("--eta0", type=float)

    h = command("hardy", "discrete infimum of the weighted Hardy quotient")
    h.add_argument("--A", type=float)
    h.add_argument("--B", type=float)
    h.add_argument("--L", type=_floats(None), metavar="L1,L2,...")
    h.add_argument("--n", type=int)

    e = command("exponents", "exponent table and p thresholds")
    e.add_argument("--q", type=_floats(None), metavar="Q1,Q2,...")
    e.add_argument("--p", type=_floats(None), metavar="P1,P2,...")
    e.add_argument("--json", action="store_true", help="print JSON instead of a table")
    e.add_argument("--threshold", metavar="COND",
                   help="only print p_hat for this condition (A1..A4) at each q")

    pr = with_source(command("probe", "moments of d_tau f near singular lines"))
    pr.add_argument("--exponent", type=float)
    pr.add_argument("--kappa", type=float)
    pr.add_argument("--probe-window", type=_floats(4), metavar="E0,E1,T0,T1")

    command("report", "run the analyses listed in the config")
    return p


_OVERRIDES = {
    "source": "source", "window": "window", "region": "area_region", "bumps": "n_bumps",
    "eta0": "eta0", "zeta": "zeta_window", "n_zeta": "n_zeta", "tol": "tolerance",
    "stab_window": "stability_window", "stab_resolution": "stability_resolution",
    "A": "hardy_A", "B": "hardy_B", "L": "hardy_L", "n": "hardy_n",
    "q": "exponents_q", "p": "exponents_p", "exponent": "probe_exponent",
    "kappa": "probe_kappa", "probe_window": "probe_window", "out": "out_dir", "seed": "seed",
}


def _config_from_args(args) -> ReportConfig:
    cfg = load_config(args.config) if args.config else ReportConfig()
    upd = {}
    for attr, key in _OVERRIDES.items():
        val = getattr(args, attr, None)
        if val is not None:
            upd[key] = val
    res = getattr(args, "resolution", None)
    if res is not None:
        if len(res) != 2:
            raise ConfigError("--resolution needs NE,NT")
        upd["n_eta"], upd["n_tau"] = res
    if args.no_plots:
        upd["plots"] = False
    if args.command != "report":
        upd["analyses"] = (args.command,)
        upd.setdefault("report_name", f"{args.command}.json")
    return replace(cfg, **upd).validate()


def _exponents_only(cfg: ReportConfig, args) -> int:
    if args.threshold:
        for q in cfg.exponents_q:
            try:
                th = ex.find_min_p(q, args.threshold)
            except (DomainError, KeyError) as exc:
                print(f"q={q:g}: {exc}", file=sys.stderr)
                return 2
            print(f"q={q:g} {th.condition} p_hat={th.p_hat:.12g} monotone={th.monotone}")
        return 0
    rows = [ex.exponent_row(p, q) for q in cfg.exponents_q for p in cfg.exponents_p]
    print(ex.format_json(rows) if args.json else ex.format_table(rows))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"igraph: error: {exc}", file=sys.stderr)
        return 1
    if args.command == "exponents" and args.out is None:
        try:
            return _exponents_only(cfg, args)
        except DomainError as exc:
            print(f"igraph: {exc}", file=sys.stderr)
            return 2
    report = run_report(cfg)
    print(dumps(report.document))
    for s in report.document["stages"]:
        if s["status"] != "ok":
            print(f"igraph: stage {s['name']} {s['status']}: {s.get('message', '')}",
                  file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
