"""``riloss`` command-line entry point.

Exit status is 0 on success; failures print a one-line JSON error record to
stderr and exit non-zero (2 for configuration/usage problems, 1 otherwise).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .data import DataError


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise harness.ConfigError("args", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="riloss", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="INI run config")
        sp.add_argument("--seed", type=int, help="override train.seed")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--acknowledge-datasets", action="store_true",
                        help="allow runs on manually downloaded benchmark CSVs")

    for name in ("train", "ablation", "robustness"):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--runs", type=int, default=1, help="average over this many seeds")
        if name == "robustness":
            sp.add_argument("--snr", type=_floats, default=[], help="e.g. -3,0,3,10")

    sp = sub.add_parser("sweep")
    common(sp)
    sp.add_argument("--seeds", type=_ints, default=[])
    sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("friedman")
    sp.add_argument("--table", required=True, help="CSV: setting column then one column per method")
    sp.add_argument("--q", type=float, help="Studentized-range critical value q_alpha")
    sp.add_argument("--higher-is-better", action="store_true")
    sp.add_argument("--out")

    sp = sub.add_parser("tradeoff")
    sp.add_argument("--tau", type=_floats, default=[50.0, 100.0])
    sp.add_argument("--points", type=int, default=1000)
    sp.add_argument("--steps", type=int, default=51)
    sp.add_argument("--corruption", choices=("shared", "fresh"), default="shared")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")

    sp = sub.add_parser("crossterm")
    sp.add_argument("--P", dest="P", default="random", help="identity | zero | random | projection | path.csv")
    sp.add_argument("--H", dest="H", type=int, default=8)
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")

    sp = sub.add_parser("bounds")
    sp.add_argument("--n", type=_ints, default=[50, 100, 200, 400])
    sp.add_argument("--dependence", choices=("independent", "linear", "quadratic"),
                    default="independent")
    sp.add_argument("--replicates", type=int, default=50)
    sp.add_argument("--reference-n", type=int)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--mc-draws", type=int, default=200)
    sp.add_argument("--c0", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    return p


def _load(args) -> harness.RunConfig:
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cmd = args.command
    if cmd in ("train", "ablation", "robustness", "sweep"):
        cfg = _load(args)
        out = harness.default_out(cfg, args.out, cmd)
        ack = args.acknowledge_datasets
        if cmd == "train":
            rep = harness.cmd_train(cfg, out, args.runs, ack)
            print(json.dumps({"test_mse": rep["test_mse"], "test_mae": rep["test_mae"],
                              "report": str(out / "report.json")}))
        elif cmd == "ablation":
            rows = harness.cmd_ablation(cfg, out, args.runs, ack)
            _print_rows(("loss_kind", "H", "test_mse", "test_mae"), rows)
        elif cmd == "robustness":
            rows = harness.cmd_robustness(cfg, out, args.snr, args.runs, ack)
            _print_rows(("snr_db", "loss_kind", "test_mse"), rows)
        else:
            rows = harness.cmd_sweep(cfg, out, args.seeds, args.jobs, ack)
            _print_rows(("seed", "test_mse", "test_mae"), rows)
        return 0
    out = harness.default_out(None, args.out, cmd)
    if cmd == "friedman":
        rep = harness.cmd_friedman(args.table, out, args.q, not args.higher_is_better)
        print(json.dumps(rep, sort_keys=True))
    elif cmd == "tradeoff":
        rows = harness.cmd_tradeoff(out, args.tau, args.points, args.steps, args.seed, args.corruption)
        best = {}
        for r in rows:
            if r.tau not in best or r.ri < best[r.tau].ri:
                best[r.tau] = r
        for tau, r in best.items():
            print(f"tau={tau:g}: {args.steps} points, RI minimum at rho={r.rho:.2f}")
    elif cmd == "crossterm":
        P = harness.named_matrix(args.P, args.H, args.seed)
        res = harness.cmd_crossterm(out, P, args.sigma, args.trials, args.seed)
        print(f"empirical={res.empirical:.6g} analytic={res.analytic:.6g} stderr={res.stderr:.3g}")
    elif cmd == "bounds":
        rows, rep = harness.cmd_bounds(out, args.n, args.dependence, args.replicates,
                                       args.reference_n, args.seed, args.delta, args.mc_draws,
                                       args.c0)
        _print_rows(("n", "mean_abs_dev", "se", "bound_total", "reference"), rows)
    return 0


def _print_rows(header, rows):
    print(",".join(header))
    for r in rows:
        print(",".join(f"{v:.6g}" if isinstance(v, (float, np.floating)) else str(v) for v in r))


def main(argv=None) -> int:
    try:
        return run(argv)
    except harness.ConfigError as exc:
        _fail(exc, 2, key=exc.key)
    except harness.DatasetGateError as exc:
        _fail(exc, 2, key="data.path")
    except DataError as exc:
        _fail(exc, 1, key="data.path")
    except (ValueError, OSError) as exc:
        _fail(exc, 1)
    return 1


def _fail(exc: Exception, code: int, key: str | None = None):
    rec = {"error": type(exc).__name__, "message": str(exc)}
    if key:
        rec["key"] = key
    print(json.dumps(rec), file=sys.stderr)
    sys.exit(code)


if __name__ == "__main__":
    sys.exit(main())
