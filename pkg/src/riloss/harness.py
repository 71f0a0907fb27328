"""Experiment orchestration: config parsing, the train/evaluate pipeline, studies, reports.

Config files are INI-style (sections of ``key = value``). Each report echoes
the config text verbatim. Report files are deterministic per seed except for
line 2, which holds the volatile ``meta`` record (timestamp, ms/iter).
"""
from __future__ import annotations

import configparser
import csv
import datetime as _dt
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import bounds as _bounds
from . import loss as _loss
from .data import (
    SplitSpec, dataset_stats, inject_noise_snr, load_csv, split, standardize,
    synthetic_seasonal, windows,
)
from .forecaster import LinearForecaster, TrainConfig, forward, save_checkpoint, train
from .friedman import friedman
from .hsic import HsicConfig
from .kernels import KernelSpec

log = logging.getLogger(__name__)

LOSS_KINDS = ("ri", "mae", "mse", "pearson_mse")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"[{key}] {message}")


class DatasetGateError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    data_path: str | None = None
    synthetic: str | None = None
    synthetic_length: int = 2000
    synthetic_channels: int = 1
    split: SplitSpec = field(default_factory=SplitSpec)
    w: int = 96
    H: int = 96
    stride: int = 1
    snr_db: float | None = None
    loss_kind: str = "mse"
    loss: _loss.RiLossConfig = field(default_factory=_loss.RiLossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    kernel_size: int = 25
    out_dir: str = "runs"
    horizons: tuple[int, ...] = ()
    snr_list: tuple[float, ...] = ()
    seeds: tuple[int, ...] = ()
    text: str = ""

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, train=replace(self.train, seed=seed), loss=replace(self.loss, seed=seed))

    def with_loss(self, kind: str) -> "RunConfig":
        return replace(self, loss_kind=kind, train=replace(self.train, loss_kind=kind))

    def summary(self) -> dict:
        return {
            "data_path": self.data_path, "synthetic": self.synthetic,
            "synthetic_length": self.synthetic_length, "synthetic_channels": self.synthetic_channels,
            "split": {"mode": self.split.mode, "ratios": list(self.split.ratios)},
            "w": self.w, "H": self.H, "stride": self.stride, "snr_db": self.snr_db,
            "loss_kind": self.loss_kind, "lambda": self.loss.lam, "tau": self.loss.tau,
            "bandwidth": self.loss.hsic.kernel_r.bandwidth,
            "scale_convention": self.loss.hsic.kernel_r.scale_convention,
            "sample_axis": self.loss.sample_axis, "kernel_size": self.kernel_size,
            "train": asdict(self.train),
        }


def _get(cp, section, key, conv, default):
    full = f"{section}.{key}"
    if not cp.has_option(section, key) or cp.get(section, key).strip() == "":
        return default
    raw = cp.get(section, key).strip()
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(full, f"cannot parse {raw!r}: {exc}") from None


def _int_list(text):
    return tuple(int(x) for x in text.replace(" ", "").split(",") if x)


def _float_list(text):
    return tuple(float(x) for x in text.replace(" ", "").split(",") if x)


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc)) from None
    for sec in cp.sections():
        if sec not in ("data", "loss", "train", "output", "ablation", "robustness", "sweep"):
            raise ConfigError(sec, "unknown section")

    path = _get(cp, "data", "path", str, None)
    if path and base_dir is not None and not Path(path).is_absolute():
        path = str((base_dir / path).resolve())
    synthetic = _get(cp, "data", "synthetic", str, None)
    if synthetic not in (None, "seasonal"):
        raise ConfigError("data.synthetic", f"unknown generator {synthetic!r}")
    if (path is None) == (synthetic is None):
        raise ConfigError("data.path", "give exactly one of data.path or data.synthetic")

    def split_conv(s):
        try:
            return SplitSpec.parse(s)
        except ValueError as exc:
            raise ValueError(str(exc)) from None

    kind = _get(cp, "loss", "kind", str, "mse")
    if kind not in LOSS_KINDS:
        raise ConfigError("loss.kind", f"must be one of {LOSS_KINDS}, got {kind!r}")
    seed = _get(cp, "train", "seed", int, 0)
    try:
        kspec = KernelSpec(bandwidth=_get(cp, "loss", "bandwidth", float, 1.0),
                           scale_convention=_get(cp, "loss", "scale_convention", str, "half"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("loss.bandwidth", str(exc)) from None
    try:
        loss_cfg = _loss.RiLossConfig(
            lam=_get(cp, "loss", "lambda", float, 10.0),
            tau=_get(cp, "loss", "tau", float, 1.0),
            hsic=HsicConfig("plugin", kspec, kspec),
            seed=seed,
            sample_axis=_get(cp, "loss", "sample_axis", str, "flatten"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("loss", str(exc)) from None
    try:
        tcfg = TrainConfig(
            learning_rate=_get(cp, "train", "learning_rate", float, 0.005),
            epochs=_get(cp, "train", "epochs", int, 10),
            batch_size=_get(cp, "train", "batch_size", int, 32),
            adam_beta1=_get(cp, "train", "adam_beta1", float, 0.9),
            adam_beta2=_get(cp, "train", "adam_beta2", float, 0.999),
            adam_eps=_get(cp, "train", "adam_eps", float, 1e-8),
            seed=seed,
            loss_kind=kind,
            patience=_get(cp, "train", "patience", int, None),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("train", str(exc)) from None
    cfg = RunConfig(
        data_path=path,
        synthetic=synthetic,
        synthetic_length=_get(cp, "data", "synthetic_length", int, 2000),
        synthetic_channels=_get(cp, "data", "synthetic_channels", int, 1),
        split=_get(cp, "data", "split", split_conv, SplitSpec()),
        w=_get(cp, "data", "w", int, 96),
        H=_get(cp, "data", "H", int, 96),
        stride=_get(cp, "data", "stride", int, 1),
        snr_db=_get(cp, "data", "snr_db", float, None),
        loss_kind=kind,
        loss=loss_cfg,
        train=tcfg,
        kernel_size=_get(cp, "train", "kernel_size", int, 25),
        out_dir=_get(cp, "output", "dir", str, "runs"),
        horizons=_get(cp, "ablation", "horizons", _int_list, ()),
        snr_list=_get(cp, "robustness", "snr", _float_list, ()),
        seeds=_get(cp, "sweep", "seeds", _int_list, ()),
        text=text,
    )
    for key, val in (("data.w", cfg.w), ("data.H", cfg.H), ("data.stride", cfg.stride)):
        if val < 1:
            raise ConfigError(key, f"must be positive, got {val}")
    if cfg.kernel_size < 1 or cfg.kernel_size % 2 == 0:
        raise ConfigError("train.kernel_size", f"must be odd and positive, got {cfg.kernel_size}")
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"config file not found: {p}")
    # ConfigParser lowercases keys; H is read case-insensitively
    return parse_config(p.read_text(), p.parent)


@dataclass
class Prepared:
    train: object
    val: object
    test: object
    stats: dict


def prepare(cfg: RunConfig, acknowledge_datasets: bool = True) -> Prepared:
    if cfg.synthetic:
        frame = synthetic_seasonal(cfg.synthetic_length, cfg.synthetic_channels, seed=cfg.train.seed)
    else:
        if not acknowledge_datasets:
            raise DatasetGateError(
                f"data.path={cfg.data_path}: benchmark datasets are obtained manually; "
                "pass --acknowledge-datasets to run on them")
        frame = load_csv(cfg.data_path)
    parts = split(frame, cfg.split, lookback=cfg.w)
    tr, va, te, scaler = standardize(parts.train, parts.val, parts.test)
    stats = dataset_stats(scaler, parts.borders, frame.columns)
    inputs = {}
    if cfg.snr_db is not None:
        ss = np.random.SeedSequence([cfg.train.seed, 7]).spawn(3)
        inputs = {name: inject_noise_snr(f, cfg.snr_db, s)
                  for name, f, s in zip(("train", "val", "test"), (tr, va, te), ss)}
        stats["snr_db"] = cfg.snr_db
    wins = {name: windows(f, cfg.w, cfg.H, cfg.stride if name == "train" else 1, inputs.get(name))
            for name, f in (("train", tr), ("val", va), ("test", te))}
    return Prepared(wins["train"], wins["val"], wins["test"], stats)


def evaluate_model(model, data, batch_size: int = 256) -> dict[str, float]:
    se = ae = 0.0
    count = 0
    for s in range(0, len(data), batch_size):
        pred = forward(model, data.X[s:s + batch_size])
        r = data.Y[s:s + batch_size] - pred
        se += float(np.sum(r * r))
        ae += float(np.sum(np.abs(r)))
        count += r.size
    return {"mse": se / count, "mae": ae / count}


def run_training(cfg: RunConfig, acknowledge_datasets: bool = True, checkpoint: Path | None = None,
                 prepared: Prepared | None = None) -> dict:
    """Full pipeline for one seed; returns the report dict (``meta`` holds volatile fields)."""
    prep = prepared or prepare(cfg, acknowledge_datasets)
    d = prep.train.X.shape[2]
    model = LinearForecaster.init(cfg.w, cfg.H, d, cfg.kernel_size)
    result = train(model, prep.train, cfg.loss, replace(cfg.train, loss_kind=cfg.loss_kind), prep.val)
    metrics = evaluate_model(result.model, prep.test)
    if checkpoint is not None:
        save_checkpoint(result.model, checkpoint)
    history = result.history
    if cfg.loss_kind in ("mse", "mae"):
        history = [{k: v for k, v in h.items() if k != "hsic_value"} for h in history]
    return {
        "meta": {"generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                 "ms_per_iter": round(result.ms_per_iter, 4)},
        "command": "train",
        "seed": cfg.train.seed,
        "loss_kind": cfg.loss_kind,
        "test_mse": metrics["mse"],
        "test_mae": metrics["mae"],
        "best_epoch": result.best_epoch,
        "history": history,
        "dataset": prep.stats,
        "config": cfg.summary(),
        "config_text": cfg.text,
    }


def dumps_report(report: dict) -> str:
    """JSON text whose only run-dependent content sits on line 2."""
    body = {k: v for k, v in report.items() if k != "meta"}
    meta = report.get("meta", {})
    rest = json.dumps(body, indent=2, sort_keys=True)
    if rest == "{}":
        return "{\n  \"meta\": " + json.dumps(meta, sort_keys=True) + "\n}\n"
    return "{\n  \"meta\": " + json.dumps(meta, sort_keys=True) + ",\n" + rest[2:] + "\n"


def write_report(report: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(report))
    return path


def write_rows(rows, header, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _seeds(cfg: RunConfig, runs: int) -> list[int]:
    base = cfg.train.seed
    return [base + i for i in range(max(1, runs))]


def cmd_train(cfg: RunConfig, out: Path, runs: int = 1, acknowledge_datasets: bool = False) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for seed in _seeds(cfg, runs):
        c = cfg.with_seed(seed)
        rep = run_training(c, acknowledge_datasets, checkpoint=out / f"model_seed{seed}.ckpt")
        write_report(rep, out / f"report_seed{seed}.json")
        reports.append(rep)
    if len(reports) == 1:
        write_report(reports[0], out / "report.json")
        return reports[0]
    summary = _average(reports)
    write_report(summary, out / "report.json")
    return summary


def _average(reports: list[dict]) -> dict:
    mses = [r["test_mse"] for r in reports]
    maes = [r["test_mae"] for r in reports]
    return {
        "meta": {"generated_at": reports[-1]["meta"]["generated_at"],
                 "ms_per_iter": round(float(np.mean([r["meta"]["ms_per_iter"] for r in reports])), 4)},
        "command": "train",
        "seeds": [r["seed"] for r in reports],
        "loss_kind": reports[0]["loss_kind"],
        "test_mse": float(np.mean(mses)), "test_mse_std": float(np.std(mses)),
        "test_mae": float(np.mean(maes)), "test_mae_std": float(np.std(maes)),
        "runs": [{k: r[k] for k in ("seed", "test_mse", "test_mae", "best_epoch", "history")}
                 for r in reports],
        "config": reports[0]["config"],
        "config_text": reports[0]["config_text"],
    }


def cmd_ablation(cfg: RunConfig, out: Path, runs: int = 1, acknowledge_datasets: bool = False):
    """Train every loss kind on shared data and seeds; one row per (kind, horizon)."""
    horizons = cfg.horizons or (cfg.H,)
    rows = []
    for H in horizons:
        for kind in LOSS_KINDS:
            ms, ma = [], []
            for seed in _seeds(cfg, runs):
                c = replace(cfg.with_seed(seed).with_loss(kind), H=H)
                rep = run_training(c, acknowledge_datasets)
                write_report(rep, out / f"{kind}_H{H}_seed{seed}.json")
                ms.append(rep["test_mse"])
                ma.append(rep["test_mae"])
            rows.append((kind, H, float(np.mean(ms)), float(np.mean(ma))))
    write_rows(rows, ("loss_kind", "H", "test_mse", "test_mae"), out / "ablation.csv")
    return rows


def cmd_robustness(cfg: RunConfig, out: Path, snr_list, runs: int = 1,
                   acknowledge_datasets: bool = False):
    snrs = list(snr_list) or list(cfg.snr_list)
    if not snrs:
        raise ConfigError("robustness.snr", "SNR list is empty")
    rows = []
    for snr in snrs:
        for kind in ("mse", "ri"):
            vals = []
            for seed in _seeds(cfg, runs):
                c = replace(cfg.with_seed(seed).with_loss(kind), snr_db=float(snr))
                rep = run_training(c, acknowledge_datasets)
                write_report(rep, out / f"snr{snr:g}_{kind}_seed{seed}.json")
                vals.append(rep["test_mse"])
            rows.append((float(snr), kind, float(np.mean(vals))))
    write_rows(rows, ("snr_db", "loss_kind", "test_mse"), out / "robustness.csv")
    return rows


def _sweep_one(args):
    cfg, seed, out, ack = args
    c = cfg.with_seed(seed)
    rep = run_training(c, ack, checkpoint=Path(out) / f"model_seed{seed}.ckpt")
    write_report(rep, Path(out) / f"report_seed{seed}.json")
    return seed, rep["test_mse"], rep["test_mae"]


def cmd_sweep(cfg: RunConfig, out: Path, seeds, jobs: int = 1, acknowledge_datasets: bool = False):
    """Independent seeds in parallel processes; each run stays single-threaded and deterministic."""
    seeds = list(seeds) or list(cfg.seeds) or [cfg.train.seed]
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, s, str(out), acknowledge_datasets) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    rows.sort()
    mses = [r[1] for r in rows]
    maes = [r[2] for r in rows]
    rows.append(("mean", float(np.mean(mses)), float(np.mean(maes))))
    rows.append(("std", float(np.std(mses)), float(np.std(maes))))
    write_rows(rows, ("seed", "test_mse", "test_mae"), out / "sweep.csv")
    return rows


def read_table(path):
    """CSV with a header of method names after a leading setting-name column."""
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header and at least one row")
    methods = rows[0][1:]
    try:
        values = [[float(x) for x in r[1:]] for r in rows[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if any(len(v) != len(methods) for v in values):
        raise ValueError(f"{path}: ragged metrics table")
    return methods, [r[0] for r in rows[1:]], np.array(values)


def cmd_friedman(table_path, out: Path, q_alpha: float | None = None, lower_is_better: bool = True):
    methods, _, M = read_table(table_path)
    res = friedman(M, q_alpha, lower_is_better)
    report = {
        "methods": methods,
        "avg_ranks": [float(x) for x in res.avg_ranks],
        "N": int(M.shape[0]), "k": int(M.shape[1]),
        "tau_chi2": res.tau_chi2, "tau_F": res.tau_f, "CD": res.cd, "q_alpha": q_alpha,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "friedman.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def cmd_tradeoff(out: Path, taus=(50.0, 100.0), points: int = 1000, steps: int = 51, seed: int = 0,
                 corruption: str = "shared"):
    rho = np.linspace(0.0, 1.0, steps)
    rows = _loss.tradeoff_curve(taus, rho, points, seed, corruption)
    write_rows(rows, _loss.TradeoffRow._fields, out / "tradeoff.csv")
    return rows


def random_projection(H: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Orthogonal projection onto a random subspace (rank drawn from 1..H-1 by default)."""
    rank = int(rng.integers(1, H)) if rank is None else rank
    Q, _ = np.linalg.qr(rng.standard_normal((H, rank)))
    return Q @ Q.T


def named_matrix(spec: str, H: int, seed: int = 0) -> np.ndarray:
    if spec == "identity":
        return np.eye(H)
    if spec == "zero":
        return np.zeros((H, H))
    if spec == "random":
        return np.random.default_rng(seed).standard_normal((H, H)) / math.sqrt(H)
    if spec == "projection":
        return random_projection(H, np.random.default_rng(seed))
    M = np.loadtxt(spec, delimiter=",", ndmin=2)
    return M


def cmd_crossterm(out: Path, P: np.ndarray, sigma: float = 1.0, trials: int = 100_000, seed: int = 0):
    res = _loss.crossterm_mc(P, sigma, trials, seed)
    write_rows([(P.shape[0], sigma, trials, *res)],
               ("H", "sigma", "trials", "empirical", "analytic", "stderr"), out / "crossterm.csv")
    return res


def cmd_bounds(out: Path, n_grid=(50, 100, 200, 400), dependence: str = "independent",
               replicates: int = 50, reference_n: int | None = None, seed: int = 0,
               delta: float = 0.05, mc_draws: int = 200, c0: float = 1.0):
    rows = _bounds.convergence_study(dependence, n_grid, replicates, reference_n, seed, delta,
                                     mc_draws, c0)
    write_rows(rows, _bounds.ConvergenceRow._fields, out / "convergence.csv")
    n = max(n_grid)
    rng = np.random.default_rng([seed, 99])
    r, s = _bounds.draw_pairs(dependence, n, rng)
    total, rep_k, rep_l = _bounds.hsic_bound(r, s, delta=delta, mc_draws=mc_draws, seed=seed, c0=c0)
    report = {"n": n, "dependence": dependence, "total": total,
              "residual_kernel": rep_k.to_dict(), "noise_kernel": rep_l.to_dict()}
    (out / "bound_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return rows, report


def default_out(cfg: RunConfig | None, flag: str | None, command: str) -> Path:
    if flag:
        return Path(flag)
    if cfg is not None:
        return Path(cfg.out_dir)
    return Path(os.environ.get("RILOSS_OUT", "runs")) / command
