"""
Experiment orchestration: data -> CCA group selection -> GMR / GPR
regressors -> held-out RMSE grid, plus per-participant correlation tables.

A grid cell is one ``(scenario, channel, method, threshold)``. Plain GMR
and GPR ignore the threshold; their cells repeat the same fit for every
threshold so the grid stays rectangular.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import plotting
from .cca import DEFAULT_RIDGE, group_correlations, select_features
from .dataset import (
    GROUP_ORDER,
    HOST_HISTORY,
    NON_HOST,
    SCENARIOS,
    Channel,
    SynthConfig,
    TargetSpec,
    Trial,
    load_trials,
    pool_designs,
    raw_design,
    standardize_design,
    synthesize_trials,
)
from .errors import CcaDriveError, InvalidConfig, IoFailure, ShapeMismatch
from .gmm_gmr import fit_gmr, gmr_predict, select_k_bic
from .gpr import KERNELS, fit_gpr, gpr_predict

log = logging.getLogger(__name__)

METHODS = ("GMR", "GPR", "CCA+GMR", "CCA+GPR")
DEFAULT_THRESHOLDS = (0.80, 0.85, 0.90, 0.95)
CSV_COLUMNS = ("scenario", "channel", "method", "threshold", "rmse", "n_train", "n_test", "selected_groups")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _strict(cls, d: Mapping, where: str):
    if not isinstance(d, Mapping):
        raise InvalidConfig(f"{where} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise InvalidConfig(f"unknown keys in {where}: {sorted(unknown)}")
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


@dataclass(frozen=True)
class DataSource:
    """Either a trial CSV (``csv``) or synthetic generation settings."""

    csv: str | None = None
    scenarios: tuple[str, ...] = SCENARIOS
    trials_per_scenario: int = 50
    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self):
        for s in self.scenarios:
            if s not in SCENARIOS:
                raise InvalidConfig(f"unknown scenario {s!r}")
        if self.trials_per_scenario < 1:
            raise InvalidConfig("trials_per_scenario must be >= 1")

    @classmethod
    def from_dict(cls, d) -> "DataSource":
        kw = _strict(cls, d, "data")
        if "synth" in kw:
            kw["synth"] = SynthConfig.from_dict(d["synth"])
        return cls(**kw)

    def to_dict(self) -> dict:
        out = {"csv": self.csv, "scenarios": list(self.scenarios),
               "trials_per_scenario": self.trials_per_scenario, "seed": self.seed}
        out["synth"] = self.synth.to_dict()
        return out

    def load(self) -> list[Trial]:
        if self.csv is not None:
            return [t for t in load_trials(self.csv) if t.scenario in self.scenarios]
        return synthesize_trials(self.scenarios, self.trials_per_scenario, self.synth, self.seed)


@dataclass(frozen=True)
class SplitSettings:
    train_fraction: float = 0.7
    seed: int = 0
    repetitions: int = 5

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise InvalidConfig("train_fraction must lie in (0, 1)")
        if self.repetitions < 1:
            raise InvalidConfig("repetitions must be >= 1")


@dataclass(frozen=True)
class GmmSettings:
    K: int = 5
    restarts: int = 1
    bic: bool = False
    max_train_rows: int | None = 2000
    tol: float = 1e-7
    max_iter: int = 500

    def __post_init__(self):
        if self.K < 1 or self.restarts < 1:
            raise InvalidConfig("gmm K and restarts must be >= 1")


@dataclass(frozen=True)
class GprSettings:
    restarts: int = 2
    kernel: str = "exponential"
    max_train_rows: int | None = 200
    max_iter: int = 200

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise InvalidConfig(f"unknown kernel {self.kernel!r}")
        if self.restarts < 1:
            raise InvalidConfig("gpr restarts must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataSource = field(default_factory=DataSource)
    channels: tuple[str, ...] = ("longitudinal", "lateral")
    horizon: int = 5
    lags: int = 0
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    methods: tuple[str, ...] = METHODS
    split: SplitSettings = field(default_factory=SplitSettings)
    gmm: GmmSettings = field(default_factory=GmmSettings)
    gpr: GprSettings = field(default_factory=GprSettings)
    ridge: float = DEFAULT_RIDGE
    output_dir: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        th = self.thresholds
        if not th or any(not 0 < t < 1 for t in th) or any(b <= a for a, b in zip(th, th[1:])):
            raise InvalidConfig("thresholds must be strictly increasing values in (0, 1)")
        for m in self.methods:
            if m not in METHODS:
                raise InvalidConfig(f"unknown method {m!r}")
        if not self.channels:
            raise InvalidConfig("at least one channel is required")
        for c in self.channels:
            if c not in {ch.value for ch in Channel}:
                raise InvalidConfig(f"unknown channel {c!r}")
        TargetSpec(Channel(self.channels[0]), self.horizon)
        if int(self.lags) != self.lags or self.lags < 0:
            raise InvalidConfig("lags must be a non-negative integer")
        if self.ridge < 0:
            raise InvalidConfig("ridge must be non-negative")

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        kw = _strict(cls, d, "config")
        if "data" in kw:
            kw["data"] = DataSource.from_dict(d["data"])
        for name, sub in (("split", SplitSettings), ("gmm", GmmSettings), ("gpr", GprSettings)):
            if name in kw:
                kw[name] = sub(**_strict(sub, d[name], name))
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "data": self.data.to_dict(),
            "channels": list(self.channels),
            "horizon": self.horizon,
            "lags": self.lags,
            "thresholds": list(self.thresholds),
            "methods": list(self.methods),
            "split": asdict(self.split),
            "gmm": asdict(self.gmm),
            "gpr": asdict(self.gpr),
            "ridge": self.ridge,
            "output_dir": self.output_dir,
        }


# ---------------------------------------------------------------------------
# Report types
# ---------------------------------------------------------------------------


def _num(x):
    """JSON-safe float: NaN becomes null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _from_num(x):
    return float("nan") if x is None else float(x)


@dataclass
class CellResult:
    scenario: str
    channel: str
    method: str
    threshold: float
    rmse: float = float("nan")
    nrmse: float = float("nan")
    n_train: int = 0
    n_test: int = 0
    selected_groups: tuple[str, ...] = ()
    selection_counts: dict[str, int] = field(default_factory=dict)
    rmse_reps: list[float] = field(default_factory=list)
    fits: list[dict] = field(default_factory=list)
    failed: bool = False
    diagnostic: str = ""
    note: str = ""

    @property
    def key(self):
        return (self.scenario, self.channel, self.method, self.threshold)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "channel": self.channel,
            "method": self.method,
            "threshold": self.threshold,
            "rmse": _num(self.rmse),
            "nrmse": _num(self.nrmse),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "selected_groups": list(self.selected_groups),
            "selection_counts": dict(self.selection_counts),
            "rmse_reps": [_num(r) for r in self.rmse_reps],
            "fits": self.fits,
            "failed": self.failed,
            "diagnostic": self.diagnostic,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d) -> "CellResult":
        d = dict(d)
        d["rmse"] = _from_num(d["rmse"])
        d["nrmse"] = _from_num(d.get("nrmse"))
        d["rmse_reps"] = [_from_num(r) for r in d.get("rmse_reps", [])]
        d["selected_groups"] = tuple(d.get("selected_groups", ()))
        return cls(**d)


@dataclass(frozen=True)
class CorrelationRow:
    channel: str
    participant: str
    rho1: float
    diagnostic: str = ""


@dataclass
class EvaluationReport:
    scenarios: tuple[str, ...]
    channels: tuple[str, ...]
    methods: tuple[str, ...]
    thresholds: tuple[float, ...]
    cells: list[CellResult] = field(default_factory=list)
    aggregate: list[CellResult] = field(default_factory=list)
    correlations: list[CorrelationRow] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def cell(self, scenario, channel, method, threshold) -> CellResult:
        for c in self.cells:
            if c.key == (scenario, channel, method, threshold):
                return c
        raise KeyError((scenario, channel, method, threshold))

    def to_dict(self) -> dict:
        return {
            "scenarios": list(self.scenarios),
            "channels": list(self.channels),
            "methods": list(self.methods),
            "thresholds": list(self.thresholds),
            "cells": [c.to_dict() for c in self.cells],
            "aggregate": [c.to_dict() for c in self.aggregate],
            "correlations": [
                {"channel": r.channel, "participant": r.participant, "rho1": _num(r.rho1),
                 "diagnostic": r.diagnostic}
                for r in self.correlations
            ],
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d) -> "EvaluationReport":
        return cls(
            scenarios=tuple(d["scenarios"]),
            channels=tuple(d["channels"]),
            methods=tuple(d["methods"]),
            thresholds=tuple(float(t) for t in d["thresholds"]),
            cells=[CellResult.from_dict(c) for c in d["cells"]],
            aggregate=[CellResult.from_dict(c) for c in d.get("aggregate", [])],
            correlations=[
                CorrelationRow(r["channel"], r["participant"], _from_num(r["rho1"]), r.get("diagnostic", ""))
                for r in d.get("correlations", [])
            ],
            config=d.get("config", {}),
        )

    @classmethod
    def from_json(cls, path) -> "EvaluationReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Metrics and analysis
# ---------------------------------------------------------------------------


def rmse(predictions, truth) -> float:
    p = np.asarray(predictions, dtype=float).reshape(-1)
    t = np.asarray(truth, dtype=float).reshape(-1)
    if p.size != t.size or p.size == 0:
        raise ShapeMismatch(f"rmse needs equal non-empty lengths, got {p.size} and {t.size}")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def correlation_report(trials: Sequence[Trial], target: TargetSpec, lags: int = 0,
                       ridge: float = DEFAULT_RIDGE) -> list[CorrelationRow]:
    """Pooled first canonical correlation of each non-host participant, both channels.

    ``target`` supplies the horizon; both channels are always reported,
    longitudinal first, rows sorted by participant.
    """
    if not trials:
        raise InvalidConfig("correlation_report needs at least one trial")
    rows = []
    for channel in (Channel.LONGITUDINAL, Channel.LATERAL):
        spec = TargetSpec(channel, target.horizon)
        design = standardize_design(pool_designs([raw_design(t, spec, lags) for t in trials]))
        scores = group_correlations(design, ridge)
        for p in sorted((p for p in NON_HOST if p.value in scores), key=lambda p: p.value):
            rho, diag = scores[p.value]
            rows.append(CorrelationRow(channel.value, p.value, rho, diag))
    return rows


def split_trials(trial_ids: Sequence[str], train_fraction: float, rng: np.random.Generator):
    """Shuffle trial ids and cut them into (train, test); both non-empty."""
    ids = list(trial_ids)
    if len(ids) < 2:
        raise InvalidConfig("need at least 2 trials to split")
    order = rng.permutation(len(ids))
    n_train = min(max(int(round(train_fraction * len(ids))), 1), len(ids) - 1)
    return [ids[i] for i in sorted(order[:n_train])], [ids[i] for i in sorted(order[n_train:])]


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------


def _regressor(method: str) -> str:
    return method.split("+")[-1]


def _subsample(n: int, cap: int | None, rng: np.random.Generator) -> np.ndarray:
    if cap is None or n <= cap:
        return np.arange(n)
    return np.sort(rng.choice(n, size=cap, replace=False))


def _fit_and_predict(regressor, X_train, y_train, X_test, config: ExperimentConfig, seed: int):
    if regressor == "GPR":
        model = fit_gpr(X_train, y_train, restarts=config.gpr.restarts, seed=seed,
                        kind=config.gpr.kernel, max_iter=config.gpr.max_iter)
        pred = gpr_predict(model, X_test, return_cov=False)
        info = {"sigma_f": model.hyper.sigma_f, "sigma_n": model.hyper.sigma_n, "nlml": model.nlml_value}
        return pred, info
    K = config.gmm.K
    if config.gmm.bic:
        K = select_k_bic(X_train, y_train, range(1, 9), seed, config.gmm.restarts)
    model, trace = fit_gmr(X_train, y_train, K, seed, config.gmm.restarts, config.gmm.tol, config.gmm.max_iter)
    mean, _ = gmr_predict(model, X_test)
    info = {"K": model.K, "log_likelihood": trace.log_likelihoods[-1], "n_iter": trace.n_iter}
    return mean[:, 0], info


def _run_block(train_trials, test_trials, channel, config: ExperimentConfig, seed_seq, raw_cache):
    """All cells of one (scenario, repetition, channel)."""
    spec = TargetSpec(Channel(channel), config.horizon)
    raw_train = pool_designs([raw_cache(t, spec) for t in train_trials])
    raw_test = pool_designs([raw_cache(t, spec) for t in test_trials])
    train = standardize_design(raw_train)
    test = standardize_design(raw_test, reference=train)
    scores = group_correlations(train, config.ridge)
    selections = {thr: select_features(train, thr, config.ridge, scores) for thr in config.thresholds}

    rng = np.random.default_rng(seed_seq)
    rows = {
        "GPR": _subsample(train.n_rows, config.gpr.max_train_rows, rng),
        "GMR": _subsample(train.n_rows, config.gmm.max_train_rows, rng),
    }
    fit_seed = int(seed_seq.generate_state(1)[0])
    truth = raw_test.target[:, 0]
    truth_sd = float(np.std(truth, ddof=1)) if truth.size > 1 else float("nan")
    all_groups = train.group_names

    results = {}
    cache = {}
    for method in config.methods:
        regressor = _regressor(method)
        for thr in config.thresholds:
            groups = all_groups if not method.startswith("CCA+") else selections[thr].selected_groups
            out = {"groups": groups, "n_test": test.n_rows, "n_train": int(rows[regressor].size)}
            key = (regressor, groups)
            if key not in cache:
                try:
                    X_tr = train.stack(groups)
                    keep = X_tr[rows[regressor]].std(axis=0) > 0
                    X_tr = X_tr[rows[regressor]][:, keep]
                    X_te = test.stack(groups)[:, keep]
                    y_tr = train.target[rows[regressor], 0]
                    pred_z, info = _fit_and_predict(regressor, X_tr, y_tr, X_te, config, fit_seed)
                    pred = train.target_stats.invert(pred_z[:, None])[:, 0]
                    value = rmse(pred, truth)
                    cache[key] = {"rmse": value, "nrmse": value / truth_sd, "fit": info}
                except (CcaDriveError, np.linalg.LinAlgError, ValueError) as exc:
                    cache[key] = {"error": f"{type(exc).__name__}: {exc}"}
            out.update(cache[key])
            if method.startswith("CCA+") and groups == (HOST_HISTORY,):
                out["note"] = "no participant passed the threshold; host history only"
            results[(method, thr)] = out
    return results, {g: s for g, (s, _) in scores.items()}


def repetition_split(config: ExperimentConfig, scenario: str, rep: int, trial_ids: Sequence[str]):
    """Train ids, test ids and per-channel seed sequences of one repetition."""
    seq = np.random.SeedSequence([config.split.seed & (2**63 - 1), SCENARIOS.index(scenario), rep])
    split_seq, *channel_seqs = seq.spawn(1 + len(config.channels))
    train_ids, test_ids = split_trials(trial_ids, config.split.train_fraction, np.random.default_rng(split_seq))
    return train_ids, test_ids, channel_seqs


def run_experiment(config: ExperimentConfig, trials: Sequence[Trial] | None = None) -> EvaluationReport:
    """Evaluate the full method grid; ``trials`` overrides ``config.data``."""
    trials = list(trials) if trials is not None else config.data.load()
    by_scenario: dict[str, list[Trial]] = {}
    for t in trials:
        by_scenario.setdefault(t.scenario, []).append(t)
    scenarios = tuple(s for s in SCENARIOS if s in by_scenario and s in config.data.scenarios)

    raw_memo = {}

    def raw_cache(trial, spec):
        key = (trial.trial_id, trial.scenario, spec.channel)
        if key not in raw_memo:
            raw_memo[key] = raw_design(trial, spec, config.lags)
        return raw_memo[key]

    cells: dict[tuple, CellResult] = {}
    for scenario in scenarios:
        pool = {t.trial_id: t for t in by_scenario[scenario]}
        for channel in config.channels:
            for method in config.methods:
                for thr in config.thresholds:
                    cells[(scenario, channel, method, thr)] = CellResult(scenario, channel, method, thr)
        for rep in range(config.split.repetitions):
            try:
                train_ids, test_ids, channel_seqs = repetition_split(config, scenario, rep, list(pool))
            except CcaDriveError as exc:
                for c in cells.values():
                    if c.scenario == scenario:
                        c.rmse_reps.append(float("nan"))
                        c.diagnostic = f"{type(exc).__name__}: {exc}"
                continue
            train_trials = [pool[i] for i in train_ids]
            test_trials = [pool[i] for i in test_ids]
            for channel, cseq in zip(config.channels, channel_seqs):
                log.info("scenario %s rep %d channel %s", scenario, rep, channel)
                try:
                    block, scores = _run_block(train_trials, test_trials, channel, config, cseq, raw_cache)
                except CcaDriveError as exc:
                    block = {(m, t): {"error": f"{type(exc).__name__}: {exc}"}
                             for m in config.methods for t in config.thresholds}
                    scores = {}
                for (method, thr), out in block.items():
                    cell = cells[(scenario, channel, method, thr)]
                    if "error" in out:
                        cell.rmse_reps.append(float("nan"))
                        cell.diagnostic = out["error"]
                        continue
                    cell.rmse_reps.append(out["rmse"])
                    cell.fits.append({"rep": rep, "nrmse": out["nrmse"], **out["fit"],
                                      "rho1": {g: _num(v) for g, v in scores.items()},
                                      "groups": list(out["groups"])})
                    cell.n_train += out["n_train"]
                    cell.n_test += out["n_test"]
                    for g in out["groups"]:
                        cell.selection_counts[g] = cell.selection_counts.get(g, 0) + 1
                    if out.get("note"):
                        cell.note = out["note"]

    for cell in cells.values():
        ok = [r for r in cell.rmse_reps if np.isfinite(r)]
        if not ok:
            cell.failed = True
            cell.diagnostic = cell.diagnostic or "no successful repetition"
            continue
        cell.rmse = float(np.mean(ok))
        cell.nrmse = float(np.mean([f["nrmse"] for f in cell.fits]))
        cell.n_train = int(round(cell.n_train / len(ok)))
        cell.n_test = int(round(cell.n_test / len(ok)))
        cell.selected_groups = tuple(g for g in GROUP_ORDER if cell.selection_counts.get(g, 0) * 2 > len(ok))
        cell.selection_counts = {g: cell.selection_counts[g] for g in GROUP_ORDER if g in cell.selection_counts}

    aggregate = []
    for scenario in scenarios:
        for method in config.methods:
            for thr in config.thresholds:
                parts = [cells[(scenario, ch, method, thr)] for ch in config.channels]
                agg = CellResult(scenario, "aggregate", method, thr,
                                 n_train=sum(p.n_train for p in parts), n_test=sum(p.n_test for p in parts))
                if any(p.failed for p in parts):
                    agg.failed, agg.diagnostic = True, "a channel cell failed"
                else:
                    # quadratic mean over channels of RMSE / held-out target std
                    agg.nrmse = agg.rmse = float(np.sqrt(np.mean([p.nrmse ** 2 for p in parts])))
                    agg.note = "normalized RMSE (quadratic mean over channels)"
                aggregate.append(agg)

    correlations = []
    try:
        selected_trials = [t for s in scenarios for t in by_scenario[s]]
        correlations = correlation_report(selected_trials, TargetSpec(Channel.LONGITUDINAL, config.horizon),
                                          config.lags, config.ridge)
    except CcaDriveError as exc:
        log.warning("correlation report failed: %s", exc)

    return EvaluationReport(
        scenarios=scenarios,
        channels=tuple(config.channels),
        methods=tuple(config.methods),
        thresholds=tuple(config.thresholds),
        cells=list(cells.values()),
        aggregate=aggregate,
        correlations=correlations,
        config=config.to_dict(),
    )


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return "nan" if x is None or not np.isfinite(x) else repr(float(x))


def _cells_csv(cells) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for c in cells:
        writer.writerow([c.scenario, c.channel, c.method, f"{c.threshold:.2f}", _fmt(c.rmse),
                         c.n_train, c.n_test, ";".join(c.selected_groups)])
    return buf.getvalue()


def _correlations_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("channel", "participant", "rho1"))
    for r in rows:
        writer.writerow([r.channel, r.participant, _fmt(r.rho1)])
    return buf.getvalue()


def emit_report(report: EvaluationReport, out_dir, formats=("csv", "json", "svg")) -> list[Path]:
    """Write the report; file names are fixed so reruns overwrite in place."""
    formats = set(formats)
    unknown = formats - {"csv", "json", "svg"}
    if unknown:
        raise InvalidConfig(f"unknown report formats {sorted(unknown)}")
    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            p = out_dir / "report.json"
            p.write_text(report.to_json())
            written.append(p)
        if "csv" in formats:
            for name, text in (("rmse.csv", _cells_csv(report.cells)),
                               ("rmse_aggregate.csv", _cells_csv(report.aggregate)),
                               ("correlations.csv", _correlations_csv(report.correlations))):
                p = out_dir / name
                p.write_text(text)
                written.append(p)
        if "svg" in formats:
            values = {c.key: (c.rmse if not c.failed else float("nan")) for c in report.cells}
            fig = plotting.rmse_figure(values, report.scenarios, report.channels, report.methods,
                                       report.thresholds)
            written.append(plotting.save(fig, out_dir / "rmse.svg"))
            rows = [(r.channel, r.participant, r.rho1) for r in report.correlations]
            channels = tuple(dict.fromkeys(r.channel for r in report.correlations)) or report.channels
            fig = plotting.correlation_figure(rows, channels)
            written.append(plotting.save(fig, out_dir / "correlations.svg"))
    except OSError as exc:
        raise IoFailure(f"could not write report to {out_dir}: {exc}") from exc
    return written


def emit_correlations(rows: Sequence[CorrelationRow], out_dir, formats=("csv", "json", "svg")) -> list[Path]:
    """Outputs of the standalone correlation analysis."""
    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if "csv" in formats:
            p = out_dir / "correlations.csv"
            p.write_text(_correlations_csv(rows))
            written.append(p)
        if "json" in formats:
            p = out_dir / "correlations.json"
            p.write_text(json.dumps([{"channel": r.channel, "participant": r.participant, "rho1": _num(r.rho1),
                                      "diagnostic": r.diagnostic} for r in rows], indent=1) + "\n")
            written.append(p)
        if "svg" in formats:
            channels = tuple(dict.fromkeys(r.channel for r in rows))
            fig = plotting.correlation_figure([(r.channel, r.participant, r.rho1) for r in rows], channels)
            written.append(plotting.save(fig, out_dir / "correlations.svg"))
    except OSError as exc:
        raise IoFailure(f"could not write correlations to {out_dir}: {exc}") from exc
    return written

