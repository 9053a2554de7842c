"""The benchmark matrix: (split x strategy x seed) cells with aggregation.

Each cell trains one predictor and evaluates it on its split's held-out
region.  Inverse surrogates are a separate stage: one chain per split,
shared by every strategy and seed in that split.  Results are emitted as
deterministic CSV/JSON (mean +- spread per cell, raw per-run rows, and
per-location absolute errors) plus rendered figures.
"""

from __future__ import annotations

import json
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .dataworld import SplitSpec, StDataset, WorldConfig, generate_world, split
from .flow import FlowTrainConfig, TrainedChain, train_inverse_surrogate
from .pipelines import TrainConfig, evaluate, resolve_strategy, train

SCHEMA_VERSION = 1


class ExperimentError(ValueError):
    pass


def _default_splits() -> list[SplitSpec]:
    return [
        SplitSpec(kind="geo-region", threshold_lon=-100.0, train_side="west"),
        SplitSpec(kind="temperature-zone", train_zone="hot", test_zone="cold"),
        SplitSpec(kind="random-groups", n_groups=4, group_seed=0, test_group=1),
    ]


ALL_STRATEGIES = ("basenet", "sim", "simphy", "regfair", "selfreg", "simfair", "simfair-p")


@dataclass
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    world_seed: int = 7
    splits: list = field(default_factory=_default_splits)
    strategies: tuple = ALL_STRATEGIES
    seeds: tuple = (1, 2, 3, 4, 5)
    train: TrainConfig = field(default_factory=TrainConfig)
    flow: FlowTrainConfig = field(default_factory=FlowTrainConfig)
    chain_seed: int = 0
    agg: str = "std"          # std | stderr
    jobs: int = 1
    figures: bool = True

    def validate(self):
        self.world.validate()
        if len(self.seeds) < 1:
            raise ExperimentError("need at least one seed")
        for s in self.strategies:
            resolve_strategy(s)
        for sp in self.splits:
            sp.validate()
        if self.agg not in ("std", "stderr"):
            raise ExperimentError(f"agg must be std or stderr, got {self.agg!r}")

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "world": json.loads(self.world.to_json()),
            "world_seed": self.world_seed,
            "splits": [sp.to_json_dict() for sp in self.splits],
            "strategies": list(self.strategies),
            "seeds": list(self.seeds),
            "train": self.train.to_json_dict(),
            "flow": asdict(self.flow),
            "chain_seed": self.chain_seed,
            "agg": self.agg,
            "jobs": self.jobs,
            "figures": self.figures,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d.pop("schema_version", None)
        return cls(
            world=WorldConfig.from_json(json.dumps(d["world"])) if "world" in d else WorldConfig(),
            world_seed=d.get("world_seed", 7),
            splits=[SplitSpec.from_json_dict(s) for s in d.get("splits", [])] or _default_splits(),
            strategies=tuple(d.get("strategies", ALL_STRATEGIES)),
            seeds=tuple(d.get("seeds", (1, 2, 3, 4, 5))),
            train=TrainConfig.from_json_dict(d.get("train", {})),
            flow=FlowTrainConfig(**d.get("flow", {})),
            chain_seed=d.get("chain_seed", 0),
            agg=d.get("agg", "std"),
            jobs=d.get("jobs", 1),
            figures=d.get("figures", True),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_json_dict(json.loads(text))


def task_matrix(cfg: ExperimentConfig) -> list[dict]:
    return [{"split": sp.label(), "strategy": s, "seed": int(seed)}
            for sp in cfg.splits for s in cfg.strategies for seed in cfg.seeds]


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, check=False)
        return out.stdout.strip() or "unknown"
    except OSError:
        return "unknown"


# ---------------------------------------------------------------------------
# Cell execution (worker side)
# ---------------------------------------------------------------------------

_WORKER_CACHE: dict = {}


def _splits_for(cfg: ExperimentConfig) -> dict:
    key = json.dumps(cfg.to_json_dict(), sort_keys=True)
    cached = _WORKER_CACHE.get(key)
    if cached is None:
        world = generate_world(cfg.world, cfg.world_seed)
        cached = {sp.label(): split(world, sp) for sp in cfg.splits}
        _WORKER_CACHE.clear()
        _WORKER_CACHE[key] = cached
    return cached


def run_cell(cfg: ExperimentConfig, split_label: str, strategy: str, seed: int,
             chain_portable: dict | None) -> dict:
    """Train and evaluate a single (split, strategy, seed) cell."""
    tr, te = _splits_for(cfg)[split_label]
    chain = TrainedChain.from_portable(chain_portable) if chain_portable else None
    model = cfg.train.build_model(tr.X.shape[1], seed=seed)
    model, _ = train(strategy, model, tr, te.features_only(), chain, cfg.train, seed=seed)
    metrics = evaluate(model, te)
    return {
        "split": split_label, "strategy": strategy, "seed": int(seed), "status": "ok",
        "rmse": metrics.rmse, "pearson_r": metrics.pearson_r, "fairness": metrics.fairness,
        "error": "",
        "per_location": [{"split": split_label, "strategy": strategy, "seed": int(seed), **row}
                         for row in metrics.per_location],
    }


def _run_cell_payload(payload: tuple) -> dict:
    cfg_dict, split_label, strategy, seed, chain_portable = payload
    cfg = ExperimentConfig.from_json_dict(cfg_dict)
    try:
        return run_cell(cfg, split_label, strategy, seed, chain_portable)
    except Exception as err:  # partial failure: mark the cell, keep the rest
        return {"split": split_label, "strategy": strategy, "seed": int(seed),
                "status": "failed", "rmse": float("nan"), "pearson_r": float("nan"),
                "fairness": float("nan"), "error": f"{type(err).__name__}: {err}",
                "per_location": []}


# ---------------------------------------------------------------------------
# Aggregation and emission
# ---------------------------------------------------------------------------

def _fmt_pm(mean: float, spread: float) -> str:
    return f"{mean:.2f} (±{spread:.2f})"


def aggregate(rows: list[dict], cfg: ExperimentConfig) -> list[dict]:
    table = []
    for sp in cfg.splits:
        for strategy in cfg.strategies:
            cell = [r for r in rows
                    if r["split"] == sp.label() and r["strategy"] == strategy
                    and r["status"] == "ok"]
            out = {"split": sp.label(), "strategy": strategy, "n_runs": len(cell)}
            for metric, col in (("rmse", "rmse"), ("corr", "pearson_r"),
                                ("fairness", "fairness")):
                vals = np.asarray([r[col] for r in cell])
                if len(vals) == 0:
                    mean = spread = float("nan")
                else:
                    mean = float(vals.mean())
                    spread = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
                    if cfg.agg == "stderr" and len(vals) > 1:
                        spread /= np.sqrt(len(vals))
                out[f"{metric}_mean"] = mean
                out[f"{metric}_std"] = spread
                out[f"{metric}_fmt"] = _fmt_pm(mean, spread)
            table.append(out)
    return table


def _write_csv(path, header: list[str], rows: list[list]):
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _num(v) -> str:
    return repr(float(v))


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Execute the full matrix and write the result bundle into out_dir."""
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    needs_chain = {s for s in cfg.strategies if resolve_strategy(s).needs_chain}
    chains: dict = {}
    chain_metrics: dict = {}
    if needs_chain:
        for sp in cfg.splits:
            tr, _ = _splits_for(cfg)[sp.label()]
            trained = train_inverse_surrogate(cfg.world.model(), tr.sim_side(),
                                              cfg.flow, seed=cfg.chain_seed)
            chains[sp.label()] = trained.to_portable()
            chain_metrics[sp.label()] = trained.metrics

    tasks = [(cfg.to_json_dict(), t["split"], t["strategy"], t["seed"],
              chains.get(t["split"]) if resolve_strategy(t["strategy"]).needs_chain else None)
             for t in task_matrix(cfg)]

    if cfg.jobs <= 1:
        rows = [_run_cell_payload(t) for t in tasks]
    else:
        os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
        os.environ.setdefault("OMP_NUM_THREADS", "1")
        import multiprocessing as mp
        with ProcessPoolExecutor(max_workers=cfg.jobs,
                                 mp_context=mp.get_context("spawn")) as pool:
            rows = list(pool.map(_run_cell_payload, tasks))

    per_location = [r2 for r in rows for r2 in r.pop("per_location")]
    table = aggregate(rows, cfg)

    _write_csv(out / "results_raw.csv",
               ["split", "strategy", "seed", "status", "rmse", "pearson_r", "fairness", "error"],
               [[r["split"], r["strategy"], r["seed"], r["status"],
                 _num(r["rmse"]), _num(r["pearson_r"]), _num(r["fairness"]), r["error"]]
                for r in rows])
    _write_csv(out / "results_table.csv",
               ["split", "strategy", "n_runs",
                "rmse_mean", "rmse_std", "rmse_fmt",
                "corr_mean", "corr_std", "corr_fmt",
                "fairness_mean", "fairness_std", "fairness_fmt"],
               [[t["split"], t["strategy"], t["n_runs"],
                 _num(t["rmse_mean"]), _num(t["rmse_std"]), t["rmse_fmt"],
                 _num(t["corr_mean"]), _num(t["corr_std"]), t["corr_fmt"],
                 _num(t["fairness_mean"]), _num(t["fairness_std"]), t["fairness_fmt"]]
                for t in table])
    _write_csv(out / "per_location_errors.csv",
               ["split", "strategy", "seed", "location_id", "n", "mae", "rmse"],
               [[r["split"], r["strategy"], r["seed"], r["location_id"], r["n"],
                 _num(r["mae"]), _num(r["rmse"])] for r in per_location])

    bundle = {"schema_version": SCHEMA_VERSION, "table": table, "runs": rows}
    (out / "results.json").write_text(json.dumps(bundle, indent=2, sort_keys=True))
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_json_dict(),
        "git_describe": _git_describe(),
        "seeds": list(cfg.seeds),
        "chain_metrics": chain_metrics,
        "cells": [{k: r[k] for k in ("split", "strategy", "seed", "status", "error")}
                  for r in rows],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    if cfg.figures:
        from . import figures
        fig_dir = out / "figures"
        fig_dir.mkdir(exist_ok=True)
        for sp in cfg.splits:
            figures.error_distribution_figure(per_location, sp.label(),
                                              fig_dir / f"error_distribution_{sp.label()}.png")
        figures.metrics_bar_figure(table, "fairness", fig_dir / "metrics_fairness.png")
        figures.metrics_bar_figure(table, "rmse", fig_dir / "metrics_rmse.png")

    return bundle
