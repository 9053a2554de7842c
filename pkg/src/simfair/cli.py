"""Command-line front end.

Subcommands: ``world gen``, ``split``, ``flow train``, ``flow study-swap``,
``train``, ``eval``, ``experiment``.  Exit codes: 0 success, 1 usage error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


class _UsageError(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(1)


def _build_parser() -> _Parser:
    p = _Parser(prog="simfair",
                description="Simulation-guided location-fairness temperature lab.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    world = sub.add_parser("world", help="synthetic world operations")
    wsub = world.add_subparsers(dest="world_command", required=True, parser_class=_Parser)
    gen = wsub.add_parser("gen", help="generate a synthetic world CSV")
    gen.add_argument("--config", help="WorldConfig JSON file (defaults apply if omitted)")
    gen.add_argument("--kind", choices=("pm1", "pm2"), help="simulator kind override")
    gen.add_argument("--shift", type=float, help="distribution-shift strength override")
    gen.add_argument("--stations", type=int, help="station count override")
    gen.add_argument("--timesteps", type=int, help="timestep count override")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)

    sp = sub.add_parser("split", help="partition a world CSV into train/test")
    sp.add_argument("--kind", required=True,
                    choices=("geo-region", "temperature-zone", "random-groups", "temporal"))
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out-train", required=True)
    sp.add_argument("--out-test", required=True)
    sp.add_argument("--threshold-lon", type=float, default=-100.0)
    sp.add_argument("--train-side", choices=("west", "east"), default="west")
    sp.add_argument("--train-zone", choices=("hot", "warm", "cold"), default="hot")
    sp.add_argument("--test-zone", choices=("hot", "warm", "cold"), default="cold")
    sp.add_argument("--n-groups", type=int, default=4)
    sp.add_argument("--group-seed", type=int, default=0)
    sp.add_argument("--test-group", type=int, default=1)
    sp.add_argument("--cut-time", type=int, default=None)

    flow = sub.add_parser("flow", help="invertible surrogate operations")
    fsub = flow.add_subparsers(dest="flow_command", required=True, parser_class=_Parser)
    ftrain = fsub.add_parser("train", help="fit the inverse surrogate on a train CSV")
    ftrain.add_argument("--sim", choices=("pm1", "pm2"), required=True)
    ftrain.add_argument("--in", dest="inp", required=True)
    ftrain.add_argument("--out", required=True)
    ftrain.add_argument("--seed", type=int, default=0)
    ftrain.add_argument("--epochs", type=int, default=None)
    ftrain.add_argument("--max-pairs", type=int, default=None)
    fswap = fsub.add_parser("study-swap", help="swapped-pair vs inverted-chain comparison")
    fswap.add_argument("--sim", choices=("pm1", "pm2"), required=True)
    fswap.add_argument("--in", dest="inp", required=True)
    fswap.add_argument("--report", required=True)
    fswap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    fswap.add_argument("--max-pairs", type=int, default=1000)
    fswap.add_argument("--epochs", type=int, default=None)
    fswap.add_argument("--figure", help="optional scatter figure path")

    tr = sub.add_parser("train", help="train a predictor under a strategy")
    tr.add_argument("--strategy", required=True)
    tr.add_argument("--model", choices=("fnn", "lstm"), default="fnn")
    tr.add_argument("--train", dest="train_csv", required=True)
    tr.add_argument("--test-features", dest="test_csv",
                    help="test-region CSV; only its features are used")
    tr.add_argument("--chain", help="inverse surrogate checkpoint")
    tr.add_argument("--seed", type=int, default=1)
    tr.add_argument("--out", required=True)
    tr.add_argument("--history", help="optional JSON-lines training history path")
    tr.add_argument("--epochs", type=int, default=None)
    tr.add_argument("--max-rows", type=int, default=None)
    tr.add_argument("--pm1-loss", choices=("hinge", "literal"), default="hinge")

    ev = sub.add_parser("eval", help="evaluate a model checkpoint on a labelled CSV")
    ev.add_argument("--model", required=True)
    ev.add_argument("--test", required=True)
    ev.add_argument("--out", required=True)

    ex = sub.add_parser("experiment", help="run the full benchmark matrix")
    ex.add_argument("--config", help="ExperimentConfig JSON (defaults apply if omitted)")
    ex.add_argument("--out", required=True)
    ex.add_argument("--dry-run", action="store_true",
                    help="print the run matrix without executing")
    ex.add_argument("--jobs", type=int, default=None)
    ex.add_argument("--agg", choices=("std", "stderr"), default=None)
    ex.add_argument("--seeds", type=int, nargs="+", default=None)
    ex.add_argument("--no-figures", action="store_true")
    ex.add_argument("--write-default-config", action="store_true",
                    help="write the default config JSON to --out and exit")
    return p


def _require_file(path: str, what: str):
    if not Path(path).exists():
        raise FileNotFoundError(f"{what} file not found: {path}")


def _cmd_world_gen(args) -> int:
    from .dataworld import WorldConfig, generate_world, save_csv
    if args.config:
        _require_file(args.config, "world config")
        cfg = WorldConfig.from_json(Path(args.config).read_text())
    else:
        cfg = WorldConfig()
    if args.kind:
        cfg.sim_kind = args.kind
    if args.shift is not None:
        cfg.shift = args.shift
    if args.stations is not None:
        cfg.n_stations = args.stations
    if args.timesteps is not None:
        cfg.n_timesteps = args.timesteps
    data = generate_world(cfg, args.seed)
    save_csv(data, args.out)
    print(f"wrote {data.n} rows ({len(data.stations)} stations, kind={cfg.sim_kind}) to {args.out}")
    return 0


def _cmd_split(args) -> int:
    from .dataworld import SplitSpec, load_csv, save_csv, split
    _require_file(args.inp, "input")
    spec = SplitSpec(kind=args.kind, threshold_lon=args.threshold_lon,
                     train_side=args.train_side, train_zone=args.train_zone,
                     test_zone=args.test_zone, n_groups=args.n_groups,
                     group_seed=args.group_seed, test_group=args.test_group,
                     cut_time=args.cut_time)
    data = load_csv(args.inp)
    train_part, test_part = split(data, spec)
    save_csv(train_part, args.out_train)
    save_csv(test_part, args.out_test)
    print(f"split {spec.label()}: train {train_part.n} rows / test {test_part.n} rows")
    return 0


def _cmd_flow_train(args) -> int:
    from .dataworld import load_csv
    from .flow import FlowTrainConfig, train_inverse_surrogate
    from .simulators import default_model
    _require_file(args.inp, "input")
    data = load_csv(args.inp)
    if data.sim_kind != args.sim:
        raise ValueError(f"{args.inp} carries {data.sim_kind!r} ground-state, not {args.sim!r} "
                         "(the surrogate stage needs the state_* columns)")
    cfg = FlowTrainConfig()
    if args.epochs is not None:
        cfg.epochs = args.epochs
    if args.max_pairs is not None:
        cfg.max_pairs = args.max_pairs
    trained = train_inverse_surrogate(default_model(args.sim), data.sim_side(), cfg,
                                      seed=args.seed)
    trained.save(args.out)
    m = trained.metrics
    print(f"chain saved to {args.out}; held-out target inverse RMSE "
          f"{m['target_inverse_rmse']:.4f} K, forward RMSE per band "
          f"{[round(v, 4) for v in m['forward_rmse']]}")
    return 0


def _cmd_flow_swap(args) -> int:
    from .dataworld import load_csv
    from .flow import FlowTrainConfig, swap_study
    from .simulators import default_model
    _require_file(args.inp, "input")
    data = load_csv(args.inp)
    if data.sim_kind != args.sim:
        raise ValueError(f"{args.inp} carries {data.sim_kind!r} ground-state, not {args.sim!r}")
    cfg = FlowTrainConfig(max_pairs=args.max_pairs)
    if args.epochs is not None:
        cfg.epochs = args.epochs
    report = swap_study(default_model(args.sim), data.sim_side(), cfg, seeds=args.seeds)
    Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True))
    if args.figure:
        from .figures import swap_study_figure
        swap_study_figure(report, args.figure)
    print(f"median held-out target RMSE: swap {report['median_swap_rmse']:.4f} K, "
          f"inverted chain {report['median_inverse_rmse']:.4f} K -> {args.report}")
    return 0


def _cmd_train(args) -> int:
    from .dataworld import load_csv
    from .flow import TrainedChain
    from .pipelines import TrainConfig, resolve_strategy, save_model, train
    _require_file(args.train_csv, "training")
    spec = resolve_strategy(args.strategy)
    cfg = TrainConfig(model=args.model, pm1_loss_variant=args.pm1_loss)
    if args.epochs is not None:
        cfg.epochs = args.epochs
    if args.max_rows is not None:
        cfg.max_rows = args.max_rows

    chain = None
    if spec.needs_chain:
        if not args.chain:
            raise _usage(f"strategy '{spec.name}' requires --chain (trained inverse surrogate)")
        _require_file(args.chain, "chain checkpoint")
        chain = TrainedChain.load(args.chain)

    feats = None
    if args.test_csv:
        _require_file(args.test_csv, "test features")
        feats = load_csv(args.test_csv).features_only()  # labels dropped at the boundary
    elif spec.fairness_source in ("test_self", "test_sim"):
        raise _usage(f"strategy '{spec.name}' requires --test-features")

    data = load_csv(args.train_csv)
    model = cfg.build_model(data.X.shape[1], seed=args.seed)
    model, history = train(spec, model, data, feats, chain, cfg, seed=args.seed)
    save_model(model, args.out)
    if args.history:
        with open(args.history, "w") as fh:
            for entry in history.epochs:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
    final = history.epochs[-1]
    print(f"trained {spec.display} ({args.model}) for {cfg.epochs} epochs; "
          f"final total loss {final['total']:.6f}; saved to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    from .dataworld import load_csv
    from .pipelines import evaluate, load_model
    _require_file(args.model, "model checkpoint")
    _require_file(args.test, "test")
    model = load_model(args.model)
    data = load_csv(args.test)
    metrics = evaluate(model, data)
    Path(args.out).write_text(json.dumps(metrics.to_json_dict(), indent=2, sort_keys=True))
    print(f"rmse={metrics.rmse:.4f} pearson_r={metrics.pearson_r:.4f} "
          f"fairness={metrics.fairness:.4f} -> {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    from .experiments import ExperimentConfig, run_experiment, task_matrix
    if args.write_default_config:
        cfg = ExperimentConfig()
        Path(args.out).write_text(json.dumps(cfg.to_json_dict(), indent=2, sort_keys=True))
        print(f"wrote default experiment config to {args.out}")
        return 0
    if args.config:
        _require_file(args.config, "experiment config")
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
    else:
        cfg = ExperimentConfig()
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.agg is not None:
        cfg.agg = args.agg
    if args.seeds is not None:
        cfg.seeds = tuple(args.seeds)
    if args.no_figures:
        cfg.figures = False
    cfg.validate()
    if args.dry_run:
        matrix = task_matrix(cfg)
        for t in matrix:
            print(f"{t['split']}\t{t['strategy']}\tseed={t['seed']}")
        print(f"total: {len(matrix)} cells")
        return 0
    bundle = run_experiment(cfg, args.out)
    ok = sum(1 for r in bundle["runs"] if r["status"] == "ok")
    print(f"completed {ok}/{len(bundle['runs'])} cells -> {args.out}")
    return 0


def _usage(msg: str) -> _UsageError:
    print(f"simfair: error: {msg}", file=sys.stderr)
    return _UsageError(1)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        return err.code if isinstance(err.code, int) else 1
    handlers = {
        ("world", "gen"): _cmd_world_gen,
        ("split", None): _cmd_split,
        ("flow", "train"): _cmd_flow_train,
        ("flow", "study-swap"): _cmd_flow_swap,
        ("train", None): _cmd_train,
        ("eval", None): _cmd_eval,
        ("experiment", None): _cmd_experiment,
    }
    key = (args.command, getattr(args, "world_command", None)
           or getattr(args, "flow_command", None))
    try:
        return handlers[key](args)
    except _UsageError as err:
        return err.code if isinstance(err.code, int) else 1
    except Exception as err:
        print(f"simfair: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
