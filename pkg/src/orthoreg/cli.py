"""Command-line entry point.

Subcommands: ``ingest`` (build a canonical dataset directory), ``train``
(one training configuration, writing metrics.jsonl / spectrum.csv /
report.json / checkpoint.npz), ``simulate`` (collapse-dynamics runs,
writing dynamics.csv and verdict.json), ``suite`` (the consolidated
experiment suites: table1, table3, coldstart, robustness, bench), and
``bench`` (the inference benchmark alone).

Configuration comes from an optional flat ``key = value`` file plus flags;
flags override the file. Every run echoes the effective configuration to
``config.resolved`` in its output directory. Exit codes: 0 success, 2
configuration error, 3 data error, 4 numerical divergence. ``stderr``
carries human-readable messages; ``stdout`` carries at most one final JSON
line. ``ORTHOREG_THREADS`` caps trial-level parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import collapse, experiments, ingest, synth
from .errors import (
    ConfigError,
    Divergence,
    EmptyGraph,
    EmptyMask,
    MissingFile,
    NoConvergence,
    NotSymmetric,
    OrthoRegError,
    ParseError,
    ShapeMismatch,
    UnstableStepSize,
)
from .experiments import DEFAULT_HYPERS, RunReport, TrainConfig
from .graphio import load_dataset, normalize
from .net import save_checkpoint
from .reg import POOL_AVERAGE, POOL_SECOND_HOP, RegularizerSpec
from .tensor import sym_eigvals

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

# keys accepted in config files (and their flag equivalents)
CONFIG_KEYS = {
    "reg": str, "alpha": float, "beta": float, "lam": float, "hops": int,
    "pooling": str, "center_correlation": lambda v: v.lower() in ("1", "true", "yes"),
    "lr": float, "dropout_p": float, "weight_decay": float, "epochs": int,
    "hidden": int, "embedding": int, "seed": int, "eigens_every": int,
    "early_stop_patience": int, "trials": int, "dataset": str, "out": str,
}


def _parse_config_file(path) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key '{key}'")
            try:
                values[key] = CONFIG_KEYS[key](value)
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: bad value for '{key}': {value!r}"
                ) from None
    return values


def _merge_config(args, file_values: dict) -> dict:
    merged = dict(file_values)
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def _regularizer_from(merged: dict) -> RegularizerSpec:
    kind = merged.get("reg", "none")
    return RegularizerSpec(
        kind=kind,
        lam=merged.get("lam", 0.0),
        alpha=merged.get("alpha", 0.0),
        beta=merged.get("beta", 0.0),
        hops=merged.get("hops", 2),
        pooling=merged.get("pooling", POOL_AVERAGE),
        center_correlation=merged.get("center_correlation", True),
    )


def _train_config_from(merged: dict) -> TrainConfig:
    spec = _regularizer_from(merged)
    kwargs = {}
    for key in ("lr", "dropout_p", "weight_decay", "epochs", "hidden", "embedding",
                "seed", "eigens_every", "early_stop_patience", "trials"):
        if key in merged:
            kwargs[key] = merged[key]
    try:
        return TrainConfig(regularizer=spec, **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _write_resolved(out_dir, merged: dict, config: TrainConfig | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    lines = {}
    if config is not None:
        flat = config.to_dict()
        reg = flat.pop("regularizer")
        flat.pop("dims", None)
        flat.pop("comparator_lambdas", None)
        lines.update({f"reg.{k}" if k != "kind" else "reg": v for k, v in reg.items()})
        lines.update(flat)
    for k, v in merged.items():
        if k in ("dataset", "out"):
            lines[k] = v
    with open(os.path.join(out_dir, "config.resolved"), "w", encoding="utf-8",
              newline="\n") as fh:
        for key in sorted(lines):
            fh.write(f"{key} = {lines[key]}\n")


def _default_hypers_for(dataset_path: str) -> tuple | None:
    name = os.path.basename(os.path.normpath(dataset_path)).lower()
    return DEFAULT_HYPERS.get(name)


def _load(dataset_path: str):
    if not dataset_path:
        raise ConfigError("a --dataset directory is required")
    return load_dataset(dataset_path)


def _write_suite_outputs(out_dir, name, rows: list, header: list) -> None:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{name}.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    json_path = os.path.join(out_dir, f"{name}.json")
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump([dict(zip(header, row)) for row in rows], fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    if args.kind == "synthetic":
        kwargs = {}
        if args.seed is not None:
            kwargs["seed"] = args.seed
        ingest.write_synthetic(args.out, **kwargs)
    else:
        if not args.content or not args.cites:
            raise ConfigError("content-cites ingest needs --content and --cites")
        ingest.convert_content_cites(
            args.content, args.cites, args.out,
            seed=args.seed if args.seed is not None else 0,
            splits_dir=args.splits,
        )
    print(json.dumps({"ingested": args.out}))
    return EXIT_OK


def cmd_train(args) -> int:
    file_values = _parse_config_file(args.config) if args.config else {}
    merged = _merge_config(args, file_values)
    if "dataset" not in merged:
        raise ConfigError("a --dataset directory is required")
    out_dir = merged.get("out", "runs/train")
    config = _train_config_from(merged)
    if config.regularizer.kind == "orthoreg" and "alpha" not in merged:
        hypers = _default_hypers_for(merged["dataset"])
        if hypers is not None:
            spec = RegularizerSpec(**{**asdict(config.regularizer),
                                      "alpha": hypers[0], "beta": hypers[1]})
            config.regularizer = spec
    graph, data = _load(merged["dataset"])

    tuned = None
    if getattr(args, "tune", False):
        if config.regularizer.kind != "orthoreg":
            raise ConfigError("--tune applies to the orthoreg regularizer")
        tuned = experiments.tune_coarse_grid(graph, data, base_config=config)
        best = tuned["best"]
        config.regularizer = RegularizerSpec(
            **{**asdict(config.regularizer),
               "alpha": best["alpha"], "beta": best["beta"]}
        )

    _write_resolved(out_dir, merged, config)
    params, history = experiments.train(config, graph, data)
    experiments.write_metrics_jsonl(history, os.path.join(out_dir, "metrics.jsonl"))
    experiments.write_spectrum_csv(history, os.path.join(out_dir, "spectrum.csv"))
    save_checkpoint(params, os.path.join(out_dir, "checkpoint.npz"))
    if config.trials > 1:
        report = experiments.run_trials(config, graph, data)
    else:
        report = RunReport(
            mean_acc=history.best_test_acc, std_acc=0.0,
            per_trial=[history.best_test_acc], config=config.to_dict(),
            wall_clock_s=0.0,
        )
    if tuned is not None:
        report.extras["tuned"] = tuned["best"]
    experiments.write_report_json(report, os.path.join(out_dir, "report.json"))
    print(json.dumps({"mean_test_acc": report.mean_acc, "std": report.std_acc,
                      "out": out_dir}))
    return EXIT_OK


def _make_graph(args):
    n = args.n if args.n is not None else 40
    seed = args.seed if args.seed is not None else 0
    kind = args.graph or "sbm"
    if kind == "sbm":
        graph, _ = synth.sbm_graph(n_nodes=n, seed=seed)
        return graph
    if kind == "ring":
        return synth.ring_graph(n)
    if kind == "path":
        return synth.path_graph(n)
    if kind == "star":
        return synth.star_graph(n - 1)
    raise ConfigError(f"unknown graph kind: {kind!r}")


def cmd_simulate(args) -> int:
    out_dir = args.out or "runs/simulate"
    seed = args.seed if args.seed is not None else 0
    steps = args.steps if args.steps is not None else 200
    rng = np.random.default_rng(seed)
    graph = _make_graph(args)
    os.makedirs(out_dir, exist_ok=True)

    if args.kind == "closed-form":
        lap = normalize(graph, "laplacian")
        x = collapse.whiten(rng.standard_normal((graph.n_nodes, args.dim)))
        p = collapse.build_p(x, lap)
        eigs = sym_eigvals(p)
        spread = max(float(eigs[0] - eigs[-1]), 1e-9)
        times = np.linspace(0.0, 12.0 / spread, 50)
        run = collapse.closed_form_trajectory(p, np.eye(args.dim), times, sign=args.sign)
        verdict = collapse.verify_ratio_monotonicity(run, collapse.largest_gap_split(eigs))
    elif args.kind == "gd-linear":
        lap = normalize(graph, "laplacian")
        x = collapse.whiten(rng.standard_normal((graph.n_nodes, args.dim)))
        p = collapse.build_p(x, lap)
        eigs = sym_eigvals(p)
        eta = 0.4 / max(float(eigs[0]), 1e-9)
        run = collapse.gd_linear_trajectory(
            x, lap, np.eye(args.dim), eta, steps, snapshot_every=max(1, steps // 50)
        )
        verdict = collapse.verify_ratio_monotonicity(run, collapse.largest_gap_split(eigs))
    elif args.kind == "feature-update":
        tau = args.tau if args.tau is not None else 0.5
        if not 0.0 <= tau <= 1.0:
            raise ConfigError(f"tau must lie in [0, 1], got {tau}")
        a_sym = normalize(graph, "sym")
        h0 = rng.standard_normal((graph.n_nodes, args.dim))
        run = collapse.feature_space_trajectory(
            h0, a_sym, tau, steps, snapshot_every=max(1, steps // 50)
        )
        first, last = run.snapshots[0].eigen_report, run.snapshots[-1].eigen_report
        verdict = collapse.CollapseVerdict(
            monotone_ratio_ok=bool(last.nesum <= first.nesum),
            vanishing_ratio_estimate=float(last.nesum / max(first.nesum, 1e-12)),
            d_split=1,
            details=[{"initial_nesum": first.nesum, "final_nesum": last.nesum}],
        )
    elif args.kind == "free-embedding":
        alpha = args.alpha if args.alpha is not None else 1e-2
        beta = args.beta if args.beta is not None else 1e-5
        lr = args.lr if args.lr is not None else 200.0
        h, history = collapse.free_embedding_optimize(
            graph, graph.n_nodes, args.dim, alpha, beta, steps, lr, seed=seed
        )
        final = history[-1]
        verdict = collapse.CollapseVerdict(
            monotone_ratio_ok=bool(final["off_diag_norm"] < 0.05),
            vanishing_ratio_estimate=final["off_diag_norm"],
            d_split=args.dim,
            details=history,
        )
        run = None
    else:
        raise ConfigError(f"unknown simulation kind: {args.kind!r}")

    if args.kind != "free-embedding":
        collapse.write_dynamics_csv(run, os.path.join(out_dir, "dynamics.csv"))
    verdict_payload = {
        "kind": args.kind,
        "monotone_ratio_ok": verdict.monotone_ratio_ok,
        "vanishing_ratio_estimate": verdict.vanishing_ratio_estimate,
        "d_split": verdict.d_split,
        "details": verdict.details,
    }
    with open(os.path.join(out_dir, "verdict.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(verdict_payload, fh, indent=2, default=float)
        fh.write("\n")
    _write_resolved(out_dir, {"out": out_dir})
    print(json.dumps({"kind": args.kind, "monotone_ratio_ok": verdict.monotone_ratio_ok,
                      "out": out_dir}))
    return EXIT_OK


SUITES = ("table1", "table3", "coldstart", "robustness", "bench")


def cmd_suite(args) -> int:
    if args.name not in SUITES:
        raise ConfigError(
            f"unknown suite '{args.name}'; valid suites: {', '.join(SUITES)}"
        )
    out_dir = args.out or f"runs/suite-{args.name}"
    merged = _merge_config(args, {})
    graph, data = _load(args.dataset)
    seed = args.seed if args.seed is not None else 0
    trials = args.trials if args.trials is not None else 10
    hypers = _default_hypers_for(args.dataset) or (1e-3, 1e-6)
    alpha = merged.get("alpha", hypers[0])
    beta = merged.get("beta", hypers[1])
    lam = merged.get("lam", 0.1)

    def cfg(spec) -> TrainConfig:
        return TrainConfig(regularizer=spec, seed=seed, trials=trials,
                           epochs=merged.get("epochs", 300))

    ortho_spec = RegularizerSpec(kind="orthoreg", alpha=alpha, beta=beta,
                                 hops=merged.get("hops", 2))
    header = ["row", "mean", "std", "n_trials"]

    if args.name == "table1":
        rows_out = []
        for label, report in [
            ("mlp", experiments.run_trials(cfg(RegularizerSpec(kind="none")), graph, data)),
            ("lap_reg", experiments.run_trials(cfg(RegularizerSpec(kind="laplacian", lam=lam)), graph, data)),
            ("orthoreg", experiments.run_trials(cfg(ortho_spec), graph, data)),
            ("sgc", experiments.sgc_comparator(graph, data, seed=seed, trials=trials)),
            ("gcn", experiments.gcn_comparator(graph, data, seed=seed, trials=trials)),
        ]:
            rows_out.append([label, report.mean_acc, report.std_acc, len(report.per_trial)])
        _write_suite_outputs(out_dir, "table1", rows_out, header)
    elif args.name == "table3":
        rows = experiments.ablation_suite(graph, data, cfg(ortho_spec))
        rows_out = [[k, r.mean_acc, r.std_acc, len(r.per_trial)] for k, r in rows.items()]
        _write_suite_outputs(out_dir, "table3", rows_out, header)
    elif args.name == "coldstart":
        from .graphio import select_isolated

        isolated, reduced = select_isolated(graph, 3.0)
        eval_idx = np.setdiff1d(isolated, np.concatenate([data.train_idx, data.val_idx]))
        rows_out = []
        for label, report in [
            ("orthoreg", experiments.coldstart_experiment(cfg(ortho_spec), graph, data)),
            ("mlp", experiments.coldstart_experiment(cfg(RegularizerSpec(kind="none")), graph, data)),
            ("gcn", experiments.gcn_comparator(reduced, data, seed=seed, trials=trials,
                                               eval_idx=eval_idx)),
        ]:
            rows_out.append([label, report.mean_acc, report.std_acc, len(report.per_trial)])
        _write_suite_outputs(out_dir, "coldstart", rows_out, header)
    elif args.name == "robustness":
        ratios = [float(r) for r in (getattr(args, "ratios", None) or "0,0.2,0.4").split(",")]
        sweep = experiments.robustness_sweep(cfg(ortho_spec), graph, data, ratios,
                                             trials=trials)
        rows_out = []
        for entry in sweep:
            rows_out.append(["orthoreg@%.2f" % entry["ratio"],
                             entry["model"].mean_acc, entry["model"].std_acc, trials])
            rows_out.append(["gcn@%.2f" % entry["ratio"],
                             entry["gcn"].mean_acc, entry["gcn"].std_acc, trials])
        _write_suite_outputs(out_dir, "robustness", rows_out, header)
    else:  # bench
        depths = [int(d) for d in (getattr(args, "depths", None) or "2,3,4").split(",")]
        rows = experiments.inference_benchmark(graph, data, depths=depths, seed=seed)
        rows_out = [[f"depth={r['depth']}", r["mlp_s"], r["gcn_s"], r["gcn_over_mlp"]]
                    for r in rows]
        _write_suite_outputs(out_dir, "bench", rows_out,
                             ["row", "mlp_s", "gcn_s", "gcn_over_mlp"])

    _write_resolved(out_dir, {"dataset": args.dataset, "out": out_dir})
    print(json.dumps({"suite": args.name, "out": out_dir}))
    return EXIT_OK


def cmd_bench(args) -> int:
    args.name = "bench"
    return cmd_suite(args)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthoreg",
        description="graph-regularized MLP training and collapse-dynamics lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="build a canonical dataset directory")
    p_ingest.add_argument("--kind", choices=["synthetic", "content-cites"],
                          default="synthetic")
    p_ingest.add_argument("--content")
    p_ingest.add_argument("--cites")
    p_ingest.add_argument("--splits")
    p_ingest.add_argument("--seed", type=int)
    p_ingest.add_argument("--out", required=True)
    p_ingest.set_defaults(func=cmd_ingest)

    p_train = sub.add_parser("train", help="train one configuration")
    p_train.add_argument("--dataset")
    p_train.add_argument("--config", help="flat key = value config file")
    p_train.add_argument("--out")
    p_train.add_argument("--reg", choices=["none", "laplacian", "preg",
                                           "corr_identity", "orthoreg"])
    p_train.add_argument("--alpha", type=float)
    p_train.add_argument("--beta", type=float)
    p_train.add_argument("--lam", type=float)
    p_train.add_argument("--T", dest="hops", type=int)
    p_train.add_argument("--pooling", choices=[POOL_AVERAGE, POOL_SECOND_HOP])
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--dropout", dest="dropout_p", type=float)
    p_train.add_argument("--weight-decay", dest="weight_decay", type=float)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--hidden", type=int)
    p_train.add_argument("--embedding", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--trials", type=int)
    p_train.add_argument("--eigens-every", dest="eigens_every", type=int)
    p_train.add_argument("--patience", dest="early_stop_patience", type=int)
    p_train.add_argument("--tune", action="store_true",
                         help="coarse-grid alpha/beta search before training")
    p_train.set_defaults(func=cmd_train)

    p_sim = sub.add_parser("simulate", help="collapse-dynamics simulations")
    p_sim.add_argument("--kind", choices=["closed-form", "gd-linear",
                                          "feature-update", "free-embedding"],
                       required=True)
    p_sim.add_argument("--graph", choices=["sbm", "ring", "path", "star"])
    p_sim.add_argument("--n", type=int)
    p_sim.add_argument("--dim", type=int, default=8)
    p_sim.add_argument("--steps", type=int)
    p_sim.add_argument("--tau", type=float)
    p_sim.add_argument("--sign", type=int, choices=[1, -1], default=1)
    p_sim.add_argument("--alpha", type=float)
    p_sim.add_argument("--beta", type=float)
    p_sim.add_argument("--lr", type=float)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--out")
    p_sim.set_defaults(func=cmd_simulate)

    p_suite = sub.add_parser("suite", help="consolidated experiment suites")
    p_suite.add_argument("name")
    p_suite.add_argument("--dataset")
    p_suite.add_argument("--out")
    p_suite.add_argument("--alpha", type=float)
    p_suite.add_argument("--beta", type=float)
    p_suite.add_argument("--lam", type=float)
    p_suite.add_argument("--T", dest="hops", type=int)
    p_suite.add_argument("--epochs", type=int)
    p_suite.add_argument("--seed", type=int)
    p_suite.add_argument("--trials", type=int)
    p_suite.add_argument("--ratios", help="comma-separated mask ratios")
    p_suite.add_argument("--depths", help="comma-separated depths for bench")
    p_suite.set_defaults(func=cmd_suite)

    p_bench = sub.add_parser("bench", help="inference benchmark")
    p_bench.add_argument("--dataset")
    p_bench.add_argument("--out")
    p_bench.add_argument("--depths")
    p_bench.add_argument("--seed", type=int)
    p_bench.add_argument("--trials", type=int)
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingFile, ParseError, ShapeMismatch, EmptyGraph, EmptyMask) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (Divergence, NoConvergence, NotSymmetric, UnstableStepSize) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OrthoRegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
