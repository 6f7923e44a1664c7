import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from config.settings import (
    ARTIFACT_NAMES,
    DEFAULT_GRAPH_SETTINGS,
    DEFAULT_SWEEP_SETTINGS,
    LOGGING_SETTINGS,
    RANK_ALPHA_GRID,
)
from modules.analysis.sweeps import alpha_rmse_sweep, rank_sweep, regime_improvements
from modules.analysis.theory import SETTING_NAMES, bound_setting, bound_table
from modules.graphs.diagnostics import diagnose
from modules.graphs.estimator import estimate_graph
from modules.graphs.graph import import_graph, load_graph, save_graph
from modules.model.checkpoint import save_checkpoint
from modules.model.training import alpha_select, build_model, evaluate, table_groups, train
from modules.pipeline.config import RunConfig, load_config
from modules.pipeline.runner import StageError, report, run_pipeline
from modules.preprocess.cleaner import load_prepared_data, preprocess_table, save_prepared_data
from modules.preprocess.table import load_feature_table, read_raw_csv
from modules.spectral.encoding import load_pe, make_pe, random_pe, save_pe
from modules.spectral.laplacian import LAPLACIAN_KINDS
from modules.synthetic.generator import SyntheticSpec, generate, save_synthetic, to_prepared
from utils.helpers import atomic_write_dataframe, atomic_write_json

logger = logging.getLogger("tabpet")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _output(config, given, default_name):
    return Path(given) if given else config.output_root() / default_name


def _print(result):
    print(json.dumps(result, indent=2, default=str))


def _unit_pe(path):
    """Load a PE file at alpha = 1; the model applies its own alpha"""
    pe = load_pe(path)
    return pe if pe.alpha in (0.0, 1.0) else pe.with_alpha(1.0)


def _method_name(value):
    return value.strip().lower().replace("-", "_")


def _synthetic_prepared(d, k, n, seed):
    dataset = generate(SyntheticSpec(d=d, k=k, n=n, seed=seed))
    return to_prepared(dataset, seed=seed)


def cmd_preprocess(args, config):
    raw = read_raw_csv(args.input, kinds=config.kinds)
    data = preprocess_table(raw, target=args.target or config.get("data", "target") or None,
                            task=args.task or config.get("data", "task"), seed=config.get("data", "split_seed"))
    table_path, split_path = save_prepared_data(data, _output(config, args.out, ARTIFACT_NAMES["TABLE"]))
    _print({"table": str(table_path), "splits": str(split_path), "stats": data.stats})


def cmd_estimate_graph(args, config):
    out = _output(config, args.out, ARTIFACT_NAMES["GRAPH"])
    if args.import_path:
        names = load_feature_table(args.table).columns if args.table else None
        graph = import_graph(args.import_path, n_nodes=len(names) if names else None,
                             directed=args.directed, node_names=names)
    else:
        data = load_prepared_data(args.table)
        X_train, _ = data.split("train")
        params = {}
        if args.method == "notears":
            params = {"lambda1": args.lambda1 if args.lambda1 is not None else config.get("graph", "lambda1"),
                      "w_threshold": config.get("graph", "w_threshold"),
                      "lambda_search": args.lambda_search or config.get("graph", "lambda_search")}
        graph = estimate_graph(X_train, args.method, node_names=data.table.columns, **params)

    diagnostics = diagnose(graph).to_dict()
    graph_path, _ = save_graph(graph, out)
    atomic_write_json(out.with_name(ARTIFACT_NAMES["DIAGNOSTICS"]), diagnostics)
    _print({"graph": str(graph_path), "n_edges": graph.n_edges, "diagnostics": diagnostics,
            "elapsed_seconds": graph.params.get("elapsed_seconds")})


def cmd_make_pe(args, config):
    graph = load_graph(args.graph)
    groups, names = None, None
    if args.table:
        table = load_feature_table(args.table)
        groups, names = table.groups, table.feature_names
    k = args.k if args.k == "auto" else int(args.k)
    pe, decomp, info = make_pe(graph, groups=groups, alpha=args.alpha, k=k,
                               laplacian_kind=args.laplacian or config.get("spectral", "laplacian"), row_names=names)
    pe_path, _ = save_pe(pe, _output(config, args.out, ARTIFACT_NAMES["PE"]))
    _print({"pe": str(pe_path), "shape": list(pe.values.shape), "selection": info,
            "eigenvalues": np.round(decomp.eigenvalues, 6).tolist()})


def cmd_synth(args, config):
    seed = config.seeds[0]
    dataset = generate(SyntheticSpec(d=args.d, k=args.k, n=args.n, noise_std=args.noise_std, seed=seed))
    data_path, sidecar = save_synthetic(dataset, _output(config, args.out, "synthetic.csv"))
    _print({"data": str(data_path), "ground_truth": str(sidecar), "groups": dataset.groups})


def cmd_train(args, config):
    data = load_prepared_data(args.table)
    pe = _unit_pe(args.pe) if args.pe else None
    mode = args.pe_mode or config.get("pe", "mode")
    if mode == "fixed" and pe is None:
        raise ValueError("PE mode 'fixed' needs --pe")
    width = pe.width if pe is not None else (args.pe_dim or 0)
    if mode in ("random", "learnable") and width <= 0:
        raise ValueError(f"PE mode '{mode}' needs --pe or a positive --pe-dim")
    training = config.training_config()
    overrides = {**config.model_overrides(), "groups": table_groups(data.table)}
    n_classes = int(np.max(data.target)) + 1 if data.task == "classification" else 1
    out = _output(config, args.out, ARTIFACT_NAMES["CHECKPOINT"])

    rows = []
    for seed in config.seeds:
        source = random_pe((data.table.n_features, width), 1.0, seed) if mode == "random" else pe

        def make_model(alpha, seed=seed, source=source):
            return build_model(data.table.n_features, pe_mode=mode, pe=source, pe_dim=width, alpha=alpha,
                               task=data.task, n_classes=n_classes, seed=seed, **overrides)

        alpha_grid = _floats(args.alpha_grid) if args.alpha_grid else config.get("pe", "alpha_grid")
        if mode != "none" and alpha_grid:
            alpha, results = alpha_select(make_model, data, [float(a) for a in alpha_grid], training,
                                          max_workers=config.get("run", "max_workers"))
            result = results[alpha]
        else:
            alpha = args.alpha if args.alpha is not None else config.get("pe", "alpha")
            result = train(make_model(alpha), data, training)

        save_checkpoint(result.model, out.with_name(f"{out.name}_{mode}_seed{seed}"))
        X_test, y_test = data.split("test")
        for metric, value in evaluate(result.model, X_test, y_test).items():
            rows.append({"mode": mode, "seed": seed, "alpha": alpha, "metric": metric, "value": value})

    frame = pd.DataFrame(rows)
    atomic_write_dataframe(out.with_name(ARTIFACT_NAMES["METRICS"]), frame)
    _print(frame.groupby("metric")["value"].mean().to_dict())


def cmd_rank_sweep(args, config):
    if args.table:
        data = load_prepared_data(args.table)
    else:
        data = _synthetic_prepared(args.d, args.k, args.n, config.get("data", "split_seed"))
    if args.pe:
        pe = _unit_pe(args.pe)
    else:
        X_train, _ = data.split("train")
        graph = estimate_graph(X_train, DEFAULT_GRAPH_SETTINGS["METHOD"], node_names=data.table.columns)
        pe, _, _ = make_pe(graph, data.table.groups, alpha=1.0, row_names=data.table.feature_names)

    alphas = _floats(args.alphas) if args.alphas else RANK_ALPHA_GRID
    sweep = rank_sweep(data, pe, alpha_grid=alphas, seeds=config.seeds, modes=args.modes.split(","),
                       config=config.training_config(), forward_only=args.forward_only,
                       max_workers=config.get("run", "max_workers"), progress=True)
    out = _output(config, args.out, "rank_sweep.csv")
    atomic_write_dataframe(out, sweep.rows)
    atomic_write_dataframe(out.with_name(out.stem + "_summary.csv"), sweep.summary())
    _print({"rows": str(out), "means": {f"{m}@{a:g}": v for (m, a), v in sweep.means("effective_rank").items()}})


def cmd_alpha_sweep(args, config):
    partitions = _ints(args.partitions) if args.partitions else DEFAULT_SWEEP_SETTINGS["REGIME_PARTITIONS"]
    alphas = _floats(args.alphas) if args.alphas else None
    sweep = alpha_rmse_sweep(partitions=partitions, alpha_grid=alphas, seeds=config.seeds, d=args.d, n=args.n,
                             graph_method=args.graph_method, config=config.training_config(),
                             max_workers=config.get("run", "max_workers"), progress=True)
    out = _output(config, args.out, "alpha_sweep.csv")
    atomic_write_dataframe(out, sweep.rows)
    improvements = regime_improvements(sweep)
    atomic_write_dataframe(out.with_name(out.stem + "_improvements.csv"), improvements)
    _print(improvements.to_dict(orient="records"))


def cmd_verify_bounds(args, config):
    setting = bound_setting(args.setting)
    alphas = _floats(args.alphas) if args.alphas else list(range(11))
    table = bound_table(setting, alphas, n_samples=args.n_samples, seed=config.seeds[0])
    out = _output(config, args.out, f"bounds_{args.setting}.csv")
    atomic_write_dataframe(out, table)
    _print({"table": str(out), "all_hold": bool(table["holds"].all())})
    return 0 if table["holds"].all() else 1


def cmd_report(args, config):
    summary = report(args.run_dir)
    print(summary.text, end="")
    if summary.missing:
        logger.warning("Missing artifacts: %s", ", ".join(summary.missing))


def cmd_run(args, config):
    run_dir = run_pipeline(config, output_root=args.output_root, resume=not args.no_resume)
    print(report(run_dir).text, end="")


def build_parser():
    parser = argparse.ArgumentParser(description="Graph positional encodings for tabular transformers")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="Flat section.key = value config file")
    common.add_argument("--seed", type=int, default=None, help="Single seed overriding run.seeds")
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common], help="Clean, encode and split a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--target", default=None)
    p.add_argument("--task", choices=["regression", "classification"], default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("estimate-graph", parents=[common], help="Estimate or import a feature graph")
    p.add_argument("--table", default=None, help="Processed table CSV")
    p.add_argument("--method", type=_method_name, choices=DEFAULT_GRAPH_SETTINGS["METHODS"],
                   default=DEFAULT_GRAPH_SETTINGS["METHOD"], help="Hyphenated names such as chow-liu are accepted")
    p.add_argument("--import", dest="import_path", default=None, help="External adjacency matrix CSV")
    p.add_argument("--directed", action="store_true")
    p.add_argument("--lambda1", type=float, default=None)
    p.add_argument("--lambda-search", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_estimate_graph)

    p = sub.add_parser("make-pe", parents=[common], help="Laplacian eigenvector encodings from a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--table", default=None, help="Processed table CSV (one-hot groups and names)")
    p.add_argument("--k", default="auto")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--laplacian", choices=LAPLACIAN_KINDS, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_make_pe)

    p = sub.add_parser("synth", parents=[common], help="Generate a structure-controlled dataset")
    p.add_argument("--d", type=int, default=SyntheticSpec.d)
    p.add_argument("--k", type=int, default=SyntheticSpec.k)
    p.add_argument("--n", type=int, default=SyntheticSpec.n)
    p.add_argument("--noise-std", type=float, default=SyntheticSpec.noise_std)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="Train one model per seed")
    p.add_argument("--table", required=True)
    p.add_argument("--pe", default=None)
    p.add_argument("--pe-mode", choices=["none", "fixed", "random", "learnable"], default=None)
    p.add_argument("--pe-dim", type=int, default=None, help="PE width for random or learnable mode without --pe")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--alpha-grid", default=None, help="Comma-separated alphas chosen on validation")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank-sweep", parents=[common], help="CLS effective rank per PE mode and alpha")
    p.add_argument("--table", default=None)
    p.add_argument("--pe", default=None)
    p.add_argument("--alphas", default=None)
    p.add_argument("--modes", default="none,fixed,random")
    p.add_argument("--forward-only", action="store_true")
    p.add_argument("--d", type=int, default=SyntheticSpec.d)
    p.add_argument("--k", type=int, default=SyntheticSpec.k)
    p.add_argument("--n", type=int, default=SyntheticSpec.n)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rank_sweep)

    p = sub.add_parser("alpha-sweep", parents=[common], help="Test RMSE per structure regime and alpha")
    p.add_argument("--partitions", default=None)
    p.add_argument("--alphas", default=None)
    p.add_argument("--d", type=int, default=SyntheticSpec.d)
    p.add_argument("--n", type=int, default=SyntheticSpec.n)
    p.add_argument("--graph-method", default=DEFAULT_GRAPH_SETTINGS["METHOD"])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_alpha_sweep)

    p = sub.add_parser("verify-bounds", parents=[common], help="Check effective-rank bounds on constructed weights")
    p.add_argument("--setting", choices=SETTING_NAMES, default="single_winner")
    p.add_argument("--alphas", default=None)
    p.add_argument("--n-samples", type=int, default=DEFAULT_SWEEP_SETTINGS["N_SAMPLES_THEORY"])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify_bounds)

    p = sub.add_parser("report", parents=[common], help="Summarize a run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", parents=[common], help="Run the whole pipeline from --config")
    p.add_argument("--output-root", default=None)
    p.add_argument("--no-resume", action="store_true")
    p.set_defaults(func=cmd_run)
    return parser


def setup_logging(verbose=False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else LOGGING_SETTINGS["LEVEL"],
        format=LOGGING_SETTINGS["FORMAT"],
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    try:
        config = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            config.set("run", "seeds", [args.seed])
            config.set("data", "split_seed", args.seed)
        return args.func(args, config) or 0
    except StageError as e:
        logger.error("Pipeline stopped in stage '%s': %s", e.stage, e.cause)
        return 2
    except (ValueError, FileNotFoundError) as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
