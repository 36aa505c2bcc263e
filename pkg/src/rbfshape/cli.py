"""Command line interface.

Subcommands:
  dataset generate   sample labeled clouds, write JSON lines
  nn train           fit the predictor, save the model + loss report
  nn predict         raw network predictions for cloud files
  predict            threshold-checked prediction with fallback
  bench run          experiments from a TOML config: CSV + figures
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bench, plots
from .core import PointCloud
from .dataset import (
    GenerationConfig,
    default_cells_1d,
    default_cells_2d,
    generate_dataset,
    load_dataset,
)
from .fallback import FallbackConfig, predict_shape
from .neural import TrainConfig, features, forward, load_model, save_model, train


def load_clouds(path) -> list[PointCloud]:
    """Clouds from a JSON-lines file of {"points": [...]} records (a single
    JSON object also works)."""
    text = Path(path).read_text().strip()
    if not text:
        raise ValueError(f"no clouds in {path}")
    if text.startswith("{") and "\n" not in text:
        docs = [json.loads(text)]
    else:
        docs = [json.loads(line) for line in text.splitlines() if line.strip()]
    return [PointCloud(np.array(doc["points"], dtype=float)) for doc in docs]


def _cmd_dataset_generate(args) -> int:
    if args.dim == "1":
        cells = default_cells_1d()
    elif args.dim == "2":
        cells = default_cells_2d()
    else:
        cells = default_cells_1d() + default_cells_2d()
    config = GenerationConfig(cells=cells, seed=args.seed, scale=args.scale)
    summary = generate_dataset(config, args.out)
    print(json.dumps(summary, indent=2))
    return 0


def _dataset_to_arrays(records):
    x = np.array([features(r.points) for r in records])
    y = np.array([r.eps_label for r in records])
    return x, y


def _cmd_nn_train(args) -> int:
    records = load_dataset(args.data)
    if not records:
        print(f"no records in {args.data}", file=sys.stderr)
        return 1
    x, y = _dataset_to_arrays(records)
    config = TrainConfig(seed=args.seed, max_epochs=args.max_epochs, patience=args.patience)
    result = train(x, y, config)
    save_model(result.model, args.out)

    out = Path(args.out)
    history_path = out.with_suffix(out.suffix + ".history.csv")
    with history_path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=["epoch", "train_loss", "val_mse"])
        writer.writeheader()
        writer.writerows(result.history)
    figure_path = plots.loss_figure(result.history, out.with_suffix(out.suffix + ".loss.png"))
    print(
        json.dumps(
            {
                "records": len(records),
                "epochs_run": len(result.history),
                "best_epoch": result.best_epoch,
                "best_val_mse": result.best_val_mse,
                "model": str(out),
                "history": str(history_path),
                "figure": str(figure_path),
            },
            indent=2,
        )
    )
    return 0


def _cmd_nn_predict(args) -> int:
    model = load_model(args.model)
    writer = csv.writer(sys.stdout)
    writer.writerow(["index", "eps"])
    for i, cloud in enumerate(load_clouds(args.points)):
        writer.writerow([i, forward(model, features(cloud))])
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    theta = math.inf if args.theta.lower() == "inf" else float(args.theta)
    if args.log_theta and not math.isinf(theta):
        config = FallbackConfig.from_log10_theta(
            theta, band=bench.band_for_theta(theta, FallbackConfig().band)
        )
    else:
        config = FallbackConfig(theta=theta)
    writer = csv.writer(sys.stdout)
    writer.writerow(["index", "eps", "source", "corrected", "achieved_cond"])
    for i, cloud in enumerate(load_clouds(args.points)):
        outcome = predict_shape(model, cloud, config)
        writer.writerow([i, outcome.eps, outcome.source, int(outcome.corrected), outcome.achieved_cond])
    return 0


def _cmd_bench_run(args) -> int:
    cfg = bench.load_experiment_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = load_model(cfg.model_path) if cfg.model_path else None

    if cfg.task == "timing":
        rows = bench.run_timing(cfg, model)
        bench.write_rows_csv(rows, out / "timing.csv")
        plots.timing_figure(rows, out / "timing.png", title=f"{cfg.task}:{cfg.function}")
        print(f"wrote {out / 'timing.csv'}")
        return 0

    if cfg.task == "fallback-study":
        study = bench.run_fallback_study(cfg, model)
        bench.write_rows_csv(study.rows, out / "results.csv")
        bench.write_plotdata_csv(study.rows, out / "plotdata.csv")
        plots.convergence_figure(study.rows, out / "convergence.png", title="fallback study")
        with (out / "corrections.csv").open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["function", "log10_theta", "corrections"])
            for (fn_name, theta), count in sorted(study.correction_counts.items()):
                writer.writerow([fn_name, theta, count])
        for theta, report in study.reports.items():
            tag = "inf" if math.isinf(theta) else f"{theta:g}"
            with (out / f"distances_theta_{tag}.csv").open("w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["bin_left", "bin_right", "corrected_count", "training_count"])
                for k in range(len(report.corrected_counts)):
                    writer.writerow(
                        [report.bin_edges[k], report.bin_edges[k + 1],
                         report.corrected_counts[k], report.training_counts[k]]
                    )
            plots.distance_histogram_figure(
                report, out / f"distances_theta_{tag}.png", title=f"theta = {tag}"
            )
        print(f"wrote {out / 'results.csv'}")
        return 0

    if cfg.task in bench.PDE_TASKS:
        rows = bench.run_pde_experiment(cfg, model)
    else:
        rows = bench.run_interp_experiment(cfg, model)
    bench.write_rows_csv(rows, out / "results.csv")
    bench.write_plotdata_csv(rows, out / "plotdata.csv")
    plots.convergence_figure(rows, out / "convergence.png", title=f"{cfg.task}:{cfg.function}")
    print(f"wrote {out / 'results.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbfshape", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_dataset = sub.add_parser("dataset", help="dataset generation")
    dsub = p_dataset.add_subparsers(dest="dataset_command", required=True)
    p_gen = dsub.add_parser("generate", help="generate labeled clouds")
    p_gen.add_argument("--dim", choices=["1", "2", "both"], default="both")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--scale", type=float, default=1.0, help="uniform cell shrink factor")
    p_gen.set_defaults(func=_cmd_dataset_generate)

    p_nn = sub.add_parser("nn", help="network training and raw prediction")
    nsub = p_nn.add_subparsers(dest="nn_command", required=True)
    p_train = nsub.add_parser("train")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--max-epochs", type=int, default=20000)
    p_train.add_argument("--patience", type=int, default=200)
    p_train.set_defaults(func=_cmd_nn_train)
    p_pred = nsub.add_parser("predict")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--points", required=True)
    p_pred.set_defaults(func=_cmd_nn_predict)

    p_fb = sub.add_parser("predict", help="prediction with the condition-threshold fallback")
    p_fb.add_argument("--model", required=True)
    p_fb.add_argument("--points", required=True)
    p_fb.add_argument("--theta", default="inf", help="condition threshold (or 'inf')")
    p_fb.add_argument("--log-theta", action="store_true", help="interpret --theta as log10")
    p_fb.set_defaults(func=_cmd_predict)

    p_bench = sub.add_parser("bench", help="experiment runner")
    bsub = p_bench.add_subparsers(dest="bench_command", required=True)
    p_run = bsub.add_parser("run")
    p_run.add_argument("--config", required=True, help="TOML experiment config")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.set_defaults(func=_cmd_bench_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
