"""Command-line front end: generate data, detect outliers, sweep parameters.

Exit codes: 0 success, 1 usage or configuration problem, 2 numerical or
degenerate-data failure.  All file outputs are byte-identical across
re-runs with the same inputs and seed; timing chatter goes to stderr.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConicPurgeError
from .modelfit import RefineConfig
from .pipeline import (PIPELINES, detect_points, model_params_from_coeffs,
                       run_sweep_cell)
from .proximity import (DetectionLabels, EligibilityConfig,
                        eigenvector_flag_report, spectrum_of_points)
from .synth import (ExperimentConfig, detection_metrics, make_dataset,
                    read_dataset_csv, write_dataset_csv)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    numerical failures, so remap usage problems to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _CliError(f"error: {message}", EXIT_CONFIG)


class _CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_labels_csv(path, labels: DetectionLabels) -> None:
    lines = ["index,label,stage"]
    for i in range(len(labels)):
        tag = "outlier" if labels.outlier[i] else "inlier"
        lines.append(f"{i},{tag},{labels.stage[i]}")
    _write_text(path, "\n".join(lines) + "\n")


def read_labels_csv(path) -> DetectionLabels:
    with open(path, "r", encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if not rows or rows[0].lower() != "index,label,stage":
        raise ValueError(f"{path}: expected header index,label,stage")
    flags, stages = [], []
    for line in rows[1:]:
        _idx, label, stage = (c.strip() for c in line.split(","))
        flags.append(label == "outlier")
        stages.append(stage)
    return DetectionLabels(np.asarray(flags, dtype=bool),
                           np.asarray(stages, dtype=object))


def cmd_generate(args) -> int:
    cfg = ExperimentConfig.from_json_file(args.config)
    data = make_dataset(cfg)
    write_dataset_csv(args.out, data.points, data.truth)
    print(f"wrote {data.n_points} points "
          f"({cfg.n_outliers} outliers) to {args.out}", file=sys.stderr)
    return EXIT_OK


def _eligibility_from_args(args) -> EligibilityConfig:
    return EligibilityConfig(
        eig_threshold=args.eig_threshold, hf_threshold=args.hf_threshold,
        gamma=args.gamma, bandwidth_rank=args.p, repeats=args.repeats)


def cmd_detect(args) -> int:
    points, truth = read_dataset_csv(args.data)
    if points.shape[0] < 12:
        raise _CliError(
            f"error: dataset has {points.shape[0]} rows; need at least 12",
            EXIT_CONFIG)
    eligibility = _eligibility_from_args(args)
    refine_cfg = RefineConfig(tau_scale=args.tau_scale)

    if args.dump_spectrum or args.dump_eligible:
        spectrum = spectrum_of_points(points, eligibility)
        if args.dump_spectrum:
            lines = ["index,eigenvalue"]
            lines += [f"{i},{float(lam)!r}"
                      for i, lam in enumerate(spectrum.eigenvalues)]
            _write_text(args.dump_spectrum, "\n".join(lines) + "\n")
        if args.dump_eligible:
            report = eigenvector_flag_report(spectrum, eligibility, args.seed)
            lines = ["eigenvalue,hf_measure,flagged_count"]
            lines += [f"{lam!r},{hf!r},{int(flags.sum())}"
                      for _i, lam, hf, flags in report]
            _write_text(args.dump_eligible, "\n".join(lines) + "\n")

    init_labels = read_labels_csv(args.init_labels) if args.init_labels else None
    if init_labels is not None and len(init_labels) != points.shape[0]:
        raise _CliError(
            "error: initial labels do not match the dataset length",
            EXIT_CONFIG)
    ransac_k = args.k if args.baseline == "ransac" else None
    outcome = detect_points(points, args.stage, eligibility, refine_cfg,
                            seed=args.seed, init_labels=init_labels,
                            ransac_k=ransac_k)

    data_path = Path(args.data)
    labels_path = args.out_labels or data_path.with_suffix(".labels.csv")
    model_path = args.out_model or data_path.with_suffix(".model.json")
    write_labels_csv(labels_path, outcome.labels)
    params = model_params_from_coeffs(outcome.model)
    _write_text(model_path, _json_text(params.to_json_dict()))

    summary = {
        "n_points": int(points.shape[0]),
        "n_outliers_detected": outcome.labels.n_outliers,
        "stage": args.stage if ransac_k is None else "ransac",
        "model_type": params.to_json_dict()["type"],
    }
    if truth is not None:
        summary.update(detection_metrics(outcome.labels.outlier, truth))
    sys.stdout.write(_json_text(summary))
    for key, ms in outcome.timings_ms.items():
        print(f"{key}: {ms:.1f}", file=sys.stderr)
    return EXIT_OK


def _aggregate_rows(rows: list[tuple]) -> list[str]:
    cells: dict = {}
    for param_index, value, pipeline, err, prec, rec in rows:
        cells.setdefault((param_index, value, pipeline),
                         []).append((err, prec, rec))
    lines = []
    for (param_index, value, pipeline), trials in sorted(
            cells.items(), key=lambda kv: (kv[0][0], kv[0][2])):
        errs = np.array([t[0] for t in trials])
        precs = np.array([t[1] for t in trials])
        recs = np.array([t[2] for t in trials])
        lines.append(",".join([
            repr(float(value)), pipeline,
            repr(float(np.mean(errs))), repr(float(np.median(errs))),
            repr(float(np.percentile(errs, 90))),
            repr(float(np.mean(precs))), repr(float(np.mean(recs))),
        ]))
    return lines


def cmd_sweep(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    try:
        base = ExperimentConfig.from_json_dict(spec["base"])
        vary = spec["vary"]
        grid = list(spec["grid"])
        trials = int(spec.get("trials", 20))
        pipelines = tuple(spec.get("pipelines", ["two_stage"]))
        master_seed = int(spec.get("master_seed", 0))
        ransac_k = int(spec.get("ransac_k", 1000))
    except (KeyError, TypeError, ValueError) as exc:
        raise _CliError(f"error: malformed sweep spec: {exc}",
                                  EXIT_CONFIG)
    for pipeline in pipelines:
        if pipeline not in PIPELINES:
            raise _CliError(
                f"error: unknown pipeline {pipeline!r}", EXIT_CONFIG)
    if trials < 1:
        raise _CliError("error: trials must be >= 1", EXIT_CONFIG)

    header = ("param_value,pipeline,mean_error,median_error,p90_error,"
              "mean_precision,mean_recall")
    jobs = [(base, vary, value, pi, ti, master_seed, pipelines, ransac_k)
            for pi, value in enumerate(grid) for ti in range(trials)]
    workers = max(1, int(os.environ.get("CONIC_PURGE_THREADS", "1")))
    rows: list[tuple] = []
    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            for chunk in pool.map(_run_cell_star, jobs):
                rows.extend(chunk)
    else:
        for job in jobs:
            rows.extend(run_sweep_cell(*job))
    _write_text(args.out, "\n".join([header] + _aggregate_rows(rows)) + "\n")
    print(f"wrote {len(grid) * len(pipelines)} sweep rows to {args.out}",
          file=sys.stderr)
    return EXIT_OK


def _run_cell_star(job):
    return run_sweep_cell(*job)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conic-purge",
                     description="Two-stage outlier elimination for robust "
                                 "ellipse and ellipsoid fitting")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="synthesize a dataset",
                         description="Generate a labeled synthetic dataset "
                                     "from a JSON scenario config.")
    gen.add_argument("--config", required=True, help="scenario JSON path")
    gen.add_argument("--out", required=True, help="output dataset CSV path")
    gen.set_defaults(func=cmd_generate)

    det = sub.add_parser("detect", help="run outlier detection on a CSV",
                         description="Detect outliers and fit the model; "
                                     "writes labels CSV and model JSON, "
                                     "prints metrics JSON to stdout.")
    det.add_argument("--data", required=True, help="dataset CSV (x,y[,z][,label])")
    det.add_argument("--stage", choices=["proximity", "model", "both"],
                     default="both")
    det.add_argument("--gamma", type=float, default=2.5,
                     help="quantile interval width multiplier")
    det.add_argument("--p", type=int, default=4,
                     help="bandwidth rank multiplier")
    det.add_argument("--eig-threshold", type=float, default=0.1)
    det.add_argument("--hf-threshold", type=float, default=0.9)
    det.add_argument("--tau-scale", type=float, default=3.0)
    det.add_argument("--seed", type=int, default=0)
    det.add_argument("--repeats", type=int, default=1,
                     help="detector runs per eigenvector (best-of)")
    det.add_argument("--baseline", choices=["ransac"], default=None,
                     help="replace the two-stage pipeline with a baseline")
    det.add_argument("--k", type=int, default=1000,
                     help="baseline consensus trials")
    det.add_argument("--init-labels", default=None,
                     help="labels CSV to start --stage model from")
    det.add_argument("--out-labels", default=None)
    det.add_argument("--out-model", default=None)
    det.add_argument("--dump-spectrum", default=None, metavar="CSV",
                     help="write index,eigenvalue rows")
    det.add_argument("--dump-eligible", default=None, metavar="CSV",
                     help="write eigenvalue,hf_measure,flagged_count rows")
    det.set_defaults(func=cmd_detect)

    swp = sub.add_parser("sweep", help="run a parameter sweep into a CSV",
                         description="Run pipelines over a parameter grid "
                                     "and write aggregated curves.")
    swp.add_argument("--spec", required=True, help="sweep spec JSON path")
    swp.add_argument("--out", required=True, help="output curves CSV path")
    swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _CliError as exc:
        print(exc, file=sys.stderr)
        return exc.code
    except ConicPurgeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
