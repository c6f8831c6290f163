"""Command-line frontend: generate, train, predict, evaluate, curves.

Exit codes: 0 success, 1 usage/configuration, 2 data/validation,
3 internal or model failure. With ``--json-errors`` a machine-parsable
error object is written to stderr.

All commands are deterministic given their flags and seed; training
parallelism (``--threads``, capped by ``CONVSURV_THREADS``) never changes
results, only wall time.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import model_io
from .core import EventStatus, StepFunction, SurvivalDataset, TimeAxis, complement
from .cox import fit_cox, predict_median_batch as cox_median_batch
from .errors import (
    CompatibilityError,
    ConfigError,
    ConvsurvError,
    DegenerateFitError,
    EmptyInputError,
    InvalidEventError,
    LogParseError,
    LogValidationError,
    ShapeMismatchError,
    StratificationError,
    WrongEstimatorError,
)
from .estimators import (
    aalen_johansen,
    cif_confidence_band,
    kaplan_meier,
    km_confidence_band,
)
from .evaluation import (
    MODEL_KINDS,
    EvaluationReport,
    SplitSpec,
    evaluate_models,
    scatter_pairs,
    stratified_split,
)
from .forest import (
    ForestConfig,
    fit_conditional_ensemble,
    fit_rsf,
    fit_rsf_competing,
    predict_median_batch as forest_median_batch,
    predict_forest_incidence,
    predict_forest_survival,
)
from .generator import (
    GeneratorConfig,
    generate_synthetic,
    write_ground_truth_csv,
    write_logs_csv,
)
from .pipeline import (
    DEFAULT_CHURN_WINDOW,
    FeatureSpec,
    build_dataset,
    filter_newcomers,
    ingest_logs,
)

_AXES = tuple(a.value for a in TimeAxis)

_DATA_ERRORS = (LogParseError, LogValidationError, EmptyInputError,
                StratificationError, CompatibilityError, WrongEstimatorError,
                DegenerateFitError, InvalidEventError, ShapeMismatchError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _fmt(value: float) -> str:
    return repr(float(value))


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, ConfigError):
        return 1
    if isinstance(exc, _DATA_ERRORS):
        return 2
    return 3


def _load_filtered(path) -> list:
    logs = filter_newcomers(ingest_logs(path))
    if not logs:
        raise EmptyInputError(
            "no players with >= 2 active days after the newcomer filter")
    return logs


def _forest_config(args) -> ForestConfig:
    return ForestConfig(
        n_trees=args.trees,
        mtry=args.mtry,
        min_node_events=args.min_node_events,
        alpha=args.alpha,
        max_depth=args.max_depth,
        seed=args.seed,
        aggregate=args.aggregate,
    )


def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trees", type=int, default=900,
                   help="number of base learners (default 900)")
    p.add_argument("--mtry", type=int, default=None,
                   help="features per node (default ceil(sqrt(p)))")
    p.add_argument("--min-node-events", type=int, default=15)
    p.add_argument("--alpha", type=float, default=0.05,
                   help="conditional-ensemble split significance threshold")
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--aggregate", choices=("pooled", "mean"), default="pooled",
                   help="conditional-ensemble curve aggregation")
    p.add_argument("--ridge", type=float, default=1e-6,
                   help="Cox ridge penalty")
    p.add_argument("--train-frac", type=float, default=0.30)
    p.add_argument("--churn-window", type=int, default=DEFAULT_CHURN_WINDOW,
                   help="inactivity days labeling churn; 0 disables churn labels")
    p.add_argument("--threads", type=int, default=None,
                   help="training workers (capped by CONVSURV_THREADS)")


def cmd_generate(args) -> int:
    cfg = GeneratorConfig(
        n_players=args.players,
        pu_propensity=args.pu_rate,
        observation_window_days=args.window,
        one_time_comer_rate=args.one_time_rate,
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    logs, truths = generate_synthetic(cfg)
    logs_path = out / "logs.csv"
    truth_path = out / "ground_truth.csv"
    write_logs_csv(logs, logs_path)
    write_ground_truth_csv(truths, truth_path)
    multi = [log for log in logs if len(log.rows) >= 2]
    converters = sum(1 for log in multi if log.first_purchase_row() is not None)
    print(f"wrote {logs_path} and {truth_path}: {len(logs)} players, "
          f"{len(multi)} multi-day, {converters} observed converters "
          f"({100.0 * converters / max(1, len(multi)):.2f}% of multi-day)")
    return 0


def _build_for_model(logs, target: str, model_kind: str, churn_window: int
                     ) -> SurvivalDataset:
    competing = churn_window > 0
    if model_kind == "rsf-cr" and not competing:
        raise ConfigError(
            "rsf-cr needs churn labels: set --churn-window > 0")
    data = build_dataset(logs, TimeAxis(target), competing=competing,
                         churn_window=churn_window)
    if model_kind != "rsf-cr":
        data = data.recode_competing_as_censored()
    return data


def cmd_train(args) -> int:
    logs = _load_filtered(args.data)
    data = _build_for_model(logs, args.target, args.model, args.churn_window)
    train, _test = stratified_split(
        data, SplitSpec(train_fraction=args.train_frac, seed=args.seed))
    spec = FeatureSpec()
    cfg = _forest_config(args)
    if args.model == "cox":
        fitted = fit_cox(train, ridge=args.ridge)
        diagnostics = {
            "iterations": fitted.convergence.iterations,
            "gradient_norm": fitted.convergence.gradient_norm,
            "log_partial_likelihood": fitted.convergence.log_partial_likelihood,
        }
    else:
        fit_fn = {"rsf": fit_rsf, "cif": fit_conditional_ensemble,
                  "rsf-cr": fit_rsf_competing}[args.model]
        fitted = fit_fn(train, cfg, args.threads)
        n_leaves = [len(t.leaves) for t in fitted.trees]
        diagnostics = {
            "n_trees": len(fitted.trees),
            "mean_leaves_per_tree": sum(n_leaves) / len(n_leaves),
            "grid_size": int(fitted.grid.size),
        }
    train_config = {
        "model": args.model,
        "target": args.target,
        "seed": args.seed,
        "trees": args.trees,
        "train_frac": args.train_frac,
        "churn_window": args.churn_window,
        "alpha": args.alpha,
        "mtry": args.mtry,
        "min_node_events": args.min_node_events,
        "max_depth": args.max_depth,
        "aggregate": args.aggregate,
        "ridge": args.ridge,
    }
    model_io.save_model(args.out, fitted, axis=TimeAxis(args.target),
                        feature_names=spec.features,
                        feature_spec_hash=spec.spec_hash(),
                        train_config=train_config)
    summary = {
        "config": train_config,
        "n_players": len(logs),
        "n_train": len(train),
        "n_train_converters": train.n_events(EventStatus.CONVERTED),
        "diagnostics": diagnostics,
    }
    summary_path = Path(str(args.out) + ".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {args.out} ({args.model} on {args.target}, "
          f"{len(train)} training subjects) and {summary_path}")
    return 0


def _subject_curve(model_file: model_io.ModelFile, data: SurvivalDataset,
                   player_id: str) -> StepFunction:
    idx = next((i for i, r in enumerate(data.records)
                if r.subject_id == player_id), None)
    if idx is None:
        raise EmptyInputError(f"player {player_id!r} not found in input data")
    x = np.asarray(data.records[idx].covariates, dtype=float)
    model = model_file.model
    if model_file.kind == "cox":
        from .cox import predict_cox_survival
        return predict_cox_survival(model, x)
    if model_file.kind == "rsf-cr":
        return predict_forest_incidence(model, x, EventStatus.CONVERTED)
    return predict_forest_survival(model, x)


def cmd_predict(args) -> int:
    model_file = model_io.load_model(args.model)
    spec = FeatureSpec()
    if spec.spec_hash() != model_file.feature_spec_hash:
        raise CompatibilityError(
            "feature spec hash mismatch between the model file and this build")
    logs = _load_filtered(args.data)
    churn_window = model_file.train_config.get("churn_window", DEFAULT_CHURN_WINDOW)
    data = _build_for_model(logs, model_file.axis.value, model_file.kind,
                            churn_window)
    if args.curve is not None:
        curve = _subject_curve(model_file, data, args.curve)
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "value"])
            for t, v in zip(curve.knots, curve.values):
                writer.writerow([_fmt(t), _fmt(v)])
        print(f"wrote curve for {args.curve} to {args.out}")
        return 0
    if model_file.kind == "cox":
        medians = cox_median_batch(model_file.model, data.covariate_matrix)
    else:
        medians = forest_median_batch(model_file.model, data.covariate_matrix)
    rows = sorted(zip((r.subject_id for r in data.records), medians))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["player_id", "predicted_median", "predicted_converter"])
        for pid, med in rows:
            absent = bool(np.isnan(med))
            writer.writerow([pid, "" if absent else _fmt(med),
                             "false" if absent else "true"])
    print(f"wrote predictions for {len(rows)} players to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    models = MODEL_KINDS if args.models == "all" else tuple(args.models.split(","))
    targets = _AXES if args.targets == "all" else tuple(args.targets.split(","))
    for t in targets:
        if t not in _AXES:
            raise ConfigError(f"unknown target {t!r}")
    logs = _load_filtered(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _forest_config(args)
    rows = []
    competing = args.churn_window > 0
    for target in targets:
        data = build_dataset(logs, TimeAxis(target), competing=competing,
                             churn_window=args.churn_window)
        train, test = stratified_split(
            data, SplitSpec(train_fraction=args.train_frac, seed=args.seed))
        results, outcomes = evaluate_models(
            train, test, models, cfg, ridge=args.ridge, n_jobs=args.threads)
        rows.extend(results)
        for kind, kind_outcomes in outcomes.items():
            pairs = scatter_pairs(kind_outcomes)
            base = f"scatter_{kind}_{target}"
            with open(out / f"{base}.csv", "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["observed", "predicted"])
                for obs, pred in pairs:
                    writer.writerow([_fmt(obs), _fmt(pred)])
            with open(out / f"{base}_loglog.csv", "w", newline="",
                      encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["log1p_observed", "log1p_predicted"])
                for obs, pred in pairs:
                    writer.writerow([_fmt(math.log1p(obs)), _fmt(math.log1p(pred))])
    report = EvaluationReport(tuple(rows))
    doc = {
        "config": {
            "seed": args.seed,
            "train_fraction": args.train_frac,
            "trees": args.trees,
            "churn_window": args.churn_window,
            "models": list(models),
            "targets": list(targets),
        },
        "report": report.to_json_dict(),
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n")
    (out / "report.txt").write_text(report.to_text())
    print(report.to_text(), end="")
    failures = [r for r in rows if r.error is not None]
    for r in failures:
        print(f"model {r.model} on {r.axis} failed: {r.error}", file=sys.stderr)
    return 3 if failures else 0


def cmd_curves(args) -> int:
    logs = _load_filtered(args.data)
    axis = TimeAxis(args.axis)
    if args.population == "converters":
        data = build_dataset(logs, axis, competing=False)
        keep = [i for i, r in enumerate(data.records)
                if r.status == EventStatus.CONVERTED]
        if not keep:
            raise EmptyInputError("no converters in the input data")
        sub = data.subset(keep)
        surv = kaplan_meier(sub)
        lo_s, hi_s = km_confidence_band(sub, args.level)
        estimate = complement(surv)
        lower, upper = complement(hi_s), complement(lo_s)
    else:
        competing = args.churn_window > 0
        data = build_dataset(logs, axis, competing=competing,
                             churn_window=args.churn_window)
        if competing:
            estimate = aalen_johansen(data, EventStatus.CONVERTED)
            lower, upper = cif_confidence_band(
                data, EventStatus.CONVERTED, args.level)
        else:
            surv = kaplan_meier(data)
            lo_s, hi_s = km_confidence_band(data, args.level)
            estimate = complement(surv)
            lower, upper = complement(hi_s), complement(lo_s)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "estimate", "lower", "upper"])
        for i, t in enumerate(estimate.knots):
            writer.writerow([_fmt(t), _fmt(estimate.values[i]),
                             _fmt(lower.values[i]), _fmt(upper.values[i])])
    print(f"wrote {estimate.knots.size} incidence knots to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="convsurv",
                     description="Player-conversion survival analysis")
    parser.add_argument("--json-errors", action="store_true",
                        help="emit machine-parsable error JSON on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic player-log dataset")
    p.add_argument("--players", type=int, required=True)
    p.add_argument("--pu-rate", type=float, default=0.053)
    p.add_argument("--window", type=int, default=120,
                   help="observation window in days")
    p.add_argument("--one-time-rate", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit one model on the stratified train split")
    p.add_argument("--data", required=True, help="player-log CSV")
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    p.add_argument("--target", choices=_AXES, required=True)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--seed", type=int, default=0)
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict median conversion times")
    p.add_argument("--model", required=True, help="model file path")
    p.add_argument("--data", required=True, help="player-log CSV")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--curve", default=None, metavar="PLAYER_ID",
                   help="emit this subject's survival/incidence curve instead")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="full model-comparison protocol")
    p.add_argument("--data", required=True, help="player-log CSV")
    p.add_argument("--models", default="all",
                   help="'all' or comma-separated subset of " + ",".join(MODEL_KINDS))
    p.add_argument("--targets", default="all",
                   help="'all' or comma-separated subset of " + ",".join(_AXES))
    p.add_argument("--seed", type=int, required=True,
                   help="mandatory: report must be reproducible")
    p.add_argument("--out", required=True, help="output directory")
    _add_train_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("curves", help="population incidence curve with band")
    p.add_argument("--data", required=True, help="player-log CSV")
    p.add_argument("--axis", choices=_AXES, required=True)
    p.add_argument("--population", choices=("all", "converters"), default="all")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--churn-window", type=int, default=DEFAULT_CHURN_WINDOW)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_curves)
    return parser


def main(argv=None) -> int:
    raw = list(sys.argv[1:] if argv is None else argv)
    json_errors = "--json-errors" in raw
    parser = build_parser()
    try:
        args = parser.parse_args(raw)
        return args.func(args)
    except Exception as exc:
        if isinstance(exc, ConvsurvError):
            code = _exit_code(exc)
        elif isinstance(exc, OSError):
            code = 2
        else:
            code = 3
        if json_errors:
            payload = {"error": type(exc).__name__, "message": str(exc),
                       "exit_code": code}
            print(json.dumps(payload), file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
