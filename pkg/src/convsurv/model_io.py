"""Unified model-file format (JSON, format version 1).

Top-level object:

    {
      "format_version": 1,
      "kind": "cox" | "rsf" | "cif" | "rsf-cr",
      "axis": "lifetime" | "level" | "playtime",
      "feature_names": [...],
      "feature_spec_hash": "...",
      "train_config": {...},          # config echo incl. seed
      "model": {...}                  # kind-specific payload
    }

Cox payload: {"beta", "baseline_knots", "baseline_values", "convergence"}.

Forest payload: {"config": {...}, "grid": [...], "trees": [...]} where each
tree is flat node arrays {"feature", "threshold", "left", "right",
"leaf_index"} (threshold null at leaves) plus "leaves": per-leaf risk
tables {"times", "at_risk", "d_conv", "d_churn"} and, for conditional
ensembles, "at_risk_grid". Leaf curves are recomputed from the counts on
load, so a save/load round trip reproduces predictions bit-identically
(JSON floats use shortest round-trip representation).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .core import TimeAxis
from .cox import ConvergenceInfo, CoxFit, StepFunction
from .errors import CompatibilityError
from .forest import ForestConfig, ForestKind, ForestModel, Leaf, SurvivalTree

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelFile:
    kind: str
    axis: TimeAxis
    feature_names: tuple[str, ...]
    feature_spec_hash: str
    train_config: dict
    model: CoxFit | ForestModel


def _floats(arr) -> list:
    return [float(v) for v in np.asarray(arr, dtype=float)]


def _ints(arr) -> list:
    return [int(v) for v in np.asarray(arr)]


def _cox_payload(fit: CoxFit) -> dict:
    return {
        "beta": _floats(fit.beta),
        "baseline_knots": _floats(fit.baseline_cum_hazard.knots),
        "baseline_values": _floats(fit.baseline_cum_hazard.values),
        "convergence": dataclasses.asdict(fit.convergence),
    }


def _cox_from_payload(payload: dict, feature_names) -> CoxFit:
    return CoxFit(
        beta=np.array(payload["beta"], dtype=float),
        baseline_cum_hazard=StepFunction(
            np.array(payload["baseline_knots"], dtype=float),
            np.array(payload["baseline_values"], dtype=float),
            0.0,
        ),
        feature_names=tuple(feature_names),
        convergence=ConvergenceInfo(**payload["convergence"]),
    )


def _tree_payload(tree: SurvivalTree) -> dict:
    return {
        "feature": _ints(tree.feature),
        "threshold": [None if f < 0 else float(t)
                      for f, t in zip(tree.feature, tree.threshold)],
        "left": _ints(tree.left),
        "right": _ints(tree.right),
        "leaf_index": _ints(tree.leaf_index),
        "leaves": [
            {
                "times": _floats(leaf.times),
                "at_risk": _ints(leaf.at_risk),
                "d_conv": _ints(leaf.d_conv),
                "d_churn": _ints(leaf.d_churn),
                "at_risk_grid": (None if leaf.at_risk_grid is None
                                 else _ints(leaf.at_risk_grid)),
            }
            for leaf in tree.leaves
        ],
    }


def _tree_from_payload(payload: dict) -> SurvivalTree:
    leaves = []
    for lf in payload["leaves"]:
        d_conv = np.array(lf["d_conv"], dtype=int)
        d_churn = np.array(lf["d_churn"], dtype=int)
        leaves.append(Leaf(
            times=np.array(lf["times"], dtype=float),
            at_risk=np.array(lf["at_risk"], dtype=int),
            d_total=d_conv + d_churn,
            d_conv=d_conv,
            d_churn=d_churn,
            at_risk_grid=(None if lf["at_risk_grid"] is None
                          else np.array(lf["at_risk_grid"], dtype=int)),
        ))
    threshold = np.array(
        [np.nan if t is None else t for t in payload["threshold"]], dtype=float)
    return SurvivalTree(
        feature=np.array(payload["feature"], dtype=np.int32),
        threshold=threshold,
        left=np.array(payload["left"], dtype=np.int32),
        right=np.array(payload["right"], dtype=np.int32),
        leaf_index=np.array(payload["leaf_index"], dtype=np.int32),
        leaves=leaves,
    )


def _forest_payload(model: ForestModel) -> dict:
    return {
        "config": dataclasses.asdict(model.config),
        "grid": _floats(model.grid),
        "trees": [_tree_payload(t) for t in model.trees],
    }


def _forest_from_payload(payload: dict, kind: str, feature_names, axis) -> ForestModel:
    return ForestModel(
        kind=ForestKind(kind),
        trees=tuple(_tree_from_payload(t) for t in payload["trees"]),
        config=ForestConfig(**payload["config"]),
        feature_names=tuple(feature_names),
        axis=axis,
        grid=np.array(payload["grid"], dtype=float),
    )


def save_model(path, model: CoxFit | ForestModel, *, axis: TimeAxis,
               feature_names, feature_spec_hash: str, train_config: dict) -> None:
    if isinstance(model, CoxFit):
        kind = "cox"
        payload = _cox_payload(model)
    else:
        kind = model.kind.value
        payload = _forest_payload(model)
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "axis": TimeAxis(axis).value,
        "feature_names": list(feature_names),
        "feature_spec_hash": feature_spec_hash,
        "train_config": train_config,
        "model": payload,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CompatibilityError(
            f"model file has format version {version!r}; this build reads "
            f"version {FORMAT_VERSION}")
    kind = doc["kind"]
    axis = TimeAxis(doc["axis"])
    names = tuple(doc["feature_names"])
    if kind == "cox":
        model = _cox_from_payload(doc["model"], names)
    elif kind in ("rsf", "cif", "rsf-cr"):
        model = _forest_from_payload(doc["model"], kind, names, axis)
    else:
        raise CompatibilityError(f"unknown model kind {kind!r}")
    return ModelFile(
        kind=kind,
        axis=axis,
        feature_names=names,
        feature_spec_hash=doc["feature_spec_hash"],
        train_config=doc["train_config"],
        model=model,
    )
