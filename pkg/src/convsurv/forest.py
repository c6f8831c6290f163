"""Survival tree ensembles: one growing chassis, three model kinds.

* RSF: joint (feature, cutpoint) selection maximizing the absolute
  standardized log-rank statistic; leaves carry cumulative-hazard curves
  and the ensemble survival is exp(-mean cumulative hazard).
* Conditional-inference ensemble: two-step splits. Step 1 tests each
  candidate feature's association with log-rank scores via a standardized
  permutation linear statistic (Bonferroni-adjusted, stop when the best
  adjusted p-value exceeds ``alpha``); step 2 picks the cutpoint that
  maximizes the standardized two-sample statistic on the selected feature.
  Leaves carry product-limit curves; trees aggregate either by pooling
  event/at-risk counts across trees ("pooled", default) or by averaging
  per-tree curves ("mean").
* Competing-risks RSF: cause-specific log-rank splitting for the
  conversion event (churn treated as censoring inside the statistic);
  leaves carry per-cause hazards plus the all-cause survival so ensemble
  incidence curves conserve total probability exactly.

Training is deterministic: per-tree RNG streams derive from
(seed, tree index), so forests are bit-identical for any degree of
training parallelism. ``CONVSURV_THREADS`` caps worker processes.
"""

from __future__ import annotations

import concurrent.futures
import enum
import math
import multiprocessing
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import (
    EventStatus,
    StepFunction,
    SurvivalDataset,
    TimeAxis,
    median_crossing,
)
from .errors import (
    ConfigError,
    DegenerateFitError,
    InvalidEventError,
    InvalidModelError,
    ShapeMismatchError,
    WrongEstimatorError,
)
from .estimators import (
    cif_values_from_counts,
    km_values_from_counts,
    na_values_from_counts,
)


class ForestKind(enum.Enum):
    RSF = "rsf"
    CONDITIONAL = "cif"
    COMPETING = "rsf-cr"


@dataclass(frozen=True)
class ForestConfig:
    """Ensemble hyperparameters; only ``n_trees`` is fixed by the protocol.

    ``mtry`` defaults to ceil(sqrt(p)) at fit time. ``min_node_events``
    counts events of any type in each daughter node. ``max_candidates``
    caps cutpoint scans on near-continuous features to quantile-spaced
    midpoints. ``aggregate`` applies to conditional ensembles only.
    """

    n_trees: int = 900
    mtry: int | None = None
    min_node_events: int = 15
    bootstrap: bool = True
    alpha: float = 0.05
    max_depth: int | None = None
    seed: int = 0
    max_candidates: int = 64
    aggregate: str = "pooled"

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be >= 1")
        if self.min_node_events < 1:
            raise ConfigError("min_node_events must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.max_candidates < 1:
            raise ConfigError("max_candidates must be >= 1")
        if self.aggregate not in ("pooled", "mean"):
            raise ConfigError("aggregate must be 'pooled' or 'mean'")


@dataclass
class Leaf:
    """Node-local risk table: counts from the training records routed here."""

    times: np.ndarray      # distinct event times (any type) in the leaf
    at_risk: np.ndarray
    d_total: np.ndarray
    d_conv: np.ndarray
    d_churn: np.ndarray
    at_risk_grid: np.ndarray | None = None  # conditional kind: Q on model grid


@dataclass
class SurvivalTree:
    """Flat node arrays; feature == -1 marks a leaf, children by index.

    Splits send x[feature] <= threshold to the left child.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_index: np.ndarray
    leaves: list[Leaf]


@dataclass(frozen=True)
class ForestModel:
    kind: ForestKind
    trees: tuple[SurvivalTree, ...]
    config: ForestConfig
    feature_names: tuple[str, ...]
    axis: TimeAxis
    grid: np.ndarray  # knots shared by all predicted curves

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


# --- split statistics ---------------------------------------------------

def _candidate_thresholds(x: np.ndarray, cap: int) -> np.ndarray:
    """Midpoints between consecutive distinct values, quantile-thinned to cap."""
    u = np.unique(x)
    if u.size < 2:
        return np.empty(0)
    mids = (u[:-1] + u[1:]) / 2.0
    if mids.size > cap:
        pick = np.unique(np.round(np.linspace(0, mids.size - 1, cap)).astype(int))
        mids = mids[pick]
    return mids


def _bin_matrix(rows: np.ndarray, cols: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    flat = np.bincount(rows * n_cols + cols, minlength=n_rows * n_cols)
    return flat.reshape(n_rows, n_cols).astype(float)


def _admissible_mask(tb: np.ndarray, any_event: np.ndarray, n_thr: int,
                     min_events: int) -> np.ndarray:
    ev_left = np.bincount(tb[any_event], minlength=n_thr + 1).cumsum()[:n_thr]
    total = int(any_event.sum())
    return (ev_left >= min_events) & (total - ev_left >= min_events)


def _logrank_scan(x, times, cause_event, any_event, min_events, cap):
    """Standardized log-rank statistic for every admissible cutpoint.

    Returns (thresholds, stats); inadmissible or zero-variance cutpoints
    get -inf. The statistic's events are ``cause_event`` (other causes act
    as censorings); admissibility counts ``any_event`` per daughter.
    """
    thresholds = _candidate_thresholds(x, cap)
    c = thresholds.size
    if c == 0:
        return thresholds, np.empty(0)
    ets = np.unique(times[cause_event])
    k = ets.size
    stats = np.full(c, -np.inf)
    adm = _admissible_mask(np.searchsorted(thresholds, x, side="left"),
                           any_event, c, min_events)
    if k == 0 or not adm.any():
        return thresholds, stats

    tb = np.searchsorted(thresholds, x, side="left")          # x <= thr[j] iff tb <= j
    rb = np.searchsorted(ets, times, side="right")            # at risk at k iff k < rb
    h_all = _bin_matrix(rb, tb, k + 1, c + 1)
    suffix = np.cumsum(h_all[::-1], axis=0)[::-1]
    ql = np.cumsum(suffix[1:k + 1], axis=1)[:, :c]            # at risk, left side
    q = suffix[1:k + 1].sum(axis=1)

    de = np.searchsorted(ets, times[cause_event])
    h_ev = _bin_matrix(de, tb[cause_event], k, c + 1)
    dl = np.cumsum(h_ev, axis=1)[:, :c]
    d = h_ev.sum(axis=1)

    frac = ql / q[:, None]
    oe = (dl - d[:, None] * frac).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vterm = d[:, None] * frac * (1.0 - frac) * ((q - d) / (q - 1.0))[:, None]
    vterm[q <= 1.0] = 0.0
    v = vterm.sum(axis=0)
    ok = adm & (v > 0.0)
    stats[ok] = np.abs(oe[ok]) / np.sqrt(v[ok])
    return thresholds, stats


def _logrank_scores(times: np.ndarray, events: np.ndarray) -> np.ndarray:
    """Censoring-adjusted scores a_i = delta_i - H(t_i), H from node data."""
    ets = np.unique(times[events])
    if ets.size == 0:
        return np.zeros(times.size)
    sorted_t = np.sort(times)
    q = times.size - np.searchsorted(sorted_t, ets, side="left")
    d = np.bincount(np.searchsorted(ets, times[events]), minlength=ets.size)
    cumhaz = np.concatenate(([0.0], np.cumsum(d / q)))
    idx = np.searchsorted(ets, times, side="right")
    return events.astype(float) - cumhaz[idx]


def _score_moments(a: np.ndarray):
    centered = a - a.mean()
    return centered, float(centered @ centered) / a.size


def _feature_pvalues(xmat: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Asymptotic permutation-test p-value per candidate feature column.

    The linear statistic sum_i x_i a_i is standardized by its conditional
    permutation moments; constant features get p = 1.
    """
    n = a.size
    centered, var_a = _score_moments(a)
    t = xmat.T @ centered
    ssx = ((xmat - xmat.mean(axis=0)) ** 2).sum(axis=0)
    v = var_a * (n / (n - 1.0)) * ssx if n > 1 else np.zeros_like(t)
    p = np.ones(xmat.shape[1])
    ok = v > 0.0
    cstat = np.abs(t[ok]) / np.sqrt(v[ok])
    p[ok] = 2.0 * ndtr(-cstat)
    return p


def _two_sample_scan(x, a, any_event, min_events, cap):
    """Standardized two-sample score statistic for every admissible cutpoint."""
    thresholds = _candidate_thresholds(x, cap)
    c = thresholds.size
    if c == 0:
        return thresholds, np.empty(0)
    n = a.size
    tb = np.searchsorted(thresholds, x, side="left")
    stats = np.full(c, -np.inf)
    adm = _admissible_mask(tb, any_event, c, min_events)
    if not adm.any() or n < 2:
        return thresholds, stats
    sum_left = np.bincount(tb, weights=a, minlength=c + 1).cumsum()[:c]
    n_left = np.bincount(tb, minlength=c + 1).cumsum()[:c]
    _, var_a = _score_moments(a)
    expected = n_left * a.mean()
    v = var_a * n_left * (n - n_left) / (n - 1.0)
    ok = adm & (v > 0.0)
    stats[ok] = np.abs(sum_left[ok] - expected[ok]) / np.sqrt(v[ok])
    return thresholds, stats


# --- tree growth --------------------------------------------------------

def _make_leaf(times, status, grid=None) -> Leaf:
    ev = status != int(EventStatus.CENSORED)
    ets = np.unique(times[ev])
    sorted_t = np.sort(times)
    at_risk = times.size - np.searchsorted(sorted_t, ets, side="left")
    k = ets.size
    if k:
        d_conv = np.bincount(
            np.searchsorted(ets, times[status == int(EventStatus.CONVERTED)]),
            minlength=k)
        d_churn = np.bincount(
            np.searchsorted(ets, times[status == int(EventStatus.CHURNED)]),
            minlength=k)
    else:
        d_conv = np.zeros(0, dtype=int)
        d_churn = np.zeros(0, dtype=int)
    at_risk_grid = None
    if grid is not None:
        at_risk_grid = times.size - np.searchsorted(sorted_t, grid, side="left")
    return Leaf(ets, at_risk.astype(int), (d_conv + d_churn).astype(int),
                d_conv.astype(int), d_churn.astype(int), at_risk_grid)


def _best_split_rsf(x_node, t_node, s_node, candidates, min_events, cap):
    cause = s_node == int(EventStatus.CONVERTED)
    any_ev = s_node != int(EventStatus.CENSORED)
    best = (-np.inf, -1, np.nan)
    for f in candidates:
        thr, stats = _logrank_scan(x_node[:, f], t_node, cause, any_ev,
                                   min_events, cap)
        if stats.size == 0:
            continue
        j = int(np.argmax(stats))
        if stats[j] > best[0]:
            best = (float(stats[j]), int(f), float(thr[j]))
    if not np.isfinite(best[0]):
        return None
    return best[1], best[2]


def _best_split_conditional(x_node, t_node, s_node, candidates, min_events,
                            cap, alpha):
    events = s_node == int(EventStatus.CONVERTED)
    scores = _logrank_scores(t_node, events)
    pvals = _feature_pvalues(x_node[:, candidates], scores)
    testable = pvals < 1.0
    n_tests = int(testable.sum())
    if n_tests == 0:
        return None
    best_i = int(np.argmin(pvals))
    adjusted = min(1.0, pvals[best_i] * n_tests)
    if adjusted > alpha:
        return None
    f = int(candidates[best_i])
    any_ev = s_node != int(EventStatus.CENSORED)
    thr, stats = _two_sample_scan(x_node[:, f], scores, any_ev, min_events, cap)
    if stats.size == 0 or not np.isfinite(stats.max()):
        return None
    j = int(np.argmax(stats))
    return f, float(thr[j])


def _grow_tree(xs, ts, ss, kind: ForestKind, cfg: ForestConfig, mtry: int,
               rng: np.random.Generator, grid) -> SurvivalTree:
    p = xs.shape[1]
    leaf_grid = grid if kind == ForestKind.CONDITIONAL else None
    feature, threshold, left, right, leaf_index = [], [], [], [], []
    leaves: list[Leaf] = []

    stack = [(np.arange(xs.shape[0]), 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node_id = len(feature)
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        leaf_index.append(-1)
        if parent >= 0:
            (right if is_right else left)[parent] = node_id

        t_node, s_node = ts[idx], ss[idx]
        n_events = int(np.sum(s_node != int(EventStatus.CENSORED)))
        split = None
        depth_ok = cfg.max_depth is None or depth < cfg.max_depth
        if depth_ok and n_events >= 2 * cfg.min_node_events:
            candidates = np.sort(rng.choice(p, size=mtry, replace=False))
            x_node = xs[idx]
            if kind == ForestKind.CONDITIONAL:
                split = _best_split_conditional(
                    x_node, t_node, s_node, candidates,
                    cfg.min_node_events, cfg.max_candidates, cfg.alpha)
            else:
                split = _best_split_rsf(
                    x_node, t_node, s_node, candidates,
                    cfg.min_node_events, cfg.max_candidates)
        if split is None:
            leaf_index[node_id] = len(leaves)
            leaves.append(_make_leaf(t_node, s_node, leaf_grid))
            continue
        f, thr = split
        feature[node_id] = f
        threshold[node_id] = thr
        go_left = xs[idx, f] <= thr
        stack.append((idx[~go_left], depth + 1, node_id, True))
        stack.append((idx[go_left], depth + 1, node_id, False))

    return SurvivalTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        leaf_index=np.asarray(leaf_index, dtype=np.int32),
        leaves=leaves,
    )


def _grow_indexed(args):
    x, times, status, kind, cfg, mtry, grid, tree_idx = args
    rng = np.random.default_rng((cfg.seed, tree_idx))
    n = times.size
    if cfg.bootstrap:
        sample = rng.integers(0, n, size=n)
    else:
        sample = np.arange(n)
    return _grow_tree(x[sample], times[sample], status[sample],
                      kind, cfg, mtry, rng, grid)


_FORK_PAYLOAD = None


def _grow_from_payload(tree_idx: int) -> SurvivalTree:
    return _grow_indexed(_FORK_PAYLOAD + (tree_idx,))


def resolve_jobs(n_jobs: int | None) -> int:
    """Worker count: explicit argument, capped by CONVSURV_THREADS."""
    env = os.environ.get("CONVSURV_THREADS")
    cap = int(env) if env else None
    if n_jobs is None:
        n_jobs = cap if cap is not None else 1
    if cap is not None:
        n_jobs = min(n_jobs, cap)
    return max(1, n_jobs)


def _fit_forest(data: SurvivalDataset, cfg: ForestConfig, kind: ForestKind,
                n_jobs: int | None) -> ForestModel:
    x = np.asarray(data.covariate_matrix, dtype=float)
    times = data.times
    status = data.status_codes.astype(np.int8)
    p = x.shape[1]
    mtry = cfg.mtry if cfg.mtry is not None else math.ceil(math.sqrt(p))
    if mtry > p:
        raise ConfigError(f"mtry={mtry} exceeds the feature count {p}")

    grid = np.unique(times[status != int(EventStatus.CENSORED)])
    payload = (x, times, status, kind, cfg, mtry, grid)
    jobs = resolve_jobs(n_jobs)
    indices = range(cfg.n_trees)
    if jobs == 1 or cfg.n_trees < 2 * jobs:
        trees = [_grow_indexed(payload + (i,)) for i in indices]
    else:
        # fork workers inherit the read-only payload; per-tree seeds make
        # the result independent of scheduling, merged by tree index
        global _FORK_PAYLOAD
        _FORK_PAYLOAD = payload
        try:
            ctx = multiprocessing.get_context("fork")
            chunk = max(1, cfg.n_trees // (jobs * 4))
            with concurrent.futures.ProcessPoolExecutor(
                    max_workers=jobs, mp_context=ctx) as pool:
                trees = list(pool.map(_grow_from_payload, indices,
                                      chunksize=chunk))
        finally:
            _FORK_PAYLOAD = None
    return ForestModel(kind=kind, trees=tuple(trees), config=cfg,
                       feature_names=data.feature_names, axis=data.axis,
                       grid=grid)


def fit_rsf(data: SurvivalDataset, cfg: ForestConfig,
            n_jobs: int | None = None) -> ForestModel:
    """Random survival forest with log-rank splitting and hazard leaves."""
    if data.competing_risks:
        raise WrongEstimatorError("fit_rsf requires a single-risk dataset")
    if data.n_events() == 0:
        raise DegenerateFitError("cannot grow survival trees with zero events")
    return _fit_forest(data, cfg, ForestKind.RSF, n_jobs)


def fit_conditional_ensemble(data: SurvivalDataset, cfg: ForestConfig,
                             n_jobs: int | None = None) -> ForestModel:
    """Conditional-inference survival ensemble with two-step splitting."""
    if data.competing_risks:
        raise WrongEstimatorError(
            "fit_conditional_ensemble requires a single-risk dataset")
    if data.n_events() == 0:
        raise DegenerateFitError("cannot grow survival trees with zero events")
    return _fit_forest(data, cfg, ForestKind.CONDITIONAL, n_jobs)


def fit_rsf_competing(data: SurvivalDataset, cfg: ForestConfig,
                      n_jobs: int | None = None) -> ForestModel:
    """Competing-risks forest: cause-specific splits, event-specific leaves.

    A dataset without churn events degenerates cleanly to the single-risk
    forest (same trees under the same seeds).
    """
    if not data.competing_risks:
        raise WrongEstimatorError(
            "fit_rsf_competing requires a competing-risks dataset")
    if data.n_events(EventStatus.CONVERTED) == 0:
        raise DegenerateFitError(
            "cannot grow competing-risks trees with zero conversion events")
    return _fit_forest(data, cfg, ForestKind.COMPETING, n_jobs)


# --- prediction ---------------------------------------------------------

def _route(tree: SurvivalTree, x: np.ndarray) -> np.ndarray:
    """Leaf index (into tree.leaves) for every row of ``x``."""
    cur = np.zeros(x.shape[0], dtype=np.int32)
    while True:
        feat = tree.feature[cur]
        active = feat >= 0
        if not active.any():
            break
        rows = np.nonzero(active)[0]
        nodes = cur[rows]
        go_left = x[rows, tree.feature[nodes]] <= tree.threshold[nodes]
        cur[rows] = np.where(go_left, tree.left[nodes], tree.right[nodes])
    return tree.leaf_index[cur]


def _step_eval(knots, values, grid, left_value):
    idx = np.searchsorted(knots, grid, side="right")
    return np.concatenate(([left_value], values))[idx]


def _leaf_curve_matrix(tree: SurvivalTree, grid: np.ndarray, curve: str) -> np.ndarray:
    """(n_leaves, len(grid)) values of one named per-leaf curve."""
    rows = np.empty((len(tree.leaves), grid.size))
    for i, leaf in enumerate(tree.leaves):
        if curve == "cumhaz":
            vals = na_values_from_counts(leaf.at_risk, leaf.d_total)
            rows[i] = _step_eval(leaf.times, vals, grid, 0.0)
        elif curve == "survival":
            vals = km_values_from_counts(leaf.at_risk, leaf.d_total)
            rows[i] = _step_eval(leaf.times, vals, grid, 1.0)
        elif curve == "cif_conv":
            vals = cif_values_from_counts(leaf.at_risk, leaf.d_total, leaf.d_conv)
            rows[i] = _step_eval(leaf.times, vals, grid, 0.0)
        elif curve == "cif_churn":
            vals = cif_values_from_counts(leaf.at_risk, leaf.d_total, leaf.d_churn)
            rows[i] = _step_eval(leaf.times, vals, grid, 0.0)
        else:  # pragma: no cover
            raise ValueError(curve)
    return rows


def _pooled_count_matrices(tree: SurvivalTree, grid: np.ndarray):
    """Per-leaf event counts and at-risk counts evaluated on the grid."""
    d = np.zeros((len(tree.leaves), grid.size))
    q = np.zeros((len(tree.leaves), grid.size))
    for i, leaf in enumerate(tree.leaves):
        if leaf.times.size:
            pos = np.searchsorted(grid, leaf.times)
            d[i, pos] = leaf.d_total
        q[i] = leaf.at_risk_grid
    return d, q


def _check_x_matrix(model: ForestModel, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.n_features:
        raise ShapeMismatchError(
            f"covariate matrix has {x.shape[1]} columns, expected {model.n_features}"
        )
    return x


def predict_survival_matrix(model: ForestModel, x) -> np.ndarray:
    """Ensemble survival values, one row per subject, on ``model.grid``."""
    x = _check_x_matrix(model, x)
    n, g = x.shape[0], model.grid.size
    n_trees = len(model.trees)
    if model.kind == ForestKind.RSF:
        acc = np.zeros((n, g))
        for tree in model.trees:
            assign = _route(tree, x)
            acc += _leaf_curve_matrix(tree, model.grid, "cumhaz")[assign]
        return np.exp(-acc / n_trees)
    if model.kind == ForestKind.COMPETING:
        acc = np.zeros((n, g))
        for tree in model.trees:
            assign = _route(tree, x)
            acc += _leaf_curve_matrix(tree, model.grid, "survival")[assign]
        return acc / n_trees
    if model.config.aggregate == "mean":
        acc = np.zeros((n, g))
        for tree in model.trees:
            assign = _route(tree, x)
            acc += _leaf_curve_matrix(tree, model.grid, "survival")[assign]
        return acc / n_trees
    d_sum = np.zeros((n, g))
    q_sum = np.zeros((n, g))
    for tree in model.trees:
        assign = _route(tree, x)
        d, q = _pooled_count_matrices(tree, model.grid)
        d_sum += d[assign]
        q_sum += q[assign]
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(q_sum > 0.0, d_sum / np.where(q_sum > 0, q_sum, 1.0), 0.0)
    return np.cumprod(1.0 - ratio, axis=1)


def predict_incidence_matrix(model: ForestModel, x, event: EventStatus) -> np.ndarray:
    """Ensemble cumulative incidence values on ``model.grid`` (competing kind)."""
    if model.kind != ForestKind.COMPETING:
        raise InvalidModelError(
            "incidence prediction requires a competing-risks forest")
    event = EventStatus(event)
    if event == EventStatus.CENSORED:
        raise InvalidEventError("incidence is defined for event types only")
    curve = "cif_conv" if event == EventStatus.CONVERTED else "cif_churn"
    x = _check_x_matrix(model, x)
    acc = np.zeros((x.shape[0], model.grid.size))
    for tree in model.trees:
        assign = _route(tree, x)
        acc += _leaf_curve_matrix(tree, model.grid, curve)[assign]
    return acc / len(model.trees)


def predict_forest_survival(model: ForestModel, x) -> StepFunction:
    """Subject survival curve (all-cause survival for competing models)."""
    values = predict_survival_matrix(model, np.asarray(x, dtype=float)[None, :])[0]
    return StepFunction(model.grid, values, 1.0)


def predict_forest_incidence(model: ForestModel, x, event: EventStatus) -> StepFunction:
    """Subject cumulative incidence curve for one event type."""
    values = predict_incidence_matrix(
        model, np.asarray(x, dtype=float)[None, :], event)[0]
    return StepFunction(model.grid, values, 0.0)


def predict_forest_median(model: ForestModel, x) -> float | None:
    """Median conversion time: 0.5-crossing of the survival curve, or of
    the conversion incidence (upward) for competing-risks models."""
    if model.kind == ForestKind.COMPETING:
        return median_crossing(
            predict_forest_incidence(model, x, EventStatus.CONVERTED), 0.5)
    return median_crossing(predict_forest_survival(model, x), 0.5)


def predict_median_batch(model: ForestModel, x) -> np.ndarray:
    """Vectorized medians; NaN where the curve never crosses 0.5."""
    x = _check_x_matrix(model, x)
    if model.kind == ForestKind.COMPETING:
        values = predict_incidence_matrix(model, x, EventStatus.CONVERTED)
        crossed = values >= 0.5
    else:
        values = predict_survival_matrix(model, x)
        crossed = values <= 0.5
    out = np.full(x.shape[0], np.nan)
    if model.grid.size:
        any_cross = crossed.any(axis=1)
        first = np.argmax(crossed, axis=1)
        out[any_cross] = model.grid[first[any_cross]]
    return out
