import numpy as np
import pytest

from convsurv.core import EventStatus, SurvivalDataset, SurvivalRecord, TimeAxis


def make_dataset(times, statuses, x=None, competing=False,
                 axis=TimeAxis.LIFETIME, feature_names=None):
    """Build a dataset from parallel lists; x defaults to a zero column."""
    times = list(times)
    statuses = [EventStatus(s) for s in statuses]
    if x is None:
        x = [(0.0,)] * len(times)
    else:
        x = [tuple(float(v) for v in np.atleast_1d(row)) for row in x]
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(len(x[0]) if x else 0))
    records = tuple(
        SurvivalRecord(f"s{i}", t, s, cov)
        for i, (t, s, cov) in enumerate(zip(times, statuses, x))
    )
    return SurvivalDataset(records, tuple(feature_names), axis, competing)


def random_dataset(rng, n, competing=False, p=1, tie_prob=0.3):
    """Small random dataset with ties and mixed censoring."""
    base = rng.integers(1, max(2, n), size=n).astype(float)
    cont = rng.random(n) * n
    times = np.where(rng.random(n) < tie_prob, base, np.round(cont, 2))
    if competing:
        statuses = rng.choice(
            [EventStatus.CENSORED, EventStatus.CONVERTED, EventStatus.CHURNED],
            size=n, p=[0.35, 0.35, 0.30])
    else:
        statuses = rng.choice(
            [EventStatus.CENSORED, EventStatus.CONVERTED], size=n, p=[0.4, 0.6])
    x = rng.standard_normal((n, p))
    return make_dataset(times, statuses, x, competing=competing)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
