"""Log ingestion, the two-day filter, features, and dataset labeling."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from convsurv.core import EventStatus, TimeAxis
from convsurv.errors import LogParseError, LogValidationError
from convsurv.pipeline import (
    FEATURE_NAMES,
    FeatureSpec,
    PlayerLog,
    PlayerRow,
    build_dataset,
    engineer_features,
    filter_newcomers,
    ingest_logs,
)

HEADER = "player_id,day_index,playtime_hours,level,sessions,actions,purchases\n"


def write_csv(tmp_path, body, name="logs.csv"):
    path = tmp_path / name
    path.write_text(HEADER + body)
    return path


def row(day, playtime=1.0, level=1, sessions=1, actions=10, purchases=0):
    return PlayerRow(day, playtime, level, sessions, actions, purchases)


class TestIngest:
    def test_well_formed_file(self, tmp_path):
        path = write_csv(tmp_path, "a,0,1.5,1,2,30,0\na,1,2.0,3,1,12,0\na,4,0.5,3,1,5,1\n")
        logs = ingest_logs(path)
        assert len(logs) == 1
        assert logs[0].player_id == "a"
        assert len(logs[0].rows) == 3
        assert logs[0].registration_day == 0

    def test_header_only_is_empty(self, tmp_path):
        assert ingest_logs(write_csv(tmp_path, "")) == []

    def test_decreasing_level_names_player(self, tmp_path):
        path = write_csv(tmp_path, "bob,0,1.0,5,1,1,0\nbob,1,1.0,4,1,1,0\n")
        with pytest.raises(LogValidationError, match="bob"):
            ingest_logs(path)

    def test_duplicate_day_names_player(self, tmp_path):
        path = write_csv(tmp_path, "c,2,1.0,1,1,1,0\nc,2,1.0,1,1,1,0\n")
        with pytest.raises(LogValidationError, match="'c'"):
            ingest_logs(path)

    def test_malformed_number_carries_line(self, tmp_path):
        path = write_csv(tmp_path, "a,0,1.0,1,1,1,0\na,one,1.0,1,1,1,0\n")
        with pytest.raises(LogParseError, match="line 3") as exc_info:
            ingest_logs(path)
        assert exc_info.value.line_number == 3

    def test_negative_playtime_rejected(self, tmp_path):
        path = write_csv(tmp_path, "a,0,-1.0,1,1,1,0\n")
        with pytest.raises(LogParseError, match="playtime"):
            ingest_logs(path)

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("who,when\n")
        with pytest.raises(LogParseError, match="header"):
            ingest_logs(path)

    def test_wrong_column_count(self, tmp_path):
        path = write_csv(tmp_path, "a,0,1.0,1,1,1\n")
        with pytest.raises(LogParseError, match="columns"):
            ingest_logs(path)

    def test_rows_sorted_on_ingest(self, tmp_path):
        path = write_csv(tmp_path, "a,5,1.0,2,1,1,0\na,0,1.0,1,1,1,0\n")
        logs = ingest_logs(path)
        assert [r.day_index for r in logs[0].rows] == [0, 5]


class TestFilterNewcomers:
    def test_single_day_removed(self):
        one = PlayerLog("x", 0, (row(0),))
        two = PlayerLog("y", 0, (row(0), row(5, level=2)))
        assert filter_newcomers([one, two]) == [two]

    def test_empty_input(self):
        assert filter_newcomers([]) == []


class TestEngineerFeatures:
    def test_constant_playtime(self):
        log = PlayerLog("a", 0, tuple(row(d, playtime=1.0, sessions=2,
                                          actions=10, level=1 + d)
                                      for d in range(5)))
        f = dict(zip(FEATURE_NAMES, engineer_features(log, cutoff=5)))
        assert f["mean_daily_playtime"] == 1.0
        assert f["std_daily_playtime"] == 0.0
        assert f["active_day_ratio"] == 1.0
        assert f["total_sessions"] == 10.0
        assert f["mean_actions_per_session"] == 5.0
        assert f["current_level"] == 5.0

    def test_single_pre_cutoff_day_has_zero_std(self):
        log = PlayerLog("a", 0, (row(0, playtime=2.0), row(3, level=2)))
        f = dict(zip(FEATURE_NAMES, engineer_features(log, cutoff=1)))
        assert f["std_daily_playtime"] == 0.0
        assert f["mean_daily_playtime"] == 2.0

    def test_zero_activity_window_defaults(self):
        log = PlayerLog("a", 0, (row(0), row(1, level=2)))
        f = dict(zip(FEATURE_NAMES, engineer_features(log, cutoff=0)))
        assert f["current_level"] == 1.0
        assert f["mean_daily_playtime"] == 0.0
        assert f["active_day_ratio"] == 0.0

    def test_post_cutoff_rows_never_read(self):
        """The leakage guard: rows at or after the cutoff are invisible."""
        base = (row(0, playtime=1.0), row(1, playtime=2.0, level=2))
        extended = base + (row(7, playtime=50.0, level=9, purchases=1),)
        a = engineer_features(PlayerLog("a", 0, base), cutoff=7)
        b = engineer_features(PlayerLog("a", 0, extended), cutoff=7)
        assert np.array_equal(a, b)


class TestBuildDataset:
    def purchase_log(self):
        return PlayerLog("buyer", 0, (
            row(0, playtime=1.0, level=2),
            row(3, playtime=1.5, level=6),
            row(7, playtime=2.0, level=12, purchases=1),
            row(9, playtime=1.0, level=13),
        ))

    def test_converter_hand_trace(self):
        """Purchase on day 7 at level 12 having played 4.5h in total."""
        logs = [self.purchase_log(),
                PlayerLog("other", 0, (row(0), row(12, level=2)))]
        expect = {TimeAxis.LIFETIME: 7.0, TimeAxis.LEVEL: 12.0,
                  TimeAxis.PLAYTIME: 4.5}
        for axis, value in expect.items():
            d = build_dataset(logs, axis)
            rec = d.records[0]
            assert rec.status == EventStatus.CONVERTED
            assert rec.time == value

    def test_censored_at_last_observed_values(self):
        logs = [self.purchase_log(),
                PlayerLog("active", 2, (row(2), row(11, playtime=2.5, level=4)))]
        d = build_dataset(logs, TimeAxis.LIFETIME, data_end=12)
        rec = d.records[1]
        assert rec.status == EventStatus.CENSORED
        assert rec.time == 9.0

    def test_churned_when_inactive_before_data_end(self):
        logs = [self.purchase_log(),
                PlayerLog("gone", 0, (row(0), row(2, playtime=3.0, level=4)))]
        d = build_dataset(logs, TimeAxis.LIFETIME, competing=True,
                          churn_window=9, data_end=30)
        rec = d.records[1]
        assert rec.status == EventStatus.CHURNED
        assert rec.time == 2.0
        level_d = build_dataset(logs, TimeAxis.LEVEL, competing=True,
                                churn_window=9, data_end=30)
        assert level_d.records[1].time == 4.0

    def test_not_churned_within_window(self):
        logs = [self.purchase_log(),
                PlayerLog("gone", 0, (row(0), row(2)))]
        d = build_dataset(logs, TimeAxis.LIFETIME, competing=True,
                          churn_window=9, data_end=10)
        assert d.records[1].status == EventStatus.CENSORED

    def test_status_identical_across_axes(self):
        logs = [self.purchase_log(),
                PlayerLog("a", 0, (row(0), row(2, level=3))),
                PlayerLog("b", 1, (row(1), row(19, level=2)))]
        per_axis = [build_dataset(logs, ax, competing=True, data_end=20)
                    for ax in TimeAxis]
        statuses = [[r.status for r in d.records] for d in per_axis]
        assert statuses[0] == statuses[1] == statuses[2]

    def test_level_at_event_matches_event_day_row(self):
        logs = [self.purchase_log()]
        d = build_dataset(logs, TimeAxis.LEVEL)
        assert d.records[0].time == 12.0  # the level field on the event day

    def test_recode_matches_single_risk_build(self):
        """Recoding a competing dataset equals building single-risk."""
        logs = [self.purchase_log(),
                PlayerLog("gone", 0, (row(0), row(2, level=2)))]
        cr = build_dataset(logs, TimeAxis.LIFETIME, competing=True,
                           churn_window=5, data_end=30)
        single = build_dataset(logs, TimeAxis.LIFETIME, competing=False,
                               churn_window=5, data_end=30)
        rec = cr.recode_competing_as_censored()
        assert [r.status for r in rec.records] == \
            [r.status for r in single.records]
        assert_allclose(rec.times, single.times)
        assert np.array_equal(rec.covariate_matrix, single.covariate_matrix)


class TestFeatureSpec:
    def test_hash_stable_and_sensitive(self):
        a = FeatureSpec()
        b = FeatureSpec(features=FEATURE_NAMES[:5])
        assert a.spec_hash() == FeatureSpec().spec_hash()
        assert a.spec_hash() != b.spec_hash()

    def test_unknown_feature_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            FeatureSpec(features=("not_a_feature",))
