"""Change-point detection against exhaustive split-scan oracles."""

import itertools

import numpy as np
import pytest

from vizpipe.analytics import detect_changepoints
from vizpipe.errors import BothOrNeitherStopRule, TooShort


def seg_cost(x, a, b):
    part = x[a:b]
    return float(((part - part.mean()) ** 2).sum()) if b > a else 0.0


def total_cost(x, breakpoints):
    bounds = [0] + list(breakpoints) + [len(x)]
    return sum(seg_cost(x, bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1))


class TestStopRules:
    def test_exactly_one_rule(self):
        x = [0.0, 1.0, 2.0]
        with pytest.raises(BothOrNeitherStopRule):
            detect_changepoints(x)
        with pytest.raises(BothOrNeitherStopRule):
            detect_changepoints(x, n_bkps=1, penalty=0.5)

    def test_too_short(self):
        with pytest.raises(TooShort):
            detect_changepoints([1.0], n_bkps=0)


class TestKnownSeries:
    def test_single_step(self):
        x = [0.0] * 50 + [10.0] * 50
        res = detect_changepoints(x, n_bkps=1)
        assert res.breakpoints == [50]
        assert res.costs[-1] == pytest.approx(0.0, abs=1e-9)

    def test_constant_series_penalty_no_breaks(self):
        res = detect_changepoints([4.0] * 30, penalty=1.0)
        assert res.breakpoints == []
        assert res.indicator.sum() == 0

    def test_three_level_steps_recovered(self):
        x = [0.0] * 20 + [5.0] * 30 + [-3.0] * 25
        res = detect_changepoints(x, n_bkps=2)
        assert res.breakpoints == [20, 50]

    def test_exhaustive_two_split_oracle(self):
        rng = np.random.default_rng(7)
        x = np.concatenate([
            rng.normal(0, 0.2, 15), rng.normal(6, 0.2, 12), rng.normal(-4, 0.2, 18)
        ])
        res = detect_changepoints(x, n_bkps=2)
        best = min(
            itertools.combinations(range(1, len(x)), 2),
            key=lambda pair: total_cost(x, pair),
        )
        # greedy binary segmentation matches the global 2-split optimum on
        # well-separated level shifts
        assert tuple(res.breakpoints) == best

    def test_exhaustive_single_split_scan(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            x = rng.normal(size=40)
            res = detect_changepoints(x, n_bkps=1)
            gains = [total_cost(x, []) - total_cost(x, [t]) for t in range(1, 40)]
            assert res.breakpoints[0] == 1 + int(np.argmax(gains))

    def test_penalty_stops_on_small_gains(self):
        x = np.array([0.0] * 30 + [8.0] * 30)
        x = x + np.sin(np.arange(60)) * 0.01
        res = detect_changepoints(x, penalty=5.0)
        assert res.breakpoints == [30]


class TestInvariants:
    def test_indicator_matches_breakpoints(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=80)
        res = detect_changepoints(x, n_bkps=5)
        assert int(res.indicator.sum()) == len(res.breakpoints)
        assert np.flatnonzero(res.indicator).tolist() == res.breakpoints

    def test_costs_strictly_decrease_under_penalty(self):
        rng = np.random.default_rng(11)
        x = np.concatenate([rng.normal(m, 0.5, 25) for m in (0, 10, -5, 3)])
        res = detect_changepoints(x, penalty=1.0)
        assert len(res.breakpoints) >= 3
        for earlier, later in zip(res.costs, res.costs[1:]):
            assert later < earlier

    def test_breakpoints_strictly_increasing(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=60)
        res = detect_changepoints(x, n_bkps=8)
        assert res.breakpoints == sorted(set(res.breakpoints))
        assert all(0 < b < 60 for b in res.breakpoints)

    def test_reported_cost_matches_direct_evaluation(self):
        rng = np.random.default_rng(13)
        x = rng.normal(size=70) + np.repeat([0.0, 4.0], 35)
        res = detect_changepoints(x, n_bkps=3)
        assert res.costs[-1] == pytest.approx(total_cost(x, res.breakpoints), rel=1e-9)
