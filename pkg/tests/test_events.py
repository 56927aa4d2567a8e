import math
import warnings

import numpy as np
import pytest

from bellsim.events import (ClickStream, RawDataset, TimingConfig, generate_click_streams,
                            nearest_matches, pair_by_window, run_experiment)
from bellsim.exact import exact_report
from bellsim.io import raw_csv
from bellsim.model import SETTING_PAIRS, gallery_model

from conftest import N_BIG, constant_model

LOSSLESS = TimingConfig(1.0, 0.0, 0.25)


def test_constant_model_records_identical():
    raw = run_experiment(constant_model(1, -1), 500, 3)
    assert len(raw) == 500
    assert set(raw.a.tolist()) == {1} and set(raw.b.tolist()) == {-1}


def test_empty_experiment():
    raw = run_experiment(constant_model(), 0, 3)
    assert len(raw) == 0
    sa, sb = generate_click_streams(constant_model(), 0, LOSSLESS, 3)
    assert len(pair_by_window(sa, sb, LOSSLESS)) == 0


@pytest.mark.slow
def test_uniform_schedule_counts():
    raw = run_experiment(constant_model(), N_BIG, 11)
    for x, y in SETTING_PAIRS:
        count = int(((raw.x == x) & (raw.y == y)).sum())
        assert abs(count - 250_000) <= 1_600


def test_block_schedule():
    raw = run_experiment(constant_model(), 100, 1, schedule="blocks")
    pairs = list(zip(raw.x.tolist(), raw.y.tolist()))
    assert pairs[:25] == [(1, 1)] * 25 and pairs[-25:] == [(2, 2)] * 25


@pytest.mark.slow
def test_detection_gated_zero_fractions_match_oracle():
    m = gallery_model("detection_gated")
    ex = exact_report(m)
    raw = run_experiment(m, N_BIG, 21)
    for s in SETTING_PAIRS:
        sel = (raw.x == s[0]) & (raw.y == s[1])
        n = int(sel.sum())
        for observed, p in ((np.mean((raw.a[sel] == 0) | (raw.b[sel] == 0)), ex[s].p_any_zero),
                            (np.mean((raw.a[sel] == 0) & (raw.b[sel] == 0)), ex[s].p_both_zero)):
            assert abs(observed - p) <= 4 * math.sqrt(p * (1 - p) / n)


def test_trial_randomness_independent_of_n_and_workers():
    m = gallery_model("detection_gated")
    big = run_experiment(m, 200_000, 8, workers=3)
    small = run_experiment(m, 70_000, 8)
    for col in ("x", "y", "a", "b"):
        assert np.array_equal(getattr(big, col)[:70_000], getattr(small, col))
    assert big.same_records(run_experiment(m, 200_000, 8, workers=1))


def test_seed_must_be_64_bit():
    with pytest.raises(ValueError):
        run_experiment(constant_model(), 10, -1)
    with pytest.raises(ValueError):
        run_experiment(constant_model(), 10, 2**64)


def test_zero_jitter_timestamps_exact():
    m = gallery_model("detection_gated")
    timing = TimingConfig(1e-6, 0.0, 2.5e-7)
    sa, _ = generate_click_streams(m, 1000, timing, 4)
    raw = run_experiment(m, 1000, 4)
    detected = raw.trial_index[raw.a != 0]
    assert np.array_equal(sa.times, detected * 1e-6)


def test_full_detection_stream_sizes():
    sa, sb = generate_click_streams(gallery_model("perfect_corr"), 100, TimingConfig(1.0, 0.1, 0.25), 2)
    assert len(sa) == len(sb) == 100
    assert np.all(np.diff(sa.times) > 0)


@pytest.mark.slow
def test_station_a_click_rate_matches_oracle():
    m = gallery_model("detection_gated")
    ex = exact_report(m)
    sa, _ = generate_click_streams(m, N_BIG, TimingConfig(1.0, 0.1, 0.25), 5)
    p = 0.25 * sum(ex[s].p_a_nonzero for s in SETTING_PAIRS)
    assert abs(len(sa) / N_BIG - p) <= 4 * math.sqrt(p * (1 - p) / N_BIG)


def test_timing_validation():
    with pytest.raises(ValueError):
        TimingConfig(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        TimingConfig(1.0, -1.0, 0.1)
    with pytest.warns(UserWarning):
        TimingConfig(1.0, 0.0, 0.6)


@pytest.mark.parametrize("strategy", ["bins", "nearest", "fixed-bins", "nearest-neighbor"])
@pytest.mark.parametrize("name", ["perfect_corr", "detection_gated", "cbd_signaling"])
def test_round_trip(strategy, name):
    m = gallery_model(name)
    raw = run_experiment(m, 5000, 99)
    sa, sb = generate_click_streams(m, 5000, LOSSLESS, 99)
    paired = pair_by_window(sa, sb, LOSSLESS, strategy)
    assert paired.same_records(raw)
    assert raw_csv(paired) == raw_csv(raw)


def test_disjoint_streams_have_no_coincidences():
    n = 100
    log = np.ones(n, dtype=int)
    k = np.arange(n)
    sa = ClickStream("A", k[:50] * 1.0, np.ones(50), np.ones(50), log)
    sb = ClickStream("B", k[50:] * 1.0, np.ones(50), -np.ones(50), log)
    for strategy in ("bins", "nearest"):
        raw = pair_by_window(sa, sb, LOSSLESS, strategy)
        assert len(raw) == n
        assert np.all((raw.a == 0) ^ (raw.b == 0))


def test_ambiguous_bins_dropped_and_counted():
    log = np.ones(3, dtype=int)
    sa = ClickStream("A", [0.0, 0.9, 1.1, 2.0], np.ones(4), np.ones(4), log)
    sb = ClickStream("B", [0.0, 1.0, 2.0], np.ones(3), np.ones(3), log)
    raw = pair_by_window(sa, sb, LOSSLESS, "bins")
    assert raw.metadata["n_ambiguous_bins"] == 1
    assert raw.trial_index.tolist() == [0, 2]
    assert raw.a.tolist() == [1, 1] and raw.b.tolist() == [1, 1]


def test_unsorted_stream_rejected():
    log = np.ones(2, dtype=int)
    sa = ClickStream("A", [1.0, 0.0], [1, 1], [1, 1], log)
    sb = ClickStream("B", [0.0, 1.0], [1, 1], [1, 1], log)
    with pytest.raises(ValueError):
        pair_by_window(sa, sb, LOSSLESS)


# --- brute-force reference matchers -------------------------------------------------


def brute_nearest(ta, tb, window):
    used = [False] * len(tb)
    count = 0
    for t in ta:
        best, best_d = None, None
        for j, u in enumerate(tb):
            d = abs(u - t)
            if not used[j] and d <= window and (best_d is None or d < best_d):
                best, best_d = j, d
        if best is not None:
            used[best] = True
            count += 1
    return count


def brute_bins(ta, tb, period, window):
    count = 0
    for t in ta:
        k = round(t / period)
        same_a = [s for s in ta if round(s / period) == k]
        same_b = [u for u in tb if round(u / period) == k]
        if len(same_a) == 1 and len(same_b) == 1 and abs(same_b[0] - t) <= window:
            count += 1
    return count


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_pairing_matches_brute_force(seed):
    period = 1.0
    timing = TimingConfig(period, period / 4, period / 8)
    sa, sb = generate_click_streams(gallery_model("detection_gated"), 1500, timing, seed)
    ta, tb = sa.times.tolist(), sb.times.tolist()
    nearest = pair_by_window(sa, sb, timing, "nearest")
    assert nearest.metadata["n_coincidences"] == brute_nearest(ta, tb, timing.window)
    bins = pair_by_window(sa, sb, timing, "bins")
    assert bins.metadata["n_coincidences"] == brute_bins(ta, tb, period, timing.window)


def test_nearest_prefers_closest_unmatched():
    match = nearest_matches(np.array([0.0, 0.05]), np.array([0.04, 0.06]), 0.1)
    assert match.tolist() == [0, 1]
    match = nearest_matches(np.array([0.0]), np.array([-0.05, 0.05]), 0.1)
    assert match.tolist() == [0]


def test_pairing_strategy_changes_coincidences():
    timing = TimingConfig(1.0, 0.25, 0.125)
    sa, sb = generate_click_streams(gallery_model("triangle_local"), 20_000, timing, 6)
    counts = {s: pair_by_window(sa, sb, timing, s).metadata["n_coincidences"] for s in ("bins", "nearest")}
    assert counts["bins"] != counts["nearest"]


def test_click_streams_deterministic_across_workers():
    m = gallery_model("detection_gated")
    timing = TimingConfig(1.0, 0.2, 0.25)
    one = generate_click_streams(m, 150_000, timing, 17, workers=1)
    many = generate_click_streams(m, 150_000, timing, 17, workers=4)
    for s1, s2 in zip(one, many):
        assert np.array_equal(s1.times, s2.times) and np.array_equal(s1.polarity, s2.polarity)


def test_records_iteration():
    raw = RawDataset.from_records([(0, (1, 2), 1, 0), (1, (2, 2), -1, -1)])
    recs = list(raw.records())
    assert recs[0].setting_pair == (1, 2) and recs[1].a == -1
