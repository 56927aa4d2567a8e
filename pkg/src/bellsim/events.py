"""Trial-level simulation, two-station click streams and window pairing."""
from __future__ import annotations

import bisect
import warnings
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from . import rng
from .model import HvModel, outcomes, sample_states

SCHEDULES = ("uniform", "blocks")
STRATEGIES = ("bins", "nearest")
_STRATEGY_ALIASES = {"fixed-bins": "bins", "nearest-neighbor": "nearest"}


class TrialRecord(NamedTuple):
    trial_index: int
    setting_pair: tuple[int, int]
    a: int
    b: int


@dataclass(frozen=True)
class TimingConfig:
    trial_period: float = 1e-6
    jitter_sigma: float = 0.0
    window: float = 2.5e-7

    def __post_init__(self):
        if not self.trial_period > 0:
            raise ValueError("trial_period must be > 0")
        if not self.window > 0:
            raise ValueError("window must be > 0")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if self.trial_period <= 2 * self.window:
            warnings.warn("trial_period <= 2 * window: coincidence windows of adjacent trials overlap",
                          stacklevel=2)

    def to_dict(self) -> dict:
        return {"trial_period": self.trial_period, "jitter_sigma": self.jitter_sigma,
                "window": self.window}


@dataclass
class RawDataset:
    """Column store of trial records; ``x, y`` in {1, 2}, ``a, b`` in {-1, 0, 1}."""

    trial_index: np.ndarray
    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.trial_index = np.asarray(self.trial_index, dtype=np.int64)
        for name in ("x", "y", "a", "b"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int8))

    def __len__(self) -> int:
        return self.trial_index.size

    def records(self) -> Iterator[TrialRecord]:
        for i, x, y, a, b in zip(self.trial_index.tolist(), self.x.tolist(), self.y.tolist(),
                                 self.a.tolist(), self.b.tolist()):
            yield TrialRecord(i, (x, y), a, b)

    def same_records(self, other: "RawDataset") -> bool:
        return all(np.array_equal(getattr(self, c), getattr(other, c))
                   for c in ("trial_index", "x", "y", "a", "b"))

    @classmethod
    def from_records(cls, records, metadata=None) -> "RawDataset":
        recs = list(records)
        cols = np.array([(r[0], r[1][0], r[1][1], r[2], r[3]) for r in recs],
                        dtype=np.int64).reshape(-1, 5)
        return cls(cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 3], cols[:, 4], dict(metadata or {}))


@dataclass
class ClickStream:
    """Time-sorted clicks of one station plus that station's per-slot setting log.

    A non-detection leaves no event.  ``settings_log[k]`` is the local setting
    used in trial slot ``k``; the pairing step needs it to label records whose
    partner station stayed silent.
    """

    station: str
    times: np.ndarray
    settings: np.ndarray
    polarity: np.ndarray
    settings_log: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.settings = np.asarray(self.settings, dtype=np.int8)
        self.polarity = np.asarray(self.polarity, dtype=np.int8)
        self.settings_log = np.asarray(self.settings_log, dtype=np.int8)

    def __len__(self) -> int:
        return self.times.size


def _settings_chunk(seed: int, chunk: int, start: int, stop: int, n: int, schedule: str):
    idx = np.arange(start, stop, dtype=np.int64)
    if schedule == "uniform":
        pair = np.floor(rng.uniforms(seed, rng.SETTINGS, chunk, stop - start) * 4).astype(np.int64)
    elif schedule == "blocks":
        pair = np.minimum(4 * idx // n, 3)
    else:
        raise ValueError(f"unknown schedule {schedule!r}; expected one of {SCHEDULES}")
    return idx, (pair // 2 + 1).astype(np.int8), (pair % 2 + 1).astype(np.int8)


def _simulate_chunk(model: HvModel, seed: int, n: int, schedule: str, chunk: int, start: int, stop: int):
    m = stop - start
    idx, x, y = _settings_chunk(seed, chunk, start, stop, n, schedule)
    l1, l2, lx, ly = sample_states(
        model, x, y,
        rng.uniforms(seed, rng.SOURCE, chunk, m),
        rng.uniforms(seed, rng.INSTRUMENT_A, chunk, m),
        rng.uniforms(seed, rng.INSTRUMENT_B, chunk, m),
    )
    a, b = outcomes(model, x, y, l1, l2, lx, ly)
    return idx, x, y, a, b


def _simulate(model, n_trials, seed, schedule, workers):
    parts = rng.map_chunks(
        lambda c, s, e: _simulate_chunk(model, seed, n_trials, schedule, c, s, e), n_trials, workers)
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.astype(np.int8), empty.astype(np.int8), empty.astype(np.int8), empty.astype(np.int8)
    return tuple(np.concatenate(cols) for cols in zip(*parts))


def run_experiment(model: HvModel, n_trials: int, seed: int, schedule: str = "uniform",
                   workers: int = 1) -> RawDataset:
    """Simulate ``n_trials`` trials; trial ``i`` depends only on ``(seed, i)``."""
    seed = rng.check_seed(seed)
    if n_trials < 0:
        raise ValueError("n_trials must be >= 0")
    idx, x, y, a, b = _simulate(model, n_trials, seed, schedule, workers)
    meta = {"model": model.name, "model_hash": model.content_hash, "seed": seed,
            "n_trials": n_trials, "schedule": schedule, "rng": rng.ALGORITHM, "source": "trials"}
    return RawDataset(idx, x, y, a, b, meta)


def generate_click_streams(model: HvModel, n_trials: int, timing: TimingConfig, seed: int,
                           schedule: str = "uniform", workers: int = 1) -> tuple[ClickStream, ClickStream]:
    """Turn simulated trials into two jittered, time-sorted click streams.

    Trial ``k`` is nominally at ``k * trial_period``; each nonzero outcome emits
    one click displaced by independent Gaussian jitter.
    """
    seed = rng.check_seed(seed)
    idx, x, y, a, b = _simulate(model, n_trials, seed, schedule, workers)
    nominal = idx.astype(np.float64) * timing.trial_period

    def jitter(stream):
        if timing.jitter_sigma == 0 or n_trials == 0:
            return np.zeros(n_trials)
        parts = rng.map_chunks(lambda c, s, e: rng.normals(seed, stream, c, e - s), n_trials, workers)
        return np.concatenate(parts) * timing.jitter_sigma

    def build(station, setting, outcome, noise):
        hit = outcome != 0
        t = nominal[hit] + noise[hit]
        order = np.argsort(t, kind="stable")
        return ClickStream(station, t[order], setting[hit][order], outcome[hit][order], setting)

    return (build("A", x, a, jitter(rng.JITTER_A)), build("B", y, b, jitter(rng.JITTER_B)))


# --- pairing -------------------------------------------------------------------


def _bins(stream: ClickStream, timing: TimingConfig, n_slots: int) -> np.ndarray:
    k = np.rint(stream.times / timing.trial_period).astype(np.int64)
    return np.clip(k, 0, max(n_slots - 1, 0))


def _assemble(parts, n_slots, metadata) -> RawDataset:
    # parts: list of (trial_index, x, y, a, b, kind); sorted by (trial_index, kind)
    cols = [np.concatenate([np.asarray(p[i]) for p in parts]) for i in range(6)]
    order = np.lexsort((cols[5], cols[0]))
    return RawDataset(cols[0][order], cols[1][order], cols[2][order], cols[3][order],
                      cols[4][order], metadata)


def _record_parts(k_pair, xa, yb, pa, pb, k_a, xa_u, pa_u, k_b, yb_u, pb_u, empty, log_a, log_b):
    zeros = lambda n: np.zeros(n, dtype=np.int8)
    return [
        (k_pair, xa, yb, pa, pb, np.zeros(k_pair.size)),
        (k_a, xa_u, log_b[k_a], pa_u, zeros(k_a.size), np.ones(k_a.size)),
        (k_b, log_a[k_b], yb_u, zeros(k_b.size), pb_u, np.full(k_b.size, 2)),
        (empty, log_a[empty], log_b[empty], zeros(empty.size), zeros(empty.size), np.full(empty.size, 3)),
    ]


def _pair_bins(sa: ClickStream, sb: ClickStream, timing: TimingConfig, n_slots: int):
    ka, kb = _bins(sa, timing, n_slots), _bins(sb, timing, n_slots)
    ca = np.bincount(ka, minlength=n_slots)
    cb = np.bincount(kb, minlength=n_slots)
    ambiguous = (ca > 1) | (cb > 1)
    ia = np.nonzero(~ambiguous[ka])[0]
    ib = np.nonzero(~ambiguous[kb])[0]
    # per-bin click position for unambiguous bins
    pos_a = np.full(n_slots, -1, dtype=np.int64)
    pos_b = np.full(n_slots, -1, dtype=np.int64)
    pos_a[ka[ia]] = ia
    pos_b[kb[ib]] = ib
    both = np.nonzero((pos_a >= 0) & (pos_b >= 0))[0]
    close = np.abs(sa.times[pos_a[both]] - sb.times[pos_b[both]]) <= timing.window
    paired = both[close]
    far = both[~close]
    only_a = np.sort(np.concatenate([np.nonzero((pos_a >= 0) & (pos_b < 0))[0], far]))
    only_b = np.sort(np.concatenate([np.nonzero((pos_b >= 0) & (pos_a < 0))[0], far]))
    empty = np.nonzero((ca == 0) & (cb == 0))[0]
    pa, pb = pos_a[paired], pos_b[paired]
    parts = _record_parts(
        paired, sa.settings[pa], sb.settings[pb], sa.polarity[pa], sb.polarity[pb],
        only_a, sa.settings[pos_a[only_a]], sa.polarity[pos_a[only_a]],
        only_b, sb.settings[pos_b[only_b]], sb.polarity[pos_b[only_b]],
        empty, sa.settings_log, sb.settings_log)
    return parts, int(ambiguous.sum()), int(paired.size)


def nearest_matches(ta: np.ndarray, tb: np.ndarray, window: float) -> np.ndarray:
    """Greedy matching: each A click, in time order, takes the nearest unmatched
    B click within ``window`` (earlier B click on ties).  Returns the matched B
    index per A click, -1 when unmatched."""
    match = np.full(ta.size, -1, dtype=np.int64)
    used = np.zeros(tb.size, dtype=bool)
    tb_list = tb.tolist()
    nb = len(tb_list)
    lo = 0
    for i, t in enumerate(ta.tolist()):
        lo = bisect.bisect_left(tb_list, t - window, lo)
        best, best_d = -1, window
        j = lo
        while j < nb and tb_list[j] <= t + window:
            if not used[j]:
                d = abs(tb_list[j] - t)
                if d < best_d or (best < 0 and d <= window):
                    best, best_d = j, d
            j += 1
        if best >= 0:
            used[best] = True
            match[i] = best
    return match


def _pair_nearest(sa: ClickStream, sb: ClickStream, timing: TimingConfig, n_slots: int):
    match = nearest_matches(sa.times, sb.times, timing.window)
    ka, kb = _bins(sa, timing, n_slots), _bins(sb, timing, n_slots)
    ma = np.nonzero(match >= 0)[0]
    mb = match[ma]
    ua = np.nonzero(match < 0)[0]
    used = np.zeros(len(sb), dtype=bool)
    used[mb] = True
    ub = np.nonzero(~used)[0]
    occupied = np.zeros(n_slots, dtype=bool)
    occupied[ka] = True
    occupied[kb] = True
    empty = np.nonzero(~occupied)[0]
    parts = _record_parts(
        ka[ma], sa.settings[ma], sb.settings[mb], sa.polarity[ma], sb.polarity[mb],
        ka[ua], sa.settings[ua], sa.polarity[ua],
        kb[ub], sb.settings[ub], sb.polarity[ub],
        empty, sa.settings_log, sb.settings_log)
    return parts, 0, int(ma.size)


def pair_by_window(stream_a: ClickStream, stream_b: ClickStream, timing: TimingConfig,
                   strategy: str = "bins") -> RawDataset:
    """Rebuild trial records from two click streams.

    ``bins`` assigns each click to slot ``round(t / trial_period)`` and pairs the
    clicks sharing a slot when ``|dt| <= window``; a slot holding two clicks at
    one station is ambiguous and all of its clicks are dropped (counted in the
    metadata).  ``nearest`` uses :func:`nearest_matches`.  Unmatched clicks give
    records with the partner outcome 0, slots without any click give (0, 0).
    """
    strategy = _STRATEGY_ALIASES.get(strategy, strategy)
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown pairing strategy {strategy!r}; expected one of {STRATEGIES}")
    if stream_a.settings_log.size != stream_b.settings_log.size:
        raise ValueError("stations disagree on the number of trial slots")
    for s in (stream_a, stream_b):
        if s.times.size > 1 and not np.all(np.diff(s.times) > 0):
            raise ValueError(f"station {s.station} click times are not strictly increasing")
    n_slots = stream_a.settings_log.size
    if strategy == "bins":
        parts, n_amb, n_coinc = _pair_bins(stream_a, stream_b, timing, n_slots)
    else:
        parts, n_amb, n_coinc = _pair_nearest(stream_a, stream_b, timing, n_slots)
    meta = {"pairing": strategy, "timing": timing.to_dict(), "n_slots": n_slots,
            "n_ambiguous_bins": n_amb, "n_coincidences": n_coinc,
            "n_clicks_a": len(stream_a), "n_clicks_b": len(stream_b), "source": "click-streams"}
    return _assemble(parts, n_slots, meta)
