"""Empirical estimators over post-selected (final) data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .model import SETTING_PAIRS

# (sign of E11, E12, E21, E22) for the four facets with one minus sign; the
# three-minus facets are their negatives and are covered by the absolute value.
FACETS = np.array([
    [1, 1, 1, -1],
    [1, 1, -1, 1],
    [1, -1, 1, 1],
    [-1, 1, 1, 1],
], dtype=np.float64)


class IncompleteTableError(ValueError):
    pass


def chsh_values(e) -> tuple[float, float]:
    """``(s_canonical, s_max)`` for correlations ordered (E11, E12, E21, E22)."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (4,):
        raise ValueError("expected four correlations (E11, E12, E21, E22)")
    if not np.all(np.isfinite(e)):
        raise IncompleteTableError("incomplete table: undefined correlation")
    e0, e1, e2, e3 = (float(v) for v in e)
    s_canonical = e0 + e1 + e2 - e3
    # same left-to-right order as s_canonical so the first facet reproduces it bit for bit
    s_max = max(abs(f[0] * e0 + f[1] * e1 + f[2] * e2 + f[3] * e3) for f in FACETS.tolist())
    return s_canonical, s_max


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    n = v.size
    if n == 0:
        return math.nan, math.nan
    mean = float(np.mean(v))
    if n < 2:
        return mean, math.nan
    return mean, float(np.std(v, ddof=1) / math.sqrt(n))


@dataclass
class PairEstimate:
    setting: tuple[int, int]
    n_kept: int
    n_raw: int
    e_ab: float
    se_ab: float
    e_a: float
    se_a: float
    e_b: float
    se_b: float
    kept_fraction: float
    se_kept_fraction: float
    flags: list[str] = field(default_factory=list)

    @property
    def defined(self) -> bool:
        return self.n_kept > 0


@dataclass
class CorrelationTable:
    pairs: dict[tuple[int, int], PairEstimate]

    def __getitem__(self, setting: tuple[int, int]) -> PairEstimate:
        return self.pairs[setting]

    def correlations(self) -> np.ndarray:
        return np.array([self.pairs[s].e_ab for s in SETTING_PAIRS])

    def to_dict(self) -> dict:
        return {f"{x}{y}": _pair_dict(self.pairs[(x, y)]) for x, y in SETTING_PAIRS}


def _pair_dict(p: PairEstimate) -> dict:
    return {
        "n_kept": p.n_kept,
        "n_raw": p.n_raw,
        "E_ab": _num(p.e_ab), "se_ab": _num(p.se_ab),
        "E_a": _num(p.e_a), "se_a": _num(p.se_a),
        "E_b": _num(p.e_b), "se_b": _num(p.se_b),
        "kept_fraction": _num(p.kept_fraction),
        "se_kept_fraction": _num(p.se_kept_fraction),
        "flags": list(p.flags),
    }


def _num(v: float):
    return None if not math.isfinite(v) else v


def correlation_table(final) -> CorrelationTable:
    """Sample means and standard errors of ``a*b``, ``a``, ``b`` per setting pair."""
    out = {}
    for s in SETTING_PAIRS:
        ab = final.pairs[s]
        a = ab[:, 0].astype(np.float64)
        b = ab[:, 1].astype(np.float64)
        n = a.size
        e_ab, se_ab = _mean_se(a * b)
        e_a, se_a = _mean_se(a)
        e_b, se_b = _mean_se(b)
        n_raw = final.n_raw(s)
        if n_raw > 0:
            frac = n / n_raw
            se_frac = math.sqrt(frac * (1 - frac) / n_raw)
        else:
            frac = se_frac = math.nan
        flags = []
        if n == 0:
            flags.append("undefined: no kept records")
        elif n == 1:
            flags.append("stderr undefined: single kept record")
        out[s] = PairEstimate(s, n, n_raw, e_ab, se_ab, e_a, se_a, e_b, se_b, frac, se_frac, flags)
    return CorrelationTable(out)


def chsh(table: CorrelationTable) -> tuple[float, float]:
    if not all(table[s].defined for s in SETTING_PAIRS):
        raise IncompleteTableError("incomplete table: a setting pair has no kept records")
    return chsh_values(table.correlations())


def raw_correlations(raw) -> np.ndarray:
    """``E(A_x B_y)`` over all raw records of each pair, zeros included."""
    out = np.full(4, math.nan)
    for i, (x, y) in enumerate(SETTING_PAIRS):
        m = (raw.x == x) & (raw.y == y)
        if m.any():
            out[i] = float(np.mean(raw.a[m].astype(np.float64) * raw.b[m]))
    return out


def raw_correlation_stderrs(raw) -> np.ndarray:
    out = np.full(4, math.nan)
    for i, (x, y) in enumerate(SETTING_PAIRS):
        m = (raw.x == x) & (raw.y == y)
        out[i] = _mean_se(raw.a[m].astype(np.float64) * raw.b[m])[1]
    return out


@dataclass
class MarginalComparison:
    station: str
    local_setting: int
    delta: float
    pooled_se: float
    z: float
    p_value: float
    n_first: int
    n_second: int
    testable: bool = True

    def label(self) -> str:
        if self.station == "A":
            return f"E(A{self.local_setting}|y=1) - E(A{self.local_setting}|y=2)"
        return f"E(B{self.local_setting}|x=1) - E(B{self.local_setting}|x=2)"


@dataclass
class NoSignalingReport:
    comparisons: list[MarginalComparison]

    def to_dict(self) -> dict:
        return {
            c.label(): {
                "station": c.station,
                "local_setting": c.local_setting,
                "delta": _num(c.delta),
                "pooled_se": _num(c.pooled_se),
                "z": _num(c.z),
                "p_value": _num(c.p_value),
                "n_first": c.n_first,
                "n_second": c.n_second,
                "testable": c.testable,
            }
            for c in self.comparisons
        }

    def min_p_value(self) -> float:
        ps = [c.p_value for c in self.comparisons if c.testable]
        return min(ps) if ps else math.nan


def _compare(station: str, setting: int, v1: np.ndarray, v2: np.ndarray) -> MarginalComparison:
    n1, n2 = v1.size, v2.size
    if n1 < 2 or n2 < 2:
        return MarginalComparison(station, setting, math.nan, math.nan, math.nan, math.nan,
                                  n1, n2, testable=False)
    m1, se1 = _mean_se(v1)
    m2, se2 = _mean_se(v2)
    delta = m1 - m2
    pooled = math.sqrt(se1 ** 2 + se2 ** 2)
    if pooled > 0:
        z = delta / pooled
    else:
        z = 0.0 if delta == 0 else math.copysign(math.inf, delta)
    p = float(2 * norm.sf(abs(z)))
    return MarginalComparison(station, setting, delta, pooled, z, p, n1, n2)


def no_signaling_test(final) -> NoSignalingReport:
    """Two-sample z-tests of each local marginal across the remote setting."""
    comps = []
    for x in (1, 2):
        comps.append(_compare("A", x, final.pairs[(x, 1)][:, 0].astype(np.float64),
                              final.pairs[(x, 2)][:, 0].astype(np.float64)))
    for y in (1, 2):
        comps.append(_compare("B", y, final.pairs[(1, y)][:, 1].astype(np.float64),
                              final.pairs[(2, y)][:, 1].astype(np.float64)))
    return NoSignalingReport(comps)


def format_table(table: CorrelationTable) -> str:
    lines = [f"{'xy':>3} {'n_kept':>9} {'kept':>8} {'E(ab)':>9} {'se':>8} {'E(a)':>9} {'E(b)':>9}"]
    for s in SETTING_PAIRS:
        p = table[s]
        lines.append(f"{s[0]}{s[1]:<2} {p.n_kept:>9d} {p.kept_fraction:>8.5f} {p.e_ab:>9.5f} "
                     f"{p.se_ab:>8.5f} {p.e_a:>9.5f} {p.e_b:>9.5f}")
    return "\n".join(lines)


def format_no_signaling(report: NoSignalingReport) -> str:
    lines = []
    for c in report.comparisons:
        if not c.testable:
            lines.append(f"{c.label()}: untestable (n = {c.n_first}, {c.n_second})")
        else:
            lines.append(f"{c.label()}: delta = {c.delta:+.5f}  se = {c.pooled_se:.5f}  "
                         f"z = {c.z:+.2f}  p = {c.p_value:.3g}")
    return "\n".join(lines)
