"""Monte Carlo pipeline versus the enumeration oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .events import TimingConfig, generate_click_streams, pair_by_window
from .exact import ExactReport, exact_report
from .model import SETTING_PAIRS, HvModel
from .pipeline import extract_final
from .stats import CorrelationTable, correlation_table, raw_correlation_stderrs, raw_correlations

ABS_FLOOR = 1e-12
LOSSLESS = TimingConfig(trial_period=1.0, jitter_sigma=0.0, window=0.25)


@dataclass
class Comparison:
    name: str
    estimate: float
    exact: float
    stderr: float
    passed: bool

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        dev = abs(self.estimate - self.exact)
        z = dev / self.stderr if self.stderr and math.isfinite(self.stderr) else math.nan
        return (f"[{mark}] {self.name:<28} est={self.estimate:+.6f} exact={self.exact:+.6f} "
                f"se={self.stderr:.2e} |dev|/se={z:.2f}")


@dataclass
class CheckReport:
    model_name: str
    n_trials: int
    multiplier: float
    comparisons: list[Comparison] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.comparisons)

    def failures(self) -> list[Comparison]:
        return [c for c in self.comparisons if not c.passed]

    def summary(self) -> str:
        head = f"{self.model_name}: n={self.n_trials} k={self.multiplier} -> {'PASS' if self.passed else 'FAIL'}"
        return "\n".join([head] + ["  " + c.line() for c in self.comparisons])


def _compare(name, est, exact, se, k) -> Comparison:
    if not math.isfinite(exact):
        return Comparison(name, est, exact, se, not math.isfinite(est))
    if not (math.isfinite(est) and math.isfinite(se)):
        return Comparison(name, est, exact, se, False)
    return Comparison(name, est, exact, se, abs(est - exact) <= k * se + ABS_FLOOR)


def compare_to_oracle(table: CorrelationTable, raw_e, raw_se, report: ExactReport,
                      multiplier: float) -> list[Comparison]:
    out = []
    for i, s in enumerate(SETTING_PAIRS):
        p, ex = table[s], report[s]
        tag = f"{s[0]}{s[1]}"
        out.append(_compare(f"P(coinc)[{tag}]", p.kept_fraction, ex.p_coinc, p.se_kept_fraction, multiplier))
        out.append(_compare(f"E(ab|coinc)[{tag}]", p.e_ab, ex.e_ab, p.se_ab, multiplier))
        out.append(_compare(f"E(a|coinc)[{tag}]", p.e_a, ex.e_a, p.se_a, multiplier))
        out.append(_compare(f"E(b|coinc)[{tag}]", p.e_b, ex.e_b, p.se_b, multiplier))
        out.append(_compare(f"E_raw(ab)[{tag}]", float(raw_e[i]), ex.raw_e_ab, float(raw_se[i]), multiplier))
    return out


def exact_vs_mc_check(model: HvModel, n_trials: int, seed: int, tolerance_multiplier: float = 4.0,
                      timing: TimingConfig = LOSSLESS, strategy: str = "bins",
                      estimator: Callable = correlation_table, workers: int = 1) -> CheckReport:
    """Simulate -> click streams -> pair -> extract -> estimate, then compare every
    estimate to the oracle within ``tolerance_multiplier`` standard errors."""
    report = exact_report(model)
    sa, sb = generate_click_streams(model, n_trials, timing, seed, workers=workers)
    raw = pair_by_window(sa, sb, timing, strategy)
    final = extract_final(raw)
    table = estimator(final)
    comps = compare_to_oracle(table, raw_correlations(raw), raw_correlation_stderrs(raw), report,
                              tolerance_multiplier)
    return CheckReport(model.name, n_trials, tolerance_multiplier, comps)
