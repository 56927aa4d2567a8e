"""Exact enumeration oracle.

Every state of ``Lambda_12 x Lambda_x x Lambda_y`` is visited for each setting
pair and its weight is accumulated into the 3x3 table of outcome probabilities
``P(a, b)``.  Accumulation uses ``math.fsum`` per block of ``lambda1`` rows and
again over blocks, with a block schedule that depends only on the support
sizes, so reports are bit-stable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DEFAULT_BUDGET, SETTING_PAIRS, HvModel
from .stats import chsh_values

BLOCK_STATES = 1 << 20
OUTCOMES = (-1, 0, 1)


class BudgetExceeded(RuntimeError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"enumeration needs {required} states per setting pair, budget is {budget}")
        self.required = required
        self.budget = budget


def state_weights(model: HvModel, x: int, y: int) -> np.ndarray:
    """Probability of every ``(l1, l2, lx, ly)`` under settings ``(x, y)``."""
    return model.source[:, :, None, None] * model.instruments.joint(x, y)[None, None, :, :]


def outcome_distribution(model: HvModel, x: int, y: int) -> np.ndarray:
    """``P[a + 1, b + 1]`` for settings ``(x, y)`` by brute-force enumeration."""
    s = model.support
    joint = model.instruments.joint(x, y)
    A = model.responses.A[x - 1].astype(np.int64)
    B = model.responses.B[y - 1].astype(np.int64)
    per_row = s.n_lambda2 * s.n_lambdax * s.n_lambday
    rows = max(1, BLOCK_STATES // per_row)
    partials: list[list[float]] = [[] for _ in range(9)]
    for i0 in range(0, s.n_lambda1, rows):
        i1 = min(i0 + rows, s.n_lambda1)
        w = model.source[i0:i1, :, None, None] * joint[None, None, :, :]
        code = (A[i0:i1, None, :, None] + 1) * 3 + (B[None, :, None, :] + 1)
        code = np.broadcast_to(code, w.shape)
        for k in range(9):
            partials[k].append(math.fsum(w[code == k]))
    return np.array([math.fsum(p) for p in partials]).reshape(3, 3)


@dataclass
class PairExact:
    setting: tuple[int, int]
    joint: np.ndarray  # P[a + 1, b + 1]
    p_coinc: float
    e_ab: float
    e_a: float
    e_b: float
    raw_e_ab: float
    raw_e_a: float
    raw_e_b: float
    p_a_nonzero: float
    p_b_nonzero: float
    p_any_zero: float
    p_both_zero: float

    @property
    def defined(self) -> bool:
        return self.p_coinc > 0

    def to_dict(self) -> dict:
        def num(v):
            return None if not math.isfinite(v) else v

        return {
            "joint": self.joint.tolist(),
            "P_coinc": self.p_coinc,
            "E_ab": num(self.e_ab),
            "E_a": num(self.e_a),
            "E_b": num(self.e_b),
            "raw_E_ab": self.raw_e_ab,
            "raw_E_a": self.raw_e_a,
            "raw_E_b": self.raw_e_b,
            "P_a_nonzero": self.p_a_nonzero,
            "P_b_nonzero": self.p_b_nonzero,
            "P_any_zero": self.p_any_zero,
            "P_both_zero": self.p_both_zero,
        }


def _pair_exact(setting, P: np.ndarray) -> PairExact:
    cells = [(a, b, P[a + 1, b + 1]) for a in OUTCOMES for b in OUTCOMES]
    kept = [(a, b, p) for a, b, p in cells if a != 0 and b != 0]
    p_coinc = math.fsum(p for _, _, p in kept)
    if p_coinc > 0:
        e_ab = math.fsum(a * b * p for a, b, p in kept) / p_coinc
        e_a = math.fsum(a * p for a, _, p in kept) / p_coinc
        e_b = math.fsum(b * p for _, b, p in kept) / p_coinc
    else:
        e_ab = e_a = e_b = math.nan
    return PairExact(
        setting=setting,
        joint=P,
        p_coinc=p_coinc,
        e_ab=e_ab,
        e_a=e_a,
        e_b=e_b,
        raw_e_ab=math.fsum(a * b * p for a, b, p in cells),
        raw_e_a=math.fsum(a * p for a, _, p in cells),
        raw_e_b=math.fsum(b * p for _, b, p in cells),
        p_a_nonzero=math.fsum(p for a, _, p in cells if a != 0),
        p_b_nonzero=math.fsum(p for _, b, p in cells if b != 0),
        p_any_zero=math.fsum(p for a, b, p in cells if a == 0 or b == 0),
        p_both_zero=float(P[1, 1]),
    )


@dataclass
class ExactReport:
    model_name: str
    content_hash: str
    pairs: dict[tuple[int, int], PairExact]

    def __getitem__(self, setting) -> PairExact:
        return self.pairs[setting]

    @property
    def conditional_defined(self) -> bool:
        return all(self.pairs[s].defined for s in SETTING_PAIRS)

    def conditional_chsh(self) -> tuple[float, float]:
        """``(s_canonical, s_max)`` over post-selected correlations (nan if undefined)."""
        if not self.conditional_defined:
            return math.nan, math.nan
        return chsh_values([self.pairs[s].e_ab for s in SETTING_PAIRS])

    def raw_chsh(self) -> tuple[float, float]:
        return chsh_values([self.pairs[s].raw_e_ab for s in SETTING_PAIRS])

    def pairwise_distributions(self) -> np.ndarray:
        """Post-selected ``P(a, b | x, y)``, shape (2, 2, 2, 2), outcome index 0 -> -1."""
        out = np.zeros((2, 2, 2, 2))
        for x, y in SETTING_PAIRS:
            p = self.pairs[(x, y)]
            out[x - 1, y - 1] = p.joint[np.ix_([0, 2], [0, 2])] / p.p_coinc
        return out

    def to_dict(self) -> dict:
        sc, sm = self.conditional_chsh()
        rc, rm = self.raw_chsh()

        def num(v):
            return None if not math.isfinite(v) else v

        return {
            "model": self.model_name,
            "content_hash": self.content_hash,
            "pairs": {f"{x}{y}": self.pairs[(x, y)].to_dict() for x, y in SETTING_PAIRS},
            "conditional": {"s_canonical": num(sc), "s_max": num(sm)},
            "unconditional": {"s_canonical": rc, "s_max": rm},
        }


def exact_report(model: HvModel, budget: int = DEFAULT_BUDGET) -> ExactReport:
    required = model.support.states_per_pair
    if required > budget:
        raise BudgetExceeded(required, budget)
    pairs = {s: _pair_exact(s, outcome_distribution(model, *s)) for s in SETTING_PAIRS}
    return ExactReport(model.name, model.content_hash, pairs)
