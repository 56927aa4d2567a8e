"""Counterfactual couplings over (a1, a2, b1, b2) and joint-probability feasibility.

A coupling assigns one probability to each of the 16 quadruples of +/-1
outcomes, i.e. all four setting outcomes are realized in every trial.  Such
samples satisfy |S| <= 2 trial by trial.  ``jp_feasibility`` asks the reverse
question: do four observed pairwise distributions admit such a coupling?
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .model import MODEL1, SETTING_PAIRS, HvModel
from .stats import chsh_values

# quadruple k: a1 = bit 3, a2 = bit 2, b1 = bit 1, b2 = bit 0; bit 1 -> +1
QUADRUPLES = np.array([[2 * ((k >> s) & 1) - 1 for s in (3, 2, 1, 0)] for k in range(16)], dtype=np.int8)
JP_TOL = 1e-9

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
INCONSISTENT = "marginals-inconsistent"


class JointDistribution16:
    """Probabilities over ``QUADRUPLES``; nonnegative, summing to 1 within 1e-9."""

    def __init__(self, probs):
        p = np.array(probs, dtype=np.float64)
        if p.shape == (2, 2, 2, 2):
            p = p.reshape(16)
        if p.shape != (16,):
            raise ValueError(f"expected 16 probabilities, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or (p < 0).any():
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > JP_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        self.probs = p

    @classmethod
    def uniform(cls) -> "JointDistribution16":
        return cls(np.full(16, 1 / 16))

    @classmethod
    def point_mass(cls, quadruple) -> "JointDistribution16":
        p = np.zeros(16)
        p[quadruple_index(quadruple)] = 1.0
        return cls(p)

    def pairwise(self) -> np.ndarray:
        """Induced ``P[x-1, y-1, a_idx, b_idx]`` (outcome index 0 -> -1)."""
        return _induced_pairwise(self.probs)

    def to_dict(self) -> dict:
        return {"order": "a1 a2 b1 b2, bit 1 -> +1, a1 most significant",
                "probs": self.probs.tolist()}


def quadruple_index(q) -> int:
    a1, a2, b1, b2 = (int(v > 0) for v in q)
    return (a1 << 3) | (a2 << 2) | (b1 << 1) | b2


def _induced_pairwise(q: np.ndarray) -> np.ndarray:
    out = np.zeros((2, 2, 2, 2))
    for x, y in SETTING_PAIRS:
        ai = (QUADRUPLES[:, x - 1] > 0).astype(int)
        bi = (QUADRUPLES[:, 2 + y - 1] > 0).astype(int)
        np.add.at(out[x - 1, y - 1], (ai, bi), q)
    return out


# --- sampling and the per-trial identity -------------------------------------------


def sample_coupling(jp: JointDistribution16, n: int, seed: int, workers: int = 1) -> np.ndarray:
    """``n`` i.i.d. quadruples as an (n, 4) int8 array of columns a1, a2, b1, b2."""
    seed = rng.check_seed(seed)
    parts = rng.map_chunks(
        lambda c, s, e: rng.categorical(rng.uniforms(seed, rng.COUPLING, c, e - s), jp.probs),
        n, workers)
    idx = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return QUADRUPLES[idx]


def chsh_identity(q) -> int:
    a1, a2, b1, b2 = (int(v) for v in q)
    return a1 * b1 + a1 * b2 + a2 * b1 - a2 * b2


def chsh_identities(samples: np.ndarray) -> np.ndarray:
    s = np.asarray(samples, dtype=np.int8)
    a1, a2, b1, b2 = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
    # a1 (b1 + b2) + a2 (b1 - b2); every term stays within int8
    return a1 * (b1 + b2) + a2 * (b1 - b2)


def empirical_chsh_from_coupling(samples) -> float:
    """Mean CHSH identity; the integer total bounds the result to [-2, 2] exactly."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("empty sample list")
    samples = samples.reshape(-1, 4)
    total = int(chsh_identities(samples).sum(dtype=np.int64))
    return total / samples.shape[0]


def product_coupling(model: HvModel) -> JointDistribution16:
    """Coupling of a zero-free model1 model: draw the source once and every
    instrument variable independently for both settings of each station."""
    if model.variant != MODEL1:
        raise ValueError("product coupling needs a model1 model")
    if model.has_zeros():
        raise ValueError("product coupling needs +/-1 response tables")
    A, B = model.responses.A, model.responses.B
    px, py = model.instruments.px, model.instruments.py
    # P(A_x(l1, .) = +1) per l1, for each x
    pa = np.stack([(A[x] > 0).astype(float) @ px[x] for x in (0, 1)], axis=1)  # (n1, 2)
    pb = np.stack([(B[y] > 0).astype(float) @ py[y] for y in (0, 1)], axis=1)  # (n2, 2)
    q = np.zeros(16)
    for k, (a1, a2, b1, b2) in enumerate(QUADRUPLES):
        fa = np.where(a1 > 0, pa[:, 0], 1 - pa[:, 0]) * np.where(a2 > 0, pa[:, 1], 1 - pa[:, 1])
        fb = np.where(b1 > 0, pb[:, 0], 1 - pb[:, 0]) * np.where(b2 > 0, pb[:, 1], 1 - pb[:, 1])
        q[k] = math.fsum((model.source * np.outer(fa, fb)).ravel())
    return JointDistribution16(q)


# --- feasibility -------------------------------------------------------------------


def facet_check(correlations, marginals=None) -> float:
    """``s_max - 2`` over the eight CHSH facets (marginals do not enter)."""
    return chsh_values(correlations)[1] - 2.0


def pairwise_from_moments(e, ma, mb) -> np.ndarray:
    """Pairwise distributions from correlations ``e`` (E11, E12, E21, E22) and
    marginal means ``ma = (E[A1], E[A2])``, ``mb = (E[B1], E[B2])``."""
    out = np.zeros((2, 2, 2, 2))
    for i, (x, y) in enumerate(SETTING_PAIRS):
        for ai, a in enumerate((-1, 1)):
            for bi, b in enumerate((-1, 1)):
                out[x - 1, y - 1, ai, bi] = (1 + a * ma[x - 1] + b * mb[y - 1] + a * b * e[i]) / 4
    return out


def moments(pairwise: np.ndarray):
    """``(E, mA, mB)`` where ``mA[x-1, y-1] = E[A_x]`` within pair ``(x, y)``."""
    sign = np.array([-1.0, 1.0])
    e = np.array([sign @ pairwise[x - 1, y - 1] @ sign for x, y in SETTING_PAIRS])
    ma = np.einsum("xyab,a->xy", pairwise, sign)
    mb = np.einsum("xyab,b->xy", pairwise, sign)
    return e, ma, mb


@dataclass
class FeasibilityResult:
    status: str
    witness: JointDistribution16 | None
    max_facet_violation: float
    residual: float = math.nan
    marginal_gap: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "max_facet_violation": self.max_facet_violation,
            "lp_residual": None if not math.isfinite(self.residual) else self.residual,
            "marginal_gap": self.marginal_gap,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }


def _lp_rows() -> np.ndarray:
    a1, a2, b1, b2 = (QUADRUPLES[:, i].astype(float) for i in range(4))
    return np.array([np.ones(16), a1, a2, b1, b2, a1 * b1, a1 * b2, a2 * b1, a2 * b2])


def phase_one(A: np.ndarray, b: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000):
    """Dense phase-one simplex with Bland's rule for ``A q = b, q >= 0``.

    Returns ``(q, residual)`` where ``residual`` is the minimal total artificial
    slack; the system is feasible when it vanishes.
    """
    A = np.array(A, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    for _ in range(max_iter):
        entering = next((j for j in range(n + m) if T[m, j] < -tol), None)
        if entering is None:
            break
        col = T[:m, entering]
        best, best_ratio = None, math.inf
        for i in range(m):
            if col[i] > tol:
                ratio = T[i, -1] / col[i]
                if ratio < best_ratio - tol or (abs(ratio - best_ratio) <= tol and basis[i] < basis[best]):
                    best, best_ratio = i, ratio
        if best is None:  # cannot happen in phase one (objective bounded below by 0)
            break
        T[best] /= T[best, entering]
        for i in range(m + 1):
            if i != best and T[i, entering] != 0:
                T[i] -= T[i, entering] * T[best]
        basis[best] = entering
    else:
        raise RuntimeError("simplex did not converge")
    sol = np.zeros(n + m)
    sol[basis] = T[:m, -1]
    return sol[:n], max(0.0, -T[m, -1])


def jp_feasibility(pairwise, tolerance: float = JP_TOL) -> FeasibilityResult:
    """Decide whether a coupling of four ``{+-1}^2`` distributions exists.

    ``pairwise[x-1, y-1, a_idx, b_idx]`` with outcome index 0 -> -1.  Marginals
    of ``A_x`` (resp. ``B_y``) must agree across the remote setting within
    ``tolerance``; otherwise the status is ``marginals-inconsistent``.
    """
    P = np.array(pairwise, dtype=np.float64)
    if P.shape != (2, 2, 2, 2) or not np.all(np.isfinite(P)):
        raise ValueError(f"expected a finite (2, 2, 2, 2) array, got shape {P.shape}")
    if (P < -tolerance).any():
        raise ValueError("pairwise distributions have negative entries")
    sums = P.sum(axis=(2, 3))
    if np.abs(sums - 1).max() > tolerance:
        raise ValueError(f"pairwise distributions not normalized (sums {sums.ravel().tolist()})")

    e, ma, mb = moments(P)
    violation = facet_check(e)
    gap = float(max(np.abs(ma[:, 0] - ma[:, 1]).max(), np.abs(mb[0, :] - mb[1, :]).max()))
    if gap > tolerance:
        return FeasibilityResult(INCONSISTENT, None, violation, marginal_gap=gap)

    target = np.concatenate([[1.0], ma.mean(axis=1), mb.mean(axis=0), e])
    q, residual = phase_one(_lp_rows(), target)
    if residual > tolerance:
        return FeasibilityResult(INFEASIBLE, None, violation, residual, gap)
    q = np.clip(q, 0, None)
    q /= q.sum()
    witness = JointDistribution16(q)
    if np.abs(witness.pairwise() - P).max() > tolerance:
        return FeasibilityResult(INFEASIBLE, None, violation, residual, gap)
    return FeasibilityResult(FEASIBLE, witness, violation, residual, gap)
