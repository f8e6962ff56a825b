"""Fusion-center logic: n-out-of-K voting and cooperative error rates.

Per-receiver decisions are assumed i.i.d., so the fused rates are binomial
tails. Tail terms are accumulated in log space and the smaller side of the
split is always the one summed directly, which keeps both rates accurate
at the extremes.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .detector import Hypothesis

__all__ = [
    "FusionConfig",
    "CooperativeRates",
    "probability",
    "vote",
    "coop_qf",
    "coop_qm",
    "total_error",
    "total_error_over_noise_states",
    "optimize_vote_count",
    "apply_reporting_errors",
    "effective_rate",
]


def probability(value: float, name: str = "probability") -> float:
    """Validate a probability: finite and inside [0, 1]."""
    value = float(value)
    if not math.isfinite(value) or value < 0.0 or value > 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class FusionConfig:
    """Vote rule parameters: K receivers, n votes needed, prior, link errors."""

    num_sus: int
    vote_threshold: int
    prior_h0: float = 0.5
    report_error: float = 0.0

    def __post_init__(self):
        if self.num_sus < 1:
            raise ValueError(f"num_sus must be >= 1, got {self.num_sus!r}")
        if not 1 <= self.vote_threshold <= self.num_sus:
            raise ValueError(
                f"vote_threshold must lie in [1, {self.num_sus}], "
                f"got {self.vote_threshold!r}"
            )
        probability(self.prior_h0, "prior_h0")
        if not 0.0 <= self.report_error <= 0.5:
            raise ValueError(
                f"report_error must lie in [0, 0.5], got {self.report_error!r}"
            )

    @property
    def vote_threshold_complement(self) -> int:
        """The K - n counting convention for the same rule."""
        return self.num_sus - self.vote_threshold


@dataclass(frozen=True)
class CooperativeRates:
    """Fused rates; q_e is the prior-weighted sum by construction."""

    q_f: float
    q_m: float
    q_e: float


def cooperative_rates(
    config: FusionConfig, p_f: float, p_d: float
) -> CooperativeRates:
    """Fused rates for i.i.d. per-receiver rates under the config's rule.

    Reporting-channel flips are folded into the per-receiver rates before
    the binomial tails, since the fusion center only sees the flipped bits.
    """
    q = config.report_error
    q_f = coop_qf(config.num_sus, config.vote_threshold, effective_rate(p_f, q))
    q_m = coop_qm(config.num_sus, config.vote_threshold, effective_rate(p_d, q))
    return CooperativeRates(
        q_f=q_f, q_m=q_m, q_e=total_error(config.prior_h0, q_f, q_m)
    )


def vote(decisions: Sequence[int], threshold: int) -> Hypothesis:
    """H1 when at least ``threshold`` of the decisions are H1.

    threshold=1 is the OR rule, threshold=len(decisions) the AND rule.
    """
    votes = np.asarray(decisions, dtype=int)
    if votes.size == 0:
        raise ValueError("decisions must be nonempty")
    if not 1 <= threshold <= votes.size:
        raise ValueError(
            f"threshold must lie in [1, {votes.size}], got {threshold!r}"
        )
    return Hypothesis.H1 if int(votes.sum()) >= threshold else Hypothesis.H0


def _binomial_sum(num_sus: int, support: range, p: float) -> float:
    """Sum of C(K, l) p^l (1-p)^(K-l) over l in ``support``, via log terms."""
    if p == 0.0:
        return 1.0 if 0 in support else 0.0
    if p == 1.0:
        return 1.0 if num_sus in support else 0.0
    log_p = math.log(p)
    log_q = math.log1p(-p)
    total = 0.0
    for l in support:
        log_term = (
            math.lgamma(num_sus + 1)
            - math.lgamma(l + 1)
            - math.lgamma(num_sus - l + 1)
            + l * log_p
            + (num_sus - l) * log_q
        )
        total += math.exp(log_term)
    return min(total, 1.0)


def _validate_rule(num_sus: int, vote_threshold: int):
    if num_sus < 1:
        raise ValueError(f"num_sus must be >= 1, got {num_sus!r}")
    if not 1 <= vote_threshold <= num_sus:
        raise ValueError(
            f"vote_threshold must lie in [1, {num_sus}], got {vote_threshold!r}"
        )


def coop_qf(num_sus: int, vote_threshold: int, p_f: float) -> float:
    """Cooperative false-alarm rate: P(at least n of K false alarms)."""
    _validate_rule(num_sus, vote_threshold)
    p_f = probability(p_f, "p_f")
    return _binomial_sum(num_sus, range(vote_threshold, num_sus + 1), p_f)


def coop_qm(num_sus: int, vote_threshold: int, p_d: float) -> float:
    """Cooperative missed-detection rate: P(fewer than n of K detect).

    Computed as the lower binomial sum directly rather than 1 minus the
    tail, so small values keep their relative accuracy.
    """
    _validate_rule(num_sus, vote_threshold)
    p_d = probability(p_d, "p_d")
    return _binomial_sum(num_sus, range(0, vote_threshold), p_d)


def total_error(prior_h0: float, q_f: float, q_m: float) -> float:
    """Prior-weighted total error rate alpha*Q_f + (1-alpha)*Q_m."""
    prior_h0 = probability(prior_h0, "prior_h0")
    return prior_h0 * q_f + (1.0 - prior_h0) * q_m


def total_error_over_noise_states(
    prior_h0: float,
    states: Sequence[tuple[float, float, float, float]],
) -> float:
    """Total error averaged over discrete noise states.

    Each state is (weight under H0, weight under H1, Q_f, Q_m); the two
    conditional weight sets must each sum to 1 within 1e-9.
    """
    prior_h0 = probability(prior_h0, "prior_h0")
    if not states:
        raise ValueError("states must be nonempty")
    w0 = sum(s[0] for s in states)
    w1 = sum(s[1] for s in states)
    if abs(w0 - 1.0) > 1e-9 or abs(w1 - 1.0) > 1e-9:
        raise ValueError(
            f"conditional weights must each sum to 1, got {w0!r} and {w1!r}"
        )
    return sum(
        prior_h0 * p0 * q_f + (1.0 - prior_h0) * p1 * q_m
        for p0, p1, q_f, q_m in states
    )


def optimize_vote_count(
    num_sus: int, p_f: float, p_d: float, prior_h0: float
) -> tuple[int, float]:
    """Exhaustive argmin of the total error over vote thresholds 1..K.

    Ties break toward the smaller threshold (the OR-leaning rule).
    """
    if num_sus < 1:
        raise ValueError(f"num_sus must be >= 1, got {num_sus!r}")
    best_n, best_qe = 1, math.inf
    for n in range(1, num_sus + 1):
        qe = total_error(prior_h0, coop_qf(num_sus, n, p_f), coop_qm(num_sus, n, p_d))
        if qe < best_qe:
            best_n, best_qe = n, qe
    return best_n, best_qe


def apply_reporting_errors(
    decisions: Sequence[int], flip_probability: float, rng: np.random.Generator
) -> np.ndarray:
    """Flip each reported bit independently with the given probability."""
    flip_probability = float(flip_probability)
    if not 0.0 <= flip_probability <= 0.5:
        raise ValueError(
            f"flip_probability must lie in [0, 0.5], got {flip_probability!r}"
        )
    bits = np.asarray(decisions, dtype=int)
    if flip_probability == 0.0:
        return bits.copy()
    flips = rng.random(bits.shape) < flip_probability
    return np.where(flips, 1 - bits, bits)


def effective_rate(p: float, flip_probability: float) -> float:
    """Per-receiver H1-report rate seen at the fusion center after flips."""
    p = probability(p, "p")
    flip_probability = float(flip_probability)
    if not 0.0 <= flip_probability <= 0.5:
        raise ValueError(
            f"flip_probability must lie in [0, 0.5], got {flip_probability!r}"
        )
    return p * (1.0 - flip_probability) + (1.0 - p) * flip_probability
