"""Enhanced energy-detection threshold strategies under noise uncertainty.

Four strategies share one normalized-statistic convention (energy divided
by sample count times a noise-power normalizer):

fixed
    Normalize by the nominal noise power and threshold once. Miscalibrated
    whenever the true power drifts away from nominal.

two_step
    Evaluate the statistic at both bracket endpoints, giving the interval
    of values it could take for any admissible noise power. If the whole
    interval clears (or misses) the threshold the decision is made in one
    step; if the threshold falls inside the interval, a second and final
    step re-decides with the expectation-normalized statistic.

expectation
    Normalize by the expected noise power (the bracket mean) instead of a
    per-draw or nominal value.

convex
    Normalize by the smallest cyclically-aligned weighted average of the
    per-component expected noise powers. Weight alignments wrap around so
    every alignment spans all components; with unit weights every aligned
    average equals the plain mean and the scheme reduces exactly to
    ``expectation``.

Because the interval endpoints and the expectation statistic are ordered
(low <= expectation <= high whenever the bracket contains its own mean),
the two-step strategy always lands on the same decision as ``expectation``;
what it buys is that most rounds resolve in a single step, which the step
metadata records.
"""

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .detector import Hypothesis, decide
from .noise_model import VarianceBracket

__all__ = [
    "SchemeKind",
    "SchemeConfig",
    "IntervalOutcome",
    "IntervalDecision",
    "ObservationContext",
    "EnhancedDecision",
    "default_weights",
    "statistic_interval",
    "two_step_decide",
    "expectation_statistic",
    "convex_normalizer",
    "convex_weighted_statistic",
    "decide_enhanced",
]


class SchemeKind(str, enum.Enum):
    FIXED = "fixed"
    TWO_STEP = "two_step"
    EXPECTATION = "expectation"
    CONVEX = "convex"


def default_weights(length: int, ratio: float = 0.5) -> tuple[float, ...]:
    """Geometric weight ladder (1, ratio, ratio^2, ...); an arbitrary but
    documented default for the convex scheme.

    Floored at 1e-120 so long windows stay strictly positive instead of
    underflowing; weights that small contribute nothing to the averages.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length!r}")
    if ratio <= 0.0:
        raise ValueError(f"ratio must be > 0, got {ratio!r}")
    return tuple(max(ratio**i, 1e-120) for i in range(length))


@dataclass(frozen=True)
class SchemeConfig:
    """Chosen strategy plus the convex scheme's weights and exponent."""

    kind: SchemeKind
    weights: tuple[float, ...] | None = None
    exponent: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if self.weights is not None:
            weights = tuple(float(w) for w in self.weights)
            if not weights or any(w <= 0.0 for w in weights):
                raise ValueError("weights must be a nonempty all-positive sequence")
            object.__setattr__(self, "weights", weights)
        if int(self.exponent) != self.exponent or self.exponent < 1:
            raise ValueError(f"exponent must be an integer >= 1, got {self.exponent!r}")

    @classmethod
    def fixed(cls) -> "SchemeConfig":
        return cls(kind=SchemeKind.FIXED)

    @classmethod
    def two_step(cls) -> "SchemeConfig":
        return cls(kind=SchemeKind.TWO_STEP)

    @classmethod
    def expectation(cls) -> "SchemeConfig":
        return cls(kind=SchemeKind.EXPECTATION)

    @classmethod
    def convex(cls, weights=None, exponent: int = 1) -> "SchemeConfig":
        return cls(kind=SchemeKind.CONVEX, weights=weights, exponent=exponent)


class IntervalOutcome(enum.Enum):
    H0 = "h0"
    H1 = "h1"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class IntervalDecision:
    outcome: IntervalOutcome
    statistic_low: float
    statistic_high: float

    def __post_init__(self):
        if self.statistic_low > self.statistic_high:
            raise ValueError("statistic_low must not exceed statistic_high")


def _total_energy(energy) -> float:
    total = float(np.sum(np.asarray(energy, dtype=float)))
    if not math.isfinite(total) or total < 0.0:
        raise ValueError(f"energy must be finite and >= 0, got {total!r}")
    return total


def statistic_interval(
    energy, bracket: VarianceBracket, sample_count: int
) -> tuple[float, float]:
    """Range of the normalized statistic over the variance bracket.

    The low end normalizes by the highest admissible variance, the high
    end by the lowest, so the value computed with any in-bracket variance
    lies inside the returned interval.
    """
    total = _total_energy(energy)
    if sample_count < 1:
        raise ValueError(f"sample_count must be >= 1, got {sample_count!r}")
    if bracket.low <= 0.0:
        raise ValueError("bracket endpoints must be positive")
    low = total / (sample_count * bracket.high)
    high = total / (sample_count * bracket.low)
    return low, high


def two_step_decide(interval: tuple[float, float], threshold: float) -> IntervalDecision:
    """First-stage interval test against the threshold.

    H1 when even the pessimistic (low) statistic reaches the threshold, H0
    when even the optimistic (high) one falls short, undecided otherwise.
    """
    low, high = float(interval[0]), float(interval[1])
    if low > high:
        raise ValueError(f"invalid interval ({low!r}, {high!r})")
    if low >= threshold:
        outcome = IntervalOutcome.H1
    elif high < threshold:
        outcome = IntervalOutcome.H0
    else:
        outcome = IntervalOutcome.UNDECIDED
    return IntervalDecision(outcome=outcome, statistic_low=low, statistic_high=high)


def expectation_statistic(energy, expected_variance: float, sample_count: int) -> float:
    """Normalized statistic with the expected noise power as normalizer."""
    expected_variance = float(expected_variance)
    if not math.isfinite(expected_variance) or expected_variance <= 0.0:
        raise ValueError(
            f"expected_variance must be > 0, got {expected_variance!r}"
        )
    if sample_count < 1:
        raise ValueError(f"sample_count must be >= 1, got {sample_count!r}")
    return _total_energy(energy) / (sample_count * expected_variance)


def convex_normalizer(
    expectations: Sequence[float],
    weights: Sequence[float] | None = None,
    exponent: int = 1,
) -> float:
    """Minimum over cyclic weight alignments of the weighted mean power.

    For alignment ``i`` the weight applied to component ``t`` is
    ``weights[(t - i) % len]`` raised to ``exponent``; each alignment spans
    all components, so with unit weights every alignment yields the plain
    mean and the minimum equals it.
    """
    exps = np.asarray(expectations, dtype=float)
    if exps.ndim != 1 or exps.size == 0:
        raise ValueError("expectations must be a nonempty 1-D sequence")
    if np.any(exps <= 0.0) or not np.all(np.isfinite(exps)):
        raise ValueError("expectations must be finite and positive")
    if weights is None:
        weights = default_weights(exps.size)
    w = np.asarray(weights, dtype=float)
    if w.shape != exps.shape:
        raise ValueError(
            f"weights length {w.size} does not match expectations length {exps.size}"
        )
    if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and positive")
    if int(exponent) != exponent or exponent < 1:
        raise ValueError(f"exponent must be an integer >= 1, got {exponent!r}")
    wg = w**exponent
    best = math.inf
    for i in range(exps.size):
        aligned = np.roll(wg, i)
        best = min(best, float(np.dot(aligned, exps) / aligned.sum()))
    return best


def convex_weighted_statistic(
    energy,
    expectations: Sequence[float],
    sample_count: int,
    weights: Sequence[float] | None = None,
    exponent: int = 1,
) -> float:
    """Normalized statistic using the convex-minimized noise power."""
    normalizer = convex_normalizer(expectations, weights, exponent)
    if sample_count < 1:
        raise ValueError(f"sample_count must be >= 1, got {sample_count!r}")
    return _total_energy(energy) / (sample_count * normalizer)


@dataclass(frozen=True)
class ObservationContext:
    """Everything a scheme may need to turn one energy sum into a decision."""

    energy: float
    sample_count: int
    nominal_variance: float | None = None
    variance_bracket: VarianceBracket | None = None
    expected_variance: float | None = None
    component_expectations: tuple[float, ...] | None = None


@dataclass(frozen=True)
class EnhancedDecision:
    decision: Hypothesis
    steps: int
    statistic: float
    interval: IntervalDecision | None = None


def _require_context(context: ObservationContext, field: str):
    value = getattr(context, field)
    if value is None:
        raise ValueError(f"scheme requires context field {field!r}")
    return value


def decide_enhanced(
    scheme: SchemeConfig, context: ObservationContext, threshold: float
) -> EnhancedDecision:
    """Run one scheme on one observation; never more than two steps."""
    kind = scheme.kind
    if kind == SchemeKind.FIXED:
        nominal = _require_context(context, "nominal_variance")
        stat = expectation_statistic(context.energy, nominal, context.sample_count)
        return EnhancedDecision(decide(stat, threshold), steps=1, statistic=stat)

    if kind == SchemeKind.EXPECTATION:
        expected = _require_context(context, "expected_variance")
        stat = expectation_statistic(context.energy, expected, context.sample_count)
        return EnhancedDecision(decide(stat, threshold), steps=1, statistic=stat)

    if kind == SchemeKind.CONVEX:
        exps = _require_context(context, "component_expectations")
        stat = convex_weighted_statistic(
            context.energy,
            exps,
            context.sample_count,
            weights=scheme.weights,
            exponent=scheme.exponent,
        )
        return EnhancedDecision(decide(stat, threshold), steps=1, statistic=stat)

    if kind == SchemeKind.TWO_STEP:
        bracket = _require_context(context, "variance_bracket")
        interval = two_step_decide(
            statistic_interval(context.energy, bracket, context.sample_count),
            threshold,
        )
        if interval.outcome == IntervalOutcome.H1:
            return EnhancedDecision(
                Hypothesis.H1, steps=1, statistic=interval.statistic_low,
                interval=interval,
            )
        if interval.outcome == IntervalOutcome.H0:
            return EnhancedDecision(
                Hypothesis.H0, steps=1, statistic=interval.statistic_high,
                interval=interval,
            )
        expected = (
            context.expected_variance
            if context.expected_variance is not None
            else bracket.mean
        )
        stat = expectation_statistic(context.energy, expected, context.sample_count)
        return EnhancedDecision(
            decide(stat, threshold), steps=2, statistic=stat, interval=interval
        )

    raise ValueError(f"unknown scheme kind {kind!r}")
