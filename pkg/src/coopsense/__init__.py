"""Cooperative spectrum sensing with enhanced energy detection.

Library layout:

* :mod:`coopsense.specfun` - log-gamma, regularized incomplete gamma,
  generalized Marcum Q.
* :mod:`coopsense.noise_model` - complex Gaussian noise generation,
  variance estimation, confidence brackets.
* :mod:`coopsense.detector` - energy statistic, threshold test and the
  closed-form single-detector probabilities.
* :mod:`coopsense.threshold_schemes` - fixed, two-step interval,
  expectation-normalized and convex-weighted threshold strategies.
* :mod:`coopsense.fusion` - n-out-of-K voting, cooperative error rates,
  optimal vote count.
* :mod:`coopsense.montecarlo` - deterministic, worker-count-invariant
  trial engine.
* :mod:`coopsense.cli_experiments` - command-line sweep runner over JSON
  experiment specs, CSV output.
"""

from .detector import (
    DetectorConfig,
    Hypothesis,
    analytic_pd,
    analytic_pf,
    decide,
    energy_statistic,
    pdf_normalized,
    pf_pm_from_pdf,
)
from .fusion import (
    CooperativeRates,
    FusionConfig,
    apply_reporting_errors,
    coop_qf,
    coop_qm,
    cooperative_rates,
    effective_rate,
    optimize_vote_count,
    total_error,
    total_error_over_noise_states,
    vote,
)
from .montecarlo import (
    AnalyticFamily,
    AnalyticRates,
    RateEstimate,
    Scenario,
    ScenarioEstimate,
    TrialResult,
    TruthMode,
    estimate,
    run_trial,
    wilson_interval,
)
from .noise_model import (
    NoiseUncertaintyModel,
    VarianceBracket,
    confidence_bracket,
    estimate_noise_expectation,
    generate_noise,
    sample_noise_variance,
    two_sided_kappa,
)
from .specfun import (
    ConvergenceError,
    log_gamma,
    marcum_q,
    reg_lower_gamma,
    reg_upper_gamma,
)
from .threshold_schemes import (
    EnhancedDecision,
    IntervalDecision,
    IntervalOutcome,
    ObservationContext,
    SchemeConfig,
    SchemeKind,
    convex_normalizer,
    convex_weighted_statistic,
    decide_enhanced,
    default_weights,
    expectation_statistic,
    statistic_interval,
    two_step_decide,
)

__version__ = "0.1.0"
