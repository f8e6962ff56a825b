"""Special functions used by the closed-form detection probabilities.

Everything here is scalar, pure and double precision. Two primitives do the
real work:

``reg_upper_gamma``
    Regularized upper incomplete gamma Q(u, x) = Gamma(u, x) / Gamma(u),
    computed with the classic split: power series for the lower function
    when x < u + 1, Lentz-style continued fraction for the upper function
    otherwise. Both are evaluated in log space so large arguments neither
    overflow nor lose the leading digits.

``marcum_q``
    Generalized Marcum Q-function Q_u(a, b), the tail of a noncentral
    chi-square law with 2u degrees of freedom and noncentrality a**2,
    evaluated at b**2. It is summed as a Poisson mixture of central
    chi-square tails: the summation starts at the Poisson mode and expands
    outward in both directions with forward recurrences for the mixture
    weights and the regularized gamma terms. When b**2 / 2 exceeds the
    noncentrality-shifted mean u + a**2 / 2 the sum runs over the upper
    (tail) gamma terms directly; otherwise it accumulates the lower terms
    and returns the complement. Truncation error is bounded by the Poisson
    mass left outside the summed window, so the loop stops once that mass
    drops below ``TERM_TOLERANCE``.

``MAX_ITERATIONS`` bounds every iterative loop; exceeding it raises
:class:`ConvergenceError` rather than returning a silently wrong value.
"""

import math

__all__ = [
    "MAX_ITERATIONS",
    "TERM_TOLERANCE",
    "ConvergenceError",
    "log_gamma",
    "reg_lower_gamma",
    "reg_upper_gamma",
    "marcum_q",
]

# Iteration budget and term tolerance for all series / continued fractions.
MAX_ITERATIONS = 10_000
TERM_TOLERANCE = 1e-14


class ConvergenceError(RuntimeError):
    """A series or continued fraction failed to reach tolerance in budget."""


def _require_finite(name, value):
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for positive real x.

    Relative error is at the level of the platform ``lgamma`` (a few ulp,
    well inside 1e-12 on [0.5, 1e4]).
    """
    x = float(x)
    _require_finite("x", x)
    if x <= 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def _lower_series(order: float, x: float, log_prefactor: float) -> float:
    """Series for the regularized lower gamma, valid for x < order + 1.

    P(u, x) = x^u e^-x / Gamma(u+1) * sum_n x^n / ((u+1)(u+2)...(u+n)).
    """
    term = 1.0
    total = 1.0
    denom = order
    for _ in range(MAX_ITERATIONS):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * TERM_TOLERANCE:
            # prefactor uses Gamma(u+1) = u * Gamma(u)
            return math.exp(log_prefactor) * total / order
    raise ConvergenceError(
        f"lower gamma series did not converge for order={order}, x={x}"
    )


def _upper_continued_fraction(order: float, x: float, log_prefactor: float) -> float:
    """Modified Lentz continued fraction for the regularized upper gamma.

    Q(u, x) = x^u e^-x / Gamma(u) * CF,  valid for x >= order + 1.
    """
    tiny = 1e-300
    b = x + 1.0 - order
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, MAX_ITERATIONS + 1):
        an = -i * (i - order)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < TERM_TOLERANCE:
            return math.exp(log_prefactor) * h
    raise ConvergenceError(
        f"upper gamma continued fraction did not converge for order={order}, x={x}"
    )


def _reg_gamma_pair(order: float, x: float) -> tuple[float, float]:
    """Return (P, Q) = (regularized lower, regularized upper) at (order, x).

    The side that is computed directly is the numerically favourable one;
    the other is obtained by complementation.
    """
    if x == 0.0:
        return 0.0, 1.0
    log_pref = order * math.log(x) - x - math.lgamma(order)
    if log_pref < -745.0:
        # prefactor underflows: all the mass is on one side
        return (1.0, 0.0) if x > order else (0.0, 1.0)
    if x < order + 1.0:
        p = _lower_series(order, x, log_pref)
        return p, 1.0 - p
    q = _upper_continued_fraction(order, x, log_pref)
    return 1.0 - q, q


def _validate_gamma_args(order: float, x: float) -> tuple[float, float]:
    order = float(order)
    x = float(x)
    _require_finite("order", order)
    _require_finite("x", x)
    if order <= 0.0:
        raise ValueError(f"order must be > 0, got {order!r}")
    if x < 0.0:
        raise ValueError(f"x must be >= 0, got {x!r}")
    return order, x


def reg_lower_gamma(order: float, x: float) -> float:
    """Regularized lower incomplete gamma P(order, x) in [0, 1]."""
    order, x = _validate_gamma_args(order, x)
    p, _ = _reg_gamma_pair(order, x)
    return min(max(p, 0.0), 1.0)


def reg_upper_gamma(order: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(order, x) in [0, 1].

    Absolute error stays below 1e-10 across order <= 200, x <= 400 (checked
    against adaptive quadrature in the test suite).
    """
    order, x = _validate_gamma_args(order, x)
    _, q = _reg_gamma_pair(order, x)
    return min(max(q, 0.0), 1.0)


def marcum_q(order: float, a: float, b: float) -> float:
    """Generalized Marcum Q-function Q_order(a, b) in [0, 1].

    Equals the probability that the square root of a noncentral chi-square
    variate with 2*order degrees of freedom and noncentrality a**2 exceeds
    b. Supports any real order > 0; absolute error is below 1e-8 on the
    tested envelope (order <= 50, a, b <= 30).
    """
    order = float(order)
    a = float(a)
    b = float(b)
    _require_finite("order", order)
    _require_finite("a", a)
    _require_finite("b", b)
    if order <= 0.0:
        raise ValueError(f"order must be > 0, got {order!r}")
    if a < 0.0 or b < 0.0:
        raise ValueError(f"a and b must be >= 0, got a={a!r}, b={b!r}")

    if b == 0.0:
        return 1.0
    y = 0.5 * b * b
    if a == 0.0:
        # zero noncentrality: the mixture collapses to its central term
        return reg_upper_gamma(order, y)

    rate = 0.5 * a * a  # Poisson mixing rate
    mode = int(rate)
    log_weight = -rate - math.lgamma(mode + 1)
    if mode > 0:
        log_weight += mode * math.log(rate)
    weight_mode = math.exp(log_weight)

    tail_side = y > order + rate  # sum the small (upper) side directly
    p_mode, q_mode = _reg_gamma_pair(order + mode, y)
    g_mode = q_mode if tail_side else p_mode
    # D_j = y^(order+j) e^-y / Gamma(order+j+1), the recurrence increment
    log_d = (order + mode) * math.log(y) - y - math.lgamma(order + mode + 1.0)
    d_mode = math.exp(log_d) if log_d > -745.0 else 0.0

    total = weight_mode * g_mode
    mass = weight_mode

    # Expand outward from the mode, one step up and one step down per
    # iteration. The Poisson mass outside the summed window bounds the
    # truncation error; the mixture weights decay monotonically away from
    # the mode, so a march is also finished once its weight underflows the
    # term tolerance (floating drift can leave the accumulated mass a few
    # ulp short of 1, which must not count as non-convergence).
    w_up, g_up, d_up, j_up = weight_mode, g_mode, d_mode, mode
    w_dn, g_dn, d_dn, j_dn = weight_mode, g_mode, d_mode, mode
    up_active = True
    dn_active = mode > 0
    for _ in range(MAX_ITERATIONS):
        if 1.0 - mass < TERM_TOLERANCE or not (up_active or dn_active):
            break
        if up_active:
            g_up = g_up + d_up if tail_side else g_up - d_up
            g_up = min(max(g_up, 0.0), 1.0)
            d_up *= y / (order + j_up + 1.0)
            w_up *= rate / (j_up + 1.0)
            j_up += 1
            total += w_up * g_up
            mass += w_up
            if w_up < TERM_TOLERANCE:
                up_active = False
        if dn_active:
            d_dn *= (order + j_dn) / y
            g_dn = g_dn - d_dn if tail_side else g_dn + d_dn
            g_dn = min(max(g_dn, 0.0), 1.0)
            w_dn *= j_dn / rate
            j_dn -= 1
            total += w_dn * g_dn
            mass += w_dn
            if w_dn < TERM_TOLERANCE or j_dn == 0:
                dn_active = False
    else:
        raise ConvergenceError(
            f"marcum_q did not converge for order={order}, a={a}, b={b}"
        )

    result = total if tail_side else 1.0 - total
    return min(max(result, 0.0), 1.0)
