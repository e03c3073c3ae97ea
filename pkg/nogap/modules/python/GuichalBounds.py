import math
from dataclasses import dataclass, field
from fractions import Fraction

from nogap.modules.python.Options import TruncationOptions
from nogap.modules.python.Exceptions import InvalidParameters, DegenerateWindow, InfeasibleFit
from nogap.modules.python.MpNumerics import resolve_precision, to_mp, extended_context, integrate
from nogap.modules.python.SequenceCore import exact_number, condensation_product, empirical_delta
from nogap.modules.python.GramBiorthogonal import converge_truncation, build_gram
from nogap.modules.python.TextColor import TextColor
"""
Explicit bounds on the norms of biorthogonal families.

  1) CONSTANTS:
    - H1, H2, H3 of the upper bound and of the interpolation estimate, in their real and complex variants.
  2) LOWER BOUNDS:
    - B_k, E_k and D_k with exact factorials, the combined bound max{(6/pi^2) B_k e^{1/(T nu)}, E_k} P_k, valid for
      any biorthogonal family when k >= 3, and the per-M distance bound behind it.
    - Bounds are certified against the truncated norms ||s_k^{(M)}||, which never exceed ||s_k||, and E_k P_k is
      checked at every order M >= k + q.
    - Guichal coefficients A_n, the window coefficients of the second construction and the two elementary
      estimates (power integral, exponential tail) used along the way.
  3) UPPER FORM:
    - H1 exp[C (1 + H2 sqrt|Lambda_k| + (1 + p2)^2/T)] P_k with C fitted from observed norms.
"""

_LABEL_CERTIFIED = 'plateau-certified'
_LABEL_RAW = 'formula-only'
_CERTIFICATE_HOLDS = 'holds'
_CERTIFICATE_INCONCLUSIVE = 'inconclusive'
_CERTIFICATE_VIOLATED = 'violated'


def _values(ctx, *values):
    # all exact or all extended, Fractions never meet mpf
    exact = [exact_number(value) for value in values]
    if all(value is not None for value in exact):
        return exact
    return [to_mp(ctx, value) for value in values]


def h1_constant(params, real=True):
    """
    ((1 + rho p2^2 [+ q^2]) / (rho^2 p1^4))^{2q - 2}, the q^2 term only for complex sequences. Equals 1 for q = 1.
    """
    ctx = resolve_precision(None).ctx
    rho, p1, p2 = _values(ctx, params.rho, params.p1, params.p2)
    q = params.q
    numerator = 1 + rho * p2 * p2 + (0 if real else q * q)
    return (numerator / (rho * rho * p1 ** 4)) ** (2 * q - 2)


def h2_constant(params, T, real=True):
    """
    1 + q + sqrt(T) + (1 [+ q]) / (rho^2 p1^2) + p2.
    """
    ctx = resolve_precision(None).ctx
    rho, p1, p2 = (to_mp(ctx, v) for v in (params.rho, params.p1, params.p2))
    q = params.q
    return 1 + q + ctx.sqrt(to_mp(ctx, T)) + (1 if real else 1 + q) / (rho * rho * p1 * p1) + p2


def h3_constant(params, real=True):
    """
    1 + q + (1 [+ q]) / (rho^2 p1^2) + p2.
    """
    ctx = resolve_precision(None).ctx
    rho, p1, p2 = _values(ctx, params.rho, params.p1, params.p2)
    q = params.q
    return 1 + q + (1 if real else 1 + q) / (rho * rho * p1 * p1) + p2


def _rooted(ctx, delta, lam1_abs, T):
    return ctx.sqrt(to_mp(ctx, delta) * to_mp(ctx, lam1_abs) + 1 / (2 * to_mp(ctx, T)))


def b_constant(k, q, nu, delta, lam1_abs, T, precision=None):
    """
    B_k, with the branch k < q and k >= q.
    """
    precision = resolve_precision(precision)
    work = extended_context(precision.ctx)
    nu, T = to_mp(work, nu), to_mp(work, T)
    nu_t = nu * T
    decay = nu_t ** (k + 1) / (1 + nu_t) ** (2 * k + q + 1)
    # (2k + q - 1)! / (2k + q + 1)!
    ratio = Fraction(1, (2 * k + q) * (2 * k + q + 1))
    if k < q:
        factorials = Fraction(math.factorial(q - 1) * math.factorial(k + q), math.factorial(q + 3))
        power = nu ** (k + q - 2)
    else:
        factorials = Fraction(math.factorial(q - 1) ** 2 * math.factorial(k + q) * k,
                              math.factorial(q + 3) * math.factorial(2 * k - q))
        power = nu ** (2 * (q - 1))
    value = power * to_mp(work, factorials * ratio) * decay * _rooted(work, delta, lam1_abs, T)
    return to_mp(precision.ctx, value)


def e_constant(k, q, delta, lam1_abs, lam_shift_abs, T, precision=None):
    """
    E_k: (k + q - 2)!/T^{k+q-2} sqrt((2(k+q) - 3)/(2T) + delta |Lambda_1|) for k < q and
    (2q - 2)!/T^{2(q-1)} sqrt((4q - 3)/(2T) + delta |Lambda_{k+1-q}|) otherwise.
    """
    ctx = resolve_precision(precision).ctx
    T, delta = to_mp(ctx, T), to_mp(ctx, delta)
    if k < q:
        order = k + q - 2
        return math.factorial(order) / T ** order * ctx.sqrt((2 * (k + q) - 3) / (2 * T) + delta * to_mp(ctx, lam1_abs))
    order = 2 * (q - 1)
    return math.factorial(order) / T ** order * ctx.sqrt((4 * q - 3) / (2 * T) + delta * to_mp(ctx, lam_shift_abs))


def distance_factor_D(k, q, nu, delta, seq, T, precision=None):
    """
    D_k including the factor P_k, with the branches k <= q and k >= q (equal at k = q).
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    nu = to_mp(ctx, nu)
    lam1_abs = abs(seq.term(1, precision))
    if k <= q:
        factorials = math.factorial(q - 1) * math.factorial(2 * k + q - 1)
        power = nu ** (k + q - 2)
    else:
        factorials = Fraction(math.factorial(q - 1) ** 2 * k * math.factorial(2 * k + q - 1), math.factorial(2 * k - q))
        power = nu ** (2 * (q - 1))
    rooted = _rooted(ctx, delta, lam1_abs, T)
    return power * to_mp(ctx, factorials) * rooted * condensation_product(seq, k, q, precision)


def resolve_delta(params, seq, precision=None):
    # the sector constant of the class, or its empirical value on the default prefix
    if params.delta_empirical:
        return empirical_delta(seq, precision=precision)
    return params.delta


def guichal_distance_bound(k, M, params, seq, T, precision=None):
    """
    Upper bound of the distance from e_k to the span of the other exponentials among e_1..e_{M+1}:
    D_k^{-1} (q + 3)!/(k + q)! (M + k + 1)!/(M + 1 - k - q)^2 (nu T)^M, for M >= k + q.
    """
    q = params.q
    if M < k + q:
        raise InvalidParameters("NEED M >= k + q", k=k, M=M, q=q)
    precision = resolve_precision(precision)
    work = extended_context(precision.ctx)
    d = distance_factor_D(k, q, params.nu, resolve_delta(params, seq, precision), seq, T, precision)
    factorials = Fraction(math.factorial(q + 3) * math.factorial(M + k + 1),
                          math.factorial(k + q) * (M + 1 - k - q) ** 2)
    value = to_mp(work, factorials) * (to_mp(work, params.nu) * to_mp(work, T)) ** M / to_mp(work, d)
    return to_mp(precision.ctx, value)


@dataclass(frozen=True)
class DistanceCheck:
    k: int
    M: int
    distance: object
    bound: object

    @property
    def holds(self):
        return self.distance <= self.bound


def check_guichal_distances(seq, params, k, T, Ms, precision=None):
    """
    Compare the distance of e_k to the other exponentials of e_1..e_{M+1}, from the Gram matrix, with the
    per-M bound.
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    checks = []
    for M in Ms:
        inverse_diag = build_gram(seq, M + 1, T, precision).inverse_diag
        checks.append(DistanceCheck(k, M, 1 / ctx.sqrt(inverse_diag[k - 1]),
                                    guichal_distance_bound(k, M, params, seq, T, precision)))
    return checks


@dataclass(frozen=True)
class LowerBounds:
    k: int
    B: object
    E: object
    P: object
    combined: object
    # the lower bound is only established for k >= 3
    certified_index: bool
    # branch of the max reached, B or E
    dominant: str = 'E'


def evaluate_lower_bounds(k, q, nu, delta, seq, T, precision=None):
    """
    B_k, E_k and max{(6/pi^2) B_k exp(1/(T nu)), E_k} P_k.
    :return: LowerBounds
    """
    if k < 1 or q < 1:
        raise InvalidParameters("k AND q MUST BE POSITIVE", k=k, q=q)
    precision = resolve_precision(precision)
    ctx = precision.ctx
    lam1_abs = abs(seq.term(1, precision))
    shift_abs = abs(seq.term(k + 1 - q, precision)) if k >= q else lam1_abs
    b = b_constant(k, q, nu, delta, lam1_abs, T, precision)
    e = e_constant(k, q, delta, lam1_abs, shift_abs, T, precision)
    p = condensation_product(seq, k, q, precision)
    first = 6 / ctx.pi ** 2 * b * ctx.exp(1 / (to_mp(ctx, T) * to_mp(ctx, nu)))
    return LowerBounds(k, b, e, p, max(first, e) * p, k >= 3, 'B' if first > e else 'E')


def evaluate_upper_form(params, lam_k_abs, T, P_k, C, real_sequence=True):
    """
    H1 exp[C (1 + H2 sqrt|Lambda_k| + (1 + p2)^2/T)] P_k.
    """
    ctx = resolve_precision(None).ctx
    exponent = _envelope(params, lam_k_abs, T, real_sequence)
    return to_mp(ctx, h1_constant(params, real_sequence)) * ctx.exp(to_mp(ctx, C) * exponent) * to_mp(ctx, P_k)


def _envelope(params, lam_k_abs, T, real_sequence):
    ctx = resolve_precision(None).ctx
    T = to_mp(ctx, T)
    p2 = to_mp(ctx, params.p2)
    return 1 + h2_constant(params, T, real_sequence) * ctx.sqrt(to_mp(ctx, lam_k_abs)) + (1 + p2) ** 2 / T


@dataclass(frozen=True)
class Observation:
    k: int
    T: object
    norm: object
    P_k: object
    lam_abs: object


@dataclass(frozen=True)
class ConstantFit:
    constant: object
    slack: list
    observations: int
    times: int


def fit_constant_C(observed, params, real_sequence=True):
    """
    Smallest C with log(norm / (H1 P_k)) <= C (1 + H2 sqrt|Lambda_k| + (1 + p2)^2/T) over all observations.
    :param observed: Observation list
    :return: ConstantFit with the slack of every point
    """
    ctx = resolve_precision(None).ctx
    if not observed:
        raise InfeasibleFit("NO OBSERVATIONS")
    times = len({str(item.T) for item in observed})
    if len(observed) < 10 or times < 2:
        TextColor.warn("CONSTANT FIT ON {} POINTS AND {} HORIZONS IS WEAK".format(len(observed), times))
    h1 = to_mp(ctx, h1_constant(params, real_sequence))
    ratios = []
    for item in observed:
        scaled = to_mp(ctx, item.norm) / (h1 * to_mp(ctx, item.P_k))
        if not scaled > 0:
            raise InfeasibleFit("NORMALIZED NORM IS NOT POSITIVE", k=item.k, T=item.T)
        ratios.append((ctx.log(scaled), _envelope(params, item.lam_abs, item.T, real_sequence)))
    constant = max(logged / envelope for logged, envelope in ratios)
    slack = [constant * envelope - logged for logged, envelope in ratios]
    return ConstantFit(constant, slack, len(observed), times)


@dataclass(frozen=True)
class GuichalCoefficients:
    values: list
    exact: bool
    moment_residual: object

    @property
    def M(self):
        return len(self.values) - 1


def _coefficients(points, exact, ctx, label):
    values = []
    for n, point in enumerate(points):
        product = Fraction(1) if exact else ctx.one
        for i, other in enumerate(points):
            if i == n:
                continue
            gap = other - point
            if gap == 0:
                raise DegenerateWindow(sequence=label, n=n + 1, i=i + 1)
            product *= gap
        values.append(1 / product)
    return values


def _terms(seq, indices, precision):
    exact = seq.is_exact and all(seq.exact_term(n).im == 0 for n in indices)
    if exact:
        return [seq.exact_term(n).re for n in indices], True
    return [seq.term(n, precision) for n in indices], False


def _moment_residual(values, points, exact, ctx):
    # f1^{(j)}(0) = sum_n A_n (-Lambda_n)^j must vanish for j < M and equal 1 for j = M
    M = len(values) - 1
    worst = Fraction(0) if exact else ctx.zero
    for j in range(M + 1):
        terms = [a * (-p) ** j for a, p in zip(values, points)]
        total = sum(terms) if exact else ctx.fsum(terms)
        deviation = abs(total - (1 if j == M else 0))
        if not exact:
            deviation /= 1 + ctx.fsum(abs(term) for term in terms)
        worst = max(worst, deviation)
    return worst


def guichal_coefficients(seq, count, precision=None):
    """
    A_n = 1 / prod_{i != n} (Lambda_i - Lambda_n), n = 1..count, exact for rational real sequences.
    :return: GuichalCoefficients with the largest (relative) moment deviation
    """
    if count < 1:
        raise InvalidParameters("COUNT MUST BE POSITIVE", count=count)
    precision = resolve_precision(precision)
    ctx = precision.ctx
    points, exact = _terms(seq, range(1, count + 1), precision)
    values = _coefficients(points, exact, ctx, seq.label)
    return GuichalCoefficients(values, exact, _moment_residual(values, points, exact, ctx))


def guichal_function(seq, coefficients, t, precision=None):
    """
    f1(t) = sum_n A_n exp(-Lambda_n t).
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    t = to_mp(ctx, t)
    return ctx.fsum(to_mp(ctx, a) * ctx.exp(-seq.term(n, precision) * t)
                    for n, a in enumerate(coefficients.values, start=1))


@dataclass(frozen=True)
class WindowCoefficients:
    indices: list
    values: list
    exact: bool

    def at(self, n):
        return self.values[self.indices.index(n)]


def window_coefficients(seq, k, q, precision=None):
    """
    A~_n = 1 / prod_{i != n, |k - i| < q} (Lambda_i - Lambda_n) over the window |k - n| < q, so |A~_k| = P_k.
    """
    if k < 1 or q < 1:
        raise InvalidParameters("k AND q MUST BE POSITIVE", k=k, q=q)
    precision = resolve_precision(precision)
    ctx = precision.ctx
    last = k + q - 1 if seq.length is None else min(k + q - 1, seq.length)
    indices = list(range(max(1, k - q + 1), last + 1))
    points, exact = _terms(seq, indices, precision)
    return WindowCoefficients(indices, _coefficients(points, exact, ctx, seq.label), exact)


def power_integral_bound(N, lam, T):
    """
    2 T^{N+1} / (N + 1 + lam T), an upper bound of int_0^T t^N exp(-lam t) dt.
    """
    ctx = resolve_precision(None).ctx
    lam, T = to_mp(ctx, lam), to_mp(ctx, T)
    return 2 * T ** (N + 1) / (N + 1 + lam * T)


def check_power_integral(N, lam, T, precision=None):
    """
    :return: (integral by quadrature, bound)
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    lam_mp = to_mp(ctx, lam)
    estimate = integrate(lambda t: t ** N * ctx.exp(-lam_mp * t), 0, T, precision=precision)
    return estimate.value, power_integral_bound(N, lam, T)


def exponential_tail_bound(N, x):
    """
    (x/(1 + x))^N e^x / N!, a lower bound of sum_{n >= N} x^n/n!.
    """
    ctx = resolve_precision(None).ctx
    x = to_mp(ctx, x)
    return (x / (1 + x)) ** N * ctx.exp(x) / math.factorial(N)


def check_exponential_tail(N, x, precision=None):
    """
    :return: (sum_{n >= N} x^n/n!, bound); the finite part is summed exactly for rational x
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    exact = exact_number(x)
    if exact is None:
        exact = Fraction(repr(float(x)))
    head = sum(exact ** n / math.factorial(n) for n in range(N))
    tail = ctx.exp(to_mp(ctx, exact)) - to_mp(ctx, head)
    return tail, exponential_tail_bound(N, exact)


@dataclass(frozen=True)
class DividedDifferenceCheck:
    value: object
    lower: object
    upper: object
    real: bool

    @property
    def holds(self):
        magnitude = abs(self.value)
        if self.real:
            return self.lower <= magnitude <= self.upper
        return magnitude <= self.upper


def divided_difference_check(points, t, precision=None):
    """
    sum_n g(a_n) / prod_{i != n} (a_n - a_i) for g(z) = exp(-tz) against t^r exp(-t Re xi)/r! over the convex
    hull of the points, r + 1 = number of points.
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    points = [to_mp(ctx, p) for p in points]
    if len(points) < 2:
        raise InvalidParameters("NEED AT LEAST TWO POINTS", points=len(points))
    t = to_mp(ctx, t)
    r = len(points) - 1
    total = ctx.zero
    for n, a in enumerate(points):
        product = ctx.fprod(a - other for i, other in enumerate(points) if i != n)
        if product == 0:
            raise DegenerateWindow(n=n + 1)
        total += ctx.exp(-t * a) / product
    real_parts = [ctx.re(p) for p in points]
    scale = t ** r / math.factorial(r)
    real = all(ctx.im(p) == 0 for p in points)
    slack = 1 + precision.tolerance
    return DividedDifferenceCheck(total, scale * ctx.exp(-t * max(real_parts)) / slack,
                                  scale * ctx.exp(-t * min(real_parts)) * slack, real)


def certificate_status(lower, truncated_norm, estimated_norm=None):
    """
    ||s_k^{(M)}|| is a lower estimate of the norm of every biorthogonal family, so a lower bound below it
    holds. A bound that only the plateau estimate clears is inconclusive.
    :return: 'holds', 'inconclusive' or 'violated'
    """
    if lower <= truncated_norm:
        return _CERTIFICATE_HOLDS
    if estimated_norm is not None and lower <= estimated_norm:
        return _CERTIFICATE_INCONCLUSIVE
    return _CERTIFICATE_VIOLATED


@dataclass(frozen=True)
class OrderCheck:
    M: int
    truncated_norm: object
    bound: object

    @property
    def holds(self):
        return self.bound <= self.truncated_norm


def check_truncated_norms(seq, k, q, T, bound, history=(), precision=None):
    """
    bound <= ||s_k^{(M)}|| at M = k + q and at every order M >= k + q of a truncation history.
    :param bound: E_k P_k
    :param history: (M, ||s_k^{(M)}||, estimate) triples
    :return: list of OrderCheck ordered by M
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    start = k + q
    observed = {M: raw for M, raw, _ in history if M >= start}
    if start not in observed and (seq.length is None or start <= seq.length):
        observed[start] = ctx.sqrt(build_gram(seq, start, T, precision).inverse_diag[k - 1])
    return [OrderCheck(M, observed[M], bound) for M in sorted(observed)]


@dataclass
class BoundReport:
    k: int
    T: object
    P_k: object
    H1: object
    H2: object
    H3: object
    B_k: object
    E_k: object
    D_k: object
    lower: object
    dominant: str = 'E'
    # ||s_k^{(M_star)}||
    observed_norm: object = None
    # plateau estimate of ||s_k||
    estimated_norm: object = None
    truncation_method: str = None
    label: str = _LABEL_RAW
    M_star: int = None
    upper_at_C: object = None
    delta_empirical: bool = False
    per_order: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def lower_holds(self):
        if self.observed_norm is None:
            return None
        return self.lower <= self.observed_norm

    @property
    def certificate(self):
        if self.observed_norm is None:
            return None
        return certificate_status(self.lower, self.observed_norm, self.estimated_norm)

    @property
    def per_order_violations(self):
        return [check for check in self.per_order if not check.holds]

    @property
    def slack(self):
        if self.estimated_norm is None or self.upper_at_C is None:
            return None
        return self.upper_at_C / self.estimated_norm

    def to_row(self):
        return (self.k, str(self.T), str(self.lower), str(self.observed_norm), str(self.estimated_norm),
                str(self.upper_at_C), str(self.slack))

    def to_record(self):
        return {'k': self.k, 'T': str(self.T), 'P_k': str(self.P_k), 'H1': str(self.H1), 'H2': str(self.H2),
                'H3': str(self.H3), 'B_k': str(self.B_k), 'E_k': str(self.E_k), 'D_k': str(self.D_k),
                'lower': str(self.lower), 'dominant': self.dominant, 'observed_norm': str(self.observed_norm),
                'estimated_norm': str(self.estimated_norm), 'truncation_method': self.truncation_method,
                'label': self.label, 'M_star': self.M_star, 'upper_at_C': str(self.upper_at_C),
                'lower_holds': self.lower_holds, 'certificate': self.certificate,
                'per_order': [{'M': check.M, 'truncated_norm': str(check.truncated_norm), 'holds': check.holds}
                              for check in self.per_order],
                'delta': 'empirical' if self.delta_empirical else 'class', 'provenance': self.provenance}


BOUND_TABLE_HEADER = ('k', 'T', 'lower', 'observed', 'estimated', 'upper_form_at_C_fit', 'slack')


def bound_report(seq, params, k, T, observe=True, rtol=TruncationOptions.RTOL, precision=None,
                 m_max=TruncationOptions.M_MAX):
    """
    Every bound quantity of index k at horizon T. When observe is set the lower bound is compared with the
    truncated norm ||s_k^{(M_star)}|| at the plateau, the plateau estimate of ||s_k|| is kept next to it and
    E_k P_k is checked against every truncated norm of order M >= k + q. Only k >= 3 is labeled
    plateau-certified.
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    real = seq.is_real
    delta = resolve_delta(params, seq, precision)
    lower = evaluate_lower_bounds(k, params.q, params.nu, delta, seq, T, precision)
    report = BoundReport(k=k, T=to_mp(ctx, T), P_k=lower.P, H1=h1_constant(params, real),
                         H2=h2_constant(params, T, real), H3=h3_constant(params, real), B_k=lower.B, E_k=lower.E,
                         D_k=distance_factor_D(k, params.q, params.nu, delta, seq, T, precision),
                         lower=lower.combined, dominant=lower.dominant, delta_empirical=params.delta_empirical,
                         provenance={'precision_bits': precision.bits, 'rtol': rtol, 'M_max': m_max})
    if observe:
        result = converge_truncation(seq, k, T, rtol, precision, m_max=m_max)
        report.observed_norm = result.truncated_norm
        report.estimated_norm = result.norm
        report.truncation_method = result.method
        report.M_star = result.M_star
        report.per_order = check_truncated_norms(seq, k, params.q, T, lower.E * lower.P, result.history, precision)
        report.provenance.update(observed_norm=str(result.truncated_norm), estimated_norm=str(result.norm),
                                 truncation_method=result.method, plateau_precision_bits=result.precision_bits)
        if lower.certified_index:
            report.label = _LABEL_CERTIFIED
    return report


def bound_table(seq, params, ks, times, observe=True, rtol=TruncationOptions.RTOL, precision=None,
                m_max=TruncationOptions.M_MAX):
    """
    Bound reports over ks x times, with the upper form evaluated at the constant fitted from the plateau
    estimates of the norms.
    :return: (reports, ConstantFit or None)
    """
    reports = [bound_report(seq, params, k, T, observe, rtol, precision, m_max) for T in times for k in ks]
    fit = None
    if observe:
        observations = [Observation(r.k, r.T, r.estimated_norm, r.P_k, abs(seq.term(r.k, precision)))
                        for r in reports]
        fit = fit_constant_C(observations, params, seq.is_real)
        for report, item in zip(reports, observations):
            report.upper_at_C = evaluate_upper_form(params, item.lam_abs, report.T, report.P_k, fit.constant,
                                                    seq.is_real)
    return reports, fit
