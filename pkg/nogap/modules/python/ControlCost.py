import math
from dataclasses import dataclass, field

import numpy as np

from nogap.modules.python.Options import CostOptions, TruncationOptions
from nogap.modules.python.Exceptions import InvalidParameters, ZeroControlVector, ZeroPerturbation, GridInfeasible
from nogap.modules.python.MpNumerics import HermitianMatrix, resolve_precision, to_mp, composite_rule, \
    largest_eigenvalue
from nogap.modules.python.SequenceCore import condensation_product
from nogap.modules.python.ExampleSequences import gen_perturbed, gen_phase_field, perturbed_epsilons
from nogap.modules.python.GramBiorthogonal import GramBuilder, plateau_search
from nogap.modules.python.TextColor import TextColor
"""
Null controllability of parabolic systems through the moment method.

  1) MOMENT PROBLEM:
    - An initial state with eigen-coefficients c_k is driven to zero at time T by a boundary control u iff
      int_0^T u(T - t) exp(-Lambda_k t) dt = mu_k = exp(-Lambda_k T) m_k, m_k = -c_k/(b_k w_k) for every k,
      with b_k the control component acting on the family of mode k and w_k the boundary derivative of its
      eigenfunction.
  2) MINIMAL CONTROL:
    - u(T - t) = sum_k mu_k conj(s_k(t)) with {s_k} the minimal biorthogonal family, ||u||^2 = mu^H G^{-1} mu.
  3) CONTROL COST:
    - K_M(T) = sup over unit H^{-1} initial data of ||u||, the square root of the largest eigenvalue of
      D^H G^{-1} D with D = diag(exp(-Lambda_k T) sqrt|Lambda_k|/(b_k w_k)).
  4) SCALING:
    - Minimal time, probe modes and fitted exponents of log K(T) against 1/T and 1/T^{gamma/(1-gamma)}.
"""

WEIGHT_SURROGATE = 'w_k = sqrt(2/pi) * original mode index'


@dataclass
class ControlProblem:
    """
    Boundary control problem in spectral coordinates. weights may be None (the Laplacian surrogate), a list
    indexed by k or a callable k -> w_k; b holds one component per family of the sequence.
    """
    sequence: object
    T: object
    M: int = None
    b: tuple = (CostOptions.B1, CostOptions.B2)
    weights: object = None
    precision: object = None

    def __post_init__(self):
        self.precision = resolve_precision(self.precision)
        ctx = self.precision.ctx
        self.T = to_mp(ctx, self.T)
        if not self.T > 0:
            raise InvalidParameters("T MUST BE POSITIVE", T=self.T)
        if self.T < CostOptions.MIN_T_AT_DEFAULT_PRECISION and self.precision.bits < CostOptions.SMALL_T_BITS:
            raise InvalidParameters("SMALL HORIZONS NEED MORE PRECISION", T=ctx.nstr(self.T, 8),
                                    bits=self.precision.bits, required=CostOptions.SMALL_T_BITS)
        if self.M is not None and self.M < 1:
            raise InvalidParameters("TRUNCATION ORDER MUST BE POSITIVE", M=self.M)
        self.b = tuple(self.b)
        if not self.b:
            raise InvalidParameters("CONTROL VECTOR IS EMPTY")

    def control_component(self, k):
        position = self.sequence.origin(k)[0]
        value = self.b[min(position, len(self.b) - 1)]
        if value == 0:
            raise ZeroControlVector(k=k, component=min(position, len(self.b) - 1) + 1)
        return value

    def weight(self, k, precision=None):
        ctx = resolve_precision(precision or self.precision).ctx
        if self.weights is None:
            value = ctx.sqrt(2 / ctx.pi) * self.sequence.origin(k)[1]
        elif callable(self.weights):
            value = to_mp(ctx, self.weights(k))
        else:
            value = to_mp(ctx, self.weights[k - 1])
        if not value > 0:
            raise InvalidParameters("OBSERVATION WEIGHTS MUST BE POSITIVE", k=k, weight=value)
        return value

    def scaling(self, k, precision=None):
        """
        D_kk = exp(-Lambda_k T) sqrt|Lambda_k| / (b_k w_k), at the precision of the problem unless another is given.
        """
        precision = resolve_precision(precision or self.precision)
        ctx = precision.ctx
        lam = self.sequence.term(k, precision)
        return ctx.exp(-lam * to_mp(ctx, self.T)) * ctx.sqrt(abs(lam)) / (to_mp(ctx, self.control_component(k)) *
                                                                     self.weight(k, precision))


@dataclass
class MomentData:
    m: list
    mu: list
    y0_coefficients: list
    y0_norm: object

    @property
    def M(self):
        return len(self.m)


def moment_data(problem, y0_coefficients):
    """
    Right-hand sides of the moment problem for the initial state sum_k c_k phi_k.
    :param problem: ControlProblem
    :param y0_coefficients: c_1..c_M (shorter lists are padded with zeros up to problem.M)
    :return: MomentData
    """
    precision = problem.precision
    ctx = precision.ctx
    coefficients = [to_mp(ctx, value) for value in y0_coefficients]
    M = problem.M or len(coefficients)
    if len(coefficients) > M:
        raise InvalidParameters("MORE COEFFICIENTS THAN MODES", coefficients=len(coefficients), M=M)
    coefficients += [ctx.zero] * (M - len(coefficients))
    if any(not ctx.isfinite(value) for value in coefficients):
        raise InvalidParameters("INITIAL STATE COEFFICIENTS MUST BE FINITE")
    lams = problem.sequence.terms(M, precision)
    m, mu = [], []
    for k in range(1, M + 1):
        value = -coefficients[k - 1] / (to_mp(ctx, problem.control_component(k)) * problem.weight(k))
        m.append(value)
        mu.append(ctx.exp(-lams[k - 1] * problem.T) * value)
    norm = ctx.sqrt(ctx.fsum(abs(c) ** 2 / abs(lam) for c, lam in zip(coefficients, lams)))
    return MomentData(m, mu, coefficients, norm)


def moment_growth_constant(data):
    """
    max_k |m_k| / (k ||y0||), finite for the data of the systems considered here.
    """
    if not data.y0_norm > 0:
        raise InvalidParameters("INITIAL STATE IS ZERO")
    return max(abs(value) / (k * data.y0_norm) for k, value in enumerate(data.m, 1))


@dataclass
class NullControl:
    times: list
    values: list
    norm: object
    # a_n in u(T - t) = sum_n a_n conj(exp(-Lambda_n t))
    coefficients: list
    moment_residual: object
    quadrature_residual: object = None

    def to_rows(self):
        return [(str(t), str(value.real), str(value.imag)) for t, value in zip(self.times, self.values)]


def _terminal_coefficients(ctx, family, mu):
    # a = G^{-1} mu
    return [ctx.fdot(row, mu) for row in family.coefficients]


def solve_null_control(problem, data, family, samples=CostOptions.CONTROL_SAMPLES, verify=True):
    """
    Minimal-norm null control u(T - t) = sum_k mu_k conj(s_k(t)) sampled on [0, T].
    :param problem: ControlProblem
    :param data: MomentData
    :param family: MinimalFamily built for the same sequence, horizon and truncation
    :param samples: Number of equally spaced samples of u
    :param verify: Recompute every moment integral by quadrature
    :return: NullControl
    """
    if family.M != data.M:
        raise InvalidParameters("FAMILY AND MOMENT DATA TRUNCATIONS DIFFER", family=family.M, data=data.M)
    precision = family.precision
    ctx = precision.ctx
    mu = [to_mp(ctx, value) for value in data.mu]
    a = _terminal_coefficients(ctx, family, mu)
    norm_squared = ctx.re(ctx.fdot(mu, a, conjugate=True))
    gram = GramBuilder(family.sequence, family.T, precision).matrix(family.M)
    residual = max(abs(value - target) for value, target in zip(gram.matvec(a), mu))
    exponents = [ctx.conj(lam) for lam in family.exponents]

    def terminal(t):
        return ctx.fsum(c * ctx.exp(-lam * t) for c, lam in zip(a, exponents))

    times = [family.T * i / (samples - 1) for i in range(samples)] if samples > 1 else [ctx.zero]
    values = [ctx.mpc(terminal(family.T - t)) for t in times]
    control = NullControl(times, values, ctx.sqrt(max(norm_squared, ctx.zero)), a, residual)
    if verify:
        xs, ws = composite_rule(0, family.T, TruncationOptions.RESIDUAL_PANELS, TruncationOptions.RESIDUAL_NODES,
                                precision)
        sampled = [w * terminal(x) for x, w in zip(xs, ws)]
        worst = ctx.zero
        for lam, target in zip(family.exponents, mu):
            worst = max(worst, abs(ctx.fdot(sampled, [ctx.exp(-lam * x) for x in xs]) - target))
        control.quadrature_residual = worst
    return control


@dataclass
class CostEstimate:
    T: object
    value: object
    M_star: int
    history: list = field(default_factory=list)
    residual: object = None
    iterations: int = 0
    method: str = 'power'
    precision_bits: int = None
    complete: bool = False
    # how the value at M_star was obtained: 'exact', 'tail-completed', 'extrapolated' or 'fixed'
    truncation: str = 'exact'

    def to_row(self):
        return (str(self.T), str(self.value), self.M_star, self.precision_bits)


def cost_measure(problem):
    """
    matrix -> (sqrt(lambda_max(D^H matrix^{-1} D)), EigenEstimate) for a Gram-like matrix of the modes 1..M of
    the problem, evaluated at the precision of the matrix.
    """
    def measure(matrix):
        precision = matrix.precision
        ctx = precision.ctx
        inverse = matrix.factorize().inverse()
        scaling = [problem.scaling(k, precision) for k in range(1, matrix.order + 1)]
        product = HermitianMatrix.from_function(matrix.order,
                                                lambda i, j: ctx.conj(scaling[i]) * inverse[i][j] * scaling[j],
                                                precision)
        estimate = largest_eigenvalue(product)
        return ctx.sqrt(max(estimate.value, ctx.zero)), estimate
    return measure


def truncated_cost(problem, M, builder=None):
    """
    K_M(T) for a fixed truncation.
    :return: (value, EigenEstimate)
    """
    builder = builder or GramBuilder(problem.sequence, problem.T, problem.precision)
    return cost_measure(problem)(builder.matrix(M))


def control_cost(problem, rtol=TruncationOptions.RTOL, m_step=TruncationOptions.M_STEP,
                 m_max=TruncationOptions.M_MAX):
    """
    K(T) at the plateau in M, with the same tail completion, cluster-aligned orders and precision doubling as
    the norm truncation, or K_M(T) at problem.M when the truncation is fixed.
    :param problem: ControlProblem
    :param rtol: Relative plateau tolerance, shared with the norm truncation
    :return: CostEstimate
    :raises NoPlateau: when no plateau is reached up to m_max
    """
    precision = problem.precision
    seq = problem.sequence
    if problem.M is not None:
        value, estimate = truncated_cost(problem, problem.M)
        complete = seq.length is not None and problem.M >= seq.length
        return CostEstimate(problem.T, value, problem.M, [(problem.M, value, value)], estimate.residual,
                            estimate.iterations, estimate.method, precision.bits, complete,
                            'exact' if complete else 'fixed')
    result = plateau_search(seq, problem.T, cost_measure(problem), rtol, precision, m_step, m_max, quantity='cost')
    for (M, previous, _), (_, raw, _) in zip(result.history, result.history[1:]):
        if raw < previous * (1 - rtol):
            TextColor.warn("COST DECREASED WITH THE TRUNCATION ORDER AFTER M={}".format(M))
    estimate = result.detail
    return CostEstimate(problem.T, result.value, result.M_star, result.history, estimate.residual,
                        estimate.iterations, estimate.method, result.precision.bits, result.complete, result.method)


@dataclass(frozen=True)
class MinimalTimeEstimate:
    value: float
    # tail suprema over the dyadic blocks (n/2, n]
    block_suprema: list
    converged: bool
    diverging: bool
    terms: int


def minimal_time(epsilons, tolerance=1e-2):
    """
    limsup_k (-log|eps_k|)/k^2 from a finite prefix. Suprema over dyadic blocks are extrapolated with Aitken's
    delta-squared; growing blocks whose increments do not contract are reported as an infinite minimal time.
    :param epsilons: eps_1, eps_2, ... (at least 16 values)
    :return: MinimalTimeEstimate
    """
    ctx = resolve_precision(None).ctx
    values = [to_mp(ctx, value) for value in epsilons]
    for k, value in enumerate(values, 1):
        if value == 0:
            raise ZeroPerturbation(k=k)
    n = len(values)
    if n < 16:
        raise InvalidParameters("NEED AT LEAST 16 PERTURBATIONS", count=n)
    ratios = [float(-ctx.log(abs(value)) / (k * k)) for k, value in enumerate(values, 1)]
    ends = [n // 8, n // 4, n // 2, n]
    suprema = [max(ratios[end // 2:end]) for end in ends]
    steps = [b - a for a, b in zip(suprema, suprema[1:])]
    # increments below this are rounding noise of a constant sequence
    noise = 1e-9 * max(1.0, abs(suprema[-1]))
    growing = all(step > noise for step in steps)
    if growing and (steps[-1] >= steps[-2] or
                    (suprema[-2] > 0 and suprema[-1] / suprema[-2] >= CostOptions.DIVERGENCE_RATIO)):
        return MinimalTimeEstimate(math.inf, suprema, False, True, n)
    if abs(steps[-1]) <= noise or abs(steps[-1] - steps[-2]) <= noise:
        value = suprema[-1]
    else:
        value = suprema[-1] - steps[-1] ** 2 / (steps[-1] - steps[-2])
    converged = abs(value - suprema[-1]) <= tolerance * max(1.0, abs(value))
    return MinimalTimeEstimate(value, suprema, converged, False, n)


def perturbed_minimal_time_estimate(gamma, terms=CostOptions.MINIMAL_TIME_TERMS):
    return minimal_time(perturbed_epsilons(gamma, terms))


@dataclass(frozen=True)
class ProbeMode:
    gamma: float
    T: float
    x_tilde: object
    k_low: object
    k_high: object
    k0: int
    # -k0^2 T + k0^{2 gamma} and its lower bound (1 + log 2)/(2e) (1 - gamma)/T^{gamma/(1-gamma)}
    value: object
    bound: object
    admissible: bool

    @property
    def holds(self):
        return self.value >= self.bound


def probe_threshold(gamma):
    """
    gamma ((sqrt 2 - 1)/sqrt 2)^{2 (1 - gamma)}, the largest horizon with a probe mode.
    """
    return gamma * ((math.sqrt(2) - 1) / math.sqrt(2)) ** (2 * (1 - gamma))


def _check_gamma(gamma):
    gamma = float(gamma)
    if not 0 < gamma < 1:
        raise InvalidParameters("gamma MUST LIE IN (0, 1)", gamma=gamma)
    return gamma


def probe_mode(gamma, T, precision=None):
    """
    x~ = (gamma/T)^{1/(1-gamma)} and the largest integer k0 in [sqrt(x~/2), sqrt(x~)], the mode that drives the
    lower cost bound. Raises GridInfeasible when T is not below the probe threshold.
    :return: ProbeMode
    """
    gamma = _check_gamma(gamma)
    T = float(T)
    if not 0 < T < probe_threshold(gamma):
        raise GridInfeasible(gamma=gamma, T=T, threshold=probe_threshold(gamma))
    precision = resolve_precision(precision)
    ctx = precision.ctx
    g, t = ctx.mpf(repr(gamma)), ctx.mpf(repr(T))
    x_tilde = (g / t) ** (1 / (1 - g))
    k_low, k_high = ctx.sqrt(x_tilde / 2), ctx.sqrt(x_tilde)
    k0 = int(ctx.floor(k_high))
    # sqrt(x~) lands just under an integer when gamma/T is only approximately representable
    if abs(k_high - (k0 + 1)) < precision.tolerance * k_high:
        k0 += 1
    value = -k0 * k0 * t + ctx.power(k0, 2 * g)
    bound = (1 + ctx.log(2)) / (2 * ctx.e) * (1 - g) / t ** (g / (1 - g))
    return ProbeMode(gamma, T, x_tilde, k_low, k_high, k0, value, bound, k0 >= k_low)


def perturbed_upper_form(C, gamma, T):
    """
    exp[C (1 + 1/T) + C/((1 - gamma) T) + (1 - gamma)/T^{gamma/(1-gamma)}].
    """
    gamma = _check_gamma(gamma)
    ctx = resolve_precision(None).ctx
    C, g, t = to_mp(ctx, C), ctx.mpf(gamma), to_mp(ctx, T)
    return ctx.exp(C * (1 + 1 / t) + C / ((1 - g) * t) + (1 - g) / t ** (g / (1 - g)))


def perturbed_lower_form(C, gamma, T):
    """
    C exp(C/T + C (1 - gamma)/T^{gamma/(1-gamma)}).
    """
    gamma = _check_gamma(gamma)
    ctx = resolve_precision(None).ctx
    C, g, t = to_mp(ctx, C), ctx.mpf(gamma), to_mp(ctx, T)
    return C * ctx.exp(C / t + C * (1 - g) / t ** (g / (1 - g)))


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    abscissa: str

    def to_record(self):
        return {'slope': self.slope, 'intercept': self.intercept, 'abscissa': self.abscissa}


def _linear_fit(xs, ys, abscissa):
    if len(xs) < 2:
        return None
    slope, intercept = np.polyfit(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), 1)
    return LinearFit(float(slope), float(intercept), abscissa)


@dataclass
class CostReport:
    label: str
    times: list
    estimates: list
    gamma: float = None
    fits: dict = field(default_factory=dict)
    probes: list = field(default_factory=list)
    minimal_time: object = None
    # min and max of T log K(T) over the grid
    band: tuple = None
    provenance: dict = field(default_factory=dict)

    @property
    def values(self):
        return [estimate.value for estimate in self.estimates]

    def log_values(self):
        ctx = resolve_precision(self.provenance.get('precision_bits')).ctx
        return [float(ctx.log(value)) for value in self.values]

    def to_rows(self):
        return [estimate.to_row() for estimate in self.estimates]

    def plot_pairs(self, abscissa='inverse_T'):
        """
        (x, log K) pairs against 1/T or 1/T^{gamma/(1-gamma)}.
        """
        logs = self.log_values()
        if abscissa == 'inverse_T':
            xs = [1 / float(T) for T in self.times]
        elif abscissa == 'inverse_T_power':
            if self.gamma is None:
                raise InvalidParameters("POWER ABSCISSA NEEDS gamma", label=self.label)
            xs = [float(T) ** (-self.gamma / (1 - self.gamma)) for T in self.times]
        else:
            raise InvalidParameters("UNKNOWN ABSCISSA", abscissa=abscissa)
        return list(zip(xs, logs))

    def to_record(self):
        return {'label': self.label, 'gamma': self.gamma,
                'T': [str(T) for T in self.times],
                'K': [str(value) for value in self.values],
                'M_star': [estimate.M_star for estimate in self.estimates],
                'fits': {name: fit.to_record() for name, fit in self.fits.items() if fit is not None},
                'probes': [{'T': probe.T, 'k0': probe.k0, 'x_tilde': str(probe.x_tilde), 'holds': probe.holds}
                           for probe in self.probes],
                'minimal_time': self.minimal_time,
                'band': list(self.band) if self.band else None,
                'provenance': self.provenance}


COST_TABLE_HEADER = ('T', 'K', 'M_star', 'precision_bits')


def _cost_grid(seq, T_grid, precision, rtol, b, weights, m_max):
    estimates = []
    for T in T_grid:
        problem = ControlProblem(seq, T, b=b, weights=weights, precision=precision)
        estimate = control_cost(problem, rtol, m_max=m_max)
        TextColor.info("T={} K={} M*={}".format(T, problem.precision.nstr(estimate.value, 12), estimate.M_star))
        estimates.append(estimate)
    return estimates


def _check_grid(T_grid):
    T_grid = [float(T) for T in T_grid]
    if not T_grid:
        raise InvalidParameters("TIME GRID IS EMPTY")
    if any(not T > 0 for T in T_grid):
        raise InvalidParameters("HORIZONS MUST BE POSITIVE", T_grid=T_grid)
    return sorted(T_grid)


def _provenance(precision, rtol, b, weights, **extra):
    provenance = {'precision_bits': precision.bits, 'rtol': rtol, 'b': [str(value) for value in b],
                  'weights': WEIGHT_SURROGATE if weights is None else 'custom'}
    provenance.update(extra)
    return provenance


def cost_scaling_experiment(gamma, T_grid=CostOptions.T_GRID, precision=None, rtol=TruncationOptions.RTOL,
                            require_probes=False, b=(CostOptions.B1, CostOptions.B2), weights=None,
                            m_max=TruncationOptions.M_MAX):
    """
    K(T) of the perturbed system over T_grid with the affine fits of log K against 1/T and 1/T^{gamma/(1-gamma)}
    and the probe mode of every admissible horizon.
    :param gamma: Exponent of the perturbation exp(-k^{2 gamma}), in (0, 1)
    :param require_probes: Raise GridInfeasible for horizons without a probe mode
    :return: CostReport
    """
    gamma = _check_gamma(gamma)
    T_grid = _check_grid(T_grid)
    precision = resolve_precision(precision)
    probes = []
    for T in T_grid:
        try:
            probes.append(probe_mode(gamma, T, precision))
        except GridInfeasible:
            if require_probes:
                raise
    seq = gen_perturbed(gamma)
    estimates = _cost_grid(seq, T_grid, precision, rtol, b, weights, m_max)
    report = CostReport(seq.label, T_grid, estimates, gamma=gamma, probes=probes,
                        minimal_time=seq.metadata['minimal_time'],
                        provenance=_provenance(precision, rtol, b, weights))
    report.fits['inverse_T'] = _linear_fit(*zip(*report.plot_pairs('inverse_T')), 'inverse_T')
    report.fits['inverse_T_power'] = _linear_fit(*zip(*report.plot_pairs('inverse_T_power')), 'inverse_T_power')
    return report


def cost_ratios(first, second):
    """
    K_second(T)/K_first(T) on the common horizons of two reports, ordered by decreasing T.
    """
    mine = {float(T): value for T, value in zip(first.times, first.values)}
    return sorted(((float(T), value / mine[float(T)]) for T, value in zip(second.times, second.values)
                   if float(T) in mine), key=lambda pair: pair[0], reverse=True)


def _band(precision, T_grid, estimates):
    ctx = precision.ctx
    scaled = [float(to_mp(ctx, T) * ctx.log(estimate.value)) for T, estimate in zip(T_grid, estimates)]
    return min(scaled), max(scaled)


def phase_field_cost(xi, rho, tau, T_grid=CostOptions.T_GRID, precision=None, rtol=TruncationOptions.RTOL,
                     b=(CostOptions.B1, CostOptions.B2), m_max=TruncationOptions.M_MAX):
    """
    K(T) of the phase-field system with w_k = sqrt(2/pi) (original mode index) and the band of T log K(T).
    """
    T_grid = _check_grid(T_grid)
    precision = resolve_precision(precision)
    spectrum, seq = gen_phase_field(xi, rho, tau, precision=precision)
    estimates = _cost_grid(seq, T_grid, precision, rtol, b, None, m_max)
    report = CostReport(seq.label, T_grid, estimates, band=_band(precision, T_grid, estimates),
                        provenance=_provenance(precision, rtol, b, None, j0=spectrum.j0, k0=spectrum.k0))
    report.fits['inverse_T'] = _linear_fit(*zip(*report.plot_pairs('inverse_T')), 'inverse_T')
    return report


def sequence_cost(seq, T_grid=CostOptions.T_GRID, precision=None, rtol=TruncationOptions.RTOL,
                  b=(CostOptions.B1, CostOptions.B2), weights=None, m_max=TruncationOptions.M_MAX):
    """
    K(T) over T_grid for any sequence, with the fit of log K against 1/T.
    """
    T_grid = _check_grid(T_grid)
    precision = resolve_precision(precision)
    estimates = _cost_grid(seq, T_grid, precision, rtol, b, weights, m_max)
    report = CostReport(seq.label, T_grid, estimates, band=_band(precision, T_grid, estimates),
                        provenance=_provenance(precision, rtol, b, weights))
    report.fits['inverse_T'] = _linear_fit(*zip(*report.plot_pairs('inverse_T')), 'inverse_T')
    return report


def gap_infimum(seq, n, precision=None):
    """
    min_{k < n} (Lambda_{k+1} - Lambda_k) in modulus, with the index where it is reached.
    """
    precision = resolve_precision(precision)
    terms = seq.terms(n, precision)
    return min((abs(b - a), k) for k, (a, b) in enumerate(zip(terms, terms[1:]), 1))


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    expected: float
    indices: list


def condensation_exponent_fit(spectrum, seq, kmax, precision=None):
    """
    Slope of log P_k against log k for indices past 2 k0 + j0 + q - 2, where P_k decays like k^{-(2q - 4)}.
    """
    if spectrum.j0 is None:
        raise InvalidParameters("EXPONENT FIT NEEDS A RESONANT SPECTRUM")
    precision = resolve_precision(precision)
    ctx = precision.ctx
    q = seq.params.q
    start = spectrum.threshold + q - 1
    if kmax < start + 4:
        raise InvalidParameters("kmax TOO SMALL FOR THE FIT", kmax=kmax, start=start)
    ks = list(range(start, kmax + 1))
    logs = [float(ctx.log(condensation_product(seq, k, q, precision))) for k in ks]
    slope, intercept = np.polyfit(np.log(np.asarray(ks, dtype=float)), np.asarray(logs), 1)
    return ExponentFit(float(slope), float(intercept), -(2.0 * q - 4), ks)
