import math
import threading
from dataclasses import dataclass, field

import numpy as np

from nogap.modules.python.Options import SequenceOptions, QuadratureOptions, MollifierOptions, PrecisionOptions
from nogap.modules.python.Exceptions import InvalidParameters, TailNotSummable, DegenerateNormalizer, WindowTooSmall
from nogap.modules.python.MpNumerics import resolve_precision, to_mp, composite_rule, is_finite
from nogap.modules.python.SequenceCore import condensation_product
from nogap.modules.python.GuichalBounds import h1_constant, h3_constant
from nogap.modules.python.TextColor import TextColor
"""
Constructive biorthogonal family through entire functions of exponential type.

  1) WEIERSTRASS PRODUCT:
    - f_k(z) = prod_{n != k} (1 - z/Lambda_n): an explicit prefix of at least max(4k, 64) factors, extended until
      |Lambda_{c+1}| >= 16 |z|, times the closed-form tail of the sequence. Without a closed form the tail is
      bounded from the class parameters and dropped.
  2) MOLLIFIER:
    - P(z) = exp(izT/2) prod_{k >= N} cos(a_k z), a_k = C_{N,T}/k^2, sum_{k >= N} a_k = T/2. Small factors are
      summed through the log-cos series with Hurwitz zeta values.
  3) SYNTHESIS:
    - G_k(z) = conj(f_k(i conj z)) P(z - Im Lambda_k) / (sqrt(2 pi) conj(f_k(Lambda_k)) P(i Re Lambda_k)) vanishes
      at i conj(Lambda_n), n != k, and q_k(t) = (2 pi)^{-1/2} int G_k(x) exp(-ixt) dx is biorthogonal to
      exp(-Lambda_n t) on (0, T).
"""


@dataclass(frozen=True)
class ProductValue:
    value: object
    error: object
    factors: int
    # closed-form, class-bound, finite or trivial
    tail: str


def _class_tail_bound(ctx, params, count, radius):
    """
    |z| sum_{n > c} 1/(|Lambda_n| - |z|) with |Lambda_n| >= ((n - alpha)/p2)^2, summed as an integral.
    """
    alpha, p2 = to_mp(ctx, params.alpha), to_mp(ctx, params.p2)
    start = count - alpha
    spread = p2 * ctx.sqrt(radius)
    if not start > spread:
        return ctx.inf
    return radius * p2 * p2 / (2 * spread) * ctx.log((start + spread) / (start - spread))


def product_fk(seq, k, z, tail_tol=None, precision=None):
    """
    f_k(z) = prod_{n >= 1, n != k} (1 - z/Lambda_n) with an error bound.
    :param seq: EigenSequence
    :param k: Omitted index (1-based)
    :param z: Point of evaluation
    :param tail_tol: Largest accepted bound of the dropped tail (class-bound path only)
    :param precision: PrecisionContext or bits
    :return: ProductValue
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    if k < 1:
        raise InvalidParameters("k MUST BE POSITIVE", k=k)
    z = to_mp(ctx, z)
    if z == 0:
        return ProductValue(ctx.one, ctx.zero, 0, 'trivial')
    if seq.length is not None:
        if k > seq.length:
            raise InvalidParameters("k EXCEEDS THE SEQUENCE LENGTH", k=k, length=seq.length)
        terms = seq.terms(seq.length, precision)
        value = ctx.fprod(1 - z / lam for n, lam in enumerate(terms, start=1) if n != k)
        return ProductValue(value, abs(value) * seq.length * precision.eps, seq.length, 'finite')

    tail_tol = precision.tolerance if tail_tol is None else to_mp(ctx, tail_tol)
    radius = abs(z)
    count = max(4 * k, 64)
    while seq.modulus(count + 1, precision) < 16 * radius:
        count *= 2
        if count >= SequenceOptions.MAX_TERMS:
            raise TailNotSummable("PREFIX CANNOT REACH 16|z|", k=k, z=ctx.nstr(z, 8), terms=count)

    tail = seq.log_tail(ctx, z, count)
    if tail is not None:
        log_tail, tail_error = tail
        method = 'closed-form'
    else:
        if seq.params is None:
            raise TailNotSummable("NO CLOSED-FORM TAIL AND NO CLASS PARAMETERS", sequence=seq.label)
        bound = _class_tail_bound(ctx, seq.params, count, radius)
        while bound > tail_tol:
            count *= 2
            if count >= SequenceOptions.MAX_TERMS:
                raise TailNotSummable(k=k, z=ctx.nstr(z, 8), bound=ctx.nstr(bound, 5), tolerance=ctx.nstr(tail_tol, 5))
            bound = _class_tail_bound(ctx, seq.params, count, radius)
        log_tail, tail_error = ctx.zero, bound * ctx.exp(bound)
        method = 'class-bound'

    terms = seq.terms(count, precision)
    value = ctx.fprod(1 - z / lam for n, lam in enumerate(terms, start=1) if n != k) * ctx.exp(log_tail)
    error = abs(value) * (tail_error + count * precision.eps)
    return ProductValue(value, error, count, method)


def choose_N(T, p2, theta0=MollifierOptions.THETA0, theta1=MollifierOptions.THETA1):
    """
    Smallest admissible mollifier start N = ceil(2 + gamma (p2 pi + 1)^2 / T), gamma = 2^7 theta0/theta1^2,
    never below 2.
    """
    ctx = resolve_precision(None).ctx
    T, p2 = to_mp(ctx, T), to_mp(ctx, p2)
    theta0, theta1 = to_mp(ctx, theta0), to_mp(ctx, theta1)
    if not (T > 0 and p2 > 0 and theta0 > 0 and theta1 > 0):
        raise InvalidParameters("T, p2 AND THETAS MUST BE POSITIVE", T=T, p2=p2)
    gamma = 2 ** 7 * theta0 / theta1 ** 2
    return max(MollifierOptions.MIN_N, int(ctx.ceil(2 + gamma * (p2 * ctx.pi + 1) ** 2 / T)))


@dataclass(frozen=True)
class MollifierConfig:
    N: int
    theta0: object = MollifierOptions.THETA0
    theta1: object = MollifierOptions.THETA1
    theta2: object = MollifierOptions.THETA2

    def __post_init__(self):
        if int(self.N) < MollifierOptions.MIN_N:
            raise InvalidParameters("MOLLIFIER START N MUST BE AT LEAST 2", N=self.N)

    @classmethod
    def for_problem(cls, T, p2, theta0=MollifierOptions.THETA0, theta1=MollifierOptions.THETA1,
                    theta2=MollifierOptions.THETA2):
        return cls(choose_N(T, p2, theta0, theta1), theta0, theta1, theta2)

    @property
    def gamma(self):
        return 2 ** 7 * self.theta0 / self.theta1 ** 2

    def c_nt(self, T, ctx):
        """
        C_{N,T} = T / (2 sum_{k >= N} 1/k^2).
        """
        return to_mp(ctx, T) / (2 * ctx.zeta(2, self.N))

    def to_record(self):
        return {'N': self.N, 'theta0': str(self.theta0), 'theta1': str(self.theta1), 'theta2': str(self.theta2)}


def _log_cos_coefficients(ctx, count):
    # log cos w = sum_j (-1)^j 2^{2j-1} (2^{2j} - 1) B_{2j} w^{2j} / (j (2j)!)
    return [(-1) ** j * ctx.mpf(2) ** (2 * j - 1) * (ctx.mpf(2) ** (2 * j) - 1) * ctx.bernoulli(2 * j) /
            (j * ctx.factorial(2 * j)) for j in range(1, count + 1)]


class Mollifier(object):
    """
    P_{N,T} at a fixed precision. Series coefficients are cached per cut-off index.
    """
    def __init__(self, cfg, T, precision=None):
        self.cfg = cfg
        self.precision = resolve_precision(precision)
        ctx = self.precision.ctx
        self.T = to_mp(ctx, T)
        if not self.T > 0:
            raise InvalidParameters("T MUST BE POSITIVE", T=T)
        self.constant = cfg.c_nt(self.T, ctx)
        self._series = {}
        self._coefficients = []
        self._lock = threading.Lock()
        # highest index multiplied explicitly by the last evaluation
        self.tail_truncation = cfg.N

    def _coefficient(self, j):
        if j > len(self._coefficients):
            with self._lock:
                self._coefficients = _log_cos_coefficients(self.precision.ctx, max(j, 2 * len(self._coefficients)))
        return self._coefficients[j - 1]

    def _series_term(self, cut, j):
        # c_j C^{2j} zeta(4j, K)
        key = (cut, j)
        value = self._series.get(key)
        if value is None:
            ctx = self.precision.ctx
            value = self._coefficient(j) * self.constant ** (2 * j) * ctx.zeta(4 * j, cut)
            self._series[key] = value
        return value

    def log_cos_tail(self, z, cut):
        """
        sum_{k >= cut} log cos(a_k z), valid while a_cut |z| is below pi/2.
        """
        ctx = self.precision.ctx
        square = z * z
        power = ctx.one
        total = ctx.zero
        tolerance = self.precision.eps
        j = 0
        while True:
            j += 1
            power *= square
            term = self._series_term(cut, j) * power
            total += term
            if j >= 2 and abs(term) <= tolerance * (1 + abs(total)):
                return total

    def __call__(self, z):
        ctx = self.precision.ctx
        z = to_mp(ctx, z)
        if z == 0:
            return ctx.one
        radius = abs(z)
        cut = max(self.cfg.N, int(ctx.floor(ctx.sqrt(self.constant * radius / MollifierOptions.SERIES_THRESHOLD))) + 1)
        self.tail_truncation = cut
        head = ctx.fprod(ctx.cos(self.constant * z / (k * k)) for k in range(self.cfg.N, cut))
        return ctx.exp(1j * z * self.T / 2 + self.log_cos_tail(z, cut)) * head


def mollifier(cfg, T, z, precision=None):
    """
    P_{N,T}(z) = exp(izT/2) prod_{k >= N} cos(C_{N,T} z/k^2).
    """
    return Mollifier(cfg, T, precision)(z)


@dataclass(frozen=True)
class MollifierCheck:
    at_zero: object
    max_real_modulus: object
    imaginary_margin: object
    decay_margin: float
    C_NT: object
    N: int

    @property
    def passed(self):
        return abs(self.at_zero - 1) == 0 and self.max_real_modulus <= 1 and self.imaginary_margin >= 1

    @property
    def decay_holds(self):
        return self.decay_margin <= 0


def verify_mollifier(cfg, T, grid=None, precision=None):
    """
    P(0) = 1, |P(x)| <= 1 for real x, P(ix) >= exp(-theta2 sqrt(C x)) for x >= 0 and the two-branch decay of
    log|P(x)| on the real axis.
    :param grid: Positive abscissae, defaults to a log-spaced grid on [1e-2, 1e3]
    :return: MollifierCheck
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    evaluate = Mollifier(cfg, T, precision)
    if grid is None:
        grid = np.geomspace(1e-2, 1e3, 40)
    constant = evaluate.constant
    theta0, theta1, theta2 = (to_mp(ctx, value) for value in (cfg.theta0, cfg.theta1, cfg.theta2))
    scale = ctx.sqrt(constant / theta0)
    slack = 1 + precision.tolerance
    worst_real, imaginary_margin, decay_margin = ctx.zero, ctx.inf, -math.inf
    for x in grid:
        x = to_mp(ctx, x)
        for point in (x, -x):
            value = abs(evaluate(point))
            worst_real = max(worst_real, value)
            if value == 0:
                continue
            if scale * ctx.sqrt(x) + 1 >= cfg.N:
                bound = -theta1 / 8 * scale * ctx.sqrt(x)
            else:
                bound = -theta1 / cfg.N ** 3 * scale ** 4 * x * x
            decay_margin = max(decay_margin, float(ctx.log(value) - bound))
        lower = ctx.exp(-theta2 * ctx.sqrt(constant * x))
        imaginary_margin = min(imaginary_margin, ctx.re(evaluate(1j * x)) * slack / lower)
    return MollifierCheck(evaluate(0), worst_real, imaginary_margin, decay_margin, constant, cfg.N)


class GkEvaluator(object):
    """
    G_k of one (sequence, k, T, mollifier) with the normalizer computed once.
    """
    def __init__(self, seq, params, k, T, cfg=None, precision=None):
        self.seq = seq
        self.params = params if params is not None else seq.params
        if self.params is None:
            raise InvalidParameters("CLASS PARAMETERS REQUIRED", sequence=seq.label)
        self.k = k
        self.precision = resolve_precision(precision)
        ctx = self.precision.ctx
        self.T = to_mp(ctx, T)
        self.cfg = cfg or MollifierConfig.for_problem(self.T, self.params.p2)
        self.mollifier = Mollifier(self.cfg, self.T, self.precision)
        self.lam = seq.term(k, self.precision)
        self.shift = ctx.im(self.lam)
        interpolation = product_fk(seq, k, self.lam, precision=self.precision)
        self.normalizer = ctx.conj(interpolation.value) * self.mollifier(1j * ctx.re(self.lam))
        guard = 2 * PrecisionOptions.EXTRA_BITS
        if self.normalizer == 0 or not is_finite(ctx, self.normalizer) or \
                ctx.mag(self.normalizer) < -(self.precision.bits - guard):
            raise DegenerateNormalizer(k=k, bits=self.precision.bits, normalizer=ctx.nstr(self.normalizer, 5))
        self.scale = 1 / (ctx.sqrt(2 * ctx.pi) * self.normalizer)

    def __call__(self, z):
        ctx = self.precision.ctx
        z = to_mp(ctx, z)
        numerator = ctx.conj(product_fk(self.seq, self.k, 1j * ctx.conj(z), precision=self.precision).value)
        return self.scale * numerator * self.mollifier(z - self.shift)

    def interpolation_errors(self, count):
        """
        |G_k(i conj Lambda_n) - delta_kn / sqrt(2 pi)| for n = 1..count.
        """
        ctx = self.precision.ctx
        target = 1 / ctx.sqrt(2 * ctx.pi)
        errors = []
        for n in range(1, count + 1):
            value = self(1j * ctx.conj(self.seq.term(n, self.precision)))
            errors.append(abs(value - (target if n == self.k else 0)))
        return errors


def construct_gk(seq, params, k, T, cfg, z, precision=None):
    return GkEvaluator(seq, params, k, T, cfg, precision)(z)


@dataclass(frozen=True)
class WindowChoice:
    X: float
    slope: float
    intercept: float
    peak: float
    tail_estimate: float


def _tail_integral(intercept, slope, root):
    # int_{root^2}^inf exp(a + b sqrt(x)) dx for b < 0
    return math.exp(intercept + slope * root) * (2 / slope ** 2 - 2 * root / slope)


def choose_window(evaluator, tolerance=QuadratureOptions.WINDOW_TOLERANCE):
    """
    Fit log|G_k(x)| ~ a + b sqrt(x) on the binned envelope past its peak and pick X such that the tail of
    |G_k| beyond X is below tolerance times the peak.
    :return: WindowChoice
    """
    ctx = evaluator.precision.ctx
    xs = np.geomspace(1e-1, QuadratureOptions.WINDOW_MAX, QuadratureOptions.ENVELOPE_POINTS)
    logs = []
    for x in xs:
        values = [abs(evaluator(x))]
        if not evaluator.seq.is_real:
            values.append(abs(evaluator(-x)))
        value = max(values)
        logs.append(float(ctx.log(value)) if value > 0 else -math.inf)
    logs = np.array(logs)
    bins = np.array_split(np.arange(len(xs)), QuadratureOptions.ENVELOPE_BINS)
    envelope_x = np.array([xs[chunk[np.argmax(logs[chunk])]] for chunk in bins])
    envelope = np.array([logs[chunk].max() for chunk in bins])
    peak_index = int(np.argmax(envelope))
    peak = float(envelope[peak_index])
    tail = slice(peak_index + 1, None)
    usable = np.isfinite(envelope[tail])
    if usable.sum() < 3:
        raise WindowTooSmall("ENVELOPE PEAKS AT THE END OF THE WINDOW", k=evaluator.k,
                             peak_x=float(envelope_x[peak_index]))
    slope, intercept = np.polyfit(np.sqrt(envelope_x[tail][usable]), envelope[tail][usable], 1)
    if slope >= 0:
        raise WindowTooSmall("NO DECAY OF |G_k| DETECTED", k=evaluator.k, slope=float(slope))
    budget = tolerance * math.exp(peak)
    low, high = math.sqrt(QuadratureOptions.WINDOW_MIN), math.sqrt(QuadratureOptions.WINDOW_MAX)
    if _tail_integral(intercept, slope, high) > budget:
        raise WindowTooSmall(k=evaluator.k, slope=float(slope), window_max=QuadratureOptions.WINDOW_MAX)
    if _tail_integral(intercept, slope, low) > budget:
        for _ in range(60):
            middle = (low + high) / 2
            if _tail_integral(intercept, slope, middle) > budget:
                low = middle
            else:
                high = middle
        root = high
    else:
        root = low
    X = min(QuadratureOptions.WINDOW_MAX, QuadratureOptions.WINDOW_SAFETY * root * root)
    return WindowChoice(X, float(slope), float(intercept), peak, _tail_integral(intercept, slope, math.sqrt(X)))


@dataclass
class SynthesizedFamily:
    k: int
    T: object
    X: float
    cfg: MollifierConfig
    precision_bits: int
    t_grid: list
    samples: list
    norm_plancherel: object
    norm_direct: object
    residuals: list
    window: WindowChoice
    nodes: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def residual_max(self):
        return max(abs(value) for value in self.residuals)

    def to_rows(self):
        return [(float(t), float(value.real), float(value.imag)) for t, value in
                zip(self.t_grid, (complex(sample) for sample in self.samples))]

    def to_record(self):
        return {'k': self.k, 'T': str(self.T), 'X': self.X, 'mollifier': self.cfg.to_record(),
                'precision_bits': self.precision_bits, 'nodes': self.nodes,
                'norm_plancherel': str(self.norm_plancherel), 'norm_direct': str(self.norm_direct),
                'residuals': [str(value) for value in self.residuals], 'residual_max': str(self.residual_max),
                'window': {'slope': self.window.slope, 'intercept': self.window.intercept,
                           'tail_estimate': self.window.tail_estimate}}


def synthesize_qk(seq, params, k, T, cfg=None, panels=None, nodes=QuadratureOptions.SYNTHESIS_NODES,
                  precision=QuadratureOptions.SYNTHESIS_BITS, residual_terms=6,
                  samples=QuadratureOptions.T_GRID_POINTS, window=None):
    """
    q_k(t) = (2 pi)^{-1/2} int_{-X}^{X} G_k(x) exp(-ixt) dx on [0, T], with both norms and the biorthogonality
    residuals int_0^T q_k(t) exp(-conj(Lambda_n) t) dt - delta_kn for n = 1..residual_terms.
    :param seq: EigenSequence
    :param params: ClassParameters (p2 drives the mollifier)
    :param k: Index (1-based)
    :param T: Horizon
    :param cfg: MollifierConfig, chosen from (T, p2) when omitted
    :param panels: Panels on [0, X], by default enough for PERIODS_PER_PANEL oscillations each
    :param nodes: Gauss nodes per panel
    :param precision: PrecisionContext or bits
    :param residual_terms: Number of exponentials checked
    :param samples: Size of the exported t-grid
    :param window: Fixed X, otherwise chosen from the envelope of |G_k|
    :return: SynthesizedFamily
    """
    if k > QuadratureOptions.MAX_SYNTHESIS_INDEX:
        TextColor.warn("SYNTHESIS OF q_{} IS LIKELY TO LOSE ALL DIGITS, USE THE GRAM FAMILY".format(k))
    precision = resolve_precision(precision)
    ctx = precision.ctx
    evaluator = GkEvaluator(seq, params, k, T, cfg, precision)
    T = evaluator.T
    choice = choose_window(evaluator) if window is None else WindowChoice(float(window), 0.0, 0.0, 0.0, 0.0)
    X = choice.X
    if panels is None:
        periods = X * float(T) / (2 * math.pi)
        panels = max(QuadratureOptions.DEFAULT_PANELS, int(math.ceil(periods / QuadratureOptions.PERIODS_PER_PANEL)))
    real = seq.is_real
    lower = 0 if real else -X
    xs, ws = composite_rule(lower, X, panels, nodes, precision)
    values = [w * evaluator(x) for x, w in zip(xs, ws)]
    norm_squared = ctx.fsum(abs(v) ** 2 / w for v, w in zip(values, ws))
    factor = 1 / ctx.sqrt(2 * ctx.pi)
    if real:
        norm_squared *= 2

    def q(t):
        total = ctx.fsum(v * ctx.expj(-x * t) for v, x in zip(values, xs))
        if real:
            return 2 * factor * ctx.re(total)
        return factor * total

    t_nodes, t_weights = composite_rule(0, T, QuadratureOptions.DEFAULT_PANELS // 2, QuadratureOptions.DEFAULT_NODES,
                                        precision)
    q_nodes = [q(t) for t in t_nodes]
    direct = ctx.sqrt(ctx.fsum(w * abs(value) ** 2 for w, value in zip(t_weights, q_nodes)))
    residuals = []
    for n in range(1, residual_terms + 1):
        lam = ctx.conj(seq.term(n, precision))
        value = ctx.fsum(w * value * ctx.exp(-lam * t) for w, value, t in zip(t_weights, q_nodes, t_nodes))
        residuals.append(value - (1 if n == k else 0))
    t_grid = [T * i / (samples - 1) for i in range(samples)]
    family = SynthesizedFamily(k, T, X, evaluator.cfg, precision.bits, t_grid, [q(t) for t in t_grid],
                               ctx.sqrt(norm_squared), direct, residuals, choice, len(xs))
    TextColor.info("q_{} SYNTHESIZED ON [-{:.1f}, {:.1f}] WITH {} NODES, MAX RESIDUAL {}".format(
        k, X, X, len(xs), ctx.nstr(family.residual_max, 3)))
    return family


@dataclass(frozen=True)
class GrowthFit:
    constant: object
    slope: object
    argmax: object
    points: int


def fit_growth_constant(seq, params, k, grid, precision=None):
    """
    Smallest C with log|f_k(x)| <= (p2 pi + 1) sqrt|x| + C on the given real grid.
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    params = params if params is not None else seq.params
    slope = to_mp(ctx, params.p2) * ctx.pi + 1
    best, argmax = -ctx.inf, None
    for x in grid:
        x = to_mp(ctx, x)
        value = abs(product_fk(seq, k, x, precision=precision).value)
        if value == 0:
            continue
        candidate = ctx.log(value) - slope * ctx.sqrt(abs(x))
        if candidate > best:
            best, argmax = candidate, x
    return GrowthFit(best, slope, argmax, len(grid))


@dataclass(frozen=True)
class InterpolationFit:
    constant: object
    per_index: list


def fit_interpolation_constant(seq, params, ks, precision=None):
    """
    Smallest C with |f_k(Lambda_k)| >= H1^{-1} exp(-C H3 sqrt|Lambda_k|) / P_k for every k in ks.
    :return: InterpolationFit with the per-index constants
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    params = params if params is not None else seq.params
    real = seq.is_real
    h1 = to_mp(ctx, h1_constant(params, real))
    h3 = to_mp(ctx, h3_constant(params, real))
    per_index = []
    for k in ks:
        lam = seq.term(k, precision)
        value = abs(product_fk(seq, k, lam, precision=precision).value)
        condensed = condensation_product(seq, k, params.q, precision)
        per_index.append((k, -ctx.log(value * h1 * condensed) / (h3 * ctx.sqrt(abs(lam)))))
    return InterpolationFit(max(value for _, value in per_index), per_index)
