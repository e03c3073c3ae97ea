import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import mpmath

from nogap.modules.python.Options import PrecisionOptions, QuadratureOptions, CostOptions
from nogap.modules.python.Exceptions import InvalidParameters, NotPositiveDefinite, NonFinite, PowerIterationStall
"""
Extended precision plumbing shared by every other module.

  1) PRECISION:
    - A PrecisionContext names a mantissa size; the matching mpmath context is created lazily and cached
      per thread, so no mutable precision state is ever shared between callers.
  2) LINEAR ALGEBRA:
    - Hermitian matrices are factorized as L D L^H without pivoting. A non-positive pivot is reported as
      NotPositiveDefinite, it is never regularized.
    - The inverse and its diagonal come from X = L^{-1}: inverse = X^H D^{-1} X.
    - Largest eigenvalues by power iteration, with a full Hermitian eigensolve for small orders.
  3) QUADRATURE:
    - Gauss-Legendre nodes by Newton iteration on the three-term recurrence, cached per (nodes, precision)
      and composite rules cached per (panels, nodes, precision).
"""

_LOCAL = threading.local()
_RULE_CACHE = {}
_RULE_LOCK = threading.Lock()


def _context_for(bits):
    contexts = getattr(_LOCAL, 'contexts', None)
    if contexts is None:
        contexts = _LOCAL.contexts = {}
    ctx = contexts.get(bits)
    if ctx is None:
        ctx = mpmath.MPContext()
        ctx.prec = bits
        contexts[bits] = ctx
    return ctx


@dataclass(frozen=True)
class PrecisionContext:
    """
    Working precision of a computation. Instances are immutable and cheap: the mpmath context behind
    them lives in a thread-local cache keyed by the mantissa size.
    """
    mantissa_bits: int = PrecisionOptions.DEFAULT_BITS
    rounding: str = 'nearest-even'

    def __post_init__(self):
        if isinstance(self.mantissa_bits, bool) or int(self.mantissa_bits) != self.mantissa_bits:
            raise InvalidParameters("MANTISSA BITS MUST BE AN INTEGER", mantissa_bits=self.mantissa_bits)
        if self.mantissa_bits < PrecisionOptions.MIN_BITS:
            raise InvalidParameters("MANTISSA BITS BELOW MINIMUM", mantissa_bits=self.mantissa_bits,
                                    minimum=PrecisionOptions.MIN_BITS)
        if self.rounding != 'nearest-even':
            raise InvalidParameters("ONLY NEAREST-EVEN ROUNDING IS SUPPORTED", rounding=self.rounding)
        object.__setattr__(self, 'mantissa_bits', int(self.mantissa_bits))

    @property
    def ctx(self):
        return _context_for(self.mantissa_bits)

    @property
    def bits(self):
        return self.mantissa_bits

    @property
    def digits(self):
        return max(1, int(self.mantissa_bits * math.log10(2)))

    @property
    def eps(self):
        return self.ctx.ldexp(self.ctx.one, -self.mantissa_bits)

    @property
    def tolerance(self):
        # linear algebra tolerance 2^{-bits/2}
        return self.ctx.ldexp(self.ctx.one, -(self.mantissa_bits // 2))

    def doubled(self):
        return PrecisionContext(2 * self.mantissa_bits, self.rounding)

    def extended(self, extra_bits):
        return PrecisionContext(self.mantissa_bits + int(extra_bits), self.rounding)

    def convert(self, value):
        return to_mp(self.ctx, value)

    def nstr(self, value, digits=None):
        return self.ctx.nstr(value, digits or self.digits)


def extended_context(ctx, extra_bits=PrecisionOptions.EXTRA_BITS):
    """
    Context with extra_bits of headroom over ctx, for evaluations that lose digits to cancellation.
    """
    return _context_for(ctx.prec + int(extra_bits))


def context_of(bits):
    return _context_for(int(bits))


def resolve_precision(precision):
    """
    Accept None, an integer number of bits or a PrecisionContext.
    """
    if precision is None:
        return PrecisionContext()
    if isinstance(precision, PrecisionContext):
        return precision
    return PrecisionContext(int(precision))


def as_fraction(value):
    """
    Exact rational form of a value when one is available. Floats are taken as written (their repr),
    strings may be "p/q" or decimal. Returns None for irrational or extended precision input.
    """
    if isinstance(value, bool):
        return None
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        if math.isfinite(value):
            return Fraction(repr(value))
        return None
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            return None
    return None


def is_rational(value):
    return isinstance(value, Rational) and not isinstance(value, bool)


def to_mp(ctx, value):
    """
    Convert a number (int, Fraction, float, complex, [re, im] pair, "p/q" string or an mpmath value)
    into the given mpmath context.
    """
    if isinstance(value, Fraction):
        return ctx.mpf(value.numerator) / value.denominator
    if isinstance(value, Rational) and not isinstance(value, bool):
        return ctx.mpf(int(value))
    if isinstance(value, (tuple, list)) and len(value) == 2:
        re_part, im_part = to_mp(ctx, value[0]), to_mp(ctx, value[1])
        if im_part == 0:
            return re_part
        return ctx.mpc(re_part, im_part)
    if isinstance(value, str):
        exact = as_fraction(value)
        if exact is not None:
            return to_mp(ctx, exact)
        return ctx.mpf(value)
    if isinstance(value, complex):
        if value.imag == 0:
            return ctx.mpf(value.real)
        return ctx.mpc(value)
    return ctx.convert(value)


def to_float(value):
    try:
        return float(value)
    except TypeError:
        return complex(value)


def abs2(ctx, value):
    return ctx.re(value) ** 2 + ctx.im(value) ** 2


def is_finite(ctx, value):
    return not (ctx.isinf(value) or ctx.isnan(value))


def _rows_of(entries):
    if hasattr(entries, 'rows') and hasattr(entries, 'cols') and not isinstance(entries, (list, tuple)):
        return [[entries[i, j] for j in range(entries.cols)] for i in range(entries.rows)]
    return [list(row) for row in entries]


class HermitianMatrix:
    """
    A conjugate-symmetric matrix held at a fixed precision. The entries are copied on construction and
    never mutated afterwards.
    """
    def __init__(self, entries, precision=None, check=True):
        self.precision = resolve_precision(precision)
        ctx = self.precision.ctx
        rows = [[to_mp(ctx, value) for value in row] for row in _rows_of(entries)]
        self.order = len(rows)
        if any(len(row) != self.order for row in rows):
            raise InvalidParameters("MATRIX IS NOT SQUARE", order=self.order)
        if check:
            tolerance = self.precision.tolerance
            for i in range(self.order):
                for j in range(i, self.order):
                    gap = abs(rows[i][j] - ctx.conj(rows[j][i]))
                    if gap > tolerance * (abs(rows[i][j]) + abs(rows[j][i]) + tolerance):
                        raise InvalidParameters("MATRIX IS NOT HERMITIAN", row=i + 1, column=j + 1)
        self._rows = rows

    @classmethod
    def from_function(cls, order, entry, precision=None):
        """
        Build a matrix from entry(i, j) (0-based) evaluated on the upper triangle only.
        """
        precision = resolve_precision(precision)
        ctx = precision.ctx
        rows = [[ctx.zero] * order for _ in range(order)]
        for i in range(order):
            for j in range(i, order):
                value = to_mp(ctx, entry(i, j))
                rows[i][j] = value
                rows[j][i] = ctx.conj(value)
            rows[i][i] = ctx.re(rows[i][i])
        matrix = cls.__new__(cls)
        matrix.precision = precision
        matrix.order = order
        matrix._rows = rows
        return matrix

    def __getitem__(self, index):
        i, j = index
        return self._rows[i][j]

    def rows(self):
        return [list(row) for row in self._rows]

    def to_mpmath(self):
        return self.precision.ctx.matrix(self.rows())

    @property
    def is_real(self):
        ctx = self.precision.ctx
        return all(ctx.im(value) == 0 for row in self._rows for value in row)

    def matvec(self, vector):
        ctx = self.precision.ctx
        return [ctx.fdot(row, vector) for row in self._rows]

    def factorize(self):
        return LDLFactorization(self)


class LDLFactorization:
    """
    A = L D L^H with unit lower triangular L and positive real D, computed without pivoting.
    """
    def __init__(self, matrix):
        self.matrix = matrix
        self.precision = matrix.precision
        ctx = self.precision.ctx
        n = matrix.order
        a = matrix._rows
        lower = [[ctx.zero] * n for _ in range(n)]
        # scaled[i][k] holds L[i][k] * D[k]
        scaled = [[ctx.zero] * n for _ in range(n)]
        pivots = []
        for j in range(n):
            correction = ctx.re(ctx.fdot(scaled[j][:j], lower[j][:j], conjugate=True)) if j else ctx.zero
            pivot = ctx.re(a[j][j]) - correction
            if not pivot > 0:
                raise NotPositiveDefinite(index=j + 1, pivot=ctx.nstr(pivot, 8), bits=self.precision.bits)
            pivots.append(pivot)
            lower[j][j] = ctx.one
            for i in range(j + 1, n):
                value = a[i][j]
                if j:
                    value -= ctx.fdot(scaled[i][:j], lower[j][:j], conjugate=True)
                scaled[i][j] = value
                lower[i][j] = value / pivot
        self.lower = lower
        self.pivots = pivots
        self._inverse_factor = None

    @property
    def order(self):
        return len(self.pivots)

    def inverse_factor(self):
        """
        X = L^{-1}, unit lower triangular, by forward substitution one column at a time.
        """
        if self._inverse_factor is None:
            ctx = self.precision.ctx
            n = self.order
            lower = self.lower
            x = [[ctx.zero] * n for _ in range(n)]
            for j in range(n):
                x[j][j] = ctx.one
                for i in range(j + 1, n):
                    x[i][j] = -ctx.fdot(lower[i][j:i], [x[k][j] for k in range(j, i)])
            self._inverse_factor = x
        return self._inverse_factor

    def inverse_diagonal(self):
        ctx = self.precision.ctx
        x = self.inverse_factor()
        n = self.order
        return [ctx.fsum(abs2(ctx, x[k][i]) / self.pivots[k] for k in range(i, n)) for i in range(n)]

    def inverse(self):
        ctx = self.precision.ctx
        x = self.inverse_factor()
        n = self.order
        inverse = [[ctx.zero] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                value = ctx.fsum(ctx.conj(x[k][i]) * x[k][j] / self.pivots[k] for k in range(j, n))
                inverse[i][j] = value
                inverse[j][i] = ctx.conj(value)
            inverse[i][i] = ctx.re(inverse[i][i])
        return inverse

    def solve(self, rhs):
        ctx = self.precision.ctx
        n = self.order
        lower = self.lower
        y = []
        for i in range(n):
            value = to_mp(ctx, rhs[i])
            if i:
                value -= ctx.fdot(lower[i][:i], y)
            y.append(value)
        z = [y[i] / self.pivots[i] for i in range(n)]
        x = [ctx.zero] * n
        for i in reversed(range(n)):
            value = z[i]
            if i < n - 1:
                value -= ctx.fsum(ctx.conj(lower[k][i]) * x[k] for k in range(i + 1, n))
            x[i] = value
        return x

    def reconstruct(self):
        ctx = self.precision.ctx
        n = self.order
        lower = self.lower
        rows = [[ctx.zero] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                upto = min(i, j) + 1
                rows[i][j] = ctx.fsum(lower[i][k] * self.pivots[k] * ctx.conj(lower[j][k]) for k in range(upto))
        return rows

    def reconstruction_error(self):
        """
        max |(L D L^H - A)_{ij}| / max |A_{ij}|
        """
        ctx = self.precision.ctx
        rebuilt = self.reconstruct()
        original = self.matrix._rows
        scale = max(abs(value) for row in original for value in row) or ctx.one
        worst = max(abs(rebuilt[i][j] - original[i][j]) for i in range(self.order) for j in range(self.order))
        return worst / scale

    def log_determinant(self):
        ctx = self.precision.ctx
        return ctx.fsum(ctx.log(pivot) for pivot in self.pivots)


def hermitian_inverse_diagonal(matrix, full_inverse=False, precision=None):
    """
    Diagonal of the inverse of a Hermitian positive definite matrix through its LDL^H factorization.
    :param matrix: HermitianMatrix or nested list of entries
    :param full_inverse: If set, also return the full inverse as a list of rows
    :param precision: Precision used when a plain list is given
    :return: list of positive reals, or (diagonal, inverse)
    """
    if not isinstance(matrix, HermitianMatrix):
        matrix = HermitianMatrix(matrix, precision)
    factorization = matrix.factorize()
    diagonal = factorization.inverse_diagonal()
    if full_inverse:
        return diagonal, factorization.inverse()
    return diagonal


def gauss_legendre(nodes, precision=None):
    """
    Gauss-Legendre nodes and weights on [-1, 1], ascending.
    :param nodes: Number of nodes
    :param precision: PrecisionContext or bits
    :return: (nodes, weights) tuples of mpf
    """
    precision = resolve_precision(precision)
    key = ('gl', int(nodes), precision.bits)
    with _RULE_LOCK:
        if key in _RULE_CACHE:
            return _RULE_CACHE[key]
    if nodes < 1:
        raise InvalidParameters("NODE COUNT MUST BE POSITIVE", nodes=nodes)

    n = int(nodes)
    work = precision.extended(PrecisionOptions.EXTRA_BITS).ctx
    target = precision.ctx
    tolerance = work.ldexp(work.one, -(precision.bits + PrecisionOptions.EXTRA_BITS // 2))
    shift = 1 - work.mpf(1) / (8 * n * n) + work.mpf(1) / (8 * n ** 3)
    xs, ws = [], []
    for k in range(1, n + 1):
        # Tricomi initial guess
        x = shift * work.cos(work.pi * (4 * k - 1) / (4 * n + 2))
        derivative = work.one
        for _ in range(100):
            p_prev, p_curr = work.one, x
            for m in range(2, n + 1):
                p_prev, p_curr = p_curr, ((2 * m - 1) * x * p_curr - (m - 1) * p_prev) / m
            derivative = n * (x * p_curr - p_prev) / (x * x - 1)
            step = p_curr / derivative
            x -= step
            if abs(step) <= tolerance:
                break
        p_prev, p_curr = work.one, x
        for m in range(2, n + 1):
            p_prev, p_curr = p_curr, ((2 * m - 1) * x * p_curr - (m - 1) * p_prev) / m
        derivative = n * (x * p_curr - p_prev) / (x * x - 1) if n > 1 else work.one
        xs.append(target.mpf(x))
        ws.append(target.mpf(2 / ((1 - x * x) * derivative ** 2)))
    order = sorted(range(n), key=lambda i: xs[i])
    rule = (tuple(xs[i] for i in order), tuple(ws[i] for i in order))
    with _RULE_LOCK:
        _RULE_CACHE[key] = rule
    return rule


def _unit_composite_rule(panels, nodes, precision):
    key = ('unit', int(panels), int(nodes), precision.bits)
    with _RULE_LOCK:
        if key in _RULE_CACHE:
            return _RULE_CACHE[key]
    ctx = precision.ctx
    base_nodes, base_weights = gauss_legendre(nodes, precision)
    xs, ws = [], []
    for panel in range(panels):
        for t, w in zip(base_nodes, base_weights):
            xs.append((panel + (t + 1) / 2) / panels)
            ws.append(w / (2 * panels))
    rule = (tuple(xs), tuple(ws))
    with _RULE_LOCK:
        _RULE_CACHE[key] = rule
    return rule


def composite_rule(a, b, panels, nodes, precision=None):
    """
    Composite Gauss-Legendre rule with equal panels on [a, b].
    :return: (nodes, weights) lists
    """
    precision = resolve_precision(precision)
    if panels < 1:
        raise InvalidParameters("PANEL COUNT MUST BE POSITIVE", panels=panels)
    ctx = precision.ctx
    a, b = to_mp(ctx, a), to_mp(ctx, b)
    width = b - a
    unit_nodes, unit_weights = _unit_composite_rule(panels, nodes, precision)
    return [a + width * u for u in unit_nodes], [width * w for w in unit_weights]


@dataclass(frozen=True)
class IntegralEstimate:
    value: object
    error: object
    evaluations: int


def _apply_rule(ctx, f, xs, ws):
    terms = []
    for x, w in zip(xs, ws):
        value = to_mp(ctx, f(x))
        if not is_finite(ctx, value):
            raise NonFinite("INTEGRAND", node=ctx.nstr(x, 15))
        terms.append(w * value)
    return ctx.fsum(terms)


def integrate(f, a, b, panels=QuadratureOptions.DEFAULT_PANELS, nodes_per_panel=QuadratureOptions.DEFAULT_NODES,
              precision=None, estimate_error=True):
    """
    Composite Gauss-Legendre integral of f over [a, b]. The error estimate is the difference with the
    rule that doubles the node count per panel.
    :param f: Callable evaluated at mpf nodes
    :return: IntegralEstimate(value, error, evaluations)
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    if not to_mp(ctx, a) < to_mp(ctx, b):
        raise InvalidParameters("INTEGRATION BOUNDS MUST SATISFY a < b", a=a, b=b)
    xs, ws = composite_rule(a, b, panels, nodes_per_panel, precision)
    value = _apply_rule(ctx, f, xs, ws)
    evaluations = len(xs)
    error = ctx.zero
    if estimate_error:
        xs2, ws2 = composite_rule(a, b, panels, 2 * nodes_per_panel, precision)
        error = abs(_apply_rule(ctx, f, xs2, ws2) - value)
        evaluations += len(xs2)
    return IntegralEstimate(value, error, evaluations)


@dataclass(frozen=True)
class EigenEstimate:
    value: object
    residual: object
    iterations: int
    method: str


def power_iteration(matrix, tolerance=None, max_iter=CostOptions.POWER_MAX_ITER):
    """
    Largest eigenvalue of a Hermitian positive semi-definite matrix. Starts from the all-ones vector and
    stops once ||A v - lambda v|| <= tolerance * lambda.
    """
    precision = matrix.precision
    ctx = precision.ctx
    if tolerance is None:
        tolerance = ctx.ldexp(ctx.one, -CostOptions.POWER_TOLERANCE_BITS)
    n = matrix.order
    vector = [ctx.one / ctx.sqrt(n)] * n
    residual = ctx.inf
    for iteration in range(1, max_iter + 1):
        image = matrix.matvec(vector)
        value = ctx.re(ctx.fdot(image, vector, conjugate=True))
        residual = ctx.sqrt(ctx.fsum(abs2(ctx, image[i] - value * vector[i]) for i in range(n)))
        if residual <= tolerance * abs(value):
            return EigenEstimate(value, residual, iteration, 'power')
        length = ctx.sqrt(ctx.fsum(abs2(ctx, entry) for entry in image))
        if length == 0:
            return EigenEstimate(ctx.zero, ctx.zero, iteration, 'power')
        vector = [entry / length for entry in image]
    raise PowerIterationStall(iterations=max_iter, residual=ctx.nstr(residual, 5))


def largest_eigenvalue(matrix, tolerance=None, max_iter=CostOptions.POWER_MAX_ITER,
                       fallback_order=CostOptions.EIGH_FALLBACK_ORDER):
    """
    Power iteration with a full Hermitian eigensolve as fallback for small matrices.
    """
    try:
        return power_iteration(matrix, tolerance, max_iter)
    except PowerIterationStall:
        if matrix.order > fallback_order:
            raise
    ctx = matrix.precision.ctx
    eigenvalues = ctx.eigh(matrix.to_mpmath(), eigvals_only=True)
    value = max(ctx.re(eigenvalues[i]) for i in range(matrix.order))
    return EigenEstimate(value, ctx.zero, 0, 'eigh')


def relative_drift(first, second):
    """
    Largest relative difference between two values or two equally long sequences of values.
    """
    if not isinstance(first, (list, tuple)):
        first, second = [first], [second]
    worst = 0.0
    for a, b in zip(first, second):
        scale = max(abs(a), abs(b))
        if scale == 0:
            continue
        worst = max(worst, float(abs(a - b) / scale))
    return worst


@dataclass(frozen=True)
class StabilityReport:
    value: object
    doubled_value: object
    drift: float
    threshold: float
    passed: bool


def stability_check(compute, precision=None, threshold=PrecisionOptions.STABILITY_DRIFT):
    """
    Run compute(precision) and compute(precision.doubled()) and compare the results.
    """
    precision = resolve_precision(precision)
    value = compute(precision)
    doubled_value = compute(precision.doubled())
    drift = relative_drift(value, doubled_value)
    return StabilityReport(value, doubled_value, drift, threshold, drift < threshold)
