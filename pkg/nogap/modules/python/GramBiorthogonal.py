import threading
from dataclasses import dataclass, field

from nogap.modules.python.Options import TruncationOptions, PrecisionOptions, SequenceOptions
from nogap.modules.python.Exceptions import InvalidParameters, NotPositiveDefinite, ZeroDenominator, NoPlateau
from nogap.modules.python.MpNumerics import HermitianMatrix, resolve_precision, to_mp, composite_rule, \
    relative_drift
from nogap.modules.python.TextColor import TextColor
"""
Minimal-norm biorthogonal families of exponentials on L^2(0, T).

  1) GRAM MATRIX:
    - G[k][n] = <e_k, e_n> = (1 - exp(-(Lambda_k + conj(Lambda_n)) T)) / (Lambda_k + conj(Lambda_n)) with
      e_k(t) = exp(-Lambda_k t). The inner product conjugates its second argument.
  2) MINIMAL FAMILY:
    - s_k = sum_n (G^{-1})_{kn} e_n is biorthogonal to e_1..e_M and has the smallest norm among such families,
      ||s_k||^2 = (G^{-1})_{kk} = 1/d_{T,k}^2.
  3) TRUNCATION:
    - ||s_k^{(M)}|| approaches the full-space norm from below. Once Re(Lambda_{M+1}) T is large the terms
      n > M are projected out in closed form: on L^2(0, infinity) their span is removed by the Blaschke
      factors beta_a = prod_{n > M} (1 - Lambda_a/Lambda_n) / conj(1 + conj(Lambda_a)/Lambda_n), and
      S[a][b] = (beta_a conj(beta_b) - exp(-(Lambda_a + conj(Lambda_b)) T)) / (Lambda_a + conj(Lambda_b))
      is the Schur complement of the full Gram matrix up to O(exp(-Re(Lambda_{M+1}) T)).
    - Before that the value is extrapolated in the tail sum sum_{n > M} 1/|Lambda_n|.
    - Orders M never split a cluster of q close terms, and M grows until the estimate stops moving.
"""


def gram_entry(lam_k, lam_n, T, precision=None):
    """
    Closed form of int_0^T exp(-lam_k t) conj(exp(-lam_n t)) dt.
    :param lam_k: First exponent
    :param lam_n: Second exponent (conjugated)
    :param T: Horizon
    :param precision: PrecisionContext or bits
    :return: mpf or mpc
    """
    ctx = resolve_precision(precision).ctx
    total = to_mp(ctx, lam_k) + ctx.conj(to_mp(ctx, lam_n))
    if total == 0:
        raise ZeroDenominator(lam_k=lam_k, lam_n=lam_n)
    return -ctx.expm1(-total * to_mp(ctx, T)) / total


class GramBuilder(object):
    """
    Gram entries of one (sequence, T, precision), cached so nested truncations reuse them.
    """
    def __init__(self, seq, T, precision=None):
        self.seq = seq
        self.precision = resolve_precision(precision)
        ctx = self.precision.ctx
        self.T = to_mp(ctx, T)
        if not self.T > 0:
            raise InvalidParameters("T MUST BE POSITIVE", T=T)
        self._entries = {}
        self._lock = threading.Lock()

    def entry(self, i, j):
        key = (i, j)
        value = self._entries.get(key)
        if value is None:
            terms = self.seq.terms(max(i, j) + 1, self.precision)
            value = gram_entry(terms[i], terms[j], self.T, self.precision)
            with self._lock:
                self._entries[key] = value
        return value

    def matrix(self, order):
        self.seq.ensure(order)
        return HermitianMatrix.from_function(order, self.entry, self.precision)


@dataclass(frozen=True)
class GramSystem:
    sequence: object
    T: object
    M: int
    matrix: HermitianMatrix
    inverse_diag: list


def build_gram(seq, M, T, precision=None):
    """
    Gram matrix of e_1..e_M and the diagonal of its inverse.
    """
    if M < 1:
        raise InvalidParameters("TRUNCATION ORDER MUST BE POSITIVE", M=M)
    matrix = GramBuilder(seq, T, precision).matrix(M)
    return GramSystem(seq, to_mp(matrix.precision.ctx, T), M, matrix, matrix.factorize().inverse_diagonal())


@dataclass
class MinimalFamily:
    sequence: object
    T: object
    M: int
    precision: object
    exponents: list
    coefficients: list
    norms: list
    distances: list
    residual: object = None

    @property
    def precision_bits(self):
        return self.precision.bits

    def norm(self, k):
        return self.norms[k - 1]

    def distance(self, k):
        return self.distances[k - 1]

    def to_record(self):
        ctx = self.precision.ctx
        digits = self.precision.digits
        return {'sequence': self.sequence.label,
                'T': ctx.nstr(self.T, digits),
                'M': self.M,
                'precision_bits': self.precision_bits,
                'norms': [ctx.nstr(value, digits) for value in self.norms],
                'distances': [ctx.nstr(value, digits) for value in self.distances],
                'residual_max': ctx.nstr(self.residual, 8) if self.residual is not None else None}


def _biorthogonality_residual(matrix, coefficients):
    # max |(G C^H - I)_{jk}|
    ctx = matrix.precision.ctx
    worst = ctx.zero
    rows = matrix.rows()
    for j, row in enumerate(rows):
        for k, coefficient_row in enumerate(coefficients):
            value = ctx.fdot(row, coefficient_row, conjugate=True)
            if j == k:
                value -= 1
            worst = max(worst, abs(value))
    return worst


def _minimal_family(seq, M, T, precision):
    matrix = GramBuilder(seq, T, precision).matrix(M)
    factorization = matrix.factorize()
    inverse = factorization.inverse()
    ctx = precision.ctx
    norms = [ctx.sqrt(ctx.re(inverse[k][k])) for k in range(M)]
    family = MinimalFamily(sequence=seq, T=to_mp(ctx, T), M=M, precision=precision,
                           exponents=seq.terms(M, precision), coefficients=inverse, norms=norms,
                           distances=[1 / norm for norm in norms])
    family.residual = _biorthogonality_residual(matrix, inverse)
    return family


def minimal_family(seq, M, T, precision=None, doublings=PrecisionOptions.MAX_DOUBLINGS):
    """
    Minimal biorthogonal family to e_1..e_M on (0, T). A failed factorization is retried with the mantissa
    doubled, at most `doublings` times.
    :param seq: EigenSequence
    :param M: Truncation order
    :param T: Horizon
    :param precision: PrecisionContext or bits
    :param doublings: Automatic precision doublings
    :return: MinimalFamily
    """
    if M < 1:
        raise InvalidParameters("TRUNCATION ORDER MUST BE POSITIVE", M=M)
    precision = resolve_precision(precision)
    while True:
        try:
            return _minimal_family(seq, M, T, precision)
        except NotPositiveDefinite:
            if doublings <= 0:
                raise
            doublings -= 1
            precision = precision.doubled()
            TextColor.warn("GRAM MATRIX NOT POSITIVE DEFINITE, RETRYING AT {} BITS".format(precision.bits))


def evaluate_family(family, k, t):
    """
    s_k(t) = sum_n coeff[k][n] exp(-Lambda_n t) for 0 <= t <= T.
    """
    ctx = family.precision.ctx
    t = to_mp(ctx, t)
    if t < 0 or t > family.T:
        raise InvalidParameters("t MUST LIE IN [0, T]", t=t, T=family.T)
    if not 1 <= k <= family.M:
        raise InvalidParameters("k OUT OF RANGE", k=k, M=family.M)
    return ctx.fsum(c * ctx.exp(-lam * t) for c, lam in zip(family.coefficients[k - 1], family.exponents))


def residual_check(family, panels=TruncationOptions.RESIDUAL_PANELS, nodes=TruncationOptions.RESIDUAL_NODES):
    """
    max_{j, k} |int_0^T e_j conj(s_k) dt - delta_jk| with the integrals done by quadrature, independently of
    the closed-form Gram entries.
    """
    precision = family.precision
    ctx = precision.ctx
    xs, ws = composite_rule(0, family.T, panels, nodes, precision)
    basis = [[ctx.exp(-lam * x) for x in xs] for lam in family.exponents]
    samples = []
    for row in family.coefficients:
        samples.append([ctx.conj(ctx.fsum(c * basis[n][i] for n, c in enumerate(row))) for i in range(len(xs))])
    worst = ctx.zero
    for j in range(family.M):
        weighted = [w * e for w, e in zip(ws, basis[j])]
        for k in range(family.M):
            value = ctx.fdot(weighted, samples[k])
            if j == k:
                value -= 1
            worst = max(worst, abs(value))
    return worst


class TailSums(object):
    """
    h(M) = sum_{n > M} 1/|Lambda_n|. The truncation error of log ||s_k^{(M)}|| is a power series in h, led by
    a term linear in h, so the plateau is judged on the value extrapolated to h = 0.
    """
    def __init__(self, seq, precision=None, terms=TruncationOptions.TAIL_SUM_TERMS):
        self.precision = resolve_precision(precision)
        ctx = self.precision.ctx
        count = terms if seq.length is None else min(terms, seq.length)
        moduli = [1 / abs(value) for value in seq.terms(count, self.precision)]
        remainder = ctx.zero
        if seq.length is None or seq.length > count:
            remainder = self._remainder(ctx, moduli, count)
        # suffix[M] = sum over n > M, M = 0..count
        self.suffix = [remainder] * (count + 1)
        for n in range(count, 0, -1):
            self.suffix[n - 1] = self.suffix[n] + moduli[n - 1]
        self.count = count

    @staticmethod
    def _remainder(ctx, moduli, count):
        half = count // 2
        exponent = ctx.log(moduli[half - 1] / moduli[count - 1]) / ctx.log(ctx.mpf(count) / half)
        if not exponent > 1:
            TextColor.warn("TAIL SUM DOES NOT CONVERGE (LOCAL EXPONENT {})".format(ctx.nstr(exponent, 4)))
            return ctx.zero
        # Euler-Maclaurin with f(n) ~ f(count) (count/n)^exponent
        return moduli[count - 1] * (count / (exponent - 1) - ctx.mpf(1) / 2)

    def __call__(self, M):
        if M > self.count:
            raise InvalidParameters("TAIL SUM REQUESTED BEYOND ITS TABLE", M=M, table=self.count)
        return self.suffix[M]


def extrapolate_log_norm(points, degree=TruncationOptions.EXTRAPOLATION_DEGREE):
    """
    Neville extrapolation to h = 0 of the last degree + 1 points (h, log value).
    :param points: [(h, log value)] with distinct h
    :return: Extrapolated log value
    """
    points = points[-(degree + 1):]
    hs = [h for h, _ in points]
    table = [value for _, value in points]
    for level in range(1, len(points)):
        for i in range(len(points) - level):
            j = i + level
            table[i] = (hs[j] * table[i] - hs[i] * table[i + 1]) / (hs[j] - hs[i])
    return table[0]




def _tail_cut(seq, M, precision):
    # first order >= M from which the closed-form tail covers every retained term
    ctx = precision.ctx
    largest = seq.term(M, precision)
    cut = M
    while True:
        if seq.length is not None and cut >= seq.length:
            return seq.length
        if seq.log_tail(ctx, largest, cut) is not None and seq.log_tail(ctx, -ctx.conj(largest), cut) is not None:
            return cut
        cut = max(cut + 8, 2 * cut)
        if seq.length is not None:
            cut = min(cut, seq.length)
        if cut > min(SequenceOptions.MAX_TERMS, 16 * M + 64):
            return None


@dataclass(frozen=True)
class TailFactors:
    M: int
    values: list
    # bound on the error of log beta_a, from the closed-form tails
    error: object
    # terms M + 1..cut are multiplied explicitly
    cut: int


def tail_factors(seq, M, precision=None):
    """
    beta_a = prod_{n > M} (1 - Lambda_a/Lambda_n) / conj(1 + conj(Lambda_a)/Lambda_n) for a = 1..M.
    :param seq: EigenSequence
    :param M: Truncation order
    :param precision: PrecisionContext or bits
    :return: TailFactors, or None when the sequence has no closed-form tail
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    cut = _tail_cut(seq, M, precision)
    if cut is None:
        return None
    window = seq.terms(cut, precision)[M:]
    values, error = [], ctx.zero
    for lam in seq.terms(M, precision):
        reflected = -ctx.conj(lam)
        plus = seq.log_tail(ctx, lam, cut)
        minus = seq.log_tail(ctx, reflected, cut)
        if plus is None or minus is None:
            return None
        value = plus[0] - ctx.conj(minus[0])
        value += ctx.fsum(ctx.log(1 - lam / mu) - ctx.conj(ctx.log(1 - reflected / mu)) for mu in window)
        values.append(ctx.exp(value))
        error = max(error, plus[1] + minus[1])
    return TailFactors(M, values, error, cut)


def completed_gram(builder, M, factors):
    """
    Gram matrix of e_1..e_M with the span of e_{M+1}, e_{M+2}, ... projected out through the factors beta_a.
    :param builder: GramBuilder
    :param factors: TailFactors of the same order
    :return: HermitianMatrix
    """
    if factors.M != M:
        raise InvalidParameters("TAIL FACTORS BUILT FOR ANOTHER ORDER", M=M, factors=factors.M)
    ctx = builder.precision.ctx
    lams = builder.seq.terms(M, builder.precision)
    beta = factors.values

    def entry(i, j):
        total = lams[i] + ctx.conj(lams[j])
        return (beta[i] * ctx.conj(beta[j]) - ctx.exp(-total * builder.T)) / total

    return HermitianMatrix.from_function(M, entry, builder.precision)


def cluster_span(seq):
    return seq.params.q if seq.params is not None else 1


def aligned_order(seq, M, span, limit=None, precision=None):
    """
    The order in M..M+span-1 (capped by limit) followed by the widest gap |Lambda_{m+1} - Lambda_m|, so
    that no cluster of close terms is split by the truncation.
    """
    last = M + max(span, 1) - 1
    if limit is not None:
        last = min(last, limit)
    if seq.length is not None:
        if last >= seq.length:
            return seq.length
    if last <= M:
        return M
    precision = resolve_precision(precision)
    terms = seq.terms(last + 1, precision)
    return max(range(M, last + 1), key=lambda m: (abs(terms[m] - terms[m - 1]), -m))


@dataclass(frozen=True)
class TruncationStep:
    M: int
    raw: object
    value: object
    # 'exact', 'tail-completed' or 'extrapolated'
    method: str
    detail: object = None


class TruncationEstimator(object):
    """
    Estimates of a Gram functional, f(G_M) -> f(G), at increasing orders. measure(matrix) returns
    (value, detail) and is applied to the truncated Gram matrix and, where available, to its tail-completed
    counterpart.
    """
    def __init__(self, seq, T, measure, rtol=TruncationOptions.RTOL, precision=None, limit=TruncationOptions.M_MAX):
        self.seq = seq
        self.measure = measure
        self.rtol = rtol
        self.builder = GramBuilder(seq, T, precision)
        self.precision = self.builder.precision
        self.limit = limit
        self.raws = []
        self._tail = None

    def _completed(self, M):
        seq = self.seq
        ctx = self.precision.ctx
        if ctx.re(seq.term(M + 1, self.precision)) * self.builder.T < TruncationOptions.COMPLETION_EXPONENT:
            return None
        factors = tail_factors(seq, M, self.precision)
        if factors is None or factors.error > self.rtol / 100:
            return None
        try:
            return self.measure(completed_gram(self.builder, M, factors))
        except NotPositiveDefinite:
            TextColor.warn("TAIL-COMPLETED GRAM NOT POSITIVE DEFINITE AT M={}".format(M))
            return None

    def _extrapolated(self):
        ctx = self.precision.ctx
        if self._tail is None:
            self._tail = TailSums(self.seq, self.precision, max(TruncationOptions.TAIL_SUM_TERMS, 4 * self.limit))
        return ctx.exp(extrapolate_log_norm([(self._tail(M), ctx.log(raw)) for M, raw in self.raws]))

    def estimate(self, M):
        raw, detail = self.measure(self.builder.matrix(M))
        self.raws.append((M, raw))
        if self.seq.length is not None and M >= self.seq.length:
            return TruncationStep(M, raw, raw, 'exact', detail)
        completed = self._completed(M)
        if completed is not None:
            return TruncationStep(M, raw, completed[0], 'tail-completed', completed[1])
        return TruncationStep(M, raw, self._extrapolated(), 'extrapolated', detail)


@dataclass
class PlateauResult:
    value: object
    raw: object
    M_star: int
    # (M, raw, estimate) triples
    history: list
    complete: bool
    method: str
    precision: object
    detail: object = None


def _plateau_search(seq, T, measure, rtol, precision, m_step, m_max, m_start, witness):
    limit = m_max if seq.length is None else min(m_max, seq.length)
    estimator = TruncationEstimator(seq, T, measure, rtol, precision, limit)
    span = cluster_span(seq)
    M = aligned_order(seq, min(m_start or m_step, limit), span, limit, precision)
    history = []
    calm, method = 0, None
    while True:
        step = estimator.estimate(M)
        if history and step.method == method:
            previous = history[-1][2]
            calm = calm + 1 if abs(step.value - previous) <= rtol * abs(step.value) else 0
        else:
            calm = 0
        method = step.method
        history.append((M, step.raw, step.value))
        complete = step.method == 'exact'
        if calm >= TruncationOptions.PLATEAU_STEPS or complete:
            return PlateauResult(step.value, step.raw, M, history, complete, step.method, estimator.precision,
                                 step.detail)
        if M >= limit:
            change = relative_drift(history[-1][2], history[-2][2]) if len(history) > 1 else None
            TextColor.warn("NO PLATEAU BELOW M={} ({})".format(m_max, method))
            raise NoPlateau(T=str(T), M_max=m_max, last_change=change, method=method, **witness)
        M = aligned_order(seq, min(M + m_step, limit), span, limit, precision)


def plateau_search(seq, T, measure, rtol=TruncationOptions.RTOL, precision=None, m_step=TruncationOptions.M_STEP,
                   m_max=TruncationOptions.M_MAX, m_start=None, doublings=PrecisionOptions.MAX_DOUBLINGS,
                   **witness):
    """
    Increase M until the estimate of measure(G) changes by less than rtol (relative) over PLATEAU_STEPS
    consecutive steps of the same method. A truncated Gram matrix that fails to factorize restarts the
    search with the mantissa doubled, at most `doublings` times.
    :param seq: EigenSequence
    :param T: Horizon
    :param measure: matrix -> (value, detail)
    :param rtol: Relative plateau tolerance
    :param precision: PrecisionContext or bits
    :param m_step: Increment of M before cluster alignment
    :param m_max: Largest M tried before NoPlateau
    :param m_start: First M, defaults to m_step
    :param witness: Extra keys of the NoPlateau witness
    :return: PlateauResult
    """
    if not rtol > 0:
        raise InvalidParameters("rtol MUST BE POSITIVE", rtol=rtol)
    precision = resolve_precision(precision)
    while True:
        try:
            return _plateau_search(seq, T, measure, rtol, precision, m_step, m_max, m_start, witness)
        except NotPositiveDefinite as error:
            if doublings <= 0:
                raise
            doublings -= 1
            precision = precision.doubled()
            TextColor.warn("GRAM MATRIX NOT POSITIVE DEFINITE (PIVOT {}), RESTARTING AT {} BITS".format(
                error.witness.get('index'), precision.bits))


def norm_measure(k):
    def measure(matrix):
        ctx = matrix.precision.ctx
        return ctx.sqrt(matrix.factorize().inverse_diagonal()[k - 1]), None
    return measure


@dataclass
class TruncationResult:
    k: int
    T: object
    norm: object
    M_star: int
    history: list = field(default_factory=list)
    rtol: float = TruncationOptions.RTOL
    precision_bits: int = PrecisionOptions.DEFAULT_BITS
    # the whole (finite) sequence was used, the norm is exact
    complete: bool = False
    # ||s_k^{(M_star)}||, a lower estimate of the norm
    truncated_norm: object = None
    method: str = 'exact'

    def to_record(self):
        return {'k': self.k, 'T': str(self.T), 'norm': str(self.norm), 'truncated_norm': str(self.truncated_norm),
                'M_star': self.M_star, 'method': self.method,
                'history': [[M, str(raw), str(estimate)] for M, raw, estimate in self.history],
                'rtol': self.rtol, 'precision_bits': self.precision_bits, 'complete': self.complete}


def converge_truncation(seq, k, T, rtol=TruncationOptions.RTOL, precision=None, m_step=TruncationOptions.M_STEP,
                        m_max=TruncationOptions.M_MAX, m_start=None):
    """
    ||s_k|| at the plateau in M. A finite sequence used up to its last term gives the exact norm.
    :param seq: EigenSequence
    :param k: Index (1-based)
    :param T: Horizon
    :param rtol: Relative plateau tolerance
    :param precision: PrecisionContext or bits
    :param m_step: Increment of M
    :param m_max: Largest M tried before NoPlateau
    :param m_start: First M, defaults to max(k, m_step)
    :return: TruncationResult
    """
    if k < 1 or not rtol > 0:
        raise InvalidParameters("NEED k >= 1 AND rtol > 0", k=k, rtol=rtol)
    if seq.length is not None and k > seq.length:
        raise InvalidParameters("k EXCEEDS THE SEQUENCE LENGTH", k=k, length=seq.length)
    if m_max < k:
        raise InvalidParameters("m_max BELOW THE INDEX", k=k, m_max=m_max)
    result = plateau_search(seq, T, norm_measure(k), rtol, precision, m_step, m_max, max(k, m_start or m_step), k=k)
    ctx = result.precision.ctx
    return TruncationResult(k, to_mp(ctx, T), result.value, result.M_star, result.history, rtol,
                            result.precision.bits, result.complete, result.raw, result.method)


@dataclass(frozen=True)
class PlateauStability:
    norm: object
    doubled_norm: object
    extended_norm: object
    precision_drift: float
    truncation_drift: float
    threshold: float

    @property
    def passed(self):
        return self.precision_drift < self.threshold and self.truncation_drift < self.threshold


def plateau_stability(seq, k, T, rtol=TruncationOptions.RTOL, precision=None, extra_terms=10,
                      threshold=PrecisionOptions.STABILITY_DRIFT):
    """
    Drift of the plateau norm under a doubled mantissa and under M -> M + extra_terms, the extension being
    estimated by the same method as the plateau.
    """
    precision = resolve_precision(precision)
    result = converge_truncation(seq, k, T, rtol, precision)
    doubled = converge_truncation(seq, k, T, rtol, precision.doubled())
    extended = result.norm
    M = result.M_star + extra_terms
    if seq.length is not None:
        M = min(M, seq.length)
    if M > result.M_star:
        estimator = TruncationEstimator(seq, T, norm_measure(k), rtol, result.precision_bits, max(M, 1))
        estimator.raws = [(m, raw) for m, raw, _ in result.history]
        extended = estimator.estimate(aligned_order(seq, M, cluster_span(seq), precision=result.precision_bits)).value
    return PlateauStability(result.norm, doubled.norm, extended, relative_drift(result.norm, doubled.norm),
                            relative_drift(result.norm, extended), threshold)
