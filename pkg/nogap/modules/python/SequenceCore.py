import heapq
import math
import threading
from bisect import bisect_left, bisect_right
from collections import Counter, namedtuple
from dataclasses import dataclass, field, replace
from fractions import Fraction
from numbers import Rational

import numpy as np

from nogap.modules.python.Options import SequenceOptions, PrecisionOptions
from nogap.modules.python.Exceptions import InvalidParameters, PrefixExhausted, DegenerateSequence, DuplicateTerm
from nogap.modules.python.MpNumerics import resolve_precision, to_mp, abs2, context_of, extended_context
from nogap.modules.python.TextColor import TextColor
"""
Eigenvalue sequences and the class of sequences without a gap.

  1) SEQUENCES:
    - A sequence is 1-indexed and lazily generated. Generated sequences are merges of term families, each
      family being a smooth rule j -> lambda_j with, where available, exact rational terms and a closed
      form for the tail of the Weierstrass product prod_{j > c} (1 - z/lambda_j).
    - The merge order is decided once (exactly when every family is rational, otherwise at ORDER_BITS) and
      shared by every precision; values are memoized per precision.
  2) CLASS MEMBERSHIP:
    - check_class verifies the hypotheses H1..H6 and the upper separation bound on a finite prefix.
      A PASS is only "prefix-verified", a FAIL always carries a witness.
  3) PARAMETERS:
    - ClassParameters holds (beta, rho, q, p0, p1, p2, alpha, nu, delta) and the helper derivations.
"""

ExactTerm = namedtuple('ExactTerm', ['re', 'im'])


def exact_number(value):
    """
    Rational value of ints, Fractions and rational strings ("3/2", "0.25"). Floats are not exact.
    """
    if isinstance(value, bool):
        return None
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            return None
    return None


def exact_sqrt(value):
    """
    Square root of a non-negative Fraction when it is rational, otherwise None.
    """
    if value is None or value < 0:
        return None
    numerator, denominator = value.numerator, value.denominator
    root_n, root_d = math.isqrt(numerator), math.isqrt(denominator)
    if root_n * root_n == numerator and root_d * root_d == denominator:
        return Fraction(root_n, root_d)
    return None


def serialize_number(value):
    """
    JSON friendly form of a number: Fractions as "p/q", integers as int, extended floats as decimal strings.
    """
    if isinstance(value, bool):
        return value
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return int(value.numerator)
        return "{}/{}".format(value.numerator, value.denominator)
    if isinstance(value, (int, float, str)):
        return value
    return str(value)


def parse_number(value):
    """
    Inverse of serialize_number: rational strings become Fractions, other numeric strings extended floats.
    """
    if isinstance(value, str):
        exact = exact_number(value)
        if exact is not None:
            return exact
        try:
            return resolve_precision(None).ctx.mpf(value)
        except (ValueError, TypeError):
            raise InvalidParameters("CANNOT PARSE NUMBER", value=value)
    if isinstance(value, (list, tuple)):
        return [parse_number(item) for item in value]
    return value


def _exact_term(value):
    if isinstance(value, ExactTerm):
        return value
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise InvalidParameters("TERMS MUST BE NUMBERS OR [re, im] PAIRS", term=value)
        re_part, im_part = exact_number(value[0]), exact_number(value[1])
    else:
        re_part, im_part = exact_number(value), Fraction(0)
    if re_part is None or im_part is None:
        return None
    return ExactTerm(re_part, im_part)


def _exact_abs2(term):
    return term.re * term.re + term.im * term.im


def _order_context():
    return context_of(SequenceOptions.ORDER_BITS)


class TermFamily(object):
    """
    A smooth rule j -> lambda_j (j >= 1). Subclasses provide exact(j) when the terms are rational and
    log_tail(ctx, z, count) when the product over j > count has a closed form.
    """
    is_exact = False
    is_real = True

    def exact(self, j):
        return None

    def value(self, ctx, j):
        raise NotImplementedError

    def log_tail(self, ctx, z, count):
        return None


def log_square_product(ctx, shift, u):
    """
    log prod_{m >= 1} (1 - u/(shift + m)^2) through Gamma functions, valid for shift > -1.
    :return: (value, error estimate)
    """
    if u == 0:
        return ctx.zero, ctx.zero
    work = extended_context(ctx)
    shift = to_mp(work, shift)
    root = work.sqrt(to_mp(work, u))
    base = work.loggamma(1 + shift)
    value = 2 * base - work.loggamma(1 + shift + root) - work.loggamma(1 + shift - root)
    error = 8 * (abs(base) + 1) * work.ldexp(work.one, -work.prec)
    return to_mp(ctx, value), to_mp(ctx, error)


class ShiftedSquareFamily(TermFamily):
    """
    lambda_j = scale * (j + shift)^2 + offset.
    """
    def __init__(self, scale, shift=0, offset=0):
        self.scale = scale
        self.shift = shift
        self.offset = offset
        self._exact_parts = (exact_number(scale), exact_number(shift), exact_number(offset))
        self.is_exact = all(part is not None for part in self._exact_parts)

    def exact(self, j):
        if not self.is_exact:
            return None
        scale, shift, offset = self._exact_parts
        return ExactTerm(scale * (j + shift) ** 2 + offset, Fraction(0))

    def value(self, ctx, j):
        if self.is_exact:
            return to_mp(ctx, self.exact(j).re)
        return to_mp(ctx, self.scale) * (j + to_mp(ctx, self.shift)) ** 2 + to_mp(ctx, self.offset)

    def log_tail(self, ctx, z, count):
        # prod_{j > c} ((j + w)^2 - u) / ((j + w)^2 - u0) with u = (z - b)/A and u0 = -b/A
        scale = to_mp(ctx, self.scale)
        offset = to_mp(ctx, self.offset)
        shift = count + to_mp(ctx, self.shift)
        value, error = log_square_product(ctx, shift, (z - offset) / scale)
        base, base_error = log_square_product(ctx, shift, -offset / scale)
        return value - base, error + base_error

    def to_spec(self):
        return {'scale': serialize_number(self.scale), 'shift': serialize_number(self.shift),
                'offset': serialize_number(self.offset)}


class PerturbedSquareFamily(TermFamily):
    """
    lambda_j = j^2 + exp(-j^{2 gamma}). The tail product is the one of the squares corrected by power sums
    sum_{j > c} (lambda_j^{-m} - j^{-2m}), cached per (c, precision).
    """
    def __init__(self, gamma):
        self.gamma = gamma
        self._corrections = {}
        self._lock = threading.Lock()

    def epsilon(self, ctx, j):
        return ctx.exp(-ctx.power(j, 2 * to_mp(ctx, self.gamma)))

    def value(self, ctx, j):
        return ctx.mpf(j) ** 2 + self.epsilon(ctx, j)

    def _power_sums(self, ctx, count):
        key = (count, ctx.prec)
        with self._lock:
            if key in self._corrections:
                return self._corrections[key]
        work = extended_context(ctx)
        terms = ctx.prec // 4 + 8
        horizon = (ctx.prec * math.log(2) + 16) ** (1.0 / (2 * float(self.gamma)))
        last = int(min(count + SequenceOptions.MAX_TAIL_TERMS, max(count, math.ceil(horizon))))
        sums = [work.zero] * terms
        for j in range(count + 1, last + 1):
            y = work.one / (j * j)
            lam = j * j + self.epsilon(work, j)
            x = 1 / lam
            difference = -self.epsilon(work, j) * x * y
            # x^m - y^m = (x - y) h_m with h_{m+1} = x h_m + y^m
            h, y_power = work.one, y
            for m in range(terms):
                sums[m] += difference * h
                h = x * h + y_power
                y_power *= y
        tail_start = max(last, 1)
        remainder = self.epsilon(work, tail_start + 1) / (3 * work.mpf(tail_start) ** 3)
        result = ([to_mp(ctx, s) for s in sums], to_mp(ctx, remainder))
        with self._lock:
            self._corrections[key] = result
        return result

    def log_tail(self, ctx, z, count):
        ratio = abs(z) / ctx.mpf(count + 1) ** 2
        if ratio > 0.5:
            return None
        value, error = log_square_product(ctx, count, z)
        sums, remainder = self._power_sums(ctx, count)
        correction = ctx.zero
        z_power = ctx.one
        for m, power_sum in enumerate(sums, start=1):
            z_power *= z
            correction += z_power * power_sum / m
        truncation = abs(z) * abs(sums[0]) * ratio ** len(sums) / (1 - ratio)
        return value - correction, error + truncation + 2 * abs(z) * remainder

    def to_spec(self):
        return {'gamma': serialize_number(self.gamma)}


class EigenSequence(object):
    """
    Base class of eigenvalue sequences. Terms are 1-indexed; the order is materialized lazily under a
    writer lock while any number of readers use the memoized values.
    """
    kind = 'abstract'
    length = None

    def __init__(self, label, params=None):
        self.label = label
        self.params = params
        # generator specific facts (minimal time, resonance index, ...)
        self.metadata = {}
        self._lock = threading.RLock()
        self._values = {}

    @property
    def known_prefix_length(self):
        raise NotImplementedError

    @property
    def is_exact(self):
        return False

    @property
    def is_real(self):
        raise NotImplementedError

    def _ensure(self, n):
        raise NotImplementedError

    def _exact(self, k):
        return None

    def _value(self, precision, k):
        raise NotImplementedError

    def origin(self, k):
        """
        Provenance of term k as (family or parent position, original index).
        """
        return 0, k

    def log_tail(self, ctx, z, count):
        """
        log prod_{n > count} (1 - z/Lambda_n) with an error bound, or None when no closed form exists.
        """
        return None

    def to_spec(self):
        raise NotImplementedError

    def ensure(self, n):
        if self.length is not None and n > self.length:
            raise PrefixExhausted("FINITE SEQUENCE", requested=n, available=self.length, sequence=self.label)
        if n > SequenceOptions.MAX_TERMS:
            raise PrefixExhausted("TERM CAP REACHED", requested=n, cap=SequenceOptions.MAX_TERMS,
                                  sequence=self.label)
        if n > self.known_prefix_length:
            with self._lock:
                self._ensure(n)

    def exact_term(self, k):
        if k < 1:
            raise InvalidParameters("SEQUENCE INDICES START AT 1", k=k)
        self.ensure(k)
        return self._exact(k)

    def exact_prefix(self, n):
        """
        Exact terms 1..n, or None when some term has no exact form.
        """
        if not self.is_exact:
            return None
        self.ensure(n)
        return [self._exact(k) for k in range(1, n + 1)]

    def term(self, k, precision=None):
        if k < 1:
            raise InvalidParameters("SEQUENCE INDICES START AT 1", k=k)
        precision = resolve_precision(precision)
        cache = self._values.get(precision.bits)
        if cache is not None and len(cache) >= k:
            return cache[k - 1]
        self.ensure(k)
        with self._lock:
            cache = self._values.setdefault(precision.bits, [])
            while len(cache) < k:
                cache.append(self._value(precision, len(cache) + 1))
        return cache[k - 1]

    def terms(self, n, precision=None):
        precision = resolve_precision(precision)
        if n <= 0:
            return []
        self.term(n, precision)
        return list(self._values[precision.bits][:n])

    def modulus(self, k, precision=None):
        return abs(self.term(k, precision))

    def __repr__(self):
        return "{}({})".format(type(self).__name__, self.label)


class FamilySequence(EigenSequence):
    """
    Increasing merge of term families. An arrangement callable k -> (family, index) replaces the heap merge
    where the order is known in closed form.
    """
    kind = 'families'

    def __init__(self, families, label, params=None, spec=None, arrangement=None, joint_tail=None,
                 verify_arrangement=True):
        super(FamilySequence, self).__init__(label, params)
        if not families:
            raise InvalidParameters("A SEQUENCE NEEDS AT LEAST ONE FAMILY", sequence=label)
        self.families = tuple(families)
        self.spec = spec
        self.arrangement = arrangement
        self.joint_tail = joint_tail
        self.verify_arrangement = verify_arrangement
        self._order = []
        self._heap = None
        self._last_key = None
        self._exact_keys = all(family.is_exact for family in self.families)

    @property
    def known_prefix_length(self):
        return len(self._order)

    @property
    def is_exact(self):
        return self._exact_keys

    @property
    def is_real(self):
        return all(family.is_real for family in self.families)

    def _key(self, position, j):
        family = self.families[position]
        if self._exact_keys:
            term = family.exact(j)
            return _exact_abs2(term), term.im
        ctx = _order_context()
        value = family.value(ctx, j)
        return abs2(ctx, value), ctx.im(value)

    def _ensure(self, n):
        while len(self._order) < n:
            k = len(self._order) + 1
            if self.arrangement is not None:
                position, j = self.arrangement(k)
                key = self._key(position, j) if self.verify_arrangement else None
            else:
                if self._heap is None:
                    self._heap = [(self._key(p, 1), p, 1) for p in range(len(self.families))]
                    heapq.heapify(self._heap)
                key, position, j = heapq.heappop(self._heap)
                heapq.heappush(self._heap, (self._key(position, j + 1), position, j + 1))
            if key is not None and self._last_key is not None:
                if key == self._last_key:
                    previous = self._order[-1]
                    raise DuplicateTerm(sequence=self.label, k=k, family=position, index=j,
                                        previous_family=previous[0], previous_index=previous[1])
                if key < self._last_key:
                    raise DegenerateSequence("ARRANGEMENT IS NOT INCREASING", sequence=self.label, k=k)
            self._last_key = key
            self._order.append((position, j))

    def _exact(self, k):
        position, j = self._order[k - 1]
        return self.families[position].exact(j)

    def _value(self, precision, k):
        position, j = self._order[k - 1]
        return self.families[position].value(precision.ctx, j)

    def origin(self, k):
        self.ensure(k)
        return self._order[k - 1]

    def family_counts(self, count):
        self.ensure(count)
        counts = Counter(position for position, _ in self._order[:count])
        return [counts.get(position, 0) for position in range(len(self.families))]

    def log_tail(self, ctx, z, count):
        counts = self.family_counts(count)
        if self.joint_tail is not None:
            return self.joint_tail(ctx, z, counts)
        value, error = ctx.zero, ctx.zero
        for family, family_count in zip(self.families, counts):
            tail = family.log_tail(ctx, z, family_count)
            if tail is None:
                return None
            value += tail[0]
            error += tail[1]
        return value, error

    def to_spec(self):
        if self.spec is None:
            raise InvalidParameters("SEQUENCE HAS NO SERIALIZABLE SPEC", sequence=self.label)
        return dict(self.spec)


class ExplicitSequence(EigenSequence):
    """
    A finite sequence given term by term, kept in the given order.
    """
    kind = 'explicit'

    def __init__(self, terms, label='explicit', params=None):
        super(ExplicitSequence, self).__init__(label, params)
        terms = list(terms)
        if not terms:
            raise InvalidParameters("EMPTY SEQUENCE", sequence=label)
        self._raw = []
        for term in terms:
            if isinstance(term, (list, tuple)):
                if len(term) != 2:
                    raise InvalidParameters("TERMS MUST BE NUMBERS OR [re, im] PAIRS", term=term)
                self._raw.append((parse_number(term[0]), parse_number(term[1])))
            elif isinstance(term, complex):
                self._raw.append((term.real, term.imag))
            else:
                self._raw.append((parse_number(term), 0))
        exact = [_exact_term(term) for term in self._raw]
        self._exact_terms = exact if all(term is not None for term in exact) else None
        self.length = len(self._raw)

    @property
    def known_prefix_length(self):
        return self.length

    @property
    def is_exact(self):
        return self._exact_terms is not None

    @property
    def is_real(self):
        ctx = context_of(PrecisionOptions.MIN_BITS)
        return all(to_mp(ctx, im) == 0 for _, im in self._raw)

    def _ensure(self, n):
        return None

    def _exact(self, k):
        if self._exact_terms is None:
            return None
        return self._exact_terms[k - 1]

    def _value(self, precision, k):
        if self._exact_terms is not None:
            return to_mp(precision.ctx, tuple(self._exact_terms[k - 1]))
        return to_mp(precision.ctx, self._raw[k - 1])

    def log_tail(self, ctx, z, count):
        if count >= self.length:
            return ctx.zero, ctx.zero
        return None

    def to_spec(self):
        return {'kind': 'explicit',
                'terms': [[serialize_number(re_part), serialize_number(im_part)] for re_part, im_part in self._raw]}


class MergedSequence(EigenSequence):
    """
    Merge of two sequences, nondecreasing in modulus with ties broken by ascending imaginary part.
    """
    kind = 'merged'

    def __init__(self, first, second, label=None, params=None, spec=None):
        super(MergedSequence, self).__init__(label or "{}+{}".format(first.label, second.label), params)
        self.parents = (first, second)
        self.spec = spec
        if first.length is not None and second.length is not None:
            self.length = first.length + second.length
        self._exact_keys = first.is_exact and second.is_exact
        self._order = []
        self._heap = None
        self._last_key = None

    @property
    def known_prefix_length(self):
        return len(self._order)

    @property
    def is_exact(self):
        return self._exact_keys

    @property
    def is_real(self):
        return all(parent.is_real for parent in self.parents)

    def _key(self, position, index):
        parent = self.parents[position]
        if self._exact_keys:
            term = parent.exact_term(index)
            return _exact_abs2(term), term.im
        ctx = _order_context()
        value = parent.term(index, SequenceOptions.ORDER_BITS)
        return abs2(ctx, value), ctx.im(value)

    def _push(self, position, index):
        parent = self.parents[position]
        if parent.length is not None and index > parent.length:
            return
        heapq.heappush(self._heap, (self._key(position, index), position, index))

    def _ensure(self, n):
        if self._heap is None:
            self._heap = []
            self._push(0, 1)
            self._push(1, 1)
        while len(self._order) < n:
            if not self._heap:
                raise PrefixExhausted("FINITE SEQUENCE", requested=n, sequence=self.label)
            key, position, index = heapq.heappop(self._heap)
            if self._last_key is not None and key == self._last_key:
                previous = self._order[-1]
                raise DuplicateTerm(sequence=self.label, k=len(self._order) + 1, parent=position, index=index,
                                    previous_parent=previous[0], previous_index=previous[1])
            self._last_key = key
            self._order.append((position, index))
            self._push(position, index + 1)

    def _exact(self, k):
        position, index = self._order[k - 1]
        return self.parents[position].exact_term(index)

    def _value(self, precision, k):
        position, index = self._order[k - 1]
        return self.parents[position].term(index, precision)

    def origin(self, k):
        self.ensure(k)
        return self._order[k - 1]

    def log_tail(self, ctx, z, count):
        self.ensure(count)
        counts = Counter(position for position, _ in self._order[:count])
        value, error = ctx.zero, ctx.zero
        for position, parent in enumerate(self.parents):
            tail = parent.log_tail(ctx, z, counts.get(position, 0))
            if tail is None:
                return None
            value += tail[0]
            error += tail[1]
        return value, error

    def to_spec(self):
        if self.spec is not None:
            return dict(self.spec)
        return {'kind': 'merged', 'parts': [parent.to_spec() for parent in self.parents]}


def merge_increasing(first, second, label=None, params=None, spec=None):
    """
    Merge two sequences into one nondecreasing in modulus. The provenance (parent, original index) of every
    term is available through origin(k). Equal terms raise DuplicateTerm when the merge reaches them.
    :param first: EigenSequence
    :param second: EigenSequence
    :param spec: Catalog spec returned by to_spec, the parts are serialized when absent
    :return: MergedSequence
    """
    return MergedSequence(first, second, label, params, spec)


class _CountingTable(object):
    """
    Squared moduli of a prefix, sorted, extended on demand. Exact Fractions or extended floats.
    """
    def __init__(self, seq, exact, precision, strict=True):
        self.seq = seq
        self.exact = exact
        self.precision = precision
        self.strict = strict
        self.keys = []

    def _squared_modulus(self, k):
        if self.exact:
            return _exact_abs2(self.seq.exact_term(k))
        return abs2(self.precision.ctx, self.seq.term(k, self.precision))

    def extend_to(self, n):
        n = min(n, self.seq.length) if self.seq.length is not None else n
        if n > len(self.keys):
            self.seq.ensure(n)
            self.keys.extend(self._squared_modulus(k) for k in range(len(self.keys) + 1, n + 1))
            self.keys.sort()

    def cover(self, squared_radius):
        """
        Extend until the last known squared modulus exceeds squared_radius.
        """
        size = max(len(self.keys), 16)
        self.extend_to(size)
        while self.keys[-1] <= squared_radius:
            if self.seq.length is not None and len(self.keys) >= self.seq.length:
                if not self.strict:
                    return
                raise PrefixExhausted("NO TERMS BEYOND RADIUS", sequence=self.seq.label, available=self.seq.length)
            size *= 2
            self.extend_to(size)

    def count(self, squared_radius):
        self.cover(squared_radius)
        return bisect_right(self.keys, squared_radius)

    def count_below(self, squared_radius):
        self.cover(squared_radius)
        return bisect_left(self.keys, squared_radius)


def counting_function(seq, r, precision=None):
    """
    N(r) = #{k : |Lambda_k| <= r}, extending the materialized prefix until it passes r.
    :param seq: EigenSequence
    :param r: Positive radius
    :return: integer
    """
    precision = resolve_precision(precision)
    exact_radius = exact_number(r)
    if exact_radius is None and isinstance(r, float):
        exact_radius = Fraction(repr(r))
    exact = seq.is_exact and exact_radius is not None
    if exact:
        if exact_radius <= 0:
            raise InvalidParameters("RADIUS MUST BE POSITIVE", r=r)
        squared_radius = exact_radius * exact_radius
    else:
        radius = to_mp(precision.ctx, r)
        if not radius > 0:
            raise InvalidParameters("RADIUS MUST BE POSITIVE", r=r)
        squared_radius = radius * radius
    return _CountingTable(seq, exact, precision).count(squared_radius)


def condensation_product_exact(seq, k, q):
    """
    P_k as an exact Fraction for real rational sequences (or its square for complex rational ones).
    :return: (value, is_squared) or None when the sequence is not exact
    """
    if not seq.is_exact:
        return None
    window = _window(seq, k, q)
    center = seq.exact_term(k)
    real = all(seq.exact_term(n).im == 0 for n in window) and center.im == 0
    product = Fraction(1)
    for n in window:
        other = seq.exact_term(n)
        if real:
            gap = abs(center.re - other.re)
        else:
            gap = (center.re - other.re) ** 2 + (center.im - other.im) ** 2
        if gap == 0:
            raise DegenerateSequence(sequence=seq.label, k=k, n=n)
        product *= gap
    return 1 / product, not real


def _window(seq, k, q):
    if k < 1 or q < 1:
        raise InvalidParameters("k AND q MUST BE POSITIVE", k=k, q=q)
    last = k + q - 1
    if seq.length is not None:
        last = min(last, seq.length)
    return [n for n in range(max(1, k - q + 1), last + 1) if n != k]


def condensation_product(seq, k, q, precision=None):
    """
    P_k = 1 / prod_{1 <= |k - n| < q} |Lambda_k - Lambda_n|, equal to 1 when q = 1.
    :param seq: EigenSequence
    :param k: Index (1-based)
    :param q: Grouping parameter
    :param precision: PrecisionContext or bits
    :return: positive mpf
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    if q == 1:
        if k < 1:
            raise InvalidParameters("k MUST BE POSITIVE", k=k)
        return ctx.one
    exact = condensation_product_exact(seq, k, q)
    if exact is not None:
        value, squared = exact
        value = to_mp(ctx, value)
        return ctx.sqrt(value) if squared else value
    center = seq.term(k, precision)
    product = ctx.one
    for n in _window(seq, k, q):
        gap = abs(center - seq.term(n, precision))
        if gap == 0:
            raise DegenerateSequence(sequence=seq.label, k=k, n=n)
        product *= gap
    return 1 / product


_PARAMETER_NAMES = ('beta', 'rho', 'q', 'p0', 'p1', 'p2', 'alpha', 'nu', 'delta')


@dataclass(frozen=True)
class ClassParameters:
    """
    Parameters (beta, rho, q, p0, p1, p2, alpha) of the class, nu of the upper separation bound and delta of
    the sector estimate Re(Lambda) >= delta |Lambda|. Values may be Fractions (exact checks), floats or mpf.
    """
    beta: object
    rho: object
    q: int
    p0: object
    p1: object
    p2: object
    alpha: object
    nu: object
    delta: object = 1
    delta_empirical: bool = False

    def __post_init__(self):
        for name in _PARAMETER_NAMES:
            value = getattr(self, name)
            if isinstance(value, str):
                object.__setattr__(self, name, parse_number(value))
        q = self.q
        if isinstance(q, bool) or float(q) != int(float(q)) or int(float(q)) < 1:
            raise InvalidParameters("q MUST BE A POSITIVE INTEGER", q=q)
        object.__setattr__(self, 'q', int(float(q)))
        if float(self.beta) < 0:
            raise InvalidParameters("beta MUST BE NON-NEGATIVE", beta=self.beta)
        for name in ('rho', 'p0', 'p1', 'p2', 'alpha', 'nu', 'delta'):
            if not float(getattr(self, name)) > 0:
                raise InvalidParameters("{} MUST BE POSITIVE".format(name), **{name: getattr(self, name)})
        if float(self.delta) > 1:
            raise InvalidParameters("delta MUST LIE IN (0, 1]", delta=self.delta)
        if not _leq(self.p0, self.p1) or not _leq(self.p0, self.p2):
            raise InvalidParameters("p1 AND p2 MUST BE AT LEAST p0", p0=self.p0, p1=self.p1, p2=self.p2)

    @property
    def is_exact(self):
        return all(exact_number(getattr(self, name)) is not None for name in _PARAMETER_NAMES)

    def consistency_issues(self):
        """
        Relations every member of the class satisfies between its parameters.
        :return: list of violated relations (empty when consistent)
        """
        issues = []
        if not _leq(_product(self.p1, self.p1, self.rho), 1):
            issues.append("p1 <= 1/sqrt(rho)")
        if not _leq(1, _product(self.p2, self.p2, self.nu)):
            issues.append("1/sqrt(nu) <= p2")
        if not _leq(_product(self.rho, self.p0, self.p0), 1):
            issues.append("rho <= 1/p0^2")
        if float(self.beta) == 0 and exact_number(self.delta) != 1:
            issues.append("delta = 1 when beta = 0")
        return issues

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        values = {name: serialize_number(getattr(self, name)) for name in _PARAMETER_NAMES}
        values['delta_empirical'] = self.delta_empirical
        return values

    @classmethod
    def from_dict(cls, values):
        unknown = set(values) - set(_PARAMETER_NAMES) - {'delta_empirical'}
        if unknown:
            raise InvalidParameters("UNKNOWN PARAMETER FIELDS", fields=sorted(unknown))
        missing = [name for name in _PARAMETER_NAMES[:-1] if name not in values]
        if missing:
            raise InvalidParameters("MISSING PARAMETER FIELDS", fields=missing)
        return cls(**{name: parse_number(value) for name, value in values.items()})


def _product(*values):
    exact = [exact_number(value) for value in values]
    ctx = resolve_precision(None).ctx
    result = Fraction(1) if all(value is not None for value in exact) else ctx.one
    for value, exact_value in zip(values, exact):
        result *= exact_value if isinstance(result, Fraction) else to_mp(ctx, value)
    return result


def _leq(a, b, precision=None):
    """
    a <= b, exactly for rationals and with a relative tolerance of 2^{-(bits - 8)} otherwise.
    """
    exact_a, exact_b = exact_number(a), exact_number(b)
    if exact_a is not None and exact_b is not None:
        return exact_a <= exact_b
    precision = resolve_precision(precision)
    ctx = precision.ctx
    a, b = to_mp(ctx, a), to_mp(ctx, b)
    tolerance = ctx.ldexp(ctx.one, -(precision.bits - SequenceOptions.CHECK_GUARD_BITS))
    return a <= b + tolerance * (abs(a) + abs(b))


@dataclass
class HypothesisResult:
    name: str
    status: str
    witness: dict = field(default_factory=dict)
    margin: object = None
    note: str = ''

    @property
    def label(self):
        if self.status == 'PASS':
            return 'prefix-verified'
        return self.status.lower()


@dataclass
class ClassReport:
    sequence: str
    checked_prefix: int
    exact: bool
    results: dict
    counting_margin: float

    @property
    def passed(self):
        return all(result.status == 'PASS' for result in self.results.values())

    def status(self, name):
        return self.results[name].status

    def failures(self):
        return [result for result in self.results.values() if result.status == 'FAIL']

    def to_rows(self):
        rows = []
        for result in self.results.values():
            rows.append({'hypothesis': result.name,
                         'status': result.status,
                         'label': result.label,
                         'witness': ";".join("{}={}".format(key, value) for key, value in result.witness.items()),
                         'margin': '' if result.margin is None else result.margin,
                         'note': result.note})
        return rows

    def to_record(self):
        return {'sequence': self.sequence,
                'checked_prefix': self.checked_prefix,
                'exact': self.exact,
                'counting_margin': self.counting_margin,
                'passed': self.passed,
                'results': self.to_rows()}


class _Arithmetic(object):
    """
    Comparisons used by check_class: exact on Fractions, tolerant on extended floats.
    """
    def __init__(self, exact, precision):
        self.exact = exact
        self.precision = precision
        self.ctx = precision.ctx
        self.tolerance = self.ctx.ldexp(self.ctx.one, -(precision.bits - SequenceOptions.CHECK_GUARD_BITS))

    def number(self, value):
        if self.exact:
            return exact_number(value)
        return to_mp(self.ctx, value)

    def leq(self, a, b):
        if self.exact:
            return a <= b
        return a <= b + self.tolerance * (abs(a) + abs(b))

    def positive(self, a):
        if self.exact:
            return a > 0
        return a > self.tolerance

    def is_zero(self, a, scale):
        if self.exact:
            return a == 0
        return abs(a) <= self.tolerance * scale


def check_class(seq, params, prefix=SequenceOptions.DEFAULT_PREFIX, precision=None):
    """
    Check the class hypotheses on the first prefix terms.
    H1 distinct terms, H2 Re > 0, H3 |Im| <= beta sqrt(Re), H4 moduli nondecreasing,
    H5 rho |k^2 - n^2| <= |Lambda_k - Lambda_n| when |k - n| >= q,
    nu_bound |Lambda_k - Lambda_n| <= nu |k^2 - n^2| for all pairs,
    H6 -alpha + p1 sqrt(r) <= N(r) <= alpha + p2 sqrt(r) at every jump, every left limit and a log grid.
    :param seq: EigenSequence
    :param params: ClassParameters
    :param prefix: Number of terms checked
    :param precision: PrecisionContext or bits for the floating path
    :return: ClassReport
    """
    precision = resolve_precision(precision)
    if prefix < params.q + 2:
        raise InvalidParameters("PREFIX MUST BE AT LEAST q + 2", prefix=prefix, q=params.q)
    if seq.length is not None and prefix > seq.length:
        TextColor.warn("CLASS CHECK PREFIX CLIPPED TO SEQUENCE LENGTH " + str(seq.length))
        prefix = seq.length
        if prefix < params.q + 2:
            raise InvalidParameters("SEQUENCE SHORTER THAN q + 2", length=seq.length, q=params.q)

    exact = seq.is_exact and params.is_exact
    arithmetic = _Arithmetic(exact, precision)
    ctx = precision.ctx
    if exact:
        terms = seq.exact_prefix(prefix)
    else:
        terms = [ExactTerm(ctx.re(value), ctx.im(value)) for value in seq.terms(prefix, precision)]
    squared = [term.re * term.re + term.im * term.im for term in terms]
    real = all(term.im == 0 for term in terms)

    beta, rho, nu = arithmetic.number(params.beta), arithmetic.number(params.rho), arithmetic.number(params.nu)
    alpha, p1, p2 = arithmetic.number(params.alpha), arithmetic.number(params.p1), arithmetic.number(params.p2)
    results = {}

    # H2 and H3
    witness_h2, witness_h3 = None, None
    for k, term in enumerate(terms, start=1):
        if witness_h2 is None and not arithmetic.positive(term.re):
            witness_h2 = {'k': k, 're': term.re}
        if witness_h3 is None and (term.re < 0 or not arithmetic.leq(term.im * term.im, beta * beta * term.re)):
            witness_h3 = {'k': k, 'im': term.im, 're': term.re}
    results['H2'] = _result('H2', witness_h2)
    results['H3'] = _result('H3', witness_h3)

    # H4
    witness_h4 = None
    for k in range(1, prefix):
        if not arithmetic.leq(squared[k - 1], squared[k]):
            witness_h4 = {'k': k, 'n': k + 1}
            break
    results['H4'] = _result('H4', witness_h4)

    # pairwise hypotheses
    witness_h1, witness_h5, witness_nu = None, None, None
    h5_margin, nu_margin = None, None
    for n in range(2, prefix + 1):
        term_n = terms[n - 1]
        for k in range(1, n):
            term_k = terms[k - 1]
            index_gap = n * n - k * k
            if real:
                distance = abs(term_n.re - term_k.re)
                lower, upper = rho * index_gap, nu * index_gap
                scale = abs(term_n.re) + abs(term_k.re)
            else:
                distance = (term_n.re - term_k.re) ** 2 + (term_n.im - term_k.im) ** 2
                lower, upper = (rho * index_gap) ** 2, (nu * index_gap) ** 2
                scale = squared[n - 1] + squared[k - 1]
            if witness_h1 is None and arithmetic.is_zero(distance, scale):
                witness_h1 = {'k': k, 'n': n}
            if n - k >= params.q:
                ratio = distance / lower
                h5_margin = ratio if h5_margin is None or ratio < h5_margin else h5_margin
                if witness_h5 is None and not arithmetic.leq(lower, distance):
                    witness_h5 = {'k': k, 'n': n}
            ratio = distance / upper
            nu_margin = ratio if nu_margin is None or ratio > nu_margin else nu_margin
            if witness_nu is None and not arithmetic.leq(distance, upper):
                witness_nu = {'k': k, 'n': n}
    if not real:
        h5_margin = None if h5_margin is None else math.sqrt(float(h5_margin))
        nu_margin = None if nu_margin is None else math.sqrt(float(nu_margin))
    results['H1'] = _result('H1', witness_h1)
    results['H5'] = _result('H5', witness_h5, None if h5_margin is None else float(h5_margin))
    results['nu_bound'] = _result('nu_bound', witness_nu, None if nu_margin is None else float(nu_margin))

    # H6
    witness_h6, counting_margin = _check_counting(seq, terms, squared, prefix, exact, precision, arithmetic,
                                                  alpha, p1, p2)
    results['H6'] = _result('H6', witness_h6, counting_margin)

    issues = params.consistency_issues()
    results['consistency'] = HypothesisResult('consistency', 'FAIL' if issues else 'PASS',
                                              {'violated': "|".join(issues)} if issues else {},
                                              note='parameter relations')
    if params.delta_empirical:
        results['consistency'].note += '; delta is empirical'

    ordered = {name: results[name] for name in ('H1', 'H2', 'H3', 'H4', 'H5', 'nu_bound', 'H6', 'consistency')}
    return ClassReport(seq.label, prefix, exact, ordered, counting_margin)


def _result(name, witness, margin=None):
    if witness is None:
        return HypothesisResult(name, 'PASS', {}, margin)
    return HypothesisResult(name, 'FAIL', {key: str(value) for key, value in witness.items()}, margin)


def _check_counting(seq, terms, squared, prefix, exact, precision, arithmetic, alpha, p1, p2):
    ctx = precision.ctx
    table = _CountingTable(seq, exact, precision, strict=False)
    table.extend_to(prefix if seq.length is None else seq.length)

    first = math.sqrt(float(squared[0]))
    last = math.sqrt(float(squared[-1]))
    low, high = first / 2, 2 * last
    grid = np.geomspace(low, high, SequenceOptions.H6_GRID_POINTS)
    probes = []
    for radius in grid:
        radius = Fraction(float(radius)) if exact else to_mp(ctx, float(radius))
        probes.append(radius * radius)
    if seq.length is not None:
        # a finite sequence is only probed below its last term
        probes = [value for value in probes if value < table.keys[-1]]

    p1_fourth, p2_fourth = p1 ** 4, p2 ** 4
    witness = None
    margin = None

    def check(squared_radius, count):
        # -alpha + p1 sqrt(r) <= N and N <= alpha + p2 sqrt(r), compared through fourth powers
        left, right = count + alpha, count - alpha
        lower_ok = left >= 0 and arithmetic.leq(p1_fourth * squared_radius, left ** 4)
        upper_ok = right <= 0 or arithmetic.leq(right ** 4, p2_fourth * squared_radius)
        root = float(squared_radius) ** 0.25
        slack = min(float(left) - float(p1) * root, float(alpha) + float(p2) * root - count)
        return lower_ok, upper_ok, slack

    points = []
    for k in range(1, prefix + 1):
        points.append((squared[k - 1], table.count(squared[k - 1]), 'jump', k))
        points.append((squared[k - 1], table.count_below(squared[k - 1]), 'left', k))
    for value in probes:
        points.append((value, table.count(value), 'grid', None))

    for squared_radius, count, kind, k in points:
        lower_ok, upper_ok, slack = check(squared_radius, count)
        margin = slack if margin is None else min(margin, slack)
        if witness is None and not (lower_ok and upper_ok):
            witness = {'r': ctx.nstr(ctx.sqrt(to_mp(ctx, squared_radius)), 12), 'N': count,
                       'side': 'lower' if not lower_ok else 'upper', 'point': kind}
            if k is not None:
                witness['k'] = k
    return witness, margin


def derive_params_real(p, alpha, precision=None):
    """
    q, rho and nu for a real sequence with p1 = p2 = p: q = ceil(3 alpha), rho = 1/(3 p^2),
    nu = ((2 + alpha)/p)^2 / 3.
    :return: (q, rho, nu), exact when p and alpha are rational
    """
    exact_p, exact_alpha = exact_number(p), exact_number(alpha)
    if exact_p is not None and exact_alpha is not None:
        if exact_p <= 0 or exact_alpha <= 0:
            raise InvalidParameters("p AND alpha MUST BE POSITIVE", p=p, alpha=alpha)
        q = math.ceil(3 * exact_alpha)
        return q, 1 / (3 * exact_p ** 2), ((2 + exact_alpha) / exact_p) ** 2 / 3
    ctx = resolve_precision(precision).ctx
    p, alpha = to_mp(ctx, p), to_mp(ctx, alpha)
    if not (p > 0 and alpha > 0):
        raise InvalidParameters("p AND alpha MUST BE POSITIVE", p=p, alpha=alpha)
    return int(ctx.ceil(3 * alpha)), 1 / (3 * p ** 2), ((2 + alpha) / p) ** 2 / 3


def _sqrt_value(value, ctx):
    exact = exact_sqrt(exact_number(value))
    if exact is not None:
        return exact
    return ctx.sqrt(to_mp(ctx, value))


def derive_params_from_gap(rho, nu, q, lambda1_abs, precision=None):
    """
    p0 = p1 = 1/sqrt(nu), p2 = 1/sqrt(rho) and
    alpha = max{q - sqrt(|L1|/rho), sqrt(|L1|/rho + 1), sqrt(|L1|/nu) + 1}.
    :return: (p0, p1, p2, alpha), exact wherever the square roots are rational
    """
    ctx = resolve_precision(precision).ctx
    values = [exact_number(v) for v in (rho, nu, lambda1_abs)]
    exact = all(v is not None for v in values)
    if exact:
        rho, nu, lambda1_abs = values
    else:
        rho, nu, lambda1_abs = (to_mp(ctx, v) for v in (rho, nu, lambda1_abs))
    if not (rho > 0 and nu > 0 and lambda1_abs > 0) or q < 1:
        raise InvalidParameters("rho, nu, |Lambda_1| MUST BE POSITIVE AND q >= 1", rho=rho, nu=nu, q=q)

    def inverse_root(value):
        root = _sqrt_value(value, ctx)
        return 1 / root

    p1 = inverse_root(nu)
    p2 = inverse_root(rho)
    candidates = [q - _sqrt_value(lambda1_abs / rho, ctx),
                  _sqrt_value(lambda1_abs / rho + 1, ctx),
                  _sqrt_value(lambda1_abs / nu, ctx) + 1]
    alpha = max(candidates, key=lambda value: to_mp(ctx, value))
    return p1, p1, p2, alpha


@dataclass(frozen=True)
class IndexBoundFit:
    constant: object
    constant_real: object
    lower_holds: bool
    lower_witness: object
    prefix: int


def fit_index_constant(seq, params, prefix=SequenceOptions.DEFAULT_PREFIX, precision=None):
    """
    Two-sided index bound (k - alpha)/p2 <= sqrt|Lambda_k| <= k/p1 + C (1 + q)/(rho p1^2).
    Checks the lower side and fits the smallest C of the upper side, also in the real-sequence form
    sqrt|Lambda_k| <= k/p1 + C/(rho p1^2).
    :return: IndexBoundFit
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    alpha, rho = to_mp(ctx, params.alpha), to_mp(ctx, params.rho)
    p1, p2 = to_mp(ctx, params.p1), to_mp(ctx, params.p2)
    tolerance = precision.tolerance
    best, witness = None, None
    for k in range(1, prefix + 1):
        root = ctx.sqrt(seq.modulus(k, precision))
        if witness is None and (k - alpha) / p2 > root * (1 + tolerance):
            witness = k
        candidate = (root - k / p1) * rho * p1 * p1
        best = candidate if best is None or candidate > best else best
    return IndexBoundFit(best / (1 + params.q), best, witness is None, witness, prefix)


def empirical_delta(seq, prefix=SequenceOptions.DEFAULT_PREFIX, precision=None):
    """
    min Re(Lambda_k)/|Lambda_k| over the prefix.
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    values = seq.terms(min(prefix, seq.length or prefix), precision)
    return min(ctx.re(value) / abs(value) for value in values)
