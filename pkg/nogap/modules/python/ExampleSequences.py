import math
from dataclasses import dataclass
from fractions import Fraction

from nogap.modules.python.Options import SequenceOptions
from nogap.modules.python.Exceptions import InvalidParameters, InvalidShift, RationalRootCollision, H2Violation
from nogap.modules.python.MpNumerics import resolve_precision, to_mp, context_of
from nogap.modules.python.SequenceCore import ClassParameters, FamilySequence, ExplicitSequence, TermFamily, \
    ShiftedSquareFamily, PerturbedSquareFamily, merge_increasing, derive_params_real, exact_number, exact_sqrt, \
    serialize_number, parse_number, log_square_product, condensation_product
from nogap.modules.python.TextColor import TextColor
"""
Catalog of eigenvalue sequences with the class parameters known for them.

Every generator returns a lazily generated sequence with ClassParameters attached as seq.params. Sequences are
described in JSON as {"kind": ..., "params": {...}} and rebuilt with sequence_from_spec.
"""


def _number(value, name):
    value = parse_number(value)
    if value is None or isinstance(value, bool):
        raise InvalidParameters("MISSING NUMERIC VALUE", field=name)
    return value


def _rational_or_mp(value, ctx):
    exact = exact_number(value)
    return exact if exact is not None else to_mp(ctx, value)


def _sqrt(value, ctx):
    exact = exact_sqrt(exact_number(value))
    if exact is not None:
        return exact
    return ctx.sqrt(to_mp(ctx, value))


def _prepare(seq, n):
    if n:
        seq.ensure(int(n))
    return seq


def gen_quadratic(inv_p, omega=0, n=None, label=None):
    """
    Lambda_k = A (k + omega)^2 with A = inv_p^2. Attached parameters: p0 = p1 = p2 = p = 1/inv_p,
    alpha = max(1, 1 + omega) and (q, rho, nu) from derive_params_real.
    :param inv_p: sqrt(A) > 0
    :param omega: Shift, must be greater than -1
    :param n: Number of terms materialized up front
    :return: FamilySequence
    """
    ctx = resolve_precision(None).ctx
    inv_p, omega = _number(inv_p, 'inv_p'), _number(omega, 'omega')
    inv_p, omega = _rational_or_mp(inv_p, ctx), _rational_or_mp(omega, ctx)
    if not inv_p > 0:
        raise InvalidParameters("inv_p MUST BE POSITIVE", inv_p=inv_p)
    if not omega > -1:
        raise InvalidShift(omega=omega)
    scale = inv_p * inv_p
    p = 1 / inv_p
    alpha = max(1, 1 + omega)
    q, rho, nu = derive_params_real(p, alpha)
    params = ClassParameters(beta=0, rho=rho, q=q, p0=p, p1=p, p2=p, alpha=alpha, nu=nu, delta=1)
    spec = {'kind': 'quadratic', 'params': {'inv_p': serialize_number(inv_p), 'omega': serialize_number(omega)}}
    seq = FamilySequence([ShiftedSquareFamily(scale, omega, 0)], label or "quadratic(A={},w={})".format(
        serialize_number(scale), serialize_number(omega)), params, spec)
    return _prepare(seq, n)


def gen_grouped(m, n=None, label=None):
    """
    {k^2 + (l - 1)/m : k >= 1, 1 <= l <= m} in increasing order with q = m, p0 = 2, p1 = p2 = alpha = m,
    rho = 2/((2m - 1)(2m + 1)) and nu = (4m - 1)/(m (2m + 1)).
    """
    m = int(m)
    if m < 2:
        raise InvalidParameters("GROUP SIZE MUST BE AT LEAST 2", m=m)
    families = [ShiftedSquareFamily(1, 0, Fraction(level, m)) for level in range(m)]
    params = ClassParameters(beta=0, rho=Fraction(2, (2 * m - 1) * (2 * m + 1)), q=m, p0=2, p1=m, p2=m, alpha=m,
                             nu=Fraction(4 * m - 1, m * (2 * m + 1)), delta=1)
    seq = FamilySequence(families, label or "grouped(m={})".format(m), params,
                         {'kind': 'grouped', 'params': {'m': m}})
    return _prepare(seq, n)


def grouped_counting(m, r):
    """
    Closed form of the counting function of the grouped sequence: m floor(sqrt r) - m + l~ where l~ counts the
    members of the last, partially covered group.
    """
    m = int(m)
    radius = exact_number(r)
    if radius is None:
        radius = Fraction(repr(float(r)))
    if radius < 1:
        return 0
    root = math.isqrt(math.floor(radius))
    partial = min(m, math.floor(m * (radius - root * root)) + 1)
    return m * root - m + partial


def gen_dirichlet_pair(d, n=None, label=None):
    """
    {k^2} merged with {d k^2}. Attached parameters p = 1 + 1/sqrt(d), alpha = q = 2, p0 = 1, rho = (5/8)/p^2 and
    nu = (8/3)/p^2. A rational sqrt(d) makes the two families collide.
    """
    ctx = resolve_precision(None).ctx
    d = _number(d, 'd')
    exact = exact_number(d)
    if exact is None and isinstance(d, float):
        exact = Fraction(repr(d))
    if exact is not None:
        if exact <= 0:
            raise InvalidParameters("d MUST BE POSITIVE", d=d)
        root = exact_sqrt(exact)
        if root is not None:
            raise RationalRootCollision(d=serialize_number(exact), k=root.numerator, n=root.denominator)
        d = exact
    else:
        TextColor.warn("d IS NOT RATIONAL, COLLISIONS ARE ONLY EXCLUDED WITHIN THE GENERATED RANGE")
    p = 1 + 1 / _sqrt(d, ctx)
    p = to_mp(ctx, p)
    params = ClassParameters(beta=0, rho=to_mp(ctx, 5) / 8 / (p * p), q=2, p0=1, p1=p, p2=p, alpha=2,
                             nu=to_mp(ctx, 8) / 3 / (p * p), delta=1)
    squares = FamilySequence([ShiftedSquareFamily(1, 0, 0)], "squares", spec={'kind': 'quadratic',
                                                                                'params': {'inv_p': 1, 'omega': 0}})
    scaled = FamilySequence([ShiftedSquareFamily(d, 0, 0)], "d*squares")
    seq = merge_increasing(squares, scaled, label or "dirichlet_pair(d={})".format(serialize_number(d)), params,
                           {'kind': 'dirichlet_pair', 'params': {'d': serialize_number(d)}})
    return _prepare(seq, n)


def perturbed_minimal_time(gamma):
    """
    limsup -log(eps_k)/k^2 for eps_k = exp(-k^{2 gamma}): 0 below gamma = 1, 1 at gamma = 1, infinite above.
    """
    gamma = float(gamma)
    if gamma < 1:
        return 0.0
    if gamma == 1:
        return 1.0
    return math.inf


def _perturbed_arrangement(k):
    if k % 2:
        return 0, (k + 1) // 2
    return 1, k // 2


def gen_perturbed(gamma, n=None, label=None):
    """
    Lambda_{2k-1} = k^2, Lambda_{2k} = k^2 + exp(-k^{2 gamma}) with beta = 0, q = 2, rho = 1/16, p0 = 1,
    p1 = p2 = 2, alpha = 2 + e^{-1/2}, nu = (1 + e^{-1})/2. The minimal time is kept in seq.metadata.
    """
    gamma = _number(gamma, 'gamma')
    if not float(gamma) > 0:
        raise InvalidParameters("gamma MUST BE POSITIVE", gamma=gamma)
    ctx = resolve_precision(None).ctx
    params = ClassParameters(beta=0, rho=Fraction(1, 16), q=2, p0=1, p1=2, p2=2, alpha=2 + ctx.exp(-ctx.mpf(1) / 2),
                             nu=(1 + ctx.exp(-1)) / 2, delta=1)
    families = [ShiftedSquareFamily(1, 0, 0), PerturbedSquareFamily(gamma)]
    # k^2 < k^2 + eps_k < (k + 1)^2, the order is known and the tiny gaps are never compared
    seq = FamilySequence(families, label or "perturbed(gamma={})".format(serialize_number(gamma)), params,
                         {'kind': 'perturbed', 'params': {'gamma': serialize_number(gamma)}},
                         arrangement=_perturbed_arrangement, verify_arrangement=False)
    seq.metadata['minimal_time'] = perturbed_minimal_time(gamma)
    seq.metadata['gamma'] = gamma
    return _prepare(seq, n)


def perturbed_epsilons(gamma, count, precision=None):
    """
    The gaps eps_k = Lambda_{2k} - Lambda_{2k-1} = exp(-k^{2 gamma}), k = 1..count.
    """
    ctx = resolve_precision(precision).ctx
    family = PerturbedSquareFamily(_number(gamma, 'gamma'))
    return [family.epsilon(ctx, k) for k in range(1, count + 1)]


@dataclass(frozen=True)
class SandwichRow:
    k: int
    value: object
    lower: object
    upper: object

    @property
    def holds(self):
        return self.lower <= self.value <= self.upper


def perturbed_sandwich(gamma, n, precision=None):
    """
    Two-sided bounds of P_k (q = 2) for the perturbed sequence, j = 1..n:
    e^{j^{2g}}/(2j + 1) <= P_{2j} <= e^{j^{2g}}/((2j + 1) - e^{-1}),
    e^{j^{2g}}/(2j - 1) <= P_{2j-1} <= e^{j^{2g}}/((2j - 1) - e^{-1}) for j >= 2, and P_1 = e.
    :return: list of SandwichRow ordered by k
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    seq = gen_perturbed(gamma)
    gamma = to_mp(ctx, seq.metadata['gamma'])
    rows = []
    for j in range(1, n + 1):
        growth = ctx.exp(ctx.power(j, 2 * gamma))
        odd = condensation_product(seq, 2 * j - 1, 2, precision)
        if j == 1:
            # P_1 = e holds exactly, the band only absorbs rounding
            slack = precision.tolerance * ctx.e
            rows.append(SandwichRow(1, odd, ctx.e - slack, ctx.e + slack))
        else:
            rows.append(SandwichRow(2 * j - 1, odd, growth / (2 * j - 1), growth / ((2 * j - 1) - ctx.exp(-1))))
        even = condensation_product(seq, 2 * j, 2, precision)
        rows.append(SandwichRow(2 * j, even, growth / (2 * j + 1), growth / ((2 * j + 1) - ctx.exp(-1))))
    return rows


def gen_gap_class(gamma0, gamma1, sqrt_lambda1, n=None, label=None):
    """
    Square roots growing by alternating increments gamma0 <= gamma1 from sqrt(Lambda_1): the classical gap class,
    with p0 = p1 = 1/gamma1, p2 = 1/gamma0, q = 1, alpha = max{1 - s/gamma0, s/gamma1},
    rho = min{gamma0^2, gamma0^2/3 + 2 gamma0 s/3} and nu = max{gamma1^2, gamma1^2/3 + 2 gamma1 s/3}.
    """
    ctx = resolve_precision(None).ctx
    gamma0 = _rational_or_mp(_number(gamma0, 'gamma0'), ctx)
    gamma1 = _rational_or_mp(_number(gamma1, 'gamma1'), ctx)
    root = _rational_or_mp(_number(sqrt_lambda1, 'sqrt_lambda1'), ctx)
    if not (gamma0 > 0 and gamma1 >= gamma0 and root > 0):
        raise InvalidParameters("NEED 0 < gamma0 <= gamma1 AND sqrt_lambda1 > 0", gamma0=gamma0, gamma1=gamma1,
                                sqrt_lambda1=root)
    period = gamma0 + gamma1
    families = [ShiftedSquareFamily(period * period, root / period - 1, 0),
                ShiftedSquareFamily(period * period, (root + gamma0) / period - 1, 0)]
    params = ClassParameters(beta=0,
                             rho=min(gamma0 ** 2, gamma0 ** 2 / 3 + 2 * gamma0 * root / 3),
                             q=1, p0=1 / gamma1, p1=1 / gamma1, p2=1 / gamma0,
                             alpha=max(1 - root / gamma0, root / gamma1),
                             nu=max(gamma1 ** 2, gamma1 ** 2 / 3 + 2 * gamma1 * root / 3), delta=1)
    spec = {'kind': 'gap_class', 'params': {'gamma0': serialize_number(gamma0), 'gamma1': serialize_number(gamma1),
                                            'sqrt_lambda1': serialize_number(root)}}
    seq = FamilySequence(families, label or "gap_class({},{},{})".format(*spec['params'].values()), params, spec)
    return _prepare(seq, n)


class PhaseFieldSpectrum(object):
    """
    Spectrum of the coupled phase-field operator:
    lambda1_k = xi k^2 + c0 - r_k, lambda2_k = xi k^2 + c0 + r_k with c0 = (rho + 1)/(2 tau) and
    r_k = sqrt(xi rho/tau k^2 + c0^2) = sqrt(xi rho/tau) k + eps_k/k.
    At resonance (rho/(xi tau) = j0^2) the merged order is known in closed form past 2 k0 + j0 - 1.
    """
    def __init__(self, xi, rho, tau):
        ctx = resolve_precision(None).ctx
        self.xi = _rational_or_mp(_number(xi, 'xi'), ctx)
        self.rho = _rational_or_mp(_number(rho, 'rho'), ctx)
        self.tau = _rational_or_mp(_number(tau, 'tau'), ctx)
        if not (self.xi > 0 and self.rho > 0 and self.tau > 0):
            raise InvalidParameters("xi, rho, tau MUST BE POSITIVE", xi=xi, rho=rho, tau=tau)
        self.exact = all(exact_number(value) is not None for value in (self.xi, self.rho, self.tau))
        self.c0 = (self.rho + 1) / (2 * self.tau)
        self.coupling = self.xi * self.rho / self.tau
        self.j0 = None
        if self.exact:
            root = exact_sqrt(self.rho / (self.xi * self.tau))
            if root is not None and root.denominator == 1:
                self.j0 = int(root)
        self.k0 = self._find_k0() if self.j0 is not None else None
        self._head = None

    def _c(self, ctx, value):
        return to_mp(ctx, value)

    def limit(self, ctx):
        """
        L = lim eps_k = c0^2 sqrt(tau)/(2 sqrt(xi rho)).
        """
        return self._c(ctx, self.c0) ** 2 / (2 * ctx.sqrt(self._c(ctx, self.coupling)))

    def r(self, ctx, k):
        return ctx.sqrt(self._c(ctx, self.coupling) * k * k + self._c(ctx, self.c0) ** 2)

    def eps(self, ctx, k):
        root = ctx.sqrt(self._c(ctx, self.coupling))
        c0 = self._c(ctx, self.c0)
        return c0 * c0 / (ctx.sqrt(self._c(ctx, self.coupling) + c0 * c0 / (ctx.mpf(k) ** 2)) + root)

    def lambda1(self, ctx, k):
        return self._c(ctx, self.xi) * k * k + self._c(ctx, self.c0) - self.r(ctx, k)

    def lambda2(self, ctx, k):
        return self._c(ctx, self.xi) * k * k + self._c(ctx, self.c0) + self.r(ctx, k)

    def _find_k0(self):
        ctx = context_of(SequenceOptions.ORDER_BITS)
        bound = 2 * self.limit(ctx)
        xi = self._c(ctx, self.xi)
        k = 1
        # smallest k with 2L/k <= (xi/2)(2k + j0 + 1)
        while bound / k > xi / 2 * (2 * k + self.j0 + 1):
            k += 1
        return k

    @property
    def threshold(self):
        """
        First merged index given by the closed-form interleaving.
        """
        if self.j0 is None:
            return None
        return 2 * self.k0 + self.j0 - 1

    def arrangement(self, k):
        """
        (branch, index) of the k-th smallest eigenvalue, branch 0 for lambda1 and 1 for lambda2.
        """
        if k < self.threshold:
            if self._head is None:
                ctx = context_of(SequenceOptions.ORDER_BITS)
                head = [(0, i) for i in range(1, self.k0 + self.j0)] + [(1, i) for i in range(1, self.k0)]
                head.sort(key=lambda item: self.lambda1(ctx, item[1]) if item[0] == 0 else
                          self.lambda2(ctx, item[1]))
                self._head = head
            return self._head[k - 1]
        if (k + self.j0) % 2:
            return 0, (k + self.j0 + 1) // 2
        return 1, (k - self.j0) // 2

    def gap_identity(self, k, i, precision=None):
        """
        lambda2_k - lambda1_{k+i} and xi (j0 - i)(2k + i) + eps_{k+i}/(k+i) + eps_k/k, equal at resonance.
        """
        ctx = resolve_precision(precision).ctx
        if self.j0 is None:
            raise InvalidParameters("GAP IDENTITY NEEDS A RESONANT SPECTRUM", xi=self.xi)
        direct = self.lambda2(ctx, k) - self.lambda1(ctx, k + i)
        formula = self._c(ctx, self.xi) * (self.j0 - i) * (2 * k + i) + self.eps(ctx, k + i) / (k + i) + \
            self.eps(ctx, k) / k
        return direct, formula

    def joint_log_tail(self, ctx, z, counts):
        """
        log of prod over both branches past counts = (c1, c2). For index K = k^2 the pair of factors is
        (K - u1)(K - u2) / (K (K - u3)) with u1, u2 the roots of
        xi^2 u^2 + (2 xi c0 - xi rho/tau - 2 xi z) u + z^2 - 2 c0 z and u3 = -1/(tau xi).
        """
        xi, c0 = self._c(ctx, self.xi), self._c(ctx, self.c0)
        rho_tau = self._c(ctx, self.rho) / self._c(ctx, self.tau)
        b = 2 * xi * c0 - xi * rho_tau - 2 * xi * z
        c = z * z - 2 * c0 * z
        root = ctx.sqrt(b * b - 4 * xi * xi * c)
        u1 = (-b + root) / (2 * xi * xi)
        u2 = (-b - root) / (2 * xi * xi)
        u3 = -1 / (self._c(ctx, self.tau) * xi)
        start = max(counts)
        value, error = ctx.zero, ctx.zero
        for u, sign in ((u1, 1), (u2, 1), (u3, -1)):
            part, part_error = log_square_product(ctx, start, u)
            value += sign * part
            error += part_error
        for branch, count in enumerate(counts):
            for k in range(count + 1, start + 1):
                term = self.lambda1(ctx, k) if branch == 0 else self.lambda2(ctx, k)
                value += ctx.log(1 - z / term)
        return value, error + ctx.ldexp(ctx.one, -ctx.prec) * (start - min(counts) + 1)

    def to_spec(self):
        return {'kind': 'phase_field', 'params': {'xi': serialize_number(self.xi), 'rho': serialize_number(self.rho),
                                                  'tau': serialize_number(self.tau)}}


class PhaseFieldBranch(TermFamily):
    def __init__(self, spectrum, branch):
        self.spectrum = spectrum
        self.branch = branch

    def value(self, ctx, j):
        if self.branch == 0:
            return self.spectrum.lambda1(ctx, j)
        return self.spectrum.lambda2(ctx, j)


@dataclass(frozen=True)
class ResonanceWitness:
    k: int
    l: int
    value: object


def check_H2(xi, rho, tau, kmax, precision=None):
    """
    Scan xi^2 tau^2 (l^2 - k^2)^2 - 2 xi rho tau (l^2 + k^2) - 2 rho - 1 over 1 <= k < l <= kmax.
    Rational input is checked exactly, otherwise a value below 2^{-bits/4} (1 + sum of |terms|) is a violation.
    :return: list of ResonanceWitness
    """
    if kmax < 2:
        raise InvalidParameters("kmax MUST BE AT LEAST 2", kmax=kmax)
    precision = resolve_precision(precision)
    ctx = precision.ctx
    values = [exact_number(parse_number(v)) for v in (xi, rho, tau)]
    exact = all(value is not None for value in values)
    if exact:
        xi, rho, tau = values
    else:
        xi, rho, tau = (to_mp(ctx, parse_number(v)) for v in (xi, rho, tau))
    tolerance = ctx.ldexp(ctx.one, -(precision.bits // 4))
    leading, middle, constant = (xi * tau) ** 2, 2 * xi * rho * tau, 2 * rho + 1
    violations = []
    for k in range(1, kmax):
        for l in range(k + 1, kmax + 1):
            difference, total = l * l - k * k, l * l + k * k
            first, second = leading * difference ** 2, middle * total
            value = first - second - constant
            if exact:
                vanishes = value == 0
            else:
                vanishes = abs(value) < tolerance * (1 + abs(first) + abs(second) + abs(constant))
            if vanishes:
                violations.append(ResonanceWitness(k, l, value))
    return violations


def phase_field_params(xi, rho, tau):
    """
    p0 = p1 = p2 = 2/sqrt(xi), alpha = (sqrt(rho/tau) + sqrt((3 rho + 4)/tau))/(2 sqrt(xi)) + 2 and (q, rho, nu)
    from derive_params_real.
    """
    ctx = resolve_precision(None).ctx
    xi, rho, tau = (to_mp(ctx, value) for value in (xi, rho, tau))
    p = 2 / ctx.sqrt(xi)
    alpha = (ctx.sqrt(rho / tau) + ctx.sqrt((3 * rho + 4) / tau)) / (2 * ctx.sqrt(xi)) + 2
    q, class_rho, nu = derive_params_real(p, alpha)
    return ClassParameters(beta=0, rho=class_rho, q=q, p0=p, p1=p, p2=p, alpha=alpha, nu=nu, delta=1)


def gen_phase_field(xi, rho, tau, n=SequenceOptions.DEFAULT_PREFIX, label=None, precision=None):
    """
    Merged increasing spectrum of the phase-field system. The non-resonance condition is checked up to index n
    and the first violation raises H2Violation.
    :return: (PhaseFieldSpectrum, FamilySequence)
    """
    n = int(n or SequenceOptions.DEFAULT_PREFIX)
    violations = check_H2(xi, rho, tau, max(n, 2), precision)
    if violations:
        first = violations[0]
        raise H2Violation(k=first.k, l=first.l, value=str(first.value))
    spectrum = PhaseFieldSpectrum(xi, rho, tau)
    params = phase_field_params(spectrum.xi, spectrum.rho, spectrum.tau)
    families = [PhaseFieldBranch(spectrum, 0), PhaseFieldBranch(spectrum, 1)]
    arrangement = spectrum.arrangement if spectrum.j0 is not None else None
    seq = FamilySequence(families, label or "phase_field({},{},{})".format(*spectrum.to_spec()['params'].values()),
                         params, spectrum.to_spec(), arrangement=arrangement, joint_tail=spectrum.joint_log_tail)
    seq.metadata['j0'] = spectrum.j0
    seq.metadata['k0'] = spectrum.k0
    seq.metadata['spectrum'] = spectrum
    return spectrum, _prepare(seq, n)


_KINDS = ('quadratic', 'grouped', 'dirichlet_pair', 'perturbed', 'phase_field', 'gap_class', 'explicit', 'merged')


def sequence_from_spec(spec):
    """
    Build a sequence from {"kind": ..., "params": {...}} (or {"kind": "explicit", "terms": [...]}).
    An optional "class_params" object replaces the attached ClassParameters, "n" materializes terms up front.
    """
    if not isinstance(spec, dict) or 'kind' not in spec:
        raise InvalidParameters("SEQUENCE SPEC NEEDS A kind", spec=spec)
    kind = spec['kind']
    params = dict(spec.get('params') or {})
    n = spec.get('n')
    label = spec.get('label')
    try:
        if kind == 'quadratic':
            seq = gen_quadratic(params['inv_p'], params.get('omega', 0), n, label)
        elif kind == 'grouped':
            seq = gen_grouped(params['m'], n, label)
        elif kind == 'dirichlet_pair':
            seq = gen_dirichlet_pair(params['d'], n, label)
        elif kind == 'perturbed':
            seq = gen_perturbed(params['gamma'], n, label)
        elif kind == 'phase_field':
            seq = gen_phase_field(params['xi'], params['rho'], params['tau'], n or SequenceOptions.DEFAULT_PREFIX,
                                  label)[1]
        elif kind == 'gap_class':
            seq = gen_gap_class(params['gamma0'], params['gamma1'], params['sqrt_lambda1'], n, label)
        elif kind == 'explicit':
            seq = ExplicitSequence(spec.get('terms') or [], label or 'explicit')
        elif kind == 'merged':
            parts = spec.get('parts') or []
            if len(parts) != 2:
                raise InvalidParameters("MERGED SPEC NEEDS TWO PARTS")
            seq = merge_increasing(sequence_from_spec(parts[0]), sequence_from_spec(parts[1]), label)
        else:
            raise InvalidParameters("UNKNOWN SEQUENCE KIND", kind=kind, known="|".join(_KINDS))
    except KeyError as missing:
        raise InvalidParameters("MISSING SEQUENCE PARAMETER", kind=kind, field=str(missing))
    if spec.get('class_params'):
        seq.params = ClassParameters.from_dict(spec['class_params'])
    return seq
