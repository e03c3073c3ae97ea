import math

import pytest

from nogap.modules.python import GramBiorthogonal
from nogap.modules.python.GramBiorthogonal import gram_entry, build_gram, minimal_family, evaluate_family, \
    residual_check, converge_truncation, plateau_stability, TailSums, extrapolate_log_norm, GramBuilder, \
    tail_factors, completed_gram, aligned_order, plateau_search, norm_measure
from nogap.modules.python.SequenceCore import ExplicitSequence
from nogap.modules.python.MpNumerics import integrate
from nogap.modules.python.Exceptions import InvalidParameters, ZeroDenominator, NoPlateau, NotPositiveDefinite


def test_gram_entries(precision):
    ctx = precision.ctx
    assert abs(gram_entry(1, 1, 1, precision) - ctx.mpf('0.43233235838169365')) < 1e-16
    assert abs(gram_entry(1, 4, 1, precision) - ctx.mpf('0.19865241060018290')) < 1e-16
    with pytest.raises(ZeroDenominator):
        gram_entry(1, -1, 1, precision)


def test_complex_entry_is_conjugate_symmetric(precision):
    ctx = precision.ctx
    a, b = ctx.mpc(1, 2), ctx.mpc(3, -1)
    assert abs(gram_entry(a, b, 1, precision) - ctx.conj(gram_entry(b, a, 1, precision))) < precision.tolerance


def test_single_mode_norm(precision):
    family = minimal_family(ExplicitSequence([1]), 1, 1, precision)
    assert abs(family.norm(1) - 1 / precision.ctx.sqrt(gram_entry(1, 1, 1, precision))) < precision.tolerance
    assert abs(family.norm(1) - precision.ctx.mpf('1.52087')) < 1e-5
    assert abs(family.norm(1) * family.distance(1) - 1) < precision.tolerance


def test_two_mode_norm(precision):
    ctx = precision.ctx
    a, b, c = gram_entry(1, 1, 1, precision), gram_entry(1, 4, 1, precision), gram_entry(4, 4, 1, precision)
    family = minimal_family(ExplicitSequence([1, 4]), 2, 1, precision)
    assert abs(family.norm(1) - ctx.sqrt(c / (a * c - b * b))) < precision.tolerance
    assert 2.9 < family.norm(1) < 3.0
    assert family.residual < precision.tolerance


def test_family_is_biorthogonal(precision):
    ctx = precision.ctx
    family = minimal_family(ExplicitSequence([1, 4, 9]), 3, 1, precision)
    assert residual_check(family) < 1e-30
    cross = integrate(lambda t: ctx.exp(-t) * evaluate_family(family, 2, t), 0, 1, precision=precision).value
    diagonal = integrate(lambda t: ctx.exp(-4 * t) * evaluate_family(family, 2, t), 0, 1, precision=precision).value
    assert abs(cross) < 1e-30
    assert abs(diagonal - 1) < 1e-30
    with pytest.raises(InvalidParameters):
        evaluate_family(family, 1, 2)


def test_build_gram_matches_family(precision):
    seq = ExplicitSequence([1, 4, 9])
    system = build_gram(seq, 3, 1, precision)
    family = minimal_family(seq, 3, 1, precision)
    for k in range(3):
        assert abs(precision.ctx.sqrt(system.inverse_diag[k]) - family.norms[k]) < precision.tolerance


def test_tail_sums_of_finite_sequence(precision):
    tail = TailSums(ExplicitSequence([1, 2, 4]), precision)
    assert abs(tail(0) - precision.ctx.mpf('1.75')) < precision.tolerance
    assert abs(tail(1) - precision.ctx.mpf('0.75')) < precision.tolerance
    assert tail(3) == 0


def test_tail_sums_of_squares(squares, precision):
    tail = TailSums(squares, precision)
    # pi^2/6 - sum_{n <= 10} 1/n^2
    assert abs(tail(10) - precision.ctx.mpf('0.09516633568168575')) < 1e-10


def test_extrapolation_is_exact_on_polynomials(precision):
    ctx = precision.ctx
    linear = [(ctx.mpf(1) / m, 2 + 3 * ctx.mpf(1) / m) for m in (5, 10)]
    assert abs(extrapolate_log_norm(linear) - 2) < precision.tolerance
    cubic = [(h, 1 + h + h ** 2 + h ** 3) for h in (ctx.mpf(1) / m for m in (5, 10, 15, 20, 25))]
    assert abs(extrapolate_log_norm(cubic) - 1) < precision.tolerance


def test_truncation_of_finite_sequence_is_exact(precision):
    seq = ExplicitSequence([1, 4, 9])
    result = converge_truncation(seq, 1, 1, precision=precision)
    assert result.complete
    assert result.M_star == 3
    assert abs(result.norm - minimal_family(seq, 3, 1, precision).norm(1)) < precision.tolerance
    assert result.to_record()['complete']


def test_truncation_of_squares_reaches_plateau(squares, precision):
    result = converge_truncation(squares, 1, 1, rtol=1e-6, precision=precision)
    assert not result.complete
    assert result.method == 'tail-completed'
    assert result.M_star <= 30
    assert result.truncated_norm <= result.norm * (1 + 1e-6)
    # truncated norms grow with M
    raws = [raw for _, raw, _ in result.history]
    assert all(a <= b * (1 + precision.tolerance) for a, b in zip(raws, raws[1:]))


def test_truncation_without_plateau(squares, precision):
    with pytest.raises(NoPlateau) as error:
        converge_truncation(squares, 1, 1, rtol=1e-60, precision=precision, m_max=15)
    assert error.value.witness['k'] == 1
    assert error.value.witness['M_max'] == 15
    assert error.value.witness['last_change'] is not None


def test_truncation_rejects_bad_input(squares, precision):
    with pytest.raises(InvalidParameters):
        converge_truncation(squares, 0, 1, precision=precision)
    with pytest.raises(InvalidParameters):
        converge_truncation(ExplicitSequence([1, 4]), 3, 1, precision=precision)
    with pytest.raises(InvalidParameters):
        converge_truncation(squares, 4, 1, precision=precision, m_max=3)


def test_plateau_stability_of_finite_sequence(precision):
    report = plateau_stability(ExplicitSequence([1, 4, 9]), 2, 1, precision=precision)
    assert report.passed


def test_tail_factors_of_squares(squares, precision):
    ctx = precision.ctx
    M = 4
    factors = tail_factors(squares, M, precision)
    assert factors.cut == M
    for j in range(1, M + 1):
        # prod_{n > M} (1 - j^2/n^2) telescopes, prod_{n >= 1} (1 + j^2/n^2) = sinh(pi j)/(pi j)
        lower = ctx.mpf(math.factorial(M) ** 2) / (math.factorial(M - j) * math.factorial(M + j))
        upper = ctx.sinh(ctx.pi * j) / (ctx.pi * j) / ctx.fprod(1 + ctx.mpf(j * j) / (n * n) for n in range(1, M + 1))
        assert abs(factors.values[j - 1] - lower / upper) < 1e-40


def test_completed_gram_matches_the_full_family(precision):
    # the two far terms enter only through exp(-400 T)
    seq = ExplicitSequence([1, 4, 400, 900])
    builder = GramBuilder(seq, 1, precision)
    full = minimal_family(seq, 4, 1, precision)
    completed = completed_gram(builder, 2, tail_factors(seq, 2, precision))
    for k in (1, 2):
        norm, _ = norm_measure(k)(completed)
        truncated, _ = norm_measure(k)(builder.matrix(2))
        assert abs(norm - full.norm(k)) < 1e-30
        assert abs(truncated - full.norm(k)) > 1e-6 * full.norm(k)


def test_aligned_order_keeps_clusters(squares, perturbed):
    assert aligned_order(perturbed, 5, 2) == 6
    assert aligned_order(perturbed, 6, 2) == 6
    assert aligned_order(perturbed, 11, 2, limit=11) == 11
    assert aligned_order(squares, 7, 1) == 7
    assert aligned_order(ExplicitSequence([1, 4, 9]), 2, 2) == 3


def test_plateau_search_doubles_precision_once():
    seq = ExplicitSequence([1, 4, 9])
    exact = norm_measure(1)
    seen = []

    def measure(matrix):
        seen.append(matrix.precision.bits)
        if matrix.precision.bits < 256:
            raise NotPositiveDefinite(index=1, pivot='0', bits=matrix.precision.bits)
        return exact(matrix)

    result = plateau_search(seq, 1, measure, precision=128)
    assert result.precision.bits == 256
    assert seen == [128, 256]
    assert result.complete
    with pytest.raises(NotPositiveDefinite):
        plateau_search(seq, 1, measure, precision=64)


def test_truncation_restarts_at_doubled_precision(monkeypatch):
    exact = GramBiorthogonal.norm_measure

    def failing_below_256(k):
        measure = exact(k)

        def wrapped(matrix):
            if matrix.precision.bits < 256:
                raise NotPositiveDefinite(index=k, pivot='0', bits=matrix.precision.bits)
            return measure(matrix)
        return wrapped

    monkeypatch.setattr(GramBiorthogonal, 'norm_measure', failing_below_256)
    seq = ExplicitSequence([1, 4, 9])
    result = converge_truncation(seq, 2, 1, precision=128)
    assert result.precision_bits == 256
    assert abs(result.norm - minimal_family(seq, 3, 1, 256).norm(2)) < 1e-60


@pytest.mark.slow
def test_perturbed_plateau_well_below_the_order_cap(perturbed):
    for T in (0.5, 1.0):
        for k in range(3, 13):
            result = converge_truncation(perturbed, k, T, rtol=1e-8, precision=512)
            assert result.method == 'tail-completed'
            assert result.M_star <= 60
            assert result.M_star % 2 == 0
            assert result.truncated_norm <= result.norm * (1 + 1e-8)


@pytest.mark.slow
def test_default_truncation_of_perturbed(perturbed):
    result = converge_truncation(perturbed, 4, 1, rtol=1e-8)
    assert result.precision_bits == 512
    assert result.M_star <= 60
    report = plateau_stability(perturbed, 4, 1, rtol=1e-10)
    assert report.passed
