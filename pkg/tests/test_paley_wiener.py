import pytest

from nogap.modules.python.PaleyWiener import product_fk, choose_N, MollifierConfig, Mollifier, mollifier, \
    verify_mollifier, synthesize_qk, fit_growth_constant, fit_interpolation_constant, construct_gk, GkEvaluator
from nogap.modules.python.GramBiorthogonal import converge_truncation
from nogap.modules.python.SequenceCore import ExplicitSequence
from nogap.modules.python.Exceptions import InvalidParameters


def test_product_is_one_at_origin(squares, precision):
    result = product_fk(squares, 3, 0, precision=precision)
    assert result.value == 1
    assert result.tail == 'trivial'


def test_product_vanishes_on_other_terms(squares, precision):
    assert product_fk(squares, 1, 4, precision=precision).value == 0


def test_product_of_squares_at_one(squares, precision):
    # prod_{n >= 2} (1 - 1/n^2) = 1/2
    result = product_fk(squares, 1, 1, precision=precision)
    assert result.tail == 'closed-form'
    assert abs(result.value - precision.ctx.mpf(1) / 2) < 1e-30


def test_product_of_finite_sequence(precision):
    result = product_fk(ExplicitSequence([1, 2, 4]), 1, 3, precision=precision)
    assert result.tail == 'finite'
    assert abs(result.value + precision.ctx.mpf(1) / 8) < precision.tolerance


def test_choose_N():
    assert choose_N(1, 1) == 37
    assert choose_N(1e6, 1) == 3
    with pytest.raises(InvalidParameters):
        choose_N(0, 1)
    with pytest.raises(InvalidParameters):
        MollifierConfig(1)


def test_mollifier_constant(precision):
    ctx = precision.ctx
    constant = MollifierConfig(2).c_nt(1, ctx)
    assert abs(constant - 1 / (2 * (ctx.pi ** 2 / 6 - 1))) < precision.tolerance
    assert abs(constant - ctx.mpf('0.775273')) < 1e-5


def test_mollifier_at_origin_and_real_axis(precision):
    cfg = MollifierConfig.for_problem(1, 1)
    assert mollifier(cfg, 1, 0, precision) == 1
    evaluate = Mollifier(cfg, 1, precision)
    for x in (0.5, 10, 300):
        assert abs(evaluate(x)) <= 1


def test_verify_mollifier(precision):
    check = verify_mollifier(MollifierConfig.for_problem(1, 1), 1, grid=[0.1, 1, 10, 100], precision=precision)
    assert check.at_zero == 1
    assert check.max_real_modulus <= 1
    assert check.N == 37


def test_growth_constant_is_finite(squares, precision):
    fit = fit_growth_constant(squares, squares.params, 1, [0.5, 2.5, 10.5, 40.5], precision)
    assert fit.points == 4
    assert fit.argmax is not None


@pytest.mark.slow
def test_synthesized_family_is_not_smaller_than_the_minimal_one(squares):
    family = synthesize_qk(squares, squares.params, 1, 1, samples=11)
    minimal = converge_truncation(squares, 1, 1, rtol=1e-6, precision=256)
    assert family.norm_direct >= minimal.norm * (1 - 1e-6)
    assert len(family.to_rows()) == 11
    assert family.residual_max < 1e-2


def test_gk_interpolates(squares, precision):
    ctx = precision.ctx
    evaluator = GkEvaluator(squares, None, 2, 1, precision=precision)
    assert max(evaluator.interpolation_errors(5)) < 1e-30
    value = construct_gk(squares, None, 2, 1, evaluator.cfg, 4j, precision)
    assert abs(value - 1 / ctx.sqrt(2 * ctx.pi)) < 1e-30


def test_interpolation_constant(squares, precision):
    fit = fit_interpolation_constant(squares, None, [1, 2, 3], precision)
    assert [k for k, _ in fit.per_index] == [1, 2, 3]
    assert fit.constant == max(value for _, value in fit.per_index)
