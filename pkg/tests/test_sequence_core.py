from fractions import Fraction

import pytest

from nogap.modules.python.SequenceCore import ExplicitSequence, ClassParameters, counting_function, \
    condensation_product, check_class, derive_params_real, derive_params_from_gap, merge_increasing, \
    exact_number, serialize_number, parse_number, fit_index_constant, empirical_delta
from nogap.modules.python.Exceptions import InvalidParameters, DuplicateTerm, PrefixExhausted


def test_exact_numbers():
    assert exact_number("3/2") == Fraction(3, 2)
    assert exact_number(0.5) is None
    assert serialize_number(Fraction(3, 2)) == "3/2"
    assert parse_number("3/2") == Fraction(3, 2)


def test_counting_function_of_squares(squares):
    assert counting_function(squares, 10) == 3
    assert counting_function(squares, 9) == 3
    assert counting_function(squares, Fraction(899, 100)) == 2


def test_counting_function_of_grouped(grouped):
    assert counting_function(grouped, Fraction(17, 4)) == 3


def test_counting_function_rejects_non_positive_radius(squares):
    with pytest.raises(InvalidParameters):
        counting_function(squares, 0)


def test_condensation_product_of_squares(squares, precision):
    assert abs(condensation_product(squares, 2, 2, precision) - precision.ctx.mpf(1) / 15) < precision.tolerance
    assert condensation_product(squares, 5, 1, precision) == 1


def test_condensation_product_of_perturbed(perturbed, precision):
    ctx = precision.ctx
    expected = 1 / (ctx.exp(-1) * (3 - ctx.exp(-1)))
    value = condensation_product(perturbed, 2, 2, precision)
    assert abs(value - expected) < precision.tolerance
    assert abs(value - ctx.mpf('1.0327')) < 1e-4


def test_derive_params_real():
    q, rho, nu = derive_params_real(1, 1)
    assert (q, rho, nu) == (3, Fraction(1, 3), Fraction(3))
    q, rho, nu = derive_params_real(Fraction(1, 2), Fraction(1, 3))
    assert q == 1
    assert rho == Fraction(4, 3)


def test_derive_params_from_gap():
    p0, p1, p2, alpha = derive_params_from_gap(1, 1, 1, 1)
    assert p0 == p1 == p2 == 1
    assert alpha == 2


def test_derive_params_rejects_non_positive():
    with pytest.raises(InvalidParameters):
        derive_params_real(0, 1)


def test_merge_keeps_provenance():
    merged = merge_increasing(ExplicitSequence([1, 4]), ExplicitSequence([2, 3]))
    assert [merged.exact_term(k).re for k in range(1, 5)] == [1, 2, 3, 4]
    assert merged.origin(2) == (1, 1)
    assert merged.origin(4) == (0, 2)
    with pytest.raises(PrefixExhausted):
        merged.ensure(5)
    assert merged.to_spec()['kind'] == 'merged'
    labeled = merge_increasing(ExplicitSequence([1, 4]), ExplicitSequence([2, 3]), spec={'kind': 'custom'})
    assert labeled.to_spec() == {'kind': 'custom'}


def test_merge_rejects_duplicates():
    merged = merge_increasing(ExplicitSequence([1, 2]), ExplicitSequence([2, 3]))
    with pytest.raises(DuplicateTerm):
        merged.ensure(3)


def test_empty_explicit_sequence():
    with pytest.raises(InvalidParameters):
        ExplicitSequence([])


def test_grouped_hypotheses(grouped):
    report = check_class(grouped, grouped.params, prefix=60)
    assert report.exact
    for name in ('H1', 'H2', 'H3', 'H4', 'H5', 'nu_bound', 'consistency'):
        assert report.status(name) == 'PASS'
    assert report.results['H5'].label == 'prefix-verified'
    assert list(report.results) == ['H1', 'H2', 'H3', 'H4', 'H5', 'nu_bound', 'H6', 'consistency']


def test_grouped_fails_separation_without_grouping(grouped):
    report = check_class(grouped, grouped.params.replace(q=1), prefix=20)
    assert report.status('H5') == 'FAIL'
    assert report.results['H5'].witness == {'k': '3', 'n': '4'}
    assert not report.passed


def test_non_positive_term_fails_h2():
    seq = ExplicitSequence([-1, 2, 5, 10])
    params = ClassParameters(beta=0, rho=Fraction(1, 10), q=1, p0=1, p1=1, p2=1, alpha=3, nu=3, delta=1)
    report = check_class(seq, params, prefix=4)
    assert report.status('H2') == 'FAIL'
    assert report.results['H2'].witness['k'] == '1'


def test_class_parameters_validation():
    with pytest.raises(InvalidParameters):
        ClassParameters(beta=0, rho=1, q=0, p0=1, p1=1, p2=1, alpha=1, nu=1)
    with pytest.raises(InvalidParameters):
        ClassParameters.from_dict({'beta': 0, 'rho': 1, 'q': 1, 'p0': 1, 'p1': 1, 'p2': 1, 'alpha': 1, 'nu': 1,
                                   'gamma': 2})
    params = ClassParameters.from_dict({'beta': 0, 'rho': '1/3', 'q': 3, 'p0': 1, 'p1': 1, 'p2': 1, 'alpha': 1,
                                        'nu': 3})
    assert params.rho == Fraction(1, 3)
    assert params.consistency_issues() == []


def test_index_bound_of_squares(squares, precision):
    fit = fit_index_constant(squares, squares.params, 50, precision)
    assert fit.lower_holds
    assert fit.lower_witness is None
    assert fit.constant_real == 0
    assert fit.prefix == 50


def test_empirical_delta(squares, precision):
    assert empirical_delta(squares, 20, precision) == 1
    delta = empirical_delta(ExplicitSequence([1, [1, 1]]), 5, precision)
    assert abs(delta - 1 / precision.ctx.sqrt(2)) < precision.tolerance
