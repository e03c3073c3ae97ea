from fractions import Fraction

import pytest

from nogap.modules.python.GuichalBounds import guichal_coefficients, guichal_function, window_coefficients, \
    h1_constant, h2_constant, h3_constant, e_constant, b_constant, evaluate_lower_bounds, check_power_integral, \
    check_exponential_tail, divided_difference_check, fit_constant_C, Observation, bound_report, \
    check_guichal_distances, evaluate_upper_form, power_integral_bound, exponential_tail_bound, distance_factor_D, \
    guichal_distance_bound, certificate_status, check_truncated_norms, bound_table
from nogap.modules.python.SequenceCore import ClassParameters, ExplicitSequence
from nogap.modules.python.GramBiorthogonal import converge_truncation
from nogap.modules.python.Exceptions import InvalidParameters, DegenerateWindow, InfeasibleFit, NoPlateau


@pytest.fixture
def unit_params():
    return ClassParameters(beta=0, rho=1, q=1, p0=1, p1=1, p2=1, alpha=1, nu=1, delta=1)


def test_guichal_coefficients_of_squares(squares):
    coefficients = guichal_coefficients(squares, 3)
    assert coefficients.values == [Fraction(1, 24), Fraction(-1, 15), Fraction(1, 40)]
    assert coefficients.exact
    assert coefficients.moment_residual == 0
    assert coefficients.M == 2


def test_guichal_function_vanishes_at_origin(squares, precision):
    coefficients = guichal_coefficients(squares, 3)
    assert abs(guichal_function(squares, coefficients, 0, precision)) < precision.tolerance


def test_window_coefficients(squares):
    window = window_coefficients(squares, 2, 2)
    assert window.indices == [1, 2, 3]
    assert abs(window.at(2)) == Fraction(1, 15)


def test_repeated_points_are_degenerate():
    with pytest.raises(DegenerateWindow):
        divided_difference_check([1, 1], 1)


def test_constants(unit_params):
    assert h1_constant(unit_params) == 1
    assert float(h2_constant(unit_params, 1)) == pytest.approx(5.0)
    assert h3_constant(unit_params) == 4
    assert h3_constant(unit_params, real=False) == 5


def test_e_constant(precision):
    ctx = precision.ctx
    assert abs(e_constant(1, 2, 1, 1, 1, 1, precision) - ctx.sqrt(2.5)) < precision.tolerance
    assert abs(e_constant(3, 1, 1, 1, 4, 1, precision) - ctx.sqrt(4.5)) < precision.tolerance


def test_b_constant_is_positive(precision):
    for k in (1, 2, 5):
        assert b_constant(k, 2, 1, 1, 1, 1, precision) > 0


def test_lower_bounds_certify_from_three(squares, precision):
    assert not evaluate_lower_bounds(2, 3, 3, 1, squares, 1, precision).certified_index
    bounds = evaluate_lower_bounds(3, 3, 3, 1, squares, 1, precision)
    assert bounds.certified_index
    assert bounds.combined > 0
    assert bounds.dominant in ('B', 'E')
    with pytest.raises(InvalidParameters):
        evaluate_lower_bounds(0, 3, 3, 1, squares, 1, precision)


def test_elementary_estimates(precision):
    integral, bound = check_power_integral(2, 1, 1, precision)
    assert integral <= bound
    tail, lower = check_exponential_tail(3, 1, precision)
    assert lower <= tail
    assert divided_difference_check([1, 2, 3], 0.5, precision).holds


def test_fit_constant(unit_params):
    observed = [Observation(k, 1, 10 * k, 1, k * k) for k in range(1, 4)]
    fit = fit_constant_C(observed, unit_params)
    assert fit.observations == 3
    assert fit.times == 1
    assert min(float(value) for value in fit.slack) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InfeasibleFit):
        fit_constant_C([], unit_params)


def test_distance_bound_holds(squares, precision):
    checks = check_guichal_distances(squares, squares.params, 1, 1, [4, 6], precision)
    assert all(check.holds for check in checks)


@pytest.mark.slow
def test_lower_bound_below_plateau_norm(squares):
    report = bound_report(squares, squares.params, 3, 1, rtol=1e-6, precision=256)
    assert report.label == 'plateau-certified'
    assert report.lower_holds
    assert report.certificate == 'holds'
    assert report.observed_norm <= report.estimated_norm * (1 + 1e-6)
    assert report.provenance['truncation_method'] == report.truncation_method
    assert report.per_order and not report.per_order_violations
    assert report.to_record()['per_order'][0]['M'] == 3 + squares.params.q


def test_upper_form_at_zero_constant(unit_params, precision):
    assert abs(evaluate_upper_form(unit_params, 1, 1, 1, 0) - 1) < precision.tolerance
    assert evaluate_upper_form(unit_params, 4, 1, 1, 1) > evaluate_upper_form(unit_params, 1, 1, 1, 1)


def test_elementary_bound_values(precision):
    ctx = precision.ctx
    # 2 T^3 / (3 + T)
    assert abs(power_integral_bound(2, 1, 1) - ctx.mpf('0.5')) < precision.tolerance
    assert abs(exponential_tail_bound(3, 1) - ctx.e / 48) < precision.tolerance


def test_distance_factor(squares, precision):
    assert distance_factor_D(2, 1, 1, 1, squares, 1, precision) > 0
    with pytest.raises(InvalidParameters):
        guichal_distance_bound(3, 3, squares.params, squares, 1, precision)
    assert guichal_distance_bound(1, 4, squares.params, squares, 1, precision) > 0


def test_certificate_uses_the_truncated_norm():
    assert certificate_status(1, 2, 3) == 'holds'
    assert certificate_status(2.5, 2, 3) == 'inconclusive'
    assert certificate_status(4, 2, 3) == 'violated'
    assert certificate_status(2.5, 2) == 'violated'


def test_truncated_norms_against_e_bound(squares, precision):
    q = squares.params.q
    bounds = evaluate_lower_bounds(3, q, squares.params.nu, 1, squares, 1, precision)
    result = converge_truncation(squares, 3, 1, rtol=1e-6, precision=precision)
    checks = check_truncated_norms(squares, 3, q, 1, bounds.E * bounds.P, result.history, precision)
    assert checks[0].M == 3 + q
    assert [check.M for check in checks] == sorted({3 + q} | {M for M, _, _ in result.history if M >= 3 + q})
    assert all(check.holds for check in checks)
    # a bound above the truncated norms is reported at every order
    checks = check_truncated_norms(squares, 3, q, 1, 2 * result.norm, result.history, precision)
    assert not any(check.holds for check in checks)


def test_bound_report_passes_the_order_cap(squares):
    with pytest.raises(NoPlateau) as error:
        bound_report(squares, squares.params, 3, 1, rtol=1e-60, precision=256, m_max=10)
    assert error.value.witness['M_max'] == 10


@pytest.mark.slow
def test_perturbed_bound_grid(perturbed):
    reports, fit = bound_table(perturbed, perturbed.params, range(3, 13), [0.5, 1.0], rtol=1e-8, precision=512,
                               m_max=60)
    assert len(reports) == 20
    assert fit.observations == 20
    for report in reports:
        assert report.label == 'plateau-certified'
        assert report.certificate == 'holds'
        assert not report.per_order_violations
        assert report.M_star <= 60
