import math

import pytest

from nogap.modules.python.ControlCost import ControlProblem, moment_data, moment_growth_constant, \
    solve_null_control, truncated_cost, control_cost, minimal_time, probe_mode, probe_threshold, \
    perturbed_upper_form, perturbed_lower_form, sequence_cost, cost_scaling_experiment, phase_field_cost, \
    cost_ratios, gap_infimum, condensation_exponent_fit, cost_measure
from nogap.modules.python.ExampleSequences import gen_perturbed, gen_phase_field, perturbed_epsilons
from nogap.modules.python.GramBiorthogonal import gram_entry, minimal_family, GramBuilder, completed_gram, \
    tail_factors
from nogap.modules.python.SequenceCore import ExplicitSequence
from nogap.modules.python.Exceptions import InvalidParameters, ZeroControlVector, ZeroPerturbation, GridInfeasible, \
    NoPlateau


@pytest.mark.parametrize("gamma", [0.25, 0.5])
def test_minimal_time_vanishes_below_one(gamma):
    estimate = minimal_time(perturbed_epsilons(gamma, 400))
    assert not estimate.diverging
    assert abs(estimate.value) < 0.01


def test_minimal_time_at_one():
    estimate = minimal_time(perturbed_epsilons(1, 400))
    assert estimate.converged
    assert abs(estimate.value - 1) < 1e-6


def test_minimal_time_diverges():
    estimate = minimal_time(perturbed_epsilons(1.5, 400))
    assert estimate.diverging
    assert math.isinf(estimate.value)


def test_minimal_time_rejects_bad_input():
    with pytest.raises(ZeroPerturbation):
        minimal_time([1] * 10 + [0] + [1] * 10)
    with pytest.raises(InvalidParameters):
        minimal_time([0.5] * 15)


def test_probe_mode(precision):
    probe = probe_mode(0.75, 0.05, precision)
    ctx = precision.ctx
    assert abs(probe.x_tilde - 50625) < 1e-30
    assert abs(probe.k_high - 225) < 1e-30
    assert abs(probe.k_low - ctx.sqrt(ctx.mpf(50625) / 2)) < precision.tolerance
    assert probe.k0 == 225
    assert probe.admissible
    # -225^2 / 20 + 225^{3/2} = 843.75
    assert abs(probe.value - ctx.mpf('843.75')) < 1e-30
    assert probe.holds


def test_probe_mode_outside_grid():
    threshold = probe_threshold(0.5)
    assert abs(threshold - 0.5 * (1 - 1 / math.sqrt(2))) < 1e-12
    with pytest.raises(GridInfeasible):
        probe_mode(0.5, threshold * 1.01)
    with pytest.raises(InvalidParameters):
        probe_mode(1.0, 0.01)


def test_perturbed_forms_are_positive():
    for T in (0.2, 0.5, 1.0):
        assert perturbed_upper_form(1, 0.5, T) > 0
        assert perturbed_lower_form(1, 0.5, T) > 0
    assert perturbed_upper_form(1, 0.5, 0.2) > perturbed_upper_form(1, 0.5, 1.0)


def test_control_problem_validation():
    with pytest.raises(InvalidParameters):
        ControlProblem(ExplicitSequence([1]), 0)
    with pytest.raises(InvalidParameters):
        ControlProblem(ExplicitSequence([1]), 0.1, precision=256)
    with pytest.raises(InvalidParameters):
        ControlProblem(ExplicitSequence([1]), 1, M=0)
    # small horizons are accepted once the mantissa is wide enough
    assert ControlProblem(ExplicitSequence([1]), 0.1, precision=1024).T > 0


def test_zero_control_component(precision):
    problem = ControlProblem(gen_perturbed(0.5), 1, b=(1, 0), precision=precision)
    assert problem.control_component(1) == 1
    with pytest.raises(ZeroControlVector):
        problem.control_component(2)


def test_single_mode_cost(precision):
    ctx = precision.ctx
    problem = ControlProblem(ExplicitSequence([1]), 1, M=1, precision=precision)
    value, _ = truncated_cost(problem, 1)
    weight = ctx.sqrt(2 / ctx.pi)
    expected = ctx.exp(-1) / weight / ctx.sqrt(gram_entry(1, 1, 1, precision))
    assert abs(value - expected) < 1e-25
    estimate = control_cost(problem)
    assert estimate.M_star == 1
    assert estimate.complete
    assert estimate.truncation == 'exact'
    assert abs(estimate.value - expected) < 1e-25


def test_null_control_solves_moments(precision):
    seq = ExplicitSequence([1, 4, 9])
    problem = ControlProblem(seq, 1, M=3, precision=precision)
    data = moment_data(problem, [1, '1/2', '1/4'])
    assert data.M == 3
    assert moment_growth_constant(data) > 0
    family = minimal_family(seq, 3, 1, precision)
    control = solve_null_control(problem, data, family, samples=11)
    assert len(control.times) == 11
    assert control.moment_residual < 1e-30
    assert control.quadrature_residual < 1e-12
    assert control.norm > 0


def test_moment_data_rejects_extra_coefficients(precision):
    problem = ControlProblem(ExplicitSequence([1, 4]), 1, M=2, precision=precision)
    with pytest.raises(InvalidParameters):
        moment_data(problem, [1, 2, 3])


def test_finite_sequence_cost_decreases(precision):
    report = sequence_cost(ExplicitSequence([1, 4, 9]), T_grid=[1.0, 0.5], precision=precision, rtol=1e-6)
    assert report.times == [0.5, 1.0]
    assert all(estimate.complete for estimate in report.estimates)
    assert report.values[1] < report.values[0]
    assert report.fits['inverse_T'].slope > 0
    assert report.band[0] <= report.band[1]
    ratios = cost_ratios(report, report)
    assert [T for T, _ in ratios] == [1.0, 0.5]
    assert all(abs(ratio - 1) < precision.tolerance for _, ratio in ratios)


def test_gap_infimum(precision, perturbed):
    gap, k = gap_infimum(ExplicitSequence([1, 4, 9, 10]), 4, precision)
    assert gap == 1
    assert k == 3
    # eps_k = exp(-k) for gamma = 1/2
    gap, k = gap_infimum(perturbed, 8, precision)
    assert k == 7
    assert abs(gap - precision.ctx.exp(-4)) < precision.tolerance


@pytest.mark.slow
def test_condensation_exponent(precision):
    spectrum, seq = gen_phase_field(1, 1, 1)
    fit = condensation_exponent_fit(spectrum, seq, 300, precision)
    assert fit.expected == -(2.0 * seq.params.q - 4)
    assert abs(fit.slope - fit.expected) <= 0.1 * abs(fit.expected)


def test_condensation_exponent_needs_room(precision):
    spectrum, seq = gen_phase_field(1, 1, 1, n=20)
    with pytest.raises(InvalidParameters):
        condensation_exponent_fit(spectrum, seq, spectrum.threshold, precision)


@pytest.mark.slow
def test_scaling_experiment_report():
    report = cost_scaling_experiment(0.75, T_grid=[0.5, 0.3], precision=512, rtol=1e-6, m_max=40)
    assert report.times == [0.3, 0.5]
    assert all(value > 0 for value in report.values)
    # only T = 0.3 lies below the probe threshold of gamma = 3/4
    assert [probe.T for probe in report.probes] == [0.3]
    assert report.minimal_time == 0
    assert set(report.fits) == {'inverse_T', 'inverse_T_power'}
    with pytest.raises(GridInfeasible):
        cost_scaling_experiment(0.75, T_grid=[0.5], precision=512, require_probes=True)


@pytest.mark.slow
def test_phase_field_band():
    report = phase_field_cost(1, 1, 1, T_grid=[0.5, 1.0], precision=512, rtol=1e-6, m_max=40)
    assert report.provenance['j0'] == 1
    assert report.values[1] < report.values[0]
    low, high = report.band
    assert low <= high


def test_cost_without_plateau_raises(squares, precision):
    problem = ControlProblem(squares, 1, precision=precision)
    with pytest.raises(NoPlateau) as error:
        control_cost(problem, rtol=1e-60, m_max=10)
    assert error.value.witness['M_max'] == 10
    assert error.value.witness['quantity'] == 'cost'


def test_fixed_truncation_is_labeled(squares, precision):
    estimate = control_cost(ControlProblem(squares, 1, M=4, precision=precision))
    assert estimate.truncation == 'fixed'
    assert not estimate.complete


def test_completed_cost_matches_the_full_cost(precision):
    seq = ExplicitSequence([1, 4, 400, 900])
    problem = ControlProblem(seq, 1, precision=precision)
    builder = GramBuilder(seq, 1, precision)
    completed, _ = cost_measure(problem)(completed_gram(builder, 2, tail_factors(seq, 2, precision)))
    full, _ = truncated_cost(problem, 4, builder)
    assert abs(completed - full) < 1e-20 * full


def test_squares_cost_reaches_plateau(squares, precision):
    estimate = control_cost(ControlProblem(squares, 1, precision=precision), rtol=1e-8)
    assert estimate.truncation == 'tail-completed'
    assert estimate.M_star <= 30
    raws = [raw for _, raw, _ in estimate.history]
    assert all(a <= b * (1 + 1e-20) for a, b in zip(raws, raws[1:]))


@pytest.mark.slow
def test_perturbed_cost_does_not_increase_with_T():
    report = cost_scaling_experiment(0.5, T_grid=[0.5, 0.6, 0.8, 1.0], precision=512, rtol=1e-8)
    assert all(estimate.truncation == 'tail-completed' for estimate in report.estimates)
    assert all(estimate.M_star <= 60 for estimate in report.estimates)
    values = report.values
    assert all(later <= earlier * (1 + 1e-8) for earlier, later in zip(values, values[1:]))
