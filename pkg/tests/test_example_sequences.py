import math
from fractions import Fraction

import pytest

from nogap.modules.python.ExampleSequences import gen_quadratic, gen_grouped, grouped_counting, \
    gen_dirichlet_pair, gen_perturbed, perturbed_epsilons, perturbed_sandwich, perturbed_minimal_time, \
    gen_gap_class, gen_phase_field, check_H2, sequence_from_spec
from nogap.modules.python.SequenceCore import counting_function, check_class
from nogap.modules.python.Exceptions import InvalidParameters, InvalidShift, RationalRootCollision, H2Violation


def test_quadratic_terms_and_params():
    seq = gen_quadratic(Fraction(1, 2), omega=1)
    assert [seq.exact_term(k).re for k in range(1, 4)] == [1, Fraction(9, 4), 4]
    assert seq.params.p1 == 2
    assert seq.params.alpha == 2
    with pytest.raises(InvalidShift):
        gen_quadratic(1, omega=-1)


def test_grouped_terms(grouped):
    assert [grouped.exact_term(k).re for k in range(1, 5)] == [1, Fraction(3, 2), 4, Fraction(9, 2)]
    assert grouped.params.rho == Fraction(2, 15)
    assert gen_grouped(3).params.nu == Fraction(11, 21)
    with pytest.raises(InvalidParameters):
        gen_grouped(1)


def test_grouped_counting_matches_sequence(grouped):
    for radius in (Fraction(1), Fraction(17, 4), Fraction(9), Fraction(19, 2), Fraction(50)):
        assert grouped_counting(2, radius) == counting_function(grouped, radius)


def test_dirichlet_pair():
    seq = gen_dirichlet_pair(2)
    assert abs(float(seq.params.p1) - 1.70711) < 1e-5
    assert float(seq.term(2, 64)) == pytest.approx(2.0)
    assert seq.origin(2) == (1, 1)
    assert seq.to_spec() == {'kind': 'dirichlet_pair', 'params': {'d': 2}}
    rebuilt = sequence_from_spec(seq.to_spec())
    assert [rebuilt.exact_term(k) for k in range(1, 6)] == [seq.exact_term(k) for k in range(1, 6)]
    with pytest.raises(RationalRootCollision):
        gen_dirichlet_pair(4)


def test_perturbed_terms(perturbed, precision):
    ctx = precision.ctx
    assert perturbed.term(1, precision) == 1
    assert abs(perturbed.term(2, precision) - (1 + ctx.exp(-1))) < precision.tolerance
    assert perturbed.term(3, precision) == 4
    epsilons = perturbed_epsilons(0.5, 3, precision)
    assert abs(epsilons[2] - ctx.exp(-3)) < precision.tolerance


def test_perturbed_sandwich_holds(precision):
    rows = perturbed_sandwich(0.5, 6, precision)
    assert [row.k for row in rows] == list(range(1, 13))
    assert all(row.holds for row in rows)


def test_perturbed_minimal_time():
    assert perturbed_minimal_time(0.5) == 0.0
    assert perturbed_minimal_time(1) == 1.0
    assert math.isinf(perturbed_minimal_time(1.5))
    assert gen_perturbed(0.75).metadata['minimal_time'] == 0.0


def test_gap_class_reduces_to_squares():
    seq = gen_gap_class(1, 1, 1)
    assert [seq.exact_term(k).re for k in range(1, 5)] == [1, 4, 9, 16]
    assert seq.params.q == 1
    with pytest.raises(InvalidParameters):
        gen_gap_class(2, 1, 1)


def test_gap_class_membership():
    seq = gen_gap_class(Fraction(1, 2), 1, 1)
    report = check_class(seq, seq.params, prefix=40)
    assert report.status('H5') == 'PASS'
    assert report.status('H4') == 'PASS'


def test_phase_field_spectrum(precision):
    spectrum, seq = gen_phase_field(1, 1, 1, n=20)
    ctx = precision.ctx
    assert abs(spectrum.r(ctx, 1) - ctx.sqrt(2)) < precision.tolerance
    assert spectrum.j0 == 1
    assert seq.metadata['j0'] == 1
    terms = seq.terms(20, precision)
    assert all(a < b for a, b in zip(terms, terms[1:]))


def test_phase_field_gap_identity(precision):
    spectrum, _ = gen_phase_field(1, 1, 1, n=10)
    for k in (3, 5):
        for i in (0, 1, 2):
            direct, formula = spectrum.gap_identity(k, i, precision)
            assert abs(direct - formula) < precision.tolerance


def test_check_H2():
    assert check_H2(1, 1, 1, 10) == []
    violations = check_H2(1, Fraction(2, 3), 1, 5)
    assert (violations[0].k, violations[0].l) == (1, 2)
    with pytest.raises(H2Violation):
        gen_phase_field(1, Fraction(2, 3), 1, n=5)
