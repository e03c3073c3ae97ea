import math

import pytest

from nogap.modules.python.MpNumerics import PrecisionContext, HermitianMatrix, hermitian_inverse_diagonal, \
    integrate, gauss_legendre, largest_eigenvalue, relative_drift, stability_check, resolve_precision
from nogap.modules.python.Exceptions import InvalidParameters, NotPositiveDefinite


def test_precision_context_rejects_small_mantissa():
    with pytest.raises(InvalidParameters):
        PrecisionContext(32)


def test_precision_doubling():
    precision = PrecisionContext(128)
    assert precision.doubled().bits == 256
    assert resolve_precision(96).bits == 96
    assert resolve_precision(None).bits == 512


def test_inverse_diagonal_of_two_by_two(precision):
    diagonal = hermitian_inverse_diagonal([[2, 1], [1, 2]], precision=precision)
    for value in diagonal:
        assert abs(value - precision.ctx.mpf(2) / 3) < precision.tolerance


def test_full_inverse(precision):
    diagonal, inverse = hermitian_inverse_diagonal([[2, 1], [1, 2]], full_inverse=True, precision=precision)
    assert abs(inverse[0][1] + precision.ctx.mpf(1) / 3) < precision.tolerance
    assert abs(inverse[1][0] - inverse[0][1]) < precision.tolerance


def test_not_positive_definite(precision):
    with pytest.raises(NotPositiveDefinite) as error:
        hermitian_inverse_diagonal([[1, 2], [2, 1]], precision=precision)
    assert error.value.witness['index'] == 2


def test_non_hermitian_rejected(precision):
    with pytest.raises(InvalidParameters):
        HermitianMatrix([[1, 2], [0, 1]], precision)


def test_factorization_reconstructs(precision):
    matrix = HermitianMatrix([[4, 1, 0], [1, 3, 1], [0, 1, 2]], precision)
    assert matrix.factorize().reconstruction_error() < precision.tolerance


def test_integrals(precision):
    ctx = precision.ctx
    assert abs(integrate(lambda t: 2 * t, 0, 1, precision=precision).value - 1) < precision.tolerance
    decay = integrate(lambda t: ctx.exp(-2 * t), 0, 1, precision=precision)
    assert abs(decay.value - ctx.mpf('0.4323323583816936')) < 1e-15
    assert decay.error < 1e-30
    assert abs(integrate(ctx.sin, 0, ctx.pi, precision=precision).value - 2) < precision.tolerance


def test_integrate_rejects_reversed_bounds(precision):
    with pytest.raises(InvalidParameters):
        integrate(lambda t: t, 1, 0, precision=precision)


def test_gauss_legendre_weights_sum_to_two(precision):
    nodes, weights = gauss_legendre(12, precision)
    assert len(nodes) == 12
    assert abs(sum(weights) - 2) < precision.tolerance
    assert list(nodes) == sorted(nodes)


def test_largest_eigenvalue(precision):
    matrix = HermitianMatrix([[2, 1], [1, 2]], precision)
    assert abs(largest_eigenvalue(matrix).value - 3) < 1e-20


def test_relative_drift():
    assert relative_drift(1.0, 1.0) == 0.0
    assert math.isclose(relative_drift([1.0, 2.0], [1.0, 1.0]), 0.5)


def test_stability_check():
    report = stability_check(lambda precision: precision.ctx.sqrt(2), PrecisionContext(128))
    assert report.passed
