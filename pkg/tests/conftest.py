import os

import pytest

from nogap.modules.python.TextColor import TextColor

os.environ[TextColor.QUIET_ENV] = '1'

from nogap.modules.python.MpNumerics import PrecisionContext
from nogap.modules.python.ExampleSequences import gen_quadratic, gen_grouped, gen_perturbed


@pytest.fixture
def precision():
    return PrecisionContext(256)


@pytest.fixture
def squares():
    return gen_quadratic(1)


@pytest.fixture
def grouped():
    return gen_grouped(2)


@pytest.fixture
def perturbed():
    return gen_perturbed(0.5)


@pytest.fixture
def output_dir(tmp_path):
    path = tmp_path / 'nogap_output'
    path.mkdir()
    return str(path) + os.sep
