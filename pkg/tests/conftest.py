import pytest

from overlapdim.ifs_core import IfsParams, ProbVector

MAIN = (0.03, 0.05, 0.07)


@pytest.fixture
def main_params():
    return IfsParams(*MAIN)


@pytest.fixture
def uniform():
    return ProbVector.uniform()
