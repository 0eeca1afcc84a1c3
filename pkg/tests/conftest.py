import logging

import pytest

from tests.helpers import build_problem


@pytest.fixture(autouse=True)
def restore_root_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def free_problem():
    return build_problem()


@pytest.fixture
def shifted_problem():
    return build_problem("const:2")


@pytest.fixture
def cosine_problem():
    return build_problem("cos:5,1+affine:0,3")
