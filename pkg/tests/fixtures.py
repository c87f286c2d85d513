import os

import numpy as np
import pytest

from altphillips import *
from altphillips.profile import exact_phi

FIXTURE_DIR = os.path.join(os.path.dirname(os.path.realpath(__file__)), "test_files")

# Potentials


@pytest.fixture
def params_1():
    return make_params(1.0)


@pytest.fixture
def params_19():
    return make_params(1.9)


# Grids


@pytest.fixture
def line_grid():
    return Grid.box((1.0,), (100,))


@pytest.fixture
def square_grid():
    return Grid.box((1.0, 1.0), (64, 64))


# Half-plane: phi((x1 - 1/2)^+) on the unit square, dead set {x1 <= 1/2}


@pytest.fixture
def halfplane_field(square_grid, params_1):
    x1 = square_grid.coordinates()[..., 0]
    return ScalarField(square_grid, exact_phi(params_1, np.maximum(x1 - 0.5, 0.0)))


@pytest.fixture
def halfplane_dead(square_grid):
    x1 = square_grid.coordinates()[..., 0]
    return IndicatorField(square_grid, x1 <= 0.5)


# Exact profile on [0, 1]


@pytest.fixture
def phi_line_field(line_grid, params_1):
    return ScalarField(line_grid, exact_phi(params_1, line_grid.axes()[0]))


# Field files


@pytest.fixture
def small_2d_field_path():
    return os.path.join(FIXTURE_DIR, "fields", "small_2d.txt")


@pytest.fixture
def small_2d_field_text(small_2d_field_path):
    with open(small_2d_field_path, "r") as f:
        return f.read()


@pytest.fixture
def small_1d_field_path():
    return os.path.join(FIXTURE_DIR, "fields", "small_1d.txt")


@pytest.fixture
def small_1d_field_text(small_1d_field_path):
    with open(small_1d_field_path, "r") as f:
        return f.read()


@pytest.fixture
def malformed_field_path():
    return os.path.join(FIXTURE_DIR, "fields", "malformed_header.txt")
