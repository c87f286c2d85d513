import csv
import io
import math

from altphillips.util import (
    is_nonincreasing,
    is_strictly_decreasing,
    least_squares_slope,
    rows_to_csv,
    serialize_text,
)
from tests.fixtures import *


def test_serialize_text_returns_text_without_path():
    assert serialize_text("abc") == "abc"


@pytest.mark.parametrize("as_str", [True, False])
def test_serialize_text_writes_file(tmp_path, as_str):
    path = tmp_path / "out.txt"

    actual = serialize_text("a\nb\n", str(path) if as_str else path)

    assert actual is None
    assert path.read_text(encoding="utf-8") == "a\nb\n"


def test_serialize_text_rejects_other_sinks():
    with pytest.raises(TypeError):
        serialize_text("abc", io.StringIO())


def test_rows_to_csv_keeps_floats_exact():
    value = 1.0 / 3.0

    actual = rows_to_csv(["gamma", "converged", "sweeps"], [[value, True, 12], [math.nan, False, 0]])

    rows = list(csv.reader(io.StringIO(actual)))
    assert rows[0] == ["gamma", "converged", "sweeps"]
    assert float(rows[1][0]) == value
    assert rows[1][1:] == ["true", "12"]
    assert math.isnan(float(rows[2][0]))
    assert rows[2][1] == "false"


def test_rows_to_csv_writes_to_stream():
    out = io.StringIO()

    assert rows_to_csv(["a"], [[np.float64(0.5)]], out) is None
    assert out.getvalue() == '"a"\n"0.5"\n'


@pytest.mark.parametrize(
    "values, strict, nonincreasing",
    [
        ([3.0, 2.0, 1.0], True, True),
        ([3.0, 3.0, 1.0], False, True),
        ([1.0, 2.0], False, False),
        ([], True, True),
        ([5.0], True, True),
    ],
)
def test_monotonicity(values, strict, nonincreasing):
    assert is_strictly_decreasing(values) == strict
    assert is_nonincreasing(values) == nonincreasing


def test_is_nonincreasing_with_relative_slack():
    assert not is_nonincreasing([1.0, 1.0 + 1e-13])
    assert is_nonincreasing([1.0, 1.0 + 1e-13], rel_tol=1e-12)


def test_least_squares_slope():
    x = np.linspace(0.0, 1.0, 11)

    assert least_squares_slope(x, 3.0 * x - 2.0) == pytest.approx(3.0)


def test_least_squares_slope_needs_two_points():
    with pytest.raises(ValueError):
        least_squares_slope([1.0], [1.0])
