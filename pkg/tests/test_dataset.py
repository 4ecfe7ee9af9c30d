import io

import numpy as np
import pytest

from esgce.dataset import TimeSeriesDataset
from esgce.errors import DataFormatError, InvalidDimensionError


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    data = TimeSeriesDataset.from_array(rng.standard_normal((20, 3)), ["a", "b", "c"])
    path = tmp_path / "x.csv"
    data.to_csv(path)
    back = TimeSeriesDataset.from_csv(path)
    assert back.names == ["a", "b", "c"]
    np.testing.assert_array_equal(back.values, data.values)
    assert (back.T, back.d) == (20, 3)


@pytest.mark.parametrize("text, line", [
    ("", 1),
    ("a,,c\n1,2,3\n", 1),
    ("a,a\n1,2\n", 1),
    ("a,b\n1,2\n3\n", 3),
    ("a,b\n1,2\n3,x\n", 3),
    ("a,b\n1,2\n3,\n", 3),
    ("a,b\n1,nan\n", 2),
    ("a,b\n", 2),
])
def test_malformed_csv_reports_line(text, line):
    with pytest.raises(DataFormatError) as err:
        TimeSeriesDataset.read_csv(io.StringIO(text))
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_blank_lines_are_skipped():
    data = TimeSeriesDataset.read_csv(io.StringIO("a,b\n1,2\n\n3,4\n"))
    assert data.values.tolist() == [[1, 2], [3, 4]]


def test_shape_validation():
    with pytest.raises(InvalidDimensionError):
        TimeSeriesDataset(np.zeros((3, 2)), ["only-one"])
    with pytest.raises(InvalidDimensionError):
        TimeSeriesDataset(np.zeros(3), ["x"])


def test_select_reorders_columns():
    data = TimeSeriesDataset.from_array(np.arange(6).reshape(2, 3))
    sub = data.select([2, 0])
    assert sub.names == ["X3", "X1"]
    assert sub.values.tolist() == [[2, 0], [5, 3]]
