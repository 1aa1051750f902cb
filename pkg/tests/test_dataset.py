from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from pcs.dataset import (
    Dataset,
    Tolerances,
    breakdown_bound,
    check_general_position,
    default_h,
    load_csv,
    save_csv,
    subset_size,
)
from pcs.errors import CapExceededError, ParseError, ValidationError
from pcs.simulate import exact_fit_sample, gaussian_cloud


def write(tmp_path, text, name="x.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_six_by_two(tmp_path):
    rows = "\n".join(f"{i},{i * i % 7}" for i in range(6))
    data = load_csv(write(tmp_path, rows))
    assert (data.n, data.p) == (6, 2)


def test_load_header_and_whitespace(tmp_path):
    text = "a b\n1 2\n3 5\n4 1\n0 0\n"
    data = load_csv(write(tmp_path, text))
    assert data.n == 4
    np.testing.assert_array_equal(data.values[1], [3.0, 5.0])


def test_duplicate_rows_named(tmp_path):
    with pytest.raises(ValidationError, match="duplicate rows 1,2"):
        load_csv(write(tmp_path, "1,0\n1,0\n3,4\n5,1\n"))


def test_duplicates_allowed_by_flag(tmp_path):
    data = load_csv(write(tmp_path, "1,0\n1,0\n3,4\n5,1\n"), allow_duplicates=True)
    assert data.n == 4


def test_too_few_rows(tmp_path):
    with pytest.raises(ValidationError, match=r"n>p\+1"):
        load_csv(write(tmp_path, "1,0\n0,1\n2,2\n"))


@pytest.mark.parametrize(
    "text, line",
    [("1,2\n3,x\n4,5\n6,1\n", 2), ("1,2\n3\n4,5\n6,1\n", 2), ("1,2\n3,4\n4,5\n6,nan\n", 4)],
)
def test_parse_errors_carry_line(tmp_path, text, line):
    with pytest.raises((ParseError, ValidationError)) as info:
        load_csv(write(tmp_path, text), has_header=False)
    assert info.value.exit_code in (2, 3)
    if isinstance(info.value, ParseError):
        assert str(line) in str(info.value)


def test_non_finite_rejected():
    with pytest.raises(ValidationError):
        Dataset(np.array([[0.0, 1.0], [np.inf, 0.0], [2.0, 2.0], [3.0, 1.0]]))


def test_values_read_only():
    data = Dataset(gaussian_cloud(6, 2))
    with pytest.raises(ValueError):
        data.values[0, 0] = 1.0


def test_round_trip_csv(tmp_path):
    x = gaussian_cloud(7, 3, seed=4)
    path = tmp_path / "r.csv"
    save_csv(path, x)
    np.testing.assert_array_equal(load_csv(path).values, x)


@pytest.mark.parametrize("n, p, h", [(100, 2, 52), (6, 2, 5), (20, 2, 12), (15, 3, 10)])
def test_default_h(n, p, h):
    assert default_h(n, p).h == h


def test_subset_size_override_bounds():
    assert subset_size(20, 2, 20).h == 20
    with pytest.raises(ValidationError):
        subset_size(20, 2, 2)
    with pytest.raises(ValidationError):
        subset_size(20, 2, 21)


@pytest.mark.parametrize(
    "n, h, exact", [(100, 52, Fraction(49, 100)), (20, 12, Fraction(9, 20)), (17, 17, Fraction(1, 17))]
)
def test_breakdown_bound(n, h, exact):
    bound = breakdown_bound(n, h)
    assert bound.exact == exact
    assert bound.value == float(exact)


def test_general_position_collinear_triple():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.0, 3.0]])
    report = check_general_position(Dataset(x))
    assert not report.in_general_position
    assert report.witness == (0, 1, 2)


def test_general_position_square():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert check_general_position(Dataset(x)).in_general_position


def test_general_position_line_fixture():
    x, on_line = exact_fit_sample()
    report = check_general_position(Dataset(x))
    assert not report.in_general_position
    assert report.exhaustive
    assert set(report.witness) <= set(np.flatnonzero(on_line))


def test_general_position_cap():
    data = Dataset(gaussian_cloud(30, 2))
    with pytest.raises(CapExceededError):
        check_general_position(data, cap=100)
    report = check_general_position(data, cap=100, allow_sampling=True, n_samples=500)
    assert not report.exhaustive
    assert report.in_general_position


def test_tolerance_override_changes_duplicate_check():
    x = np.array([[0.0, 0.0], [1e-3, 0.0], [1.0, 2.0], [3.0, 1.0]])
    Dataset(x)
    with pytest.raises(ValidationError):
        Dataset(x, tolerances=Tolerances(dup=1e-2))
