import math

import krippendorff
import numpy as np
import pytest
import scipy.special
import scipy.stats

from claysculpt.errors import InvalidArgument, UndefinedStatistic
from claysculpt.stats import betainc_reg, krippendorff_alpha, read_ratings_csv, t_two_sided_p, welch_t


@pytest.mark.parametrize("level", ["nominal", "ordinal", "interval", "ratio"])
def test_alpha_matches_reference_package(rng, level):
    for _ in range(10):
        r = rng.integers(1, 6, size=(3, 12)).astype(float)
        r[rng.random(r.shape) < 0.15] = np.nan
        ref = krippendorff.alpha(reliability_data=r, level_of_measurement=level)
        assert krippendorff_alpha(r, level) == pytest.approx(ref, abs=1e-12)


def test_two_swapped_items_disagree_systematically():
    # every pairable value disagrees: alpha falls below zero
    assert krippendorff_alpha([[1, 2], [2, 1]], "nominal") == pytest.approx(-0.5)


def test_alpha_edge_cases():
    assert krippendorff_alpha([[3, 3, 3], [3, 3, 3]]) == 1.0
    with pytest.raises(UndefinedStatistic):
        krippendorff_alpha([[1, np.nan], [np.nan, 2]])
    with pytest.raises(InvalidArgument):
        krippendorff_alpha([[1, 2, 3]])
    with pytest.raises(InvalidArgument):
        krippendorff_alpha([[1, 2], [1, 7]], scale=range(1, 6))
    with pytest.raises(InvalidArgument):
        krippendorff_alpha([[1, 2], [1, 2]], level="cardinal")


def test_ratings_csv_blanks_are_missing(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("1,2,,4\n1,3,3\n")
    r = read_ratings_csv(path)
    assert r.shape == (2, 4)
    assert np.isnan(r[0, 2]) and np.isnan(r[1, 3])


def test_incomplete_beta_matches_scipy():
    for a, b, x in [(0.5, 0.5, 0.3), (3.0, 0.5, 0.9), (12.5, 0.5, 0.01), (2.0, 7.0, 0.5)]:
        assert betainc_reg(a, b, x) == pytest.approx(scipy.special.betainc(a, b, x), abs=1e-13)


def test_welch_matches_scipy_and_is_antisymmetric(rng):
    a = rng.normal(0, 1, 12)
    b = rng.normal(1, 3, 7)
    res = welch_t(a, b)
    ref = scipy.stats.ttest_ind(a, b, equal_var=False)
    assert res.t == pytest.approx(ref.statistic, abs=1e-12)
    assert res.p == pytest.approx(ref.pvalue, abs=1e-12)
    assert welch_t(b, a).t == -res.t
    assert welch_t(b, a).df == res.df


def test_welch_degenerate_inputs():
    assert welch_t([1.0, 1.0], [1.0, 1.0]).t == 0.0
    with pytest.raises(UndefinedStatistic):
        welch_t([1.0, 1.0], [2.0, 2.0])
    with pytest.raises(InvalidArgument):
        welch_t([1.0], [1.0, 2.0])
    assert math.isnan(t_two_sided_p(float("nan"), 3.0))
