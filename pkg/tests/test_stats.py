"""Statistics against an independent numerical-integration oracle."""

import math

import pytest
from scipy.integrate import quad

from drt_harness.errors import HarnessError
from drt_harness.scoring.stats import (
    pearson,
    reg_inc_beta,
    student_t_cdf,
    student_t_ppf,
    student_t_two_sided_p,
    t_test,
)


def t_density(x, df):
    c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)
                 - 0.5 * math.log(df * math.pi))
    return c * (1 + x * x / df) ** (-(df + 1) / 2)


def oracle_two_sided_p(t, df):
    """P(|T| >= |t|) by adaptive quadrature of the t density."""
    tail, _ = quad(t_density, abs(t), math.inf, args=(df,),
                   epsabs=1e-13, epsrel=1e-13)
    return 2.0 * tail


# -- frozen example from the oracle --------------------------------------------

def test_welch_example_exact():
    result = t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert result.statistic == pytest.approx(-1.0, abs=1e-12)
    assert result.df == pytest.approx(8.0, abs=1e-12)
    assert result.p_value == pytest.approx(0.3466, abs=1e-4)
    # frozen from the quadrature oracle:
    assert result.p_value == pytest.approx(0.34659350708733416, abs=1e-9)
    assert not result.significant


def test_welch_symmetry():
    a, b = [1.0, 4.0, 2.5, 3.5], [2.0, 5.0, 6.0, 3.0]
    r1 = t_test(a, b)
    r2 = t_test(b, a)
    assert r1.statistic == -r2.statistic
    assert r1.p_value == r2.p_value
    assert r1.df == r2.df


def test_welch_identical_samples():
    result = t_test([5.0, 5.0, 5.0], [5.0, 5.0, 5.0])
    assert result.statistic == 0.0
    assert result.p_value == 1.0


def test_welch_degenerate_variance_unequal_means():
    result = t_test([1.0, 1.0], [2.0, 2.0])
    assert result.p_value == 0.0
    assert result.significant
    assert result.note == "degenerate zero variance"


def test_welch_large_separation_significant():
    a = [0.0, 0.01, -0.01, 0.005]
    b = [100.0, 100.01, 99.99, 100.005]
    assert t_test(a, b).significant


def test_paired_t():
    a = [10.0, 12.0, 9.0, 11.0]
    b = [9.0, 11.5, 8.0, 10.0]
    result = t_test(a, b, paired=True)
    assert result.method == "paired-t"
    assert result.df == 3.0
    diffs = [x - y for x, y in zip(a, b)]
    mean = sum(diffs) / 4
    var = sum((d - mean) ** 2 for d in diffs) / 3
    expected_t = mean / math.sqrt(var / 4)
    assert result.statistic == pytest.approx(expected_t, rel=1e-12)


def test_t_test_needs_two_values():
    with pytest.raises(HarnessError):
        t_test([1.0], [1.0, 2.0])


# -- pearson ------------------------------------------------------------------

def test_pearson_example_exact():
    result = pearson([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])
    assert result.rho == 0.8
    assert result.n == 5


def test_pearson_perfect_lines():
    xs = [1.0, 2.0, 3.0, 4.0]
    assert pearson(xs, [2 * x + 1 for x in xs]).rho == pytest.approx(1.0)
    assert pearson(xs, [-x for x in xs]).rho == pytest.approx(-1.0)
    assert pearson(xs, [2 * x + 1 for x in xs]).p_value == 0.0


def test_pearson_affine_invariance():
    xs = [1.0, 2.0, 5.0, 7.0, 11.0]
    ys = [2.0, 1.0, 7.0, 6.0, 12.0]
    base = pearson(xs, ys).rho
    assert pearson([3 * x + 4 for x in xs], ys).rho == \
        pytest.approx(base, rel=1e-12)
    assert pearson(xs, [0.5 * y - 2 for y in ys]).rho == \
        pytest.approx(base, rel=1e-12)


def test_pearson_p_against_oracle():
    xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    ys = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0]
    result = pearson(xs, ys)
    t = result.rho * math.sqrt((result.n - 2) / (1 - result.rho ** 2))
    assert result.p_value == pytest.approx(
        oracle_two_sided_p(t, result.n - 2), abs=1e-9)


def test_pearson_errors():
    with pytest.raises(HarnessError):
        pearson([1, 2], [1, 2])
    with pytest.raises(HarnessError):
        pearson([1, 2, 3], [1, 2])
    with pytest.raises(HarnessError):
        pearson([1, 1, 1], [1, 2, 3])


# -- p-functions vs the integration oracle over a grid ---------------------------

@pytest.mark.parametrize("df", [1, 2, 3, 5, 8, 10.5, 20, 50, 120, 500])
@pytest.mark.parametrize("t", [0.0, 0.1, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0])
def test_two_sided_p_matches_quadrature(t, df):
    assert student_t_two_sided_p(t, df) == pytest.approx(
        oracle_two_sided_p(t, df), abs=1e-9)


def test_cdf_consistency():
    for t in (-3.0, -1.0, 0.0, 0.5, 2.5):
        for df in (2, 7, 30):
            left = student_t_cdf(t, df)
            tail, _ = quad(t_density, -math.inf, t, args=(df,),
                           epsabs=1e-13, epsrel=1e-13)
            assert left == pytest.approx(tail, abs=1e-9)


def test_ppf_inverts_cdf():
    for p in (0.6, 0.9, 0.95, 0.975, 0.995):
        for df in (1, 2, 5, 29, 100):
            t = student_t_ppf(p, df)
            assert student_t_cdf(t, df) == pytest.approx(p, abs=1e-10)


def test_ppf_known_value():
    # t quantile for CI95 with two degrees of freedom
    assert student_t_ppf(0.975, 2) == pytest.approx(4.302652729749, abs=1e-8)


def test_incomplete_beta_bounds():
    assert reg_inc_beta(0.0, 2.0, 3.0) == 0.0
    assert reg_inc_beta(1.0, 2.0, 3.0) == 1.0
    with pytest.raises(HarnessError):
        reg_inc_beta(0.5, -1.0, 2.0)


def test_incomplete_beta_symmetry():
    for x in (0.1, 0.3, 0.5, 0.8):
        for a, b in ((2.0, 3.0), (0.5, 5.0), (10.0, 0.5)):
            assert reg_inc_beta(x, a, b) == pytest.approx(
                1.0 - reg_inc_beta(1.0 - x, b, a), abs=1e-12)
