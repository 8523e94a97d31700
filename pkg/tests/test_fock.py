import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photocount import (TruncationError, UndefinedStatisticError,
                        default_n_max, factorial_moment, make_coherent,
                        make_number, make_thermal, mandel_q)


def brute_geometric_moment(nbar, k, n_top=200_000):
    """Independent oracle: direct summation of the geometric law."""
    n = np.arange(n_top + 1, dtype=float)
    x = nbar / (1.0 + nbar)
    p = np.exp(n * np.log(x) - np.log(1.0 + nbar))
    w = np.ones_like(n)
    for i in range(k):
        w = w * (n - i)
    w[:k] = 0.0
    return float(np.dot(w, p))


class TestNumber:
    def test_vacuum(self):
        d = make_number(0, 0)
        assert d.probs[0] == 1.0 and d.trace() == 1.0

    def test_spike(self):
        d = make_number(50, 60)
        assert d.probs[50] == 1.0
        assert d.mean() == 50.0

    def test_mandel_q_is_minus_one(self):
        assert mandel_q(make_number(50, 60)) == pytest.approx(-1.0, abs=1e-12)

    def test_rejects_n_above_truncation(self):
        with pytest.raises(ValueError):
            make_number(5, 4)


class TestCoherent:
    def test_zero_mean_is_vacuum(self):
        d = make_coherent(0.0)
        assert d.probs[0] == 1.0

    def test_mean(self):
        d = make_coherent(50.0, n_max=130)
        assert d.mean() == pytest.approx(50.0, rel=1e-10)

    def test_mandel_q_zero(self):
        assert mandel_q(make_coherent(50.0)) == pytest.approx(0.0, abs=1e-9)

    def test_second_factorial_moment_poisson(self):
        d = make_coherent(50.0)
        assert factorial_moment(d, 2) == pytest.approx(2500.0, rel=1e-9)

    def test_truncation_error_reports_requirement(self):
        with pytest.raises(TruncationError) as err:
            make_coherent(50.0, n_max=55)
        assert err.value.required > 55


class TestThermal:
    def test_zero_mean_is_vacuum(self):
        assert make_thermal(0.0).probs[0] == 1.0

    def test_mandel_q_equals_nbar(self):
        assert mandel_q(make_thermal(50.0)) == pytest.approx(50.0, rel=1e-9)

    def test_second_factorial_moment_vs_brute_force(self):
        d = make_thermal(50.0)
        brute = brute_geometric_moment(50.0, 2)
        assert factorial_moment(d, 2) == pytest.approx(brute, rel=1e-9)
        assert factorial_moment(d, 2) == pytest.approx(2 * 50.0 ** 2, rel=1e-9)

    def test_needs_geometric_growth(self):
        # the Poissonian heuristic is far too small for heavy geometric tails
        d = make_thermal(50.0)
        assert d.n_max > default_n_max(50.0)
        assert d.probs[-1] * d.n_max <= d.tail_tol


class TestMoments:
    def test_number_first_moment(self):
        assert factorial_moment(make_number(50, 60), 1) == 50.0

    def test_k_zero_is_mass(self):
        d = make_coherent(3.0)
        assert factorial_moment(d, 0) == pytest.approx(d.trace())

    def test_mandel_q_undefined_for_vacuum(self):
        with pytest.raises(UndefinedStatisticError):
            mandel_q(make_number(0, 3))


@settings(max_examples=40, deadline=None)
@given(nbar=st.floats(0.1, 80.0))
def test_constructors_normalized(nbar):
    for make in (make_coherent, make_thermal):
        d = make(nbar)
        assert 1.0 - d.tail_tol <= d.trace() <= 1.0 + 1e-14
        assert np.all(d.probs >= 0.0)


@settings(max_examples=40, deadline=None)
@given(nbar=st.floats(0.1, 80.0))
def test_first_moment_matches_weighted_sum(nbar):
    d = make_coherent(nbar)
    direct = float(np.dot(np.arange(len(d.probs)), d.probs))
    assert factorial_moment(d, 1) == direct


@settings(max_examples=20, deadline=None)
@given(nbar=st.floats(1.0, 60.0), k=st.integers(1, 4))
def test_monotone_truncation(nbar, k):
    small = make_coherent(nbar, n_max=default_n_max(nbar))
    big = make_coherent(nbar, n_max=2 * default_n_max(nbar))
    scale = max(factorial_moment(big, k), 1.0)
    assert factorial_moment(big, k) >= factorial_moment(small, k) - small.tail_tol * scale
