import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from cohrel import numerics as N


def test_simpson_exact_on_cubics():
    assert N.simpson(lambda x: x**2, 0.0, 1.0, 2) == pytest.approx(1 / 3, abs=1e-15)
    assert N.simpson(lambda x: 4 * x**3 - x, -1.0, 2.0, 2) == pytest.approx(15 - 1.5, abs=1e-12)


def test_simpson_quartic_error_term():
    # composite Simpson overshoots x^4 on [0, 1] by exactly h^4 * 24 / 180
    h = 1 / 100
    err = N.simpson(lambda x: x**4, 0.0, 1.0, 100) - 0.2
    assert err == pytest.approx(24 * h**4 / 180, rel=1e-6)
    assert abs(N.simpson(lambda x: x**4, 0.0, 1.0, 200) - 0.2) < 1e-9


def test_simpson_empty_interval():
    assert N.simpson(np.exp, 2.0, 2.0) == 0.0


def test_simpson_fourth_order_convergence():
    exact = math.e - 1
    e10 = abs(N.simpson(np.exp, 0, 1, 10) - exact)
    e20 = abs(N.simpson(np.exp, 0, 1, 20) - exact)
    assert 14 < e10 / e20 < 18


@pytest.mark.parametrize("panels", [0, 3, 1])
def test_simpson_rejects_odd_panels(panels):
    with pytest.raises(N.NumericError):
        N.simpson(np.exp, 0, 1, panels)


def test_simpson_rejects_non_finite():
    with pytest.raises(N.NumericError):
        N.simpson(lambda x: np.where(x > 0.5, np.inf, x), 0.0, 1.0)


def test_integrate_without_jumps_is_plain_simpson():
    g = N.Grid(np.array([0.0, 2.0]))
    assert N.integrate_between_jumps(np.sin, g) == N.simpson(np.sin, 0.0, 2.0)


def test_integrate_step_function_split_at_jump():
    # step at 1: the jump point itself carries no mass, each side integrates exactly
    f = lambda x: np.where(x < 1.0, x, 10.0 + x**2)
    g = N.Grid(np.array([0.0, 1.0, 3.0]), jumps=np.array([1.0]))
    exact = 0.5 + (20.0 + (27 - 1) / 3)
    assert N.integrate_between_jumps(f, g) == pytest.approx(exact, rel=1e-12)


def test_integrate_single_point_grid():
    assert N.integrate_between_jumps(np.exp, N.Grid(np.array([1.0]), jumps=np.array([1.0]))) == 0.0


def test_grid_validation():
    with pytest.raises(N.NumericError):
        N.Grid(np.array([0.0, 0.0]))
    with pytest.raises(N.NumericError):
        N.Grid(np.array([0.0, 1.0]), jumps=np.array([0.5]))


@given(st.floats(1e-8, 50))
def test_log1mexp(x):
    assert N.log1mexp(x) == pytest.approx(math.log(-math.expm1(-x)), rel=1e-12)


def test_streams_reproduce_and_differ():
    a = N.RandomStream(7, 3).uniform(5)
    assert np.array_equal(a, N.RandomStream(7, 3).uniform(5))
    assert not np.array_equal(a, N.RandomStream(7, 4).uniform(5))
    assert np.array_equal(N.RandomStream(7, 0).child(3).uniform(5), a)


def test_beta_one_one_is_uniform():
    s = N.RandomStream(11)
    draws = [N.beta_draw(1, 1, s) for _ in range(10_000)]
    assert stats.kstest(draws, "uniform").pvalue > 0.01


def test_gamma_draw_uses_rate():
    s = N.RandomStream(5)
    draws = np.array([N.gamma_draw(3.0, 2.0, s) for _ in range(20_000)])
    assert draws.mean() == pytest.approx(1.5, abs=0.03)


def test_multinomial_degenerate():
    s = N.RandomStream(1)
    assert {N.multinomial_draw((1.0, 0.0, 0.0), s) for _ in range(200)} == {1}
    assert {N.multinomial_draw((0.0, 0.0, 1.0), s) for _ in range(200)} == {3}


def test_multinomial_rejects_unnormalized():
    with pytest.raises(ValueError):
        N.multinomial_draw((0.5, 0.6), N.RandomStream(1))


def test_multinomial_frequencies():
    s = N.RandomStream(2)
    counts = np.bincount([N.multinomial_draw((0.2, 0.5, 0.3), s) for _ in range(20_000)], minlength=4)[1:]
    assert stats.chisquare(counts, np.array([0.2, 0.5, 0.3]) * 20_000).pvalue > 0.001


def test_scalar_helpers():
    s = N.RandomStream(3)
    assert 0.0 <= N.uniform(s) < 1.0
    assert math.isfinite(N.normal_draw(0.0, 1.0, s))
