import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from cohrel import data, npbayes as nb, simulate, structure
from cohrel.data import SystemRecord
from cohrel.numerics import RandomStream

from oracles import prior_alpha, product_limit_parallel, product_limit_series, sps_exponential_alphas

EXP = stats.expon()
SPS4 = "min(max(1,2),max(3,4))"
PSS4 = "max(min(1,2),min(3,4))"


@pytest.fixture(scope="module")
def sps4_records():
    return data.load_system_csv(data.fixture_path("sps4_systems.csv"))


@pytest.fixture(scope="module")
def pss4_records():
    return data.load_system_csv(data.fixture_path("pss4_systems.csv"))


# --------------------------------------------------------------------------- prior measures


def test_exponential_prior_closed_form():
    a = nb.prior_measures_from_guess(EXP, EXP, EXP, "SPS")
    v = np.linspace(0, 6, 301)
    a1, a23 = sps_exponential_alphas(v)
    np.testing.assert_allclose(a[0].cumulative(v), a1, atol=1e-6)
    np.testing.assert_allclose(a[1].cumulative(v), a23, atol=1e-6)
    np.testing.assert_allclose(a[2].cumulative(v), a23, atol=1e-6)
    assert sum(p.total_mass for p in a) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("kind", ["SPS", "PSS"])
@pytest.mark.parametrize("slot", [1, 2, 3])
def test_prior_measures_match_quadrature(kind, slot):
    guesses = (stats.gamma(2.0, scale=2.0), stats.weibull_min(1.8, scale=5.0), stats.lognorm(0.5, scale=4.0))
    a = nb.prior_measures_from_guess(*guesses, kind=kind)
    for v in (0.5, 2.0, 5.0, 12.0):
        assert a[slot - 1].cumulative(v) == pytest.approx(prior_alpha(kind, guesses, slot, v), abs=1e-7)


def test_prior_mass_scales():
    a = nb.prior_measures_from_guess(EXP, EXP, EXP, "PSS", mass=5.0)
    assert sum(p.total_mass for p in a) == pytest.approx(5.0, rel=1e-9)


def test_never_failing_slots_reduce_to_one_component():
    a = nb.prior_measures_from_guess(EXP, nb.NeverFails(), nb.NeverFails(), "SPS")
    v = np.linspace(0, 5, 51)
    np.testing.assert_allclose(a[0].cumulative(v), EXP.cdf(v), atol=1e-8)
    assert a[1].total_mass == 0.0 and a[2].total_mass == 0.0


@pytest.mark.parametrize("kw", [dict(kind="XYZ"), dict(mass=0.0)])
def test_prior_argument_errors(kw):
    with pytest.raises(ValueError):
        nb.prior_measures_from_guess(EXP, EXP, EXP, **kw)


# --------------------------------------------------------------------------- posterior sub-distributions


def test_empirical_subdist(sps4_records):
    head = sps4_records[:10]
    assert nb.empirical_subdist(head, 1, 2.00) == sum(r.delta == 1 and r.t <= 2.0 for r in head) / 10
    assert nb.empirical_subdist(sps4_records, 1, 0.0) == 0.0
    assert sum(nb.empirical_subdist(sps4_records, j, np.inf) for j in range(1, 5)) == 1.0


def test_series_fixture_empirical_example():
    recs = data.load_system_csv(data.fixture_path("series4_systems.csv"))
    qualifying = [r.t for r in recs if r.delta == 1 and r.t <= 2.0]
    assert sorted(qualifying) == [1.41, 1.92]
    assert nb.empirical_subdist(recs, 1, 2.00) == pytest.approx(0.2)


def collapsed_sps4(records, target=1):
    view = structure.canonical_three(structure.parse(SPS4), target, "SPS")
    return view, [(r.t, view.collapse(r.delta)) for r in records]


def test_posterior_totals(sps4_records):
    view, pairs = collapsed_sps4(sps4_records)
    a = nb.prior_measures_from_guess(EXP, EXP, EXP, "SPS")
    sub = nb.posterior_subdist(a, pairs, "SPS")
    for j in (1, 2, 3):
        count = sum(1 for _, d in pairs if d == j)
        assert sub.subdist(j, np.inf) == pytest.approx((count + a[j - 1].total_mass) / 101, abs=1e-12)


def test_system_df_closed_form(sps4_records):
    _, pairs = collapsed_sps4(sps4_records)
    sub = nb.posterior_subdist(nb.prior_measures_from_guess(EXP, EXP, EXP, "SPS"), pairs, "SPS")
    times = np.array([t for t, _ in pairs])
    n = times.size
    for t in np.linspace(0, times.max() + 1, 57):
        emp = np.mean(times <= t)
        expected = (n * emp + np.exp(-3 * t) - 2 * np.exp(-2 * t) + 1) / (n + 1)
        assert nb.system_df(sub, t) == pytest.approx(expected, abs=1e-6)
        assert nb.system_df(sub, t) == pytest.approx(sum(sub.subdist(j, t) for j in (1, 2, 3)), abs=1e-15)
    assert nb.system_df(sub, 0.0) == 0.0


def test_pure_prior_posterior():
    a = nb.prior_measures_from_guess(EXP, EXP, EXP, "SPS")
    sub = nb.posterior_subdist(a, [], "SPS")
    assert sub.subdist(2, 1.3) == pytest.approx(a[1].cumulative(1.3))
    assert nb.rho_hat(sub, 1) == pytest.approx(a[0].total_mass)


@pytest.mark.parametrize("n", [10, 100, 1000])
def test_data_dominance(n):
    rng = np.random.default_rng(n)
    pairs = [(float(t), int(d)) for t, d in zip(rng.exponential(1.0, n), rng.integers(1, 4, n))]
    sub = nb.posterior_subdist(nb.prior_measures_from_guess(EXP, EXP, EXP, "SPS"), pairs, "SPS")
    grid = np.linspace(0, 5, 101)
    gap = max(abs(sub.subdist(j, t) - nb.empirical_subdist(pairs, j, t)) for j in (1, 2, 3) for t in grid)
    assert gap <= 1.0 / (n + 1) + 1e-12


def test_vanishing_mass_gives_empirical():
    pairs = [(0.5, 1), (1.0, 2), (2.0, 3), (2.5, 1)]
    a = nb.prior_measures_from_guess(EXP, EXP, EXP, "SPS", mass=1e-10)
    sub = nb.posterior_subdist(a, pairs, "SPS")
    for t in (0.4, 0.5, 1.7, 3.0):
        assert sub.subdist(1, t) == pytest.approx(nb.empirical_subdist(pairs, 1, t), abs=1e-9)


# --------------------------------------------------------------------------- conditional reliabilities


@pytest.mark.parametrize("name,expr,expected", [
    ("sps4_systems.csv", SPS4, (0.2294, 0.3581, 0.2690, 0.1403)),
    ("pss4_systems.csv", PSS4, (0.2887, 0.2887, 0.2887, 0.1303)),
])
def test_published_conditional_reliabilities(name, expr, expected):
    recs = data.load_system_csv(data.fixture_path(name))
    e = structure.parse(expr)
    for j, want in enumerate(expected, start=1):
        view = structure.canonical_three(e, j)
        a = nb.prior_measures_from_guess(EXP, EXP, EXP, view.kind)
        sub = nb.posterior_subdist(a, [(r.t, view.collapse(r.delta)) for r in recs], view.kind)
        assert sub.rho_hat(view.target_slot) == pytest.approx(want, abs=5e-4)
        assert sum(sub.rho_hat(k) for k in (1, 2, 3)) == pytest.approx(1.0, abs=1e-15)


# --------------------------------------------------------------------------- estimators


ESTIMATORS = [("SPS", nb.estimate_F1_sps, None), ("SPS", nb.estimate_F2_sps, 2), ("SPS", nb.estimate_F2_sps, 3),
              ("PSS", nb.estimate_F1_pss, None), ("PSS", nb.estimate_F2_pss, 2), ("PSS", nb.estimate_F2_pss, 3)]


@pytest.mark.parametrize("kind,fn,slot", ESTIMATORS)
def test_prior_recovery_without_data(kind, fn, slot):
    guesses = (EXP, stats.expon(scale=2.0), stats.gamma(2.0, scale=0.8))
    sub = nb.posterior_subdist(nb.prior_measures_from_guess(*guesses, kind=kind), [], kind)
    est = fn(sub, t_max=3.0) if slot is None else fn(sub, slot, t_max=3.0)
    truth = guesses[0 if slot is None else slot - 1].cdf(est.t)
    assert np.max(np.abs(est.values - truth)) < 2e-3


def test_two_component_prior_recovery():
    est = nb.estimate_two_component([], "series", 2, guesses=(EXP, stats.expon(scale=3.0)), t_max=3.0)
    np.testing.assert_allclose(est.values, stats.expon(scale=3.0).cdf(est.t), atol=2e-3)


SERIES3 = [SystemRecord(1, 0.5, 1), SystemRecord(2, 1.0, 2), SystemRecord(3, 1.5, 1)]


@pytest.mark.parametrize("kind,oracle", [("series", product_limit_series), ("parallel", product_limit_parallel)])
def test_product_limit_limit_three_systems(kind, oracle):
    est = nb.estimate_two_component(SERIES3, kind, 1, mass=1e-9)
    pairs = [(r.t, r.delta) for r in SERIES3]
    for t in (0.0, 0.3, 0.5, 0.7, 1.0, 1.2, 1.49):
        assert est.at(t) == pytest.approx(oracle(pairs, 1, t), abs=1e-6)


def test_series_product_limit_hand_values():
    est = nb.estimate_two_component(SERIES3, "series", 1, mass=1e-9)
    # at risk 3 then 1 for cause 1: 1 - (2/3)(0/1)
    assert est.at(0.49) == pytest.approx(0.0, abs=1e-6)
    assert est.at(0.5) == pytest.approx(1 / 3, abs=1e-6)
    assert est.at(1.5) == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(0.05, 5.0), st.integers(1, 2)), min_size=2, max_size=8,
                unique_by=lambda p: round(p[0], 3)),
       st.sampled_from(["series", "parallel"]))
def test_product_limit_limit_random(pairs, kind):
    pairs = [(round(t, 3), d) for t, d in pairs]
    recs = [SystemRecord(i + 1, t, d) for i, (t, d) in enumerate(pairs)]
    oracle = product_limit_series if kind == "series" else product_limit_parallel
    try:
        est = nb.estimate_two_component(recs, kind, 1, mass=1e-9)
    except nb.SingularityError:
        return  # the limit itself divides by zero for some patterns; no clamping by design
    t_last = max(t for t, _ in pairs)
    for t in sorted({t for t, _ in pairs} | {t_last / 2}):
        if t < t_last:
            assert est.at(t) == pytest.approx(oracle(pairs, 1, t), abs=1e-5)


def test_single_observation_jump():
    est = nb.estimate_two_component([SystemRecord(1, 1.0, 1)], "series", 1, mass=1e-9)
    assert est.at(0.99) == pytest.approx(0.0, abs=1e-6)
    assert est.at(1.0) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("name,expr", [("sps4_systems.csv", SPS4), ("pss4_systems.csv", PSS4)])
def test_component_curves_are_distribution_functions(name, expr):
    recs = data.load_system_csv(data.fixture_path(name))
    for j in (1, 2, 3, 4):
        est = nb.estimate_component(structure.parse(expr), recs, j)
        assert np.all((est.values >= -1e-12) & (est.values <= 1 + 1e-12))
        assert np.all(np.diff(est.values) >= -1e-9)
        assert est.t[-1] == max(r.t for r in recs)


def test_general_series_parallel_target_mapping(sps4_records):
    est = nb.estimate_component(structure.parse(SPS4), sps4_records, 1)
    assert est.meta["x1"] == [3, 4] and est.meta["x2"] == [1] and est.meta["x3"] == [2]
    view, pairs = collapsed_sps4(sps4_records, 1)
    sub = nb.posterior_subdist(nb.prior_measures_from_guess(EXP, EXP, EXP, "SPS"), pairs, "SPS")
    direct = nb.estimate_F2_sps(sub, 2, grid=est.t)
    np.testing.assert_allclose(est.values, direct.values, rtol=0, atol=1e-15)


def test_three_component_parallel_target_is_identity():
    e = structure.parse("max(1,min(2,3))")
    times = simulate.draw_component_times([simulate.parse_dist("exp:1")] * 3, 60, RandomStream(2))
    recs, _ = simulate.observe(e, times)
    est = nb.estimate_component(e, recs, 1)
    sub = nb.posterior_subdist(nb.prior_measures_from_guess(EXP, EXP, EXP, "PSS"),
                               [(r.t, r.delta) for r in recs], "PSS")
    np.testing.assert_allclose(est.values, nb.estimate_F1_pss(sub, grid=est.t).values, atol=1e-15)


def test_bridge_is_unsupported():
    recs = [SystemRecord(1, 1.0, 1), SystemRecord(2, 2.0, 3)]
    with pytest.raises(nb.UnsupportedSystemError):
        nb.estimate_component(structure.bridge(), recs, 1)


def test_grid_beyond_last_time_rejected(sps4_records):
    with pytest.raises(ValueError):
        nb.estimate_component(structure.parse(SPS4), sps4_records, 1, t_max=100.0)


def test_evaluation_grid_contents(sps4_records):
    _, pairs = collapsed_sps4(sps4_records)
    sub = nb.posterior_subdist(nb.prior_measures_from_guess(EXP, EXP, EXP, "SPS"), pairs, "SPS")
    g = nb.evaluation_grid(sub)
    times = np.array([t for t, _ in pairs])
    assert g[0] == 0.0 and g[-1] == times.max()
    assert np.all(np.isin(times, g)) and np.all(np.diff(g) > 0)
    assert np.all(np.isin(np.linspace(0, times.max(), nb.GRID_POINTS), g))


def test_consistency_smoke():
    # equal unit-exponential lifetimes; the target sits in the parallel block of min(1, max(2, 3))
    e = structure.parse("min(1,max(2,3))")
    truth = stats.expon()
    errors = []
    for seed in range(1, 6):
        times = simulate.draw_component_times([simulate.parse_dist("exp:1")] * 3, 2000, RandomStream(seed))
        recs, _ = simulate.observe(e, times)
        est = nb.estimate_component(e, recs, 2)
        keep = est.t <= truth.ppf(0.9)
        errors.append(np.max(np.abs(est.values[keep] - truth.cdf(est.t[keep]))))
    assert np.median(errors) < 0.05
    assert max(errors) < 0.1
