"""Discrepancy, divergence, mixture identities, neutral acts, relative games,
and the equalizer / Pythagorean verifiers."""

import numpy as np
import pytest

from maxentgames import (
    Act,
    ACT_DENSITY,
    ACT_DISTRIBUTION,
    BaseMeasure,
    Distribution,
    GammaTau,
    InfiniteReferenceLoss,
    SampleSpace,
    Statistic,
    brier_model,
    discrepancy,
    div,
    equalizer_check,
    find_neutral,
    log_model,
    mixture_identities,
    pythagorean_check,
    quadratic_model,
    relative_model,
    vertices,
    zero_one_model,
)
from maxentgames.maxent import solve

SPACE3 = SampleSpace.of(["a", "b", "c"])
T3 = Statistic(np.array([[-1.0, 0.0, 1.0]]))
TOL = 1e-9


def _dist(*w):
    return Distribution(np.array(w, dtype=float))


def test_discrepancy_zero_at_bayes_act():
    m = brier_model(SPACE3)
    u = Distribution.uniform(3)
    assert abs(discrepancy(m, u, m.bayes_act(u))) <= TOL


def test_discrepancy_brier_is_squared_distance():
    m = brier_model(SPACE3)
    u = Distribution.uniform(3)
    point = Act(ACT_DISTRIBUTION, [1.0, 0.0, 0.0])
    assert abs(discrepancy(m, u, point) - 2.0 / 3.0) <= TOL


def test_discrepancy_zero_one_bayes_act_example():
    m = zero_one_model(SPACE3)
    p = _dist(1 / 6, 5 / 12, 5 / 12)
    zeta = Act(ACT_DISTRIBUTION, [0.0, 1 / 3, 2 / 3])
    assert abs(discrepancy(m, p, zeta)) <= TOL  # L = H = 7/12 here


def test_div_log_is_kullback_leibler():
    m = log_model(SPACE3, BaseMeasure.counting(3))
    p = _dist(0.9, 0.1, 0.0)
    q = _dist(0.5, 0.5, 0.0)
    expected = 0.9 * np.log(1.8) + 0.1 * np.log(0.2)
    assert abs(div(m, p, q) - expected) <= TOL
    assert abs(div(m, p, p)) <= TOL


def test_div_brier_disjoint_point_masses():
    m = brier_model(SPACE3)
    assert abs(div(m, _dist(1, 0, 0), _dist(0, 1, 0)) - 2.0) <= TOL


def test_div_infinite_when_support_escapes():
    m = log_model(SPACE3, BaseMeasure.counting(3))
    assert div(m, _dist(0.5, 0.5, 0.0), _dist(1.0, 0.0, 0.0)) == np.inf


def test_discrepancy_nonnegative_random(seed=21):
    rng = np.random.default_rng(seed)
    models = (brier_model(SPACE3), log_model(SPACE3, BaseMeasure.counting(3)),
              zero_one_model(SPACE3))
    for _ in range(300):
        p = Distribution(rng.dirichlet(np.ones(3)))
        for m in models:
            act = m.random_act(rng)
            assert discrepancy(m, p, act) >= -TOL
            assert discrepancy(m, p, m.bayes_act(p)) <= TOL


def test_act_difference_is_linear_in_p():
    # for fixed acts a, a': P -> D(P,a) - D(P,a') is linear (entropies cancel)
    m = brier_model(SPACE3)
    rng = np.random.default_rng(22)
    a = m.random_act(rng)
    b = m.random_act(rng)
    for _ in range(100):
        p0 = Distribution(rng.dirichlet(np.ones(3)))
        p1 = Distribution(rng.dirichlet(np.ones(3)))
        lam = rng.uniform()
        mix = Distribution((1 - lam) * p0.w + lam * p1.w)
        lhs = discrepancy(m, mix, a) - discrepancy(m, mix, b)
        rhs = (1 - lam) * (discrepancy(m, p0, a) - discrepancy(m, p0, b)) \
            + lam * (discrepancy(m, p1, a) - discrepancy(m, p1, b))
        assert abs(lhs - rhs) <= TOL


def test_discrepancy_convex_in_p():
    m = log_model(SPACE3, BaseMeasure.counting(3))
    rng = np.random.default_rng(23)
    act = Act(ACT_DENSITY, rng.dirichlet(np.ones(3)))
    for _ in range(100):
        p0 = Distribution(rng.dirichlet(np.ones(3)))
        p1 = Distribution(rng.dirichlet(np.ones(3)))
        lam = rng.uniform()
        mix = Distribution((1 - lam) * p0.w + lam * p1.w)
        bound = (1 - lam) * discrepancy(m, p0, act) + lam * discrepancy(m, p1, act)
        assert discrepancy(m, mix, act) <= bound + TOL


# ---------------------------------------------------------------------------
# mixture identities


def test_mixture_identity_brier_half_half_oracle():
    m = brier_model(SPACE3)
    parts = [_dist(1, 0, 0), _dist(0, 0, 1)]
    rep = mixture_identities(m, parts, [0.5, 0.5], Distribution.uniform(3))
    assert abs(rep.entropy_lhs - 0.5) <= TOL
    assert rep.entropy_residual <= TOL and rep.div_residual <= TOL


def test_mixture_identity_degenerate_single_part():
    m = log_model(SPACE3, BaseMeasure.counting(3))
    rep = mixture_identities(m, [_dist(0.2, 0.3, 0.5)], [1.0], Distribution.uniform(3))
    assert rep.entropy_residual <= TOL and rep.div_residual <= TOL


def test_mixture_identities_random_sweep():
    rng = np.random.default_rng(31)
    models = (brier_model(SPACE3), log_model(SPACE3, BaseMeasure.counting(3)))
    for m in models:
        for _ in range(250):
            parts = [Distribution(rng.dirichlet(np.ones(3))) for _ in range(3)]
            w = rng.dirichlet(np.ones(3))
            q = Distribution(rng.dirichlet(np.ones(3)))
            rep = mixture_identities(m, parts, w, q)
            assert rep.entropy_residual <= TOL
            assert rep.div_residual <= TOL


# ---------------------------------------------------------------------------
# neutral acts


def test_neutral_acts_for_bundled_models():
    zo = find_neutral(zero_one_model(SPACE3))
    np.testing.assert_allclose(zo.as_array(), [1 / 3] * 3, atol=TOL)
    lv = zero_one_model(SPACE3).loss_vector(zo)
    np.testing.assert_allclose(lv, 2 / 3, atol=TOL)

    m = log_model(SPACE3, BaseMeasure.uniform_probability(3))
    neutral = find_neutral(m)
    np.testing.assert_allclose(m.loss_vector(neutral), 0.0, atol=TOL)

    assert find_neutral(quadratic_model(SPACE3, values=[-1.0, 0.0, 1.0])) is None


# ---------------------------------------------------------------------------
# relative models


def test_relative_model_entropy_is_negative_discrepancy():
    m = brier_model(SPACE3)
    ref = Act(ACT_DISTRIBUTION, [1 / 3, 1 / 3, 1 / 3])
    rel = relative_model(m, ref)
    rng = np.random.default_rng(41)
    for _ in range(200):
        p = Distribution(rng.dirichlet(np.ones(3)))
        # with a uniform Brier reference: H0(P) = -||p - u||^2
        assert abs(rel.entropy(p) + np.sum((p.w - 1 / 3) ** 2)) <= TOL
        assert rel.entropy(p) <= TOL
        # Bayes acts are shared with the base game
        bayes = rel.bayes_act(p)
        assert abs(rel.expected_loss(p, bayes) - rel.entropy(p)) <= TOL


def test_relative_model_with_own_bayes_reference_has_zero_entropy():
    m = brier_model(SPACE3)
    p = _dist(0.2, 0.5, 0.3)
    rel = relative_model(m, m.bayes_act(p))
    assert abs(rel.entropy(p)) <= TOL


def test_relative_log_probability_base_is_negative_kl():
    m = log_model(SPACE3, BaseMeasure.uniform_probability(3))
    rel = relative_model(m, Act(ACT_DENSITY, [1.0, 1.0, 1.0]))
    p = _dist(0.6, 0.3, 0.1)
    kl = float(np.sum(p.w * np.log(p.w / (1 / 3))))
    assert abs(rel.entropy(p) + kl) <= TOL


def test_relative_model_rejects_infinite_reference():
    m = log_model(SPACE3, BaseMeasure.counting(3))
    with pytest.raises(InfiniteReferenceLoss):
        relative_model(m, m.bayes_act(_dist(1.0, 0.0, 0.0)))


# ---------------------------------------------------------------------------
# equalizer / Pythagorean verifiers


def test_equalizer_brier_interior_act():
    m = brier_model(SPACE3)
    g = GammaTau(T3, np.array([0.5]))
    sp = solve(m, g)
    rep = equalizer_check(m, vertices(g).distributions(), sp.zeta_star)
    assert rep.is_equalizer and rep.spread <= 1e-8
    np.testing.assert_allclose(rep.values, 13 / 24, atol=TOL)


def test_equalizer_zero_one_table_act():
    m = zero_one_model(SPACE3)
    g = GammaTau(T3, np.array([0.25]))
    zeta = Act(ACT_DISTRIBUTION, [0.0, 1 / 3, 2 / 3])
    rep = equalizer_check(m, vertices(g).distributions(), zeta)
    assert rep.is_equalizer
    np.testing.assert_allclose(rep.values, 7 / 12, atol=TOL)


def test_equalizer_fails_outside_linearity_region():
    m = brier_model(SPACE3)
    g = GammaTau(T3, np.array([0.9]))
    sp = solve(m, g)
    rep = equalizer_check(m, vertices(g).distributions(), sp.zeta_star)
    assert not rep.is_equalizer and rep.spread > 1e-6


def test_pythagorean_equality_inside_brier_linearity_region():
    m = brier_model(SPACE3)
    ref = find_neutral(m)
    g = GammaTau(T3, np.array([0.25]))
    sp = solve(m, g)
    rep = pythagorean_check(m, vertices(g).distributions(), sp.p_star, sp.zeta_star, ref)
    assert rep.equality and abs(rep.min_slack) <= 1e-8 and abs(rep.max_slack) <= 1e-8


def test_pythagorean_strict_slack_outside_region():
    m = brier_model(SPACE3)
    ref = find_neutral(m)
    g = GammaTau(T3, np.array([0.75]))
    sp = solve(m, g)
    rep = pythagorean_check(m, vertices(g).distributions(), sp.p_star, sp.zeta_star, ref)
    assert rep.min_slack >= -1e-8
    assert rep.max_slack >= 1e-3
    assert not rep.equality


def test_pythagorean_slack_at_p_star_is_zero():
    m = brier_model(SPACE3)
    ref = find_neutral(m)
    g = GammaTau(T3, np.array([0.4]))
    sp = solve(m, g)
    rep = pythagorean_check(m, [sp.p_star], sp.p_star, sp.zeta_star, ref)
    assert abs(rep.slacks[0]) <= 1e-8


def test_pythagorean_equality_iff_equalizer_along_grid():
    # bidirectional link between equality of the three-point identity and
    # the equalizer property of the solved act, vertex-tested
    models = (brier_model(SPACE3), zero_one_model(SPACE3),
              log_model(SPACE3, BaseMeasure.counting(3)))
    for m in models:
        ref = find_neutral(m)
        for tau in np.linspace(-0.9, 0.9, 19):
            g = GammaTau(T3, np.array([tau]))
            sp = solve(m, g)
            pts = vertices(g).distributions()
            eq = equalizer_check(m, pts, sp.zeta_star)
            py = pythagorean_check(m, pts, sp.p_star, sp.zeta_star, ref)
            assert py.equality == eq.is_equalizer, (m.kind, tau)
