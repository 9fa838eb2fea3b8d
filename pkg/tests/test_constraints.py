"""Mean-value constraint polytopes: feasibility, vertex enumeration,
hull classification, and the conditioning-closure predicate."""

import numpy as np
import pytest

from maxentgames import (
    CombinatorialBlowup,
    Distribution,
    GammaTau,
    SampleSpace,
    Statistic,
    closed_under_conditioning,
    contains,
    feasible,
    hull_interior,
    moment,
    vertices,
)

T3 = Statistic(np.array([[-1.0, 0.0, 1.0]]))
TOL = 1e-9


def test_feasibility_is_hull_membership():
    assert feasible(GammaTau(T3, np.array([0.5])))
    assert not feasible(GammaTau(T3, np.array([1.5])))
    assert feasible(GammaTau(T3, np.array([-1.0])))  # hull endpoint


def test_vertices_tau_zero():
    vs = vertices(GammaTau(T3, np.array([0.0])))
    got = sorted(tuple(np.round(p, 12)) for p in vs.points)
    assert got == [(0.0, 1.0, 0.0), (0.5, 0.0, 0.5)]


def test_vertices_satisfy_constraints_and_support_bound():
    rng = np.random.default_rng(5)
    for _ in range(50):
        tau = rng.uniform(-1.0, 1.0)
        g = GammaTau(T3, np.array([tau]))
        vs = vertices(g)
        assert vs.m >= 1
        for p in vs.points:
            assert p.min() >= -1e-12
            assert abs(p.sum() - 1.0) <= TOL
            assert abs(T3.matrix @ p - tau) <= TOL
            assert np.count_nonzero(p > 1e-12) <= g.k + 1


def test_vertices_deduplicated():
    vs = vertices(GammaTau(T3, np.array([1.0])))  # single point (0,0,1)
    assert vs.m == 1
    np.testing.assert_allclose(vs.points[0], [0.0, 0.0, 1.0], atol=TOL)


def test_vertices_infeasible_raises():
    from maxentgames import Infeasible
    with pytest.raises(Infeasible):
        vertices(GammaTau(T3, np.array([2.0])))


def test_two_dimensional_statistic_vertices():
    t = Statistic(np.array([[-1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, -1.0]]))
    g = GammaTau(t, np.array([0.25, 0.1]))
    vs = vertices(g)
    for p in vs.points:
        np.testing.assert_allclose(t.matrix @ p, [0.25, 0.1], atol=TOL)
        assert np.count_nonzero(p > 1e-12) <= 3
    # the polytope here is a segment: exactly two vertices
    assert vs.m == 2


def test_every_member_is_vertex_mixture():
    g = GammaTau(T3, np.array([0.3]))
    vs = vertices(g)
    rng = np.random.default_rng(6)
    for _ in range(100):
        lam = rng.dirichlet(np.ones(vs.m))
        p = Distribution(lam @ vs.points)
        assert contains(g, p)
        assert abs(moment(p, T3)[0] - 0.3) <= TOL


def test_contains_rejects_off_constraint_points():
    g = GammaTau(T3, np.array([0.3]))
    assert not contains(g, Distribution.uniform(3))


def test_hull_interior_classification():
    assert hull_interior(T3, np.array([0.0])) == "interior"
    assert hull_interior(T3, np.array([1.0])) == "boundary"
    assert hull_interior(T3, np.array([-1.0])) == "boundary"
    assert hull_interior(T3, np.array([1.2])) == "outside"
    t2 = Statistic(np.array([[-1.0, 0.0, 1.0], [1.0, 0.0, 1.0]]))
    assert hull_interior(t2, np.array([0.0, 0.5])) == "interior"
    assert hull_interior(t2, np.array([0.0, 1.0])) == "boundary"
    assert hull_interior(t2, np.array([0.0, -0.5])) == "outside"


def test_closed_under_conditioning_cases():
    # a face game {p : E T = tau} where every supported outcome hits tau
    face = Statistic(np.array([[0.0, 1.0, 0.0]]))
    assert closed_under_conditioning(GammaTau(face, np.array([0.0])))
    # plain mean constraints are not closed under conditioning
    assert not closed_under_conditioning(GammaTau(T3, np.array([0.5])))
    # trivial constant statistic: the constraint set is the whole simplex
    const = Statistic(np.array([[1.0, 1.0, 1.0]]))
    assert closed_under_conditioning(GammaTau(const, np.array([1.0])))


def test_enumeration_cap_guard():
    space = 25
    t = Statistic(np.ones((1, space)))
    with pytest.raises(CombinatorialBlowup):
        vertices(GammaTau(t, np.array([1.0])), max_n=20)
    # explicit cap raise lets it through
    vs = vertices(GammaTau(t, np.array([1.0])), max_n=30)
    assert vs.m == space


def test_env_cap_override(monkeypatch):
    t = Statistic(np.ones((1, 22)))
    g = GammaTau(t, np.array([1.0]))
    monkeypatch.setenv("MAXENT_MAX_N", "22")
    assert vertices(g).m == 22
    monkeypatch.setenv("MAXENT_MAX_N", "10")
    with pytest.raises(CombinatorialBlowup):
        vertices(g)
