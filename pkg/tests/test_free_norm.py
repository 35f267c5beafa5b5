import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipfree.errors import DegenerateInputError, StructuralInputError
from lipfree.free_norm import (
    TAU_DUAL,
    FreeVector,
    evaluate,
    free_norm,
    mass_balance,
    pair_molecule,
)
from lipfree.lipschitz import LipFunction, lip_constant
from lipfree.random_spaces import (
    FIXTURES,
    dendrogram_distances,
    random_function,
    random_merges,
    random_plane_metric,
)
from lipfree.metric_core import PointedMetricSpace
from oracles import transport_lp_value, tree_transport_value

seeds = st.integers(0, 2**32 - 1)


def test_free_vector_sparse(u4):
    mu = FreeVector(u4, {1: 1.0, 2: 0.0, 3: 2.0})
    assert mu.support() == (1, 3)
    assert (mu - mu).masses == {}
    assert not FreeVector(u4)
    with pytest.raises(StructuralInputError):
        FreeVector(u4, {7: 1.0})
    with pytest.raises(StructuralInputError):
        mu + FreeVector(FIXTURES["L3"](), {1: 1.0})


def test_mass_balance_examples(u4, l3):
    assert mass_balance(FreeVector.delta(u4, 1)).masses == {0: -1.0, 1: 1.0}
    mol = FreeVector(u4, {1: 1.0, 2: -1.0})
    assert mass_balance(mol) == mol
    assert mass_balance(FreeVector(l3, {1: 2.0, 2: 1.0})).masses == {0: -3.0, 1: 2.0, 2: 1.0}


def test_free_norm_examples(l3):
    mu = FreeVector(l3, {1: 1.0, 2: 1.0})
    cert = free_norm(mu)
    assert cert.value == 4.0
    assert sorted(cert.plan) == [(1, 0, 1.0), (2, 0, 1.0)]
    assert list(cert.potential.values) == [0.0, 1.0, 3.0]
    assert cert.gap == 0.0
    assert free_norm(FreeVector(l3)).value == 0.0


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_isometry_on_fixtures(name):
    sp = FIXTURES[name]()
    for x in range(sp.n):
        assert free_norm(FreeVector.delta(sp, x)).value == pytest.approx(sp.d(x, 0), abs=1e-12)
        for y in range(sp.n):
            mu = FreeVector.delta(sp, x) - FreeVector.delta(sp, y)
            assert free_norm(mu).value == pytest.approx(sp.d(x, y), abs=1e-12)


def test_molecule(u4, l3):
    assert free_norm(pair_molecule(u4, 1, 2)).value == pytest.approx(1.0)
    m = pair_molecule(l3, 0, 2)
    assert m.masses == {0: 1 / 3, 2: -1 / 3}
    assert free_norm(m).value == pytest.approx(1.0, abs=1e-12)
    assert free_norm(-2.5 * m).value == pytest.approx(2.5, abs=1e-12)
    with pytest.raises(DegenerateInputError):
        pair_molecule(u4, 1, 1)


def test_evaluate(l3):
    f = LipFunction(l3, [0, 1, 3])
    assert evaluate(f, FreeVector.delta(l3, 2)) == 3.0
    assert evaluate(LipFunction.zero(l3), FreeVector(l3, {1: 5.0})) == 0.0
    assert evaluate(f, pair_molecule(l3, 2, 1)) == pytest.approx(1.0)
    with pytest.raises(StructuralInputError):
        evaluate(f, FreeVector.delta(FIXTURES["U4"](), 1))


def _check_certificate(mu, cert):
    assert cert.gap <= TAU_DUAL
    assert cert.potential(0) == 0.0
    assert lip_constant(cert.potential)[0] <= 1 + 1e-9
    assert evaluate(cert.potential, mass_balance(mu)) == pytest.approx(cert.value, abs=1e-8)
    # plan is feasible: outflow - inflow = balanced mass at every point
    net = np.zeros(mu.space.n)
    for s, t, m in cert.plan:
        assert m > 0
        net[s] += m
        net[t] -= m
    assert np.allclose(net, mass_balance(mu).dense(), atol=1e-9)
    cost = sum(m * mu.space.d(s, t) for s, t, m in cert.plan)
    assert cost == pytest.approx(cert.value, abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(seeds, st.integers(1, 10))
def test_matches_lp_and_certificate(seed, n):
    rng = np.random.default_rng(seed)
    sp = random_plane_metric(rng, n)
    mu = FreeVector.from_dense(sp, rng.normal(size=n) * (rng.random(size=n) < 0.7))
    cert = free_norm(mu)
    _check_certificate(mu, cert)
    assert cert.value == pytest.approx(transport_lp_value(sp.dist, mu.dense()), abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 14))
def test_matches_tree_formula_on_ultrametrics(seed, n):
    rng = np.random.default_rng(seed)
    merges = random_merges(rng, n)
    sp = PointedMetricSpace(dendrogram_distances(n, merges))
    masses = rng.integers(-3, 4, size=n).astype(float)
    value = free_norm(FreeVector.from_dense(sp, masses)).value
    assert value == pytest.approx(tree_transport_value(n, merges, masses), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(2, 9))
def test_norm_axioms(seed, n):
    rng = np.random.default_rng(seed)
    sp = random_plane_metric(rng, n)
    mu = FreeVector.from_dense(sp, rng.normal(size=n))
    nu = FreeVector.from_dense(sp, rng.normal(size=n))
    c = float(rng.normal())
    a, b = free_norm(mu).value, free_norm(nu).value
    assert free_norm(c * mu).value == pytest.approx(abs(c) * a, abs=1e-9)
    assert free_norm(mu + nu).value <= a + b + 1e-9
    # base-point mass is invisible
    assert free_norm(mu + FreeVector.delta(sp, 0) * 3.0).value == pytest.approx(a, abs=1e-9)
    f = random_function(rng, sp)
    assert abs(evaluate(f, mu)) <= lip_constant(f)[0] * a + 1e-9


def test_degenerate_ties_terminate():
    # many equal distances create zero-cost cycles in the residual graph
    n = 9
    d = np.ones((n, n)) - np.eye(n)
    sp = PointedMetricSpace(d)
    masses = np.array([0, 1, -1, 1, -1, 1, -1, 2, -2], dtype=float)
    cert = free_norm(FreeVector.from_dense(sp, masses))
    assert cert.value == pytest.approx(5.0)
    _check_certificate(FreeVector.from_dense(sp, masses), cert)
