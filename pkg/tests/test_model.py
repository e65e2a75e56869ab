import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bamdp.beliefs import BeliefIndex, EpistemicState, Hyperstate
from bamdp.envs import make_bernoulli_chain, make_random_bamdp
from bamdp.errors import ImpossibleObservation, SpaceExplosion, ValidationError
from bamdp.model import (
    BamdpModel,
    MdpEnsemble,
    bamdp_transition,
    build_quantized_space,
    enumerate_reachable_hyperstates,
    posterior_update,
    snap_to_grid,
)
from oracles import history_beliefs, lattice_brute

beliefs2 = st.lists(st.floats(0.01, 1.0), min_size=2, max_size=4).map(lambda x: np.array(x) / sum(x))


def test_epistemic_state_normalizes_and_compares():
    p = EpistemicState([2.0, 2.0])
    assert p == [0.5, 0.5]
    assert p == EpistemicState([0.5 + 1e-10, 0.5 - 1e-10])
    assert not p == [0.6, 0.4]
    with pytest.raises(TypeError):
        hash(p)
    with pytest.raises(ValidationError):
        EpistemicState([0.0, 0.0])
    with pytest.raises(ValidationError):
        EpistemicState([-0.5, 1.5])
    assert EpistemicState.dirac(1, 3).is_dirac()


def test_ensemble_rejects_bad_rows():
    T = np.ones((1, 1, 1, 1)) * 0.9
    with pytest.raises(ValidationError, match="row-stochasticity"):
        MdpEnsemble([[0.0]], T, [1.0], 2)
    with pytest.raises(ValidationError):
        BamdpModel(MdpEnsemble([[0.0]], np.ones((2, 1, 1, 1)), [1.0], 2), prior=[1.0, 0.0, 0.0])


def test_posterior_examples(chain):
    e = chain.ensemble
    p = posterior_update(e, [0.5, 0.5], 0, 0, 1)
    assert np.allclose(p.probs, [0.8, 0.2])
    assert posterior_update(e, [1.0, 0.0], 0, 0, 1) == [1.0, 0.0]
    sep = MdpEnsemble([[0.0], [0.0]], [[[[0, 1]], [[0, 1]]], [[[1, 0]], [[0, 1]]]], [1, 0], 2)
    assert posterior_update(sep, [0.5, 0.5], 0, 0, 1) == [1.0, 0.0]
    with pytest.raises(ImpossibleObservation):
        posterior_update(sep, [0.0, 1.0], 0, 0, 1)


def test_chain_transition_example(chain):
    succ = bamdp_transition(chain, Hyperstate(0, EpistemicState([0.5, 0.5])), 0)
    got = {x.state: (x.belief.probs, p) for x, p in succ}
    assert set(got) == {0, 1}
    assert np.allclose(got[1][0], [0.8, 0.2]) and got[1][1] == pytest.approx(0.5)
    assert np.allclose(got[0][0], [0.2, 0.8]) and got[0][1] == pytest.approx(0.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 500), st.integers(0, 2), st.integers(0, 1))
def test_transition_rows_normalized_and_dirac_absorbing(seed, s, a):
    m = make_random_bamdp(seed, 3, 2, 3, 3)
    for prior in ([0.2, 0.3, 0.5], [0.0, 1.0, 0.0]):
        succ = bamdp_transition(m, Hyperstate(s, EpistemicState(prior)), a)
        assert abs(sum(p for _, p in succ) - 1.0) <= 1e-9
        assert len({x.state for x, _ in succ}) == len(succ)
        if prior[1] == 1.0:
            assert all(np.array_equal(x.belief.probs, [0.0, 1.0, 0.0]) for x, _ in succ)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 500), beliefs2.filter(lambda p: len(p) == 3))
def test_two_step_update_equals_batch_bayes(seed, p):
    e = make_random_bamdp(seed, 3, 2, 3, 3).ensemble
    T = e.hypotheses
    p1 = posterior_update(e, p, 0, 1, 2)
    p2 = posterior_update(e, p1, 2, 0, 1)
    joint = p * T[:, 0, 1, 2] * T[:, 2, 0, 1]
    assert np.allclose(p2.probs, joint / joint.sum(), atol=1e-9)


def test_reachable_layers_match_history_enumeration(chain):
    space = chain.reachable
    e = chain.ensemble
    for h in (1, 2, 3):
        layer = space.layer(h)
        got = {(int(s), tuple(np.round(b, 9))) for s, b in zip(layer.states, layer.beliefs)}
        assert got == history_beliefs(e.hypotheses, [0.5, 0.5], [0], h)
    top = {round(b.max(), 6) for b in space.layer(3).beliefs}
    assert top == {0.5, round(16 / 17, 6)}


def test_reachable_small_cases():
    m = make_random_bamdp(3, 3, 2, 2, 4, prior=[1.0, 0.0])
    sizes = m.reachable.layer_sizes()
    assert all(n <= 3 for n in sizes)
    assert all(np.array_equal(b, [1, 0]) for h in range(1, 5) for b in m.reachable.layer(h).beliefs)
    m1 = make_random_bamdp(3, 3, 2, 2, 1)
    assert m1.reachable.layer_sizes() == [3]


def test_every_layer_element_has_a_parent():
    m = make_random_bamdp(11, 3, 2, 2, 4)
    space = m.reachable
    for h in range(2, 5):
        layer = space.layer(h)
        for j, (parent, a) in enumerate(layer.parents):
            assert any(col == j and p > 0 for col, p in space.successors(h - 1, int(parent), int(a)))


def test_space_explosion_names_layer():
    m = make_random_bamdp(0, 3, 2, 3, 6, max_hyperstates=50)
    with pytest.raises(SpaceExplosion, match="layer"):
        m.reachable.layer_sizes()


def test_env_cap(monkeypatch):
    monkeypatch.setenv("BAMDP_MAX_HYPERSTATES", "10")
    with pytest.raises(SpaceExplosion):
        enumerate_reachable_hyperstates(make_random_bamdp(0, 3, 2, 3, 5)).layer_sizes()


@pytest.mark.parametrize("K,m,n", [(2, 2, 3), (3, 1, 3), (3, 4, 15), (4, 3, 20)])
def test_grid_sizes(K, m, n):
    e = make_random_bamdp(0, 2, 2, K, 3).ensemble
    g = build_quantized_space(e, m)
    assert len(g.grid) == n
    assert np.array_equal(g.grid, lattice_brute(K, m))
    for k in range(K):
        assert any(np.array_equal(row, np.eye(K)[k]) for row in g.grid)
    assert g.size == n * 2


def test_grid_cap_and_resolution():
    e = make_random_bamdp(0, 3, 2, 3, 3).ensemble
    with pytest.raises(SpaceExplosion):
        build_quantized_space(e, 50, max_hyperstates=100)
    with pytest.raises(ValidationError):
        build_quantized_space(e, 0)


def test_snap_examples():
    e = make_random_bamdp(0, 2, 2, 2, 3).ensemble
    g = build_quantized_space(e, 2)
    assert snap_to_grid([0.9, 0.1], g) == [1.0, 0.0]
    assert snap_to_grid([0.75, 0.25], g) == [0.5, 0.5]
    assert snap_to_grid([0.5, 0.5], g) == [0.5, 0.5]
    assert snap_to_grid([0.0, 1.0], g) == [0.0, 1.0]


def test_belief_index_tolerance():
    idx = BeliefIndex()
    assert idx.add(0, np.array([0.3, 0.7]))[1]
    assert not idx.add(0, np.array([0.3 + 5e-10, 0.7 - 5e-10]))[1]
    assert idx.add(1, np.array([0.3, 0.7]))[1]
    assert idx.add(0, np.array([0.3 + 1e-6, 0.7 - 1e-6]))[1]
    assert idx.find(0, np.array([0.3, 0.7])) == 0


def test_digest_reproducible():
    assert make_random_bamdp(5, 3, 2, 2, 3).digest() == make_random_bamdp(5, 3, 2, 2, 3).digest()
    assert make_random_bamdp(5, 3, 2, 2, 3).digest() != make_random_bamdp(6, 3, 2, 2, 3).digest()
