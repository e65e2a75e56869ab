import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bamdp.errors import IncompletePolicy, ValidationError
from bamdp.mdp import Mdp, evaluate_mdp_policy, mdp_value_iteration
from oracles import mdp_expectimax


def two_state_chain(H=3):
    # a0 moves s0 -> s1 (reward 0), s1 self-loops with reward 1; a1 self-loops, reward 0
    R = np.array([[0.0, 0.0], [1.0, 0.0]])
    T = np.zeros((2, 2, 2))
    T[0, 0, 1] = 1.0
    T[0, 1, 0] = 1.0
    T[1, :, 1] = 1.0
    return Mdp(R, T, [1.0, 0.0], H)


def random_mdp(seed, S, A, H):
    rng = np.random.default_rng(seed)
    return Mdp(rng.uniform(size=(S, A)), rng.dirichlet(np.ones(S), size=(S, A)), np.full(S, 1 / S), H)


def test_single_state_telescopes():
    t = mdp_value_iteration(Mdp([[1.0]], [[[1.0]]], [1.0], 3))
    assert t.v[0, 0] == 3.0
    assert t.value(2, 0) == 2.0
    assert t.backup_count == 3


def test_two_state_chain_hand_values():
    mdp = two_state_chain()
    t = mdp_value_iteration(mdp)
    assert t.v[0, 0] == pytest.approx(2.0)
    assert np.all(t.v[-1] == 0)
    always_a1 = [[1, 1]] * 3
    assert evaluate_mdp_policy(mdp, always_a1).v[0, 0] == 0.0


def test_zero_rewards_and_zero_horizon():
    mdp = random_mdp(0, 3, 2, 4)
    zero = Mdp(np.zeros((3, 2)), mdp.transition, mdp.initial_dist, 4)
    assert np.all(mdp_value_iteration(zero).v == 0)
    t0 = mdp_value_iteration(Mdp(mdp.reward, mdp.transition, mdp.initial_dist, 0))
    assert t0.v.shape == (1, 3) and t0.backup_count == 0


def test_validation_errors():
    with pytest.raises(ValidationError, match="row-stochasticity"):
        Mdp([[0.5]], [[[0.9]]], [1.0], 2)
    with pytest.raises(ValidationError, match="reward-range"):
        Mdp([[1.5]], [[[1.0]]], [1.0], 2)
    with pytest.raises(ValidationError):
        Mdp([[0.5]], [[[1.0]]], [0.7], 2)


def test_incomplete_policy():
    mdp = two_state_chain()
    with pytest.raises(IncompletePolicy):
        evaluate_mdp_policy(mdp, [[0, None], [0, 0], [0, 0]])
    with pytest.raises(IncompletePolicy):
        evaluate_mdp_policy(mdp, [[0, 0]])


def test_ties_go_to_lowest_action():
    mdp = Mdp([[0.5, 0.5]], [[[1.0], [1.0]]], [1.0], 2)
    assert np.all(mdp_value_iteration(mdp).greedy_policy == 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 2), st.integers(1, 5))
def test_matches_expectimax(seed, S, A, H):
    mdp = random_mdp(seed, S, A, H)
    t = mdp_value_iteration(mdp)
    for s in range(S):
        assert abs(t.v[0, s] - mdp_expectimax(mdp.reward, mdp.transition, 1, s, H)) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 3), st.integers(1, 6))
def test_table_invariants(seed, S, A, H):
    t = mdp_value_iteration(random_mdp(seed, S, A, H))
    for h in range(1, H + 1):
        assert np.all(t.v[h - 1] >= 0) and np.all(t.v[h - 1] <= H - h + 1 + 1e-12)
        assert np.allclose(t.v[h - 1], t.q[h - 1].max(axis=1))
        assert np.allclose(t.q[h - 1][np.arange(S), t.greedy_policy[h - 1]], t.v[h - 1])
    assert t.backup_count == S * A * H


def test_random_policies_are_dominated():
    rng = np.random.default_rng(7)
    for i in range(100):
        mdp = random_mdp(i, 3, 2, 4)
        opt = mdp_value_iteration(mdp)
        pol = rng.integers(2, size=(4, 3))
        ev = evaluate_mdp_policy(mdp, pol)
        assert np.all(ev.v <= opt.v + 1e-9)
    assert np.allclose(evaluate_mdp_policy(mdp, opt.greedy_policy).v, opt.v, atol=1e-9)
