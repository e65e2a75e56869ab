import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bamdp.abstraction import EpistemicAbstraction, build_greedy_cover, build_lattice_cover, induce_abstract_bamdp
from bamdp.beliefs import EpistemicState
from bamdp.envs import make_bernoulli_chain, make_random_bamdp, make_separating_bamdp, make_two_chain
from bamdp.info_horizon import (
    abstract_information_horizon,
    entropy,
    information_horizon,
    policy_information_horizon,
    resolved,
)
from bamdp.planning import BamdpPolicy
from oracles import all_layer_policies, history_beliefs


def test_entropy_values():
    assert entropy(EpistemicState.dirac(2, 4)) == 0.0
    assert entropy(np.full(4, 0.25)) == pytest.approx(math.log(4))
    assert entropy([0.8, 0.2]) == pytest.approx(0.500402, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6).filter(lambda x: sum(x) > 1e-3))
def test_entropy_range(xs):
    p = np.array(xs) / sum(xs)
    assert -1e-12 <= entropy(p) <= math.log(len(p)) + 1e-12


def test_resolved_tolerance_and_gamma():
    assert resolved(np.array([[1 - 1e-13, 1e-13]]))[0]
    assert not resolved(np.array([[0.99, 0.01]]))[0]
    assert resolved(np.array([[0.99, 0.01]]), gamma=0.1)[0]


def test_chain_examples():
    assert information_horizon(make_bernoulli_chain(0.8, 3)) == math.inf
    assert information_horizon(make_bernoulli_chain(1.0, 3)) == 2
    ih = information_horizon(make_bernoulli_chain(0.8, 3))
    assert ih.witness["timestep"] == 3 and ih.witness["entropy"] > 0
    assert len(ih.witness["trace"]) == 2


def test_chain_no_two_step_history_is_dirac():
    m = make_bernoulli_chain(0.8, 3)
    beliefs = history_beliefs(m.ensemble.hypotheses, [0.5, 0.5], [0], 3)
    assert all(max(b) < 1 for _, b in beliefs)


def test_dirac_prior_gives_one():
    m = make_random_bamdp(0, 3, 2, 3, 3, prior=[0, 1, 0])
    assert information_horizon(m) == 1
    assert policy_information_horizon(m, BamdpPolicy.constant(0)) == 1


def test_separating_gives_two_for_every_policy():
    m = make_separating_bamdp(0, 3, 2, 2, 4)
    assert information_horizon(m) == 2
    for a in (0, 1):
        assert policy_information_horizon(m, BamdpPolicy.constant(a)) == 2


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_two_chain_horizon(N):
    ih = information_horizon(make_two_chain(N))
    assert ih.value in (N, N + 1)
    assert ih.value == N + 1
    if N > 1:
        w = ih.witness
        assert w["timestep"] == N and w["entropy"] > 0


def test_witness_trace_replays():
    m = make_bernoulli_chain(0.8, 3)
    ih = information_horizon(m)
    steps = ih.witness["trace"]
    assert steps[0]["state"] == 0
    for a, b in zip(steps, steps[1:]):
        assert a["next_state"] == b["state"]
    T = m.ensemble.hypotheses
    w = np.array([0.5, 0.5])
    for st_ in steps:
        w = w * T[:, st_["state"], st_["action"], st_["next_state"]]
    assert np.allclose(w / w.sum(), ih.witness["belief"])


def small_instances():
    out = []
    for seed in range(60):
        m = make_random_bamdp(seed, 2, 2, 2, 3, determinism=1.0 if seed % 3 else 0.7)
        if max(m.reachable.layer_sizes()) <= 4:
            out.append(m)
    out.append(make_separating_bamdp(0, 2, 2, 2, 3))
    return out


def test_supremum_equals_policy_enumeration():
    checked = 0
    for m in small_instances():
        space = m.reachable
        best = 0
        for acts in all_layer_policies(space):
            pol = BamdpPolicy(space=space, actions=acts)
            v = policy_information_horizon(m, pol).value
            assert v <= information_horizon(m).value
            best = max(best, v)
        assert best == information_horizon(m).value
        checked += 1
    assert checked >= 5


def test_zero_entropy_absorbs():
    for m in [make_separating_bamdp(2, 3, 2, 2, 5), make_two_chain(3, horizon=6)]:
        ih = information_horizon(m)
        for h in range(int(ih.value), m.horizon + 1):
            assert np.all(resolved(m.reachable.layer(h).beliefs))
        assert 1 <= ih.value <= m.horizon


def test_abstract_chain_three_point_cover():
    m = make_bernoulli_chain(0.8, 3)
    cover = build_lattice_cover(2, 0.25)
    assert abstract_information_horizon(induce_abstract_bamdp(m, EpistemicAbstraction(cover))) == 2


@pytest.mark.parametrize("N", [2, 3, 4])
def test_two_chain_coarse_cover_never_resolves(N):
    m = make_two_chain(N)
    beliefs = np.vstack([m.reachable.layer(h).beliefs for h in range(1, m.horizon + 1)])
    cover = build_greedy_cover(beliefs, 0.5)
    assert abstract_information_horizon(induce_abstract_bamdp(m, EpistemicAbstraction(cover))) == math.inf


def test_identity_abstraction_keeps_horizon():
    m = make_separating_bamdp(4, 3, 2, 2, 4)
    beliefs = np.vstack([m.reachable.layer(h).beliefs for h in range(1, 5)])
    cover = build_greedy_cover(beliefs, 1e-6)
    ab = induce_abstract_bamdp(m, EpistemicAbstraction(cover))
    assert abstract_information_horizon(ab).value == information_horizon(m).value


def test_to_dict_format():
    d = information_horizon(make_bernoulli_chain(0.8, 3)).to_dict()
    assert d["horizon"] == "inf" and d["layer_sizes"] == [1, 4, 9]
    assert information_horizon(make_bernoulli_chain(1.0, 3)).to_dict()["horizon"] == 2
