import math

import numpy as np
import pytest

from bamdp.abstraction import EpistemicAbstraction, build_greedy_cover, build_lattice_cover, informed_abstract_value_iteration
from bamdp.envs import make_bernoulli_chain, make_random_bamdp, make_separating_bamdp
from bamdp.errors import ValidationError
from bamdp.informed import informed_value_iteration
from bamdp.model import BamdpModel, MdpEnsemble
from bamdp.planning import bamdp_value_iteration, zero_values
from bamdp.verification import (
    BoundReport,
    TimestepBound,
    check_approx_error_bound,
    check_greedy_loss_bound,
    check_performance_loss_bound,
    check_value_of_information,
    parse_sweep,
    planning_complexity_report,
    lifted_abstract_values,
    reachable_beliefs,
    reports_to_csv,
)


def identity(m):
    return EpistemicAbstraction(build_greedy_cover(reachable_beliefs(m), 1e-6))


def test_report_pass_and_ratio():
    r = BoundReport("x", [TimestepBound(1, 0.5, 1.0, 0.5, False), TimestepBound(2, 0.0, 0.0, 0.0, False)], 2)
    assert r.passed and r.max_ratio == 0.5
    r.per_timestep.append(TimestepBound(3, 1e-3, 0.0, math.inf, False))
    assert not r.passed and len(r.failures()) == 1
    assert r.to_dict()["max_ratio"] == "inf"


def test_identity_abstraction_has_zero_gaps():
    m = make_separating_bamdp(2, 3, 2, 2, 4)
    ab = identity(m)
    for r in (check_approx_error_bound(m, ab), check_performance_loss_bound(m, ab)):
        assert r.passed
        assert all(t.gap <= 1e-12 for t in r.per_timestep)


def test_terminal_layer_gap_is_zero():
    m = make_random_bamdp(4, 3, 2, 3, 3)
    r = check_approx_error_bound(m, EpistemicAbstraction(build_lattice_cover(3, 0.45, num_samples=1000)))
    last = r.per_timestep[-1]
    assert last.h == 3 and last.bound == 0 and last.gap <= 1e-12


def test_chain_reports():
    m = make_bernoulli_chain(0.8, 3, "height")
    ab = EpistemicAbstraction(build_lattice_cover(2, 0.25))
    r1 = check_approx_error_bound(m, ab)
    assert r1.passed and r1.per_timestep[0].bound == pytest.approx(3.0)
    r3 = check_performance_loss_bound(m, ab)
    assert r3.passed and r3.per_timestep[0].bound == pytest.approx(18.0) and r3.per_timestep[0].vacuous
    for a, b in zip(r1.per_timestep, r3.per_timestep):
        assert b.bound == pytest.approx(2 * (3 - a.h + 1) * a.bound)


def test_greedy_loss_with_exact_and_zero_values():
    m = make_random_bamdp(8, 3, 2, 2, 3)
    t = bamdp_value_iteration(m)
    r = check_greedy_loss_bound(m, t)
    assert r.epsilon_used == 0 and r.passed and all(x.gap <= 1e-12 for x in r.per_timestep)
    r0 = check_greedy_loss_bound(m, zero_values)
    assert r0.passed and r0.epsilon_used == pytest.approx(max(v.max() for v in t.v))


def test_greedy_loss_with_lifted_values():
    m = make_bernoulli_chain(0.8, 3, "height")
    plan = informed_abstract_value_iteration(m, EpistemicAbstraction(build_lattice_cover(2, 0.25)))
    lifted, _ = lifted_abstract_values(m, plan.lifted.abstraction)
    r = check_greedy_loss_bound(m, lifted)
    assert r.passed and r.epsilon_used > 0
    assert r.to_dict()["epsilon_kind"] == "matched-pairs"


def test_value_of_information():
    m = make_random_bamdp(0, 3, 2, 2, 3, prior=[1.0, 0.0])
    assert abs(check_value_of_information(m).per_timestep[0].gap) <= 1e-9
    e = make_random_bamdp(1, 3, 2, 1, 3).ensemble
    same = BamdpModel(MdpEnsemble(e.reward, np.repeat(e.hypotheses, 3, axis=0), e.initial_dist, 3))
    assert abs(check_value_of_information(same).per_timestep[0].gap) <= 1e-9
    for seed in range(20):
        assert check_value_of_information(make_random_bamdp(seed, 3, 2, 2, 3)).passed


def test_complexity_report_grid():
    m = make_separating_bamdp(0, 3, 2, 2, 4, backend="grid", resolution=9)
    assert m.space.size == 30
    naive = bamdp_value_iteration(m)
    inf = informed_value_iteration(m, 2)
    rep = planning_complexity_report([naive, inf], m)
    rows = {r["algorithm"]: r for r in rep["tables"]}
    assert rows["naive"]["bamdp_backups"] == 240
    assert rows["informed"]["bamdp_backups"] == 60
    assert rows["informed"]["mdp_backups"] == 2 * 3 * 2 * 3
    assert all(r["matches"] for r in rep["tables"])


def test_complexity_report_abstract_chain():
    m = make_bernoulli_chain(0.8, 3)
    plan = informed_abstract_value_iteration(m, EpistemicAbstraction(build_lattice_cover(2, 0.25)))
    assert plan.abstract.num_abstract_hyperstates == 4 * 3
    rep = planning_complexity_report([plan.table], m)
    assert rep["tables"][0]["matches"]


def test_complexity_report_rejects_mixed_instances():
    a = bamdp_value_iteration(make_random_bamdp(0, 2, 2, 2, 2))
    with pytest.raises(ValidationError):
        planning_complexity_report([a], make_random_bamdp(1, 2, 2, 2, 2))


def test_csv_and_sweep_parsing():
    assert parse_sweep("0.05:0.45:9") == [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45]
    with pytest.raises(ValidationError):
        parse_sweep("0.1:0.2")
    m = make_bernoulli_chain(0.8, 3, "height")
    r = check_approx_error_bound(m, EpistemicAbstraction(build_lattice_cover(2, 0.25)))
    lines = reports_to_csv([r]).splitlines()
    assert lines[0] == "prop,h,delta,gap,bound,ratio,vacuous" and len(lines) == 4
