"""Finite-horizon planning in Bayes-adaptive MDPs over a finite hypothesis set."""

from bamdp.abstraction import (
    DeltaCover,
    EpistemicAbstraction,
    apply_abstraction,
    build_greedy_cover,
    build_lattice_cover,
    induce_abstract_bamdp,
    informed_abstract_value_iteration,
    tv_distance,
)
from bamdp.beliefs import EpistemicState, Hyperstate
from bamdp.envs import load_problem, make_bernoulli_chain, make_random_bamdp, make_two_chain, parse_env_spec, save_problem
from bamdp.info_horizon import abstract_information_horizon, entropy, information_horizon, policy_information_horizon
from bamdp.informed import identify_theta, informed_value_iteration
from bamdp.mdp import Mdp, evaluate_mdp_policy, mdp_value_iteration
from bamdp.model import (
    BamdpModel,
    MdpEnsemble,
    bamdp_transition,
    build_quantized_space,
    enumerate_reachable_hyperstates,
    posterior_update,
    snap_to_grid,
)
from bamdp.planning import BamdpPolicy, bamdp_value_iteration, evaluate_bamdp_policy, greedy_policy_from_values

