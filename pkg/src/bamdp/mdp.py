"""Finite-horizon tabular MDPs: exact backward induction and policy evaluation.

Timesteps are 1-based. Value arrays are stored 0-based along the time axis,
so ``table.v[h - 1]`` holds ``V_h`` and the final row ``table.v[H]`` is the
all-zero sentinel layer ``V_{H+1}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bamdp.errors import IncompletePolicy, ValidationError

STOCHASTIC_TOL = 1e-9


def check_stochastic(tensor: np.ndarray, what: str) -> None:
    """Raise ValidationError unless every last-axis row is a distribution."""
    if np.any(tensor < -STOCHASTIC_TOL):
        idx = tuple(int(i) for i in np.argwhere(tensor < -STOCHASTIC_TOL)[0])
        raise ValidationError(f"row-stochasticity: negative entry in {what} at {idx}")
    sums = tensor.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > STOCHASTIC_TOL)
    if len(bad):
        idx = tuple(int(i) for i in bad[0])
        raise ValidationError(
            f"row-stochasticity: {what} row {idx} sums to {sums[tuple(bad[0])]:.12g}"
        )


def check_reward(reward: np.ndarray) -> None:
    if np.any(reward < 0.0) or np.any(reward > 1.0):
        raise ValidationError("reward-range: every reward must lie in [0, 1]")


@dataclass(frozen=True)
class Mdp:
    """A finite-horizon MDP with deterministic rewards in [0, 1].

    ``reward`` has shape (S, A), ``transition`` has shape (S, A, S) and
    ``initial_dist`` has shape (S,).
    """

    reward: np.ndarray
    transition: np.ndarray
    initial_dist: np.ndarray
    horizon: int

    def __post_init__(self):
        reward = np.array(self.reward, dtype=float)
        transition = np.array(self.transition, dtype=float)
        initial = np.array(self.initial_dist, dtype=float)
        if reward.ndim != 2:
            raise ValidationError("reward must be indexed [state][action]")
        S, A = reward.shape
        if transition.shape != (S, A, S):
            raise ValidationError(
                f"transition shape {transition.shape} does not match reward {reward.shape}"
            )
        if initial.shape != (S,):
            raise ValidationError("initial_dist must have one entry per state")
        if int(self.horizon) < 0:
            raise ValidationError("horizon must be nonnegative")
        check_reward(reward)
        check_stochastic(transition, "transition")
        check_stochastic(initial, "initial_dist")
        for name, arr in (("reward", reward), ("transition", transition), ("initial_dist", initial)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def num_states(self) -> int:
        return self.reward.shape[0]

    @property
    def num_actions(self) -> int:
        return self.reward.shape[1]


@dataclass
class ValueTable:
    """Optimal or on-policy values of a finite-horizon MDP.

    Shapes: ``v`` (H+1, S), ``q`` (H, S, A), ``greedy_policy`` (H, S).
    """

    v: np.ndarray
    q: np.ndarray
    greedy_policy: np.ndarray
    backup_count: int = 0

    @property
    def horizon(self) -> int:
        return self.q.shape[0]

    def value(self, h: int, s: int) -> float:
        return float(self.v[h - 1, s])


def _empty_table(mdp: Mdp) -> ValueTable:
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    return ValueTable(
        v=np.zeros((H + 1, S)),
        q=np.zeros((H, S, A)),
        greedy_policy=np.zeros((H, S), dtype=int),
    )


def mdp_value_iteration(mdp: Mdp) -> ValueTable:
    """Backward induction for the optimal values and a greedy optimal policy.

    Argmax ties go to the lowest action index.
    """
    table = _empty_table(mdp)
    for h in range(mdp.horizon, 0, -1):
        q = mdp.reward + mdp.transition @ table.v[h]
        table.q[h - 1] = q
        table.greedy_policy[h - 1] = np.argmax(q, axis=1)
        table.v[h - 1] = q.max(axis=1)
        table.backup_count += mdp.num_states * mdp.num_actions
    return table


def _policy_array(mdp: Mdp, policy) -> np.ndarray:
    H, S = mdp.horizon, mdp.num_states
    rows = list(policy) if H else []
    if len(rows) < H:
        raise IncompletePolicy(f"policy covers {len(rows)} timesteps, horizon is {H}")
    out = np.zeros((H, S), dtype=int)
    for h in range(H):
        row = list(rows[h])
        for s in range(S):
            a = row[s] if s < len(row) else None
            if a is None or not 0 <= int(a) < mdp.num_actions:
                raise IncompletePolicy(f"no valid action at timestep {h + 1}, state {s}")
            out[h, s] = int(a)
    return out


def evaluate_mdp_policy(mdp: Mdp, policy) -> ValueTable:
    """Exact values of a non-stationary deterministic policy.

    ``policy[h - 1][s]`` is the action taken in state ``s`` at timestep ``h``;
    missing or out-of-range entries raise IncompletePolicy.
    """
    actions = _policy_array(mdp, policy)
    table = _empty_table(mdp)
    states = np.arange(mdp.num_states)
    for h in range(mdp.horizon, 0, -1):
        q = mdp.reward + mdp.transition @ table.v[h]
        table.q[h - 1] = q
        table.greedy_policy[h - 1] = actions[h - 1]
        table.v[h - 1] = q[states, actions[h - 1]]
        table.backup_count += mdp.num_states
    return table
