"""Backward induction over hyperstate spaces.

``bamdp_value_iteration`` is the naive planner: every hyperstate of every
layer gets one backup per action, from the final timestep down to the first.
The same layer backup is reused by the informed and abstract planners.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from bamdp.beliefs import EpistemicState, Hyperstate, as_probs
from bamdp.errors import IncompletePolicy, ValueLookupError
from bamdp.spaces import HyperstateSpace

ValueFn = Callable[[int, int, np.ndarray], float]


@dataclass
class BamdpValueTable:
    """Values aligned with the layers of ``space``.

    ``v[h - 1]``, ``q[h - 1]`` and ``greedy_policy[h - 1]`` describe timestep
    ``h``; entries are ``None`` for timesteps a planner did not compute.
    ``V_{H+1}`` is implicitly zero.
    """

    space: HyperstateSpace
    v: list
    q: list
    greedy_policy: list
    backup_count: int = 0
    algorithm_tag: str = "naive"
    bamdp_backups: int = 0
    mdp_backups: int = 0
    meta: dict = field(default_factory=dict)
    # (first timestep served, per-hypothesis MDP value arrays) for Dirac lookups
    bootstrap: tuple | None = None

    @property
    def horizon(self) -> int:
        return self.space.horizon

    def computed_timesteps(self) -> list[int]:
        return [h for h in range(1, self.horizon + 1) if self.v[h - 1] is not None]

    def value(self, h: int, s: int, belief) -> float:
        """V_h at hyperstate (s, belief); raises ValueLookupError when undefined."""
        if h == self.horizon + 1:
            return 0.0
        p = as_probs(belief)
        if self.v[h - 1] is not None:
            i = self.space.locate(h, s, p)
            if i is not None and not np.isnan(self.v[h - 1][i]):
                return float(self.v[h - 1][i])
        if self.bootstrap is not None and h >= self.bootstrap[0] and p.max() >= 1.0 - 1e-12:
            start, tables = self.bootstrap
            return float(tables[int(np.argmax(p))][h - start, s])
        raise ValueLookupError(
            f"{self.algorithm_tag} table has no value for timestep {h}, state {s}, belief {np.round(p, 6).tolist()}"
        )

    def __call__(self, h: int, s: int, belief) -> float:
        return self.value(h, s, belief)

    def initial_value(self, s: int, belief) -> float:
        return self.value(1, s, belief)

    def rows(self):
        """(h, s, belief, v, greedy_action) for every stored entry, in layer order."""
        for h in self.computed_timesteps():
            layer = self.space.layer(h)
            v = self.v[h - 1]
            pol = self.greedy_policy[h - 1]
            for i in range(len(layer)):
                if np.isnan(v[i]):
                    continue
                a = None if pol is None else int(pol[i])
                yield h, int(layer.states[i]), layer.beliefs[i], float(v[i]), a

    def to_json(self) -> str:
        values = {}
        for h, s, b, v, _ in self.rows():
            values[f"{h}/{s}/{','.join(repr(float(x)) for x in b)}"] = v
        doc = {
            "algorithm": self.algorithm_tag,
            "backup_count": self.backup_count,
            "bamdp_backups": self.bamdp_backups,
            "mdp_backups": self.mdp_backups,
            "meta": self.meta,
            "values": values,
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        K = None
        for h, s, b, v, a in self.rows():
            if K is None:
                K = len(b)
                writer.writerow(["h", "s", *[f"b{k}" for k in range(K)], "v", "greedy_action"])
            writer.writerow([h, s, *[repr(float(x)) for x in b], repr(v), "" if a is None else a])
        return buf.getvalue()


def new_table(space: HyperstateSpace, tag: str) -> BamdpValueTable:
    H = space.horizon
    return BamdpValueTable(space, [None] * H, [None] * H, [None] * H, algorithm_tag=tag)


def backup_layer(space: HyperstateSpace, reward: np.ndarray, h: int, v_next) -> np.ndarray:
    """Q_h for every hyperstate of layer ``h``; ``v_next`` is None at the last timestep."""
    layer = space.layer(h)
    q = reward[layer.states].astype(float, copy=True)
    if v_next is not None:
        for a in range(space.num_actions):
            q[:, a] += space.transitions(h, a).expect(v_next)
    return q


def store_layer(table: BamdpValueTable, h: int, q: np.ndarray):
    table.q[h - 1] = q
    table.greedy_policy[h - 1] = np.argmax(q, axis=1)
    table.v[h - 1] = q.max(axis=1)
    n = q.shape[0] * q.shape[1]
    table.backup_count += n
    table.bamdp_backups += n


def solve_space(space: HyperstateSpace, reward: np.ndarray, tag: str = "naive") -> BamdpValueTable:
    """Full-horizon optimal backward induction over any layered space."""
    table = new_table(space, tag)
    v_next = None
    for h in range(space.horizon, 0, -1):
        q = backup_layer(space, reward, h, v_next)
        store_layer(table, h, q)
        v_next = table.v[h - 1]
    return table


def bamdp_value_iteration(model, space: HyperstateSpace | None = None) -> BamdpValueTable:
    """Optimal BAMDP values on the model's space (or an explicit one)."""
    space = model.space if space is None else space
    table = solve_space(space, model.ensemble.reward, "naive")
    table.meta.update(backend=space.backend, digest=model.digest(), layer_sizes=space.layer_sizes())
    return table


class BamdpPolicy:
    """Non-stationary hyperstate policy.

    Lookup order: a tabular action for a hyperstate of ``space``, then
    ``rule(h, s, belief)``, then ``fallback(h, s, belief)``. A rule may return
    None to decline a hyperstate.
    """

    def __init__(self, rule=None, *, space=None, actions=None, fallback=None, name="policy"):
        self.rule = rule
        self.space = space
        self.actions = actions
        self.fallback = fallback
        self.name = name

    @classmethod
    def constant(cls, action: int) -> "BamdpPolicy":
        return cls(lambda h, s, p: action, name=f"always-{action}")

    def action(self, h: int, s: int, belief) -> int:
        p = as_probs(belief)
        if self.actions is not None:
            i = self.space.locate(h, s, p)
            if i is not None and self.actions[h - 1] is not None:
                return int(self.actions[h - 1][i])
        for fn in (self.rule, self.fallback):
            if fn is not None:
                a = fn(h, s, p)
                if a is not None:
                    return int(a)
        raise IncompletePolicy(
            f"{self.name} has no action at timestep {h}, state {s}, belief {np.round(p, 6).tolist()}"
        )

    def __call__(self, h, x: Hyperstate):
        return self.action(h, x.state, x.belief)

    def layer_actions(self, space: HyperstateSpace, h: int) -> np.ndarray:
        if space is self.space and self.actions is not None and self.actions[h - 1] is not None:
            return np.asarray(self.actions[h - 1], dtype=np.int64)
        layer = space.layer(h)
        return np.array(
            [self.action(h, int(layer.states[i]), layer.beliefs[i]) for i in range(len(layer))],
            dtype=np.int64,
        )


def evaluate_bamdp_policy(model, policy: BamdpPolicy, space: HyperstateSpace | None = None) -> BamdpValueTable:
    """Exact V^pi and Q^pi on every hyperstate of the space.

    The policy must be defined on each hyperstate of each layer.
    """
    space = model.space if space is None else space
    reward = model.ensemble.reward
    table = new_table(space, f"eval:{policy.name}")
    v_next = None
    for h in range(space.horizon, 0, -1):
        q = backup_layer(space, reward, h, v_next)
        acts = policy.layer_actions(space, h)
        table.q[h - 1] = q
        table.greedy_policy[h - 1] = acts
        table.v[h - 1] = q[np.arange(len(acts)), acts]
        table.backup_count += q.size
        v_next = table.v[h - 1]
    table.meta.update(backend=space.backend, digest=model.digest())
    return table


def _next_values(space: HyperstateSpace, v, h: int) -> np.ndarray:
    if isinstance(v, BamdpValueTable) and v.space is space and v.v[h - 1] is not None:
        if not np.any(np.isnan(v.v[h - 1])):
            return v.v[h - 1]
    layer = space.layer(h)
    out = np.empty(len(layer))
    for i in range(len(layer)):
        out[i] = v(h, int(layer.states[i]), layer.beliefs[i])
    return out


def greedy_policy_from_values(model, v, space: HyperstateSpace | None = None) -> BamdpPolicy:
    """Greedy policy w.r.t. ``v`` (a value table or ``v(h, s, belief)``).

    At timestep ``h`` the policy maximizes R(s,a) + E[v_{h+1}(x')]; ties go to
    the lowest action index. ``v`` is queried only at timesteps 2..H.
    """
    space = model.space if space is None else space
    reward = model.ensemble.reward
    H = space.horizon
    actions = [None] * H
    for h in range(H, 0, -1):
        v_next = None if h == H else _next_values(space, v, h + 1)
        q = backup_layer(space, reward, h, v_next)
        actions[h - 1] = np.argmax(q, axis=1)
    return BamdpPolicy(space=space, actions=actions, name="greedy")


def zero_values(h: int, s: int, belief) -> float:
    return 0.0


def as_belief(p) -> EpistemicState:
    return p if isinstance(p, EpistemicState) else EpistemicState(p)
