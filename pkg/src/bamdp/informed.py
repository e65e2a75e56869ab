"""Informed value iteration: stop BAMDP backups at the information horizon.

Once every reachable belief is a point mass the agent knows its MDP, so the
values from timestep ``I`` on come from solving each hypothesis MDP once.
BAMDP backups are only needed for timesteps ``1..I-1``.

Each hypothesis MDP is solved with horizon ``H - I + 1``: the bootstrap at
timestep ``I`` must cover the ``H - I + 1`` decisions taken at timesteps
``I..H``.
"""

from __future__ import annotations

import numpy as np

from bamdp.errors import InfiniteInformationHorizon, InfoHorizonViolated, NotDirac, ValidationError
from bamdp.info_horizon import ZERO_ENTROPY_TOL, information_horizon
from bamdp.beliefs import as_probs
from bamdp.mdp import mdp_value_iteration
from bamdp.planning import backup_layer, new_table, store_layer


def identify_theta(belief, tol: float = ZERO_ENTROPY_TOL) -> int:
    """Index of the hypothesis a point-mass belief sits on."""
    p = as_probs(belief)
    k = int(np.argmax(p))
    if p[k] < 1.0 - tol:
        raise NotDirac(f"belief {np.round(p, 6).tolist()} is not a point mass")
    return k


def solve_hypotheses(ensemble, horizon: int):
    """Optimal value arrays (horizon+1, S) for every hypothesis MDP, plus the backup count."""
    tables = [mdp_value_iteration(ensemble.mdp(k, horizon)) for k in range(ensemble.num_hypotheses)]
    return [t.v for t in tables], sum(t.backup_count for t in tables)


def bootstrap_positions(space, info_horizon: int, initial_positions=None):
    """Layer-``I`` positions the backups will actually read."""
    if info_horizon == 1:
        return np.asarray(initial_positions, dtype=np.int64)
    cols = [space.transitions(info_horizon - 1, a).cols for a in range(space.num_actions)]
    return np.unique(np.concatenate(cols)) if cols else np.zeros(0, dtype=np.int64)


def informed_backups(space, reward, ensemble, info_horizon: int, tag: str, initial_positions, tol=ZERO_ENTROPY_TOL):
    """Shared core of the ground and abstract informed planners."""
    H = space.horizon
    if not 1 <= info_horizon <= H:
        raise ValidationError(f"information horizon {info_horizon} outside 1..{H}")
    I = int(info_horizon)
    mdp_values, mdp_backups = solve_hypotheses(ensemble, H - I + 1)
    table = new_table(space, tag)
    table.mdp_backups = mdp_backups
    table.backup_count = mdp_backups
    table.bootstrap = (I, mdp_values)

    layer = space.layer(I)
    v_boot = np.full(len(layer), np.nan)
    for j in bootstrap_positions(space, I, initial_positions):
        s, p = int(layer.states[j]), layer.beliefs[j]
        try:
            k = identify_theta(p, tol)
        except NotDirac as err:
            raise InfoHorizonViolated(
                f"information horizon {I} is too small: timestep {I} reaches state {s} "
                f"with belief {np.round(p, 6).tolist()}",
                hyperstate=(I, s, p.tolist()),
            ) from err
        v_boot[j] = mdp_values[k][0, s]
    table.v[I - 1] = v_boot

    v_next = v_boot
    for h in range(I - 1, 0, -1):
        q = backup_layer(space, reward, h, v_next)
        store_layer(table, h, q)
        v_next = table.v[h - 1]
    table.meta.update(info_horizon=I, mdp_horizon=H - I + 1)
    return table


def informed_value_iteration(model, info_horizon: int, space=None):
    """Optimal BAMDP values at timesteps 1..I-1 given a valid information horizon ``I``.

    The horizon is trusted, not re-verified; a bootstrapped successor that is
    not a point mass raises InfoHorizonViolated.
    """
    space = model.space if space is None else space
    initial = [space.locate(1, x.state, x.belief.probs) for x in model.initial_hyperstates()]
    table = informed_backups(space, model.ensemble.reward, model.ensemble, int(info_horizon), "informed", initial)
    table.meta.update(backend=space.backend, digest=model.digest())
    return table


def informed_value_iteration_auto(model, space=None):
    """Compute the information horizon first; refuse if it is infinite."""
    ih = information_horizon(model)
    if not ih.finite:
        raise InfiniteInformationHorizon(
            f"no finite information horizon within H={model.horizon}; witness {ih.witness}"
        )
    return informed_value_iteration(model, int(ih.value), space)
