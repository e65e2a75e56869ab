"""Information horizon: the first timestep by which every reachable belief is a point mass.

The supremum over non-stationary hyperstate policies is computed by
all-actions reachability. Any action trace through the hyperstate layers is
followed by the policy that plays exactly that trace's action at each
hyperstate on it, so the union of the policies' reachable sets is the
all-actions reachable set and no policy enumeration is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from bamdp.beliefs import as_probs
from bamdp.spaces import ReachableLayers

ZERO_ENTROPY_TOL = 1e-12


def entropy(belief) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0."""
    p = as_probs(belief)
    nz = p[p > 0.0]
    return float(max(0.0, -(nz * np.log(nz)).sum()))


def resolved(beliefs: np.ndarray, tol: float = ZERO_ENTROPY_TOL, gamma: float = 0.0) -> np.ndarray:
    """Mask of beliefs carrying no epistemic uncertainty.

    A belief counts as resolved when its largest coordinate is at least
    ``1 - tol``; with ``gamma > 0`` an entropy at or below ``gamma`` also counts.
    """
    beliefs = np.atleast_2d(beliefs)
    mask = beliefs.max(axis=1) >= 1.0 - tol
    if gamma > 0.0:
        mask |= np.array([entropy(b) <= gamma for b in beliefs])
    return mask


@dataclass
class InformationHorizon:
    value: float  # an int timestep, or math.inf
    layer_sizes: list = field(default_factory=list)
    witness: dict | None = None

    @property
    def finite(self) -> bool:
        return not math.isinf(self.value)

    def __int__(self):
        return int(self.value)

    def __eq__(self, other):
        if isinstance(other, InformationHorizon):
            return self.value == other.value
        return self.value == other

    def to_dict(self) -> dict:
        return {
            "horizon": int(self.value) if self.finite else "inf",
            "layer_sizes": list(self.layer_sizes),
            "witness": self.witness,
        }


def _witness(space: ReachableLayers, h: int, positions) -> dict:
    layer = space.layer(h)
    positions = list(positions)
    ent = [entropy(layer.beliefs[i]) for i in positions]
    i = positions[int(np.argmax(ent))]
    return {
        "timestep": h,
        "state": int(layer.states[i]),
        "belief": layer.beliefs[i].tolist(),
        "entropy": max(ent),
        "trace": space.trace(h, i),
    }


def horizon_over_layers(space: ReachableLayers, tol=ZERO_ENTROPY_TOL, gamma=0.0, active=None):
    """Scan layers 1..H; ``active(h)`` optionally restricts each layer to a subset."""
    sizes = []
    prev_open = None
    for h in range(1, space.horizon + 1):
        layer = space.layer(h)
        members = np.arange(len(layer)) if active is None else active(h)
        sizes.append(len(members))
        open_ = members[~resolved(layer.beliefs[members], tol, gamma)] if len(members) else members
        if len(open_) == 0:
            witness = _witness(space, h - 1, prev_open) if h > 1 else None
            return InformationHorizon(h, sizes, witness)
        prev_open = open_
    return InformationHorizon(math.inf, sizes, _witness(space, space.horizon, prev_open))


def information_horizon(model, tol: float = ZERO_ENTROPY_TOL, gamma: float = 0.0) -> InformationHorizon:
    """Supremum of the policy information horizon over all non-stationary policies."""
    return horizon_over_layers(model.reachable, tol, gamma)


def policy_information_horizon(model, policy, tol: float = ZERO_ENTROPY_TOL, gamma: float = 0.0) -> InformationHorizon:
    """Information horizon of one policy, over the hyperstates it reaches."""
    space = model.reachable
    reached = {1: np.arange(len(space.layer(1)))}

    def active(h):
        if h not in reached:
            prev = reached[h - 1]
            layer = space.layer(h - 1)
            nxt = set()
            for i in prev:
                a = policy.action(h - 1, int(layer.states[i]), layer.beliefs[i])
                nxt.update(j for j, _ in space.successors(h - 1, int(i), a))
            reached[h] = np.array(sorted(nxt), dtype=np.int64)
        return reached[h]

    return horizon_over_layers(space, tol, gamma, active)


def abstract_information_horizon(abstract, tol: float = ZERO_ENTROPY_TOL, gamma: float = 0.0) -> InformationHorizon:
    """Information horizon of an induced abstract BAMDP, on cover centers."""
    return horizon_over_layers(abstract.reachable_space(), tol, gamma)
