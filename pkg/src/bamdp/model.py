"""BAMDPs over a finite set of candidate transition functions.

The agent knows the shared rewards, initial distribution and horizon, and is
uncertain only about which of ``K`` transition tensors is the true one. Its
epistemic state is a point of the (K-1)-simplex updated by exact Bayes rule.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass

import numpy as np

from bamdp.beliefs import EpistemicState, Hyperstate, as_probs
from bamdp.errors import ImpossibleObservation, SpaceExplosion, ValidationError
from bamdp.mdp import Mdp, check_reward, check_stochastic
from bamdp.spaces import FixedSpace, HyperstateSpace, ReachableLayers, default_cap

TIE_TOL = 1e-12


@dataclass(frozen=True)
class MdpEnsemble:
    """Shared MDP structure plus one transition tensor per hypothesis.

    ``hypotheses`` has shape (K, S, A, S).
    """

    reward: np.ndarray
    hypotheses: np.ndarray
    initial_dist: np.ndarray
    horizon: int

    def __post_init__(self):
        reward = np.array(self.reward, dtype=float)
        hyp = np.array(self.hypotheses, dtype=float)
        initial = np.array(self.initial_dist, dtype=float)
        if reward.ndim != 2:
            raise ValidationError("reward must be indexed [state][action]")
        S, A = reward.shape
        if hyp.ndim != 4 or hyp.shape[1:] != (S, A, S) or hyp.shape[0] < 1:
            raise ValidationError(
                f"hypotheses must have shape (K, {S}, {A}, {S}) with K >= 1, got {hyp.shape}"
            )
        if initial.shape != (S,):
            raise ValidationError("initial_dist must have one entry per state")
        if int(self.horizon) < 1:
            raise ValidationError("horizon must be at least 1")
        check_reward(reward)
        check_stochastic(hyp, "hypotheses")
        check_stochastic(initial, "initial_dist")
        for name, arr in (("reward", reward), ("hypotheses", hyp), ("initial_dist", initial)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def num_states(self) -> int:
        return self.reward.shape[0]

    @property
    def num_actions(self) -> int:
        return self.reward.shape[1]

    @property
    def num_hypotheses(self) -> int:
        return self.hypotheses.shape[0]

    def mdp(self, theta: int, horizon: int | None = None) -> Mdp:
        """The known MDP for hypothesis ``theta``, optionally with a new horizon."""
        H = self.horizon if horizon is None else horizon
        return Mdp(self.reward, self.hypotheses[theta], self.initial_dist, H)

    def predictive(self, p: np.ndarray, s: int, a: int) -> np.ndarray:
        """Joint weights T_theta(s'|s,a) p(theta), shape (K, S)."""
        return p[:, None] * self.hypotheses[:, s, a, :]


def _posterior_array(ensemble: MdpEnsemble, p: np.ndarray, s: int, a: int, s_next: int):
    joint = p * ensemble.hypotheses[:, s, a, s_next]
    total = joint.sum()
    if total <= 0.0:
        raise ImpossibleObservation(
            f"transition ({s}, {a}, {s_next}) has zero probability under every supported hypothesis"
        )
    return joint / total


def posterior_update(ensemble: MdpEnsemble, belief, s: int, a: int, s_next: int) -> EpistemicState:
    """Exact Bayes update of ``belief`` after observing ``s -a-> s_next``."""
    return EpistemicState(_posterior_array(ensemble, as_probs(belief), s, a, s_next))


def successor_arrays(ensemble: MdpEnsemble, p: np.ndarray, s: int, a: int):
    """(next_state, posterior, predictive probability) for every feasible next state."""
    joint = ensemble.predictive(p, s, a)
    pred = joint.sum(axis=0)
    out = []
    for s_next in np.flatnonzero(pred > 0.0):
        out.append((int(s_next), joint[:, s_next] / pred[s_next], float(pred[s_next])))
    return out


def simplex_lattice(dim: int, resolution: int) -> np.ndarray:
    """All vectors k/m with nonnegative integers k summing to m, sorted lexicographically."""
    points = []
    for bars in itertools.combinations(range(resolution + dim - 1), dim - 1):
        edges = (-1, *bars, resolution + dim - 1)
        points.append([edges[i + 1] - edges[i] - 1 for i in range(dim)])
    grid = np.array(sorted(points), dtype=float) / resolution
    return grid


def lattice_size(dim: int, resolution: int) -> int:
    return math.comb(resolution + dim - 1, dim - 1)


def nearest_tv(points: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index and TV distance of the nearest target for each point.

    Ties within ``TIE_TOL`` go to the earliest target, which is the
    lexicographically smallest when ``targets`` is sorted.
    """
    points = np.atleast_2d(points)
    idx = np.empty(len(points), dtype=np.int64)
    dist = np.empty(len(points))
    chunk = max(1, 2_000_000 // max(1, targets.size))
    for lo in range(0, len(points), chunk):
        block = points[lo : lo + chunk]
        d = 0.5 * np.abs(block[:, None, :] - targets[None, :, :]).sum(axis=2)
        best = d.min(axis=1)
        idx[lo : lo + chunk] = np.argmax(d <= best[:, None] + TIE_TOL, axis=1)
        dist[lo : lo + chunk] = best
    return idx, dist


class QuantizedGrid(FixedSpace):
    """Hyperstates ``S x lattice(m)``; successor beliefs snap back onto the lattice."""

    backend = "grid"

    def __init__(self, ensemble: MdpEnsemble, resolution: int, max_hyperstates: int | None = None):
        if resolution < 1:
            raise ValidationError("grid resolution must be at least 1")
        K, S = ensemble.num_hypotheses, ensemble.num_states
        cap = default_cap() if max_hyperstates is None else max_hyperstates
        size = lattice_size(K, resolution) * S
        if size > cap:
            raise SpaceExplosion(f"grid of {size} hyperstates exceeds the cap of {cap}")
        self.resolution = resolution
        self.ensemble = ensemble
        grid = simplex_lattice(K, resolution)

        def successor(s, g, a):
            out = []
            for s_next, post, prob in successor_arrays(ensemble, grid[g], s, a):
                out.append((s_next, self.snap_index(post), prob))
            return out

        super().__init__(S, ensemble.num_actions, ensemble.horizon, grid, successor)

    @property
    def grid(self) -> np.ndarray:
        return self.beliefs

    def snap_index(self, p: np.ndarray) -> int:
        return int(nearest_tv(p[None, :], self.beliefs)[0][0])

    def locate(self, h: int, s: int, belief) -> int:
        # off-grid queries resolve through the same snap rule the backups use
        self.layer(h)
        return self.position(int(s), self.snap_index(np.asarray(belief, dtype=float)))


class BamdpModel:
    """A BAMDP: ensemble, prior and the hyperstate space planners iterate over.

    The space is built on first use. ``reachable`` always refers to the exact
    all-actions reachable layers, whatever the planning backend.
    """

    def __init__(
        self,
        ensemble: MdpEnsemble,
        prior=None,
        space: HyperstateSpace | None = None,
        *,
        backend: str = "reachable",
        resolution: int | None = None,
        max_hyperstates: int | None = None,
    ):
        K = ensemble.num_hypotheses
        prior = EpistemicState.uniform(K) if prior is None else prior
        if not isinstance(prior, EpistemicState):
            prior = EpistemicState(prior)
        if len(prior) != K:
            raise ValidationError(f"prior has {len(prior)} entries, ensemble has {K} hypotheses")
        if backend not in ("reachable", "grid"):
            raise ValidationError(f"unknown backend {backend!r}")
        if backend == "grid" and space is None and resolution is None:
            raise ValidationError("grid backend needs a resolution")
        self.ensemble = ensemble
        self.prior = prior
        self.backend = space.backend if space is not None else backend
        self.resolution = resolution
        self.max_hyperstates = max_hyperstates
        self._space = space
        self._reachable = space if isinstance(space, ReachableLayers) else None

    @property
    def horizon(self) -> int:
        return self.ensemble.horizon

    @property
    def space(self) -> HyperstateSpace:
        if self._space is None:
            if self.backend == "grid":
                self._space = build_quantized_space(self.ensemble, self.resolution, self.max_hyperstates)
            else:
                self._space = self.reachable
        return self._space

    @property
    def reachable(self) -> ReachableLayers:
        if self._reachable is None:
            self._reachable = enumerate_reachable_hyperstates(self)
        return self._reachable

    def initial_hyperstates(self) -> list[Hyperstate]:
        support = np.flatnonzero(self.ensemble.initial_dist > 0.0)
        return [Hyperstate(int(s), self.prior) for s in support]

    def with_backend(self, backend: str, resolution: int | None = None) -> "BamdpModel":
        return BamdpModel(
            self.ensemble,
            self.prior,
            backend=backend,
            resolution=resolution,
            max_hyperstates=self.max_hyperstates,
        )

    def digest(self) -> str:
        return model_digest(self)


def model_digest(model: BamdpModel) -> str:
    """Stable short hash of the ensemble, prior and horizon."""
    h = hashlib.sha256()
    e = model.ensemble
    for arr in (e.reward, e.hypotheses, e.initial_dist, model.prior.probs):
        h.update(str(arr.shape).encode())
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    h.update(str(e.horizon).encode())
    return h.hexdigest()[:16]


def bamdp_transition(model: BamdpModel, x: Hyperstate, a: int) -> list[tuple[Hyperstate, float]]:
    """Exact BAMDP successors of ``x`` under ``a``; zero-probability outcomes are omitted."""
    p = as_probs(x.belief)
    return [
        (Hyperstate(s_next, EpistemicState(post)), prob)
        for s_next, post, prob in successor_arrays(model.ensemble, p, int(x.state), a)
    ]


def enumerate_reachable_hyperstates(model: BamdpModel, max_hyperstates: int | None = None) -> ReachableLayers:
    """Exact all-actions reachable layers, expanded lazily up to the horizon."""
    ensemble = model.ensemble
    cap = max_hyperstates if max_hyperstates is not None else model.max_hyperstates
    initial = [(x.state, x.belief.probs) for x in model.initial_hyperstates()]
    return ReachableLayers(
        ensemble.num_states,
        ensemble.num_actions,
        ensemble.horizon,
        initial,
        lambda s, p, a: successor_arrays(ensemble, p, s, a),
        max_hyperstates=cap,
    )


def build_quantized_space(ensemble: MdpEnsemble, resolution: int, max_hyperstates: int | None = None) -> QuantizedGrid:
    return QuantizedGrid(ensemble, resolution, max_hyperstates)


def snap_to_grid(belief, space: QuantizedGrid) -> EpistemicState:
    """Nearest lattice point in total variation; ties to the lexicographically smallest."""
    g = space.snap_index(as_probs(belief))
    return EpistemicState(space.grid[g])
