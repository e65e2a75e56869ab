"""Layered hyperstate spaces with sparse successor structure.

A space exposes, for each timestep ``h`` in ``1..H``, a finite layer of
hyperstates and, for ``h < H``, one CSR block per action mapping layer ``h``
onto layer ``h + 1``. Planners only ever talk to this interface, so the same
backward-induction code runs on exact reachable layers, on a quantized
simplex grid and on abstract BAMDPs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from bamdp.beliefs import BeliefIndex
from bamdp.errors import InconsistentSpace, SpaceExplosion

DEFAULT_MAX_HYPERSTATES = 10**7

# successor(s, belief, a) -> iterable of (next_state, next_belief, probability)
SuccessorFn = Callable[[int, np.ndarray, int], Sequence[tuple[int, np.ndarray, float]]]


def default_cap() -> int:
    return int(os.environ.get("BAMDP_MAX_HYPERSTATES", DEFAULT_MAX_HYPERSTATES))


@dataclass
class Transitions:
    """CSR block: successors of row ``i`` are ``cols[indptr[i]:indptr[i+1]]``."""

    indptr: np.ndarray
    cols: np.ndarray
    probs: np.ndarray

    @property
    def rows(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.indptr) - 1), np.diff(self.indptr))

    def row(self, i: int):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return list(zip(self.cols[lo:hi].tolist(), self.probs[lo:hi].tolist()))

    def expect(self, values: np.ndarray) -> np.ndarray:
        """Per-row expectation of ``values`` (indexed by next-layer position)."""
        n = len(self.indptr) - 1
        if len(self.cols) and self.cols.max() >= len(values):
            raise InconsistentSpace("successor index outside the next layer")
        return np.bincount(self.rows, weights=self.probs * values[self.cols], minlength=n)


def _csr(rows: list[list[tuple[int, float]]]) -> Transitions:
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    cols = np.array([j for r in rows for j, _ in r], dtype=np.int64)
    probs = np.array([p for r in rows for _, p in r], dtype=float)
    return Transitions(indptr, cols, probs)


@dataclass
class Layer:
    """Hyperstates of one timestep, in canonical (discovery) order."""

    states: np.ndarray
    beliefs: np.ndarray
    # (parent position in previous layer, action) of first discovery; -1 on layer 1
    parents: np.ndarray
    index: BeliefIndex = field(repr=False)

    def __len__(self):
        return len(self.states)

    def locate(self, s: int, belief: np.ndarray) -> int | None:
        return self.index.find(int(s), np.asarray(belief, dtype=float))


class HyperstateSpace:
    backend = "abstract-base"

    def __init__(self, num_states: int, num_actions: int, horizon: int):
        self.num_states = num_states
        self.num_actions = num_actions
        self.horizon = horizon

    def layer(self, h: int) -> Layer:
        raise NotImplementedError

    def transitions(self, h: int, a: int) -> Transitions:
        raise NotImplementedError

    def locate(self, h: int, s: int, belief) -> int | None:
        return self.layer(h).locate(s, belief)

    def layer_sizes(self, upto: int | None = None) -> list[int]:
        upto = self.horizon if upto is None else upto
        return [len(self.layer(h)) for h in range(1, upto + 1)]

    def successors(self, h: int, i: int, a: int) -> list[tuple[int, float]]:
        return self.transitions(h, a).row(i)


def _make_layer(states, beliefs, parents, index, dim) -> Layer:
    beliefs = np.array(beliefs, dtype=float).reshape(len(states), dim)
    return Layer(
        states=np.array(states, dtype=np.int64),
        beliefs=beliefs,
        parents=np.array(parents, dtype=np.int64).reshape(len(states), 2),
        index=index,
    )


class ReachableLayers(HyperstateSpace):
    """Exact per-timestep reachable sets, expanded lazily under all actions.

    Layer 1 holds the initial hyperstates; layer ``h + 1`` holds every
    positive-probability successor of layer ``h`` under every action.
    """

    backend = "reachable"

    def __init__(
        self,
        num_states: int,
        num_actions: int,
        horizon: int,
        initial: Sequence[tuple[int, np.ndarray]],
        successor: SuccessorFn,
        max_hyperstates: int | None = None,
    ):
        super().__init__(num_states, num_actions, horizon)
        self._successor = successor
        self.max_hyperstates = default_cap() if max_hyperstates is None else max_hyperstates
        self.dim = len(initial[0][1])
        index = BeliefIndex()
        for s, p in initial:
            index.add(s, np.asarray(p, dtype=float))
        self._total = len(index)
        self._check_cap(1)
        first = _make_layer(index.states, index.beliefs, [(-1, -1)] * len(index), index, self.dim)
        self._layers: list[Layer] = [first]
        self._trans: list[list[Transitions]] = []

    def _check_cap(self, h: int):
        if self._total > self.max_hyperstates:
            raise SpaceExplosion(
                f"layer {h} pushes the hyperstate count to {self._total}, "
                f"above the cap of {self.max_hyperstates}"
            )

    def _expand(self):
        h = len(self._layers)
        prev = self._layers[-1]
        index = BeliefIndex()
        parents: list[tuple[int, int]] = []
        per_action = [[] for _ in range(self.num_actions)]
        for i in range(len(prev)):
            s, p = int(prev.states[i]), prev.beliefs[i]
            for a in range(self.num_actions):
                row = []
                for s_next, p_next, prob in self._successor(s, p, a):
                    j, new = index.add(s_next, p_next)
                    if new:
                        parents.append((i, a))
                        self._total += 1
                    row.append((j, prob))
                per_action[a].append(_merge(row))
            if self._total > self.max_hyperstates:
                self._check_cap(h + 1)
        self._check_cap(h + 1)
        self._layers.append(_make_layer(index.states, index.beliefs, parents, index, self.dim))
        self._trans.append([_csr(rows) for rows in per_action])

    def layer(self, h: int) -> Layer:
        if not 1 <= h <= self.horizon:
            raise IndexError(f"timestep {h} outside 1..{self.horizon}")
        while len(self._layers) < h:
            self._expand()
        return self._layers[h - 1]

    def transitions(self, h: int, a: int) -> Transitions:
        if not 1 <= h < self.horizon:
            raise IndexError(f"no successor layer for timestep {h}")
        self.layer(h + 1)
        return self._trans[h - 1][a]

    def trace(self, h: int, i: int) -> list[dict]:
        """Action trace (one step per timestep) from layer 1 to hyperstate ``i`` of layer ``h``."""
        steps = []
        while h > 1:
            layer = self._layers[h - 1]
            parent, a = (int(x) for x in layer.parents[i])
            prev = self._layers[h - 2]
            steps.append(
                {
                    "h": h - 1,
                    "state": int(prev.states[parent]),
                    "action": a,
                    "next_state": int(layer.states[i]),
                }
            )
            h, i = h - 1, parent
        return steps[::-1]


def _merge(row: list[tuple[int, float]]) -> list[tuple[int, float]]:
    """Sum probabilities of repeated successor positions, keeping first-seen order."""
    if len({j for j, _ in row}) == len(row):
        return row
    acc: dict[int, float] = {}
    for j, p in row:
        acc[j] = acc.get(j, 0.0) + p
    return list(acc.items())


class FixedSpace(HyperstateSpace):
    """Every timestep shares the layer ``S x beliefs`` and one transition graph.

    Position of hyperstate ``(s, g)`` is ``s * G + g``; ``successor(s, g, a)``
    returns (next_state, next_belief_position, probability) triples.
    """

    backend = "fixed"

    def __init__(
        self,
        num_states: int,
        num_actions: int,
        horizon: int,
        beliefs: np.ndarray,
        successor: Callable[[int, int, int], Sequence[tuple[int, int, float]]],
    ):
        super().__init__(num_states, num_actions, horizon)
        self.beliefs = np.asarray(beliefs, dtype=float)
        G = len(self.beliefs)
        self._successor = successor
        index = BeliefIndex()
        for s in range(num_states):
            for g in range(G):
                index.add(s, self.beliefs[g])
        self._layer = _make_layer(
            np.repeat(np.arange(num_states), G),
            np.tile(self.beliefs, (num_states, 1)),
            [(-1, -1)] * (num_states * G),
            index,
            self.beliefs.shape[1],
        )
        self._trans: dict[int, Transitions] = {}

    @property
    def size(self) -> int:
        return len(self._layer)

    def position(self, s: int, g: int) -> int:
        return s * len(self.beliefs) + g

    def layer(self, h: int) -> Layer:
        if not 1 <= h <= self.horizon:
            raise IndexError(f"timestep {h} outside 1..{self.horizon}")
        return self._layer

    def transitions(self, h: int, a: int) -> Transitions:
        if not 1 <= h < self.horizon:
            raise IndexError(f"no successor layer for timestep {h}")
        if a not in self._trans:
            G = len(self.beliefs)
            rows = []
            for s in range(self.num_states):
                for g in range(G):
                    row = [(s2 * G + g2, p) for s2, g2, p in self._successor(s, g, a)]
                    rows.append(_merge(row))
            self._trans[a] = _csr(rows)
        return self._trans[a]
