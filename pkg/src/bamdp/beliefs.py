"""Epistemic states: points of the probability simplex over hypotheses."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from bamdp.errors import ValidationError

BELIEF_TOL = 1e-9


class EpistemicState:
    """A normalized belief over a finite hypothesis set.

    Equality is approximate (per-coordinate tolerance ``BELIEF_TOL``), so
    instances are deliberately unhashable.
    """

    __slots__ = ("probs",)

    def __init__(self, probs):
        arr = np.array(probs, dtype=float).reshape(-1)
        if arr.size == 0:
            raise ValidationError("belief must have at least one coordinate")
        if np.any(arr < -BELIEF_TOL) or not np.all(np.isfinite(arr)):
            raise ValidationError("belief entries must be finite and nonnegative")
        arr = np.clip(arr, 0.0, None)
        total = arr.sum()
        if total <= 0.0:
            raise ValidationError("belief must have positive mass")
        if total != 1.0:
            arr = arr / total
        arr.setflags(write=False)
        self.probs = arr

    @classmethod
    def dirac(cls, index: int, dim: int) -> "EpistemicState":
        arr = np.zeros(dim)
        arr[index] = 1.0
        return cls(arr)

    @classmethod
    def uniform(cls, dim: int) -> "EpistemicState":
        return cls(np.full(dim, 1.0 / dim))

    def __len__(self):
        return self.probs.size

    def __iter__(self):
        return iter(self.probs.tolist())

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __eq__(self, other):
        if isinstance(other, EpistemicState):
            other = other.probs
        other = np.asarray(other, dtype=float)
        return other.shape == self.probs.shape and bool(
            np.all(np.abs(other - self.probs) <= BELIEF_TOL)
        )

    __hash__ = None

    def __repr__(self):
        return f"EpistemicState({np.array2string(self.probs, precision=6, separator=', ')})"

    def is_dirac(self, tol: float = 1e-12) -> bool:
        return bool(self.probs.max() >= 1.0 - tol)


class Hyperstate(NamedTuple):
    """A physical state joined with an epistemic state."""

    state: int
    belief: EpistemicState


def as_probs(belief) -> np.ndarray:
    """View any belief-like input as a float array without renormalizing."""
    if isinstance(belief, EpistemicState):
        return belief.probs
    return np.asarray(belief, dtype=float)


def approx_equal(p: np.ndarray, q: np.ndarray, tol: float = BELIEF_TOL) -> bool:
    return bool(np.all(np.abs(p - q) <= tol))


class BeliefIndex:
    """Deduplicates (state, belief) pairs up to a per-coordinate tolerance.

    Beliefs are bucketed on a coarse 1e-6 lattice; only coordinates sitting
    close to a bucket boundary trigger a look at the neighbouring bucket.
    """

    _BUCKET = 1e-6

    def __init__(self, tol: float = BELIEF_TOL):
        self.tol = tol
        self._buckets: dict[tuple, list[int]] = {}
        self.states: list[int] = []
        self.beliefs: list[np.ndarray] = []

    def __len__(self):
        return len(self.states)

    def _keys(self, s: int, p: np.ndarray):
        scaled = p / self._BUCKET
        base = np.floor(scaled)
        frac = scaled - base
        base = base.astype(np.int64)
        keys = [(s, *base.tolist())]
        margin = self.tol / self._BUCKET
        for k in np.flatnonzero((frac < margin) | (frac > 1.0 - margin)):
            shift = -1 if frac[k] < margin else 1
            for key in list(keys):
                alt = list(key)
                alt[k + 1] += shift
                keys.append(tuple(alt))
        return keys

    def find(self, s: int, p: np.ndarray) -> int | None:
        for key in self._keys(s, p):
            for idx in self._buckets.get(key, ()):
                if approx_equal(self.beliefs[idx], p, self.tol):
                    return idx
        return None

    def add(self, s: int, p: np.ndarray) -> tuple[int, bool]:
        """Return (index, inserted) for the pair, inserting it if new."""
        found = self.find(s, p)
        if found is not None:
            return found, False
        idx = len(self.states)
        self.states.append(int(s))
        self.beliefs.append(p)
        self._buckets.setdefault(self._keys(s, p)[0], []).append(idx)
        return idx, True
