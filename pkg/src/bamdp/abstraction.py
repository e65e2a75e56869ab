"""Epistemic state abstraction: delta-covers of the belief simplex.

A cover is a finite set of centers that always contains the simplex
vertices. The abstraction maps a belief to its nearest center in total
variation (ties to the lexicographically smallest center), and the induced
abstract BAMDP runs on ``S x centers`` with stochastic belief transitions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from bamdp.beliefs import BeliefIndex, EpistemicState, as_probs
from bamdp.errors import AbstractHorizonInfinite, CoverTooFine, EmptyCell, ProblemFileError, ValidationError
from bamdp.info_horizon import abstract_information_horizon
from bamdp.informed import informed_backups
from bamdp.model import lattice_size, nearest_tv, simplex_lattice, successor_arrays
from bamdp.planning import BamdpValueTable, solve_space
from bamdp.spaces import FixedSpace, ReachableLayers

CERTIFY_SAMPLES = 100_000
DEFAULT_SEED = 0
MAX_CENTERS = 200_000


def tv_distance(p, q) -> float:
    p, q = as_probs(p), as_probs(q)
    if p.shape != q.shape:
        raise ValidationError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(0.5 * np.abs(p - q).sum())


def lattice_covering_radius(dim: int, resolution: int) -> float:
    """Exact TV covering radius of the resolution-m simplex lattice.

    Rounding a point to the lattice leaves fractional parts summing to an
    integer r <= min(m, K-1); the worst case spreads them evenly, giving an
    L1 gap of 2r(K-r)/K lattice units.
    """
    K, m = dim, resolution
    return max(r * (K - r) for r in range(0, min(m, K - 1) + 1)) / (K * m)


def _lexsorted(centers: np.ndarray) -> np.ndarray:
    return centers[np.lexsort(centers.T[::-1])]


@dataclass
class DeltaCover:
    """Cover centers (sorted lexicographically) with their certification record.

    ``certified_radius`` is the largest projection distance measured over the
    certification set: uniform simplex samples for ``certification ==
    "simplex"``, the construction candidates for ``"candidates"``.
    """

    delta: float
    centers: np.ndarray
    certified_radius: float = math.nan
    seed: int | None = DEFAULT_SEED
    certification: str = "simplex"
    resolution: int | None = None
    num_samples: int = 0
    # analytic covering radius when known (lattice covers)
    exact_radius: float | None = None

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float)
        if centers.ndim != 2 or len(centers) == 0:
            raise ValidationError("cover centers must be a nonempty list of belief vectors")
        if np.any(centers < 0) or np.any(np.abs(centers.sum(axis=1) - 1.0) > 1e-9):
            raise ValidationError("every cover center must be a probability vector")
        if not 0.0 < self.delta <= 1.0:
            raise ValidationError(f"delta must lie in (0, 1], got {self.delta}")
        centers = _lexsorted(centers)
        index = BeliefIndex()
        for c in centers:
            if not index.add(0, c)[1]:
                raise ValidationError(f"duplicate cover center {c.tolist()}")
        for k in range(centers.shape[1]):
            e = np.eye(centers.shape[1])[k]
            if index.find(0, e) is None:
                raise ValidationError(f"cover is missing basis vector e_{k}")
        self.centers = centers
        self.delta = float(self.delta)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def __len__(self):
        return len(self.centers)

    def project_many(self, beliefs) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-center indices and distances for a batch of beliefs."""
        return nearest_tv(np.atleast_2d(np.asarray(beliefs, dtype=float)), self.centers)

    def project_index(self, belief) -> int:
        return int(self.project_many(as_probs(belief)[None, :])[0][0])

    def vertex_indices(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.centers.max(axis=1) == 1.0)]

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "centers": self.centers.tolist(),
            "certified_radius": self.certified_radius,
            "seed": self.seed,
            "certification": self.certification,
            "resolution": self.resolution,
            "num_samples": self.num_samples,
            "exact_radius": self.exact_radius,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "DeltaCover":
        try:
            return cls(
                delta=float(doc["delta"]),
                centers=np.array(doc["centers"], dtype=float),
                certified_radius=float(doc.get("certified_radius", math.nan)),
                seed=doc.get("seed"),
                certification=doc.get("certification", "simplex"),
                resolution=doc.get("resolution"),
                num_samples=int(doc.get("num_samples", 0)),
                exact_radius=doc.get("exact_radius"),
            )
        except (KeyError, TypeError, ValueError) as err:
            if isinstance(err, ValidationError):
                raise
            raise ProblemFileError(f"malformed cover: {err}") from err

    @classmethod
    def load(cls, path) -> "DeltaCover":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as err:
                raise ProblemFileError(f"{path}: line {err.lineno} col {err.colno}: {err.msg}") from err
        return cls.from_dict(doc)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def from_centers(cls, centers, delta=None, seed=DEFAULT_SEED, num_samples=CERTIFY_SAMPLES) -> "DeltaCover":
        """Certify arbitrary centers (vertices added) against simplex samples."""
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        K = centers.shape[1]
        pts = np.vstack([centers, np.eye(K)])
        uniq = BeliefIndex()
        keep = [c for c in pts if uniq.add(0, c)[1]]
        cover = cls(delta=1.0, centers=np.array(keep), seed=seed, num_samples=num_samples)
        cover.certified_radius = certify_cover(cover, num_samples, seed)
        cover.delta = float(delta) if delta is not None else max(cover.certified_radius, 1e-12)
        return cover


def certification_points(dim: int, num_samples: int, seed: int | None) -> np.ndarray:
    """Uniform (Dirichlet(1)) samples of the simplex."""
    return np.random.default_rng(seed).dirichlet(np.ones(dim), size=num_samples)


def certify_cover(cover: DeltaCover, num_samples: int = CERTIFY_SAMPLES, seed: int | None = DEFAULT_SEED) -> float:
    """Largest TV distance from a certification point to its projected center."""
    pts = certification_points(cover.dim, num_samples, seed)
    return float(cover.project_many(pts)[1].max())


def build_lattice_cover(
    num_hypotheses: int,
    delta: float,
    seed: int | None = DEFAULT_SEED,
    num_samples: int = CERTIFY_SAMPLES,
    max_centers: int = MAX_CENTERS,
) -> DeltaCover:
    """Coarsest simplex lattice whose covering radius is at most ``delta``."""
    if not 0.0 < delta <= 1.0:
        raise ValidationError(f"delta must lie in (0, 1], got {delta}")
    K = num_hypotheses
    m = 1
    while lattice_covering_radius(K, m) > delta:
        m += 1
        if lattice_size(K, m) > max_centers:
            raise CoverTooFine(
                f"delta={delta} needs a lattice of resolution >= {m} "
                f"({lattice_size(K, m)} centers), above the cap of {max_centers}"
            )
    cover = DeltaCover(
        delta=delta,
        centers=simplex_lattice(K, m),
        seed=seed,
        certification="simplex",
        resolution=m,
        num_samples=num_samples,
        exact_radius=lattice_covering_radius(K, m),
    )
    cover.certified_radius = certify_cover(cover, num_samples, seed) if num_samples else cover.exact_radius
    return cover


def build_greedy_cover(candidates, delta: float) -> DeltaCover:
    """Farthest-point greedy cover of ``candidates``, seeded with the simplex vertices."""
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    if cand.size == 0:
        raise ValidationError("greedy cover needs at least one candidate")
    K = cand.shape[1]
    centers = [np.eye(K)[k] for k in range(K)]
    dist = nearest_tv(cand, np.array(centers))[1]
    while dist.max() > delta:
        j = int(np.argmax(dist))
        centers.append(cand[j].copy())
        dist = np.minimum(dist, 0.5 * np.abs(cand - cand[j]).sum(axis=1))
    cover = DeltaCover(
        delta=delta,
        centers=np.array(centers),
        seed=None,
        certification="candidates",
        num_samples=len(cand),
    )
    cover.certified_radius = float(cover.project_many(cand)[1].max())
    return cover


@dataclass
class EpistemicAbstraction:
    """Projection onto a cover plus the weighting used inside each cell.

    ``weighting="center"`` puts all weight on the cell's center;
    ``weighting="uniform"`` spreads it equally over the distinct ``samples``
    that project into the cell.
    """

    cover: DeltaCover
    weighting: str = "center"
    samples: np.ndarray | None = None
    _cells: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.weighting not in ("center", "uniform"):
            raise ValidationError(f"unknown weighting {self.weighting!r}")
        if self.weighting == "uniform":
            if self.samples is None:
                raise ValidationError("uniform weighting needs a sample set")
            uniq = BeliefIndex()
            samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
            self.samples = np.array([p for p in samples if uniq.add(0, p)[1]])

    @property
    def delta(self) -> float:
        return self.cover.delta

    def project(self, belief) -> EpistemicState:
        return EpistemicState(self.cover.centers[self.cover.project_index(belief)])

    def cells(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(representatives, weights) for every center, in center order."""
        if self._cells is None:
            C = len(self.cover)
            if self.weighting == "center":
                self._cells = [(self.cover.centers[c][None, :], np.ones(1)) for c in range(C)]
            else:
                owner = self.cover.project_many(self.samples)[0]
                cells = []
                for c in range(C):
                    reps = self.samples[owner == c]
                    cells.append((reps, np.full(len(reps), 1.0 / len(reps)) if len(reps) else np.zeros(0)))
                self._cells = cells
        return self._cells


def apply_abstraction(abstraction: EpistemicAbstraction, belief) -> EpistemicState:
    return abstraction.project(belief)


class AbstractBamdp:
    """Induced BAMDP on ``S x centers``; position of (s, c) is ``s * C + c``.

    ``transition[x][a]`` lists ``(x_next, probability)`` pairs.
    """

    def __init__(self, ensemble, abstraction, transition, initial, prior_center: int):
        self.ensemble = ensemble
        self.abstraction = abstraction
        self.transition = transition
        self.initial = initial
        self.prior_center = prior_center

    @property
    def centers(self) -> np.ndarray:
        return self.abstraction.cover.centers

    @property
    def reward(self) -> np.ndarray:
        return self.ensemble.reward

    @property
    def horizon(self) -> int:
        return self.ensemble.horizon

    @property
    def num_abstract_hyperstates(self) -> int:
        return self.ensemble.num_states * len(self.centers)

    def position(self, s: int, c: int) -> int:
        return s * len(self.centers) + c

    def successors(self, s: int, c: int, a: int) -> list[tuple[int, int, float]]:
        C = len(self.centers)
        return [(x // C, x % C, p) for x, p in self.transition[self.position(s, c)][a]]

    def full_space(self) -> FixedSpace:
        if not hasattr(self, "_full"):
            e = self.ensemble
            self._full = FixedSpace(e.num_states, e.num_actions, e.horizon, self.centers, self.successors)
        return self._full

    def reachable_space(self) -> ReachableLayers:
        if not hasattr(self, "_reach"):
            e = self.ensemble
            lookup = {tuple(c): i for i, c in enumerate(self.centers)}

            def successor(s, p, a):
                c = lookup[tuple(p)]
                return [(s2, self.centers[c2], prob) for s2, c2, prob in self.successors(s, c, a)]

            C = len(self.centers)
            initial = [(x // C, self.centers[x % C]) for x, _ in self.initial]
            self._reach = ReachableLayers(e.num_states, e.num_actions, e.horizon, initial, successor)
        return self._reach


def induce_abstract_bamdp(model, abstraction: EpistemicAbstraction) -> AbstractBamdp:
    """Abstract transitions: weight each cell's representatives, push them through the
    exact BAMDP transition, and project every successor belief onto the cover."""
    e = model.ensemble
    cover = abstraction.cover
    C, S, A = len(cover), e.num_states, e.num_actions
    cells = abstraction.cells()
    for c, (reps, _) in enumerate(cells):
        if len(reps) == 0:
            raise EmptyCell(f"no sample belief projects onto center {cover.centers[c].tolist()}")
    transition = [[None] * A for _ in range(S * C)]
    for s in range(S):
        for a in range(A):
            records = []  # (source center, weight, next state, posterior)
            for c, (reps, weights) in enumerate(cells):
                for p, w in zip(reps, weights):
                    for s_next, post, pred in successor_arrays(e, p, s, a):
                        records.append((c, w * pred, s_next, post))
            owners = cover.project_many(np.array([r[3] for r in records]))[0] if records else []
            acc = [dict() for _ in range(C)]
            for (c, mass, s_next, _), c_next in zip(records, owners):
                key = s_next * C + int(c_next)
                acc[c][key] = acc[c].get(key, 0.0) + mass
            for c in range(C):
                row = sorted(acc[c].items())
                total = sum(p for _, p in row)
                if abs(total - 1.0) > 1e-9:
                    raise ValidationError(f"abstract row ({s}, {c}, {a}) sums to {total}")
                transition[s * C + c][a] = [(x, p / total) for x, p in row]
    prior_center = cover.project_index(model.prior)
    initial = [(int(s) * C + prior_center, float(e.initial_dist[s])) for s in np.flatnonzero(e.initial_dist > 0)]
    return AbstractBamdp(e, abstraction, transition, initial, prior_center)


class LiftedValues:
    """Ground value query V_h(s, p) := V_phi,h(s, phi(p))."""

    def __init__(self, abstraction: EpistemicAbstraction, table: BamdpValueTable):
        self.abstraction = abstraction
        self.table = table

    def __call__(self, h: int, s: int, belief) -> float:
        c = self.abstraction.cover.project_index(belief)
        return self.table.value(h, s, self.abstraction.cover.centers[c])


def abstract_value_iteration(abstract: AbstractBamdp) -> BamdpValueTable:
    """Optimal abstract values on every abstract hyperstate at every timestep."""
    table = solve_space(abstract.full_space(), abstract.reward, "abstract-full")
    table.meta.update(num_centers=len(abstract.centers))
    return table


@dataclass
class AbstractPlan:
    abstract: AbstractBamdp
    table: BamdpValueTable
    info_horizon: int
    lifted: LiftedValues


def informed_abstract_value_iteration(model, abstraction: EpistemicAbstraction, abstract=None) -> AbstractPlan:
    """Informed value iteration on the induced abstract BAMDP.

    Backups run over the abstract reachable layers 1..I_phi-1; values at
    ground hyperstates come from the lifted query.
    """
    abstract = induce_abstract_bamdp(model, abstraction) if abstract is None else abstract
    ih = abstract_information_horizon(abstract)
    if not ih.finite:
        raise AbstractHorizonInfinite(
            f"abstract information horizon is infinite for delta={abstraction.delta} "
            f"({len(abstraction.cover)} centers); try a larger delta or a different cover"
        )
    space = abstract.reachable_space()
    I = int(ih.value)
    table = informed_backups(space, abstract.reward, abstract.ensemble, I, "abstract", np.arange(len(space.layer(1))))
    table.meta.update(
        abstract_info_horizon=I,
        num_centers=len(abstract.centers),
        num_abstract_hyperstates=abstract.num_abstract_hyperstates,
        weighting=abstraction.weighting,
        delta=abstraction.delta,
        digest=model.digest(),
    )
    return AbstractPlan(abstract, table, I, LiftedValues(abstraction, table))
