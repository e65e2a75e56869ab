"""Measured gaps against the approximation and performance-loss bounds.

Every check solves the ground BAMDP exactly on its reachable layers and
measures gaps only there. Reports carry one row per timestep.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from bamdp.abstraction import (
    EpistemicAbstraction,
    LiftedValues,
    abstract_value_iteration,
    build_lattice_cover,
    induce_abstract_bamdp,
)
from bamdp.errors import ValidationError
from bamdp.informed import solve_hypotheses
from bamdp.planning import bamdp_value_iteration, evaluate_bamdp_policy, greedy_policy_from_values

GAP_TOL = 1e-9
PROPS = ("approx_error", "greedy_loss", "perf_loss", "voi")


@dataclass
class TimestepBound:
    h: int
    gap: float
    bound: float
    ratio: float
    vacuous: bool


def _ratio(gap, bound):
    if bound > 0:
        return gap / bound
    return 0.0 if gap <= GAP_TOL else math.inf


@dataclass
class BoundReport:
    proposition: str
    per_timestep: list
    horizon: int
    instance_digest: str = ""
    delta: float | None = None
    epsilon_used: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(t.gap <= t.bound + GAP_TOL for t in self.per_timestep)

    @property
    def max_ratio(self) -> float:
        return max((t.ratio for t in self.per_timestep), default=0.0)

    def failures(self):
        return [t for t in self.per_timestep if t.gap > t.bound + GAP_TOL]

    def to_dict(self) -> dict:
        return {
            "proposition": self.proposition,
            "pass": self.passed,
            "max_ratio": self.max_ratio if math.isfinite(self.max_ratio) else "inf",
            "delta": self.delta,
            "epsilon_used": self.epsilon_used,
            "epsilon_kind": "matched-pairs" if self.epsilon_used is not None else None,
            "instance_digest": self.instance_digest,
            "per_timestep": [
                {"h": t.h, "gap": t.gap, "bound": t.bound, "ratio": t.ratio if math.isfinite(t.ratio) else "inf", "vacuous": t.vacuous}
                for t in self.per_timestep
            ],
            "meta": self.meta,
        }

    def csv_rows(self):
        for t in self.per_timestep:
            yield [self.proposition, t.h, "" if self.delta is None else repr(self.delta), repr(t.gap), repr(t.bound), repr(t.ratio), int(t.vacuous)]


CSV_HEADER = ["prop", "h", "delta", "gap", "bound", "ratio", "vacuous"]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerows(r.csv_rows())
    return buf.getvalue()


def _make_rows(gaps, bound_fn, H):
    rows = []
    for h, gap in enumerate(gaps, start=1):
        b = float(bound_fn(h))
        rows.append(TimestepBound(h, float(gap), b, _ratio(gap, b), b >= H - h + 1))
    return rows


def layer_values(space, h, v) -> np.ndarray:
    layer = space.layer(h)
    return np.array([v(h, int(layer.states[i]), layer.beliefs[i]) for i in range(len(layer))])


def _sup_gap(space, table_a, v_b) -> list[float]:
    """max over each reachable layer of |table_a - v_b|."""
    gaps = []
    for h in range(1, space.horizon + 1):
        va = table_a.v[h - 1]
        vb = v_b.v[h - 1] if hasattr(v_b, "v") else layer_values(space, h, v_b)
        gaps.append(float(np.max(np.abs(va - vb))) if len(va) else 0.0)
    return gaps


@dataclass
class GroundSolution:
    model: object
    table: object

    @classmethod
    def of(cls, model):
        return cls(model, bamdp_value_iteration(model, model.reachable))


def lifted_abstract_values(model, abstraction: EpistemicAbstraction, abstract=None):
    """Full-horizon optimal abstract values, lifted to ground hyperstates."""
    abstract = induce_abstract_bamdp(model, abstraction) if abstract is None else abstract
    table = abstract_value_iteration(abstract)
    return LiftedValues(abstraction, table), abstract


def check_approx_error_bound(model, abstraction: EpistemicAbstraction, ground=None, lifted=None) -> BoundReport:
    """|V*_h(x) - V*_phi,h(phi(x))| against 2 delta (H-h)(H-h+1)."""
    ground = GroundSolution.of(model) if ground is None else ground
    lifted = lifted_abstract_values(model, abstraction)[0] if lifted is None else lifted
    H, d = model.horizon, abstraction.delta
    gaps = _sup_gap(model.reachable, ground.table, lifted)
    rows = _make_rows(gaps, lambda h: 2 * d * (H - h) * (H - h + 1), H)
    return BoundReport("approx_error", rows, H, model.digest(), delta=d, meta={"weighting": abstraction.weighting})


def check_greedy_loss_bound(model, v, ground=None, delta=None) -> BoundReport:
    """Loss of the greedy policy w.r.t. ``v`` against 2 eps (H-h+1).

    eps is measured as max over reachable (h, s, p) of |V*_h - v_h|, i.e. on
    matched pairs only.
    """
    ground = GroundSolution.of(model) if ground is None else ground
    space = model.reachable
    H = model.horizon
    eps = max(_sup_gap(space, ground.table, v))
    policy = greedy_policy_from_values(model, v, space)
    evaluated = evaluate_bamdp_policy(model, policy, space)
    gaps = _sup_gap(space, ground.table, evaluated)
    rows = _make_rows(gaps, lambda h: 2 * eps * (H - h + 1), H)
    return BoundReport("greedy_loss", rows, H, model.digest(), delta=delta, epsilon_used=eps)


def check_performance_loss_bound(model, abstraction: EpistemicAbstraction, ground=None, lifted=None) -> BoundReport:
    """Loss of the greedy policy w.r.t. lifted abstract values against 4 delta (H-h)(H-h+1)^2."""
    ground = GroundSolution.of(model) if ground is None else ground
    lifted = lifted_abstract_values(model, abstraction)[0] if lifted is None else lifted
    space = model.reachable
    H, d = model.horizon, abstraction.delta
    policy = greedy_policy_from_values(model, lifted, space)
    evaluated = evaluate_bamdp_policy(model, policy, space)
    gaps = _sup_gap(space, ground.table, evaluated)
    rows = _make_rows(gaps, lambda h: 4 * d * (H - h) * (H - h + 1) ** 2, H)
    return BoundReport("perf_loss", rows, H, model.digest(), delta=d, meta={"weighting": abstraction.weighting})


def check_value_of_information(model, ground=None) -> BoundReport:
    """Bayes-optimal value never beats the prior-weighted omniscient value.

    The single row holds gap = max_s (V*_1(s, prior) - sum_theta prior V*_theta,1(s))
    against bound 0.
    """
    ground = GroundSolution.of(model) if ground is None else ground
    e = model.ensemble
    values, _ = solve_hypotheses(e, e.horizon)
    omniscient = sum(model.prior.probs[k] * values[k][0] for k in range(e.num_hypotheses))
    diffs = [ground.table.value(1, x.state, x.belief.probs) - omniscient[x.state] for x in model.initial_hyperstates()]
    gap = float(max(diffs))
    row = TimestepBound(1, gap, 0.0, _ratio(gap, 0.0), False)
    return BoundReport("voi", [row], e.horizon, model.digest(), meta={"omniscient": omniscient.tolist()})


def _predicted(table, model):
    tag = table.algorithm_tag
    space = table.space
    A = model.ensemble.num_actions
    H = model.horizon
    K, S = model.ensemble.num_hypotheses, model.ensemble.num_states
    if tag == "naive":
        return sum(space.layer_sizes()) * A, 0
    if tag in ("informed", "abstract"):
        I = table.meta["info_horizon"]
        return sum(space.layer_sizes(I - 1)) * A if I > 1 else 0, K * S * A * (H - I + 1)
    return None, None


def planning_complexity_report(tables, model) -> dict:
    """Backup counts next to the analytic predictions, per table.

    On the grid backend the naive count is |X| |A| H and the informed count
    is |X| |A| (I-1) BAMDP backups plus |Theta| |S| |A| (H-I+1) MDP backups.
    """
    digest = model.digest()
    rows = []
    for t in tables:
        if t.meta.get("digest", digest) != digest:
            raise ValidationError("complexity report mixes tables from different instances")
        bamdp_pred, mdp_pred = _predicted(t, model)
        rows.append(
            {
                "algorithm": t.algorithm_tag,
                "backend": t.meta.get("backend", getattr(t.space, "backend", "")),
                "backup_count": t.backup_count,
                "bamdp_backups": t.bamdp_backups,
                "mdp_backups": t.mdp_backups,
                "predicted_bamdp_backups": bamdp_pred,
                "predicted_mdp_backups": mdp_pred,
                "matches": bamdp_pred == t.bamdp_backups and mdp_pred == t.mdp_backups,
                "layer_sizes": t.space.layer_sizes(),
                "info_horizon": t.meta.get("info_horizon"),
            }
        )
    return {"digest": digest, "horizon": model.horizon, "tables": rows}


@lru_cache(maxsize=64)
def cached_lattice_cover(num_hypotheses: int, delta: float, seed: int = 0):
    return build_lattice_cover(num_hypotheses, delta, seed=seed)


def reachable_beliefs(model) -> np.ndarray:
    space = model.reachable
    return np.vstack([space.layer(h).beliefs for h in range(1, space.horizon + 1)])


def make_abstraction(model, cover, weighting: str) -> EpistemicAbstraction:
    """Cover plus weighting; uniform weighting samples reachable beliefs and the centers."""
    if weighting == "center":
        return EpistemicAbstraction(cover, "center")
    samples = np.vstack([reachable_beliefs(model), cover.centers])
    return EpistemicAbstraction(cover, "uniform", samples)


def sweep_bounds(model, deltas, weightings=("center", "uniform"), props=("approx_error", "perf_loss", "greedy_loss"), seed=0):
    """All requested bound reports for every (delta, weighting) pair on one instance."""
    ground = GroundSolution.of(model)
    K = model.ensemble.num_hypotheses
    reports = []
    for delta in deltas:
        cover = cached_lattice_cover(K, float(delta), seed)
        for w in weightings:
            abstraction = make_abstraction(model, cover, w)
            lifted, _ = lifted_abstract_values(model, abstraction)
            for prop in props:
                if prop == "approx_error":
                    r = check_approx_error_bound(model, abstraction, ground, lifted)
                elif prop == "perf_loss":
                    r = check_performance_loss_bound(model, abstraction, ground, lifted)
                elif prop == "greedy_loss":
                    r = check_greedy_loss_bound(model, lifted, ground, delta=abstraction.delta)
                    r.meta["weighting"] = w
                else:
                    raise ValidationError(f"unknown proposition {prop!r}")
                reports.append(r)
    return reports


def parse_sweep(spec: str) -> list[float]:
    """'a:b:n' -> n evenly spaced values from a to b inclusive."""
    try:
        a, b, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError as err:
        raise ValidationError(f"sweep must look like a:b:n, got {spec!r}") from err
    if n < 1:
        raise ValidationError("sweep needs at least one point")
    if n == 1:
        return [a]
    return [round(float(x), 12) for x in np.linspace(a, b, n)]
