"""Built-in BAMDP families and the JSON problem-file codec."""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from bamdp.errors import ProblemFileError, ValidationError
from bamdp.model import BamdpModel, MdpEnsemble

PLUS, STAY = 0, 1  # chain action labels "+" and "o"


def _chain_reward(reward_spec: str, S: int, H: int) -> np.ndarray:
    R = np.zeros((S, 2))
    if reward_spec == "zero":
        return R
    if reward_spec == "increment_bonus":
        R[:, PLUS] = 1.0
        return R
    if reward_spec == "height":
        R[:, :] = (np.arange(S) / H)[:, None]
        return R
    raise ValidationError(f"unknown reward_spec {reward_spec!r} (zero, increment_bonus, height)")


def make_bernoulli_chain(q: float = 0.8, horizon: int = 3, reward_spec: str = "zero", **kw) -> BamdpModel:
    """Two-hypothesis counter chain on states 0..H, absorbing at H.

    Under hypothesis 0, "+" increments with probability q and "o" with
    probability 1-q; hypothesis 1 swaps the two actions. The counter starts
    at 0 and the prior is uniform.
    """
    q = float(q)
    if not 0.5 < q <= 1.0:
        raise ValidationError(f"chain parameter q must lie in (0.5, 1], got {q}")
    H = int(horizon)
    S = H + 1
    T = np.zeros((2, S, 2, S))
    for k in range(2):
        for s in range(S):
            if s == H:
                T[k, s, :, s] = 1.0
                continue
            for a in range(2):
                up = q if (a == PLUS) == (k == 0) else 1.0 - q
                T[k, s, a, s + 1] += up
                T[k, s, a, s] += 1.0 - up
    initial = np.zeros(S)
    initial[0] = 1.0
    ens = MdpEnsemble(_chain_reward(reward_spec, S, H), T, initial, H)
    return BamdpModel(ens, **kw)


def two_chain_bits(num_stages: int) -> np.ndarray:
    """Bit table (K, N): row 0 is all ones, row n flips bit n."""
    N = num_stages
    bits = np.ones((N + 1, N), dtype=int)
    for n in range(1, N + 1):
        bits[n, n - 1] = 0
    return bits


def check_two_chain_bits(bits: np.ndarray) -> None:
    """At every stage exactly one hypothesis disagrees with all the others."""
    K, N = bits.shape
    for n in range(N):
        col = bits[:, n]
        ones = int(col.sum())
        if K == 2:
            ok = ones == 1
        else:
            ok = ones in (1, K - 1)
        if not ok:
            raise ValidationError(f"stage {n + 1}: hypotheses must differ in exactly one bit")


def make_two_chain(num_stages: int, horizon: int | None = None, bits=None, **kw) -> BamdpModel:
    """Start state 0 plus upper/lower chains of length N (upper_n = 2n-1, lower_n = 2n).

    At stage n a hypothesis with bit 1 sends action 0 to upper_n and action 1
    to lower_n; bit 0 swaps them. The final two states are absorbing, rewards
    are zero and the prior is uniform. The default horizon N+1 leaves room
    for all N observations.
    """
    N = int(num_stages)
    if N < 1:
        raise ValidationError("two-chain needs at least one stage")
    bits = two_chain_bits(N) if bits is None else np.asarray(bits, dtype=int)
    check_two_chain_bits(bits)
    K = bits.shape[0]
    S = 2 * N + 1
    H = N + 1 if horizon is None else int(horizon)
    T = np.zeros((K, S, 2, S))
    for k in range(K):
        for n in range(1, N + 1):
            sources = [0] if n == 1 else [2 * n - 3, 2 * n - 2]
            upper, lower = 2 * n - 1, 2 * n
            for s in sources:
                if bits[k, n - 1]:
                    T[k, s, 0, upper] = T[k, s, 1, lower] = 1.0
                else:
                    T[k, s, 0, lower] = T[k, s, 1, upper] = 1.0
        for s in (2 * N - 1, 2 * N):
            T[k, s, :, s] = 1.0
    initial = np.zeros(S)
    initial[0] = 1.0
    ens = MdpEnsemble(np.zeros((S, 2)), T, initial, H)
    return BamdpModel(ens, **kw)


def make_random_bamdp(
    seed: int,
    num_states: int = 3,
    num_actions: int = 2,
    num_hypotheses: int = 2,
    horizon: int = 3,
    determinism: float = 0.0,
    **kw,
) -> BamdpModel:
    """Seeded instance: Dirichlet(1) rows blended toward random one-hot rows."""
    if min(num_states, num_actions, num_hypotheses, horizon) < 1:
        raise ValidationError("all sizes must be at least 1")
    if not 0.0 <= determinism <= 1.0:
        raise ValidationError("determinism must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    K, S, A = num_hypotheses, num_states, num_actions
    rows = rng.dirichlet(np.ones(S), size=(K, S, A))
    det = np.eye(S)[rng.integers(S, size=(K, S, A))]
    T = (1.0 - determinism) * rows + determinism * det
    T /= T.sum(axis=-1, keepdims=True)
    R = rng.uniform(size=(S, A))
    ens = MdpEnsemble(R, T, np.full(S, 1.0 / S), horizon)
    return BamdpModel(ens, **kw)


def make_separating_bamdp(seed: int, num_states: int = 3, num_actions: int = 2, num_hypotheses: int = 2, horizon: int = 5, **kw) -> BamdpModel:
    """Deterministic hypotheses that disagree on every (s, a): one step identifies theta."""
    K, S, A = num_hypotheses, num_states, num_actions
    if S < K:
        raise ValidationError("separating family needs at least as many states as hypotheses")
    rng = np.random.default_rng(seed)
    T = np.zeros((K, S, A, S))
    for s in range(S):
        for a in range(A):
            T[np.arange(K), s, a, rng.permutation(S)[:K]] = 1.0
    R = rng.uniform(size=(S, A))
    ens = MdpEnsemble(R, T, np.full(S, 1.0 / S), horizon)
    return BamdpModel(ens, **kw)


def _number(text: str) -> float:
    return float(Fraction(text))


_ENV_KEYS = {
    "chain": (make_bernoulli_chain, {"q": ("q", _number), "H": ("horizon", int), "reward": ("reward_spec", str)}),
    "twochain": (make_two_chain, {"N": ("num_stages", int), "H": ("horizon", int)}),
    "random": (
        make_random_bamdp,
        {
            "seed": ("seed", int),
            "S": ("num_states", int),
            "A": ("num_actions", int),
            "K": ("num_hypotheses", int),
            "H": ("horizon", int),
            "det": ("determinism", _number),
        },
    ),
    "separating": (
        make_separating_bamdp,
        {"seed": ("seed", int), "S": ("num_states", int), "A": ("num_actions", int), "K": ("num_hypotheses", int), "H": ("horizon", int)},
    ),
}


def parse_env_spec(spec: str, **kw) -> BamdpModel:
    """Build a model from ``name:key=val,...``, e.g. ``chain:q=4/5,H=3``."""
    name, _, rest = spec.partition(":")
    if name not in _ENV_KEYS:
        raise ValidationError(f"unknown env {name!r}; choose from {sorted(_ENV_KEYS)}")
    factory, keys = _ENV_KEYS[name]
    args = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq or key not in keys:
            raise ValidationError(f"bad env field {item!r} for {name}; known keys {sorted(keys)}")
        arg, conv = keys[key]
        try:
            args[arg] = conv(val)
        except (ValueError, ZeroDivisionError) as err:
            raise ValidationError(f"bad value for {key}: {val!r}") from err
    if name == "twochain" and "num_stages" not in args:
        raise ValidationError("twochain needs N")
    if name in ("random", "separating") and "seed" not in args:
        args["seed"] = 0
    return factory(**args, **kw)


def problem_dict(model: BamdpModel) -> dict:
    e = model.ensemble
    return {
        "num_states": e.num_states,
        "num_actions": e.num_actions,
        "horizon": e.horizon,
        "reward": e.reward.tolist(),
        "initial_dist": e.initial_dist.tolist(),
        "prior": model.prior.probs.tolist(),
        "hypotheses": e.hypotheses.tolist(),
    }


def save_problem(model: BamdpModel, path) -> None:
    # json writes the shortest repr of each float, which round-trips exactly
    with open(path, "w") as fh:
        json.dump(problem_dict(model), fh, indent=1)
        fh.write("\n")


def _field(doc, key, path):
    if key not in doc:
        raise ProblemFileError(f"{path}: missing field '{key}'")
    return doc[key]


def _array(doc, key, path, ndim):
    raw = _field(doc, key, path)
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError) as err:
        raise ProblemFileError(f"{path}: field '{key}' is not a numeric array ({err})") from err
    if arr.ndim != ndim:
        raise ProblemFileError(f"{path}: field '{key}' should have {ndim} dimensions, got {arr.ndim}")
    return arr


def problem_from_dict(doc, path="<problem>") -> BamdpModel:
    if not isinstance(doc, dict):
        raise ProblemFileError(f"{path}: top level must be an object")
    S = _field(doc, "num_states", path)
    A = _field(doc, "num_actions", path)
    H = _field(doc, "horizon", path)
    for key, val in (("num_states", S), ("num_actions", A), ("horizon", H)):
        if not isinstance(val, int) or isinstance(val, bool):
            raise ProblemFileError(f"{path}: field '{key}' must be an integer")
    reward = _array(doc, "reward", path, 2)
    initial = _array(doc, "initial_dist", path, 1)
    prior = _array(doc, "prior", path, 1)
    hyp = _array(doc, "hypotheses", path, 4)
    if reward.shape != (S, A):
        raise ValidationError(f"shape: reward is {reward.shape}, expected ({S}, {A})")
    if hyp.shape[1:] != (S, A, S):
        raise ValidationError(f"shape: hypotheses are {hyp.shape}, expected (K, {S}, {A}, {S})")
    if abs(prior.sum() - 1.0) > 1e-9 or np.any(prior < 0):
        raise ValidationError("prior-normalization: prior must be a probability vector")
    return BamdpModel(MdpEnsemble(reward, hyp, initial, H), prior)


def load_problem(path) -> BamdpModel:
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ProblemFileError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from err
    return problem_from_dict(doc, path)
