"""Ordinal ranking of patches with a one-slack structured SVM.

Patches are ordered by their loss against the bar template; the trainer
learns a weight vector whose inner-product scores reproduce that order.  All
pairwise ranking constraints share a single slack variable and are folded
into one aggregated constraint per cutting-plane round, keeping each round's
constraint generation linear in the number of pairs.

The margin a violated pair must clear is 1 by default ("unit"), matching the
pair activation rule s_i - s_j < 1.  A "loss" mode rescales both the margin
and the activation threshold by the loss gap of the pair.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

PAIR_GAP_MIN = 1e-6
DUAL_TOLERANCE = 1e-8

MODEL_MAGIC = b"CRSV"
MODEL_VERSION = 1


@dataclass
class TrainStats:
    iterations: int = 0
    slack: float = 0.0
    objective: float = 0.0
    lower_bound: float = 0.0
    converged: bool = True
    history: list = field(default_factory=list)


@dataclass
class RankingModel:
    """Linear scorer with optional per-dimension standardization."""

    w: np.ndarray
    C: float = 0.1
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    stats: TrainStats = field(default_factory=TrainStats)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        n = self.w.shape[0]
        if self.mean is None:
            self.mean = np.zeros(n)
        if self.std is None:
            self.std = np.ones(n)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)

    @property
    def dim(self) -> int:
        return self.w.shape[0]


def score(model: RankingModel, z: np.ndarray) -> float:
    """Inner-product ranking score of one feature vector."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != model.w.shape:
        raise ValueError(f"feature length {z.shape} does not match model {model.w.shape}")
    return float(np.dot(model.w, (z - model.mean) / model.std))


def score_many(model: RankingModel, Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape[1] != model.dim:
        raise ValueError(f"feature length {Z.shape[1]} does not match model {model.dim}")
    return (Z - model.mean) / model.std @ model.w


def build_pairs(losses: np.ndarray, gap_min: float = PAIR_GAP_MIN) -> np.ndarray:
    """All ordered index pairs (i, j) whose losses differ by more than gap_min.

    The first element of each pair is the lower-loss (better) sample.  Pairs
    with nearly equal losses are dropped so both margin modes stay
    well-conditioned.
    """
    losses = np.asarray(losses, dtype=np.float64)
    ii, jj = np.nonzero(losses[:, None] < losses[None, :] - gap_min)
    return np.column_stack([ii, jj])


@dataclass
class AggregatedConstraint:
    """One cutting plane: coeffs . w >= offset - slack."""

    coeffs: np.ndarray
    offset: float
    active_pairs: int

    def violation(self, w: np.ndarray, slack: float) -> float:
        return self.offset - float(np.dot(self.coeffs, w)) - slack


def find_most_violated(w: np.ndarray, Z: np.ndarray, losses: np.ndarray,
                       pairs: np.ndarray, margin_mode: str = "unit") -> AggregatedConstraint:
    """Aggregate the pairs the current scores fail to separate.

    A pair is active when its score gap falls short of its margin (1, or the
    loss gap in "loss" mode); the aggregated constraint averages active-pair
    feature differences and margins over the full pair set.
    """
    Z = np.asarray(Z, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n_pairs = len(pairs)
    if n_pairs == 0:
        return AggregatedConstraint(np.zeros(Z.shape[1]), 0.0, 0)
    scores = Z @ w
    ii = pairs[:, 0]
    jj = pairs[:, 1]
    if margin_mode == "unit":
        margins = np.ones(n_pairs)
    elif margin_mode == "loss":
        margins = losses[jj] - losses[ii]
    else:
        raise ValueError(f"unknown margin mode: {margin_mode!r}")
    active = scores[ii] - scores[jj] < margins
    if not active.any():
        return AggregatedConstraint(np.zeros(Z.shape[1]), 0.0, 0)
    coeffs = (Z[ii[active]] - Z[jj[active]]).sum(axis=0) / n_pairs
    offset = float(margins[active].sum()) / n_pairs
    return AggregatedConstraint(coeffs, offset, int(active.sum()))


def _solve_dual(A: np.ndarray, b: np.ndarray, C: float,
                tol: float = DUAL_TOLERANCE, max_passes: int = 20000):
    """Dual of the cached-constraint QP by pairwise coordinate ascent.

    Maximize  sum_k alpha_k b_k - 0.5 ||sum_k alpha_k A_k||^2  subject to
    alpha >= 0 and sum alpha <= C.  The budget not spent on real constraints
    sits on a dummy zero constraint, so every update moves mass between two
    coordinates and stays feasible.
    """
    m = A.shape[0]
    gram = A @ A.T
    alpha = np.zeros(m)
    spare = C
    w = np.zeros(A.shape[1])

    def grad(k):
        return b[k] - float(np.dot(gram[k], alpha))

    for _ in range(max_passes):
        best_gain = 0.0
        for k in range(m + 1):
            for l in range(m + 1):
                if k == l:
                    continue
                g_k = grad(k) if k < m else 0.0
                g_l = grad(l) if l < m else 0.0
                g = g_k - g_l
                if g <= 0.0:
                    continue
                if k < m and l < m:
                    curv = gram[k, k] - 2.0 * gram[k, l] + gram[l, l]
                elif k < m:
                    curv = gram[k, k]
                else:
                    curv = gram[l, l]
                cap = alpha[l] if l < m else spare
                if cap <= 0.0:
                    continue
                step = cap if curv <= 0.0 else min(g / curv, cap)
                gain = g * step - 0.5 * curv * step * step
                if gain <= 0.0:
                    continue
                if k < m:
                    alpha[k] += step
                else:
                    spare += step
                if l < m:
                    alpha[l] -= step
                else:
                    spare -= step
                best_gain = max(best_gain, gain)
        # stop on the primal-dual gap: it bounds how far the returned point
        # can sit from the cached-QP optimum, which per-step gains do not
        w = A.T @ alpha
        slack = max(0.0, float(np.max(b - A @ w)) if m else 0.0)
        dual_value = float(np.dot(alpha, b)) - 0.5 * float(np.dot(w, w))
        primal_value = 0.5 * float(np.dot(w, w)) + C * slack
        if best_gain == 0.0 or primal_value - dual_value <= tol * max(1.0, C):
            break
    w = A.T @ alpha
    slack = max(0.0, float(np.max(b - A @ w)) if m else 0.0)
    dual_value = float(np.dot(alpha, b)) - 0.5 * float(np.dot(w, w))
    return w, slack, dual_value


def train(Z: np.ndarray, losses: np.ndarray, C: float = 0.1,
          epsilon: float = 1e-3, max_iter: int = 1000,
          margin_mode: str = "unit",
          pairs: np.ndarray | None = None) -> RankingModel:
    """Cutting-plane training of the one-slack ranking SVM.

    Each round adds the currently most violated aggregated constraint and
    re-solves the quadratic program over all cached constraints; training
    stops when the new constraint is violated by less than ``epsilon``.

    Parameters
    ----------
    Z : ndarray, shape (K, N)
        Feature vectors, one row per sample.
    losses : ndarray, shape (K,)
        Template loss of each sample in [0, 1]; lower ranks higher.
    C : float
        Slack penalty.
    epsilon : float
        Convergence tolerance on constraint violation.
    margin_mode : {"unit", "loss"}
        Margin each ordered pair must clear.
    pairs : ndarray, optional
        Precomputed ordered pair set; defaults to all sufficiently separated
        loss pairs.
    """
    Z = np.asarray(Z, dtype=np.float64)
    losses = np.asarray(losses, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != losses.shape[0]:
        raise ValueError("need one loss per feature row")
    if Z.shape[0] < 2:
        raise ValueError("need at least two samples")
    if C <= 0.0:
        raise ValueError("C must be positive")
    if pairs is None:
        pairs = build_pairs(losses)
    if len(pairs) == 0:
        raise ValueError("no ordered pairs: all losses are (nearly) equal")

    n = Z.shape[1]
    w = np.zeros(n)
    slack = 0.0
    cached_A: list[np.ndarray] = []
    cached_b: list[float] = []
    stats = TrainStats(converged=False)
    lower_bound = 0.0

    for iteration in range(1, max_iter + 1):
        constraint = find_most_violated(w, Z, losses, pairs, margin_mode)
        stats.iterations = iteration
        if constraint.violation(w, slack) < epsilon:
            stats.converged = True
            break
        cached_A.append(constraint.coeffs)
        cached_b.append(constraint.offset)
        w, slack, lower_bound = _solve_dual(np.array(cached_A), np.array(cached_b), C)
        stats.history.append(lower_bound)
    stats.slack = slack
    stats.objective = 0.5 * float(np.dot(w, w)) + C * slack
    stats.lower_bound = lower_bound
    return RankingModel(w=w, C=C, stats=stats)


@dataclass
class ModelBundle:
    """A ranking model plus the patch geometry it was trained with."""

    model: RankingModel
    side: int
    thickness: int
    angles: tuple[float, ...]


def write_model(path, bundle: ModelBundle) -> None:
    """Serialize a model bundle in the versioned binary format.

    Layout (little-endian): magic "CRSV", u32 version, u32 N, f64 C,
    f64[N] w, f64[N] mean, f64[N] std, u32 patch side, u32 thickness,
    u32 angle count, f64[angles].
    """
    m = bundle.model
    n = m.dim
    parts = [
        MODEL_MAGIC,
        struct.pack("<II", MODEL_VERSION, n),
        struct.pack("<d", m.C),
        np.ascontiguousarray(m.w, dtype="<f8").tobytes(),
        np.ascontiguousarray(m.mean, dtype="<f8").tobytes(),
        np.ascontiguousarray(m.std, dtype="<f8").tobytes(),
        struct.pack("<III", bundle.side, bundle.thickness, len(bundle.angles)),
        np.ascontiguousarray(bundle.angles, dtype="<f8").tobytes(),
    ]
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_model(path) -> ModelBundle:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MODEL_MAGIC:
        raise ValueError(f"not a ranking model file: {path}")
    version, n = struct.unpack_from("<II", blob, 4)
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    off = 12
    (C,) = struct.unpack_from("<d", blob, off)
    off += 8
    def vec(count):
        nonlocal off
        out = np.frombuffer(blob, dtype="<f8", count=count, offset=off).astype(np.float64)
        off += 8 * count
        return out
    w = vec(n)
    mean = vec(n)
    std = vec(n)
    side, thickness, n_angles = struct.unpack_from("<III", blob, off)
    off += 12
    angles = tuple(float(a) for a in vec(n_angles))
    model = RankingModel(w=w, C=C, mean=mean, std=std)
    return ModelBundle(model=model, side=side, thickness=thickness, angles=angles)
