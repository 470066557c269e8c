"""Exact t-SNE.

Conditional affinities come from a per-point bisection on the Gaussian
precision; the map is fitted by gradient descent on KL(P || Q) with a
Student-t Q, momentum, per-coordinate gains and early exaggeration.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.spatial.distance import pdist, squareform

from app.exceptions import ConfigError, DataError
from app.logger import logger
from app.tensor.random import STREAM_SUBSAMPLE, STREAM_TSNE, philox

KL_FLOOR = 1e-12
MIN_POINTS = 5


class TsneConfig(BaseModel):
    perplexity: float = Field(50.0, gt=1.0)
    iterations: int = Field(1500, ge=1)
    learning_rate: float = Field(200.0, gt=0.0)
    initial_momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch: int = Field(250, ge=0, description="Iteration at which momentum becomes final")
    exaggeration: float = Field(4.0, ge=1.0)
    exaggeration_iters: int = Field(100, ge=0)
    init_std: float = Field(1e-4, gt=0.0)
    min_gain: float = Field(0.01, gt=0.0)
    seed: int = 0
    log_every: int = Field(100, ge=1)


class LatentSet(BaseModel):
    """Pre-head latent vectors with their synthesizer names."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    X: np.ndarray
    labels: List[str]
    paths: List[str] = Field(default_factory=list)
    known: List[bool] = Field(default_factory=list)

    @field_validator("X", mode="before")
    @classmethod
    def _finite_matrix(cls, value) -> np.ndarray:
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < MIN_POINTS:
            raise DataError(f"need an n x d latent matrix with n >= {MIN_POINTS}, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("latent matrix has non-finite rows")
        return arr


class TsneResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    Y: np.ndarray
    kl_trace: List[Tuple[int, float]] = Field(default_factory=list, description="(iteration, KL) samples")

    @property
    def kl_initial(self) -> float:
        return self.kl_trace[0][1]

    @property
    def kl_final(self) -> float:
        return self.kl_trace[-1][1]


def squared_distances(X: np.ndarray) -> np.ndarray:
    D = squareform(pdist(np.asarray(X, dtype=np.float64), "sqeuclidean"))
    if not np.all(np.isfinite(D)):
        raise DataError("pairwise distances are not finite")
    return D


def _row_entropy(d: np.ndarray, beta: float) -> Tuple[float, np.ndarray]:
    """Natural-log entropy and normalized row of exp(-beta * d); d is shifted so min(d) = 0."""
    p = np.exp(-beta * d)
    total = p.sum()
    h = np.log(total) + beta * np.dot(d, p) / total
    return h, p / total


def _bisect_row(d: np.ndarray, perplexity: float, tol: float, max_steps: int) -> np.ndarray:
    d = d - d.min()
    beta, lo, hi = 1.0, -np.inf, np.inf
    h, row = _row_entropy(d, beta)
    for _ in range(max_steps):
        realized = np.exp(h)
        if abs(realized - perplexity) < tol:
            break
        if realized > perplexity:
            lo = beta
            beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
        else:
            hi = beta
            beta = beta / 2.0 if lo == -np.inf else (beta + lo) / 2.0
        h, row = _row_entropy(d, beta)
    return row


def conditional_affinities(
    X: np.ndarray,
    perplexity: float,
    tol: float = 1e-5,
    max_steps: int = 50,
    distances: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Row-stochastic p_{j|i} with each row's perplexity matched to ``perplexity``."""
    D = squared_distances(X) if distances is None else np.asarray(distances, dtype=np.float64)
    if not np.all(np.isfinite(D)):
        raise DataError("pairwise distances are not finite")
    n = D.shape[0]
    if not 0.0 < perplexity < n:
        raise ConfigError(f"perplexity {perplexity} must be below the number of points ({n})")
    P = np.zeros((n, n))
    for i in range(n):
        others = np.r_[0:i, i + 1 : n]
        P[i, others] = _bisect_row(D[i, others], perplexity, tol, max_steps)
    return P


def realized_perplexity(P: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(P), 0.0)
    return np.exp(-terms.sum(axis=1))


def kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    """KL(P || Q) with 1e-12 clamps; square matrices skip their diagonal."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape != Q.shape:
        raise DataError(f"KL operands differ in shape: {P.shape} vs {Q.shape}")
    p = np.maximum(P, KL_FLOOR)
    q = np.maximum(Q, KL_FLOOR)
    terms = p * np.log(p / q)
    if P.ndim == 2 and P.shape[0] == P.shape[1]:
        np.fill_diagonal(terms, 0.0)
    return float(terms.sum())


def joint_affinities(X: np.ndarray, perplexity: float) -> np.ndarray:
    cond = conditional_affinities(X, perplexity)
    return (cond + cond.T) / (2.0 * cond.shape[0])


def _student_t(Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    num = 1.0 / (1.0 + squared_distances(Y))
    np.fill_diagonal(num, 0.0)
    return num, num / num.sum()


def tsne(X: np.ndarray, cfg: Optional[TsneConfig] = None) -> TsneResult:
    cfg = cfg or TsneConfig()
    X = LatentSet(X=X, labels=[]).X
    n = X.shape[0]
    P = joint_affinities(X, cfg.perplexity)

    rng = philox(cfg.seed, STREAM_TSNE)
    Y = rng.normal(0.0, cfg.init_std, size=(n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    trace: List[Tuple[int, float]] = []

    for it in range(cfg.iterations):
        num, Q = _student_t(Y)
        if it % cfg.log_every == 0:
            kl = kl_divergence(P, Q)
            trace.append((it, kl))
            logger.debug(f"tsne iteration {it}: KL={kl:.6f}")
        PP = P * cfg.exaggeration if it < cfg.exaggeration_iters else P
        W = (PP - np.maximum(Q, KL_FLOOR)) * num
        grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)

        momentum = cfg.initial_momentum if it < cfg.momentum_switch else cfg.final_momentum
        same_sign = (grad > 0) == (update > 0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, cfg.min_gain, out=gains)
        update = momentum * update - cfg.learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)

    _, Q = _student_t(Y)
    trace.append((cfg.iterations, kl_divergence(P, Q)))
    logger.info(f"tsne on {n} points: KL {trace[0][1]:.4f} -> {trace[-1][1]:.4f}")
    return TsneResult(Y=Y, kl_trace=trace)


def stratified_subsample(labels: Sequence[str], max_points: int, seed: int = 0) -> np.ndarray:
    """Sorted indices of at most ``max_points`` rows, allotted to labels in proportion to their counts."""
    labels = list(labels)
    n = len(labels)
    if max_points < 1:
        raise ConfigError(f"max_points must be positive, got {max_points}")
    if n <= max_points:
        return np.arange(n)

    names = sorted(set(labels))
    members = {name: [i for i, lab in enumerate(labels) if lab == name] for name in names}
    exact = np.array([max_points * len(members[name]) / n for name in names])
    quota = np.floor(exact).astype(int)
    remainder = max_points - quota.sum()
    # largest fractional parts take the leftover slots; stable order breaks ties
    for j in np.argsort(-(exact - quota), kind="stable")[:remainder]:
        quota[j] += 1

    rng = philox(seed, STREAM_SUBSAMPLE)
    picked: List[int] = []
    for name, q in zip(names, quota):
        pool = np.asarray(members[name])
        picked.extend(pool[rng.permutation(len(pool))[:q]].tolist())
    return np.sort(np.asarray(picked, dtype=np.int64))
