"""Social soft attention over agent graphs.

The edge weight between two agents combines their speeds, approach
directions, and separation: max(0, (|u_i| cos a + |u_j| cos b) / l_ij),
which is algebraically (u_i - u_j) . (p_j - p_i) / l_ij^2 clamped at zero.
Receding pairs therefore get exactly zero weight. The diagonal carries the
self-attention constant theta, and each row is softmax-normalized over all
agents to form the aggregation matrix used by the graph convolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SsaConfig:
    theta: float = 0.10
    use_speed: bool = True
    use_direction: bool = True
    use_distance: bool = True
    epsilon_dist: float = 1e-6

    def __post_init__(self):
        if self.epsilon_dist <= 0:
            raise ValueError("epsilon_dist must be positive")


@dataclass(frozen=True)
class PairGeometry:
    rel_pos: tuple  # p_j - p_i
    rel_vel: tuple  # u_i - u_j
    distance: float
    cos_alpha: float
    cos_beta: float
    speed_i: float
    speed_j: float


@dataclass(frozen=True)
class AttentionMatrix:
    raw: np.ndarray  # [N][N], diagonal = theta
    normalized: np.ndarray  # [N][N], rows sum to 1
    timestep: int = 0


def pair_geometry(p_i, u_i, p_j, u_j, cfg: SsaConfig = SsaConfig()) -> PairGeometry:
    """Geometry of one ordered agent pair; cosines default to 0 at zero speed."""
    rel_pos = (p_j[0] - p_i[0], p_j[1] - p_i[1])
    rel_vel = (u_i[0] - u_j[0], u_i[1] - u_j[1])
    dist = max(math.hypot(*rel_pos), cfg.epsilon_dist)
    speed_i = math.hypot(*u_i)
    speed_j = math.hypot(*u_j)
    cos_alpha = 0.0
    if speed_i > 0:
        cos_alpha = (u_i[0] * rel_pos[0] + u_i[1] * rel_pos[1]) / (speed_i * dist)
    cos_beta = 0.0
    if speed_j > 0:
        # beta is measured against the line pointing from j back to i
        cos_beta = -(u_j[0] * rel_pos[0] + u_j[1] * rel_pos[1]) / (speed_j * dist)
    return PairGeometry(rel_pos=rel_pos, rel_vel=rel_vel, distance=dist,
                        cos_alpha=cos_alpha, cos_beta=cos_beta,
                        speed_i=speed_i, speed_j=speed_j)


def ssa_weight(g: PairGeometry, cfg: SsaConfig = SsaConfig()) -> float:
    """Edge weight for one ordered pair, with the factor masks applied.

    With all factors on this is max(0, (|u_i| cos a + |u_j| cos b) / l).
    Disabling speed uses unit speeds, disabling direction replaces the
    cosines with 1, and disabling distance drops the denominator.
    """
    if cfg.use_speed and cfg.use_direction:
        num = g.speed_i * g.cos_alpha + g.speed_j * g.cos_beta
    elif cfg.use_direction:
        num = g.cos_alpha + g.cos_beta
    elif cfg.use_speed:
        num = g.speed_i + g.speed_j
    else:
        num = 1.0  # unweighted edge when neither speed nor direction matters
    den = g.distance if cfg.use_distance else 1.0
    return max(0.0, num / den)


def ssa_matrix(positions: np.ndarray, velocities: np.ndarray,
               cfg: SsaConfig = SsaConfig(), timestep: int = 0) -> AttentionMatrix:
    """Raw and softmax-normalized attention for one timestep.

    positions, velocities: [N][2]. The raw matrix has theta on the diagonal
    and the clamped kernel off-diagonal; each row is softmax-normalized over
    all N entries.
    """
    n = positions.shape[0]
    raw = np.full((n, n), cfg.theta, dtype=np.float64)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            g = pair_geometry(positions[i], velocities[i], positions[j], velocities[j], cfg)
            raw[i, j] = ssa_weight(g, cfg)
    shifted = raw - raw.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    normalized = e / e.sum(axis=1, keepdims=True)
    return AttentionMatrix(raw=raw, normalized=normalized, timestep=timestep)


def symmetric_normalize(adjacency: np.ndarray) -> np.ndarray:
    """Symmetric normalization with added self-loops:
    D^{-1/2} (A + I) D^{-1/2}, where D is the degree of A + I."""
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected square matrix, got {a.shape}")
    a_hat = a + np.eye(a.shape[0])
    d = a_hat.sum(axis=1)
    d_inv_sqrt = 1.0 / np.sqrt(d)
    return a_hat * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def uniform_adjacency(n: int) -> np.ndarray:
    """All-ones off-diagonal graph, symmetric-normalized (ssa-free ablation)."""
    return symmetric_normalize(np.ones((n, n)) - np.eye(n))


def attention_to_csv(m: AttentionMatrix, normalized: bool = True) -> str:
    """Row-major CSV with 9 significant digits (for graph visualizations)."""
    mat = m.normalized if normalized else m.raw
    return "\n".join(",".join(f"{v:.9g}" for v in row) for row in mat) + "\n"
