"""Per-agent scene context and node feature embedding.

Scene context is a scaled dot-product attention over a local block of grid
cells around the agent: each cell's key is a learned projection of its
features concatenated with its offset from the agent, a learned global query
scores the keys, and the context is the softmax-weighted sum of bias-free
value projections. A bias-free value projection means an all-zero scene
contributes an exactly-zero context, which makes the no-scene model the
zero-context limit of the full one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .rng import Rng
from .trajdata import SceneGrid, world_to_cell

SCENE_DIM = 8  # context vector length
KEY_DIM = 16
WINDOW_CELLS = 16  # side of the local attention block


@dataclass
class SceneAttnParams:
    key_proj: ad.Tensor  # [d_k][D + 2]
    query: ad.Tensor     # [d_k]
    value_proj: ad.Tensor  # [d_c][D], bias-free
    window: int = WINDOW_CELLS

    @property
    def depth(self) -> int:
        return self.value_proj.shape[1]

    @staticmethod
    def init(depth: int, rng: Rng, d_k: int = KEY_DIM,
             window: int = WINDOW_CELLS) -> "SceneAttnParams":
        def u(shape, fan_in):
            b = math.sqrt(1.0 / fan_in)
            return ad.Tensor(rng.uniform(-b, b, shape), requires_grad=True)
        return SceneAttnParams(
            key_proj=u((d_k, depth + 2), depth + 2),
            query=u((d_k,), d_k),
            value_proj=u((SCENE_DIM, depth), max(depth, 1)),
            window=window,
        )

    def tensors(self) -> list[ad.Tensor]:
        return [self.key_proj, self.query, self.value_proj]


@dataclass
class EmbedParams:
    weight: ad.Tensor  # [d_e][in_dim]
    bias: ad.Tensor    # [d_e]
    slope: ad.Tensor   # [d_e] PReLU slope per channel

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @staticmethod
    def init(in_dim: int, rng: Rng, d_e: int = 5) -> "EmbedParams":
        b = math.sqrt(1.0 / in_dim)
        return EmbedParams(
            weight=ad.Tensor(rng.uniform(-b, b, (d_e, in_dim)), requires_grad=True),
            bias=ad.Tensor(rng.uniform(-b, b, (d_e,)), requires_grad=True),
            slope=ad.Tensor(np.full(d_e, 0.25), requires_grad=True),
        )

    def tensors(self) -> list[ad.Tensor]:
        return [self.weight, self.bias, self.slope]


def local_block(grid: SceneGrid, p, window: int):
    """Features and offsets of the attention block around world point ``p``.

    Returns (features [n_cells, D], offsets [n_cells, 2]) as plain arrays;
    offsets are (cell center - agent cell) / window. Agents outside the grid
    use the nearest border block.
    """
    cx, cy = world_to_cell(grid, p)
    cx = min(max(cx, 0.0), grid.width - 1.0)
    cy = min(max(cy, 0.0), grid.height - 1.0)
    half = window // 2
    c0 = int(round(cx)) - half
    r0 = int(round(cy)) - half
    c0 = min(max(c0, 0), max(grid.width - window, 0))
    r0 = min(max(r0, 0), max(grid.height - window, 0))
    c1 = min(c0 + window, grid.width)
    r1 = min(r0 + window, grid.height)
    block = grid.data[r0:r1, c0:c1, :].astype(np.float64)
    rows, cols = np.mgrid[r0:r1, c0:c1]
    off = np.stack([(cols - cx) / window, (rows - cy) / window], axis=-1)
    return block.reshape(-1, grid.depth), off.reshape(-1, 2)


def scene_attention_from_block(feats: np.ndarray, offs: np.ndarray,
                               params: SceneAttnParams) -> ad.Tensor:
    """Context vector for one precomputed block; differentiable in params."""
    aug = np.concatenate([feats, offs], axis=1)  # [n_cells, D+2]
    keys = ad.matmul(params.key_proj, aug.T)  # [d_k, n_cells]
    d_k = params.query.shape[0]
    scores = ad.mul(ad.matmul(params.query, keys), 1.0 / math.sqrt(d_k))
    w = ad.softmax(scores, axis=-1)  # [n_cells]
    vals = ad.matmul(params.value_proj, feats.T)  # [d_c, n_cells]
    return ad.matmul(vals, w)  # [d_c]


def scene_attention(grid: SceneGrid, p, params: SceneAttnParams) -> ad.Tensor:
    """Scene context C for one agent position (length SCENE_DIM)."""
    feats, offs = local_block(grid, p, params.window)
    return scene_attention_from_block(feats, offs, params)


def embed_node(motion, context, params: EmbedParams) -> ad.Tensor:
    """v = PReLU(W . concat(motion, context) + b)."""
    motion_t = ad.as_tensor(motion)
    x = motion_t if context is None else ad.concat([motion_t, ad.as_tensor(context)], axis=0)
    if x.shape[0] != params.in_dim:
        raise ad.ShapeError(f"embed input dim {x.shape[0]} != {params.in_dim}")
    pre = ad.add(ad.matmul(params.weight, x), params.bias)
    return ad.prelu(pre, params.slope)


def embed_nodes(motions: np.ndarray, contexts, params: EmbedParams) -> ad.Tensor:
    """Batched embedding over N agents: motions [N,2], contexts Tensor [N,d_c]
    or None. Returns [N, d_e]."""
    m = ad.as_tensor(motions)
    x = m if contexts is None else ad.concat([m, contexts], axis=1)
    if x.shape[1] != params.in_dim:
        raise ad.ShapeError(f"embed input dim {x.shape[1]} != {params.in_dim}")
    pre = ad.add(ad.matmul(x, ad.transpose(params.weight)), params.bias)
    return ad.prelu(pre, params.slope)
