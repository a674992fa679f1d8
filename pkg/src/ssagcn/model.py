"""Forward pass: embed nodes per timestep, aggregate over the social graph,
extrapolate with a temporal convolution stack, and emit per-step displacement
Gaussians.

Variants (one per ablation row):
  full    - social soft attention adjacency + per-timestep scene context
  wo-sen  - no scene context (embedding input is the 2-d displacement)
  wo-seq  - scene context computed at the last observed frame only, broadcast
  wo-ssa  - symmetric-normalized unweighted adjacency instead of soft attention
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .gaussians import sample_bivariate_array
from .rng import Rng
from .sceneattn import (SCENE_DIM, EmbedParams, SceneAttnParams, embed_nodes,
                        local_block, scene_attention_from_block)
from .social import SsaConfig, ssa_matrix, uniform_adjacency
from .trajdata import SceneGrid, TrajectoryWindow, displacements

VARIANTS = ("full", "wo-sen", "wo-seq", "wo-ssa")

FEATURE_DIM = 5
TCN_LAYERS = 6
TCN_KERNEL = 3


class MissingScene(ValueError):
    """The chosen variant needs a scene grid but none was supplied."""


@dataclass
class GcnLayer:
    weight: ad.Tensor  # [d_e][d_e]
    slope: ad.Tensor   # [d_e]

    @staticmethod
    def init(rng: Rng, d_e: int = FEATURE_DIM) -> "GcnLayer":
        b = math.sqrt(1.0 / d_e)
        return GcnLayer(
            weight=ad.Tensor(rng.uniform(-b, b, (d_e, d_e)), requires_grad=True),
            slope=ad.Tensor(np.full(d_e, 0.25), requires_grad=True),
        )

    def tensors(self):
        return [self.weight, self.slope]


@dataclass
class TcnStack:
    """Six conv layers treating time as channels over the (node, feature)
    plane. Layer 1 maps t_obs -> t_pred channels; layers 2..6 keep t_pred
    channels with residual connections; the final layer has no activation."""
    weights: list  # of Tensor [C_out][C_in][3][3]
    biases: list   # of Tensor [C_out]
    slopes: list   # PReLU slopes, one [C_out] per layer except the last

    @staticmethod
    def init(t_obs: int, t_pred: int, rng: Rng) -> "TcnStack":
        weights, biases, slopes = [], [], []
        for layer in range(TCN_LAYERS):
            cin = t_obs if layer == 0 else t_pred
            fan_in = cin * TCN_KERNEL * TCN_KERNEL
            b = math.sqrt(1.0 / fan_in)
            weights.append(ad.Tensor(
                rng.uniform(-b, b, (t_pred, cin, TCN_KERNEL, TCN_KERNEL)),
                requires_grad=True))
            biases.append(ad.Tensor(rng.uniform(-b, b, (t_pred,)), requires_grad=True))
            if layer < TCN_LAYERS - 1:
                slopes.append(ad.Tensor(np.full(t_pred, 0.25), requires_grad=True))
        return TcnStack(weights=weights, biases=biases, slopes=slopes)

    def tensors(self):
        return list(self.weights) + list(self.biases) + list(self.slopes)


@dataclass
class ModelConfig:
    t_obs: int = 8
    t_pred: int = 12
    theta: float = 0.10
    variant: str = "full"
    scene_depth: int = 1
    use_speed: bool = True
    use_direction: bool = True
    use_distance: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def uses_scene(self) -> bool:
        return self.variant != "wo-sen"

    def ssa_config(self) -> SsaConfig:
        return SsaConfig(theta=self.theta, use_speed=self.use_speed,
                         use_direction=self.use_direction,
                         use_distance=self.use_distance)


@dataclass
class ModelParams:
    config: ModelConfig
    embed: EmbedParams
    gcn: GcnLayer
    tcn: TcnStack
    scene: SceneAttnParams | None = None

    @staticmethod
    def init(config: ModelConfig, seed: int = 0) -> "ModelParams":
        rng = Rng(seed)
        scene = None
        in_dim = 2
        if config.uses_scene:
            scene = SceneAttnParams.init(config.scene_depth, rng)
            in_dim = 2 + SCENE_DIM
        return ModelParams(
            config=config,
            embed=EmbedParams.init(in_dim, rng),
            gcn=GcnLayer.init(rng),
            tcn=TcnStack.init(config.t_obs, config.t_pred, rng),
            scene=scene,
        )

    def tensors(self) -> list[ad.Tensor]:
        return [t for _, t in self.named_tensors()]

    def named_tensors(self) -> list[tuple[str, ad.Tensor]]:
        out: list[tuple[str, ad.Tensor]] = []
        if self.scene is not None:
            out += [("scene.key_proj", self.scene.key_proj),
                    ("scene.query", self.scene.query),
                    ("scene.value_proj", self.scene.value_proj)]
        out += [("embed.weight", self.embed.weight),
                ("embed.bias", self.embed.bias),
                ("embed.slope", self.embed.slope),
                ("gcn.weight", self.gcn.weight),
                ("gcn.slope", self.gcn.slope)]
        for i, w in enumerate(self.tcn.weights):
            out.append((f"tcn.weight.{i}", w))
        for i, b in enumerate(self.tcn.biases):
            out.append((f"tcn.bias.{i}", b))
        for i, s in enumerate(self.tcn.slopes):
            out.append((f"tcn.slope.{i}", s))
        return out

    def n_parameters(self) -> int:
        return sum(t.size for t in self.tensors())

    def set_requires_grad(self, flag: bool) -> None:
        for t in self.tensors():
            t.requires_grad = flag

    def zero_grad(self) -> None:
        for t in self.tensors():
            t.grad = None


@dataclass(frozen=True)
class GaussianSequence:
    """Per-step displacement distributions for each agent, plus the origin
    (last observed positions) they accumulate from.

    ``constrained``: [t_pred][N][5] as (mu_x, mu_y, sigma_x, sigma_y, rho).
    """
    raw: ad.Tensor  # [t_pred][N][5] unconstrained head output
    origin: np.ndarray  # [N][2]

    @property
    def constrained(self) -> np.ndarray:
        r = self.raw.data
        out = np.empty_like(r)
        out[..., 0:2] = r[..., 0:2]
        out[..., 2:4] = np.exp(r[..., 2:4])
        out[..., 4] = np.tanh(r[..., 4])
        return out


@dataclass
class WindowContext:
    """Constant, parameter-independent precomputation for one window:
    displacements, adjacency per timestep, and scene blocks per (t, agent).
    Reusing a context makes repeated forwards (training epochs, finite
    differences) cheap."""
    window: TrajectoryWindow
    u: np.ndarray  # [T][N][2]
    adjacency: list  # [t_obs] of [N][N]
    blocks: list | None  # [t_obs] of [N] of (feats, offs), or None


def prepare_window(window: TrajectoryWindow, grid: SceneGrid | None,
                   params: ModelParams) -> WindowContext:
    cfg = params.config
    if window.t_obs != cfg.t_obs or window.t_pred != cfg.t_pred:
        raise ad.ShapeError(
            f"window ({window.t_obs},{window.t_pred}) vs config ({cfg.t_obs},{cfg.t_pred})")
    if cfg.uses_scene and grid is None:
        raise MissingScene(f"variant {cfg.variant!r} requires a scene grid")
    u = displacements(window).u
    n = window.n_agents
    adjacency = []
    for t in range(cfg.t_obs):
        if cfg.variant == "wo-ssa":
            adjacency.append(uniform_adjacency(n))
        else:
            adjacency.append(ssa_matrix(window.positions[t], u[t],
                                        cfg.ssa_config(), timestep=t).normalized)
    blocks = None
    if cfg.uses_scene:
        assert params.scene is not None
        w = params.scene.window
        if cfg.variant == "wo-seq":
            last = [local_block(grid, window.positions[cfg.t_obs - 1][i], w)
                    for i in range(n)]
            blocks = [last] * cfg.t_obs
        else:
            blocks = [[local_block(grid, window.positions[t][i], w)
                       for i in range(n)] for t in range(cfg.t_obs)]
    return WindowContext(window=window, u=u, adjacency=adjacency, blocks=blocks)


def gcn_forward(v: ad.Tensor, a_norm: np.ndarray, layer: GcnLayer) -> ad.Tensor:
    """One graph convolution: PReLU(A V W)."""
    return ad.prelu(ad.matmul(ad.matmul(ad.as_tensor(a_norm), v), layer.weight),
                    layer.slope)


def tcn_forward(h: ad.Tensor, stack: TcnStack) -> ad.Tensor:
    """Map [t_obs][N][d_e] to raw head outputs [t_pred][N][d_e]."""
    x = ad.conv2d(h, stack.weights[0], stack.biases[0], padding=TCN_KERNEL // 2)
    x = ad.prelu(x, ad.reshape(stack.slopes[0], (-1, 1, 1)))
    n_layers = len(stack.weights)
    for layer in range(1, n_layers):
        y = ad.conv2d(x, stack.weights[layer], stack.biases[layer],
                      padding=TCN_KERNEL // 2)
        x = ad.add(y, x)  # residual
        if layer < n_layers - 1:
            x = ad.prelu(x, ad.reshape(stack.slopes[layer], (-1, 1, 1)))
    return x


def forward_from_context(ctx: WindowContext, params: ModelParams) -> GaussianSequence:
    cfg = params.config
    n = ctx.window.n_agents
    per_step = []
    for t in range(cfg.t_obs):
        contexts = None
        if ctx.blocks is not None:
            contexts = ad.stack(
                [scene_attention_from_block(f, o, params.scene)
                 for f, o in ctx.blocks[t]], axis=0)  # [N, d_c]
        v = embed_nodes(ctx.u[t], contexts, params.embed)  # [N, d_e]
        per_step.append(gcn_forward(v, ctx.adjacency[t], params.gcn))
    h = ad.stack(per_step, axis=0)  # [t_obs, N, d_e]
    raw = tcn_forward(h, params.tcn)  # [t_pred, N, 5]
    origin = ctx.window.positions[cfg.t_obs - 1].copy()
    return GaussianSequence(raw=raw, origin=origin)


def model_forward(window: TrajectoryWindow, grid: SceneGrid | None,
                  params: ModelParams) -> GaussianSequence:
    return forward_from_context(prepare_window(window, grid, params), params)


def predict_trajectories(seq: GaussianSequence, k: int, rng: Rng | None = None,
                         mode: bool = False) -> np.ndarray:
    """Sample K trajectories ([K][t_pred][N][2] world positions) by drawing
    each displacement Gaussian independently and accumulating from the
    origin. ``mode=True`` uses the means (deterministic, K forced to 1)."""
    con = seq.constrained  # [t_pred][N][5]
    if mode:
        disp = con[None, ..., 0:2]
    else:
        if rng is None:
            raise ValueError("sampling requires an rng")
        disp = np.stack([sample_bivariate_array(con, rng) for _ in range(k)], axis=0)
    return seq.origin[None, None, :, :] + np.cumsum(disp, axis=1)
