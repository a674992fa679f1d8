"""NLL training loop, checkpoint persistence, and the leave-one-out protocol.

Training is plain SGD (no momentum, no weight decay, no clipping), one
window per step, shuffled each epoch from the seeded stream. The loss for a
window is the sum of per-step displacement NLLs over all agents and steps,
divided by the number of agents, so gradient scale does not grow with crowd
size.

Checkpoints are a UTF-8 JSON header (config snapshot, parameter shapes,
per-epoch training log) followed by a little-endian f32 parameter blob in
declaration order. Saved parameters are rounded through f32 at the end of
training so a save/load round trip reproduces forward outputs bit-for-bit.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .gaussians import nll_from_raw
from .model import (GaussianSequence, ModelConfig, ModelParams, WindowContext,
                    forward_from_context, prepare_window)
from .rng import Rng
from .trajdata import SceneGrid, TrajectoryWindow

CKPT_MAGIC = b"SSAC"
CKPT_VERSION = 1


class NonFiniteLoss(RuntimeError):
    def __init__(self, window_index: int):
        self.window_index = window_index
        super().__init__(f"non-finite loss at window {window_index}")


class IncompatibleCheckpoint(ValueError):
    pass


@dataclass
class TrainConfig:
    lr: float = 0.001
    epochs: int = 200
    theta: float = 0.10
    variant: str = "full"
    seed: int = 0
    leave_out: str = ""
    t_obs: int = 8
    t_pred: int = 12
    scene_depth: int = 1
    use_speed: bool = True
    use_direction: bool = True
    use_distance: bool = True

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 1:
            raise ValueError("lr must be > 0 and epochs >= 1")

    def model_config(self) -> ModelConfig:
        return ModelConfig(t_obs=self.t_obs, t_pred=self.t_pred, theta=self.theta,
                           variant=self.variant, scene_depth=self.scene_depth,
                           use_speed=self.use_speed, use_direction=self.use_direction,
                           use_distance=self.use_distance)


@dataclass
class Checkpoint:
    config: TrainConfig
    params: ModelParams
    log: list  # per-epoch mean NLL

    def save(self, path) -> None:
        entries = self.params.named_tensors()
        header = {
            "format_version": CKPT_VERSION,
            "config": asdict(self.config),
            "params": [{"name": n, "shape": list(t.shape)} for n, t in entries],
            "log": [float(v) for v in self.log],
        }
        blob = b"".join(np.asarray(t.data, dtype="<f4").tobytes() for _, t in entries)
        hb = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as f:
            f.write(CKPT_MAGIC)
            f.write(struct.pack("<I", len(hb)))
            f.write(hb)
            f.write(blob)

    @staticmethod
    def load(path) -> "Checkpoint":
        blob = Path(path).read_bytes()
        if blob[:4] != CKPT_MAGIC:
            raise IncompatibleCheckpoint("not a checkpoint file")
        (hlen,) = struct.unpack_from("<I", blob, 4)
        header = json.loads(blob[8:8 + hlen].decode("utf-8"))
        if header.get("format_version") != CKPT_VERSION:
            raise IncompatibleCheckpoint(
                f"unsupported checkpoint version {header.get('format_version')}")
        cfg = TrainConfig(**header["config"])
        params = ModelParams.init(cfg.model_config(), seed=cfg.seed)
        off = 8 + hlen
        for spec, (name, t) in zip(header["params"], params.named_tensors()):
            if spec["name"] != name or tuple(spec["shape"]) != t.shape:
                raise IncompatibleCheckpoint(f"parameter mismatch at {name}")
            n = t.size
            if off + 4 * n > len(blob):
                raise IncompatibleCheckpoint("truncated parameter blob")
            arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off)
            t.data = arr.astype(np.float64).reshape(t.shape)
            off += 4 * n
        params.set_requires_grad(False)
        return Checkpoint(config=cfg, params=params, log=list(header["log"]))


def window_nll(seq: GaussianSequence, window: TrajectoryWindow) -> ad.Tensor:
    """Per-agent mean of summed per-step NLLs; targets are ground-truth
    displacements over the prediction horizon."""
    t_obs = window.t_obs
    gt = np.diff(window.positions, axis=0)[t_obs - 1:]  # [t_pred][N][2]
    per = nll_from_raw(seq.raw, gt)  # [t_pred][N]
    return ad.mul(ad.tsum(per), 1.0 / window.n_agents)


def sgd_step(params: ModelParams, lr: float) -> None:
    """p <- p - lr * g for every learnable tensor with a gradient."""
    for t in params.tensors():
        if t.grad is not None:
            t.data = t.data - lr * t.grad
        t.grad = None


def round_to_f32(params: ModelParams) -> None:
    for t in params.tensors():
        t.data = t.data.astype(np.float32).astype(np.float64)


def train(windows, grids, cfg: TrainConfig,
          progress=None) -> Checkpoint:
    """Train a model on ``windows``; ``grids`` maps scene_name -> SceneGrid
    (or is a single SceneGrid / None used for every window)."""
    if not windows:
        raise ValueError("need at least one training window")
    params = ModelParams.init(cfg.model_config(), seed=cfg.seed)
    params.set_requires_grad(True)

    def grid_for(w: TrajectoryWindow):
        if isinstance(grids, dict):
            return grids.get(w.scene_name)
        return grids

    contexts = [prepare_window(w, grid_for(w), params) for w in windows]
    rng = Rng(cfg.seed)
    log = []
    for epoch in range(cfg.epochs):
        order = rng.shuffle_order(len(contexts))
        total = 0.0
        for idx in order:
            ctx = contexts[idx]
            params.zero_grad()
            seq = forward_from_context(ctx, params)
            loss = window_nll(seq, ctx.window)
            val = loss.item()
            if not np.isfinite(val):
                raise NonFiniteLoss(int(idx))
            total += val
            loss.backward()
            sgd_step(params, cfg.lr)
        log.append(total / len(contexts))
        if progress is not None:
            progress(epoch, log[-1])
    params.set_requires_grad(False)
    round_to_f32(params)
    return Checkpoint(config=cfg, params=params, log=log)


def save_log_csv(ckpt: Checkpoint, path) -> None:
    lines = ["epoch,mean_nll"]
    lines += [f"{i},{v:.9g}" for i, v in enumerate(ckpt.log)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def leave_one_out(scene_sets: dict, cfg: TrainConfig, k_values=(1, 20),
                  collision_threshold: float = 0.1):
    """Train one model per held-out scene and evaluate it there.

    ``scene_sets`` maps scene name -> (windows, grid-or-None). Returns
    (checkpoints, reports): one checkpoint and one list of MetricsReports
    (one per K) per scene, plus an "AVG" row appended by the caller-facing
    table writer in the eval module.
    """
    from .evaluate import evaluate  # local import to avoid a cycle

    checkpoints = {}
    reports = {}
    for held_out in scene_sets:
        train_windows = []
        grids = {}
        for name, (windows, grid) in scene_sets.items():
            if name == held_out:
                continue
            train_windows += list(windows)
            grids[name] = grid
        loo_cfg = TrainConfig(**{**asdict(cfg), "leave_out": held_out})
        ckpt = train(train_windows, grids, loo_cfg)
        test_windows, test_grid = scene_sets[held_out]
        rows = [evaluate(ckpt, test_windows, test_grid, k,
                         collision_threshold=collision_threshold,
                         scene=held_out) for k in k_values]
        checkpoints[held_out] = ckpt
        reports[held_out] = rows
    return checkpoints, reports
