"""ADE / FDE / best-of-K / collision metrics and the ablation harness."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .model import forward_from_context, predict_trajectories, prepare_window
from .rng import Rng

REPORT_COLUMNS = ("scene", "K", "ade", "fde", "collision_pct", "n_windows", "runtime_s")


class LengthMismatch(ValueError):
    pass


@dataclass
class MetricsReport:
    scene: str
    k: int
    ade: float
    fde: float
    collision_pct: float
    n_windows: int
    runtime_s: float
    # how the collision trajectory set was chosen (mode / min-ade sample)
    collision_rule: str = "mode"

    def row(self) -> dict:
        return {"scene": self.scene, "K": self.k, "ade": self.ade, "fde": self.fde,
                "collision_pct": self.collision_pct, "n_windows": self.n_windows,
                "runtime_s": self.runtime_s}


def ade(pred, gt) -> float:
    """Mean Euclidean distance over all predicted steps."""
    p, g = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise LengthMismatch(f"{p.shape} vs {g.shape}")
    return float(np.mean(np.linalg.norm(p - g, axis=-1)))


def fde(pred, gt) -> float:
    """Final-step Euclidean distance, averaged over agents."""
    p, g = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise LengthMismatch(f"{p.shape} vs {g.shape}")
    return float(np.mean(np.linalg.norm(p[-1] - g[-1], axis=-1)))


def best_of_k(samples, gt) -> tuple[float, float]:
    """Per-agent minimum ADE and FDE over K samples (independent minima),
    averaged over agents. samples: [K][T][N][2], gt: [T][N][2]."""
    s = np.asarray(samples, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if s.shape[1:] != g.shape:
        raise LengthMismatch(f"{s.shape} vs {g.shape}")
    dists = np.linalg.norm(s - g[None], axis=-1)  # [K][T][N]
    ades = dists.mean(axis=1)  # [K][N]
    fdes = dists[:, -1, :]  # [K][N]
    return float(ades.min(axis=0).mean()), float(fdes.min(axis=0).mean())


def collision_pct(trajs, threshold: float = 0.1) -> float:
    """Percentage of unordered agent pairs whose minimum pairwise distance
    over the horizon falls below ``threshold``. trajs: [T][N][2]."""
    t = np.asarray(trajs, dtype=np.float64)
    n = t.shape[1]
    if n < 2:
        return 0.0
    diff = t[:, :, None, :] - t[:, None, :, :]  # [T][N][N][2]
    dist = np.linalg.norm(diff, axis=-1).min(axis=0)  # [N][N]
    iu = np.triu_indices(n, k=1)
    return float(100.0 * np.mean(dist[iu] < threshold))


def min_ade_trajectory(samples, gt) -> np.ndarray:
    """Representative trajectory set: each agent's minimum-ADE sample."""
    s = np.asarray(samples, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    ades = np.linalg.norm(s - g[None], axis=-1).mean(axis=1)  # [K][N]
    pick = ades.argmin(axis=0)  # [N]
    return np.stack([s[pick[i], :, i, :] for i in range(s.shape[2])], axis=1)


def evaluate(ckpt, windows, grid, k: int = 1, seed: int = 0,
             collision_threshold: float = 0.1, scene: str = "") -> MetricsReport:
    """Run the model over ``windows`` and aggregate metrics.

    K=1 uses the deterministic mode trajectory; K>1 samples K trajectories
    per window and reports best-of-K. Collision is computed on the mode
    (K=1) or on each agent's minimum-ADE sample (K>1), and averaged over
    windows. ADE/FDE aggregation is the flat mean over (window, agent).
    """
    start = time.perf_counter()
    rng = Rng(seed)
    params = ckpt.params
    ade_terms: list[float] = []
    fde_terms: list[float] = []
    coll_terms: list[float] = []
    for w in windows:
        ctx = prepare_window(w, grid, params)
        seq = forward_from_context(ctx, params)
        gt = w.positions[w.t_obs:]
        if k == 1:
            trajs = predict_trajectories(seq, 1, mode=True)
            rep = trajs[0]
            dists = np.linalg.norm(rep - gt, axis=-1)  # [T][N]
            ade_terms += list(dists.mean(axis=0))
            fde_terms += list(dists[-1])
        else:
            trajs = predict_trajectories(seq, k, rng=rng)
            dists = np.linalg.norm(trajs - gt[None], axis=-1)  # [K][T][N]
            ade_terms += list(dists.mean(axis=1).min(axis=0))
            fde_terms += list(dists[:, -1, :].min(axis=0))
            rep = min_ade_trajectory(trajs, gt)
        coll_terms.append(collision_pct(rep, collision_threshold))
    return MetricsReport(
        scene=scene, k=k,
        ade=float(np.mean(ade_terms)), fde=float(np.mean(fde_terms)),
        collision_pct=float(np.mean(coll_terms)), n_windows=len(windows),
        runtime_s=time.perf_counter() - start,
        collision_rule="mode" if k == 1 else "min-ade-sample")


def straight_line_baseline(windows, collision_threshold: float = 0.1):
    """Constant-velocity extrapolation from the last observed displacement.

    Returns (ade, fde, collision_pct) aggregated like ``evaluate``.
    """
    ade_terms, fde_terms, coll_terms = [], [], []
    for w in windows:
        last = w.positions[w.t_obs - 1]
        vel = w.positions[w.t_obs - 1] - w.positions[w.t_obs - 2]
        steps = np.arange(1, w.t_pred + 1)[:, None, None]
        pred = last[None] + steps * vel[None]
        gt = w.positions[w.t_obs:]
        dists = np.linalg.norm(pred - gt, axis=-1)
        ade_terms += list(dists.mean(axis=0))
        fde_terms += list(dists[-1])
        coll_terms.append(collision_pct(pred, collision_threshold))
    return float(np.mean(ade_terms)), float(np.mean(fde_terms)), float(np.mean(coll_terms))


def reports_to_csv(reports) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for r in reports:
        row = r.row()
        lines.append(",".join(
            f"{row[c]:.9g}" if isinstance(row[c], float) else str(row[c])
            for c in REPORT_COLUMNS))
    return "\n".join(lines) + "\n"


def reports_to_json(reports) -> str:
    return json.dumps([r.row() for r in reports], sort_keys=True, indent=2) + "\n"


def ablation_sweep(windows, grid, base_cfg, axis: dict, k: int = 1,
                   eval_windows=None, progress=None) -> list:
    """Train + evaluate one model per configuration along one axis.

    ``axis`` is one of:
      {"theta": [values]}            - self-attention sweep
      {"factors": [(sp, dir, dist)]} - speed/direction/distance on-off masks
      {"variant": [names]}           - ablation variants
    Returns a list of (label, MetricsReport).
    """
    from dataclasses import asdict

    from .training import TrainConfig, train

    if eval_windows is None:
        eval_windows = windows
    configs: list[tuple[str, TrainConfig]] = []
    if "theta" in axis:
        for th in axis["theta"]:
            configs.append((f"theta={th:g}", TrainConfig(**{**asdict(base_cfg), "theta": float(th)})))
    elif "factors" in axis:
        for sp, dr, ds in axis["factors"]:
            label = f"speed={int(sp)},direction={int(dr)},distance={int(ds)}"
            configs.append((label, TrainConfig(**{**asdict(base_cfg), "use_speed": bool(sp),
                                                  "use_direction": bool(dr),
                                                  "use_distance": bool(ds)})))
    elif "variant" in axis:
        for v in axis["variant"]:
            configs.append((f"variant={v}", TrainConfig(**{**asdict(base_cfg), "variant": v})))
    else:
        raise ValueError("axis must name theta, factors, or variant")

    out = []
    for label, cfg in configs:
        ckpt = train(windows, grid, cfg)
        rep = evaluate(ckpt, eval_windows, grid, k, scene=label)
        out.append((label, rep))
        if progress is not None:
            progress(label, rep)
    return out


def sweep_to_csv(rows) -> str:
    lines = ["config," + ",".join(REPORT_COLUMNS)]
    for label, r in rows:
        row = r.row()
        lines.append(f"\"{label}\"," + ",".join(
            f"{row[c]:.9g}" if isinstance(row[c], float) else str(row[c])
            for c in REPORT_COLUMNS))
    return "\n".join(lines) + "\n"
