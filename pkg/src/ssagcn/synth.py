"""Synthetic interaction scenarios for oracle tests and desk-scale training.

Each kind instantiates one qualitative interaction pattern as exact
world-coordinate trajectories, optionally with additive Gaussian position
noise. Approaching pairs (head_on, overtake, crossing) include a scripted
smooth avoidance swerve during the prediction horizon, so straight-line
extrapolation collides while the ground truth does not; receding and
parallel agents move in straight lines. All generation is deterministic per
(kind, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Rng
from .trajdata import RawScene, SceneGrid, parse_trajectory_file

KINDS = ("head_on", "receding", "overtake", "parallel", "crossing", "obstacle_gate")


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    n_agents: int = 2
    speed_min: float = 0.25
    speed_max: float = 0.35
    noise_sigma: float = 0.01
    duration: int = 20
    seed: int = 0
    emit_grid: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.duration < 2 or self.n_agents < 1:
            raise ValueError("duration >= 2 and n_agents >= 1 required")
        if self.speed_min <= 0 or self.speed_max < self.speed_min:
            raise ValueError("need 0 < speed_min <= speed_max")


def _bump(t: np.ndarray, center: float, width: float) -> np.ndarray:
    return np.exp(-((t - center) / width) ** 2)


def _pair_tracks(spec: ScenarioSpec, rng: Rng) -> list[np.ndarray]:
    """Trajectories for one 2-agent interaction of the given kind."""
    t = np.arange(spec.duration, dtype=np.float64)
    s = float(rng.uniform(spec.speed_min, spec.speed_max))
    t_meet = 0.65 * spec.duration  # inside the prediction horizon for 8/12
    if spec.kind == "head_on":
        x0 = s * t_meet
        off = 0.02
        # width 2.0 keeps the swerve negligible during the observation
        # steps, so constant-velocity extrapolation walks into a collision
        swerve = 0.35 * _bump(t, t_meet, 2.0)
        a = np.stack([-x0 + s * t, off + swerve], axis=1)
        b = np.stack([x0 - s * t, -off - swerve], axis=1)
        return [a, b]
    if spec.kind == "receding":
        a = np.stack([-0.5 - s * t, 0.02 * np.ones_like(t)], axis=1)
        b = np.stack([0.5 + s * t, -0.02 * np.ones_like(t)], axis=1)
        return [a, b]
    if spec.kind == "overtake":
        s_lead = 0.5 * s
        gap = (s - s_lead) * t_meet
        swerve = 0.4 * _bump(t, t_meet, 3.0)
        leader = np.stack([s_lead * t, np.zeros_like(t)], axis=1)
        follower = np.stack([-gap + s * t, swerve], axis=1)
        return [leader, follower]
    if spec.kind == "parallel":
        a = np.stack([s * t, 0.6 * np.ones_like(t)], axis=1)
        b = np.stack([s * t, -0.6 * np.ones_like(t)], axis=1)
        return [a, b]
    if spec.kind == "crossing":
        x0 = s * t_meet
        swerve = 0.3 * _bump(t, t_meet, 3.0)
        a = np.stack([-x0 + s * t, swerve], axis=1)
        b = np.stack([np.zeros_like(t) - swerve, -x0 + s * t], axis=1)
        return [a, b]
    raise ValueError(spec.kind)


def _gate_tracks(spec: ScenarioSpec, rng: Rng) -> list[np.ndarray]:
    """Agents walking through the gap of a wall spanning the scene."""
    t = np.arange(spec.duration, dtype=np.float64)
    tracks = []
    for i in range(spec.n_agents):
        s = float(rng.uniform(spec.speed_min, spec.speed_max))
        x_start = 2.0 + 4.0 * float(rng.uniform())
        gate_x = 4.0
        # head toward the gate, pass it, then continue straight up
        y = 0.5 + s * t
        frac = np.clip(y / 4.0, 0.0, 1.0)  # reach the gate at y = 4
        x = x_start + (gate_x - x_start) * frac
        tracks.append(np.stack([x, y], axis=1))
    return tracks


def gate_grid() -> SceneGrid:
    """Binary obstacle grid for obstacle_gate: a wall with a gap at x in
    [3.5, 4.5], world extent [0, 8] x [0, 8] at 0.25 units per cell."""
    h = w = 32
    data = np.zeros((h, w, 1), dtype=np.float32)
    wall_row = 16  # world y = 4
    for col in range(w):
        x = col * 0.25
        if not (3.5 <= x < 4.5):
            data[wall_row, col, 0] = 1.0
    s = 1.0 / 0.25
    transform = np.array([[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, 1.0]])
    return SceneGrid(data=data, world_to_grid=transform)


def generate(spec: ScenarioSpec) -> tuple[RawScene, SceneGrid | None]:
    """Generate one scenario as a RawScene (plus a grid for obstacle_gate)."""
    rng = Rng(spec.seed)
    if spec.kind == "obstacle_gate":
        tracks = _gate_tracks(spec, rng)
    else:
        tracks = []
        # extra agents beyond the interacting pair are stacked far apart
        n_pairs = max(1, (spec.n_agents + 1) // 2)
        for p in range(n_pairs):
            pair = _pair_tracks(spec, rng)
            for traj in pair:
                traj[:, 1] += 5.0 * p
            tracks += pair
        tracks = tracks[:max(spec.n_agents, 2)] if spec.n_agents >= 2 else tracks[:2]
    if spec.noise_sigma > 0:
        for traj in tracks:
            traj += rng.normal(0.0, spec.noise_sigma, traj.shape)

    lines = []
    for frame in range(spec.duration):
        for agent, traj in enumerate(tracks, start=1):
            lines.append(f"{frame} {agent} {traj[frame, 0]:.9f} {traj[frame, 1]:.9f}")
    scene = parse_trajectory_file("\n".join(lines), name=f"{spec.kind}-{spec.seed}")
    grid = gate_grid() if (spec.kind == "obstacle_gate" or spec.emit_grid) else None
    return scene, grid


def scene_to_text(scene: RawScene) -> str:
    return "\n".join(f"{f} {a} {x:.9f} {y:.9f}" for f, a, x, y in scene.records) + "\n"
