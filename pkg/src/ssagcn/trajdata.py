"""Trajectory dataset ingestion and scene grids.

Trajectory files are UTF-8 text with four whitespace-separated columns per
line: frame_id, agent_id, x, y. Scene feature maps are either the native
binary grid format (magic "SSAG") or a P5 PGM image with an axis-aligned
world transform supplied by the caller.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GRID_MAGIC = b"SSAG"
GRID_VERSION = 1


class ParseError(ValueError):
    def __init__(self, line: int, message: str = "malformed record"):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DuplicateRecord(ValueError):
    pass


class EmptyDataset(ValueError):
    pass


class FormatError(ValueError):
    pass


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class RawScene:
    """Parsed trajectory records, sorted by (frame_id, agent_id)."""
    records: tuple  # of (frame_id, agent_id, x, y)
    frame_stride: int
    units: str = "meters"
    name: str = ""


@dataclass(frozen=True)
class TrajectoryWindow:
    """One (t_obs + t_pred)-frame slice of N co-present agents."""
    positions: np.ndarray  # [T][N][2]
    agent_ids: tuple
    t_obs: int
    t_pred: int
    units: str = "meters"
    scene_name: str = ""

    def __post_init__(self):
        T, N, _ = self.positions.shape
        if T != self.t_obs + self.t_pred:
            raise ValueError("positions length does not match t_obs + t_pred")
        if self.t_obs < 2:
            raise ValueError("t_obs must be >= 2")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("non-finite coordinates in window")

    @property
    def n_agents(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class DisplacementField:
    """Per-step displacements; u[0] copies u[1] so the first observed frame
    never looks spuriously stationary."""
    u: np.ndarray  # [T][N][2]


@dataclass(frozen=True)
class SceneGrid:
    """Rasterized scene feature map with a world -> cell transform.

    ``data[row, col, channel]``; ``world_to_grid`` maps homogeneous world
    coordinates to continuous (col, row) cell coordinates.
    """
    data: np.ndarray  # [H][W][D] float32
    world_to_grid: np.ndarray  # 3x3 float64

    def __post_init__(self):
        if abs(np.linalg.det(self.world_to_grid)) < 1e-12:
            raise TransformError("world_to_grid is not invertible")
        if not np.all(np.isfinite(self.data)):
            raise FormatError("non-finite grid data")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def depth(self) -> int:
        return self.data.shape[2]


def parse_trajectory_file(source, units: str = "meters", name: str = "") -> RawScene:
    """Parse a trajectory text stream into a RawScene.

    ``source`` may be a path, str, bytes, or file object. The frame stride is
    inferred as the GCD of per-agent frame gaps (1 when no agent spans more
    than one frame).
    """
    def _looks_like_path(s) -> bool:
        if isinstance(s, Path):
            return True
        return isinstance(s, str) and "\n" not in s and len(s) < 4096 and Path(s).exists()

    if _looks_like_path(source):
        text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, io.IOBase):
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    else:
        text = str(source)

    records = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(lineno, f"expected 4 fields, got {len(parts)}")
        try:
            frame = int(float(parts[0]))
            agent = int(float(parts[1]))
            x = float(parts[2])
            y = float(parts[3])
        except ValueError:
            raise ParseError(lineno, "non-numeric field") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError(lineno, "non-finite coordinate")
        key = (frame, agent)
        if key in seen:
            raise DuplicateRecord(f"duplicate (frame={frame}, agent={agent})")
        seen.add(key)
        records.append((frame, agent, x, y))

    if not records:
        raise EmptyDataset("no trajectory records")

    records.sort(key=lambda r: (r[0], r[1]))

    by_agent: dict[int, list[int]] = {}
    for frame, agent, _, _ in records:
        by_agent.setdefault(agent, []).append(frame)
    stride = 0
    for frames in by_agent.values():
        frames.sort()
        for a, b in zip(frames, frames[1:]):
            stride = math.gcd(stride, b - a)
    if stride == 0:
        stride = 1

    return RawScene(records=tuple(records), frame_stride=stride, units=units, name=name)


def build_windows(scene: RawScene, t_obs: int = 8, t_pred: int = 12,
                  stride: int = 1) -> list[TrajectoryWindow]:
    """Slide a (t_obs + t_pred)-frame window over the scene.

    A window keeps exactly the agents present at all of its frames; empty
    windows are dropped. The window start advances by ``stride`` sampled
    frames.
    """
    if t_obs < 2 or t_pred < 1 or stride < 1:
        raise ValueError("require t_obs >= 2, t_pred >= 1, stride >= 1")
    T = t_obs + t_pred
    fs = scene.frame_stride
    index: dict[tuple[int, int], tuple[float, float]] = {
        (f, a): (x, y) for f, a, x, y in scene.records
    }
    frames = sorted({f for f, _, _, _ in scene.records})
    agents = sorted({a for _, a, _, _ in scene.records})
    fmin, fmax = frames[0], frames[-1]

    windows = []
    start = fmin
    while start + (T - 1) * fs <= fmax:
        span = [start + k * fs for k in range(T)]
        present = [a for a in agents if all((f, a) in index for f in span)]
        if present:
            pos = np.array([[index[(f, a)] for a in present] for f in span], dtype=np.float64)
            windows.append(TrajectoryWindow(
                positions=pos, agent_ids=tuple(present), t_obs=t_obs,
                t_pred=t_pred, units=scene.units, scene_name=scene.name))
        start += stride * fs
    return windows


def displacements(w: TrajectoryWindow) -> DisplacementField:
    u = np.empty_like(w.positions)
    u[1:] = w.positions[1:] - w.positions[:-1]
    u[0] = u[1]
    return DisplacementField(u=u)


def world_to_cell(grid: SceneGrid, p) -> tuple[float, float]:
    """Apply the homogeneous world -> cell transform; no clamping."""
    x, y = float(p[0]), float(p[1])
    h = grid.world_to_grid @ np.array([x, y, 1.0])
    return (h[0] / h[2], h[1] / h[2])


def cell_to_world(grid: SceneGrid, c) -> tuple[float, float]:
    inv = np.linalg.inv(grid.world_to_grid)
    h = inv @ np.array([float(c[0]), float(c[1]), 1.0])
    return (h[0] / h[2], h[1] / h[2])


def save_grid(grid: SceneGrid, path) -> None:
    """Write the native grid format (little-endian, see module docstring)."""
    h, w, d = grid.data.shape
    with open(path, "wb") as f:
        f.write(GRID_MAGIC)
        f.write(struct.pack("<IIII", GRID_VERSION, h, w, d))
        f.write(np.asarray(grid.world_to_grid, dtype="<f8").tobytes())
        f.write(np.asarray(grid.data, dtype="<f4").tobytes())


def load_scene_grid(path, world_origin=(0.0, 0.0), cell_size: float = 1.0) -> SceneGrid:
    """Load a scene grid from the native format or a P5 PGM image.

    PGM images become D=1 grids with values scaled to [0, 1] and an
    axis-aligned transform built from ``world_origin`` and ``cell_size``.
    """
    blob = Path(path).read_bytes()
    if blob[:4] == GRID_MAGIC:
        return _load_native(blob)
    if blob[:2] == b"P5":
        return _load_pgm(blob, world_origin, cell_size)
    raise FormatError(f"unrecognized grid file magic: {blob[:4]!r}")


def _load_native(blob: bytes) -> SceneGrid:
    header = struct.calcsize("<IIII")
    if len(blob) < 4 + header + 72:
        raise FormatError("truncated grid file")
    version, h, w, d = struct.unpack_from("<IIII", blob, 4)
    if version != GRID_VERSION:
        raise FormatError(f"unsupported grid version {version}")
    off = 4 + header
    transform = np.frombuffer(blob, dtype="<f8", count=9, offset=off).reshape(3, 3).copy()
    off += 72
    n = h * w * d
    data = np.frombuffer(blob, dtype="<f4", count=n, offset=off)
    if data.size != n:
        raise FormatError("truncated grid data")
    return SceneGrid(data=data.reshape(h, w, d).copy(), world_to_grid=transform)


def _load_pgm(blob: bytes, world_origin, cell_size: float) -> SceneGrid:
    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(blob):
        # header tokens separated by whitespace; '#' starts a comment
        while i < len(blob) and blob[i:i + 1].isspace():
            i += 1
        if blob[i:i + 1] == b"#":
            while i < len(blob) and blob[i:i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(blob) and not blob[j:j + 1].isspace():
            j += 1
        tokens.append(blob[i:j])
        i = j
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise FormatError("bad PGM header")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise FormatError("non-numeric PGM header field") from None
    if maxval <= 0 or maxval > 255:
        raise FormatError(f"unsupported PGM maxval {maxval}")
    i += 1  # single whitespace byte after maxval
    pixels = np.frombuffer(blob, dtype=np.uint8, count=w * h, offset=i)
    if pixels.size != w * h:
        raise FormatError("truncated PGM data")
    data = (pixels.reshape(h, w, 1).astype(np.float32)) / float(maxval)
    ox, oy = world_origin
    s = 1.0 / float(cell_size)
    transform = np.array([[s, 0.0, -ox * s],
                          [0.0, s, -oy * s],
                          [0.0, 0.0, 1.0]])
    return SceneGrid(data=data, world_to_grid=transform)
