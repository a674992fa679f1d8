"""Parsing, windowing, displacement, and scene-grid round trips."""

import numpy as np
import pytest

from ssagcn.trajdata import (DuplicateRecord, EmptyDataset, FormatError,
                             ParseError, SceneGrid, TrajectoryWindow,
                             TransformError, build_windows, cell_to_world,
                             displacements, load_scene_grid,
                             parse_trajectory_file, save_grid, world_to_cell)

SIMPLE = """\
0 1 0.0 0.0
0 2 5.0 0.0
1 1 1.0 0.0
1 2 4.0 0.0
"""


def test_parse_basic():
    scene = parse_trajectory_file(SIMPLE)
    assert len(scene.records) == 4
    assert scene.frame_stride == 1
    assert scene.records[0] == (0, 1, 0.0, 0.0)


def test_parse_sorts_records():
    scene = parse_trajectory_file("5 1 1 1\n0 2 2 2\n0 1 3 3\n")
    assert [(f, a) for f, a, _, _ in scene.records] == [(0, 1), (0, 2), (5, 1)]


def test_parse_infers_frame_stride_gcd():
    scene = parse_trajectory_file("0 1 0 0\n10 1 1 0\n30 1 3 0\n")
    assert scene.frame_stride == 10


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError) as e:
        parse_trajectory_file("0 1 0.0 0.0\n1 1 oops 0.0\n")
    assert e.value.line == 2
    with pytest.raises(ParseError):
        parse_trajectory_file("0 1 0.0\n")
    with pytest.raises(ParseError):
        parse_trajectory_file("0 1 nan 0.0\n")


def test_parse_duplicate_record():
    with pytest.raises(DuplicateRecord):
        parse_trajectory_file("0 1 0 0\n0 1 1 1\n")


def test_parse_empty_dataset():
    with pytest.raises(EmptyDataset):
        parse_trajectory_file("\n\n")


def test_parse_from_file(tmp_path):
    p = tmp_path / "scene.txt"
    p.write_text(SIMPLE, encoding="utf-8")
    assert parse_trajectory_file(p).records == parse_trajectory_file(SIMPLE).records


def test_build_windows_full_presence_rule():
    # agent 3 misses frame 2, so only agents 1 and 2 survive windowing
    lines = []
    for f in range(20):
        lines.append(f"{f} 1 {f * 0.1} 0")
        lines.append(f"{f} 2 {f * 0.1} 1")
        if f != 2:
            lines.append(f"{f} 3 {f * 0.1} 2")
    scene = parse_trajectory_file("\n".join(lines))
    windows = build_windows(scene, 8, 12)
    assert len(windows) == 1
    assert windows[0].agent_ids == (1, 2)
    assert windows[0].positions.shape == (20, 2, 2)


def test_build_windows_stride_and_count():
    lines = [f"{f} 1 {f * 0.1} 0" for f in range(25)]
    scene = parse_trajectory_file("\n".join(lines))
    assert len(build_windows(scene, 8, 12, stride=1)) == 6
    assert len(build_windows(scene, 8, 12, stride=2)) == 3


def test_build_windows_respects_frame_stride():
    lines = [f"{f * 10} 1 {f * 0.1} 0" for f in range(20)]
    scene = parse_trajectory_file("\n".join(lines))
    windows = build_windows(scene, 8, 12)
    assert len(windows) == 1


def test_window_validation():
    with pytest.raises(ValueError):
        TrajectoryWindow(positions=np.zeros((19, 1, 2)), agent_ids=(1,),
                         t_obs=8, t_pred=12)
    with pytest.raises(ValueError):
        TrajectoryWindow(positions=np.full((20, 1, 2), np.nan), agent_ids=(1,),
                         t_obs=8, t_pred=12)


def test_displacements_first_frame_copies_second():
    pos = np.cumsum(np.ones((5, 2, 2)), axis=0)
    w = TrajectoryWindow(positions=pos, agent_ids=(1, 2), t_obs=2, t_pred=3)
    u = displacements(w).u
    assert np.array_equal(u[0], u[1])
    assert np.allclose(u[1:], 1.0)


def test_grid_transform_round_trip():
    s = 4.0
    grid = SceneGrid(data=np.zeros((8, 8, 1), np.float32),
                     world_to_grid=np.array([[s, 0, 1.0], [0, s, 2.0], [0, 0, 1]]))
    p = (1.25, -0.5)
    assert np.allclose(cell_to_world(grid, world_to_cell(grid, p)), p)


def test_grid_rejects_singular_transform():
    with pytest.raises(TransformError):
        SceneGrid(data=np.zeros((2, 2, 1), np.float32), world_to_grid=np.zeros((3, 3)))


def test_native_grid_round_trip(tmp_path):
    rng = np.random.Generator(np.random.Philox(0))
    grid = SceneGrid(data=rng.uniform(0, 1, (5, 7, 3)).astype(np.float32),
                     world_to_grid=np.array([[2.0, 0, -1], [0, 2.0, 3], [0, 0, 1]]))
    path = tmp_path / "g.grid"
    save_grid(grid, path)
    loaded = load_scene_grid(path)
    assert np.array_equal(loaded.data, grid.data)
    assert np.array_equal(loaded.world_to_grid, grid.world_to_grid)


def test_pgm_grid_loading(tmp_path):
    path = tmp_path / "map.pgm"
    pixels = bytes(range(16))
    path.write_bytes(b"P5\n# comment\n4 4\n255\n" + pixels)
    grid = load_scene_grid(path, world_origin=(1.0, 2.0), cell_size=0.5)
    assert grid.data.shape == (4, 4, 1)
    assert abs(grid.data[3, 2, 0] - 14 / 255) < 1e-6
    assert np.allclose(world_to_cell(grid, (1.0, 2.0)), (0.0, 0.0))
    assert np.allclose(world_to_cell(grid, (2.0, 2.5)), (2.0, 1.0))


def test_unknown_grid_magic(tmp_path):
    path = tmp_path / "bad.grid"
    path.write_bytes(b"XXXX garbage")
    with pytest.raises(FormatError):
        load_scene_grid(path)


def test_truncated_grid(tmp_path):
    path = tmp_path / "trunc.grid"
    path.write_bytes(b"SSAG" + b"\x00" * 10)
    with pytest.raises(FormatError):
        load_scene_grid(path)
