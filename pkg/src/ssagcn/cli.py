"""Command-line entry point for batch experiments.

Every command is deterministic given identical inputs and --seed; the only
non-reproducible output field is runtime_s in reports. Errors exit with a
one-line machine-parsable message on stderr and a distinct exit code:
2 usage, 3 missing/bad input file, 4 incompatible checkpoint, 1 other.
"""

from __future__ import annotations

import logging
import os
import sys
from functools import wraps
from pathlib import Path

import click

from . import evaluate as ev
from . import plotting, synth, trajdata
from .model import VARIANTS, predict_trajectories
from .social import SsaConfig
from .training import Checkpoint, IncompatibleCheckpoint, TrainConfig
from .training import save_log_csv, train as run_train

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_CHECKPOINT = 4

log = logging.getLogger("ssagcn")


def _setup_logging() -> None:
    level = os.environ.get("SSAGCN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(code: int, kind: str, message: str):
    click.echo(f"error: {kind}: {message}", err=True)
    sys.exit(code)


def handle_errors(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FileNotFoundError as e:
            _fail(EXIT_INPUT, "missing-file", str(e))
        except (trajdata.ParseError, trajdata.DuplicateRecord, trajdata.EmptyDataset,
                trajdata.FormatError, trajdata.TransformError) as e:
            _fail(EXIT_INPUT, "bad-input", str(e))
        except IncompatibleCheckpoint as e:
            _fail(EXIT_CHECKPOINT, "incompatible-checkpoint", str(e))
        except ValueError as e:
            _fail(1, "invalid", str(e))
    return wrapper


def load_scenes(data: str) -> list[trajdata.RawScene]:
    path = Path(data)
    if not path.exists():
        raise FileNotFoundError(data)
    files = sorted(path.glob("*.txt")) if path.is_dir() else [path]
    if not files:
        raise FileNotFoundError(f"no *.txt trajectory files in {data}")
    return [trajdata.parse_trajectory_file(f, name=f.stem) for f in files]


def load_windows(data: str, t_obs: int, t_pred: int) -> list[trajdata.TrajectoryWindow]:
    windows = []
    for scene in load_scenes(data):
        windows += trajdata.build_windows(scene, t_obs, t_pred)
    if not windows:
        raise click.ClickException("no complete windows in dataset")
    return windows


def maybe_grid(scene: str | None) -> trajdata.SceneGrid | None:
    if scene is None:
        return None
    if not Path(scene).exists():
        raise FileNotFoundError(scene)
    return trajdata.load_scene_grid(scene)


@click.group()
def main():
    """Pedestrian trajectory prediction toolkit."""
    _setup_logging()


@main.command()
@click.option("--data", required=True, help="Trajectory file or directory.")
@handle_errors
def ingest(data):
    """Validate trajectory files and print dataset statistics."""
    for scene in load_scenes(data):
        agents = {a for _, a, _, _ in scene.records}
        windows = trajdata.build_windows(scene)
        click.echo(f"{scene.name or 'scene'}: {len(scene.records)} records, "
                   f"{len(agents)} agents, stride {scene.frame_stride}, "
                   f"{len(windows)} windows (8 obs + 12 pred)")


@main.command("synth")
@click.option("--kind", type=click.Choice(synth.KINDS), required=True)
@click.option("--out", required=True, help="Output directory.")
@click.option("--count", default=1, show_default=True, help="Scenario instances.")
@click.option("--agents", default=2, show_default=True)
@click.option("--noise", default=0.01, show_default=True)
@click.option("--duration", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--emit-grid", is_flag=True, help="Also write the obstacle grid.")
@handle_errors
def synth_cmd(kind, out, count, agents, noise, duration, seed, emit_grid):
    """Generate synthetic scenario files."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        spec = synth.ScenarioSpec(kind=kind, n_agents=agents, noise_sigma=noise,
                                  duration=duration, seed=seed + i,
                                  emit_grid=emit_grid)
        scene, grid = synth.generate(spec)
        (out_dir / f"{scene.name}.txt").write_text(synth.scene_to_text(scene),
                                                   encoding="utf-8")
        if grid is not None:
            trajdata.save_grid(grid, out_dir / f"{scene.name}.grid")
    click.echo(f"wrote {count} {kind} scenario(s) to {out_dir}")


def train_options(fn):
    for opt in reversed([
        click.option("--data", required=True),
        click.option("--scene", default=None, help="Scene grid file."),
        click.option("--epochs", default=200, show_default=True),
        click.option("--lr", default=0.001, show_default=True),
        click.option("--theta", default=0.10, show_default=True),
        click.option("--variant", type=click.Choice(VARIANTS), default="full",
                     show_default=True),
        click.option("--seed", default=0, show_default=True),
    ]):
        fn = opt(fn)
    return fn


@main.command("train")
@train_options
@click.option("--leave-out", default=None,
              help="Scene name to hold out (leave-one-out protocol).")
@click.option("--out", required=True, help="Checkpoint output path.")
@handle_errors
def train_cmd(data, scene, epochs, lr, theta, variant, seed, leave_out, out):
    """Train a model and write a checkpoint (plus a CSV training log)."""
    grid = maybe_grid(scene)
    cfg = TrainConfig(lr=lr, epochs=epochs, theta=theta, variant=variant,
                      seed=seed, leave_out=leave_out or "")
    scenes = load_scenes(data)
    if leave_out:
        if leave_out not in {s.name for s in scenes}:
            raise click.ClickException(f"scene {leave_out!r} not in dataset")
        scenes = [s for s in scenes if s.name != leave_out]
    windows = []
    for s in scenes:
        windows += trajdata.build_windows(s, cfg.t_obs, cfg.t_pred)
    if not windows:
        raise click.ClickException("no complete windows in dataset")

    def progress(epoch, nll):
        log.info("epoch %d mean NLL %.4f", epoch, nll)

    ckpt = run_train(windows, grid, cfg, progress=progress)
    ckpt.save(out)
    save_log_csv(ckpt, str(out) + ".log.csv")
    plotting.plot_training_log(ckpt.log, str(out) + ".log.svg")
    click.echo(f"trained {variant} on {len(windows)} windows, "
               f"final NLL {ckpt.log[-1]:.4f}, saved {out}")


@main.command("eval")
@click.option("--ckpt", required=True)
@click.option("--data", required=True)
@click.option("--scene", default=None)
@click.option("--k", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, help="Report path (defaults to stdout).")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@handle_errors
def eval_cmd(ckpt, data, scene, k, seed, out, fmt):
    """Evaluate a checkpoint: ADE, FDE, collision percentage."""
    if not Path(ckpt).exists():
        raise FileNotFoundError(ckpt)
    checkpoint = Checkpoint.load(ckpt)
    cfg = checkpoint.config
    windows = load_windows(data, cfg.t_obs, cfg.t_pred)
    grid = maybe_grid(scene)
    report = ev.evaluate(checkpoint, windows, grid, k, seed=seed,
                         scene=Path(data).stem)
    text = ev.reports_to_csv([report]) if fmt == "csv" else ev.reports_to_json([report])
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@main.command("predict")
@click.option("--ckpt", required=True)
@click.option("--data", required=True)
@click.option("--scene", default=None)
@click.option("--k", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, help="CSV of predicted positions.")
@handle_errors
def predict_cmd(ckpt, data, scene, k, seed, out):
    """Write predicted trajectories (mode for K=1, samples for K>1)."""
    from .model import forward_from_context, prepare_window
    from .rng import Rng

    if not Path(ckpt).exists():
        raise FileNotFoundError(ckpt)
    checkpoint = Checkpoint.load(ckpt)
    cfg = checkpoint.config
    windows = load_windows(data, cfg.t_obs, cfg.t_pred)
    grid = maybe_grid(scene)
    rng = Rng(seed)
    lines = ["window,sample,step,agent_id,x,y"]
    for wi, w in enumerate(windows):
        seq = forward_from_context(prepare_window(w, grid, checkpoint.params),
                                   checkpoint.params)
        trajs = (predict_trajectories(seq, 1, mode=True) if k == 1
                 else predict_trajectories(seq, k, rng=rng))
        for s in range(trajs.shape[0]):
            for t in range(trajs.shape[1]):
                for a, aid in enumerate(w.agent_ids):
                    lines.append(f"{wi},{s},{t},{aid},"
                                 f"{trajs[s, t, a, 0]:.9g},{trajs[s, t, a, 1]:.9g}")
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"wrote predictions for {len(windows)} windows to {out}")


@main.command("ablate")
@train_options
@click.option("--axis", type=click.Choice(["theta", "factors", "variant"]),
              required=True)
@click.option("--k", default=1, show_default=True)
@click.option("--out", required=True, help="Sweep table CSV path.")
@handle_errors
def ablate_cmd(data, scene, epochs, lr, theta, variant, seed, axis, k, out):
    """Run a train+evaluate sweep along one ablation axis."""
    grid = maybe_grid(scene)
    cfg = TrainConfig(lr=lr, epochs=epochs, theta=theta, variant=variant, seed=seed)
    windows = load_windows(data, cfg.t_obs, cfg.t_pred)
    if axis == "theta":
        axis_spec = {"theta": [0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16]}
    elif axis == "factors":
        axis_spec = {"factors": [(s, d, l) for s in (False, True)
                                 for d in (False, True) for l in (False, True)]}
    else:
        axis_spec = {"variant": list(VARIANTS)}

    def progress(label, rep):
        log.info("%s: ade %.4f fde %.4f", label, rep.ade, rep.fde)

    rows = ev.ablation_sweep(windows, grid, cfg, axis_spec, k=k, progress=progress)
    Path(out).write_text(ev.sweep_to_csv(rows), encoding="utf-8")
    click.echo(f"wrote {len(rows)} sweep rows to {out}")


@main.command("gradcheck")
@click.option("--seed", default=4, show_default=True)
@click.option("--tolerance", default=1e-4, show_default=True)
@handle_errors
def gradcheck_cmd(seed, tolerance):
    """End-to-end finite-difference gradient check on a synthetic window."""
    from .checks import end_to_end_grad_check

    err = end_to_end_grad_check(seed=seed)
    click.echo(f"max relative error: {err:.3e}")
    if err >= tolerance:
        sys.exit(1)


@main.command("plot")
@click.option("--window", "window_file", required=True,
              help="Trajectory file; the first complete window is drawn.")
@click.option("--ckpt", default=None, help="Optional checkpoint for predictions.")
@click.option("--scene", default=None)
@click.option("--k", default=0, show_default=True, help="Sample fan size (0 = none).")
@click.option("--adjacency", is_flag=True, help="Draw social-attention edges.")
@click.option("--theta", default=0.10, show_default=True)
@click.option("--edge-threshold", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, help="Figure path (.svg/.png/.pdf).")
@handle_errors
def plot_cmd(window_file, ckpt, scene, k, adjacency, theta, edge_threshold, seed, out):
    """Render one window as a figure."""
    from .model import forward_from_context, prepare_window
    from .rng import Rng

    scene_obj = trajdata.parse_trajectory_file(Path(window_file),
                                               name=Path(window_file).stem)
    t_obs, t_pred = 8, 12
    prediction = samples = None
    checkpoint = None
    if ckpt:
        if not Path(ckpt).exists():
            raise FileNotFoundError(ckpt)
        checkpoint = Checkpoint.load(ckpt)
        t_obs, t_pred = checkpoint.config.t_obs, checkpoint.config.t_pred
    windows = trajdata.build_windows(scene_obj, t_obs, t_pred)
    if not windows:
        raise click.ClickException("no complete window in file")
    w = windows[0]
    if checkpoint is not None:
        seq = forward_from_context(prepare_window(w, maybe_grid(scene),
                                                  checkpoint.params),
                                   checkpoint.params)
        prediction = predict_trajectories(seq, 1, mode=True)[0]
        if k > 0:
            samples = predict_trajectories(seq, k, rng=Rng(seed))
    n_edges = plotting.plot_window(
        w, out, prediction=prediction, samples=samples, show_adjacency=adjacency,
        edge_threshold=edge_threshold, ssa_config=SsaConfig(theta=theta),
        title=Path(window_file).stem)
    click.echo(f"wrote {out} ({n_edges} attention edges)")


if __name__ == "__main__":
    main()
