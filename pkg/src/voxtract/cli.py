"""Command-line interface for synthesis, matching, and the benchmark grid.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 benchmark grid finished
with failed cells.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .audio_io import WavError, read_wav, write_wav
from .bench import (
    ExperimentConfig,
    generate_dataset,
    read_report,
    render_plots,
    run_experiment,
    write_report,
)
from .features import ReprKind
from .inversion import MatchTask, match_static, match_windowed
from .optimizers import METHODS, OptimizerConfig, StopCriteria
from .params import ParamTrajectory, SynthConfig, TractParams
from .quality import stoi as compute_stoi
from .vocal_tract import synthesize_static, synthesize_trajectory

REPR_CHOICES = [k.value for k in ReprKind]


@click.group()
def cli():
    """Vocal-tract synthesis and black-box parameter matching."""


@cli.command()
@click.option("--params", "params_path", type=click.Path(),
              help="JSON file with one parameter set.")
@click.option("--trajectory", "trajectory_path", type=click.Path(),
              help="JSON file with a list of {time_s, params} keyframes.")
@click.option("--duration", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--encoding", type=click.Choice(["float32", "pcm16"]),
              default="float32", show_default=True)
@click.option("--out", required=True, type=click.Path())
def synth(params_path, trajectory_path, duration, seed, encoding, out):
    """Synthesize a WAV from a parameter set or a keyframe trajectory."""
    if bool(params_path) == bool(trajectory_path):
        raise click.UsageError("provide exactly one of --params or --trajectory")
    cfg = SynthConfig(seed=seed)
    if params_path:
        with open(params_path, encoding="utf-8") as fh:
            params = TractParams.from_dict(json.load(fh))
        clip = synthesize_static(params, duration, cfg)
    else:
        with open(trajectory_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        frames = tuple(
            (float(kf["time_s"]), TractParams.from_dict(kf["params"]))
            for kf in raw
        )
        clip = synthesize_trajectory(ParamTrajectory(frames), duration, cfg)
    clipped = write_wav(out, clip, encoding)
    if clipped:
        click.echo(f"warning: {clipped} samples clipped", err=True)
    click.echo(f"wrote {out}: {len(clip)} samples at {clip.sample_rate_hz} Hz")


@cli.command()
@click.option("--n", type=int, required=True, help="Number of clips.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--duration", type=float, default=1.0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def dataset(n, seed, duration, out):
    """Generate a corpus of random-parameter clips plus its manifest."""
    manifest = generate_dataset(n, seed, out, duration_s=duration)
    click.echo(f"wrote {len(manifest.entries)} clips and manifest.json to {out}")


@cli.command()
@click.option("--target", required=True, type=click.Path(),
              help="Target WAV (mono, 48 kHz).")
@click.option("--repr", "repr_name", type=click.Choice(REPR_CHOICES),
              default="mel", show_default=True)
@click.option("--method", type=click.Choice(list(METHODS)), default="ga",
              show_default=True)
@click.option("--windowed", is_flag=True,
              help="Tile the clip with windows and match each one.")
@click.option("--window-ms", type=float, default=100.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-evals", type=int, default=2000, show_default=True)
@click.option("--out", required=True, type=click.Path(),
              help="Where to write the match result JSON.")
def match(target, repr_name, method, windowed, window_ms, seed, max_evals, out):
    """Recover tract parameters for a target recording."""
    clip = read_wav(target)
    task = MatchTask(
        target=clip,
        repr_kind=ReprKind.from_string(repr_name),
        optimizer=OptimizerConfig(method=method, seed=seed),
        stop=StopCriteria(max_evals=max_evals),
        synth=SynthConfig(seed=seed),
    )
    if windowed:
        res = match_windowed(task, window_ms=window_ms)
        payload = {
            "mode": "windowed",
            "window_s": res.window_s,
            "times_s": res.times_s.tolist(),
            "raw_normalized": res.raw.tolist(),
            "smoothed_normalized": res.smoothed.tolist(),
            "params": [p.as_dict() for p in res.smoothed_params()],
            "windows": [
                {
                    "cost": w.optimization.best_cost,
                    "n_evals": w.optimization.n_evals,
                    "stop_reason": w.optimization.stop_reason,
                }
                for w in res.window_results
            ],
        }
    else:
        res = match_static(task)
        payload = {
            "mode": "static",
            "params": res.params.as_dict(),
            "cost": res.optimization.best_cost,
            "audio_mae": res.audio_mae,
            "n_evals": res.optimization.n_evals,
            "elapsed_s": res.optimization.elapsed_s,
            "stop_reason": res.optimization.stop_reason,
        }
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    click.echo(f"wrote {out}")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(),
              help="Experiment configuration JSON.")
@click.option("--out-dir", required=True, type=click.Path())
def bench(config_path, out_dir):
    """Run an experiment grid; writes report.csv and plots."""
    cfg = ExperimentConfig.from_json(config_path)
    report = run_experiment(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / "report.csv")
    render_plots(report, out)
    click.echo(f"{len(report.rows)} rows -> {out / 'report.csv'}")
    if report.n_failed:
        click.echo(f"{report.n_failed} cells failed", err=True)
        sys.exit(3)


@cli.command(name="stoi")
@click.option("--ref", required=True, type=click.Path())
@click.option("--deg", required=True, type=click.Path())
def stoi_cmd(ref, deg):
    """Short-time objective intelligibility of --deg against --ref."""
    score = compute_stoi(read_wav(ref), read_wav(deg))
    click.echo(f"{score.value:.4f}")


@cli.command()
@click.option("--csv", "csv_path", required=True, type=click.Path())
@click.option("--plots-dir", required=True, type=click.Path())
def report(csv_path, plots_dir):
    """Regenerate the summary plots from a report CSV."""
    rep = read_report(csv_path)
    written = render_plots(rep, plots_dir)
    click.echo("\n".join(str(p) for p in written))


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, standalone_mode=False)
        return rv if isinstance(rv, int) else 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except (WavError, ValueError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
