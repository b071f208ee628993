"""Benchmark harness: dataset generation, the experiment grid, and reports.

Every grid cell derives its seeds from the master seed, so a grid is a pure
function of its configuration: all optimizers face identical targets and
identical initial points for a given repetition, rerunning a config
reproduces the CSV byte for byte (apart from wall-clock columns), and cells
can run on a worker pool without affecting results. Individual cell failures
are recorded as rows flagged `failed` and never abort the grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, add_noise_snr, read_wav, write_wav
from .features import ReprKind, mae
from .inversion import (
    MatchTask,
    match_single_param,
    match_static,
    match_windowed,
    param_error,
)
from .optimizers import METHODS, OptimizerConfig, StopCriteria
from .params import N_PARAMS, PARAM_NAMES, ParamTrajectory, SynthConfig, TractParams
from .quality import stoi
from .seeds import stable_seed
from .vocal_tract import synthesize_static, synthesize_trajectory

EXPERIMENTS = ("single_param", "all_params", "noisy", "time_varying", "real_audio")

CSV_HEADER = (
    "experiment,optimizer,representation,repetition,target_id,"
    "err_pitch,err_voiceness,err_tongue_idx,err_tongue_diam,err_lips,"
    "err_constr_idx,err_constr_diam,err_throat,"
    "mean_norm_error,audio_mae,stoi,n_evals,elapsed_s,stop_reason"
)

FAILED = "failed"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    optimizers: tuple = METHODS
    representations: tuple = tuple(k.value for k in ReprKind)
    repetitions: int = 20
    master_seed: int = 0
    max_evals: int = 2000
    clip_duration_s: float = 0.5
    snr_grid_db: tuple = (40.0, 30.0, 20.0, 10.0, 5.0, 0.0)
    target_dir: str | None = None
    window_ms: float = 100.0
    workers: int = 1
    target_cost: float = 1e-4
    patience_loops: int = 20

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        object.__setattr__(self, "optimizers", tuple(self.optimizers))
        object.__setattr__(self, "representations", tuple(self.representations))
        object.__setattr__(self, "snr_grid_db",
                           tuple(float(s) for s in self.snr_grid_db))
        for opt in self.optimizers:
            if opt not in METHODS:
                raise ValueError(f"unknown optimizer {opt!r}")
        for rep in self.representations:
            ReprKind.from_string(rep)
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.experiment == "noisy" and not self.snr_grid_db:
            raise ValueError("noisy experiment needs a non-empty snr_grid_db")
        if self.experiment == "real_audio" and not self.target_dir:
            raise ValueError("real_audio experiment needs target_dir")

    def stop_criteria(self) -> StopCriteria:
        return StopCriteria(target_cost=self.target_cost,
                            patience_loops=self.patience_loops,
                            max_evals=self.max_evals)

    @classmethod
    def desk(cls, experiment: str, **overrides) -> "ExperimentConfig":
        """CI-sized defaults: 0.5 s clips, 2000 evaluations, 10 repetitions."""
        base = dict(experiment=experiment, repetitions=10,
                    clip_duration_s=0.5, max_evals=2000)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def paper_scale(cls, experiment: str, **overrides) -> "ExperimentConfig":
        """Full-scale preset: 1 s clips, 20 repetitions, generous budget."""
        base = dict(experiment=experiment, repetitions=20,
                    clip_duration_s=1.0, max_evals=20000)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        profile = raw.pop("profile", None)
        if profile == "desk":
            return cls.desk(**raw)
        if profile in ("paper", "paper_scale"):
            return cls.paper_scale(**raw)
        if profile is not None:
            raise ValueError(f"unknown profile {profile!r}; use 'desk' or 'paper'")
        return cls(**raw)


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: str
    params: TractParams
    seed: int


@dataclass
class DatasetManifest:
    entries: list

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest ids must be unique")

    def save(self, path):
        payload = [
            {"id": e.id, "path": e.path, "params": e.params.as_dict(), "seed": e.seed}
            for e in self.entries
        ]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls([
            ManifestEntry(id=e["id"], path=e["path"],
                          params=TractParams.from_dict(e["params"]),
                          seed=int(e["seed"]))
            for e in payload
        ])


def generate_dataset(n: int, master_seed: int, out_dir,
                     duration_s: float = 1.0) -> DatasetManifest:
    """Synthesize `n` clips with uniformly random parameters and write WAVs.

    Each entry gets its own derived seed, so regenerating with the same master
    seed reproduces both the manifest and the sample data bit for bit.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n):
        seed = stable_seed(master_seed, "dataset", i)
        params = TractParams.random(np.random.default_rng(seed))
        clip = synthesize_static(params, duration_s, SynthConfig(seed=seed))
        name = f"clip_{i:04d}.wav"
        write_wav(out_dir / name, clip, "float32")
        entries.append(ManifestEntry(id=f"clip_{i:04d}", path=name,
                                     params=params, seed=seed))
    manifest = DatasetManifest(entries)
    manifest.save(out_dir / "manifest.json")
    return manifest


@dataclass
class ReportRow:
    experiment: str
    optimizer: str
    representation: str
    repetition: int
    target_id: str
    param_errors: np.ndarray | None
    mean_norm_error: float | None
    audio_mae: float | None
    stoi: float | None
    n_evals: int | None
    elapsed_s: float | None
    stop_reason: str

    def csv_fields(self) -> list[str]:
        def num(v):
            return "" if v is None else repr(float(v))

        errors = ([""] * N_PARAMS if self.param_errors is None
                  else [repr(float(e)) for e in self.param_errors])
        return [
            self.experiment, self.optimizer, self.representation,
            str(self.repetition), self.target_id, *errors,
            num(self.mean_norm_error), num(self.audio_mae), num(self.stoi),
            "" if self.n_evals is None else str(self.n_evals),
            num(self.elapsed_s), self.stop_reason,
        ]


@dataclass
class ExperimentReport:
    rows: list

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if r.stop_reason.startswith(FAILED))


# --------------------------------------------------------------------------
# Grid construction and execution

@dataclass(frozen=True)
class _Cell:
    experiment: str
    optimizer: str
    representation: str
    repetition: int
    param_index: int | None = None      # single_param only
    snr_db: float | None = None         # noisy only
    target_path: str | None = None      # real_audio only
    target_id: str = ""


def _build_cells(cfg: ExperimentConfig) -> list[_Cell]:
    optimizers = cfg.optimizers
    if cfg.experiment == "single_param":
        # CMA-ES cannot search a single parameter; it is excluded up front.
        optimizers = tuple(o for o in optimizers if o != "cmaes")
    cells = []
    if cfg.experiment == "single_param":
        for opt in optimizers:
            for rep_kind in cfg.representations:
                for pi in range(N_PARAMS):
                    for r in range(cfg.repetitions):
                        cells.append(_Cell(cfg.experiment, opt, rep_kind, r,
                                           param_index=pi,
                                           target_id=f"t{r:03d}_{PARAM_NAMES[pi]}"))
    elif cfg.experiment in ("all_params", "time_varying"):
        for opt in optimizers:
            for rep_kind in cfg.representations:
                for r in range(cfg.repetitions):
                    cells.append(_Cell(cfg.experiment, opt, rep_kind, r,
                                       target_id=f"t{r:03d}"))
    elif cfg.experiment == "noisy":
        for opt in optimizers:
            for rep_kind in cfg.representations:
                for r in range(cfg.repetitions):
                    for snr in cfg.snr_grid_db:
                        cells.append(_Cell(cfg.experiment, opt, rep_kind, r,
                                           snr_db=snr,
                                           target_id=f"t{r:03d}_snr{snr:g}"))
    elif cfg.experiment == "real_audio":
        paths = sorted(p for p in Path(cfg.target_dir).iterdir()
                       if p.suffix.lower() == ".wav")
        if not paths:
            raise ValueError(f"no WAV files found in {cfg.target_dir}")
        for opt in optimizers:
            for rep_kind in cfg.representations:
                for r in range(cfg.repetitions):
                    for p in paths:
                        cells.append(_Cell(cfg.experiment, opt, rep_kind, r,
                                           target_path=str(p),
                                           target_id=p.stem))
    return cells


def _target_params(cfg: ExperimentConfig, repetition: int) -> TractParams:
    # Target parameters depend only on (master_seed, repetition): every
    # optimizer and representation faces the same targets.
    rng = np.random.default_rng(stable_seed(cfg.master_seed, "target", repetition))
    return TractParams.random(rng)


def _initial_point(cfg: ExperimentConfig, repetition: int) -> np.ndarray:
    # Likewise the initial sample is shared across optimizers.
    rng = np.random.default_rng(stable_seed(cfg.master_seed, "init", repetition))
    return rng.uniform(0.0, 1.0, size=N_PARAMS)


def _optimizer_config(cfg: ExperimentConfig, cell: _Cell) -> OptimizerConfig:
    return OptimizerConfig(
        method=cell.optimizer,
        seed=stable_seed(cfg.master_seed, cell.optimizer, cell.representation,
                         cell.repetition),
    )


def _safe_stoi(target: AudioClip, resynth: AudioClip) -> float | None:
    try:
        return stoi(target, resynth).value
    except ValueError:
        return None


def _run_cell(cfg: ExperimentConfig, cell: _Cell) -> ReportRow:
    repr_kind = ReprKind.from_string(cell.representation)
    stop = cfg.stop_criteria()
    synth_cfg = SynthConfig(seed=stable_seed(cfg.master_seed, "synth",
                                             cell.repetition))

    if cell.experiment == "time_varying":
        return _run_time_varying_cell(cfg, cell, repr_kind, stop, synth_cfg)

    if cell.experiment == "real_audio":
        target = read_wav(cell.target_path)
        truth = None
    else:
        truth = _target_params(cfg, cell.repetition)
        target = synthesize_static(truth, cfg.clip_duration_s, synth_cfg)
        if cell.experiment == "noisy":
            target = add_noise_snr(
                target, cell.snr_db,
                seed=stable_seed(cfg.master_seed, "noise", cell.repetition,
                                 f"{cell.snr_db:g}"))

    if cell.experiment == "real_audio":
        task = MatchTask(target=target, repr_kind=repr_kind,
                         optimizer=_optimizer_config(cfg, cell), stop=stop,
                         synth=synth_cfg)
        trajectory = match_windowed(task, window_ms=cfg.window_ms)
        resynth = synthesize_trajectory(trajectory.trajectory(),
                                        len(target) / target.sample_rate_hz,
                                        synth_cfg)
        n = min(len(resynth), len(target))
        return ReportRow(
            experiment=cell.experiment, optimizer=cell.optimizer,
            representation=cell.representation, repetition=cell.repetition,
            target_id=cell.target_id, param_errors=None, mean_norm_error=None,
            audio_mae=mae(target.samples[:n], resynth.samples[:n]),
            stoi=_safe_stoi(AudioClip(target.samples[:n], target.sample_rate_hz),
                            AudioClip(resynth.samples[:n], target.sample_rate_hz)),
            n_evals=sum(w.optimization.n_evals for w in trajectory.window_results),
            elapsed_s=sum(w.optimization.elapsed_s
                          for w in trajectory.window_results),
            stop_reason=trajectory.window_results[-1].optimization.stop_reason,
        )

    x0_full = _initial_point(cfg, cell.repetition)
    if cell.experiment == "single_param":
        mask = np.zeros(N_PARAMS, dtype=bool)
        mask[cell.param_index] = True
        task = MatchTask(target=target, repr_kind=repr_kind,
                         optimizer=_optimizer_config(cfg, cell), stop=stop,
                         free_mask=mask, fixed_values=truth, synth=synth_cfg)
        match = match_single_param(task, truth=truth, x0=x0_full[mask])
    else:
        task = MatchTask(target=target, repr_kind=repr_kind,
                         optimizer=_optimizer_config(cfg, cell), stop=stop,
                         synth=synth_cfg)
        match = match_static(task, truth=truth, x0=x0_full)

    resynth = synthesize_static(match.params, len(target) / target.sample_rate_hz,
                                synth_cfg)
    return ReportRow(
        experiment=cell.experiment, optimizer=cell.optimizer,
        representation=cell.representation, repetition=cell.repetition,
        target_id=cell.target_id, param_errors=match.param_errors,
        mean_norm_error=match.mean_param_error, audio_mae=match.audio_mae,
        stoi=_safe_stoi(target, resynth),
        n_evals=match.optimization.n_evals,
        elapsed_s=match.optimization.elapsed_s,
        stop_reason=match.optimization.stop_reason,
    )


def _run_time_varying_cell(cfg, cell, repr_kind, stop, synth_cfg) -> ReportRow:
    start = TractParams.random(np.random.default_rng(
        stable_seed(cfg.master_seed, "target", cell.repetition, "start")))
    end = TractParams.random(np.random.default_rng(
        stable_seed(cfg.master_seed, "target", cell.repetition, "end")))
    truth = ParamTrajectory(((0.0, start), (cfg.clip_duration_s, end)))
    target = synthesize_trajectory(truth, cfg.clip_duration_s, synth_cfg)

    task = MatchTask(target=target, repr_kind=repr_kind,
                     optimizer=_optimizer_config(cfg, cell), stop=stop,
                     synth=synth_cfg)
    trajectory = match_windowed(task, window_ms=cfg.window_ms,
                                truth_trajectory=truth)
    truth_at_centers = truth.sample_normalized(trajectory.times_s)
    errors = np.mean(np.abs(trajectory.smoothed - truth_at_centers), axis=0)

    resynth = synthesize_trajectory(trajectory.trajectory(),
                                    cfg.clip_duration_s, synth_cfg)
    n = min(len(resynth), len(target))
    return ReportRow(
        experiment=cell.experiment, optimizer=cell.optimizer,
        representation=cell.representation, repetition=cell.repetition,
        target_id=cell.target_id, param_errors=errors,
        mean_norm_error=float(errors.mean()),
        audio_mae=mae(target.samples[:n], resynth.samples[:n]),
        stoi=_safe_stoi(AudioClip(target.samples[:n], target.sample_rate_hz),
                        AudioClip(resynth.samples[:n], target.sample_rate_hz)),
        n_evals=sum(w.optimization.n_evals for w in trajectory.window_results),
        elapsed_s=sum(w.optimization.elapsed_s
                      for w in trajectory.window_results),
        stop_reason=trajectory.window_results[-1].optimization.stop_reason,
    )


def _run_cell_guarded(args) -> ReportRow:
    cfg, cell = args
    try:
        return _run_cell(cfg, cell)
    except Exception as exc:  # grid survives single-cell pathologies
        return ReportRow(
            experiment=cell.experiment, optimizer=cell.optimizer,
            representation=cell.representation, repetition=cell.repetition,
            target_id=cell.target_id or f"t{cell.repetition:03d}",
            param_errors=None, mean_norm_error=None, audio_mae=None,
            stoi=None, n_evals=None, elapsed_s=None,
            stop_reason=f"{FAILED}: {type(exc).__name__}: {exc}"[:200],
        )


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Execute the full optimizer x representation x repetition grid."""
    cells = _build_cells(cfg)
    jobs = [(cfg, cell) for cell in cells]
    if cfg.workers > 1:
        import multiprocessing

        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(cfg.workers) as pool:
            rows = pool.map(_run_cell_guarded, jobs, chunksize=1)
    else:
        rows = [_run_cell_guarded(job) for job in jobs]
    return ExperimentReport(rows)


# --------------------------------------------------------------------------
# Report output

def write_report(report: ExperimentReport, out_path) -> None:
    if not report.rows:
        raise ValueError("report has no rows")
    lines = [CSV_HEADER]
    for row in report.rows:
        lines.append(",".join(row.csv_fields()))
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_report(path) -> ExperimentReport:
    """Inverse of :func:`write_report` for plot regeneration."""
    import csv as _csv

    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        if ",".join(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected report header")
        for rec in reader:
            errors = rec[5:5 + N_PARAMS]
            param_errors = (None if any(e == "" for e in errors)
                            else np.array([float(e) for e in errors]))

            def opt_float(s):
                return None if s == "" else float(s)

            rows.append(ReportRow(
                experiment=rec[0], optimizer=rec[1], representation=rec[2],
                repetition=int(rec[3]), target_id=rec[4],
                param_errors=param_errors,
                mean_norm_error=opt_float(rec[13]),
                audio_mae=opt_float(rec[14]), stoi=opt_float(rec[15]),
                n_evals=None if rec[16] == "" else int(rec[16]),
                elapsed_s=opt_float(rec[17]), stop_reason=rec[18],
            ))
    return ExperimentReport(rows)


def _median_or_nan(values) -> float:
    values = [v for v in values if v is not None and np.isfinite(v)]
    return float(np.median(values)) if values else float("nan")


def render_plots(report: ExperimentReport, out_dir) -> list:
    """Write the benchmark summary plots as PNG files; returns their paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not report.rows:
        raise ValueError("report has no rows")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [r for r in report.rows if not r.stop_reason.startswith(FAILED)]
    optimizers = sorted({r.optimizer for r in rows})
    representations = sorted({r.representation for r in rows})
    written = []

    def save(fig, name):
        path = out_dir / name
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    with_errors = [r for r in rows if r.param_errors is not None]
    short_names = ["pitch", "voice", "tng_idx", "tng_diam", "lips",
                   "cns_idx", "cns_diam", "throat"]

    def grouped_error_bars(group_values, group_of, title, xlabel, name):
        fig, ax = plt.subplots(figsize=(9, 4))
        width = 0.8 / N_PARAMS
        xs = np.arange(len(group_values))
        for pi in range(N_PARAMS):
            meds = [
                _median_or_nan([r.param_errors[pi] for r in with_errors
                                if group_of(r) == g])
                for g in group_values
            ]
            ax.bar(xs + pi * width, meds, width, label=short_names[pi])
        ax.set_xticks(xs + 0.4 - width / 2)
        ax.set_xticklabels(group_values)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("median normalized error")
        ax.set_title(title)
        ax.legend(fontsize=7, ncol=4)
        save(fig, name)

    if with_errors:
        grouped_error_bars(optimizers, lambda r: r.optimizer,
                           "Per-parameter error by optimizer", "optimizer",
                           "param_error_by_optimizer.png")
        grouped_error_bars(representations, lambda r: r.representation,
                           "Per-parameter error by representation",
                           "representation", "param_error_by_representation.png")

    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / max(1, len(representations))
    xs = np.arange(len(optimizers))
    for ri, rep_kind in enumerate(representations):
        meds = [
            _median_or_nan([r.audio_mae for r in rows
                            if r.optimizer == o and r.representation == rep_kind])
            for o in optimizers
        ]
        ax.bar(xs + ri * width, meds, width, label=rep_kind)
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels(optimizers)
    ax.set_xlabel("optimizer")
    ax.set_ylabel("median audio MAE")
    ax.set_title("Waveform MAE of matched audio")
    ax.legend(fontsize=8)
    save(fig, "audio_mae.png")

    fig, ax = plt.subplots(figsize=(7, 4))
    meds = [_median_or_nan([r.elapsed_s for r in rows if r.optimizer == o])
            for o in optimizers]
    ax.bar(optimizers, meds)
    ax.set_xlabel("optimizer")
    ax.set_ylabel("median optimizer wall time [s]")
    ax.set_title("Computational cost")
    save(fig, "timing.png")

    noisy = [r for r in rows if r.experiment == "noisy" and "_snr" in r.target_id]
    if noisy:
        fig, ax = plt.subplots(figsize=(7, 4))
        snrs = sorted({float(r.target_id.rsplit("_snr", 1)[1]) for r in noisy},
                      reverse=True)
        for o in optimizers:
            meds = [
                _median_or_nan([
                    r.audio_mae for r in noisy
                    if r.optimizer == o
                    and float(r.target_id.rsplit("_snr", 1)[1]) == s])
                for s in snrs
            ]
            ax.plot(snrs, meds, marker="o", label=o)
        ax.set_xlabel("SNR [dB]")
        ax.invert_xaxis()
        ax.set_ylabel("median audio MAE")
        ax.set_title("Robustness to additive noise")
        ax.legend(fontsize=8)
        save(fig, "snr_curves.png")

    return written
