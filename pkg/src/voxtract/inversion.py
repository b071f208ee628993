"""Sound matching: recover tract parameters from target audio.

Three modes cover the benchmark's needs: matching every parameter of a static
clip, matching a single unknown parameter with the rest pinned, and windowed
matching of time-varying clips where each 100 ms slice is treated as static
and the per-window solutions are smoothed into a trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from . import vocal_tract
from .audio_io import AudioClip
from .features import ReprKind, extract, mae
from .optimizers import Bounds, OptimizationResult, OptimizerConfig, StopCriteria, optimize
from .params import (
    N_PARAMS,
    ParamTrajectory,
    SynthConfig,
    TractParams,
    denormalize,
    normalized_array,
)
from .seeds import stable_seed

PIPELINE_RATE = 48000
DEFAULT_WINDOW_MS = 100.0


@dataclass(frozen=True)
class MatchTask:
    """Everything one matching run needs: target, loss, optimizer, and mask."""

    target: AudioClip
    repr_kind: ReprKind
    optimizer: OptimizerConfig
    stop: StopCriteria
    free_mask: np.ndarray = field(default_factory=lambda: np.ones(N_PARAMS, bool))
    fixed_values: TractParams | None = None
    synth: SynthConfig = SynthConfig()

    def __post_init__(self):
        mask = np.asarray(self.free_mask, dtype=bool)
        if mask.shape != (N_PARAMS,):
            raise ValueError(f"free_mask must have {N_PARAMS} entries")
        if not mask.any():
            raise ValueError("at least one parameter must be free")
        if not mask.all() and self.fixed_values is None:
            raise ValueError("fixed_values is required when any parameter is fixed")
        if self.target.sample_rate_hz != PIPELINE_RATE:
            raise ValueError(
                f"target must be {PIPELINE_RATE} Hz, got {self.target.sample_rate_hz}"
            )
        object.__setattr__(self, "free_mask", mask)

    @property
    def n_free(self) -> int:
        return int(self.free_mask.sum())


class MatchObjective:
    """Callable cost for the optimizer, with a residual form for TRF.

    The target's features are extracted once; each call embeds the free
    components into the fixed baseline, denormalizes, synthesizes a clip of
    the target's exact length, and compares feature vectors by MAE.
    """

    def __init__(self, task: MatchTask):
        self.task = task
        self.free_idx = np.flatnonzero(task.free_mask)
        base = task.fixed_values if task.fixed_values is not None else TractParams.midpoint()
        self.base_norm = normalized_array(base)
        self.target_features = extract(task.repr_kind, task.target)
        self.n_samples = len(task.target)

    def embed(self, x_free: np.ndarray) -> np.ndarray:
        full = self.base_norm.copy()
        full[self.free_idx] = x_free
        return full

    def params_for(self, x_free: np.ndarray) -> TractParams:
        return denormalize(np.clip(self.embed(x_free), 0.0, 1.0))

    def synthesize(self, x_free: np.ndarray) -> AudioClip:
        traj = ParamTrajectory(((0.0, self.params_for(x_free)),))
        return vocal_tract._synthesize_samples(traj, self.n_samples, self.task.synth)

    def candidate_features(self, x_free: np.ndarray) -> np.ndarray:
        return extract(self.task.repr_kind, self.synthesize(x_free))

    def __call__(self, x_free: np.ndarray) -> float:
        return mae(self.target_features, self.candidate_features(x_free))

    def residual(self, x_free: np.ndarray) -> np.ndarray:
        return self.target_features - self.candidate_features(x_free)


def make_objective(task: MatchTask) -> MatchObjective:
    return MatchObjective(task)


@dataclass
class MatchResult:
    optimization: OptimizationResult
    params: TractParams
    audio_mae: float
    param_errors: np.ndarray | None = None
    mean_param_error: float | None = None


@dataclass
class TrajectoryResult:
    window_results: list
    window_s: float
    times_s: np.ndarray          # window centers
    raw: np.ndarray              # (n_windows, 8) normalized solutions
    smoothed: np.ndarray         # (n_windows, 8) after Savitzky-Golay + clamp
    n_clamped: int = 0

    def smoothed_params(self) -> list[TractParams]:
        return [denormalize(row) for row in self.smoothed]

    def trajectory(self) -> ParamTrajectory:
        """Smoothed solutions as keyframes, extended back to t=0."""
        frames = [(0.0, denormalize(self.smoothed[0]))]
        for t, row in zip(self.times_s, self.smoothed):
            if t > 0.0:
                frames.append((float(t), denormalize(row)))
        return ParamTrajectory(tuple(frames))


def param_error(truth: TractParams, estimate: TractParams,
                free_mask=None) -> tuple[np.ndarray, float]:
    """Per-parameter |normalized truth - normalized estimate| and its mean.

    The mean is taken over the free parameters only (all of them when no mask
    is given).
    """
    errors = np.abs(normalized_array(truth) - normalized_array(estimate))
    if free_mask is None:
        mask = np.ones(N_PARAMS, dtype=bool)
    else:
        mask = np.asarray(free_mask, dtype=bool)
    return errors, float(errors[mask].mean())


def _run_match(task: MatchTask, truth: TractParams | None, x0) -> MatchResult:
    objective = make_objective(task)
    result = optimize(
        objective,
        Bounds.unit_box(task.n_free),
        task.optimizer,
        task.stop,
        x0=x0,
        residual_fn=objective.residual if task.optimizer.method == "trf" else None,
    )
    params = objective.params_for(result.best_x)
    resynth = objective.synthesize(result.best_x)
    audio_mae = mae(task.target.samples, resynth.samples)
    match = MatchResult(result, params, audio_mae)
    if truth is not None:
        match.param_errors, match.mean_param_error = param_error(
            truth, params, task.free_mask)
    return match


def match_static(task: MatchTask, truth: TractParams | None = None,
                 x0=None) -> MatchResult:
    """Match all eight parameters of a static target at once."""
    if not task.free_mask.all():
        raise ValueError("match_static expects every parameter free")
    return _run_match(task, truth, x0)


def match_single_param(task: MatchTask, truth: TractParams | None = None,
                       x0=None) -> MatchResult:
    """Match exactly one unknown parameter; the rest are pinned.

    CMA-ES is rejected here: it does not support single-parameter search.
    """
    if task.n_free != 1:
        raise ValueError("match_single_param expects exactly one free parameter")
    if task.optimizer.method == "cmaes":
        raise ValueError("CMA-ES does not support single-parameter search")
    return _run_match(task, truth, x0)


def savgol_smooth(series, window_points: int = 9, polyorder: int = 2) -> np.ndarray:
    """Savitzky-Golay smoothing of a per-window value series.

    Each point becomes the local least-squares polynomial fit evaluated at
    that point; the endpoints evaluate the edge-window fits (polynomial
    extrapolation). Output is clamped to [0, 1]. Series shorter than the
    window come back unchanged (apart from the clamp).
    """
    if window_points % 2 == 0 or window_points <= polyorder:
        raise ValueError("window_points must be odd and greater than polyorder")
    series = np.asarray(series, dtype=float)
    if len(series) < window_points:
        return np.clip(series, 0.0, 1.0)
    smoothed = scipy.signal.savgol_filter(series, window_points, polyorder,
                                          mode="interp")
    return np.clip(smoothed, 0.0, 1.0)


def match_windowed(task: MatchTask, window_ms: float = DEFAULT_WINDOW_MS,
                   truth_trajectory: ParamTrajectory | None = None,
                   smooth_window: int = 9,
                   smooth_polyorder: int = 2) -> TrajectoryResult:
    """Match a time-varying clip by tiling it with non-overlapping windows.

    Every window is matched as a static task (all parameters free); window
    i+1 warm-starts from window i's solution. A trailing partial window is
    dropped. Per-window synthesis and optimizer seeds are fixed by window
    index so the result is reproducible.
    """
    if not task.free_mask.all():
        raise ValueError("windowed matching expects every parameter free")
    sr = task.target.sample_rate_hz
    window_samples = round(window_ms * 1e-3 * sr)
    n_windows = len(task.target) // window_samples
    if n_windows < 1:
        raise ValueError(
            f"target of {len(task.target)} samples is shorter than one "
            f"{window_samples}-sample window"
        )

    from dataclasses import replace

    results = []
    raw = np.empty((n_windows, N_PARAMS))
    x0 = None
    for w in range(n_windows):
        segment = task.target.samples[w * window_samples:(w + 1) * window_samples]
        window_task = replace(
            task,
            target=AudioClip(segment, sr),
            optimizer=replace(task.optimizer,
                              seed=stable_seed(task.optimizer.seed, "window", w)),
            synth=replace(task.synth, seed=stable_seed(task.synth.seed, "window", w)),
        )
        truth_w = None
        if truth_trajectory is not None:
            center = (w + 0.5) * window_samples / sr
            truth_w = denormalize(truth_trajectory.sample_normalized([center])[0])
        match = _run_match(window_task, truth_w, x0)
        results.append(match)
        raw[w] = normalized_array(match.params)
        x0 = raw[w]  # warm start for the next window

    smoothed = np.empty_like(raw)
    n_clamped = 0
    for j in range(N_PARAMS):
        filtered = savgol_smooth(raw[:, j], smooth_window, smooth_polyorder)
        if len(raw[:, j]) >= smooth_window:
            unclamped = scipy.signal.savgol_filter(
                raw[:, j], smooth_window, smooth_polyorder, mode="interp")
            n_clamped += int(np.count_nonzero(
                (unclamped < 0.0) | (unclamped > 1.0)))
        smoothed[:, j] = filtered

    centers = (np.arange(n_windows) + 0.5) * window_samples / sr
    return TrajectoryResult(
        window_results=results,
        window_s=window_samples / sr,
        times_s=centers,
        raw=raw,
        smoothed=smoothed,
        n_clamped=n_clamped,
    )
