"""Acceptance suite for the benchmark harness.

Each criterion prints one PASS/FAIL line (run with `pytest -s` to watch them
live). The experiment-grade criteria run desk-scale grids: 0.5 s clips, at
most 2000 evaluations per run, 10 repetitions. Shared grids are module-scoped
fixtures so each one runs once.
"""

import time

import numpy as np
import pytest

from voxtract.audio_io import AudioClip, add_noise_snr, read_wav, write_wav
from voxtract.bench import ExperimentConfig, run_experiment
from voxtract.features import ReprKind, extract, mae
from voxtract.inversion import MatchTask, match_windowed, savgol_smooth
from voxtract.optimizers import (
    METHODS,
    Bounds,
    OptimizerConfig,
    StopCriteria,
    optimize,
)
from voxtract.params import (
    PARAM_NAMES,
    ParamTrajectory,
    SynthConfig,
    TractParams,
    normalized_array,
)
from voxtract.quality import stoi
from voxtract.vocal_tract import N_SECTIONS, run_tract, synthesize_static, synthesize_trajectory

MASTER_SEED = 77
WORKERS = 2


def gate(criterion, condition, detail):
    status = "PASS" if condition else "FAIL"
    print(f"[acceptance] criterion {criterion}: {status} -- {detail}")
    assert condition, f"criterion {criterion}: {detail}"


def median_of(rows, key=lambda r: r.mean_norm_error):
    values = [key(r) for r in rows]
    values = [v for v in values if v is not None]
    return float(np.median(values))


# ---------------------------------------------------------------------------
# Shared experiment grids

@pytest.fixture(scope="module")
def single_mel(warm_jit):
    """single_param grid: GA, PSO (accuracy gates) plus TRF (timing gate)."""
    cfg = ExperimentConfig(
        experiment="single_param", optimizers=("ga", "pso", "trf"),
        representations=("mel",), repetitions=10, master_seed=MASTER_SEED,
        max_evals=1500, clip_duration_s=0.5, workers=WORKERS)
    started = time.perf_counter()
    report = run_experiment(cfg)
    return report, time.perf_counter() - started


@pytest.fixture(scope="module")
def single_multiscale(warm_jit):
    cfg = ExperimentConfig(
        experiment="single_param", optimizers=("ga",),
        representations=("multiscale",), repetitions=10,
        master_seed=MASTER_SEED, max_evals=1500, clip_duration_s=0.5,
        workers=WORKERS)
    return run_experiment(cfg)


@pytest.fixture(scope="module")
def all_params_mel(warm_jit):
    cfg = ExperimentConfig(
        experiment="all_params", optimizers=METHODS,
        representations=("mel",), repetitions=10, master_seed=MASTER_SEED,
        max_evals=1500, clip_duration_s=0.5, workers=WORKERS)
    return run_experiment(cfg)


@pytest.fixture(scope="module")
def all_params_by_repr(warm_jit):
    cfg = ExperimentConfig(
        experiment="all_params", optimizers=("ga",),
        representations=("mfcc", "mel", "multiscale"), repetitions=10,
        master_seed=MASTER_SEED, max_evals=1500, clip_duration_s=0.5,
        workers=WORKERS)
    return run_experiment(cfg)


@pytest.fixture(scope="module")
def noisy_ga_mel(warm_jit):
    cfg = ExperimentConfig(
        experiment="noisy", optimizers=("ga",), representations=("mel",),
        repetitions=10, master_seed=MASTER_SEED, max_evals=1500,
        clip_duration_s=0.5, snr_grid_db=(40.0, 30.0, 20.0, 0.0),
        workers=WORKERS)
    return run_experiment(cfg)


# ---------------------------------------------------------------------------
# 1. Single-parameter recovery

def test_criterion_1_single_param_recovery(single_mel):
    report, wall = single_mel
    assert report.n_failed == 0
    worst = {}
    for optimizer in ("ga", "pso"):
        for name in PARAM_NAMES:
            rows = [r for r in report.rows
                    if r.optimizer == optimizer and r.target_id.endswith(name)]
            assert len(rows) == 10
            worst[(optimizer, name)] = median_of(rows)
    peak = max(worst.values())
    peak_key = max(worst, key=worst.get)
    gate(1, peak < 0.02 and wall < 1200,
         f"worst median error {peak:.5f} at {peak_key} (< 0.02), "
         f"grid wall time {wall / 60:.1f} min (< 20 min)")


# ---------------------------------------------------------------------------
# 2. Multiscale exactness

def test_criterion_2_multiscale_exactness(single_multiscale):
    rows = [r for r in single_multiscale.rows if r.optimizer == "ga"]
    assert len(rows) == 80
    med = median_of(rows)
    gate(2, med < 1e-3,
         f"GA multiscale single-parameter pooled median error {med:.2e} (< 1e-3)")


# ---------------------------------------------------------------------------
# 3. All-parameter optimizer ordering

def test_criterion_3_optimizer_ordering(all_params_mel):
    med = {opt: median_of([r for r in all_params_mel.rows if r.optimizer == opt],
                          key=lambda r: r.audio_mae)
           for opt in METHODS}
    strong = max(med["ga"], med["pso"], med["cmaes"])
    weak = min(med["nm"], med["trf"])
    gate(3, strong < weak,
         "median audio MAE " +
         ", ".join(f"{o}={med[o]:.4f}" for o in METHODS) +
         f"; max(ga,pso,cmaes)={strong:.4f} < min(nm,trf)={weak:.4f}")


# ---------------------------------------------------------------------------
# 4. MFCC pitch weakness

def test_criterion_4_mfcc_pitch_weakness(all_params_by_repr):
    med = {}
    for repr_name in ("mfcc", "mel", "multiscale"):
        rows = [r for r in all_params_by_repr.rows
                if r.representation == repr_name]
        med[repr_name] = float(np.median([r.param_errors[0] for r in rows]))
    gate(4, med["mfcc"] > med["mel"] and med["mfcc"] > med["multiscale"],
         f"GA median pitch error mfcc={med['mfcc']:.4f} > "
         f"mel={med['mel']:.4f} and > multiscale={med['multiscale']:.4f}")


# ---------------------------------------------------------------------------
# 5. Noise knee

def test_criterion_5_noise_knee(all_params_mel, noisy_ga_mel):
    clean = median_of(
        [r for r in all_params_mel.rows if r.optimizer == "ga"],
        key=lambda r: r.audio_mae)
    by_snr = {}
    for snr in (40, 30, 20, 0):
        rows = [r for r in noisy_ga_mel.rows
                if r.target_id.endswith(f"_snr{snr}")]
        assert len(rows) == 10
        by_snr[snr] = median_of(rows, key=lambda r: r.audio_mae)
    tolerable = all(by_snr[s] <= 2.0 * clean for s in (40, 30, 20))
    knee = by_snr[0] > by_snr[20]
    gate(5, tolerable and knee,
         f"clean={clean:.4f}, " +
         ", ".join(f"{s}dB={by_snr[s]:.4f}" for s in (40, 30, 20, 0)) +
         "; 40/30/20 dB within 2x clean and 0 dB above 20 dB")


# ---------------------------------------------------------------------------
# 6. Timing ordering

def test_criterion_6_timing_ordering(single_mel):
    report, _ = single_mel
    med = {opt: median_of([r for r in report.rows if r.optimizer == opt],
                          key=lambda r: r.elapsed_s)
           for opt in ("trf", "pso", "ga")}
    ratios = (f"pso/trf={med['pso'] / med['trf']:.1f}x, "
              f"ga/pso={med['ga'] / med['pso']:.1f}x")
    gate(6, med["trf"] < med["pso"] < med["ga"],
         f"median wall time trf={med['trf']:.3f}s < pso={med['pso']:.3f}s "
         f"< ga={med['ga']:.3f}s ({ratios}; ratios reported, not gated)")


# ---------------------------------------------------------------------------
# 7. Time-varying matching

def test_criterion_7_time_varying(warm_jit):
    base = dict(voiceness=0.9, tongue_index=20.0, tongue_diameter_cm=2.2,
                lips_diameter_cm=0.9, constriction_index=30.0,
                constriction_diameter_cm=1.0, throat_diameter_cm=0.8)
    start = TractParams(pitch_hz=110.0, **base)
    end = TractParams(pitch_hz=260.0, **base)
    truth = ParamTrajectory(((0.0, start), (1.0, end)))
    synth_cfg = SynthConfig(seed=31)
    target = synthesize_trajectory(truth, 1.0, synth_cfg)

    task = MatchTask(target=target, repr_kind=ReprKind.MULTISCALE,
                     optimizer=OptimizerConfig("ga", seed=7),
                     stop=StopCriteria(max_evals=800), synth=synth_cfg)
    result = match_windowed(task, window_ms=100.0, truth_trajectory=truth)

    assert len(result.window_results) == 10
    truth_pitch = truth.sample_normalized(result.times_s)[:, 0]
    mad_smoothed = float(np.mean(np.abs(result.smoothed[:, 0] - truth_pitch)))
    per_window = np.abs(result.raw[:, 0] - truth_pitch)
    med_window = float(np.median(per_window))
    gate(7, mad_smoothed < 0.15 and med_window < 0.1,
         f"smoothed pitch trajectory MAD {mad_smoothed:.4f} (< 0.15), "
         f"per-window median error {med_window:.4f} (< 0.1)")


# ---------------------------------------------------------------------------
# 8. Property suites

def test_criterion_8_property_suites(warm_jit):
    started = time.perf_counter()
    checks = []

    def check(name, ok):
        checks.append((name, bool(ok)))

    # optimizers: sphere convergence, feasibility, monotonicity, determinism
    sphere = lambda x: float(np.sum((x - 0.3) ** 2))
    for method in METHODS:
        seen = []

        def watched(x, _s=seen):
            _s.append(np.array(x))
            return sphere(x)

        residual = None
        objective = watched
        if method == "trf":
            objective = None

            def residual(x, _s=seen):
                _s.append(np.array(x))
                return x - 0.3

        a = optimize(objective, Bounds.unit_box(2),
                     OptimizerConfig(method, seed=3),
                     StopCriteria(max_evals=5000), residual_fn=residual)
        b = optimize(objective, Bounds.unit_box(2),
                     OptimizerConfig(method, seed=3),
                     StopCriteria(max_evals=5000), residual_fn=residual)
        check(f"{method} sphere < 1e-3 in 5000 evals", a.best_cost < 1e-3)
        check(f"{method} history monotone", np.all(np.diff(a.history) <= 0))
        check(f"{method} feasible evaluations",
              all(np.all(p >= 0) and np.all(p <= 1) for p in seen))
        check(f"{method} deterministic",
              np.array_equal(a.best_x, b.best_x) and a.n_evals == b.n_evals)

    # Savitzky-Golay polynomial reproduction
    t = np.linspace(0, 1, 31)
    quad = 0.1 + 0.6 * t - 0.3 * t ** 2
    check("savgol exact quadratic reproduction",
          np.max(np.abs(savgol_smooth(quad, 9, 2) - quad)) < 1e-9)

    # MAE oracle
    rng = np.random.default_rng(0)
    a_v, b_v = rng.random(1000), rng.random(1000)
    loop = sum(abs(x - y) for x, y in zip(a_v, b_v)) / 1000
    check("mae equals loop oracle to 1e-12", abs(mae(a_v, b_v) - loop) < 1e-12)

    # representation shapes
    clip = AudioClip(rng.standard_normal(48000), 48000)
    check("stft shape 92x513", len(extract(ReprKind.STFT, clip)) == 92 * 513)
    check("mfcc shape 92x20", len(extract(ReprKind.MFCC, clip)) == 92 * 20)
    check("mel bins 128", len(extract(ReprKind.MEL, clip)) == 92 * 128)

    # synthesizer determinism and pitch fidelity
    p = TractParams(220.0, 0.9, 20.0, 2.2, 0.9, 30.0, 1.0, 0.8)
    cfg = SynthConfig(seed=6)
    s1 = synthesize_static(p, 0.5, cfg)
    s2 = synthesize_static(p, 0.5, cfg)
    check("synthesis deterministic", np.array_equal(s1.samples, s2.samples))

    from tests.test_vocal_tract import acf_f0

    ok_f0 = True
    for pitch in (75.0, 202.5, 330.0):
        q = TractParams(pitch, 0.9, 20.0, 2.2, 0.9, 30.0, 1.0, 0.8)
        est = acf_f0(synthesize_static(q, 0.5, cfg).samples)
        ok_f0 &= abs(est - pitch) / pitch < 0.01
    check("f0 within 1% across range", ok_f0)

    excitation = np.zeros(16384)
    excitation[0] = 1.0
    response = run_tract(np.full(N_SECTIONS, 1.5), excitation)
    spectrum = np.abs(np.fft.rfft(response))
    freqs = np.fft.rfftfreq(len(response), 1 / 48000)
    band = (freqs > 100) & (freqs < 2000)
    first_peak = freqs[band][np.argmax(spectrum[band])]
    predicted = 2 * 48000 / (4 * N_SECTIONS)
    check("neutral tube resonance within 10% of quarter-wave",
          abs(first_peak - predicted) / predicted < 0.10)

    # STOI sanity
    ref = AudioClip(s1.samples, 48000)
    check("stoi(x,x) >= 0.99", stoi(ref, ref).value >= 0.99)
    degraded = [stoi(ref, add_noise_snr(ref, s, seed=2)).value
                for s in (20.0, 10.0, 0.0)]
    check("stoi monotone under noise",
          degraded[0] > degraded[1] > degraded[2])

    # WAV round trip (float32 exact)
    import tempfile, os

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "x.wav")
        samples = rng.standard_normal(4800).astype(np.float32).astype(float)
        write_wav(path, AudioClip(samples, 48000), "float32")
        check("wav float32 round trip exact",
              np.array_equal(read_wav(path).samples, samples))

    # noise injection accuracy
    tone = AudioClip(np.sin(np.linspace(0, 400, 48000)), 48000)
    ok_snr = True
    for seed in range(10):
        noisy = add_noise_snr(tone, 10.0, seed=seed)
        noise = noisy.samples - tone.samples
        measured = 10 * np.log10(np.mean(tone.samples ** 2)
                                 / np.mean(noise ** 2))
        ok_snr &= abs(measured - 10.0) < 0.2
    check("add_noise_snr within 0.2 dB", ok_snr)

    elapsed = time.perf_counter() - started
    failed = [name for name, ok in checks if not ok]
    for name, ok in checks:
        print(f"    [property] {'ok' if ok else 'FAIL'}: {name}")
    gate(8, not failed and elapsed < 300,
         f"{len(checks)} property checks in {elapsed:.0f}s (< 5 min)"
         + (f"; failing: {failed}" if failed else ""))


# ---------------------------------------------------------------------------
# 9. STOI on matched self-synthesized targets

def test_criterion_9_stoi_pattern(all_params_mel):
    rows = [r for r in all_params_mel.rows if r.optimizer == "ga"]
    scores = [r.stoi for r in rows if r.stoi is not None]
    assert len(scores) == len(rows)
    med = float(np.median(scores))
    gate(9, med >= 0.3,
         f"median STOI of GA-matched outputs {med:.3f} (>= 0.3; "
         "real recordings reported without a gate)")
