"""Numba kernels for the waveguide and the glottal source.

Everything here is per-sample loop code kept free of Python objects so numba
can compile it once and the optimizer loop can afford tens of thousands of
syntheses. The public API lives in :mod:`voxtract.vocal_tract`.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def lf_setup(voiceness):
    """Derive the LF flow-derivative waveform constants for one control block.

    The shape parameter follows Rd = 3(1 - voiceness) clamped to [0.5, 2.7],
    with Fant's regression for Ra, Rk, Rg. Returns
    (Te, epsilon, shift, delta, omega, alpha, E0) for the normalized cycle
    t in [0, 1).
    """
    Rd = 3.0 * (1.0 - voiceness)
    if Rd < 0.5:
        Rd = 0.5
    if Rd > 2.7:
        Rd = 2.7
    Ra = -0.01 + 0.048 * Rd
    Rk = 0.224 + 0.118 * Rd
    Rg = (Rk / 4.0) * (0.5 + 1.2 * Rk) / (0.11 * Rd - Ra * (0.5 + 1.2 * Rk))
    Ta = Ra
    Tp = 1.0 / (2.0 * Rg)
    Te = Tp + Tp * Rk

    epsilon = 1.0 / Ta
    shift = np.exp(-epsilon * (1.0 - Te))
    delta = 1.0 - shift
    rhs_integral = ((1.0 / epsilon) * (shift - 1.0) + (1.0 - Te) * shift) / delta
    upper_integral = (Te - Tp) / 2.0 - rhs_integral
    omega = np.pi / Tp
    s = np.sin(omega * Te)
    y = -np.pi * s * upper_integral / (2.0 * Tp)
    alpha = np.log(y) / (Tp / 2.0 - Te)
    E0 = -1.0 / (s * np.exp(alpha * Te))
    return Te, epsilon, shift, delta, omega, alpha, E0


@njit(cache=True)
def glottal_kernel(pitch_blocks, voice_blocks, noise, block, sample_rate, out):
    """Generate the glottal source: LF pulse train plus gated aspiration noise.

    pitch/voice are per-control-block values; `noise` is one white sample per
    output sample. Aspiration is the noise low-passed at 1 kHz, scaled by
    0.2*(1 - voiceness) and gated to the open phase of the cycle. The periodic
    component is scaled by voiceness**0.25 so it vanishes for pure breath.
    """
    n = out.shape[0]
    n_blocks = pitch_blocks.shape[0]
    lp_coeff = 1.0 - np.exp(-2.0 * np.pi * 1000.0 / sample_rate)
    lp_state = 0.0
    phase = 0.0
    for b in range(n_blocks):
        f0 = pitch_blocks[b]
        voiceness = voice_blocks[b]
        Te, epsilon, shift, delta, omega, alpha, E0 = lf_setup(voiceness)
        periodic_gain = voiceness ** 0.25
        aspiration_gain = 0.2 * (1.0 - voiceness)
        dphase = f0 / sample_rate
        start = b * block
        stop = min(start + block, n)
        for i in range(start, stop):
            t = phase
            if t > Te:
                pulse = (-np.exp(-epsilon * (t - Te)) + shift) / delta
            else:
                pulse = E0 * np.exp(alpha * t) * np.sin(omega * t)
            lp_state += lp_coeff * (noise[i] - lp_state)
            gate = 1.0 if t < Te else 0.0
            out[i] = periodic_gain * pulse + aspiration_gain * gate * lp_state
            phase += dphase
            if phase >= 1.0:
                phase -= 1.0


@njit(cache=True)
def tract_kernel(diam_blocks, source, block, glottal_refl, lip_refl, damp, out):
    """Run the Kelly-Lochbaum scattering chain over the source signal.

    Two scattering passes per output sample, so the waveguide updates at twice
    the audio rate. Junction reflections are recomputed from the per-block
    diameter rows; both runs of a given (diam_blocks, source) pair are
    bit-identical.
    """
    n = out.shape[0]
    n_blocks = diam_blocks.shape[0]
    n_sec = diam_blocks.shape[1]
    right = np.zeros(n_sec)
    left = np.zeros(n_sec)
    junc_right = np.zeros(n_sec + 1)
    junc_left = np.zeros(n_sec + 1)
    refl = np.zeros(n_sec)
    area = np.zeros(n_sec)
    for b in range(n_blocks):
        for i in range(n_sec):
            d = diam_blocks[b, i]
            area[i] = np.pi * (0.5 * d) * (0.5 * d)
        for i in range(1, n_sec):
            total = area[i - 1] + area[i]
            if total <= 0.0:
                refl[i] = 0.999
            else:
                refl[i] = (area[i - 1] - area[i]) / total
        start = b * block
        stop = min(start + block, n)
        for i in range(start, stop):
            sample = 0.0
            for _pass in range(2):
                junc_right[0] = left[0] * glottal_refl + source[i]
                junc_left[n_sec] = right[n_sec - 1] * lip_refl
                for k in range(1, n_sec):
                    w = refl[k] * (right[k - 1] + left[k])
                    junc_right[k] = right[k - 1] - w
                    junc_left[k] = left[k] + w
                for k in range(n_sec):
                    right[k] = junc_right[k] * damp
                    left[k] = junc_left[k + 1] * damp
                sample += right[n_sec - 1]
            out[i] = sample * 0.125
