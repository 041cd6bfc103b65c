//! Synthetic photoplethysmogram waveforms with known beat times.
//!
//! Each beat is a raised-cosine bump — a smooth stand-in for the systolic
//! upstroke — on top of optional slow sinusoidal drift and Gaussian noise.
//! The generator returns the exact beat schedule alongside the samples, so
//! detector tests can score themselves against construction-time truth
//! instead of a second detector.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pulse::PulseSample;

use super::SimError;

/// Waveform recipe. Everything is deterministic given `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpgParams {
    pub bpm: f64,
    pub duration_ms: u64,
    pub sample_rate_hz: f64,
    /// Full width of one pulse bump; 120 ms suits resting heart rates.
    pub pulse_width_ms: u64,
    /// Multiplies the whole signal — bumps, drift, and noise alike — the
    /// way an analog gain stage would.
    pub amplitude: f64,
    /// Peak of the 0.1 Hz baseline wander, relative to unit pulse height.
    pub baseline_drift_amplitude: f64,
    /// Standard deviation of the additive noise, relative to unit pulse
    /// height.
    pub noise_rms: f64,
    pub seed: u64,
}

impl Default for PpgParams {
    fn default() -> Self {
        Self {
            bpm: 60.0,
            duration_ms: 10_000,
            sample_rate_hz: 100.0,
            pulse_width_ms: 120,
            amplitude: 1.0,
            baseline_drift_amplitude: 0.0,
            noise_rms: 0.0,
            seed: 0,
        }
    }
}

/// Generated waveform plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PpgSignal {
    pub samples: Vec<PulseSample>,
    /// Beat centers in ms, rounded; one per bump in the waveform.
    pub beat_times: Vec<u64>,
}

/// Frequency of the baseline wander, about one breath every ten seconds.
const DRIFT_HZ: f64 = 0.1;

/// Generate a waveform.
///
/// Beats sit at `t_k = (k + ½)·60000/bpm`, i.e. on an exact `60000/bpm`
/// grid offset by half a period so the first bump is whole. Sample `i`
/// lands at `round(i·1000/rate)` ms.
pub fn synth_ppg(params: &PpgParams) -> Result<PpgSignal, SimError> {
    if !(params.bpm.is_finite() && params.bpm > 0.0) {
        return Err(SimError::BadParams("bpm must be positive"));
    }
    if !(params.sample_rate_hz.is_finite() && params.sample_rate_hz > 0.0) {
        return Err(SimError::BadParams("sample rate must be positive"));
    }
    if params.sample_rate_hz > 1000.0 {
        return Err(SimError::BadParams(
            "sample rates past 1 kHz collide on the millisecond grid",
        ));
    }
    if params.pulse_width_ms == 0 {
        return Err(SimError::BadParams("pulse width must be positive"));
    }
    for value in [
        params.amplitude,
        params.baseline_drift_amplitude,
        params.noise_rms,
    ] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(SimError::BadParams("amplitudes must be non-negative"));
        }
    }

    let spacing = 60_000.0 / params.bpm;
    let mut beat_centers: Vec<f64> = Vec::new();
    let mut k = 0.0;
    loop {
        let t_k = (k + 0.5) * spacing;
        if t_k >= params.duration_ms as f64 {
            break;
        }
        beat_centers.push(t_k);
        k += 1.0;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let width = params.pulse_width_ms as f64;
    let half_width = width / 2.0;

    let mut samples = Vec::new();
    let mut i: u64 = 0;
    loop {
        let t = (i as f64 * 1000.0 / params.sample_rate_hz).round() as u64;
        if t >= params.duration_ms {
            break;
        }
        let t_f = t as f64;
        let pulses: f64 = beat_centers
            .iter()
            .filter(|&&center| (t_f - center).abs() <= half_width)
            .map(|&center| raised_cosine((t_f - center) / width))
            .sum();
        let drift = params.baseline_drift_amplitude
            * (std::f64::consts::TAU * DRIFT_HZ * t_f / 1000.0).sin();
        // Always consume two draws per sample so the noise stream stays
        // aligned across parameter changes.
        let noise = params.noise_rms * standard_normal(&mut rng);
        samples.push(PulseSample {
            t,
            value: params.amplitude * (pulses + drift + noise),
        });
        i += 1;
    }

    Ok(PpgSignal {
        samples,
        beat_times: beat_centers.iter().map(|&c| c.round() as u64).collect(),
    })
}

/// `½(1 + cos 2πu)` on |u| ≤ ½: peaks at 1, falls smoothly to 0.
fn raised_cosine(u: f64) -> f64 {
    0.5 * (1.0 + (std::f64::consts::TAU * u).cos())
}

/// RMS of the clean unit-amplitude pulse train — the "signal" level that
/// signal-to-noise ratios are quoted against.
///
/// A raised cosine has mean square 3/8 over its support, so a train of
/// non-overlapping bumps has mean square `(3/8)·width/spacing`.
pub fn clean_pulse_rms(params: &PpgParams) -> f64 {
    let spacing = 60_000.0 / params.bpm;
    let duty = (params.pulse_width_ms as f64 / spacing).min(1.0);
    (0.375 * duty).sqrt()
}

/// The `noise_rms` that puts the waveform at `snr_db` decibels of
/// signal-to-noise, with "signal" as in [`clean_pulse_rms`].
pub fn noise_rms_for_snr_db(params: &PpgParams, snr_db: f64) -> f64 {
    clean_pulse_rms(params) / 10f64.powf(snr_db / 20.0)
}

/// Box–Muller over two 53-bit uniforms; exactly two draws per call.
fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let scale = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) as f64 + 0.5) * scale;
    let u2 = ((rng.next_u64() >> 11) as f64 + 0.5) * scale;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
