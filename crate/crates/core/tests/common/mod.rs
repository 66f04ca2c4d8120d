#![allow(dead_code)]

use std::f64::consts::PI;

use antisense::radargram::{
    synthesize_radargram, ComplexGrid, MotionComponent, NoiseSpec, RadarConfig, Radargram, TargetSpec,
};
use num_complex::Complex64;

/// Power of the mean-removed `signal` at `freq_hz`, evaluated directly.
pub fn dft_power(signal: &[f64], fs: f64, freq_hz: f64) -> f64 {
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, s) in signal.iter().enumerate() {
        acc += (s - mean) * Complex64::from_polar(1.0, -2.0 * PI * freq_hz * m as f64 / fs);
    }
    acc.norm_sqr()
}

/// Frequency of the largest `dft_power` on a uniform grid over `[lo, hi]`.
pub fn dft_peak(signal: &[f64], fs: f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n)
        .map(|k| lo + k as f64 * step)
        .map(|f| (f, dft_power(signal, fs, f)))
        .fold((lo, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0
}

/// Fourth-order central difference of `f` at `x` with step `h`.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Copy of `x` with one sample shifted by `dz`.
pub fn nudged(x: &Radargram, m: usize, n: usize, dz: Complex64) -> Radargram {
    let mut g: ComplexGrid = x.samples().clone();
    g.set(m, n, g.get(m, n) + dz);
    Radargram::new(*x.config(), g).unwrap()
}

/// Victim with heart and breathing motion at the given offset.
pub fn victim(offset: f64, hr_bpm: f64, breath_rpm: f64) -> TargetSpec {
    TargetSpec::new(
        offset,
        1.0,
        vec![MotionComponent::new(0.4, hr_bpm, 0.7), MotionComponent::new(1.2, breath_rpm, 2.1)],
    )
}

pub fn victim_radargram(config: &RadarConfig, hr_bpm: f64, breath_rpm: f64, snr_db: f64, seed: u64) -> Radargram {
    synthesize_radargram(&[victim(111.0, hr_bpm, breath_rpm)], NoiseSpec::snr_db(snr_db), config, seed).unwrap()
}
