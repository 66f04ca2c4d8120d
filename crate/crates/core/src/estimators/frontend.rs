//! Shared spectral front end: target-bin selection, slow-time extraction,
//! and a band-limited power spectrum evaluated on an explicit frequency grid
//! so that every stage has an analytic backward pass.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::FrequencyBand;
use crate::error::{Error, Result};
use crate::radargram::{ComplexGrid, Radargram};

/// Bin whose sample magnitude varies most over slow time. Ties go to the
/// lowest index.
pub fn select_target_bin(x: &Radargram) -> Result<usize> {
    let (rows, cols) = x.samples().dims();
    let mags: Vec<f64> = x.samples().as_slice().iter().map(|z| z.norm_sqr().sqrt()).collect();
    let mut mean = vec![0.0; cols];
    for row in mags.chunks_exact(cols) {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= rows as f64);
    let mut var = vec![0.0; cols];
    for row in mags.chunks_exact(cols) {
        for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
            let d = v - mu;
            *acc += d * d;
        }
    }
    let mut best = 0;
    for n in 1..cols {
        if var[n] > var[best] {
            best = n;
        }
    }
    if var[best] <= 0.0 {
        return Err(Error::NoTarget);
    }
    Ok(best)
}

/// Triangular weights over `-half_width..=half_width`, normalised to sum 1.
pub fn triangular_weights(half_width: usize) -> Vec<f64> {
    let hw = half_width as i64;
    let raw: Vec<f64> = (-hw..=hw).map(|k| (hw + 1 - k.abs()) as f64).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn check_window(x: &Radargram, bin: usize, half_width: usize) -> Result<()> {
    if bin < half_width || bin + half_width >= x.bins() {
        return Err(Error::BinWindow { bin, half_width, bins: x.bins() });
    }
    Ok(())
}

/// Triangular-weighted magnitude of the bins around `bin`, one value per scan.
pub fn extract_slow_time_signal(x: &Radargram, bin: usize, half_width: usize) -> Result<Vec<f64>> {
    check_window(x, bin, half_width)?;
    let w = triangular_weights(half_width);
    let first = bin - half_width;
    Ok((0..x.scans())
        .map(|m| {
            let row = &x.samples().row(m)[first..first + w.len()];
            row.iter().zip(&w).map(|(z, wk)| z.norm() * wk).sum()
        })
        .collect())
}

/// Symmetric Hann window of length `len`.
pub fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len).map(|m| 0.5 * (1.0 - (2.0 * PI * m as f64 / denom).cos())).collect()
}

/// How many frequency points the band grid carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSize {
    /// Spacing of a 4x zero-padded DFT of the signal length.
    ZeroPadded,
    /// Exactly this many points, endpoints included.
    Points(usize),
}

/// Uniform grid of frequencies from `band.lo` to `band.hi` inclusive.
pub fn band_grid(band: &FrequencyBand, scan_rate_hz: f64, len: usize, size: GridSize) -> Vec<f64> {
    let width = band.hi_hz - band.lo_hz;
    let points = match size {
        GridSize::Points(k) => k.max(2),
        GridSize::ZeroPadded => {
            let df = scan_rate_hz / (4.0 * len as f64);
            ((width / df).round() as usize + 1).max(2)
        }
    };
    let step = width / (points - 1) as f64;
    (0..points).map(|k| band.lo_hz + step * k as f64).collect()
}

/// Everything the backward pass needs from one front-end evaluation.
#[derive(Debug, Clone)]
pub struct SpectrumTrace {
    pub bin: usize,
    pub half_width: usize,
    pub signal: Vec<f64>,
    pub window: Vec<f64>,
    pub freqs: Vec<f64>,
    pub coeffs: Vec<Complex64>,
    pub power: Vec<f64>,
    window_sum: f64,
    scan_rate_hz: f64,
}

/// Calls `f` with `e^{-i 2 pi freq m / Fs}` for `m = 0..len`, refreshing
/// the recurrence from an exact phasor every 64 steps.
#[inline]
fn for_each_phasor(freq: f64, scan_rate_hz: f64, len: usize, mut f: impl FnMut(usize, Complex64)) {
    let theta = 2.0 * PI * freq / scan_rate_hz;
    let step = Complex64::from_polar(1.0, -theta);
    let mut e = Complex64::new(1.0, 0.0);
    for m in 0..len {
        if m % 64 == 0 {
            e = Complex64::from_polar(1.0, -theta * m as f64);
        }
        f(m, e);
        e *= step;
    }
}

/// Mean-removed, Hann-windowed power of `signal` at each grid frequency,
/// normalised by the squared window sum.
pub fn band_power(
    signal: &[f64],
    scan_rate_hz: f64,
    freqs: &[f64],
) -> (Vec<Complex64>, Vec<f64>, Vec<f64>, f64) {
    let len = signal.len();
    let mean = signal.iter().sum::<f64>() / len as f64;
    let window = hann(len);
    let window_sum: f64 = window.iter().sum();
    let v: Vec<f64> = signal.iter().zip(&window).map(|(s, w)| (s - mean) * w).collect();
    let norm = 1.0 / (window_sum * window_sum);
    let mut coeffs = Vec::with_capacity(freqs.len());
    let mut power = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let mut acc = Complex64::new(0.0, 0.0);
        for_each_phasor(f, scan_rate_hz, len, |m, e| acc += v[m] * e);
        coeffs.push(acc);
        power.push(acc.norm_sqr() * norm);
    }
    (coeffs, power, window, window_sum)
}

pub(crate) fn spectrum_forward(
    x: &Radargram,
    band: &FrequencyBand,
    half_width: usize,
    size: GridSize,
) -> Result<SpectrumTrace> {
    band.validate_for(x.config().scan_rate_hz)?;
    let bin = select_target_bin(x)?;
    let signal = extract_slow_time_signal(x, bin, half_width)?;
    let scan_rate_hz = x.config().scan_rate_hz;
    let freqs = band_grid(band, scan_rate_hz, signal.len(), size);
    let (coeffs, power, window, window_sum) = band_power(&signal, scan_rate_hz, &freqs);
    Ok(SpectrumTrace { bin, half_width, signal, window, freqs, coeffs, power, window_sum, scan_rate_hz })
}

impl SpectrumTrace {
    /// Gradient with respect to the extracted signal given `d out / d power`.
    pub fn signal_grad(&self, grad_power: &[f64]) -> Vec<f64> {
        let len = self.signal.len();
        let norm = 2.0 / (self.window_sum * self.window_sum);
        let mut g_v = vec![0.0; len];
        for ((&f, x), &gp) in self.freqs.iter().zip(&self.coeffs).zip(grad_power) {
            if gp == 0.0 {
                continue;
            }
            let scale = gp * norm;
            // d|X|^2/dv_m = 2 Re(conj(X) e_m)
            for_each_phasor(f, self.scan_rate_hz, len, |m, e| {
                g_v[m] += scale * (x.re * e.re + x.im * e.im);
            });
        }
        let mut g_c: Vec<f64> = g_v.iter().zip(&self.window).map(|(g, w)| g * w).collect();
        let mean = g_c.iter().sum::<f64>() / len as f64;
        g_c.iter_mut().for_each(|g| *g -= mean);
        g_c
    }

    /// Gradient with respect to every radargram sample, bin selection held fixed.
    pub fn input_grad(&self, x: &Radargram, grad_power: &[f64]) -> ComplexGrid {
        let g_s = self.signal_grad(grad_power);
        let w = triangular_weights(self.half_width);
        let first = self.bin - self.half_width;
        let mut grad = ComplexGrid::zeros(x.scans(), x.bins());
        for (m, gs) in g_s.iter().enumerate() {
            let row = grad.row_mut(m);
            for (j, wk) in w.iter().enumerate() {
                let z = x.at(m, first + j);
                let mag = z.norm();
                if mag > 0.0 {
                    row[first + j] = z * (gs * wk / mag);
                }
            }
        }
        grad
    }
}
