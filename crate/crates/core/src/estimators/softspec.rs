//! Differentiable spectral regressor: a temperature-controlled soft-argmax
//! over the band-limited power spectrum.

use super::frontend::{spectrum_forward, GridSize};
use super::{DifferentiableEstimator, FrequencyBand, HrEstimator, DEFAULT_HALF_WIDTH};
use crate::error::{Error, Result};
use crate::radargram::{ComplexGrid, Radargram};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftSpecParams {
    /// Softmax temperature applied to the sum-normalised power spectrum.
    pub temperature: f64,
    pub calib_scale: f64,
    pub calib_offset: f64,
}

impl Default for SoftSpecParams {
    fn default() -> Self {
        Self { temperature: 0.01, calib_scale: 1.0, calib_offset: 0.0 }
    }
}

impl SoftSpecParams {
    pub fn with_temperature(temperature: f64) -> Self {
        Self { temperature, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::invalid(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if !(self.calib_scale.is_finite() && self.calib_offset.is_finite()) {
            return Err(Error::invalid("calibration must be finite"));
        }
        Ok(())
    }
}

/// Forward state of the soft-argmax head.
struct SoftArgmax {
    bpm: f64,
    weights: Vec<f64>,
    normalized: Vec<f64>,
    mean_hz: f64,
    total: f64,
}

fn soft_argmax(freqs: &[f64], power: &[f64], params: &SoftSpecParams) -> Result<SoftArgmax> {
    let total: f64 = power.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroSignal);
    }
    let normalized: Vec<f64> = power.iter().map(|p| p / total).collect();
    let top = normalized.iter().cloned().fold(f64::MIN, f64::max);
    let mut weights: Vec<f64> = normalized.iter().map(|q| ((q - top) / params.temperature).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    let mean_hz: f64 = weights.iter().zip(freqs).map(|(w, f)| w * f).sum();
    let bpm = params.calib_scale * 60.0 * mean_hz + params.calib_offset;
    Ok(SoftArgmax { bpm, weights, normalized, mean_hz, total })
}

impl SoftArgmax {
    /// `d bpm / d power_j`.
    fn power_grad(&self, freqs: &[f64], params: &SoftSpecParams) -> Vec<f64> {
        let c = params.calib_scale * 60.0 / params.temperature;
        let g_q: Vec<f64> = self.weights.iter().zip(freqs).map(|(w, f)| c * w * (f - self.mean_hz)).collect();
        let dot: f64 = g_q.iter().zip(&self.normalized).map(|(g, q)| g * q).sum();
        g_q.iter().map(|g| (g - dot) / self.total).collect()
    }
}

/// Calibrated soft-argmax of a power spectrum sampled at `freqs` (Hz), in bpm.
pub fn soft_argmax_bpm(freqs: &[f64], power: &[f64], params: &SoftSpecParams) -> Result<f64> {
    params.validate()?;
    if freqs.len() != power.len() || freqs.is_empty() {
        return Err(Error::invalid("frequency and power lengths differ"));
    }
    Ok(soft_argmax(freqs, power, params)?.bpm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftSpecEstimator {
    pub params: SoftSpecParams,
    pub band: FrequencyBand,
    pub half_width: usize,
}

impl Default for SoftSpecEstimator {
    fn default() -> Self {
        Self::new(SoftSpecParams::default())
    }
}

impl SoftSpecEstimator {
    pub fn new(params: SoftSpecParams) -> Self {
        Self { params, band: FrequencyBand::heart_rate(), half_width: DEFAULT_HALF_WIDTH }
    }

    pub fn forward(&self, x: &Radargram) -> Result<f64> {
        self.params.validate()?;
        let trace = spectrum_forward(x, &self.band, self.half_width, GridSize::ZeroPadded)?;
        Ok(soft_argmax(&trace.freqs, &trace.power, &self.params)?.bpm)
    }

    /// Softmax weights over the band grid, for inspection.
    pub fn weights(&self, x: &Radargram) -> Result<(Vec<f64>, Vec<f64>)> {
        self.params.validate()?;
        let trace = spectrum_forward(x, &self.band, self.half_width, GridSize::ZeroPadded)?;
        let head = soft_argmax(&trace.freqs, &trace.power, &self.params)?;
        Ok((trace.freqs, head.weights))
    }
}

impl HrEstimator for SoftSpecEstimator {
    fn name(&self) -> &'static str {
        "softspec"
    }

    fn estimate(&self, x: &Radargram) -> Result<f64> {
        self.forward(x)
    }
}

impl DifferentiableEstimator for SoftSpecEstimator {
    fn estimate_with_grad(&self, x: &Radargram) -> Result<(f64, ComplexGrid)> {
        self.params.validate()?;
        let trace = spectrum_forward(x, &self.band, self.half_width, GridSize::ZeroPadded)?;
        let head = soft_argmax(&trace.freqs, &trace.power, &self.params)?;
        let g_p = head.power_grad(&trace.freqs, &self.params);
        Ok((head.bpm, trace.input_grad(x, &g_p)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::band_grid;

    fn grid() -> Vec<f64> {
        band_grid(&FrequencyBand::heart_rate(), 20.0, 1200, GridSize::ZeroPadded)
    }

    #[test]
    fn uniform_spectrum_gives_band_midpoint() {
        let f = grid();
        let p = vec![1.0; f.len()];
        let bpm = soft_argmax_bpm(&f, &p, &SoftSpecParams::default()).unwrap();
        assert!((bpm - 75.0).abs() < 1e-9, "{bpm}");
    }

    #[test]
    fn cold_softmax_picks_the_peak() {
        let f = grid();
        let mut p: Vec<f64> = f.iter().map(|x| 0.1 + 0.01 * x).collect();
        let k = f.iter().position(|x| (x - 1.4).abs() < 1e-9).unwrap();
        p[k] = 5.0;
        let bpm = soft_argmax_bpm(&f, &p, &SoftSpecParams::with_temperature(1e-6)).unwrap();
        assert!((bpm - 84.0).abs() < 1e-6, "{bpm}");
    }

    #[test]
    fn identity_calibration_stays_in_band() {
        let f = grid();
        for seed in 0..20u64 {
            let p: Vec<f64> = (0..f.len()).map(|k| ((k as u64 * 2654435761 + seed * 97) % 1000) as f64).collect();
            for t in [1e-4, 0.01, 1.0, 100.0] {
                let bpm = soft_argmax_bpm(&f, &p, &SoftSpecParams::with_temperature(t)).unwrap();
                assert!((50.0 - 1e-9..=100.0 + 1e-9).contains(&bpm));
            }
        }
    }

    #[test]
    fn zero_spectrum_rejected() {
        let f = grid();
        assert!(matches!(soft_argmax_bpm(&f, &vec![0.0; f.len()], &SoftSpecParams::default()), Err(Error::ZeroSignal)));
    }

    #[test]
    fn power_grad_matches_finite_differences() {
        let f: Vec<f64> = (0..30).map(|k| 0.9 + 0.02 * k as f64).collect();
        let p: Vec<f64> = (0..30).map(|k| 1.0 + ((k * 7) % 11) as f64 * 0.3).collect();
        let params = SoftSpecParams { temperature: 0.02, calib_scale: 1.1, calib_offset: -2.0 };
        let head = soft_argmax(&f, &p, &params).unwrap();
        let g = head.power_grad(&f, &params);
        for j in 0..p.len() {
            let h = 1e-6;
            let mut up = p.clone();
            up[j] += h;
            let mut dn = p.clone();
            dn[j] -= h;
            let fd = (soft_argmax(&f, &up, &params).unwrap().bpm - soft_argmax(&f, &dn, &params).unwrap().bpm) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-3), "{j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn bad_temperature() {
        assert!(SoftSpecParams::with_temperature(0.0).validate().is_err());
        assert!(SoftSpecParams::with_temperature(-1.0).validate().is_err());
    }
}
