//! FFT peak-picking heart-rate estimator.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::frontend::{extract_slow_time_signal, hann, select_target_bin};
use super::{EstimatorOutput, FrequencyBand, HrEstimator, DEFAULT_HALF_WIDTH};
use crate::error::{Error, Result};
use crate::radargram::Radargram;

/// Zero-padded power spectrum of the mean-removed, Hann-windowed signal.
/// Returns `(bin spacing Hz, power per bin up to Nyquist)`.
fn padded_power(signal: &[f64], scan_rate_hz: f64) -> (f64, Vec<f64>) {
    let len = signal.len();
    let padded = (4 * len).next_power_of_two();
    let mean = signal.iter().sum::<f64>() / len as f64;
    let window = hann(len);
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .zip(&window)
        .map(|(s, w)| Complex::new((s - mean) * w, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(padded)
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let power = buf[..padded / 2 + 1].iter().map(|z| z.norm_sqr()).collect();
    (scan_rate_hz / padded as f64, power)
}

fn check_signal(signal: &[f64], scan_rate_hz: f64, band: &FrequencyBand) -> Result<()> {
    band.validate_for(scan_rate_hz)?;
    let min = (2.0 * scan_rate_hz / band.lo_hz).ceil() as usize;
    if signal.len() < min {
        return Err(Error::SignalTooShort { len: signal.len(), min });
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("signal contains non-finite samples"));
    }
    Ok(())
}

/// `(frequency Hz, power)` of every zero-padded DFT bin inside `band`.
pub fn fft_band_spectrum(signal: &[f64], scan_rate_hz: f64, band: &FrequencyBand) -> Result<Vec<(f64, f64)>> {
    check_signal(signal, scan_rate_hz, band)?;
    let (df, power) = padded_power(signal, scan_rate_hz);
    Ok(power
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64 * df, *p))
        .filter(|(f, _)| *f >= band.lo_hz && *f <= band.hi_hz)
        .collect())
}

/// Heart rate in bpm from the strongest in-band peak of `signal`.
///
/// The signal is mean-removed, Hann-windowed and zero-padded to at least
/// four times its length; the discrete peak is refined by a three-point
/// parabolic fit. Exact ties resolve to the lower frequency.
pub fn estimate_hr_fft(signal: &[f64], scan_rate_hz: f64, band: &FrequencyBand) -> Result<f64> {
    check_signal(signal, scan_rate_hz, band)?;
    let (df, power) = padded_power(signal, scan_rate_hz);
    let first = (band.lo_hz / df).ceil() as usize;
    let last = ((band.hi_hz / df).floor() as usize).min(power.len() - 1);
    let mut peak = first;
    for k in first..=last {
        if power[k] > power[peak] {
            peak = k;
        }
    }
    if power[peak] <= 0.0 {
        return Err(Error::ZeroSignal);
    }
    let mut shift = 0.0;
    if peak > 0 && peak + 1 < power.len() {
        let (a, b, c) = (power[peak - 1], power[peak], power[peak + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            shift = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    let f = band.clamp_hz((peak as f64 + shift) * df);
    Ok(60.0 * f)
}

/// Selects the target bin, extracts its slow-time magnitude and picks the
/// in-band FFT peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FftEstimator {
    pub band: FrequencyBand,
    pub half_width: usize,
}

impl Default for FftEstimator {
    fn default() -> Self {
        Self { band: FrequencyBand::heart_rate(), half_width: DEFAULT_HALF_WIDTH }
    }
}

impl FftEstimator {
    pub fn analyze(&self, x: &Radargram) -> Result<EstimatorOutput> {
        let selected_bin = select_target_bin(x)?;
        let signal = extract_slow_time_signal(x, selected_bin, self.half_width)?;
        let fs = x.config().scan_rate_hz;
        let hr_bpm = estimate_hr_fft(&signal, fs, &self.band)?;
        let spectrum = fft_band_spectrum(&signal, fs, &self.band)?;
        Ok(EstimatorOutput { hr_bpm, selected_bin, spectrum })
    }
}

impl HrEstimator for FftEstimator {
    fn name(&self) -> &'static str {
        "fft"
    }

    fn estimate(&self, x: &Radargram) -> Result<f64> {
        let bin = select_target_bin(x)?;
        let signal = extract_slow_time_signal(x, bin, self.half_width)?;
        estimate_hr_fft(&signal, x.config().scan_rate_hz, &self.band)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(bpm: f64, amp: f64, seconds: f64, fs: f64) -> Vec<f64> {
        let n = (seconds * fs) as usize;
        (0..n).map(|m| amp * (2.0 * PI * bpm / 60.0 * m as f64 / fs + 0.3).sin()).collect()
    }

    #[test]
    fn recovers_86_bpm() {
        let hr = estimate_hr_fft(&tone(86.0, 1.0, 60.0, 20.0), 20.0, &FrequencyBand::heart_rate()).unwrap();
        assert!((hr - 86.0).abs() <= 0.5, "{hr}");
    }

    #[test]
    fn recovers_98_bpm() {
        let hr = estimate_hr_fft(&tone(98.0, 1.0, 60.0, 20.0), 20.0, &FrequencyBand::heart_rate()).unwrap();
        assert!((hr - 98.0).abs() <= 0.5, "{hr}");
    }

    #[test]
    fn band_restriction_ignores_strong_out_of_band_tone() {
        let strong = tone(40.0, 1.0, 60.0, 20.0);
        let weak = tone(72.0, 0.05, 60.0, 20.0);
        let s: Vec<f64> = strong.iter().zip(&weak).map(|(a, b)| a + b).collect();
        let hr = estimate_hr_fft(&s, 20.0, &FrequencyBand::heart_rate()).unwrap();
        assert!((hr - 72.0).abs() <= 0.5, "{hr}");
    }

    #[test]
    fn short_and_zero_signals_are_rejected() {
        let band = FrequencyBand::heart_rate();
        assert!(matches!(estimate_hr_fft(&[1.0; 47], 20.0, &band), Err(Error::SignalTooShort { min: 48, .. })));
        assert!(matches!(estimate_hr_fft(&[0.0; 1200], 20.0, &band), Err(Error::ZeroSignal)));
        assert!(matches!(estimate_hr_fft(&[3.0; 1200], 20.0, &band), Err(Error::ZeroSignal)));
    }

    #[test]
    fn result_stays_in_band() {
        for bpm in [30.0, 49.0, 101.0, 140.0] {
            let hr = estimate_hr_fft(&tone(bpm, 1.0, 30.0, 20.0), 20.0, &FrequencyBand::heart_rate()).unwrap();
            assert!((50.0..=100.0).contains(&hr), "{bpm} -> {hr}");
        }
    }

    #[test]
    fn spectrum_covers_band_only() {
        let s = tone(70.0, 1.0, 60.0, 20.0);
        let spec = fft_band_spectrum(&s, 20.0, &FrequencyBand::heart_rate()).unwrap();
        assert!(spec.iter().all(|(f, _)| *f >= 50.0 / 60.0 && *f <= 100.0 / 60.0));
        let (fpk, _) = spec.iter().cloned().fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        assert!((fpk * 60.0 - 70.0).abs() < 0.2);
    }
}
