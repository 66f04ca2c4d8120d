//! Heart-rate estimators over radargrams.
//!
//! All estimators share one front end: pick the range bin whose magnitude
//! varies most over slow time, extract a triangular-weighted magnitude
//! signal around it, and analyse that signal inside the heart-rate band.
//! The slow-time mean is removed from the extracted magnitude signal, which
//! is where static clutter drops out.

mod fft;
mod frontend;
mod mlp;
mod softspec;

pub use fft::{estimate_hr_fft, fft_band_spectrum, FftEstimator};
pub use frontend::{
    band_grid, band_power, extract_slow_time_signal, hann, select_target_bin, triangular_weights, GridSize,
    SpectrumTrace,
};
pub use mlp::{
    mlp_features, mse_param_grad, read_mlp_params, train_mlp, train_mlp_on_features, write_mlp_params, FeatureSet,
    MlpEstimator, MlpParams, TrainHyper, MLPW_MAGIC, MLPW_VERSION,
};
pub use softspec::{soft_argmax_bpm, SoftSpecEstimator, SoftSpecParams};

use crate::error::{Error, Result};
use crate::radargram::{ComplexGrid, Radargram};

/// Default half width of the triangular extraction window, bins.
pub const DEFAULT_HALF_WIDTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBand {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl FrequencyBand {
    pub fn new(lo_hz: f64, hi_hz: f64) -> Result<Self> {
        let band = Self { lo_hz, hi_hz };
        if !(lo_hz.is_finite() && hi_hz.is_finite() && 0.0 < lo_hz && lo_hz < hi_hz) {
            return Err(Error::invalid(format!("frequency band needs 0 < lo < hi, got [{lo_hz}, {hi_hz}]")));
        }
        Ok(band)
    }

    /// 50 to 100 beats per minute.
    pub fn heart_rate() -> Self {
        Self { lo_hz: 50.0 / 60.0, hi_hz: 100.0 / 60.0 }
    }

    pub fn from_bpm(lo_bpm: f64, hi_bpm: f64) -> Result<Self> {
        Self::new(lo_bpm / 60.0, hi_bpm / 60.0)
    }

    pub fn lo_bpm(&self) -> f64 {
        self.lo_hz * 60.0
    }

    pub fn hi_bpm(&self) -> f64 {
        self.hi_hz * 60.0
    }

    pub fn validate_for(&self, scan_rate_hz: f64) -> Result<()> {
        Self::new(self.lo_hz, self.hi_hz)?;
        if self.hi_hz >= scan_rate_hz / 2.0 {
            return Err(Error::invalid(format!(
                "band upper edge {} Hz must be below Nyquist {} Hz",
                self.hi_hz,
                scan_rate_hz / 2.0
            )));
        }
        Ok(())
    }

    pub fn clamp_hz(&self, f: f64) -> f64 {
        f.clamp(self.lo_hz, self.hi_hz)
    }
}

impl Default for FrequencyBand {
    fn default() -> Self {
        Self::heart_rate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutput {
    pub hr_bpm: f64,
    pub selected_bin: usize,
    /// `(frequency Hz, power)` pairs inside the band.
    pub spectrum: Vec<(f64, f64)>,
}

/// A heart-rate predictor `radargram -> bpm`.
pub trait HrEstimator: Send + Sync {
    fn name(&self) -> &'static str;

    fn estimate(&self, x: &Radargram) -> Result<f64>;
}

/// An estimator with an analytic gradient with respect to its input samples.
///
/// Gradient entries are `d out/d Re + i d out/d Im` per sample, with the
/// target-bin selection held fixed.
pub trait DifferentiableEstimator: HrEstimator {
    fn estimate_with_grad(&self, x: &Radargram) -> Result<(f64, ComplexGrid)>;

    fn grad_input(&self, x: &Radargram) -> Result<ComplexGrid> {
        Ok(self.estimate_with_grad(x)?.1)
    }
}

/// Estimator family selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Fft,
    SoftSpec,
    Mlp,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Fft => "fft",
            ModelKind::SoftSpec => "softspec",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fft" => Ok(ModelKind::Fft),
            "softspec" => Ok(ModelKind::SoftSpec),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::invalid(format!("unknown model {other:?}, expected fft|softspec|mlp"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_validation() {
        assert!(FrequencyBand::new(0.0, 1.0).is_err());
        assert!(FrequencyBand::new(1.2, 1.0).is_err());
        assert!(FrequencyBand::heart_rate().validate_for(20.0).is_ok());
        assert!(FrequencyBand::heart_rate().validate_for(3.0).is_err());
        let b = FrequencyBand::heart_rate();
        assert!((b.lo_bpm() - 50.0).abs() < 1e-12 && (b.hi_bpm() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn model_kind_parses() {
        assert_eq!("fft".parse::<ModelKind>().unwrap(), ModelKind::Fft);
        assert_eq!("mlp".parse::<ModelKind>().unwrap(), ModelKind::Mlp);
        assert!("resnet".parse::<ModelKind>().is_err());
    }
}
