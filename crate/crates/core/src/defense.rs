//! Sinusoidal defense: projected gradient descent over the frequency and
//! spatial amplitude of a sinusoidal perturbation target, driving an
//! estimator's output toward a chosen heart rate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{select_target_bin, DifferentiableEstimator};
use crate::radargram::{
    add_radargrams, pulse_sample, pulse_support, synthesize_radargram, ComplexGrid, NoiseSpec, RadarConfig, Radargram,
    TargetSpec,
};

/// Box bounds on the perturbation: frequency in rpm, amplitude in range bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet {
    pub f_min: f64,
    pub f_max: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self { f_min: 50.0, f_max: 100.0, a_min: 0.5, a_max: 25.0 }
    }
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.f_min, self.f_max, self.a_min, self.a_max].iter().all(|v| v.is_finite());
        if !finite || !(0.0 < self.f_min && self.f_min < self.f_max) || !(0.0 < self.a_min && self.a_min < self.a_max) {
            return Err(Error::invalid(format!("invalid constraint box {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, f: f64, a: f64) -> bool {
        (self.f_min..=self.f_max).contains(&f) && (self.a_min..=self.a_max).contains(&a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefenseConfig {
    /// Frequency step size; the amplitude step is a tenth of it.
    pub alpha: f64,
    pub iterations: usize,
    pub target_bpm: f64,
    /// Centre bin of the perturbation; `None` uses the victim's selected bin.
    pub perturbation_offset: Option<f64>,
    pub seed: u64,
}

impl DefenseConfig {
    pub fn new(target_bpm: f64, seed: u64) -> Self {
        Self { alpha: 0.5, iterations: 200, target_bpm, perturbation_offset: None, seed }
    }

    pub fn amplitude_step(&self) -> f64 {
        0.1 * self.alpha
    }

    pub fn validate(&self, c: &ConstraintSet) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(format!("step size must be > 0, got {}", self.alpha)));
        }
        if !(c.f_min..=c.f_max).contains(&self.target_bpm) {
            return Err(Error::invalid(format!(
                "target {} bpm outside [{}, {}]",
                self.target_bpm, c.f_min, c.f_max
            )));
        }
        if let Some(o) = self.perturbation_offset {
            if !o.is_finite() {
                return Err(Error::invalid("perturbation offset must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseResult {
    pub f_opt: f64,
    pub a_opt: f64,
    pub perturbed: Radargram,
    /// Loss at each iteration, evaluated before that iteration's update.
    pub loss_trace: Vec<f64>,
    /// `(f, a)` after every projected update.
    pub iterates: Vec<(f64, f64)>,
    pub final_estimate: f64,
    pub target_bpm: f64,
    pub offset: f64,
}

impl DefenseResult {
    /// `key: value` summary followed by the per-iteration loss.
    pub fn to_report_text(&self) -> String {
        let mut s = String::new();
        s.push_str("[defense]\n");
        s.push_str(&format!("f_opt_rpm: {:.6}\n", self.f_opt));
        s.push_str(&format!("a_opt_bins: {:.6}\n", self.a_opt));
        s.push_str(&format!("offset_bin: {:.6}\n", self.offset));
        s.push_str(&format!("target_bpm: {:.6}\n", self.target_bpm));
        s.push_str(&format!("final_estimate_bpm: {:.6}\n", self.final_estimate));
        s.push_str(&format!("iterations: {}\n", self.loss_trace.len()));
        s.push_str("\n[loss_trace]\n");
        for (t, l) in self.loss_trace.iter().enumerate() {
            s.push_str(&format!("{}: {:.9e}\n", t + 1, l));
        }
        s
    }

    pub fn write_report(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_report_text())?;
        Ok(())
    }
}

fn perturbation_target(a: f64, f: f64, offset: f64) -> TargetSpec {
    TargetSpec::single(offset, a, f)
}

/// Unit-reflectivity pulse train whose centre follows `a sin(2 pi f m / (60 Fs)) + offset`.
pub fn make_perturbation(a: f64, f: f64, offset: f64, config: &RadarConfig) -> Result<Radargram> {
    synthesize_radargram(&[perturbation_target(a, f, offset)], NoiseSpec::noiseless(), config, 0)
}

/// `d delta / d a` and `d delta / d f` as complex matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPartials {
    pub d_amplitude: ComplexGrid,
    pub d_frequency: ComplexGrid,
}

pub fn perturbation_partials(a: f64, f: f64, offset: f64, config: &RadarConfig) -> Result<PerturbationPartials> {
    let mut d_amplitude = ComplexGrid::zeros(config.scans, config.bins);
    let mut d_frequency = ComplexGrid::zeros(config.scans, config.bins);
    for_each_partial_where(a, f, offset, config, |_, _| true, |row, n, da, df| {
        d_amplitude.set(row, n, da);
        d_frequency.set(row, n, df);
    })?;
    Ok(PerturbationPartials { d_amplitude, d_frequency })
}

/// Visits `(row, bin, d delta/d a, d delta/d f)` over the pulse support of every
/// scan, skipping entries rejected by `keep`.
fn for_each_partial_where(
    a: f64,
    f: f64,
    offset: f64,
    config: &RadarConfig,
    keep: impl Fn(usize, usize) -> bool,
    mut visit: impl FnMut(usize, usize, Complex64, Complex64),
) -> Result<()> {
    config.validate()?;
    perturbation_target(a, f, offset).validate(config)?;
    let scale = config.envelope_bins();
    let cyc = config.cycles_per_bin();
    let omega = 2.0 * PI * f / (60.0 * config.scan_rate_hz);
    for row in 0..config.scans {
        let m = (row + 1) as f64;
        let (sin, cos) = (omega * m).sin_cos();
        let d = a * sin + offset;
        let dd_df = a * cos * 2.0 * PI * m / (60.0 * config.scan_rate_hz);
        for n in pulse_support(d, scale, config.bins) {
            if !keep(row, n) {
                continue;
            }
            let u = n as f64 - d;
            // d delta / d d = delta * (2u / s^2 - i 2 pi f0 Ts)
            let dd = pulse_sample(u, scale, cyc) * Complex64::new(2.0 * u / (scale * scale), -2.0 * PI * cyc);
            visit(row, n, dd * sin, dd * dd_df);
        }
    }
    Ok(())
}

/// Squared error.
pub fn loss(pred: f64, y: f64) -> f64 {
    (pred - y) * (pred - y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefenseGradient {
    pub estimate: f64,
    pub loss: f64,
    pub grad_a: f64,
    pub grad_f: f64,
}

/// Loss of `estimator(x + delta(a, f))` against `y` and its gradient in `(a, f)`.
pub fn defense_gradient(
    a: f64,
    f: f64,
    x: &Radargram,
    estimator: &dyn DifferentiableEstimator,
    y: f64,
    offset: f64,
) -> Result<DefenseGradient> {
    let delta = make_perturbation(a, f, offset, x.config())?;
    let perturbed = add_radargrams(x, &delta)?;
    let (estimate, g_x) = estimator.estimate_with_grad(&perturbed)?;
    let (mut inner_a, mut inner_f) = (0.0, 0.0);
    let nonzero = |row: usize, n: usize| g_x.get(row, n) != Complex64::new(0.0, 0.0);
    for_each_partial_where(a, f, offset, x.config(), nonzero, |row, n, da, df| {
        let g = g_x.get(row, n);
        inner_a += g.re * da.re + g.im * da.im;
        inner_f += g.re * df.re + g.im * df.im;
    })?;
    let prefactor = 2.0 * (estimate - y);
    Ok(DefenseGradient { estimate, loss: loss(estimate, y), grad_a: prefactor * inner_a, grad_f: prefactor * inner_f })
}

/// Projects `(f, a)` onto the constraint box.
pub fn clip_params(f: f64, a: f64, c: &ConstraintSet) -> (f64, f64) {
    (f.clamp(c.f_min, c.f_max), a.clamp(c.a_min, c.a_max))
}

/// A target heart rate `margin` bpm above the truth, or below it when above
/// would leave the frequency box.
pub fn choose_target_hr(true_bpm: f64, c: &ConstraintSet, margin: f64) -> Result<f64> {
    if !(margin.is_finite() && margin > 0.0) {
        return Err(Error::invalid(format!("margin must be > 0, got {margin}")));
    }
    if margin > c.f_max - c.f_min {
        return Err(Error::invalid(format!(
            "margin {margin} bpm is wider than the band [{}, {}]",
            c.f_min, c.f_max
        )));
    }
    let y = if true_bpm + margin <= c.f_max { true_bpm + margin } else { true_bpm - margin };
    Ok(y.clamp(c.f_min, c.f_max))
}

/// Runs projected gradient descent on `(f, a)` against `estimator`.
pub fn run_defense(
    x: &Radargram,
    estimator: &dyn DifferentiableEstimator,
    cfg: &DefenseConfig,
    c: &ConstraintSet,
) -> Result<DefenseResult> {
    c.validate()?;
    cfg.validate(c)?;
    let offset = match cfg.perturbation_offset {
        Some(o) => o,
        None => select_target_bin(x)? as f64,
    };
    if offset - c.a_max < 0.0 || offset + c.a_max >= x.bins() as f64 {
        return Err(Error::Excursion { low: offset - c.a_max, high: offset + c.a_max, bins: x.bins() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut f = rng.random_range(c.f_min..=c.f_max);
    let mut a = 0.5 * (c.a_min + c.a_max);
    let mut loss_trace = Vec::with_capacity(cfg.iterations);
    let mut iterates = Vec::with_capacity(cfg.iterations);
    for t in 1..=cfg.iterations {
        let g = defense_gradient(a, f, x, estimator, cfg.target_bpm, offset)?;
        if !(g.loss.is_finite() && g.grad_a.is_finite() && g.grad_f.is_finite()) {
            return Err(Error::NonFiniteLoss { iteration: t });
        }
        loss_trace.push(g.loss);
        (f, a) = clip_params(f - cfg.alpha * g.grad_f, a - cfg.amplitude_step() * g.grad_a, c);
        iterates.push((f, a));
        log::trace!("iteration {t}: f={f:.3} a={a:.3} estimate={:.3} loss={:.4}", g.estimate, g.loss);
    }
    let perturbed = add_radargrams(x, &make_perturbation(a, f, offset, x.config())?)?;
    let final_estimate = estimator.estimate(&perturbed)?;
    Ok(DefenseResult {
        f_opt: f,
        a_opt: a,
        perturbed,
        loss_trace,
        iterates,
        final_estimate,
        target_bpm: cfg.target_bpm,
        offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::SoftSpecEstimator;

    fn small() -> RadarConfig {
        RadarConfig { scans: 200, bins: 96, ..RadarConfig::default() }
    }

    #[test]
    fn zero_amplitude_rows_are_identical() {
        let c = small();
        let d = make_perturbation(0.0, 80.0, 40.0, &c).unwrap();
        for m in 1..c.scans {
            assert_eq!(d.samples().row(m), d.samples().row(0));
        }
        let peak = (0..c.bins).max_by(|&i, &j| d.at(0, i).norm().total_cmp(&d.at(0, j).norm())).unwrap();
        assert_eq!(peak, 40);
    }

    #[test]
    fn perturbation_reuses_synthesis() {
        let c = small();
        let d = make_perturbation(3.0, 77.0, 40.5, &c).unwrap();
        let s = synthesize_radargram(&[TargetSpec::single(40.5, 3.0, 77.0)], NoiseSpec::noiseless(), &c, 99).unwrap();
        for (p, q) in d.samples().as_slice().iter().zip(s.samples().as_slice()) {
            assert!((p - q).norm() <= 1e-12);
        }
    }

    #[test]
    fn frequency_partial_vanishes_without_amplitude() {
        let p = perturbation_partials(0.0, 80.0, 40.0, &small()).unwrap();
        assert_eq!(p.d_frequency.max_abs(), 0.0);
    }

    #[test]
    fn amplitude_partial_vanishes_where_sine_does() {
        // f = 60 rpm at Fs = 20 Hz: sin(2 pi m / 20) = 0 at m = 10, 20, ...
        let c = small();
        let p = perturbation_partials(4.0, 60.0, 40.0, &c).unwrap();
        for m in [10usize, 20, 30] {
            let row = p.d_amplitude.row(m - 1);
            assert!(row.iter().all(|z| z.norm() < 1e-12), "row {m}");
        }
    }

    #[test]
    fn excursion_violation() {
        assert!(make_perturbation(30.0, 80.0, 20.0, &small()).is_err());
        assert!(perturbation_partials(30.0, 80.0, 20.0, &small()).is_err());
    }

    #[test]
    fn loss_values() {
        assert_eq!(loss(86.0, 86.0), 0.0);
        assert_eq!(loss(86.0, 98.0), 144.0);
        assert_eq!(loss(71.3, 55.0), loss(55.0, 71.3));
    }

    #[test]
    fn clipping() {
        let c = ConstraintSet::default();
        assert_eq!(clip_params(110.0, 10.0, &c), (100.0, 10.0));
        assert_eq!(clip_params(75.0, 30.0, &c), (75.0, 25.0));
        assert_eq!(clip_params(75.0, 3.0, &c), (75.0, 3.0));
        assert_eq!(clip_params(10.0, 0.0, &c), (50.0, 0.5));
        let once = clip_params(-4.0, 99.0, &c);
        assert_eq!(clip_params(once.0, once.1, &c), once);
    }

    #[test]
    fn target_selection() {
        let c = ConstraintSet::default();
        assert_eq!(choose_target_hr(86.0, &c, 12.0).unwrap(), 98.0);
        assert_eq!(choose_target_hr(95.0, &c, 12.0).unwrap(), 83.0);
        assert!(choose_target_hr(75.0, &c, 60.0).is_err());
        assert!(choose_target_hr(75.0, &c, 0.0).is_err());
        assert_eq!(choose_target_hr(75.0, &c, 30.0).unwrap(), 50.0);
    }

    #[test]
    fn config_validation() {
        let c = ConstraintSet::default();
        let mut cfg = DefenseConfig::new(84.0, 0);
        assert!(cfg.validate(&c).is_ok());
        cfg.iterations = 0;
        assert!(cfg.validate(&c).is_err());
        assert!(DefenseConfig::new(120.0, 0).validate(&c).is_err());
        assert!(ConstraintSet { a_min: 0.0, ..c }.validate().is_err());
        assert!(ConstraintSet { f_min: 100.0, f_max: 50.0, ..c }.validate().is_err());
    }

    #[test]
    fn gradient_zero_at_target() {
        let c = RadarConfig { scans: 400, bins: 96, ..RadarConfig::default() };
        let x = synthesize_radargram(&[TargetSpec::single(48.0, 0.6, 72.0)], NoiseSpec::snr_db(20.0), &c, 3).unwrap();
        let est = SoftSpecEstimator::default();
        let probe = defense_gradient(10.0, 80.0, &x, &est, 70.0, 48.0).unwrap();
        let g = defense_gradient(10.0, 80.0, &x, &est, probe.estimate, 48.0).unwrap();
        assert_eq!((g.grad_a, g.grad_f, g.loss), (0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_iterations_rejected() {
        let c = RadarConfig { scans: 400, bins: 96, ..RadarConfig::default() };
        let x = synthesize_radargram(&[TargetSpec::single(48.0, 0.6, 72.0)], NoiseSpec::snr_db(20.0), &c, 3).unwrap();
        let cfg = DefenseConfig { iterations: 0, ..DefenseConfig::new(84.0, 1) };
        let r = run_defense(&x, &SoftSpecEstimator::default(), &cfg, &ConstraintSet::default());
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }
}
