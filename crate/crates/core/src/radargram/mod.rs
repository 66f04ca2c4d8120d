//! Radargram synthesis.
//!
//! A radargram is an `M x N` matrix of complex returns: rows are slow-time
//! scans, columns are fast-time range bins. Targets are point reflectors
//! whose range-bin position moves as a sum of sinusoids; each scan row is a
//! Gaussian-modulated complex pulse centred on the current position.
//!
//! Conventions: scan index `m` runs `1..=M` and is stored in row `m - 1`.
//! Bin coordinates are `0..N` and equal the storage column, so a target
//! with offset `111.0` peaks in column 111.

mod format;

pub use format::{read_radargram, write_magnitude_csv, write_radargram, RGRM_MAGIC, RGRM_VERSION};

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Beyond this squared normalised distance the Gaussian envelope is below
/// `exp(-42) ~ 6e-19` and samples are left at zero.
const ENVELOPE_CUTOFF_SQ: f64 = 42.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarConfig {
    /// Pulse carrier frequency `f0`, Hz.
    pub carrier_hz: f64,
    /// Fast-time sampling period `Ts`, seconds.
    pub fast_period_s: f64,
    /// Gaussian pulse width `omega0`, seconds.
    pub pulse_width_s: f64,
    /// Slow-time scan rate `Fs`, Hz.
    pub scan_rate_hz: f64,
    /// Radial distance covered by one range bin, metres.
    pub bin_scale_m: f64,
    /// Number of slow-time scans `M`.
    pub scans: usize,
    /// Number of fast-time range bins `N`.
    pub bins: usize,
}

impl Default for RadarConfig {
    fn default() -> Self {
        let bin_scale_m = 0.009;
        let fast_period_s = 2.0 * bin_scale_m / SPEED_OF_LIGHT;
        Self {
            carrier_hz: 4.3e9,
            fast_period_s,
            pulse_width_s: 5.0 * fast_period_s,
            scan_rate_hz: 20.0,
            bin_scale_m,
            scans: 1200,
            bins: 256,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("f0", self.carrier_hz),
            ("Ts", self.fast_period_s),
            ("omega0", self.pulse_width_s),
            ("Fs", self.scan_rate_hz),
            ("bin_scale", self.bin_scale_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.scans < 2 {
            return Err(Error::invalid(format!("M must be at least 2, got {}", self.scans)));
        }
        if self.bins < 2 {
            return Err(Error::invalid(format!("N must be at least 2, got {}", self.bins)));
        }
        Ok(())
    }

    /// Envelope scale `omega0 / Ts` in range bins.
    pub fn envelope_bins(&self) -> f64 {
        self.pulse_width_s / self.fast_period_s
    }

    /// Carrier cycles per range bin, `f0 * Ts`.
    pub fn cycles_per_bin(&self) -> f64 {
        self.carrier_hz * self.fast_period_s
    }

    /// Observation window length in seconds.
    pub fn window_s(&self) -> f64 {
        self.scans as f64 / self.scan_rate_hz
    }

    /// Converts a radial distance in metres to a (fractional) bin coordinate.
    pub fn range_to_bin(&self, range_m: f64) -> f64 {
        range_m / self.bin_scale_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionComponent {
    /// Spatial amplitude, range bins.
    pub amplitude: f64,
    /// Oscillation frequency, cycles per minute.
    pub freq_rpm: f64,
    /// Initial phase, radians.
    pub phase: f64,
}

impl MotionComponent {
    pub fn new(amplitude: f64, freq_rpm: f64, phase: f64) -> Self {
        Self { amplitude, freq_rpm, phase }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::invalid(format!("motion amplitude must be >= 0, got {}", self.amplitude)));
        }
        if !(self.freq_rpm.is_finite() && self.freq_rpm > 0.0) {
            return Err(Error::invalid(format!("motion frequency must be > 0 rpm, got {}", self.freq_rpm)));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("motion phase must be finite"));
        }
        Ok(())
    }

    /// Angular increment per scan, radians.
    pub fn radians_per_scan(&self, scan_rate_hz: f64) -> f64 {
        2.0 * PI * self.freq_rpm / (60.0 * scan_rate_hz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    /// Centre range bin.
    pub offset: f64,
    /// Path amplitude.
    pub reflectivity: f64,
    /// Summed displacement components, e.g. heart and breathing.
    pub components: Vec<MotionComponent>,
}

impl TargetSpec {
    pub fn new(offset: f64, reflectivity: f64, components: Vec<MotionComponent>) -> Self {
        Self { offset, reflectivity, components }
    }

    /// A unit-reflectivity target with a single motion component.
    pub fn single(offset: f64, amplitude: f64, freq_rpm: f64) -> Self {
        Self::new(offset, 1.0, vec![MotionComponent::new(amplitude, freq_rpm, 0.0)])
    }

    pub fn excursion(&self) -> f64 {
        self.components.iter().map(|c| c.amplitude).sum()
    }

    pub fn validate(&self, config: &RadarConfig) -> Result<()> {
        if !(self.reflectivity.is_finite() && self.reflectivity > 0.0) {
            return Err(Error::invalid(format!("reflectivity must be > 0, got {}", self.reflectivity)));
        }
        if !self.offset.is_finite() {
            return Err(Error::invalid("target offset must be finite"));
        }
        for c in &self.components {
            c.validate()?;
        }
        let low = self.offset - self.excursion();
        let high = self.offset + self.excursion();
        if low < 0.0 || high >= config.bins as f64 {
            return Err(Error::Excursion { low, high, bins: config.bins });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    /// SNR relative to the peak pulse magnitude of the strongest target, dB.
    /// `None` synthesizes a noiseless radargram.
    pub snr_db: Option<f64>,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self { snr_db: None }
    }

    pub fn snr_db(snr_db: f64) -> Self {
        Self { snr_db: Some(snr_db) }
    }
}

/// Dense row-major complex matrix. Also used for gradients and partial
/// derivatives with respect to radargram samples, where a sample's entry
/// holds `d/dRe + i d/dIm`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "grid data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.cols + col] = v;
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [Complex64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Real inner product `sum Re(conj(a) * b)` over all entries.
    pub fn real_inner(&self, other: &ComplexGrid) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Radargram {
    config: RadarConfig,
    samples: ComplexGrid,
}

impl Radargram {
    pub fn new(config: RadarConfig, samples: ComplexGrid) -> Result<Self> {
        config.validate()?;
        let expected = (config.scans, config.bins);
        if samples.dims() != expected {
            return Err(Error::DimensionMismatch { expected, found: samples.dims() });
        }
        if let Some(i) = samples.as_slice().iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFiniteSample { scan: i / config.bins, bin: i % config.bins });
        }
        Ok(Self { config, samples })
    }

    pub fn zeros(config: RadarConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, samples: ComplexGrid::zeros(config.scans, config.bins) })
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn samples(&self) -> &ComplexGrid {
        &self.samples
    }

    pub fn scans(&self) -> usize {
        self.config.scans
    }

    pub fn bins(&self) -> usize {
        self.config.bins
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.samples.get(row, col)
    }

    /// Copy with every sample rounded to the nearest `f32`, i.e. exactly the
    /// values an RGRM file can carry.
    pub fn quantized_f32(&self) -> Self {
        let data = self
            .samples
            .as_slice()
            .iter()
            .map(|z| Complex64::new(z.re as f32 as f64, z.im as f32 as f64))
            .collect();
        Self { config: self.config, samples: ComplexGrid { rows: self.samples.rows, cols: self.samples.cols, data } }
    }

    /// Multiplies every sample by a real factor.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.samples.data.iter_mut().for_each(|z| *z *= factor);
        out
    }

    pub(crate) fn from_parts_unchecked(config: RadarConfig, samples: ComplexGrid) -> Self {
        Self { config, samples }
    }
}

/// Range-bin position of a target at every scan `m = 1..=M`.
pub fn displacement_series(target: &TargetSpec, config: &RadarConfig) -> Result<Vec<f64>> {
    config.validate()?;
    target.validate(config)?;
    Ok(displacements(target, config))
}

fn displacements(target: &TargetSpec, config: &RadarConfig) -> Vec<f64> {
    (1..=config.scans)
        .map(|m| {
            let m = m as f64;
            target.offset
                + target
                    .components
                    .iter()
                    .map(|c| c.amplitude * (c.radians_per_scan(config.scan_rate_hz) * m + c.phase).sin())
                    .sum::<f64>()
        })
        .collect()
}

/// Bins whose envelope is above the cutoff for a pulse centred at `d`.
pub(crate) fn pulse_support(d: f64, envelope_bins: f64, bins: usize) -> Range<usize> {
    let reach = envelope_bins * ENVELOPE_CUTOFF_SQ.sqrt();
    let lo = (d - reach).ceil().max(0.0) as usize;
    let hi = ((d + reach).floor() + 1.0).clamp(0.0, bins as f64) as usize;
    lo.min(hi)..hi
}

/// Gaussian-modulated complex pulse evaluated at `u = n - d` bins.
#[inline]
pub(crate) fn pulse_sample(u: f64, envelope_bins: f64, cycles_per_bin: f64) -> Complex64 {
    let r = u / envelope_bins;
    let env = (-r * r).exp();
    Complex64::from_polar(env, 2.0 * PI * cycles_per_bin * u)
}

fn add_pulse(row: &mut [Complex64], d: f64, gain: f64, config: &RadarConfig) {
    let scale = config.envelope_bins();
    let cyc = config.cycles_per_bin();
    for n in pulse_support(d, scale, row.len()) {
        row[n] += gain * pulse_sample(n as f64 - d, scale, cyc);
    }
}

/// One fast-time scan of a unit pulse centred at bin coordinate `d`.
pub fn synthesize_pulse_row(d: f64, config: &RadarConfig) -> Result<Vec<Complex64>> {
    config.validate()?;
    if !d.is_finite() {
        return Err(Error::invalid("pulse centre must be finite"));
    }
    let mut row = vec![Complex64::new(0.0, 0.0); config.bins];
    add_pulse(&mut row, d, 1.0, config);
    Ok(row)
}

/// Superposes every target's pulse train and adds seeded complex white noise.
pub fn synthesize_radargram(
    scene: &[TargetSpec],
    noise: NoiseSpec,
    config: &RadarConfig,
    seed: u64,
) -> Result<Radargram> {
    config.validate()?;
    for t in scene {
        t.validate(config)?;
    }
    let mut samples = ComplexGrid::zeros(config.scans, config.bins);
    for target in scene {
        let track = displacements(target, config);
        for (row, d) in track.into_iter().enumerate() {
            add_pulse(samples.row_mut(row), d, target.reflectivity, config);
        }
    }
    if let Some(snr_db) = noise.snr_db {
        if !snr_db.is_finite() {
            return Err(Error::invalid("snr_db must be finite"));
        }
        let peak = scene.iter().map(|t| t.reflectivity).fold(0.0, f64::max);
        let reference = if peak > 0.0 { peak } else { 1.0 };
        let sigma = reference * 10f64.powf(-snr_db / 20.0) / std::f64::consts::SQRT_2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for z in samples.as_mut_slice() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += Complex64::new(sigma * re, sigma * im);
        }
    }
    Ok(Radargram::from_parts_unchecked(*config, samples))
}

/// Subtracts each bin's slow-time mean.
pub fn remove_clutter(x: &Radargram) -> Radargram {
    let (rows, cols) = x.samples.dims();
    let mut means = vec![Complex64::new(0.0, 0.0); cols];
    for r in 0..rows {
        for (acc, z) in means.iter_mut().zip(x.samples.row(r)) {
            *acc += z;
        }
    }
    means.iter_mut().for_each(|z| *z /= rows as f64);
    let mut out = x.clone();
    for r in 0..rows {
        for (z, mean) in out.samples.row_mut(r).iter_mut().zip(&means) {
            *z -= mean;
        }
    }
    out
}

/// Element-wise complex sum of two radargrams with identical configuration.
pub fn add_radargrams(x: &Radargram, delta: &Radargram) -> Result<Radargram> {
    if x.samples.dims() != delta.samples.dims() {
        return Err(Error::DimensionMismatch { expected: x.samples.dims(), found: delta.samples.dims() });
    }
    if x.config != delta.config {
        return Err(Error::ConfigMismatch);
    }
    let mut out = x.clone();
    for (z, d) in out.samples.data.iter_mut().zip(&delta.samples.data) {
        *z += d;
    }
    Ok(out)
}
