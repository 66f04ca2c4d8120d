//! Synthetic evaluation corpora, accuracy metrics and clean-versus-defended
//! experiments.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::defense::{choose_target_hr, run_defense, ConstraintSet, DefenseConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    mlp_features, train_mlp_on_features, DifferentiableEstimator, FeatureSet, FftEstimator, FrequencyBand, HrEstimator,
    MlpEstimator, MlpParams, SoftSpecEstimator, SoftSpecParams, TrainHyper, DEFAULT_HALF_WIDTH,
};
use crate::radargram::{synthesize_radargram, MotionComponent, NoiseSpec, RadarConfig, Radargram, TargetSpec};

/// Victim scene distribution for a synthetic corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePreset {
    pub hr_min: f64,
    pub hr_max: f64,
    pub breath_min: f64,
    pub breath_max: f64,
    /// Heart displacement amplitude, bins.
    pub heart_amp: f64,
    /// Breathing displacement amplitude, bins.
    pub breath_amp: f64,
    pub offset: f64,
    pub snr_db: f64,
    pub window_s: f64,
    pub count: usize,
}

impl Default for ScenePreset {
    fn default() -> Self {
        Self {
            hr_min: 55.0,
            hr_max: 95.0,
            breath_min: 12.0,
            breath_max: 25.0,
            heart_amp: 0.4,
            breath_amp: 1.2,
            offset: 111.0,
            snr_db: 20.0,
            window_s: 60.0,
            count: 100,
        }
    }
}

impl ScenePreset {
    /// Default radar with as many scans as the window holds.
    pub fn radar_config(&self) -> RadarConfig {
        let base = RadarConfig::default();
        RadarConfig { scans: (self.window_s * base.scan_rate_hz).round() as usize, ..base }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.hr_min,
            self.hr_max,
            self.breath_min,
            self.breath_max,
            self.heart_amp,
            self.breath_amp,
            self.offset,
            self.snr_db,
            self.window_s,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("preset values must be finite"));
        }
        if !(50.0 <= self.hr_min && self.hr_min <= self.hr_max && self.hr_max <= 100.0) {
            return Err(Error::invalid(format!("heart-rate range [{}, {}] must lie in [50, 100]", self.hr_min, self.hr_max)));
        }
        if !(0.0 < self.breath_min && self.breath_min <= self.breath_max) {
            return Err(Error::invalid(format!("breathing range [{}, {}] is invalid", self.breath_min, self.breath_max)));
        }
        if !(self.heart_amp > 0.0 && self.breath_amp >= 0.0) {
            return Err(Error::invalid("heart amplitude must be > 0 and breathing amplitude >= 0"));
        }
        if self.count == 0 {
            return Err(Error::invalid("count must be at least 1"));
        }
        if self.window_s <= 0.0 {
            return Err(Error::invalid("window must be positive"));
        }
        let config = self.radar_config();
        config.validate()?;
        let reach = self.heart_amp + self.breath_amp;
        if self.offset - reach < 0.0 || self.offset + reach >= config.bins as f64 {
            return Err(Error::Excursion { low: self.offset - reach, high: self.offset + reach, bins: config.bins });
        }
        Ok(())
    }
}

/// Seed of record `index` in a corpus generated from `seed`.
pub fn record_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// One victim scene drawn from the preset.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub index: usize,
    pub seed: u64,
    pub true_bpm: f64,
    pub breath_rpm: f64,
    pub radargram: Radargram,
}

/// Record `index` of the corpus, generated independently of all others.
pub fn generate_record(preset: &ScenePreset, seed: u64, index: usize) -> Result<SceneRecord> {
    preset.validate()?;
    let rseed = record_seed(seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(rseed);
    let true_bpm = rng.random_range(preset.hr_min..=preset.hr_max);
    let breath_rpm = rng.random_range(preset.breath_min..=preset.breath_max);
    let heart_phase = rng.random_range(0.0..2.0 * PI);
    let breath_phase = rng.random_range(0.0..2.0 * PI);
    let mut components = vec![MotionComponent::new(preset.heart_amp, true_bpm, heart_phase)];
    if preset.breath_amp > 0.0 {
        components.push(MotionComponent::new(preset.breath_amp, breath_rpm, breath_phase));
    }
    let victim = TargetSpec::new(preset.offset, 1.0, components);
    let radargram = synthesize_radargram(&[victim], NoiseSpec::snr_db(preset.snr_db), &preset.radar_config(), rng.next_u64())?;
    Ok(SceneRecord { index, seed: rseed, true_bpm, breath_rpm, radargram })
}

/// All `preset.count` records with their true heart rates.
pub fn generate_dataset(preset: &ScenePreset, seed: u64) -> Result<Vec<(Radargram, f64)>> {
    preset.validate()?;
    (0..preset.count)
        .into_par_iter()
        .map(|i| generate_record(preset, seed, i).map(|r| (r.radargram, r.true_bpm)))
        .collect()
}

/// MLP features of every record, generated without keeping the radargrams.
pub fn generate_features(preset: &ScenePreset, seed: u64, inputs: usize) -> Result<FeatureSet> {
    preset.validate()?;
    let band = FrequencyBand::heart_rate();
    let rows: Vec<(Vec<f64>, f64)> = (0..preset.count)
        .into_par_iter()
        .map(|i| {
            let r = generate_record(preset, seed, i)?;
            Ok((mlp_features(&r.radargram, inputs, &band, DEFAULT_HALF_WIDTH)?, r.true_bpm))
        })
        .collect::<Result<_>>()?;
    let mut set = FeatureSet::default();
    for (f, y) in rows {
        set.push(f, y);
    }
    Ok(set)
}

/// Trains an MLP on a corpus drawn from `preset`.
pub fn train_on_preset(preset: &ScenePreset, seed: u64, hyper: &TrainHyper) -> Result<MlpParams> {
    let set = generate_features(preset, seed, hyper.inputs)?;
    train_mlp_on_features(&set, hyper)
}

fn check_pairs(preds: &[f64], truths: &[f64], min: usize) -> Result<()> {
    if preds.len() != truths.len() {
        return Err(Error::Metrics(format!("{} predictions vs {} truths", preds.len(), truths.len())));
    }
    if preds.len() < min {
        return Err(Error::Metrics(format!("need at least {min} pairs, got {}", preds.len())));
    }
    if preds.iter().chain(truths).any(|v| !v.is_finite()) {
        return Err(Error::Metrics("non-finite value".into()));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check_pairs(preds, truths, 1)?;
    Ok(preds.iter().zip(truths).map(|(p, t)| (p - t).abs()).sum::<f64>() / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlandAltman {
    pub mean_diff: f64,
    pub loa_low: f64,
    pub loa_high: f64,
}

/// Mean of `pred - truth` and its 95% limits of agreement.
pub fn bland_altman(preds: &[f64], truths: &[f64]) -> Result<BlandAltman> {
    check_pairs(preds, truths, 2)?;
    let n = preds.len() as f64;
    let diffs: Vec<f64> = preds.iter().zip(truths).map(|(p, t)| p - t).collect();
    let mean_diff = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(BlandAltman { mean_diff, loa_low: mean_diff - 1.96 * sd, loa_high: mean_diff + 1.96 * sd })
}

/// The estimator under evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalModel {
    Fft(FftEstimator),
    SoftSpec(SoftSpecEstimator),
    Mlp(MlpEstimator),
}

impl EvalModel {
    pub fn estimator(&self) -> &dyn HrEstimator {
        match self {
            EvalModel::Fft(e) => e,
            EvalModel::SoftSpec(e) => e,
            EvalModel::Mlp(e) => e,
        }
    }

    /// The FFT peak picker is not differentiable, so it is attacked through a
    /// soft-argmax surrogate over the same band.
    pub fn attack_surrogate(&self) -> Box<dyn DifferentiableEstimator + '_> {
        match self {
            EvalModel::Fft(e) => Box::new(SoftSpecEstimator {
                params: SoftSpecParams::default(),
                band: e.band,
                half_width: e.half_width,
            }),
            EvalModel::SoftSpec(e) => Box::new(*e),
            EvalModel::Mlp(e) => Box::new(e.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefenseSettings {
    /// When false the perturbation is left out entirely.
    pub enabled: bool,
    pub margin_bpm: f64,
    pub alpha: f64,
    pub iterations: usize,
}

impl Default for DefenseSettings {
    fn default() -> Self {
        Self { enabled: true, margin_bpm: 12.0, alpha: 0.5, iterations: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub index: usize,
    pub seed: u64,
    pub true_bpm: f64,
    pub pred_clean_bpm: f64,
    pub pred_defended_bpm: f64,
    pub target_bpm: f64,
    /// `None` when the defense is disabled.
    pub f_opt: Option<f64>,
    pub a_opt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub model: String,
    pub seed: u64,
    pub requested: usize,
    pub skipped: usize,
    pub records: Vec<EvalRecord>,
    pub mae_clean: f64,
    pub mae_defended: f64,
    pub ba_clean: BlandAltman,
    pub ba_defended: BlandAltman,
    /// `mae_defended / mae_clean`; infinite when the clean error is zero.
    pub degradation_ratio: f64,
    pub settings: DefenseSettings,
}

fn evaluate_record(
    preset: &ScenePreset,
    model: &EvalModel,
    settings: &DefenseSettings,
    c: &ConstraintSet,
    seed: u64,
    index: usize,
) -> Result<EvalRecord> {
    let scene = generate_record(preset, seed, index)?;
    let est = model.estimator();
    let pred_clean_bpm = est.estimate(&scene.radargram)?;
    let target_bpm = choose_target_hr(scene.true_bpm, c, settings.margin_bpm)?;
    let (pred_defended_bpm, f_opt, a_opt) = if settings.enabled {
        let cfg = DefenseConfig {
            alpha: settings.alpha,
            iterations: settings.iterations,
            target_bpm,
            perturbation_offset: None,
            seed: scene.seed,
        };
        let surrogate = model.attack_surrogate();
        let r = run_defense(&scene.radargram, surrogate.as_ref(), &cfg, c)?;
        (est.estimate(&r.perturbed)?, Some(r.f_opt), Some(r.a_opt))
    } else {
        (est.estimate(&scene.radargram)?, None, None)
    };
    Ok(EvalRecord {
        index,
        seed: scene.seed,
        true_bpm: scene.true_bpm,
        pred_clean_bpm,
        pred_defended_bpm,
        target_bpm,
        f_opt,
        a_opt,
    })
}

/// Clean and defended predictions for every record of the preset corpus.
///
/// Records that fail are logged and skipped. Per-record seeds depend only on
/// `(seed, index)`, so the report does not depend on thread scheduling.
pub fn run_experiment(
    preset: &ScenePreset,
    model: &EvalModel,
    settings: &DefenseSettings,
    c: &ConstraintSet,
    seed: u64,
) -> Result<ExperimentReport> {
    preset.validate()?;
    c.validate()?;
    let outcomes: Vec<Result<EvalRecord>> = (0..preset.count)
        .into_par_iter()
        .map(|i| evaluate_record(preset, model, settings, c, seed, i))
        .collect();
    let mut records = Vec::with_capacity(outcomes.len());
    let mut skipped = 0;
    for (i, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::warn!("record {i} skipped: {e}");
                skipped += 1;
            }
        }
    }
    let truths: Vec<f64> = records.iter().map(|r| r.true_bpm).collect();
    let clean: Vec<f64> = records.iter().map(|r| r.pred_clean_bpm).collect();
    let defended: Vec<f64> = records.iter().map(|r| r.pred_defended_bpm).collect();
    let mae_clean = mae(&clean, &truths)?;
    let mae_defended = mae(&defended, &truths)?;
    let degradation_ratio = if mae_clean > 0.0 {
        mae_defended / mae_clean
    } else if mae_defended > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(ExperimentReport {
        model: model.estimator().name().to_string(),
        seed,
        requested: preset.count,
        skipped,
        mae_clean,
        mae_defended,
        ba_clean: bland_altman(&clean, &truths)?,
        ba_defended: bland_altman(&defended, &truths)?,
        degradation_ratio,
        records,
        settings: *settings,
    })
}

impl ExperimentReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let ba = |s: &mut String, name: &str, b: &BlandAltman| {
            let _ = writeln!(s, "\n[{name}]");
            let _ = writeln!(s, "mean_diff_bpm: {:.6}", b.mean_diff);
            let _ = writeln!(s, "loa_low_bpm: {:.6}", b.loa_low);
            let _ = writeln!(s, "loa_high_bpm: {:.6}", b.loa_high);
        };
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "model: {}", self.model);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "records_requested: {}", self.requested);
        let _ = writeln!(s, "records_evaluated: {}", self.records.len());
        let _ = writeln!(s, "records_skipped: {}", self.skipped);
        let _ = writeln!(s, "defense_enabled: {}", self.settings.enabled);
        let _ = writeln!(s, "margin_bpm: {}", self.settings.margin_bpm);
        let _ = writeln!(s, "alpha: {}", self.settings.alpha);
        let _ = writeln!(s, "iterations: {}", self.settings.iterations);
        let _ = writeln!(s, "\n[accuracy]");
        let _ = writeln!(s, "mae_clean_bpm: {:.6}", self.mae_clean);
        let _ = writeln!(s, "mae_defended_bpm: {:.6}", self.mae_defended);
        let _ = writeln!(s, "degradation_ratio: {:.6}", self.degradation_ratio);
        ba(&mut s, "bland_altman_clean", &self.ba_clean);
        ba(&mut s, "bland_altman_defended", &self.ba_defended);
        s
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn write_records_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "index,seed,true_bpm,pred_clean_bpm,pred_defended_bpm,target_bpm,f_opt_rpm,a_opt_bins")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.records {
            writeln!(
                w,
                "{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
                r.index,
                r.seed,
                r.true_bpm,
                r.pred_clean_bpm,
                r.pred_defended_bpm,
                r.target_bpm,
                opt(r.f_opt),
                opt(r.a_opt)
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// CSV listing of the records a corpus would contain, without the radargrams.
pub fn write_dataset_manifest(preset: &ScenePreset, seed: u64, path: impl AsRef<Path>) -> Result<()> {
    preset.validate()?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "index,seed,true_bpm,breath_rpm")?;
    for i in 0..preset.count {
        let rseed = record_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(rseed);
        let hr = rng.random_range(preset.hr_min..=preset.hr_max);
        let br = rng.random_range(preset.breath_min..=preset.breath_max);
        writeln!(w, "{i},{rseed},{hr:.6},{br:.6}")?;
    }
    w.flush()?;
    Ok(())
}
