//! Flat `key = value` configuration files for scenes and presets.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! known to the reader and may appear once.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::defense::ConstraintSet;
use crate::error::{Error, Result};
use crate::estimators::TrainHyper;
use crate::eval::{DefenseSettings, ScenePreset};
use crate::radargram::{MotionComponent, NoiseSpec, RadarConfig, TargetSpec, SPEED_OF_LIGHT};

/// Parsed `key = value` pairs with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key = value, found {line:?}") })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Parse { line: i + 1, msg: "empty key".into() });
            }
            if entries.insert(k.to_string(), (v.to_string(), i + 1)).is_some() {
                return Err(Error::Parse { line: i + 1, msg: format!("duplicate key {k:?}") });
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Removes and parses `key` if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse { line, msg: format!("invalid value {v:?} for {key}") }),
        }
    }

    fn take_into<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Keys not yet taken.
    pub fn remaining(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fails on the first key nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, (_, line))) => Err(Error::Parse { line, msg: format!("unknown key {k:?}") }),
        }
    }
}

/// A scene to synthesize: radar geometry, targets and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub radar: RadarConfig,
    pub targets: Vec<TargetSpec>,
    pub noise: NoiseSpec,
}

fn take_radar(kv: &mut KeyValues) -> Result<RadarConfig> {
    let mut c = RadarConfig::default();
    kv.take_into("f0", &mut c.carrier_hz)?;
    kv.take_into("Fs", &mut c.scan_rate_hz)?;
    kv.take_into("M", &mut c.scans)?;
    kv.take_into("N", &mut c.bins)?;
    let bin_scale: Option<f64> = kv.take("bin_scale")?;
    let ts: Option<f64> = kv.take("Ts")?;
    let omega0: Option<f64> = kv.take("omega0")?;
    if let Some(b) = bin_scale {
        c.bin_scale_m = b;
    }
    // Ts follows bin_scale unless given explicitly; omega0 follows Ts likewise
    c.fast_period_s = ts.unwrap_or(2.0 * c.bin_scale_m / SPEED_OF_LIGHT);
    c.pulse_width_s = omega0.unwrap_or(5.0 * c.fast_period_s);
    c.validate()?;
    Ok(c)
}

fn indices_under(kv: &KeyValues, prefix: &str) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = Vec::new();
    for key in kv.remaining() {
        if let Some(rest) = key.strip_prefix(prefix) {
            let idx = rest.split('.').next().unwrap_or("");
            let i: usize = idx.parse().map_err(|_| Error::invalid(format!("bad index in key {key:?}")))?;
            if !out.contains(&i) {
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

impl SceneConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let radar = take_radar(&mut kv)?;
        let noise = NoiseSpec { snr_db: kv.take("snr_db")? };
        let mut targets = Vec::new();
        for t in indices_under(&kv, "target.")? {
            let p = format!("target.{t}.");
            let offset: f64 =
                kv.take(&format!("{p}offset"))?.ok_or_else(|| Error::invalid(format!("{p}offset is required")))?;
            let reflectivity: f64 = kv.take(&format!("{p}reflectivity"))?.unwrap_or(1.0);
            let mut components = Vec::new();
            for j in indices_under(&kv, &format!("{p}component."))? {
                let q = format!("{p}component.{j}.");
                let amplitude: f64 = kv.take(&format!("{q}amplitude"))?.unwrap_or(0.0);
                let freq: f64 = kv
                    .take(&format!("{q}freq_rpm"))?
                    .ok_or_else(|| Error::invalid(format!("{q}freq_rpm is required")))?;
                let phase: f64 = kv.take(&format!("{q}phase"))?.unwrap_or(0.0);
                components.push(MotionComponent::new(amplitude, freq, phase));
            }
            targets.push(TargetSpec::new(offset, reflectivity, components));
        }
        kv.finish()?;
        for t in &targets {
            t.validate(&radar)?;
        }
        Ok(Self { radar, targets, noise })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Scene distribution plus training and defense settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetConfig {
    pub scene: ScenePreset,
    pub train: TrainHyper,
    pub defense: DefenseSettings,
    pub constraints: ConstraintSet,
}

impl Default for PresetConfig {
    fn default() -> Self {
        Self {
            scene: ScenePreset::default(),
            train: TrainHyper::default(),
            defense: DefenseSettings::default(),
            constraints: ConstraintSet::default(),
        }
    }
}

impl PresetConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut p = Self::default();
        let s = &mut p.scene;
        kv.take_into("hr_min", &mut s.hr_min)?;
        kv.take_into("hr_max", &mut s.hr_max)?;
        kv.take_into("breath_min", &mut s.breath_min)?;
        kv.take_into("breath_max", &mut s.breath_max)?;
        kv.take_into("heart_amp", &mut s.heart_amp)?;
        kv.take_into("breath_amp", &mut s.breath_amp)?;
        kv.take_into("offset", &mut s.offset)?;
        kv.take_into("snr_db", &mut s.snr_db)?;
        kv.take_into("window_s", &mut s.window_s)?;
        kv.take_into("count", &mut s.count)?;
        let t = &mut p.train;
        kv.take_into("learning_rate", &mut t.learning_rate)?;
        kv.take_into("epochs", &mut t.epochs)?;
        kv.take_into("batch_size", &mut t.batch_size)?;
        kv.take_into("inputs", &mut t.inputs)?;
        kv.take_into("hidden", &mut t.hidden)?;
        let d = &mut p.defense;
        kv.take_into("defense", &mut d.enabled)?;
        kv.take_into("margin_bpm", &mut d.margin_bpm)?;
        kv.take_into("alpha", &mut d.alpha)?;
        kv.take_into("iterations", &mut d.iterations)?;
        let c = &mut p.constraints;
        kv.take_into("f_min", &mut c.f_min)?;
        kv.take_into("f_max", &mut c.f_max)?;
        kv.take_into("a_min", &mut c.a_min)?;
        kv.take_into("a_max", &mut c.a_max)?;
        kv.finish()?;
        p.scene.validate()?;
        p.train.validate()?;
        p.constraints.validate()?;
        Ok(p)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_with_two_targets() {
        let text = "\
# victim and a static reflector
M = 400
N = 128
snr_db = 15
target.0.offset = 60
target.0.component.0.amplitude = 0.4
target.0.component.0.freq_rpm = 72
target.0.component.1.amplitude = 1.2
target.0.component.1.freq_rpm = 16
target.0.component.1.phase = 0.5
target.1.offset = 100
target.1.reflectivity = 0.3
";
        let s = SceneConfig::parse(text).unwrap();
        assert_eq!((s.radar.scans, s.radar.bins), (400, 128));
        assert_eq!(s.noise.snr_db, Some(15.0));
        assert_eq!(s.targets.len(), 2);
        assert_eq!(s.targets[0].components.len(), 2);
        assert_eq!(s.targets[0].components[1].phase, 0.5);
        assert!(s.targets[1].components.is_empty());
        assert_eq!(s.radar.carrier_hz, 4.3e9);
    }

    #[test]
    fn bin_scale_drives_fast_period() {
        let s = SceneConfig::parse("bin_scale = 0.018\n").unwrap();
        assert!((s.radar.fast_period_s - 2.0 * 0.018 / SPEED_OF_LIGHT).abs() < 1e-24);
        assert!((s.radar.envelope_bins() - 5.0).abs() < 1e-12);
        assert_eq!(s.noise.snr_db, None);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(SceneConfig::parse("M = 10\nM = 20\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(SceneConfig::parse("colour = red\n"), Err(Error::Parse { .. })));
        assert!(matches!(SceneConfig::parse("M = ten\n"), Err(Error::Parse { line: 1, .. })));
        assert!(SceneConfig::parse("just words\n").is_err());
        assert!(SceneConfig::parse("target.0.reflectivity = 1\n").is_err());
        assert!(SceneConfig::parse("target.0.offset = 250\ntarget.0.component.0.amplitude = 9\ntarget.0.component.0.freq_rpm = 60\n").is_err());
    }

    #[test]
    fn preset_overrides() {
        let p = PresetConfig::parse("count = 7\nhr_min = 60\nhidden = 8\ndefense = false\na_max = 20\n").unwrap();
        assert_eq!(p.scene.count, 7);
        assert_eq!(p.scene.hr_min, 60.0);
        assert_eq!(p.train.hidden, 8);
        assert!(!p.defense.enabled);
        assert_eq!(p.constraints.a_max, 20.0);
        assert!(PresetConfig::parse("hr_max = 140\n").is_err());
        assert!(PresetConfig::parse("seed = 3\n").is_err());
    }
}
