//! Servo angle schedules that realise an optimised perturbation with a
//! reflector swinging on an arm.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoSpec {
    pub max_angle_deg: f64,
    pub max_speed_deg_per_s: f64,
    pub update_rate_hz: f64,
    pub arm_radius_mm: f64,
}

impl ServoSpec {
    /// SG90-class limits with the given arm.
    pub fn sg90(arm_radius_mm: f64) -> Self {
        Self { max_angle_deg: 180.0, max_speed_deg_per_s: 600.0, update_rate_hz: 50.0, arm_radius_mm }
    }

    pub fn validate(&self) -> Result<()> {
        let v = [self.max_angle_deg, self.max_speed_deg_per_s, self.update_rate_hz, self.arm_radius_mm];
        if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) || self.max_angle_deg > 360.0 {
            return Err(Error::invalid(format!("invalid servo spec {self:?}")));
        }
        Ok(())
    }

    pub fn center_deg(&self) -> f64 {
        self.max_angle_deg / 2.0
    }
}

/// Peak radial excursion in millimetres for an amplitude in bins.
pub fn amplitude_to_displacement(a_bins: f64, bin_scale_m: f64) -> Result<f64> {
    if !(a_bins.is_finite() && a_bins >= 0.0 && bin_scale_m.is_finite() && bin_scale_m > 0.0) {
        return Err(Error::invalid(format!("cannot convert amplitude {a_bins} bins at {bin_scale_m} m/bin")));
    }
    Ok(a_bins * bin_scale_m * 1000.0)
}

/// Swing half-angle in degrees that moves a reflector on `arm_radius_mm`
/// through `displacement_mm` along boresight.
pub fn displacement_to_angle(displacement_mm: f64, arm_radius_mm: f64) -> Result<f64> {
    if !(arm_radius_mm.is_finite() && arm_radius_mm > 0.0 && displacement_mm.is_finite() && displacement_mm >= 0.0) {
        return Err(Error::invalid(format!("invalid geometry: {displacement_mm} mm on a {arm_radius_mm} mm arm")));
    }
    if displacement_mm > arm_radius_mm {
        return Err(Error::InfeasibleGeometry { displacement_mm, arm_radius_mm });
    }
    Ok((displacement_mm / arm_radius_mm).asin().to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    Speed { required_deg_per_s: f64, limit_deg_per_s: f64 },
    Range { required_deg: f64, limit_deg: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Speed { required_deg_per_s, limit_deg_per_s } => {
                write!(f, "peak speed {required_deg_per_s:.1} deg/s exceeds {limit_deg_per_s:.1} deg/s")
            }
            Violation::Range { required_deg, limit_deg } => {
                write!(f, "swing {required_deg:.2} deg exceeds range {limit_deg:.2} deg")
            }
        }
    }
}

/// Peak angular speed in deg/s of `amplitude_deg * sin(2 pi f/60 t)`.
pub fn peak_speed(f_rpm: f64, amplitude_deg: f64) -> f64 {
    amplitude_deg * 2.0 * PI * f_rpm / 60.0
}

/// Every servo limit the oscillation would break; empty when feasible.
pub fn feasibility_check(f_rpm: f64, amplitude_deg: f64, servo: &ServoSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let speed = peak_speed(f_rpm, amplitude_deg);
    if speed > servo.max_speed_deg_per_s {
        out.push(Violation::Speed { required_deg_per_s: speed, limit_deg_per_s: servo.max_speed_deg_per_s });
    }
    if 2.0 * amplitude_deg > servo.max_angle_deg {
        out.push(Violation::Range { required_deg: 2.0 * amplitude_deg, limit_deg: servo.max_angle_deg });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// `(t_ms, angle_deg)` at the servo update rate.
    pub samples: Vec<(f64, f64)>,
    pub f_rpm: f64,
    pub amplitude_deg: f64,
    pub arm_radius_mm: f64,
    pub displacement_mm: f64,
    pub update_rate_hz: f64,
}

/// Samples `center + amplitude sin(2 pi f/60 t)` for `duration_s` seconds.
pub fn emit_schedule(f_rpm: f64, amplitude_deg: f64, duration_s: f64, servo: &ServoSpec) -> Result<Schedule> {
    servo.validate()?;
    if !(f_rpm.is_finite() && f_rpm > 0.0 && amplitude_deg.is_finite() && amplitude_deg >= 0.0) {
        return Err(Error::invalid(format!("invalid oscillation {f_rpm} rpm, {amplitude_deg} deg")));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid(format!("duration must be > 0, got {duration_s}")));
    }
    let violations = feasibility_check(f_rpm, amplitude_deg, servo);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::ServoLimits(msg.join("; ")));
    }
    // tolerate duration * rate landing a hair below an integer
    let count = (duration_s * servo.update_rate_hz + 1e-9).floor() as usize + 1;
    let center = servo.center_deg();
    let w = 2.0 * PI * f_rpm / 60.0;
    let samples = (0..count)
        .map(|i| {
            let t = i as f64 / servo.update_rate_hz;
            (t * 1000.0, center + amplitude_deg * (w * t).sin())
        })
        .collect();
    Ok(Schedule {
        samples,
        f_rpm,
        amplitude_deg,
        arm_radius_mm: servo.arm_radius_mm,
        displacement_mm: servo.arm_radius_mm * amplitude_deg.to_radians().sin(),
        update_rate_hz: servo.update_rate_hz,
    })
}

impl Schedule {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# f_rpm={:.6}\n", self.f_rpm));
        s.push_str(&format!("# amplitude_deg={:.6}\n", self.amplitude_deg));
        s.push_str(&format!("# arm_radius_mm={:.6}\n", self.arm_radius_mm));
        s.push_str(&format!("# displacement_mm={:.6}\n", self.displacement_mm));
        s.push_str(&format!("# update_rate_hz={:.6}\n", self.update_rate_hz));
        s.push_str("t_ms,angle_deg\n");
        for (t, a) in &self.samples {
            s.push_str(&format!("{t:.0},{a:.2}\n"));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// `(t_ms, angle_deg)` rows of a schedule CSV, skipping metadata lines.
pub fn parse_schedule_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    let mut header = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            if line != "t_ms,angle_deg" {
                return Err(Error::Parse { line: i + 1, msg: format!("expected header, found {line:?}") });
            }
            header = true;
            continue;
        }
        let bad = |msg: &str| Error::Parse { line: i + 1, msg: msg.to_string() };
        let (t, a) = line.split_once(',').ok_or_else(|| bad("expected two columns"))?;
        let t: f64 = t.parse().map_err(|_| bad("bad time"))?;
        let a: f64 = a.parse().map_err(|_| bad("bad angle"))?;
        rows.push((t, a));
    }
    if !header {
        return Err(Error::Parse { line: 0, msg: "missing header".into() });
    }
    Ok(rows)
}
