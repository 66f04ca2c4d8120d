mod common;

use proptest::prelude::*;

use antisense::defense::{clip_params, ConstraintSet};
use antisense::estimators::{FftEstimator, HrEstimator};
use antisense::eval::{bland_altman, mae};
use antisense::radargram::{add_radargrams, synthesize_radargram, NoiseSpec, RadarConfig, TargetSpec};
use antisense::schedule::{emit_schedule, parse_schedule_csv, ServoSpec};

fn small_config() -> RadarConfig {
    RadarConfig { scans: 64, bins: 96, ..RadarConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noiseless_synthesis_is_additive_over_targets(
        o1 in 20.0..70.0f64, o2 in 20.0..70.0f64,
        a1 in 0.0..3.0f64, a2 in 0.0..3.0f64,
        f1 in 40.0..120.0f64, f2 in 40.0..120.0f64,
        r1 in 0.1..2.0f64, r2 in 0.1..2.0f64,
    ) {
        let config = small_config();
        let mut t1 = TargetSpec::single(o1, a1, f1);
        t1.reflectivity = r1;
        let mut t2 = TargetSpec::single(o2, a2, f2);
        t2.reflectivity = r2;
        let both = synthesize_radargram(&[t1.clone(), t2.clone()], NoiseSpec::noiseless(), &config, 0).unwrap();
        let x1 = synthesize_radargram(&[t1], NoiseSpec::noiseless(), &config, 0).unwrap();
        let x2 = synthesize_radargram(&[t2], NoiseSpec::noiseless(), &config, 0).unwrap();
        let sum = add_radargrams(&x1, &x2).unwrap();
        for (p, q) in both.samples().as_slice().iter().zip(sum.samples().as_slice()) {
            prop_assert!((p - q).norm() <= 1e-12);
        }
    }

    #[test]
    fn integer_offset_shift_translates_bins(offset in 20.0..60.0f64, shift in 1usize..20, a in 0.0..3.0f64, f in 50.0..100.0f64) {
        let config = small_config();
        let x = synthesize_radargram(&[TargetSpec::single(offset, a, f)], NoiseSpec::noiseless(), &config, 0).unwrap();
        let y = synthesize_radargram(&[TargetSpec::single(offset + shift as f64, a, f)], NoiseSpec::noiseless(), &config, 0).unwrap();
        for m in 0..config.scans {
            for n in 0..config.bins - shift {
                prop_assert!((x.at(m, n) - y.at(m, n + shift)).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn clipping_lands_in_the_box_and_is_idempotent(f in -1e3..1e3f64, a in -1e2..1e2f64) {
        let c = ConstraintSet::default();
        let (fc, ac) = clip_params(f, a, &c);
        prop_assert!(c.contains(fc, ac));
        prop_assert_eq!(clip_params(fc, ac, &c), (fc, ac));
        if c.contains(f, a) {
            prop_assert_eq!((fc, ac), (f, a));
        }
    }

    #[test]
    fn bland_altman_bias_is_bounded_by_mae(pairs in prop::collection::vec((40.0..120.0f64, 40.0..120.0f64), 2..60)) {
        let (pred, truth): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = mae(&pred, &truth).unwrap();
        let b = bland_altman(&pred, &truth).unwrap();
        prop_assert!(b.mean_diff.abs() <= m + 1e-9);
        prop_assert!(b.loa_low <= b.mean_diff && b.mean_diff <= b.loa_high);
        prop_assert!(m >= 0.0);
    }

    #[test]
    fn schedule_stays_in_range_and_round_trips(f in 50.0..100.0f64, frac in 0.0..0.99f64, duration in 0.1..5.0f64) {
        let servo = ServoSpec::sg90(250.0);
        let theta = frac * servo.max_speed_deg_per_s * 60.0 / (2.0 * std::f64::consts::PI * f);
        let s = emit_schedule(f, theta, duration, &servo).unwrap();
        prop_assert!(s.samples.iter().all(|(_, a)| (*a - 90.0).abs() <= theta + 1e-9));
        prop_assert!(s.samples.windows(2).all(|w| w[1].0 > w[0].0));
        let rows = parse_schedule_csv(&s.to_csv()).unwrap();
        prop_assert_eq!(rows.len(), s.samples.len());
        for ((t, a), (tp, ap)) in s.samples.iter().zip(&rows) {
            prop_assert!((t - tp).abs() <= 0.5);
            prop_assert!((a - ap).abs() <= 0.005 + 1e-9);
        }
    }

    #[test]
    fn schedule_swing_matches_sampled_peak(f in 50.0..100.0f64, theta in 1.0..50.0f64) {
        let servo = ServoSpec { max_speed_deg_per_s: 1e6, ..ServoSpec::sg90(250.0) };
        let s = emit_schedule(f, theta, 60.0 / f, &servo).unwrap();
        let (lo, hi) = s.samples.iter().fold((f64::MAX, f64::MIN), |(l, h), (_, a)| (l.min(*a), h.max(*a)));
        let floor = 2.0 * theta * (std::f64::consts::PI * f / 60.0 / servo.update_rate_hz).cos();
        prop_assert!(hi - lo <= 2.0 * theta + 0.01);
        prop_assert!(hi - lo >= floor - 0.01, "p2p {} below {}", hi - lo, floor);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fft_estimate_is_scale_invariant(hr in 55.0..95.0f64, scale in 0.01..100.0f64) {
        let config = RadarConfig { scans: 600, ..RadarConfig::default() };
        let x = common::victim_radargram(&config, hr, 15.0, 25.0, 3);
        let fft = FftEstimator::default();
        let a = fft.estimate(&x).unwrap();
        let b = fft.estimate(&x.scaled(scale)).unwrap();
        prop_assert!((a - b).abs() <= 1e-6, "{} vs {}", a, b);
    }
}
