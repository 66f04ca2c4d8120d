use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use antisense::config::{KeyValues, PresetConfig, SceneConfig};
use antisense::defense::{run_defense, ConstraintSet, DefenseConfig};
use antisense::estimators::{
    read_mlp_params, select_target_bin, write_mlp_params, DifferentiableEstimator, FftEstimator,
    MlpEstimator, ModelKind, SoftSpecEstimator, SoftSpecParams, TrainHyper,
};
use antisense::eval::{
    generate_features, mae, run_experiment, train_on_preset, write_dataset_manifest, EvalModel, ScenePreset,
};
use antisense::radargram::{read_radargram, synthesize_radargram, write_radargram};
use antisense::schedule::{amplitude_to_displacement, displacement_to_angle, emit_schedule, ServoSpec};
use antisense::{Error, Result};

#[derive(Parser)]
#[command(name = "antisense", version, about = "UWB radargram synthesis, heart-rate estimation and perturbation defense")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a radargram from a scene file.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate heart rate from a radargram.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: ModelKind,
        /// MLPW weights for `mlp`, or a key = value file for `softspec`.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Train the MLP estimator on a synthetic corpus.
    Train {
        #[arg(long)]
        preset: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write a CSV listing the training records.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Optimize a sinusoidal perturbation against an estimator.
    Defend {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        target_bpm: f64,
        #[arg(long)]
        iters: u32,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Perturbation centre bin; defaults to the selected target bin.
        #[arg(long)]
        offset: Option<f64>,
    },
    /// Clean versus defended accuracy on a synthetic corpus.
    Eval {
        #[arg(long)]
        preset: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Servo angle schedule for a perturbation.
    Schedule {
        #[arg(long)]
        f_rpm: f64,
        #[arg(long)]
        a_bins: f64,
        #[arg(long)]
        arm_mm: f64,
        #[arg(long)]
        duration_s: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 9.0)]
        bin_scale_mm: f64,
    },
}

fn softspec_params(path: Option<&PathBuf>) -> Result<SoftSpecParams> {
    let mut p = SoftSpecParams::default();
    if let Some(path) = path {
        let mut kv = KeyValues::read(path)?;
        if let Some(t) = kv.take("temperature")? {
            p.temperature = t;
        }
        if let Some(s) = kv.take("calib_scale")? {
            p.calib_scale = s;
        }
        if let Some(o) = kv.take("calib_offset")? {
            p.calib_offset = o;
        }
        kv.finish()?;
    }
    p.validate()?;
    Ok(p)
}

fn load_model(kind: ModelKind, params: Option<&PathBuf>) -> Result<EvalModel> {
    Ok(match kind {
        ModelKind::Fft => EvalModel::Fft(FftEstimator::default()),
        ModelKind::SoftSpec => EvalModel::SoftSpec(SoftSpecEstimator::new(softspec_params(params)?)),
        ModelKind::Mlp => {
            let path = params.ok_or_else(|| Error::InvalidParameter("--params is required for the mlp model".into()))?;
            EvalModel::Mlp(MlpEstimator::new(read_mlp_params(path)?))
        }
    })
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth { config, seed, out } => {
            let scene = SceneConfig::read(&config)?;
            let x = synthesize_radargram(&scene.targets, scene.noise, &scene.radar, seed)?;
            write_radargram(&x, &out)?;
            println!("wrote {} x {} radargram to {}", x.scans(), x.bins(), out.display());
        }
        Command::Estimate { input, model, params } => {
            let x = read_radargram(&input)?;
            let model = load_model(model, params.as_ref())?;
            let hr = model.estimator().estimate(&x)?;
            println!("model: {}", model.estimator().name());
            println!("selected_bin: {}", select_target_bin(&x)?);
            println!("hr_bpm: {hr:.3}");
        }
        Command::Train { preset, seed, out, manifest } => {
            let p = PresetConfig::read(&preset)?;
            let hyper = TrainHyper { seed, ..p.train };
            let params = train_on_preset(&p.scene, seed, &hyper)?;
            write_mlp_params(&params, &out)?;
            if let Some(m) = manifest {
                write_dataset_manifest(&p.scene, seed, &m)?;
            }
            let set = generate_features(&ScenePreset { count: p.scene.count.min(200), ..p.scene }, seed, hyper.inputs)?;
            let preds: Vec<f64> = set.features.iter().map(|f| params.predict(f)).collect();
            println!("trained {} -> {} -> 1 on {} records", hyper.inputs, hyper.hidden, p.scene.count);
            println!("train_mae_bpm: {:.3}", mae(&preds, &set.targets)?);
            println!("wrote {}", out.display());
        }
        Command::Defend { input, model, target_bpm, iters, alpha, seed, report, out, params, offset } => {
            let x = read_radargram(&input)?;
            let model = load_model(model, params.as_ref())?;
            let surrogate: Box<dyn DifferentiableEstimator + '_> = model.attack_surrogate();
            let cfg = DefenseConfig { alpha, iterations: iters as usize, target_bpm, perturbation_offset: offset, seed };
            let result = run_defense(&x, surrogate.as_ref(), &cfg, &ConstraintSet::default())?;
            let model_estimate = model.estimator().estimate(&result.perturbed)?;
            let mut text = result.to_report_text();
            text.insert_str(
                text.find("\n[loss_trace]").unwrap_or(text.len()),
                &format!("model: {}\nmodel_estimate_bpm: {model_estimate:.6}\n", model.estimator().name()),
            );
            std::fs::write(&report, text)?;
            if let Some(out) = out {
                write_radargram(&result.perturbed, &out)?;
            }
            println!("f_opt_rpm: {:.3}", result.f_opt);
            println!("a_opt_bins: {:.3}", result.a_opt);
            println!("model_estimate_bpm: {model_estimate:.3}");
        }
        Command::Eval { preset, model, seed, report, records, params } => {
            let p = PresetConfig::read(&preset)?;
            let model = load_model(model, params.as_ref())?;
            let r = run_experiment(&p.scene, &model, &p.defense, &p.constraints, seed)?;
            r.write_text(&report)?;
            r.write_records_csv(&records)?;
            println!("mae_clean_bpm: {:.3}", r.mae_clean);
            println!("mae_defended_bpm: {:.3}", r.mae_defended);
            println!("degradation_ratio: {:.3}", r.degradation_ratio);
        }
        Command::Schedule { f_rpm, a_bins, arm_mm, duration_s, out, bin_scale_mm } => {
            let disp = amplitude_to_displacement(a_bins, bin_scale_mm / 1000.0)?;
            let theta = displacement_to_angle(disp, arm_mm)?;
            let s = emit_schedule(f_rpm, theta, duration_s, &ServoSpec::sg90(arm_mm))?;
            s.write_csv(&out)?;
            println!("amplitude_deg: {theta:.3}");
            println!("samples: {}", s.samples.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
