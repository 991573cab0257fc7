//! Command-line definitions and dispatch.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thermoloss_core::adapter::{adapter_apply, adapter_train, evaluate_l1, random_mixing_map, synthetic_pairs};
use thermoloss_core::composite::{rgb2thermal_loss, toy_thermalize, CompositeLoss, LossConfig, Problem, ToyConfig};
use thermoloss_core::gradcheck::{central_difference, relative_error};
use thermoloss_core::metrics::{evaluate_dataset, Distance, EvalOptions, FrameStatus, Normalizer};
use thermoloss_core::nll::{gaussian_nll, NllConfig};
use thermoloss_core::ot::{exact_w2_squared, sinkhorn, TransportPlan};
use thermoloss_core::preprocess::preprocess_stack;
use thermoloss_core::rng::Xoshiro256;
use thermoloss_core::window::{confidence_filter, plan_windows, pool_predictions, FilterDecision, WindowPlanConfig};
use thermoloss_core::ThermalImage;

use crate::bundle::{synth, Bundle, SynthSpec};
use crate::error::{CliError, EXIT_NUMERICAL};
use crate::formats::{
    decode_model, encode_model, read_json, read_json_lines, to_json_string, AdaptSettings, GeometryJson,
    LandmarkFile, LossSettings, MeasureFile, RecordLine, SampleLine, SinkhornSettings, VarianceFile, WindowsFile,
};
use crate::pgm::{load_image, save_image, Format};

pub const TOOL: &str = "thermoloss";
pub const THREADS_ENV: &str = "THERMOLOSS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "thermoloss", version, about = "Thermal-domain losses, landmark utilities and evaluation")]
pub struct Cli {
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal transport between point clouds.
    #[command(subcommand)]
    Ot(OtCommand),
    /// Composite loss over a problem bundle.
    #[command(subcommand)]
    Loss(LossCommand),
    /// Gradient descent on the generated images of a bundle.
    ToyThermalize(ToyArgs),
    /// Sliding-window planning, pooling and the Gaussian NLL.
    #[command(subcommand)]
    Landmarks(LandmarksCommand),
    /// Label-adaptation network.
    #[command(subcommand)]
    Adapt(AdaptCommand),
    /// Landmark accuracy metrics.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Clamp, sharpen and invert a thermal frame into four variants.
    Preprocess(PreprocessArgs),
    /// Problem bundle utilities.
    #[command(subcommand)]
    Problem(ProblemCommand),
}

#[derive(Debug, Args)]
pub struct MeasurePair {
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum OtCommand {
    /// Exact squared W2 between equal-size clouds.
    Exact(MeasurePair),
    /// Entropic squared W2.
    Sinkhorn {
        #[command(flatten)]
        pair: MeasurePair,
        #[arg(long)]
        lambda_e: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        no_anneal: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum LossCommand {
    Eval {
        bundle: PathBuf,
        /// Overrides the seed in the bundle config.
        #[arg(long)]
        seed: Option<u64>,
        /// Compare the gradient with central differences on this many pixels.
        #[arg(long, value_name = "PIXELS")]
        grad_check: Option<usize>,
        #[arg(long, default_value_t = 1e-6)]
        grad_check_step: f64,
    },
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    pub bundle: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub step_size: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Save the final iterates as a new bundle.
    #[arg(long)]
    pub save_bundle: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum LandmarksCommand {
    /// Window placements for an image size.
    Plan {
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long, default_value_t = 224)]
        window: usize,
        #[arg(long, default_value_t = 20)]
        stride: usize,
        #[arg(long, default_value_t = 0.75)]
        scale_factor: f64,
        #[arg(long, default_value_t = 224)]
        min_dim: usize,
    },
    /// Pool window predictions into one landmark set by least sigma.
    Pool {
        windows: PathBuf,
        /// Confidence threshold on the pooled mean sigma.
        #[arg(long)]
        sigma_bar: Option<f64>,
    },
    /// Gaussian negative log-likelihood and its gradients.
    Nll {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        sigma2: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum AdaptCommand {
    /// Train on a JSONL file of `{pred, resize, gt}` samples.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// JSON training settings; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Held-out JSONL samples to report the L1 error on.
        #[arg(long)]
        eval_data: Option<PathBuf>,
    },
    /// Map one landmark set through a trained model.
    Apply {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        resize: f64,
    },
    /// Write synthetic training pairs related by a random linear map.
    Synth {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 70)]
        in_landmarks: usize,
        #[arg(long, default_value_t = 72)]
        out_landmarks: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Seed of the landmark map, shared by train and test splits.
        #[arg(long, default_value_t = 0)]
        map_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizerArg {
    Box,
    Interocular,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DistanceArg {
    Euclidean,
    L1,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// NME and failure rate over a JSONL manifest.
    Nme {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "box")]
        normalizer: NormalizerArg,
        #[arg(long, requires = "right")]
        left: Option<usize>,
        #[arg(long, requires = "left")]
        right: Option<usize>,
        #[arg(long, value_enum, default_value = "euclidean")]
        distance: DistanceArg,
        #[arg(long)]
        sigma_bar: Option<f64>,
        /// Include per-frame outcomes.
        #[arg(long)]
        frames: bool,
    },
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Write plain-text PGM.
    #[arg(long)]
    pub plain: bool,
}

#[derive(Debug, Subcommand)]
pub enum ProblemCommand {
    /// Write a deterministic synthetic bundle.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 16)]
        height: usize,
        #[arg(long, default_value_t = 16)]
        width: usize,
        #[arg(long, default_value_t = 2)]
        paired: usize,
        #[arg(long, default_value_t = 2)]
        unpaired: usize,
        #[arg(long, default_value_t = 3)]
        real: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Loss settings to store in the bundle.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        plain: bool,
    },
}

/// Result of a command: the JSON payload and the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub command: String,
    pub config: Value,
    pub result: Value,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(command: &str, config: Value, result: Value) -> Self {
        Outcome {
            command: command.into(),
            config,
            result,
            exit_code: 0,
        }
    }

    fn numerical_if(mut self, failed: bool) -> Self {
        if failed {
            self.exit_code = EXIT_NUMERICAL;
        }
        self
    }
}

#[derive(Debug, Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    threads: usize,
    config: &'a Value,
    result: &'a Value,
}

/// Parses `THERMOLOSS_THREADS`; absent means 1. All computation is single-threaded.
pub fn threads_from_env(value: Option<&str>) -> Result<usize, CliError> {
    match value {
        None => Ok(1),
        Some(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Input(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
    }
}

pub fn envelope_json(outcome: &Outcome, threads: usize) -> String {
    to_json_string(&Envelope {
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        command: &outcome.command,
        threads,
        config: &outcome.config,
        result: &outcome.result,
    })
}

fn plan_rows(plan: &TransportPlan) -> Vec<Vec<f64>> {
    (0..plan.rows())
        .map(|r| (0..plan.cols()).map(|c| plan.get(r, c)).collect())
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable value")
}

pub fn run(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Ot(c) => run_ot(c),
        Command::Loss(LossCommand::Eval {
            bundle,
            seed,
            grad_check,
            grad_check_step,
        }) => run_loss_eval(&bundle, seed, grad_check, grad_check_step),
        Command::ToyThermalize(a) => run_toy(a),
        Command::Landmarks(c) => run_landmarks(c),
        Command::Adapt(c) => run_adapt(c),
        Command::Eval(c) => run_eval(c),
        Command::Preprocess(a) => run_preprocess(a),
        Command::Problem(c) => run_problem(c),
    }
}

fn run_ot(c: OtCommand) -> Result<Outcome, CliError> {
    match c {
        OtCommand::Exact(pair) => {
            let mu = read_json::<MeasureFile>(&pair.mu)?.to_measure()?;
            let nu = read_json::<MeasureFile>(&pair.nu)?.to_measure()?;
            let (cost, plan) = exact_w2_squared(&mu, &nu)?;
            Ok(Outcome::ok(
                "ot exact",
                Value::Null,
                json!({ "cost": cost, "plan": plan_rows(&plan) }),
            ))
        }
        OtCommand::Sinkhorn {
            pair,
            lambda_e,
            tolerance,
            max_iters,
            no_anneal,
        } => {
            let mu = read_json::<MeasureFile>(&pair.mu)?.to_measure()?;
            let nu = read_json::<MeasureFile>(&pair.nu)?.to_measure()?;
            let mut s = SinkhornSettings::default();
            s.lambda_e = lambda_e.unwrap_or(s.lambda_e);
            s.tolerance = tolerance.unwrap_or(s.tolerance);
            s.max_iters = max_iters.unwrap_or(s.max_iters);
            s.anneal &= !no_anneal;
            let r = sinkhorn(&mu, &nu, &s.to_config())?;
            let stages: Vec<Value> = r
                .stages
                .iter()
                .map(|st| {
                    json!({
                        "lambda": st.lambda,
                        "iterations": st.iterations,
                        "max_violation": st.max_violation,
                        "value": st.value,
                        "transport_cost": st.transport_cost,
                    })
                })
                .collect();
            let result = json!({
                "cost": r.cost,
                "transport_cost": r.transport_cost,
                "neg_entropy": r.neg_entropy,
                "converged": r.converged,
                "iterations": r.iterations,
                "max_violation": r.max_violation,
                "plan": plan_rows(&r.plan),
                "f": r.f,
                "g": r.g,
                "stages": stages,
            });
            Ok(Outcome::ok("ot sinkhorn", to_value(&s), result).numerical_if(!r.converged))
        }
    }
}

fn loss_json(loss: &CompositeLoss) -> Value {
    let scales: Vec<Value> = loss
        .patch_scales
        .iter()
        .map(|s| {
            json!({
                "scale": s.scale,
                "gen_patches": s.gen_patches,
                "real_patches": s.real_patches,
                "used": s.used,
                "value": s.value,
                "converged": s.converged,
                "skipped": s.skipped,
            })
        })
        .collect();
    let norm = |gs: &[thermoloss_core::Grid<f64>]| -> f64 {
        gs.iter().flat_map(|g| g.as_slice()).map(|v| v * v).sum::<f64>().sqrt()
    };
    json!({
        "value": loss.value,
        "terms": {
            "mse": loss.terms.mse,
            "patch": loss.terms.patch,
            "region": loss.terms.region,
            "weighted_patch": loss.terms.weighted_patch,
            "weighted_region": loss.terms.weighted_region,
        },
        "converged": loss.converged(),
        "patch_scales": scales,
        "grad_norm": {
            "paired": norm(&loss.paired_grads),
            "unpaired": norm(&loss.unpaired_grads),
        },
    })
}

fn load_bundle_config(root: &Path, seed: Option<u64>) -> Result<(Bundle, LossSettings, LossConfig), CliError> {
    let bundle = Bundle::load(root)?;
    let mut settings = bundle.settings.clone();
    if let Some(s) = seed {
        settings.seed = s;
    }
    let cfg = settings.to_config(Some(root))?;
    Ok((bundle, settings, cfg))
}

/// Which generated image a probed pixel belongs to.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Paired(usize),
    Unpaired(usize),
}

fn perturbed(problem: &Problem, slot: Slot, pixel: usize, value: f64) -> Result<Problem, CliError> {
    let mut p = problem.clone();
    let img = match slot {
        Slot::Paired(i) => &mut p.paired[i].0,
        Slot::Unpaired(i) => &mut p.unpaired[i].0,
    };
    let mut v = img.values().to_vec();
    v[pixel] = value;
    *img = ThermalImage::with_range(img.height(), img.width(), v, img.temp_floor(), img.temp_ceil())?;
    Ok(p)
}

fn grad_check(problem: &Problem, cfg: &LossConfig, loss: &CompositeLoss, pixels: usize, h: f64, seed: u64) -> Result<Value, CliError> {
    let mut slots = Vec::new();
    for (i, (g, _)) in problem.paired.iter().enumerate() {
        slots.extend((0..g.values().len()).map(|k| (Slot::Paired(i), k)));
    }
    for (i, (g, _)) in problem.unpaired.iter().enumerate() {
        slots.extend((0..g.values().len()).map(|k| (Slot::Unpaired(i), k)));
    }
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let picks = rng.sample_indices(slots.len(), pixels.min(slots.len()));
    let mut probes = Vec::with_capacity(picks.len());
    let mut max_err: f64 = 0.0;
    for idx in picks {
        let (slot, k) = slots[idx];
        let (x, analytic) = match slot {
            Slot::Paired(i) => (problem.paired[i].0.values()[k], loss.paired_grads[i].as_slice()[k]),
            Slot::Unpaired(i) => (problem.unpaired[i].0.values()[k], loss.unpaired_grads[i].as_slice()[k]),
        };
        if x - h < 0.0 || x + h > 1.0 {
            continue;
        }
        let mut failure = None;
        let numeric = central_difference(
            |v| match perturbed(problem, slot, k, v).and_then(|p| Ok(rgb2thermal_loss(&p, cfg)?)) {
                Ok(l) => l.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            x,
            h,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let err = relative_error(analytic, numeric, 1e-6);
        max_err = max_err.max(err);
        let (kind, image) = match slot {
            Slot::Paired(i) => ("paired", i),
            Slot::Unpaired(i) => ("unpaired", i),
        };
        probes.push(json!({
            "kind": kind,
            "image": image,
            "pixel": k,
            "analytic": analytic,
            "numeric": numeric,
            "relative_error": err,
        }));
    }
    Ok(json!({ "step": h, "max_relative_error": max_err, "probes": probes }))
}

fn run_loss_eval(root: &Path, seed: Option<u64>, check: Option<usize>, h: f64) -> Result<Outcome, CliError> {
    let (bundle, settings, cfg) = load_bundle_config(root, seed)?;
    let loss = rgb2thermal_loss(&bundle.problem, &cfg)?;
    let mut result = loss_json(&loss);
    if let Some(n) = check {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::Input("--grad-check-step must be positive".into()));
        }
        result["grad_check"] = grad_check(&bundle.problem, &cfg, &loss, n, h, settings.seed)?;
    }
    let converged = loss.converged();
    Ok(Outcome::ok("loss eval", to_value(&settings), result).numerical_if(!converged))
}

fn run_toy(a: ToyArgs) -> Result<Outcome, CliError> {
    let (bundle, settings, cfg) = load_bundle_config(&a.bundle, a.seed)?;
    let toy = ToyConfig {
        steps: a.steps,
        step_size: a.step_size,
    };
    let r = toy_thermalize(&bundle.problem, &cfg, &toy)?;
    if let Some(dir) = &a.save_bundle {
        bundle.with_problem(r.problem.clone()).save(dir, Format::Raw)?;
    }
    let config = json!({ "loss": to_value(&settings), "steps": a.steps, "step_size": a.step_size });
    Ok(Outcome::ok(
        "toy-thermalize",
        config,
        json!({
            "initial_loss": r.initial_loss(),
            "final_loss": r.final_loss(),
            "trace": r.trace,
        }),
    ))
}

fn read_landmarks(path: &Path) -> Result<thermoloss_core::LandmarkSet, CliError> {
    read_json::<LandmarkFile>(path)?.to_landmarks()
}

fn run_landmarks(c: LandmarksCommand) -> Result<Outcome, CliError> {
    match c {
        LandmarksCommand::Plan {
            height,
            width,
            window,
            stride,
            scale_factor,
            min_dim,
        } => {
            let cfg = WindowPlanConfig {
                window,
                stride,
                scale_factor,
                min_dim_stop: min_dim,
            };
            let windows: Vec<GeometryJson> = plan_windows(height, width, &cfg)?.into_iter().map(Into::into).collect();
            Ok(Outcome::ok(
                "landmarks plan",
                json!({ "window": window, "stride": stride, "scale_factor": scale_factor, "min_dim": min_dim }),
                json!({ "image_height": height, "image_width": width, "count": windows.len(), "windows": windows }),
            ))
        }
        LandmarksCommand::Pool { windows, sigma_bar } => {
            let file: WindowsFile = read_json(&windows)?;
            let pooled = pool_predictions(file.image_height, file.image_width, &file.predictions()?)?;
            let mut result = json!({
                "landmarks": LandmarkFile::from_landmarks(&pooled),
                "mean_sigma": pooled.mean_sigma(),
            });
            if let Some(bar) = sigma_bar {
                let decision = confidence_filter(&pooled, bar)?;
                result["accepted"] = json!(decision == FilterDecision::Accepted);
            }
            Ok(Outcome::ok("landmarks pool", json!({ "sigma_bar": sigma_bar }), result))
        }
        LandmarksCommand::Nll { mu, sigma2, y, epsilon } => {
            let mu = read_landmarks(&mu)?;
            let y = read_landmarks(&y)?;
            let s: VarianceFile = read_json(&sigma2)?;
            let r = gaussian_nll(&mu, s.values(), &y, &NllConfig { epsilon })?;
            Ok(Outcome::ok(
                "landmarks nll",
                json!({ "epsilon": epsilon }),
                json!({ "value": r.value, "grad_mu": r.grad_mu, "grad_sigma2": r.grad_sigma2 }),
            ))
        }
    }
}

fn read_samples(path: &Path) -> Result<Vec<thermoloss_core::adapter::AdaptSample>, CliError> {
    read_json_lines::<SampleLine>(path)?.iter().map(SampleLine::to_sample).collect()
}

fn run_adapt(c: AdaptCommand) -> Result<Outcome, CliError> {
    match c {
        AdaptCommand::Train {
            data,
            model,
            config,
            epochs,
            seed,
            eval_data,
        } => {
            let mut settings: AdaptSettings = match &config {
                Some(p) => read_json(p)?,
                None => AdaptSettings::default(),
            };
            settings.epochs = epochs.unwrap_or(settings.epochs);
            settings.seed = seed.unwrap_or(settings.seed);
            let samples = read_samples(&data)?;
            let out = adapter_train(&samples, &settings.to_config())?;
            write_file(&model, &encode_model(&out.model, Some(&settings)))?;
            let mut result = json!({
                "samples": samples.len(),
                "widths": out.model.widths(),
                "final_train_loss": out.trace.last(),
                "train_l1": evaluate_l1(&out.model, &samples)?,
                "trace": out.trace,
            });
            if let Some(p) = eval_data {
                let held = read_samples(&p)?;
                result["eval_l1"] = json!(evaluate_l1(&out.model, &held)?);
            }
            Ok(Outcome::ok("adapt train", to_value(&settings), result))
        }
        AdaptCommand::Apply { model, pred, resize } => {
            let bytes = fs::read(&model).map_err(|e| CliError::io(&model, e))?;
            let (_, mlp) = decode_model(&bytes)?;
            let out = adapter_apply(&mlp, &read_landmarks(&pred)?, resize)?;
            Ok(Outcome::ok(
                "adapt apply",
                json!({ "resize": resize }),
                json!({ "landmarks": LandmarkFile::from_landmarks(&out) }),
            ))
        }
        AdaptCommand::Synth {
            data,
            in_landmarks,
            out_landmarks,
            n,
            map_seed,
            seed,
        } => {
            let map = random_mixing_map(in_landmarks, out_landmarks, map_seed);
            let samples = synthetic_pairs(in_landmarks, &map, n, seed)?;
            let mut text = String::new();
            for s in &samples {
                text.push_str(&serde_json::to_string(&SampleLine::from_sample(s)).expect("serializable sample"));
                text.push('\n');
            }
            write_file(&data, text.as_bytes())?;
            Ok(Outcome::ok(
                "adapt synth",
                json!({ "in_landmarks": in_landmarks, "out_landmarks": out_landmarks, "map_seed": map_seed, "seed": seed }),
                json!({ "samples": samples.len(), "data": data }),
            ))
        }
    }
}

fn run_eval(c: EvalCommand) -> Result<Outcome, CliError> {
    let EvalCommand::Nme {
        manifest,
        normalizer,
        left,
        right,
        distance,
        sigma_bar,
        frames,
    } = c;
    let normalizer = match (normalizer, left, right) {
        (NormalizerArg::Box, None, None) => Normalizer::BoxWidthHeight,
        (NormalizerArg::Box, _, _) => {
            return Err(CliError::Input("--left/--right apply only to the interocular normalizer".into()))
        }
        (NormalizerArg::Interocular, Some(left), Some(right)) => Normalizer::Interocular { left, right },
        (NormalizerArg::Interocular, _, _) => {
            return Err(CliError::Input("the interocular normalizer needs --left and --right".into()))
        }
    };
    let distance = match distance {
        DistanceArg::Euclidean => Distance::Euclidean,
        DistanceArg::L1 => Distance::L1,
    };
    let records = read_json_lines::<RecordLine>(&manifest)?
        .iter()
        .map(RecordLine::to_record)
        .collect::<Result<Vec<_>, _>>()?;
    let report = evaluate_dataset(
        &records,
        &EvalOptions {
            normalizer,
            distance,
            sigma_bar,
        },
    )?;
    let mut result = json!({
        "nme": report.nme_mean,
        "failure_rate": report.failure_rate,
        "evaluated": report.n_evaluated,
        "total": report.n_total,
    });
    if frames {
        let list: Vec<Value> = report
            .frames
            .iter()
            .map(|f| {
                let status = match f.status {
                    FrameStatus::Evaluated => "evaluated",
                    FrameStatus::Missing => "missing",
                    FrameStatus::Rejected => "rejected",
                };
                json!({ "frame": f.frame, "status": status, "nme": f.nme, "mean_sigma": f.mean_sigma })
            })
            .collect();
        result["frames"] = json!(list);
    }
    let config = json!({
        "normalizer": match normalizer {
            Normalizer::BoxWidthHeight => json!("box"),
            Normalizer::Interocular { left, right } => json!({ "interocular": [left, right] }),
        },
        "distance": match distance { Distance::Euclidean => "euclidean", Distance::L1 => "l1" },
        "sigma_bar": sigma_bar,
    });
    Ok(Outcome::ok("eval nme", config, result))
}

fn run_preprocess(a: PreprocessArgs) -> Result<Outcome, CliError> {
    let img = load_image(&a.input)?;
    let stem = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "frame".into());
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let format = if a.plain { Format::Plain } else { Format::Raw };
    let mut written = Vec::new();
    for (variant, out) in preprocess_stack(&img)? {
        let name = format!(
            "{stem}_{}{}.pgm",
            ["a", "b"].get(variant.params_index).copied().unwrap_or("x"),
            if variant.inverted { "_inv" } else { "" }
        );
        let path = a.out_dir.join(&name);
        save_image(&out, &path, format)?;
        written.push(json!({
            "file": name,
            "params_index": variant.params_index,
            "inverted": variant.inverted,
            "floor_c": out.temp_floor(),
            "ceil_c": out.temp_ceil(),
        }));
    }
    Ok(Outcome::ok(
        "preprocess",
        json!({ "plain": a.plain }),
        json!({ "input": a.input, "outputs": written }),
    ))
}

fn run_problem(c: ProblemCommand) -> Result<Outcome, CliError> {
    let ProblemCommand::Synth {
        dir,
        height,
        width,
        paired,
        unpaired,
        real,
        seed,
        config,
        plain,
    } = c;
    let settings: LossSettings = match &config {
        Some(p) => read_json(p)?,
        None => LossSettings::default(),
    };
    let spec = SynthSpec {
        height,
        width,
        paired,
        unpaired,
        real,
        seed,
    };
    let bundle = synth(&spec, settings)?;
    bundle.save(&dir, if plain { Format::Plain } else { Format::Raw })?;
    Ok(Outcome::ok(
        "problem synth",
        json!({ "height": height, "width": width, "seed": seed }),
        json!({
            "dir": dir,
            "paired": bundle.paired_names,
            "unpaired": bundle.unpaired_names,
            "real": bundle.real_names,
        }),
    ))
}
