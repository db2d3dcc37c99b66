//! The five CLI verbs as library functions.
//!
//! Each command is a pure function of its config and input files. Grid
//! commands fan cells out over rayon and collect in grid order, so outputs do
//! not depend on scheduling. Every file goes through a temp-then-rename write.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cli::config::{ExperimentConfig, MaskKind, PriorChoice};
use crate::error::{Result, SmrdError};
use crate::forward::{
    add_kspace_noise, density_compensate, make_equispaced_mask, make_poisson_disc_mask, CoilSensitivities,
    ForwardModel, NoiseSpec,
};
use crate::harness::tensor::write_atomic;
use crate::harness::{gaussian_blur, load_tensor, make_phantom, make_synth_coils_with_width, KvConfig, Tensor};
use crate::metrics::{self, MetricPair};
use crate::numerics::{CoilStack, ComplexImage};
use crate::prior::ScorePrior;
use crate::rng::derive_seed;
use crate::sampler::{run_reconstruction, Method, ReconReport, SamplerConfig};
use crate::sure::early_stop_check;

pub const TRUTH_FILE: &str = "truth.smrd";
pub const COILS_FILE: &str = "coils.smrd";
pub const MASK_FILE: &str = "mask.smrd";
pub const KSPACE_FILE: &str = "kspace.smrd";
pub const PRIOR_MEAN_FILE: &str = "prior_mean.smrd";
pub const CONFIG_FILE: &str = "config.cfg";
pub const MANIFEST_FILE: &str = "manifest.cfg";

/// One simulated (or loaded) acquisition.
#[derive(Debug, Clone)]
pub struct Problem {
    pub truth: Option<ComplexImage>,
    pub fm: ForwardModel,
    pub kspace: CoilStack,
    pub prior_mean: Option<ComplexImage>,
}

fn with_path(path: &Path, err: SmrdError) -> SmrdError {
    match err {
        SmrdError::Io(e) => SmrdError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))),
        other => other,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| with_path(dir, e.into()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(|e| with_path(path, e))
}

fn read_tensor(path: &Path) -> Result<Tensor> {
    load_tensor(path).map_err(|e| with_path(path, e))
}

fn read_optional(path: &Path) -> Result<Option<Tensor>> {
    if path.exists() {
        read_tensor(path).map(Some)
    } else {
        Ok(None)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl Problem {
    /// Phantom, mask, coils and noisy k-space from `cfg`, each from its own sub-seed of `cfg.seed`.
    pub fn simulate(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.phantom.size;
        let truth = make_phantom(&cfg.phantom, derive_seed(cfg.seed, "phantom"))?;
        let mask_seed = derive_seed(cfg.seed, "mask");
        let mask = match cfg.mask.kind {
            MaskKind::Equispaced => make_equispaced_mask(n, n, cfg.mask.accel, cfg.mask.acs(), mask_seed)?,
            MaskKind::PoissonDisc => make_poisson_disc_mask(n, n, cfg.mask.accel, cfg.mask.calib, mask_seed)?,
        };
        let sens = make_synth_coils_with_width(n, n, cfg.coils, cfg.lobe_width, derive_seed(cfg.seed, "coils"))?;
        let fm = ForwardModel::new(sens, mask)?;
        let clean = fm.apply_forward(&truth)?;
        let noise = NoiseSpec::new(cfg.sigma, derive_seed(cfg.seed, "noise"))?;
        let kspace = add_kspace_noise(&clean, fm.mask(), noise)?;
        let prior_mean = gaussian_blur(&truth, cfg.prior.mean_blur)?;
        Ok(Self {
            truth: Some(truth),
            fm,
            kspace,
            prior_mean: Some(prior_mean),
        })
    }

    /// Reads a directory written by [`cmd_simulate`]; truth and prior mean are optional.
    pub fn load(dir: &Path) -> Result<Self> {
        let sens = read_tensor(&dir.join(COILS_FILE))?.to_stack()?;
        let mask = read_tensor(&dir.join(MASK_FILE))?.to_mask()?;
        let kspace = read_tensor(&dir.join(KSPACE_FILE))?.to_stack()?;
        let fm = ForwardModel::new(CoilSensitivities::new(sens.coils().to_vec())?, mask)?;
        if kspace.shape() != fm.shape() {
            return Err(SmrdError::ShapeMismatch {
                expected: fm.shape(),
                found: kspace.shape(),
            });
        }
        if kspace.num_coils() != fm.num_coils() {
            return Err(SmrdError::CoilMismatch {
                expected: fm.num_coils(),
                found: kspace.num_coils(),
            });
        }
        let truth = read_optional(&dir.join(TRUTH_FILE))?.map(|t| t.to_image()).transpose()?;
        let prior_mean = read_optional(&dir.join(PRIOR_MEAN_FILE))?.map(|t| t.to_image()).transpose()?;
        Ok(Self {
            truth,
            fm,
            kspace,
            prior_mean,
        })
    }

    pub fn zero_filled(&self) -> Result<ComplexImage> {
        self.fm.apply_adjoint(&self.kspace)
    }

    fn require_truth(&self, what: &str) -> Result<&ComplexImage> {
        self.truth
            .as_ref()
            .ok_or_else(|| SmrdError::Config(format!("{what} needs ground truth ({TRUTH_FILE} not found)")))
    }
}

pub fn build_prior(cfg: &ExperimentConfig, problem: &Problem) -> Result<ScorePrior> {
    let schedule = cfg.schedule.build(cfg.sampler.total_steps)?;
    match cfg.prior.kind {
        PriorChoice::Gaussian => {
            let mean = problem.prior_mean.clone().ok_or_else(|| {
                SmrdError::Config(format!("the gaussian prior needs a mean image ({PRIOR_MEAN_FILE} not found)"))
            })?;
            ScorePrior::gaussian(mean, cfg.prior.tau2, schedule)
        }
        PriorChoice::Smoothness => ScorePrior::smoothness(cfg.prior.gamma, schedule),
        PriorChoice::Zero => Ok(ScorePrior::zero(schedule)),
    }
}

/// Runs `cfg.sampler.method` on `problem`, seeding the sampler from `cfg.seed`.
pub fn reconstruct(cfg: &ExperimentConfig, problem: &Problem) -> Result<ReconReport> {
    let sampler = SamplerConfig {
        seed: cfg.seed,
        ..cfg.sampler
    };
    let prior = build_prior(cfg, problem)?;
    let y = if cfg.density_compensation {
        density_compensate(&problem.kspace, problem.fm.mask())?
    } else {
        problem.kspace.clone()
    };
    run_reconstruction(
        &y,
        &problem.fm,
        &prior,
        &sampler,
        &cfg.ttt,
        &cfg.early_stop(),
        &cfg.sure,
        problem.truth.as_ref(),
    )
}

pub fn option_text(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// Summary of a simulated acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub realized_accel: f64,
    pub noise_std: f64,
    pub manifest: KvConfig,
}

/// Writes truth, coils, mask, k-space and prior mean tensors plus `config.cfg` and `manifest.cfg`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<SimulateSummary> {
    let problem = Problem::simulate(cfg)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let truth = problem.require_truth("simulate")?;
    let files = [
        (TRUTH_FILE, Tensor::from_image(truth)),
        (COILS_FILE, Tensor::from_stack(problem.fm.sens().as_stack())),
        (MASK_FILE, Tensor::from_mask(problem.fm.mask())),
        (KSPACE_FILE, Tensor::from_stack(&problem.kspace)),
        (PRIOR_MEAN_FILE, Tensor::from_image(problem.prior_mean.as_ref().expect("simulate sets the prior mean"))),
    ];
    let mask = problem.fm.mask();
    let (h, w) = problem.fm.shape();
    let mut manifest = KvConfig::new();
    manifest.set("height", h);
    manifest.set("width", w);
    manifest.set("coils", problem.fm.num_coils());
    manifest.set("declared_R", mask.declared_accel());
    manifest.set("realized_R", mask.realized_accel());
    manifest.set("kept_samples", mask.kept_count());
    manifest.set("noise_std", cfg.sigma);
    manifest.set("seed", cfg.seed);
    for (name, tensor) in &files {
        let bytes = tensor.to_bytes();
        write_file(&dir.join(name), &bytes)?;
        manifest.set(&format!("sha256.{name}"), sha256_hex(&bytes));
    }
    write_file(&dir.join(CONFIG_FILE), cfg.to_text().as_bytes())?;
    write_file(&dir.join(MANIFEST_FILE), manifest.to_text().as_bytes())?;
    Ok(SimulateSummary {
        realized_accel: mask.realized_accel(),
        noise_std: cfg.sigma,
        manifest,
    })
}

/// The config stored by `simulate` in `dir`, with `overrides` layered on top.
pub fn layered_config(base_dir: Option<&Path>, layers: &[KvConfig]) -> Result<ExperimentConfig> {
    let mut kv = match base_dir {
        Some(dir) => {
            let path = dir.join(CONFIG_FILE);
            let text = fs::read_to_string(&path).map_err(|e| with_path(&path, e.into()))?;
            KvConfig::parse(&text)?
        }
        None => KvConfig::new(),
    };
    for layer in layers {
        for line in layer.to_text().lines() {
            let (k, v) = line.split_once(" = ").expect("KvConfig::to_text emits 'key = value'");
            kv.set(k, v);
        }
    }
    ExperimentConfig::from_kv(kv)
}

fn stored_config(dir: &Path) -> Result<ExperimentConfig> {
    layered_config(Some(dir), &[])
}

fn problem_for(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<Problem> {
    match input {
        None => Problem::simulate(cfg),
        Some(dir) => {
            let stored = stored_config(dir)?;
            let clash = stored.simulation_mismatch(cfg);
            if !clash.is_empty() {
                return Err(SmrdError::Config(format!(
                    "config disagrees with the simulation in {} on: {}",
                    dir.display(),
                    clash.join(", ")
                )));
            }
            Problem::load(dir)
        }
    }
}

pub fn metrics_kv(report: &ReconReport, truth: Option<&ComplexImage>) -> Result<KvConfig> {
    let mut kv = KvConfig::new();
    kv.set("method", report.method);
    kv.set("t_es", report.t_es);
    kv.set("steps_recorded", report.trace.len());
    kv.set("final_lambda", option_text(report.final_lambda));
    if let Some(x) = truth {
        let m = MetricPair::compute(x, &report.final_image)?;
        kv.set("psnr", m.psnr);
        kv.set("ssim", m.ssim);
    }
    Ok(kv)
}

/// Reconstructs with `cfg.sampler.method` and writes `recon_*.smrd`, `trace_*.csv`, `metrics_*.cfg`.
///
/// With `input`, data come from a `simulate` directory whose stored config must
/// agree with `cfg` on every simulation key; otherwise they are simulated in memory.
pub fn cmd_recon(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<ReconReport> {
    let problem = problem_for(cfg, input)?;
    let report = reconstruct(cfg, &problem)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let m = report.method.as_str();
    write_file(&dir.join(format!("recon_{m}.smrd")), &Tensor::from_image(&report.final_image).to_bytes())?;
    write_file(&dir.join(format!("trace_{m}.csv")), report.trace_csv().as_bytes())?;
    let kv = metrics_kv(&report, problem.truth.as_ref())?;
    write_file(&dir.join(format!("metrics_{m}.cfg")), kv.to_text().as_bytes())?;
    Ok(report)
}

/// Outcome of [`cmd_trace`].
#[derive(Debug, Clone)]
pub struct TraceSummary {
    pub report: ReconReport,
    pub window: usize,
    /// Executed-step count at which the early-stop rule fired, if it did.
    pub fired_at: Option<usize>,
    pub mse_argmin: usize,
    pub pearson: f64,
}

/// Per-step SURE, MSE and PSNR for one run plus the early-stop marker.
pub fn cmd_trace(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<TraceSummary> {
    if cfg.sampler.method == Method::ZeroFilled {
        return Err(SmrdError::Config("trace needs an iterative method, not zero_filled".into()));
    }
    let problem = problem_for(cfg, input)?;
    problem.require_truth("trace")?;
    let report = reconstruct(cfg, &problem)?;
    let window = cfg.early_stop().window;
    let sure: Vec<f64> = report.trace.iter().map(|r| r.sure).collect();
    let mse: Vec<f64> = report.trace.iter().map(|r| r.mse.unwrap_or(f64::NAN)).collect();
    let uses_es = matches!(cfg.sampler.method, Method::Smrd | Method::CsgmEs);
    let fired_at = if uses_es {
        (1..=sure.len()).find(|&n| early_stop_check(&sure[..n], window))
    } else {
        None
    };
    let mse_argmin = mse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(t, _)| t);
    let pearson = if sure.len() >= 2 { metrics::pearson(&sure, &mse)? } else { f64::NAN };

    let dir = &cfg.output_dir;
    create_dir(dir)?;
    write_file(&dir.join("trace.csv"), report.trace_csv().as_bytes())?;
    let mut marker = KvConfig::new();
    marker.set("method", report.method);
    marker.set("window", window);
    marker.set("t_es", report.t_es);
    marker.set("early_stop_fired", fired_at.is_some());
    marker.set("mse_argmin", mse_argmin);
    marker.set("pearson_sure_mse", pearson);
    write_file(&dir.join("trace_marker.cfg"), marker.to_text().as_bytes())?;
    Ok(TraceSummary {
        report,
        window,
        fired_at,
        mse_argmin,
        pearson,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub sigma: f64,
    pub lambda: f64,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepBest {
    pub sigma: f64,
    pub lambda_psnr: f64,
    pub psnr: f64,
    pub lambda_ssim: f64,
    pub ssim: f64,
}

fn check_grid(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(SmrdError::Config(format!("{name} grid is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SmrdError::Config(format!("{name} grid has non-finite entries")));
    }
    Ok(())
}

/// First index of the largest value; ties keep the earliest.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// am_fixed PSNR/SSIM over `lambdas × sigmas` (same seed, data re-simulated per σ).
pub fn sweep_lambda(cfg: &ExperimentConfig, lambdas: &[f64], sigmas: &[f64]) -> Result<(Vec<SweepRow>, Vec<SweepBest>)> {
    check_grid("lambda", lambdas)?;
    check_grid("sigma", sigmas)?;
    let problems = sigmas
        .par_iter()
        .map(|&sigma| Problem::simulate(&ExperimentConfig { sigma, ..cfg.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, f64)> = (0..sigmas.len())
        .flat_map(|i| lambdas.iter().map(move |&l| (i, l)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(i, lambda)| {
            let mut cell = cfg.with_method(Method::AmFixed);
            cell.sigma = sigmas[i];
            cell.ttt.lambda0 = lambda;
            cell.validate()?;
            let problem = &problems[i];
            let report = reconstruct(&cell, problem)?;
            let m = MetricPair::compute(problem.require_truth("sweep-lambda")?, &report.final_image)?;
            Ok(SweepRow {
                sigma: sigmas[i],
                lambda,
                psnr: m.psnr,
                ssim: m.ssim,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = rows
        .chunks(lambdas.len())
        .map(|chunk| {
            let p = argmax(chunk.iter().map(|r| r.psnr));
            let s = argmax(chunk.iter().map(|r| r.ssim));
            SweepBest {
                sigma: chunk[0].sigma,
                lambda_psnr: chunk[p].lambda,
                psnr: chunk[p].psnr,
                lambda_ssim: chunk[s].lambda,
                ssim: chunk[s].ssim,
            }
        })
        .collect();
    Ok((rows, best))
}

/// [`sweep_lambda`] plus `sweep.csv` and `sweep_argmax.csv` in the output directory.
pub fn cmd_sweep_lambda(cfg: &ExperimentConfig, lambdas: &[f64], sigmas: &[f64]) -> Result<(Vec<SweepRow>, Vec<SweepBest>)> {
    let (rows, best) = sweep_lambda(cfg, lambdas, sigmas)?;
    let mut csv = String::from("sigma,lambda,psnr,ssim\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.sigma, r.lambda, r.psnr, r.ssim);
    }
    let mut arg = String::from("sigma,best_lambda_psnr,best_psnr,best_lambda_ssim,best_ssim\n");
    for b in &best {
        let _ = writeln!(arg, "{},{},{},{},{}", b.sigma, b.lambda_psnr, b.psnr, b.lambda_ssim, b.ssim);
    }
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    write_file(&dir.join("sweep.csv"), csv.as_bytes())?;
    write_file(&dir.join("sweep_argmax.csv"), arg.as_bytes())?;
    Ok((rows, best))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub accel: f64,
    pub sigma: f64,
    pub seed: u64,
    pub method: Method,
    pub psnr: f64,
    pub ssim: f64,
    pub t_es: usize,
    pub final_lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSummaryRow {
    pub accel: f64,
    pub sigma: f64,
    pub method: Method,
    pub runs: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// 8-bit binary PGM of `|img|`, scaled so `peak` maps to 255.
pub fn magnitude_pgm(img: &ComplexImage, peak: f64) -> Vec<u8> {
    let (h, w) = img.shape();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    out.extend(img.data().iter().map(|z| (z.norm() * scale).round().clamp(0.0, 255.0) as u8));
    out
}

fn image_name(accel: f64, sigma: f64, seed: u64, what: &str) -> String {
    format!("R{accel}_sigma{sigma}_seed{seed}_{what}.pgm")
}

struct CellOutput {
    rows: Vec<CompareRow>,
    images: Vec<(String, Vec<u8>)>,
}

fn compare_cell(cfg: &ExperimentConfig, accel: f64, sigma: f64, seed: u64) -> Result<CellOutput> {
    let mut cell = cfg.clone();
    cell.mask.accel = accel;
    cell.sigma = sigma;
    cell.seed = seed;
    cell.validate()?;
    let problem = Problem::simulate(&cell)?;
    let truth = problem.require_truth("compare")?;
    let peak = truth.max_abs();
    let reports = Method::ALL
        .par_iter()
        .map(|&m| reconstruct(&cell.with_method(m), &problem))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(reports.len());
    let mut images = vec![(image_name(accel, sigma, seed, "truth"), magnitude_pgm(truth, peak))];
    for r in reports {
        let m = MetricPair::compute(truth, &r.final_image)?;
        images.push((image_name(accel, sigma, seed, r.method.as_str()), magnitude_pgm(&r.final_image, peak)));
        rows.push(CompareRow {
            accel,
            sigma,
            seed,
            method: r.method,
            psnr: m.psnr,
            ssim: m.ssim,
            t_es: r.t_es,
            final_lambda: r.final_lambda,
        });
    }
    Ok(CellOutput { rows, images })
}

/// Every method over `accels × sigmas × seeds`.
///
/// Writes `compare_runs.csv` (one row per run), `compare_summary.csv` (mean and
/// sample std per accel, σ and method, in the shape of a results table) and a
/// magnitude PGM per run under `images/`.
pub fn cmd_compare(
    cfg: &ExperimentConfig,
    accels: &[f64],
    sigmas: &[f64],
    seeds: &[u64],
) -> Result<(Vec<CompareRow>, Vec<CompareSummaryRow>)> {
    check_grid("accel", accels)?;
    check_grid("sigma", sigmas)?;
    if seeds.is_empty() {
        return Err(SmrdError::Config("seed list is empty".into()));
    }
    let cells: Vec<(f64, f64, u64)> = accels
        .iter()
        .flat_map(|&a| sigmas.iter().flat_map(move |&s| seeds.iter().map(move |&k| (a, s, k))))
        .collect();
    let outputs = cells
        .par_iter()
        .map(|&(a, s, k)| compare_cell(cfg, a, s, k))
        .collect::<Result<Vec<_>>>()?;

    let dir = &cfg.output_dir;
    let image_dir = dir.join("images");
    create_dir(&image_dir)?;
    let mut rows = Vec::new();
    for out in outputs {
        for (name, bytes) in &out.images {
            write_file(&image_dir.join(name), bytes)?;
        }
        rows.extend(out.rows);
    }

    let mut summary = Vec::new();
    for &accel in accels {
        for &sigma in sigmas {
            for method in Method::ALL {
                let sel: Vec<&CompareRow> = rows
                    .iter()
                    .filter(|r| r.accel == accel && r.sigma == sigma && r.method == method)
                    .collect();
                let (psnr_mean, psnr_std) = mean_std(&sel.iter().map(|r| r.psnr).collect::<Vec<_>>());
                let (ssim_mean, ssim_std) = mean_std(&sel.iter().map(|r| r.ssim).collect::<Vec<_>>());
                summary.push(CompareSummaryRow {
                    accel,
                    sigma,
                    method,
                    runs: sel.len(),
                    psnr_mean,
                    psnr_std,
                    ssim_mean,
                    ssim_std,
                });
            }
        }
    }

    let mut csv = String::from("accel,sigma,seed,method,psnr,ssim,t_es,final_lambda\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.accel,
            r.sigma,
            r.seed,
            r.method,
            r.psnr,
            r.ssim,
            r.t_es,
            option_text(r.final_lambda)
        );
    }
    let mut table = String::from("accel,sigma,method,runs,psnr_mean,psnr_std,ssim_mean,ssim_std\n");
    for s in &summary {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{}",
            s.accel, s.sigma, s.method, s.runs, s.psnr_mean, s.psnr_std, s.ssim_mean, s.ssim_std
        );
    }
    write_file(&dir.join("compare_runs.csv"), csv.as_bytes())?;
    write_file(&dir.join("compare_summary.csv"), table.as_bytes())?;
    Ok((rows, summary))
}
