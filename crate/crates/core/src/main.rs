use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smrd::cli::{self, ExperimentConfig};
use smrd::harness::KvConfig;
use smrd::{Result, SmrdError};

#[derive(Parser)]
#[command(name = "smrd", version, about = "SURE-tuned Langevin MRI reconstruction on synthetic phantoms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate phantom, coils, mask and noisy k-space.
    Simulate(Common),
    /// Reconstruct with one method.
    Recon {
        #[command(flatten)]
        common: Common,
        /// Directory written by `simulate`; simulated in memory when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// am_fixed quality over a lambda x sigma grid.
    SweepLambda {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0])]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.02])]
        sigmas: Vec<f64>,
    },
    /// Per-step SURE and true MSE with the early-stop marker.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// All methods over an accel x sigma x seed grid.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [4.0, 8.0])]
        accels: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.01, 0.02])]
        sigmas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0, 1, 2, 3, 4])]
        seeds: Vec<u64>,
    },
}

/// Flags that overwrite config keys; `--set key=value` reaches any other key.
#[derive(Args)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    accel: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    cg_iters: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn layers(&self) -> Result<Vec<KvConfig>> {
        let mut layers = Vec::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| SmrdError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            layers.push(KvConfig::parse(&text)?);
        }
        let mut flags = KvConfig::new();
        let mut put = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                flags.set(key, v);
            }
        };
        put("mask.accel", self.accel.map(|v| v.to_string()));
        put("noise.sigma", self.sigma.map(|v| v.to_string()));
        put("ttt.lambda0", self.lambda0.map(|v| v.to_string()));
        put("ttt.alpha", self.alpha.map(|v| v.to_string()));
        put("es.window", self.window.map(|v| v.to_string()));
        put("sampler.cg_iters", self.cg_iters.map(|v| v.to_string()));
        put("sampler.steps", self.steps.map(|v| v.to_string()));
        put("sampler.method", self.method.clone());
        put("seed", self.seed.map(|v| v.to_string()));
        put("output.dir", self.out.as_ref().map(|p| p.display().to_string()));
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| SmrdError::Config(format!("--set expects KEY=VALUE, got '{pair}'")))?;
            flags.set(k.trim(), v.trim());
        }
        layers.push(flags);
        Ok(layers)
    }

    fn config(&self, base: Option<&PathBuf>) -> Result<ExperimentConfig> {
        cli::layered_config(base.map(PathBuf::as_path), &self.layers()?)
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(common) => {
            let cfg = common.config(None)?;
            let s = cli::cmd_simulate(&cfg)?;
            println!(
                "wrote {} (realized R {:.3}, noise std {})",
                cfg.output_dir.display(),
                s.realized_accel,
                s.noise_std
            );
        }
        Command::Recon { common, input } => {
            let cfg = common.config(input.as_ref())?;
            let report = cli::cmd_recon(&cfg, input.as_deref())?;
            println!(
                "{}: T_ES {} final lambda {} -> {}",
                report.method,
                report.t_es,
                cli::commands::option_text(report.final_lambda),
                cfg.output_dir.display()
            );
        }
        Command::SweepLambda { common, lambdas, sigmas } => {
            let cfg = common.config(None)?;
            let (_, best) = cli::cmd_sweep_lambda(&cfg, &lambdas, &sigmas)?;
            for b in best {
                println!(
                    "sigma {}: best lambda {} (PSNR {:.2} dB), {} (SSIM {:.4})",
                    b.sigma, b.lambda_psnr, b.psnr, b.lambda_ssim, b.ssim
                );
            }
        }
        Command::Trace { common, input } => {
            let cfg = common.config(input.as_ref())?;
            let s = cli::cmd_trace(&cfg, input.as_deref())?;
            println!(
                "{}: {} steps, T_ES {}, window {}, MSE argmin {}, corr(SURE, MSE) {:.3}",
                s.report.method,
                s.report.trace.len(),
                s.report.t_es,
                s.window,
                s.mse_argmin,
                s.pearson
            );
        }
        Command::Compare {
            common,
            accels,
            sigmas,
            seeds,
        } => {
            let cfg = common.config(None)?;
            let (_, summary) = cli::cmd_compare(&cfg, &accels, &sigmas, &seeds)?;
            for s in summary {
                println!(
                    "R={} sigma={} {:<11} PSNR {:.2} +- {:.2}  SSIM {:.4} +- {:.4}",
                    s.accel, s.sigma, s.method, s.psnr_mean, s.psnr_std, s.ssim_mean, s.ssim_std
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
