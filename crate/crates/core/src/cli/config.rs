//! `ExperimentConfig` and its flat `key = value` form.

use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Result, SmrdError};
use crate::harness::{KvConfig, PhantomKind, PhantomPhase, PhantomSpec};
use crate::prior::NoiseSchedule;
use crate::sampler::{Method, SamplerConfig};
use crate::sure::{EarlyStopConfig, SureConfig, TttConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Equispaced,
    PoissonDisc,
}

impl MaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Equispaced => "equispaced",
            Self::PoissonDisc => "poisson_disc",
        }
    }
}

impl FromStr for MaskKind {
    type Err = SmrdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equispaced" => Ok(Self::Equispaced),
            "poisson_disc" => Ok(Self::PoissonDisc),
            other => Err(SmrdError::Config(format!("unknown mask kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub kind: MaskKind,
    pub accel: f64,
    /// ACS width as a fraction of the columns (equispaced); `None` picks 8% below R=8 and 4% from R=8 up.
    pub acs_fraction: Option<f64>,
    /// Side of the fully sampled center block (Poisson disc).
    pub calib: usize,
}

impl MaskSpec {
    pub fn acs(&self) -> f64 {
        self.acs_fraction
            .unwrap_or(if self.accel >= 8.0 { 0.04 } else { 0.08 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorChoice {
    Gaussian,
    Smoothness,
    Zero,
}

impl PriorChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Smoothness => "smoothness",
            Self::Zero => "zero",
        }
    }
}

impl FromStr for PriorChoice {
    type Err = SmrdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "smoothness" => Ok(Self::Smoothness),
            "zero" => Ok(Self::Zero),
            other => Err(SmrdError::Config(format!("unknown prior kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub kind: PriorChoice,
    /// Gaussian prior variance.
    pub tau2: f64,
    /// Width (pixels) of the blur that turns the ground truth into the gaussian prior mean.
    pub mean_blur: f64,
    /// Smoothness prior strength.
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub levels: usize,
    pub beta_max: f64,
    pub beta_min: f64,
    pub eps0: f64,
}

impl ScheduleSpec {
    /// Schedule stretched to cover `total_steps`.
    pub fn build(&self, total_steps: usize) -> Result<NoiseSchedule> {
        NoiseSchedule::new(self.levels, self.beta_max, self.beta_min, 1, self.eps0)?.with_total_steps(total_steps)
    }
}

/// Everything one command needs, apart from its input files.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub phantom: PhantomSpec,
    pub mask: MaskSpec,
    pub coils: usize,
    pub lobe_width: f64,
    pub sigma: f64,
    pub seed: u64,
    pub prior: PriorSpec,
    pub schedule: ScheduleSpec,
    pub sampler: SamplerConfig,
    pub ttt: TttConfig,
    /// Early-stop window; `0` means `⌈0.14 T⌉`.
    pub window: usize,
    pub sure: SureConfig,
    pub density_compensation: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            phantom: PhantomSpec {
                kind: PhantomKind::SheppLogan,
                size: 64,
                phase: PhantomPhase::None,
            },
            mask: MaskSpec {
                kind: MaskKind::Equispaced,
                accel: 4.0,
                acs_fraction: None,
                calib: 8,
            },
            coils: 8,
            lobe_width: 0.6,
            sigma: 0.02,
            seed: 0,
            prior: PriorSpec {
                kind: PriorChoice::Gaussian,
                tau2: 1e-3,
                mean_blur: 0.5,
                gamma: 1.0,
            },
            schedule: ScheduleSpec {
                levels: 30,
                beta_max: 1.0,
                beta_min: 0.01,
                eps0: 2e-5,
            },
            sampler: SamplerConfig::default(),
            ttt: TttConfig::default(),
            window: 0,
            sure: SureConfig::default(),
            density_compensation: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Keys that fix the simulated data; `recon` refuses to change them.
pub const SIMULATION_KEYS: &[&str] = &[
    "phantom.kind",
    "phantom.size",
    "phantom.phase",
    "mask.kind",
    "mask.accel",
    "mask.acs_fraction",
    "mask.calib",
    "coils.count",
    "coils.lobe_width",
    "noise.sigma",
    "seed",
    "prior.mean_blur",
];

fn take_opt_f64(kv: &mut KvConfig, key: &str, default: Option<f64>) -> Result<Option<f64>> {
    match kv.take::<String>(key)? {
        None => Ok(default),
        Some(v) if v == "auto" => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| SmrdError::Config(format!("key '{key}': cannot parse '{v}': {e}"))),
    }
}

fn opt_text(v: Option<impl Display>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl ExperimentConfig {
    /// Parses a flat config; absent keys take defaults, unknown keys are rejected.
    pub fn from_kv(mut kv: KvConfig) -> Result<Self> {
        let d = Self::default();
        let k = &mut kv;
        let cfg = Self {
            phantom: PhantomSpec {
                kind: k.take_or("phantom.kind", d.phantom.kind.as_str().to_string())?.parse()?,
                size: k.take_or("phantom.size", d.phantom.size)?,
                phase: k.take_or("phantom.phase", d.phantom.phase.as_str().to_string())?.parse()?,
            },
            mask: MaskSpec {
                kind: k.take_or("mask.kind", d.mask.kind.as_str().to_string())?.parse()?,
                accel: k.take_or("mask.accel", d.mask.accel)?,
                acs_fraction: take_opt_f64(k, "mask.acs_fraction", d.mask.acs_fraction)?,
                calib: k.take_or("mask.calib", d.mask.calib)?,
            },
            coils: k.take_or("coils.count", d.coils)?,
            lobe_width: k.take_or("coils.lobe_width", d.lobe_width)?,
            sigma: k.take_or("noise.sigma", d.sigma)?,
            seed: k.take_or("seed", d.seed)?,
            prior: PriorSpec {
                kind: k.take_or("prior.kind", d.prior.kind.as_str().to_string())?.parse()?,
                tau2: k.take_or("prior.tau2", d.prior.tau2)?,
                mean_blur: k.take_or("prior.mean_blur", d.prior.mean_blur)?,
                gamma: k.take_or("prior.gamma", d.prior.gamma)?,
            },
            schedule: ScheduleSpec {
                levels: k.take_or("schedule.levels", d.schedule.levels)?,
                beta_max: k.take_or("schedule.beta_max", d.schedule.beta_max)?,
                beta_min: k.take_or("schedule.beta_min", d.schedule.beta_min)?,
                eps0: k.take_or("schedule.eps0", d.schedule.eps0)?,
            },
            sampler: SamplerConfig {
                total_steps: k.take_or("sampler.steps", d.sampler.total_steps)?,
                cg_iters: k.take_or("sampler.cg_iters", d.sampler.cg_iters)?,
                seed: 0,
                method: k.take_or("sampler.method", d.sampler.method.as_str().to_string())?.parse()?,
                dc_weight: k.take_or("sampler.dc_weight", d.sampler.dc_weight)?,
            },
            ttt: TttConfig {
                lambda0: k.take_or("ttt.lambda0", d.ttt.lambda0)?,
                alpha: k.take_or("ttt.alpha", d.ttt.alpha)?,
                freeze_fraction: k.take_or("ttt.freeze_fraction", d.ttt.freeze_fraction)?,
                lambda_min: k.take_or("ttt.lambda_min", d.ttt.lambda_min)?,
                lambda_max: k.take_or("ttt.lambda_max", d.ttt.lambda_max)?,
                ..d.ttt
            },
            window: k.take_or("es.window", d.window)?,
            sure: SureConfig {
                epsilon_rel: k.take_or("sure.epsilon_rel", d.sure.epsilon_rel)?,
                probes: k.take_or("sure.probes", d.sure.probes)?,
                ..d.sure
            },
            density_compensation: k.take_or("kspace.density_compensation", d.density_compensation)?,
            output_dir: PathBuf::from(k.take_or("output.dir", d.output_dir.display().to_string())?),
        };
        kv.finish()?;
        let cfg = Self {
            sampler: SamplerConfig { seed: cfg.seed, ..cfg.sampler },
            ..cfg
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(KvConfig::parse(text)?)
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("phantom.kind", self.phantom.kind.as_str());
        kv.set("phantom.size", self.phantom.size);
        kv.set("phantom.phase", self.phantom.phase.as_str());
        kv.set("mask.kind", self.mask.kind.as_str());
        kv.set("mask.accel", self.mask.accel);
        kv.set("mask.acs_fraction", opt_text(self.mask.acs_fraction));
        kv.set("mask.calib", self.mask.calib);
        kv.set("coils.count", self.coils);
        kv.set("coils.lobe_width", self.lobe_width);
        kv.set("noise.sigma", self.sigma);
        kv.set("seed", self.seed);
        kv.set("prior.kind", self.prior.kind.as_str());
        kv.set("prior.tau2", self.prior.tau2);
        kv.set("prior.mean_blur", self.prior.mean_blur);
        kv.set("prior.gamma", self.prior.gamma);
        kv.set("schedule.levels", self.schedule.levels);
        kv.set("schedule.beta_max", self.schedule.beta_max);
        kv.set("schedule.beta_min", self.schedule.beta_min);
        kv.set("schedule.eps0", self.schedule.eps0);
        kv.set("sampler.steps", self.sampler.total_steps);
        kv.set("sampler.cg_iters", self.sampler.cg_iters);
        kv.set("sampler.method", self.sampler.method.as_str());
        kv.set("sampler.dc_weight", self.sampler.dc_weight);
        kv.set("ttt.lambda0", self.ttt.lambda0);
        kv.set("ttt.alpha", self.ttt.alpha);
        kv.set("ttt.freeze_fraction", self.ttt.freeze_fraction);
        kv.set("ttt.lambda_min", self.ttt.lambda_min);
        kv.set("ttt.lambda_max", self.ttt.lambda_max);
        kv.set("es.window", self.window);
        kv.set("sure.epsilon_rel", self.sure.epsilon_rel);
        kv.set("sure.probes", self.sure.probes);
        kv.set("kspace.density_compensation", self.density_compensation);
        kv.set("output.dir", self.output_dir.display());
        kv
    }

    pub fn to_text(&self) -> String {
        self.to_kv().to_text()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SmrdError::Config(msg));
        if self.phantom.size < 2 {
            return bad(format!("phantom.size must be >= 2, got {}", self.phantom.size));
        }
        if self.coils == 0 {
            return bad("coils.count must be >= 1".into());
        }
        if !(self.lobe_width > 0.0) || !self.lobe_width.is_finite() {
            return bad(format!("coils.lobe_width must be positive, got {}", self.lobe_width));
        }
        if !(self.mask.accel >= 1.0) || !self.mask.accel.is_finite() {
            return bad(format!("mask.accel must be >= 1, got {}", self.mask.accel));
        }
        if !(0.0..1.0).contains(&self.mask.acs()) {
            return bad(format!("mask.acs_fraction must lie in [0, 1), got {}", self.mask.acs()));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad(format!("noise.sigma must be >= 0, got {}", self.sigma));
        }
        if !(self.prior.mean_blur >= 0.0) {
            return bad(format!("prior.mean_blur must be >= 0, got {}", self.prior.mean_blur));
        }
        self.schedule
            .build(self.sampler.total_steps.max(1))
            .and_then(|_| self.sampler.validate())
            .and_then(|_| self.ttt.validate())
            .and_then(|_| self.sure.validate())
            .map_err(|e| SmrdError::Config(e.to_string()))
    }

    pub fn early_stop(&self) -> EarlyStopConfig {
        if self.window == 0 {
            EarlyStopConfig::for_total_steps(self.sampler.total_steps)
        } else {
            EarlyStopConfig { window: self.window }
        }
    }

    pub fn with_method(&self, method: Method) -> Self {
        Self {
            sampler: SamplerConfig { method, ..self.sampler },
            ..self.clone()
        }
    }

    /// Keys of [`SIMULATION_KEYS`] on which `self` and `other` disagree.
    pub fn simulation_mismatch(&self, other: &Self) -> Vec<&'static str> {
        let (a, b) = (self.to_kv(), other.to_kv());
        SIMULATION_KEYS.iter().copied().filter(|key| a.get(key) != b.get(key)).collect()
    }
}
