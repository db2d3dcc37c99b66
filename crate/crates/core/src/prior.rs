//! Score priors `f(x_t; t)` and their annealing schedules.
//!
//! The analytic priors here stand in for a trained score network: with them
//! every sampler update is affine in the iterate, which makes the whole
//! pipeline checkable against closed forms.

use crate::error::{Result, SmrdError};
use crate::numerics::ComplexImage;

/// Geometric noise levels `β_ℓ` with `n` Langevin steps per level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    levels: usize,
    beta_max: f64,
    beta_min: f64,
    steps_per_level: usize,
    eps0: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            levels: 30,
            beta_max: 1.0,
            beta_min: 0.01,
            steps_per_level: 10,
            eps0: 2e-5,
        }
    }
}

impl NoiseSchedule {
    pub fn new(
        levels: usize,
        beta_max: f64,
        beta_min: f64,
        steps_per_level: usize,
        eps0: f64,
    ) -> Result<Self> {
        if levels == 0 || steps_per_level == 0 {
            return Err(SmrdError::InvalidParameter(
                "schedule needs at least one level and one step per level".into(),
            ));
        }
        if !(beta_min > 0.0) || !(beta_max > beta_min) || !beta_max.is_finite() {
            return Err(SmrdError::InvalidParameter(format!(
                "need 0 < beta_min < beta_max, got beta_min={beta_min}, beta_max={beta_max}"
            )));
        }
        if !(eps0 > 0.0) || !eps0.is_finite() {
            return Err(SmrdError::InvalidParameter(format!(
                "eps0 must be positive, got {eps0}"
            )));
        }
        Ok(Self {
            levels,
            beta_max,
            beta_min,
            steps_per_level,
            eps0,
        })
    }

    /// Same levels, with the per-level step count chosen so the schedule covers `total` steps.
    pub fn with_total_steps(self, total: usize) -> Result<Self> {
        if total == 0 {
            return Err(SmrdError::InvalidParameter("total steps must be >= 1".into()));
        }
        Self::new(
            self.levels,
            self.beta_max,
            self.beta_min,
            total.div_ceil(self.levels),
            self.eps0,
        )
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    pub fn steps_per_level(&self) -> usize {
        self.steps_per_level
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn total_steps(&self) -> usize {
        self.levels * self.steps_per_level
    }

    /// `β_ℓ = β_max (β_min/β_max)^(ℓ/(L−1))`; a single level sits at `β_max`.
    pub fn beta(&self, level: usize) -> f64 {
        if self.levels == 1 {
            return self.beta_max;
        }
        let frac = level as f64 / (self.levels - 1) as f64;
        self.beta_max * (self.beta_min / self.beta_max).powf(frac)
    }

    pub fn level_of(&self, t: usize) -> Result<usize> {
        self.check_step(t)?;
        Ok(t / self.steps_per_level)
    }

    pub fn beta_at(&self, t: usize) -> Result<f64> {
        Ok(self.beta(self.level_of(t)?))
    }

    /// Langevin step size `η_t = eps0 · β_ℓ(t)² / β_{L−1}²`.
    pub fn eta(&self, t: usize) -> Result<f64> {
        let beta = self.beta_at(t)?;
        let last = self.beta(self.levels - 1);
        Ok(self.eps0 * (beta * beta) / (last * last))
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t >= self.total_steps() {
            return Err(SmrdError::StepOutOfRange {
                t,
                total: self.total_steps(),
            });
        }
        Ok(())
    }
}

/// Free-function form of [`NoiseSchedule::eta`].
pub fn eta(schedule: &NoiseSchedule, t: usize) -> Result<f64> {
    schedule.eta(t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorKind {
    /// `N(mean, τ² I)`, smoothed by the current noise level.
    Gaussian { mean: ComplexImage, tau2: f64 },
    /// Improper Gaussian smoothness prior `exp(−γ/2 ‖∇x‖²)`.
    Smoothness { gamma: f64 },
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorePrior {
    kind: PriorKind,
    schedule: NoiseSchedule,
}

impl ScorePrior {
    pub fn new(kind: PriorKind, schedule: NoiseSchedule) -> Result<Self> {
        match &kind {
            PriorKind::Gaussian { mean, tau2 } => {
                if !(*tau2 > 0.0) || !tau2.is_finite() {
                    return Err(SmrdError::InvalidParameter(format!(
                        "gaussian prior variance must be positive, got {tau2}"
                    )));
                }
                if !mean.is_finite() {
                    return Err(SmrdError::InvalidParameter(
                        "gaussian prior mean has non-finite entries".into(),
                    ));
                }
            }
            PriorKind::Smoothness { gamma } => {
                if !(*gamma >= 0.0) || !gamma.is_finite() {
                    return Err(SmrdError::InvalidParameter(format!(
                        "smoothness strength must be >= 0, got {gamma}"
                    )));
                }
            }
            PriorKind::Zero => {}
        }
        Ok(Self { kind, schedule })
    }

    pub fn gaussian(mean: ComplexImage, tau2: f64, schedule: NoiseSchedule) -> Result<Self> {
        Self::new(PriorKind::Gaussian { mean, tau2 }, schedule)
    }

    pub fn smoothness(gamma: f64, schedule: NoiseSchedule) -> Result<Self> {
        Self::new(PriorKind::Smoothness { gamma }, schedule)
    }

    pub fn zero(schedule: NoiseSchedule) -> Self {
        Self {
            kind: PriorKind::Zero,
            schedule,
        }
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn with_schedule(&self, schedule: NoiseSchedule) -> Self {
        Self {
            kind: self.kind.clone(),
            schedule,
        }
    }

    pub fn eta(&self, t: usize) -> Result<f64> {
        self.schedule.eta(t)
    }

    /// Score at step `t`.
    pub fn score(&self, x: &ComplexImage, t: usize) -> Result<ComplexImage> {
        let beta = self.schedule.beta_at(t)?;
        self.score_at_beta(x, beta)
    }

    /// Score evaluated at an explicit noise level.
    pub fn score_at_beta(&self, x: &ComplexImage, beta: f64) -> Result<ComplexImage> {
        match &self.kind {
            PriorKind::Gaussian { mean, tau2 } => {
                mean.check_shape(x)?;
                let inv = 1.0 / (tau2 + beta * beta);
                let mut out = mean.sub(x)?;
                out.data_mut().iter_mut().for_each(|z| *z *= inv);
                Ok(out)
            }
            PriorKind::Smoothness { gamma } => Ok(graph_laplacian(x).scaled(-gamma)),
            PriorKind::Zero => Ok(ComplexImage::zeros_like(x)),
        }
    }
}

/// Free-function form of [`ScorePrior::score`].
pub fn score(prior: &ScorePrior, x: &ComplexImage, t: usize) -> Result<ComplexImage> {
    prior.score(x, t)
}

/// Positive semidefinite 5-point Laplacian `(Lx)_p = Σ_{q~p} (x_p − x_q)` on the grid
/// graph; border pixels simply have fewer neighbors.
pub fn graph_laplacian(x: &ComplexImage) -> ComplexImage {
    let (h, w) = x.shape();
    let mut out = ComplexImage::zeros_like(x);
    for i in 0..h {
        for j in 0..w {
            let c = x.get(i, j);
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            if i > 0 {
                acc += c - x.get(i - 1, j);
            }
            if i + 1 < h {
                acc += c - x.get(i + 1, j);
            }
            if j > 0 {
                acc += c - x.get(i, j - 1);
            }
            if j + 1 < w {
                acc += c - x.get(i, j + 1);
            }
            out.set(i, j, acc);
        }
    }
    out
}
