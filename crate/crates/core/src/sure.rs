//! Monte-Carlo SURE, SURE-gradient tuning of λ, and moving-average early stopping.
//!
//! Update maps are passed in as closures so the estimators can be exercised on
//! anything from the identity to a full CG-backed data-consistency step.

use rand::Rng;

use crate::error::{Result, SmrdError};
use crate::numerics::{inner_unchecked, ComplexImage};
use crate::rng;

/// Perturbation and probe settings for the Monte-Carlo divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SureConfig {
    /// ε as a fraction of the perturbed input's largest magnitude.
    pub epsilon_rel: f64,
    /// Lower bound on ε.
    pub epsilon_floor: f64,
    /// Probes averaged per estimate.
    pub probes: usize,
}

impl Default for SureConfig {
    fn default() -> Self {
        Self {
            epsilon_rel: 1e-3,
            epsilon_floor: 1e-8,
            probes: 1,
        }
    }
}

impl SureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_rel > 0.0) || !(self.epsilon_floor > 0.0) {
            return Err(SmrdError::InvalidParameter(format!(
                "epsilon policy must be positive, got rel={} floor={}",
                self.epsilon_rel, self.epsilon_floor
            )));
        }
        if self.probes == 0 {
            return Err(SmrdError::InvalidParameter("need at least one probe".into()));
        }
        Ok(())
    }

    pub fn epsilon(&self, input: &ComplexImage) -> f64 {
        (self.epsilon_rel * input.max_abs()).max(self.epsilon_floor)
    }
}

/// λ optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TttConfig {
    pub lambda0: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// λ is updated only for `t < ⌈freeze_fraction · T⌉`.
    pub freeze_fraction: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for TttConfig {
    fn default() -> Self {
        Self {
            lambda0: 2.0,
            alpha: 0.2,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            freeze_fraction: 0.43,
            lambda_min: 1e-4,
            lambda_max: 1e4,
        }
    }
}

impl TttConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(SmrdError::InvalidParameter(what.to_string()));
        if !(self.lambda_min > 0.0) || !(self.lambda_max > self.lambda_min) || !self.lambda_max.is_finite() {
            return bad("lambda bounds must satisfy 0 < min < max < inf");
        }
        if !(self.lambda0 >= self.lambda_min && self.lambda0 <= self.lambda_max) {
            return bad("lambda0 must lie within the lambda bounds");
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad("alpha must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return bad("optimizer constants out of range");
        }
        if !(self.freeze_fraction > 0.0 && self.freeze_fraction <= 1.0) {
            return bad("freeze fraction must lie in (0, 1]");
        }
        Ok(())
    }

    /// First step at which λ no longer changes.
    pub fn freeze_step(&self, total_steps: usize) -> usize {
        ((self.freeze_fraction * total_steps as f64) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn clamp(&self, lambda: f64) -> f64 {
        lambda.clamp(self.lambda_min, self.lambda_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EarlyStopConfig {
    pub window: usize,
}

impl EarlyStopConfig {
    /// `w = ⌈0.14 · T⌉`.
    pub fn for_total_steps(total_steps: usize) -> Self {
        Self {
            window: (14 * total_steps).div_ceil(100).max(1),
        }
    }
}

/// Per-run tuning state.
#[derive(Debug, Clone, PartialEq)]
pub struct TttState {
    pub lambda: f64,
    m: f64,
    v: f64,
    updates: i32,
    freeze_step: usize,
    pub history: Vec<f64>,
    pub stopped: bool,
    pub t_es: Option<usize>,
}

impl TttState {
    pub fn new(cfg: &TttConfig, total_steps: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            lambda: cfg.lambda0,
            m: 0.0,
            v: 0.0,
            updates: 0,
            freeze_step: cfg.freeze_step(total_steps),
            history: Vec::new(),
            stopped: false,
            t_es: None,
        })
    }

    pub fn freeze_step(&self) -> usize {
        self.freeze_step
    }

    pub fn is_frozen(&self, t: usize) -> bool {
        t >= self.freeze_step
    }
}

/// Circular complex normal probes with `E|μ_i|² = 1`.
pub fn draw_probes<R: Rng + ?Sized>(shape: (usize, usize), count: usize, rng: &mut R) -> Vec<ComplexImage> {
    (0..count)
        .map(|_| rng::standard_complex_normal(shape.0, shape.1, rng))
        .collect()
}

/// Mean of `Re⟨μ, h(v + εμ) − h(v)⟩ / ε` over `probes`, given `base = h(v)`.
pub fn mc_divergence<H>(h: &mut H, input: &ComplexImage, base: &ComplexImage, probes: &[ComplexImage], epsilon: f64) -> Result<f64>
where
    H: FnMut(&ComplexImage) -> Result<ComplexImage>,
{
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(SmrdError::Numerical(format!("perturbation scale {epsilon} is not positive")));
    }
    if probes.is_empty() {
        return Err(SmrdError::InvalidParameter("need at least one probe".into()));
    }
    input.check_shape(base)?;
    let mut total = 0.0;
    for mu in probes {
        input.check_shape(mu)?;
        let mut shifted = input.clone();
        shifted.axpy_real(epsilon, mu);
        let mut diff = h(&shifted)?;
        input.check_shape(&diff)?;
        diff.axpy_real(-1.0, base);
        total += inner_unchecked(mu, &diff).re / epsilon;
    }
    Ok(total / probes.len() as f64)
}

/// `(‖h(v) − x_zf‖² / N) · div`, with the divergence estimated on the given probes.
pub fn sure_with_probes<H>(
    h: &mut H,
    input: &ComplexImage,
    base: &ComplexImage,
    x_zf: &ComplexImage,
    probes: &[ComplexImage],
    cfg: &SureConfig,
) -> Result<f64>
where
    H: FnMut(&ComplexImage) -> Result<ComplexImage>,
{
    base.check_shape(x_zf)?;
    let div = mc_divergence(h, input, base, probes, cfg.epsilon(input))?;
    Ok(base.dist_sqr(x_zf) / base.len() as f64 * div)
}

/// Variance-free Monte-Carlo SURE of the update `h`, perturbing it at `input`.
pub fn mc_sure<H, R>(mut h: H, input: &ComplexImage, x_zf: &ComplexImage, cfg: &SureConfig, rng: &mut R) -> Result<f64>
where
    H: FnMut(&ComplexImage) -> Result<ComplexImage>,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let probes = draw_probes(input.shape(), cfg.probes, rng);
    let base = h(input)?;
    sure_with_probes(&mut h, input, &base, x_zf, &probes, cfg)
}

/// Known-noise SURE `‖x̂ − x_zf‖² − Nσ² + σ²·div`.
///
/// For complex data, `sigma²` is the per-pixel noise variance `E|z_i|²` and
/// `divergence` the trace of the real Jacobian (twice `Re tr` for a
/// complex-linear map, i.e. twice what [`mc_divergence`] estimates).
pub fn sure_known_sigma(x_hat: &ComplexImage, x_zf: &ComplexImage, sigma: f64, divergence: f64) -> Result<f64> {
    x_hat.check_shape(x_zf)?;
    if !(sigma >= 0.0) {
        return Err(SmrdError::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let s2 = sigma * sigma;
    Ok(x_hat.dist_sqr(x_zf) - x_hat.len() as f64 * s2 + s2 * divergence)
}

/// Finite-difference step for `λ`.
pub fn lambda_delta(lambda: f64) -> f64 {
    (1e-2 * lambda).max(1e-4)
}

/// `∂ SURE / ∂λ` by central differences, with every evaluation sharing `probes`.
///
/// `h(v, λ)` must be deterministic. Falls back to a one-sided difference where
/// `λ ± δ` leaves the configured bounds.
pub fn grad_sure_lambda_with_probes<H>(
    mut h: H,
    input: &ComplexImage,
    x_zf: &ComplexImage,
    lambda: f64,
    probes: &[ComplexImage],
    sure_cfg: &SureConfig,
    ttt_cfg: &TttConfig,
) -> Result<f64>
where
    H: FnMut(&ComplexImage, f64) -> Result<ComplexImage>,
{
    if !(lambda >= ttt_cfg.lambda_min && lambda <= ttt_cfg.lambda_max) {
        return Err(SmrdError::InvalidParameter(format!(
            "lambda {lambda} outside [{}, {}]",
            ttt_cfg.lambda_min, ttt_cfg.lambda_max
        )));
    }
    let delta = lambda_delta(lambda);
    let hi = if lambda + delta <= ttt_cfg.lambda_max { lambda + delta } else { lambda };
    let lo = if lambda - delta >= ttt_cfg.lambda_min { lambda - delta } else { lambda };
    if hi == lo {
        return Ok(0.0);
    }
    let mut sure_at = |lam: f64| -> Result<f64> {
        let mut at = |v: &ComplexImage| h(v, lam);
        let base = at(input)?;
        sure_with_probes(&mut at, input, &base, x_zf, probes, sure_cfg)
    };
    let g = (sure_at(hi)? - sure_at(lo)?) / (hi - lo);
    if !g.is_finite() {
        return Err(SmrdError::Numerical(format!("non-finite SURE gradient at lambda={lambda}")));
    }
    Ok(g)
}

/// [`grad_sure_lambda_with_probes`] with freshly drawn probes.
pub fn grad_sure_lambda<H, R>(
    h: H,
    input: &ComplexImage,
    x_zf: &ComplexImage,
    lambda: f64,
    sure_cfg: &SureConfig,
    ttt_cfg: &TttConfig,
    rng: &mut R,
) -> Result<f64>
where
    H: FnMut(&ComplexImage, f64) -> Result<ComplexImage>,
    R: Rng + ?Sized,
{
    sure_cfg.validate()?;
    let probes = draw_probes(input.shape(), sure_cfg.probes, rng);
    grad_sure_lambda_with_probes(h, input, x_zf, lambda, &probes, sure_cfg, ttt_cfg)
}

/// One Adam step on λ followed by clamping; a no-op once `t` reaches the freeze step.
pub fn update_lambda(state: &mut TttState, grad: f64, cfg: &TttConfig, t: usize) -> Result<()> {
    if state.is_frozen(t) {
        return Ok(());
    }
    if !grad.is_finite() {
        return Err(SmrdError::Numerical(format!("non-finite lambda gradient {grad} at step {t}")));
    }
    state.updates += 1;
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad;
    let m_hat = state.m / (1.0 - cfg.beta1.powi(state.updates));
    let v_hat = state.v / (1.0 - cfg.beta2.powi(state.updates));
    state.lambda = cfg.clamp(state.lambda - cfg.alpha * m_hat / (v_hat.sqrt() + cfg.adam_eps));
    Ok(())
}

/// True iff the mean of the last `w` entries strictly exceeds the mean of the `w` before them.
pub fn early_stop_check(history: &[f64], w: usize) -> bool {
    let n = history.len();
    if w == 0 || n < 2 * w {
        return false;
    }
    let recent: f64 = history[n - w..].iter().sum::<f64>() / w as f64;
    let previous: f64 = history[n - 2 * w..n - w].iter().sum::<f64>() / w as f64;
    recent > previous
}
