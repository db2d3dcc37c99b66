//! Langevin steps, the CG data-consistency update, baselines, and the
//! SURE-tuned reconstruction loop.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, SmrdError};
use crate::forward::ForwardModel;
use crate::metrics;
use crate::numerics::{inner_unchecked, CoilStack, ComplexImage};
use crate::prior::ScorePrior;
use crate::rng;
use crate::sure::{
    draw_probes, early_stop_check, grad_sure_lambda_with_probes, sure_with_probes, update_lambda, EarlyStopConfig,
    SureConfig, TttConfig, TttState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// AM-Langevin with SURE-tuned λ and SURE early stopping.
    Smrd,
    /// AM-Langevin with λ fixed at `lambda0`, no early stopping.
    AmFixed,
    /// Posterior-score Langevin, no inner solve.
    Csgm,
    /// `Csgm` with SURE early stopping.
    CsgmEs,
    /// `A^H y`.
    ZeroFilled,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::ZeroFilled,
        Method::Csgm,
        Method::CsgmEs,
        Method::AmFixed,
        Method::Smrd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Smrd => "smrd",
            Method::AmFixed => "am_fixed",
            Method::Csgm => "csgm",
            Method::CsgmEs => "csgm_es",
            Method::ZeroFilled => "zero_filled",
        }
    }

    fn uses_early_stop(self) -> bool {
        matches!(self, Method::Smrd | Method::CsgmEs)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = SmrdError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| SmrdError::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub total_steps: usize,
    pub cg_iters: usize,
    pub seed: u64,
    pub method: Method,
    /// Weight of the data-consistency gradient in the csgm baselines.
    pub dc_weight: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            total_steps: 300,
            cg_iters: 5,
            seed: 0,
            method: Method::Smrd,
            dc_weight: 1.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 || self.cg_iters == 0 {
            return Err(SmrdError::InvalidParameter(
                "total steps and CG iterations must be >= 1".into(),
            ));
        }
        if !(self.dc_weight >= 0.0) || !self.dc_weight.is_finite() {
            return Err(SmrdError::InvalidParameter(format!(
                "dc weight must be >= 0, got {}",
                self.dc_weight
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub sure: f64,
    pub lambda: f64,
    pub mse: Option<f64>,
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconReport {
    pub method: Method,
    pub final_image: ComplexImage,
    /// Steps executed; equals `T` unless early stopping fired.
    pub t_es: usize,
    pub trace: Vec<TraceRow>,
    /// λ in effect at the end of the run, for the AM methods.
    pub final_lambda: Option<f64>,
}

impl ReconReport {
    /// CSV with header `t,sure,lambda,mse,psnr`; missing values are left empty.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,sure,lambda,mse,psnr\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t,
                r.sure,
                r.lambda,
                opt(r.mse),
                opt(r.psnr)
            ));
        }
        out
    }
}

/// `x + η·score + √(2η)·ζ` with explicit step size and noise.
pub fn langevin_update(x: &ComplexImage, score: &ComplexImage, eta: f64, zeta: &ComplexImage) -> Result<ComplexImage> {
    x.check_shape(score)?;
    x.check_shape(zeta)?;
    let mut out = x.clone();
    out.axpy_real(eta, score);
    out.axpy_real((2.0 * eta).sqrt(), zeta);
    Ok(out)
}

/// Unit-variance (per real/imaginary part) Langevin noise.
pub fn langevin_noise<R: Rng + ?Sized>(shape: (usize, usize), rng: &mut R) -> ComplexImage {
    rng::complex_normal(shape.0, shape.1, 1.0, rng)
}

/// One annealed Langevin step on the prior alone.
pub fn langevin_step<R: Rng + ?Sized>(x: &ComplexImage, prior: &ScorePrior, t: usize, rng: &mut R) -> Result<ComplexImage> {
    let eta = prior.eta(t)?;
    let score = prior.score(x, t)?;
    langevin_update(x, &score, eta, &langevin_noise(x.shape(), rng))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(SmrdError::InvalidParameter(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// Solves `(A^H A + λI) z = x_zf + λ x_plus` from `z₀ = x_plus`, returning the
/// iterate and the residual norm before each iteration and after the last.
///
/// Uses the conjugate-residual form of CG: same Krylov space and cost (one
/// operator application per iteration), exact after `N` steps, but each step
/// minimizes `‖r‖`, so the residual history is monotone. Stops early once the
/// residual is at rounding level.
pub fn cg_solve_traced(
    fm: &ForwardModel,
    lambda: f64,
    x_zf: &ComplexImage,
    x_plus: &ComplexImage,
    iters: usize,
) -> Result<(ComplexImage, Vec<f64>)> {
    check_lambda(lambda)?;
    x_zf.check_shape(x_plus)?;
    let apply = |v: &ComplexImage| -> Result<ComplexImage> {
        let mut out = fm.normal(v)?;
        out.axpy_real(lambda, v);
        Ok(out)
    };
    let mut b = x_zf.clone();
    b.axpy_real(lambda, x_plus);
    let floor = (1e-15 * b.norm()).powi(2);

    let mut z = x_plus.clone();
    let mut r = b;
    r.axpy_real(-1.0, &apply(&z)?);
    let mut ar = apply(&r)?;
    let mut p = r.clone();
    let mut ap = ar.clone();
    let mut rar = inner_unchecked(&r, &ar).re;
    let mut history = vec![r.norm()];
    for k in 0..iters {
        if r.norm_sqr() <= floor {
            break;
        }
        let apap = ap.norm_sqr();
        if !(rar > 0.0) || !(apap > 0.0) {
            return Err(SmrdError::Numerical(format!("CG curvature {rar} is not positive")));
        }
        let alpha = rar / apap;
        z.axpy_real(alpha, &p);
        r.axpy_real(-alpha, &ap);
        history.push(r.norm());
        if k + 1 == iters {
            break;
        }
        ar = apply(&r)?;
        let rar_next = inner_unchecked(&r, &ar).re;
        let beta = rar_next / rar;
        rar = rar_next;
        for (pi, &ri) in p.data_mut().iter_mut().zip(r.data()) {
            *pi = ri + *pi * beta;
        }
        for (qi, &ai) in ap.data_mut().iter_mut().zip(ar.data()) {
            *qi = ai + *qi * beta;
        }
    }
    if !z.is_finite() {
        return Err(SmrdError::Numerical("CG produced non-finite values".into()));
    }
    Ok((z, history))
}

/// `h = (A^H A + λI)^{-1}(x_zf + λ x_plus)`, approximated by `iters` CG steps.
pub fn cg_solve(fm: &ForwardModel, lambda: f64, x_zf: &ComplexImage, x_plus: &ComplexImage, iters: usize) -> Result<ComplexImage> {
    cg_solve_traced(fm, lambda, x_zf, x_plus, iters).map(|(z, _)| z)
}

/// Data-consistency update from raw measurements.
pub fn am_update(fm: &ForwardModel, y: &CoilStack, x_plus: &ComplexImage, lambda: f64, cg_iters: usize) -> Result<ComplexImage> {
    cg_solve(fm, lambda, &fm.apply_adjoint(y)?, x_plus, cg_iters)
}

/// `x + η(score + w·(x_zf − A^H A x)) + √(2η)ζ`, the csgm update written in
/// terms of the zero-filled image so it can be perturbed for SURE.
fn csgm_update(
    fm: &ForwardModel,
    x: &ComplexImage,
    score: &ComplexImage,
    x_zf: &ComplexImage,
    eta: f64,
    dc_weight: f64,
    zeta: &ComplexImage,
) -> Result<ComplexImage> {
    let mut grad = score.clone();
    if dc_weight != 0.0 {
        let mut dc = x_zf.clone();
        dc.axpy_real(-1.0, &fm.normal(x)?);
        grad.axpy_real(dc_weight, &dc);
    }
    langevin_update(x, &grad, eta, zeta)
}

/// Posterior-score Langevin step with score `f(x) + w·A^H(y − Ax)`.
pub fn csgm_step<R: Rng + ?Sized>(
    x: &ComplexImage,
    prior: &ScorePrior,
    fm: &ForwardModel,
    y: &CoilStack,
    t: usize,
    rng: &mut R,
    dc_weight: f64,
) -> Result<ComplexImage> {
    let eta = prior.eta(t)?;
    let score = prior.score(x, t)?;
    let zeta = langevin_noise(x.shape(), rng);
    let mut grad = score;
    if dc_weight != 0.0 {
        let residual = fm.apply_adjoint(y)?.sub(&fm.normal(x)?)?;
        grad.axpy(Complex64::new(dc_weight, 0.0), &residual);
    }
    langevin_update(x, &grad, eta, &zeta)
}

/// Runs the configured method. Randomness comes from sub-streams of
/// `sampler.seed` ("init", "langevin", "probe"); `truth` enables MSE/PSNR columns.
#[allow(clippy::too_many_arguments)]
pub fn run_reconstruction(
    y: &CoilStack,
    fm: &ForwardModel,
    prior: &ScorePrior,
    sampler: &SamplerConfig,
    ttt: &TttConfig,
    es: &EarlyStopConfig,
    sure_cfg: &SureConfig,
    truth: Option<&ComplexImage>,
) -> Result<ReconReport> {
    sampler.validate()?;
    sure_cfg.validate()?;
    let x_zf = fm.apply_adjoint(y)?;
    if let Some(gt) = truth {
        gt.check_shape(&x_zf)?;
    }
    let method = sampler.method;
    if method == Method::ZeroFilled {
        return Ok(ReconReport {
            method,
            final_image: x_zf,
            t_es: 0,
            trace: Vec::new(),
            final_lambda: None,
        });
    }
    let total = sampler.total_steps;
    if prior.schedule().total_steps() < total {
        return Err(SmrdError::InvalidParameter(format!(
            "prior schedule covers {} steps, sampler needs {total}",
            prior.schedule().total_steps()
        )));
    }
    let shape = x_zf.shape();
    let iters = sampler.cg_iters;
    let mut init_rng = rng::stream(sampler.seed, "init");
    let mut noise_rng = rng::stream(sampler.seed, "langevin");
    let mut probe_rng = rng::stream(sampler.seed, "probe");

    let mut x = rng::complex_normal(shape.0, shape.1, 1.0, &mut init_rng);
    let mut state = TttState::new(ttt, total)?;
    let mut trace = Vec::with_capacity(total);
    let mut t_es = total;

    for t in 0..total {
        let eta = prior.eta(t)?;
        let score = prior.score(&x, t)?;
        let zeta = langevin_noise(shape, &mut noise_rng);
        let probes = draw_probes(shape, sure_cfg.probes, &mut probe_rng);
        let lambda = state.lambda;

        let (next, sure) = match method {
            Method::Smrd | Method::AmFixed => {
                let x_plus = langevin_update(&x, &score, eta, &zeta)?;
                let mut h = |v: &ComplexImage| cg_solve(fm, lambda, v, &x_plus, iters);
                let next = h(&x_zf)?;
                let sure = sure_with_probes(&mut h, &x_zf, &next, &x_zf, &probes, sure_cfg)?;
                if method == Method::Smrd && !state.is_frozen(t) {
                    let g = grad_sure_lambda_with_probes(
                        |v, l| cg_solve(fm, l, v, &x_plus, iters),
                        &x_zf,
                        &x_zf,
                        lambda,
                        &probes,
                        sure_cfg,
                        ttt,
                    )?;
                    update_lambda(&mut state, g, ttt, t)?;
                }
                (next, sure)
            }
            Method::Csgm | Method::CsgmEs => {
                let w = sampler.dc_weight;
                let mut h = |v: &ComplexImage| csgm_update(fm, &x, &score, v, eta, w, &zeta);
                let next = h(&x_zf)?;
                let sure = sure_with_probes(&mut h, &x_zf, &next, &x_zf, &probes, sure_cfg)?;
                (next, sure)
            }
            Method::ZeroFilled => unreachable!(),
        };
        if !next.is_finite() || !sure.is_finite() {
            return Err(SmrdError::Numerical(format!("non-finite state at step {t}")));
        }
        x = next;

        let (mse, psnr) = match truth {
            Some(gt) => (Some(metrics::mse(gt, &x)?), Some(metrics::psnr(gt, &x)?)),
            None => (None, None),
        };
        trace.push(TraceRow {
            t,
            sure,
            lambda,
            mse,
            psnr,
        });
        state.history.push(sure);
        if method.uses_early_stop() && early_stop_check(&state.history, es.window) {
            state.stopped = true;
            t_es = t + 1;
            state.t_es = Some(t_es);
            break;
        }
    }

    let final_lambda = matches!(method, Method::Smrd | Method::AmFixed).then_some(state.lambda);
    Ok(ReconReport {
        method,
        final_image: x,
        t_es,
        trace,
        final_lambda,
    })
}
