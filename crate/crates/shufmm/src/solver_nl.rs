//! Shuffling proximal gradient method for the smoothed nonconvex-linear problem,
//! its step-size calculator, and a compositional SGD baseline.

use crate::error::{check_dim, Error, Result};
use crate::estimators::{
    estimate_f_option1, estimate_f_option2, hyper_gradient_nl, sample_permutations, Option1State,
    PermutationMode, SeedStream, StreamRole,
};
use crate::linalg::{self, DenseVec};
use crate::metrics::{grad_mapping_w, select_output, OutputRule};
use crate::problem::{psi_gamma, regularizer_value, smoothed_eval, DerivedNL, ProblemNL};
use crate::prox::{smoothed_conjugate, SmoothingSpec};
use rand::Rng;
use std::time::{Duration, Instant};

/// Learning rate: explicit or from the convergence theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    Auto,
}

/// Epoch budget: explicit or from the convergence theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Epochs {
    Fixed(usize),
    Auto,
}

/// Smoothing parameter per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSchedule {
    Constant(f64),
    /// `γ_t = 1 / (2 (t + 1)^{1/3})`.
    Decreasing,
}

impl GammaSchedule {
    pub fn at(&self, epoch: usize) -> f64 {
        match *self {
            GammaSchedule::Constant(g) => g,
            GammaSchedule::Decreasing => 0.5 / ((epoch + 1) as f64).cbrt(),
        }
    }
}

/// Function-value estimator used inside an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorOption {
    /// Incremental mix of fresh and epoch-start evaluations: `2n` evaluations per epoch.
    One,
    /// Full `F(w_0)` reused across the epoch: `n` evaluations per epoch.
    Two,
}

/// Permutation regime assumed by the step-size theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutoMode {
    Deterministic,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigNL {
    pub eta: StepSize,
    pub epochs: Epochs,
    pub epsilon: f64,
    pub gamma: GammaSchedule,
    pub option: EstimatorOption,
    pub permutation: PermutationMode,
    pub seed: u64,
    /// Prox-center `ū` of the smoothing; zero when absent.
    pub anchor: Option<DenseVec>,
    /// Evaluate `Ψ_γ(w̃_t)` every epoch.
    pub evaluate_objective: bool,
    /// Stop once `‖G_η(w̃_t)‖` falls to this level.
    pub target_grad_norm: Option<f64>,
    pub output_rule: OutputRule,
}

impl Default for ConfigNL {
    fn default() -> Self {
        Self {
            eta: StepSize::Auto,
            epochs: Epochs::Auto,
            epsilon: 0.1,
            gamma: GammaSchedule::Decreasing,
            option: EstimatorOption::One,
            permutation: PermutationMode::RandomIndependent,
            seed: 0,
            anchor: None,
            evaluate_objective: true,
            target_grad_norm: None,
            output_rule: OutputRule::Argmin,
        }
    }
}

/// One trace row: epoch `0` is the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecordNL {
    pub epoch: usize,
    /// `Ψ_γ(w̃_t)`; NaN when not evaluated.
    pub psi_gamma: f64,
    pub grad_map_norm: f64,
    pub gamma: f64,
    pub eta: f64,
    /// `(1/n) Σ_i ‖w_{i−1} − w_0‖²` over the epoch's inner iterates.
    pub inner_drift: f64,
    /// `‖w̃_t − w̃_{t−1}‖²`.
    pub step_sq: f64,
    pub f_evals: u64,
    pub jac_evals: u64,
    pub wall: Duration,
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    TargetReached,
    NonFinite { epoch: usize, context: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunNL {
    pub w_final: DenseVec,
    /// Iterate selected by the output rule.
    pub w_output: DenseVec,
    pub output_epoch: usize,
    pub trace: Vec<EpochRecordNL>,
    pub eta: f64,
    pub epochs: usize,
    /// Set when the theorem's step size exceeded its cap.
    pub eta_capped: bool,
    pub termination: Termination,
}

/// Step size and epoch count from the convergence theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoParamsNL {
    pub eta: f64,
    pub epochs: usize,
    pub capped: bool,
}

/// Theorem formulas given `Q_γ`, `A = 4M_h²‖K‖²σ_J² + Λ_1` (split as its two terms) and
/// `gap = Ψ_0(w̃_0) − Ψ_0⋆ + γB_φ0`.
pub fn auto_params_from_constants(
    q_gamma: f64,
    variance_term: f64,
    lambda1: f64,
    gap: f64,
    epsilon: f64,
    mode: AutoMode,
    n: usize,
) -> Result<AutoParamsNL> {
    if !(epsilon > 0.0) || !(q_gamma > 0.0) || !q_gamma.is_finite() {
        return Err(Error::InvalidParameter(
            "epsilon and Q_gamma must be positive and finite".into(),
        ));
    }
    if !(gap >= 0.0) || !gap.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "objective gap must be finite and non-negative, got {gap}"
        )));
    }
    let n = n as f64;
    let (noise, scale) = match mode {
        AutoMode::Deterministic => (variance_term + lambda1, 1.0),
        AutoMode::Random => (variance_term + n * lambda1, n.sqrt()),
    };
    let cap = 1.0 / (8.0 * q_gamma);
    let raw = if noise > 0.0 {
        scale * epsilon / (2.0 * q_gamma * noise).sqrt()
    } else {
        f64::INFINITY
    };
    let capped = raw > cap;
    let eta = raw.min(cap);
    let cubic = (q_gamma * noise).sqrt() / (scale * epsilon.powi(3));
    let quadratic = 4.0 * q_gamma / (epsilon * epsilon);
    let epochs = (16.0 * cubic.max(quadratic) * gap * (1.0 + 8.0 * f64::EPSILON)).floor();
    if !epochs.is_finite() || epochs > usize::MAX as f64 {
        return Err(Error::InvalidParameter("epoch count overflows".into()));
    }
    Ok(AutoParamsNL {
        eta,
        epochs: epochs as usize,
        capped,
    })
}

/// Step size and epoch count for `prob` at smoothing `s` from the starting point `w0`.
pub fn auto_params_nl(
    prob: &dyn ProblemNL,
    s: &SmoothingSpec,
    w0: &[f64],
    epsilon: f64,
    mode: AutoMode,
) -> Result<AutoParamsNL> {
    let c = prob.constants();
    let d = DerivedNL::new(prob, s.gamma)?;
    let variance = 4.0 * d.m_h * d.m_h * d.k_norm * d.k_norm * c.sigma_j * c.sigma_j;
    let variance = if c.sigma_j == 0.0 { 0.0 } else { variance };
    let psi0 = match psi_gamma(prob, w0, &s.with_gamma(0.0)) {
        Ok(v) => v,
        Err(Error::NonSmoothConjugate) => psi_gamma(prob, w0, s)? + s.gamma * s.b_sup,
        Err(e) => return Err(e),
    };
    let smoothing_gap = if s.gamma == 0.0 {
        0.0
    } else {
        s.gamma * s.b_sup
    };
    let gap = (psi0 - c.psi0_lower_bound + smoothing_gap).max(0.0);
    auto_params_from_constants(d.q_gamma, variance, c.lambda1, gap, epsilon, mode, prob.n())
}

fn resolve_params(
    prob: &dyn ProblemNL,
    w0: &[f64],
    cfg: &ConfigNL,
    anchor: &[f64],
) -> Result<(f64, usize, bool)> {
    let needs_auto = matches!(cfg.eta, StepSize::Auto) || matches!(cfg.epochs, Epochs::Auto);
    let auto = if needs_auto {
        let s = SmoothingSpec::new(cfg.gamma.at(0), anchor.to_vec(), prob.h())?;
        let mode = match cfg.permutation {
            PermutationMode::RandomIndependent => AutoMode::Random,
            _ => AutoMode::Deterministic,
        };
        Some(auto_params_nl(prob, &s, w0, cfg.epsilon, mode)?)
    } else {
        None
    };
    let (eta, capped) = match (cfg.eta, auto) {
        (StepSize::Fixed(e), _) => (e, false),
        (StepSize::Auto, Some(a)) => (a.eta, a.capped),
        (StepSize::Auto, None) => unreachable!(),
    };
    let epochs = match (cfg.epochs, auto) {
        (Epochs::Fixed(t), _) => t,
        (Epochs::Auto, Some(a)) => a.epochs,
        (Epochs::Auto, None) => unreachable!(),
    };
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eta must be non-negative, got {eta}"
        )));
    }
    Ok((eta, epochs, capped))
}

fn check_gamma(prob: &dyn ProblemNL, gamma: &GammaSchedule) -> Result<()> {
    let positive = match gamma {
        GammaSchedule::Constant(g) => *g > 0.0,
        GammaSchedule::Decreasing => true,
    };
    if !positive && !(prob.h().strong_convexity() > 0.0) {
        return Err(Error::NonSmoothConjugate);
    }
    Ok(())
}

struct Recorder<'a> {
    prob: &'a dyn ProblemNL,
    anchor: DenseVec,
    evaluate_objective: bool,
    start: Instant,
    trace: Vec<EpochRecordNL>,
    iterates: Vec<DenseVec>,
}

impl Recorder<'_> {
    /// Appends the row for `w̃_t` and returns its gradient-mapping norm.
    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        epoch: usize,
        w: &[f64],
        gamma: f64,
        eta: f64,
        inner_drift: f64,
        step_sq: f64,
        f_evals: u64,
        jac_evals: u64,
    ) -> Result<f64> {
        let s = SmoothingSpec::new(gamma, self.anchor.clone(), self.prob.h())?;
        let eval = smoothed_eval(self.prob, w, &s)?;
        let psi = if self.evaluate_objective {
            regularizer_value(self.prob.f(), w)? + eval.phi
        } else {
            f64::NAN
        };
        let norm = if eta > 0.0 {
            linalg::norm(&grad_mapping_w(w, &eval.grad, self.prob.f(), eta)?)
        } else {
            f64::NAN
        };
        self.trace.push(EpochRecordNL {
            epoch,
            psi_gamma: psi,
            grad_map_norm: norm,
            gamma,
            eta,
            inner_drift,
            step_sq,
            f_evals,
            jac_evals,
            wall: self.start.elapsed(),
        });
        self.iterates.push(w.to_vec());
        Ok(norm)
    }

    fn finish(
        self,
        w: DenseVec,
        eta: f64,
        epochs: usize,
        capped: bool,
        termination: Termination,
        rule: OutputRule,
        seed: u64,
    ) -> Result<RunNL> {
        let norms: Vec<f64> = self.trace.iter().map(|r| r.grad_map_norm).collect();
        let output_epoch = select_output(&norms, rule, &SeedStream::new(seed))?;
        Ok(RunNL {
            w_output: self.iterates[output_epoch].clone(),
            output_epoch,
            w_final: w,
            trace: self.trace,
            eta,
            epochs,
            eta_capped: capped,
            termination,
        })
    }
}

/// Finite entries with a finite squared norm.
fn healthy(v: &[f64]) -> bool {
    linalg::norm_sq(v).is_finite()
}

fn reached(target: Option<f64>, norm: f64) -> bool {
    target.is_some_and(|t| norm <= t)
}

/// Runs the shuffling proximal gradient method from `w0`.
pub fn solve_nl(prob: &dyn ProblemNL, w0: &[f64], cfg: &ConfigNL) -> Result<RunNL> {
    check_dim(prob.p(), w0.len())?;
    check_gamma(prob, &cfg.gamma)?;
    let n = prob.n();
    let anchor = cfg
        .anchor
        .clone()
        .unwrap_or_else(|| vec![0.0; prob.coupling().domain_dim()]);
    check_dim(prob.coupling().domain_dim(), anchor.len())?;
    let (eta, epochs, capped) = resolve_params(prob, w0, cfg, &anchor)?;
    let stream = SeedStream::new(cfg.seed);
    let mut rec = Recorder {
        prob,
        anchor: anchor.clone(),
        evaluate_objective: cfg.evaluate_objective,
        start: Instant::now(),
        trace: Vec::with_capacity(epochs.min(1 << 20) + 1),
        iterates: Vec::new(),
    };
    let mut w_tilde = w0.to_vec();
    let (mut f_evals, mut jac_evals) = (0u64, 0u64);
    let norm0 = rec.record(0, &w_tilde, cfg.gamma.at(0), eta, 0.0, 0.0, 0, 0)?;
    if reached(cfg.target_grad_norm, norm0) {
        return rec.finish(
            w_tilde,
            eta,
            epochs,
            capped,
            Termination::TargetReached,
            cfg.output_rule,
            cfg.seed,
        );
    }
    let step = eta / n as f64;
    for t in 1..=epochs {
        let gamma = cfg.gamma.at(t);
        let s = SmoothingSpec::new(gamma, anchor.clone(), prob.h())?;
        let perms = sample_permutations(n, &cfg.permutation, &stream, t)?;
        let w_start = w_tilde.clone();
        let mut w = w_tilde.clone();
        let mut drift = 0.0;
        let mut option1 = None;
        let mut fixed_estimate = None;
        match cfg.option {
            EstimatorOption::One => {
                option1 = Some(Option1State::initialize(prob, &perms.pi, &w_start)?);
                f_evals += n as u64;
            }
            EstimatorOption::Two => {
                fixed_estimate = Some(estimate_f_option2(prob, &w_start)?);
                f_evals += n as u64;
            }
        }
        for i in 0..n {
            drift += linalg::dist_sq(&w, &w_start);
            let f_est = match (&mut option1, &fixed_estimate) {
                (Some(state), _) => {
                    let fresh = prob.eval_f(perms.pi[i], &w);
                    f_evals += 1;
                    estimate_f_option1(state, &fresh)?
                }
                (None, Some(fixed)) => fixed.clone(),
                (None, None) => unreachable!(),
            };
            if !healthy(&f_est) {
                let termination = Termination::NonFinite {
                    epoch: t,
                    context: format!("estimate at inner step {}", i + 1),
                };
                return rec.finish(
                    w_tilde,
                    eta,
                    epochs,
                    capped,
                    termination,
                    cfg.output_rule,
                    cfg.seed,
                );
            }
            let g = hyper_gradient_nl(prob, perms.pi_hat[i], &w, &f_est, &s)?;
            jac_evals += 1;
            linalg::add_scaled(&mut w, -step, &g);
            if !healthy(&w) {
                let termination = Termination::NonFinite {
                    epoch: t,
                    context: format!("inner step {}", i + 1),
                };
                return rec.finish(
                    w_tilde,
                    eta,
                    epochs,
                    capped,
                    termination,
                    cfg.output_rule,
                    cfg.seed,
                );
            }
        }
        w_tilde = prob.f().prox(&w, eta);
        if !healthy(&w_tilde) {
            let termination = Termination::NonFinite {
                epoch: t,
                context: "prox step".into(),
            };
            return rec.finish(
                w_start,
                eta,
                epochs,
                capped,
                termination,
                cfg.output_rule,
                cfg.seed,
            );
        }
        let step_sq = linalg::dist_sq(&w_tilde, &w_start);
        let norm = rec.record(
            t,
            &w_tilde,
            gamma,
            eta,
            drift / n as f64,
            step_sq,
            f_evals,
            jac_evals,
        )?;
        if !norm.is_finite() && eta > 0.0 {
            let termination = Termination::NonFinite {
                epoch: t,
                context: "gradient mapping".into(),
            };
            return rec.finish(
                w_tilde,
                eta,
                epochs,
                capped,
                termination,
                cfg.output_rule,
                cfg.seed,
            );
        }
        if reached(cfg.target_grad_norm, norm) {
            return rec.finish(
                w_tilde,
                eta,
                epochs,
                capped,
                Termination::TargetReached,
                cfg.output_rule,
                cfg.seed,
            );
        }
    }
    rec.finish(
        w_tilde,
        eta,
        epochs,
        capped,
        Termination::Completed,
        cfg.output_rule,
        cfg.seed,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSgd {
    pub eta: f64,
    pub epochs: usize,
    pub gamma: GammaSchedule,
    /// Weight `β` of the running estimate `y ← (1 − β) y + β F_j(w)`.
    pub tracking_weight: f64,
    pub seed: u64,
    pub anchor: Option<DenseVec>,
    pub evaluate_objective: bool,
    pub target_grad_norm: Option<f64>,
}

impl Default for ConfigSgd {
    fn default() -> Self {
        Self {
            eta: 0.1,
            epochs: 100,
            gamma: GammaSchedule::Decreasing,
            tracking_weight: 0.5,
            seed: 0,
            anchor: None,
            evaluate_objective: true,
            target_grad_norm: None,
        }
    }
}

/// Two-timescale compositional SGD on the smoothed problem with i.i.d. component sampling.
///
/// Each epoch performs `n` steps, each costing one function evaluation and one Jacobian product.
pub fn compositional_sgd_baseline(
    prob: &dyn ProblemNL,
    w0: &[f64],
    cfg: &ConfigSgd,
) -> Result<RunNL> {
    check_dim(prob.p(), w0.len())?;
    check_gamma(prob, &cfg.gamma)?;
    if !(cfg.tracking_weight > 0.0 && cfg.tracking_weight <= 1.0) {
        return Err(Error::InvalidParameter(
            "tracking weight must lie in (0, 1]".into(),
        ));
    }
    if !(cfg.eta >= 0.0) || !cfg.eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eta must be non-negative, got {}",
            cfg.eta
        )));
    }
    let n = prob.n();
    let anchor = cfg
        .anchor
        .clone()
        .unwrap_or_else(|| vec![0.0; prob.coupling().domain_dim()]);
    check_dim(prob.coupling().domain_dim(), anchor.len())?;
    let stream = SeedStream::new(cfg.seed);
    let mut rec = Recorder {
        prob,
        anchor: anchor.clone(),
        evaluate_objective: cfg.evaluate_objective,
        start: Instant::now(),
        trace: Vec::with_capacity(cfg.epochs + 1),
        iterates: Vec::new(),
    };
    let eta = cfg.eta;
    let step = eta / n as f64;
    let mut w = w0.to_vec();
    let mut tracker: Option<DenseVec> = None;
    let (mut f_evals, mut jac_evals) = (0u64, 0u64);
    let norm0 = rec.record(0, &w, cfg.gamma.at(0), eta, 0.0, 0.0, 0, 0)?;
    if reached(cfg.target_grad_norm, norm0) {
        return rec.finish(
            w,
            eta,
            cfg.epochs,
            false,
            Termination::TargetReached,
            OutputRule::Argmin,
            cfg.seed,
        );
    }
    for t in 1..=cfg.epochs {
        let gamma = cfg.gamma.at(t);
        let s = SmoothingSpec::new(gamma, anchor.clone(), prob.h())?;
        let mut rng = stream.rng(StreamRole::Sampling, t);
        let w_start = w.clone();
        let mut drift = 0.0;
        for i in 0..n {
            drift += linalg::dist_sq(&w, &w_start);
            let j = rng.random_range(0..n);
            let fresh = prob.eval_f(j, &w);
            if !healthy(&fresh) {
                let termination = Termination::NonFinite {
                    epoch: t,
                    context: format!("step {}", i + 1),
                };
                return rec.finish(
                    w_start,
                    eta,
                    cfg.epochs,
                    false,
                    termination,
                    OutputRule::Argmin,
                    cfg.seed,
                );
            }
            f_evals += 1;
            let y = match tracker.take() {
                None => fresh,
                Some(mut y) => {
                    y.iter_mut().for_each(|v| *v *= 1.0 - cfg.tracking_weight);
                    linalg::add_scaled(&mut y, cfg.tracking_weight, &fresh);
                    y
                }
            };
            let j_hat = rng.random_range(0..n);
            let conj = smoothed_conjugate(&y, prob.coupling(), prob.h(), &s)?;
            let g = prob.jt_vec(j_hat, &w, &prob.coupling().apply(&conj.u_star));
            jac_evals += 1;
            tracker = Some(y);
            let mut arg = w;
            linalg::add_scaled(&mut arg, -step, &g);
            w = prob.f().prox(&arg, step);
            if !healthy(&w) {
                let termination = Termination::NonFinite {
                    epoch: t,
                    context: format!("step {}", i + 1),
                };
                return rec.finish(
                    w_start,
                    eta,
                    cfg.epochs,
                    false,
                    termination,
                    OutputRule::Argmin,
                    cfg.seed,
                );
            }
        }
        let step_sq = linalg::dist_sq(&w, &w_start);
        let norm = rec.record(
            t,
            &w,
            gamma,
            eta,
            drift / n as f64,
            step_sq,
            f_evals,
            jac_evals,
        )?;
        if reached(cfg.target_grad_norm, norm) {
            return rec.finish(
                w,
                eta,
                cfg.epochs,
                false,
                Termination::TargetReached,
                OutputRule::Argmin,
                cfg.seed,
            );
        }
    }
    rec.finish(
        w,
        eta,
        cfg.epochs,
        false,
        Termination::Completed,
        OutputRule::Argmin,
        cfg.seed,
    )
}

/// Right-hand side of the per-epoch descent inequality
/// `Ψ_γ(w̃_t) ≤ Ψ_γ(w̃_{t−1}) − η(1 − 2L_Φγη)/2 ‖G‖² − (1 − L_Φγη)/(2η) ‖w̃_t − w̃_{t−1}‖² + (L_Ψ η / 2) · drift`
/// where `G = G_η(w̃_{t−1})` and `drift = (1/n) Σ ‖w_{i−1} − w_0‖²`.
pub fn descent_bound_exact(
    d: &DerivedNL,
    eta: f64,
    psi_prev: f64,
    grad_map_prev: f64,
    step_sq: f64,
    drift: f64,
) -> f64 {
    let l = d.l_phi_gamma;
    psi_prev
        - eta * (1.0 - 2.0 * l * eta) / 2.0 * grad_map_prev * grad_map_prev
        - (1.0 - l * eta) / (2.0 * eta) * step_sq
        + d.l_psi * eta / 2.0 * drift
}

/// Constant-noise form `Ψ_γ(w̃_{t−1}) − (η/4)‖G‖² + 2L_Ψ(2C_2σ_J² + Λ_1)η³`.
pub fn descent_bound_constant(
    d: &DerivedNL,
    sigma_j: f64,
    lambda1: f64,
    eta: f64,
    psi_prev: f64,
    grad_map_prev: f64,
) -> f64 {
    let noise = if sigma_j == 0.0 {
        0.0
    } else {
        2.0 * d.c2 * sigma_j * sigma_j
    };
    psi_prev - eta / 4.0 * grad_map_prev * grad_map_prev
        + 2.0 * d.l_psi * (noise + lambda1) * eta.powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;
    use crate::problem::{build_model_selection, build_sinusoidal_composite, full_jt_vec};

    fn fixed_cfg(eta: f64, epochs: usize) -> ConfigNL {
        ConfigNL {
            eta: StepSize::Fixed(eta),
            epochs: Epochs::Fixed(epochs),
            gamma: GammaSchedule::Constant(0.5),
            ..ConfigNL::default()
        }
    }

    #[test]
    fn gamma_schedule_values() {
        assert_eq!(GammaSchedule::Decreasing.at(0), 0.5);
        assert!((GammaSchedule::Decreasing.at(7) - 0.25).abs() < 1e-15);
        assert_eq!(GammaSchedule::Constant(0.2).at(99), 0.2);
    }

    #[test]
    fn auto_params_examples() {
        let p = auto_params_from_constants(1.0, 0.0, 2.0, 1.0, 0.1, AutoMode::Deterministic, 1)
            .unwrap();
        assert!((p.eta - 0.05).abs() < 1e-15);
        assert_eq!(p.epochs, 22627);
        assert!(!p.capped);
    }

    #[test]
    fn auto_params_degenerate_branch() {
        let q = 2.0;
        let eps = 0.1;
        let p =
            auto_params_from_constants(q, 0.0, 0.0, 1.5, eps, AutoMode::Deterministic, 4).unwrap();
        assert_eq!(p.eta, 1.0 / (8.0 * q));
        assert!(p.capped);
        assert_eq!(p.epochs, 19200);
    }

    #[test]
    fn auto_params_random_mode_scales_with_n() {
        let det = auto_params_from_constants(1.0, 4.0, 0.0, 1.0, 0.01, AutoMode::Deterministic, 16)
            .unwrap();
        let rnd =
            auto_params_from_constants(1.0, 4.0, 0.0, 1.0, 0.01, AutoMode::Random, 16).unwrap();
        assert!((rnd.eta / det.eta - 4.0).abs() < 1e-12);
        assert!(rnd.epochs < det.epochs);
        assert!(auto_params_from_constants(1.0, 1.0, 1.0, 1.0, 0.0, AutoMode::Random, 2).is_err());
    }

    #[test]
    fn zero_learning_rate_freezes_iterates() {
        let prob = build_sinusoidal_composite(3, 2, 2, 4, 1).unwrap();
        let w0 = [0.5, -0.5, 1.0];
        let run = solve_nl(&prob, &w0, &fixed_cfg(0.0, 3)).unwrap();
        assert_eq!(run.w_final, w0.to_vec());
        assert_eq!(run.trace.len(), 4);
    }

    #[test]
    fn single_component_reduces_to_gradient_descent() {
        let prob = build_sinusoidal_composite(3, 2, 2, 1, 4)
            .unwrap()
            .with_primal_weight(0.0)
            .unwrap();
        let w0 = vec![0.3, 0.1, -0.2];
        let eta = 0.05;
        let s = SmoothingSpec::new(0.5, vec![0.0; 2], prob.h()).unwrap();
        for option in [EstimatorOption::One, EstimatorOption::Two] {
            let mut w = w0.clone();
            for t in 1..=5 {
                let run = solve_nl(
                    &prob,
                    &w0,
                    &ConfigNL {
                        option,
                        ..fixed_cfg(eta, t)
                    },
                )
                .unwrap();
                let g = smoothed_eval(&prob, &w, &s).unwrap().grad;
                linalg::add_scaled(&mut w, -eta, &g);
                assert!(linalg::dist_sq(&run.w_final, &w).sqrt() < 1e-12);
            }
        }
    }

    #[test]
    fn evaluation_counts_per_epoch() {
        let prob = build_sinusoidal_composite(3, 2, 2, 7, 2).unwrap();
        for (option, per_epoch) in [(EstimatorOption::One, 14), (EstimatorOption::Two, 7)] {
            let run = solve_nl(
                &prob,
                &[0.0; 3],
                &ConfigNL {
                    option,
                    ..fixed_cfg(0.1, 4)
                },
            )
            .unwrap();
            for (k, r) in run.trace.iter().enumerate() {
                assert_eq!(r.f_evals, per_epoch * k as u64);
                assert_eq!(r.jac_evals, 7 * k as u64);
            }
        }
    }

    #[test]
    fn converges_to_full_gradient_reference() {
        let prob = build_sinusoidal_composite(2, 2, 2, 3, 6).unwrap();
        let eta = 0.2;
        let cfg = ConfigNL {
            option: EstimatorOption::One,
            ..fixed_cfg(eta, 3000)
        };
        let run = solve_nl(&prob, &[0.0; 2], &cfg).unwrap();
        assert!(run.trace.last().unwrap().grad_map_norm < 1e-3);
        let s = SmoothingSpec::new(0.5, vec![0.0; 2], prob.h()).unwrap();
        let mut w = vec![0.0; 2];
        for _ in 0..20000 {
            let g = smoothed_eval(&prob, &w, &s).unwrap().grad;
            let mut arg = w.clone();
            linalg::add_scaled(&mut arg, -eta, &g);
            w = prob.f().prox(&arg, eta);
        }
        assert!(linalg::dist_sq(&run.w_final, &w).sqrt() < 1e-2);
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let prob = build_sinusoidal_composite(3, 2, 2, 5, 3).unwrap();
        let cfg = ConfigNL {
            seed: 17,
            ..fixed_cfg(0.1, 5)
        };
        let a = solve_nl(&prob, &[0.1; 3], &cfg).unwrap();
        let b = solve_nl(&prob, &[0.1; 3], &cfg).unwrap();
        let strip = |r: &RunNL| {
            r.trace
                .iter()
                .map(|e| (e.psi_gamma.to_bits(), e.grad_map_norm.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.w_final, b.w_final);
    }

    #[test]
    fn early_stop_at_target() {
        let prob = build_sinusoidal_composite(2, 2, 2, 3, 6).unwrap();
        let cfg = ConfigNL {
            target_grad_norm: Some(1e-2),
            ..fixed_cfg(0.2, 100_000)
        };
        let run = solve_nl(&prob, &[0.0; 2], &cfg).unwrap();
        assert_eq!(run.termination, Termination::TargetReached);
        assert!(run.trace.last().unwrap().grad_map_norm <= 1e-2);
        assert!(run.trace.len() < 100_001);
    }

    #[test]
    fn divergence_is_reported() {
        let prob = build_sinusoidal_composite(2, 2, 2, 3, 6).unwrap();
        let run = solve_nl(&prob, &[0.0; 2], &fixed_cfg(1e300, 5)).unwrap();
        assert!(matches!(run.termination, Termination::NonFinite { .. }));
    }

    #[test]
    fn requires_smoothing_for_nonsmooth_conjugate() {
        let prob = build_sinusoidal_composite(2, 2, 2, 3, 6).unwrap();
        let cfg = ConfigNL {
            gamma: GammaSchedule::Constant(0.0),
            ..fixed_cfg(0.1, 1)
        };
        assert_eq!(
            solve_nl(&prob, &[0.0; 2], &cfg),
            Err(Error::NonSmoothConjugate)
        );
        let ridge = prob.with_ridge_dual(1.0).unwrap();
        assert!(solve_nl(&ridge, &[0.0; 2], &cfg).is_ok());
    }

    #[test]
    fn descent_inequality_holds_every_epoch() {
        let prob = build_sinusoidal_composite(3, 2, 2, 5, 9).unwrap();
        let gamma = 0.5;
        let d = DerivedNL::new(&prob, gamma).unwrap();
        let eta = 1.0 / (8.0 * d.q_gamma);
        for option in [EstimatorOption::One, EstimatorOption::Two] {
            let cfg = ConfigNL {
                option,
                permutation: PermutationMode::Identity,
                ..fixed_cfg(eta, 60)
            };
            let run = solve_nl(&prob, &[1.0, -1.0, 0.5], &cfg).unwrap();
            for pair in run.trace.windows(2) {
                let (prev, cur) = (&pair[0], &pair[1]);
                let bound = descent_bound_exact(
                    &d,
                    eta,
                    prev.psi_gamma,
                    prev.grad_map_norm,
                    cur.step_sq,
                    cur.inner_drift,
                );
                assert!(
                    cur.psi_gamma <= bound + 1e-12,
                    "epoch {}: {} > {}",
                    cur.epoch,
                    cur.psi_gamma,
                    bound
                );
            }
        }
    }

    #[test]
    fn sgd_zero_rate_and_single_component() {
        let prob = build_sinusoidal_composite(3, 2, 2, 4, 1).unwrap();
        let cfg = ConfigSgd {
            eta: 0.0,
            epochs: 3,
            gamma: GammaSchedule::Constant(0.5),
            ..ConfigSgd::default()
        };
        assert_eq!(
            compositional_sgd_baseline(&prob, &[0.2; 3], &cfg)
                .unwrap()
                .w_final,
            vec![0.2; 3]
        );

        let single = build_sinusoidal_composite(3, 2, 2, 1, 4)
            .unwrap()
            .with_primal_weight(0.0)
            .unwrap();
        let s = SmoothingSpec::new(0.5, vec![0.0; 2], single.h()).unwrap();
        let cfg = ConfigSgd {
            eta: 0.05,
            epochs: 6,
            tracking_weight: 1.0,
            gamma: GammaSchedule::Constant(0.5),
            ..ConfigSgd::default()
        };
        let run = compositional_sgd_baseline(&single, &[0.3, 0.1, -0.2], &cfg).unwrap();
        let mut w = vec![0.3, 0.1, -0.2];
        for _ in 0..6 {
            let g = smoothed_eval(&single, &w, &s).unwrap().grad;
            linalg::add_scaled(&mut w, -0.05, &g);
        }
        assert!(linalg::dist_sq(&run.w_final, &w).sqrt() < 1e-12);
        assert_eq!(run.trace.last().unwrap().f_evals, 6);
        assert_eq!(run.trace.last().unwrap().jac_evals, 6);
    }

    #[test]
    fn model_selection_gradient_is_consistent() {
        let ds = generate_synthetic(40, 4, 2, 0.3).unwrap();
        let prob = build_model_selection(ds, 0.01)
            .unwrap()
            .with_blocks(8)
            .unwrap();
        let s = SmoothingSpec::new(0.5, vec![0.0; 4], prob.h()).unwrap();
        let w = [0.1, 0.2, -0.3, 0.0];
        let e = smoothed_eval(&prob, &w, &s).unwrap();
        let direct = full_jt_vec(&prob, &w, &e.u_star);
        assert!(linalg::dist_sq(&direct, &e.grad).sqrt() < 1e-14);
    }
}
