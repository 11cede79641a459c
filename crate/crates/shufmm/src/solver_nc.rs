//! Alternating shuffling proximal gradient method for nonconvex-strongly-concave problems.
//!
//! Each outer epoch first approximates `u*_0(w̃_{t−1})` by `S` inner epochs of proximal
//! gradient ascent (semi-shuffling) or shuffling gradient ascent (full shuffling), then
//! runs one shuffling proximal gradient epoch in `w`.

use crate::error::{check_dim, Error, Result};
use crate::estimators::{
    hyper_gradient_nc, random_permutation, sample_permutations, PermutationMode, SeedStream,
    StreamRole,
};
use crate::linalg::{self, DenseVec};
use crate::metrics::{grad_mapping_nc, grad_mapping_u, select_output, OutputRule};
use crate::problem::{full_grad_u, lagrangian, u_star, DerivedNC, ProblemNC};
use crate::solver_nl::{Epochs, StepSize, Termination};
use std::time::{Duration, Instant};

/// Inner maximization routine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcVariant {
    /// Full-gradient proximal ascent in `u`.
    Semi,
    /// Shuffling proximal ascent in `u`.
    Full,
}

/// Parameter regime of the step-size calculator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcRegime {
    /// Gradient ascent inner loop.
    Semi,
    /// Shuffling inner loop with strongly concave `H_i`.
    FullMuH,
    /// Shuffling inner loop with strongly convex `h` and merely concave `H_i`.
    FullMuh,
    /// A single shuffling inner epoch.
    FullS1,
}

impl NcRegime {
    pub fn variant(self) -> NcVariant {
        match self {
            NcRegime::Semi => NcVariant::Semi,
            _ => NcVariant::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigNC {
    pub regime: NcRegime,
    pub eta: StepSize,
    pub eta_hat: StepSize,
    pub inner_epochs: Epochs,
    pub epochs: Epochs,
    pub epsilon: f64,
    pub permutation: PermutationMode,
    pub seed: u64,
    /// Weight `ω` of the semi-shuffling potential.
    pub omega: f64,
    /// Ratio `η̂ / (κ² η)` of the single-epoch regime.
    pub eta_hat_multiplier: f64,
    pub target_grad_norm: Option<f64>,
    pub output_rule: OutputRule,
    /// Keep `(w̃_t, ũ_t)` for every epoch.
    pub record_iterates: bool,
}

impl Default for ConfigNC {
    fn default() -> Self {
        Self {
            regime: NcRegime::Semi,
            eta: StepSize::Auto,
            eta_hat: StepSize::Auto,
            inner_epochs: Epochs::Auto,
            epochs: Epochs::Auto,
            epsilon: 0.1,
            permutation: PermutationMode::RandomIndependent,
            seed: 0,
            omega: 1.0,
            eta_hat_multiplier: 15.0,
            target_grad_norm: None,
            output_rule: OutputRule::Argmin,
            record_iterates: false,
        }
    }
}

/// Parameters of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcParams {
    pub eta: f64,
    pub eta_hat: f64,
    pub inner_epochs: usize,
    pub epochs: usize,
}

/// One trace row: epoch `0` is the starting pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecordNC {
    pub epoch: usize,
    /// `Ψ_0(w̃_t)` with an oracle, else the surrogate `L(w̃_t, ũ_t)`.
    pub objective: f64,
    pub objective_is_exact: bool,
    pub grad_map_norm_w: f64,
    /// `‖Ĝ_η̂(ũ_t)‖` at `w̃_t`.
    pub grad_map_norm_u: f64,
    /// `‖ũ_t − u*_0(w̃_{t−1})‖` when an oracle exists.
    pub u_gap: Option<f64>,
    /// `‖ũ_{t−1} − u*_0(w̃_{t−1})‖` when an oracle exists.
    pub u_gap_start: Option<f64>,
    pub gradw_evals: u64,
    pub gradu_evals: u64,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunNC {
    pub w_final: DenseVec,
    pub u_final: DenseVec,
    pub w_output: DenseVec,
    pub output_epoch: usize,
    pub trace: Vec<EpochRecordNC>,
    pub params: NcParams,
    pub termination: Termination,
    /// `(w̃_t, ũ_t)` per epoch when requested.
    pub iterates: Vec<(DenseVec, DenseVec)>,
}

/// Contraction factor `ρ = (1 − 2L_uμ_Hη̂/(L_u + μ_H)) / (1 + 2μ_hη̂)` of one gradient ascent step.
pub fn gradient_ascent_rate(l_u: f64, mu_coupling: f64, mu_h: f64, eta_hat: f64) -> f64 {
    (1.0 - 2.0 * l_u * mu_coupling * eta_hat / (l_u + mu_coupling)) / (1.0 + 2.0 * mu_h * eta_hat)
}

/// `S` proximal gradient ascent steps `û_s = prox_{η̂h}(û_{s−1} + η̂∇_u H(w, û_{s−1}))`.
pub fn inner_gradient_ascent(
    prob: &dyn ProblemNC,
    w: &[f64],
    u0: &[f64],
    eta_hat: f64,
    inner_epochs: usize,
) -> Result<DenseVec> {
    check_dim(prob.p(), w.len())?;
    check_dim(prob.q(), u0.len())?;
    let c = prob.constants();
    let limit = 2.0 / (c.l_u + c.mu_h_coupling);
    if !(eta_hat > 0.0 && eta_hat <= limit * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "eta_hat = {eta_hat} must lie in (0, {limit}]"
        )));
    }
    let mut u = u0.to_vec();
    for _ in 0..inner_epochs {
        let mut arg = u.clone();
        linalg::add_scaled(&mut arg, eta_hat, &full_grad_u(prob, w, &u));
        u = prob.h().prox(&arg, eta_hat);
        if !linalg::all_finite(&u) {
            return Err(Error::NonFinite {
                epoch: 0,
                context: "gradient ascent".into(),
            });
        }
    }
    Ok(u)
}

/// Inner permutation for epoch `s` of outer epoch `epoch`.
fn inner_permutation(
    n: usize,
    mode: &PermutationMode,
    stream: &SeedStream,
    epoch: usize,
    s: usize,
) -> Vec<usize> {
    match mode {
        PermutationMode::Identity => (0..n).collect(),
        PermutationMode::Fixed { pi, .. } => pi.clone(),
        _ => random_permutation(n, &mut stream.rng(StreamRole::InnerPerm(s), epoch)),
    }
}

/// `S` epochs of shuffling ascent `u_i = u_{i−1} + (η̂/n)∇_u H_{π(i)}(w, u_{i−1})`, each closed by `prox_{η̂h}`.
#[allow(clippy::too_many_arguments)]
pub fn inner_shuffling_ascent(
    prob: &dyn ProblemNC,
    w: &[f64],
    u0: &[f64],
    eta_hat: f64,
    inner_epochs: usize,
    mode: &PermutationMode,
    stream: &SeedStream,
    epoch: usize,
) -> Result<DenseVec> {
    check_dim(prob.p(), w.len())?;
    check_dim(prob.q(), u0.len())?;
    if !(eta_hat >= 0.0) || !eta_hat.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eta_hat must be non-negative, got {eta_hat}"
        )));
    }
    let n = prob.n();
    let step = eta_hat / n as f64;
    let mut u = u0.to_vec();
    for s in 0..inner_epochs {
        let perm = inner_permutation(n, mode, stream, epoch, s);
        for &j in &perm {
            let g = prob.grad_u(j, w, &u);
            linalg::add_scaled(&mut u, step, &g);
        }
        u = prob.h().prox(&u, eta_hat);
        if !linalg::all_finite(&u) {
            return Err(Error::NonFinite {
                epoch,
                context: format!("shuffling ascent epoch {}", s + 1),
            });
        }
    }
    Ok(u)
}

/// Geometric factor and additive term of the shuffling ascent bound
/// `‖ũ − u*‖² ≤ factor · ‖u_0 − u*‖² + additive`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShufflingBound {
    pub factor: f64,
    pub additive: f64,
}

/// Shuffling ascent bound after `S` epochs of `n` steps, where `anchor_grad_sq` bounds
/// the squared gradient norm entering the variance term.
#[allow(clippy::too_many_arguments)]
pub fn shuffling_ascent_bound(
    n: usize,
    inner_epochs: usize,
    eta_hat: f64,
    l_u: f64,
    mu_coupling: f64,
    mu_h: f64,
    theta_u: f64,
    sigma_u: f64,
    anchor_grad_sq: f64,
) -> ShufflingBound {
    let nf = n as f64;
    let prox_factor = 1.0 / (1.0 + 2.0 * mu_h * eta_hat);
    let step_factor = 1.0 - mu_coupling * eta_hat / nf;
    let factor =
        prox_factor.powi(inner_epochs as i32) * step_factor.powi((n * inner_epochs) as i32);
    let inner_sum: f64 = (0..n)
        .map(|j| prox_factor * step_factor.powi(j as i32))
        .sum();
    let outer_sum: f64 = (0..inner_epochs)
        .map(|s| prox_factor.powi(s as i32) * step_factor.powi((n * s) as i32))
        .sum();
    let c_s = inner_sum * outer_sum;
    let additive = 2.0 * l_u / nf
        * c_s
        * eta_hat.powi(3)
        * ((theta_u + 1.0) * anchor_grad_sq + sigma_u * sigma_u);
    ShufflingBound { factor, additive }
}

/// Inner epoch count `max(1, ⌊ln(7/2) / (μ η̂)⌋)` of the multi-epoch full-shuffling regimes.
pub fn inner_epochs_full(mu: f64, eta_hat: f64) -> usize {
    ((3.5f64.ln() / (mu * eta_hat)).floor() as usize).max(1)
}

/// `η̂ = multiplier · κ² · η` of the single-epoch regime.
pub fn eta_hat_single_epoch(kappa: f64, eta: f64, multiplier: f64) -> f64 {
    multiplier * kappa * kappa * eta
}

/// `M_ω(η) = 1/ω + (ω L_u² κ² + 2L_w²/ω) η²`.
pub fn m_omega(omega: f64, eta: f64, l_u: f64, kappa: f64, l_w: f64) -> f64 {
    1.0 / omega + (omega * l_u * l_u * kappa * kappa + 2.0 * l_w * l_w / omega) * eta * eta
}

/// `B_0 = η̂ (μ_h + 4μ_H L_u / (L_u + μ_H))`.
pub fn semi_contraction(eta_hat: f64, l_u: f64, mu_coupling: f64, mu_h: f64) -> f64 {
    eta_hat * (mu_h + 4.0 * mu_coupling * l_u / (l_u + mu_coupling))
}

/// Semi-shuffling inner steps `max(1, ⌊M_ω(η) / (2B_0)⌋)`.
pub fn inner_epochs_semi(m_omega: f64, b0: f64) -> usize {
    ((m_omega / (2.0 * b0)).floor() as usize).max(1)
}

/// Step sizes, inner and outer epoch counts for a regime, with the constants behind them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoParamsNC {
    pub params: NcParams,
    /// Per-epoch noise constants `(C_w, C_u)` of the regime's descent inequality.
    pub c_w: f64,
    pub c_u: f64,
    /// `⌈2M_ω/B_0⌉`, a larger inner count that also satisfies the ascent requirement (semi regime).
    pub conservative_inner_epochs: Option<usize>,
}

/// Largest step with `2Cη² ≤ ε²/16`.
fn noise_limit(c: f64, epsilon: f64) -> f64 {
    if c > 0.0 {
        epsilon / (4.0 * (2.0 * c).sqrt())
    } else {
        f64::INFINITY
    }
}

/// Smallest `T ≥ 1` with `numerator / (T + 1) ≤ slack`.
fn epochs_for(numerator: f64, slack: f64) -> Result<usize> {
    if !(slack > 0.0) {
        return Err(Error::InvalidParameter(
            "step size too large for the target accuracy".into(),
        ));
    }
    let t_plus_one = (numerator / slack).ceil();
    if !t_plus_one.is_finite() || t_plus_one > 1e15 {
        return Err(Error::InvalidParameter("epoch count overflows".into()));
    }
    Ok((t_plus_one as usize).saturating_sub(1).max(1))
}

/// Parameters from the convergence theorem of `regime`, for starting pair `(w0, u0)`.
pub fn auto_params_nc(
    prob: &dyn ProblemNC,
    w0: &[f64],
    u0: &[f64],
    regime: NcRegime,
    epsilon: f64,
    omega: f64,
    eta_hat_multiplier: f64,
) -> Result<AutoParamsNC> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let c = *prob.constants();
    let d = DerivedNC::new(prob)?;
    let mu_h = prob.h().strong_convexity();
    let (ustar0, _) = u_star(prob, w0, Some(1e-10))?;
    let psi0 = lagrangian(prob, w0, &ustar0)?;
    let gap = (psi0 - c.psi0_lower_bound).max(0.0);
    let d0 = linalg::dist_sq(u0, &ustar0);
    let (l_w, l_u, kappa) = (c.l_w, c.l_u, d.kappa);
    let n = prob.n() as f64;
    match regime {
        NcRegime::Semi => {
            if !(omega > 0.0) {
                return Err(Error::InvalidParameter("omega must be positive".into()));
            }
            let c0 = 2.0 * c.lambda0 * l_w * l_w * (3.0 * c.theta_w + 1.0);
            let c_w = l_w * l_w * (3.0 * c.theta_w + 1.0) * c.lambda1
                + 3.0 * l_w * l_w * c.sigma_w * c.sigma_w;
            let accuracy = if c_w > 0.0 {
                0.5 * epsilon / (4.0 * c_w.sqrt())
            } else {
                f64::INFINITY
            };
            let eta = 0.9
                * (1.0 / (2.0 * c0.sqrt()))
                    .min(1.0 / (4.0 * d.l_phi0))
                    .min(1.0 / (2.0 * omega * l_u * kappa))
                    .min(accuracy);
            let mut eta_hat = 2.0 / (l_u + c.mu_h_coupling);
            if mu_h > 0.0 {
                eta_hat = eta_hat.min(2.0 / (l_u + mu_h));
            }
            let b0 = semi_contraction(eta_hat, l_u, c.mu_h_coupling, mu_h);
            let m = m_omega(omega, eta, l_u, kappa, l_w);
            let inner = inner_epochs_semi(m, b0);
            let numerator = 4.0 * (2.0 * gap + omega * l_u * l_u * eta * d0);
            let epochs = epochs_for(numerator / eta, epsilon * epsilon - 8.0 * c_w * eta * eta)?;
            Ok(AutoParamsNC {
                params: NcParams {
                    eta,
                    eta_hat,
                    inner_epochs: inner,
                    epochs,
                },
                c_w,
                c_u: 0.0,
                conservative_inner_epochs: Some((2.0 * m / b0).ceil() as usize),
            })
        }
        NcRegime::FullMuH | NcRegime::FullMuh => {
            let c_w =
                l_w * l_w * ((3.0 * c.theta_w + 1.0) * c.lambda1 + 3.0 * c.sigma_w * c.sigma_w);
            let inner_noise = c.lambda1 * (c.theta_u + 1.0) + c.sigma_u * c.sigma_u;
            let cube = l_u.powi(3);
            let (mu, eta_hat_bar, c_u) = if regime == NcRegime::FullMuH {
                if !(c.mu_h_coupling > 0.0) {
                    return Err(Error::NoStrongConcavity);
                }
                let mu = c.mu_h_coupling;
                let bar = mu.sqrt() / (2.0 * (14.0 * c.lambda0 * cube * (c.theta_u + 1.0)).sqrt());
                (mu, bar, 7.0 * cube / (2.0 * mu) * inner_noise)
            } else {
                if !(mu_h > 0.0) {
                    return Err(Error::NoStrongConcavity);
                }
                let bar =
                    (n * mu_h).sqrt() / (2.0 * (7.0 * c.lambda0 * cube * (c.theta_u + 1.0)).sqrt());
                (mu_h, bar, 7.0 * cube / (4.0 * n * mu_h) * inner_noise)
            };
            let eta_bar = (1.0 / (4.0 * l_w * (2.0 * c.lambda0 * (c.theta_w + 1.0)).sqrt()))
                .min(1.0 / (4.0 * d.l_phi0))
                .min(1.0 / (2.0 * l_w))
                .min(1.0 / (2.0 * l_u * kappa));
            let eta = eta_bar.min(noise_limit(c_w, epsilon));
            let eta_hat = eta_hat_bar.min(noise_limit(c_u, epsilon)).min(n / l_u);
            let inner = inner_epochs_full(mu, eta_hat);
            let slack =
                epsilon * epsilon / 4.0 - 2.0 * c_w * eta * eta - 2.0 * c_u * eta_hat * eta_hat;
            let epochs = epochs_for(2.0 * gap / eta + l_u * l_u * d0, slack)?;
            Ok(AutoParamsNC {
                params: NcParams {
                    eta,
                    eta_hat,
                    inner_epochs: inner,
                    epochs,
                },
                c_w,
                c_u,
                conservative_inner_epochs: None,
            })
        }
        NcRegime::FullS1 => {
            let mu_psi = d.mu_psi;
            let c_w = 5.0
                * l_w
                * l_w
                * (c.lambda1 * (3.0 * c.theta_w + 1.0) + 3.0 * c.sigma_w * c.sigma_w);
            let c_u = l_u * l_u / 2.0
                * (c.lambda1_hat * (3.0 * c.theta_u + 2.0) + 3.0 * c.sigma_u * c.sigma_u);
            let k2 = kappa * kappa;
            let eta_bar = (1.0 / (60.0 * k2 * l_u))
                .min(1.0 / (10.0 * c.lambda0 * l_w * l_w * (3.0 * c.theta_w + 1.0)).sqrt())
                .min(
                    2.0 * l_u.sqrt()
                        / (kappa * (15.0 * (4.0 * l_u * l_u + mu_psi * mu_psi)).sqrt()),
                )
                .min(
                    l_u.sqrt()
                        / (15.0
                            * kappa
                            * (2.0 * l_u.powi(3) * c.lambda0_hat * (3.0 * c.theta_u + 2.0)
                                + mu_psi * mu_psi)
                                .sqrt()),
                )
                .min(1.0 / (4.0 * d.l_phi0 + l_w + c.l_f));
            let noise = c_w + eta_hat_multiplier.powi(3) * k2.powi(3) * c_u;
            let accuracy = if noise > 0.0 {
                epsilon / (4.0 * noise.sqrt())
            } else {
                f64::INFINITY
            };
            let eta = eta_bar.min(accuracy);
            let eta_hat = eta_hat_single_epoch(kappa, eta, eta_hat_multiplier);
            let surrogate_gap = (psi0 - lagrangian(prob, w0, u0)?).max(0.0);
            let numerator = 24.0 * gap + 8.0 * surrogate_gap;
            let epochs = epochs_for(numerator / eta, epsilon * epsilon - 8.0 * noise * eta * eta)?;
            Ok(AutoParamsNC {
                params: NcParams {
                    eta,
                    eta_hat,
                    inner_epochs: 1,
                    epochs,
                },
                c_w,
                c_u,
                conservative_inner_epochs: None,
            })
        }
    }
}

fn resolve(prob: &dyn ProblemNC, w0: &[f64], u0: &[f64], cfg: &ConfigNC) -> Result<NcParams> {
    let any_auto = matches!(cfg.eta, StepSize::Auto)
        || matches!(cfg.eta_hat, StepSize::Auto)
        || matches!(cfg.inner_epochs, Epochs::Auto)
        || matches!(cfg.epochs, Epochs::Auto);
    let auto = if any_auto {
        Some(
            auto_params_nc(
                prob,
                w0,
                u0,
                cfg.regime,
                cfg.epsilon,
                cfg.omega,
                cfg.eta_hat_multiplier,
            )?
            .params,
        )
    } else {
        None
    };
    let pick = |s: StepSize, a: Option<f64>| match s {
        StepSize::Fixed(v) => v,
        StepSize::Auto => a.expect("auto parameters computed"),
    };
    let count = |e: Epochs, a: Option<usize>| match e {
        Epochs::Fixed(v) => v,
        Epochs::Auto => a.expect("auto parameters computed"),
    };
    let params = NcParams {
        eta: pick(cfg.eta, auto.map(|a| a.eta)),
        eta_hat: pick(cfg.eta_hat, auto.map(|a| a.eta_hat)),
        inner_epochs: count(cfg.inner_epochs, auto.map(|a| a.inner_epochs)),
        epochs: count(cfg.epochs, auto.map(|a| a.epochs)),
    };
    if !(params.eta >= 0.0)
        || !params.eta.is_finite()
        || !(params.eta_hat > 0.0)
        || !params.eta_hat.is_finite()
    {
        return Err(Error::InvalidParameter(format!(
            "invalid step sizes {params:?}"
        )));
    }
    if cfg.regime == NcRegime::FullS1 && params.inner_epochs != 1 {
        return Err(Error::InvalidParameter(
            "single-epoch regime requires S = 1".into(),
        ));
    }
    Ok(params)
}

struct RecorderNC<'a> {
    prob: &'a dyn ProblemNC,
    params: NcParams,
    start: Instant,
    trace: Vec<EpochRecordNC>,
    outputs: Vec<DenseVec>,
    iterates: Vec<(DenseVec, DenseVec)>,
    record_iterates: bool,
}

impl RecorderNC<'_> {
    fn record(
        &mut self,
        epoch: usize,
        w: &[f64],
        u: &[f64],
        gaps: (Option<f64>, Option<f64>),
        counts: (u64, u64),
    ) -> Result<f64> {
        let eta_metric = if self.params.eta > 0.0 {
            self.params.eta
        } else {
            1.0
        };
        let report = grad_mapping_nc(self.prob, w, eta_metric)?;
        let (objective, exact) = match self.prob.exact_u_star(w) {
            Some(us) => (lagrangian(self.prob, w, &us)?, true),
            None => (lagrangian(self.prob, w, u)?, false),
        };
        let g_u = grad_mapping_u(
            u,
            &full_grad_u(self.prob, w, u),
            self.prob.h(),
            self.params.eta_hat,
        )?;
        self.trace.push(EpochRecordNC {
            epoch,
            objective,
            objective_is_exact: exact,
            grad_map_norm_w: report.norm_w,
            grad_map_norm_u: linalg::norm(&g_u),
            u_gap: gaps.0,
            u_gap_start: gaps.1,
            gradw_evals: counts.0,
            gradu_evals: counts.1,
            wall: self.start.elapsed(),
        });
        self.outputs.push(w.to_vec());
        if self.record_iterates {
            self.iterates.push((w.to_vec(), u.to_vec()));
        }
        Ok(report.norm_w)
    }

    fn finish(
        self,
        w: DenseVec,
        u: DenseVec,
        termination: Termination,
        rule: OutputRule,
        seed: u64,
    ) -> Result<RunNC> {
        let norms: Vec<f64> = self.trace.iter().map(|r| r.grad_map_norm_w).collect();
        let output_epoch = select_output(&norms, rule, &SeedStream::new(seed))?;
        Ok(RunNC {
            w_output: self.outputs[output_epoch].clone(),
            output_epoch,
            w_final: w,
            u_final: u,
            trace: self.trace,
            params: self.params,
            termination,
            iterates: self.iterates,
        })
    }
}

/// Runs the alternating shuffling method from `(w0, u0)`.
pub fn solve_nc(prob: &dyn ProblemNC, w0: &[f64], u0: &[f64], cfg: &ConfigNC) -> Result<RunNC> {
    check_dim(prob.p(), w0.len())?;
    check_dim(prob.q(), u0.len())?;
    DerivedNC::new(prob)?;
    let params = resolve(prob, w0, u0, cfg)?;
    let n = prob.n();
    let stream = SeedStream::new(cfg.seed);
    let mut rec = RecorderNC {
        prob,
        params,
        start: Instant::now(),
        trace: Vec::with_capacity(params.epochs.min(1 << 20) + 1),
        outputs: Vec::new(),
        iterates: Vec::new(),
        record_iterates: cfg.record_iterates,
    };
    let mut w_tilde = w0.to_vec();
    let mut u_tilde = u0.to_vec();
    let (mut gradw, mut gradu) = (0u64, 0u64);
    let norm0 = rec.record(0, &w_tilde, &u_tilde, (None, None), (0, 0))?;
    if cfg.target_grad_norm.is_some_and(|t| norm0 <= t) {
        return rec.finish(
            w_tilde,
            u_tilde,
            Termination::TargetReached,
            cfg.output_rule,
            cfg.seed,
        );
    }
    let step = params.eta / n as f64;
    for t in 1..=params.epochs {
        let exact = prob.exact_u_star(&w_tilde);
        let gap_start = exact
            .as_ref()
            .map(|us| linalg::dist_sq(&u_tilde, us).sqrt());
        let inner = match cfg.regime.variant() {
            NcVariant::Semi => inner_gradient_ascent(
                prob,
                &w_tilde,
                &u_tilde,
                params.eta_hat,
                params.inner_epochs,
            ),
            NcVariant::Full => inner_shuffling_ascent(
                prob,
                &w_tilde,
                &u_tilde,
                params.eta_hat,
                params.inner_epochs,
                &cfg.permutation,
                &stream,
                t,
            ),
        };
        u_tilde = match inner {
            Ok(u) => u,
            Err(Error::NonFinite { context, .. }) => {
                return rec.finish(
                    w_tilde,
                    u_tilde,
                    Termination::NonFinite { epoch: t, context },
                    cfg.output_rule,
                    cfg.seed,
                )
            }
            Err(e) => return Err(e),
        };
        gradu += (params.inner_epochs * n) as u64;
        let gap = exact
            .as_ref()
            .map(|us| linalg::dist_sq(&u_tilde, us).sqrt());
        let perms = sample_permutations(n, &cfg.permutation, &stream, t)?;
        let w_start = w_tilde.clone();
        let mut w = w_tilde.clone();
        for &j in &perms.pi_hat {
            let g = hyper_gradient_nc(prob, j, &w, &u_tilde)?;
            linalg::add_scaled(&mut w, -step, &g);
        }
        gradw += n as u64;
        w_tilde = prob.f().prox(&w, params.eta);
        if !linalg::norm_sq(&w_tilde).is_finite() {
            let termination = Termination::NonFinite {
                epoch: t,
                context: "primal epoch".into(),
            };
            return rec.finish(w_start, u_tilde, termination, cfg.output_rule, cfg.seed);
        }
        let norm = rec.record(t, &w_tilde, &u_tilde, (gap, gap_start), (gradw, gradu))?;
        if cfg.target_grad_norm.is_some_and(|tg| norm <= tg) {
            return rec.finish(
                w_tilde,
                u_tilde,
                Termination::TargetReached,
                cfg.output_rule,
                cfg.seed,
            );
        }
    }
    rec.finish(
        w_tilde,
        u_tilde,
        Termination::Completed,
        cfg.output_rule,
        cfg.seed,
    )
}
