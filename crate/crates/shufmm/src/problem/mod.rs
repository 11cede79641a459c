//! Finite-sum minimax problems in the nonconvex-linear (NL) and
//! nonconvex-strongly-concave (NC) settings, their assumption constants, and
//! the benchmark instances.
//!
//! Components are indexed from zero.

mod composite;
mod model_selection;
mod quadratic;

pub use composite::{build_sinusoidal_composite, SinusoidalComposite};
pub use model_selection::{build_model_selection, margin_losses, ModelSelection, LOSS_CLAMP};
pub use quadratic::{
    build_quadratic_minimax, build_quadratic_minimax_l1, build_quadratic_minimax_ridge,
    build_quadratic_minimax_with, QuadraticDual, QuadraticMinimax, QuadraticOptions,
};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, DenseVec, LinearOperator};
use crate::prox::{smoothed_conjugate, ProxFn, SmoothingSpec};

/// `min_w max_u f(w) + (1/n) Σ ⟨F_i(w), K u⟩ − h(u)`.
pub trait ProblemNL: Send + Sync {
    fn n(&self) -> usize;
    fn p(&self) -> usize;
    fn m(&self) -> usize;
    /// `F_i(w) ∈ R^m`.
    fn eval_f(&self, i: usize, w: &[f64]) -> DenseVec;
    /// `∇F_i(w)ᵀ y ∈ R^p`.
    fn jt_vec(&self, i: usize, w: &[f64], y: &[f64]) -> DenseVec;
    fn coupling(&self) -> &dyn LinearOperator;
    fn f(&self) -> &dyn ProxFn;
    fn h(&self) -> &dyn ProxFn;
    fn constants(&self) -> &ConstantsNL;
}

/// `min_w max_u f(w) + (1/n) Σ H_i(w, u) − h(u)` with `H_i(w, ·)` strongly concave.
pub trait ProblemNC: Send + Sync {
    fn n(&self) -> usize;
    fn p(&self) -> usize;
    fn q(&self) -> usize;
    fn eval_h(&self, i: usize, w: &[f64], u: &[f64]) -> f64;
    fn grad_w(&self, i: usize, w: &[f64], u: &[f64]) -> DenseVec;
    fn grad_u(&self, i: usize, w: &[f64], u: &[f64]) -> DenseVec;
    fn f(&self) -> &dyn ProxFn;
    fn h(&self) -> &dyn ProxFn;
    fn constants(&self) -> &ConstantsNC;
    /// Closed-form `u*_0(w)` when available.
    fn exact_u_star(&self, _w: &[f64]) -> Option<DenseVec> {
        None
    }
}

/// Assumption constants of the NL setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsNL {
    /// Lipschitz constant of each `F_i`.
    pub m_f: f64,
    /// Lipschitz constant of each Jacobian `∇F_i`.
    pub l_f: f64,
    /// Jacobian variance bound.
    pub sigma_j: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// Lower bound on `inf Ψ_0`.
    pub psi0_lower_bound: f64,
}

/// Assumption constants of the NC setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsNC {
    pub l_w: f64,
    pub l_u: f64,
    /// Strong concavity modulus `μ_H` of each `H_i(w, ·)`.
    pub mu_h_coupling: f64,
    pub theta_w: f64,
    pub sigma_w: f64,
    pub theta_u: f64,
    pub sigma_u: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda0_hat: f64,
    pub lambda1_hat: f64,
    pub l_f: f64,
    pub psi0_lower_bound: f64,
}

/// Constants derived for the smoothed NL problem at a given `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedNL {
    pub k_norm: f64,
    /// `M_h = sup ‖u‖` over `dom h`.
    pub m_h: f64,
    pub mu_h: f64,
    pub gamma: f64,
    /// `M_h ‖K‖ L_F + M_F² ‖K‖² / (μ_h + γ)`.
    pub l_phi_gamma: f64,
    /// `M_F² ‖K‖² / (μ_h + γ) + M_h L_F ‖K‖`.
    pub q_gamma: f64,
    /// `2 M_F⁴ ‖K‖⁴ / (μ_h + γ)²`.
    pub c1: f64,
    /// `2 M_h² ‖K‖²`.
    pub c2: f64,
    /// `C_1 + 2 C_2 L_F²`.
    pub l_psi: f64,
}

impl DerivedNL {
    pub fn new(prob: &dyn ProblemNL, gamma: f64) -> Result<Self> {
        let c = prob.constants();
        let k_norm = prob.coupling().norm_bound();
        let mu_h = prob.h().strong_convexity();
        if !(mu_h + gamma > 0.0) {
            return Err(Error::NonSmoothConjugate);
        }
        let m_h = prob.h().domain_bound().unwrap_or(f64::INFINITY);
        let curvature = c.m_f * c.m_f * k_norm * k_norm / (mu_h + gamma);
        let coupling = product_or_zero(m_h * k_norm, c.l_f);
        let c1 = 2.0 * curvature * curvature;
        let c2 = 2.0 * m_h * m_h * k_norm * k_norm;
        Ok(Self {
            k_norm,
            m_h,
            mu_h,
            gamma,
            l_phi_gamma: coupling + curvature,
            q_gamma: curvature + coupling,
            c1,
            c2,
            l_psi: c1 + product_or_zero(2.0 * c2, c.l_f * c.l_f),
        })
    }
}

/// Constants derived for the NC problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedNC {
    /// `μ_H + μ_h`.
    pub mu_psi: f64,
    /// `L_u / (μ_H + μ_h)`.
    pub kappa: f64,
    /// `(1 + κ) L_w`.
    pub l_phi0: f64,
}

impl DerivedNC {
    pub fn new(prob: &dyn ProblemNC) -> Result<Self> {
        let c = prob.constants();
        let mu_psi = c.mu_h_coupling + prob.h().strong_convexity();
        if !(mu_psi > 0.0) {
            return Err(Error::NoStrongConcavity);
        }
        let kappa = c.l_u / mu_psi;
        Ok(Self {
            mu_psi,
            kappa,
            l_phi0: (1.0 + kappa) * c.l_w,
        })
    }
}

fn product_or_zero(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// `F(w) = (1/n) Σ F_i(w)`, summed in index order.
pub fn full_f(prob: &dyn ProblemNL, w: &[f64]) -> Result<DenseVec> {
    check_dim(prob.p(), w.len())?;
    let n = prob.n();
    let mut acc = vec![0.0; prob.m()];
    for i in 0..n {
        linalg::add_scaled(&mut acc, 1.0, &prob.eval_f(i, w));
    }
    acc.iter_mut().for_each(|x| *x /= n as f64);
    Ok(acc)
}

/// `∇F(w)ᵀ y = (1/n) Σ ∇F_i(w)ᵀ y`.
pub fn full_jt_vec(prob: &dyn ProblemNL, w: &[f64], y: &[f64]) -> DenseVec {
    let n = prob.n();
    let mut acc = vec![0.0; prob.p()];
    for i in 0..n {
        linalg::add_scaled(&mut acc, 1.0, &prob.jt_vec(i, w, y));
    }
    acc.iter_mut().for_each(|x| *x /= n as f64);
    acc
}

/// Value and gradient of the smoothed `Φ_γ(w) = φ_γ(F(w))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedEval {
    pub phi: f64,
    pub grad: DenseVec,
    pub f_value: DenseVec,
    pub u_star: DenseVec,
}

/// `Φ_γ(w)` and `∇Φ_γ(w) = ∇F(w)ᵀ K u*_γ(F(w))` from one full pass.
pub fn smoothed_eval(prob: &dyn ProblemNL, w: &[f64], s: &SmoothingSpec) -> Result<SmoothedEval> {
    let f_value = full_f(prob, w)?;
    let conj = smoothed_conjugate(&f_value, prob.coupling(), prob.h(), s)?;
    let y = prob.coupling().apply(&conj.u_star);
    let grad = full_jt_vec(prob, w, &y);
    Ok(SmoothedEval {
        phi: conj.value,
        grad,
        f_value,
        u_star: conj.u_star,
    })
}

/// `Ψ_γ(w) = f(w) + Φ_γ(w)`.
pub fn psi_gamma(prob: &dyn ProblemNL, w: &[f64], s: &SmoothingSpec) -> Result<f64> {
    let f_value = full_f(prob, w)?;
    let conj = smoothed_conjugate(&f_value, prob.coupling(), prob.h(), s)?;
    Ok(regularizer_value(prob.f(), w)? + conj.value)
}

pub(crate) fn regularizer_value(f: &dyn ProxFn, w: &[f64]) -> Result<f64> {
    f.value(w)
        .ok_or_else(|| Error::InvalidParameter("point outside dom f".into()))
}

/// `H(w, u) = (1/n) Σ H_i(w, u)`.
pub fn full_h(prob: &dyn ProblemNC, w: &[f64], u: &[f64]) -> f64 {
    let n = prob.n();
    (0..n).map(|i| prob.eval_h(i, w, u)).sum::<f64>() / n as f64
}

/// `∇_w H(w, u)`.
pub fn full_grad_w(prob: &dyn ProblemNC, w: &[f64], u: &[f64]) -> DenseVec {
    mean_of(prob.n(), prob.p(), |i| prob.grad_w(i, w, u))
}

/// `∇_u H(w, u)`.
pub fn full_grad_u(prob: &dyn ProblemNC, w: &[f64], u: &[f64]) -> DenseVec {
    mean_of(prob.n(), prob.q(), |i| prob.grad_u(i, w, u))
}

fn mean_of(n: usize, dim: usize, term: impl Fn(usize) -> DenseVec) -> DenseVec {
    let mut acc = vec![0.0; dim];
    for i in 0..n {
        linalg::add_scaled(&mut acc, 1.0, &term(i));
    }
    acc.iter_mut().for_each(|x| *x /= n as f64);
    acc
}

/// `L(w, u) = f(w) + H(w, u) − h(u)`.
pub fn lagrangian(prob: &dyn ProblemNC, w: &[f64], u: &[f64]) -> Result<f64> {
    let h_val = prob
        .h()
        .value(u)
        .ok_or_else(|| Error::InvalidParameter("point outside dom h".into()))?;
    Ok(regularizer_value(prob.f(), w)? + full_h(prob, w, u) - h_val)
}

/// Where a maximizer `u*_0(w)` came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UStarSource {
    Oracle,
    /// Proximal gradient ascent stopped at the given gradient-mapping norm.
    InnerSolve {
        residual: f64,
    },
}

/// `u*_0(w)` from the oracle, or by proximal gradient ascent to `‖Ĝ‖ ≤ tol` when `tol` is given.
pub fn u_star(
    prob: &dyn ProblemNC,
    w: &[f64],
    tol: Option<f64>,
) -> Result<(DenseVec, UStarSource)> {
    if let Some(u) = prob.exact_u_star(w) {
        return Ok((u, UStarSource::Oracle));
    }
    let tol = tol.ok_or(Error::NoOracle)?;
    let (u, residual) = solve_inner(prob, w, &vec![0.0; prob.q()], tol, 1_000_000)?;
    Ok((u, UStarSource::InnerSolve { residual }))
}

/// Proximal gradient ascent on `H(w, ·) − h` until the gradient mapping is below `tol`.
pub fn solve_inner(
    prob: &dyn ProblemNC,
    w: &[f64],
    u0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(DenseVec, f64)> {
    let c = prob.constants();
    let eta = 1.0 / c.l_u.max(f64::MIN_POSITIVE);
    let mut u = u0.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut arg = u.clone();
        linalg::add_scaled(&mut arg, eta, &full_grad_u(prob, w, &u));
        let next = prob.h().prox(&arg, eta);
        residual = linalg::dist_sq(&u, &next).sqrt() / eta;
        u = next;
        if !linalg::all_finite(&u) {
            return Err(Error::NonFinite {
                epoch: 0,
                context: "inner solve".into(),
            });
        }
        if residual <= tol {
            break;
        }
    }
    Ok((u, residual))
}

/// `Ψ_0(w) = f(w) + max_u H(w, u) − h(u)` using `u*`.
pub fn psi0_at(prob: &dyn ProblemNC, w: &[f64], u_star: &[f64]) -> Result<f64> {
    lagrangian(prob, w, u_star)
}

/// Danskin's hyper-gradient `∇Φ_0(w) = ∇_w H(w, u*_0(w))`.
pub fn danskin_grad(prob: &dyn ProblemNC, w: &[f64], u_star: &[f64]) -> DenseVec {
    full_grad_w(prob, w, u_star)
}
