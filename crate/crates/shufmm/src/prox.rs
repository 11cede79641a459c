//! Proximal operators, the ℓ1-ball projection, and the smoothed conjugate
//! `φ_γ(v) = max_u ⟨v, K u⟩ − h(u) − γ b(u)` with `b(u) = ½‖u − ū‖²`.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, DenseVec, LinearOperator};

/// A closed convex function with an inexpensive proximal operator.
pub trait ProxFn: Send + Sync + std::fmt::Debug {
    /// Function value, or `None` outside the domain.
    fn value(&self, x: &[f64]) -> Option<f64>;

    /// `prox_{ηg}(x) = argmin_z g(z) + ‖z − x‖² / (2η)`. `eta = 0` is the identity.
    fn prox(&self, x: &[f64], eta: f64) -> DenseVec;

    /// Strong convexity modulus `μ`.
    fn strong_convexity(&self) -> f64 {
        0.0
    }

    /// `sup { ‖x‖ : x ∈ dom g }`, or `None` when the domain is unbounded.
    fn domain_bound(&self) -> Option<f64> {
        None
    }

    /// Lipschitz constant on the domain, if any.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// Gradient Lipschitz constant when `g` is smooth.
    fn smoothness(&self) -> Option<f64> {
        None
    }
}

/// `g = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl ProxFn for Zero {
    fn value(&self, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
    fn prox(&self, x: &[f64], _eta: f64) -> DenseVec {
        x.to_vec()
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }
    fn smoothness(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `g(x) = (λ/2)‖x‖²`.
#[derive(Debug, Clone, Copy)]
pub struct SquaredL2 {
    pub lambda: f64,
}

impl ProxFn for SquaredL2 {
    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(0.5 * self.lambda * linalg::norm_sq(x))
    }
    fn prox(&self, x: &[f64], eta: f64) -> DenseVec {
        linalg::scaled(1.0 / (1.0 + eta * self.lambda), x)
    }
    fn strong_convexity(&self) -> f64 {
        self.lambda
    }
    fn smoothness(&self) -> Option<f64> {
        Some(self.lambda)
    }
}

/// `g(x) = weight · ‖x‖₁` on `R^dim`.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    pub weight: f64,
    pub dim: usize,
}

impl ProxFn for L1Norm {
    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(self.weight * linalg::norm_l1(x))
    }
    fn prox(&self, x: &[f64], eta: f64) -> DenseVec {
        soft_threshold(x, eta * self.weight)
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.weight * (self.dim as f64).sqrt())
    }
}

/// `g(x) = l1 · ‖x‖₁ + (l2/2)‖x‖²`.
#[derive(Debug, Clone, Copy)]
pub struct ElasticNet {
    pub l1: f64,
    pub l2: f64,
}

impl ProxFn for ElasticNet {
    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(self.l1 * linalg::norm_l1(x) + 0.5 * self.l2 * linalg::norm_sq(x))
    }
    fn prox(&self, x: &[f64], eta: f64) -> DenseVec {
        let mut out = soft_threshold(x, eta * self.l1);
        let s = 1.0 / (1.0 + eta * self.l2);
        out.iter_mut().for_each(|v| *v *= s);
        out
    }
    fn strong_convexity(&self) -> f64 {
        self.l2
    }
}

/// Indicator of `{x : ‖x‖₁ ≤ radius}`.
#[derive(Debug, Clone, Copy)]
pub struct L1Ball {
    pub radius: f64,
}

impl ProxFn for L1Ball {
    fn value(&self, x: &[f64]) -> Option<f64> {
        (linalg::norm_l1(x) <= self.radius * (1.0 + 1e-12) + 1e-12).then_some(0.0)
    }
    fn prox(&self, x: &[f64], _eta: f64) -> DenseVec {
        project_l1_ball_unchecked(x, self.radius)
    }
    fn domain_bound(&self) -> Option<f64> {
        Some(self.radius)
    }
}

/// Indicator of the box `[lower, upper]^dim`.
#[derive(Debug, Clone, Copy)]
pub struct BoxIndicator {
    pub lower: f64,
    pub upper: f64,
    pub dim: usize,
}

impl ProxFn for BoxIndicator {
    fn value(&self, x: &[f64]) -> Option<f64> {
        x.iter()
            .all(|&v| v >= self.lower && v <= self.upper)
            .then_some(0.0)
    }
    fn prox(&self, x: &[f64], _eta: f64) -> DenseVec {
        x.iter().map(|v| v.clamp(self.lower, self.upper)).collect()
    }
    fn domain_bound(&self) -> Option<f64> {
        Some((self.dim as f64).sqrt() * self.lower.abs().max(self.upper.abs()))
    }
}

/// Componentwise `sign(x) · max(|x| − t, 0)`.
pub fn soft_threshold(x: &[f64], t: f64) -> DenseVec {
    x.iter()
        .map(|v| v.signum() * (v.abs() - t).max(0.0))
        .collect()
}

/// `x / (1 + ηλ)`, the prox of `(λ/2)‖·‖²`.
pub fn prox_l2_squared(x: &[f64], eta: f64, lambda: f64) -> Result<DenseVec> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eta must be positive, got {eta}"
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(SquaredL2 { lambda }.prox(x, eta))
}

/// Euclidean projection onto `{u : ‖u‖₁ ≤ radius}` by the sort-based method.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Result<DenseVec> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    Ok(project_l1_ball_unchecked(v, radius))
}

fn project_l1_ball_unchecked(v: &[f64], radius: f64) -> DenseVec {
    if linalg::norm_l1(v) <= radius {
        return v.to_vec();
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        cumsum += m;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if m > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    v.iter()
        .map(|x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

/// Smoothing parameter `γ`, anchor `ū`, and the bounds `B_φ0 = sup b` and `D_b = sup ‖∇b‖` over `dom h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingSpec {
    pub gamma: f64,
    pub anchor: DenseVec,
    pub b_sup: f64,
    pub grad_b_sup: f64,
}

impl SmoothingSpec {
    /// Derives the bounds from the domain radius of `h`; they are infinite for unbounded domains.
    pub fn new(gamma: f64, anchor: DenseVec, h: &dyn ProxFn) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must be non-negative, got {gamma}"
            )));
        }
        let reach = h
            .domain_bound()
            .map_or(f64::INFINITY, |m| m + linalg::norm(&anchor));
        Ok(Self {
            gamma,
            anchor,
            b_sup: 0.5 * reach * reach,
            grad_b_sup: reach,
        })
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self {
            gamma,
            ..self.clone()
        }
    }

    /// `b(u) = ½‖u − ū‖²`.
    pub fn b(&self, u: &[f64]) -> f64 {
        0.5 * linalg::dist_sq(u, &self.anchor)
    }

    /// `∇b(u) = u − ū`.
    pub fn grad_b(&self, u: &[f64]) -> DenseVec {
        linalg::sub(u, &self.anchor)
    }
}

/// Value and maximizer of the smoothed conjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjugate {
    pub value: f64,
    pub u_star: DenseVec,
}

/// `φ_γ(v)` and `u*_γ(v) = prox_{h/γ}(ū + Kᵀv/γ)`.
///
/// With `γ = 0` and `μ_h > 0` the maximizer is found by a proximal-point
/// iteration whose contraction factor is `1e-6` per step.
pub fn smoothed_conjugate(
    v: &[f64],
    k: &dyn LinearOperator,
    h: &dyn ProxFn,
    s: &SmoothingSpec,
) -> Result<Conjugate> {
    check_dim(k.range_dim(), v.len())?;
    check_dim(k.domain_dim(), s.anchor.len())?;
    let y = k.apply_transpose(v);
    let u_star = if s.gamma > 0.0 {
        let mut arg = s.anchor.clone();
        linalg::add_scaled(&mut arg, 1.0 / s.gamma, &y);
        h.prox(&arg, 1.0 / s.gamma)
    } else {
        let mu = h.strong_convexity();
        if !(mu > 0.0) {
            return Err(Error::NonSmoothConjugate);
        }
        conjugate_argmax_strongly_convex(&y, h, mu)
    };
    let h_val = h
        .value(&u_star)
        .ok_or_else(|| Error::InvalidParameter("prox of h left its domain".into()))?;
    let value = linalg::inner(&y, &u_star) - h_val - s.gamma * s.b(&u_star);
    Ok(Conjugate { value, u_star })
}

fn conjugate_argmax_strongly_convex(y: &[f64], h: &dyn ProxFn, mu: f64) -> DenseVec {
    let tau = 1e6 / mu;
    let mut u = vec![0.0; y.len()];
    for _ in 0..50 {
        let mut arg = u.clone();
        linalg::add_scaled(&mut arg, tau, y);
        let next = h.prox(&arg, tau);
        let step = linalg::dist_sq(&next, &u).sqrt();
        u = next;
        if step <= 1e-15 * (1.0 + linalg::norm(&u)) {
            break;
        }
    }
    u
}

/// `∇φ_γ(v) = K u*_γ(v)`.
pub fn smoothed_conjugate_grad(
    v: &[f64],
    k: &dyn LinearOperator,
    h: &dyn ProxFn,
    s: &SmoothingSpec,
) -> Result<DenseVec> {
    let c = smoothed_conjugate(v, k, h, s)?;
    Ok(k.apply(&c.u_star))
}

/// Lipschitz constant `‖K‖² / (μ_h + γ)` of `∇φ_γ`.
pub fn conjugate_grad_lipschitz(k_norm: f64, mu_h: f64, gamma: f64) -> f64 {
    k_norm * k_norm / (mu_h + gamma)
}
