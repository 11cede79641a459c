//! Gradient mappings, KKT residuals, output selection and diagnostics.

use crate::error::{check_dim, Error, Result};
use crate::estimators::{SeedStream, StreamRole};
use crate::linalg::{self, DenseVec};
use crate::problem::{
    danskin_grad, full_grad_u, lagrangian, smoothed_eval, solve_inner, u_star, ProblemNC,
    ProblemNL, UStarSource,
};
use crate::prox::{ProxFn, SmoothingSpec};
use rand::Rng;

/// Tolerance of the inner solve used when no maximizer oracle exists.
pub const INNER_SOLVE_TOL: f64 = 1e-8;

/// Which hyper-gradient a gradient mapping was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientSource {
    /// `∇Φ_γ` of the smoothed NL problem.
    Smoothed { gamma: f64 },
    /// `∇Φ_0` of the NC problem.
    Danskin(UStarSource),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradMappingReport {
    pub g_w: DenseVec,
    pub norm_w: f64,
    pub g_u: Option<DenseVec>,
    pub norm_u: Option<f64>,
    pub eta_used: f64,
    pub source: GradientSource,
}

/// `G_η(w) = η⁻¹(w − prox_{ηf}(w − η · grad_phi))`.
pub fn grad_mapping_w(w: &[f64], grad_phi: &[f64], f: &dyn ProxFn, eta: f64) -> Result<DenseVec> {
    check_step(eta)?;
    check_dim(w.len(), grad_phi.len())?;
    let mut arg = w.to_vec();
    linalg::add_scaled(&mut arg, -eta, grad_phi);
    let next = f.prox(&arg, eta);
    Ok(w.iter().zip(&next).map(|(a, b)| (a - b) / eta).collect())
}

/// `Ĝ_η̂(u) = η̂⁻¹(prox_{η̂h}(u + η̂ · grad_u) − u)` for the maximization in `u`.
pub fn grad_mapping_u(u: &[f64], grad_u: &[f64], h: &dyn ProxFn, eta_hat: f64) -> Result<DenseVec> {
    check_step(eta_hat)?;
    check_dim(u.len(), grad_u.len())?;
    let mut arg = u.to_vec();
    linalg::add_scaled(&mut arg, eta_hat, grad_u);
    let next = h.prox(&arg, eta_hat);
    Ok(next.iter().zip(u).map(|(a, b)| (a - b) / eta_hat).collect())
}

fn check_step(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "step size must be positive, got {eta}"
        )))
    }
}

/// `G_η(w)` of the smoothed NL problem.
pub fn grad_mapping_nl(
    prob: &dyn ProblemNL,
    w: &[f64],
    s: &SmoothingSpec,
    eta: f64,
) -> Result<GradMappingReport> {
    let grad = smoothed_eval(prob, w, s)?.grad;
    let g_w = grad_mapping_w(w, &grad, prob.f(), eta)?;
    Ok(GradMappingReport {
        norm_w: linalg::norm(&g_w),
        g_w,
        g_u: None,
        norm_u: None,
        eta_used: eta,
        source: GradientSource::Smoothed { gamma: s.gamma },
    })
}

/// `G_η(w)` of the NC problem, with `Ĝ_η(u*)` measuring the accuracy of `u*`.
pub fn grad_mapping_nc(prob: &dyn ProblemNC, w: &[f64], eta: f64) -> Result<GradMappingReport> {
    let (u, source) = u_star(prob, w, Some(INNER_SOLVE_TOL))?;
    let g_w = grad_mapping_w(w, &danskin_grad(prob, w, &u), prob.f(), eta)?;
    let g_u = grad_mapping_u(&u, &full_grad_u(prob, w, &u), prob.h(), eta)?;
    Ok(GradMappingReport {
        norm_w: linalg::norm(&g_w),
        g_w,
        norm_u: Some(linalg::norm(&g_u)),
        g_u: Some(g_u),
        eta_used: eta,
        source: GradientSource::Danskin(source),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual {
    pub r_w: DenseVec,
    pub r_u: DenseVec,
    pub joint_norm: f64,
    pub w_bar: DenseVec,
    pub u_bar: DenseVec,
}

impl KktResidual {
    fn new(r_w: DenseVec, r_u: DenseVec, w_bar: DenseVec, u_bar: DenseVec) -> Self {
        let joint_norm = (linalg::norm_sq(&r_w) + linalg::norm_sq(&r_u)).sqrt();
        Self {
            r_w,
            r_u,
            joint_norm,
            w_bar,
            u_bar,
        }
    }
}

/// `w̄ = prox_{ηf}(ŵ − η∇Φ(ŵ))` and `r_w = η⁻¹(ŵ − w̄) + ∇Φ(w̄) − ∇Φ(ŵ)`.
fn primal_residual(
    w_hat: &[f64],
    f: &dyn ProxFn,
    eta: f64,
    grad: impl Fn(&[f64]) -> Result<DenseVec>,
) -> Result<(DenseVec, DenseVec)> {
    let g_hat = grad(w_hat)?;
    let mut arg = w_hat.to_vec();
    linalg::add_scaled(&mut arg, -eta, &g_hat);
    let w_bar = f.prox(&arg, eta);
    let g_bar = grad(&w_bar)?;
    let r_w = (0..w_hat.len())
        .map(|k| (w_hat[k] - w_bar[k]) / eta + g_bar[k] - g_hat[k])
        .collect();
    Ok((r_w, w_bar))
}

/// KKT residual of the smoothed NL problem at `ū = u*_γ(F(w̄))`, with `r_u = −γ∇b(ū)`.
pub fn kkt_residual_nl(
    prob: &dyn ProblemNL,
    w_hat: &[f64],
    s: &SmoothingSpec,
    eta: f64,
) -> Result<KktResidual> {
    check_step(eta)?;
    check_dim(prob.p(), w_hat.len())?;
    let (r_w, w_bar) =
        primal_residual(
            w_hat,
            prob.f(),
            eta,
            |w| Ok(smoothed_eval(prob, w, s)?.grad),
        )?;
    let u_bar = smoothed_eval(prob, &w_bar, s)?.u_star;
    let r_u = linalg::scaled(-s.gamma, &s.grad_b(&u_bar));
    Ok(KktResidual::new(r_w, r_u, w_bar, u_bar))
}

/// KKT residual of the NC problem at `ū = u*_0(w̄)`; `r_u` is the gradient mapping of the inner problem at `ū`.
pub fn kkt_residual_nc(
    prob: &dyn ProblemNC,
    w_hat: &[f64],
    eta: f64,
    inner_tol: Option<f64>,
) -> Result<KktResidual> {
    check_step(eta)?;
    check_dim(prob.p(), w_hat.len())?;
    let (r_w, w_bar) = primal_residual(w_hat, prob.f(), eta, |w| {
        let (u, _) = u_star(prob, w, inner_tol)?;
        Ok(danskin_grad(prob, w, &u))
    })?;
    let (u_bar, source) = u_star(prob, &w_bar, inner_tol)?;
    let r_u = match source {
        UStarSource::Oracle => vec![0.0; prob.q()],
        UStarSource::InnerSolve { .. } => {
            let step = 1.0 / prob.constants().l_u;
            grad_mapping_u(&u_bar, &full_grad_u(prob, &w_bar, &u_bar), prob.h(), step)?
        }
    };
    Ok(KktResidual::new(r_w, r_u, w_bar, u_bar))
}

/// Rule for picking the reported iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputRule {
    /// Earliest epoch attaining the smallest gradient-mapping norm.
    Argmin,
    /// Uniformly random epoch from the run's output stream.
    UniformRandom,
}

/// Index of the reported epoch among `norms`.
pub fn select_output(norms: &[f64], rule: OutputRule, stream: &SeedStream) -> Result<usize> {
    if norms.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(match rule {
        OutputRule::Argmin => {
            let mut best = 0;
            for (t, &v) in norms.iter().enumerate() {
                if v < norms[best] {
                    best = t;
                }
            }
            best
        }
        OutputRule::UniformRandom => stream
            .rng(StreamRole::Output, 0)
            .random_range(0..norms.len()),
    })
}

/// `V_λ(w, u) = λ[Ψ_0(w) − Ψ_0⋆] + Ψ_0(w) − L(w, u)`, with `Ψ_0⋆` the declared optimal value.
pub fn potential_diag(prob: &dyn ProblemNC, w: &[f64], u: &[f64], lambda: f64) -> Result<f64> {
    let exact = prob.exact_u_star(w).ok_or(Error::NoOracle)?;
    let psi = lagrangian(prob, w, &exact)?;
    Ok(lambda * (psi - prob.constants().psi0_lower_bound) + psi - lagrangian(prob, w, u)?)
}

/// Outcome of checking `‖∇Φ(w)‖² ≤ Λ_0‖G_η(w)‖² + Λ_1` on recorded points.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCheck {
    /// Largest ratio `‖∇Φ‖² / (Λ_0‖G‖² + Λ_1)` observed.
    pub worst_ratio: f64,
    /// Indices of points where the ratio exceeded one.
    pub violations: Vec<usize>,
}

/// Gradient-growth self-check of the declared `Λ_0, Λ_1` on `(∇Φ(w), G_η(w))` pairs.
pub fn growth_check(pairs: &[(DenseVec, DenseVec)], lambda0: f64, lambda1: f64) -> GrowthCheck {
    let mut worst_ratio: f64 = 0.0;
    let mut violations = Vec::new();
    for (k, (grad, gmap)) in pairs.iter().enumerate() {
        let rhs = lambda0 * linalg::norm_sq(gmap) + lambda1;
        let lhs = linalg::norm_sq(grad);
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst_ratio = worst_ratio.max(ratio);
        if ratio > 1.0 {
            violations.push(k);
        }
    }
    GrowthCheck {
        worst_ratio,
        violations,
    }
}

/// `u*_0(w)` by an inner solve from `u0` to tolerance `tol`, for problems without an oracle.
pub fn inner_maximizer(
    prob: &dyn ProblemNC,
    w: &[f64],
    u0: &[f64],
    tol: f64,
) -> Result<(DenseVec, f64)> {
    solve_inner(prob, w, u0, tol, 1_000_000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{
        build_quadratic_minimax, build_quadratic_minimax_l1, build_sinusoidal_composite, DerivedNC,
        DerivedNL,
    };
    use crate::prox::{SquaredL2, Zero};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_point(dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> DenseVec {
        (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            })
            .collect()
    }

    #[test]
    fn zero_regularizer_returns_gradient() {
        let g = grad_mapping_w(&[1.0, 2.0], &[0.3, -0.4], &Zero, 0.7).unwrap();
        assert!((g[0] - 0.3).abs() < 1e-15 && (g[1] + 0.4).abs() < 1e-15);
        assert!(grad_mapping_w(&[1.0], &[1.0], &Zero, 0.0).is_err());
    }

    #[test]
    fn ridge_closed_form() {
        let (w, g, eta, lam) = ([1.0, -2.0], [0.5, 0.25], 0.3, 2.0);
        let out = grad_mapping_w(&w, &g, &SquaredL2 { lambda: lam }, eta).unwrap();
        for k in 0..2 {
            let expect = (w[k] - (w[k] - eta * g[k]) / (1.0 + eta * lam)) / eta;
            assert!((out[k] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_point_has_zero_mapping() {
        let lam = 0.5;
        let w = [0.4, -0.8];
        let grad = [-lam * 0.4, lam * 0.8];
        let g = grad_mapping_w(&w, &grad, &SquaredL2 { lambda: lam }, 0.9).unwrap();
        assert!(linalg::norm(&g) < 1e-10);
    }

    #[test]
    fn select_output_examples() {
        let s = SeedStream::new(0);
        assert_eq!(select_output(&[3.0], OutputRule::Argmin, &s).unwrap(), 0);
        assert_eq!(
            select_output(&[3.0, 2.0, 1.0], OutputRule::Argmin, &s).unwrap(),
            2
        );
        assert_eq!(
            select_output(&[1.0, 2.0, 1.0], OutputRule::Argmin, &s).unwrap(),
            0
        );
        assert_eq!(
            select_output(&[], OutputRule::Argmin, &s),
            Err(Error::EmptyTrace)
        );
        let norms = [0.5, 0.1, 0.9, 0.3];
        let pick = select_output(&norms, OutputRule::Argmin, &s).unwrap();
        let mean_sq = norms.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(norms[pick] * norms[pick] <= mean_sq);
        let r = select_output(&norms, OutputRule::UniformRandom, &s).unwrap();
        assert!(r < 4);
        assert_eq!(
            r,
            select_output(&norms, OutputRule::UniformRandom, &s).unwrap()
        );
    }

    #[test]
    fn saddle_point_is_kkt() {
        let prob = build_quadratic_minimax(4, 3, 5, 3).unwrap();
        let w = prob.w_star().unwrap().to_vec();
        let r = kkt_residual_nc(&prob, &w, 0.1, None).unwrap();
        assert!(r.joint_norm <= 1e-9);
        let report = grad_mapping_nc(&prob, &w, 0.1).unwrap();
        assert!(report.norm_w <= 1e-9);
        assert_eq!(report.source, GradientSource::Danskin(UStarSource::Oracle));
    }

    #[test]
    fn nc_residual_bounded_by_gradient_mapping() {
        let prob = build_quadratic_minimax(4, 3, 5, 6).unwrap();
        let l_phi0 = DerivedNC::new(&prob).unwrap().l_phi0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let w = random_point(4, 2.0, &mut rng);
            for eta in [0.01, 0.1, 1.0] {
                let r = kkt_residual_nc(&prob, &w, eta, None).unwrap();
                let g = grad_mapping_nc(&prob, &w, eta).unwrap().norm_w;
                assert!(linalg::norm(&r.r_w) <= (1.0 + l_phi0 * eta) * g + 1e-10);
                let joint_sq = linalg::norm_sq(&r.r_w) + linalg::norm_sq(&r.r_u);
                assert!((r.joint_norm * r.joint_norm - joint_sq).abs() <= 1e-12 * (1.0 + joint_sq));
            }
        }
    }

    #[test]
    fn unconstrained_kkt_is_gradient_pair() {
        // With h = 0 the oracle maximizer zeroes ∇_u H.
        let prob = build_quadratic_minimax(3, 2, 4, 1).unwrap();
        let w = [0.3, 0.2, -0.1];
        let r = kkt_residual_nc(&prob, &w, 0.5, None).unwrap();
        assert!(linalg::norm(&full_grad_u(&prob, &r.w_bar, &r.u_bar)) < 1e-12);
        assert_eq!(r.r_u, vec![0.0; 2]);
    }

    #[test]
    fn ball_variant_uses_inner_solve() {
        let prob = build_quadratic_minimax_l1(3, 3, 4, 2, 0.5).unwrap();
        assert_eq!(
            kkt_residual_nc(&prob, &[0.1, 0.2, 0.3], 0.1, None),
            Err(Error::NoOracle)
        );
        let r = kkt_residual_nc(&prob, &[0.1, 0.2, 0.3], 0.1, Some(INNER_SOLVE_TOL)).unwrap();
        assert!(linalg::norm(&r.r_u) <= 1e-7);
        let rep = grad_mapping_nc(&prob, &[0.1, 0.2, 0.3], 0.1).unwrap();
        assert!(matches!(
            rep.source,
            GradientSource::Danskin(UStarSource::InnerSolve { .. })
        ));
    }

    #[test]
    fn nl_residual_bounded() {
        let prob = build_sinusoidal_composite(3, 3, 2, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let w = random_point(3, 1.0, &mut rng);
            let s = SmoothingSpec::new(0.4, vec![0.0; 2], prob.h()).unwrap();
            let eta = 0.05;
            let l_phi = DerivedNL::new(&prob, s.gamma).unwrap().l_phi_gamma;
            let r = kkt_residual_nl(&prob, &w, &s, eta).unwrap();
            let g = grad_mapping_nl(&prob, &w, &s, eta).unwrap().norm_w;
            assert!(linalg::norm(&r.r_w) <= (1.0 + eta * l_phi) * g + 1e-10);
            assert!(linalg::norm(&r.r_u) <= s.gamma * s.grad_b_sup + 1e-12);
            let bound = ((1.0 + eta * l_phi) * g).max(s.gamma * s.grad_b_sup);
            assert!(r.joint_norm <= std::f64::consts::SQRT_2 * bound + 1e-10);
        }
    }

    #[test]
    fn potential_is_nonnegative_and_zero_at_maximizer() {
        let prob = build_quadratic_minimax(3, 3, 4, 5).unwrap();
        let w = [0.2, -1.0, 0.4];
        let u = prob.exact_u_star(&w).unwrap();
        assert!(potential_diag(&prob, &w, &u, 0.0).unwrap().abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let w = random_point(3, 2.0, &mut rng);
            let u = random_point(3, 2.0, &mut rng);
            assert!(potential_diag(&prob, &w, &u, 2.0).unwrap() >= -1e-10);
        }
        let ball = build_quadratic_minimax_l1(3, 3, 4, 5, 1.0).unwrap();
        assert_eq!(
            potential_diag(&ball, &w, &[0.0; 3], 1.0),
            Err(Error::NoOracle)
        );
    }

    #[test]
    fn growth_check_flags_violations() {
        let pairs = vec![(vec![1.0], vec![1.0]), (vec![3.0], vec![1.0])];
        let c = growth_check(&pairs, 2.0, 1.0);
        assert_eq!(c.violations, vec![1]);
        assert!((c.worst_ratio - 3.0).abs() < 1e-15);
    }
}
