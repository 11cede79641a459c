//! Quadratic minimax benchmark
//! `H_i(w, u) = ⟨A_i w, u⟩ − ½ uᵀ D_i u + ⟨c_i, u⟩ + ½ wᵀ P_i w` with diagonal `D_i`.

use super::{ConstantsNC, ProblemNC};
use crate::error::{Error, Result};
use crate::linalg::{self, matvec, matvec_transpose, spectral_norm, DenseVec};
use crate::prox::{L1Ball, ProxFn, SquaredL2, Zero};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Generation knobs of the quadratic benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticOptions {
    /// Relative size of the per-component perturbations.
    pub heterogeneity: f64,
    /// Scale of the shared coupling and curvature blocks.
    pub coupling_scale: f64,
    /// Smallest eigenvalue of the mean primal curvature plus `f`.
    pub min_curvature: f64,
    /// Width of the uniform spread of the diagonal `D_i ∈ [1, 1 + spread]`.
    pub dual_spread: f64,
}

impl Default for QuadraticOptions {
    fn default() -> Self {
        Self {
            heterogeneity: 0.3,
            coupling_scale: 0.5,
            min_curvature: 0.1,
            dual_spread: 0.5,
        }
    }
}

/// Dual regularizer of the quadratic benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadraticDual {
    /// `h = 0`, with `D_i ⪰ I`.
    Unconstrained,
    /// `h` is the indicator of the ℓ₁-ball of the given radius, with `D_i ⪰ I`.
    L1Ball(f64),
    /// `h = (μ/2)‖u‖²` and `D_i = 0`, so `H_i` is merely concave in `u`.
    Ridge(f64),
}

#[derive(Debug, Clone)]
enum DualReg {
    Zero(Zero),
    Ball(L1Ball),
    Ridge(SquaredL2),
}

#[derive(Debug, Clone)]
pub struct QuadraticMinimax {
    a: Vec<DMatrix<f64>>,
    d: Vec<DenseVec>,
    c: Vec<DenseVec>,
    pw: Vec<DMatrix<f64>>,
    a_mean: DMatrix<f64>,
    d_mean: DenseVec,
    c_mean: DenseVec,
    f: SquaredL2,
    h: DualReg,
    dual: QuadraticDual,
    w_star: Option<DenseVec>,
    constants: ConstantsNC,
}

fn gaussian_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

fn gaussian_vec(len: usize, scale: f64, rng: &mut ChaCha8Rng) -> DenseVec {
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn symmetric(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn mean_matrix(ms: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(ms[0].nrows(), ms[0].ncols());
    for m in ms {
        acc += m;
    }
    acc / ms.len() as f64
}

fn mean_vec(vs: &[DenseVec]) -> DenseVec {
    let mut acc = vec![0.0; vs[0].len()];
    for v in vs {
        linalg::add_scaled(&mut acc, 1.0, v);
    }
    acc.iter_mut().for_each(|x| *x /= vs.len() as f64);
    acc
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Quadratic instance with `h = 0`.
pub fn build_quadratic_minimax(
    p: usize,
    q: usize,
    n: usize,
    seed: u64,
) -> Result<QuadraticMinimax> {
    QuadraticMinimax::generate(
        p,
        q,
        n,
        seed,
        QuadraticDual::Unconstrained,
        QuadraticOptions::default(),
    )
}

/// Quadratic instance with explicit dual regularizer and generation options.
pub fn build_quadratic_minimax_with(
    p: usize,
    q: usize,
    n: usize,
    seed: u64,
    dual: QuadraticDual,
    options: QuadraticOptions,
) -> Result<QuadraticMinimax> {
    QuadraticMinimax::generate(p, q, n, seed, dual, options)
}

/// Quadratic instance with `h` the indicator of the ℓ₁-ball of the given radius.
pub fn build_quadratic_minimax_l1(
    p: usize,
    q: usize,
    n: usize,
    seed: u64,
    radius: f64,
) -> Result<QuadraticMinimax> {
    QuadraticMinimax::generate(
        p,
        q,
        n,
        seed,
        QuadraticDual::L1Ball(radius),
        QuadraticOptions::default(),
    )
}

/// Quadratic instance with `D_i = 0` and `h = (μ_h/2)‖u‖²`.
pub fn build_quadratic_minimax_ridge(
    p: usize,
    q: usize,
    n: usize,
    seed: u64,
    mu_h: f64,
) -> Result<QuadraticMinimax> {
    QuadraticMinimax::generate(
        p,
        q,
        n,
        seed,
        QuadraticDual::Ridge(mu_h),
        QuadraticOptions::default(),
    )
}

impl QuadraticMinimax {
    fn generate(
        p: usize,
        q: usize,
        n: usize,
        seed: u64,
        dual: QuadraticDual,
        options: QuadraticOptions,
    ) -> Result<Self> {
        if p == 0 || q == 0 || n == 0 {
            return Err(Error::InvalidParameter(
                "dimensions must be positive".into(),
            ));
        }
        let QuadraticOptions {
            heterogeneity,
            coupling_scale,
            min_curvature,
            dual_spread,
        } = options;
        let valid = |v: f64| v >= 0.0 && v.is_finite();
        if !valid(heterogeneity)
            || !valid(dual_spread)
            || !(coupling_scale > 0.0)
            || !(min_curvature > 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "invalid quadratic options {options:?}"
            )));
        }
        let h = match dual {
            QuadraticDual::Unconstrained => DualReg::Zero(Zero),
            QuadraticDual::L1Ball(r) if r > 0.0 && r.is_finite() => {
                DualReg::Ball(L1Ball { radius: r })
            }
            QuadraticDual::Ridge(mu) if mu > 0.0 && mu.is_finite() => {
                DualReg::Ridge(SquaredL2 { lambda: mu })
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "invalid dual regularizer {dual:?}"
                )))
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = coupling_scale / (p as f64).sqrt();
        let a0 = gaussian_matrix(q, p, scale, &mut rng);
        let p0 = symmetric(gaussian_matrix(p, p, scale, &mut rng));
        let c0 = gaussian_vec(q, 0.5, &mut rng);
        let mut a = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        let mut pw = Vec::with_capacity(n);
        for _ in 0..n {
            a.push(&a0 + gaussian_matrix(q, p, heterogeneity * scale, &mut rng));
            pw.push(&p0 + symmetric(gaussian_matrix(p, p, heterogeneity * scale, &mut rng)));
            let mut ci = c0.clone();
            linalg::add_scaled(
                &mut ci,
                1.0,
                &gaussian_vec(q, heterogeneity * 0.5, &mut rng),
            );
            c.push(ci);
            d.push(match dual {
                QuadraticDual::Ridge(_) => vec![0.0; q],
                _ => (0..q)
                    .map(|_| 1.0 + dual_spread * rng.random::<f64>())
                    .collect(),
            });
        }
        let a_mean = mean_matrix(&a);
        let p_mean = mean_matrix(&pw);
        let d_mean = mean_vec(&d);
        let c_mean = mean_vec(&c);
        let lambda = (min_curvature - min_eigenvalue(&p_mean)).max(min_curvature);
        let mut prob = Self {
            a,
            d,
            c,
            pw,
            a_mean,
            d_mean,
            c_mean,
            f: SquaredL2 { lambda },
            h,
            dual,
            w_star: None,
            constants: ConstantsNC {
                l_w: 0.0,
                l_u: 0.0,
                mu_h_coupling: 0.0,
                theta_w: 0.0,
                sigma_w: 0.0,
                theta_u: 0.0,
                sigma_u: 0.0,
                lambda0: 0.0,
                lambda1: 0.0,
                lambda0_hat: 0.0,
                lambda1_hat: 0.0,
                l_f: 0.0,
                psi0_lower_bound: 0.0,
            },
        };
        prob.w_star = prob.closed_form_minimizer();
        prob.refresh_constants(&p_mean);
        Ok(prob)
    }

    pub fn dual(&self) -> QuadraticDual {
        self.dual
    }

    /// Minimizer of `Ψ_0` when the dual is unconstrained or ridge-regularized.
    pub fn w_star(&self) -> Option<&[f64]> {
        self.w_star.as_deref()
    }

    /// Diagonal of `D̄ + μ_h I`.
    fn dual_curvature(&self) -> Option<DenseVec> {
        let shift = match self.dual {
            QuadraticDual::Unconstrained => 0.0,
            QuadraticDual::Ridge(mu) => mu,
            QuadraticDual::L1Ball(_) => return None,
        };
        Some(self.d_mean.iter().map(|x| x + shift).collect())
    }

    fn closed_form_minimizer(&self) -> Option<DenseVec> {
        let curv = self.dual_curvature()?;
        let p = self.a_mean.ncols();
        let dinv = DMatrix::from_diagonal(&DVector::from_iterator(
            curv.len(),
            curv.iter().map(|x| 1.0 / x),
        ));
        let p_mean = mean_matrix(&self.pw);
        let q = &p_mean
            + DMatrix::identity(p, p) * self.f.lambda
            + self.a_mean.transpose() * &dinv * &self.a_mean;
        let rhs = -(self.a_mean.transpose() * &dinv * DVector::from_column_slice(&self.c_mean));
        let sol = q.cholesky()?.solve(&rhs);
        Some(sol.iter().copied().collect())
    }

    fn refresh_constants(&mut self, p_mean: &DMatrix<f64>) {
        let p = self.a_mean.ncols();
        let q = self.a_mean.nrows();
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut l_w: f64 = 0.0;
        let mut l_u: f64 = 0.0;
        for i in 0..self.a.len() {
            let mut stacked_w = DMatrix::zeros(p + q, p);
            stacked_w.view_mut((0, 0), (p, p)).copy_from(&self.pw[i]);
            stacked_w.view_mut((p, 0), (q, p)).copy_from(&self.a[i]);
            l_w = l_w.max(sqrt2 * spectral_norm(&stacked_w));
            let mut stacked_u = DMatrix::zeros(p + q, q);
            stacked_u
                .view_mut((0, 0), (p, q))
                .copy_from(&self.a[i].transpose());
            for k in 0..q {
                stacked_u[(p + k, k)] = -self.d[i][k];
            }
            l_u = l_u.max(sqrt2 * spectral_norm(&stacked_u));
        }
        let mu_coupling = self
            .d
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let (r_w, r_u) = self.region_radii();
        let n = self.a.len() as f64;
        let mut var_w = 0.0;
        let mut var_u = 0.0;
        for i in 0..self.a.len() {
            let da = spectral_norm(&(&self.a[i] - &self.a_mean));
            let dp = spectral_norm(&(&self.pw[i] - p_mean));
            let dd = self.d[i]
                .iter()
                .zip(&self.d_mean)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let dc = linalg::dist_sq(&self.c[i], &self.c_mean).sqrt();
            var_w += (da * r_u + dp * r_w).powi(2);
            var_u += (da * r_w + dd * r_u + dc).powi(2);
        }
        let lambda = self.f.lambda;
        let d_max = self.d_mean.iter().copied().fold(0.0, f64::max);
        let grad_u_sup =
            spectral_norm(&self.a_mean) * r_w + d_max * r_u + linalg::norm(&self.c_mean);
        let lambda1_hat = match self.dual {
            QuadraticDual::Unconstrained => 0.0,
            _ => grad_u_sup * grad_u_sup,
        };
        let psi0_lower_bound = match &self.w_star {
            Some(w) => self.psi0_exact(w),
            None => 0.0,
        };
        self.constants = ConstantsNC {
            l_w,
            l_u,
            mu_h_coupling: mu_coupling,
            theta_w: 0.0,
            sigma_w: (var_w / n).sqrt(),
            theta_u: 0.0,
            sigma_u: (var_u / n).sqrt(),
            lambda0: 2.0,
            lambda1: 2.0 * (lambda * r_w).powi(2),
            lambda0_hat: 1.0,
            lambda1_hat,
            l_f: lambda,
            psi0_lower_bound,
        };
    }

    /// Radii of the balls assumed to contain the primal iterates and the dual maximizers.
    pub fn region_radii(&self) -> (f64, f64) {
        let w_norm = self.w_star.as_deref().map_or(0.0, linalg::norm);
        let r_w = 2.0 * (w_norm + 1.0);
        let r_u = match (self.dual, self.dual_curvature()) {
            (QuadraticDual::L1Ball(r), _) => r,
            (_, Some(curv)) => {
                let min_curv = curv.iter().copied().fold(f64::INFINITY, f64::min);
                (spectral_norm(&self.a_mean) * r_w + linalg::norm(&self.c_mean)) / min_curv + 1.0
            }
            _ => unreachable!(),
        };
        (r_w, r_u)
    }

    fn psi0_exact(&self, w: &[f64]) -> f64 {
        let u = self.exact_u_star(w).expect("closed form exists");
        super::lagrangian(self, w, &u).expect("values are finite")
    }
}

impl ProblemNC for QuadraticMinimax {
    fn n(&self) -> usize {
        self.a.len()
    }

    fn p(&self) -> usize {
        self.a_mean.ncols()
    }

    fn q(&self) -> usize {
        self.a_mean.nrows()
    }

    fn eval_h(&self, i: usize, w: &[f64], u: &[f64]) -> f64 {
        let aw = matvec(&self.a[i], w);
        let quad_u: f64 = u.iter().zip(&self.d[i]).map(|(x, d)| d * x * x).sum();
        linalg::inner(&aw, u) - 0.5 * quad_u
            + linalg::inner(&self.c[i], u)
            + 0.5 * linalg::inner(w, &matvec(&self.pw[i], w))
    }

    fn grad_w(&self, i: usize, w: &[f64], u: &[f64]) -> DenseVec {
        let mut g = matvec_transpose(&self.a[i], u);
        linalg::add_scaled(&mut g, 1.0, &matvec(&self.pw[i], w));
        g
    }

    fn grad_u(&self, i: usize, w: &[f64], u: &[f64]) -> DenseVec {
        let mut g = matvec(&self.a[i], w);
        for k in 0..g.len() {
            g[k] += self.c[i][k] - self.d[i][k] * u[k];
        }
        g
    }

    fn f(&self) -> &dyn ProxFn {
        &self.f
    }

    fn h(&self) -> &dyn ProxFn {
        match &self.h {
            DualReg::Zero(z) => z,
            DualReg::Ball(b) => b,
            DualReg::Ridge(r) => r,
        }
    }

    fn constants(&self) -> &ConstantsNC {
        &self.constants
    }

    fn exact_u_star(&self, w: &[f64]) -> Option<DenseVec> {
        let curv = self.dual_curvature()?;
        let aw = matvec(&self.a_mean, w);
        Some(
            aw.iter()
                .zip(&self.c_mean)
                .zip(&curv)
                .map(|((x, c), d)| (x + c) / d)
                .collect(),
        )
    }
}
