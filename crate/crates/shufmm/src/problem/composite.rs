//! Smooth nonlinear composite benchmark `F_i(w) = A_i w + c_i + α sin(B_i w)`.

use super::{ConstantsNL, ProblemNL};
use crate::error::{Error, Result};
use crate::linalg::{
    self, matvec, matvec_transpose, spectral_norm, DenseOperator, DenseVec, LinearOperator,
};
use crate::prox::{L1Ball, ProxFn, SquaredL2};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const DEFAULT_REGION_RADIUS: f64 = 10.0;

#[derive(Debug, Clone)]
enum DualReg {
    Ball(L1Ball),
    Ridge(SquaredL2),
}

impl DualReg {
    fn as_prox(&self) -> &dyn ProxFn {
        match self {
            DualReg::Ball(b) => b,
            DualReg::Ridge(r) => r,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinusoidalComposite {
    linear: Vec<DMatrix<f64>>,
    offsets: Vec<DenseVec>,
    waves: Vec<DMatrix<f64>>,
    amplitude: f64,
    k: DenseOperator,
    f: SquaredL2,
    h: DualReg,
    region_radius: f64,
    constants: ConstantsNL,
}

fn gaussian_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// Random instance with `n` components, `w ∈ R^p`, `F_i ∈ R^m`, `K: R^q → R^m`,
/// `f = (λ/2)‖·‖²` with `λ = 0.1` and `h` the unit ℓ₁-ball indicator.
pub fn build_sinusoidal_composite(
    p: usize,
    m: usize,
    q: usize,
    n: usize,
    seed: u64,
) -> Result<SinusoidalComposite> {
    if p == 0 || m == 0 || q == 0 || n == 0 {
        return Err(Error::InvalidParameter(
            "dimensions must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (p as f64).sqrt();
    let base = gaussian_matrix(m, p, scale, &mut rng);
    let mut linear = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n);
    let mut waves = Vec::with_capacity(n);
    for _ in 0..n {
        linear.push(&base + gaussian_matrix(m, p, 0.3 * scale, &mut rng));
        offsets.push((0..m).map(|_| StandardNormal.sample(&mut rng)).collect());
        waves.push(gaussian_matrix(m, p, scale, &mut rng));
    }
    let k = DenseOperator::new(gaussian_matrix(m, q, 1.0 / (q as f64).sqrt(), &mut rng))?;
    let mut prob = SinusoidalComposite {
        linear,
        offsets,
        waves,
        amplitude: 0.5,
        k,
        f: SquaredL2 { lambda: 0.1 },
        h: DualReg::Ball(L1Ball { radius: 1.0 }),
        region_radius: DEFAULT_REGION_RADIUS,
        constants: ConstantsNL {
            m_f: 0.0,
            l_f: 0.0,
            sigma_j: 0.0,
            lambda0: 0.0,
            lambda1: 0.0,
            psi0_lower_bound: 0.0,
        },
    };
    prob.refresh_constants();
    Ok(prob)
}

impl SinusoidalComposite {
    /// Replaces `h` by `(μ/2)‖·‖²`, making the conjugate smooth without smoothing.
    pub fn with_ridge_dual(mut self, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive, got {mu}"
            )));
        }
        self.h = DualReg::Ridge(SquaredL2 { lambda: mu });
        Ok(self)
    }

    /// Sets the weight `λ ≥ 0` of `f = (λ/2)‖·‖²`.
    pub fn with_primal_weight(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        self.f = SquaredL2 { lambda };
        self.refresh_constants();
        Ok(self)
    }

    pub fn with_region_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "region radius must be positive, got {radius}"
            )));
        }
        self.region_radius = radius;
        self.refresh_constants();
        Ok(self)
    }

    fn refresh_constants(&mut self) {
        let a = self.amplitude;
        let mut m_f: f64 = 0.0;
        let mut wave_norm: f64 = 0.0;
        let mut wave_row: f64 = 0.0;
        let mut second_moment = 0.0;
        for (lin, wav) in self.linear.iter().zip(&self.waves) {
            let wn = spectral_norm(wav);
            m_f = m_f.max(spectral_norm(lin) + a * wn);
            wave_norm = wave_norm.max(wn);
            for r in 0..wav.nrows() {
                wave_row = wave_row.max(wav.row(r).norm());
            }
            second_moment += (lin.norm() + a * wav.norm()).powi(2);
        }
        let n = self.linear.len() as f64;
        self.constants = ConstantsNL {
            m_f,
            l_f: a * wave_norm * wave_row,
            sigma_j: (second_moment / n).sqrt(),
            lambda0: 2.0,
            lambda1: 2.0 * (self.f.lambda * self.region_radius).powi(2),
            psi0_lower_bound: 0.0,
        };
    }
}

impl ProblemNL for SinusoidalComposite {
    fn n(&self) -> usize {
        self.linear.len()
    }

    fn p(&self) -> usize {
        self.linear[0].ncols()
    }

    fn m(&self) -> usize {
        self.linear[0].nrows()
    }

    fn eval_f(&self, i: usize, w: &[f64]) -> DenseVec {
        let mut out = matvec(&self.linear[i], w);
        linalg::add_scaled(&mut out, 1.0, &self.offsets[i]);
        let phase = matvec(&self.waves[i], w);
        for (o, t) in out.iter_mut().zip(phase) {
            *o += self.amplitude * t.sin();
        }
        out
    }

    fn jt_vec(&self, i: usize, w: &[f64], y: &[f64]) -> DenseVec {
        let mut out = matvec_transpose(&self.linear[i], y);
        let weighted: DenseVec = matvec(&self.waves[i], w)
            .iter()
            .zip(y)
            .map(|(t, yk)| self.amplitude * t.cos() * yk)
            .collect();
        linalg::add_scaled(&mut out, 1.0, &matvec_transpose(&self.waves[i], &weighted));
        out
    }

    fn coupling(&self) -> &dyn LinearOperator {
        &self.k
    }

    fn f(&self) -> &dyn ProxFn {
        &self.f
    }

    fn h(&self) -> &dyn ProxFn {
        self.h.as_prox()
    }

    fn constants(&self) -> &ConstantsNL {
        &self.constants
    }
}
