//! Four-loss model selection: `min_w (λ/2)‖w‖² + max_{‖u‖₁≤1} Σ_k u_k · ℓ_k(w)`.
//!
//! `F_i(w) ∈ R⁴` averages the four margin losses over the rows of block `i`.

use super::{ConstantsNL, ProblemNL};
use crate::data::{block_ranges, SparseDataset};
use crate::error::{Error, Result};
use crate::linalg::{self, DenseVec, IdentityOperator, LinearOperator};
use crate::prox::{L1Ball, ProxFn, SquaredL2};
use std::ops::Range;

/// Margins are clamped to `[−LOSS_CLAMP, LOSS_CLAMP]`; derivatives vanish outside.
pub const LOSS_CLAMP: f64 = 30.0;

const DEFAULT_REGION_RADIUS: f64 = 100.0;
const GRID_STEP: f64 = 1e-3;
const GRID_SAFETY: f64 = 1.0001;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Values, first and second derivatives of the four losses at margin `z`.
pub fn margin_losses(z: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let inside = z.abs() <= LOSS_CLAMP;
    let z = z.clamp(-LOSS_CLAMP, LOSS_CLAMP);
    let th = z.tanh();
    let sech2 = 1.0 - th * th;
    let s = sigmoid(-z);
    let t = sigmoid(z);
    let s1 = sigmoid(-z - 1.0);
    let values = [
        1.0 - th,
        softplus(-z) - softplus(-z - 1.0),
        s * s,
        softplus(-z),
    ];
    if !inside {
        return (values, [0.0; 4], [0.0; 4]);
    }
    let first = [-sech2, -s + s1, -2.0 * s * s * t, -s];
    let second = [
        2.0 * sech2 * th,
        s * t - s1 * (1.0 - s1),
        4.0 * s * s * t * t - 2.0 * s * s * s * t,
        s * t,
    ];
    (values, first, second)
}

fn derivative_sups() -> (f64, f64) {
    let steps = (2.0 * LOSS_CLAMP / GRID_STEP).round() as usize;
    let mut d1: f64 = 0.0;
    let mut d2: f64 = 0.0;
    for k in 0..=steps {
        let z = -LOSS_CLAMP + k as f64 * GRID_STEP;
        let (_, first, second) = margin_losses(z);
        d1 = d1.max(linalg::norm(&first));
        d2 = d2.max(linalg::norm(&second));
    }
    (d1 * GRID_SAFETY, d2 * GRID_SAFETY)
}

/// Model-selection instance over a block partition of the dataset.
#[derive(Debug, Clone)]
pub struct ModelSelection {
    data: SparseDataset,
    blocks: Vec<Range<usize>>,
    f: SquaredL2,
    h: L1Ball,
    k: IdentityOperator,
    region_radius: f64,
    constants: ConstantsNL,
}

/// One component per row, `f = (λ/2)‖·‖²`, `h` the unit ℓ₁-ball indicator and `K = I₄`.
pub fn build_model_selection(data: SparseDataset, lambda: f64) -> Result<ModelSelection> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let n = data.n();
    let blocks = (0..n).map(|i| i..i + 1).collect();
    let mut ms = ModelSelection {
        data,
        blocks,
        f: SquaredL2 { lambda },
        h: L1Ball { radius: 1.0 },
        k: IdentityOperator::new(4),
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
    ms.refresh_constants();
    Ok(ms)
}

impl ModelSelection {
    /// Groups rows into `k_b` contiguous blocks, each one component.
    pub fn with_blocks(mut self, k_b: usize) -> Result<Self> {
        self.blocks = block_ranges(self.data.n(), k_b)?;
        self.refresh_constants();
        Ok(self)
    }

    /// Radius of the ball assumed to contain the iterates when bounding the prox residual.
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

    /// Radius of the ball assumed to contain the iterates.
    pub fn region_radius(&self) -> f64 {
        self.region_radius
    }

    pub fn lambda(&self) -> f64 {
        self.f.lambda
    }

    pub fn data(&self) -> &SparseDataset {
        &self.data
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    fn refresh_constants(&mut self) {
        let (d1, d2) = derivative_sups();
        let rows = self.data.rows();
        let max_norm = rows.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let second_moment = self
            .blocks
            .iter()
            .map(|b| {
                let avg = rows[b.clone()].iter().map(|r| r.norm()).sum::<f64>() / b.len() as f64;
                avg * avg
            })
            .sum::<f64>()
            / self.blocks.len() as f64;
        let lambda = self.f.lambda;
        self.constants = ConstantsNL {
            m_f: d1 * max_norm,
            l_f: d2 * max_norm * max_norm,
            sigma_j: d1 * second_moment.sqrt(),
            lambda0: 2.0,
            lambda1: 2.0 * (lambda * self.region_radius).powi(2),
            psi0_lower_bound: 0.0,
        };
    }

    fn block_margins(&self, i: usize, w: &[f64]) -> impl Iterator<Item = (usize, f64)> + '_ {
        let rows = self.data.rows();
        let labels = self.data.labels();
        let w = w.to_vec();
        self.blocks[i]
            .clone()
            .map(move |r| (r, labels[r] * rows[r].dot_dense(&w)))
    }
}

impl ProblemNL for ModelSelection {
    fn n(&self) -> usize {
        self.blocks.len()
    }

    fn p(&self) -> usize {
        self.data.p()
    }

    fn m(&self) -> usize {
        4
    }

    fn eval_f(&self, i: usize, w: &[f64]) -> DenseVec {
        let mut out = vec![0.0; 4];
        for (_, z) in self.block_margins(i, w) {
            linalg::add_scaled(&mut out, 1.0, &margin_losses(z).0);
        }
        let len = self.blocks[i].len() as f64;
        out.iter_mut().for_each(|v| *v /= len);
        out
    }

    fn jt_vec(&self, i: usize, w: &[f64], y: &[f64]) -> DenseVec {
        let rows = self.data.rows();
        let labels = self.data.labels();
        let len = self.blocks[i].len() as f64;
        let mut out = vec![0.0; self.data.p()];
        for (r, z) in self.block_margins(i, w) {
            let coef = linalg::inner(&margin_losses(z).1, y) * labels[r] / len;
            rows[r].add_scaled_into(&mut out, coef);
        }
        out
    }

    fn coupling(&self) -> &dyn LinearOperator {
        &self.k
    }

    fn f(&self) -> &dyn ProxFn {
        &self.f
    }

    fn h(&self) -> &dyn ProxFn {
        &self.h
    }

    fn constants(&self) -> &ConstantsNL {
        &self.constants
    }
}
