//! Permutation sampling and the shuffling estimators of `F`, its Jacobian, and the hyper-gradient.
//!
//! Permutations are zero-based: `pi[i]` is the component visited at inner step `i + 1`.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, DenseVec};
use crate::problem::{full_f, ProblemNC, ProblemNL};
use crate::prox::{smoothed_conjugate, SmoothingSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named sub-streams of a run's seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    /// Permutation for the function-value estimator.
    Pi,
    /// Permutation for the Jacobian or `∇_w` estimator.
    PiHat,
    /// Common permutation in shared mode.
    Shared,
    /// Inner shuffling-ascent epoch `s`.
    InnerPerm(usize),
    /// i.i.d. component sampling of the baseline.
    Sampling,
    /// Uniform-random output selection.
    Output,
}

impl StreamRole {
    fn tag(self) -> (u64, u64) {
        match self {
            StreamRole::Pi => (1, 0),
            StreamRole::PiHat => (2, 0),
            StreamRole::Shared => (3, 0),
            StreamRole::InnerPerm(s) => (4, s as u64),
            StreamRole::Sampling => (5, 0),
            StreamRole::Output => (6, 0),
        }
    }
}

/// Counter-based generator family: each `(role, epoch)` pair owns an independent ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self, role: StreamRole, epoch: usize) -> ChaCha8Rng {
        let (tag, sub) = role.tag();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((tag << 56) | ((epoch as u64 & 0xFFFF_FFFF) << 24) | (sub & 0xFF_FFFF));
        rng
    }
}

/// How the two permutations of an epoch are produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PermutationMode {
    Identity,
    /// The same given pair in every epoch.
    Fixed {
        pi: Vec<usize>,
        pi_hat: Vec<usize>,
    },
    /// Independent uniform permutations from disjoint streams.
    RandomIndependent,
    /// One uniform permutation used for both roles.
    RandomShared,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationPair {
    pub pi: Vec<usize>,
    pub pi_hat: Vec<usize>,
    pub mode: PermutationMode,
}

fn is_permutation(p: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n
        && p.iter().all(|&i| {
            let fresh = i < n && !seen[i];
            if fresh {
                seen[i] = true;
            }
            fresh
        })
}

/// Uniform permutation of `0..n` by Fisher–Yates over the given stream.
pub fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Draws `(π, π̂)` for `epoch`.
pub fn sample_permutations(
    n: usize,
    mode: &PermutationMode,
    stream: &SeedStream,
    epoch: usize,
) -> Result<PermutationPair> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let (pi, pi_hat) = match mode {
        PermutationMode::Identity => ((0..n).collect(), (0..n).collect()),
        PermutationMode::Fixed { pi, pi_hat } => {
            if !is_permutation(pi, n) || !is_permutation(pi_hat, n) {
                return Err(Error::InvalidParameter(format!(
                    "fixed permutations must be bijections on 0..{n}"
                )));
            }
            (pi.clone(), pi_hat.clone())
        }
        PermutationMode::RandomIndependent => (
            random_permutation(n, &mut stream.rng(StreamRole::Pi, epoch)),
            random_permutation(n, &mut stream.rng(StreamRole::PiHat, epoch)),
        ),
        PermutationMode::RandomShared => {
            let p = random_permutation(n, &mut stream.rng(StreamRole::Shared, epoch));
            (p.clone(), p)
        }
    };
    Ok(PermutationPair {
        pi,
        pi_hat,
        mode: mode.clone(),
    })
}

/// Incremental Option 1 estimator
/// `F_i = (1/n)[Σ_{j≤i} F_{π(j)}(w_{j−1}) + Σ_{j>i} F_{π(j)}(w_0)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Option1State {
    prefix_sum: DenseVec,
    /// `suffixes[i] = Σ_{j>i} F_{π(j)}(w_0)`, accumulated from the back.
    suffixes: Vec<DenseVec>,
    i: usize,
}

impl Option1State {
    /// Builds the state from `F_{π(j)}(w_0)` listed in visiting order.
    pub fn new(initial_evals: &[DenseVec]) -> Result<Self> {
        let n = initial_evals.len();
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        let m = initial_evals[0].len();
        let mut suffixes = vec![vec![0.0; m]; n + 1];
        for j in (0..n).rev() {
            check_dim(m, initial_evals[j].len())?;
            let mut s = suffixes[j + 1].clone();
            linalg::add_scaled(&mut s, 1.0, &initial_evals[j]);
            suffixes[j] = s;
        }
        Ok(Self {
            prefix_sum: vec![0.0; m],
            suffixes,
            i: 0,
        })
    }

    /// Evaluates `F_{π(j)}(w_0)` for every `j`: the epoch's extra `n` evaluations.
    pub fn initialize(prob: &dyn ProblemNL, pi: &[usize], w0: &[f64]) -> Result<Self> {
        check_dim(prob.p(), w0.len())?;
        let evals: Vec<DenseVec> = pi.iter().map(|&j| prob.eval_f(j, w0)).collect();
        Self::new(&evals)
    }

    pub fn index(&self) -> usize {
        self.i
    }

    pub fn n(&self) -> usize {
        self.suffixes.len() - 1
    }

    pub fn prefix_sum(&self) -> &[f64] {
        &self.prefix_sum
    }

    pub fn suffix_sum(&self) -> &[f64] {
        &self.suffixes[self.i]
    }

    /// Current estimate `(prefix + suffix) / n`.
    pub fn estimate(&self) -> DenseVec {
        let n = self.n() as f64;
        self.prefix_sum
            .iter()
            .zip(&self.suffixes[self.i])
            .map(|(a, b)| (a + b) / n)
            .collect()
    }
}

/// Advances to index `i + 1` with `new_eval = F_{π(i+1)}(w_i)` and returns the estimate.
pub fn estimate_f_option1(state: &mut Option1State, new_eval: &[f64]) -> Result<DenseVec> {
    if state.i >= state.n() {
        return Err(Error::EstimatorExhausted { n: state.n() });
    }
    check_dim(state.prefix_sum.len(), new_eval.len())?;
    linalg::add_scaled(&mut state.prefix_sum, 1.0, new_eval);
    state.i += 1;
    Ok(state.estimate())
}

/// Option 2: `F(w_0)`, reused for every inner step of the epoch.
pub fn estimate_f_option2(prob: &dyn ProblemNL, w0: &[f64]) -> Result<DenseVec> {
    full_f(prob, w0)
}

/// `∇F_j(w_prev)ᵀ K u*_γ(F_est)` for component `j = π̂(i)`.
pub fn hyper_gradient_nl(
    prob: &dyn ProblemNL,
    j: usize,
    w_prev: &[f64],
    f_est: &[f64],
    s: &SmoothingSpec,
) -> Result<DenseVec> {
    check_dim(prob.p(), w_prev.len())?;
    check_component(j, prob.n())?;
    let conj = smoothed_conjugate(f_est, prob.coupling(), prob.h(), s)?;
    let y = prob.coupling().apply(&conj.u_star);
    Ok(prob.jt_vec(j, w_prev, &y))
}

/// `∇_w H_j(w_prev, ũ)` for component `j = π̂(i)`.
pub fn hyper_gradient_nc(
    prob: &dyn ProblemNC,
    j: usize,
    w_prev: &[f64],
    u_tilde: &[f64],
) -> Result<DenseVec> {
    check_dim(prob.p(), w_prev.len())?;
    check_dim(prob.q(), u_tilde.len())?;
    check_component(j, prob.n())?;
    Ok(prob.grad_w(j, w_prev, u_tilde))
}

fn check_component(j: usize, n: usize) -> Result<()> {
    if j < n {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "component {j} out of range 0..{n}"
        )))
    }
}
