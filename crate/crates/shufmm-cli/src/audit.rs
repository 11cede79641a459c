//! Empirical audit of declared assumption constants at seeded random points.

use crate::runner::BuiltProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use shufmm::linalg::{self, DenseVec};
use shufmm::problem::{ConstantsNC, ConstantsNL, ProblemNC, ProblemNL};
use std::fmt;

pub const AUDIT_SAMPLES: usize = 100;

/// Worst observed ratio of a measured quantity to its declared bound; above one is a violation.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditEntry {
    pub constant: &'static str,
    pub declared: f64,
    pub worst_ratio: f64,
}

impl AuditEntry {
    pub fn violated(&self) -> bool {
        !(self.worst_ratio <= 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub samples: usize,
    pub seed: u64,
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn entry(&self, constant: &str) -> Option<&AuditEntry> {
        self.entries.iter().find(|e| e.constant == constant)
    }

    pub fn warnings(&self) -> Vec<&AuditEntry> {
        self.entries.iter().filter(|e| e.violated()).collect()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "constant audit: {} samples, seed {}",
            self.samples, self.seed
        )?;
        for e in &self.entries {
            let flag = if e.violated() { "WARN" } else { "ok" };
            writeln!(
                f,
                "  {:<12} declared {:<24e} worst ratio {:<24e} {flag}",
                e.constant, e.declared, e.worst_ratio
            )?;
        }
        Ok(())
    }
}

/// Ratio of a measurement to its bound, treating `0/0` as zero.
fn ratio(measured: f64, bound: f64) -> f64 {
    if measured == 0.0 {
        0.0
    } else {
        measured / bound
    }
}

/// Uniform point in the centred ball of the given radius.
fn ball_point(dim: usize, radius: f64, rng: &mut ChaCha8Rng) -> DenseVec {
    let mut v: DenseVec = (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = linalg::norm(&v);
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    v.iter_mut().for_each(|x| *x *= r / norm);
    v
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> DenseVec {
    let v: DenseVec = (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    linalg::scaled(1.0 / linalg::norm(&v), &v)
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    linalg::dist_sq(a, b).sqrt()
}

/// `(1/n) Σ ‖g_i − ḡ‖²` and `‖ḡ‖²`.
fn variance(grads: &[DenseVec]) -> (f64, f64) {
    let n = grads.len() as f64;
    let mut mean = vec![0.0; grads[0].len()];
    for g in grads {
        linalg::add_scaled(&mut mean, 1.0 / n, g);
    }
    let var = grads.iter().map(|g| linalg::dist_sq(g, &mean)).sum::<f64>() / n;
    (var, linalg::norm_sq(&mean))
}

/// Audits Lipschitz, strong concavity and variance constants of an NC problem over the
/// balls of radii `r_w` and `r_u`.
pub fn audit_nc(
    prob: &dyn ProblemNC,
    declared: &ConstantsNC,
    r_w: f64,
    r_u: f64,
    samples: usize,
    seed: u64,
) -> AuditReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(DenseVec, DenseVec)> = (0..samples)
        .map(|_| {
            (
                ball_point(prob.p(), r_w, &mut rng),
                ball_point(prob.q(), r_u, &mut rng),
            )
        })
        .collect();
    let (mut lip_w, mut lip_u, mut min_curv, mut var_w, mut var_u) =
        (0.0f64, 0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
    for k in 0..samples {
        let (wa, ua) = &points[k];
        let (wb, ub) = &points[(k + 1) % samples];
        let joint = (linalg::dist_sq(wa, wb) + linalg::dist_sq(ua, ub)).sqrt();
        let du_sq = linalg::dist_sq(ua, ub);
        let mut gw = Vec::with_capacity(prob.n());
        let mut gu = Vec::with_capacity(prob.n());
        for i in 0..prob.n() {
            let (gwa, gua) = (prob.grad_w(i, wa, ua), prob.grad_u(i, wa, ua));
            if joint > 0.0 {
                lip_w = lip_w.max(diff_norm(&gwa, &prob.grad_w(i, wb, ub)) / joint);
                lip_u = lip_u.max(diff_norm(&gua, &prob.grad_u(i, wb, ub)) / joint);
            }
            if du_sq > 0.0 {
                let gub = prob.grad_u(i, wa, ub);
                let curvature =
                    -linalg::inner(&linalg::sub(&gua, &gub), &linalg::sub(ua, ub)) / du_sq;
                min_curv = min_curv.min(curvature);
            }
            gw.push(gwa);
            gu.push(gua);
        }
        let (vw, mw) = variance(&gw);
        let (vu, mu) = variance(&gu);
        var_w = var_w.max(ratio(
            vw,
            declared.theta_w * mw + declared.sigma_w * declared.sigma_w,
        ));
        var_u = var_u.max(ratio(
            vu,
            declared.theta_u * mu + declared.sigma_u * declared.sigma_u,
        ));
    }
    let entries = vec![
        AuditEntry {
            constant: "L_w",
            declared: declared.l_w,
            worst_ratio: ratio(lip_w, declared.l_w),
        },
        AuditEntry {
            constant: "L_u",
            declared: declared.l_u,
            worst_ratio: ratio(lip_u, declared.l_u),
        },
        AuditEntry {
            constant: "mu_H",
            declared: declared.mu_h_coupling,
            worst_ratio: ratio(declared.mu_h_coupling, min_curv.max(0.0)),
        },
        AuditEntry {
            constant: "sigma_w",
            declared: declared.sigma_w,
            worst_ratio: var_w,
        },
        AuditEntry {
            constant: "sigma_u",
            declared: declared.sigma_u,
            worst_ratio: var_u,
        },
    ];
    AuditReport {
        samples,
        seed,
        entries,
    }
}

/// Audits the Lipschitz and Jacobian variance constants of an NL problem over the ball of radius `r_w`.
pub fn audit_nl(
    prob: &dyn ProblemNL,
    declared: &ConstantsNL,
    r_w: f64,
    samples: usize,
    seed: u64,
) -> AuditReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<DenseVec> = (0..samples)
        .map(|_| ball_point(prob.p(), r_w, &mut rng))
        .collect();
    let directions: Vec<DenseVec> = (0..samples)
        .map(|_| unit_vector(prob.m(), &mut rng))
        .collect();
    let (mut lip_f, mut lip_j, mut var_j) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..samples {
        let (wa, wb, y) = (&points[k], &points[(k + 1) % samples], &directions[k]);
        let dw = diff_norm(wa, wb);
        let mut jt = Vec::with_capacity(prob.n());
        for i in 0..prob.n() {
            let jta = prob.jt_vec(i, wa, y);
            if dw > 0.0 {
                lip_f = lip_f.max(diff_norm(&prob.eval_f(i, wa), &prob.eval_f(i, wb)) / dw);
                lip_j = lip_j.max(diff_norm(&jta, &prob.jt_vec(i, wb, y)) / dw);
            }
            jt.push(jta);
        }
        var_j = var_j.max(variance(&jt).0);
    }
    let entries = vec![
        AuditEntry {
            constant: "M_F",
            declared: declared.m_f,
            worst_ratio: ratio(lip_f, declared.m_f),
        },
        AuditEntry {
            constant: "L_F",
            declared: declared.l_f,
            worst_ratio: ratio(lip_j, declared.l_f),
        },
        AuditEntry {
            constant: "sigma_J",
            declared: declared.sigma_j,
            worst_ratio: ratio(var_j, declared.sigma_j * declared.sigma_j),
        },
    ];
    AuditReport {
        samples,
        seed,
        entries,
    }
}

/// Audits a built problem against its own declared constants.
pub fn audit_problem(prob: &BuiltProblem, seed: u64) -> AuditReport {
    match prob {
        BuiltProblem::ModelSelection(p) => audit_nl(
            p,
            ProblemNL::constants(p),
            p.region_radius(),
            AUDIT_SAMPLES,
            seed,
        ),
        BuiltProblem::Quadratic(p) => {
            let (r_w, r_u) = p.region_radii();
            audit_nc(p, ProblemNC::constants(p), r_w, r_u, AUDIT_SAMPLES, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_points_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            assert!(linalg::norm(&ball_point(4, 2.5, &mut rng)) <= 2.5 + 1e-12);
        }
    }

    #[test]
    fn zero_over_zero_is_zero() {
        assert_eq!(ratio(0.0, 0.0), 0.0);
        assert!(AuditEntry {
            constant: "x",
            declared: 0.0,
            worst_ratio: ratio(1.0, 0.0)
        }
        .violated());
    }
}
