//! Acceptance criteria 1 to 10. Run with `--nocapture` to see one PASS/FAIL line per criterion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shufmm::data::generate_synthetic;
use shufmm::estimators::{
    estimate_f_option1, estimate_f_option2, random_permutation, Option1State, PermutationMode,
};
use shufmm::linalg::{self, DenseVec, IdentityOperator};
use shufmm::metrics::kkt_residual_nc;
use shufmm::problem::{
    build_model_selection, build_quadratic_minimax, build_quadratic_minimax_with,
    build_sinusoidal_composite, danskin_grad, full_f, DerivedNC, ProblemNC, ProblemNL,
    QuadraticDual, QuadraticOptions,
};
use shufmm::prox::{
    smoothed_conjugate, BoxIndicator, ElasticNet, L1Ball, ProxFn, SmoothingSpec, SquaredL2,
};
use shufmm::solver_nc::{
    auto_params_nc, eta_hat_single_epoch, gradient_ascent_rate, inner_epochs_full,
    inner_epochs_semi, m_omega, semi_contraction, shuffling_ascent_bound, solve_nc, ConfigNC,
    NcRegime, RunNC,
};
use shufmm::solver_nl::{
    auto_params_from_constants, compositional_sgd_baseline, solve_nl, AutoMode, ConfigNL,
    ConfigSgd, Epochs, EstimatorOption, GammaSchedule, StepSize,
};
use shufmm::trace::{to_csv_string, TraceRow};
use std::time::{Duration, Instant};

fn report(id: u32, title: &str, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [{status}] {title}: {detail}");
    assert!(pass, "criterion {id} failed: {detail}");
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

fn random_vec(len: usize, scale: f64, rng: &mut ChaCha8Rng) -> DenseVec {
    (0..len)
        .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
        .collect()
}

fn phi_zero(prob: &dyn ProblemNC, w: &[f64]) -> f64 {
    let u = prob.exact_u_star(w).expect("oracle benchmark");
    shufmm::problem::full_h(prob, w, &u) - prob.h().value(&u).expect("maximizer in dom h")
}

#[test]
fn criterion_01_danskin_oracle() {
    const TOL: f64 = 1e-5;
    const STEP: f64 = 1e-5;
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let prob = build_quadratic_minimax(3, 3, 4, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_vec(3, 2.0, &mut rng);
        let grad = danskin_grad(&prob, &w, &prob.exact_u_star(&w).unwrap());
        let fd: DenseVec = (0..3)
            .map(|k| {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[k] += STEP;
                wm[k] -= STEP;
                (phi_zero(&prob, &wp) - phi_zero(&prob, &wm)) / (2.0 * STEP)
            })
            .collect();
        let rel = linalg::dist_sq(&grad, &fd).sqrt() / linalg::norm(&grad).max(1e-12);
        worst = worst.max(rel);
    }
    let elapsed = start.elapsed();
    report(
        1,
        "Danskin gradient vs finite differences",
        worst <= TOL && elapsed < Duration::from_secs(5),
        format!("worst relative error {worst:.2e} (tol {TOL:.0e}), {elapsed:.2?} (limit 5 s)"),
    );
}

/// `max_u ⟨v, u⟩ − h(u)` over a grid of step `1/steps` on `[−1, 1]^d` intersected with `dom h`.
fn grid_conjugate(v: &[f64], h: &dyn ProxFn, steps: i32) -> f64 {
    let d = v.len();
    let axis: Vec<f64> = (-steps..=steps).map(|k| k as f64 / steps as f64).collect();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; d];
    loop {
        let u: DenseVec = idx.iter().map(|&k| axis[k]).collect();
        if let Some(hv) = h.value(&u) {
            best = best.max(linalg::inner(v, &u) - hv);
        }
        let mut pos = 0;
        loop {
            if pos == d {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < axis.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[test]
fn criterion_02_smoothing_sandwich() {
    const SLACK: f64 = -1e-9;
    const SAMPLES: usize = 1000;
    let start = Instant::now();
    let cases: Vec<(usize, Box<dyn ProxFn>)> = vec![
        (2, Box::new(L1Ball { radius: 1.0 })),
        (3, Box::new(L1Ball { radius: 1.0 })),
        (
            2,
            Box::new(BoxIndicator {
                lower: -1.0,
                upper: 1.0,
                dim: 2,
            }),
        ),
        (
            3,
            Box::new(BoxIndicator {
                lower: -0.5,
                upper: 1.0,
                dim: 3,
            }),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::INFINITY;
    for (d, h) in &cases {
        let k = IdentityOperator::new(*d);
        for _ in 0..SAMPLES / cases.len() {
            let v = random_vec(*d, 3.0, &mut rng);
            let gamma = 0.01 + 2.0 * rng.random::<f64>();
            let anchor = h.prox(&random_vec(*d, 1.0, &mut rng), 1.0);
            let s = SmoothingSpec::new(gamma, anchor, h.as_ref()).unwrap();
            let smoothed = smoothed_conjugate(&v, &k, h.as_ref(), &s).unwrap().value;
            let exact = grid_conjugate(&v, h.as_ref(), 20);
            worst = worst
                .min(exact - smoothed)
                .min(smoothed + gamma * s.b_sup - exact);
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        "phi_gamma <= phi_0 <= phi_gamma + gamma*B",
        worst >= SLACK && elapsed < Duration::from_secs(10),
        format!("smallest slack {worst:.2e} (limit {SLACK:.0e}) over {SAMPLES} points, {elapsed:.2?} (limit 10 s)"),
    );
}

#[test]
fn criterion_03_estimator_bound() {
    const SLACK: f64 = -1e-10;
    const OPTION2_TOL: f64 = 1e-15;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::INFINITY;
    let mut option2_err: f64 = 0.0;
    for trial in 0..100 {
        let n = rng.random_range(1..=16);
        let p = rng.random_range(1..=8);
        let m = rng.random_range(1..=4);
        let prob = build_sinusoidal_composite(p, m, 2, n, trial).unwrap();
        let m_f = prob.constants().m_f;
        let w0 = random_vec(p, 2.0, &mut rng);
        let iterates: Vec<DenseVec> = (0..n)
            .map(|j| {
                if j == 0 {
                    w0.clone()
                } else {
                    random_vec(p, 2.0, &mut rng)
                }
            })
            .collect();
        let pi = random_permutation(n, &mut rng);
        let exact = full_f(&prob, &w0).unwrap();
        let drift: f64 = iterates.iter().map(|w| linalg::dist_sq(w, &w0)).sum();
        let rhs = m_f * m_f / n as f64 * drift;
        let mut state = Option1State::initialize(&prob, &pi, &w0).unwrap();
        for (i, &j) in pi.iter().enumerate() {
            let est = estimate_f_option1(&mut state, &prob.eval_f(j, &iterates[i])).unwrap();
            worst = worst.min(rhs - linalg::dist_sq(&est, &exact));
        }
        let opt2 = estimate_f_option2(&prob, &w0).unwrap();
        option2_err = option2_err.max(linalg::dist_sq(&opt2, &exact).sqrt());
    }
    report(
        3,
        "Option 1 estimator bound, Option 2 exact",
        worst >= SLACK && option2_err <= OPTION2_TOL,
        format!("smallest slack {worst:.2e} (limit {SLACK:.0e}), Option 2 error {option2_err:.1e} (tol {OPTION2_TOL:.0e})"),
    );
}

#[test]
fn criterion_04_prox_contraction() {
    const SLACK: f64 = -1e-10;
    let funcs: Vec<(&str, Box<dyn ProxFn>)> = vec![
        ("squared-l2", Box::new(SquaredL2 { lambda: 0.7 })),
        ("elastic-net", Box::new(ElasticNet { l1: 0.3, l2: 1.5 })),
        ("weak-ridge", Box::new(SquaredL2 { lambda: 1e-3 })),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    for (_, g) in &funcs {
        let mu = g.strong_convexity();
        assert!(mu > 0.0);
        for _ in 0..200 {
            let d = rng.random_range(1..=6);
            let x = random_vec(d, 5.0, &mut rng);
            let y = random_vec(d, 5.0, &mut rng);
            let eta = 10f64.powf(4.0 * rng.random::<f64>() - 2.0);
            let lhs = linalg::dist_sq(&g.prox(&x, eta), &g.prox(&y, eta));
            let rhs = linalg::dist_sq(&x, &y) / (1.0 + 2.0 * mu * eta);
            worst = worst.min(rhs - lhs);
        }
    }
    let names: Vec<&str> = funcs.iter().map(|(n, _)| *n).collect();
    report(
        4,
        "prox contraction 1/(1+2*mu*eta)",
        worst >= SLACK,
        format!(
            "smallest slack {worst:.2e} (limit {SLACK:.0e}) over 200 triples each for {names:?}"
        ),
    );
}

fn oracle_run(
    prob: &dyn ProblemNC,
    regime: NcRegime,
    seed: u64,
    eta_hat: Option<f64>,
    inner: Option<usize>,
    epochs: usize,
) -> RunNC {
    let cfg = ConfigNC {
        regime,
        seed,
        epsilon: 0.1,
        eta_hat: eta_hat.map_or(StepSize::Auto, StepSize::Fixed),
        inner_epochs: inner.map_or(Epochs::Auto, Epochs::Fixed),
        epochs: Epochs::Fixed(epochs),
        record_iterates: true,
        ..ConfigNC::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w0 = random_vec(prob.p(), 1.0, &mut rng);
    let u0 = random_vec(prob.q(), 3.0, &mut rng);
    let mut run = solve_nc(prob, &w0, &u0, &cfg).unwrap();
    run.iterates.insert(0, (w0, u0));
    run
}

#[test]
fn criterion_05_inner_loop_rates() {
    const SLACK: f64 = -1e-12;
    let mut worst_c1 = f64::INFINITY;
    let mut worst_c3 = f64::INFINITY;
    let mut checked = (0usize, 0usize);
    for seed in 0..20 {
        let prob = build_quadratic_minimax(4, 3, 6, seed).unwrap();
        let c = *prob.constants();
        let mu_h = prob.h().strong_convexity();
        let semi_settings = [(None, None), (None, Some(3))];
        for (eta_hat, inner) in semi_settings {
            let run = oracle_run(&prob, NcRegime::Semi, seed, eta_hat, inner, 30);
            let rho = gradient_ascent_rate(c.l_u, c.mu_h_coupling, mu_h, run.params.eta_hat);
            for rec in &run.trace[1..] {
                let (gap, start) = (rec.u_gap.unwrap(), rec.u_gap_start.unwrap());
                let bound = rho.powi(run.params.inner_epochs as i32) * start * start;
                worst_c1 = worst_c1.min(bound - gap * gap);
                checked.0 += 1;
            }
        }
        let full_settings = [(None, None), (Some(0.2), Some(4)), (Some(0.5), Some(1))];
        for (eta_hat, inner) in full_settings {
            let epochs = if inner.is_none() { 4 } else { 30 };
            let run = oracle_run(&prob, NcRegime::FullMuH, seed, eta_hat, inner, epochs);
            for (t, rec) in run.trace.iter().enumerate().skip(1) {
                let w_prev = &run.iterates[t - 1].0;
                let anchor = linalg::norm_sq(&danskin_grad(
                    &prob,
                    w_prev,
                    &prob.exact_u_star(w_prev).unwrap(),
                ));
                let b = shuffling_ascent_bound(
                    prob.n(),
                    run.params.inner_epochs,
                    run.params.eta_hat,
                    c.l_u,
                    c.mu_h_coupling,
                    mu_h,
                    c.theta_u,
                    c.sigma_u,
                    anchor,
                );
                let (gap, start) = (rec.u_gap.unwrap(), rec.u_gap_start.unwrap());
                worst_c3 = worst_c3.min(b.factor * start * start + b.additive - gap * gap);
                checked.1 += 1;
            }
        }
    }
    report(
        5,
        "inner-loop contraction (gradient and shuffling ascent)",
        worst_c1 >= SLACK && worst_c3 >= SLACK,
        format!(
            "gradient ascent slack {worst_c1:.2e} over {} epochs, shuffling ascent slack {worst_c3:.2e} over {} epochs (limit {SLACK:.0e})",
            checked.0, checked.1
        ),
    );
}

#[test]
fn criterion_06_algorithm1_model_selection() {
    const GRID: [f64; 11] = [
        100.0, 50.0, 10.0, 5.0, 1.0, 0.5, 0.1, 0.05, 0.01, 0.001, 0.0001,
    ];
    const EPOCHS: usize = 200;
    const SEEDS: u64 = 10;
    const RATIO: f64 = 0.2;
    let start = Instant::now();
    let problems: Vec<_> = (0..SEEDS)
        .map(|seed| {
            let data = generate_synthetic(500, 20, seed, 0.1).unwrap();
            build_model_selection(data, 1e-4)
                .unwrap()
                .with_blocks(16)
                .unwrap()
        })
        .collect();
    let mut summaries = Vec::new();
    for eta in GRID {
        let mut ratios = Vec::new();
        let mut drops = Vec::new();
        for (seed, prob) in problems.iter().enumerate() {
            let cfg = ConfigNL {
                eta: StepSize::Fixed(eta),
                epochs: Epochs::Fixed(EPOCHS),
                gamma: GammaSchedule::Decreasing,
                option: EstimatorOption::One,
                seed: seed as u64,
                ..ConfigNL::default()
            };
            let run = solve_nl(prob, &[0.0; 20], &cfg).unwrap();
            if run.trace.len() != EPOCHS + 1 {
                ratios.push(f64::INFINITY);
                drops.push(f64::INFINITY);
                continue;
            }
            let first = run.trace[1].grad_map_norm;
            let running_min = run.trace[1..]
                .iter()
                .map(|r| r.grad_map_norm)
                .fold(f64::INFINITY, f64::min);
            ratios.push(running_min / first);
            drops.push(run.trace[EPOCHS].psi_gamma - run.trace[1].psi_gamma);
        }
        summaries.push((eta, median(&mut ratios), median(&mut drops)));
    }
    for (eta, ratio, drop) in &summaries {
        println!("    eta {eta:>8}: median min-norm ratio {ratio:.4}, median objective change {drop:+.4e}");
    }
    let (eta, ratio, drop) =
        summaries
            .iter()
            .copied()
            .fold((f64::NAN, f64::INFINITY, f64::NAN), |best, s| {
                if s.1 < best.1 {
                    s
                } else {
                    best
                }
            });
    let elapsed = start.elapsed();
    report(
        6,
        "Algorithm 1 on synthetic model selection",
        ratio <= RATIO && drop < 0.0 && elapsed < Duration::from_secs(60),
        format!(
            "tuned eta {eta}: median ratio {ratio:.4} (limit {RATIO}), median objective change {drop:+.3e} (must be < 0), {elapsed:.2?} (limit 60 s)"
        ),
    );
}

#[test]
fn criterion_07_algorithm2_quadratic() {
    const EPSILON: f64 = 0.05;
    let start = Instant::now();
    let options = QuadraticOptions {
        heterogeneity: 0.02,
        coupling_scale: 0.3,
        min_curvature: 0.3,
        dual_spread: 0.0,
    };
    let prob =
        build_quadratic_minimax_with(5, 5, 8, 0, QuadraticDual::Unconstrained, options).unwrap();
    let l_phi0 = DerivedNC::new(&prob).unwrap().l_phi0;
    let (w0, u0) = (vec![0.0; 5], vec![0.0; 5]);
    let mut all_pass = true;
    let mut details = Vec::new();
    for (name, regime) in [
        ("semi", NcRegime::Semi),
        ("full S>1", NcRegime::FullMuH),
        ("full S=1", NcRegime::FullS1),
    ] {
        let auto = auto_params_nc(&prob, &w0, &u0, regime, EPSILON, 1.0, 15.0).unwrap();
        let cfg = ConfigNC {
            regime,
            epsilon: EPSILON,
            seed: 7,
            target_grad_norm: Some(EPSILON),
            ..ConfigNC::default()
        };
        let run = solve_nc(&prob, &w0, &u0, &cfg).unwrap();
        let best = run.trace[run.output_epoch].grad_map_norm_w;
        let kkt = kkt_residual_nc(&prob, &run.w_output, run.params.eta, None).unwrap();
        let kkt_limit = (1.0 + run.params.eta * l_phi0) * EPSILON;
        let used = run.trace.len() - 1;
        let pass = best <= EPSILON && kkt.joint_norm <= kkt_limit && used <= auto.params.epochs;
        all_pass &= pass;
        details.push(format!(
            "{name}: min norm {best:.4} after {used}/{} epochs (S={}), KKT {:.4} <= {kkt_limit:.4}",
            auto.params.epochs, run.params.inner_epochs, kkt.joint_norm
        ));
    }
    let elapsed = start.elapsed();
    report(
        7,
        "Algorithm 2 variants reach epsilon = 0.05",
        all_pass && elapsed < Duration::from_secs(120),
        format!("{}; {elapsed:.2?} (limit 120 s)", details.join("; ")),
    );
}

#[test]
fn criterion_08_step_size_calculators() {
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let nl =
        auto_params_from_constants(1.0, 0.0, 2.0, 1.0, 0.1, AutoMode::Deterministic, 1).unwrap();
    checks.push(("NL eta = 0.05", nl.eta == 0.1 / 4f64.sqrt() && !nl.capped));
    checks.push(("NL T = floor(16*sqrt(2)/0.001) = 22627", nl.epochs == 22627));
    let degenerate =
        auto_params_from_constants(2.0, 0.0, 0.0, 1.0, 0.1, AutoMode::Deterministic, 1).unwrap();
    checks.push((
        "NL degenerate eta = 1/(8Q)",
        degenerate.eta == 1.0 / 16.0 && degenerate.capped,
    ));
    checks.push((
        "NL degenerate T = 16*4Q/eps^2 = 12800",
        degenerate.epochs == 12800,
    ));
    checks.push(("full-muH S = 12", inner_epochs_full(1.0, 0.1) == 12));
    checks.push((
        "full-S1 eta_hat = 0.06",
        (eta_hat_single_epoch(2.0, 0.001, 15.0) - 0.06).abs() <= 1e-17,
    ));
    let (l_u, l_w, mu_cap, kappa) = (3.0, 2.0, 1.0, 3.0);
    let eta_hat = 2.0 / (l_u + mu_cap);
    let b0 = semi_contraction(eta_hat, l_u, mu_cap, 0.0);
    let eta = b0 / (l_u * l_u * kappa * kappa + 2.0 * b0 * b0 * l_w * l_w).sqrt();
    checks.push((
        "semi omega = 1/B0 gives S = 1",
        inner_epochs_semi(m_omega(1.0 / b0, eta, l_u, kappa, l_w), b0) == 1,
    ));
    let failed: Vec<&str> = checks
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| *n)
        .collect();
    report(
        8,
        "step-size calculators",
        failed.is_empty(),
        format!(
            "{} of {} substitutions exact; failed: {failed:?}",
            checks.len() - failed.len(),
            checks.len()
        ),
    );
}

fn nl_traces(seed: u64) -> Vec<String> {
    let prob = build_sinusoidal_composite(4, 3, 2, 6, 1).unwrap();
    let mut out = Vec::new();
    for (name, option) in [
        ("sgm-opt1", EstimatorOption::One),
        ("sgm-opt2", EstimatorOption::Two),
    ] {
        let cfg = ConfigNL {
            eta: StepSize::Fixed(0.05),
            epochs: Epochs::Fixed(15),
            option,
            seed,
            ..ConfigNL::default()
        };
        let run = solve_nl(&prob, &[0.1; 4], &cfg).unwrap();
        let rows: Vec<TraceRow> = run
            .trace
            .iter()
            .map(|r| TraceRow::from_nl(r, seed, name))
            .collect();
        out.push(to_csv_string(&rows, false));
    }
    let cfg = ConfigSgd {
        eta: 0.05,
        epochs: 15,
        seed,
        ..ConfigSgd::default()
    };
    let run = compositional_sgd_baseline(&prob, &[0.1; 4], &cfg).unwrap();
    let rows: Vec<TraceRow> = run
        .trace
        .iter()
        .map(|r| TraceRow::from_nl(r, seed, "sgd-baseline"))
        .collect();
    out.push(to_csv_string(&rows, false));
    out
}

fn nc_traces(seed: u64) -> Vec<String> {
    let prob = build_quadratic_minimax(4, 3, 6, 2).unwrap();
    let mut out = Vec::new();
    for (name, regime, inner) in [
        ("sgm-nc-semi", NcRegime::Semi, 2),
        ("sgm-nc-full", NcRegime::FullMuH, 3),
        ("sgm-nc-full-s1", NcRegime::FullS1, 1),
    ] {
        let cfg = ConfigNC {
            regime,
            eta: StepSize::Fixed(0.05),
            eta_hat: StepSize::Fixed(0.1),
            inner_epochs: Epochs::Fixed(inner),
            epochs: Epochs::Fixed(15),
            permutation: PermutationMode::RandomIndependent,
            seed,
            ..ConfigNC::default()
        };
        let run = solve_nc(&prob, &[0.1; 4], &[0.0; 3], &cfg).unwrap();
        let rows: Vec<TraceRow> = run
            .trace
            .iter()
            .map(|r| TraceRow::from_nc(r, seed, name))
            .collect();
        out.push(to_csv_string(&rows, false));
    }
    out
}

fn without_seed_column(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|line| {
            line.split(',')
                .enumerate()
                .filter(|(k, _)| *k != 1)
                .map(|(_, c)| c)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect()
}

#[test]
fn criterion_09_determinism() {
    let all = |seed| {
        nl_traces(seed)
            .into_iter()
            .chain(nc_traces(seed))
            .collect::<Vec<String>>()
    };
    let mut identical = 0;
    let mut total = 0;
    for seed in [0, 11] {
        let (first, second) = (all(seed), all(seed));
        total += first.len();
        identical += first.iter().zip(&second).filter(|(a, b)| a == b).count();
    }
    let (base, other) = (all(0), all(11));
    let changed = base
        .iter()
        .zip(&other)
        .filter(|(a, b)| without_seed_column(a) != without_seed_column(b))
        .count();
    report(
        9,
        "byte-identical traces for equal seeds",
        identical == total && changed == base.len(),
        format!("{identical}/{total} solver traces identical on repeat; {changed}/{} change with the seed", base.len()),
    );
}

#[test]
fn criterion_10_oracle_accounting() {
    let prob = build_sinusoidal_composite(3, 2, 2, 7, 5).unwrap();
    let n = prob.n() as u64;
    let mut mismatches = Vec::new();
    for (option, f_per_epoch) in [(EstimatorOption::One, 2 * n), (EstimatorOption::Two, n)] {
        let cfg = ConfigNL {
            eta: StepSize::Fixed(0.05),
            epochs: Epochs::Fixed(12),
            option,
            ..ConfigNL::default()
        };
        let run = solve_nl(&prob, &[0.0; 3], &cfg).unwrap();
        for pair in run.trace.windows(2) {
            let (df, dj) = (
                pair[1].f_evals - pair[0].f_evals,
                pair[1].jac_evals - pair[0].jac_evals,
            );
            if df != f_per_epoch || dj != n {
                mismatches.push(format!(
                    "{option:?} epoch {}: f {df} jac {dj}",
                    pair[1].epoch
                ));
            }
        }
    }
    let quad = build_quadratic_minimax(3, 2, 5, 1).unwrap();
    let nq = quad.n() as u64;
    for (regime, inner) in [
        (NcRegime::Semi, 4),
        (NcRegime::FullMuH, 3),
        (NcRegime::FullS1, 1),
    ] {
        let cfg = ConfigNC {
            regime,
            eta: StepSize::Fixed(0.05),
            eta_hat: StepSize::Fixed(0.1),
            inner_epochs: Epochs::Fixed(inner),
            epochs: Epochs::Fixed(10),
            ..ConfigNC::default()
        };
        let run = solve_nc(&quad, &[0.0; 3], &[0.0; 2], &cfg).unwrap();
        for pair in run.trace.windows(2) {
            let dw = pair[1].gradw_evals - pair[0].gradw_evals;
            let du = pair[1].gradu_evals - pair[0].gradu_evals;
            if dw != nq || du != inner as u64 * nq {
                mismatches.push(format!(
                    "{regime:?} epoch {}: gradw {dw} gradu {du}",
                    pair[1].epoch
                ));
            }
        }
    }
    report(
        10,
        "oracle-complexity accounting",
        mismatches.is_empty(),
        format!("NL: 2n or n F-evals and n JVPs per epoch; NC: n grad_w and S*n grad_u per epoch; mismatches {mismatches:?}"),
    );
}
