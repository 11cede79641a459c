//! Config-driven solver invocation, trace files, summaries and learning-rate sweeps.

use crate::config::{problem_name, Algorithm, DatasetSource, ExperimentConfig, ProblemKind};
use crate::error::{CliError, Result};
use shufmm::data::{generate_synthetic, parse_libsvm_with_dim};
use shufmm::problem::{
    build_model_selection, build_quadratic_minimax_with, ModelSelection, QuadraticMinimax,
};
use shufmm::solver_nc::{solve_nc, ConfigNC};
use shufmm::solver_nl::{
    compositional_sgd_baseline, solve_nl, ConfigNL, ConfigSgd, Epochs, StepSize, Termination,
};
use shufmm::trace::{real_cell, write_csv, TraceRow};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// A constructed benchmark instance.
pub enum BuiltProblem {
    ModelSelection(ModelSelection),
    Quadratic(QuadraticMinimax),
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<BuiltProblem> {
    match cfg.problem {
        ProblemKind::ModelSelection => {
            let data = match &cfg.dataset {
                DatasetSource::Synthetic {
                    n,
                    p,
                    margin_noise,
                    seed,
                } => generate_synthetic(*n, *p, *seed, *margin_noise)?,
                DatasetSource::File { path, feature_dim } => {
                    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
                    parse_libsvm_with_dim(BufReader::new(file), *feature_dim)?
                }
            };
            let mut prob = build_model_selection(data, cfg.lambda)?.with_blocks(cfg.k_b)?;
            if let Some(r) = cfg.region_radius {
                prob = prob.with_region_radius(r)?;
            }
            Ok(BuiltProblem::ModelSelection(prob))
        }
        ProblemKind::QuadraticOracle => {
            let q = &cfg.quadratic;
            Ok(BuiltProblem::Quadratic(build_quadratic_minimax_with(
                q.p, q.q, q.n, q.seed, q.dual, q.options,
            )?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStatus {
    Completed,
    TargetReached,
    Aborted,
    NoRun,
}

impl SeedStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SeedStatus::Completed => "completed",
            SeedStatus::TargetReached => "target-reached",
            SeedStatus::Aborted => "aborted",
            SeedStatus::NoRun => "no-run",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    pub status: SeedStatus,
    pub detail: Option<String>,
}

impl SeedOutcome {
    pub fn final_objective(&self) -> Option<f64> {
        self.rows
            .last()
            .and_then(|r| r.objective)
            .filter(|v| v.is_finite())
    }

    pub fn min_grad_map_norm(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.grad_map_norm)
            .filter(|v| v.is_finite())
            .reduce(f64::min)
    }
}

fn status_of(termination: &Termination) -> (SeedStatus, Option<String>) {
    match termination {
        Termination::Completed => (SeedStatus::Completed, None),
        Termination::TargetReached => (SeedStatus::TargetReached, None),
        Termination::NonFinite { epoch, context } => (
            SeedStatus::Aborted,
            Some(format!("non-finite value at epoch {epoch}: {context}")),
        ),
    }
}

/// Runs one seed, optionally with the step size replaced by `eta`.
pub fn run_seed(
    cfg: &ExperimentConfig,
    prob: &BuiltProblem,
    seed: u64,
    eta: Option<f64>,
) -> Result<SeedOutcome> {
    let name = cfg.algorithm.name();
    if cfg.epochs == Epochs::Fixed(0) {
        return Ok(SeedOutcome {
            seed,
            rows: Vec::new(),
            status: SeedStatus::NoRun,
            detail: None,
        });
    }
    let step = eta.map(StepSize::Fixed).unwrap_or(cfg.eta);
    let (rows, termination) = match (prob, cfg.algorithm) {
        (BuiltProblem::ModelSelection(p), Algorithm::SgdBaseline) => {
            let (StepSize::Fixed(eta), Epochs::Fixed(epochs)) = (step, cfg.epochs) else {
                return Err(CliError::Config(vec![
                    "`sgd-baseline` requires numeric `eta` and `epochs`".into(),
                ]));
            };
            let sgd = ConfigSgd {
                eta,
                epochs,
                gamma: cfg.gamma,
                tracking_weight: cfg.tracking_weight,
                seed,
                anchor: None,
                evaluate_objective: true,
                target_grad_norm: cfg.target_grad_norm,
            };
            let run =
                compositional_sgd_baseline(p, &vec![0.0; shufmm::problem::ProblemNL::p(p)], &sgd)?;
            (
                run.trace
                    .iter()
                    .map(|r| TraceRow::from_nl(r, seed, name))
                    .collect(),
                run.termination,
            )
        }
        (BuiltProblem::ModelSelection(p), alg) => {
            let option = alg.estimator_option().expect("validated pairing");
            let nl = ConfigNL {
                eta: step,
                epochs: cfg.epochs,
                epsilon: cfg.epsilon,
                gamma: cfg.gamma,
                option,
                permutation: cfg.permutation.mode(),
                seed,
                anchor: None,
                evaluate_objective: true,
                target_grad_norm: cfg.target_grad_norm,
                output_rule: cfg.output_rule,
            };
            let run = solve_nl(p, &vec![0.0; shufmm::problem::ProblemNL::p(p)], &nl)?;
            (
                run.trace
                    .iter()
                    .map(|r| TraceRow::from_nl(r, seed, name))
                    .collect(),
                run.termination,
            )
        }
        (BuiltProblem::Quadratic(p), _) => {
            let regime = cfg.nc_regime().expect("validated pairing");
            let nc = ConfigNC {
                regime,
                eta: step,
                eta_hat: cfg.eta_hat,
                inner_epochs: cfg.inner_epochs,
                epochs: cfg.epochs,
                epsilon: cfg.epsilon,
                permutation: cfg.permutation.mode(),
                seed,
                omega: cfg.omega,
                eta_hat_multiplier: cfg.eta_hat_multiplier,
                target_grad_norm: cfg.target_grad_norm,
                output_rule: cfg.output_rule,
                record_iterates: false,
            };
            use shufmm::problem::ProblemNC;
            let run = solve_nc(p, &vec![0.0; p.p()], &vec![0.0; p.q()], &nc)?;
            (
                run.trace
                    .iter()
                    .map(|r| TraceRow::from_nc(r, seed, name))
                    .collect(),
                run.termination,
            )
        }
    };
    let (status, detail) = status_of(&termination);
    Ok(SeedOutcome {
        seed,
        rows,
        status,
        detail,
    })
}

/// Runs every configured seed concurrently; outcomes follow the configured seed order.
fn run_all_seeds(
    cfg: &ExperimentConfig,
    prob: &BuiltProblem,
    eta: Option<f64>,
    per_seed_dir: Option<&Path>,
) -> Result<Vec<SeedOutcome>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&seed| {
                scope.spawn(move || -> Result<SeedOutcome> {
                    let outcome = run_seed(cfg, prob, seed, eta)?;
                    if let Some(dir) = per_seed_dir {
                        write_trace(
                            &dir.join(format!("{}.seed-{seed}.csv", cfg.name)),
                            &outcome.rows,
                            cfg.include_wall,
                        )?;
                    }
                    Ok(outcome)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    })
}

fn write_trace(path: &Path, rows: &[TraceRow], with_wall: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_csv(&mut out, rows, with_wall).map_err(|e| CliError::io(path, e))?;
    out.flush().map_err(|e| CliError::io(path, e))
}

/// Rows of all seeds ordered by `(seed, epoch)`.
pub fn merge_rows(outcomes: &[SeedOutcome]) -> Vec<TraceRow> {
    let mut rows: Vec<TraceRow> = outcomes
        .iter()
        .flat_map(|o| o.rows.iter().cloned())
        .collect();
    rows.sort_by_key(|r| (r.seed, r.epoch));
    rows
}

/// Median of the finite values; `None` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Flat `key = value` summary of a run.
pub fn summary_text(cfg: &ExperimentConfig, outcomes: &[SeedOutcome]) -> String {
    let alg = cfg.algorithm.name();
    let seeds: Vec<String> = outcomes.iter().map(|o| o.seed.to_string()).collect();
    let mut s = String::new();
    let _ = writeln!(s, "schema_version = {}", crate::config::SCHEMA_VERSION);
    let _ = writeln!(s, "name = {}", cfg.name);
    let _ = writeln!(s, "problem = {}", problem_name(cfg.problem));
    let _ = writeln!(s, "algorithm = {alg}");
    let _ = writeln!(s, "seeds = {}", seeds.join(","));
    let _ = writeln!(
        s,
        "{alg}.median_final_objective = {}",
        real_cell(median(
            outcomes.iter().filter_map(SeedOutcome::final_objective)
        ))
    );
    let _ = writeln!(
        s,
        "{alg}.median_min_grad_map_norm = {}",
        real_cell(median(
            outcomes.iter().filter_map(SeedOutcome::min_grad_map_norm)
        ))
    );
    for o in outcomes {
        let k = o.seed;
        let _ = writeln!(s, "seed.{k}.status = {}", o.status.as_str());
        let _ = writeln!(
            s,
            "seed.{k}.last_epoch = {}",
            o.rows
                .last()
                .map(|r| r.epoch.to_string())
                .unwrap_or_default()
        );
        let _ = writeln!(
            s,
            "seed.{k}.final_objective = {}",
            real_cell(o.final_objective())
        );
        let _ = writeln!(
            s,
            "seed.{k}.min_grad_map_norm = {}",
            real_cell(o.min_grad_map_norm())
        );
        if let Some(detail) = &o.detail {
            let _ = writeln!(s, "seed.{k}.detail = {detail}");
        }
    }
    s
}

#[derive(Debug)]
pub struct RunReport {
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
    pub outcomes: Vec<SeedOutcome>,
}

impl RunReport {
    pub fn aborted_seeds(&self) -> Vec<u64> {
        self.outcomes
            .iter()
            .filter(|o| o.status == SeedStatus::Aborted)
            .map(|o| o.seed)
            .collect()
    }

    /// `Err(NumericAbort)` when any seed aborted.
    pub fn into_result(self) -> Result<Self> {
        let aborted = self.aborted_seeds();
        if aborted.is_empty() {
            Ok(self)
        } else {
            let list: Vec<String> = aborted.iter().map(u64::to_string).collect();
            Err(CliError::NumericAbort(format!(
                "seeds {} aborted; truncated traces in {}",
                list.join(","),
                self.trace_path.display()
            )))
        }
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Runs all seeds, writing per-seed traces, the merged trace and the summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let dir = cfg.resolved_output_dir();
    prepare_dir(&dir)?;
    let prob = build_problem(cfg)?;
    let outcomes = run_all_seeds(cfg, &prob, None, Some(&dir))?;
    let trace_path = dir.join(format!("{}.csv", cfg.name));
    write_trace(&trace_path, &merge_rows(&outcomes), cfg.include_wall)?;
    let summary_path = dir.join(format!("{}.summary", cfg.name));
    write_text(&summary_path, &summary_text(cfg, &outcomes))?;
    Ok(RunReport {
        trace_path,
        summary_path,
        outcomes,
    })
}

pub const SWEEP_HEADER: &str =
    "eta,algorithm,median_final_objective,median_min_grad_map_norm,completed_seeds,aborted_seeds";

#[derive(Debug)]
pub struct SweepReport {
    pub sweep_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
}

/// Runs every step size of the grid and tabulates each one; no value is selected.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let dir = cfg.resolved_output_dir();
    prepare_dir(&dir)?;
    let prob = build_problem(cfg)?;
    let alg = cfg.algorithm.name();
    let mut table = format!("{SWEEP_HEADER}\n");
    let mut trace_paths = Vec::new();
    for &eta in &cfg.sweep_grid {
        let outcomes = run_all_seeds(cfg, &prob, Some(eta), None)?;
        let path = dir.join(format!("{}.eta-{eta:?}.csv", cfg.name));
        write_trace(&path, &merge_rows(&outcomes), cfg.include_wall)?;
        trace_paths.push(path);
        let aborted = outcomes
            .iter()
            .filter(|o| o.status == SeedStatus::Aborted)
            .count();
        let _ = writeln!(
            table,
            "{eta:?},{alg},{},{},{},{aborted}",
            real_cell(median(
                outcomes.iter().filter_map(SeedOutcome::final_objective)
            )),
            real_cell(median(
                outcomes.iter().filter_map(SeedOutcome::min_grad_map_norm)
            )),
            outcomes.len() - aborted,
        );
    }
    let sweep_path = dir.join(format!("{}.sweep.csv", cfg.name));
    write_text(&sweep_path, &table)?;
    Ok(SweepReport {
        sweep_path,
        trace_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_even_and_empty() {
        assert_eq!(median([3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median([4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median([f64::NAN]), None);
        assert_eq!(median(std::iter::empty()), None);
    }

    #[test]
    fn merge_orders_by_seed_then_epoch() {
        let row = |seed, epoch| TraceRow {
            epoch,
            seed,
            algorithm: "a".into(),
            objective: None,
            grad_map_norm: None,
            gamma: None,
            f_evals: None,
            jac_evals: None,
            gradw_evals: None,
            gradu_evals: None,
            wall_ms: 0.0,
        };
        let outcome = |seed, rows| SeedOutcome {
            seed,
            rows,
            status: SeedStatus::Completed,
            detail: None,
        };
        let merged = merge_rows(&[
            outcome(2, vec![row(2, 0), row(2, 1)]),
            outcome(1, vec![row(1, 0)]),
        ]);
        let keys: Vec<(u64, usize)> = merged.iter().map(|r| (r.seed, r.epoch)).collect();
        assert_eq!(keys, vec![(1, 0), (2, 0), (2, 1)]);
    }
}
