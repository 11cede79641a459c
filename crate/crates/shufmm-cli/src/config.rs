//! Flat `key = value` experiment configuration with an explicit schema version.

use crate::error::{CliError, Result};
use shufmm::estimators::PermutationMode;
use shufmm::metrics::OutputRule;
use shufmm::problem::{QuadraticDual, QuadraticOptions};
use shufmm::solver_nc::NcRegime;
use shufmm::solver_nl::{Epochs, EstimatorOption, GammaSchedule, StepSize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const SCHEMA_VERSION: u32 = 1;
pub const OUTPUT_DIR_ENV: &str = "SHUFMM_OUTPUT_DIR";
/// Learning-rate grid of the tuning sweep.
pub const LEARNING_RATE_GRID: [f64; 11] = [
    100.0, 50.0, 10.0, 5.0, 1.0, 0.5, 0.1, 0.05, 0.01, 0.001, 0.0001,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    ModelSelection,
    QuadraticOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    SgmOpt1,
    SgmOpt2,
    SgmNcSemi,
    SgmNcFull,
    SgmNcFullS1,
    SgdBaseline,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::SgmOpt1,
        Algorithm::SgmOpt2,
        Algorithm::SgmNcSemi,
        Algorithm::SgmNcFull,
        Algorithm::SgmNcFullS1,
        Algorithm::SgdBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SgmOpt1 => "sgm-opt1",
            Algorithm::SgmOpt2 => "sgm-opt2",
            Algorithm::SgmNcSemi => "sgm-nc-semi",
            Algorithm::SgmNcFull => "sgm-nc-full",
            Algorithm::SgmNcFullS1 => "sgm-nc-full-s1",
            Algorithm::SgdBaseline => "sgd-baseline",
        }
    }

    pub fn is_nonconvex_linear(self) -> bool {
        matches!(
            self,
            Algorithm::SgmOpt1 | Algorithm::SgmOpt2 | Algorithm::SgdBaseline
        )
    }

    pub fn estimator_option(self) -> Option<EstimatorOption> {
        match self {
            Algorithm::SgmOpt1 => Some(EstimatorOption::One),
            Algorithm::SgmOpt2 => Some(EstimatorOption::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic {
        n: usize,
        p: usize,
        margin_noise: f64,
        seed: u64,
    },
    File {
        path: PathBuf,
        feature_dim: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpec {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub seed: u64,
    pub dual: QuadraticDual,
    pub options: QuadraticOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationKind {
    Random,
    Shared,
    Identity,
}

impl PermutationKind {
    pub fn mode(self) -> PermutationMode {
        match self {
            PermutationKind::Random => PermutationMode::RandomIndependent,
            PermutationKind::Shared => PermutationMode::RandomShared,
            PermutationKind::Identity => PermutationMode::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemKind,
    pub algorithm: Algorithm,
    pub dataset: DatasetSource,
    pub lambda: f64,
    pub k_b: usize,
    pub region_radius: Option<f64>,
    pub quadratic: QuadraticSpec,
    pub eta: StepSize,
    pub eta_hat: StepSize,
    pub inner_epochs: Epochs,
    pub epochs: Epochs,
    pub epsilon: f64,
    pub gamma: GammaSchedule,
    pub permutation: PermutationKind,
    pub seeds: Vec<u64>,
    pub target_grad_norm: Option<f64>,
    pub tracking_weight: f64,
    pub full_regime: NcRegime,
    pub omega: f64,
    pub eta_hat_multiplier: f64,
    pub output_rule: OutputRule,
    pub output_dir: PathBuf,
    pub include_wall: bool,
    pub sweep_grid: Vec<f64>,
}

impl ExperimentConfig {
    pub fn nc_regime(&self) -> Option<NcRegime> {
        match self.algorithm {
            Algorithm::SgmNcSemi => Some(NcRegime::Semi),
            Algorithm::SgmNcFull => Some(self.full_regime),
            Algorithm::SgmNcFullS1 => Some(NcRegime::FullS1),
            _ => None,
        }
    }

    /// Output directory after applying the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone())
    }
}

/// Collects typed fields and every problem found along the way.
struct Fields {
    entries: BTreeMap<String, (usize, String)>,
    errors: Vec<String>,
}

impl Fields {
    fn parse(text: &str) -> Self {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {line_no}: expected `key = value`"));
                continue;
            };
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if key.is_empty() {
                errors.push(format!("line {line_no}: empty key"));
            } else if let Some((first, _)) = entries.get(&key) {
                errors.push(format!(
                    "line {line_no}: duplicate key `{key}` (first set on line {first})"
                ));
            } else {
                entries.insert(key, (line_no, value));
            }
        }
        Self { entries, errors }
    }

    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn required<T>(
        &mut self,
        key: &str,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Option<T> {
        match self.take_raw(key) {
            Some((line, v)) => match parse(&v) {
                Ok(t) => Some(t),
                Err(e) => {
                    self.errors.push(format!("line {line}: `{key}`: {e}"));
                    None
                }
            },
            None => {
                self.errors.push(format!("missing required key `{key}`"));
                None
            }
        }
    }

    fn optional<T>(
        &mut self,
        key: &str,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Option<T> {
        let (line, v) = self.take_raw(key)?;
        match parse(&v) {
            Ok(t) => Some(t),
            Err(e) => {
                self.errors.push(format!("line {line}: `{key}`: {e}"));
                None
            }
        }
    }

    fn number<T: FromStr + Copy>(&mut self, key: &str, default: T) -> T {
        self.optional(key, parse_number).unwrap_or(default)
    }
}

fn parse_number<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("cannot parse `{v}` as a number"))
}

fn parse_step(v: &str) -> std::result::Result<StepSize, String> {
    if v == "auto" {
        return Ok(StepSize::Auto);
    }
    match v.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(StepSize::Fixed(x)),
        _ => Err(format!("expected `auto` or a positive number, got `{v}`")),
    }
}

fn parse_epochs(v: &str) -> std::result::Result<Epochs, String> {
    if v == "auto" {
        return Ok(Epochs::Auto);
    }
    v.parse::<usize>()
        .map(Epochs::Fixed)
        .map_err(|_| format!("expected `auto` or a count, got `{v}`"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected `true` or `false`, got `{v}`")),
    }
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    let items: std::result::Result<Vec<T>, String> = v
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| format!("cannot parse list item `{}`", s.trim()))
        })
        .collect();
    match items {
        Ok(list) if list.is_empty() => Err("empty list".into()),
        other => other,
    }
}

fn parse_problem(v: &str) -> std::result::Result<ProblemKind, String> {
    match v {
        "model-selection" => Ok(ProblemKind::ModelSelection),
        "quadratic-oracle" => Ok(ProblemKind::QuadraticOracle),
        _ => Err(format!(
            "unknown problem `{v}` (expected model-selection or quadratic-oracle)"
        )),
    }
}

fn parse_algorithm(v: &str) -> std::result::Result<Algorithm, String> {
    Algorithm::ALL
        .into_iter()
        .find(|a| a.name() == v)
        .ok_or_else(|| {
            let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            format!(
                "unknown algorithm `{v}` (expected one of {})",
                names.join(", ")
            )
        })
}

fn parse_gamma(v: &str) -> std::result::Result<GammaSchedule, String> {
    if v == "decreasing" {
        return Ok(GammaSchedule::Decreasing);
    }
    match v.parse::<f64>() {
        Ok(g) if g >= 0.0 && g.is_finite() => Ok(GammaSchedule::Constant(g)),
        _ => Err(format!(
            "expected `decreasing` or a non-negative number, got `{v}`"
        )),
    }
}

fn parse_permutation(v: &str) -> std::result::Result<PermutationKind, String> {
    match v {
        "random" => Ok(PermutationKind::Random),
        "shared" => Ok(PermutationKind::Shared),
        "identity" => Ok(PermutationKind::Identity),
        _ => Err(format!("expected random, shared or identity, got `{v}`")),
    }
}

fn parse_dual(v: &str) -> std::result::Result<QuadraticDual, String> {
    if v == "unconstrained" {
        return Ok(QuadraticDual::Unconstrained);
    }
    let parsed = v
        .split_once(':')
        .and_then(|(kind, x)| Some((kind, x.parse::<f64>().ok()?)));
    match parsed {
        Some(("ridge", mu)) if mu > 0.0 => Ok(QuadraticDual::Ridge(mu)),
        Some(("l1", r)) if r > 0.0 => Ok(QuadraticDual::L1Ball(r)),
        _ => Err(format!(
            "expected unconstrained, ridge:<mu> or l1:<radius>, got `{v}`"
        )),
    }
}

fn parse_full_regime(v: &str) -> std::result::Result<NcRegime, String> {
    match v {
        "muH" => Ok(NcRegime::FullMuH),
        "muh" => Ok(NcRegime::FullMuh),
        _ => Err(format!("expected muH or muh, got `{v}`")),
    }
}

fn parse_output_rule(v: &str) -> std::result::Result<OutputRule, String> {
    match v {
        "argmin" => Ok(OutputRule::Argmin),
        "uniform-random" => Ok(OutputRule::UniformRandom),
        _ => Err(format!("expected argmin or uniform-random, got `{v}`")),
    }
}

/// Parses configuration text; relative dataset paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let mut f = Fields::parse(text);
    if let Some(v) = f.required("schema_version", parse_number::<u32>) {
        if v != SCHEMA_VERSION {
            f.errors.push(format!(
                "unsupported schema_version {v} (expected {SCHEMA_VERSION})"
            ));
        }
    }
    let name = f
        .optional("name", |v| Ok(v.to_string()))
        .unwrap_or_else(|| "experiment".into());
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
    {
        f.errors.push(format!(
            "`name` must be non-empty and use only [A-Za-z0-9-_.], got `{name}`"
        ));
    }
    let problem = f.required("problem", parse_problem);
    let algorithm = f.required("algorithm", parse_algorithm);
    let dataset_kind = f
        .optional("dataset", |v| Ok(v.to_string()))
        .unwrap_or_else(|| "synthetic".into());
    let synthetic = DatasetSource::Synthetic {
        n: f.number("synthetic_n", 500),
        p: f.number("synthetic_p", 20),
        margin_noise: f.number("synthetic_noise", 0.1),
        seed: f.number("data_seed", 0),
    };
    let feature_dim = f.optional("feature_dim", parse_number::<usize>);
    let dataset = if dataset_kind == "synthetic" {
        synthetic
    } else {
        DatasetSource::File {
            path: base_dir.join(&dataset_kind),
            feature_dim,
        }
    };
    let lambda = f.number("lambda", 1e-4f64);
    let k_b = f.number("k_b", 32usize);
    let region_radius = f.optional("region_radius", parse_number::<f64>);
    let defaults = QuadraticOptions::default();
    let quadratic = QuadraticSpec {
        p: f.number("quad_p", 5),
        q: f.number("quad_q", 5),
        n: f.number("quad_n", 8),
        seed: f.number("quad_seed", 0),
        dual: f
            .optional("quad_dual", parse_dual)
            .unwrap_or(QuadraticDual::Unconstrained),
        options: QuadraticOptions {
            heterogeneity: f.number("quad_heterogeneity", defaults.heterogeneity),
            coupling_scale: f.number("quad_coupling_scale", defaults.coupling_scale),
            min_curvature: f.number("quad_min_curvature", defaults.min_curvature),
            dual_spread: f.number("quad_dual_spread", defaults.dual_spread),
        },
    };
    let eta = f.optional("eta", parse_step).unwrap_or(StepSize::Auto);
    let eta_hat = f.optional("eta_hat", parse_step).unwrap_or(StepSize::Auto);
    let inner_epochs = f
        .optional("inner_epochs", parse_epochs)
        .unwrap_or(Epochs::Auto);
    let epochs = f.optional("epochs", parse_epochs).unwrap_or(Epochs::Auto);
    let epsilon = f.number("epsilon", 0.1f64);
    let gamma = f
        .optional("gamma", parse_gamma)
        .unwrap_or(GammaSchedule::Decreasing);
    let permutation = f
        .optional("permutation", parse_permutation)
        .unwrap_or(PermutationKind::Random);
    let seeds = f
        .optional("seeds", parse_list::<u64>)
        .unwrap_or_else(|| vec![0]);
    let target_grad_norm = f.optional("target_grad_norm", parse_number::<f64>);
    let tracking_weight = f.number("tracking_weight", 0.5f64);
    let full_regime = f
        .optional("full_regime", parse_full_regime)
        .unwrap_or(NcRegime::FullMuH);
    let omega = f.number("omega", 1.0f64);
    let eta_hat_multiplier = f.number("eta_hat_multiplier", 15.0f64);
    let output_rule = f
        .optional("output_rule", parse_output_rule)
        .unwrap_or(OutputRule::Argmin);
    let output_dir = f
        .optional("output_dir", |v| Ok(PathBuf::from(v)))
        .unwrap_or_else(|| "shufmm-out".into());
    let include_wall = f.optional("include_wall", parse_bool).unwrap_or(true);
    let sweep_grid = f
        .optional("sweep_grid", parse_list::<f64>)
        .unwrap_or_else(|| LEARNING_RATE_GRID.to_vec());

    let leftovers: Vec<(usize, String)> = f
        .entries
        .iter()
        .map(|(k, (line, _))| (*line, k.clone()))
        .collect();
    for (line, key) in leftovers {
        f.errors.push(format!("line {line}: unknown key `{key}`"));
    }
    let mut errors = f.errors;
    let checks: [(bool, &str); 9] = [
        (
            epsilon > 0.0 && epsilon.is_finite(),
            "`epsilon` must be positive",
        ),
        (
            lambda > 0.0 && lambda.is_finite(),
            "`lambda` must be positive",
        ),
        (k_b >= 1, "`k_b` must be at least 1"),
        (
            region_radius.is_none_or(|r| r > 0.0 && r.is_finite()),
            "`region_radius` must be positive",
        ),
        (
            target_grad_norm.is_none_or(|t| t >= 0.0),
            "`target_grad_norm` must be non-negative",
        ),
        (
            (0.0..=1.0).contains(&tracking_weight) && tracking_weight > 0.0,
            "`tracking_weight` must lie in (0, 1]",
        ),
        (omega > 0.0 && omega.is_finite(), "`omega` must be positive"),
        (
            eta_hat_multiplier > 0.0 && eta_hat_multiplier.is_finite(),
            "`eta_hat_multiplier` must be positive",
        ),
        (
            sweep_grid.iter().all(|&x| x > 0.0 && x.is_finite()),
            "`sweep_grid` entries must be positive",
        ),
    ];
    errors.extend(
        checks
            .iter()
            .filter(|(ok, _)| !ok)
            .map(|(_, msg)| msg.to_string()),
    );
    if let (Some(problem), Some(algorithm)) = (problem, algorithm) {
        let nl_problem = problem == ProblemKind::ModelSelection;
        if algorithm.is_nonconvex_linear() != nl_problem {
            errors.push(format!(
                "algorithm `{}` is incompatible with problem `{}`",
                algorithm.name(),
                problem_name(problem)
            ));
        }
        if algorithm == Algorithm::SgdBaseline {
            if eta == StepSize::Auto {
                errors.push("`sgd-baseline` requires a numeric `eta`".into());
            }
            if epochs == Epochs::Auto {
                errors.push("`sgd-baseline` requires a numeric `epochs`".into());
            }
        }
    }
    if let DatasetSource::Synthetic { n, p, .. } = &dataset {
        if *n == 0 || *p == 0 {
            errors.push("`synthetic_n` and `synthetic_p` must be positive".into());
        }
    }
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    Ok(ExperimentConfig {
        name,
        problem: problem.expect("checked"),
        algorithm: algorithm.expect("checked"),
        dataset,
        lambda,
        k_b,
        region_radius,
        quadratic,
        eta,
        eta_hat,
        inner_epochs,
        epochs,
        epsilon,
        gamma,
        permutation,
        seeds,
        target_grad_norm,
        tracking_weight,
        full_regime,
        omega,
        eta_hat_multiplier,
        output_rule,
        output_dir,
        include_wall,
        sweep_grid,
    })
}

pub fn problem_name(problem: ProblemKind) -> &'static str {
    match problem {
        ProblemKind::ModelSelection => "model-selection",
        ProblemKind::QuadraticOracle => "quadratic-oracle",
    }
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}
