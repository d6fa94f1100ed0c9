//! JSON-config batch front-end: parse an experiment configuration, run the
//! operator → predictor → Monte Carlo pipeline, and emit machine-readable
//! reports plus plot-ready CSV.
//!
//! Exit codes: 0 when every hard check and acceptance band passes, 2 when a
//! report was produced but an acceptance band failed, 1 on configuration or
//! convergence errors.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{RdeError, Result};
use crate::limits::{self, Observable, Term, TermKind};
use crate::maps::{PiecewiseMap, RandomSystem};
use crate::montecarlo::{self, InitialLaw, QuenchMode, SimulationPlan, TargetFamily};
use crate::transfer::{annealed_operator, stationary_density, DEFAULT_MAX_ITER, DEFAULT_POWER_TOL};

pub const CONFIG_SCHEMA: &str = "rde-config v1";

/// Declarative description of one map of the family.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    /// `x -> beta x mod 1` with integer `beta >= 2`.
    Beta { beta: u32, prob: f64 },
    /// `x -> slope x + offset mod 1` with real `slope > 1`.
    LinearMod1 { slope: f64, offset: f64, prob: f64 },
    /// Explicit piecewise-linear branches.
    Custom {
        branches: Vec<BranchSpec>,
        prob: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub domain: [f64; 2],
    pub slope: f64,
    pub intercept: f64,
}

impl MapSpec {
    pub fn prob(&self) -> f64 {
        match self {
            MapSpec::Beta { prob, .. }
            | MapSpec::LinearMod1 { prob, .. }
            | MapSpec::Custom { prob, .. } => *prob,
        }
    }

    pub fn build(&self) -> Result<PiecewiseMap> {
        match self {
            MapSpec::Beta { beta, .. } => PiecewiseMap::beta(*beta),
            MapSpec::LinearMod1 { slope, offset, .. } => {
                PiecewiseMap::linear_mod1(*slope, *offset)
            }
            MapSpec::Custom { branches, .. } => {
                let specs: Vec<(f64, f64, f64, f64)> = branches
                    .iter()
                    .map(|b| (b.domain[0], b.domain[1], b.slope, b.intercept))
                    .collect();
                PiecewiseMap::from_linear_branches(&specs, "custom")
            }
        }
    }
}

/// One observable term.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermSpec {
    Cosine { k: u32, coeff: f64 },
    Sine { k: u32, coeff: f64 },
    Monomial { degree: u32, coeff: f64 },
    Indicator { lo: f64, hi: f64, coeff: f64 },
}

impl TermSpec {
    fn to_term(&self) -> Term {
        match *self {
            TermSpec::Cosine { k, coeff } => Term {
                kind: TermKind::Cosine(k),
                coefficient: coeff,
            },
            TermSpec::Sine { k, coeff } => Term {
                kind: TermKind::Sine(k),
                coefficient: coeff,
            },
            TermSpec::Monomial { degree, coeff } => Term {
                kind: TermKind::Monomial(degree),
                coefficient: coeff,
            },
            TermSpec::Indicator { lo, hi, coeff } => Term {
                kind: TermKind::Indicator { lo, hi },
                coefficient: coeff,
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLawSpec {
    Lebesgue,
    Stationary,
    Point { x: f64 },
}

impl Default for InitialLawSpec {
    fn default() -> Self {
        InitialLawSpec::Lebesgue
    }
}

/// Kind-specific experiment parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// Spectral predictors only: Green–Kubo vs eigenvalue curvature.
    Variance {
        #[serde(default = "default_correlation_cap")]
        n_max: usize,
    },
    Clt {
        n: usize,
        replicas: usize,
    },
    Ldp {
        n: usize,
        replicas: usize,
        eps_list: Vec<f64>,
        #[serde(default)]
        omega_seeds: Vec<u64>,
        #[serde(default = "default_theta_grid")]
        theta_grid_points: usize,
    },
    LocalLimit {
        n: usize,
        replicas: usize,
        interval: [f64; 2],
        #[serde(default = "default_scan_grid")]
        t_scan: Vec<f64>,
    },
    BorelCantelli {
        n: usize,
        replicas: usize,
        center: f64,
        gamma: f64,
        scale: f64,
        #[serde(default)]
        omega_seed: Option<u64>,
    },
    ShrinkingTarget {
        n: usize,
        replicas: usize,
        variance_replicas: usize,
        center: f64,
        gamma: f64,
        scale: f64,
    },
    ErdosRenyi {
        alpha: f64,
        n_list: Vec<usize>,
        replicas: usize,
        #[serde(default = "default_theta_grid")]
        theta_grid_points: usize,
    },
    QuenchedClt {
        n: usize,
        replicas: usize,
        omega_seeds: Vec<u64>,
        #[serde(default = "default_doubled_grid")]
        doubled_grid: usize,
        #[serde(default)]
        diagnostic: bool,
    },
    Concentration {
        n_list: Vec<usize>,
        replicas: usize,
        t_grid: Vec<f64>,
    },
}

fn default_correlation_cap() -> usize {
    limits::DEFAULT_CORRELATION_CAP
}

fn default_theta_grid() -> usize {
    201
}

fn default_scan_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 3.0, std::f64::consts::PI, 2.0 * std::f64::consts::PI]
}

fn default_doubled_grid() -> usize {
    128
}

fn default_grid() -> usize {
    1024
}

fn default_center() -> bool {
    true
}

/// A complete experiment configuration (`rde-config v1`).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    pub system: Vec<MapSpec>,
    pub observable: Vec<TermSpec>,
    /// Center the observable against the computed stationary density.
    #[serde(default = "default_center")]
    pub center: bool,
    #[serde(default)]
    pub initial_law: InitialLawSpec,
    pub experiment: ExperimentSpec,
    /// Also write plot-ready CSV next to the report.
    #[serde(default)]
    pub csv: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| RdeError::Config(format!("cannot parse config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RdeError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(RdeError::Config(format!(
                "schema field is {:?}, expected {CONFIG_SCHEMA:?}",
                self.schema
            )));
        }
        if self.system.is_empty() {
            return Err(RdeError::Config("system: no maps given".into()));
        }
        let sum: f64 = self.system.iter().map(|m| m.prob()).sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(RdeError::Config(format!(
                "system: probabilities sum to {sum}"
            )));
        }
        if self.grid < 2 {
            return Err(RdeError::Config(format!(
                "grid: {} is too small (need >= 2)",
                self.grid
            )));
        }
        if self.observable.is_empty() {
            return Err(RdeError::Config("observable: no terms given".into()));
        }
        match &self.experiment {
            ExperimentSpec::Ldp { eps_list, .. } if eps_list.is_empty() => {
                return Err(RdeError::Config("experiment.eps_list: empty".into()))
            }
            ExperimentSpec::Concentration { n_list, t_grid, .. } => {
                if n_list.is_empty() || t_grid.is_empty() {
                    return Err(RdeError::Config(
                        "experiment: n_list and t_grid must be non-empty".into(),
                    ));
                }
            }
            ExperimentSpec::ErdosRenyi { n_list, .. } if n_list.is_empty() => {
                return Err(RdeError::Config("experiment.n_list: empty".into()))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn build_system(&self) -> Result<RandomSystem> {
        let maps = self
            .system
            .iter()
            .map(|m| m.build())
            .collect::<Result<Vec<_>>>()?;
        let probs: Vec<f64> = self.system.iter().map(|m| m.prob()).collect();
        RandomSystem::new(maps, probs)
    }

    pub fn build_observable(&self) -> Result<Observable> {
        Observable::new(self.observable.iter().map(|t| t.to_term()).collect())
    }
}

/// Outcome of a pipeline run.
pub struct RunOutcome {
    pub report_paths: Vec<PathBuf>,
    pub all_bands_passed: bool,
}

/// Execute a configuration: assemble operators, compute the predictors the
/// experiment needs, run the Monte Carlo stage and write reports.
pub fn run_config(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let system = Arc::new(config.build_system()?);
    let raw_obs = config.build_observable()?;
    let n_grid = config.grid;

    let op = annealed_operator(&system, n_grid)?;
    let density = Arc::new(stationary_density(&op, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER)?);
    let observable = Arc::new(if config.center {
        raw_obs.centered(&density)
    } else {
        raw_obs
    });

    let initial_law = match config.initial_law {
        InitialLawSpec::Lebesgue => InitialLaw::Lebesgue,
        InitialLawSpec::Stationary => InitialLaw::Stationary(density.clone()),
        InitialLawSpec::Point { x } => InitialLaw::Point(x),
    };

    let mut report_paths = Vec::new();
    let mut all_passed = true;
    let write_report = |name: &str, report: &montecarlo::ExperimentReport| -> Result<PathBuf> {
        let path = out_dir.join(format!("report_{name}.json"));
        report.write_to(&path)?;
        Ok(path)
    };

    match &config.experiment {
        ExperimentSpec::Variance { n_max } => {
            let gk = limits::green_kubo_with(&op, &density, &observable, *n_max)?;
            let (d1, d2) = limits::variance_via_eigenvalue(&system, &observable, n_grid)?;
            let band = vec![
                montecarlo::BandCheck::absolute("lambda_prime_zero", 0.0, d1, 1e-6),
                montecarlo::BandCheck::absolute(
                    "predictor_agreement",
                    gk.sigma2,
                    d2,
                    f64::max(1e-3, 0.01 * gk.sigma2.abs()),
                ),
            ];
            let report = montecarlo::ExperimentReport::new(
                "variance",
                system.label(),
                observable.label(),
                serde_json::json!({ "grid": n_grid, "n_max": n_max }),
                vec![gk.sigma2],
                vec![d2],
                vec![],
                0,
                montecarlo::SeedInfo {
                    master: config.seed,
                    omega_seeds: vec![],
                },
                band,
                serde_json::json!({
                    "correlation_truncation": gk.truncation_n,
                    "tail_bound": gk.tail_bound,
                    "converged": gk.converged,
                }),
                0.0,
            );
            if config.csv {
                let mut f = std::fs::File::create(out_dir.join("correlations.csv"))?;
                gk.write_csv(&mut f)?;
            }
            all_passed &= report.passed;
            report_paths.push(write_report("variance", &report)?);
        }
        ExperimentSpec::Clt { n, replicas } => {
            let gk = limits::green_kubo_with(&op, &density, &observable, limits::DEFAULT_CORRELATION_CAP)?;
            let plan = SimulationPlan::new(system.clone(), observable.clone(), *n, *replicas, config.seed)
                .with_initial_law(initial_law);
            let report = montecarlo::clt_experiment(&plan, gk.sigma2)?;
            all_passed &= report.passed;
            report_paths.push(write_report("clt", &report)?);
        }
        ExperimentSpec::Ldp {
            n,
            replicas,
            eps_list,
            omega_seeds,
            theta_grid_points,
        } => {
            let theta_max = limits::default_theta_max(&observable);
            let rate = limits::rate_function(&system, &observable, n_grid, theta_max, *theta_grid_points)?;
            for &eps in eps_list {
                // validate before any simulation starts
                rate.eval(eps)?;
            }
            if config.csv {
                let mut f = std::fs::File::create(out_dir.join("logmgf.csv"))?;
                rate.write_csv(&mut f)?;
            }
            let plan = SimulationPlan::new(system.clone(), observable.clone(), *n, *replicas, config.seed)
                .with_initial_law(initial_law);
            let report = montecarlo::ldp_experiment(&plan, eps_list, &rate, omega_seeds)?;
            all_passed &= report.passed;
            report_paths.push(write_report("ldp", &report)?);
        }
        ExperimentSpec::LocalLimit {
            n,
            replicas,
            interval,
            t_scan,
        } => {
            let gk = limits::green_kubo_with(&op, &density, &observable, limits::DEFAULT_CORRELATION_CAP)?;
            let scan = limits::aperiodicity_scan(&system, &observable, t_scan, n_grid.min(256))?;
            let plan = SimulationPlan::new(system.clone(), observable.clone(), *n, *replicas, config.seed)
                .with_initial_law(initial_law);
            let report = montecarlo::local_limit_experiment(
                &plan,
                (interval[0], interval[1]),
                gk.sigma2,
                &scan,
            )?;
            all_passed &= report.passed;
            report_paths.push(write_report("local_limit", &report)?);
        }
        ExperimentSpec::BorelCantelli {
            n,
            replicas,
            center,
            gamma,
            scale,
            omega_seed,
        } => {
            let targets = TargetFamily::NestedBalls {
                center: *center,
                gamma: *gamma,
                scale: *scale,
            };
            let quench = match omega_seed {
                Some(seed) => QuenchMode::Quenched { omega_seed: *seed },
                None => QuenchMode::Annealed,
            };
            let report = montecarlo::borel_cantelli_experiment(
                &system, &targets, *n, *replicas, config.seed, quench, &density,
            )?;
            all_passed &= report.passed;
            report_paths.push(write_report("borel_cantelli", &report)?);
        }
        ExperimentSpec::ShrinkingTarget {
            n,
            replicas,
            variance_replicas,
            center,
            gamma,
            scale,
        } => {
            let report = montecarlo::shrinking_target_clt(
                &system,
                *center,
                *gamma,
                *scale,
                *n,
                *replicas,
                *variance_replicas,
                config.seed,
                &density,
            )?;
            all_passed &= report.passed;
            report_paths.push(write_report("shrinking_target", &report)?);
        }
        ExperimentSpec::ErdosRenyi {
            alpha,
            n_list,
            replicas,
            theta_grid_points,
        } => {
            let theta_max = limits::default_theta_max(&observable);
            let rate = limits::rate_function(&system, &observable, n_grid, theta_max, *theta_grid_points)?;
            // domain check before simulation
            rate.eval(*alpha)?;
            let report = montecarlo::erdos_renyi_experiment(
                &system, &observable, *alpha, n_list, *replicas, &rate, config.seed, &density,
            )?;
            all_passed &= report.passed;
            report_paths.push(write_report("erdos_renyi", &report)?);
        }
        ExperimentSpec::QuenchedClt {
            n,
            replicas,
            omega_seeds,
            doubled_grid,
            diagnostic,
        } => {
            let gk = limits::green_kubo_with(&op, &density, &observable, limits::DEFAULT_CORRELATION_CAP)?;
            let sigma2_hat = if *diagnostic {
                0.0
            } else {
                limits::doubled_variance(&system, &observable, *doubled_grid, limits::DEFAULT_CORRELATION_CAP)?
            };
            let report = montecarlo::quenched_clt_experiment(
                &system,
                &observable,
                gk.sigma2,
                sigma2_hat,
                *n,
                *replicas,
                omega_seeds,
                config.seed,
                &density,
                *diagnostic,
            )?;
            all_passed &= report.passed;
            report_paths.push(write_report("quenched_clt", &report)?);
        }
        ExperimentSpec::Concentration {
            n_list,
            replicas,
            t_grid,
        } => {
            let report = montecarlo::concentration_experiment(
                &system, n_list, *replicas, t_grid, config.seed, &density,
            )?;
            all_passed &= report.passed;
            report_paths.push(write_report("concentration", &report)?);
        }
    }

    Ok(RunOutcome {
        report_paths,
        all_bands_passed: all_passed,
    })
}

/// Built-in map families, observable terms and experiment kinds, in stable
/// sorted order.
pub fn list_builtins() -> String {
    let mut out = String::new();
    out.push_str("map families:\n");
    for line in [
        "  beta            integer beta map: x -> beta x mod 1 (params: beta >= 2, prob)",
        "  custom          explicit piecewise-linear branches (params: branches[{domain, slope, intercept}], prob)",
        "  linear_mod1     x -> slope x + offset mod 1 (params: slope > 1, offset in [0,1), prob)",
    ] {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("observable terms:\n");
    for line in [
        "  cosine          coeff * cos(2 pi k x)  (params: k, coeff)",
        "  indicator       coeff * 1_{[lo, hi)}   (params: lo, hi, coeff)",
        "  monomial        coeff * x^degree       (params: degree, coeff)",
        "  sine            coeff * sin(2 pi k x)  (params: k, coeff)",
    ] {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("experiment kinds:\n");
    for line in [
        "  borel_cantelli    strong Borel–Cantelli ratio on nested balls (n, replicas, center, gamma, scale, omega_seed?)",
        "  clt               central limit theorem with Berry–Esseen scaling (n, replicas)",
        "  concentration     empirical-measure Kantorovich concentration (n_list, replicas, t_grid)",
        "  erdos_renyi       windowed-maximum law (alpha, n_list, replicas)",
        "  ldp               large deviations vs Legendre rate function (n, replicas, eps_list, omega_seeds?)",
        "  local_limit       local limit theorem (n, replicas, interval, t_scan?)",
        "  quenched_clt      quenched CLT package with doubled system (n, replicas, omega_seeds, doubled_grid?, diagnostic?)",
        "  shrinking_target  shrinking-target CLT (n, replicas, variance_replicas, center, gamma, scale)",
        "  variance          spectral predictors only (n_max?)",
    ] {
        out.push_str(line);
        out.push('\n');
    }
    out
}

#[derive(Parser)]
#[command(name = "rde", about = "random dynamics experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for reports and CSV (default: `.`).
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Worker threads (default: RDE_THREADS or all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List built-in map families, observables and experiment kinds.
    List,
}

fn configure_threads(threads: Option<usize>) {
    let from_env = std::env::var("RDE_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok());
    if let Some(k) = threads.or(from_env) {
        // ignore failures: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global();
    }
}

/// Entry point used by the `rde` binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; --help/--version are not errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::List => {
            print!("{}", list_builtins());
            0
        }
        Command::Run {
            config,
            seed,
            out_dir,
            threads,
        } => {
            configure_threads(threads);
            let mut cfg = match ExperimentConfig::from_path(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 1;
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            match run_config(&cfg, &out_dir) {
                Ok(outcome) => {
                    for p in &outcome.report_paths {
                        println!("report: {}", p.display());
                    }
                    if outcome.all_bands_passed {
                        0
                    } else {
                        eprintln!("acceptance band failure (see report)");
                        2
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
    }
}
