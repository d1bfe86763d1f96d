//! Experiment drivers: configuration parsing and validation, the test
//! function library, and the four study runners (convergence, multilevel
//! comparison, noise comparison, timing). Each runner returns its results
//! as plain structs and, when an output directory is configured, writes
//! CSV artifacts plus a manifest echoing the full configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{degree_for_budget, filtered_hyperinterpolate, FilterSpec};
use crate::error::{Error, Result};
use crate::harmonics::{eval_harmonic, HarmonicIndex};
use crate::kernel::{profile_for_label, KernelFamily, RadialProfile, ZonalKernel};
use crate::metrics::{fit_slope, l2_error, linf_error, mmse, ErrorReport};
use crate::multilevel::{build_schedule, multilevel_approximate, HMode};
use crate::quasi::{add_noise, qi_mc_values, qi_qmc, NoiseModel};
use crate::sphere::{product_quadrature, random_points, spiral_points, PointSet, ProductRule};

/// Quadrature degree for L2 error rows, matching the per-level records of
/// the multilevel driver so columns stay comparable across experiments.
pub const ERROR_RULE_DEGREE: usize = 60;
/// Size of the deterministic grid used for Linf error rows.
pub const LINF_GRID_N: usize = 4096;
/// Desk-scale MMSE defaults, with the larger study sizes behind
/// `paper_scale`.
pub const DEFAULT_TRIALS: usize = 20;
pub const DEFAULT_EVAL_POINTS: usize = 5_000;
pub const PAPER_TRIALS: usize = 100;
pub const PAPER_EVAL_POINTS: usize = 50_000;
/// Mixing constant for deriving per-trial noise seeds from site seeds.
const TRIAL_NOISE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Four-term exponential test function on S^2, the spherical adaptation of
/// a classical scattered-data benchmark. Note the second term is linear in
/// its y and z arguments.
pub fn franke(x: &[f64; 3]) -> f64 {
    let (a, b, c) = (x[0], x[1], x[2]);
    let t1 = 0.75
        * (-((9.0 * a - 2.0).powi(2) / 4.0
            + (9.0 * b - 2.0).powi(2) / 4.0
            + (9.0 * c - 2.0).powi(2) / 4.0))
            .exp();
    let t2 = 0.75
        * (-((9.0 * a + 1.0).powi(2) / 49.0 + (9.0 * b + 1.0) / 10.0 + (9.0 * c + 1.0) / 10.0))
            .exp();
    let t3 = 0.5
        * (-((9.0 * a - 7.0).powi(2) / 4.0
            + (9.0 * b - 3.0).powi(2) / 4.0
            + (9.0 * c - 5.0).powi(2) / 4.0))
            .exp();
    let t4 = 0.2
        * (-((9.0 * a - 4.0).powi(2) + (9.0 * b - 7.0).powi(2) + (9.0 * c - 5.0).powi(2))).exp();
    t1 + t2 + t3 - t4
}

/// A target function for the studies: either a single spherical harmonic
/// (known spectral form) or the smooth four-term benchmark.
#[derive(Debug, Clone, Copy)]
pub enum TestFunction {
    Harmonic(HarmonicIndex),
    Franke,
}

impl TestFunction {
    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        match self {
            TestFunction::Harmonic(idx) => eval_harmonic(*idx, x),
            TestFunction::Franke => franke(x),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::Harmonic(idx) => format!("Y_{}_{}", idx.ell(), idx.k()),
            TestFunction::Franke => "franke".into(),
        }
    }

    /// Polynomial degree when the target has a known spectral form.
    pub fn spectral_degree(&self) -> Option<usize> {
        match self {
            TestFunction::Harmonic(idx) => Some(idx.ell()),
            TestFunction::Franke => None,
        }
    }
}

/// Which study a configuration file drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Convergence,
    Multilevel,
    NoiseCompare,
    Timing,
}

impl Experiment {
    fn name(&self) -> &'static str {
        match self {
            Experiment::Convergence => "convergence",
            Experiment::Multilevel => "multilevel",
            Experiment::NoiseCompare => "noise-compare",
            Experiment::Timing => "timing",
        }
    }
}

/// Site families the harness can generate on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteKind {
    /// Deterministic equal-area spiral, the stand-in for low-discrepancy
    /// point families.
    #[default]
    Spiral,
    /// Independent uniform random draws, seeded.
    Random,
}

/// Kernel selection by family and order label m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub order: usize,
    /// Whether the order is reached by moment correction. Defaults to true
    /// for Gaussian labels above 2 (the plain Gaussian is second order) and
    /// false for the compactly supported family, whose order comes from
    /// smoothness selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_corrected: Option<bool>,
}

impl KernelConfig {
    pub fn resolve(&self) -> Result<RadialProfile> {
        let corrected = self
            .moment_corrected
            .unwrap_or(self.family == KernelFamily::Gaussian && self.order > 2);
        profile_for_label(self.family, self.order, corrected)
    }
}

/// How the scale rho is chosen per sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RhoRule {
    /// rho = c_rho * N^exponent with the exponent from the deterministic
    /// sampling theory (1/(2d) in magnitude for S^2 site families).
    PowQmc {
        exponent: f64,
        #[serde(default = "default_c_rho")]
        c_rho: f64,
    },
    /// rho = c_rho * N^exponent with the exponent from the random sampling
    /// theory (1/(2m) in magnitude).
    PowMc {
        exponent: f64,
        #[serde(default = "default_c_rho")]
        c_rho: f64,
    },
    /// One explicit rho per grid entry.
    Explicit { values: Vec<f64> },
}

fn default_c_rho() -> f64 {
    1.0
}

impl RhoRule {
    /// The scale for grid entry `idx` with sample count `n`.
    pub fn rho_for(&self, n: usize, idx: usize) -> f64 {
        match self {
            RhoRule::PowQmc { exponent, c_rho } | RhoRule::PowMc { exponent, c_rho } => {
                c_rho * (n as f64).powf(*exponent)
            }
            RhoRule::Explicit { values } => values[idx],
        }
    }
}

/// Target function selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    Harmonic { ell: usize, k: usize },
    Franke,
}

impl TargetConfig {
    pub fn resolve(&self) -> Result<TestFunction> {
        match self {
            TargetConfig::Harmonic { ell, k } => {
                let idx = HarmonicIndex::new(*ell, *k)
                    .map_err(|e| Error::config("target", e.to_string()))?;
                Ok(TestFunction::Harmonic(idx))
            }
            TargetConfig::Franke => Ok(TestFunction::Franke),
        }
    }
}

/// Observation noise selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseConfig {
    Gaussian { sigma: f64 },
    Uniform { bound: f64 },
}

impl NoiseConfig {
    pub fn level(&self) -> f64 {
        match self {
            NoiseConfig::Gaussian { sigma } => *sigma,
            NoiseConfig::Uniform { bound } => *bound,
        }
    }

    pub fn model(&self, seed: u64) -> NoiseModel {
        match self {
            NoiseConfig::Gaussian { sigma } => NoiseModel::gaussian(*sigma, seed),
            NoiseConfig::Uniform { bound } => NoiseModel::uniform(*bound, seed),
        }
    }
}

/// Full experiment description, loadable from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    /// Artifact directory; runs stay in memory when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub point_kind: SiteKind,
    pub n_grid: Vec<usize>,
    /// Multilevel scale factor rho_j = nu * sqrt(h_j).
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Mesh-norm estimation mode for multilevel schedules.
    #[serde(default = "default_h_mode")]
    pub h_mode: HMode,
    /// Extra noise deviations for the multilevel comparison; a clean pass
    /// always runs first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise_levels: Vec<f64>,
    /// Trials for randomized error estimates.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Evaluation grid size for randomized error estimates.
    #[serde(default = "default_eval_points")]
    pub eval_points: usize,
    /// Filter transition endpoint for the filtered projection baseline.
    #[serde(default = "default_filter_a")]
    pub filter_a: f64,
    /// Swaps the trial and evaluation sizes for the paper-scale study.
    #[serde(default)]
    pub paper_scale: bool,
    pub kernel: KernelConfig,
    pub rho_rule: RhoRule,
    pub target: TargetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
}

fn default_nu() -> f64 {
    1.5
}

fn default_h_mode() -> HMode {
    HMode::Nominal
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_eval_points() -> usize {
    DEFAULT_EVAL_POINTS
}

fn default_filter_a() -> f64 {
    FilterSpec::DEFAULT_A
}

impl ExperimentConfig {
    /// Reads and parses a TOML configuration file. Validation is separate
    /// so callers can adjust fields (seed, output) before running.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = toml::from_str(&text)?;
        Ok(cfg)
    }

    pub fn effective_trials(&self) -> usize {
        if self.paper_scale {
            PAPER_TRIALS
        } else {
            self.trials
        }
    }

    pub fn effective_eval_points(&self) -> usize {
        if self.paper_scale {
            PAPER_EVAL_POINTS
        } else {
            self.eval_points
        }
    }

    /// Rejects physically meaningless settings before any compute: empty or
    /// unsorted grids, nonnegative scale exponents, scales outside (0, 1),
    /// negative noise deviations, and unusable baseline parameters.
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid", "must list at least one sample count"));
        }
        if self.n_grid.iter().any(|&n| n == 0) {
            return Err(Error::config("n_grid", "sample counts must be >= 1"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("n_grid", "sample counts must be strictly increasing"));
        }
        match &self.rho_rule {
            RhoRule::PowQmc { exponent, c_rho } | RhoRule::PowMc { exponent, c_rho } => {
                if !exponent.is_finite() || *exponent >= 0.0 {
                    return Err(Error::config(
                        "rho_rule.exponent",
                        format!("must be finite and negative, got {exponent}"),
                    ));
                }
                if !c_rho.is_finite() || *c_rho <= 0.0 {
                    return Err(Error::config(
                        "rho_rule.c_rho",
                        format!("must be finite and positive, got {c_rho}"),
                    ));
                }
            }
            RhoRule::Explicit { values } => {
                if values.len() != self.n_grid.len() {
                    return Err(Error::config(
                        "rho_rule.values",
                        format!(
                            "need one scale per grid entry: {} values for {} counts",
                            values.len(),
                            self.n_grid.len()
                        ),
                    ));
                }
            }
        }
        for (i, &n) in self.n_grid.iter().enumerate() {
            let rho = self.rho_rule.rho_for(n, i);
            if !rho.is_finite() || rho <= 0.0 || rho >= 1.0 {
                return Err(Error::config(
                    "rho_rule",
                    format!("scale rho = {rho} at N = {n} lies outside (0, 1)"),
                ));
            }
        }
        if let Some(noise) = &self.noise {
            let level = noise.level();
            if !level.is_finite() || level < 0.0 {
                let field = match noise {
                    NoiseConfig::Gaussian { .. } => "noise.sigma",
                    NoiseConfig::Uniform { .. } => "noise.bound",
                };
                return Err(Error::config(
                    field,
                    format!("must be finite and >= 0, got {level}"),
                ));
            }
        }
        if self
            .noise_levels
            .iter()
            .any(|s| !s.is_finite() || *s < 0.0)
        {
            return Err(Error::config(
                "noise_levels",
                "every deviation must be finite and >= 0",
            ));
        }
        if !self.nu.is_finite() || self.nu <= 1.0 {
            return Err(Error::config(
                "nu",
                format!("multilevel scale factor must exceed 1, got {}", self.nu),
            ));
        }
        if !self.filter_a.is_finite() || self.filter_a <= 1.0 {
            return Err(Error::config(
                "filter_a",
                format!("filter endpoint must exceed 1, got {}", self.filter_a),
            ));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "need at least one trial"));
        }
        if self.eval_points == 0 {
            return Err(Error::config("eval_points", "need a nonempty evaluation grid"));
        }
        self.target.resolve()?;
        self.kernel
            .resolve()
            .map_err(|e| Error::config("kernel", e.to_string()))?;
        Ok(())
    }

    fn expect_experiment(&self, wanted: Experiment) -> Result<()> {
        if self.experiment != wanted {
            return Err(Error::config(
                "experiment",
                format!(
                    "config declares `{}` but the `{}` runner was invoked",
                    self.experiment.name(),
                    wanted.name()
                ),
            ));
        }
        Ok(())
    }
}

/// Convergence study output: one error row per sample count plus fitted
/// log-log slopes for whichever error columns are populated.
#[derive(Debug, Clone)]
pub struct ConvergenceResult {
    pub rows: Vec<ErrorReport>,
    pub slope_l2: Option<f64>,
    pub slope_linf: Option<f64>,
    pub slope_mmse: Option<f64>,
}

/// One paired row of the single-level versus multilevel comparison.
#[derive(Debug, Clone, Copy)]
pub struct CompareRow {
    /// Noise deviation; 0 marks the clean pass.
    pub sigma: f64,
    /// 1-based level.
    pub level: usize,
    /// Sites in this level's set.
    pub n: usize,
    pub rho_single: f64,
    pub single_l2: f64,
    pub single_linf: f64,
    pub rho_multi: f64,
    pub multi_l2: f64,
    pub multi_linf: f64,
}

#[derive(Debug, Clone)]
pub struct MultilevelCompareResult {
    pub rows: Vec<CompareRow>,
    /// Schedule diagnostics (thin refinement margins and the like).
    pub warnings: Vec<String>,
}

/// Noise comparison output: per-method error rows at matched sample counts.
#[derive(Debug, Clone)]
pub struct NoiseCompareResult {
    pub qmcqi: Vec<ErrorReport>,
    pub mcqi: Vec<ErrorReport>,
    pub fhi: Vec<ErrorReport>,
    /// Projection degree matched to each grid entry.
    pub fhi_degrees: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TimingRow {
    pub method: String,
    pub n: usize,
    /// Median of three construction plus evaluation repetitions.
    pub time_s: f64,
}

#[derive(Debug, Clone)]
pub struct TimingResult {
    pub rows: Vec<TimingRow>,
}

fn ensure_output_dir(cfg: &ExperimentConfig) -> Result<Option<PathBuf>> {
    match &cfg.output {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Ok(Some(dir.clone()))
        }
        None => Ok(None),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    command: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
}

fn write_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig) -> Result<()> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cfg.seed,
        config: cfg,
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::invalid(format!("manifest serialization failed: {e}")))?;
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

fn write_report_csv(path: &Path, rows: &[ErrorReport], comments: &[String]) -> Result<()> {
    let mut buf = String::new();
    buf.push_str(ErrorReport::CSV_HEADER);
    buf.push('\n');
    for r in rows {
        buf.push_str(&r.csv_row());
        buf.push('\n');
    }
    for c in comments {
        buf.push_str("# ");
        buf.push_str(c);
        buf.push('\n');
    }
    fs::write(path, buf)?;
    Ok(())
}

fn sample_values(tf: &TestFunction, pts: &PointSet, noise: Option<&NoiseModel>) -> Vec<f64> {
    let clean: Vec<f64> = (0..pts.len()).map(|i| tf.eval(&pts.xyz(i))).collect();
    match noise {
        Some(m) => add_noise(&clean, m),
        None => clean,
    }
}

/// Single-level convergence study over the sample grid: spiral sites give
/// deterministic L2 and Linf rows, random sites add the max mean squared
/// error over repeated trials. Writes `convergence.csv` when an output
/// directory is set.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceResult> {
    cfg.expect_experiment(Experiment::Convergence)?;
    cfg.validate()?;
    let rows = convergence_rows(cfg)?;

    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let l2s: Vec<f64> = rows.iter().map(|r| r.l2).collect();
    let linfs: Vec<f64> = rows.iter().map(|r| r.linf).collect();
    let slope_l2 = fit_slope(&ns, &l2s).ok().map(|(s, _)| s);
    let slope_linf = fit_slope(&ns, &linfs).ok().map(|(s, _)| s);
    let slope_mmse = if rows.iter().all(|r| r.mmse.is_some()) {
        let ms: Vec<f64> = rows.iter().map(|r| r.mmse.unwrap()).collect();
        fit_slope(&ns, &ms).ok().map(|(s, _)| s)
    } else {
        None
    };

    if let Some(dir) = ensure_output_dir(cfg)? {
        let mut comments = Vec::new();
        if let Some(s) = slope_l2 {
            comments.push(format!("slope,l2,{s:.6}"));
        }
        if let Some(s) = slope_linf {
            comments.push(format!("slope,linf,{s:.6}"));
        }
        if let Some(s) = slope_mmse {
            comments.push(format!("slope,mmse,{s:.6}"));
        }
        write_report_csv(&dir.join("convergence.csv"), &rows, &comments)?;
        write_manifest(&dir, "convergence", cfg)?;
    }
    Ok(ConvergenceResult {
        rows,
        slope_l2,
        slope_linf,
        slope_mmse,
    })
}

fn convergence_rows(cfg: &ExperimentConfig) -> Result<Vec<ErrorReport>> {
    let profile = cfg.kernel.resolve()?;
    let tf = cfg.target.resolve()?;
    let rule = product_quadrature(ERROR_RULE_DEGREE);
    let linf_grid = spiral_points(LINF_GRID_N)?;
    let trials = cfg.effective_trials();
    let eval_pts = spiral_points(cfg.effective_eval_points())?;

    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let started = Instant::now();
        let rho = cfg.rho_rule.rho_for(n, i);
        let kernel = ZonalKernel::new(profile.clone(), rho, 2)?;
        let row = match cfg.point_kind {
            SiteKind::Spiral => {
                let sites = spiral_points(n)?;
                let noise = cfg.noise.map(|nc| nc.model(cfg.seed));
                let values = sample_values(&tf, &sites, noise.as_ref());
                let mut approx = qi_qmc(sites, values, kernel)?;
                if noise.is_some() {
                    approx = approx.mark_noisy();
                }
                let l2 = l2_error(|x| approx.eval(x), |x| tf.eval(x), &rule);
                let linf = linf_error(|x| approx.eval(x), |x| tf.eval(x), &linf_grid);
                ErrorReport {
                    n,
                    l2,
                    linf,
                    mmse: None,
                    wall_time_s: started.elapsed().as_secs_f64(),
                }
            }
            SiteKind::Random => {
                let seeds: Vec<u64> = (0..trials)
                    .map(|t| cfg.seed.wrapping_add((i * trials + t) as u64))
                    .collect();
                let noise_cfg = cfg.noise;
                let builder = |s: u64| {
                    let sites = random_points(n, 2, s).expect("validated n >= 1");
                    let noise = noise_cfg.map(|nc| nc.model(s ^ TRIAL_NOISE_SALT));
                    let values = sample_values(&tf, &sites, noise.as_ref());
                    let approx = qi_mc_values(sites, values, kernel.clone())
                        .expect("finite values on validated sites");
                    move |x: &[f64; 3]| approx.eval(x)
                };
                let mmse_val = mmse(&builder, |x| tf.eval(x), trials, &seeds, &eval_pts);
                let representative = builder(seeds[0]);
                let l2 = l2_error(&representative, |x| tf.eval(x), &rule);
                let linf = linf_error(&representative, |x| tf.eval(x), &linf_grid);
                ErrorReport {
                    n,
                    l2,
                    linf,
                    mmse: Some(mmse_val),
                    wall_time_s: started.elapsed().as_secs_f64(),
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Runs the single-level method on each level's site set and the multilevel
/// scheme across all of them, first clean, then once per configured noise
/// deviation. Writes `multilevel_compare.csv` when an output directory is
/// set.
pub fn run_multilevel_compare(cfg: &ExperimentConfig) -> Result<MultilevelCompareResult> {
    cfg.expect_experiment(Experiment::Multilevel)?;
    cfg.validate()?;
    if cfg.n_grid.len() < 2 {
        return Err(Error::config(
            "n_grid",
            "the multilevel comparison needs at least two levels",
        ));
    }
    let profile = cfg.kernel.resolve()?;
    let tf = cfg.target.resolve()?;

    let mut sets = Vec::with_capacity(cfg.n_grid.len());
    for (j, &n) in cfg.n_grid.iter().enumerate() {
        let set = match cfg.point_kind {
            SiteKind::Spiral => spiral_points(n)?,
            SiteKind::Random => random_points(n, 2, cfg.seed.wrapping_add(j as u64))?,
        };
        sets.push(set);
    }
    let schedule = build_schedule(sets, cfg.nu, cfg.h_mode)?;
    let warnings = schedule.warnings().to_vec();

    let rule = product_quadrature(ERROR_RULE_DEGREE);
    let linf_grid = spiral_points(LINF_GRID_N)?;

    let mut sigmas = vec![0.0];
    sigmas.extend_from_slice(&cfg.noise_levels);

    let mut rows = Vec::new();
    for &sigma in &sigmas {
        let noise = (sigma > 0.0).then(|| NoiseModel::gaussian(sigma, cfg.seed));
        let ml = multilevel_approximate(&schedule, |x| tf.eval(x), &profile, noise.as_ref())?;
        let records = ml.records();

        for (j, rec) in records.iter().enumerate() {
            let n = rec.n;
            let rho_single = cfg.rho_rule.rho_for(n, j);
            let kernel = ZonalKernel::new(profile.clone(), rho_single, 2)?;
            let sites = schedule.sites(j).clone();
            let values = sample_values(&tf, &sites, noise.as_ref());
            let mut single = qi_qmc(sites, values, kernel)?;
            if noise.is_some() {
                single = single.mark_noisy();
            }
            let single_l2 = l2_error(|x| single.eval(x), |x| tf.eval(x), &rule);
            let single_linf = linf_error(|x| single.eval(x), |x| tf.eval(x), &linf_grid);
            rows.push(CompareRow {
                sigma,
                level: rec.level,
                n,
                rho_single,
                single_l2,
                single_linf,
                rho_multi: rec.rho,
                multi_l2: rec.l2,
                multi_linf: rec.linf,
            });
        }
    }

    if let Some(dir) = ensure_output_dir(cfg)? {
        let mut buf = String::from(
            "sigma,level,N,rho_single,single_L2,single_Linf,rho_multi,multi_L2,multi_Linf\n",
        );
        for r in &rows {
            buf.push_str(&format!(
                "{},{},{},{:.6},{:.6e},{:.6e},{:.6},{:.6e},{:.6e}\n",
                r.sigma,
                r.level,
                r.n,
                r.rho_single,
                r.single_l2,
                r.single_linf,
                r.rho_multi,
                r.multi_l2,
                r.multi_linf
            ));
        }
        for w in &warnings {
            buf.push_str("# warning,");
            buf.push_str(w);
            buf.push('\n');
        }
        fs::write(dir.join("multilevel_compare.csv"), buf)?;
        write_manifest(&dir, "multilevel", cfg)?;
    }
    Ok(MultilevelCompareResult { rows, warnings })
}

/// Compares the equal-weight quasi-interpolant (deterministic and random
/// sites) against the filtered projection baseline at matched sample
/// counts, under the configured noise. Writes one CSV per method when an
/// output directory is set.
pub fn run_noise_compare(cfg: &ExperimentConfig) -> Result<NoiseCompareResult> {
    cfg.expect_experiment(Experiment::NoiseCompare)?;
    cfg.validate()?;
    let profile = cfg.kernel.resolve()?;
    let tf = cfg.target.resolve()?;
    let filter = FilterSpec::new(cfg.filter_a)?;

    let mut fhi_degrees = Vec::with_capacity(cfg.n_grid.len());
    for &n in &cfg.n_grid {
        let l = degree_for_budget(n, cfg.filter_a).map_err(|e| {
            Error::config("n_grid", format!("no filtered projection fits N = {n}: {e}"))
        })?;
        fhi_degrees.push(l);
    }
    let l_bar_max = filter.truncation_degree(*fhi_degrees.last().expect("nonempty grid"));
    let err_degree = ERROR_RULE_DEGREE.max(2 * l_bar_max + 2);
    let rule = product_quadrature(err_degree);
    let linf_grid = spiral_points(LINF_GRID_N)?;

    let mut qmcqi_rows = Vec::new();
    let mut mcqi_rows = Vec::new();
    let mut fhi_rows = Vec::new();

    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let rho = cfg.rho_rule.rho_for(n, i);
        let kernel = ZonalKernel::new(profile.clone(), rho, 2)?;

        let started = Instant::now();
        let sites = spiral_points(n)?;
        let noise = cfg.noise.map(|nc| nc.model(cfg.seed));
        let values = sample_values(&tf, &sites, noise.as_ref());
        let mut qmc = qi_qmc(sites, values, kernel.clone())?;
        if noise.is_some() {
            qmc = qmc.mark_noisy();
        }
        qmcqi_rows.push(ErrorReport {
            n,
            l2: l2_error(|x| qmc.eval(x), |x| tf.eval(x), &rule),
            linf: linf_error(|x| qmc.eval(x), |x| tf.eval(x), &linf_grid),
            mmse: None,
            wall_time_s: started.elapsed().as_secs_f64(),
        });

        let started = Instant::now();
        let sites = random_points(n, 2, cfg.seed.wrapping_add(1_000 + i as u64))?;
        let noise = cfg.noise.map(|nc| nc.model(cfg.seed.wrapping_add(1)));
        let values = sample_values(&tf, &sites, noise.as_ref());
        let mut mc = qi_mc_values(sites, values, kernel)?;
        if noise.is_some() {
            mc = mc.mark_noisy();
        }
        mcqi_rows.push(ErrorReport {
            n,
            l2: l2_error(|x| mc.eval(x), |x| tf.eval(x), &rule),
            linf: linf_error(|x| mc.eval(x), |x| tf.eval(x), &linf_grid),
            mmse: None,
            wall_time_s: started.elapsed().as_secs_f64(),
        });

        let started = Instant::now();
        let l = fhi_degrees[i];
        let proj_rule = product_quadrature(2 * filter.truncation_degree(l));
        let node_set = PointSet::from_xyz(&proj_rule.nodes, crate::sphere::PointKind::Loaded)?;
        let noise = cfg.noise.map(|nc| nc.model(cfg.seed.wrapping_add(2)));
        let values = sample_values(&tf, &node_set, noise.as_ref());
        let fhi = filtered_hyperinterpolate(l, cfg.filter_a, &proj_rule, &values)?;
        fhi_rows.push(ErrorReport {
            n,
            l2: l2_error(|x| fhi.eval(x), |x| tf.eval(x), &rule),
            linf: linf_error(|x| fhi.eval(x), |x| tf.eval(x), &linf_grid),
            mmse: None,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }

    if let Some(dir) = ensure_output_dir(cfg)? {
        write_report_csv(&dir.join("noise_compare_qmcqi.csv"), &qmcqi_rows, &[])?;
        write_report_csv(&dir.join("noise_compare_mcqi.csv"), &mcqi_rows, &[])?;
        let degree_notes: Vec<String> = cfg
            .n_grid
            .iter()
            .zip(&fhi_degrees)
            .map(|(n, l)| format!("fhi_degree,{n},{l}"))
            .collect();
        write_report_csv(&dir.join("noise_compare_fhi.csv"), &fhi_rows, &degree_notes)?;
        write_manifest(&dir, "noise-compare", cfg)?;
    }
    Ok(NoiseCompareResult {
        qmcqi: qmcqi_rows,
        mcqi: mcqi_rows,
        fhi: fhi_rows,
        fhi_degrees,
    })
}

fn median3(mut v: [f64; 3]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    v[1]
}

/// Largest projection degree whose unfiltered quadrature requirement fits
/// the node budget.
fn plain_degree_for_budget(budget: usize) -> Result<usize> {
    let mut best = None;
    let mut l = 1usize;
    loop {
        if ProductRule::new(2 * l).len() > budget {
            break;
        }
        best = Some(l);
        l += 1;
    }
    best.ok_or_else(|| {
        Error::config(
            "n_grid",
            format!("budget of {budget} nodes cannot support a degree-1 projection"),
        )
    })
}

/// Times construction plus evaluation on a fixed dense grid for the plain
/// projection, the filtered projection, and the equal-weight
/// quasi-interpolant; three repetitions, median reported. Informational
/// only. Writes `timing.csv` when an output directory is set.
pub fn run_timing(cfg: &ExperimentConfig) -> Result<TimingResult> {
    cfg.expect_experiment(Experiment::Timing)?;
    cfg.validate()?;
    let profile = cfg.kernel.resolve()?;
    let tf = cfg.target.resolve()?;
    let grid = spiral_points(10_000)?;
    let grid_pts: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.xyz(i)).collect();

    let mut rows = Vec::new();
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let l_hi = plain_degree_for_budget(n)?;
        let l_fhi = degree_for_budget(n, cfg.filter_a)
            .map_err(|e| Error::config("n_grid", e.to_string()))?;

        let mut hi_times = [0.0f64; 3];
        let mut fhi_times = [0.0f64; 3];
        let mut qi_times = [0.0f64; 3];
        for rep in 0..3 {
            let started = Instant::now();
            let proj_rule = product_quadrature(2 * l_hi);
            let values: Vec<f64> = proj_rule.nodes.iter().map(|p| tf.eval(p)).collect();
            let hi = crate::baselines::hyperinterpolate(l_hi, &proj_rule, &values)?;
            let mut acc = 0.0f64;
            for p in &grid_pts {
                acc += hi.eval(p);
            }
            std::hint::black_box(acc);
            hi_times[rep] = started.elapsed().as_secs_f64();

            let started = Instant::now();
            let filter = FilterSpec::new(cfg.filter_a)?;
            let proj_rule = product_quadrature(2 * filter.truncation_degree(l_fhi));
            let values: Vec<f64> = proj_rule.nodes.iter().map(|p| tf.eval(p)).collect();
            let fhi = filtered_hyperinterpolate(l_fhi, cfg.filter_a, &proj_rule, &values)?;
            let mut acc = 0.0f64;
            for p in &grid_pts {
                acc += fhi.eval(p);
            }
            std::hint::black_box(acc);
            fhi_times[rep] = started.elapsed().as_secs_f64();

            let started = Instant::now();
            let rho = cfg.rho_rule.rho_for(n, i);
            let kernel = ZonalKernel::new(profile.clone(), rho, 2)?;
            let sites = spiral_points(n)?;
            let values = sample_values(&tf, &sites, None);
            let approx = qi_qmc(sites, values, kernel)?;
            std::hint::black_box(approx.eval_batch(&grid_pts));
            qi_times[rep] = started.elapsed().as_secs_f64();
        }
        rows.push(TimingRow {
            method: "hi".into(),
            n,
            time_s: median3(hi_times),
        });
        rows.push(TimingRow {
            method: "fhi".into(),
            n,
            time_s: median3(fhi_times),
        });
        rows.push(TimingRow {
            method: "qmcqi".into(),
            n,
            time_s: median3(qi_times),
        });
    }

    if let Some(dir) = ensure_output_dir(cfg)? {
        let mut buf = String::from("method,N,time_s\n");
        for r in &rows {
            buf.push_str(&format!("{},{},{:.6}\n", r.method, r.n, r.time_s));
        }
        fs::write(dir.join("timing.csv"), buf)?;
        write_manifest(&dir, "timing", cfg)?;
    }
    Ok(TimingResult { rows })
}

/// Builds one quasi-interpolant per grid entry and dumps the per-site data
/// plus an error row for each; the building block behind the `approx` CLI
/// command. Accepts any experiment tag.
pub fn run_approx(cfg: &ExperimentConfig) -> Result<Vec<ErrorReport>> {
    cfg.validate()?;
    let profile = cfg.kernel.resolve()?;
    let tf = cfg.target.resolve()?;
    let rule = product_quadrature(ERROR_RULE_DEGREE);
    let linf_grid = spiral_points(LINF_GRID_N)?;
    let dir = ensure_output_dir(cfg)?;

    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let started = Instant::now();
        let rho = cfg.rho_rule.rho_for(n, i);
        let kernel = ZonalKernel::new(profile.clone(), rho, 2)?;
        let sites = match cfg.point_kind {
            SiteKind::Spiral => spiral_points(n)?,
            SiteKind::Random => random_points(n, 2, cfg.seed.wrapping_add(i as u64))?,
        };
        let noise = cfg.noise.map(|nc| nc.model(cfg.seed));
        let values = sample_values(&tf, &sites, noise.as_ref());
        let approx = match cfg.point_kind {
            SiteKind::Spiral => qi_qmc(sites, values, kernel)?,
            SiteKind::Random => qi_mc_values(sites, values, kernel)?,
        };
        let approx = if noise.is_some() {
            approx.mark_noisy()
        } else {
            approx
        };
        if let Some(dir) = &dir {
            let mut file = fs::File::create(dir.join(format!("approx_{n}_sample.csv")))?;
            approx.write_sample_csv(&mut file)?;
        }
        rows.push(ErrorReport {
            n,
            l2: l2_error(|x| approx.eval(x), |x| tf.eval(x), &rule),
            linf: linf_error(|x| approx.eval(x), |x| tf.eval(x), &linf_grid),
            mmse: None,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }

    if let Some(dir) = &dir {
        write_report_csv(&dir.join("approx_errors.csv"), &rows, &[])?;
        write_manifest(dir, "approx", cfg)?;
    }
    Ok(rows)
}
