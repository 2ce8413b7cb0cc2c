//! Experiment configuration, execution, reference caching, and the run
//! manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{
    reference_solution, run_lsvrg, run_prospect, run_sgd, BaselineConfig,
};
use crate::error::{Error, Result};
use crate::harness::data::{generate_synthetic, load_csv, standardize, SyntheticSpec};
use crate::objective::{Dataset, LossKind, ObjectiveModel};
use crate::schedule::{PracticalSchedule, TheoreticalSchedule};
use crate::solver::{run_sorel, InnerStrategy, SorelOptions};
use crate::spectra::SpectralWeights;
use crate::trace::RunResult;

/// Environment variable overriding the configured output directory.
pub const ENV_OUTPUT_DIR: &str = "SOREL_OUTPUT_DIR";
/// Environment variable overriding the worker-thread count.
pub const ENV_THREADS: &str = "SOREL_THREADS";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// CSV path; mutually exclusive with `synthetic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default = "default_true")]
    pub standardize: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// One of `cvar`, `esrm`, `extremile`, `uniform`.
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
}

impl SpectrumConfig {
    pub fn build(&self, n: usize) -> Result<SpectralWeights> {
        let need = |name: &'static str| {
            self.param
                .ok_or_else(|| Error::Config(format!("spectrum `{name}` needs `param`")))
        };
        match self.family.as_str() {
            "cvar" => SpectralWeights::cvar(n, need("cvar")?),
            "esrm" => SpectralWeights::esrm(n, need("esrm")?),
            "extremile" => SpectralWeights::extremile(n, need("extremile")?),
            "uniform" => SpectralWeights::uniform(n),
            other => Err(Error::Config(format!("unknown spectrum family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    /// `least_squares` (default) or `logistic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,
    /// Regularizer modulus; defaults to 1/n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub pass_budget: f64,
    pub output_dir: PathBuf,
    /// Cap on outer iterations for the primal-dual runs (optional).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_iters: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    #[serde(default = "default_ref_tol")]
    pub tol: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { tol: default_ref_tol() }
    }
}

fn default_ref_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    Sorel {
        /// `practical` (default) or `theoretical`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<String>,
        /// Dual step coefficient for the practical schedule.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
        /// Inner step size for the practical schedule.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        /// `svrg` or `exact`; defaults to svrg (practical) / exact
        /// (theoretical).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inner: Option<String>,
        /// Inner-loop minibatch size (heuristic above 1).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        batch_size: Option<usize>,
    },
    Sgd {
        step_size: f64,
        #[serde(default = "default_batch")]
        batch_size: usize,
    },
    Lsvrg {
        step_size: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epoch_len: Option<usize>,
    },
    Prospect {
        step_size: f64,
    },
}

fn default_batch() -> usize {
    64
}

impl MethodConfig {
    pub fn label(&self) -> String {
        match self {
            MethodConfig::Sorel { mode, .. } => match mode.as_deref() {
                Some("theoretical") => "sorel-theoretical".to_string(),
                _ => "sorel".to_string(),
            },
            MethodConfig::Sgd { .. } => "sgd".to_string(),
            MethodConfig::Lsvrg { .. } => "lsvrg".to_string(),
            MethodConfig::Prospect { .. } => "prospect".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(rename = "method")]
    pub methods: Vec<MethodConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset.path, &self.dataset.synthetic) {
            (None, None) => {
                return Err(Error::Config(
                    "dataset needs either `path` or `synthetic`".to_string(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "dataset `path` and `synthetic` are mutually exclusive".to_string(),
                ))
            }
            _ => {}
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one [[method]] is required".to_string()));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::Config("run.seeds must be nonempty".to_string()));
        }
        if self.run.pass_budget.is_nan() || self.run.pass_budget <= 0.0 {
            return Err(Error::Config("run.pass_budget must be positive".to_string()));
        }
        Ok(())
    }

    /// Effective output directory after the environment override.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(ENV_OUTPUT_DIR)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.run.output_dir.clone())
    }

    /// Hash of every semantically meaningful field (the output directory is
    /// deliberately excluded). JSON object keys serialize sorted, so the
    /// hash is stable across field reordering in the TOML.
    pub fn semantic_hash(&self) -> String {
        let doc = serde_json::json!({
            "dataset": self.dataset,
            "spectrum": self.spectrum,
            "objective": self.objective,
            "reference": self.reference,
            "methods": self.methods,
            "seeds": self.run.seeds,
            "pass_budget": self.run.pass_budget,
            "outer_iters": self.run.outer_iters,
        });
        sha_hex(&doc.to_string())
    }

    /// Hash identifying one (method, seed) run; used as the trace cache key.
    fn run_hash(&self, method: &MethodConfig, seed: u64) -> String {
        let doc = serde_json::json!({
            "dataset": self.dataset,
            "spectrum": self.spectrum,
            "objective": self.objective,
            "reference": self.reference,
            "method": method,
            "seed": seed,
            "pass_budget": self.run.pass_budget,
            "outer_iters": self.run.outer_iters,
        });
        sha_hex(&doc.to_string())
    }

    /// Hash identifying the reference problem (dataset, spectrum, mu, tol).
    fn reference_hash(&self) -> String {
        let doc = serde_json::json!({
            "dataset": self.dataset,
            "spectrum": self.spectrum,
            "objective": self.objective,
            "reference": self.reference,
        });
        sha_hex(&doc.to_string())
    }

    pub fn dataset_label(&self) -> String {
        if let Some(path) = &self.dataset.path {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".to_string())
        } else if let Some(s) = &self.dataset.synthetic {
            format!("synthetic-n{}-d{}-s{}", s.n, s.d, s.seed)
        } else {
            "dataset".to_string()
        }
    }
}

fn sha_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Problem instance built from a config: model plus spectrum.
pub struct PreparedProblem {
    pub model: ObjectiveModel,
    pub sigma: SpectralWeights,
}

/// Builds the dataset, standardizes it if requested, and assembles the
/// model and spectrum.
pub fn prepare_problem(config: &ExperimentConfig) -> Result<PreparedProblem> {
    let raw: Dataset = if let Some(path) = &config.dataset.path {
        load_csv(path)?
    } else if let Some(spec) = &config.dataset.synthetic {
        generate_synthetic(spec)?
    } else {
        return Err(Error::Config("dataset needs `path` or `synthetic`".to_string()));
    };
    let dataset = if config.dataset.standardize {
        standardize(&raw)?.0
    } else {
        raw
    };
    let n = dataset.n();
    let loss = match config.objective.loss.as_deref() {
        None | Some("least_squares") => LossKind::LeastSquares,
        Some("logistic") => LossKind::Logistic,
        Some(other) => return Err(Error::Config(format!("unknown loss `{other}`"))),
    };
    let mu = config.objective.mu.unwrap_or(1.0 / n as f64);
    let model = match config.objective.w_radius {
        Some(r) => ObjectiveModel::with_w_radius(dataset, loss, mu, r)?,
        None => ObjectiveModel::new(dataset, loss, mu)?,
    };
    let sigma = config.spectrum.build(n)?;
    Ok(PreparedProblem { model, sigma })
}

/// Cached reference data: the minimizer plus the two objective levels the
/// suboptimality ratio needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceData {
    pub w: Vec<f64>,
    pub objective_at_ref: f64,
    pub objective_at_w0: f64,
}

/// Computes (or loads from `dir`) the reference solution for the config's
/// problem. One reference per (dataset, spectrum, objective, tol).
pub fn load_or_compute_reference(
    config: &ExperimentConfig,
    problem: &PreparedProblem,
    dir: &Path,
    force: bool,
) -> Result<ReferenceData> {
    let key = &config.reference_hash()[..12];
    let path = dir.join(format!("reference-{key}.json"));
    if !force && path.exists() {
        let text = std::fs::read_to_string(&path)?;
        if let Ok(data) = serde_json::from_str::<ReferenceData>(&text) {
            log::info!("reference cache hit: {}", path.display());
            return Ok(data);
        }
        log::warn!("unreadable reference cache {}; recomputing", path.display());
    }
    let w = reference_solution(&problem.model, &problem.sigma, config.reference.tol)?;
    let w0 = vec![0.0; problem.model.d()];
    let data = ReferenceData {
        objective_at_ref: problem.model.primal_objective(&problem.sigma, &w)?,
        objective_at_w0: problem.model.primal_objective(&problem.sigma, &w0)?,
        w,
    };
    std::fs::write(&path, serde_json::to_string_pretty(&data)? + "\n")?;
    Ok(data)
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(format!("json: {e}"))
    }
}

/// Executes one method at one seed under the configured pass budget.
pub fn execute_method(
    problem: &PreparedProblem,
    config: &ExperimentConfig,
    method: &MethodConfig,
    seed: u64,
) -> Result<RunResult> {
    let model = &problem.model;
    let sigma = &problem.sigma;
    let budget = config.run.pass_budget;
    match method {
        MethodConfig::Sorel {
            mode,
            c,
            alpha,
            inner,
            batch_size,
        } => {
            let theoretical = matches!(mode.as_deref(), Some("theoretical"));
            if let Some(m) = mode.as_deref() {
                if m != "practical" && m != "theoretical" {
                    return Err(Error::Config(format!("unknown sorel mode `{m}`")));
                }
            }
            let inner = match inner.as_deref() {
                Some("svrg") => InnerStrategy::Svrg,
                Some("exact") => InnerStrategy::Exact,
                None => {
                    if theoretical {
                        InnerStrategy::Exact
                    } else {
                        InnerStrategy::Svrg
                    }
                }
                Some(other) => {
                    return Err(Error::Config(format!("unknown inner strategy `{other}`")))
                }
            };
            let opts = SorelOptions {
                outer_iters: config.run.outer_iters.unwrap_or(usize::MAX / 2),
                pass_budget: Some(budget),
                seed,
                inner,
                w0: None,
                batch_size: batch_size.unwrap_or(1),
            };
            if theoretical {
                let schedule =
                    TheoreticalSchedule::new(model.reg_mu(), model.lipschitz(), model.smoothness())?;
                run_sorel(model, sigma, &schedule, &opts)
            } else {
                let schedule = PracticalSchedule::new(
                    model.n(),
                    c.unwrap_or(1.0),
                    alpha.unwrap_or(1.0 / (12.0 * model.smoothness())),
                )?;
                run_sorel(model, sigma, &schedule, &opts)
            }
        }
        MethodConfig::Sgd { step_size, batch_size } => run_sgd(
            model,
            sigma,
            &BaselineConfig {
                step_size: *step_size,
                batch_size: *batch_size,
                seed,
                pass_budget: budget,
                ..Default::default()
            },
        ),
        MethodConfig::Lsvrg { step_size, epoch_len } => run_lsvrg(
            model,
            sigma,
            &BaselineConfig {
                step_size: *step_size,
                epoch_len: epoch_len.unwrap_or(0),
                seed,
                pass_budget: budget,
                ..Default::default()
            },
        ),
        MethodConfig::Prospect { step_size } => run_prospect(
            model,
            sigma,
            &BaselineConfig {
                step_size: *step_size,
                seed,
                pass_budget: budget,
                ..Default::default()
            },
        ),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Computed,
    Cached,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub status: RunStatus,
    pub trace_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The manifest written next to the trace files; one per experiment config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub dataset: String,
    pub spectrum: String,
    pub pass_budget: f64,
    pub reference_file: Option<String>,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub manifest_path: PathBuf,
    pub computed: usize,
    pub cached: usize,
    pub failed: usize,
}

/// Runs every (method, seed) combination under the pass budget, attaches
/// suboptimality from the (cached) reference, writes one trace file per run
/// plus a manifest. Re-running an unchanged config skips completed runs.
pub fn run_experiment(config: &ExperimentConfig, force: bool) -> Result<ExperimentSummary> {
    config.validate()?;
    let out_dir = config.output_dir();
    std::fs::create_dir_all(&out_dir)?;

    let semantic = config.semantic_hash();
    let manifest_path = out_dir.join(format!("manifest-{}.json", &semantic[..12]));

    // Problem and reference preparation; a failure here fails every run but
    // still produces a manifest describing what happened.
    let prepared = prepare_problem(config).and_then(|problem| {
        let reference = load_or_compute_reference(config, &problem, &out_dir, force)?;
        Ok((problem, reference))
    });

    let mut runs: Vec<RunRecord> = Vec::new();
    let mut reference_file = None;
    match &prepared {
        Err(err) => {
            let message = err.to_string();
            for method in &config.methods {
                for &seed in &config.run.seeds {
                    runs.push(RunRecord {
                        method: method.label(),
                        seed,
                        status: RunStatus::Failed,
                        trace_file: None,
                        error: Some(message.clone()),
                    });
                }
            }
        }
        Ok((problem, reference)) => {
            reference_file = Some(format!("reference-{}.json", &config.reference_hash()[..12]));
            let jobs: Vec<(usize, u64)> = (0..config.methods.len())
                .flat_map(|m| config.run.seeds.iter().map(move |&s| (m, s)))
                .collect();
            let execute = |&(mi, seed): &(usize, u64)| -> RunRecord {
                let method = &config.methods[mi];
                let label = method.label();
                let run_key = config.run_hash(method, seed);
                let file = format!("trace-{label}-seed{seed}-{}.csv", &run_key[..12]);
                let path = out_dir.join(&file);
                if !force && path.exists() {
                    if crate::trace::TrainingTrace::read_csv(&path).is_ok() {
                        return RunRecord {
                            method: label,
                            seed,
                            status: RunStatus::Cached,
                            trace_file: Some(file),
                            error: None,
                        };
                    }
                    log::warn!("corrupt trace {}; recomputing", path.display());
                }
                let outcome = execute_method(problem, config, method, seed).and_then(|mut out| {
                    out.trace.meta.seed = seed;
                    out.trace.meta.config_hash = run_key.clone();
                    out.trace
                        .attach_suboptimality(reference.objective_at_w0, reference.objective_at_ref)?;
                    out.trace.validate()?;
                    out.trace.write_csv(&path)?;
                    Ok(())
                });
                match outcome {
                    Ok(()) => RunRecord {
                        method: label,
                        seed,
                        status: RunStatus::Computed,
                        trace_file: Some(file),
                        error: None,
                    },
                    Err(e) => RunRecord {
                        method: label,
                        seed,
                        status: RunStatus::Failed,
                        trace_file: None,
                        error: Some(e.to_string()),
                    },
                }
            };
            runs = maybe_parallel(&jobs, execute);
        }
    }

    runs.sort_by(|a, b| a.method.cmp(&b.method).then(a.seed.cmp(&b.seed)));
    let manifest = Manifest {
        version: format!("sorel-{}", env!("CARGO_PKG_VERSION")),
        config_hash: semantic,
        dataset: config.dataset_label(),
        spectrum: config.spectrum.family.clone()
            + &config
                .spectrum
                .param
                .map(|p| format!("-{p}"))
                .unwrap_or_default(),
        pass_budget: config.run.pass_budget,
        reference_file,
        runs,
    };
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;

    let count = |status: RunStatus| manifest.runs.iter().filter(|r| r.status == status).count();
    Ok(ExperimentSummary {
        manifest_path,
        computed: count(RunStatus::Computed),
        cached: count(RunStatus::Cached),
        failed: count(RunStatus::Failed),
    })
}

/// Runs jobs on a rayon pool sized by the thread-count override, or the
/// default pool when unset.
fn maybe_parallel<J: Sync, R: Send>(jobs: &[J], f: impl Fn(&J) -> R + Sync) -> Vec<R> {
    use rayon::prelude::*;
    let threads = std::env::var(ENV_THREADS)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    match threads {
        Some(t) if t >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map(|pool| pool.install(|| jobs.par_iter().map(&f).collect()))
            .unwrap_or_else(|_| jobs.iter().map(&f).collect()),
        _ => jobs.par_iter().map(&f).collect(),
    }
}
