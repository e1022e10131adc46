//! Experiment presets, the seeded multi-trial runner, and report output.
//!
//! Resolution order for an [`ExperimentSpec`]: a named preset, then any
//! fields set in a config file ([`ExperimentOverrides`]), then command-line
//! flags. Each trial derives its seed from `(master_seed, trial_index)` so
//! results do not depend on how trials are spread over worker threads.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{Codebook, QUASI_ORTHOGONAL_THRESHOLD};
use crate::error::{Error, Result};
use crate::memory::{check_gamma, default_roster, ModelSpec};
use crate::metrics::{
    aggregate_with_window, write_curves_csv, write_summary_csv, AggregateResult, TrialTrace,
};
use crate::rng::{substream, trial_seed, Substream};
use crate::sim::{run_trial, run_trial_logged, write_event_log, EnvConfig, Sampling, TrialRun};

pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_SEED: u64 = 1;
pub const PRESETS: [&str; 3] = ["exp1", "exp2", "exp3"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub env: EnvConfig,
    pub models: Vec<ModelSpec>,
    pub trials: usize,
    pub dim: usize,
    pub master_seed: u64,
    /// One codebook for every trial instead of one per trial.
    pub shared_codebook: bool,
    /// Number of final steps averaged into the summary scalars.
    pub summary_window: usize,
}

impl ExperimentSpec {
    fn with_env(name: &str, env: EnvConfig) -> Self {
        Self {
            name: name.to_string(),
            env,
            models: default_roster(),
            trials: DEFAULT_TRIALS,
            dim: DEFAULT_DIM,
            master_seed: DEFAULT_SEED,
            shared_codebook: false,
            summary_window: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("model roster is empty".into()));
        }
        for m in &self.models {
            check_gamma(m.gamma)?;
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if self.summary_window == 0 || self.summary_window > self.env.steps {
            return Err(Error::InvalidConfig(format!(
                "summary_window must lie in 1..={}",
                self.env.steps
            )));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::InvalidConfig(format!(
                "experiment name `{}` must be non-empty ASCII letters, digits, `_` or `-`",
                self.name
            )));
        }
        Ok(())
    }

    pub fn trial_seed(&self, index: usize) -> u64 {
        trial_seed(self.master_seed, index as u64)
    }

    /// The codebook trial `index` encodes with.
    pub fn codebook(&self, index: usize) -> Result<Codebook> {
        let seed = if self.shared_codebook {
            self.master_seed
        } else {
            self.trial_seed(index)
        };
        let mut rng = substream(seed, Substream::Codebook);
        Codebook::build_from_rng(
            self.env.num_devices,
            self.env.num_states,
            self.dim,
            seed,
            QUASI_ORTHOGONAL_THRESHOLD,
            &mut rng,
        )
    }

    /// Runs trial `index` alone; identical to its run inside [`run_experiment`].
    pub fn run_trial(&self, index: usize) -> Result<TrialRun> {
        let codebook = self.codebook(index)?;
        run_trial_logged(&self.env, &self.models, &codebook, self.trial_seed(index))
    }
}

/// The three device-health experiments, all with 5 devices, 5 states,
/// D = 256, 500 steps, 5% observation noise and 1000 trials.
///
/// * `exp1`: partitioned sampling, frozen states;
/// * `exp2`: uniform sampling, drift 0.01;
/// * `exp3`: partitioned sampling, drift 0.01 and jumps 0.001.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let base = EnvConfig::default();
    let env = match name {
        "exp1" => base,
        "exp2" => EnvConfig {
            sampling: Sampling::Uniform,
            p_drift: 0.01,
            ..base
        },
        "exp3" => EnvConfig {
            p_drift: 0.01,
            p_jump: 0.001,
            ..base
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(ExperimentSpec::with_env(name, env))
}

/// Runs every trial on `workers` threads; traces come back in trial order.
pub fn run_trials(spec: &ExperimentSpec, workers: usize) -> Result<Vec<TrialTrace>> {
    spec.validate()?;
    let shared = if spec.shared_codebook {
        Some(spec.codebook(0)?)
    } else {
        None
    };
    let run_one = |index: usize| -> Result<TrialTrace> {
        let owned;
        let codebook = match &shared {
            Some(cb) => cb,
            None => {
                owned = spec.codebook(index)?;
                &owned
            }
        };
        run_trial(&spec.env, &spec.models, codebook, spec.trial_seed(index))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| (0..spec.trials).into_par_iter().map(run_one).collect())
}

/// [`run_trials`] followed by aggregation with the spec's summary window.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<AggregateResult> {
    aggregate_with_window(&run_trials(spec, workers)?, spec.summary_window)
}

/// Field-by-field overrides read from a TOML or JSON config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOverrides {
    /// Preset to start from.
    pub experiment: Option<String>,
    /// Name used in output file names; defaults to the preset name.
    pub name: Option<String>,
    pub trials: Option<usize>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    pub shared_codebook: Option<bool>,
    pub summary_window: Option<usize>,
    pub models: Option<Vec<ModelSpec>>,
    pub env: EnvOverrides,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvOverrides {
    pub num_devices: Option<usize>,
    pub num_states: Option<usize>,
    pub p_drift: Option<f64>,
    pub p_jump: Option<f64>,
    pub noise_prob: Option<f64>,
    pub sampling: Option<Sampling>,
    pub partition_weights: Option<[f64; 3]>,
    pub group_sizes: Option<[usize; 3]>,
    pub steps: Option<usize>,
    pub jump_excludes_current: Option<bool>,
}

macro_rules! overlay {
    ($target:expr, $source:expr, [$($field:ident),* $(,)?]) => {
        $( if let Some(v) = $source.$field.clone() { $target.$field = v; } )*
    };
}

impl EnvOverrides {
    pub fn apply(&self, env: &mut EnvConfig) {
        overlay!(env, self, [
            num_devices, num_states, p_drift, p_jump, noise_prob, sampling,
            partition_weights, group_sizes, steps, jump_excludes_current,
        ]);
    }
}

impl ExperimentOverrides {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            Ok(toml::from_str(&text)?)
        }
    }

    /// Applies every set field on top of `spec` (the preset is not re-read).
    pub fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(name) = &self.name {
            spec.name = name.clone();
        }
        if let Some(trials) = self.trials {
            spec.trials = trials;
        }
        if let Some(dim) = self.dim {
            spec.dim = dim;
        }
        if let Some(seed) = self.seed {
            spec.master_seed = seed;
        }
        if let Some(shared) = self.shared_codebook {
            spec.shared_codebook = shared;
        }
        if let Some(window) = self.summary_window {
            spec.summary_window = window;
        }
        if let Some(models) = &self.models {
            spec.models = models.clone();
        }
        self.env.apply(&mut spec.env);
    }

    /// Starts from `experiment` (or `fallback`) and overlays this file.
    pub fn resolve(&self, fallback: &str) -> Result<ExperimentSpec> {
        let mut spec = preset(self.experiment.as_deref().unwrap_or(fallback))?;
        self.apply(&mut spec);
        Ok(spec)
    }
}

/// Paths written by [`write_report`].
#[derive(Clone, Debug, Serialize)]
pub struct ReportPaths {
    pub curves: PathBuf,
    pub summary: PathBuf,
    pub manifest: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    workers: usize,
    spec: &'a ExperimentSpec,
    trial_seeds: Vec<u64>,
    outputs: [&'a Path; 2],
}

/// Writes `curves_<name>.csv`, `summary_<name>.csv` and `run_manifest.json`.
pub fn write_report(
    spec: &ExperimentSpec,
    result: &AggregateResult,
    workers: usize,
    out_dir: &Path,
) -> Result<ReportPaths> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let curves = out_dir.join(format!("curves_{}.csv", spec.name));
    let summary = out_dir.join(format!("summary_{}.csv", spec.name));
    let manifest = out_dir.join("run_manifest.json");
    write_curves_csv(&curves, &spec.name, result)?;
    write_summary_csv(&summary, &spec.name, result)?;
    check_report(&curves, &summary, spec, result)?;
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        workers,
        spec,
        trial_seeds: (0..spec.trials).map(|i| spec.trial_seed(i)).collect(),
        outputs: [&curves, &summary],
    };
    fs::write(&manifest, serde_json::to_string_pretty(&m)?).map_err(|e| Error::io(&manifest, e))?;
    Ok(ReportPaths {
        curves,
        summary,
        manifest,
    })
}

/// Self-check of written outputs: row counts and headers.
fn check_report(curves: &Path, summary: &Path, spec: &ExperimentSpec, result: &AggregateResult) -> Result<()> {
    let mut reader = csv::Reader::from_path(curves)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let expected = [
        "experiment",
        "model",
        "gamma",
        "trial_count",
        "step",
        "mean_cosine",
        "mean_magnitude",
    ];
    if header != expected {
        return Err(Error::ShapeMismatch(format!("curves header {header:?}")));
    }
    let rows = reader.records().count();
    if rows != spec.models.len() * result.steps {
        return Err(Error::ShapeMismatch(format!(
            "curves file has {rows} rows, expected {}",
            spec.models.len() * result.steps
        )));
    }
    let summary_rows = crate::metrics::read_summary_csv(summary)?;
    if summary_rows.len() != spec.models.len() {
        return Err(Error::ShapeMismatch(format!(
            "summary file has {} rows, expected {}",
            summary_rows.len(),
            spec.models.len()
        )));
    }
    Ok(())
}

/// Paths written by [`write_oracle_dump`].
#[derive(Clone, Debug, Serialize)]
pub struct OracleDump {
    pub event_log: PathBuf,
    pub codebook: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

/// Replays trial `index` and writes its event log, codebook, and final model snapshots.
pub fn write_oracle_dump(spec: &ExperimentSpec, index: usize, out_dir: &Path) -> Result<OracleDump> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let codebook = spec.codebook(index)?;
    let run = run_trial_logged(&spec.env, &spec.models, &codebook, spec.trial_seed(index))?;

    let event_log = out_dir.join(format!("eventlog_{}_{}.csv", spec.name, index));
    write_event_log(&event_log, &run.events)?;
    let codebook_path = out_dir.join(format!("codebook_{}_{}.json", spec.name, index));
    codebook.write_json(&codebook_path)?;

    let mut snapshots = Vec::new();
    for model in &run.models {
        let path = out_dir.join(format!(
            "snapshot_{}_{}_{}_{}.json",
            spec.name,
            index,
            model.kind(),
            model.gamma()
        ));
        fs::write(&path, serde_json::to_string(&model.snapshot())?).map_err(|e| Error::io(&path, e))?;
        snapshots.push(path);
    }
    Ok(OracleDump {
        event_log,
        codebook: codebook_path,
        snapshots,
    })
}
