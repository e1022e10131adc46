//! Per-step metrics, per-trial traces and cross-trial aggregation.
//!
//! Two quantities are tracked for every model at every step: the cosine
//! between the memory and the ground-truth bundle of all current device
//! states, and the memory's L2 norm. Trials are averaged pointwise;
//! table-style scalars summarise the last `window` steps (default: the
//! final step only).

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fhrr::{cosine_sim, l2_norm, Hypervector};
use crate::memory::{MemoryKind, ModelSpec};

/// `(cosine(model, truth), ‖model‖)`, with cosine 0 for an empty model.
pub fn step_metrics(model_state: &Hypervector, truth: &Hypervector) -> Result<(f64, f64)> {
    let magnitude = l2_norm(model_state);
    if l2_norm(truth) == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let cosine = if magnitude == 0.0 {
        if model_state.dim() != truth.dim() {
            return Err(Error::DimensionMismatch {
                left: model_state.dim(),
                right: truth.dim(),
            });
        }
        0.0
    } else {
        cosine_sim(model_state, truth)?
    };
    Ok((cosine, magnitude))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelTrace {
    pub model: ModelSpec,
    pub cosine: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Gate weight per step; SRMU models only.
    pub weight: Option<Vec<f64>>,
}

impl ModelTrace {
    pub fn with_capacity(model: ModelSpec, steps: usize) -> Self {
        Self {
            model,
            cosine: Vec::with_capacity(steps),
            magnitude: Vec::with_capacity(steps),
            weight: (model.kind == MemoryKind::Srmu).then(|| Vec::with_capacity(steps)),
        }
    }

    pub fn push(&mut self, cosine: f64, magnitude: f64, weight: f64) {
        self.cosine.push(cosine);
        self.magnitude.push(magnitude);
        if let Some(w) = &mut self.weight {
            w.push(weight);
        }
    }

    pub fn len(&self) -> usize {
        self.cosine.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cosine.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialTrace {
    pub seed: u64,
    pub models: Vec<ModelTrace>,
}

impl TrialTrace {
    pub fn steps(&self) -> usize {
        self.models.first().map_or(0, ModelTrace::len)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelAggregate {
    pub model: ModelSpec,
    pub mean_cosine: Vec<f64>,
    pub mean_magnitude: Vec<f64>,
    pub mean_weight: Option<Vec<f64>>,
    pub final_cosine: f64,
    pub final_magnitude: f64,
    pub se_cosine: f64,
    pub se_magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateResult {
    pub trial_count: usize,
    pub steps: usize,
    pub window: usize,
    pub models: Vec<ModelAggregate>,
}

impl AggregateResult {
    pub fn model(&self, spec: ModelSpec) -> Option<&ModelAggregate> {
        self.models.iter().find(|m| m.model == spec)
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Standard error of the mean; zero for a single sample.
fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = compensated_sum(values.iter().map(|x| (x - m) * (x - m))) / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn pointwise_mean<'a>(series: impl Iterator<Item = &'a [f64]> + Clone, steps: usize) -> Vec<f64> {
    let n = series.clone().count() as f64;
    (0..steps)
        .map(|t| compensated_sum(series.clone().map(|s| s[t])) / n)
        .collect()
}

pub fn aggregate(traces: &[TrialTrace]) -> Result<AggregateResult> {
    aggregate_with_window(traces, 1)
}

/// Pointwise means over trials plus summary scalars over the last `window` steps.
pub fn aggregate_with_window(traces: &[TrialTrace], window: usize) -> Result<AggregateResult> {
    let first = traces.first().ok_or(Error::EmptyAggregate)?;
    let steps = first.steps();
    if window == 0 || window > steps {
        return Err(Error::ShapeMismatch(format!(
            "summary window {window} outside 1..={steps}"
        )));
    }
    for trace in traces {
        if trace.models.len() != first.models.len() {
            return Err(Error::ShapeMismatch("traces have different model rosters".into()));
        }
        for (m, reference) in trace.models.iter().zip(&first.models) {
            if m.model != reference.model {
                return Err(Error::ShapeMismatch(format!(
                    "model {} where {} was expected",
                    m.model.label(),
                    reference.model.label()
                )));
            }
            let weight_len = m.weight.as_ref().map_or(steps, Vec::len);
            if m.cosine.len() != steps || m.magnitude.len() != steps || weight_len != steps {
                return Err(Error::ShapeMismatch(format!(
                    "trial {} has a series of the wrong length",
                    trace.seed
                )));
            }
        }
    }

    let models = (0..first.models.len())
        .map(|i| {
            let cosines = traces.iter().map(|t| t.models[i].cosine.as_slice());
            let magnitudes = traces.iter().map(|t| t.models[i].magnitude.as_slice());
            let mean_cosine = pointwise_mean(cosines, steps);
            let mean_magnitude = pointwise_mean(magnitudes, steps);
            let mean_weight = first.models[i].weight.as_ref().map(|_| {
                pointwise_mean(
                    traces
                        .iter()
                        .map(|t| t.models[i].weight.as_deref().unwrap_or(&[])),
                    steps,
                )
            });
            let tail = steps - window;
            let per_trial = |f: fn(&ModelTrace) -> &[f64]| -> Vec<f64> {
                traces.iter().map(|t| mean(&f(&t.models[i])[tail..])).collect()
            };
            let final_cos = per_trial(|m| &m.cosine);
            let final_mag = per_trial(|m| &m.magnitude);
            ModelAggregate {
                model: first.models[i].model,
                final_cosine: mean(&final_cos),
                final_magnitude: mean(&final_mag),
                se_cosine: standard_error(&final_cos),
                se_magnitude: standard_error(&final_mag),
                mean_cosine,
                mean_magnitude,
                mean_weight,
            }
        })
        .collect();

    Ok(AggregateResult {
        trial_count: traces.len(),
        steps,
        window,
        models,
    })
}

#[derive(Serialize)]
struct CurveRow<'a> {
    experiment: &'a str,
    model: &'a str,
    gamma: f64,
    trial_count: usize,
    step: usize,
    mean_cosine: f64,
    mean_magnitude: f64,
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub model: String,
    pub gamma: f64,
    pub trial_count: usize,
    pub window: usize,
    pub final_cosine: f64,
    pub se_cosine: f64,
    pub final_magnitude: f64,
    pub se_magnitude: f64,
}

/// Long-format curves, one row per model per step (steps are 1-based).
pub fn write_curves_csv(path: &Path, experiment: &str, result: &AggregateResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for m in &result.models {
        let kind = m.model.kind.as_str();
        for (t, (c, mag)) in m.mean_cosine.iter().zip(&m.mean_magnitude).enumerate() {
            w.serialize(CurveRow {
                experiment,
                model: kind,
                gamma: m.model.effective_gamma(),
                trial_count: result.trial_count,
                step: t + 1,
                mean_cosine: *c,
                mean_magnitude: *mag,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn summary_rows(experiment: &str, result: &AggregateResult) -> Vec<SummaryRow> {
    result
        .models
        .iter()
        .map(|m| SummaryRow {
            experiment: experiment.to_string(),
            model: m.model.kind.as_str().to_string(),
            gamma: m.model.effective_gamma(),
            trial_count: result.trial_count,
            window: result.window,
            final_cosine: m.final_cosine,
            se_cosine: m.se_cosine,
            final_magnitude: m.final_magnitude,
            se_magnitude: m.se_magnitude,
        })
        .collect()
}

/// One row per model with the summary scalars and their standard errors.
pub fn write_summary_csv(path: &Path, experiment: &str, result: &AggregateResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in summary_rows(experiment, result) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
