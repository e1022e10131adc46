//! Synthetic device-health environment.
//!
//! `K` devices each sit in one of `S` ordinal health states. Every step each
//! device independently jumps to a random state (probability `p_jump`),
//! drifts by ±1 (probability `p_drift`), or stays put. One device is then
//! observed; with probability `noise_prob` the reading is off by ±1. Drift
//! and noise clamp at the ends of the ordinal scale.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::memory::{MemoryModel, ModelSpec};
use crate::metrics::{step_metrics, ModelTrace, TrialTrace};
use crate::rng::{substream, Substream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Uniform,
    /// Frequent / medium / sparse device groups, every device seen at least once.
    Partitioned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub num_devices: usize,
    pub num_states: usize,
    pub p_drift: f64,
    pub p_jump: f64,
    pub noise_prob: f64,
    pub sampling: Sampling,
    /// Per-device base weight in the (frequent, medium, sparse) groups.
    pub partition_weights: [f64; 3],
    /// Devices per (frequent, medium, sparse) group, assigned in index order.
    pub group_sizes: [usize; 3],
    pub steps: usize,
    /// Redraw jumps that would land on the current state.
    pub jump_excludes_current: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_devices: 5,
            num_states: 5,
            p_drift: 0.0,
            p_jump: 0.0,
            noise_prob: 0.05,
            sampling: Sampling::Partitioned,
            partition_weights: [0.60, 0.15, 0.05],
            group_sizes: [1, 2, 2],
            steps: 500,
            jump_excludes_current: false,
        }
    }
}

fn probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} = {p} is not a probability")))
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_devices == 0 {
            return Err(Error::InvalidConfig("num_devices must be at least 1".into()));
        }
        if self.num_states < 2 {
            return Err(Error::InvalidConfig("num_states must be at least 2".into()));
        }
        probability("p_drift", self.p_drift)?;
        probability("p_jump", self.p_jump)?;
        probability("noise_prob", self.noise_prob)?;
        if self.p_drift + self.p_jump > 1.0 {
            return Err(Error::InvalidConfig("p_drift + p_jump exceeds 1".into()));
        }
        if self.steps < self.num_devices {
            return Err(Error::InvalidConfig(format!(
                "steps ({}) must be at least num_devices ({})",
                self.steps, self.num_devices
            )));
        }
        if self.sampling == Sampling::Partitioned {
            let total: usize = self.group_sizes.iter().sum();
            if total != self.num_devices {
                return Err(Error::InvalidConfig(format!(
                    "group_sizes sum to {total}, expected {}",
                    self.num_devices
                )));
            }
            if self.partition_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::InvalidConfig("partition weights must be non-negative".into()));
            }
            let mass: f64 = self
                .partition_weights
                .iter()
                .zip(&self.group_sizes)
                .map(|(w, &n)| w * n as f64)
                .sum();
            if mass <= 0.0 {
                return Err(Error::InvalidConfig("partition weights carry no mass".into()));
            }
        }
        Ok(())
    }

    /// Per-device observation probabilities after normalisation.
    pub fn device_distribution(&self) -> Vec<f64> {
        match self.sampling {
            Sampling::Uniform => vec![1.0 / self.num_devices as f64; self.num_devices],
            Sampling::Partitioned => {
                let raw: Vec<f64> = self
                    .group_sizes
                    .iter()
                    .zip(&self.partition_weights)
                    .flat_map(|(&n, &w)| std::iter::repeat_n(w, n))
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / total).collect()
            }
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvState {
    pub states: Vec<usize>,
    pub step: u64,
}

/// What happened to the devices during one transition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Transitions {
    pub drifts: usize,
    pub jumps: usize,
}

fn nudge(state: usize, up: bool, num_states: usize) -> usize {
    if up {
        (state + 1).min(num_states - 1)
    } else {
        state.saturating_sub(1)
    }
}

impl EnvState {
    /// Initial states drawn uniformly and independently per device.
    pub fn initial<R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> Self {
        Self {
            states: (0..cfg.num_devices)
                .map(|_| rng.random_range(0..cfg.num_states))
                .collect(),
            step: 0,
        }
    }

    /// Advances every device by one transition and counts the events.
    ///
    /// One uniform draw per device decides jump (`u < p_jump`), drift
    /// (`u < p_jump + p_drift`) or stay. A drift at a boundary still counts
    /// as a drift event even when clamping leaves the state unchanged.
    pub fn advance<R: Rng + ?Sized>(&mut self, cfg: &EnvConfig, rng: &mut R) -> Transitions {
        let mut events = Transitions::default();
        for state in &mut self.states {
            let u: f64 = rng.random();
            if u < cfg.p_jump {
                events.jumps += 1;
                *state = if cfg.jump_excludes_current {
                    let r = rng.random_range(0..cfg.num_states - 1);
                    if r >= *state {
                        r + 1
                    } else {
                        r
                    }
                } else {
                    rng.random_range(0..cfg.num_states)
                };
            } else if u < cfg.p_jump + cfg.p_drift {
                events.drifts += 1;
                *state = nudge(*state, rng.random(), cfg.num_states);
            }
        }
        self.step += 1;
        events
    }
}

/// Pure form of [`EnvState::advance`].
pub fn step_dynamics<R: Rng + ?Sized>(env: &EnvState, cfg: &EnvConfig, rng: &mut R) -> EnvState {
    let mut next = env.clone();
    next.advance(cfg, rng);
    next
}

/// The device observed at each of the `steps` time steps.
///
/// Partitioned schedules open with a random permutation of all devices and
/// fill the remaining slots i.i.d. from [`EnvConfig::device_distribution`].
pub fn build_schedule<R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> Result<Vec<usize>> {
    cfg.validate()?;
    let k = cfg.num_devices;
    match cfg.sampling {
        Sampling::Uniform => Ok((0..cfg.steps).map(|_| rng.random_range(0..k)).collect()),
        Sampling::Partitioned => {
            let dist = WeightedIndex::new(cfg.device_distribution())
                .map_err(|e| Error::InvalidConfig(format!("sampling weights: {e}")))?;
            let mut schedule: Vec<usize> = (0..k).collect();
            schedule.shuffle(rng);
            schedule.extend((k..cfg.steps).map(|_| dist.sample(rng)));
            Ok(schedule)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub step: u64,
    pub device: usize,
    pub true_state: usize,
    pub observed_state: usize,
    /// The noise draw fired, even if clamping returned the true state.
    pub corrupted: bool,
}

pub fn observe<R: Rng + ?Sized>(
    env: &EnvState,
    device: usize,
    cfg: &EnvConfig,
    rng: &mut R,
) -> Result<Observation> {
    let true_state = *env.states.get(device).ok_or(Error::DeviceOutOfRange {
        index: device,
        num_devices: env.states.len(),
    })?;
    let corrupted = rng.random::<f64>() < cfg.noise_prob;
    let observed_state = if corrupted {
        nudge(true_state, rng.random(), cfg.num_states)
    } else {
        true_state
    };
    Ok(Observation {
        step: env.step,
        device,
        true_state,
        observed_state,
        corrupted,
    })
}

/// One row of a trial's event log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventRecord {
    pub observation: Observation,
    pub transitions: Transitions,
    /// All latent states after this step's transition.
    pub states: Vec<usize>,
}

/// Everything a trial produced: metric traces, the event log, and the final models.
pub struct TrialRun {
    pub trace: TrialTrace,
    pub events: Vec<EventRecord>,
    pub models: Vec<MemoryModel>,
}

/// Runs one trial and keeps only the metric traces.
pub fn run_trial(cfg: &EnvConfig, models: &[ModelSpec], codebook: &Codebook, seed: u64) -> Result<TrialTrace> {
    Ok(run_trial_logged(cfg, models, codebook, seed)?.trace)
}

/// Runs one trial.
///
/// Dynamics, sampling and observation noise each read their own substream of
/// `seed`, and every model sees the same observation sequence.
pub fn run_trial_logged(
    cfg: &EnvConfig,
    models: &[ModelSpec],
    codebook: &Codebook,
    seed: u64,
) -> Result<TrialRun> {
    cfg.validate()?;
    if codebook.num_devices() != cfg.num_devices || codebook.num_states() != cfg.num_states {
        return Err(Error::ShapeMismatch(format!(
            "codebook is {}x{}, environment is {}x{}",
            codebook.num_devices(),
            codebook.num_states(),
            cfg.num_devices,
            cfg.num_states
        )));
    }
    let mut dynamics_rng = substream(seed, Substream::Dynamics);
    let mut sampling_rng = substream(seed, Substream::Sampling);
    let mut noise_rng = substream(seed, Substream::Noise);

    let mut memories = models
        .iter()
        .map(|m| m.build(codebook.dim))
        .collect::<Result<Vec<_>>>()?;
    let mut traces: Vec<ModelTrace> = models
        .iter()
        .map(|m| ModelTrace::with_capacity(*m, cfg.steps))
        .collect();

    let schedule = build_schedule(cfg, &mut sampling_rng)?;
    let mut env = EnvState::initial(cfg, &mut dynamics_rng);
    let mut truth = codebook.ground_truth_memory(&env.states)?;
    let mut events = Vec::with_capacity(cfg.steps);

    for &device in &schedule {
        let previous = env.states.clone();
        let transitions = env.advance(cfg, &mut dynamics_rng);
        if env.states != previous {
            truth = codebook.ground_truth_memory(&env.states)?;
        }
        let obs = observe(&env, device, cfg, &mut noise_rng)?;
        let key = codebook.key(obs.device)?;
        let value = codebook.value(obs.observed_state)?;
        for (memory, trace) in memories.iter_mut().zip(&mut traces) {
            let weight = memory.update(key, value)?;
            let (cosine, magnitude) = step_metrics(memory.state(), &truth)?;
            trace.push(cosine, magnitude, weight);
        }
        events.push(EventRecord {
            observation: obs,
            transitions,
            states: env.states.clone(),
        });
    }

    Ok(TrialRun {
        trace: TrialTrace { seed, models: traces },
        events,
        models: memories,
    })
}

/// Writes the event log as CSV: `t,device,true_state,observed_state,corrupted,drifts,jumps,states`
/// with `states` a `;`-joined list of every device's latent state.
pub fn write_event_log(path: &Path, events: &[EventRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t",
        "device",
        "true_state",
        "observed_state",
        "corrupted",
        "drifts",
        "jumps",
        "states",
    ])?;
    for e in events {
        let o = &e.observation;
        let states: Vec<String> = e.states.iter().map(ToString::to_string).collect();
        w.write_record([
            o.step.to_string(),
            o.device.to_string(),
            o.true_state.to_string(),
            o.observed_state.to_string(),
            u8::from(o.corrupted).to_string(),
            e.transitions.drifts.to_string(),
            e.transitions.jumps.to_string(),
            states.join(";"),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::default_roster;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn defaults_validate_and_normalise() {
        let cfg = EnvConfig::default();
        cfg.validate().unwrap();
        let d = cfg.device_distribution();
        let expected = [0.6, 0.15, 0.15, 0.05, 0.05];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            EnvConfig { p_drift: 1.2, ..Default::default() },
            EnvConfig { p_drift: 0.6, p_jump: 0.6, ..Default::default() },
            EnvConfig { noise_prob: -0.1, ..Default::default() },
            EnvConfig { group_sizes: [1, 1, 1], ..Default::default() },
            EnvConfig { steps: 4, ..Default::default() },
            EnvConfig { num_states: 1, ..Default::default() },
            EnvConfig { partition_weights: [0.0; 3], ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))), "{cfg:?}");
        }
        let uniform_any_groups = EnvConfig {
            sampling: Sampling::Uniform,
            group_sizes: [0, 0, 0],
            ..Default::default()
        };
        uniform_any_groups.validate().unwrap();
    }

    #[test]
    fn frozen_dynamics_never_move() {
        let cfg = EnvConfig::default();
        let mut r = rng(1);
        let mut env = EnvState::initial(&cfg, &mut r);
        let start = env.states.clone();
        for _ in 0..1000 {
            let ev = env.advance(&cfg, &mut r);
            assert_eq!(ev, Transitions::default());
            assert_eq!(env.states, start);
        }
        assert_eq!(env.step, 1000);
    }

    #[test]
    fn drift_clamps_at_boundaries() {
        assert_eq!(nudge(0, false, 5), 0);
        assert_eq!(nudge(4, true, 5), 4);
        assert_eq!(nudge(2, true, 5), 3);
        let cfg = EnvConfig { p_drift: 1.0, ..Default::default() };
        let mut r = rng(2);
        let mut env = EnvState { states: vec![0; 5], step: 0 };
        for _ in 0..1000 {
            env.advance(&cfg, &mut r);
            assert!(env.states.iter().all(|&s| s < 5));
        }
    }

    #[test]
    fn states_stay_in_range_under_fuzz() {
        let cfg = EnvConfig { p_drift: 0.3, p_jump: 0.2, ..Default::default() };
        let mut r = rng(3);
        let mut env = EnvState::initial(&cfg, &mut r);
        for _ in 0..200_000 {
            env.advance(&cfg, &mut r);
            assert!(env.states.iter().all(|&s| s < cfg.num_states));
        }
    }

    #[test]
    fn jump_excluding_current_always_moves() {
        let cfg = EnvConfig { p_jump: 1.0, jump_excludes_current: true, ..Default::default() };
        let mut r = rng(4);
        let mut env = EnvState::initial(&cfg, &mut r);
        for _ in 0..1000 {
            let before = env.states.clone();
            env.advance(&cfg, &mut r);
            assert!(before.iter().zip(&env.states).all(|(a, b)| a != b));
        }
    }

    #[test]
    fn step_dynamics_is_pure() {
        let cfg = EnvConfig { p_drift: 0.5, ..Default::default() };
        let env = EnvState { states: vec![2; 5], step: 0 };
        let a = step_dynamics(&env, &cfg, &mut rng(5));
        let b = step_dynamics(&env, &cfg, &mut rng(5));
        assert_eq!(a, b);
        assert_eq!(env.states, vec![2; 5]);
        assert_eq!(a.step, 1);
    }

    #[test]
    fn observation_noise_and_clamp() {
        let quiet = EnvConfig { noise_prob: 0.0, ..Default::default() };
        let env = EnvState { states: vec![0, 1, 2, 3, 4], step: 7 };
        let mut r = rng(6);
        for d in 0..5 {
            let o = observe(&env, d, &quiet, &mut r).unwrap();
            assert_eq!(o.observed_state, o.true_state);
            assert!(!o.corrupted);
            assert_eq!(o.step, 7);
        }
        let loud = EnvConfig { noise_prob: 1.0, ..Default::default() };
        let mut saw_clamped = false;
        for _ in 0..200 {
            let o = observe(&env, 4, &loud, &mut r).unwrap();
            assert!(o.corrupted);
            assert!(o.observed_state == 3 || o.observed_state == 4);
            saw_clamped |= o.observed_state == 4;
        }
        assert!(saw_clamped);
        assert!(matches!(observe(&env, 5, &loud, &mut r), Err(Error::DeviceOutOfRange { .. })));
    }

    #[test]
    fn partitioned_schedule_covers_every_device() {
        let cfg = EnvConfig { steps: 5, ..Default::default() };
        for seed in 0..1000 {
            let mut s = build_schedule(&cfg, &mut rng(seed)).unwrap();
            s.sort_unstable();
            assert_eq!(s, vec![0, 1, 2, 3, 4]);
        }
        let cfg = EnvConfig::default();
        for seed in 0..1000 {
            let s = build_schedule(&cfg, &mut rng(seed)).unwrap();
            assert_eq!(s.len(), 500);
            assert!((0..5).all(|d| s.contains(&d)));
        }
    }

    #[test]
    fn schedule_rejects_short_trials() {
        let cfg = EnvConfig { steps: 3, ..Default::default() };
        assert!(build_schedule(&cfg, &mut rng(1)).is_err());
    }

    fn tiny() -> (EnvConfig, Codebook) {
        let cfg = EnvConfig {
            num_devices: 1,
            num_states: 2,
            noise_prob: 0.0,
            sampling: Sampling::Uniform,
            steps: 3,
            ..Default::default()
        };
        (cfg, Codebook::build(1, 2, 256, 3).unwrap())
    }

    #[test]
    fn tiny_trial_naive_norms() {
        let (cfg, cb) = tiny();
        let t = run_trial(&cfg, &[ModelSpec::naive()], &cb, 9).unwrap();
        let norms = &t.models[0].magnitude;
        for (n, expected) in norms.iter().zip([16.0, 32.0, 48.0]) {
            assert!((n - expected).abs() < 1e-9);
        }
        assert!(t.models[0].cosine.iter().all(|c| (c - 1.0).abs() < 1e-12));
    }

    #[test]
    fn tiny_trial_srmu_fixed_point() {
        let (cfg, cb) = tiny();
        let t = run_trial(&cfg, &[ModelSpec::srmu(1.0)], &cb, 9).unwrap();
        for n in &t.models[0].magnitude {
            assert!((n - 16.0).abs() < 1e-6);
        }
        let w = t.models[0].weight.as_ref().unwrap();
        assert_eq!(w[0], 1.0);
        assert!(w[1..].iter().all(|w| w.abs() < 1e-12));
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = EnvConfig { p_drift: 0.05, p_jump: 0.01, ..Default::default() };
        let cb = Codebook::build(5, 5, 64, 1).unwrap();
        let a = run_trial(&cfg, &default_roster(), &cb, 77).unwrap();
        let b = run_trial(&cfg, &default_roster(), &cb, 77).unwrap();
        assert_eq!(a, b);
        let c = run_trial(&cfg, &default_roster(), &cb, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn model_roster_does_not_perturb_environment() {
        let cfg = EnvConfig { p_drift: 0.05, p_jump: 0.01, ..Default::default() };
        let cb = Codebook::build(5, 5, 64, 1).unwrap();
        let one = run_trial_logged(&cfg, &[ModelSpec::naive()], &cb, 5).unwrap();
        let all = run_trial_logged(&cfg, &default_roster(), &cb, 5).unwrap();
        assert_eq!(one.events, all.events);
        assert_eq!(one.trace.models[0], all.trace.models[0]);
    }

    #[test]
    fn frozen_truth_is_constant() {
        let cfg = EnvConfig::default();
        let cb = Codebook::build(5, 5, 64, 1).unwrap();
        let run = run_trial_logged(&cfg, &[ModelSpec::naive()], &cb, 2).unwrap();
        let first = &run.events[0].states;
        assert!(run.events.iter().all(|e| &e.states == first));
    }

    #[test]
    fn codebook_shape_checked() {
        let cfg = EnvConfig::default();
        let cb = Codebook::build(4, 5, 64, 1).unwrap();
        assert!(matches!(
            run_trial(&cfg, &default_roster(), &cb, 1),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn event_log_csv() {
        let (cfg, cb) = tiny();
        let run = run_trial_logged(&cfg, &[ModelSpec::naive()], &cb, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        write_event_log(&path, &run.events).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,device,true_state,observed_state,corrupted,drifts,jumps,states");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,0,"));
    }

    #[test]
    fn config_file_formats() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("env.toml");
        std::fs::write(&toml_path, "p_drift = 0.01\nsampling = \"uniform\"\n").unwrap();
        let cfg = EnvConfig::from_path(&toml_path).unwrap();
        assert_eq!(cfg.p_drift, 0.01);
        assert_eq!(cfg.sampling, Sampling::Uniform);
        assert_eq!(cfg.steps, 500);

        let json_path = dir.path().join("env.json");
        std::fs::write(&json_path, r#"{"noise_prob": 0.1, "bogus": 1}"#).unwrap();
        assert!(EnvConfig::from_path(&json_path).is_err());
    }
}
