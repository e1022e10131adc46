//! Seeded symbol tables for devices (keys) and ordinal states (values).

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fhrr::{cosine_sim, Hypervector};

/// Maximum pairwise cosine accepted between two codebook vectors.
pub const QUASI_ORTHOGONAL_THRESHOLD: f64 = 0.25;

/// Resampling attempts per vector before giving up.
pub const MAX_RETRIES: usize = 64;

/// Device keys and state values drawn from one seeded stream.
///
/// Keys are drawn first (device `0..K`), then values (state `0..S`). A vector
/// whose cosine with any earlier vector reaches the threshold is redrawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub seed: u64,
    pub dim: usize,
    pub device_keys: Vec<Hypervector>,
    pub state_values: Vec<Hypervector>,
}

impl Codebook {
    pub fn build(num_devices: usize, num_states: usize, dim: usize, seed: u64) -> Result<Self> {
        Self::build_with_threshold(num_devices, num_states, dim, seed, QUASI_ORTHOGONAL_THRESHOLD)
    }

    pub fn build_with_threshold(
        num_devices: usize,
        num_states: usize,
        dim: usize,
        seed: u64,
        threshold: f64,
    ) -> Result<Self> {
        if num_devices == 0 {
            return Err(Error::InvalidConfig("codebook needs at least one device".into()));
        }
        if num_states < 2 {
            return Err(Error::InvalidConfig("codebook needs at least two states".into()));
        }
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build_from_rng(num_devices, num_states, dim, seed, threshold, &mut rng)
    }

    /// Builds from an externally positioned generator; `seed` is recorded only.
    pub(crate) fn build_from_rng(
        num_devices: usize,
        num_states: usize,
        dim: usize,
        seed: u64,
        threshold: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut drawn: Vec<Hypervector> = Vec::with_capacity(num_devices + num_states);
        for _ in 0..num_devices + num_states {
            let mut accepted = None;
            for _ in 0..=MAX_RETRIES {
                let candidate = Hypervector::random_phasor(dim, rng)?;
                let mut ok = true;
                for prev in &drawn {
                    if cosine_sim(prev, &candidate)? >= threshold {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    accepted = Some(candidate);
                    break;
                }
            }
            match accepted {
                Some(v) => drawn.push(v),
                None => {
                    return Err(Error::CodebookExhausted {
                        dim,
                        threshold,
                        retries: MAX_RETRIES,
                    })
                }
            }
        }
        let state_values = drawn.split_off(num_devices);
        Ok(Self {
            seed,
            dim,
            device_keys: drawn,
            state_values,
        })
    }

    pub fn num_devices(&self) -> usize {
        self.device_keys.len()
    }

    pub fn num_states(&self) -> usize {
        self.state_values.len()
    }

    pub fn key(&self, device: usize) -> Result<&Hypervector> {
        self.device_keys.get(device).ok_or(Error::DeviceOutOfRange {
            index: device,
            num_devices: self.num_devices(),
        })
    }

    pub fn value(&self, state: usize) -> Result<&Hypervector> {
        self.state_values.get(state).ok_or(Error::StateOutOfRange {
            index: state,
            num_states: self.num_states(),
        })
    }

    /// Unnormalised bundle `Σ_i key_i ⊗ value_{states[i]}` of the true associations.
    pub fn ground_truth_memory(&self, states: &[usize]) -> Result<Hypervector> {
        if states.len() != self.num_devices() {
            return Err(Error::ShapeMismatch(format!(
                "{} device states for a codebook of {} devices",
                states.len(),
                self.num_devices()
            )));
        }
        let mut memory = Hypervector::zeros(self.dim)?;
        for (key, &state) in self.device_keys.iter().zip(states) {
            memory.add_bound(key, self.value(state)?, 1.0)?;
        }
        Ok(memory)
    }

    /// Nearest state value by cosine; ties go to the lowest index.
    pub fn cleanup_state(&self, noisy_value: &Hypervector) -> Result<(usize, f64)> {
        let mut best = (0, f64::NEG_INFINITY);
        for (index, value) in self.state_values.iter().enumerate() {
            let s = cosine_sim(noisy_value, value)?;
            if s > best.1 {
                best = (index, s);
            }
        }
        Ok(best)
    }

    /// Largest cosine over all pairs of codebook vectors.
    pub fn max_pairwise_cosine(&self) -> f64 {
        let all: Vec<&Hypervector> = self.device_keys.iter().chain(&self.state_values).collect();
        let mut max = 0.0f64;
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                max = max.max(cosine_sim(a, b).unwrap_or(0.0));
            }
        }
        max
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cb: Self = serde_json::from_str(&text)?;
        if cb.device_keys.iter().chain(&cb.state_values).any(|v| v.dim() != cb.dim) {
            return Err(Error::ShapeMismatch("codebook vector dimension disagrees with `dim`".into()));
        }
        Ok(cb)
    }
}
