//! Sequential key-value memories.
//!
//! Three update policies share one stateful interface:
//!
//! * **naive** bundles every observation: `M ← M + k⊗v`;
//! * **temporal** decays first: `M ← γM + k⊗v`;
//! * **srmu** decays, reads the value currently stored under `k` from the
//!   decayed memory, and scales the new association by its novelty
//!   `w = 1 − s`, where `s` is the cosine between the retrieved value and
//!   `v` (taken as 0 when either has zero norm).
//!
//! [`MemoryModel`] updates in place using a fused retrieval kernel. The free
//! functions [`naive_step`], [`temporal_step`] and [`srmu_step`] compute the
//! same single steps from the plain algebra in [`crate::fhrr`] and never
//! mutate their input.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fhrr::{bind, bundle, cosine_sim, l2_norm, scale, unbind, Hypervector};

/// Norms at or below this are treated as zero by the relevance gate.
pub const MIN_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryKind {
    Naive,
    Temporal,
    Srmu,
}

impl MemoryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MemoryKind::Naive => "naive",
            MemoryKind::Temporal => "temporal",
            MemoryKind::Srmu => "srmu",
        }
    }
}

impl fmt::Display for MemoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MemoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(MemoryKind::Naive),
            "temporal" => Ok(MemoryKind::Temporal),
            "srmu" => Ok(MemoryKind::Srmu),
            other => Err(Error::InvalidConfig(format!("unknown memory kind `{other}`"))),
        }
    }
}

/// How the SRMU novelty weight is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Gate {
    /// `w = 1 − cosine(retrieved, observed)`.
    #[default]
    Relevance,
    /// Constant weight; `Fixed(1.0)` turns SRMU into the temporal model.
    Fixed(f64),
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryModel {
    kind: MemoryKind,
    gamma: f64,
    state: Hypervector,
    update_count: u64,
    last_weight: f64,
    gate: Gate,
}

impl MemoryModel {
    /// An empty memory. `gamma` must lie in `(0, 1]`; the naive kind then
    /// ignores it and behaves as `gamma = 1`.
    pub fn new(kind: MemoryKind, gamma: f64, dim: usize) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self {
            kind,
            gamma: if kind == MemoryKind::Naive { 1.0 } else { gamma },
            state: Hypervector::zeros(dim)?,
            update_count: 0,
            last_weight: 0.0,
            gate: Gate::Relevance,
        })
    }

    /// Replaces the SRMU relevance gate. Other kinds ignore it.
    pub fn with_gate(mut self, gate: Gate) -> Self {
        self.gate = gate;
        self
    }

    pub fn kind(&self) -> MemoryKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn state(&self) -> &Hypervector {
        &self.state
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    /// Weight applied by the most recent update (always 1 for naive and temporal).
    pub fn last_weight(&self) -> f64 {
        self.last_weight
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.state)
    }

    /// Integrates one observation and returns the weight it was stored with.
    pub fn update(&mut self, key: &Hypervector, value: &Hypervector) -> Result<f64> {
        for v in [key, value] {
            if v.dim() != self.dim() {
                return Err(Error::DimensionMismatch {
                    left: self.dim(),
                    right: v.dim(),
                });
            }
        }
        let weight = match self.kind {
            MemoryKind::Naive => 1.0,
            MemoryKind::Temporal => {
                self.state.scale_mut(self.gamma);
                1.0
            }
            MemoryKind::Srmu => {
                self.state.scale_mut(self.gamma);
                match self.gate {
                    Gate::Relevance => {
                        let s = self.state.unbound_cosine(key, value, MIN_NORM)?.unwrap_or(0.0);
                        1.0 - s
                    }
                    Gate::Fixed(w) => w,
                }
            }
        };
        self.state.add_bound(key, value, weight)?;
        self.update_count += 1;
        self.last_weight = weight;
        Ok(weight)
    }

    /// The value currently associated with `key`: `unbind(M, key)`.
    pub fn read(&self, key: &Hypervector) -> Result<Hypervector> {
        unbind(&self.state, key)
    }

    pub fn snapshot(&self) -> MemorySnapshot {
        MemorySnapshot {
            kind: self.kind,
            gamma: self.gamma,
            dim: self.dim(),
            update_count: self.update_count,
            last_weight: self.last_weight,
            state: self.state.clone(),
        }
    }

    pub fn from_snapshot(snapshot: MemorySnapshot) -> Result<Self> {
        check_gamma(snapshot.gamma)?;
        if snapshot.state.dim() != snapshot.dim {
            return Err(Error::DimensionMismatch {
                left: snapshot.dim,
                right: snapshot.state.dim(),
            });
        }
        Ok(Self {
            kind: snapshot.kind,
            gamma: snapshot.gamma,
            state: snapshot.state,
            update_count: snapshot.update_count,
            last_weight: snapshot.last_weight,
            gate: Gate::Relevance,
        })
    }
}

/// A memory policy and its decay, as listed in an experiment roster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: MemoryKind,
    pub gamma: f64,
}

impl ModelSpec {
    pub fn new(kind: MemoryKind, gamma: f64) -> Self {
        Self { kind, gamma }
    }

    pub fn naive() -> Self {
        Self::new(MemoryKind::Naive, 1.0)
    }

    pub fn temporal(gamma: f64) -> Self {
        Self::new(MemoryKind::Temporal, gamma)
    }

    pub fn srmu(gamma: f64) -> Self {
        Self::new(MemoryKind::Srmu, gamma)
    }

    /// Decay actually applied; naive is always 1.
    pub fn effective_gamma(&self) -> f64 {
        match self.kind {
            MemoryKind::Naive => 1.0,
            _ => self.gamma,
        }
    }

    pub fn build(&self, dim: usize) -> Result<MemoryModel> {
        MemoryModel::new(self.kind, self.gamma, dim)
    }

    /// `naive`, `temporal(0.95)`, `srmu(1)`.
    pub fn label(&self) -> String {
        match self.kind {
            MemoryKind::Naive => "naive".to_string(),
            kind => format!("{kind}({})", self.gamma),
        }
    }

    /// Naive baseline, then a temporal model (only for γ < 1, since γ = 1 is
    /// the naive model again) and an SRMU model per decay.
    pub fn roster(gammas: &[f64]) -> Vec<ModelSpec> {
        let mut models = vec![ModelSpec::naive()];
        for &gamma in gammas {
            if gamma < 1.0 {
                models.push(ModelSpec::temporal(gamma));
            }
            models.push(ModelSpec::srmu(gamma));
        }
        models
    }
}

/// `naive`, `srmu(1)`, `temporal(0.95)`, `srmu(0.95)`.
pub fn default_roster() -> Vec<ModelSpec> {
    ModelSpec::roster(&[1.0, 0.95])
}

/// Serialised form of a [`MemoryModel`]; the state is a list of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub kind: MemoryKind,
    pub gamma: f64,
    pub dim: usize,
    pub update_count: u64,
    pub last_weight: f64,
    pub state: Hypervector,
}

pub fn naive_step(state: &Hypervector, key: &Hypervector, value: &Hypervector) -> Result<Hypervector> {
    bundle(state, &bind(key, value)?)
}

pub fn temporal_step(
    state: &Hypervector,
    key: &Hypervector,
    value: &Hypervector,
    gamma: f64,
) -> Result<Hypervector> {
    check_gamma(gamma)?;
    bundle(&scale(state, gamma), &bind(key, value)?)
}

/// One SRMU update from the plain algebra. Returns the new state and the weight.
pub fn srmu_step(
    state: &Hypervector,
    key: &Hypervector,
    value: &Hypervector,
    gamma: f64,
    gate: Gate,
) -> Result<(Hypervector, f64)> {
    check_gamma(gamma)?;
    let decayed = scale(state, gamma);
    let retrieved = unbind(&decayed, key)?;
    let weight = match gate {
        Gate::Fixed(w) => w,
        Gate::Relevance => {
            let s = if l2_norm(&retrieved) > MIN_NORM && l2_norm(value) > MIN_NORM {
                cosine_sim(&retrieved, value)?
            } else {
                0.0
            };
            1.0 - s
        }
    };
    let delta = scale(&bind(key, value)?, weight);
    Ok((bundle(&decayed, &delta)?, weight))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn phasor(dim: usize, rng: &mut ChaCha8Rng) -> Hypervector {
        Hypervector::random_phasor(dim, rng).unwrap()
    }

    fn max_diff(a: &Hypervector, b: &Hypervector) -> f64 {
        a.components()
            .iter()
            .zip(b.components())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn init_and_gamma_guard() {
        assert_eq!(MemoryModel::new(MemoryKind::Srmu, 0.95, 256).unwrap().norm(), 0.0);
        assert_eq!(MemoryModel::new(MemoryKind::Naive, 1.0, 256).unwrap().norm(), 0.0);
        for bad in [1.5, 0.0, -0.1, f64::NAN] {
            assert!(matches!(
                MemoryModel::new(MemoryKind::Temporal, bad, 256),
                Err(Error::InvalidGamma(_))
            ));
        }
        assert!(matches!(MemoryModel::new(MemoryKind::Srmu, 1.0, 0), Err(Error::ZeroDimension)));
        assert_eq!(MemoryModel::new(MemoryKind::Naive, 0.5, 8).unwrap().gamma(), 1.0);
    }

    #[test]
    fn naive_accumulates_coherently() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (k, v) = (phasor(256, &mut rng), phasor(256, &mut rng));
        let mut m = MemoryModel::new(MemoryKind::Naive, 1.0, 256).unwrap();
        m.update(&k, &v).unwrap();
        assert_eq!(m.state(), &bind(&k, &v).unwrap());
        assert!((m.norm() - 16.0).abs() < 1e-9);
        for _ in 1..7 {
            m.update(&k, &v).unwrap();
        }
        assert!((m.norm() - 7.0 * 16.0).abs() < 1e-9);
        assert_eq!(m.update_count(), 7);
    }

    #[test]
    fn naive_random_pairs_grow_like_sqrt_n() {
        // 16 * sqrt(500) = 357.8; the spread over seeds is about 3%.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = MemoryModel::new(MemoryKind::Naive, 1.0, 256).unwrap();
        for _ in 0..500 {
            let (k, v) = (phasor(256, &mut rng), phasor(256, &mut rng));
            m.update(&k, &v).unwrap();
        }
        assert!((m.norm() - 357.8).abs() < 0.1 * 357.8, "{}", m.norm());
    }

    #[test]
    fn temporal_first_update_and_steady_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (k, v) = (phasor(256, &mut rng), phasor(256, &mut rng));
        let mut m = MemoryModel::new(MemoryKind::Temporal, 0.95, 256).unwrap();
        m.update(&k, &v).unwrap();
        assert!(max_diff(m.state(), &bind(&k, &v).unwrap()) < 1e-12);
        for _ in 1..500 {
            m.update(&k, &v).unwrap();
        }
        assert!((m.norm() - 320.0).abs() < 0.01 * 320.0);
    }

    #[test]
    fn srmu_first_update_takes_full_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (k, v) = (phasor(256, &mut rng), phasor(256, &mut rng));
        for gamma in [1.0, 0.95, 0.3] {
            let mut m = MemoryModel::new(MemoryKind::Srmu, gamma, 256).unwrap();
            assert_eq!(m.update(&k, &v).unwrap(), 1.0);
            assert_eq!(m.last_weight(), 1.0);
            assert!(max_diff(m.state(), &bind(&k, &v).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn srmu_fixed_point_and_decayed_repeat() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (k, v) = (phasor(256, &mut rng), phasor(256, &mut rng));
        let bound = bind(&k, &v).unwrap();

        let mut m = MemoryModel::new(MemoryKind::Srmu, 1.0, 256).unwrap();
        m.update(&k, &v).unwrap();
        let w = m.update(&k, &v).unwrap();
        assert!(w.abs() < 1e-12);
        assert!(max_diff(m.state(), &bound) < 1e-10);

        let mut m = MemoryModel::new(MemoryKind::Srmu, 0.95, 256).unwrap();
        m.update(&k, &v).unwrap();
        let w = m.update(&k, &v).unwrap();
        assert!(w.abs() < 1e-12);
        assert!(max_diff(m.state(), &scale(&bound, 0.95)) < 1e-10);
    }

    /// D=4 hand-fixed phases, evaluated with scalar complex arithmetic.
    #[test]
    fn srmu_small_case_against_scalar_arithmetic() {
        let ph = |t: f64| Complex64::from_polar(1.0, t);
        let k1 = [0.3, 1.7, 2.9, 4.4].map(ph);
        let v1 = [0.0, 0.5, 1.0, 1.5].map(ph);
        let k2 = [5.1, 0.2, 3.3, 2.2].map(ph);
        let v2 = [2.0, 4.0, 0.7, 6.0].map(ph);

        // Scalar oracle: M = k1*v1; r = M*conj(k2); s = |Σ r conj(v2)| / (|r| |v2|).
        let m: Vec<Complex64> = (0..4).map(|j| k1[j] * v1[j]).collect();
        let r: Vec<Complex64> = (0..4).map(|j| m[j] * k2[j].conj()).collect();
        let ip: Complex64 = (0..4).map(|j| r[j] * v2[j].conj()).sum();
        let rn = r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let s = ip.norm() / (rn * 2.0);
        let w_oracle = 1.0 - s;
        let m_oracle: Vec<Complex64> = (0..4).map(|j| m[j] + k2[j] * v2[j] * w_oracle).collect();

        let hv = |a: [Complex64; 4]| Hypervector::from_components(a.to_vec()).unwrap();
        let mut model = MemoryModel::new(MemoryKind::Srmu, 1.0, 4).unwrap();
        model.update(&hv(k1), &hv(v1)).unwrap();
        let w = model.update(&hv(k2), &hv(v2)).unwrap();
        assert!((w - w_oracle).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&w));
        let expected = Hypervector::from_components(m_oracle).unwrap();
        assert!(max_diff(model.state(), &expected) < 1e-12);
    }

    #[test]
    fn srmu_new_pair_passes_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut total = 0.0;
        for _ in 0..200 {
            let mut m = MemoryModel::new(MemoryKind::Srmu, 1.0, 256).unwrap();
            m.update(&phasor(256, &mut rng), &phasor(256, &mut rng)).unwrap();
            total += m.update(&phasor(256, &mut rng), &phasor(256, &mut rng)).unwrap();
        }
        let mean = total / 200.0;
        // E[s] = sqrt(pi / (4 * 256)) = 0.0554
        assert!((mean - (1.0 - 0.0554)).abs() < 0.01, "{mean}");
    }

    #[test]
    fn srmu_conflicting_value_passes_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let k = phasor(256, &mut rng);
            let mut m = MemoryModel::new(MemoryKind::Srmu, 1.0, 256).unwrap();
            m.update(&k, &phasor(256, &mut rng)).unwrap();
            assert!(m.update(&k, &phasor(256, &mut rng)).unwrap() >= 0.5);
        }
    }

    #[test]
    fn in_place_matches_pure_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let keys: Vec<_> = (0..4).map(|_| phasor(64, &mut rng)).collect();
        let vals: Vec<_> = (0..3).map(|_| phasor(64, &mut rng)).collect();
        let mut naive = MemoryModel::new(MemoryKind::Naive, 1.0, 64).unwrap();
        let mut temporal = MemoryModel::new(MemoryKind::Temporal, 0.9, 64).unwrap();
        let mut srmu = MemoryModel::new(MemoryKind::Srmu, 0.9, 64).unwrap();
        let mut n = Hypervector::zeros(64).unwrap();
        let mut t = n.clone();
        let mut s = n.clone();
        for step in 0..100usize {
            let k = &keys[(step * 7 + step / 3) % 4];
            let v = &vals[(step * 5 + step / 4) % 3];
            naive.update(k, v).unwrap();
            temporal.update(k, v).unwrap();
            let w = srmu.update(k, v).unwrap();
            n = naive_step(&n, k, v).unwrap();
            t = temporal_step(&t, k, v, 0.9).unwrap();
            let (next, w_pure) = srmu_step(&s, k, v, 0.9, Gate::Relevance).unwrap();
            s = next;
            assert!((w - w_pure).abs() < 1e-10);
        }
        assert!(max_diff(naive.state(), &n) < 1e-9);
        assert!(max_diff(temporal.state(), &t) < 1e-9);
        assert!(max_diff(srmu.state(), &s) < 1e-9);
    }

    #[test]
    fn read_recovers_and_does_not_mutate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (k, v) = (phasor(256, &mut rng), phasor(256, &mut rng));
        let mut m = MemoryModel::new(MemoryKind::Srmu, 0.95, 256).unwrap();
        assert!(m.read(&k).unwrap().is_zero());
        m.update(&k, &v).unwrap();
        let before = m.state().clone();
        assert!(max_diff(&m.read(&k).unwrap(), &v) < 1e-12);
        assert_eq!(m.state(), &before);
    }

    #[test]
    fn mismatched_update_leaves_state_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut m = MemoryModel::new(MemoryKind::Srmu, 0.5, 8).unwrap();
        m.update(&phasor(8, &mut rng), &phasor(8, &mut rng)).unwrap();
        let before = m.clone();
        let err = m.update(&phasor(8, &mut rng), &phasor(9, &mut rng)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { left: 8, right: 9 }));
        assert_eq!(m, before);
    }

    #[test]
    fn snapshot_round_trip_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut m = MemoryModel::new(MemoryKind::Srmu, 0.95, 16).unwrap();
        for _ in 0..5 {
            m.update(&phasor(16, &mut rng), &phasor(16, &mut rng)).unwrap();
        }
        let json = serde_json::to_string(&m.snapshot()).unwrap();
        let back = MemoryModel::from_snapshot(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(json.contains("\"kind\":\"srmu\""));
    }

    #[test]
    fn default_roster_order() {
        let labels: Vec<String> = default_roster().iter().map(ModelSpec::label).collect();
        assert_eq!(labels, ["naive", "srmu(1)", "temporal(0.95)", "srmu(0.95)"]);
    }

    #[test]
    fn kind_parses() {
        assert_eq!("SRMU".parse::<MemoryKind>().unwrap(), MemoryKind::Srmu);
        assert!("lstm".parse::<MemoryKind>().is_err());
    }
}
