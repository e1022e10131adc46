//! Fourier holographic reduced representations.
//!
//! A [`Hypervector`] is a dense vector of `D` complex numbers. Random symbols
//! are phasors (every component on the unit circle); binding is elementwise
//! complex multiplication, unbinding multiplies by the conjugate key, and
//! bundling is plain addition. Similarity is the modulus of the Hermitian
//! inner product normalised by both norms, so it lies in `[0, 1]` and ignores
//! a global phase.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used by [`Hypervector::is_phasor`] callers that do not pick their own.
pub const PHASOR_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<[f64; 2]>", try_from = "Vec<[f64; 2]>")]
pub struct Hypervector {
    components: Vec<Complex64>,
}

impl Hypervector {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            components: vec![Complex64::new(0.0, 0.0); dim],
        })
    }

    pub fn from_components(components: Vec<Complex64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { components })
    }

    /// Draws a phasor vector with phases i.i.d. uniform on `[0, 2π)`.
    pub fn random_phasor<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let components = (0..dim)
            .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * TAU))
            .collect();
        Ok(Self { components })
    }

    /// All-ones vector, the identity for binding.
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            components: vec![Complex64::new(1.0, 0.0); dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Complex64] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Complex64> {
        self.components
    }

    pub fn conj(&self) -> Self {
        Self {
            components: self.components.iter().map(Complex64::conj).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        l2_norm(self)
    }

    /// Largest deviation of any component's modulus from 1.
    pub fn max_modulus_deviation(&self) -> f64 {
        self.components
            .iter()
            .map(|c| (c.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_phasor(&self, tolerance: f64) -> bool {
        self.max_modulus_deviation() <= tolerance
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// `self *= c` in place.
    pub fn scale_mut(&mut self, c: f64) {
        for x in &mut self.components {
            *x *= c;
        }
    }

    /// `self += weight * (key ⊗ value)` without materialising the binding.
    pub fn add_bound(&mut self, key: &Hypervector, value: &Hypervector, weight: f64) -> Result<()> {
        check_dims(self, key)?;
        check_dims(self, value)?;
        for ((m, k), v) in self
            .components
            .iter_mut()
            .zip(&key.components)
            .zip(&value.components)
        {
            *m += k * v * weight;
        }
        Ok(())
    }

    /// Cosine between `unbind(self, key)` and `value`, computed in one pass.
    ///
    /// Returns `None` when either the retrieved vector or `value` has a norm
    /// at or below `min_norm`.
    pub fn unbound_cosine(
        &self,
        key: &Hypervector,
        value: &Hypervector,
        min_norm: f64,
    ) -> Result<Option<f64>> {
        check_dims(self, key)?;
        check_dims(self, value)?;
        let mut inner = Complex64::new(0.0, 0.0);
        let mut retrieved_sq = 0.0;
        let mut value_sq = 0.0;
        for ((m, k), v) in self
            .components
            .iter()
            .zip(&key.components)
            .zip(&value.components)
        {
            let r = m * k.conj();
            inner += r * v.conj();
            retrieved_sq += r.norm_sqr();
            value_sq += v.norm_sqr();
        }
        let (rn, vn) = (retrieved_sq.sqrt(), value_sq.sqrt());
        if rn > min_norm && vn > min_norm {
            Ok(Some((inner.norm() / (rn * vn)).min(1.0)))
        } else {
            Ok(None)
        }
    }
}

impl From<Hypervector> for Vec<[f64; 2]> {
    fn from(v: Hypervector) -> Self {
        v.components.iter().map(|c| [c.re, c.im]).collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for Hypervector {
    type Error = Error;

    fn try_from(pairs: Vec<[f64; 2]>) -> Result<Self> {
        Hypervector::from_components(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

fn check_dims(a: &Hypervector, b: &Hypervector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

fn zip_with(
    a: &Hypervector,
    b: &Hypervector,
    f: impl Fn(Complex64, Complex64) -> Complex64,
) -> Result<Hypervector> {
    check_dims(a, b)?;
    Ok(Hypervector {
        components: a
            .components
            .iter()
            .zip(&b.components)
            .map(|(&x, &y)| f(x, y))
            .collect(),
    })
}

/// Elementwise product `a[j] * b[j]`.
pub fn bind(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    zip_with(a, b, |x, y| x * y)
}

/// Elementwise `m[j] * conj(k[j])`; the exact inverse of [`bind`] for phasor keys.
///
/// A key that is not a phasor still produces a result, but only an
/// approximate inverse, so it is logged as a warning.
pub fn unbind(m: &Hypervector, k: &Hypervector) -> Result<Hypervector> {
    check_dims(m, k)?;
    if !k.is_phasor(PHASOR_TOLERANCE) {
        log::warn!(
            "unbinding with a non-phasor key (max modulus deviation {:.3e})",
            k.max_modulus_deviation()
        );
    }
    zip_with(m, k, |x, y| x * y.conj())
}

/// Superposition, `a[j] + b[j]`.
pub fn bundle(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    zip_with(a, b, |x, y| x + y)
}

pub fn scale(a: &Hypervector, c: f64) -> Hypervector {
    let mut out = a.clone();
    out.scale_mut(c);
    out
}

/// Multiplies every component by a complex constant (gain and global phase).
pub fn scale_complex(a: &Hypervector, c: Complex64) -> Hypervector {
    Hypervector {
        components: a.components.iter().map(|x| x * c).collect(),
    }
}

/// Hermitian inner product `Σ a[j] * conj(b[j])`.
pub fn inner(a: &Hypervector, b: &Hypervector) -> Result<Complex64> {
    check_dims(a, b)?;
    Ok(a
        .components
        .iter()
        .zip(&b.components)
        .map(|(x, y)| x * y.conj())
        .sum())
}

/// `|⟨a, b⟩| / (‖a‖ ‖b‖)`, in `[0, 1]`.
///
/// Fails with [`Error::ZeroNorm`] when either operand is the zero vector.
pub fn cosine_sim(a: &Hypervector, b: &Hypervector) -> Result<f64> {
    let ip = inner(a, b)?;
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok((ip.norm() / denom).min(1.0))
}

pub fn l2_norm(a: &Hypervector) -> f64 {
    a.components.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}
