//! Streaming key-value memories over complex phasor hypervectors.
//!
//! The crate provides the FHRR algebra ([`fhrr`]), seeded symbol codebooks
//! ([`codebook`]), three sequential memory update policies ([`memory`]),
//! a synthetic device-health environment ([`sim`]), per-step metrics and
//! cross-trial aggregation ([`metrics`]), and the experiment runner behind
//! the `srmu` command-line tool ([`bench`]).
//!
//! ```
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//! use srmu::fhrr::Hypervector;
//! use srmu::memory::{MemoryKind, MemoryModel};
//!
//! let mut rng = ChaCha8Rng::seed_from_u64(1);
//! let key = Hypervector::random_phasor(256, &mut rng).unwrap();
//! let value = Hypervector::random_phasor(256, &mut rng).unwrap();
//!
//! let mut memory = MemoryModel::new(MemoryKind::Srmu, 1.0, 256).unwrap();
//! assert_eq!(memory.update(&key, &value).unwrap(), 1.0);
//! // The same observation again carries no new information.
//! assert!(memory.update(&key, &value).unwrap() < 1e-12);
//! ```

pub mod bench;
pub mod codebook;
pub mod error;
pub mod fhrr;
pub mod memory;
pub mod metrics;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
