//! The guide under `book/` is plain mdbook, which cannot run listings that
//! depend on an external crate. Each chapter is pulled in here as a module
//! doc so `cargo test --doc -p srmu-book` compiles and runs every listing.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/hypervectors.md")]
pub mod hypervectors {}
#[doc = include_str!("../../../book/src/codebooks.md")]
pub mod codebooks {}
#[doc = include_str!("../../../book/src/memories.md")]
pub mod memories {}
#[doc = include_str!("../../../book/src/environment.md")]
pub mod environment {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
