//! Distributed average consensus with dithered quantized communication over
//! randomly failing links.
//!
//! The crate has four layers:
//!
//! - [`graph`]: topologies, Laplacians, spectra and link-failure models.
//! - [`quantize`]: the uniform mid-tread quantizer, finite-alphabet
//!   saturation and the uniform dither source.
//! - [`consensus`]: the QC (unbounded quantizer) and QCF (finite quantizer,
//!   stop-and-reset on saturation) iterations and a seeded Monte Carlo
//!   ensemble harness.
//! - [`bounds`]: closed-form performance bounds (mean-squared error,
//!   excursion probabilities, probability of epsilon-consensus, zero-rate
//!   limits, mean and mean-square rates) and the quantizer step-size design.
//!
//! [`cli`] wires these into the `quantcons` command-line tool.
//!
//! ```
//! use quantcons::graph::{LinkFailureModel, Topology};
//! use quantcons::quantize::QuantizerSpec;
//! use quantcons::consensus::{run_qc, RunConfig, WeightSequence};
//!
//! let model = LinkFailureModel::erasure(Topology::complete(5), 0.2).unwrap();
//! let weights = WeightSequence::new(0.25, 1.0).unwrap();
//! let spec = QuantizerSpec::unbounded(0.5).unwrap();
//! let config = RunConfig::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], model, weights, spec, 2_000);
//! let outcome = run_qc(&config, 7).unwrap();
//! assert!((outcome.theta() - 3.0).abs() < 0.5);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod consensus;
mod error;
pub mod graph;
pub mod quantize;

pub use error::{Error, Result};

/// Random source used for link sampling and dither.
pub type SimRng = rand_chacha::ChaCha8Rng;
