//! Deterministic Artificial Bee Colony (ABC) optimization.
//!
//! The colony engine in [`abc`] is generic over a [`abc::SearchDomain`] (where
//! positions live and how neighbors are drawn) and an [`evaluation::Evaluator`]
//! (how a position is scored, lower is better). Two domains ship with the
//! crate:
//!
//! - [`benchmarks::ContinuousBox`], a bounded real box with the classical ABC
//!   sampling rules, plus the sphere, Rosenbrock and Rastrigin functions;
//! - [`nas::ArchitectureSpace`], a layer-based neural architecture space whose
//!   candidates are string-encoded operation sequences.
//!
//! Architectures are scored either by a hashed [`evaluation::SurrogateEvaluator`]
//! (instant, brute-force checkable) or by [`evaluation::LfeEvaluator`], which
//! partially trains each candidate with the small trainer in [`nn`].
//!
//! [`app`] wires everything to TOML run configs, CSV history, JSON
//! checkpoints and the `apiary` command line tool. Runnable walkthroughs live
//! in the crate's `examples/` directory.

pub mod abc;
pub mod app;
pub mod benchmarks;
pub mod error;
pub mod evaluation;
pub mod nas;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
