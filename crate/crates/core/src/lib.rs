//! An LLM-assisted Bayesian optimization engine with classical baselines.
//!
//! The engine runs the usual BO loop: fit a surrogate on the observed
//! (configuration, score) history, propose candidate configurations, score
//! them with an acquisition function, and evaluate the most promising one.
//! The surrogate and the candidate proposer can be served by a language
//! model prompted with the serialized history; TPE and GP baselines share
//! the same loop for comparison. All LLM traffic goes through a backend
//! trait with a deterministic mock, so every run is reproducible offline.
//!
//! Scores are minimized throughout. Maximization metrics must be negated
//! at the benchmark boundary.

pub mod baselines;
pub mod error;
pub mod llm;
pub mod metrics;
pub mod numfmt;
pub mod objectives;
pub mod prompts;
pub mod rng;
pub mod runner;
pub mod sampler;
pub mod sampling;
pub mod space;
pub mod stats;
pub mod surrogate;
pub mod trajectory;
pub mod warmstart;

pub use error::{Error, Result};
pub use space::{Configuration, HyperparamDef, ParamKind, SearchSpace, Transform};
pub use trajectory::{Observation, Trajectory};
