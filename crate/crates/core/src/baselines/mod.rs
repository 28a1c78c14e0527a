//! Classical baseline models that share the benchmark harness with the
//! prompt-backed engine: kernel density estimators, the two-density
//! optimizer built on them, and a Gaussian-process regressor with
//! expected-improvement scoring.

pub mod gp;
pub mod kde;
pub mod tpe;
