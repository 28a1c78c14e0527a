//! In-context surrogate models: candidate scoring on top of language-model
//! predictions, plus the closed-form acquisition shared with the GP
//! baseline.

pub mod disc;
pub mod gen;

use crate::error::Result;
use crate::llm::GenParams;
use crate::prompts::{DataCard, ModelCard};
use crate::space::Configuration;
use crate::stats::{normal_cdf, normal_pdf};
use crate::trajectory::Trajectory;

/// Everything a prompt-backed component needs to know about the task:
/// the model/data description and the decoding parameters for requests.
#[derive(Debug, Clone)]
pub struct TaskContext {
    pub model_card: ModelCard,
    pub data_card: Option<DataCard>,
    pub params: GenParams,
}

/// Monte-Carlo estimate of an objective value at one configuration.
#[derive(Debug, Clone)]
pub struct SurrogatePrediction {
    pub mean: f64,
    /// Sample standard deviation of the accepted draws (n-1 denominator);
    /// 0 when fewer than two draws.
    pub std: f64,
    pub samples: Vec<f64>,
    pub n_accepted: usize,
    pub n_queried: usize,
}

/// Expected improvement below the incumbent `s_best` under a Gaussian
/// belief, for minimization. A zero-variance belief degenerates to the
/// hinge max(s_best - mean, 0).
pub fn expected_improvement(mean: f64, std: f64, s_best: f64) -> f64 {
    if std <= 0.0 {
        return (s_best - mean).max(0.0);
    }
    let z = (s_best - mean) / std;
    (s_best - mean) * normal_cdf(z) + std * normal_pdf(z)
}

/// Scores one candidate against the current history; higher is better.
/// Implementations may consult a backend, so scoring can fail per
/// candidate; selection treats a failed candidate as unscorable rather
/// than aborting the batch.
pub trait CandidateScorer {
    fn score(&mut self, candidate: &Configuration, traj: &Trajectory) -> Result<f64>;
}
