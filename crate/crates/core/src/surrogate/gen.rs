//! Generative in-context surrogate: asks the model whether a candidate
//! lands in the best-performing fraction of the history and scores
//! candidates by the estimated probability of "good".

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::{CandidateScorer, TaskContext};
use crate::error::{Error, Result};
use crate::llm::{parse::parse_classification, CompletionRequest, LlmClient};
use crate::prompts::{build_prompt, Ablation, PromptTask};
use crate::rng::{permutation, substream};
use crate::space::Configuration;
use crate::trajectory::Trajectory;

/// Acquisition value that a two-density model assigns to a point with
/// good/bad density ratio `l_over_g`, when the good fraction is `gamma`.
/// Monotone increasing in the ratio, so ranking by it equals ranking by
/// the ratio itself; the absolute value is kept for comparability with
/// probability-style scores (it approaches 1/gamma as the ratio grows).
pub fn ei_from_density_ratio(l_over_g: f64, gamma: f64) -> f64 {
    1.0 / (gamma + (1.0 - gamma) / l_over_g)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenSurrogateConfig {
    /// Fraction of the history labelled good.
    pub gamma: f64,
    /// Label queries per candidate; few-shot order is shuffled on every
    /// query.
    pub k_samples: usize,
    /// Extra query rounds allowed to replace unparseable responses.
    pub resample_rounds: usize,
    pub ablation: Ablation,
}

impl Default for GenSurrogateConfig {
    fn default() -> Self {
        GenSurrogateConfig {
            gamma: 0.25,
            k_samples: 10,
            resample_rounds: 3,
            ablation: Ablation::Full,
        }
    }
}

pub struct GenSurrogate<'a> {
    client: &'a LlmClient,
    ctx: &'a TaskContext,
    config: GenSurrogateConfig,
    shuffle_rng: ChaCha12Rng,
    next_seed: u64,
}

impl<'a> GenSurrogate<'a> {
    pub fn new(
        client: &'a LlmClient,
        ctx: &'a TaskContext,
        config: GenSurrogateConfig,
        seed: u64,
    ) -> Self {
        GenSurrogate {
            client,
            ctx,
            config,
            shuffle_rng: substream(seed, "shuffle"),
            next_seed: seed.wrapping_mul(1_000_003),
        }
    }

    fn quorum(&self) -> usize {
        self.config.k_samples.div_ceil(2)
    }

    fn build_requests(
        &mut self,
        traj: &Trajectory,
        query: &Configuration,
        count: usize,
    ) -> Result<Vec<CompletionRequest>> {
        let mut reqs = Vec::with_capacity(count);
        for _ in 0..count {
            let order = permutation(traj.len(), &mut self.shuffle_rng);
            let bundle = build_prompt(
                &self.ctx.model_card,
                self.ctx.data_card.as_ref(),
                Some(traj),
                &PromptTask::GenClassify {
                    query,
                    gamma: self.config.gamma,
                },
                Some(&order),
                self.config.ablation,
            )?;
            let seed = self.next_seed;
            self.next_seed = self.next_seed.wrapping_add(1);
            reqs.push(CompletionRequest::from_bundle(&bundle, &self.ctx.params, 1, seed));
        }
        Ok(reqs)
    }

    /// Estimated probability that the candidate is in the good fraction:
    /// the mean of the accepted binary labels.
    pub fn p_good(&mut self, traj: &Trajectory, query: &Configuration) -> Result<f64> {
        let k = self.config.k_samples.max(1);
        let mut labels: Vec<bool> = Vec::with_capacity(k);
        let mut queried = 0;
        for round in 0..=self.config.resample_rounds {
            let want = k - labels.len();
            if want == 0 {
                break;
            }
            let reqs = self.build_requests(traj, query, want)?;
            queried += reqs.len();
            for res in self.client.complete_many(&reqs) {
                match res {
                    Ok(resp) => {
                        if let Some(z) = resp.texts.first().and_then(|t| parse_classification(t)) {
                            labels.push(z);
                        }
                    }
                    Err(e) => log::warn!("label query failed (round {round}): {e}"),
                }
            }
        }
        if labels.len() < self.quorum() {
            return Err(Error::Surrogate(format!(
                "{} of {queried} label queries usable after {} round(s), need {}",
                labels.len(),
                self.config.resample_rounds + 1,
                self.quorum()
            )));
        }
        Ok(labels.iter().filter(|&&z| z).count() as f64 / labels.len() as f64)
    }
}

impl CandidateScorer for GenSurrogate<'_> {
    fn score(&mut self, candidate: &Configuration, traj: &Trajectory) -> Result<f64> {
        self.p_good(traj, candidate)
    }
}
