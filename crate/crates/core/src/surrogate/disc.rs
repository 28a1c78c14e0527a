//! Discriminative in-context surrogate: predicts a candidate's score by
//! querying the model `k` times over (optionally shuffled) few-shot
//! renderings of the history, then turns the draw ensemble into an
//! expected-improvement acquisition value.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::{expected_improvement, CandidateScorer, SurrogatePrediction, TaskContext};
use crate::error::{Error, Result};
use crate::llm::{parse::parse_performance, CompletionRequest, LlmClient};
use crate::prompts::{build_prompt, Ablation, PromptTask};
use crate::rng::{permutation, substream};
use crate::space::Configuration;
use crate::stats::{mean, sample_std};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EiForm {
    /// Gaussian closed form from the ensemble mean and std.
    #[default]
    Gaussian,
    /// Average hinge improvement over the raw draws.
    Empirical,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscConfig {
    /// Monte-Carlo queries per candidate.
    pub k_samples: usize,
    /// Shuffle the few-shot ordering independently per query; with `false`
    /// every query sees the same prompt and diversity comes from decoding
    /// temperature alone.
    pub shuffle: bool,
    /// Extra query rounds allowed to replace unparseable responses.
    pub resample_rounds: usize,
    pub ablation: Ablation,
    pub ei_form: EiForm,
}

impl Default for DiscConfig {
    fn default() -> Self {
        DiscConfig {
            k_samples: 10,
            shuffle: true,
            resample_rounds: 3,
            ablation: Ablation::Full,
            ei_form: EiForm::Gaussian,
        }
    }
}

pub struct DiscSurrogate<'a> {
    client: &'a LlmClient,
    ctx: &'a TaskContext,
    config: DiscConfig,
    shuffle_rng: ChaCha12Rng,
    next_seed: u64,
}

impl<'a> DiscSurrogate<'a> {
    pub fn new(client: &'a LlmClient, ctx: &'a TaskContext, config: DiscConfig, seed: u64) -> Self {
        DiscSurrogate {
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
        let identity: Vec<usize> = (0..traj.len()).collect();
        let mut reqs = Vec::with_capacity(count);
        for _ in 0..count {
            let order = if self.config.shuffle {
                permutation(traj.len(), &mut self.shuffle_rng)
            } else {
                identity.clone()
            };
            let bundle = build_prompt(
                &self.ctx.model_card,
                self.ctx.data_card.as_ref(),
                Some(traj),
                &PromptTask::DiscPredict { query },
                Some(&order),
                self.config.ablation,
            )?;
            let seed = self.next_seed;
            self.next_seed = self.next_seed.wrapping_add(1);
            reqs.push(CompletionRequest::from_bundle(&bundle, &self.ctx.params, 1, seed));
        }
        Ok(reqs)
    }

    /// Queries the model about one candidate and aggregates the parseable
    /// answers. Fails only when, after all resample rounds, fewer than
    /// half of `k_samples` responses were usable.
    pub fn predict(
        &mut self,
        traj: &Trajectory,
        query: &Configuration,
    ) -> Result<SurrogatePrediction> {
        let k = self.config.k_samples.max(1);
        let mut samples: Vec<f64> = Vec::with_capacity(k);
        let mut queried = 0;
        for round in 0..=self.config.resample_rounds {
            let want = k - samples.len();
            if want == 0 {
                break;
            }
            let reqs = self.build_requests(traj, query, want)?;
            queried += reqs.len();
            for res in self.client.complete_many(&reqs) {
                match res {
                    Ok(resp) => {
                        if let Some(v) = resp.texts.first().and_then(|t| parse_performance(t)) {
                            samples.push(v);
                        }
                    }
                    Err(e) => log::warn!("surrogate query failed (round {round}): {e}"),
                }
            }
        }
        if samples.len() < self.quorum() {
            return Err(Error::Surrogate(format!(
                "{} of {} score queries usable after {} round(s), need {}",
                samples.len(),
                queried,
                self.config.resample_rounds + 1,
                self.quorum()
            )));
        }
        Ok(SurrogatePrediction {
            mean: mean(&samples),
            std: sample_std(&samples),
            n_accepted: samples.len(),
            n_queried: queried,
            samples,
        })
    }

    fn acquisition(&self, pred: &SurrogatePrediction, s_best: f64) -> f64 {
        match self.config.ei_form {
            EiForm::Gaussian => expected_improvement(pred.mean, pred.std, s_best),
            EiForm::Empirical => {
                mean(&pred.samples.iter().map(|&s| (s_best - s).max(0.0)).collect::<Vec<_>>())
            }
        }
    }
}

impl CandidateScorer for DiscSurrogate<'_> {
    fn score(&mut self, candidate: &Configuration, traj: &Trajectory) -> Result<f64> {
        let s_best = traj
            .s_min()
            .ok_or_else(|| Error::InsufficientData("scoring needs ≥ 1 observation".into()))?;
        let pred = self.predict(traj, candidate)?;
        Ok(self.acquisition(&pred, s_best))
    }
}
