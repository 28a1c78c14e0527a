//! Target-conditioned candidate sampling and next-point selection.
//!
//! Each proposal round asks the model for `m` configurations that would hit
//! a target slightly below the incumbent, validates and dedupes every
//! parsed block, and accounts for all of them: accepted + rejected =
//! attempted, always.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::parse::{parse_configurations, Rejection};
use crate::llm::{CompletionRequest, LlmClient};
use crate::prompts::{build_prompt, Ablation, PromptTask};
use crate::rng::{permutation, substream};
use crate::space::Configuration;
use crate::surrogate::{CandidateScorer, TaskContext};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Independent proposal requests per round.
    pub m_candidates: usize,
    /// Target exaggeration: the requested performance sits `alpha` spans
    /// below the incumbent (negative alpha means below).
    pub alpha: f64,
    pub ablation: Ablation,
    /// Extra full rounds allowed when a round yields zero candidates.
    pub max_retry_rounds: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            m_candidates: 20,
            alpha: -0.1,
            ablation: Ablation::Full,
            max_retry_rounds: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub candidates: Vec<Configuration>,
    pub target: f64,
    /// Total parsed configuration blocks across all rounds.
    pub attempted: usize,
    pub rejected: Vec<Rejection>,
}

impl CandidateSet {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.candidates.len() as f64 / self.attempted as f64
        }
    }
}

pub struct Sampler<'a> {
    client: &'a LlmClient,
    ctx: &'a TaskContext,
    config: SamplerConfig,
    rng: ChaCha12Rng,
    next_seed: u64,
}

impl<'a> Sampler<'a> {
    pub fn new(client: &'a LlmClient, ctx: &'a TaskContext, config: SamplerConfig, seed: u64) -> Self {
        Sampler {
            client,
            ctx,
            config,
            rng: substream(seed, "sampler"),
            next_seed: seed.wrapping_mul(1_000_033),
        }
    }

    fn build_requests(&mut self, traj: &Trajectory, target: f64) -> Result<Vec<CompletionRequest>> {
        let mut reqs = Vec::with_capacity(self.config.m_candidates);
        for _ in 0..self.config.m_candidates {
            let order = permutation(traj.len(), &mut self.rng);
            let bundle = build_prompt(
                &self.ctx.model_card,
                self.ctx.data_card.as_ref(),
                Some(traj),
                &PromptTask::SampleConfig { target },
                Some(&order),
                self.config.ablation,
            )?;
            let seed = self.next_seed;
            self.next_seed = self.next_seed.wrapping_add(1);
            reqs.push(CompletionRequest::from_bundle(&bundle, &self.ctx.params, 1, seed));
        }
        Ok(reqs)
    }

    /// Proposes a batch of candidates for the next trial. Every block the
    /// model produced is either a candidate or a rejection; a block that
    /// repeats an already-observed configuration, repeats an earlier block,
    /// or overflows the batch is rejected with that reason. Zero usable
    /// candidates after all retry rounds is a sampler failure the caller
    /// can fall back from.
    pub fn propose(&mut self, traj: &Trajectory) -> Result<CandidateSet> {
        let target = traj.target_value(self.config.alpha)?;
        let space = traj.space();
        let observed: std::collections::HashSet<String> = traj
            .observations()
            .iter()
            .map(|o| space.dedup_key(&o.config))
            .collect();
        let mut seen = std::collections::HashSet::new();
        let mut out = CandidateSet {
            candidates: Vec::new(),
            target,
            attempted: 0,
            rejected: Vec::new(),
        };
        for round in 0..=self.config.max_retry_rounds {
            let reqs = self.build_requests(traj, target)?;
            for res in self.client.complete_many(&reqs) {
                let texts = match res {
                    Ok(resp) => resp.texts,
                    Err(e) => {
                        log::warn!("proposal request failed (round {round}): {e}");
                        continue;
                    }
                };
                let Some(text) = texts.first() else { continue };
                let parsed = parse_configurations(text, space);
                out.attempted += parsed.attempted();
                out.rejected.extend(parsed.rejected);
                for cfg in parsed.accepted {
                    let key = space.dedup_key(&cfg);
                    let raw = || {
                        cfg.iter()
                            .map(|(k, v)| format!("{k}: {v}"))
                            .collect::<Vec<_>>()
                            .join(", ")
                    };
                    if observed.contains(&key) {
                        out.rejected.push(Rejection {
                            raw: raw(),
                            reason: "duplicate of an observed configuration".into(),
                        });
                    } else if !seen.insert(key) {
                        out.rejected.push(Rejection {
                            raw: raw(),
                            reason: "duplicate within the proposal batch".into(),
                        });
                    } else if out.candidates.len() >= self.config.m_candidates {
                        out.rejected.push(Rejection {
                            raw: raw(),
                            reason: "beyond the batch size".into(),
                        });
                    } else {
                        out.candidates.push(cfg);
                    }
                }
            }
            if !out.candidates.is_empty() {
                break;
            }
        }
        debug_assert_eq!(out.candidates.len() + out.rejected.len(), out.attempted);
        if out.candidates.is_empty() {
            return Err(Error::Sampler(format!(
                "no usable candidate in {} block(s) over {} round(s)",
                out.attempted,
                self.config.max_retry_rounds + 1
            )));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub score: f64,
    /// True when every candidate failed scoring and the pick is uniform.
    pub fallback: bool,
}

/// Picks the candidate with the highest score. A candidate whose scoring
/// errored counts as zero, so it can only win ties; ties go to the lowest
/// index. Only when every single candidate errors does selection degrade
/// to a uniform random pick.
pub fn select_next(
    candidates: &[Configuration],
    scorer: &mut dyn CandidateScorer,
    traj: &Trajectory,
    rng: &mut ChaCha12Rng,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::Sampler("selection needs at least one candidate".into()));
    }
    let mut any_ok = false;
    let mut best: Option<(usize, f64)> = None;
    for (i, cand) in candidates.iter().enumerate() {
        let value = match scorer.score(cand, traj) {
            Ok(v) if v.is_finite() => {
                any_ok = true;
                v
            }
            Ok(v) => {
                log::warn!("candidate {i} scored non-finite ({v}); treating as 0");
                0.0
            }
            Err(e) => {
                log::warn!("candidate {i} failed scoring: {e}");
                0.0
            }
        };
        match best {
            Some((_, b)) if value <= b => {}
            _ => best = Some((i, value)),
        }
    }
    if !any_ok {
        let index = rng.random_range(0..candidates.len());
        return Ok(Selection {
            index,
            score: 0.0,
            fallback: true,
        });
    }
    let (index, score) = best.expect("non-empty candidate list");
    Ok(Selection {
        index,
        score,
        fallback: false,
    })
}
