//! Model-suggested initialization. One completion request proposes the
//! initial design; whatever it fails to deliver is topped up from a seeded
//! Sobol sequence, so the caller always gets exactly the points it asked
//! for once the prompt itself is buildable.

use std::collections::HashSet;

use crate::error::Result;
use crate::llm::parse::parse_configurations;
use crate::llm::{CompletionRequest, LlmClient};
use crate::prompts::{build_prompt, Ablation, ContextLevel, PromptTask};
use crate::sampling::sobol_point;
use crate::space::{Configuration, SearchSpace};
use crate::surrogate::TaskContext;

/// Outcome bookkeeping for run logs.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WarmstartReport {
    /// Points taken from the model's suggestion list.
    pub n_suggested: usize,
    /// Points filled from the Sobol sequence.
    pub n_filled: usize,
}

/// Asks the model for `n_points` starting configurations at the given
/// context level. Shortfalls (unparseable answers, duplicates, transport
/// failures) are filled deterministically from the Sobol stream of `seed`,
/// so the result always has exactly `n_points` distinct configurations.
/// Fails only when the prompt cannot be built, e.g. a context level that
/// needs dataset facts the task context does not carry.
pub fn warmstart(
    client: &LlmClient,
    ctx: &TaskContext,
    space: &SearchSpace,
    context: ContextLevel,
    n_points: usize,
    seed: u64,
) -> Result<(Vec<Configuration>, WarmstartReport)> {
    let bundle = build_prompt(
        &ctx.model_card,
        ctx.data_card.as_ref(),
        None,
        &PromptTask::Warmstart {
            context,
            n_recommendations: n_points,
        },
        None,
        Ablation::Full,
    )?;
    ctx.model_card.check_against(space)?;

    let req = CompletionRequest::from_bundle(&bundle, &ctx.params, 1, seed);
    let mut points: Vec<Configuration> = Vec::with_capacity(n_points);
    let mut keys: HashSet<String> = HashSet::new();
    match client.complete(&req) {
        Ok(resp) => {
            if let Some(text) = resp.texts.first() {
                let parsed = parse_configurations(text, space);
                for r in &parsed.rejected {
                    log::debug!("warmstart block rejected: {}", r.reason);
                }
                for cfg in parsed.accepted {
                    if points.len() == n_points {
                        break;
                    }
                    if keys.insert(space.dedup_key(&cfg)) {
                        points.push(cfg);
                    }
                }
            }
        }
        Err(e) => log::warn!("warmstart request failed, filling from Sobol: {e}"),
    }
    let n_suggested = points.len();

    let mut index: u32 = 0;
    while points.len() < n_points {
        let cfg = sobol_point(space, index, seed)?;
        index = index.checked_add(1).expect("sobol index fits u32");
        if keys.insert(space.dedup_key(&cfg)) {
            points.push(cfg);
        }
    }
    let report = WarmstartReport {
        n_suggested,
        n_filled: n_points - n_suggested,
    };
    Ok((points, report))
}
