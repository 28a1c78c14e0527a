//! Deterministic in-process backend. Responses come from a scripted
//! digest-keyed table, a procedural responder, or both (scripts win).
//! Identical (mock seed, request seed, prompt) triples always produce
//! identical responses, so whole runs replay byte-for-byte.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use super::{CompletionRequest, CompletionResponse, LlmBackend, LlmError};
use crate::numfmt::format_value;
use crate::prompts::PromptPurpose;
use crate::space::{Configuration, SearchSpace};

/// Produces response texts for one request. Implementations must derive
/// all randomness from the provided generator.
pub trait MockResponder: Send + Sync {
    fn respond(&self, req: &CompletionRequest, rng: &mut ChaCha12Rng) -> Vec<String>;
}

pub struct MockBackend {
    seed: u64,
    scripted: HashMap<String, Vec<String>>,
    responder: Option<Box<dyn MockResponder>>,
}

impl MockBackend {
    /// Script-only backend: unknown digests are protocol errors, which
    /// keeps fixture drift loud.
    pub fn scripted(seed: u64, scripted: HashMap<String, Vec<String>>) -> Self {
        MockBackend {
            seed,
            scripted,
            responder: None,
        }
    }

    pub fn with_responder(seed: u64, responder: Box<dyn MockResponder>) -> Self {
        MockBackend {
            seed,
            scripted: HashMap::new(),
            responder: Some(responder),
        }
    }

    pub fn procedural(seed: u64, space: SearchSpace) -> Self {
        Self::with_responder(seed, Box::new(ProceduralResponder { space }))
    }

    /// Layers scripted responses over the responder; scripts take
    /// precedence on digest match.
    pub fn with_scripts(mut self, scripted: HashMap<String, Vec<String>>) -> Self {
        self.scripted = scripted;
        self
    }

    fn rng_for(&self, req: &CompletionRequest, digest: &str) -> ChaCha12Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(req.seed.to_le_bytes());
        hasher.update(digest.as_bytes());
        ChaCha12Rng::from_seed(hasher.finalize().into())
    }
}

fn fit_to_n(mut texts: Vec<String>, n: usize) -> Vec<String> {
    if texts.is_empty() {
        texts.push(String::new());
    }
    let len = texts.len();
    if len < n {
        for i in len..n {
            texts.push(texts[i % len].clone());
        }
    }
    texts.truncate(n);
    texts
}

impl LlmBackend for MockBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        req.validate()?;
        let digest = req.digest();
        if let Some(texts) = self.scripted.get(&digest) {
            return Ok(CompletionResponse {
                texts: fit_to_n(texts.clone(), req.n_completions),
                wallclock_ms: 0,
            });
        }
        let Some(responder) = &self.responder else {
            return Err(LlmError::Protocol {
                digest: digest.clone(),
                message: "no scripted response for this request".into(),
            });
        };
        let mut rng = self.rng_for(req, &digest);
        let texts = responder.respond(req, &mut rng);
        Ok(CompletionResponse {
            texts: fit_to_n(texts, req.n_completions),
            wallclock_ms: 0,
        })
    }

    fn id(&self) -> String {
        format!("mock:{}", self.seed)
    }

    fn deterministic(&self) -> bool {
        true
    }
}

fn random_config(space: &SearchSpace, rng: &mut ChaCha12Rng) -> Configuration {
    let point: Vec<f64> = space
        .dims()
        .iter()
        .map(|d| {
            let (lo, hi) = d.internal_bounds();
            lo + rng.random::<f64>() * (hi - lo)
        })
        .collect();
    space.from_internal(&point).expect("internal point is in range")
}

fn render_span_config(space: &SearchSpace, cfg: &Configuration) -> String {
    let inner = space
        .dims()
        .iter()
        .map(|d| format!("{}: {}", d.name, format_value(cfg.get(&d.name).unwrap())))
        .collect::<Vec<_>>()
        .join(", ");
    format!("## {inner} ##")
}

fn render_dict(space: &SearchSpace, cfg: &Configuration) -> String {
    let inner = space
        .dims()
        .iter()
        .map(|d| format!("'{}': {}", d.name, format_value(cfg.get(&d.name).unwrap())))
        .collect::<Vec<_>>()
        .join(", ");
    format!("{{{inner}}}")
}

/// Plausible, well-formed answers for every purpose: uniform random scores,
/// labels, and configurations.
pub struct ProceduralResponder {
    pub space: SearchSpace,
}

impl MockResponder for ProceduralResponder {
    fn respond(&self, req: &CompletionRequest, rng: &mut ChaCha12Rng) -> Vec<String> {
        (0..req.n_completions)
            .map(|_| match req.purpose {
                Some(PromptPurpose::Warmstart) => {
                    let n = req.hints.n_expected.max(1);
                    let dicts: Vec<String> = (0..n)
                        .map(|_| render_dict(&self.space, &random_config(&self.space, rng)))
                        .collect();
                    format!("[{}]", dicts.join(", "))
                }
                Some(PromptPurpose::GenSm) => {
                    format!("## {} ##", u8::from(rng.random::<f64>() < 0.5))
                }
                Some(PromptPurpose::Sampler) => {
                    render_span_config(&self.space, &random_config(&self.space, rng))
                }
                _ => format!("## {} ##", format_value(rng.random::<f64>())),
            })
            .collect()
    }
}

/// Hidden objective used by the oracle responder: a separable quadratic in
/// internal coordinates with fixed low-discrepancy centres, so its minimum
/// is interior and reproducible.
pub fn hidden_quadratic(space: &SearchSpace, cfg: &Configuration) -> f64 {
    let u = space.to_internal(cfg).expect("config fits its space");
    u.iter()
        .zip(space.dims())
        .enumerate()
        .map(|(i, (&v, d))| {
            let (a, b) = d.internal_bounds();
            let unit = if b > a { (v - a) / (b - a) } else { 0.0 };
            let c = 0.2 + 0.6 * (0.618_033_988_749_895 * (i as f64 + 1.0)).fract();
            (unit - c).powi(2)
        })
        .sum()
}

/// Gaussian jitter around `base` in unit-scaled internal coordinates,
/// clamped to the box and snapped back to a valid configuration.
fn perturbed_config(
    space: &SearchSpace,
    base: &Configuration,
    sigma: f64,
    rng: &mut ChaCha12Rng,
) -> Configuration {
    let internal = space.to_internal(base).expect("base config fits its space");
    let point: Vec<f64> = internal
        .iter()
        .zip(space.dims())
        .map(|(&v, d)| {
            let (lo, hi) = d.internal_bounds();
            let width = hi - lo;
            let unit = if width > 0.0 { (v - lo) / width } else { 0.0 };
            let moved = (unit + sigma * crate::rng::standard_normal(rng)).clamp(0.0, 1.0);
            lo + moved * width
        })
        .collect();
    space.from_internal(&point).expect("internal point is in range")
}

/// Oracle responder: answers score queries with the hidden quadratic's
/// true value and sampling queries with small perturbations of the current
/// incumbent, so the loop it serves has perfect surrogate information and
/// locally concentrated proposals. Other purposes fall back to procedural
/// behavior.
pub struct QuadraticResponder {
    pub space: SearchSpace,
}

impl MockResponder for QuadraticResponder {
    fn respond(&self, req: &CompletionRequest, rng: &mut ChaCha12Rng) -> Vec<String> {
        if req.purpose == Some(PromptPurpose::DiscSm) {
            if let Some(query) = &req.hints.query {
                let v = hidden_quadratic(&self.space, query);
                return vec![format!("## {} ##", format_value(v)); req.n_completions];
            }
        }
        if req.purpose == Some(PromptPurpose::Sampler) {
            if let Some(incumbent) = &req.hints.incumbent {
                return (0..req.n_completions)
                    .map(|_| {
                        let cfg = perturbed_config(&self.space, incumbent, 0.1, rng);
                        render_span_config(&self.space, &cfg)
                    })
                    .collect();
            }
        }
        ProceduralResponder {
            space: self.space.clone(),
        }
        .respond(req, rng)
    }
}

/// Wraps a responder and replaces a fixed fraction of responses with
/// unparseable refusals. The decision is a Bernoulli draw from the
/// request-keyed generator, so a given (seed, request) pair is stable.
pub struct InvalidMixResponder {
    pub inner: Box<dyn MockResponder>,
    pub invalid_rate: f64,
}

impl MockResponder for InvalidMixResponder {
    fn respond(&self, req: &CompletionRequest, rng: &mut ChaCha12Rng) -> Vec<String> {
        if rng.random::<f64>() < self.invalid_rate {
            vec![
                "I'm sorry, but I cannot recommend anything for this case.".to_string();
                req.n_completions
            ]
        } else {
            self.inner.respond(req, rng)
        }
    }
}

/// Always answers with the same text.
pub struct StaticResponder(pub String);

impl MockResponder for StaticResponder {
    fn respond(&self, req: &CompletionRequest, _rng: &mut ChaCha12Rng) -> Vec<String> {
        vec![self.0.clone(); req.n_completions]
    }
}

/// Backend that must never be reached; proves a code path is hermetic.
pub struct PanicBackend;

impl LlmBackend for PanicBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        panic!(
            "hermetic path issued a completion request (digest {})",
            req.digest()
        );
    }
    fn id(&self) -> String {
        "panic".into()
    }
    fn deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Message;
    use crate::space::bundled;

    fn req(content: &str, purpose: PromptPurpose, seed: u64) -> CompletionRequest {
        let mut r = CompletionRequest::new(
            vec![Message {
                role: "user".into(),
                content: content.into(),
            }],
            0.7,
            0.95,
            1,
        );
        r.purpose = Some(purpose);
        r.seed = seed;
        r
    }

    #[test]
    fn identical_requests_replay_identically() {
        let space = bundled::load("bayesmark/ada_boost").unwrap();
        let backend = MockBackend::procedural(7, space);
        let r = req("propose", PromptPurpose::Sampler, 3);
        let a = backend.complete(&r).unwrap();
        let b = backend.complete(&r).unwrap();
        assert_eq!(a.texts, b.texts);
        assert_eq!(a.wallclock_ms, 0);
    }

    #[test]
    fn request_seed_varies_the_response() {
        let space = bundled::load("bayesmark/ada_boost").unwrap();
        let backend = MockBackend::procedural(7, space);
        let a = backend.complete(&req("propose", PromptPurpose::Sampler, 1)).unwrap();
        let b = backend.complete(&req("propose", PromptPurpose::Sampler, 2)).unwrap();
        assert_ne!(a.texts, b.texts, "same prompt, different request seed");
    }

    #[test]
    fn mock_seed_varies_the_response() {
        let space = bundled::load("bayesmark/ada_boost").unwrap();
        let a = MockBackend::procedural(1, space.clone())
            .complete(&req("p", PromptPurpose::Sampler, 0))
            .unwrap();
        let b = MockBackend::procedural(2, space)
            .complete(&req("p", PromptPurpose::Sampler, 0))
            .unwrap();
        assert_ne!(a.texts, b.texts);
    }

    #[test]
    fn procedural_responses_parse() {
        let space = bundled::load("bayesmark/random_forest").unwrap();
        let backend = MockBackend::procedural(11, space.clone());

        let mut ws = req("warmstart", PromptPurpose::Warmstart, 0);
        ws.hints.n_expected = 5;
        let texts = backend.complete(&ws).unwrap().texts;
        let parsed = super::super::parse::parse_configurations(&texts[0], &space);
        assert_eq!(parsed.accepted.len(), 5, "rejected: {:?}", parsed.rejected);

        let disc = req("score", PromptPurpose::DiscSm, 0);
        let texts = backend.complete(&disc).unwrap().texts;
        assert!(super::super::parse::parse_performance(&texts[0]).is_some());

        let gen = req("label", PromptPurpose::GenSm, 0);
        let texts = backend.complete(&gen).unwrap().texts;
        assert!(super::super::parse::parse_classification(&texts[0]).is_some());

        let prop = req("sample", PromptPurpose::Sampler, 0);
        let texts = backend.complete(&prop).unwrap().texts;
        let parsed = super::super::parse::parse_configurations(&texts[0], &space);
        assert_eq!(parsed.accepted.len(), 1, "rejected: {:?}", parsed.rejected);
    }

    #[test]
    fn scripted_lookup_and_strictness() {
        let r = req("the prompt", PromptPurpose::DiscSm, 0);
        let mut table = HashMap::new();
        table.insert(r.digest(), vec!["## 0.42 ##".to_string()]);
        let backend = MockBackend::scripted(0, table);
        assert_eq!(backend.complete(&r).unwrap().texts, vec!["## 0.42 ##"]);

        let miss = req("another prompt", PromptPurpose::DiscSm, 0);
        let err = backend.complete(&miss).unwrap_err();
        assert!(matches!(err, LlmError::Protocol { .. }));
    }

    #[test]
    fn scripted_texts_cycle_to_request_width() {
        let mut r = req("p", PromptPurpose::DiscSm, 0);
        r.n_completions = 5;
        let mut table = HashMap::new();
        table.insert(r.digest(), vec!["a".to_string(), "b".to_string()]);
        let backend = MockBackend::scripted(0, table);
        assert_eq!(backend.complete(&r).unwrap().texts, vec!["a", "b", "a", "b", "a"]);
    }

    #[test]
    fn quadratic_responder_reports_the_hidden_objective() {
        let space = bundled::load("bayesmark/ada_boost").unwrap();
        let cfg: Configuration = [("n_estimators", 40.0), ("learning_rate", 0.05)]
            .into_iter()
            .collect();
        let truth = hidden_quadratic(&space, &cfg);
        let mut r = req("score this", PromptPurpose::DiscSm, 0);
        r.hints.query = Some(cfg);
        let backend = MockBackend::with_responder(
            0,
            Box::new(QuadraticResponder {
                space: space.clone(),
            }),
        );
        let texts = backend.complete(&r).unwrap().texts;
        let v = super::super::parse::parse_performance(&texts[0]).unwrap();
        assert!((v - truth).abs() < 1e-5 * truth.abs().max(1.0));
    }

    #[test]
    fn quadratic_responder_perturbs_the_incumbent() {
        let space = bundled::load("bayesmark/ada_boost").unwrap();
        let incumbent: Configuration = [("n_estimators", 40.0), ("learning_rate", 0.05)]
            .into_iter()
            .collect();
        let backend = MockBackend::with_responder(
            0,
            Box::new(QuadraticResponder {
                space: space.clone(),
            }),
        );
        let base = space.to_internal(&incumbent).unwrap();
        for seed in 0..10 {
            let mut r = req("propose", PromptPurpose::Sampler, seed);
            r.hints.incumbent = Some(incumbent.clone());
            let texts = backend.complete(&r).unwrap().texts;
            let parsed = super::super::parse::parse_configurations(&texts[0], &space);
            assert_eq!(parsed.accepted.len(), 1, "rejected: {:?}", parsed.rejected);
            let got = space.to_internal(&parsed.accepted[0]).unwrap();
            for ((g, b), d) in got.iter().zip(&base).zip(space.dims()) {
                let (lo, hi) = d.internal_bounds();
                let delta = (g - b).abs() / (hi - lo);
                assert!(delta < 0.5, "dim {} moved {delta} of its range", d.name);
            }
        }
    }

    #[test]
    fn hidden_quadratic_minimum_is_interior() {
        let space = bundled::load("bayesmark/ada_boost").unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut best = f64::INFINITY;
        for _ in 0..20_000 {
            let cfg = random_config(&space, &mut rng);
            best = best.min(hidden_quadratic(&space, &cfg));
        }
        assert!(best < 0.01, "random search reaches near the optimum: {best}");
    }

    #[test]
    fn invalid_mix_rate_is_close_to_nominal() {
        let space = bundled::load("bayesmark/ada_boost").unwrap();
        let backend = MockBackend::with_responder(
            5,
            Box::new(InvalidMixResponder {
                inner: Box::new(ProceduralResponder {
                    space: space.clone(),
                }),
                invalid_rate: 0.31,
            }),
        );
        let mut invalid = 0;
        let total = 2000;
        for i in 0..total {
            let texts = backend
                .complete(&req("sample", PromptPurpose::Sampler, i))
                .unwrap()
                .texts;
            if super::super::parse::parse_configurations(&texts[0], &space).accepted.is_empty() {
                invalid += 1;
            }
        }
        let rate = invalid as f64 / total as f64;
        assert!((rate - 0.31).abs() < 0.03, "observed invalid rate {rate}");
    }

    #[test]
    #[should_panic(expected = "hermetic")]
    fn panic_backend_panics() {
        let _ = PanicBackend.complete(&req("x", PromptPurpose::DiscSm, 0));
    }
}
