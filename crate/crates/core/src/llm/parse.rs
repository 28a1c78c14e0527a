//! Parsers for model responses. All three are total: any input string maps
//! to a value or an accounted rejection, never a panic.

use std::sync::OnceLock;

use regex::Regex;

use crate::space::{Configuration, SearchSpace};

fn span_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)##\s*(.*?)\s*##").unwrap())
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").unwrap())
}

fn brace_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{[^{}]*\}").unwrap())
}

fn pair_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // `'name': value` / "name": value / name: value, value runs to the next
    // comma or block boundary.
    RE.get_or_init(|| {
        Regex::new(r#"['"]?([A-Za-z_][A-Za-z0-9_]*)['"]?\s*:\s*([^,{}\n]*)"#).unwrap()
    })
}

fn first_number(text: &str) -> Option<f64> {
    for m in number_re().find_iter(text) {
        if let Ok(v) = m.as_str().parse::<f64>() {
            if v.is_finite() {
                return Some(v);
            }
        }
    }
    None
}

/// Extracts a predicted score: the first finite number inside a `## … ##`
/// span, falling back to the first finite number anywhere in the text.
pub fn parse_performance(text: &str) -> Option<f64> {
    for span in span_re().captures_iter(text) {
        if let Some(v) = first_number(&span[1]) {
            return Some(v);
        }
    }
    first_number(text)
}

/// Extracts a binary label. Strict: the span content (or, failing that,
/// the whole trimmed text) must be exactly "0" or "1"; anything else is a
/// refusal to guess.
pub fn parse_classification(text: &str) -> Option<bool> {
    let as_label = |s: &str| match s.trim() {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    };
    for span in span_re().captures_iter(text) {
        if let Some(v) = as_label(&span[1]) {
            return Some(v);
        }
    }
    as_label(text)
}

/// A block that failed to become a configuration, with the reason kept for
/// run logs.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub raw: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedConfigs {
    pub accepted: Vec<Configuration>,
    pub rejected: Vec<Rejection>,
}

impl ParsedConfigs {
    /// Every candidate block lands in exactly one bucket.
    pub fn attempted(&self) -> usize {
        self.accepted.len() + self.rejected.len()
    }
}

/// Extracts hyperparameter configurations from a response.
///
/// Candidate blocks are the `## … ##` span contents when any exist,
/// otherwise every `{…}` block. Each block either becomes a validated
/// configuration (out-of-range values are clamped, integer dims snapped)
/// or a rejection carrying the offending text. Within one call, a block
/// that duplicates an earlier accepted configuration is rejected, so the
/// accepted set is duplicate-free. Anonymized `X_k` keys map to the k-th
/// space dimension.
pub fn parse_configurations(text: &str, space: &SearchSpace) -> ParsedConfigs {
    let mut blocks: Vec<&str> = span_re()
        .captures_iter(text)
        .filter_map(|c| c.get(1).map(|m| m.as_str()))
        .collect();
    if blocks.is_empty() {
        blocks = brace_re().find_iter(text).map(|m| m.as_str()).collect();
    }

    let mut out = ParsedConfigs::default();
    if blocks.is_empty() {
        out.rejected.push(Rejection {
            raw: text.to_string(),
            reason: "no configuration block found".into(),
        });
        return out;
    }

    let mut seen = std::collections::HashSet::new();
    'block: for block in blocks {
        let mut values = std::collections::BTreeMap::new();
        for cap in pair_re().captures_iter(block) {
            let mut key = cap[1].to_string();
            let raw_value = cap[2].trim().trim_matches(|c| c == '\'' || c == '"');
            // Positional names from anonymized prompts map back to real dims.
            if space.dim(&key).is_none() {
                if let Some(k) = key
                    .strip_prefix("X_")
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&k| k >= 1 && k <= space.len())
                {
                    key = space.dims()[k - 1].name.clone();
                } else {
                    out.rejected.push(Rejection {
                        raw: block.to_string(),
                        reason: format!("unknown hyperparameter `{key}`"),
                    });
                    continue 'block;
                }
            }
            if raw_value.eq_ignore_ascii_case("none") || raw_value.eq_ignore_ascii_case("null") {
                out.rejected.push(Rejection {
                    raw: block.to_string(),
                    reason: format!("`{key}` is None"),
                });
                continue 'block;
            }
            match first_number(raw_value) {
                Some(v) => {
                    values.insert(key, v);
                }
                None => {
                    out.rejected.push(Rejection {
                        raw: block.to_string(),
                        reason: format!("unparseable value `{raw_value}` for `{key}`"),
                    });
                    continue 'block;
                }
            }
        }
        for dim in space.dims() {
            if !values.contains_key(&dim.name) {
                out.rejected.push(Rejection {
                    raw: block.to_string(),
                    reason: format!("missing hyperparameter `{}`", dim.name),
                });
                continue 'block;
            }
        }
        let cfg = match space.sanitize(&values) {
            Ok(cfg) => cfg,
            Err(e) => {
                out.rejected.push(Rejection {
                    raw: block.to_string(),
                    reason: e.to_string(),
                });
                continue 'block;
            }
        };
        if !seen.insert(space.dedup_key(&cfg)) {
            out.rejected.push(Rejection {
                raw: block.to_string(),
                reason: "duplicate of an earlier configuration".into(),
            });
            continue 'block;
        }
        out.accepted.push(cfg);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::bundled;
    use rand::{Rng, SeedableRng};

    fn space2() -> SearchSpace {
        SearchSpace::from_json(
            r#"{"dims": [
                {"name": "alpha", "kind": "continuous", "transform": "log", "lower": 1e-5, "upper": 10.0},
                {"name": "depth", "kind": "integer", "transform": "linear", "lower": 1, "upper": 15}
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn performance_prefers_span() {
        assert_eq!(parse_performance("## 0.91 ##"), Some(0.91));
        assert_eq!(
            parse_performance("score 3 then ## performance 0.5 ##"),
            Some(0.5)
        );
        assert_eq!(parse_performance("accuracy: 0.74, done"), Some(0.74));
        assert_eq!(parse_performance("## -1.5e-3 ##"), Some(-1.5e-3));
        assert_eq!(parse_performance("no digits here"), None);
        assert_eq!(parse_performance(""), None);
        // Span with no number falls through to the raw text.
        assert_eq!(parse_performance("## n/a ## but 7"), Some(7.0));
    }

    #[test]
    fn classification_is_strict() {
        assert_eq!(parse_classification("## 1 ##"), Some(true));
        assert_eq!(parse_classification("##0##"), Some(false));
        assert_eq!(parse_classification("  1\n"), Some(true));
        assert_eq!(parse_classification("## 1.0 ##"), None);
        assert_eq!(parse_classification("the label is 1"), None);
        assert_eq!(parse_classification("## yes ##"), None);
        assert_eq!(parse_classification("01"), None);
    }

    #[test]
    fn configurations_from_spans_and_dicts() {
        let space = space2();
        let r = parse_configurations("## alpha: 0.1, depth: 7 ##", &space);
        assert_eq!(r.accepted.len(), 1);
        assert_eq!(r.accepted[0].get("depth"), Some(7.0));

        let r = parse_configurations(
            "Here you go:\n{'alpha': 0.5, 'depth': 3}\n{\"alpha\": 1.0, \"depth\": 9}",
            &space,
        );
        assert_eq!(r.accepted.len(), 2);
        assert_eq!(r.rejected.len(), 0);
    }

    #[test]
    fn rejection_reasons_are_specific() {
        let space = space2();
        let r = parse_configurations("## alpha: None, depth: 3 ##", &space);
        assert_eq!(r.accepted.len(), 0);
        assert!(r.rejected[0].reason.contains("None"));

        let r = parse_configurations("## alpha: 0.1, depth: 3, gamma: 4 ##", &space);
        assert!(r.rejected[0].reason.contains("unknown hyperparameter `gamma`"));

        let r = parse_configurations("## alpha: 0.1 ##", &space);
        assert!(r.rejected[0].reason.contains("missing hyperparameter `depth`"));

        let r = parse_configurations("I recommend a deep tree.", &space);
        assert_eq!(r.rejected.len(), 1);
        assert!(r.rejected[0].reason.contains("no configuration block"));

        let r = parse_configurations("## alpha: high, depth: 3 ##", &space);
        assert!(r.rejected[0].reason.contains("unparseable value"));
    }

    #[test]
    fn out_of_range_values_are_clamped() {
        let space = space2();
        let r = parse_configurations("## alpha: 99, depth: 40 ##", &space);
        assert_eq!(r.accepted.len(), 1);
        assert_eq!(r.accepted[0].get("alpha"), Some(10.0));
        assert_eq!(r.accepted[0].get("depth"), Some(15.0));
    }

    #[test]
    fn duplicates_within_one_response_are_rejected() {
        let space = space2();
        let r = parse_configurations(
            "{'alpha': 0.5, 'depth': 3} {'alpha': 0.5, 'depth': 3} {'alpha': 0.6, 'depth': 3}",
            &space,
        );
        assert_eq!(r.accepted.len(), 2);
        assert_eq!(r.rejected.len(), 1);
        assert!(r.rejected[0].reason.contains("duplicate"));
        assert_eq!(r.attempted(), 3);
    }

    #[test]
    fn anonymized_keys_map_positionally() {
        let space = space2();
        let r = parse_configurations("## X_1: 0.2, X_2: 5 ##", &space);
        assert_eq!(r.accepted.len(), 1);
        assert_eq!(r.accepted[0].get("alpha"), Some(0.2));
        assert_eq!(r.accepted[0].get("depth"), Some(5.0));
        // Out-of-range positional index is an unknown key.
        let r = parse_configurations("## X_1: 0.2, X_3: 5 ##", &space);
        assert!(r.rejected[0].reason.contains("unknown hyperparameter"));
    }

    #[test]
    fn warmstart_list_of_dicts_parses() {
        let space = bundled::load("bayesmark/ada_boost").unwrap();
        let text = "[{'n_estimators': 50, 'learning_rate': 0.1}, \
                    {'n_estimators': 80, 'learning_rate': 0.01}, \
                    {'n_estimators': 20, 'learning_rate': 1.0}]";
        let r = parse_configurations(text, &space);
        assert_eq!(r.accepted.len(), 3);
        assert_eq!(r.attempted(), 3);
    }

    #[test]
    fn random_bytes_never_panic_and_always_account() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        let space = space2();
        for _ in 0..2000 {
            let len = rng.random_range(0..200);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            let text = String::from_utf8_lossy(&bytes);
            let _ = parse_performance(&text);
            let _ = parse_classification(&text);
            let r = parse_configurations(&text, &space);
            assert!(r.attempted() >= 1);
        }
    }
}
