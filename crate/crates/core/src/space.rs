//! The optimization domain: ordered hyperparameter definitions with value
//! transforms, configuration validation, and the raw/internal coordinate
//! mapping every numeric component works in.
//!
//! "Internal" coordinates are the transformed values (log10 for log dims,
//! ln(v/(1−v)) for logit dims); "raw" values are the natural units a
//! configuration stores and a prompt renders.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Continuous,
    Integer,
    /// Discretized dims of tabular benchmarks; continuous in the engine,
    /// snapped to the grid at evaluation time.
    Ordinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Linear,
    /// log10; the common convention for scale parameters.
    Log,
    /// ln(v/(1−v)) for fractions bounded away from {0,1}.
    Logit,
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Linear => "linear",
            Transform::Log => "log",
            Transform::Logit => "logit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamDef {
    pub name: String,
    pub kind: ParamKind,
    pub transform: Transform,
    pub lower: f64,
    pub upper: f64,
}

impl HyperparamDef {
    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Space(format!("dimension `{}`: {msg}", self.name)));
        if self.name.is_empty() {
            return Err(Error::Space("dimension with empty name".into()));
        }
        if !self.lower.is_finite() || !self.upper.is_finite() {
            return fail("bounds must be finite".into());
        }
        if self.lower >= self.upper {
            return fail(format!(
                "lower {} must be below upper {}",
                self.lower, self.upper
            ));
        }
        if self.transform == Transform::Log && self.lower <= 0.0 {
            return fail("log transform requires lower > 0".into());
        }
        if self.transform == Transform::Logit && (self.lower <= 0.0 || self.upper >= 1.0) {
            return fail("logit transform requires bounds inside (0, 1)".into());
        }
        if self.kind == ParamKind::Integer
            && (self.lower.fract() != 0.0 || self.upper.fract() != 0.0)
        {
            return fail("integer kind requires integral bounds".into());
        }
        Ok(())
    }

    /// Raw value to internal coordinate. Assumes `v` is within bounds;
    /// out-of-range raw values must be snapped first.
    pub fn to_internal(&self, v: f64) -> f64 {
        match self.transform {
            Transform::Linear => v,
            Transform::Log => v.log10(),
            Transform::Logit => (v / (1.0 - v)).ln(),
        }
    }

    /// Internal coordinate back to a valid raw value: inverse transform,
    /// then integer rounding and bound clamping via [`Self::snap`].
    pub fn from_internal(&self, x: f64) -> f64 {
        let raw = match self.transform {
            Transform::Linear => x,
            Transform::Log => 10f64.powf(x),
            Transform::Logit => 1.0 / (1.0 + (-x).exp()),
        };
        self.snap(raw)
    }

    /// Rounds integer dims half-away-from-zero, then clamps to bounds.
    /// Clamps are absorbed (and logged), never rejected, because parsed
    /// LLM proposals may sit just outside the range.
    pub fn snap(&self, v: f64) -> f64 {
        let rounded = match self.kind {
            ParamKind::Integer => v.round(),
            _ => v,
        };
        let clamped = rounded.clamp(self.lower, self.upper);
        if clamped != rounded {
            log::debug!(
                "clamped `{}` from {rounded} into [{}, {}]",
                self.name,
                self.lower,
                self.upper
            );
        }
        clamped
    }

    pub fn internal_bounds(&self) -> (f64, f64) {
        (self.to_internal(self.lower), self.to_internal(self.upper))
    }
}

/// Raw JSON shape of a space document: {"dims": [...]}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDoc {
    pub dims: Vec<HyperparamDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceDoc", into = "SpaceDoc")]
pub struct SearchSpace {
    dims: Vec<HyperparamDef>,
}

impl TryFrom<SpaceDoc> for SearchSpace {
    type Error = Error;
    fn try_from(doc: SpaceDoc) -> Result<Self> {
        SearchSpace::new(doc.dims)
    }
}

impl From<SearchSpace> for SpaceDoc {
    fn from(space: SearchSpace) -> Self {
        SpaceDoc { dims: space.dims }
    }
}

impl SearchSpace {
    pub fn new(dims: Vec<HyperparamDef>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Space("space must have at least one dimension".into()));
        }
        for dim in &dims {
            dim.validate()?;
        }
        for (i, dim) in dims.iter().enumerate() {
            if dims[..i].iter().any(|other| other.name == dim.name) {
                return Err(Error::Space(format!("duplicate dimension `{}`", dim.name)));
            }
        }
        Ok(SearchSpace { dims })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpaceDoc = serde_json::from_str(text)?;
        doc.try_into()
    }

    pub fn dims(&self) -> &[HyperparamDef] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn dim(&self, name: &str) -> Option<&HyperparamDef> {
        self.dims.iter().find(|d| d.name == name)
    }

    /// Checks that `cfg` has exactly the space's dimensions, every value in
    /// bounds, and integral values on integer dims.
    pub fn validate(&self, cfg: &Configuration) -> Result<()> {
        for dim in &self.dims {
            let v = cfg.get(&dim.name).ok_or_else(|| {
                Error::Space(format!("dimension `{}`: value missing", dim.name))
            })?;
            if !v.is_finite() {
                return Err(Error::Space(format!(
                    "dimension `{}`: value {v} is not finite",
                    dim.name
                )));
            }
            if v < dim.lower || v > dim.upper {
                return Err(Error::Space(format!(
                    "dimension `{}`: value {v} outside [{}, {}]",
                    dim.name, dim.lower, dim.upper
                )));
            }
            if dim.kind == ParamKind::Integer && v.fract() != 0.0 {
                return Err(Error::Space(format!(
                    "dimension `{}`: value {v} is not integral",
                    dim.name
                )));
            }
        }
        if cfg.len() != self.dims.len() {
            let extra = cfg
                .iter()
                .map(|(name, _)| name)
                .find(|name| self.dim(name).is_none())
                .expect("length mismatch implies an unknown key");
            return Err(Error::Space(format!("unknown dimension `{extra}`")));
        }
        Ok(())
    }

    /// Validated configuration to its internal-coordinate vector, in
    /// space order.
    pub fn to_internal(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        self.validate(cfg)?;
        Ok(self
            .dims
            .iter()
            .map(|d| d.to_internal(cfg.get(&d.name).expect("validated")))
            .collect())
    }

    /// Internal-coordinate vector back to a valid configuration; values are
    /// snapped per dimension, so any finite vector maps somewhere legal.
    pub fn from_internal(&self, x: &[f64]) -> Result<Configuration> {
        if x.len() != self.dims.len() {
            return Err(Error::Space(format!(
                "expected {} coordinates, got {}",
                self.dims.len(),
                x.len()
            )));
        }
        Ok(self
            .dims
            .iter()
            .zip(x)
            .map(|(d, &xi)| (d.name.clone(), d.from_internal(xi)))
            .collect())
    }

    /// Builds a valid configuration from raw named values, snapping each
    /// into range. Keys must match the space exactly.
    pub fn sanitize(&self, values: &BTreeMap<String, f64>) -> Result<Configuration> {
        for name in values.keys() {
            if self.dim(name).is_none() {
                return Err(Error::Space(format!("unknown dimension `{name}`")));
            }
        }
        let mut cfg = Configuration::new();
        for dim in &self.dims {
            let v = values.get(&dim.name).copied().ok_or_else(|| {
                Error::Space(format!("dimension `{}`: value missing", dim.name))
            })?;
            if v.is_nan() {
                return Err(Error::Space(format!("dimension `{}`: value is NaN", dim.name)));
            }
            cfg.set(&dim.name, dim.snap(v));
        }
        Ok(cfg)
    }

    /// Duplicate-detection key: internal coordinates at 6 significant
    /// digits. Two configurations with equal keys count as the same point.
    pub fn dedup_key(&self, cfg: &Configuration) -> String {
        self.dims
            .iter()
            .map(|d| numfmt::format_value(d.to_internal(cfg.get(&d.name).unwrap_or(f64::NAN))))
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// One point of the search space, in raw units. Keys are stored sorted so
/// serialization is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    values: BTreeMap<String, f64>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn set(&mut self, name: &str, v: f64) {
        self.values.insert(name.to_string(), v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_map(self) -> BTreeMap<String, f64> {
        self.values
    }
}

impl FromIterator<(String, f64)> for Configuration {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        Configuration {
            values: iter.into_iter().collect(),
        }
    }
}

impl<'a> FromIterator<(&'a str, f64)> for Configuration {
    fn from_iter<I: IntoIterator<Item = (&'a str, f64)>>(iter: I) -> Self {
        iter.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

/// Bundled benchmark search spaces, compiled in as data files.
pub mod bundled {
    use super::SearchSpace;
    use crate::error::{Error, Result};

    pub const NAMES: [&str; 8] = [
        "bayesmark/svm",
        "bayesmark/decision_tree",
        "bayesmark/random_forest",
        "bayesmark/mlp",
        "bayesmark/ada_boost",
        "hpobench/xgboost",
        "hpobench/random_forest",
        "hpobench/mlp",
    ];

    pub fn load(name: &str) -> Result<SearchSpace> {
        let text = match name {
            "bayesmark/svm" => include_str!("../data/spaces/bayesmark_svm.json"),
            "bayesmark/decision_tree" => {
                include_str!("../data/spaces/bayesmark_decision_tree.json")
            }
            "bayesmark/random_forest" => {
                include_str!("../data/spaces/bayesmark_random_forest.json")
            }
            "bayesmark/mlp" => include_str!("../data/spaces/bayesmark_mlp.json"),
            "bayesmark/ada_boost" => include_str!("../data/spaces/bayesmark_ada_boost.json"),
            "hpobench/xgboost" => include_str!("../data/spaces/hpobench_xgboost.json"),
            "hpobench/random_forest" => {
                include_str!("../data/spaces/hpobench_random_forest.json")
            }
            "hpobench/mlp" => include_str!("../data/spaces/hpobench_mlp.json"),
            _ => {
                return Err(Error::Space(format!(
                    "unknown bundled space `{name}` (available: {})",
                    NAMES.join(", ")
                )))
            }
        };
        SearchSpace::from_json(text)
    }
}
