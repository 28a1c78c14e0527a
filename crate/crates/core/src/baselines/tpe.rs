//! Two-density optimizer: split the history at a score quantile, fit one
//! density to the good tail and one to the rest, and propose points where
//! the good density dominates.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::kde::{IndependentKde, MultivariateKde};
use crate::error::{Error, Result};
use crate::space::{Configuration, SearchSpace};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TpeKind {
    /// Per-dimension product densities.
    Independent,
    /// Full-covariance densities.
    Multivariate,
}

#[derive(Debug)]
enum Density {
    Independent(IndependentKde),
    Multivariate(MultivariateKde),
}

impl Density {
    fn fit(points: &[Vec<f64>], kind: TpeKind) -> Result<Self> {
        match kind {
            TpeKind::Independent => Ok(Density::Independent(IndependentKde::fit(points)?)),
            TpeKind::Multivariate => {
                if points.len() < 2 {
                    // A single good point cannot carry a covariance; fall
                    // back to the product form for that side.
                    return Ok(Density::Independent(IndependentKde::fit(points)?));
                }
                Ok(Density::Multivariate(MultivariateKde::fit(points)?))
            }
        }
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        match self {
            Density::Independent(k) => k.log_pdf(x),
            Density::Multivariate(k) => k.log_pdf(x),
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        match self {
            Density::Independent(k) => k.sample(rng),
            Density::Multivariate(k) => k.sample(rng),
        }
    }
}

#[derive(Debug)]
pub struct TpeModel {
    good: Density,
    bad: Density,
    pub gamma: f64,
    pub n_good: usize,
    pub n_bad: usize,
}

impl TpeModel {
    /// Ratio of good to bad density; the ranking criterion for proposals.
    pub fn score(&self, internal: &[f64]) -> f64 {
        (self.good.log_pdf(internal) - self.bad.log_pdf(internal)).exp()
    }
}

/// Fits the two densities on the internal-space history. Needs at least 4
/// observations and a non-empty split on both sides.
pub fn tpe_fit(traj: &Trajectory, gamma: f64, kind: TpeKind) -> Result<TpeModel> {
    if traj.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "two-density fit needs ≥ 4 observations, have {}",
            traj.len()
        )));
    }
    let split = traj.good_bad(gamma)?;
    let space = traj.space();
    let mut good_points = Vec::new();
    let mut bad_points = Vec::new();
    for (obs, &is_good) in traj.observations().iter().zip(&split.labels) {
        let x = space.to_internal(&obs.config)?;
        if is_good {
            good_points.push(x);
        } else {
            bad_points.push(x);
        }
    }
    if good_points.is_empty() || bad_points.is_empty() {
        return Err(Error::InsufficientData(format!(
            "degenerate split: {} good / {} bad",
            good_points.len(),
            bad_points.len()
        )));
    }
    Ok(TpeModel {
        n_good: good_points.len(),
        n_bad: bad_points.len(),
        good: Density::fit(&good_points, kind)?,
        bad: Density::fit(&bad_points, kind)?,
        gamma,
    })
}

/// Draws `m` proposals from the good density, clamps them into the
/// internal box (integer dims snap on the way out), dedupes within the
/// batch, and returns them sorted by descending density ratio. Fewer than
/// `m` distinct points can come back when the density keeps resampling
/// the same cells.
pub fn tpe_propose(
    model: &TpeModel,
    space: &SearchSpace,
    m: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<Configuration>> {
    let bounds: Vec<(f64, f64)> = space.dims().iter().map(|d| d.internal_bounds()).collect();
    let mut seen = std::collections::HashSet::new();
    let mut scored: Vec<(Configuration, f64)> = Vec::with_capacity(m);
    let budget = m.saturating_mul(4).max(m);
    for _ in 0..budget {
        if scored.len() == m {
            break;
        }
        let raw = model.good.sample(rng);
        let clamped: Vec<f64> = raw
            .iter()
            .zip(&bounds)
            .map(|(&v, &(lo, hi))| v.clamp(lo, hi))
            .collect();
        let cfg = space.from_internal(&clamped)?;
        if !seen.insert(space.dedup_key(&cfg)) {
            continue;
        }
        // Score the snapped point, not the raw draw, so ordering matches
        // what will actually be evaluated.
        let x = space.to_internal(&cfg)?;
        scored.push((cfg, model.score(&x)));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    Ok(scored.into_iter().map(|(cfg, _)| cfg).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn space2() -> SearchSpace {
        SearchSpace::from_json(
            r#"{"dims": [
                {"name": "x", "kind": "continuous", "transform": "linear", "lower": 0.0, "upper": 1.0},
                {"name": "y", "kind": "continuous", "transform": "linear", "lower": 0.0, "upper": 1.0}
            ]}"#,
        )
        .unwrap()
    }

    /// History where low scores cluster near (0.2, 0.2) and high scores
    /// near (0.8, 0.8).
    fn clustered_traj(n: usize) -> Trajectory {
        let space = space2();
        let mut traj = Trajectory::new(space);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        use rand::Rng;
        for i in 0..n {
            let good = i % 4 == 0;
            let center = if good { 0.2 } else { 0.8 };
            let x = (center + rng.random::<f64>() * 0.1).clamp(0.0, 1.0);
            let y = (center + rng.random::<f64>() * 0.1).clamp(0.0, 1.0);
            let score = if good {
                0.1 + 0.01 * rng.random::<f64>()
            } else {
                0.9 + 0.01 * rng.random::<f64>()
            };
            let cfg: Configuration = [("x".to_string(), x), ("y".to_string(), y)]
                .into_iter()
                .collect();
            traj.push(cfg, score).unwrap();
        }
        traj
    }

    #[test]
    fn needs_four_observations() {
        let space = space2();
        let mut traj = Trajectory::new(space);
        for i in 0..3 {
            let cfg: Configuration =
                [("x".to_string(), 0.1 * i as f64), ("y".to_string(), 0.2)].into_iter().collect();
            traj.push(cfg, i as f64).unwrap();
        }
        let err = tpe_fit(&traj, 0.25, TpeKind::Independent).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn all_tied_scores_cannot_split() {
        let space = space2();
        let mut traj = Trajectory::new(space);
        for i in 0..8 {
            let cfg: Configuration =
                [("x".to_string(), 0.1 * i as f64), ("y".to_string(), 0.3)].into_iter().collect();
            traj.push(cfg, 0.5).unwrap();
        }
        // Ties count as good, so the bad side is empty.
        let err = tpe_fit(&traj, 0.25, TpeKind::Independent).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)), "{err}");
    }

    #[test]
    fn split_respects_gamma() {
        let traj = clustered_traj(20);
        let model = tpe_fit(&traj, 0.25, TpeKind::Independent).unwrap();
        assert_eq!(model.n_good, 5);
        assert_eq!(model.n_bad, 15);
    }

    #[test]
    fn proposals_concentrate_near_the_good_cluster() {
        let traj = clustered_traj(40);
        for kind in [TpeKind::Independent, TpeKind::Multivariate] {
            let model = tpe_fit(&traj, 0.25, kind).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(5);
            let props = tpe_propose(&model, &space2(), 30, &mut rng).unwrap();
            assert!(!props.is_empty());
            let near_good = props
                .iter()
                .filter(|c| c.get("x").unwrap() < 0.5 && c.get("y").unwrap() < 0.5)
                .count();
            assert!(
                near_good * 2 > props.len(),
                "{near_good} of {} near the good cluster",
                props.len()
            );
        }
    }

    #[test]
    fn proposals_are_sorted_by_density_ratio() {
        let traj = clustered_traj(24);
        let model = tpe_fit(&traj, 0.25, TpeKind::Multivariate).unwrap();
        let space = space2();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let props = tpe_propose(&model, &space, 15, &mut rng).unwrap();
        let scores: Vec<f64> = props
            .iter()
            .map(|c| model.score(&space.to_internal(c).unwrap()))
            .collect();
        for w in scores.windows(2) {
            assert!(w[0] >= w[1], "not sorted: {scores:?}");
        }
    }

    #[test]
    fn proposals_are_valid_distinct_and_deterministic() {
        let traj = clustered_traj(24);
        let space = space2();
        let model = tpe_fit(&traj, 0.25, TpeKind::Independent).unwrap();
        let run = |seed| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            tpe_propose(&model, &space, 10, &mut rng).unwrap()
        };
        let a = run(3);
        assert_eq!(a, run(3));
        assert_ne!(a, run(4));
        let keys: std::collections::HashSet<String> =
            a.iter().map(|c| space.dedup_key(c)).collect();
        assert_eq!(keys.len(), a.len());
        for c in &a {
            assert!(space.validate(c).is_ok());
        }
    }

    #[test]
    fn integer_dims_snap_and_dedup_caps_the_batch() {
        let space = SearchSpace::from_json(
            r#"{"dims": [
                {"name": "k", "kind": "integer", "transform": "linear", "lower": 1, "upper": 3}
            ]}"#,
        )
        .unwrap();
        let mut traj = Trajectory::new(space.clone());
        for (v, s) in [(1.0, 0.1), (2.0, 0.5), (3.0, 0.9), (1.0, 0.2), (2.0, 0.6), (3.0, 0.8)] {
            let cfg: Configuration = [("k".to_string(), v)].into_iter().collect();
            traj.push(cfg, s).unwrap();
        }
        let model = tpe_fit(&traj, 0.25, TpeKind::Independent).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let props = tpe_propose(&model, &space, 10, &mut rng).unwrap();
        // Only 3 distinct cells exist; the batch cannot exceed them.
        assert!(props.len() <= 3);
        for c in &props {
            let v = c.get("k").unwrap();
            assert_eq!(v, v.round());
        }
    }
}
