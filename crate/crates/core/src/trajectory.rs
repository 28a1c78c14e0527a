//! The optimization history: an append-only sequence of scored
//! configurations plus the statistics every other component reads off it
//! (best/worst, quantile split, conditioning target).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Configuration, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub trial: usize,
    pub config: Configuration,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    space: SearchSpace,
    observations: Vec<Observation>,
}

/// Good/bad split at the γ quantile: `labels[i]` is true when observation
/// `i` scores at or below the threshold `tau`.
#[derive(Debug, Clone)]
pub struct GoodBad {
    pub labels: Vec<bool>,
    pub tau: f64,
}

impl GoodBad {
    pub fn n_good(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }
}

impl Trajectory {
    pub fn new(space: SearchSpace) -> Self {
        Trajectory {
            space,
            observations: Vec::new(),
        }
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Appends a scored configuration, assigning the next trial index.
    pub fn push(&mut self, config: Configuration, score: f64) -> Result<usize> {
        self.space.validate(&config)?;
        if !score.is_finite() {
            return Err(Error::Trajectory(format!("score {score} is not finite")));
        }
        let trial = self.observations.len();
        self.observations.push(Observation {
            trial,
            config,
            score,
        });
        Ok(trial)
    }

    /// Best observation under minimization; the earliest wins ties.
    pub fn incumbent(&self) -> Option<&Observation> {
        self.observations
            .iter()
            .reduce(|best, o| if o.score < best.score { o } else { best })
    }

    pub fn s_min(&self) -> Option<f64> {
        self.incumbent().map(|o| o.score)
    }

    pub fn s_max(&self) -> Option<f64> {
        self.observations
            .iter()
            .map(|o| o.score)
            .reduce(f64::max)
    }

    /// Conditioning target s' = s_min − α·(s_max − s_min). Negative α asks
    /// for a value between the best and worst observed; positive α
    /// extrapolates past the best.
    pub fn target_value(&self, alpha: f64) -> Result<f64> {
        let s_min = self
            .s_min()
            .ok_or_else(|| Error::InsufficientData("target_value needs ≥ 1 observation".into()))?;
        let s_max = self.s_max().expect("non-empty");
        Ok(s_min - alpha * (s_max - s_min))
    }

    /// Splits observations at the γ quantile of scores. The threshold is
    /// the ⌈γ·n⌉-th smallest score, so at least one observation is good and
    /// score ties all land on the good side.
    pub fn good_bad(&self, gamma: f64) -> Result<GoodBad> {
        if !(0.0..1.0).contains(&gamma) || gamma == 0.0 {
            return Err(Error::Config(format!("gamma {gamma} outside (0, 1)")));
        }
        let n = self.observations.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "good/bad split needs ≥ 2 observations, have {n}"
            )));
        }
        let mut sorted: Vec<f64> = self.observations.iter().map(|o| o.score).collect();
        sorted.sort_by(f64::total_cmp);
        let rank = (gamma * n as f64).ceil() as usize;
        let tau = sorted[rank.max(1) - 1];
        let labels = self.observations.iter().map(|o| o.score <= tau).collect();
        Ok(GoodBad { labels, tau })
    }

    /// One observation per line: {"trial", "config", "score"}.
    pub fn to_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for obs in &self.observations {
            serde_json::to_writer(&mut w, obs)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn from_jsonl<R: BufRead>(space: SearchSpace, reader: R) -> Result<Self> {
        let mut traj = Trajectory::new(space);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let obs: Observation = serde_json::from_str(&line).map_err(|e| {
                Error::Trajectory(format!("line {}: {e}", lineno + 1))
            })?;
            if obs.trial != traj.len() {
                return Err(Error::Trajectory(format!(
                    "line {}: trial {} out of order (expected {})",
                    lineno + 1,
                    obs.trial,
                    traj.len()
                )));
            }
            traj.push(obs.config, obs.score)?;
        }
        Ok(traj)
    }
}
