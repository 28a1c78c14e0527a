//! Run-quality metrics: oracle-normalized regret, candidate-set spread,
//! surrogate calibration, and candidate log-likelihood under the observed
//! history.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::kde::MultivariateKde;
use crate::error::{Error, Result};
use crate::space::{Configuration, SearchSpace};
use crate::stats::{mean, normal_logpdf};
use crate::trajectory::Trajectory;

/// Floor applied to predictive stds inside the log-density term so a
/// collapsed surrogate yields a finite penalty instead of −∞.
pub const LPD_STD_FLOOR: f64 = 1e-6;

/// Best and worst achievable scores of a task, the anchors for regret
/// normalization. For synthetic functions they ship in a frozen data file
/// computed by dense random search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskBounds {
    pub s_star_min: f64,
    pub s_star_max: f64,
}

impl TaskBounds {
    pub fn new(s_star_min: f64, s_star_max: f64) -> Result<Self> {
        let b = TaskBounds {
            s_star_min,
            s_star_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let range = self.s_star_max - self.s_star_min;
        if !(range > 0.0) || !range.is_finite() {
            return Err(Error::Numeric(format!(
                "bounds [{}, {}] span no positive range",
                self.s_star_min, self.s_star_max
            )));
        }
        Ok(())
    }

    pub fn range(&self) -> f64 {
        self.s_star_max - self.s_star_min
    }
}

/// Maps one score onto [0, 1] between the task bounds. Scores outside the
/// anchors are clamped (and logged); they occur when frozen bounds come
/// from a finite search.
pub fn normalized_regret_value(score: f64, bounds: &TaskBounds) -> Result<f64> {
    bounds.validate()?;
    if !score.is_finite() {
        return Err(Error::Numeric(format!("score {score} is not finite")));
    }
    let raw = (score - bounds.s_star_min) / bounds.range();
    let clamped = raw.clamp(0.0, 1.0);
    if clamped != raw {
        log::warn!("regret {raw:.6} outside [0, 1], clamping (estimated bounds?)");
    }
    Ok(clamped)
}

/// Per-trial normalized regret: entry t is the regret of the best score
/// among the first t+1 observations, so the sequence is non-increasing.
pub fn normalized_regret(scores: &[f64], bounds: &TaskBounds) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::InsufficientData("no scores".into()));
    }
    let mut running = f64::INFINITY;
    scores
        .iter()
        .map(|&s| {
            if !s.is_finite() {
                return Err(Error::Numeric(format!("score {s} is not finite")));
            }
            running = running.min(s);
            normalized_regret_value(running, bounds)
        })
        .collect()
}

pub fn normalized_regret_traj(traj: &Trajectory, bounds: &TaskBounds) -> Result<Vec<f64>> {
    let scores: Vec<f64> = traj.observations().iter().map(|o| o.score).collect();
    normalized_regret(&scores, bounds)
}

/// Regret summary of one proposed candidate batch: every candidate is
/// evaluated on the true objective and normalized, then averaged and
/// minimized. Measures how good the proposals themselves are, independent
/// of which one the acquisition picks.
pub fn avg_and_best_regret<F>(
    candidates: &[Configuration],
    eval: F,
    bounds: &TaskBounds,
) -> Result<(f64, f64)>
where
    F: Fn(&Configuration) -> Result<f64>,
{
    if candidates.is_empty() {
        return Err(Error::InsufficientData("no candidates".into()));
    }
    let mut sum = 0.0;
    let mut best = f64::INFINITY;
    for cfg in candidates {
        let r = normalized_regret_value(eval(cfg)?, bounds)?;
        sum += r;
        best = best.min(r);
    }
    Ok((sum / candidates.len() as f64, best))
}

/// Determinant of the sample covariance (n−1 denominator) over raw point
/// rows. Needs at least d+1 points for a non-degenerate estimate; fewer is
/// an error, while collinear points simply give 0.
pub fn generalized_variance_points(points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InsufficientData("no points".into()));
    }
    let d = points[0].len();
    if d == 0 {
        return Err(Error::Numeric("zero-dimensional points".into()));
    }
    if points.len() < d + 1 {
        return Err(Error::InsufficientData(format!(
            "covariance in {d} dims needs ≥ {} points, have {}",
            d + 1,
            points.len()
        )));
    }
    let n = points.len();
    let mut centroid = vec![0.0; d];
    for row in points {
        if row.len() != d {
            return Err(Error::Numeric("ragged point rows".into()));
        }
        for (c, &v) in centroid.iter_mut().zip(row) {
            if !v.is_finite() {
                return Err(Error::Numeric("non-finite point coordinate".into()));
            }
            *c += v;
        }
    }
    for c in &mut centroid {
        *c /= n as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    for row in points {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (row[i] - centroid[i]) * (row[j] - centroid[j]);
            }
        }
    }
    cov /= (n - 1) as f64;
    Ok(cov.determinant())
}

/// Candidate-set spread in internal coordinates: the generalized variance
/// of the proposed configurations.
pub fn generalized_variance(space: &SearchSpace, configs: &[Configuration]) -> Result<f64> {
    let points = configs
        .iter()
        .map(|c| space.to_internal(c))
        .collect::<Result<Vec<_>>>()?;
    generalized_variance_points(&points)
}

/// Point and uncertainty quality of a surrogate's predictions against
/// ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// RMSE over the truth range.
    pub nrmse: f64,
    /// Coefficient of determination.
    pub r2: f64,
    /// Mean Gaussian log predictive density, stds floored at [`LPD_STD_FLOOR`].
    pub lpd: f64,
    /// Fraction of truths within one predicted std of the mean.
    pub coverage: f64,
    /// Mean predicted std.
    pub sharpness: f64,
}

/// `preds` are (mean, std) pairs aligned with `truths`; needs at least two
/// pairs and a non-constant truth vector.
pub fn calibration(preds: &[(f64, f64)], truths: &[f64]) -> Result<Calibration> {
    if preds.len() < 2 || preds.len() != truths.len() {
        return Err(Error::InsufficientData(format!(
            "need ≥ 2 aligned pairs, have {} predictions vs {} truths",
            preds.len(),
            truths.len()
        )));
    }
    let lo = truths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = truths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::Numeric(
            "truth values span no range, cannot normalize".into(),
        ));
    }
    let truth_mean = mean(truths);
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut lpd_sum = 0.0;
    let mut hits = 0usize;
    let mut std_sum = 0.0;
    for (&(m, s), &t) in preds.iter().zip(truths) {
        if !m.is_finite() || !s.is_finite() || s < 0.0 {
            return Err(Error::Numeric(format!("bad prediction ({m}, {s})")));
        }
        let e = t - m;
        ss_res += e * e;
        ss_tot += (t - truth_mean) * (t - truth_mean);
        lpd_sum += normal_logpdf(t, m, s.max(LPD_STD_FLOOR));
        if e.abs() <= s {
            hits += 1;
        }
        std_sum += s;
    }
    let n = preds.len() as f64;
    Ok(Calibration {
        nrmse: (ss_res / n).sqrt() / range,
        r2: 1.0 - ss_res / ss_tot,
        lpd: lpd_sum / n,
        coverage: hits as f64 / n,
        sharpness: std_sum / n,
    })
}

/// Mean log density of the candidates under a multivariate Gaussian KDE
/// fitted to the observed configurations, both in internal coordinates.
/// Higher means the proposals track the explored region.
pub fn candidate_loglik(traj: &Trajectory, candidates: &[Configuration]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::InsufficientData("no candidates".into()));
    }
    let space = traj.space();
    let observed = traj
        .observations()
        .iter()
        .map(|o| space.to_internal(&o.config))
        .collect::<Result<Vec<_>>>()?;
    let kde = MultivariateKde::fit(&observed)?;
    let mut sum = 0.0;
    for cfg in candidates {
        sum += kde.log_pdf(&space.to_internal(cfg)?);
    }
    Ok(sum / candidates.len() as f64)
}
