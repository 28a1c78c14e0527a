//! Gaussian-process regression with an isotropic RBF kernel, fit by
//! maximum marginal likelihood over a fixed hyperparameter grid. Inputs
//! are expected on the unit cube (the scorer maps configurations there);
//! targets are standardized internally and predictions mapped back.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::rng::standard_normal;
use crate::space::{Configuration, SearchSpace};
use crate::stats::{mean, sample_std};
use crate::surrogate::{expected_improvement, CandidateScorer};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    /// RBF length scale.
    pub ell: f64,
    /// Signal variance.
    pub sf2: f64,
    /// Noise variance.
    pub sn2: f64,
}

/// `n` points log-uniform between 10^a and 10^b inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kernel(a: &[f64], b: &[f64], h: &GpHyper) -> f64 {
    h.sf2 * (-sq_dist(a, b) / (2.0 * h.ell * h.ell)).exp()
}

fn gram(x: &[Vec<f64>], h: &GpHyper) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel(&x[i], &x[j], h);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += h.sn2;
    }
    k
}

const JITTER_LADDER: [f64; 4] = [0.0, 1e-8, 1e-6, 1e-4];

fn chol_with_jitter(k: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    for (step, &jitter) in JITTER_LADDER.iter().enumerate() {
        let mut kj = k.clone();
        if jitter > 0.0 {
            for i in 0..kj.nrows() {
                kj[(i, i)] += jitter;
            }
        }
        if let Some(c) = Cholesky::new(kj) {
            if step > 0 {
                log::debug!("factorization needed jitter {jitter}");
            }
            return Some(c);
        }
    }
    None
}

pub struct Gp {
    x: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    hyper: GpHyper,
    y_mean: f64,
    y_scale: f64,
    lml: f64,
}

fn validate_xy(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "regression needs ≥ 2 points, have {}",
            x.len()
        )));
    }
    if x.len() != y.len() {
        return Err(Error::Numeric(format!(
            "{} inputs vs {} targets",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::Numeric("ragged input matrix".into()));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite input coordinate".into()));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite target".into()));
    }
    Ok(())
}

impl Gp {
    /// Fits with fixed hyperparameters. The hyperparameters describe the
    /// targets exactly as given; nothing is rescaled behind the caller's
    /// back, so a correctly specified model yields calibrated intervals.
    pub fn fit_with(x: Vec<Vec<f64>>, y: &[f64], hyper: GpHyper) -> Result<Gp> {
        validate_xy(&x, y)?;
        let ys = DVector::from_iterator(y.len(), y.iter().copied());
        let k = gram(&x, &hyper);
        let chol = chol_with_jitter(&k)
            .ok_or_else(|| Error::Numeric("kernel matrix is not positive definite".into()))?;
        let alpha = chol.solve(&ys);
        let n = y.len() as f64;
        let log_det_half: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
        let lml = -0.5 * ys.dot(&alpha)
            - log_det_half
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        Ok(Gp {
            x,
            chol,
            alpha,
            hyper,
            y_mean: 0.0,
            y_scale: 1.0,
            lml,
        })
    }

    /// Grid ML-II: standardizes the targets, then picks the
    /// hyperparameters with the highest marginal likelihood over a fixed
    /// log-spaced grid (the grid assumes unit-scale targets).
    pub fn fit(x: Vec<Vec<f64>>, y: &[f64]) -> Result<Gp> {
        validate_xy(&x, y)?;
        let y_mean = mean(y);
        let raw_scale = sample_std(y);
        let y_scale = if raw_scale > 1e-12 { raw_scale } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
        let mut best: Option<Gp> = None;
        for &ell in &logspace(-1.5, 0.5, 5) {
            for &sf2 in &logspace(-1.0, 1.0, 5) {
                for &sn2 in &logspace(-8.0, 0.0, 5) {
                    let hyper = GpHyper { ell, sf2, sn2 };
                    let Ok(gp) = Gp::fit_with(x.clone(), &ys, hyper) else {
                        continue;
                    };
                    if best.as_ref().is_none_or(|b| gp.lml > b.lml) {
                        best = Some(gp);
                    }
                }
            }
        }
        let mut gp = best.ok_or_else(|| {
            Error::Numeric("no hyperparameter candidate produced a usable fit".into())
        })?;
        gp.y_mean = y_mean;
        gp.y_scale = y_scale;
        Ok(gp)
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn log_marginal(&self) -> f64 {
        self.lml
    }

    /// Posterior mean and standard deviation of the latent function at one
    /// point, on the original target scale.
    pub fn predict(&self, xs: &[f64]) -> (f64, f64) {
        let k_star = DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|xi| kernel(xi, xs, &self.hyper)),
        );
        let mean_s = k_star.dot(&self.alpha);
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&k_star)
            .expect("lower solve after successful factorization");
        let var_s = (self.hyper.sf2 - v.norm_squared()).max(0.0);
        (
            self.y_mean + self.y_scale * mean_s,
            self.y_scale * var_s.sqrt(),
        )
    }
}

/// One function draw from the latent prior at the given inputs.
pub fn sample_prior(x: &[Vec<f64>], hyper: &GpHyper, rng: &mut ChaCha12Rng) -> Result<Vec<f64>> {
    let noise_free = GpHyper { sn2: 1e-10, ..*hyper };
    let k = gram(x, &noise_free);
    let chol =
        chol_with_jitter(&k).ok_or_else(|| Error::Numeric("prior covariance not PD".into()))?;
    let z = DVector::from_iterator(x.len(), (0..x.len()).map(|_| standard_normal(rng)));
    Ok((chol.l() * z).iter().copied().collect())
}

/// Maps a configuration onto the unit cube via the per-dimension internal
/// bounds; the input representation for the regressor.
pub fn unit_coords(space: &SearchSpace, cfg: &Configuration) -> Result<Vec<f64>> {
    let internal = space.to_internal(cfg)?;
    Ok(internal
        .iter()
        .zip(space.dims())
        .map(|(&v, d)| {
            let (lo, hi) = d.internal_bounds();
            if hi > lo {
                (v - lo) / (hi - lo)
            } else {
                0.0
            }
        })
        .collect())
}

/// Fit-once-per-trial scorer: expected improvement below the incumbent
/// under the fitted posterior.
pub struct GpEiScorer {
    gp: Gp,
    space: SearchSpace,
}

impl GpEiScorer {
    pub fn fit(traj: &Trajectory) -> Result<Self> {
        let space = traj.space().clone();
        let mut x = Vec::with_capacity(traj.len());
        let mut y = Vec::with_capacity(traj.len());
        for obs in traj.observations() {
            x.push(unit_coords(&space, &obs.config)?);
            y.push(obs.score);
        }
        Ok(GpEiScorer {
            gp: Gp::fit(x, &y)?,
            space,
        })
    }

    pub fn predict_config(&self, cfg: &Configuration) -> Result<(f64, f64)> {
        Ok(self.gp.predict(&unit_coords(&self.space, cfg)?))
    }
}

impl CandidateScorer for GpEiScorer {
    fn score(&mut self, candidate: &Configuration, traj: &Trajectory) -> Result<f64> {
        let s_best = traj
            .s_min()
            .ok_or_else(|| Error::InsufficientData("scoring needs ≥ 1 observation".into()))?;
        let (m, s) = self.predict_config(candidate)?;
        Ok(expected_improvement(m, s, s_best))
    }
}
