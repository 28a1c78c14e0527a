//! Gaussian kernel density estimation in two flavors: independent per-dim
//! marginals (a product density) and a full-covariance multivariate
//! estimator. Bandwidths follow Scott's rule.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::rng::standard_normal;
use crate::stats::{normal_pdf, sample_std};

/// Floor keeping degenerate dimensions (all points equal) usable.
const BANDWIDTH_FLOOR: f64 = 1e-3;

/// One-dimensional mixture of Gaussians centered at the data, common
/// bandwidth h = sigma_hat * n^(-1/5), floored.
#[derive(Debug, Clone)]
pub struct Kde1d {
    centers: Vec<f64>,
    bandwidth: f64,
}

impl Kde1d {
    pub fn fit(centers: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InsufficientData("KDE needs ≥ 1 point".into()));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("KDE centers must be finite".into()));
        }
        let sigma = sample_std(&centers);
        let bandwidth = (sigma * (centers.len() as f64).powf(-0.2)).max(BANDWIDTH_FLOOR);
        Ok(Kde1d { centers, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        self.centers
            .iter()
            .map(|&c| normal_pdf((x - c) / h) / h)
            .sum::<f64>()
            / self.centers.len() as f64
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        self.pdf(x).max(f64::MIN_POSITIVE).ln()
    }

    pub fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        let c = self.centers[rng.random_range(0..self.centers.len())];
        c + self.bandwidth * standard_normal(rng)
    }
}

/// Product of independent per-dimension estimators.
#[derive(Debug, Clone)]
pub struct IndependentKde {
    dims: Vec<Kde1d>,
}

impl IndependentKde {
    /// `points` are row vectors; every row must have the same length.
    pub fn fit(points: &[Vec<f64>]) -> Result<Self> {
        let d = check_matrix(points)?;
        let dims = (0..d)
            .map(|k| Kde1d::fit(points.iter().map(|p| p[k]).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(IndependentKde { dims })
    }

    pub fn dims(&self) -> &[Kde1d] {
        &self.dims
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        self.dims.iter().zip(x).map(|(k, &v)| k.log_pdf(v)).sum()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Each dimension picks its mixture component independently.
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        self.dims.iter().map(|k| k.sample(rng)).collect()
    }
}

/// Full-covariance estimator with Scott bandwidth matrix
/// H = n^(-2/(d+4)) * sample covariance.
#[derive(Debug, Clone)]
pub struct MultivariateKde {
    points: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    log_det_h: f64,
    d: usize,
}

impl MultivariateKde {
    pub fn fit(points: &[Vec<f64>]) -> Result<Self> {
        let d = check_matrix(points)?;
        let n = points.len();
        if n < 2 {
            return Err(Error::InsufficientData(
                "multivariate KDE needs ≥ 2 points".into(),
            ));
        }
        let mean: Vec<f64> =
            (0..d).map(|k| points.iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for p in points {
            let delta = DVector::from_iterator(d, p.iter().zip(&mean).map(|(v, m)| v - m));
            cov += &delta * delta.transpose();
        }
        cov /= (n - 1) as f64;
        let factor = (n as f64).powf(-2.0 / (d as f64 + 4.0));
        let mut h = cov * factor;
        let chol = match Cholesky::new(h.clone()) {
            Some(c) => c,
            None => {
                // Degenerate sample covariance; a small ridge restores
                // positive definiteness.
                log::debug!("bandwidth matrix not positive definite, adding 1e-6 ridge");
                for k in 0..d {
                    h[(k, k)] += 1e-6;
                }
                Cholesky::new(h).ok_or_else(|| {
                    Error::Numeric("bandwidth matrix is not positive definite".into())
                })?
            }
        };
        let log_det_h = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(MultivariateKde {
            points: points.to_vec(),
            chol,
            log_det_h,
            d,
        })
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.d, "query dimension mismatch");
        let norm = -0.5 * (self.d as f64 * (2.0 * std::f64::consts::PI).ln() + self.log_det_h);
        // log-sum-exp over the component log densities.
        let logs: Vec<f64> = self
            .points
            .iter()
            .map(|p| {
                let delta = DVector::from_iterator(self.d, x.iter().zip(p).map(|(a, b)| a - b));
                let z = self.chol.l().solve_lower_triangular(&delta).expect("chol solve");
                norm - 0.5 * z.norm_squared()
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return f64::MIN_POSITIVE.ln();
        }
        max + (logs.iter().map(|l| (l - max).exp()).sum::<f64>() / logs.len() as f64).ln()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// One mixture component plus correlated kernel noise L * z.
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        let p = &self.points[rng.random_range(0..self.points.len())];
        let z = DVector::from_iterator(self.d, (0..self.d).map(|_| standard_normal(rng)));
        let noise = self.chol.l() * z;
        p.iter().zip(noise.iter()).map(|(a, b)| a + b).collect()
    }
}

fn check_matrix(points: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = points.first() else {
        return Err(Error::InsufficientData("KDE needs ≥ 1 point".into()));
    };
    let d = first.len();
    if d == 0 {
        return Err(Error::InsufficientData("KDE needs ≥ 1 dimension".into()));
    }
    for p in points {
        if p.len() != d {
            return Err(Error::Numeric("ragged point matrix".into()));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("KDE centers must be finite".into()));
        }
    }
    Ok(d)
}
