//! Bias and variance estimates for kernel ridge regression.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::solver::{Precision, Smoother};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, PairOptions};
use crate::rng::{stream_rng, Stream};
use crate::sphere::{synthesize_target, TargetSpec};
use crate::spectrum::{mean_and_stderr, Estimate};

/// Zero-mean, unit-variance label noise; scaled by `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    #[default]
    Gaussian,
    Rademacher,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    Uniform,
}

impl NoiseFamily {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseFamily::Gaussian => StandardNormal.sample(rng),
            NoiseFamily::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseFamily::Uniform => 3f64.sqrt() * rng.random_range(-1.0..=1.0),
        }
    }

    pub fn vector<R: Rng + ?Sized>(&self, n: usize, sigma: f64, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(n, |_, _| sigma * self.sample(rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum VarianceMode {
    /// Exact expectation over the noise; sampling error only over test points.
    ClosedForm,
    /// Mean squared prediction of fits to pure-noise labels.
    MonteCarlo { trials: usize },
}

/// `(sigma^2 / m) sum_t ‖W_t‖^2`, with the standard error over test points.
pub fn variance_closed_form(s: &Smoother, sigma: f64) -> Estimate {
    let per_point: Vec<f64> = s
        .matrix()
        .column_iter()
        .map(|c| sigma * sigma * c.norm_squared())
        .collect();
    mean_and_stderr(&per_point)
}

/// Average over `trials` noise draws of the mean squared test prediction.
pub fn variance_monte_carlo<R: Rng + ?Sized>(
    s: &Smoother,
    sigma: f64,
    trials: usize,
    noise: NoiseFamily,
    rng: &mut R,
) -> Result<Estimate> {
    if trials < 2 {
        return Err(Error::InvalidParameter("need at least two noise trials".into()));
    }
    let mut vals = Vec::with_capacity(trials);
    for _ in 0..trials {
        let eps = noise.vector(s.n(), sigma, rng);
        let pred = s.predict(&eps)?;
        vals.push(pred.norm_squared() / s.m() as f64);
    }
    Ok(mean_and_stderr(&vals))
}

/// Squared test error of the fit to clean labels, with the standard error
/// over test points.
pub fn bias_from_labels(s: &Smoother, f_train: &DVector<f64>, f_test: &DVector<f64>) -> Result<Estimate> {
    if f_test.len() != s.m() {
        return Err(Error::DimensionMismatch {
            expected: s.m(),
            got: f_test.len(),
        });
    }
    let pred = s.predict(f_train)?;
    let sq: Vec<f64> = pred.iter().zip(f_test.iter()).map(|(p, f)| (p - f).powi(2)).collect();
    Ok(mean_and_stderr(&sq))
}

/// Variance of the estimator on `(spec, x, gamma)` measured on `test`.
/// Monte Carlo noise is drawn from the noise stream of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_variance(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    gamma: f64,
    sigma: f64,
    test: &DMatrix<f64>,
    mode: VarianceMode,
    opts: PairOptions,
    seed: u64,
) -> Result<Estimate> {
    let s = Smoother::new(spec, x, test, gamma, opts, Precision::Double)?;
    match mode {
        VarianceMode::ClosedForm => Ok(variance_closed_form(&s, sigma)),
        VarianceMode::MonteCarlo { trials } => {
            let mut rng = stream_rng(seed, Stream::Noise, x.nrows() as u64);
            variance_monte_carlo(&s, sigma, trials, NoiseFamily::Gaussian, &mut rng)
        }
    }
}

pub fn estimate_bias(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    target: &TargetSpec,
    gamma: f64,
    test: &DMatrix<f64>,
    opts: PairOptions,
) -> Result<Estimate> {
    let f = synthesize_target(target)?;
    let s = Smoother::new(spec, x, test, gamma, opts, Precision::Double)?;
    bias_from_labels(&s, &f.eval_rows(x), &f.eval_rows(test))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskReport {
    pub n: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub m_test: usize,
    pub seed: u64,
    pub bias: Estimate,
    pub variance: Estimate,
    /// `bias + variance`; standard errors added in quadrature.
    pub excess: Estimate,
}

impl RiskReport {
    pub fn new(n: usize, gamma: f64, sigma: f64, m_test: usize, seed: u64, bias: Estimate, variance: Estimate) -> Self {
        let excess = Estimate {
            value: bias.value + variance.value,
            stderr: bias.stderr.hypot(variance.stderr),
        };
        Self {
            n,
            gamma,
            sigma,
            m_test,
            seed,
            bias,
            variance,
            excess,
        }
    }
}
