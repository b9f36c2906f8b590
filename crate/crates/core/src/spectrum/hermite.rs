//! Orthonormal Hermite eigenfunctions of the Gaussian kernel
//! `exp(-3/8 (x - y)^2)` under standard normal inputs.
//!
//! `psi_i(x) = 2^{1/4} / sqrt(2^i i!) e^{-x^2/4} H_i(x)` is carried directly
//! through the normalized recurrence
//! `psi_{i+1} = x sqrt(2/(i+1)) psi_i - sqrt(i/(i+1)) psi_{i-1}`,
//! so neither `H_i` nor `i!` is ever formed.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Bandwidth whose eigenfunctions are exactly the `psi_i` above.
pub const HERMITE_RBF_BANDWIDTH: f64 = 3.0 / 8.0;

const OVERFLOW: f64 = 1e300;

/// Mercer eigenvalue `lambda_i = (2/3) (1/3)^i`, `i >= 0`, of the matched
/// Gaussian kernel.
pub fn hermite_rbf_eigenvalue(i: usize) -> f64 {
    2.0 / 3.0 * (1.0f64 / 3.0).powi(i as i32)
}

/// Fills `out[i] = psi_i(x)` for `i < out.len()`.
pub fn hermite_features(x: f64, out: &mut [f64]) -> Result<()> {
    if out.is_empty() {
        return Ok(());
    }
    out[0] = 2f64.powf(0.25) * (-x * x / 4.0).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for i in 1..out.len() - 1 {
        let fi = i as f64;
        out[i + 1] = x * (2.0 / (fi + 1.0)).sqrt() * out[i] - (fi / (fi + 1.0)).sqrt() * out[i - 1];
    }
    match out.iter().position(|v| !(v.abs() <= OVERFLOW)) {
        Some(index) => Err(Error::HermiteOverflow { index, x }),
        None => Ok(()),
    }
}

pub fn hermite_feature(i: usize, x: f64) -> Result<f64> {
    let mut out = vec![0.0; i + 1];
    hermite_features(x, &mut out)?;
    Ok(out[i])
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// `E[f(x)]`, `x ~ N(0, 1)`, from `samples` draws.
pub fn gaussian_expectation<R: Rng + ?Sized>(
    samples: usize,
    rng: &mut R,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let mut vals = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x: f64 = StandardNormal.sample(rng);
        vals.push(f(x)?);
    }
    Ok(mean_and_stderr(&vals))
}

pub fn mean_and_stderr(vals: &[f64]) -> Estimate {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Estimate {
        value: mean,
        stderr: (var / n).sqrt(),
    }
}

/// `(E|psi_i(x)|^p)^{1/p}` with a delta-method standard error.
pub fn hermite_moment(i: usize, p: f64, mc_samples: usize, seed: u64) -> Result<Estimate> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("moment order must be > 0, got {p}")));
    }
    let mut rng = stream_rng(seed, Stream::Features, i as u64);
    let mut buf = vec![0.0; i + 1];
    let m = gaussian_expectation(mc_samples, &mut rng, |x| {
        hermite_features(x, &mut buf)?;
        Ok(buf[i].abs().powf(p))
    })?;
    let value = m.value.powf(1.0 / p);
    let stderr = if m.value > 0.0 {
        value / (p * m.value) * m.stderr
    } else {
        0.0
    };
    Ok(Estimate { value, stderr })
}
