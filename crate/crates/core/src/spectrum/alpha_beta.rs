//! Feature-regularity ratios `alpha_k` and `beta_k`.
//!
//! Each ratio compares a feature-norm quantity at a point with its expected
//! value. `alpha_k` is the smallest tail ratio over the sample and `beta_k` the
//! largest of the head, tail and squared-tail ratios.

use serde::Serialize;

use super::features::FeatureSample;
use super::profile::DegreeProfile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
    /// Largest value of each ratio: head, tail, squared tail.
    pub beta_parts: [f64; 3],
}

/// Closed form for dot-product kernels at a degree boundary.
///
/// The addition theorem makes `‖psi_{<=k}(x)‖^2`, `‖phi_{>k}(x)‖^2` and
/// `‖Sigma^{1/2}_{>k} phi_{>k}(x)‖^2` constant in `x`, so every ratio equals 1.
pub fn alpha_beta_degree(profile: &DegreeProfile, k: u128) -> Result<AlphaBeta> {
    profile.head_degrees(k)?;
    Ok(AlphaBeta {
        alpha: 1.0,
        beta: 1.0,
        beta_parts: [1.0; 3],
    })
}

/// Empirical min/max of the ratios over the rows of an explicit feature sample.
pub fn alpha_beta_features(features: &FeatureSample, k: usize) -> Result<AlphaBeta> {
    let p = features.p();
    if k >= p {
        return Err(Error::EmptyTail { index: k + 1 });
    }
    let lambdas = features.lambdas();
    let tail: f64 = lambdas[k..].iter().sum();
    let tail_sq: f64 = lambdas[k..].iter().map(|l| l * l).sum();
    if !(tail > 0.0) {
        return Err(Error::EmptyTail { index: k + 1 });
    }
    let mut alpha = f64::INFINITY;
    let mut parts = [f64::NEG_INFINITY; 3];
    for row in features.psi().row_iter() {
        let (mut head, mut t, mut t2) = (0.0, 0.0, 0.0);
        for (i, psi) in row.iter().enumerate() {
            let s = psi * psi;
            if i < k {
                head += s;
            } else {
                t += lambdas[i] * s;
                t2 += lambdas[i] * lambdas[i] * s;
            }
        }
        let ratios = [
            if k > 0 { head / k as f64 } else { f64::NEG_INFINITY },
            t / tail,
            t2 / tail_sq,
        ];
        alpha = alpha.min(ratios[1]);
        for (m, r) in parts.iter_mut().zip(ratios) {
            *m = m.max(r);
        }
    }
    let beta = parts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(AlphaBeta {
        alpha,
        beta,
        beta_parts: parts,
    })
}
