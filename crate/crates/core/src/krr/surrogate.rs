//! Population variance of the estimator fitted on explicit feature samples.

use nalgebra::DMatrix;

use super::solver::RegularizedSystem;
use crate::error::Result;
use crate::spectrum::FeatureSample;

/// `V = sigma^2 tr(A^{-1} C A^{-1})` with `A = K + n gamma I` and `C` the
/// test covariance `E_x[k(x) k(x)^T]` of the feature model, so no test
/// points are sampled.
pub fn feature_variance(features: &FeatureSample, gamma: f64, sigma: f64) -> Result<f64> {
    let g = features.gram();
    let sys = RegularizedSystem::new(&g, gamma)?;
    let c: DMatrix<f64> = features.test_covariance();
    let y = sys.solve_matrix(&c)?;
    let z = sys.solve_matrix(&y.transpose())?;
    Ok(sigma * sigma * z.trace())
}
