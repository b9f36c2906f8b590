//! Mercer spectra, effective ranks, feature-regularity diagnostics and the
//! Hermite feature demonstration.

mod alpha_beta;
mod features;
mod hermite;
mod mercer;
mod profile;
mod ranks;

pub use alpha_beta::{alpha_beta_degree, alpha_beta_features, AlphaBeta};
pub use features::{FeatureSample, Remainder};
pub use hermite::{
    gaussian_expectation, hermite_feature, mean_and_stderr, hermite_features, hermite_moment,
    hermite_rbf_eigenvalue, Estimate, HERMITE_RBF_BANDWIDTH,
};
pub use mercer::{mercer_spectrum, min_nodes, CONVERGENCE_TOL, NEGATIVE_FLOOR, PRESENCE_FLOOR};
pub use profile::{DegreeBlock, DegreeProfile, Decay, ExplicitProfile, SpectralProfile, TailModel};
pub use ranks::{effective_ranks, RankReport};
