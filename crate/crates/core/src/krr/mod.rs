//! Kernel ridge regression in dual form: solvers, bias and variance
//! estimates, risk bounds and asymptotic rates.

mod bounds;
pub mod ddouble;
mod rates;
mod risk;
mod solver;
mod surrogate;

pub use bounds::{risk_bounds, BoundInputs, BoundReport, TargetNorms};
pub use rates::{parse_rational, rate_predictions, Base, RateTable, Regime};
pub use risk::{
    bias_from_labels, estimate_bias, estimate_variance, variance_closed_form,
    variance_monte_carlo, NoiseFamily, RiskReport, VarianceMode,
};
pub use solver::{
    FittedPredictor, Precision, RegularizedSystem, Smoother, SolveMethod, JITTER, PINV_CUTOFF,
};
pub use surrogate::feature_variance;
