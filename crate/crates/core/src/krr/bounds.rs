//! Non-asymptotic bias and variance bounds for kernel ridge regression.

use serde::Serialize;

use crate::eigenbounds::Constants;
use crate::error::{Error, Result};
use crate::sphere::TargetSpec;
use crate::spectrum::{effective_ranks, DegreeProfile, SpectralProfile};

/// Split norms of the target parameter at a cutoff `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetNorms {
    /// `‖theta*_{<=k}‖^2` in the `Sigma_{<=k}^{-1}` norm.
    pub head: f64,
    /// `‖theta*_{>k}‖^2` in the `Sigma_{>k}` norm.
    pub tail: f64,
}

impl TargetNorms {
    /// For a degree-anchored target, whose degree-`l` mass `c_l^2` is spread
    /// evenly over the `N(d, l)` eigenfunctions of eigenvalue `sigma_hat_l / N`.
    ///
    /// Each such function has `L2` coefficient `f_j^2 = c^2 / N` and parameter
    /// `theta_j = f_j / sqrt(lambda_j)`, so the head contributes
    /// `c^2 N^2 / sigma_hat^2` per degree and the tail `c^2`.
    pub fn from_degree(profile: &DegreeProfile, target: &TargetSpec, k: u128) -> Result<Self> {
        let head_degrees = profile.head_degrees(k)?;
        let (mut head, mut tail) = (0.0, 0.0);
        for (l, c2) in target.mass_by_degree() {
            if c2 == 0.0 {
                continue;
            }
            let block = profile.blocks().iter().find(|b| b.degree == l);
            if let Some(b) = block {
                if b.sigma_hat == 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "target has mass on degree {l}, where the kernel vanishes"
                    )));
                }
            }
            if head_degrees.contains(&l) {
                let b = block.expect("head degrees are resolved blocks");
                let mult = b.multiplicity as f64;
                head += c2 * mult * mult / (b.sigma_hat * b.sigma_hat);
            } else {
                tail += c2;
            }
        }
        Ok(Self { head, tail })
    }

    /// From explicit parameters `theta_i` against eigenvalues `lambda_i`.
    pub fn from_explicit(lambdas: &[f64], theta: &[f64], k: usize) -> Result<Self> {
        if lambdas.len() != theta.len() {
            return Err(Error::DimensionMismatch {
                expected: lambdas.len(),
                got: theta.len(),
            });
        }
        let (mut head, mut tail) = (0.0, 0.0);
        for (i, (l, t)) in lambdas.iter().zip(theta).enumerate() {
            if i < k {
                if *t != 0.0 && !(*l > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "theta_{} nonzero on a zero eigenvalue",
                        i + 1
                    )));
                }
                if *t != 0.0 {
                    head += t * t / l;
                }
            } else {
                tail += l * t * t;
            }
        }
        Ok(Self { head, tail })
    }
}

/// Everything the bounds consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: usize,
    pub k: usize,
    pub gamma: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub sigma: f64,
    /// `r_k(Sigma^2)`
    pub r_k_sq: f64,
    /// `R_k(Sigma)`
    pub big_r_k: f64,
    /// `tr(Sigma_{>k})`
    pub tail_trace: f64,
    pub target: TargetNorms,
    pub constants: Constants,
}

impl BoundInputs {
    /// Fills the spectral fields from `profile`. An empty tail gives zero
    /// tail terms.
    #[allow(clippy::too_many_arguments)]
    pub fn from_profile(
        profile: &SpectralProfile,
        n: usize,
        k: usize,
        gamma: f64,
        rho: f64,
        alpha: f64,
        beta: f64,
        delta: f64,
        sigma: f64,
        target: TargetNorms,
        constants: Constants,
    ) -> Result<Self> {
        let (r_k_sq, big_r_k, tail_trace) = match effective_ranks(profile, k) {
            Ok(r) => (r.r_k_sq, r.big_r_k, r.tail_trace),
            Err(Error::EmptyTail { .. }) => (0.0, f64::INFINITY, 0.0),
            Err(e) => return Err(e),
        };
        Ok(Self {
            n,
            k,
            gamma,
            rho,
            alpha,
            beta,
            delta,
            sigma,
            r_k_sq,
            big_r_k,
            tail_trace,
            target,
            constants,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub k: usize,
    pub rho: f64,
    pub v_bound: f64,
    pub b_bound: f64,
    /// `C beta k log k <= n` failed; the bounds are not guaranteed.
    pub advisory: bool,
    pub inputs: BoundInputs,
}

/// ```text
/// V <= C1 rho^2 sigma^2 [k/n + min(r_k(Sigma^2)/n, n/(alpha^2 R_k))]
/// B <= C2 rho^3 [‖theta_{>k}‖^2_Sigma / delta
///                + ‖theta_{<=k}‖^2_{Sigma^{-1}} (gamma + beta tr(Sigma_{>k})/n)^2]
/// ```
///
/// With `alpha = 0` the minimum is `r_k(Sigma^2)/n`.
pub fn risk_bounds(p: &BoundInputs) -> Result<BoundReport> {
    if p.n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if !(p.delta > 0.0 && p.delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", p.delta)));
    }
    if !(p.gamma >= 0.0) || !(p.rho >= 1.0) || !(p.alpha >= 0.0) || !(p.beta >= 0.0) || !(p.sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need gamma, alpha, beta, sigma >= 0 and rho >= 1 (gamma={}, rho={}, alpha={}, beta={}, sigma={})",
            p.gamma, p.rho, p.alpha, p.beta, p.sigma
        )));
    }
    let (nf, kf) = (p.n as f64, p.k as f64);
    let c = p.constants;
    let ranks = p.r_k_sq / nf;
    let min_term = if p.alpha > 0.0 && p.big_r_k > 0.0 {
        ranks.min(nf / (p.alpha * p.alpha * p.big_r_k))
    } else {
        ranks
    };
    let v_bound = c.big_c1 * p.rho * p.rho * p.sigma * p.sigma * (kf / nf + min_term);
    let reg = p.gamma + p.beta * p.tail_trace / nf;
    let b_bound =
        c.big_c2 * p.rho.powi(3) * (p.target.tail / p.delta + p.target.head * reg * reg);
    let klogk = if p.k > 0 { kf * kf.ln() } else { 0.0 };
    Ok(BoundReport {
        k: p.k,
        rho: p.rho,
        v_bound,
        b_bound,
        advisory: c.big_c * p.beta * klogk > nf,
        inputs: *p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{mercer_spectrum, min_nodes, ExplicitProfile};
    use crate::kernels::KernelSpec;

    fn inputs(profile: &SpectralProfile, k: usize, target: TargetNorms) -> BoundInputs {
        BoundInputs::from_profile(profile, 256, k, 0.0, 2.0, 1.0, 1.0, 0.1, 1.0, target, Constants::default())
            .unwrap()
    }

    #[test]
    fn geometric_profile_recomputed_from_raw_sums() {
        let vals: Vec<f64> = (1..=60).map(|i| 0.5f64.powi(i)).collect();
        let profile: SpectralProfile = ExplicitProfile::new(vals.clone()).unwrap().into();
        let theta: Vec<f64> = (1..=60).map(|i| 1.0 / i as f64).collect();
        let target = TargetNorms::from_explicit(&vals, &theta, 8).unwrap();
        let r = risk_bounds(&inputs(&profile, 8, target)).unwrap();

        let tail: f64 = vals[8..].iter().sum();
        let tail_sq: f64 = vals[8..].iter().map(|v| v * v).sum();
        let r_sq = tail_sq / (vals[8] * vals[8]);
        let big_r = tail * tail / tail_sq;
        let v = 4.0 * (8.0 / 256.0 + (r_sq / 256.0).min(256.0 / big_r));
        assert!((r.v_bound - v).abs() < 1e-12 * v);
        let head: f64 = (0..8).map(|i| theta[i] * theta[i] / vals[i]).sum();
        let tl: f64 = (8..60).map(|i| theta[i] * theta[i] * vals[i]).sum();
        let b = 8.0 * (tl / 0.1 + head * (tail / 256.0).powi(2));
        assert!((r.b_bound - b).abs() < 1e-12 * b);
        assert!(!r.advisory);
    }

    #[test]
    fn trivial_zeros() {
        let vals = vec![1.0, 0.5, 0.25];
        let profile: SpectralProfile = ExplicitProfile::new(vals.clone()).unwrap().into();
        let target = TargetNorms::from_explicit(&vals, &[1.0, 1.0, 1.0], 3).unwrap();
        let mut p = inputs(&profile, 3, target);
        assert_eq!(p.tail_trace, 0.0);
        assert_eq!(risk_bounds(&p).unwrap().b_bound, 0.0);
        p.sigma = 0.0;
        assert_eq!(risk_bounds(&p).unwrap().v_bound, 0.0);
    }

    #[test]
    fn zero_alpha_uses_rank_term() {
        let profile: SpectralProfile = ExplicitProfile::geometric(0.9, 200).unwrap().into();
        let t = TargetNorms { head: 0.0, tail: 0.0 };
        let mut p = inputs(&profile, 4, t);
        p.alpha = 0.0;
        let r = risk_bounds(&p).unwrap();
        assert!((r.v_bound - 4.0 * (4.0 / 256.0 + p.r_k_sq / 256.0)).abs() < 1e-12);
    }

    #[test]
    fn precondition_marks_advisory() {
        let profile: SpectralProfile = ExplicitProfile::geometric(0.9, 200).unwrap().into();
        let t = TargetNorms { head: 0.0, tail: 0.0 };
        let mut p = inputs(&profile, 100, t);
        p.n = 50;
        assert!(risk_bounds(&p).unwrap().advisory);
    }

    #[test]
    fn degree_target_norms() {
        let spec = KernelSpec::polynomial(3, 1.0 / 6.0, 1.0).unwrap();
        let d = 6;
        let profile = mercer_spectrum(&spec, d, 5, min_nodes(5)).unwrap();
        let target = TargetSpec::with_anchor_seed(d, 0, vec![(0, 0.5), (1, 0.3), (2, 0.2)]).unwrap();
        // head = degrees {0, 1} at k = 1 + 6 when they lead the ordering
        let k = 1 + d as u128;
        let head = profile.head_degrees(k).unwrap();
        let norms = TargetNorms::from_degree(&profile, &target, k).unwrap();
        let mut want_head = 0.0;
        let mut want_tail = 0.0;
        for (l, c) in [(0usize, 0.5f64), (1, 0.3), (2, 0.2)] {
            let b = &profile.blocks()[l];
            if head.contains(&l) {
                want_head += c * c * (b.multiplicity as f64 / b.sigma_hat).powi(2);
            } else {
                want_tail += c * c;
            }
        }
        assert!((norms.head - want_head).abs() < 1e-12 * want_head);
        assert!((norms.tail - want_tail).abs() < 1e-15);

        let bad = TargetSpec::with_anchor_seed(d, 0, vec![(4, 1.0)]).unwrap();
        assert!(TargetNorms::from_degree(&profile, &bad, k).is_err());
    }
}
