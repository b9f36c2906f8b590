//! Per-degree Mercer spectra of dot-product kernels by Gauss–Jacobi quadrature.

use log::warn;

use super::profile::{DegreeBlock, DegreeProfile};
use crate::error::{Error, Result};
use crate::kernels::{eval_dot_kernel, KernelSpec};
use crate::quadrature::gauss_jacobi_symmetric;
use crate::sphere::{gegenbauer_all, harmonic_dim};

/// Degree masses at or below this fraction of `h(1)` are quadrature noise and
/// stored as exact zeros.
pub const PRESENCE_FLOOR: f64 = 1e-13;

/// Negative masses down to this fraction of `h(1)` are tolerated (and clamped).
pub const NEGATIVE_FLOOR: f64 = 1e-10;

/// Node-doubling stops once no `sigma_hat` moves by more than this.
pub const CONVERGENCE_TOL: f64 = 1e-8;

const MAX_NODES: usize = 1 << 14;

/// Minimum node count accepted for a given `l_max`.
pub fn min_nodes(l_max: usize) -> usize {
    2 * l_max + 32
}

fn degree_masses(spec: &KernelSpec, d: usize, l_max: usize, nodes: usize) -> Result<Vec<f64>> {
    let rule = gauss_jacobi_symmetric(nodes, (d as f64 - 3.0) / 2.0)?;
    let mut acc = vec![0.0; l_max + 1];
    let mut p = vec![0.0; l_max + 1];
    for (u, w) in rule.nodes.iter().zip(&rule.weights) {
        let h = eval_dot_kernel(spec, *u)?;
        gegenbauer_all(d, *u, &mut p);
        for (a, pl) in acc.iter_mut().zip(&p) {
            *a += w * h * pl;
        }
    }
    for (l, a) in acc.iter_mut().enumerate() {
        *a *= harmonic_dim(d, l)? as f64;
    }
    Ok(acc)
}

/// Computes `sigma_hat_l` for `l = 0..=l_max`.
///
/// Polynomial profiles are integrated exactly by the rule. Other kernels are
/// re-integrated with doubled node counts until successive estimates agree.
pub fn mercer_spectrum(
    spec: &KernelSpec,
    d: usize,
    l_max: usize,
    quad_nodes: usize,
) -> Result<DegreeProfile> {
    spec.validate()?;
    if d < 3 {
        return Err(Error::InvalidParameter(format!(
            "mercer spectrum needs d >= 3, got {d}"
        )));
    }
    if quad_nodes < min_nodes(l_max) {
        return Err(Error::InvalidParameter(format!(
            "{quad_nodes} quadrature nodes; at least 2 * l_max + 32 = {} required",
            min_nodes(l_max)
        )));
    }
    let total = spec.diag_value()?;
    let mut nodes = quad_nodes;
    let mut masses = degree_masses(spec, d, l_max, nodes)?;
    if let Some(q) = spec.polynomial_degree() {
        // Exact for polynomials of degree <= 2 * nodes - 1; higher degrees vanish.
        if q + l_max >= 2 * nodes {
            return Err(Error::InvalidParameter(format!(
                "{nodes} nodes cannot integrate degree {}",
                q + l_max
            )));
        }
        masses.iter_mut().skip(q + 1).for_each(|m| *m = 0.0);
    } else {
        let mut change = f64::INFINITY;
        while change >= CONVERGENCE_TOL {
            if nodes * 2 > MAX_NODES {
                return Err(Error::QuadratureNotConverged { nodes, change });
            }
            nodes *= 2;
            let next = degree_masses(spec, d, l_max, nodes)?;
            change = next
                .iter()
                .zip(&masses)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            masses = next;
        }
    }

    let resolved: f64 = masses.iter().sum();
    if resolved > total * (1.0 + 1e-6) {
        return Err(Error::QuadratureDegenerate { resolved, total });
    }
    let blocks = masses
        .into_iter()
        .enumerate()
        .map(|(l, m)| {
            let sigma_hat = if m.abs() <= PRESENCE_FLOOR * total {
                0.0
            } else if m < 0.0 {
                if m < -NEGATIVE_FLOOR * total {
                    warn!("sigma_hat_{l} = {m:e} below the noise floor; clamped to 0");
                } else {
                    warn!("negative quadrature noise sigma_hat_{l} = {m:e} clamped to 0");
                }
                0.0
            } else {
                m
            };
            Ok(DegreeBlock {
                degree: l,
                sigma_hat,
                multiplicity: harmonic_dim(d, l)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DegreeProfile::new(d, blocks, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_kernel_single_degree() {
        let spec = KernelSpec::series(vec![0.0, 1.0]).unwrap();
        for d in [3, 5, 16] {
            let p = mercer_spectrum(&spec, d, 8, min_nodes(8)).unwrap();
            for b in p.blocks() {
                let want = if b.degree == 1 { 1.0 } else { 0.0 };
                assert!((b.sigma_hat - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quadratic_kernel_closed_form() {
        // u^2 = 1/d + (d-1)/d P_2(u)
        let spec = KernelSpec::series(vec![0.0, 0.0, 1.0]).unwrap();
        let d = 7;
        let p = mercer_spectrum(&spec, d, 4, min_nodes(4)).unwrap();
        assert!((p.blocks()[0].sigma_hat - 1.0 / 7.0).abs() < 1e-14);
        assert!((p.blocks()[2].sigma_hat - 6.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_too_few_nodes() {
        let spec = KernelSpec::ntk(2).unwrap();
        assert!(mercer_spectrum(&spec, 8, 10, 40).is_err());
        assert!(mercer_spectrum(&KernelSpec::rbf(1.0).unwrap(), 8, 2, 40).is_err());
    }

    #[test]
    fn gpk_masses_nonnegative_and_bounded() {
        let spec = KernelSpec::gpk(2).unwrap();
        let p = mercer_spectrum(&spec, 8, 10, min_nodes(10)).unwrap();
        assert!(p.resolved_mass() <= 1.0 + 1e-12);
        assert!(p.blocks().iter().all(|b| b.sigma_hat >= 0.0));
        assert!(p.residual() < 1e-2);
    }
}
