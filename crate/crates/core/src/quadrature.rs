//! Gauss–Jacobi quadrature for the symmetric weight `(1 - u^2)^alpha` on
//! `[-1, 1]`, by the Golub–Welsch method.
//!
//! The Jacobi matrix is diagonalized with implicit QL iterations that only
//! track the first component of each eigenvector, which is all the weights need.

use crate::error::{Error, Result};

/// Nodes in increasing order with weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(u, w)| w * f(*u)).sum()
    }
}

/// `n`-point rule for the probability density proportional to
/// `(1 - u^2)^alpha`, `alpha > -1`.
pub fn gauss_jacobi_symmetric(n: usize, alpha: f64) -> Result<Rule> {
    if n == 0 {
        return Err(Error::InvalidParameter("quadrature needs >= 1 node".into()));
    }
    if !(alpha > -1.0) {
        return Err(Error::InvalidParameter(format!(
            "jacobi exponent must be > -1, got {alpha}"
        )));
    }
    // Recurrence coefficients of the monic Jacobi polynomials with a = b = alpha;
    // the diagonal vanishes by symmetry.
    let ab = 2.0 * alpha;
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            let s = 2.0 * k + ab;
            let num = k * (k + alpha) * (k + alpha) * (k + ab);
            (4.0 * num / (s * s * (s * s - 1.0))).sqrt()
        })
        .collect();
    let (mut nodes, first) = tridiagonal_eigen_first_row(vec![0.0; n], off)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
    let mut weights: Vec<f64> = idx.iter().map(|&i| first[i] * first[i]).collect();
    nodes = idx.iter().map(|&i| nodes[i]).collect();

    // Enforce the reflection symmetry of the exact rule.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(Rule { nodes, weights })
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off`, together with the first component of each
/// normalized eigenvector.
pub fn tridiagonal_eigen_first_row(mut diag: Vec<f64>, off: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if off.len() + 1 != n.max(1) {
        return Err(Error::DimensionMismatch {
            expected: n.saturating_sub(1),
            got: off.len(),
        });
    }
    let mut e = off;
    e.push(0.0);
    // Absolute floor so exactly singular blocks still deflate.
    let scale = diag.iter().chain(&e).fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = f64::EPSILON * scale;
    let mut z = vec![0.0; n];
    if n > 0 {
        z[0] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd + floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::EigenNotConverged {
                    condition: scale / e[l].abs().max(f64::MIN_POSITIVE),
                });
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut early = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if early {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((diag, z))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_three_point() {
        // alpha = 0: nodes 0, +-sqrt(3/5), weights (5, 8, 5)/18
        let r = gauss_jacobi_symmetric(3, 0.0).unwrap();
        let x = (0.6f64).sqrt();
        assert!((r.nodes[0] + x).abs() < 1e-15 && (r.nodes[2] - x).abs() < 1e-15);
        assert!((r.weights[1] - 8.0 / 18.0).abs() < 1e-15);
        assert!((r.weights[0] - 5.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_second_kind_nodes() {
        // alpha = 1/2: nodes cos(j pi / (n + 1))
        let n = 9;
        let r = gauss_jacobi_symmetric(n, 0.5).unwrap();
        for (j, x) in r.nodes.iter().enumerate() {
            let want = -((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((x - want).abs() < 1e-14, "{x} vs {want}");
        }
    }

    #[test]
    fn exact_moments() {
        // E[u^2] under density prop. to (1-u^2)^alpha is 1 / (2 alpha + 3).
        for &alpha in &[0.0, 0.5, 2.5, 6.5, 14.5] {
            let r = gauss_jacobi_symmetric(20, alpha).unwrap();
            let m2 = r.integrate(|u| u * u);
            assert!((m2 - 1.0 / (2.0 * alpha + 3.0)).abs() < 1e-14);
            let m4 = r.integrate(|u| u.powi(4));
            let want = 3.0 / ((2.0 * alpha + 3.0) * (2.0 * alpha + 5.0));
            assert!((m4 - want).abs() < 1e-14);
        }
    }

    #[test]
    fn single_node() {
        let r = gauss_jacobi_symmetric(1, 3.0).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert_eq!(r.weights, vec![1.0]);
    }
}
