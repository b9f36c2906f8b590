//! Sampling on the unit sphere, harmonic dimensions, normalized Gegenbauer
//! polynomials and targets with known per-degree content.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// `n` points drawn uniformly from `S^{d-1}`, stored as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereSample {
    pub x: DMatrix<f64>,
    pub seed: u64,
    pub d: usize,
}

impl SphereSample {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }
}

/// Uniform sample on `S^{d-1}`; deterministic in `seed`.
pub fn sample_sphere(n: usize, d: usize, seed: u64) -> Result<SphereSample> {
    let mut rng = stream_rng(seed, Stream::Train, n as u64);
    let x = sample_sphere_with(n, d, &mut rng)?;
    Ok(SphereSample { x, seed, d })
}

/// Uniform sample on `S^{d-1}` from a caller-supplied generator.
pub fn sample_sphere_with<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!(
            "sphere dimension must be >= 3, got {d}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be >= 1".into()));
    }
    let mut x = DMatrix::zeros(n, d);
    let mut row = vec![0.0; d];
    for i in 0..n {
        loop {
            for v in row.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-150 {
                for (j, v) in row.iter().enumerate() {
                    x[(i, j)] = v / norm;
                }
                break;
            }
        }
    }
    Ok(x)
}

/// Uniform sample on the unit disk in the plane (radius `sqrt(U)`, uniform angle).
pub fn sample_disk<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, 2);
    for i in 0..n {
        let r = rng.random::<f64>().sqrt();
        let t = std::f64::consts::TAU * rng.random::<f64>();
        x[(i, 0)] = r * t.cos();
        x[(i, 1)] = r * t.sin();
    }
    x
}

fn check_dim(d: usize) -> Result<()> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!(
            "harmonic dimension needs d >= 3, got {d}"
        )));
    }
    Ok(())
}

fn binomial(m: u128, r: u128) -> Option<u128> {
    let r = r.min(m - r);
    let mut acc: u128 = 1;
    for i in 1..=r {
        // acc * (m - r + i) is divisible by i at every step
        acc = acc.checked_mul(m - r + i)? / i;
    }
    Some(acc)
}

/// Number of degree-`l` spherical harmonics on `S^{d-1}`, exact.
pub fn harmonic_dim(d: usize, l: usize) -> Result<u128> {
    check_dim(d)?;
    if l == 0 {
        return Ok(1);
    }
    let (d, l) = (d as u128, l as u128);
    let overflow = || Error::Overflow(format!("N(d={d}, l={l})"));
    let b = binomial(l + d - 3, d - 2).ok_or_else(overflow)?;
    let num = (2 * l + d - 2).checked_mul(b).ok_or_else(overflow)?;
    Ok(num / l)
}

/// `N(d, 0) + ... + N(d, l)`, the number of eigenfunctions up to degree `l`.
pub fn cumulative_dim(d: usize, l: usize) -> Result<u128> {
    (0..=l).try_fold(0u128, |acc, j| {
        acc.checked_add(harmonic_dim(d, j)?)
            .ok_or_else(|| Error::Overflow(format!("N(d={d}, <={l})")))
    })
}

/// `N(d, l)` as a float; falls back to floating products when the exact
/// value does not fit in `u128`.
pub fn harmonic_dim_f64(d: usize, l: usize) -> Result<f64> {
    match harmonic_dim(d, l) {
        Ok(v) => Ok(v as f64),
        Err(Error::Overflow(_)) => {
            let (df, lf) = (d as f64, l as f64);
            let r = d - 2;
            let m = l + d - 3;
            let b = (1..=r).fold(1.0, |acc, i| acc * (m - r + i) as f64 / i as f64);
            Ok((2.0 * lf + df - 2.0) / lf * b)
        }
        Err(e) => Err(e),
    }
}

/// Normalized Gegenbauer polynomial `P_l^d(u)` with `P_l^d(1) = 1`.
pub fn gegenbauer(d: usize, l: usize, u: f64) -> f64 {
    let mut out = vec![0.0; l + 1];
    gegenbauer_all(d, u, &mut out);
    out[l]
}

/// Fills `out[l] = P_l^d(u)` for every `l < out.len()`.
pub fn gegenbauer_all(d: usize, u: f64, out: &mut [f64]) {
    let u = u.clamp(-1.0, 1.0);
    let d = d as f64;
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = u;
    }
    for l in 1..out.len().saturating_sub(1) {
        let lf = l as f64;
        out[l + 1] = ((2.0 * lf + d - 2.0) * u * out[l] - lf * out[l - 1]) / (lf + d - 2.0);
    }
}

/// Per-degree harmonic content anchored at a unit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    /// `(degree, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub anchor: Vec<f64>,
}

impl TargetSpec {
    /// Target whose anchor is drawn uniformly from `S^{d-1}` using `anchor_seed`.
    pub fn with_anchor_seed(d: usize, anchor_seed: u64, coeffs: Vec<(usize, f64)>) -> Result<Self> {
        let mut rng = stream_rng(anchor_seed, Stream::Anchor, 0);
        let x = sample_sphere_with(1, d, &mut rng)?;
        Ok(Self {
            coeffs,
            anchor: x.row(0).iter().copied().collect(),
        })
    }

    /// The zero function.
    pub fn zero(d: usize) -> Self {
        let mut anchor = vec![0.0; d];
        anchor[0] = 1.0;
        Self {
            coeffs: Vec::new(),
            anchor,
        }
    }

    /// Squared population norm `sum_l c_l^2`, after merging repeated degrees.
    pub fn norm_sq(&self) -> f64 {
        self.mass_by_degree().iter().map(|(_, m)| m).sum()
    }

    /// Squared coefficient mass per degree, merging repeated degrees.
    pub fn mass_by_degree(&self) -> Vec<(usize, f64)> {
        let mut merged = self.merged();
        merged.iter_mut().for_each(|(_, c)| *c *= *c);
        merged
    }

    fn merged(&self) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = Vec::new();
        let mut sorted = self.coeffs.clone();
        sorted.sort_by_key(|(l, _)| *l);
        for (l, c) in sorted {
            match v.last_mut() {
                Some((pl, pc)) if *pl == l => *pc += c,
                _ => v.push((l, c)),
            }
        }
        v
    }
}

/// Evaluator for `f*(x) = sum_l c_l sqrt(N(d,l)) P_l^d(<x_0, x>)`.
#[derive(Debug, Clone)]
pub struct Target {
    anchor: Vec<f64>,
    d: usize,
    // (degree, c_l * sqrt(N(d, l)))
    terms: Vec<(usize, f64)>,
    max_degree: usize,
}

pub fn synthesize_target(spec: &TargetSpec) -> Result<Target> {
    let d = spec.anchor.len();
    check_dim(d)?;
    let norm = spec.anchor.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NonUnitInput { norm });
    }
    let terms = spec
        .merged()
        .into_iter()
        .map(|(l, c)| Ok((l, c * harmonic_dim_f64(d, l)?.sqrt())))
        .collect::<Result<Vec<_>>>()?;
    let max_degree = terms.iter().map(|(l, _)| *l).max().unwrap_or(0);
    Ok(Target {
        anchor: spec.anchor.clone(),
        d,
        terms,
        max_degree,
    })
}

impl Target {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let u: f64 = self.anchor.iter().zip(x).map(|(a, b)| a * b).sum();
        let mut p = vec![0.0; self.max_degree + 1];
        gegenbauer_all(self.d, u, &mut p);
        self.terms.iter().map(|(l, w)| w * p[*l]).sum()
    }

    /// Evaluates at every row of `x`.
    pub fn eval_rows(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let rows = crate::kernels::rows_of(x);
        DVector::from_iterator(rows.len(), rows.iter().map(|r| self.eval(r)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_dims() {
        assert_eq!(harmonic_dim(3, 5).unwrap(), 11);
        for d in 3..40 {
            assert_eq!(harmonic_dim(d, 1).unwrap(), d as u128);
            assert_eq!(harmonic_dim(d, 0).unwrap(), 1);
        }
        assert_eq!(harmonic_dim(16, 2).unwrap(), 135);
        assert_eq!(cumulative_dim(16, 1).unwrap(), 17);
        assert!(harmonic_dim(2, 3).is_err());
    }

    #[test]
    fn harmonic_dim_overflow_is_reported() {
        assert!(matches!(harmonic_dim(200, 200), Err(Error::Overflow(_))));
        let approx = harmonic_dim_f64(200, 200).unwrap();
        assert!(approx.is_finite() && approx > 1e38);
    }

    #[test]
    fn degree_two_dimension_matches_closed_form() {
        // N(d, 2) = (d + 2)(d - 1) / 2
        for d in 3..60usize {
            assert_eq!(harmonic_dim(d, 2).unwrap(), ((d + 2) * (d - 1) / 2) as u128);
        }
    }

    #[test]
    fn gegenbauer_values() {
        assert_eq!(gegenbauer(7, 0, 0.3), 1.0);
        assert_eq!(gegenbauer(7, 1, 0.37), 0.37);
        assert!((gegenbauer(3, 2, 0.5) + 0.125).abs() < 1e-15);
        for d in 3..20 {
            for l in 0..15 {
                assert!((gegenbauer(d, l, 1.0) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gegenbauer_degree_two_closed_form() {
        // P_2^d(u) = (d u^2 - 1) / (d - 1)
        for d in 3..12 {
            for &u in &[-0.9, -0.2, 0.0, 0.4, 0.77] {
                let want = (d as f64 * u * u - 1.0) / (d as f64 - 1.0);
                assert!((gegenbauer(d, 2, u) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_rows_unit_and_deterministic() {
        let s = sample_sphere(1000, 16, 3).unwrap();
        for r in s.x.row_iter() {
            assert!((r.norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(s.x, sample_sphere(1000, 16, 3).unwrap().x);
        assert!(sample_sphere(5, 2, 0).is_err());
    }

    #[test]
    fn sphere_mean_concentrates() {
        let n = 2000;
        for seed in 0..20 {
            let s = sample_sphere(n, 16, seed).unwrap();
            let mean = s.x.row_mean();
            assert!(mean.norm() <= 4.0 / (n as f64).sqrt(), "seed {seed}");
        }
    }

    #[test]
    fn disk_points_inside() {
        let mut rng = crate::rng::seeded(1);
        let x = sample_disk(500, &mut rng);
        assert!(x.row_iter().all(|r| r.norm() <= 1.0));
    }

    #[test]
    fn simple_targets() {
        let t = TargetSpec::with_anchor_seed(6, 7, vec![(0, 1.0)]).unwrap();
        let f = synthesize_target(&t).unwrap();
        let x = sample_sphere(10, 6, 1).unwrap();
        assert!(f.eval_rows(&x.x).iter().all(|v| *v == 1.0));

        let t = TargetSpec::with_anchor_seed(6, 7, vec![(1, 1.0)]).unwrap();
        let f = synthesize_target(&t).unwrap();
        for r in x.x.row_iter() {
            let r: Vec<f64> = r.iter().copied().collect();
            let u: f64 = t.anchor.iter().zip(&r).map(|(a, b)| a * b).sum();
            assert!((f.eval(&r) - 6f64.sqrt() * u).abs() < 1e-14);
        }
    }

    #[test]
    fn target_norm_monte_carlo() {
        let t = TargetSpec::with_anchor_seed(8, 7, vec![(0, 1.0), (2, 0.5)]).unwrap();
        let f = synthesize_target(&t).unwrap();
        let s = sample_sphere(100_000, 8, 11).unwrap();
        let v: Vec<f64> = f.eval_rows(&s.x).iter().map(|y| y * y).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        let se = (var / v.len() as f64).sqrt();
        assert!((m - 1.25).abs() < 3.0 * se, "mean {m} se {se}");
    }
}
