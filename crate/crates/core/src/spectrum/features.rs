//! Explicit feature samples: rows are points, columns are eigenfunction values.
//!
//! Used for synthetic spectra (Gaussian features standing in for the
//! eigenfunctions) and for the Hermite demonstration. Features past the
//! stored truncation can be represented by a remainder block, whose
//! central-limit approximation is `tail * I + sqrt(tail_sq) * G` with `G` a
//! symmetric Gaussian matrix (off-diagonal variance 1, diagonal variance 2).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::hermite::{hermite_features, hermite_rbf_eigenvalue};
use super::profile::ExplicitProfile;
use crate::error::{Error, Result};
use crate::kernels::GramMatrix;

/// Contribution of the features past the stored truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct Remainder {
    pub trace: f64,
    pub trace_sq: f64,
    pub block: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSample {
    psi: DMatrix<f64>,
    lambdas: Vec<f64>,
    remainder: Option<Remainder>,
}

fn mirror_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            m[(i, j)] = m[(j, i)];
        }
    }
}

impl FeatureSample {
    pub fn new(psi: DMatrix<f64>, lambdas: Vec<f64>) -> Result<Self> {
        if psi.ncols() != lambdas.len() {
            return Err(Error::DimensionMismatch {
                expected: lambdas.len(),
                got: psi.ncols(),
            });
        }
        Ok(Self {
            psi,
            lambdas,
            remainder: None,
        })
    }

    /// `n` points with i.i.d. standard normal features for the first `p`
    /// eigenvalues of `profile`; the rest of the spectrum enters through a
    /// remainder block when `with_remainder` is set.
    pub fn gaussian<R: Rng + ?Sized>(
        n: usize,
        profile: &ExplicitProfile,
        p: usize,
        with_remainder: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let lambdas: Vec<f64> = (1..=p).map(|i| profile.eigenvalue(i)).collect();
        let psi = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng));
        let mut out = Self::new(psi, lambdas)?;
        if with_remainder {
            let trace = profile.tail_trace(p);
            let trace_sq = profile.tail_trace_sq(p);
            let s = trace_sq.sqrt();
            let mut block = DMatrix::zeros(n, n);
            for j in 0..n {
                for i in 0..=j {
                    let g: f64 = StandardNormal.sample(rng);
                    block[(i, j)] = if i == j {
                        trace + s * std::f64::consts::SQRT_2 * g
                    } else {
                        s * g
                    };
                }
            }
            mirror_upper(&mut block);
            out.remainder = Some(Remainder {
                trace,
                trace_sq,
                block,
            });
        }
        Ok(out)
    }

    /// Hermite eigenfunctions `psi_0..psi_{p-1}` at the given inputs with the
    /// matched Gaussian-kernel eigenvalues.
    pub fn hermite(xs: &[f64], p: usize) -> Result<Self> {
        let mut psi = DMatrix::zeros(xs.len(), p);
        let mut buf = vec![0.0; p];
        for (r, &x) in xs.iter().enumerate() {
            hermite_features(x, &mut buf)?;
            for (c, v) in buf.iter().enumerate() {
                psi[(r, c)] = *v;
            }
        }
        Self::new(psi, (0..p).map(hermite_rbf_eigenvalue).collect())
    }

    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn p(&self) -> usize {
        self.psi.ncols()
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn remainder(&self) -> Option<&Remainder> {
        self.remainder.as_ref()
    }

    // sum over columns in `range` of lambda_i^power psi_i psi_i^T
    fn weighted_outer(&self, range: std::ops::Range<usize>, power: i32) -> DMatrix<f64> {
        let cols = self.psi.columns(range.start, range.len());
        let mut scaled = cols.clone_owned();
        for (c, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.lambdas[range.start + c].powi(power);
        }
        let mut m = &scaled * cols.transpose();
        mirror_upper(&mut m);
        m
    }

    /// Kernel matrix `Psi Lambda Psi^T` plus the remainder block.
    pub fn gram(&self) -> GramMatrix {
        let mut m = self.weighted_outer(0..self.p(), 1);
        if let Some(r) = &self.remainder {
            m += &r.block;
        }
        GramMatrix::from_matrix(m).expect("mirrored matrix is symmetric")
    }

    /// `K = K_{<=k} + K_{>k}` with the head formed from the first `k` features.
    pub fn split_gram(&self, k: usize) -> Result<(GramMatrix, GramMatrix)> {
        if k > self.p() {
            return Err(Error::InvalidParameter(format!(
                "split at {k} exceeds the {} stored features",
                self.p()
            )));
        }
        let full = self.gram().into_inner();
        let low = self.weighted_outer(0..k, 1);
        let high = &full - &low;
        Ok((GramMatrix::from_matrix(low)?, GramMatrix::from_matrix(high)?))
    }

    /// `Psi Lambda^2 Psi^T` plus `tr(Sigma_{>p}^2) I`: the covariance of the
    /// kernel column `k(x)` over a fresh test point.
    pub fn test_covariance(&self) -> DMatrix<f64> {
        let mut m = self.weighted_outer(0..self.p(), 2);
        if let Some(r) = &self.remainder {
            for i in 0..m.nrows() {
                m[(i, i)] += r.trace_sq;
            }
        }
        m
    }
}
