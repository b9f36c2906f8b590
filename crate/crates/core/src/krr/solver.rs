//! Dual solvers for `(K + n gamma I) a = y`.

use log::{info, warn};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ddouble::smoother_dd;
use crate::error::{Error, Result};
use crate::kernels::{cross_gram, gram_with, GramMatrix, KernelSpec, PairOptions};

/// Relative eigenvalue cutoff of the minimum-norm pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Diagonal jitter, relative to `tr(K)/n`, added when a factorization fails.
pub const JITTER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SolveMethod {
    Cholesky,
    /// Factorized only after adding `jitter` to the diagonal.
    JitteredCholesky { jitter: f64 },
    /// Minimum-norm solution keeping `rank` eigen-directions.
    PseudoInverse { rank: usize, cutoff: f64 },
}

/// Arithmetic used for the smoother matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    Double,
    /// Double-double Gram assembly and Cholesky solve; network kernels only.
    /// Needed for minimum-norm fits whose Gram matrix is singular to `f64`.
    Extended,
}

enum Factor {
    Chol(Cholesky<f64, Dyn>),
    Pinv {
        vecs: DMatrix<f64>,
        inv: DVector<f64>,
    },
}

/// A factorized `K + n gamma I`.
pub struct RegularizedSystem {
    n: usize,
    method: SolveMethod,
    factor: Factor,
}

impl RegularizedSystem {
    /// `gamma = 0` gives the minimum-norm pseudo-inverse, `gamma > 0` a
    /// Cholesky factorization (jittered once on failure).
    pub fn new(g: &GramMatrix, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        let n = g.n();
        if n == 0 {
            return Err(Error::InvalidParameter("empty Gram matrix".into()));
        }
        if gamma == 0.0 {
            return Ok(Self::pinv(g));
        }
        let mut a = g.entries().clone();
        for i in 0..n {
            a[(i, i)] += n as f64 * gamma;
        }
        if let Some(c) = Cholesky::new(a.clone()) {
            return Ok(Self {
                n,
                method: SolveMethod::Cholesky,
                factor: Factor::Chol(c),
            });
        }
        let jitter = JITTER * g.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
        warn!("Cholesky failed at n={n}, gamma={gamma:e}; retrying with jitter {jitter:e}");
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        match Cholesky::new(a) {
            Some(c) => Ok(Self {
                n,
                method: SolveMethod::JitteredCholesky { jitter },
                factor: Factor::Chol(c),
            }),
            None => Err(Error::Solve(format!(
                "K + n gamma I is not positive definite even with jitter {jitter:e}"
            ))),
        }
    }

    fn pinv(g: &GramMatrix) -> Self {
        let eig = SymmetricEigen::new(g.entries().clone());
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
        let cutoff = PINV_CUTOFF * top;
        let inv = eig.eigenvalues.map(|v| if v > cutoff { 1.0 / v } else { 0.0 });
        let rank = inv.iter().filter(|v| **v != 0.0).count();
        if rank < g.n() {
            info!("pseudo-inverse keeps {rank} of {} directions (cutoff {cutoff:e})", g.n());
        }
        Self {
            n: g.n(),
            method: SolveMethod::PseudoInverse { rank, cutoff },
            factor: Factor::Pinv {
                vecs: eig.eigenvectors,
                inv,
            },
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.nrows(),
            });
        }
        Ok(match &self.factor {
            Factor::Chol(c) => c.solve(b),
            Factor::Pinv { vecs, inv } => {
                let mut proj = vecs.tr_mul(b);
                for (mut row, s) in proj.row_iter_mut().zip(inv.iter()) {
                    row *= *s;
                }
                vecs * proj
            }
        })
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.solve_matrix(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        Ok(m.column(0).into_owned())
    }
}

/// `f(x) = sum_i a_i K(x, x_i)` with `a = (K + n gamma I)^{-1} y`.
#[derive(Debug, Clone)]
pub struct FittedPredictor {
    spec: KernelSpec,
    train: DMatrix<f64>,
    opts: PairOptions,
    gamma: f64,
    dual: DVector<f64>,
    method: SolveMethod,
}

impl FittedPredictor {
    pub fn fit(
        spec: &KernelSpec,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        gamma: f64,
        opts: PairOptions,
    ) -> Result<Self> {
        let g = gram_with(spec, x, opts)?;
        Self::from_gram(spec, x, &g, y, gamma, opts)
    }

    /// Fit from a precomputed Gram matrix of `spec` on the rows of `x`.
    pub fn from_gram(
        spec: &KernelSpec,
        x: &DMatrix<f64>,
        g: &GramMatrix,
        y: &DVector<f64>,
        gamma: f64,
        opts: PairOptions,
    ) -> Result<Self> {
        if g.n() != x.nrows() || y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: if g.n() != x.nrows() { g.n() } else { y.len() },
            });
        }
        let sys = RegularizedSystem::new(g, gamma)?;
        Ok(Self {
            spec: spec.clone(),
            train: x.clone(),
            opts,
            gamma,
            dual: sys.solve(y)?,
            method: sys.method(),
        })
    }

    pub fn dual(&self) -> &DVector<f64> {
        &self.dual
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    /// Predictions at the rows of `test`.
    pub fn predict(&self, test: &DMatrix<f64>) -> Result<DVector<f64>> {
        let kt = cross_gram(&self.spec, test, &self.train, self.opts)?;
        Ok(kt * &self.dual)
    }
}

/// The linear map from training labels to test predictions,
/// `W = (K + n gamma I)^{-1} K(X, T)`, so that predictions are `W^T y`.
///
/// Everything downstream stays in this dual form; the feature-space
/// estimator is never built.
#[derive(Debug, Clone)]
pub struct Smoother {
    w: DMatrix<f64>,
    gamma: f64,
    method: Option<SolveMethod>,
}

impl Smoother {
    pub fn new(
        spec: &KernelSpec,
        train: &DMatrix<f64>,
        test: &DMatrix<f64>,
        gamma: f64,
        opts: PairOptions,
        precision: Precision,
    ) -> Result<Self> {
        if train.ncols() != test.ncols() {
            return Err(Error::DimensionMismatch {
                expected: train.ncols(),
                got: test.ncols(),
            });
        }
        match precision {
            Precision::Double => {
                let g = gram_with(spec, train, opts)?;
                let kt = cross_gram(spec, train, test, opts)?;
                Self::from_parts(&g, &kt, gamma)
            }
            Precision::Extended => {
                if !(gamma >= 0.0) || !gamma.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "gamma must be finite and >= 0, got {gamma}"
                    )));
                }
                let ridge = train.nrows() as f64 * gamma;
                Ok(Self {
                    w: smoother_dd(spec, train, test, ridge)?,
                    gamma,
                    method: None,
                })
            }
        }
    }

    /// From a training Gram matrix and the train-by-test cross matrix.
    pub fn from_parts(g: &GramMatrix, kt: &DMatrix<f64>, gamma: f64) -> Result<Self> {
        let sys = RegularizedSystem::new(g, gamma)?;
        Ok(Self {
            w: sys.solve_matrix(kt)?,
            gamma,
            method: Some(sys.method()),
        })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn m(&self) -> usize {
        self.w.ncols()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `None` for the extended-precision path.
    pub fn method(&self) -> Option<SolveMethod> {
        self.method
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn predict(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: y.len(),
            });
        }
        Ok(self.w.tr_mul(y))
    }
}
