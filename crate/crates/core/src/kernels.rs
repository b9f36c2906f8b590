//! Kernel functions and Gram matrix assembly.
//!
//! Dot-product families are evaluated through their profile `h(u)` on
//! `u = <x, x'>` for unit vectors. The arc-cosine recursions behind the
//! infinite-width network kernels (GPK and NTK) use
//!
//! ```text
//! kappa_0(u) = (pi - arccos u) / pi
//! kappa_1(u) = (u (pi - arccos u) + sqrt(1 - u^2)) / pi
//! ```
//!
//! with `K_GPK^(L) = kappa_1(K_GPK^(L-1))`, `K^(0) = u`, and
//! `Theta^(L) = Theta^(L-1) kappa_0(K_GPK^(L-1)) + K_GPK^(L)`, `Theta^(0) = u`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs within this distance outside `[-1, 1]` are clamped onto the interval.
pub const CLAMP_BAND: f64 = 1e-12;

/// Tolerance on `|‖x‖ - 1|` for dot-product kernels without zonal evaluation.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Closed-form description of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(-bandwidth * ‖x - x'‖²)`
    Rbf { bandwidth: f64 },
    /// `exp(-scale * ‖x - x'‖)`
    Laplace { scale: f64 },
    /// `(offset + scale * u)^degree`
    Polynomial { degree: u32, scale: f64, offset: f64 },
    /// `sum_i coefficients[i] * u^i`
    DotProductSeries { coefficients: Vec<f64> },
    /// Gaussian-process (NNGP) kernel of a fully-connected ReLU network.
    Gpk { depth: u32 },
    /// Neural tangent kernel of a fully-connected ReLU network without biases.
    Ntk { depth: u32 },
}

impl KernelSpec {
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        Self::Rbf { bandwidth }.validated()
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        Self::Laplace { scale }.validated()
    }

    pub fn polynomial(degree: u32, scale: f64, offset: f64) -> Result<Self> {
        Self::Polynomial {
            degree,
            scale,
            offset,
        }
        .validated()
    }

    pub fn series(coefficients: Vec<f64>) -> Result<Self> {
        Self::DotProductSeries { coefficients }.validated()
    }

    pub fn gpk(depth: u32) -> Result<Self> {
        Self::Gpk { depth }.validated()
    }

    pub fn ntk(depth: u32) -> Result<Self> {
        Self::Ntk { depth }.validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Checks the parameter invariants of the family.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Rbf { bandwidth } if !(*bandwidth > 0.0 && bandwidth.is_finite()) => Err(
                Error::InvalidParameter(format!("rbf bandwidth must be > 0, got {bandwidth}")),
            ),
            Self::Laplace { scale } if !(*scale > 0.0 && scale.is_finite()) => Err(
                Error::InvalidParameter(format!("laplace scale must be > 0, got {scale}")),
            ),
            Self::Polynomial { scale, offset, .. } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "polynomial scale must be > 0, got {scale}"
                    )));
                }
                if !(*offset >= 0.0 && offset.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "polynomial offset must be >= 0, got {offset}"
                    )));
                }
                Ok(())
            }
            Self::DotProductSeries { coefficients } => {
                if coefficients.is_empty() {
                    return Err(Error::InvalidParameter(
                        "dot-product series needs at least one coefficient".into(),
                    ));
                }
                match coefficients
                    .iter()
                    .position(|a| !(*a >= 0.0 && a.is_finite()))
                {
                    Some(i) => Err(Error::InvalidParameter(format!(
                        "series coefficient a_{i} = {} must be finite and >= 0",
                        coefficients[i]
                    ))),
                    None => Ok(()),
                }
            }
            Self::Gpk { depth } | Self::Ntk { depth } if *depth < 1 => Err(
                Error::InvalidParameter("network kernel depth must be >= 1".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Rbf { .. } => "rbf",
            Self::Laplace { .. } => "laplace",
            Self::Polynomial { .. } => "polynomial",
            Self::DotProductSeries { .. } => "dot_product_series",
            Self::Gpk { .. } => "gpk",
            Self::Ntk { .. } => "ntk",
        }
    }

    /// True for kernels of the form `h(<x, x'>)`.
    pub fn is_dot_product(&self) -> bool {
        !matches!(self, Self::Rbf { .. } | Self::Laplace { .. })
    }

    /// True when the profile `h` is a polynomial (finitely many nonzero degrees).
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            Self::Polynomial { degree, .. } => Some(*degree as usize),
            Self::DotProductSeries { coefficients } => Some(coefficients.len() - 1),
            _ => None,
        }
    }

    /// `h(1)`, the constant diagonal of the Gram matrix on the sphere.
    pub fn diag_value(&self) -> Result<f64> {
        eval_dot_kernel(self, 1.0)
    }
}

pub fn kappa0(u: f64) -> f64 {
    let u = u.clamp(-1.0, 1.0);
    (PI - u.acos()) / PI
}

pub fn kappa1(u: f64) -> f64 {
    let u = u.clamp(-1.0, 1.0);
    // sqrt((1-u)(1+u)) keeps relative accuracy near the endpoints.
    let s = ((1.0 - u) * (1.0 + u)).max(0.0).sqrt();
    ((u * (PI - u.acos()) + s) / PI).clamp(0.0, 1.0)
}

fn clamp_unit(u: f64) -> Result<f64> {
    if !u.is_finite() || u.abs() > 1.0 + CLAMP_BAND {
        return Err(Error::Domain { value: u });
    }
    Ok(u.clamp(-1.0, 1.0))
}

/// Evaluates `h(u)` for a dot-product kernel.
pub fn eval_dot_kernel(spec: &KernelSpec, u: f64) -> Result<f64> {
    if !spec.is_dot_product() {
        return Err(Error::UnsupportedFamily {
            family: spec.family_name(),
            operation: "dot-product evaluation",
        });
    }
    let u = clamp_unit(u)?;
    Ok(eval_profile(spec, u))
}

// `u` already clamped, `spec` known to be a dot-product family.
fn eval_profile(spec: &KernelSpec, u: f64) -> f64 {
    match spec {
        KernelSpec::Polynomial {
            degree,
            scale,
            offset,
        } => (offset + scale * u).powi(*degree as i32),
        KernelSpec::DotProductSeries { coefficients } => {
            coefficients.iter().rev().fold(0.0, |acc, a| acc * u + a)
        }
        KernelSpec::Gpk { depth } => (0..*depth).fold(u, |g, _| kappa1(g)),
        KernelSpec::Ntk { depth } => {
            let (mut theta, mut g) = (u, u);
            for _ in 0..*depth {
                theta = theta * kappa0(g) + kappa1(g);
                g = kappa1(g);
            }
            theta
        }
        KernelSpec::Rbf { .. } | KernelSpec::Laplace { .. } => unreachable!(),
    }
}

/// Options for point-pair evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOptions {
    /// Evaluate dot-product kernels as `‖x‖‖x'‖ h(<x/‖x‖, x'/‖x'‖>)`.
    pub zonal: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine `<x, y> / (‖x‖ ‖y‖)` exactly as used by pair evaluation.
pub(crate) fn cosine(x: &[f64], y: &[f64]) -> f64 {
    if x == y {
        1.0
    } else {
        dot(x, y) / (dot(x, x).sqrt() * dot(y, y).sqrt())
    }
}

/// Evaluates `K(x, x')`.
pub fn eval_pair(spec: &KernelSpec, x: &[f64], y: &[f64], opts: PairOptions) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    match spec {
        KernelSpec::Rbf { bandwidth } => {
            let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok((-bandwidth * sq).exp())
        }
        KernelSpec::Laplace { scale } => {
            let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok((-scale * sq.sqrt()).exp())
        }
        _ => {
            let nx = dot(x, x).sqrt();
            let ny = dot(y, y).sqrt();
            if !opts.zonal {
                for norm in [nx, ny] {
                    if (norm - 1.0).abs() > UNIT_NORM_TOL {
                        return Err(Error::NonUnitInput { norm });
                    }
                }
            } else if nx == 0.0 || ny == 0.0 {
                return Ok(0.0);
            }
            let u = cosine(x, y);
            let h = eval_profile(spec, clamp_unit(u)?);
            Ok(if opts.zonal { nx * ny * h } else { h })
        }
    }
}

/// Symmetric kernel matrix `K(X, X)` for a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps an existing matrix; it must be square and exactly symmetric.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        let n = entries.nrows();
        for j in 0..n {
            for i in 0..j {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::InvalidParameter(format!(
                        "gram matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Rows of `x` as owned vectors; nalgebra storage is column-major.
pub(crate) fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Assembles `K(X, X)` for points stored as rows of `x`.
pub fn gram(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<GramMatrix> {
    gram_with(spec, x, PairOptions::default())
}

pub fn gram_with(spec: &KernelSpec, x: &DMatrix<f64>, opts: PairOptions) -> Result<GramMatrix> {
    spec.validate()?;
    let rows = rows_of(x);
    let n = rows.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = eval_pair(spec, &rows[i], &rows[j], opts).map_err(|e| Error::GramEntry {
                row: i,
                col: j,
                source: Box::new(e),
            })?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(GramMatrix { entries: k })
}

/// Cross-kernel matrix with entries `K(a_i, b_j)`.
pub fn cross_gram(
    spec: &KernelSpec,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    opts: PairOptions,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let ra = rows_of(a);
    let rb = rows_of(b);
    let mut k = DMatrix::zeros(ra.len(), rb.len());
    for (j, y) in rb.iter().enumerate() {
        for (i, x) in ra.iter().enumerate() {
            k[(i, j)] = eval_pair(spec, x, y, opts).map_err(|e| Error::GramEntry {
                row: i,
                col: j,
                source: Box::new(e),
            })?;
        }
    }
    Ok(k)
}
