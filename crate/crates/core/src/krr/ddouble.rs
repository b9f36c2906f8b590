//! Double-double arithmetic (about 32 significant digits) for minimum-norm
//! solves whose Gram matrices are too ill-conditioned for `f64`.
//!
//! Uses Dekker splitting rather than fused multiply-add so the speed does
//! not depend on the target's FMA support.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1

const PI: Dd = Dd {
    hi: std::f64::consts::PI,
    lo: 1.224_646_799_147_353_2e-16,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    fn renorm(hi: f64, lo: f64) -> Dd {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn mul_f64(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let q = self.hi.sqrt();
        let r = self - Dd::mul_f64(q, q);
        Dd::renorm(q, r.hi / (2.0 * q))
    }

    pub fn clamp_unit(self) -> Dd {
        if self.hi > 1.0 || (self.hi == 1.0 && self.lo > 0.0) {
            Dd::ONE
        } else if self.hi < -1.0 || (self.hi == -1.0 && self.lo < 0.0) {
            -Dd::ONE
        } else {
            self
        }
    }

    // Taylor series, |x| <= pi/4.
    fn sin_cos_small(self) -> (Dd, Dd) {
        let x2 = self * self;
        let (mut s, mut c) = (self, Dd::ONE);
        let (mut ts, mut tc) = (self, Dd::ONE);
        for k in 1..30 {
            let k = k as f64;
            ts = ts * -x2 / ((2.0 * k) * (2.0 * k + 1.0));
            tc = tc * -x2 / ((2.0 * k - 1.0) * (2.0 * k));
            s = s + ts;
            c = c + tc;
            if ts.hi.abs() < 1e-34 && tc.hi.abs() < 1e-34 {
                break;
            }
        }
        (s, c)
    }

    // asin on [0, sqrt(1/2)] by Newton refinement of the f64 value.
    fn asin_small(self) -> Dd {
        let mut t = Dd::from(self.hi.asin());
        for _ in 0..2 {
            let (s, c) = t.sin_cos_small();
            t = t - (s - self) / c;
        }
        t
    }

    /// `arccos` on `[-1, 1]`.
    pub fn acos(self) -> Dd {
        let u = self.clamp_unit();
        if u.hi < 0.0 {
            return PI - (-u).acos();
        }
        let s = ((Dd::ONE - u) / 2.0).sqrt();
        s.asin_small() * 2.0
    }
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::renorm(s, e + f)
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        Dd::renorm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        Dd::renorm(p, e + self.lo * b)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        Dd::renorm(q1, q2) + Dd::from(q3)
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, b: f64) -> Dd {
        self / Dd::from(b)
    }
}

fn dot(a: &[f64], b: &[f64]) -> Dd {
    a.iter()
        .zip(b)
        .fold(Dd::ZERO, |acc, (x, y)| acc + Dd::mul_f64(*x, *y))
}

fn kappa1_dd(u: Dd) -> Dd {
    let s = ((Dd::ONE - u) * (Dd::ONE + u)).sqrt();
    (u * (PI - u.acos()) + s) / PI
}

fn kappa0_dd(u: Dd) -> Dd {
    (PI - u.acos()) / PI
}

/// Network-kernel profile `h(u)` in double-double precision.
pub fn eval_profile_dd(spec: &KernelSpec, u: Dd) -> Result<Dd> {
    let u = u.clamp_unit();
    match spec {
        KernelSpec::Gpk { depth } => Ok((0..*depth).fold(u, |g, _| kappa1_dd(g))),
        KernelSpec::Ntk { depth } => {
            let (mut theta, mut g) = (u, u);
            for _ in 0..*depth {
                theta = theta * kappa0_dd(g) + kappa1_dd(g);
                g = kappa1_dd(g);
            }
            Ok(theta)
        }
        other => Err(Error::UnsupportedFamily {
            family: other.family_name(),
            operation: "extended-precision evaluation",
        }),
    }
}

/// `‖x‖ ‖y‖ h(<x, y> / (‖x‖ ‖y‖))` in double-double precision.
pub fn zonal_pair_dd(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<Dd> {
    let nx = dot(x, x).sqrt();
    let ny = dot(y, y).sqrt();
    if nx.hi == 0.0 || ny.hi == 0.0 {
        return Ok(Dd::ZERO);
    }
    let norms = nx * ny;
    let u = if x == y { Dd::ONE } else { dot(x, y) / norms };
    Ok(norms * eval_profile_dd(spec, u)?)
}

/// Lower Cholesky factor, row-major packed as a dense `n * n` array.
pub struct DdCholesky {
    n: usize,
    l: Vec<Dd>,
}

impl DdCholesky {
    pub fn new(a: &[Dd], n: usize) -> Result<Self> {
        let mut l = vec![Dd::ZERO; n * n];
        for j in 0..n {
            let mut s = a[j * n + j];
            for k in 0..j {
                let v = l[j * n + k];
                s = s - v * v;
            }
            if !(s.hi > 0.0) {
                return Err(Error::Solve(format!(
                    "extended-precision Cholesky pivot {j} is {:e}",
                    s.hi
                )));
            }
            let d = s.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Dd]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            let row = &self.l[i * n..i * n + i];
            for (k, lik) in row.iter().enumerate() {
                s = s - *lik * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s = s - self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

/// `K^{-1} K(X, T)` for a network kernel with zonal evaluation, computed in
/// double-double precision and rounded to `f64`. `ridge` is `n * gamma`.
pub fn smoother_dd(
    spec: &KernelSpec,
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
    ridge: f64,
) -> Result<DMatrix<f64>> {
    let rows = crate::kernels::rows_of(train);
    let trows = crate::kernels::rows_of(test);
    let n = rows.len();
    let mut a = vec![Dd::ZERO; n * n];
    for i in 0..n {
        for j in i..n {
            let v = zonal_pair_dd(spec, &rows[i], &rows[j])?;
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
        a[i * n + i] = a[i * n + i] + Dd::from(ridge);
    }
    let chol = DdCholesky::new(&a, n)?;
    let mut w = DMatrix::zeros(n, trows.len());
    let mut col = vec![Dd::ZERO; n];
    for (t, x) in trows.iter().enumerate() {
        for (i, r) in rows.iter().enumerate() {
            col[i] = zonal_pair_dd(spec, r, x)?;
        }
        chol.solve_in_place(&mut col);
        for (i, v) in col.iter().enumerate() {
            w[(i, t)] = v.to_f64();
        }
    }
    Ok(w)
}
