//! Mercer eigenvalue profiles.
//!
//! Two storage modes: an explicit nonincreasing list (optionally continued by
//! an analytic tail), and per-degree blocks `(sigma_hat_l, N(d, l))` for
//! dot-product kernels on the sphere. Per-degree profiles are queried by block
//! arithmetic and never expanded into one entry per eigenfunction.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parametric eigenvalue decays with closed-form tail integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decay", rename_all = "snake_case")]
pub enum Decay {
    /// `i^{-1-a}`
    Polynomial { a: f64 },
    /// `e^{-a i}`
    Exponential { a: f64 },
    /// `1 / (i log^{1+a} i)`, with the undefined first value replaced by the second.
    LogPolynomial { a: f64 },
}

impl Decay {
    pub fn rate(&self) -> f64 {
        match *self {
            Self::Polynomial { a } | Self::Exponential { a } | Self::LogPolynomial { a } => a,
        }
    }

    fn validate(&self) -> Result<()> {
        let a = self.rate();
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "decay rate must be > 0, got {a}"
            )));
        }
        Ok(())
    }

    /// `lambda_i` for a 1-based index.
    pub fn value(&self, i: usize) -> f64 {
        match *self {
            Self::LogPolynomial { .. } if i < 2 => self.f(2.0),
            _ => self.f(i as f64),
        }
    }

    fn f(&self, x: f64) -> f64 {
        match *self {
            Self::Polynomial { a } => x.powf(-1.0 - a),
            Self::Exponential { a } => (-a * x).exp(),
            Self::LogPolynomial { a } => 1.0 / (x * x.ln().powf(1.0 + a)),
        }
    }

    fn df(&self, x: f64) -> f64 {
        match *self {
            Self::Polynomial { a } => -(1.0 + a) * x.powf(-2.0 - a),
            Self::Exponential { a } => -a * (-a * x).exp(),
            Self::LogPolynomial { a } => -self.f(x) * (1.0 + (1.0 + a) / x.ln()) / x,
        }
    }

    /// `int_x^inf f`.
    pub fn tail_integral(&self, x: f64) -> f64 {
        match *self {
            Self::Polynomial { a } => x.powf(-a) / a,
            Self::Exponential { a } => (-a * x).exp() / a,
            Self::LogPolynomial { a } => 1.0 / (a * x.ln().powf(a)),
        }
    }

    /// `int_x^inf f^2`.
    pub fn tail_integral_sq(&self, x: f64) -> f64 {
        match *self {
            Self::Polynomial { a } => x.powf(-1.0 - 2.0 * a) / (1.0 + 2.0 * a),
            Self::Exponential { a } => (-2.0 * a * x).exp() / (2.0 * a),
            Self::LogPolynomial { a } => {
                // x = e^t turns the integral into int_L^inf e^{-t} t^{-m} dt.
                let m = 2.0 + 2.0 * a;
                let lo = x.ln();
                simpson(|t| (-t).exp() * t.powf(-m), lo, lo + 60.0, 6000)
            }
        }
    }

    /// `sum_{i > p} lambda_i`, for `p >= 2`.
    pub fn tail_sum(&self, p: usize) -> f64 {
        let x = p as f64;
        match *self {
            Self::Exponential { a } => (-a * (x + 1.0)).exp() / (1.0 - (-a).exp()),
            _ => self.tail_integral(x) - 0.5 * self.f(x) - self.df(x) / 12.0,
        }
    }

    /// `sum_{i > p} lambda_i^2`, for `p >= 2`.
    pub fn tail_sum_sq(&self, p: usize) -> f64 {
        let x = p as f64;
        match *self {
            Self::Exponential { a } => (-2.0 * a * (x + 1.0)).exp() / (1.0 - (-2.0 * a).exp()),
            _ => {
                let f = self.f(x);
                self.tail_integral_sq(x) - 0.5 * f * f - 2.0 * f * self.df(x) / 12.0
            }
        }
    }

    /// The integral-test bracket for `r_k` of this decay with equal envelope
    /// constants.
    pub fn rank_bracket(&self, k: usize) -> (f64, f64) {
        let a = self.rate();
        let k1 = k as f64 + 1.0;
        let lo = match self {
            Self::LogPolynomial { .. } => k1 * k1.ln() / a,
            Self::Polynomial { .. } => k1 / a,
            Self::Exponential { .. } => 1.0 / a,
        };
        (lo, 1.0 + lo)
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Analytic continuation `scale * decay(i)` for indices past the stored list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub decay: Decay,
    pub scale: f64,
}

/// Nonincreasing eigenvalue list, optionally continued analytically.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitProfile {
    values: Vec<f64>,
    tail: Option<TailModel>,
    // suffix[k] = sum_{i > k} values_i (1-based), suffix_sq likewise
    suffix: Vec<f64>,
    suffix_sq: Vec<f64>,
}

impl ExplicitProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_tail(values, None)
    }

    pub fn with_tail(values: Vec<f64>, tail: Option<TailModel>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "eigenvalue {} = {v} must be finite and >= 0",
                i + 1
            )));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter(format!(
                "eigenvalues must be nonincreasing (index {})",
                i + 2
            )));
        }
        if let Some(t) = &tail {
            t.decay.validate()?;
            if values.len() < 2 {
                return Err(Error::InvalidParameter(
                    "an analytic tail needs at least two explicit eigenvalues".into(),
                ));
            }
        }
        let p = values.len();
        let mut suffix = vec![0.0; p + 1];
        let mut suffix_sq = vec![0.0; p + 1];
        for i in (0..p).rev() {
            suffix[i] = suffix[i + 1] + values[i];
            suffix_sq[i] = suffix_sq[i + 1] + values[i] * values[i];
        }
        Ok(Self {
            values,
            tail,
            suffix,
            suffix_sq,
        })
    }

    /// `lambda_i = decay(i)` for `i <= p_max`, continued analytically when
    /// `analytic_tail` is set.
    pub fn parametric(decay: Decay, p_max: usize, analytic_tail: bool) -> Result<Self> {
        decay.validate()?;
        let values = (1..=p_max).map(|i| decay.value(i)).collect();
        let tail = analytic_tail.then_some(TailModel { decay, scale: 1.0 });
        Self::with_tail(values, tail)
    }

    /// `lambda_i = ratio^i`, `i = 1..=p`.
    pub fn geometric(ratio: f64, p: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "geometric ratio must lie in (0, 1), got {ratio}"
            )));
        }
        Self::new((1..=p).map(|i| ratio.powi(i as i32)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_model(&self) -> Option<&TailModel> {
        self.tail.as_ref()
    }

    pub fn p_max(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        if i == 0 {
            return f64::NAN;
        }
        match (self.values.get(i - 1), &self.tail) {
            (Some(v), _) => *v,
            (None, Some(t)) => t.scale * t.decay.value(i),
            (None, None) => 0.0,
        }
    }

    pub fn tail_trace(&self, k: usize) -> f64 {
        let model = |p: usize| self.tail.map_or(0.0, |t| t.scale * t.decay.tail_sum(p));
        match self.suffix.get(k) {
            Some(s) => s + model(self.p_max()),
            None => model(k),
        }
    }

    pub fn tail_trace_sq(&self, k: usize) -> f64 {
        let model = |p: usize| {
            self.tail
                .map_or(0.0, |t| t.scale * t.scale * t.decay.tail_sum_sq(p))
        };
        match self.suffix_sq.get(k) {
            Some(s) => s + model(self.p_max()),
            None => model(k),
        }
    }
}

/// One harmonic degree of a per-degree profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeBlock {
    pub degree: usize,
    /// Total eigenvalue mass of the degree.
    pub sigma_hat: f64,
    pub multiplicity: u128,
}

impl DegreeBlock {
    /// The per-eigenfunction eigenvalue `sigma_hat / N(d, l)`.
    pub fn sigma(&self) -> f64 {
        self.sigma_hat / self.multiplicity as f64
    }
}

/// Per-degree Mercer spectrum of a dot-product kernel on `S^{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    d: usize,
    blocks: Vec<DegreeBlock>,
    total: f64,
    // indices into `blocks` of the nonzero degrees, by decreasing sigma
    order: Vec<usize>,
    // cumulative multiplicities along `order`
    cum: Vec<u128>,
}

impl DegreeProfile {
    /// `blocks[l]` must describe degree `l`; `total` is `h(1)`, the full trace.
    pub fn new(d: usize, blocks: Vec<DegreeBlock>, total: f64) -> Result<Self> {
        for (l, b) in blocks.iter().enumerate() {
            if b.degree != l {
                return Err(Error::InvalidParameter(format!(
                    "degree block {l} labelled {}",
                    b.degree
                )));
            }
            if !(b.sigma_hat >= 0.0 && b.sigma_hat.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "sigma_hat_{l} = {} must be finite and >= 0",
                    b.sigma_hat
                )));
            }
        }
        let mut order: Vec<usize> = (0..blocks.len())
            .filter(|&l| blocks[l].sigma_hat > 0.0)
            .collect();
        // Stable sort: ties keep increasing degree order.
        order.sort_by(|&a, &b| blocks[b].sigma().total_cmp(&blocks[a].sigma()));
        let mut cum = Vec::with_capacity(order.len());
        let mut acc: u128 = 0;
        for &l in &order {
            acc = acc
                .checked_add(blocks[l].multiplicity)
                .ok_or_else(|| Error::Overflow("cumulative multiplicity".into()))?;
            cum.push(acc);
        }
        Ok(Self {
            d,
            blocks,
            total,
            order,
            cum,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn blocks(&self) -> &[DegreeBlock] {
        &self.blocks
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn resolved_mass(&self) -> f64 {
        self.blocks.iter().map(|b| b.sigma_hat).sum()
    }

    /// `h(1)` minus the mass of the computed degrees.
    pub fn residual(&self) -> f64 {
        self.total - self.resolved_mass()
    }

    /// Nonzero degrees in nonincreasing eigenvalue order.
    pub fn ordered_degrees(&self) -> Vec<usize> {
        self.order.clone()
    }

    /// Cutoffs `k` at which the ordered spectrum splits between whole degrees.
    pub fn boundaries(&self) -> Vec<u128> {
        std::iter::once(0).chain(self.cum.iter().copied()).collect()
    }

    /// Number of resolved nonzero eigenvalues.
    pub fn count(&self) -> u128 {
        self.cum.last().copied().unwrap_or(0)
    }

    /// Degrees making up the first `k` eigenvalues; `k` must be a boundary.
    pub fn head_degrees(&self, k: u128) -> Result<Vec<usize>> {
        if k == 0 {
            return Ok(Vec::new());
        }
        match self.cum.iter().position(|&c| c == k) {
            Some(j) => Ok(self.order[..=j].to_vec()),
            None => Err(Error::NotDegreeBoundary {
                k: k as usize,
                boundaries: self.boundaries().iter().map(|&b| b as usize).collect(),
            }),
        }
    }

    // (position in `order`, eigenvalues of that block before index k)
    fn locate(&self, k: u128) -> Option<(usize, u128)> {
        let j = self.cum.partition_point(|&c| c <= k);
        if j == self.cum.len() {
            return None;
        }
        let before = if j == 0 { 0 } else { self.cum[j - 1] };
        Some((j, k - before))
    }

    /// `lambda_i`, 1-based; zero past the resolved spectrum.
    pub fn eigenvalue(&self, i: u128) -> f64 {
        if i == 0 {
            return f64::NAN;
        }
        self.locate(i - 1)
            .map_or(0.0, |(j, _)| self.blocks[self.order[j]].sigma())
    }

    /// Sum of the first `k` eigenvalues.
    pub fn head_trace(&self, k: u128) -> f64 {
        match self.locate(k) {
            None => self.resolved_mass(),
            Some((j, partial)) => {
                let full: f64 = self.order[..j].iter().map(|&l| self.blocks[l].sigma_hat).sum();
                full + partial as f64 * self.blocks[self.order[j]].sigma()
            }
        }
    }

    /// Trace past `k`, including the unresolved residual.
    pub fn tail_trace(&self, k: u128) -> f64 {
        (self.total - self.head_trace(k)).max(0.0)
    }

    /// Sum of squared eigenvalues past `k` over the resolved degrees.
    pub fn tail_trace_sq(&self, k: u128) -> f64 {
        match self.locate(k) {
            None => 0.0,
            Some((j, partial)) => {
                let b = &self.blocks[self.order[j]];
                let s = b.sigma();
                let first = (b.multiplicity - partial) as f64 * s * s;
                first
                    + self.order[j + 1..]
                        .iter()
                        .map(|&l| self.blocks[l].sigma_hat * self.blocks[l].sigma())
                        .sum::<f64>()
            }
        }
    }

    /// Expands into an explicit sorted list; refuses more than `limit` entries.
    pub fn flatten(&self, limit: usize) -> Result<Vec<f64>> {
        if self.count() > limit as u128 {
            return Err(Error::InvalidParameter(format!(
                "flattening {} eigenvalues exceeds the limit {limit}",
                self.count()
            )));
        }
        let mut out = Vec::with_capacity(self.count() as usize);
        for &l in &self.order {
            let b = &self.blocks[l];
            out.extend(std::iter::repeat_n(b.sigma(), b.multiplicity as usize));
        }
        Ok(out)
    }
}

/// Either storage mode.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralProfile {
    Explicit(ExplicitProfile),
    PerDegree(DegreeProfile),
}

impl From<ExplicitProfile> for SpectralProfile {
    fn from(p: ExplicitProfile) -> Self {
        Self::Explicit(p)
    }
}

impl From<DegreeProfile> for SpectralProfile {
    fn from(p: DegreeProfile) -> Self {
        Self::PerDegree(p)
    }
}

impl SpectralProfile {
    /// `lambda_i`, 1-based.
    pub fn eigenvalue(&self, i: usize) -> f64 {
        match self {
            Self::Explicit(p) => p.eigenvalue(i),
            Self::PerDegree(p) => p.eigenvalue(i as u128),
        }
    }

    pub fn trace(&self) -> f64 {
        self.tail_trace(0)
    }

    /// `tr(Sigma_{>k})`.
    pub fn tail_trace(&self, k: usize) -> f64 {
        match self {
            Self::Explicit(p) => p.tail_trace(k),
            Self::PerDegree(p) => p.tail_trace(k as u128),
        }
    }

    /// `tr(Sigma_{>k}^2)`.
    pub fn tail_trace_sq(&self, k: usize) -> f64 {
        match self {
            Self::Explicit(p) => p.tail_trace_sq(k),
            Self::PerDegree(p) => p.tail_trace_sq(k as u128),
        }
    }

    /// `‖Sigma_{>k}‖ = lambda_{k+1}`.
    pub fn tail_norm(&self, k: usize) -> f64 {
        self.eigenvalue(k + 1)
    }

    pub fn as_degree(&self) -> Option<&DegreeProfile> {
        match self {
            Self::PerDegree(p) => Some(p),
            Self::Explicit(_) => None,
        }
    }

    /// CSV text: `index,lambda` rows for explicit profiles, or
    /// `degree,sigma_hat,multiplicity` rows per degree.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match self {
            Self::Explicit(p) => {
                s.push_str("index,lambda\n");
                for (i, v) in p.values().iter().enumerate() {
                    let _ = writeln!(s, "{},{:.16e}", i + 1, v);
                }
            }
            Self::PerDegree(p) => {
                s.push_str("degree,sigma_hat,multiplicity\n");
                for b in p.blocks() {
                    let _ = writeln!(s, "{},{:.16e},{}", b.degree, b.sigma_hat, b.multiplicity);
                }
            }
        }
        s
    }
}
