//! Reproduction of the two variance figures and the Hermite moment table.

use anyhow::{bail, Result};
use krr_core::kernels::{KernelSpec, PairOptions};
use krr_core::krr::{variance_closed_form, variance_monte_carlo, NoiseFamily, Precision, Smoother, VarianceMode};
use krr_core::rng::{stream_rng, Stream};
use krr_core::sphere::{cumulative_dim, sample_disk};
use krr_core::spectrum::hermite_moment;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::digest;
use crate::run::{test_points, train_points};
use crate::table::{num, Table};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// Linear-interpolation quantile.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = q * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap 95% interval of `stat` over resamples of `v`.
pub fn bootstrap_ci(v: &[f64], stat: impl Fn(&[f64]) -> f64, seed: u64) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = stream_rng(seed, Stream::Bootstrap, v.len() as u64);
    let mut buf = vec![0.0; v.len()];
    let stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = v[rng.random_range(0..v.len())];
            }
            stat(&buf)
        })
        .collect();
    (quantile(&stats, 0.025), quantile(&stats, 0.975))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fig1Kernel {
    /// `(1 + <x, x'>/d)^3`
    Poly3,
    /// Depth-3 NTK.
    Ntk3,
}

impl Fig1Kernel {
    pub fn spec(&self, d: usize) -> KernelSpec {
        match self {
            Fig1Kernel::Poly3 => KernelSpec::polynomial(3, 1.0 / d as f64, 1.0).expect("valid"),
            Fig1Kernel::Ntk3 => KernelSpec::ntk(3).expect("valid"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Fig1Kernel::Poly3 => "poly3",
            Fig1Kernel::Ntk3 => "ntk3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NGrid {
    Explicit(Vec<usize>),
    /// `points` log-spaced sizes from just below `N(d, <=1)` to just past
    /// `N(d, <=2)`, plus both boundaries.
    Boundary { points: usize },
}

impl NGrid {
    pub fn powers_of_two() -> Self {
        NGrid::Explicit((3..=11).map(|e| 1 << e).collect())
    }

    pub fn sizes(&self, d: usize) -> Result<Vec<usize>> {
        let mut v = match self {
            NGrid::Explicit(v) => v.clone(),
            NGrid::Boundary { points } => {
                let lo = cumulative_dim(d, 1)? as f64;
                let hi = cumulative_dim(d, 2)? as f64;
                let (a, b) = ((0.75 * lo).floor().max(2.0), (1.1 * hi).ceil());
                let mut v: Vec<usize> = (0..*points)
                    .map(|j| (a * (b / a).powf(j as f64 / (*points - 1).max(1) as f64)).round() as usize)
                    .collect();
                v.extend([lo as usize, hi as usize]);
                v
            }
        };
        v.sort_unstable();
        v.dedup();
        if v.is_empty() || v[0] == 0 {
            bail!("n grid must hold positive sizes");
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1Options {
    pub kernel: Fig1Kernel,
    pub dims: Vec<usize>,
    pub grid: NGrid,
    pub seeds: Vec<u64>,
    pub m_test: usize,
    pub sigma: f64,
    pub mode: VarianceMode,
}

impl Default for Fig1Options {
    fn default() -> Self {
        Self {
            kernel: Fig1Kernel::Poly3,
            dims: vec![8, 16, 32],
            grid: NGrid::powers_of_two(),
            seeds: (0..20).collect(),
            m_test: 1000,
            sigma: 1.0,
            mode: VarianceMode::ClosedForm,
        }
    }
}

/// One seed's variance at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FigPoint {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub variance: f64,
    pub stderr: f64,
}

/// Statistics over seeds at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FigSummary {
    pub d: usize,
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    /// Bootstrap 95% interval of the mean.
    pub mean_lo: f64,
    pub mean_hi: f64,
    /// 2.5% and 97.5% quantiles over seeds.
    pub range_lo: f64,
    pub range_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureResult {
    pub hash: String,
    pub points: Vec<FigPoint>,
    pub summary: Vec<FigSummary>,
}

fn summarize(points: &[FigPoint], seed: u64) -> Vec<FigSummary> {
    let mut keys: Vec<(usize, usize)> = points.iter().map(|p| (p.d, p.n)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|(d, n)| {
            let v: Vec<f64> = points
                .iter()
                .filter(|p| p.d == d && p.n == n)
                .map(|p| p.variance)
                .collect();
            let (mean_lo, mean_hi) = bootstrap_ci(&v, mean, seed ^ ((d as u64) << 32 | n as u64));
            FigSummary {
                d,
                n,
                median: median(&v),
                mean: mean(&v),
                mean_lo,
                mean_hi,
                range_lo: quantile(&v, 0.025),
                range_hi: quantile(&v, 0.975),
            }
        })
        .collect()
}

fn variance_of(
    s: &Smoother,
    sigma: f64,
    mode: VarianceMode,
    seed: u64,
    n: usize,
) -> Result<(f64, f64)> {
    let e = match mode {
        VarianceMode::ClosedForm => variance_closed_form(s, sigma),
        VarianceMode::MonteCarlo { trials } => {
            let mut rng = stream_rng(seed, Stream::Noise, n as u64);
            variance_monte_carlo(s, sigma, trials, NoiseFamily::Gaussian, &mut rng)?
        }
    };
    Ok((e.value, e.stderr))
}

/// Minimum-norm variance curves against `n` for each input dimension.
pub fn reproduce_fig1(opts: &Fig1Options) -> Result<FigureResult> {
    if opts.dims.iter().any(|&d| d < 3) || opts.seeds.is_empty() {
        bail!("fig1 needs d >= 3 and at least one seed");
    }
    let mut cells = Vec::new();
    for &d in &opts.dims {
        for n in opts.grid.sizes(d)? {
            for &seed in &opts.seeds {
                cells.push((d, n, seed));
            }
        }
    }
    let points = cells
        .par_iter()
        .map(|&(d, n, seed)| -> Result<FigPoint> {
            let spec = opts.kernel.spec(d);
            let x = train_points(seed, n, d)?;
            let t = test_points(seed, n, opts.m_test, d)?;
            let s = Smoother::new(&spec, &x, &t, 0.0, PairOptions::default(), Precision::Double)?;
            let (variance, stderr) = variance_of(&s, opts.sigma, opts.mode, seed, n)?;
            Ok(FigPoint { d, n, seed, variance, stderr })
        })
        .collect::<Result<Vec<_>>>()?;
    let hash = digest(&serde_json::to_string(opts)?)[..16].to_string();
    let summary = summarize(&points, 0);
    Ok(FigureResult { hash, points, summary })
}

/// The first valley (smallest median strictly between the degree-1 and
/// degree-2 boundaries) and the highest interior local maximum of the median
/// curve on `[N(d,<=1), N(d,<=2)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentShape {
    pub valley_n: usize,
    pub valley: f64,
    pub peak: Option<(usize, f64)>,
}

pub fn descent_shape(summary: &[FigSummary], d: usize) -> Result<DescentShape> {
    let lo = cumulative_dim(d, 1)? as usize;
    let hi = cumulative_dim(d, 2)? as usize;
    let curve: Vec<(usize, f64)> = summary
        .iter()
        .filter(|s| s.d == d)
        .map(|s| (s.n, s.median))
        .collect();
    let (valley_n, valley) = curve
        .iter()
        .filter(|(n, _)| *n > lo && *n < hi)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .copied()
        .ok_or_else(|| anyhow::anyhow!("no grid point between {lo} and {hi}"))?;
    let peak = curve
        .windows(3)
        .filter(|w| w[1].0 >= lo && w[1].0 <= hi && w[1].1 > w[0].1 && w[1].1 > w[2].1)
        .map(|w| w[1])
        .max_by(|a, b| a.1.total_cmp(&b.1));
    Ok(DescentShape { valley_n, valley, peak })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Options {
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub m_test: usize,
    pub sigma: f64,
    pub precision: Precision,
}

impl Default for Fig2Options {
    fn default() -> Self {
        Self {
            n_grid: vec![64, 128, 256, 512],
            seeds: (0..20).collect(),
            m_test: 500,
            sigma: 1.0,
            precision: Precision::Extended,
        }
    }
}

/// Minimum-norm variance of the depth-3 GPK on the unit disk, with the
/// kernel extended off the sphere by `‖x‖ ‖y‖ h(cos)`.
pub fn reproduce_fig2(opts: &Fig2Options) -> Result<FigureResult> {
    if opts.seeds.is_empty() {
        bail!("fig2 needs at least one seed");
    }
    let spec = KernelSpec::gpk(3)?;
    let cells: Vec<(usize, u64)> = opts
        .n_grid
        .iter()
        .flat_map(|&n| opts.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let points = cells
        .par_iter()
        .map(|&(n, seed)| -> Result<FigPoint> {
            let x = sample_disk(n, &mut stream_rng(seed, Stream::Train, n as u64));
            let t = sample_disk(opts.m_test, &mut stream_rng(seed, Stream::Test, n as u64));
            let s = Smoother::new(&spec, &x, &t, 0.0, PairOptions { zonal: true }, opts.precision)?;
            let (variance, stderr) = variance_of(&s, opts.sigma, VarianceMode::ClosedForm, seed, n)?;
            Ok(FigPoint { d: 2, n, seed, variance, stderr })
        })
        .collect::<Result<Vec<_>>>()?;
    let hash = digest(&serde_json::to_string(opts)?)[..16].to_string();
    let summary = summarize(&points, 0);
    Ok(FigureResult { hash, points, summary })
}

pub const FIG_POINT_COLUMNS: &[&str] = &["config_hash", "d", "n", "seed", "variance", "variance_se"];
pub const FIG_SUMMARY_COLUMNS: &[&str] = &[
    "config_hash", "d", "n", "median", "mean", "mean_ci_lo", "mean_ci_hi", "range_lo", "range_hi",
];

impl FigureResult {
    pub fn points_table(&self) -> Table {
        let mut t = Table::new(FIG_POINT_COLUMNS);
        for p in &self.points {
            t.push(
                vec![p.d as u64, p.n as u64, p.seed],
                vec![
                    self.hash.clone(),
                    p.d.to_string(),
                    p.n.to_string(),
                    p.seed.to_string(),
                    num(p.variance),
                    num(p.stderr),
                ],
            );
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(FIG_SUMMARY_COLUMNS);
        for s in &self.summary {
            t.push(
                vec![s.d as u64, s.n as u64],
                vec![
                    self.hash.clone(),
                    s.d.to_string(),
                    s.n.to_string(),
                    num(s.median),
                    num(s.mean),
                    num(s.mean_lo),
                    num(s.mean_hi),
                    num(s.range_lo),
                    num(s.range_hi),
                ],
            );
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteOptions {
    pub indices: Vec<usize>,
    pub p: f64,
    pub samples: usize,
    pub seeds: Vec<u64>,
}

impl Default for HermiteOptions {
    fn default() -> Self {
        Self {
            indices: vec![4, 8, 12],
            p: 4.0,
            samples: 100_000,
            seeds: (0..10).collect(),
        }
    }
}

pub const HERMITE_COLUMNS: &[&str] = &["config_hash", "i", "seed", "moment", "moment_se"];

/// `(E|psi_i|^p)^{1/p}` per index and seed, plus the median over seeds.
pub fn hermite_table(opts: &HermiteOptions) -> Result<(Table, Vec<(usize, f64)>)> {
    let hash = digest(&serde_json::to_string(opts)?)[..16].to_string();
    let cells: Vec<(usize, u64)> = opts
        .indices
        .iter()
        .flat_map(|&i| opts.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let est = cells
        .par_iter()
        .map(|&(i, seed)| Ok((i, seed, hermite_moment(i, opts.p, opts.samples, seed)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(HERMITE_COLUMNS);
    for (i, seed, e) in &est {
        t.push(
            vec![*i as u64, *seed],
            vec![hash.clone(), i.to_string(), seed.to_string(), num(e.value), num(e.stderr)],
        );
    }
    let medians = opts
        .indices
        .iter()
        .map(|&i| {
            let v: Vec<f64> = est.iter().filter(|e| e.0 == i).map(|e| e.2.value).collect();
            (i, median(&v))
        })
        .collect();
    Ok((t, medians))
}
