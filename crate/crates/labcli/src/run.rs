//! Grid runs: one cell per `(seed, n)`, one risk and bounds row per `gamma`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use krr_core::eigenbounds::{
    concentration_from_high, eigenvalue_envelopes, empirical_spectrum, split_gram, EnvelopeParams,
};
use krr_core::kernels::{gram_with, KernelSpec};
use krr_core::krr::{
    bias_from_labels, risk_bounds, variance_closed_form, variance_monte_carlo, BoundInputs, Smoother,
    TargetNorms, VarianceMode,
};
use krr_core::rng::{stream_rng, Stream};
use krr_core::sphere::{cumulative_dim, sample_sphere, sample_sphere_with, synthesize_target, Target};
use krr_core::spectrum::{alpha_beta_degree, mercer_spectrum, min_nodes, DegreeProfile, SpectralProfile};
use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::table::{num, text, Table, BOUNDS_COLUMNS, EIGEN_COLUMNS, ERROR_COLUMNS, RISK_COLUMNS};

/// Which tables a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outputs {
    pub eigen: bool,
    pub risk: bool,
    pub bounds: bool,
}

impl Outputs {
    pub const ALL: Outputs = Outputs {
        eigen: true,
        risk: true,
        bounds: true,
    };
}

/// Shared, seed-independent state of a run.
pub struct RunContext {
    pub cfg: ExperimentConfig,
    pub spec: KernelSpec,
    pub profile: DegreeProfile,
    pub k: u64,
    pub k_prime: u64,
    pub target: Target,
    pub hash: String,
}

impl RunContext {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.kernel_spec()?;
        let profile = mercer_spectrum(&spec, cfg.d, cfg.l_max, min_nodes(cfg.l_max))
            .context("computing the kernel spectrum")?;
        let k = match cfg.k {
            Some(k) => k,
            None => default_cutoff(&profile)?,
        };
        profile
            .head_degrees(k as u128)
            .with_context(|| format!("k = {k}"))?;
        let k_prime = cfg.k_prime.unwrap_or(k);
        if k_prime < k {
            bail!("k' = {k_prime} must be >= k = {k}");
        }
        let target = synthesize_target(&cfg.target_spec()?)?;
        let hash = cfg.short_hash();
        Ok(Self {
            cfg,
            spec,
            profile,
            k,
            k_prime,
            target,
            hash,
        })
    }
}

/// The first degree boundary at or past `N(d, <= 1)`.
pub fn default_cutoff(profile: &DegreeProfile) -> Result<u64> {
    let want = cumulative_dim(profile.dim(), 1)?;
    profile
        .boundaries()
        .into_iter()
        .find(|&b| b >= want)
        .map(|b| b as u64)
        .ok_or_else(|| anyhow!("no degree boundary at or past {want}; raise l_max"))
}

pub fn train_points(seed: u64, n: usize, d: usize) -> Result<DMatrix<f64>> {
    Ok(sample_sphere(n, d, seed)?.x)
}

pub fn test_points(seed: u64, n: usize, m: usize, d: usize) -> Result<DMatrix<f64>> {
    let mut rng = stream_rng(seed, Stream::Test, n as u64);
    Ok(sample_sphere_with(m, d, &mut rng)?)
}

#[derive(Debug, Default)]
pub struct CellOutput {
    pub eigen: Vec<(Vec<u64>, Vec<String>)>,
    pub risk: Vec<(Vec<u64>, Vec<String>)>,
    pub bounds: Vec<(Vec<u64>, Vec<String>)>,
    pub errors: Vec<(Vec<u64>, Vec<String>)>,
}

fn error_row(ctx: &RunContext, table: &str, seed: u64, n: usize, gamma: Option<f64>, e: &anyhow::Error) -> Vec<String> {
    vec![
        ctx.hash.clone(),
        table.into(),
        seed.to_string(),
        n.to_string(),
        gamma.map_or_else(String::new, num),
        text(&format!("{e:#}")),
    ]
}

/// Computes every requested row of one `(seed, n)` cell. Failures become
/// error rows rather than aborting the run.
pub fn run_cell(ctx: &RunContext, seed: u64, n: usize, what: Outputs) -> CellOutput {
    let mut out = CellOutput::default();
    let base_key = vec![seed, n as u64];
    let prepared = (|| -> Result<_> {
        let x = train_points(seed, n, ctx.cfg.d)?;
        let (_, high) = split_gram(&ctx.spec, &x, &ctx.profile, ctx.k as u128)?;
        Ok((x, high))
    })();
    let (x, high) = match prepared {
        Ok(v) => v,
        Err(e) => {
            out.errors.push((base_key, error_row(ctx, "cell", seed, n, None, &e)));
            return out;
        }
    };
    let tail_norm = ctx.profile.eigenvalue(ctx.k as u128 + 1);
    let k = ctx.k as usize;

    if what.eigen {
        match eigen_row(ctx, &x, &high, tail_norm, seed, n) {
            Ok(r) => out.eigen.push((base_key.clone(), r)),
            Err(e) => out.errors.push((base_key.clone(), error_row(ctx, "eigen", seed, n, None, &e))),
        }
    }
    if !(what.risk || what.bounds) {
        return out;
    }
    let test = match test_points(seed, n, ctx.cfg.m_test, ctx.cfg.d) {
        Ok(t) => t,
        Err(e) => {
            out.errors.push((base_key, error_row(ctx, "risk", seed, n, None, &e)));
            return out;
        }
    };
    for (gi, &gamma) in ctx.cfg.gamma.iter().enumerate() {
        let key = vec![seed, n as u64, gi as u64];
        let res = (|| -> Result<(Vec<String>, Vec<String>)> {
            let rho = concentration_from_high(&high, tail_norm, k, gamma)?.rho;
            let ab = alpha_beta_degree(&ctx.profile, ctx.k as u128)?;
            let norms = TargetNorms::from_degree(&ctx.profile, &ctx.cfg.target_spec()?, ctx.k as u128)?;
            let profile = SpectralProfile::from(ctx.profile.clone());
            let inputs = BoundInputs::from_profile(
                &profile,
                n,
                k,
                gamma,
                rho,
                ab.alpha,
                ab.beta,
                ctx.cfg.delta,
                ctx.cfg.sigma,
                norms,
                ctx.cfg.constants()?,
            )?;
            let b = risk_bounds(&inputs)?;
            let bounds = vec![
                ctx.hash.clone(),
                seed.to_string(),
                n.to_string(),
                ctx.cfg.d.to_string(),
                num(gamma),
                k.to_string(),
                num(rho),
                num(ab.alpha),
                num(ab.beta),
                num(inputs.r_k_sq),
                num(inputs.big_r_k),
                num(inputs.tail_trace),
                num(norms.tail),
                num(norms.head),
                num(ctx.cfg.delta),
                num(inputs.constants.big_c1),
                num(inputs.constants.big_c2),
                b.advisory.to_string(),
                num(b.v_bound),
                num(b.b_bound),
            ];
            let mut risk = Vec::new();
            if what.risk {
                let s = Smoother::new(&ctx.spec, &x, &test, gamma, ctx.cfg.pair_options(), ctx.cfg.precision)?;
                let bias = bias_from_labels(&s, &ctx.target.eval_rows(&x), &ctx.target.eval_rows(&test))?;
                let variance = match ctx.cfg.variance_mode()? {
                    VarianceMode::ClosedForm => variance_closed_form(&s, ctx.cfg.sigma),
                    VarianceMode::MonteCarlo { trials } => {
                        let mut rng = stream_rng(seed, Stream::Noise, (n as u64) << 8 | gi as u64);
                        variance_monte_carlo(&s, ctx.cfg.sigma, trials, ctx.cfg.noise, &mut rng)?
                    }
                };
                risk = vec![
                    ctx.hash.clone(),
                    seed.to_string(),
                    n.to_string(),
                    ctx.cfg.d.to_string(),
                    num(gamma),
                    num(ctx.cfg.sigma),
                    num(bias.value),
                    num(bias.stderr),
                    num(variance.value),
                    num(variance.stderr),
                    num(b.v_bound),
                    num(b.b_bound),
                    num(rho),
                    k.to_string(),
                ];
            }
            Ok((risk, bounds))
        })();
        match res {
            Ok((risk, bounds)) => {
                if what.risk {
                    out.risk.push((key.clone(), risk));
                }
                if what.bounds {
                    out.bounds.push((key, bounds));
                }
            }
            Err(e) => out.errors.push((key, error_row(ctx, "risk", seed, n, Some(gamma), &e))),
        }
    }
    out
}

fn eigen_row(
    ctx: &RunContext,
    x: &DMatrix<f64>,
    high: &krr_core::kernels::GramMatrix,
    tail_norm: f64,
    seed: u64,
    n: usize,
) -> Result<Vec<String>> {
    let k = ctx.k as usize;
    if k == 0 || k > n {
        bail!("k = {k} must lie in [1, n = {n}]");
    }
    let g = gram_with(&ctx.spec, x, ctx.cfg.pair_options())?;
    let mu = empirical_spectrum(&g)?;
    let ab = alpha_beta_degree(&ctx.profile, ctx.k as u128)?;
    let env = eigenvalue_envelopes(
        &SpectralProfile::from(ctx.profile.clone()),
        &EnvelopeParams {
            n,
            k,
            k_prime: ctx.k_prime as usize,
            delta: ctx.cfg.delta,
            alpha: ab.alpha,
            beta: ab.beta,
            constants: ctx.cfg.constants()?,
        },
    )?;
    let rho = concentration_from_high(high, tail_norm, k, 0.0)?.rho;
    Ok(vec![
        ctx.hash.clone(),
        seed.to_string(),
        n.to_string(),
        ctx.cfg.d.to_string(),
        k.to_string(),
        k.to_string(),
        num(mu[k - 1]),
        num(env.upper),
        num(env.lower),
        num(rho),
    ])
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub short_hash: String,
    pub seeds: Vec<u64>,
    pub n: Vec<usize>,
    pub version: String,
    pub files: Vec<String>,
    pub failed_cells: usize,
    pub config_file: String,
}

/// Summary of a finished run.
#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub failures: usize,
    pub files: Vec<String>,
}

/// Restricts a run to part of the configured grid without changing the
/// config hash, so single rows can be regenerated.
#[derive(Debug, Clone, Copy, Default)]
pub struct Selection {
    pub seed: Option<u64>,
    pub n: Option<usize>,
}

/// Runs the grid and writes the requested tables, `errors.csv`, the config
/// and `manifest.json` into `dir`.
pub fn run(cfg: ExperimentConfig, what: Outputs, command: &str, dir: &Path, select: Selection) -> Result<RunSummary> {
    let ctx = RunContext::new(cfg)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let seeds = select.seed.map_or_else(|| ctx.cfg.seeds.clone(), |s| vec![s]);
    let ns = select.n.map_or_else(|| ctx.cfg.n.clone(), |n| vec![n]);
    let cells: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|&s| ns.iter().map(move |&n| (s, n)))
        .collect();
    let outputs: Vec<CellOutput> = cells
        .par_iter()
        .map(|&(seed, n)| run_cell(&ctx, seed, n, what))
        .collect();

    let mut eigen = Table::new(EIGEN_COLUMNS);
    let mut risk = Table::new(RISK_COLUMNS);
    let mut bounds = Table::new(BOUNDS_COLUMNS);
    let mut errors = Table::new(ERROR_COLUMNS);
    for o in outputs {
        o.eigen.into_iter().for_each(|(k, r)| eigen.push(k, r));
        o.risk.into_iter().for_each(|(k, r)| risk.push(k, r));
        o.bounds.into_iter().for_each(|(k, r)| bounds.push(k, r));
        o.errors.into_iter().for_each(|(k, r)| errors.push(k, r));
    }
    let mut files = Vec::new();
    for (on, name, table) in [
        (what.eigen, "eigen.csv", &eigen),
        (what.risk, "risk.csv", &risk),
        (what.bounds, "bounds.csv", &bounds),
        (true, "errors.csv", &errors),
    ] {
        if on {
            table.write(&dir.join(name))?;
            files.push(name.to_string());
        }
    }
    for row in errors.render().lines().skip(1) {
        warn!("failed: {row}");
    }
    std::fs::write(dir.join("config.toml"), ctx.cfg.to_toml()?)?;
    let manifest = Manifest {
        command: command.into(),
        config_hash: ctx.cfg.hash(),
        short_hash: ctx.hash.clone(),
        seeds,
        n: ns,
        version: env!("CARGO_PKG_VERSION").into(),
        files: files.clone(),
        failed_cells: errors.len(),
        config_file: "config.toml".into(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        failures: errors.len(),
        files,
    })
}
