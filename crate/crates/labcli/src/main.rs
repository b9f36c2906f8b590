use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use krr_core::eigenbounds::Constants;
use krr_core::krr::{rate_predictions, Precision, Regime, VarianceMode};
use krr_core::spectrum::{mercer_spectrum, min_nodes};
use krr_lab::config::ExperimentConfig;
use krr_lab::figures::{
    descent_shape, hermite_table, reproduce_fig1, reproduce_fig2, Fig1Kernel, Fig1Options, Fig2Options,
    FigureResult, HermiteOptions, NGrid,
};
use krr_lab::run::{run, Outputs, Selection};
use krr_lab::table::{num, Table};
use log::info;

#[derive(Parser)]
#[command(name = "krrlab", version, about = "Seeded kernel ridge regression experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Restrict the run to one seed (grid runs) or use a single seed (figures).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Restrict a grid run to one sample size.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Bound constants as `c1,c2,C,C1,C2`.
    #[arg(long, global = true)]
    constants: Option<Constants>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-degree Mercer spectrum of the configured kernel.
    Spectrum,
    /// Empirical eigenvalue and envelope rows.
    Eigen,
    /// Bias and variance rows.
    Risk,
    /// Risk bound rows.
    Bounds,
    /// Every table at once.
    Run,
    /// Asymptotic rate exponents for a regime such as `fixed_dim_interp:a=1/2,r=1`.
    Rates {
        #[arg(long)]
        regime: Regime,
    },
    /// Variance against n in several dimensions.
    Fig1(Fig1Args),
    /// Variance against n on the unit disk.
    Fig2(Fig2Args),
    /// Moments of the Hermite eigenfunctions.
    Hermite(HermiteArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Poly3,
    Ntk3,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    /// Powers of two from 8 to 2048.
    Powers,
    /// Log-spaced around the degree-1 and degree-2 boundaries.
    Boundary,
}

#[derive(Args)]
struct Fig1Args {
    #[arg(long, value_enum, default_value = "poly3")]
    kernel: KernelArg,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    dims: Vec<usize>,
    #[arg(long, value_enum, default_value = "powers")]
    grid: GridArg,
    /// Points of the boundary grid.
    #[arg(long, default_value_t = 16)]
    points: usize,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 1000)]
    m_test: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Estimate the variance from this many noise draws instead of in closed form.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct Fig2Args {
    #[arg(long = "grid", value_delimiter = ',', default_value = "64,128,256,512")]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 500)]
    m_test: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Solve in plain double precision instead of double-double.
    #[arg(long)]
    double: bool,
}

#[derive(Args)]
struct HermiteArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,8,12")]
    indices: Vec<usize>,
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
}

fn seeds(count: u64, single: Option<u64>) -> Vec<u64> {
    single.map_or_else(|| (0..count).collect(), |s| vec![s])
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = g.constants {
        cfg.constants = c.to_string();
    }
    Ok(cfg)
}

fn out_dir(g: &Global, cfg: Option<&ExperimentConfig>, fallback: &str) -> PathBuf {
    g.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn write_figure(dir: &Path, stem: &str, r: &FigureResult) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    r.points_table().write(&dir.join(format!("{stem}_points.csv")))?;
    r.summary_table().write(&dir.join(format!("{stem}_summary.csv")))?;
    info!("wrote {stem} tables to {}", dir.display());
    Ok(())
}

fn spectrum(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let p = mercer_spectrum(&cfg.kernel_spec()?, cfg.d, cfg.l_max, min_nodes(cfg.l_max))?;
    let mut t = Table::new(&["config_hash", "d", "degree", "multiplicity", "sigma_hat", "lambda"]);
    for b in p.blocks() {
        t.push(
            vec![b.degree as u64],
            vec![
                cfg.short_hash(),
                cfg.d.to_string(),
                b.degree.to_string(),
                b.multiplicity.to_string(),
                num(b.sigma_hat),
                num(b.sigma()),
            ],
        );
    }
    std::fs::create_dir_all(dir)?;
    t.write(&dir.join("spectrum.csv"))?;
    println!("trace {} residual {}", num(p.total()), num(p.residual()));
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    let grid_run = |what: Outputs, name: &str| -> Result<bool> {
        let cfg = load_config(g)?;
        let dir = out_dir(g, Some(&cfg), "out");
        let s = run(cfg, what, name, &dir, Selection { seed: g.seed, n: g.n })?;
        println!("wrote {} to {}", s.files.join(", "), s.dir.display());
        if s.failures > 0 {
            eprintln!("{} cell(s) failed; see errors.csv", s.failures);
        }
        Ok(s.failures == 0)
    };
    let none = Outputs {
        eigen: false,
        risk: false,
        bounds: false,
    };
    match &cli.command {
        Command::Spectrum => {
            let cfg = load_config(g)?;
            spectrum(&cfg, &out_dir(g, Some(&cfg), "out"))?;
            Ok(true)
        }
        Command::Eigen => grid_run(Outputs { eigen: true, ..none }, "eigen"),
        Command::Risk => grid_run(Outputs { risk: true, ..none }, "risk"),
        Command::Bounds => grid_run(Outputs { bounds: true, ..none }, "bounds"),
        Command::Run => grid_run(Outputs::ALL, "run"),
        Command::Rates { regime } => {
            let t = rate_predictions(regime)?;
            let exps: Vec<String> = t.variance.iter().map(|x| x.to_string()).collect();
            println!("regime    {regime}");
            println!("base      {}", t.base);
            println!(
                "variance  {} [{}]",
                if t.variance_grows { "grows" } else { "decays" },
                exps.join(", ")
            );
            println!("bias      {}", t.bias);
            Ok(true)
        }
        Command::Fig1(a) => {
            let opts = Fig1Options {
                kernel: match a.kernel {
                    KernelArg::Poly3 => Fig1Kernel::Poly3,
                    KernelArg::Ntk3 => Fig1Kernel::Ntk3,
                },
                dims: a.dims.clone(),
                grid: match a.grid {
                    GridArg::Powers => NGrid::powers_of_two(),
                    GridArg::Boundary => NGrid::Boundary { points: a.points },
                },
                seeds: seeds(a.seeds, g.seed),
                m_test: a.m_test,
                sigma: a.sigma,
                mode: a.trials.map_or(VarianceMode::ClosedForm, |trials| VarianceMode::MonteCarlo { trials }),
            };
            let r = reproduce_fig1(&opts)?;
            write_figure(&out_dir(g, None, "out"), "fig1", &r)?;
            for &d in &opts.dims {
                match descent_shape(&r.summary, d) {
                    Ok(s) => println!(
                        "d={d}: first valley {} at n={}, peak {}",
                        num(s.valley),
                        s.valley_n,
                        s.peak.map_or("none".into(), |(n, v)| format!("{} at n={n}", num(v)))
                    ),
                    Err(e) => println!("d={d}: {e}"),
                }
            }
            Ok(true)
        }
        Command::Fig2(a) => {
            let opts = Fig2Options {
                n_grid: a.n_grid.clone(),
                seeds: seeds(a.seeds, g.seed),
                m_test: a.m_test,
                sigma: a.sigma,
                precision: if a.double { Precision::Double } else { Precision::Extended },
            };
            let r = reproduce_fig2(&opts)?;
            write_figure(&out_dir(g, None, "out"), "fig2", &r)?;
            for s in &r.summary {
                println!("n={}: median {}", s.n, num(s.median));
            }
            Ok(true)
        }
        Command::Hermite(a) => {
            if a.indices.is_empty() {
                bail!("no indices");
            }
            let opts = HermiteOptions {
                indices: a.indices.clone(),
                p: a.p,
                samples: a.samples,
                seeds: seeds(a.seeds, g.seed),
            };
            let (t, medians) = hermite_table(&opts)?;
            let dir = out_dir(g, None, "out");
            std::fs::create_dir_all(&dir)?;
            t.write(&dir.join("hermite.csv"))?;
            for (i, m) in medians {
                println!("i={i}: median moment {}", num(m));
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
