//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits nonzero when a check fails that is not listed in `KNOWN_FAILING`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use krr_core::eigenbounds::{
    concentration, eigenvalue_envelopes, empirical_spectrum, split_gram, symmetric_eigenvalues, Constants,
    EnvelopeParams,
};
use krr_core::kernels::{gram, KernelSpec, PairOptions};
use krr_core::krr::{
    feature_variance, rate_predictions, variance_closed_form, variance_monte_carlo, NoiseFamily, Precision,
    RateTable, Regime, Smoother,
};
use krr_core::rng::{stream_rng, Stream};
use krr_core::sphere::sample_sphere;
use krr_core::spectrum::{
    alpha_beta_degree, effective_ranks, mercer_spectrum, min_nodes, Decay, DegreeProfile, ExplicitProfile,
    FeatureSample, SpectralProfile,
};
use krr_lab::figures::{
    descent_shape, hermite_table, median, reproduce_fig1, reproduce_fig2, Fig1Options, Fig2Options,
    HermiteOptions, NGrid,
};
use krr_lab::run::{default_cutoff, test_points, train_points};
use nalgebra::DVector;
use num_rational::Rational64;

/// Checks that cannot pass as stated; they still run and report FAIL.
/// The NTK degree masses decay like a power of the degree, so no truncation
/// at degree 12 captures the trace to 1e-6.
const KNOWN_FAILING: &[&str] = &["ntk trace identity"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> Outcome;

fn profile(spec: &KernelSpec, d: usize, l_max: usize) -> DegreeProfile {
    mercer_spectrum(spec, d, l_max, min_nodes(l_max)).unwrap()
}

fn poly3(d: usize) -> KernelSpec {
    KernelSpec::polynomial(3, 1.0 / d as f64, 1.0).unwrap()
}

fn ntk3() -> KernelSpec {
    KernelSpec::ntk(3).unwrap()
}

fn poly_trace_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [4, 8, 16] {
        let p = profile(&poly3(d), d, 3);
        let sum: f64 = p.blocks().iter().map(|b| b.sigma_hat).sum();
        worst = worst.max((sum - p.total()).abs());
    }
    outcome(worst < 1e-10, format!("max |sum sigma_hat - h(1)| = {worst:.2e} at l_max = 3"))
}

fn ntk_trace_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for d in [4, 8, 16] {
        let p = profile(&ntk3(), d, 12);
        let sum: f64 = p.blocks().iter().map(|b| b.sigma_hat).sum();
        let rel = (p.total() - sum).abs() / p.total();
        parts.push(format!("d={d}: {rel:.3e}"));
        worst = worst.max(rel);
    }
    outcome(worst < 1e-6, format!("relative residual at l_max = 12: {}", parts.join(", ")))
}

fn degree_cutoff() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [4, 8, 16] {
        let p = profile(&poly3(d), d, 12);
        for b in &p.blocks()[4..=12] {
            worst = worst.max(b.sigma_hat.abs());
        }
    }
    outcome(worst < 1e-8, format!("max |sigma_hat_l| over l = 4..12: {worst:.2e}"))
}

fn weyl_sandwich() -> Outcome {
    let kernels = [ntk3(), KernelSpec::gpk(3).unwrap(), KernelSpec::ntk(2).unwrap(), poly3(8)];
    let dims = [4, 8, 16];
    let ns = [32, 64, 128, 256];
    let mut profiles = Vec::new();
    for spec in &kernels {
        for &d in &dims {
            let spec = match spec {
                KernelSpec::Polynomial { .. } => poly3(d),
                s => s.clone(),
            };
            let p = profile(&spec, d, 12);
            profiles.push((spec, d, p));
        }
    }
    let mut worst: f64 = 0.0;
    for c in 0..100u64 {
        let (spec, d, p) = &profiles[c as usize % profiles.len()];
        let n = ns[(c as usize / profiles.len() + c as usize) % ns.len()];
        let ks: Vec<u128> = p.boundaries().into_iter().filter(|&b| b >= 1 && (b as usize) < n).collect();
        let k = ks[c as usize % ks.len()];
        let x = sample_sphere(n, *d, c).unwrap().x;
        let full = gram(spec, &x).unwrap();
        let (low, high) = split_gram(spec, &x, p, k).unwrap();
        let scale = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|e| e / n as f64).collect() };
        let mu = scale(symmetric_eigenvalues(full.entries()).unwrap());
        let lo = scale(symmetric_eigenvalues(low.entries()).unwrap());
        let hi = scale(symmetric_eigenvalues(high.entries()).unwrap());
        let (h1, hn) = (hi[0], hi[n - 1]);
        for i in 0..n {
            let below = lo[i] + hn - mu[i];
            let above = mu[i] - lo[i] - h1;
            worst = worst.max(below.max(above) / mu[0]);
        }
    }
    outcome(worst <= 1e-9, format!("100 configurations, worst relative violation {worst:.2e}"))
}

fn envelope_calibration() -> Outcome {
    let mut cases = Vec::new();
    for spec in [ntk3(), poly3(8)] {
        for d in [8, 16] {
            let spec = match spec {
                KernelSpec::Polynomial { .. } => poly3(d),
                ref s => s.clone(),
            };
            let p = profile(&spec, d, 12);
            let k = default_cutoff(&p).unwrap();
            let ab = alpha_beta_degree(&p, k as u128).unwrap();
            for n in [64, 128, 256, 512] {
                let env = eigenvalue_envelopes(
                    &SpectralProfile::from(p.clone()),
                    &EnvelopeParams {
                        n,
                        k: k as usize,
                        k_prime: k as usize,
                        delta: 0.1,
                        alpha: ab.alpha,
                        beta: ab.beta,
                        constants: Constants::default(),
                    },
                )
                .unwrap();
                cases.push((spec.clone(), d, n, k as usize, env));
            }
        }
    }
    let mut inside = 0;
    for run in 0..100u64 {
        let (spec, d, n, k, env) = &cases[run as usize % cases.len()];
        let mu = empirical_spectrum(&gram(spec, &train_points(run, *n, *d).unwrap()).unwrap()).unwrap();
        if env.lower <= mu[k - 1] && mu[k - 1] <= env.upper {
            inside += 1;
        }
    }
    outcome(inside >= 95, format!("{inside}/100 runs inside [lower_k, upper_k]"))
}

fn concentration_bounded() -> Outcome {
    let spec = ntk3();
    let p = profile(&spec, 16, 12);
    let rhos: Vec<f64> = (0..20)
        .map(|seed| {
            let x = train_points(seed, 256, 16).unwrap();
            concentration(&spec, &x, &p, 17, 0.0).unwrap().rho
        })
        .collect();
    let max = rhos.iter().copied().fold(0.0, f64::max);
    outcome(max <= 10.0, format!("max rho over 20 seeds = {max:.3}"))
}

fn variance_estimators_agree() -> Outcome {
    let configs = [
        (ntk3(), 8, 64, 0.0),
        (ntk3(), 16, 128, 1e-3),
        (KernelSpec::gpk(2).unwrap(), 8, 48, 0.0),
        (KernelSpec::gpk(3).unwrap(), 4, 96, 1e-2),
        (poly3(8), 8, 40, 0.0),
        (poly3(4), 4, 64, 1e-4),
        (KernelSpec::laplace(1.0).unwrap(), 6, 80, 0.0),
        (KernelSpec::laplace(2.0).unwrap(), 12, 32, 1e-3),
        (KernelSpec::rbf(1.0).unwrap(), 10, 50, 1e-2),
        (KernelSpec::ntk(1).unwrap(), 5, 100, 0.0),
    ];
    let mut worst: f64 = 0.0;
    for (c, (spec, d, n, gamma)) in configs.iter().enumerate() {
        let seed = 1000 + c as u64;
        let x = train_points(seed, *n, *d).unwrap();
        let t = test_points(seed, *n, 200, *d).unwrap();
        let s = Smoother::new(spec, &x, &t, *gamma, PairOptions::default(), Precision::Double).unwrap();
        let cf = variance_closed_form(&s, 1.0);
        let mut rng = stream_rng(seed, Stream::Noise, *n as u64);
        let mc = variance_monte_carlo(&s, 1.0, 400, NoiseFamily::Gaussian, &mut rng).unwrap();
        // The closed form is exact on the fixed test set; only the noise draws add error.
        worst = worst.max((cf.value - mc.value).abs() / mc.stderr);
    }
    outcome(worst <= 3.0, format!("10 configurations, worst gap {worst:.2} standard errors"))
}

fn ridge_limit() -> Outcome {
    let configs = [
        (KernelSpec::laplace(1.0).unwrap(), 24, 4),
        (KernelSpec::laplace(1.0).unwrap(), 48, 8),
        (KernelSpec::laplace(2.0).unwrap(), 64, 8),
        (ntk3(), 32, 16),
        (ntk3(), 64, 32),
        (KernelSpec::ntk(1).unwrap(), 40, 12),
        (KernelSpec::ntk(2).unwrap(), 48, 16),
        (KernelSpec::gpk(1).unwrap(), 32, 16),
        (KernelSpec::gpk(2).unwrap(), 40, 16),
        (KernelSpec::gpk(3).unwrap(), 24, 8),
    ];
    let mut worst: f64 = 0.0;
    let mut worst_cond: f64 = 0.0;
    for (c, (spec, n, d)) in configs.iter().enumerate() {
        let seed = 2000 + c as u64;
        let x = train_points(seed, *n, *d).unwrap();
        let mu = symmetric_eigenvalues(gram(spec, &x).unwrap().entries()).unwrap();
        worst_cond = worst_cond.max(mu[0] / mu[n - 1]);
        let t = test_points(seed, *n, 100, *d).unwrap();
        let y = DVector::from_fn(*n, |i, _| ((i * 7 + 3) as f64).cos());
        let a = Smoother::new(spec, &x, &t, 0.0, PairOptions::default(), Precision::Double).unwrap();
        let b = Smoother::new(spec, &x, &t, 1e-10, PairOptions::default(), Precision::Double).unwrap();
        let (pa, pb) = (a.predict(&y).unwrap(), b.predict(&y).unwrap());
        worst = worst.max((&pa - &pb).norm() / pa.norm());
    }
    outcome(
        worst <= 1e-6 && worst_cond < 1e8,
        format!("worst relative gap {worst:.2e}, worst condition number {worst_cond:.2e}"),
    )
}

fn multiple_descent() -> Outcome {
    let opts = Fig1Options {
        grid: NGrid::Boundary { points: 16 },
        ..Fig1Options::default()
    };
    let r = reproduce_fig1(&opts).unwrap();
    let shapes: Vec<_> = opts.dims.iter().map(|&d| descent_shape(&r.summary, d).unwrap()).collect();
    let decreasing = shapes.windows(2).all(|w| w[1].valley < w[0].valley);
    let peaks = shapes.iter().all(|s| s.peak.is_some_and(|(_, v)| s.valley < v));
    let detail = opts
        .dims
        .iter()
        .zip(&shapes)
        .map(|(d, s)| {
            let peak = s.peak.map_or("none".into(), |(n, v)| format!("{v:.3} at n={n}"));
            format!("d={d}: valley {:.3} at n={}, peak {peak}", s.valley, s.valley_n)
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(decreasing && peaks, detail)
}

fn diverging_variance() -> Outcome {
    let r = reproduce_fig2(&Fig2Options::default()).unwrap();
    let at = |n: usize| r.summary.iter().find(|s| s.n == n).unwrap().median;
    let medians = r.summary.iter().map(|s| format!("n={}: {:.1}", s.n, s.median)).collect::<Vec<_>>();
    outcome(at(512) > at(64), format!("median variance {}", medians.join(", ")))
}

/// Least-squares slope of `ln y` against `ln x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / lx.len() as f64, ly.iter().sum::<f64>() / ly.len() as f64);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

fn growth_envelope() -> Outcome {
    let a = 0.5;
    let p = 4096;
    let profile = ExplicitProfile::parametric(Decay::Polynomial { a }, p, false).unwrap();
    let ns = [64usize, 128, 256, 512, 1024];
    let v: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let per_seed: Vec<f64> = (0..3)
                .map(|seed| {
                    let mut rng = stream_rng(seed, Stream::Features, n as u64);
                    let f = FeatureSample::gaussian(n, &profile, p, false, &mut rng).unwrap();
                    feature_variance(&f, 0.0, 1.0).unwrap()
                })
                .collect();
            median(&per_seed)
        })
        .collect();
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&x, &v);
    let shown = ns.iter().zip(&v).map(|(n, v)| format!("{n}: {v:.3}")).collect::<Vec<_>>();
    outcome(
        slope <= 2.0 * a + 0.5,
        format!("slope {slope:.3} (limit {}), variance {}", 2.0 * a + 0.5, shown.join(", ")),
    )
}

fn hermite_divergence() -> Outcome {
    let (_, medians) = hermite_table(&HermiteOptions::default()).unwrap();
    let increasing = medians.windows(2).all(|w| w[1].1 > w[0].1);
    let shown = medians.iter().map(|(i, m)| format!("i={i}: {m:.4}")).collect::<Vec<_>>();
    outcome(increasing, format!("median p=4 moment {}", shown.join(", ")))
}

fn q(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn rate_table() -> Outcome {
    // (regime, variance exponents, growing, bias exponent), worked out by hand
    let cases: [(&str, Vec<Rational64>, bool, Rational64); 12] = [
        ("high_dim:tau=3/2", vec![q(1, 2), q(1, 2)], false, q(1, 1)),
        ("high_dim:tau=7/3", vec![q(1, 3), q(2, 3)], false, q(2, 3)),
        ("high_dim:tau=1/4", vec![q(1, 4), q(3, 4)], false, q(1, 2)),
        ("fixed_dim_interp:a=1/2,r=1", vec![q(1, 1)], true, q(1, 1)),
        ("fixed_dim_interp:a=1/15,r=3/2", vec![q(2, 15)], true, q(29, 15)),
        ("fixed_dim_interp:a=1/3,r=1/2", vec![q(2, 3)], true, q(1, 3)),
        ("fixed_dim_reg:a=1/2,b=0,r=1", vec![q(1, 3)], false, q(5, 3)),
        ("fixed_dim_reg:a=1,b=-1/2,r=2", vec![q(3, 4)], false, q(1, 1)),
        ("fixed_dim_reg:a=1/4,b=1/8,r=0", vec![q(1, 10)], false, q(9, 40)),
        ("time_mapped:a=1/2,r=1,s=1", vec![q(1, 3)], false, q(5, 3)),
        ("time_mapped:a=1,r=3,s=3/2", vec![q(1, 4)], false, q(3, 1)),
        ("time_mapped:a=1/3,r=-1/12,s=1/2", vec![q(5, 8)], false, q(1, 16)),
    ];
    let mut bad = Vec::new();
    for (text, variance, grows, bias) in cases {
        let regime: Regime = text.parse().unwrap();
        let RateTable {
            variance: v,
            variance_grows: g,
            bias: b,
            ..
        } = rate_predictions(&regime).unwrap();
        if v != variance || g != grows || b != bias {
            bad.push(text);
        }
    }
    outcome(bad.is_empty(), format!("12 tuples, mismatches: {bad:?}"))
}

fn rank_brackets() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for decay in [
        Decay::LogPolynomial { a: 0.5 },
        Decay::Polynomial { a: 0.5 },
        Decay::Exponential { a: 0.5 },
    ] {
        let p = SpectralProfile::from(ExplicitProfile::parametric(decay, 1 << 14, true).unwrap());
        for k in [10, 100, 1000] {
            let rk = effective_ranks(&p, k).unwrap().r_k;
            let (lo, hi) = decay.rank_bracket(k);
            let miss = (lo * 0.98 - rk).max(rk - hi * 1.02).max(0.0) / rk;
            worst = worst.max(miss);
            if miss > 0.0 {
                bad.push(format!("{decay:?} k={k}: r_k={rk:.4} not in [{lo:.4}, {hi:.4}]"));
            }
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "9 cases inside".into() } else { bad.join("; ") })
}

fn main() -> ExitCode {
    let checks: [(&str, Check, u64); 14] = [
        ("polynomial trace identity", poly_trace_identity, 10),
        ("ntk trace identity", ntk_trace_identity, 10),
        ("polynomial degree cutoff", degree_cutoff, 10),
        ("weyl sandwich", weyl_sandwich, 120),
        ("envelope calibration", envelope_calibration, 300),
        ("bounded concentration", concentration_bounded, 60),
        ("closed form vs monte carlo variance", variance_estimators_agree, 120),
        ("ridge limit", ridge_limit, 30),
        ("multiple descent", multiple_descent, 600),
        ("diverging variance on the disk", diverging_variance, 300),
        ("fixed-dimension growth envelope", growth_envelope, 300),
        ("hermite moment divergence", hermite_divergence, 30),
        ("rate table", rate_table, 1),
        ("effective rank brackets", rank_brackets, 10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = Vec::new();
    for (name, check, budget) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(budget);
        let pass = o.pass && in_time;
        let tag = if pass { "PASS" } else { "FAIL" };
        let time = format!("{:.1}s of {budget}s", elapsed.as_secs_f64());
        println!("{tag} {name} [{time}]: {}", o.detail);
        if pass == KNOWN_FAILING.contains(&name) {
            unexpected.push(name);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome: {unexpected:?}");
        ExitCode::FAILURE
    }
}
