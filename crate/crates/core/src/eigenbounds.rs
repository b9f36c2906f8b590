//! Empirical kernel-matrix spectra, eigenvalue envelopes and the
//! concentration coefficient of the tail kernel matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::SymmetricTridiagonal;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{cosine, gram, rows_of, GramMatrix, KernelSpec};
use crate::quadrature::tridiagonal_eigen_first_row;
use crate::spectrum::{DegreeProfile, SpectralProfile};
use crate::sphere::gegenbauer_all;

/// Relative floor below which negative eigenvalues count as round-off.
pub const NEGATIVE_EIGEN_FLOOR: f64 = 1e-10;

/// Default confidence parameter of the lower envelope.
pub const DEFAULT_DELTA: f64 = 0.1;

/// Absolute constants of the envelope and risk bounds. The theory only
/// asserts their existence, so all default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
    pub big_c: f64,
    pub big_c1: f64,
    pub big_c2: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            big_c: 1.0,
            big_c1: 1.0,
            big_c2: 1.0,
        }
    }
}

impl fmt::Display for Constants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.c1, self.c2, self.big_c, self.big_c1, self.big_c2
        )
    }
}

impl FromStr for Constants {
    type Err = Error;

    /// Parses `c1,c2,C,C1,C2`.
    fn from_str(s: &str) -> Result<Self> {
        let v = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad constant {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if v.len() != 5 {
            return Err(Error::InvalidParameter(format!(
                "expected 5 constants c1,c2,C,C1,C2, got {}",
                v.len()
            )));
        }
        if v.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidParameter("constants must be positive".into()));
        }
        Ok(Self {
            c1: v[0],
            c2: v[1],
            big_c: v[2],
            big_c1: v[3],
            big_c2: v[4],
        })
    }
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let big = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let small = m.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    big * m.nrows() as f64 / small.max(f64::MIN_POSITIVE)
}

/// All eigenvalues of a symmetric matrix, nonincreasing, without clamping.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNotConverged {
            condition: f64::NAN,
        });
    }
    let tri = SymmetricTridiagonal::new(m.clone());
    let (diag, off) = tri.unpack_tridiagonal();
    let (mut vals, _) =
        tridiagonal_eigen_first_row(diag.iter().copied().collect(), off.iter().copied().collect())
            .map_err(|_| Error::EigenNotConverged {
                condition: condition_estimate(m),
            })?;
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// `mu_1(K/n) >= ... >= mu_n(K/n)`, with round-off negatives set to zero.
pub fn empirical_spectrum(g: &GramMatrix) -> Result<Vec<f64>> {
    let n = g.n() as f64;
    let mut mu: Vec<f64> = symmetric_eigenvalues(g.entries())?
        .into_iter()
        .map(|v| v / n)
        .collect();
    let floor = -NEGATIVE_EIGEN_FLOOR * mu.first().copied().unwrap_or(0.0).abs();
    for v in mu.iter_mut() {
        if *v < 0.0 && *v >= floor {
            *v = 0.0;
        }
    }
    Ok(mu)
}

/// `K = K_{<=k} + K_{>k}` for a dot-product kernel, with `k` at a degree
/// boundary of `profile`. The head is `sum_l sigma_hat_l P_l(<x_i, x_j>)`
/// over the head degrees.
pub fn split_gram(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    profile: &DegreeProfile,
    k: u128,
) -> Result<(GramMatrix, GramMatrix)> {
    if !spec.is_dot_product() {
        return Err(Error::UnsupportedFamily {
            family: spec.family_name(),
            operation: "degree split",
        });
    }
    if x.ncols() != profile.dim() {
        return Err(Error::DimensionMismatch {
            expected: profile.dim(),
            got: x.ncols(),
        });
    }
    let head = profile.head_degrees(k)?;
    let full = gram(spec, x)?.into_inner();
    let rows = rows_of(x);
    let n = rows.len();
    let lmax = head.iter().copied().max().unwrap_or(0);
    let mut p = vec![0.0; lmax + 1];
    let mut low = DMatrix::zeros(n, n);
    let d = profile.dim();
    let blocks = profile.blocks();
    let head_mass: f64 = head.iter().map(|&l| blocks[l].sigma_hat).sum();
    for i in 0..n {
        low[(i, i)] = head_mass;
        for j in i + 1..n {
            gegenbauer_all(d, cosine(&rows[i], &rows[j]), &mut p);
            let v: f64 = head.iter().map(|&l| blocks[l].sigma_hat * p[l]).sum();
            low[(i, j)] = v;
            low[(j, i)] = v;
        }
    }
    let high = &full - &low;
    Ok((GramMatrix::from_matrix(low)?, GramMatrix::from_matrix(high)?))
}

/// Upper and lower envelopes for `mu_k(K/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub k: usize,
    pub k_prime: usize,
    pub upper: f64,
    /// `-inf` when the bound is vacuous.
    pub lower: f64,
    /// The `alpha (1 - sqrt(n^2/R_{k'})/delta) tr(Sigma_{>k'})/n` term.
    pub lower_tail_term: f64,
    /// Whether `C beta k log k <= n`.
    pub indicator: bool,
    /// The lower bound carries no information.
    pub vacuous: bool,
    /// Self-regularization level `tr(Sigma_{>k'}) / n`.
    pub gamma_tilde: f64,
}

impl Envelope {
    pub fn contains(&self, mu: f64) -> bool {
        mu <= self.upper && mu >= self.lower
    }
}

/// Parameters shared by the envelope evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub n: usize,
    pub k: usize,
    pub k_prime: usize,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub constants: Constants,
}

/// Evaluates
///
/// ```text
/// upper = c2 beta [(1 + k log k / n) lambda_k + log(k+1) tr(Sigma_{>k}) / n]
/// lower = c1 I lambda_k + alpha (1 - sqrt(n^2 / R_{k'}) / delta) tr(Sigma_{>k'}) / n
/// ```
///
/// with `I = 1` iff `C beta k log k <= n`. `k'` is not capped at `n`.
pub fn eigenvalue_envelopes(profile: &SpectralProfile, p: &EnvelopeParams) -> Result<Envelope> {
    let EnvelopeParams {
        n,
        k,
        k_prime,
        delta,
        alpha,
        beta,
        constants: c,
    } = *p;
    if k == 0 || k_prime < k || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= k' and n >= 1 (k={k}, k'={k_prime}, n={n})"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let lambda_k = profile.eigenvalue(k);
    let klogk = kf * kf.ln();
    let upper = c.c2
        * beta
        * ((1.0 + klogk / nf) * lambda_k + (kf + 1.0).ln() * profile.tail_trace(k) / nf);
    let indicator = c.big_c * beta * klogk <= nf;
    let tail = profile.tail_trace(k_prime);
    let lower_tail_term = if tail > 0.0 {
        let big_r = tail * tail / profile.tail_trace_sq(k_prime);
        alpha * (1.0 - (nf * nf / big_r).sqrt() / delta) * tail / nf
    } else {
        0.0
    };
    let head = if indicator { c.c1 * lambda_k } else { 0.0 };
    let (lower, vacuous) = if lower_tail_term < 0.0 && !indicator {
        (f64::NEG_INFINITY, true)
    } else {
        let l = head + lower_tail_term;
        (l, l <= 0.0)
    };
    Ok(Envelope {
        k,
        k_prime,
        upper,
        lower,
        lower_tail_term,
        indicator,
        vacuous,
        gamma_tilde: tail / nf,
    })
}

/// Empirical spectrum together with envelopes at requested cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenReport {
    pub mu: Vec<f64>,
    pub envelopes: Vec<Envelope>,
    pub constants: Constants,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub k: usize,
    pub n: usize,
    /// `+inf` when the denominator vanishes.
    pub rho: f64,
    pub tail_norm: f64,
    pub mu1_high: f64,
    pub mu_n_high: f64,
    pub gamma: f64,
}

/// `rho = (‖Sigma_{>k}‖ + mu_1(K_{>k}/n) + gamma) / (mu_n(K_{>k}/n) + gamma)`.
pub fn concentration_from_high(
    high: &GramMatrix,
    tail_norm: f64,
    k: usize,
    gamma: f64,
) -> Result<ConcentrationReport> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
    }
    let mu = empirical_spectrum(high)?;
    let mu1_high = mu.first().copied().unwrap_or(0.0);
    let mu_n_high = mu.last().copied().unwrap_or(0.0);
    let den = mu_n_high + gamma;
    let rho = if den > 0.0 {
        (tail_norm + mu1_high + gamma) / den
    } else {
        f64::INFINITY
    };
    Ok(ConcentrationReport {
        k,
        n: high.n(),
        rho,
        tail_norm,
        mu1_high,
        mu_n_high,
        gamma,
    })
}

/// Concentration coefficient of a dot-product kernel at a degree boundary.
pub fn concentration(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    profile: &DegreeProfile,
    k: u128,
    gamma: f64,
) -> Result<ConcentrationReport> {
    let (_, high) = split_gram(spec, x, profile, k)?;
    let tail_norm = profile.eigenvalue(k + 1);
    concentration_from_high(&high, tail_norm, k as usize, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{mercer_spectrum, min_nodes, ExplicitProfile};
    use crate::sphere::sample_sphere;

    #[test]
    fn scaled_identity_and_rank_one() {
        let n = 6;
        let g = GramMatrix::from_matrix(DMatrix::identity(n, n) * n as f64).unwrap();
        assert!(empirical_spectrum(&g).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-14));
        let g = GramMatrix::from_matrix(DMatrix::from_element(n, n, 1.0)).unwrap();
        let mu = empirical_spectrum(&g).unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-14);
        assert!(mu[1..].iter().all(|v| v.abs() < 1e-15));
    }

    // det(M - tI) by Gaussian elimination; roots are bracketed by sign changes
    // on a fine grid and refined by bisection.
    #[test]
    fn low_rank_converges() {
        // Many roundoff-sized pivots after tridiagonalization.
        let x = sample_sphere(256, 4, 81).unwrap().x;
        let m = &x * x.transpose();
        let mu = symmetric_eigenvalues(&m).unwrap();
        assert!((mu.iter().take(4).sum::<f64>() - 256.0).abs() < 1e-9);
        assert!(mu[4..].iter().all(|v| v.abs() < 1e-12));
    }

    fn det_shifted(m: &DMatrix<f64>, t: f64) -> f64 {
        let n = m.nrows();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)] - if i == j { t } else { 0.0 }).collect())
            .collect();
        let mut det = 1.0;
        for c in 0..n {
            let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            if a[piv][c] == 0.0 {
                return 0.0;
            }
            if piv != c {
                a.swap(piv, c);
                det = -det;
            }
            det *= a[c][c];
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for j in c..n {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
        det
    }

    #[test]
    fn matches_characteristic_polynomial_roots() {
        let mut rng = crate::rng::seeded(9);
        use rand::Rng;
        let b = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>() - 0.5);
        let m = &b * b.transpose();
        let bound = m.iter().map(|v| v.abs()).sum::<f64>();
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut prev_t = -1e-9;
        let mut prev = det_shifted(&m, prev_t);
        for s in 1..=steps {
            let t = -1e-9 + bound * s as f64 / steps as f64;
            let cur = det_shifted(&m, t);
            if prev.signum() != cur.signum() {
                let (mut lo, mut hi, flo) = (prev_t, t, prev);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if det_shifted(&m, mid).signum() == flo.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev_t = t;
            prev = cur;
        }
        roots.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(roots.len(), 5);
        let vals = symmetric_eigenvalues(&m).unwrap();
        for (r, v) in roots.iter().zip(&vals) {
            assert!((r - v).abs() < 1e-8, "{r} vs {v}");
        }
    }

    #[test]
    fn polynomial_split_leaves_nothing_above_degree_three() {
        let spec = KernelSpec::polynomial(3, 0.25, 1.0).unwrap();
        let prof = mercer_spectrum(&spec, 4, 6, min_nodes(6)).unwrap();
        let x = sample_sphere(20, 4, 1).unwrap().x;
        let k = prof.count();
        let (_, high) = split_gram(&spec, &x, &prof, k).unwrap();
        assert!(high.max_abs() < 1e-8);
        let (low, _) = split_gram(&spec, &x, &prof, 1).unwrap();
        let s0 = prof.blocks()[0].sigma_hat;
        assert!(low.entries().iter().all(|v| *v == s0));
    }

    #[test]
    fn split_is_additive_and_rejects_non_boundary() {
        let spec = KernelSpec::ntk(3).unwrap();
        let prof = mercer_spectrum(&spec, 8, 6, min_nodes(6)).unwrap();
        let x = sample_sphere(64, 8, 4).unwrap().x;
        let (low, high) = split_gram(&spec, &x, &prof, 9).unwrap();
        let g = gram(&spec, &x).unwrap();
        let diff = (low.entries() + high.entries() - g.entries()).abs().max();
        assert!(diff < 1e-10);
        let h1 = spec.diag_value().unwrap();
        let head = prof.blocks()[0].sigma_hat + prof.blocks()[1].sigma_hat;
        assert_eq!(high.entries()[(3, 3)], h1 - head);
        assert!(matches!(
            split_gram(&spec, &x, &prof, 5),
            Err(Error::NotDegreeBoundary { .. })
        ));
    }

    #[test]
    fn finite_rank_envelopes() {
        let prof: SpectralProfile = ExplicitProfile::new(vec![1.0, 0.5, 0.25]).unwrap().into();
        let p = EnvelopeParams {
            n: 10_000,
            k: 3,
            k_prime: 3,
            delta: 0.1,
            alpha: 1.0,
            beta: 1.3,
            constants: Constants::default(),
        };
        let e = eigenvalue_envelopes(&prof, &p).unwrap();
        let want = 1.3 * 0.25 * (1.0 + 3.0 * 3f64.ln() / 1e4);
        assert!((e.upper - want).abs() < 1e-15);
        assert_eq!(e.lower, 0.25);
        assert!(e.indicator && !e.vacuous);
    }

    #[test]
    fn vanishing_delta_makes_lower_vacuous() {
        let prof: SpectralProfile = ExplicitProfile::geometric(0.9, 400).unwrap().into();
        let mut p = EnvelopeParams {
            n: 5,
            k: 4,
            k_prime: 4,
            delta: 1e-12,
            alpha: 1.0,
            beta: 1.0,
            constants: Constants::default(),
        };
        let e = eigenvalue_envelopes(&prof, &p).unwrap();
        assert_eq!(e.lower, f64::NEG_INFINITY);
        assert!(e.vacuous && !e.indicator);
        p.delta = 1.5;
        assert!(eigenvalue_envelopes(&prof, &p).is_err());
    }

    #[test]
    fn log_decay_lower_term_scales_like_inverse_n_log_n() {
        // lambda_i = 1/(i ln^2 i) with k' = n^2. Past k' the sums equal the
        // integrals to O(lambda_{k'}); with x = e^t they become
        // int t^-2 dt = 1/ln k' and int e^-t t^-4 dt, the latter by midpoint rule.
        let decay = crate::spectrum::Decay::LogPolynomial { a: 1.0 };
        let prof: SpectralProfile = ExplicitProfile::parametric(decay, 1 << 12, true).unwrap().into();
        for n in [1_000usize, 10_000, 100_000] {
            let e = eigenvalue_envelopes(
                &prof,
                &EnvelopeParams {
                    n,
                    k: 1,
                    k_prime: n * n,
                    delta: 0.1,
                    alpha: 1.0,
                    beta: 1.0,
                    constants: Constants::default(),
                },
            )
            .unwrap();
            let nf = n as f64;
            let l = (nf * nf).ln();
            let tail = 1.0 / l;
            let steps = 200_000;
            let h = 60.0 / steps as f64;
            let tail_sq: f64 = (0..steps)
                .map(|j| {
                    let t = l + (j as f64 + 0.5) * h;
                    (-t).exp() * t.powi(-4) * h
                })
                .sum();
            let big_r = tail * tail / tail_sq;
            let want = (1.0 - (nf * nf / big_r).sqrt() / 0.1) * tail / nf;
            assert!((e.lower_tail_term - want).abs() < 1e-3 * want, "n={n}: {} vs {want}", e.lower_tail_term);
            assert!((e.gamma_tilde - tail / nf).abs() < 1e-3 * tail / nf);
            // the 1/(n log n) scale
            let scaled = e.lower_tail_term * nf * nf.ln();
            assert!((0.1..0.5).contains(&scaled), "n={n}: {scaled}");
        }
    }

    #[test]
    fn concentration_limits() {
        let n = 8;
        let high = GramMatrix::from_matrix(DMatrix::identity(n, n) * (0.3 * n as f64)).unwrap();
        let r = concentration_from_high(&high, 0.3, 1, 0.0).unwrap();
        assert!(r.rho <= 2.0 + 1e-12);
        let r = concentration_from_high(&high, 0.3, 1, 1e12).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-9);
        let zero = GramMatrix::from_matrix(DMatrix::zeros(n, n)).unwrap();
        assert_eq!(concentration_from_high(&zero, 0.0, 1, 0.0).unwrap().rho, f64::INFINITY);
    }

    #[test]
    fn constants_round_trip() {
        let c: Constants = "1,2,3,4,5".parse().unwrap();
        assert_eq!(c.to_string().parse::<Constants>().unwrap(), c);
        assert!("1,2".parse::<Constants>().is_err());
    }
}
