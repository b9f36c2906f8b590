//! Asymptotic rate exponents for the bias and variance in each regime, in
//! exact rational arithmetic.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `n ~ d^tau` with `tau` not an integer; minimum-norm interpolation.
    HighDim { tau: Rational64 },
    /// `lambda_i ~ i^{-1-a}`, `theta*_i = O(i^{-r})`, minimum-norm interpolation.
    FixedDimInterp { a: Rational64, r: Rational64 },
    /// As above with ridge `gamma_n ~ n^{-1-b}`.
    FixedDimReg { a: Rational64, b: Rational64, r: Rational64 },
    /// Gradient flow run for time `t ~ n^s`, equivalent to `gamma_n = 1/t`.
    TimeMapped { a: Rational64, r: Rational64, s: Rational64 },
}

/// The sample-size variable the rates are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Base {
    D,
    N,
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Base::D => "d",
            Base::N => "n",
        })
    }
}

/// `V <= sigma^2 sum_j base^{-v_j}` (decay) or `base^{+v_j}` (growth), and
/// `B <= base^{-bias}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateTable {
    pub base: Base,
    pub variance: Vec<Rational64>,
    pub variance_grows: bool,
    pub bias: Rational64,
}

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn fail(constraint: &str) -> Error {
    Error::Constraint(constraint.to_string())
}

fn check_a(a: Rational64) -> Result<()> {
    if a <= Rational64::zero() {
        return Err(fail("a > 0"));
    }
    Ok(())
}

fn smoothness(a: Rational64, rr: Rational64) -> Rational64 {
    let two = r(2, 1);
    ((two * rr + a) / (Rational64::one() + a)).min(two)
}

pub fn rate_predictions(regime: &Regime) -> Result<RateTable> {
    let one = Rational64::one();
    let two = r(2, 1);
    match *regime {
        Regime::HighDim { tau } => {
            if tau <= Rational64::zero() {
                return Err(fail("tau > 0"));
            }
            if tau.is_integer() {
                return Err(fail("tau not an integer"));
            }
            let frac = tau - tau.floor();
            Ok(RateTable {
                base: Base::D,
                variance: vec![frac, one - frac],
                variance_grows: false,
                bias: two * frac,
            })
        }
        Regime::FixedDimInterp { a, r } => {
            check_a(a)?;
            if r <= a {
                return Err(fail("r > a"));
            }
            Ok(RateTable {
                base: Base::N,
                variance: vec![two * a],
                variance_grows: true,
                bias: (two * (r - a)).min(two - a),
            })
        }
        Regime::FixedDimReg { a, b, r } => {
            check_a(a)?;
            if b <= -one || b >= a {
                return Err(fail("b in (-1, a)"));
            }
            if two * r + a <= Rational64::zero() {
                return Err(fail("2r + a > 0"));
            }
            Ok(RateTable {
                base: Base::N,
                variance: vec![(a - b) / (one + a)],
                variance_grows: false,
                bias: (one + b) * smoothness(a, r),
            })
        }
        Regime::TimeMapped { a, r, s } => {
            check_a(a)?;
            if s <= Rational64::zero() || s >= one + a {
                return Err(fail("s in (0, 1 + a)"));
            }
            if two * r + a <= Rational64::zero() {
                return Err(fail("2r + a > 0"));
            }
            Ok(RateTable {
                base: Base::N,
                variance: vec![one - s / (one + a)],
                variance_grows: false,
                bias: s * smoothness(a, r),
            })
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::HighDim { tau } => write!(f, "high_dim:tau={tau}"),
            Regime::FixedDimInterp { a, r } => write!(f, "fixed_dim_interp:a={a},r={r}"),
            Regime::FixedDimReg { a, b, r } => write!(f, "fixed_dim_reg:a={a},b={b},r={r}"),
            Regime::TimeMapped { a, r, s } => write!(f, "time_mapped:a={a},r={r},s={s}"),
        }
    }
}

/// Parses a rational from `p/q`, an integer or a finite decimal such as `1.5`.
pub fn parse_rational(s: &str) -> Result<Rational64> {
    let s = s.trim();
    let bad = || Error::InvalidParameter(format!("not a rational number: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(p, q));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || frac.len() > 15 {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let num: i64 = digits.parse().map_err(|_| bad())?;
    let v = Rational64::new(num, 10i64.pow(frac.len() as u32));
    Ok(if neg { -v } else { v })
}

/// `high_dim:tau=5/2`, `fixed_dim_interp:a=1/15,r=1.5`,
/// `fixed_dim_reg:a=1/2,b=0,r=1`, `time_mapped:a=1/2,r=2,s=1`.
impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let get = {
            let pairs: Vec<(String, String)> = args
                .split(',')
                .filter(|p| !p.trim().is_empty())
                .map(|p| {
                    p.split_once('=')
                        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                        .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got {p:?}")))
                })
                .collect::<Result<_>>()?;
            move |key: &str| -> Result<Rational64> {
                let v = pairs
                    .iter()
                    .find(|(k, _)| k == key)
                    .ok_or_else(|| Error::InvalidParameter(format!("regime {name} needs {key}")))?;
                parse_rational(&v.1)
            }
        };
        match name.trim() {
            "high_dim" => Ok(Regime::HighDim { tau: get("tau")? }),
            "fixed_dim_interp" => Ok(Regime::FixedDimInterp {
                a: get("a")?,
                r: get("r")?,
            }),
            "fixed_dim_reg" => Ok(Regime::FixedDimReg {
                a: get("a")?,
                b: get("b")?,
                r: get("r")?,
            }),
            "time_mapped" => Ok(Regime::TimeMapped {
                a: get("a")?,
                r: get("r")?,
                s: get("s")?,
            }),
            other => Err(Error::InvalidParameter(format!("unknown regime {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(s: &str) -> RateTable {
        rate_predictions(&s.parse().unwrap()).unwrap()
    }

    #[test]
    fn interpolation_example() {
        let t = table("fixed_dim_interp:a=1/15,r=1.5");
        assert_eq!(t.variance, vec![r(2, 15)]);
        assert!(t.variance_grows);
        assert_eq!(t.bias, r(29, 15));
    }

    #[test]
    fn regularized_and_time_mapped_examples() {
        assert_eq!(table("fixed_dim_reg:a=0.5,b=0,r=1").variance, vec![r(1, 3)]);
        let t = table("time_mapped:a=0.5,r=2,s=1");
        assert_eq!(t.variance, vec![r(1, 3)]);
        assert_eq!(t.bias, r(2, 1));
    }

    #[test]
    fn high_dim_exponents() {
        let t = table("high_dim:tau=5/2");
        assert_eq!(t.base, Base::D);
        assert_eq!(t.variance, vec![r(1, 2), r(1, 2)]);
        assert_eq!(t.bias, r(1, 1));
    }

    #[test]
    fn constraints_named() {
        let cases = [
            ("high_dim:tau=2", "tau not an integer"),
            ("fixed_dim_interp:a=1/2,r=1/4", "r > a"),
            ("fixed_dim_reg:a=1/2,b=1/2,r=1", "b in (-1, a)"),
            ("fixed_dim_reg:a=1/2,b=-1,r=1", "b in (-1, a)"),
            ("time_mapped:a=1/2,r=1,s=3/2", "s in (0, 1 + a)"),
            ("time_mapped:a=0,r=1,s=1/2", "a > 0"),
        ];
        for (s, want) in cases {
            match rate_predictions(&s.parse().unwrap()) {
                Err(Error::Constraint(c)) => assert_eq!(c, want),
                other => panic!("{s}: {other:?}"),
            }
        }
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("1.5").unwrap(), r(3, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), r(-1, 4));
        assert_eq!(parse_rational("7/21").unwrap(), r(1, 3));
        assert_eq!(parse_rational("3").unwrap(), r(3, 1));
        assert!(parse_rational("1e3").is_err());
        assert!(parse_rational("1/0").is_err());
        let g: Regime = "time_mapped:a=1/2,r=2,s=1".parse().unwrap();
        assert_eq!(g.to_string().parse::<Regime>().unwrap(), g);
    }
}
