//! CSV schemas and formatting. Every float is written with 17 significant
//! digits so files round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

pub const RISK_COLUMNS: &[&str] = &[
    "config_hash", "seed", "n", "d", "gamma", "sigma_eps", "bias", "bias_se", "variance",
    "variance_se", "v_bound", "b_bound", "rho", "k",
];

pub const EIGEN_COLUMNS: &[&str] = &[
    "config_hash", "seed", "n", "d", "k", "i", "mu_i", "upper_k", "lower_k", "rho",
];

pub const BOUNDS_COLUMNS: &[&str] = &[
    "config_hash", "seed", "n", "d", "gamma", "k", "rho", "alpha", "beta", "r_k_sq", "big_r_k",
    "tail_trace", "theta_tail", "theta_head", "delta", "c1_big", "c2_big", "advisory", "v_bound",
    "b_bound",
];

pub const ERROR_COLUMNS: &[&str] = &["config_hash", "table", "seed", "n", "gamma", "error"];

pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// Quotes a free-text field.
pub fn text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

/// Rows sorted by a numeric key before writing, so output order does not
/// depend on scheduling.
#[derive(Debug, Clone, Default)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<(Vec<u64>, Vec<String>)>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, key: Vec<u64>, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push((key, row));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut rows: Vec<&(Vec<u64>, Vec<String>)> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let mut out = self.columns.join(",");
        out.push('\n');
        for (_, r) in rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn sorted_by_key() {
        let mut t = Table::new(&["a"]);
        t.push(vec![2], vec!["x".into()]);
        t.push(vec![1], vec!["y".into()]);
        assert_eq!(t.render(), "a\ny\nx\n");
    }

    #[test]
    fn quoting() {
        assert_eq!(text("plain"), "plain");
        assert_eq!(text("a, \"b\""), "\"a, \"\"b\"\"\"");
    }
}
