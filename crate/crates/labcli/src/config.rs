//! Flat experiment configuration, read from a TOML key table.

use anyhow::{bail, Context, Result};
use krr_core::eigenbounds::Constants;
use krr_core::kernels::{KernelSpec, PairOptions};
use krr_core::krr::{NoiseFamily, Precision, VarianceMode};
use krr_core::sphere::TargetSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256.
pub fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Tagged block, e.g. `kernel = { family = "ntk", depth = 3 }`.
    pub kernel: KernelSpec,
    pub d: usize,
    pub n: Vec<usize>,
    /// `[degree, coefficient]` pairs.
    pub target: Vec<(usize, f64)>,
    pub anchor_seed: u64,
    pub sigma: f64,
    pub noise: NoiseFamily,
    pub gamma: Vec<f64>,
    pub seeds: Vec<u64>,
    pub m_test: usize,
    /// Cutoff; defaults to the degree boundary just past degrees 0 and 1.
    pub k: Option<u64>,
    pub k_prime: Option<u64>,
    pub delta: f64,
    pub constants: String,
    pub l_max: usize,
    /// `closed_form` or `monte_carlo`.
    pub variance_mode: String,
    pub trials: usize,
    pub zonal: bool,
    pub precision: Precision,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Ntk { depth: 3 },
            d: 8,
            n: vec![64],
            target: Vec::new(),
            anchor_seed: 0,
            sigma: 1.0,
            noise: NoiseFamily::Gaussian,
            gamma: vec![0.0],
            seeds: vec![0],
            m_test: 500,
            k: None,
            k_prime: None,
            delta: 0.1,
            constants: Constants::default().to_string(),
            l_max: 12,
            variance_mode: "closed_form".into(),
            trials: 400,
            zonal: false,
            precision: Precision::Double,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel_spec()?;
        self.constants()?;
        self.variance_mode()?;
        if self.d < 3 {
            bail!("d must be >= 3, got {}", self.d);
        }
        if self.n.is_empty() || self.n.contains(&0) {
            bail!("n grid must be nonempty with positive entries");
        }
        if self.seeds.is_empty() || self.gamma.is_empty() {
            bail!("seeds and gamma must be nonempty");
        }
        if let Some(g) = self.gamma.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            bail!("gamma values must be finite and >= 0, got {g}");
        }
        if !(self.sigma >= 0.0) {
            bail!("sigma must be >= 0");
        }
        if self.m_test < 2 {
            bail!("m_test must be >= 2");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bail!("delta must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        self.kernel.validate()?;
        Ok(self.kernel.clone())
    }

    pub fn constants(&self) -> Result<Constants> {
        Ok(self.constants.parse()?)
    }

    pub fn variance_mode(&self) -> Result<VarianceMode> {
        match self.variance_mode.as_str() {
            "closed_form" => Ok(VarianceMode::ClosedForm),
            "monte_carlo" => Ok(VarianceMode::MonteCarlo { trials: self.trials }),
            other => bail!("unknown variance mode {other:?}"),
        }
    }

    pub fn target_spec(&self) -> Result<TargetSpec> {
        if self.target.is_empty() {
            return Ok(TargetSpec::zero(self.d));
        }
        Ok(TargetSpec::with_anchor_seed(self.d, self.anchor_seed, self.target.clone())?)
    }

    pub fn pair_options(&self) -> PairOptions {
        PairOptions { zonal: self.zonal }
    }

    /// SHA-256 over the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        digest(&serde_json::to_string(&c).expect("config serializes"))
    }

    /// The first 16 hex digits, carried on every row.
    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_table() {
        let c = ExperimentConfig::from_toml(
            "kernel = { family = \"polynomial\", degree = 3, scale = 0.25, offset = 1.0 }\nd = 4\nn = [8, 16]\nseeds = [1]\ntarget = [[1, 0.5], [2, 0.25]]\n",
        )
        .unwrap();
        assert_eq!(c.kernel_spec().unwrap(), KernelSpec::polynomial(3, 0.25, 1.0).unwrap());
        assert_eq!(c.target, vec![(1, 0.5), (2, 0.25)]);
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml("kernel = { family = \"tanh\" }").is_err());
        assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
        assert!(ExperimentConfig::from_toml("gamma = [-1.0]").is_err());
        assert!(ExperimentConfig::from_toml("d = 2").is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let mut a = ExperimentConfig::default();
        let h = a.hash();
        a.out = Some("elsewhere".into());
        assert_eq!(a.hash(), h);
        a.sigma = 0.5;
        assert_ne!(a.hash(), h);
        assert_eq!(h.len(), 64);
    }
}
