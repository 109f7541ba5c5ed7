use std::path::Path;

use anyhow::{bail, Context, Result};
use rank1_phase::amp::NoiseSchedule;
use rank1_phase::phase::PriorFamily;
use rank1_phase::{GaussianQuadrature, Model, Prior};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Experiment description shared by every subcommand. Each command reads the
/// sections it needs and ignores the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub prior: PriorSpec,
    pub grid: GridSpec,
    pub geometry: Geometry,
    pub run: RunSpec,
    pub community: CommunitySpec,
    pub oracle: OracleSpec,
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum PriorSpec {
    Bernoulli { rho: f64 },
    Community { rho: f64 },
    Rademacher,
    Dirac { value: f64 },
    Custom { support: Vec<f64>, weights: Vec<f64> },
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self::Bernoulli { rho: 0.02 }
    }
}

impl PriorSpec {
    pub fn build(&self) -> Result<Prior> {
        let prior = match self {
            Self::Bernoulli { rho } => Prior::bernoulli(*rho),
            Self::Community { rho } => Prior::community(*rho),
            Self::Rademacher => Ok(Prior::rademacher()),
            Self::Dirac { value } => Ok(Prior::dirac(*value)),
            Self::Custom { support, weights } => Prior::new(support.clone(), weights.clone()),
        };
        prior.context("prior")
    }
}

/// Either an explicit list or `points` values from `min` to `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Range {
        min: f64,
        max: f64,
        points: usize,
        #[serde(default)]
        spacing: Spacing,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

impl Values {
    /// Grid values in the given order; every value must be finite and positive.
    pub fn resolve(&self, what: &str) -> Result<Vec<f64>> {
        let v = match self {
            Self::List(v) => v.clone(),
            &Self::Range { min, max, points, spacing } => {
                if points == 0 {
                    bail!("{what}: a range needs at least one point");
                }
                if spacing == Spacing::Log && !(min > 0.0 && max > 0.0) {
                    bail!("{what}: log spacing needs positive bounds");
                }
                (0..points)
                    .map(|k| {
                        let t = if points == 1 { 0.0 } else { k as f64 / (points - 1) as f64 };
                        match spacing {
                            _ if k == 0 => min,
                            _ if k == points - 1 => max,
                            Spacing::Linear => min + (max - min) * t,
                            Spacing::Log => (min.ln() + (max.ln() - min.ln()) * t).exp(),
                        }
                    })
                    .collect()
            }
        };
        if v.is_empty() {
            bail!("{what}: empty grid");
        }
        if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            bail!("{what}: grid values must be finite and positive, got {bad}");
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub delta: Values,
    pub rho: Values,
    pub family: PriorFamily,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            delta: Values::List(vec![0.0008, 0.0012, 0.00125, 0.0015]),
            rho: Values::Range { min: 0.01, max: 0.5, points: 25, spacing: Spacing::Log },
            family: PriorFamily::Bernoulli,
        }
    }
}

/// `n` is the block size when `l` and `w` are set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<usize>,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { n: 2000, l: None, w: None }
    }
}

impl Geometry {
    pub fn coupling(&self) -> Result<Option<(usize, usize)>> {
        match (self.l, self.w) {
            (Some(l), Some(w)) => Ok(Some((l, w))),
            (None, None) => Ok(None),
            _ => bail!("geometry: set both l and w, or neither"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub seed: u64,
    pub instances: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Base node count of the adaptive Gaussian quadrature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_order: Option<usize>,
    /// Samples of each potential curve.
    pub points: usize,
    pub damping: f64,
    pub schedule: NoiseSchedule,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 1,
            max_iter: None,
            tol: None,
            quad_order: None,
            points: 1001,
            damping: 0.0,
            schedule: NoiseSchedule::Empirical,
        }
    }
}

/// Two-group graph; `mu` may be given directly or through the effective
/// noise `delta = p(1 − p)/μ²`, which defaults to 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunitySpec {
    pub rho: f64,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl Default for CommunitySpec {
    fn default() -> Self {
        Self { rho: 0.5, p: 0.3, mu: None, delta: None }
    }
}

impl CommunitySpec {
    pub fn mu(&self) -> Result<f64> {
        match (self.mu, self.delta) {
            (Some(mu), None) => Ok(mu),
            (None, d) => {
                let d = d.unwrap_or(0.5);
                if !(d > 0.0) {
                    bail!("community: delta must be positive, got {d}");
                }
                Ok((self.p * (1.0 - self.p) / d).sqrt())
            }
            _ => bail!("community: set at most one of mu and delta"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OracleCheck {
    Mmse,
    Nishimori,
    FiniteSize,
    #[default]
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    pub check: OracleCheck,
    /// Monte Carlo samples per mmse point.
    pub samples: usize,
    pub snr: Values,
    pub delta: Values,
    /// System size of the Nishimori check.
    pub n: usize,
    pub instances: usize,
    pub sizes: Vec<usize>,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            check: OracleCheck::All,
            samples: 1_000_000,
            snr: Values::List(vec![0.1, 0.5, 1.0, 2.0, 5.0]),
            delta: Values::List(vec![1.0]),
            n: 8,
            instances: 2000,
            sizes: vec![6, 9, 12],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

impl Config {
    /// JSON when the file says so by extension or content, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
            || text.trim_start().starts_with('{');
        let parsed = if json { Self::from_json(&text) } else { Self::from_toml(&text) };
        parsed.with_context(|| format!("config {}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // serde_json reports line and column; the field name is in the message
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg = Self::deserialize(&mut de)?;
        de.end()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(canon.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn tol(&self, default: f64) -> f64 {
        self.run.tol.unwrap_or(default)
    }

    pub fn model(&self) -> Result<Model> {
        self.model_for(self.prior.build()?)
    }

    pub fn model_for(&self, prior: Prior) -> Result<Model> {
        Ok(match self.run.quad_order {
            Some(order) => Model::with_quadrature(prior, GaussianQuadrature::adaptive(order).context("quad-order")?),
            None => Model::new(prior),
        })
    }
}
