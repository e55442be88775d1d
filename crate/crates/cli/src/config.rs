//! TOML scenario configs.
//!
//! One structured text file per scenario, key-value with nested sections,
//! all numbers decimal. Example:
//!
//! ```toml
//! horizon = 10.0
//! t-grid = [2.0, 5.0, 10.0]
//! n-paths = 100000
//! seed = 42
//!
//! [martingale]
//! s = 2.0
//! t = 5.0
//!
//! [source]
//! interarrival = { family = "gamma", rate = 1.0, shape = 2.0 }
//! claim = { family = "exponential", rate = 1.0 }
//!
//! [tilt]
//! kind = "density-ratio"
//! target-claim = { family = "exponential", rate = 2.0 }
//!
//! [target]
//! interarrival = { family = "gamma", rate = 1.5, shape = 3.0 }
//! ```

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use crp_core::scenario::{Scenario, TargetChange, TiltSpec};
use crp_core::{MeasureSpec, ParamDistribution};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScenarioConfig {
    pub name: Option<String>,
    pub horizon: f64,
    pub t_grid: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub martingale: MartingaleConfig,
    pub source: SourceConfig,
    pub tilt: TiltConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleConfig {
    pub s: f64,
    pub t: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub interarrival: LawConfig,
    pub claim: LawConfig,
    pub label: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TiltConfig {
    pub kind: String,
    pub target_claim: Option<LawConfig>,
    pub c: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub interarrival: Option<LawConfig>,
    pub alpha: Option<f64>,
    pub rate: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ChecksConfig {
    pub ks_target: Option<LawConfig>,
    #[serde(default)]
    pub requires_loading: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub family: String,
    pub rate: Option<f64>,
    pub shape: Option<f64>,
    pub scale: Option<f64>,
}

impl LawConfig {
    pub fn to_law(&self) -> Result<ParamDistribution> {
        let law = match self.family.as_str() {
            "exponential" | "exp" => ParamDistribution::exponential(
                self.rate.context("exponential law needs `rate`")?,
            )?,
            "gamma" | "ga" => ParamDistribution::gamma(
                self.rate.context("gamma law needs `rate`")?,
                self.shape.context("gamma law needs `shape`")?,
            )?,
            "weibull" => ParamDistribution::weibull(
                self.shape.context("weibull law needs `shape`")?,
                self.scale.context("weibull law needs `scale`")?,
            )?,
            other => bail!("unknown family `{other}` (expected exponential, gamma or weibull)"),
        };
        Ok(law)
    }
}

impl ScenarioConfig {
    pub fn into_scenario(self, fallback_name: &str) -> Result<Scenario> {
        let tilt = match self.tilt.kind.as_str() {
            "density-ratio" => TiltSpec::DensityRatio {
                target_claim: self
                    .tilt
                    .target_claim
                    .as_ref()
                    .context("density-ratio tilt needs `target-claim`")?
                    .to_law()?,
            },
            "esscher" => TiltSpec::Esscher { c: self.tilt.c.context("esscher tilt needs `c`")? },
            "table" => TiltSpec::Table {
                xs: self.tilt.x.clone().context("table tilt needs `x`")?,
                gammas: self.tilt.gamma.clone().context("table tilt needs `gamma`")?,
            },
            other => bail!("unknown tilt kind `{other}` (expected density-ratio, esscher or table)"),
        };

        let change = match (&self.target.interarrival, self.target.alpha, self.target.rate) {
            (Some(law), None, None) => TargetChange::Interarrival(law.to_law()?),
            (None, Some(alpha), None) => TargetChange::Alpha(alpha),
            (None, None, Some(rate)) => TargetChange::PoissonRate(rate),
            _ => bail!("[target] needs exactly one of `interarrival`, `alpha` or `rate`"),
        };

        let source = MeasureSpec::new(
            self.source.interarrival.to_law()?,
            self.source.claim.to_law()?,
            self.source.label.clone().unwrap_or_else(|| "P".to_string()),
        )?;

        let ks_target = match &self.checks.ks_target {
            Some(law) => Some(law.to_law()?),
            None => None,
        };

        Ok(Scenario {
            name: self.name.unwrap_or_else(|| fallback_name.to_string()),
            source,
            tilt,
            change,
            horizon: self.horizon,
            t_grid: self.t_grid,
            martingale_pair: (self.martingale.s, self.martingale.t),
            n_paths: self.n_paths,
            seed: self.seed,
            ks_target,
            requires_loading: self.checks.requires_loading,
        })
    }
}

pub fn parse_scenario(text: &str, fallback_name: &str) -> Result<Scenario> {
    let config: ScenarioConfig = toml::from_str(text).context("failed to parse scenario TOML")?;
    config.into_scenario(fallback_name)
}
