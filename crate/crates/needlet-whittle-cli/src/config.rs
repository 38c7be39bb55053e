//! Configuration schema of the `simulate` subcommand.
//!
//! The file is JSON. Unknown fields are rejected so that typos fail loudly
//! instead of silently running defaults, and a deserialized config
//! re-serializes with every default made explicit, which makes
//! `--dry-run` output a valid config file again.

use std::path::Path;

use anyhow::{bail, Context, Result};
use needlet_whittle::estimator::EstimatorConfig;
use needlet_whittle::montecarlo::{EstimatorKind, ExperimentConfig, NarrowSchedule};
use needlet_whittle::spectrum::SpectrumModel;
use serde::{Deserialize, Serialize};

/// A bandwidth written either as a number or as a power expression string
/// such as `"2^(1/8)"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Number(f64),
    Expression(String),
}

impl Bandwidth {
    pub fn resolve(&self) -> Result<f64> {
        match self {
            Bandwidth::Number(x) => Ok(*x),
            Bandwidth::Expression(s) => parse_bandwidth(s),
        }
    }
}

/// Parses `"2"`, `"1.5"`, `"2^(1/8)"`, or `"2^(3)"` into a bandwidth value.
pub fn parse_bandwidth(s: &str) -> Result<f64> {
    let trimmed = s.trim();
    if let Ok(x) = trimmed.parse::<f64>() {
        return Ok(x);
    }
    let (base, exponent) = trimmed.split_once('^').with_context(|| {
        format!("bandwidth `{s}` is neither a number nor a power expression like 2^(1/8)")
    })?;
    let base: f64 = base
        .trim()
        .parse()
        .with_context(|| format!("bandwidth `{s}` has a non-numeric base"))?;
    let exponent = exponent.trim();
    let exponent = exponent
        .strip_prefix('(')
        .and_then(|e| e.strip_suffix(')'))
        .unwrap_or(exponent);
    let value = match exponent.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num
                .trim()
                .parse()
                .with_context(|| format!("bandwidth `{s}` has a non-numeric exponent"))?;
            let den: f64 = den
                .trim()
                .parse()
                .with_context(|| format!("bandwidth `{s}` has a non-numeric exponent"))?;
            if den == 0.0 {
                bail!("bandwidth `{s}` divides by zero in the exponent");
            }
            num / den
        }
        None => exponent
            .trim()
            .parse()
            .with_context(|| format!("bandwidth `{s}` has a non-numeric exponent"))?,
    };
    Ok(base.powf(value))
}

/// Spectrum model selection; `alpha0` and `g0` come from the surrounding
/// config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `C_l = G0 l^{-alpha0}`.
    Pure,
    /// `C_l = G0 (1 + kappa/l) l^{-alpha0}`.
    Kappa { kappa: f64 },
    /// `C_l = (ln l)^delta P(l)/Q(l) l^{-alpha0}` with ascending
    /// coefficients; `G0` is the leading-coefficient ratio, so the config
    /// `g0` field is ignored for this form.
    Rational {
        delta: f64,
        p: Vec<f64>,
        q: Vec<f64>,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Pure
    }
}

impl ModelSpec {
    pub fn build(&self, alpha0: f64, g0: f64) -> Result<SpectrumModel> {
        let model = match self {
            ModelSpec::Pure => SpectrumModel::pure(alpha0, g0),
            ModelSpec::Kappa { kappa } => SpectrumModel::with_kappa(alpha0, g0, *kappa),
            ModelSpec::Rational { delta, p, q } => SpectrumModel::rational(alpha0, *delta, p, q),
        };
        model.with_context(|| format!("invalid model at alpha0 = {alpha0}"))
    }
}

/// Narrow-band bandwidth fraction selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NarrowSpec {
    /// `"jl-cubed"`: the default schedule `g = J_L^{-3}`.
    Named(String),
    /// `{"g": 0.29}`: a fixed fraction in (0, 1).
    Fraction(FractionSpec),
    /// `{"j1": 75, "l1": 724}`: explicit cut points.
    Explicit(ExplicitSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractionSpec {
    pub g: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpec {
    pub j1: u32,
    pub l1: u32,
}

impl Default for NarrowSpec {
    fn default() -> Self {
        NarrowSpec::Named("jl-cubed".to_string())
    }
}

impl NarrowSpec {
    pub fn resolve(&self) -> Result<NarrowSchedule> {
        match self {
            NarrowSpec::Named(name) if name == "jl-cubed" => Ok(NarrowSchedule::DefaultJlCubed),
            NarrowSpec::Named(name) => {
                bail!("unknown narrow schedule `{name}`; expected \"jl-cubed\", {{\"g\": ...}}, or {{\"j1\": ..., \"l1\": ...}}")
            }
            NarrowSpec::Fraction(f) => Ok(NarrowSchedule::G(f.g)),
            NarrowSpec::Explicit(e) => Ok(NarrowSchedule::Explicit { j1: e.j1, l1: e.l1 }),
        }
    }
}

fn default_g0() -> f64 {
    1.0
}

fn default_estimators() -> Vec<String> {
    vec!["needlet-full".to_string()]
}

fn default_replications() -> u32 {
    1000
}

fn default_l_min() -> u32 {
    1
}

fn default_alpha_range() -> [f64; 2] {
    [2.01, 10.0]
}

fn default_opt_tol() -> f64 {
    1e-6
}

fn default_quad_tol() -> f64 {
    1e-12
}

/// One experiment grid: the cross product of `l_max` and `alpha0` under a
/// shared bandwidth, model shape, and estimator settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Bandwidth `B > 1`, a number or a string like `"2^(1/8)"`.
    pub b: Bandwidth,
    /// Highest observed multipoles; one experiment cell per entry.
    pub l_max: Vec<u32>,
    /// True spectral indices; one experiment cell per entry.
    pub alpha0: Vec<f64>,
    #[serde(default = "default_g0")]
    pub g0: f64,
    #[serde(default)]
    pub model: ModelSpec,
    /// Any of: needlet-full, needlet-narrow, fourier-full, fourier-narrow.
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
    #[serde(default = "default_replications")]
    pub replications: u32,
    /// Base seed; cell k runs with seed + k (wrapping), and per-replication
    /// streams are derived from that.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_l_min")]
    pub l_min: u32,
    #[serde(default = "default_alpha_range")]
    pub alpha_range: [f64; 2],
    #[serde(default = "default_opt_tol")]
    pub opt_tol: f64,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    #[serde(default)]
    pub narrow: NarrowSpec,
}

/// One (l_max, alpha0) grid cell with its derived seed.
#[derive(Debug, Clone, Copy)]
pub struct CellPlan {
    pub l_max: u32,
    pub alpha0: f64,
    pub seed: u64,
}

/// A validated configuration with every field resolved to library types.
#[derive(Debug, Clone)]
pub struct ResolvedPlan {
    pub b: f64,
    pub estimators: Vec<EstimatorKind>,
    pub narrow: NarrowSchedule,
    pub estimator: EstimatorConfig,
    pub quad_tol: f64,
    pub l_min: u32,
    pub replications: u32,
    pub g0: f64,
    pub model: ModelSpec,
    pub cells: Vec<CellPlan>,
}

impl SimulateConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))
    }

    pub fn resolve(&self) -> Result<ResolvedPlan> {
        if self.l_max.is_empty() || self.alpha0.is_empty() {
            bail!("empty experiment grid: l_max and alpha0 must each list at least one value");
        }
        let b = self.b.resolve()?;
        if !(b.is_finite() && b > 1.0) {
            bail!("bandwidth B must be finite and > 1, got {b}");
        }
        if self.estimators.is_empty() {
            bail!("estimators must list at least one estimator");
        }
        let estimators = self
            .estimators
            .iter()
            .map(|name| name.parse::<EstimatorKind>().map_err(anyhow::Error::from))
            .collect::<Result<Vec<_>>>()?;
        let narrow = self.narrow.resolve()?;
        let estimator = EstimatorConfig {
            alpha_range: (self.alpha_range[0], self.alpha_range[1]),
            opt_tol: self.opt_tol,
            ..EstimatorConfig::default()
        };
        estimator.validate()?;
        // Fail on an invalid model shape once, before any cell runs.
        for &alpha0 in &self.alpha0 {
            self.model.build(alpha0, self.g0)?;
        }
        let mut cells = Vec::new();
        for &l_max in &self.l_max {
            for &alpha0 in &self.alpha0 {
                let seed = self.seed.wrapping_add(cells.len() as u64);
                cells.push(CellPlan {
                    l_max,
                    alpha0,
                    seed,
                });
            }
        }
        Ok(ResolvedPlan {
            b,
            estimators,
            narrow,
            estimator,
            quad_tol: self.quad_tol,
            l_min: self.l_min,
            replications: self.replications,
            g0: self.g0,
            model: self.model.clone(),
            cells,
        })
    }
}

impl ResolvedPlan {
    /// The library config of one grid cell.
    pub fn experiment(&self, cell: &CellPlan) -> Result<ExperimentConfig> {
        let model = self.model.build(cell.alpha0, self.g0)?;
        let mut cfg = ExperimentConfig::new(model, self.b, cell.l_max);
        cfg.l_min = self.l_min;
        cfg.estimators = self.estimators.clone();
        cfg.replications = self.replications;
        cfg.seed = cell.seed;
        cfg.narrow = self.narrow;
        cfg.estimator = self.estimator;
        cfg.window_quad_tol = self.quad_tol;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandwidth_expressions_parse() {
        assert_eq!(parse_bandwidth("2").unwrap(), 2.0);
        assert_eq!(parse_bandwidth("1.5").unwrap(), 1.5);
        assert_eq!(parse_bandwidth("2^(1/8)").unwrap(), 2f64.powf(0.125));
        assert_eq!(parse_bandwidth("2^(1/4)").unwrap(), 2f64.powf(0.25));
        assert_eq!(parse_bandwidth(" 2^(3) ").unwrap(), 8.0);
        assert_eq!(parse_bandwidth("2^3").unwrap(), 8.0);
        assert!(parse_bandwidth("two").is_err());
        assert!(parse_bandwidth("2^(1/0)").is_err());
        assert!(parse_bandwidth("2^(x)").is_err());
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: SimulateConfig =
            serde_json::from_str(r#"{"b": 2, "l_max": [64], "alpha0": [3]}"#).unwrap();
        assert_eq!(cfg.replications, 1000);
        assert_eq!(cfg.l_min, 1);
        assert_eq!(cfg.alpha_range, [2.01, 10.0]);
        assert_eq!(cfg.estimators, vec!["needlet-full"]);
        let plan = cfg.resolve().unwrap();
        assert_eq!(plan.cells.len(), 1);
        assert_eq!(plan.estimators, vec![EstimatorKind::NeedletFull]);
        assert!(matches!(plan.narrow, NarrowSchedule::DefaultJlCubed));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<SimulateConfig>(
            r#"{"b": 2, "l_max": [64], "alpha0": [3], "replicas": 10}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("replicas"), "{err}");
    }

    #[test]
    fn narrow_spec_variants_resolve() {
        let cfg: SimulateConfig = serde_json::from_str(
            r#"{"b": 2, "l_max": [64], "alpha0": [3], "narrow": {"g": 0.5}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.resolve().unwrap().narrow, NarrowSchedule::G(g) if g == 0.5));

        let cfg: SimulateConfig = serde_json::from_str(
            r#"{"b": 2, "l_max": [64], "alpha0": [3], "narrow": {"j1": 4, "l1": 32}}"#,
        )
        .unwrap();
        assert!(matches!(
            cfg.resolve().unwrap().narrow,
            NarrowSchedule::Explicit { j1: 4, l1: 32 }
        ));

        let bad: SimulateConfig = serde_json::from_str(
            r#"{"b": 2, "l_max": [64], "alpha0": [3], "narrow": "steep"}"#,
        )
        .unwrap();
        assert!(bad.resolve().is_err());
    }

    #[test]
    fn grid_cells_have_distinct_seeds() {
        let cfg: SimulateConfig = serde_json::from_str(
            r#"{"b": 2, "l_max": [64, 128], "alpha0": [2.5, 3], "seed": 7}"#,
        )
        .unwrap();
        let plan = cfg.resolve().unwrap();
        assert_eq!(plan.cells.len(), 4);
        let seeds: Vec<u64> = plan.cells.iter().map(|c| c.seed).collect();
        assert_eq!(seeds, vec![7, 8, 9, 10]);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let cfg: SimulateConfig =
            serde_json::from_str(r#"{"b": 2, "l_max": [], "alpha0": [3]}"#).unwrap();
        assert!(cfg.resolve().unwrap_err().to_string().contains("empty"));
    }

    #[test]
    fn resolved_config_reserializes_idempotently() {
        let cfg: SimulateConfig =
            serde_json::from_str(r#"{"b": "2^(1/8)", "l_max": [64], "alpha0": [3]}"#).unwrap();
        let echoed = serde_json::to_string(&cfg).unwrap();
        let reread: SimulateConfig = serde_json::from_str(&echoed).unwrap();
        assert_eq!(echoed, serde_json::to_string(&reread).unwrap());
    }
}
