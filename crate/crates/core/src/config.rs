//! Scenario configuration: schema, defaults, validation.
//!
//! Every section is optional in the TOML file; missing keys take the default
//! calibration. Unknown keys are rejected. Values outside the legal range are
//! errors, values inside the legal range but outside the calibrated default
//! range produce warnings.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Closed interval `[lo, hi]`, written as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }
    pub fn contains(&self, other: &Interval) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Self { lo: v[0], hi: v[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(v: Interval) -> Self {
        [v.lo, v.hi]
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub environment: EnvConfig,
    pub utility: UtilityConfig,
    pub population: PopulationConfig,
    pub insurers: InsurerConfig,
    pub government: GovernmentConfig,
    pub training: TrainingConfig,
    pub metrics: FactThresholds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Per-step catastrophe probability.
    pub catastrophe_probability: f64,
    pub episode_length: usize,
    pub population: usize,
    pub initial_insurers: usize,
    pub interest_rate: f64,
    pub seed: u64,
    /// Runs the market without any insurer (no quotes are ever offered).
    pub no_insurance: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            catastrophe_probability: 0.02,
            episode_length: 50,
            population: 100,
            initial_insurers: 5,
            interest_rate: 0.02,
            seed: 0,
            no_insurance: false,
        }
    }
}

/// Pareto utility `1 - (1 + w/scale)^-curvature`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilityConfig {
    pub scale: f64,
    pub curvature: f64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self {
            scale: 1000.0,
            curvature: 2.0,
        }
    }
}

/// Per-class values are ordered low, middle, upper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    pub class_shares: [f64; 3],
    pub income: [f64; 3],
    pub initial_wealth: [Interval; 3],
    pub initial_risk_perception: [Interval; 3],
    pub loss_rate: [Interval; 3],
    pub representativeness: Interval,
    pub optimism: Interval,
    pub myopia: Interval,
    pub simplification: Interval,
    pub inertia: Interval,
    pub herding: Interval,
    /// Per-step multiplicative growth of the true loss rate while subsidised.
    pub moral_hazard_factor: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            class_shares: [0.5, 0.3, 0.2],
            income: [5000.0, 12000.0, 50000.0],
            initial_wealth: [
                Interval::new(10_000.0, 15_000.0),
                Interval::new(25_000.0, 40_000.0),
                Interval::new(150_000.0, 300_000.0),
            ],
            initial_risk_perception: [
                Interval::new(0.001, 0.005),
                Interval::new(0.003, 0.01),
                Interval::new(0.005, 0.01),
            ],
            loss_rate: [
                Interval::new(0.6, 1.0),
                Interval::new(0.3, 0.6),
                Interval::new(0.0, 0.3),
            ],
            representativeness: Interval::new(2.0, 3.0),
            optimism: Interval::new(0.0, 1.0),
            myopia: Interval::new(0.0, 1.0),
            simplification: Interval::new(0.0, 1.0),
            inertia: Interval::new(0.0, 1.0),
            herding: Interval::new(0.0, 1.0),
            moral_hazard_factor: 1.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InsurerConfig {
    pub capital_mean: f64,
    pub capital_sd: f64,
    pub asset_share: Interval,
    pub exit_score: Interval,
    pub loading: Interval,
    pub solvency_percentile: Interval,
    pub catastrophe_bias: Interval,
    pub admin_cost_rate: Interval,
    /// Multiplicative error on the true catastrophe probability.
    pub model_error: Interval,
    pub modeler_fee: f64,
    /// Exit-score increment per adverse event.
    pub exit_increment: f64,
    /// Speed at which an unsold loading drifts toward the market mean.
    pub loading_adjustment: f64,
    /// Upper bound on the solvency percentile.
    pub percentile_cap: f64,
    pub max_entrants_per_step: usize,
}

impl Default for InsurerConfig {
    fn default() -> Self {
        Self {
            capital_mean: 500_000.0,
            capital_sd: 100_000.0,
            asset_share: Interval::new(0.0, 1.0),
            exit_score: Interval::new(0.0, 1.0),
            loading: Interval::new(0.0, 1.0),
            solvency_percentile: Interval::new(0.8, 1.0),
            catastrophe_bias: Interval::new(0.0, 1.0),
            admin_cost_rate: Interval::new(0.05, 0.15),
            model_error: Interval::new(0.5, 1.5),
            modeler_fee: 1000.0,
            exit_increment: 0.25,
            loading_adjustment: 0.1,
            percentile_cap: 0.999,
            max_entrants_per_step: 1,
        }
    }
}

/// Which reading of the subsidy willingness-to-pay to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsidyWtp {
    /// Incumbents value the subsidy at the premium it saves them.
    PremiumSaved,
    /// Incumbents value it at `(p - s) * exposure`, rate minus share.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GovernmentConfig {
    pub initial_treasury: f64,
    /// Fixed administrative cost `x` of an intervention.
    pub admin_cost: f64,
    /// Awareness cost per person as a multiple of `admin_cost`, per class.
    pub awareness_cost: [f64; 3],
    pub subsidy_share: f64,
    pub prevention_reduction: f64,
    /// Cost per currency unit of exposure removed by prevention.
    pub prevention_unit_cost: f64,
    pub loading_cap: f64,
    pub solvency_ease: f64,
    pub solvency_floor: f64,
    pub cry_wolf_decay: f64,
    pub tax_thresholds: [f64; 3],
    pub tax_rates: [f64; 3],
    pub reward_cap: f64,
    /// Reinsurance premium rate; defaults to the true catastrophe probability.
    pub reinsurance_rate: Option<f64>,
    pub subsidy_wtp: SubsidyWtp,
}

impl Default for GovernmentConfig {
    fn default() -> Self {
        Self {
            initial_treasury: 0.0,
            admin_cost: 100.0,
            awareness_cost: [1.5, 1.0, 0.5],
            subsidy_share: 0.3,
            prevention_reduction: 0.2,
            prevention_unit_cost: 0.1,
            loading_cap: 0.2,
            solvency_ease: 0.9,
            solvency_floor: 0.70,
            cry_wolf_decay: 0.5,
            tax_thresholds: [0.0, 10_000.0, 30_000.0],
            tax_rates: [0.02, 0.05, 0.10],
            reward_cap: 10.0,
            reinsurance_rate: None,
            subsidy_wtp: SubsidyWtp::PremiumSaved,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// `q <- (1-eta) q + eta (r + delta max q')`.
    Standard,
    /// `q <- (1-eta) q + eta delta max q'`, with no reward term.
    NoReward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    /// Fraction of training over which epsilon decays linearly.
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_fraction: 0.5,
        }
    }
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        Self {
            start: eps,
            end: eps,
            decay_fraction: 0.0,
        }
    }

    pub fn at(&self, episode: u64, total: u64) -> f64 {
        let span = self.decay_fraction * total as f64;
        if span <= 0.0 {
            return self.end;
        }
        let frac = episode as f64 / span;
        if frac >= 1.0 {
            return self.end;
        }
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub episodes: u64,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon: EpsilonSchedule,
    pub seed: u64,
    pub update_rule: UpdateRule,
    /// Steps per training episode; `None` uses the environment episode length.
    pub episode_length: Option<usize>,
    /// Episodes rolled out concurrently against a frozen table (1 = classic).
    pub rollouts: usize,
    /// Episodes per convergence-trace epoch.
    pub epoch: u64,
    pub awareness_threshold: f64,
    pub supply_threshold: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            episodes: 100_000,
            learning_rate: 0.1,
            discount: 0.9,
            epsilon: EpsilonSchedule::default(),
            seed: 0,
            update_rule: UpdateRule::Standard,
            episode_length: Some(5),
            rollouts: 1,
            epoch: 1000,
            awareness_threshold: 0.5,
            supply_threshold: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactThresholds {
    /// Terminal coverage below this counts as inadequate.
    pub inadequate_coverage: f64,
    /// Steps compared before and after a catastrophe.
    pub window: usize,
    /// Median lapse must happen within this many steps.
    pub lapse_horizon: usize,
    /// Steps after a catastrophe in which an exit counts.
    pub exit_window: usize,
}

impl Default for FactThresholds {
    fn default() -> Self {
        Self {
            inadequate_coverage: 0.05,
            window: 3,
            lapse_horizon: 10,
            exit_window: 3,
        }
    }
}

/// A legal-but-unusual setting.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigWarning {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.key, self.message)
    }
}

struct Checker {
    warnings: Vec<ConfigWarning>,
}

impl Checker {
    fn scalar(&self, key: &str, v: f64, lo: f64, hi: f64, legal: &str) -> Result<(), ConfigError> {
        if v.is_finite() && v >= lo && v <= hi {
            Ok(())
        } else {
            Err(ConfigError::OutOfRange {
                key: key.to_string(),
                value: v.to_string(),
                legal: legal.to_string(),
            })
        }
    }

    fn open_low(&self, key: &str, v: f64, legal: &str) -> Result<(), ConfigError> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(ConfigError::OutOfRange {
                key: key.to_string(),
                value: v.to_string(),
                legal: legal.to_string(),
            })
        }
    }

    fn interval(
        &mut self,
        key: &str,
        v: Interval,
        legal: Interval,
        default: Interval,
    ) -> Result<(), ConfigError> {
        if !(v.lo.is_finite() && v.hi.is_finite()) || !legal.contains(&v) {
            return Err(ConfigError::OutOfRange {
                key: key.to_string(),
                value: v.to_string(),
                legal: legal.to_string(),
            });
        }
        if v.lo > v.hi {
            return Err(ConfigError::InvertedInterval {
                key: key.to_string(),
                lo: v.lo,
                hi: v.hi,
            });
        }
        if !default.contains(&v) {
            self.warnings.push(ConfigWarning {
                key: key.to_string(),
                message: format!("{v} lies outside the calibrated default {default}"),
            });
        }
        Ok(())
    }
}

const UNIT: Interval = Interval::new(0.0, 1.0);
const NON_NEG: Interval = Interval::new(0.0, f64::MAX);
const CLASSES: [&str; 3] = ["low", "middle", "upper"];

impl ScenarioConfig {
    /// Checks every key; returns warnings for legal values outside the defaults.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>, ConfigError> {
        let mut c = Checker { warnings: Vec::new() };
        let d = ScenarioConfig::default();

        let e = &self.environment;
        c.scalar("environment.catastrophe_probability", e.catastrophe_probability, 0.0, 1.0, "[0, 1]")?;
        if e.episode_length == 0 {
            return Err(out_of_range("environment.episode_length", 0, ">= 1"));
        }
        if e.episode_length >= 1 << 24 {
            return Err(out_of_range("environment.episode_length", e.episode_length, "< 2^24"));
        }
        if e.population == 0 {
            return Err(out_of_range("environment.population", 0, ">= 1"));
        }
        c.scalar("environment.interest_rate", e.interest_rate, 0.0, 1.0, "[0, 1]")?;

        c.open_low("utility.scale", self.utility.scale, "(0, inf)")?;
        c.open_low("utility.curvature", self.utility.curvature, "(0, inf)")?;

        let p = &self.population;
        for (i, s) in p.class_shares.iter().enumerate() {
            c.scalar(&format!("population.class_shares[{}]", CLASSES[i]), *s, 0.0, 1.0, "[0, 1]")?;
        }
        let total: f64 = p.class_shares.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(out_of_range("population.class_shares", format!("sum {total}"), "sum = 1"));
        }
        for (i, class) in CLASSES.iter().enumerate() {
            c.open_low(&format!("population.income[{class}]"), p.income[i], "(0, inf)")?;
            c.interval(
                &format!("population.initial_wealth[{class}]"),
                p.initial_wealth[i],
                NON_NEG,
                d.population.initial_wealth[i],
            )?;
            c.interval(
                &format!("population.initial_risk_perception[{class}]"),
                p.initial_risk_perception[i],
                UNIT,
                d.population.initial_risk_perception[i],
            )?;
            c.interval(
                &format!("population.loss_rate[{class}]"),
                p.loss_rate[i],
                UNIT,
                d.population.loss_rate[i],
            )?;
        }
        c.interval("population.representativeness", p.representativeness, NON_NEG, d.population.representativeness)?;
        c.interval("population.optimism", p.optimism, UNIT, UNIT)?;
        c.interval("population.myopia", p.myopia, UNIT, UNIT)?;
        c.interval("population.simplification", p.simplification, UNIT, UNIT)?;
        c.interval("population.inertia", p.inertia, UNIT, UNIT)?;
        c.interval("population.herding", p.herding, UNIT, UNIT)?;
        c.scalar("population.moral_hazard_factor", p.moral_hazard_factor, 1.0, 10.0, "[1, 10]")?;

        let ins = &self.insurers;
        c.scalar("insurers.capital_mean", ins.capital_mean, 0.0, f64::MAX, "[0, inf)")?;
        c.scalar("insurers.capital_sd", ins.capital_sd, 0.0, f64::MAX, "[0, inf)")?;
        c.interval("insurers.asset_share", ins.asset_share, UNIT, UNIT)?;
        c.interval("insurers.exit_score", ins.exit_score, UNIT, UNIT)?;
        c.interval("insurers.loading", ins.loading, NON_NEG, UNIT)?;
        c.interval(
            "insurers.solvency_percentile",
            ins.solvency_percentile,
            UNIT,
            d.insurers.solvency_percentile,
        )?;
        if ins.solvency_percentile.hi <= 0.0 {
            return Err(out_of_range("insurers.solvency_percentile", ins.solvency_percentile, "upper bound in (0, 1]"));
        }
        c.interval("insurers.catastrophe_bias", ins.catastrophe_bias, UNIT, UNIT)?;
        c.interval("insurers.admin_cost_rate", ins.admin_cost_rate, UNIT, d.insurers.admin_cost_rate)?;
        c.interval("insurers.model_error", ins.model_error, Interval::new(1e-6, 100.0), d.insurers.model_error)?;
        c.scalar("insurers.modeler_fee", ins.modeler_fee, 0.0, f64::MAX, "[0, inf)")?;
        c.scalar("insurers.exit_increment", ins.exit_increment, 0.0, 1.0, "[0, 1]")?;
        c.scalar("insurers.loading_adjustment", ins.loading_adjustment, 0.0, 1.0, "[0, 1]")?;
        if !(ins.percentile_cap > 0.0 && ins.percentile_cap < 1.0) {
            return Err(out_of_range("insurers.percentile_cap", ins.percentile_cap, "(0, 1)"));
        }

        let g = &self.government;
        c.scalar("government.initial_treasury", g.initial_treasury, 0.0, f64::MAX, "[0, inf)")?;
        c.scalar("government.admin_cost", g.admin_cost, 0.0, f64::MAX, "[0, inf)")?;
        for (i, m) in g.awareness_cost.iter().enumerate() {
            c.scalar(&format!("government.awareness_cost[{}]", CLASSES[i]), *m, 0.0, f64::MAX, "[0, inf)")?;
        }
        c.scalar("government.subsidy_share", g.subsidy_share, 0.0, 1.0, "[0, 1]")?;
        c.scalar("government.prevention_reduction", g.prevention_reduction, 0.0, 1.0, "[0, 1]")?;
        c.scalar("government.prevention_unit_cost", g.prevention_unit_cost, 0.0, f64::MAX, "[0, inf)")?;
        c.scalar("government.loading_cap", g.loading_cap, 0.0, f64::MAX, "[0, inf)")?;
        c.scalar("government.solvency_ease", g.solvency_ease, 0.0, 1.0, "[0, 1]")?;
        c.scalar("government.solvency_floor", g.solvency_floor, 0.0, 1.0, "[0, 1)")?;
        if g.solvency_floor >= 1.0 {
            return Err(out_of_range("government.solvency_floor", g.solvency_floor, "[0, 1)"));
        }
        c.scalar("government.cry_wolf_decay", g.cry_wolf_decay, 0.0, 1.0, "[0, 1]")?;
        for (i, class) in CLASSES.iter().enumerate() {
            c.scalar(&format!("government.tax_rates[{class}]"), g.tax_rates[i], 0.0, 1.0, "[0, 1]")?;
            c.scalar(&format!("government.tax_thresholds[{class}]"), g.tax_thresholds[i], 0.0, f64::MAX, "[0, inf)")?;
        }
        if !(g.tax_thresholds[0] <= g.tax_thresholds[1] && g.tax_thresholds[1] <= g.tax_thresholds[2]) {
            return Err(out_of_range("government.tax_thresholds", format!("{:?}", g.tax_thresholds), "non-decreasing"));
        }
        c.open_low("government.reward_cap", g.reward_cap, "(0, inf)")?;
        if let Some(rate) = g.reinsurance_rate {
            c.scalar("government.reinsurance_rate", rate, 0.0, 1.0, "[0, 1]")?;
        }

        let t = &self.training;
        c.scalar("training.learning_rate", t.learning_rate, 0.0, 1.0, "[0, 1]")?;
        if !(t.discount >= 0.0 && t.discount < 1.0) {
            return Err(out_of_range("training.discount", t.discount, "[0, 1)"));
        }
        c.scalar("training.epsilon.start", t.epsilon.start, 0.0, 1.0, "[0, 1]")?;
        c.scalar("training.epsilon.end", t.epsilon.end, 0.0, 1.0, "[0, 1]")?;
        c.scalar("training.epsilon.decay_fraction", t.epsilon.decay_fraction, 0.0, 1.0, "[0, 1]")?;
        if t.episode_length == Some(0) {
            return Err(out_of_range("training.episode_length", 0, ">= 1"));
        }
        if t.rollouts == 0 {
            return Err(out_of_range("training.rollouts", 0, ">= 1"));
        }
        if t.epoch == 0 {
            return Err(out_of_range("training.epoch", 0, ">= 1"));
        }
        c.scalar("training.awareness_threshold", t.awareness_threshold, 0.0, f64::MAX, "[0, inf)")?;
        c.scalar("training.supply_threshold", t.supply_threshold, 0.0, f64::MAX, "[0, inf)")?;

        let m = &self.metrics;
        c.scalar("metrics.inadequate_coverage", m.inadequate_coverage, 0.0, 1.0, "[0, 1]")?;
        if m.window == 0 {
            return Err(out_of_range("metrics.window", 0, ">= 1"));
        }

        Ok(c.warnings)
    }

    /// Parses TOML text, fills defaults, validates.
    pub fn from_toml_str(text: &str) -> Result<(Self, Vec<ConfigWarning>), ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let warnings = cfg.validate()?;
        Ok((cfg, warnings))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serialises")
    }

    /// Steps per training episode.
    pub fn training_horizon(&self) -> usize {
        self.training.episode_length.unwrap_or(self.environment.episode_length)
    }

    /// Reinsurance premium rate actually charged.
    pub fn reinsurance_rate(&self) -> f64 {
        self.government
            .reinsurance_rate
            .unwrap_or(self.environment.catastrophe_probability)
    }
}

fn out_of_range(key: &str, value: impl fmt::Display, legal: &str) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.to_string(),
        value: value.to_string(),
        legal: legal.to_string(),
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<(ScenarioConfig, Vec<ConfigWarning>), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ScenarioConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let (cfg, warnings) = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert!(warnings.is_empty());
        assert_eq!(cfg.population.class_shares, [0.5, 0.3, 0.2]);
        assert_eq!(cfg.insurers.capital_mean, 500_000.0);
        assert_eq!(cfg.insurers.capital_sd, 100_000.0);
    }

    #[test]
    fn theta_above_one_rejected() {
        let err = ScenarioConfig::from_toml_str("[environment]\ncatastrophe_probability = 1.5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("environment.catastrophe_probability"), "{msg}");
        assert!(msg.contains("[0, 1]"), "{msg}");
    }

    #[test]
    fn low_percentiles_warn() {
        let (cfg, warnings) =
            ScenarioConfig::from_toml_str("[insurers]\nsolvency_percentile = [0.2, 0.4]\n").unwrap();
        assert_eq!(cfg.insurers.solvency_percentile, Interval::new(0.2, 0.4));
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].key, "insurers.solvency_percentile");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::from_toml_str("[environment]\nthetaa = 0.1\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[nonsense]\n").is_err());
    }

    #[test]
    fn zero_length_episode_rejected() {
        let err = ScenarioConfig::from_toml_str("[environment]\nepisode_length = 0\n").unwrap_err();
        assert!(err.to_string().contains("environment.episode_length"));
    }

    #[test]
    fn inverted_interval_rejected() {
        let err = ScenarioConfig::from_toml_str("[population]\nherding = [0.8, 0.2]\n").unwrap_err();
        assert!(matches!(err, ConfigError::InvertedInterval { .. }));
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.environment.seed = 99;
        cfg.government.reinsurance_rate = Some(0.031);
        cfg.insurers.capital_sd = 1.0 / 3.0;
        let text = cfg.to_toml_string();
        let (back, _) = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn epsilon_schedule_linear() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.at(0, 100), 1.0);
        assert!((s.at(25, 100) - 0.525).abs() < 1e-12);
        assert_eq!(s.at(50, 100), 0.05);
        assert_eq!(s.at(99, 100), 0.05);
        assert_eq!(EpsilonSchedule::constant(0.3).at(7, 10), 0.3);
    }
}
