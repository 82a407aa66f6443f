//! Insurers: loss models, reserves, pricing, and the claim waterfall.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::config::{InsurerConfig, Interval};
use crate::error::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    /// Modelled per-step catastrophe probability, the risk premium rate.
    pub rate: f64,
    pub loss_mean: f64,
    pub loss_sd: f64,
    pub modeler_fee: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accounts {
    /// This step's premiums net of administration costs.
    pub profits: f64,
    pub reserves: f64,
    pub reinsurance: f64,
}

/// Flows recorded during the current step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepBook {
    pub premiums: f64,
    pub admin: f64,
    pub claims: f64,
    pub sales: usize,
    pub drew_capital: bool,
}

impl StepBook {
    pub fn profit(&self) -> f64 {
        self.premiums - self.admin - self.claims
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsurerState {
    pub id: usize,
    pub capital: f64,
    /// Fraction of assets available to back new policies.
    pub asset_share: f64,
    pub exit_score: f64,
    pub loading: f64,
    pub solvency_percentile: f64,
    pub catastrophe_bias: f64,
    pub admin_cost_rate: f64,
    pub loss_model: LossModel,
    pub accounts: Accounts,
    /// Individual ids holding a contract with this insurer.
    pub policies: Vec<usize>,
    /// Liability (sum of insured exposures at sale) of the current book.
    pub liability: f64,
    pub active: bool,
    pub book: StepBook,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, iv: Interval) -> f64 {
    if iv.hi > iv.lo {
        rng.random_range(iv.lo..=iv.hi)
    } else {
        // Still consume a draw so streams stay aligned.
        let _: f64 = rng.random();
        iv.lo
    }
}

/// Population mean and standard deviation (divisor n) of the exposures.
pub fn exposure_moments(exposures: &[f64]) -> (f64, f64) {
    if exposures.is_empty() {
        return (0.0, 0.0);
    }
    let n = exposures.len() as f64;
    let mean = exposures.iter().sum::<f64>() / n;
    let var = exposures.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.max(0.0).sqrt())
}

/// Picks a risk modeller: a multiplicative error on the true probability and
/// the current societal exposure moments.
pub fn choose_loss_model<R: Rng + ?Sized>(
    rng: &mut R,
    theta: f64,
    exposures: &[f64],
    error: Interval,
    modeler_fee: f64,
) -> LossModel {
    let e = uniform(rng, error);
    let (loss_mean, loss_sd) = exposure_moments(exposures);
    LossModel {
        rate: theta * e,
        loss_mean,
        loss_sd,
        modeler_fee,
    }
}

/// Normal quantile of the loss distribution at `percentile`, floored at 0.
pub fn reserve_per_policy(percentile: f64, mean: f64, sd: f64) -> Result<f64, ModelError> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(ModelError::PercentileOutOfRange(percentile));
    }
    if sd <= 0.0 {
        return Ok(mean.max(0.0));
    }
    let dist = StatNormal::new(mean, sd).expect("finite mean and positive sd");
    Ok(dist.inverse_cdf(percentile).max(0.0))
}

/// `rate (1 + loading) * exposure`.
pub fn premium_quote(rate: f64, loading: f64, loss_rate: f64, wealth: f64) -> f64 {
    rate * (1.0 + loading) * (loss_rate * wealth)
}

/// Expected profit of one sale with claim size `x`.
pub fn expected_profit(rate: f64, loading: f64, x: f64, admin_cost_rate: f64) -> f64 {
    rate * (1.0 + loading) * x - rate * x - admin_cost_rate * rate * x
}

/// Capacity in policies. Errors when the reserve per policy is not positive.
pub fn capacity(asset_share: f64, assets: f64, reserve: f64) -> Result<u64, ModelError> {
    if !(reserve > 0.0) {
        return Err(ModelError::ZeroReserve(reserve));
    }
    let raw = (asset_share * assets.max(0.0) / reserve).floor();
    Ok(if raw.is_finite() { raw.max(0.0) as u64 } else { 0 })
}

/// Outcome of paying a batch of claims.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Settlement {
    pub from_reserves: f64,
    pub from_capital: f64,
    pub from_reinsurance: f64,
    pub unpaid: f64,
}

impl Settlement {
    pub fn paid(&self) -> f64 {
        self.from_reserves + self.from_capital + self.from_reinsurance
    }
}

impl InsurerState {
    /// Draws a fresh insurer. The modeller fee is charged to capital.
    pub fn draw<R: Rng + ?Sized>(
        id: usize,
        cfg: &InsurerConfig,
        theta: f64,
        exposures: &[f64],
        rng: &mut R,
    ) -> Self {
        let capital = if cfg.capital_sd > 0.0 {
            Normal::new(cfg.capital_mean, cfg.capital_sd)
                .expect("validated capital distribution")
                .sample(rng)
        } else {
            let _: f64 = rng.random();
            cfg.capital_mean
        };
        let asset_share = uniform(rng, cfg.asset_share);
        let exit_score = uniform(rng, cfg.exit_score);
        let loading = uniform(rng, cfg.loading);
        let solvency_percentile = uniform(rng, cfg.solvency_percentile).clamp(1e-6, cfg.percentile_cap);
        let catastrophe_bias = uniform(rng, cfg.catastrophe_bias);
        let admin_cost_rate = uniform(rng, cfg.admin_cost_rate);
        let loss_model = choose_loss_model(rng, theta, exposures, cfg.model_error, cfg.modeler_fee);
        Self {
            id,
            capital: capital.max(0.0) - loss_model.modeler_fee,
            asset_share,
            exit_score,
            loading,
            solvency_percentile,
            catastrophe_bias,
            admin_cost_rate,
            loss_model,
            accounts: Accounts::default(),
            policies: Vec::new(),
            liability: 0.0,
            active: true,
            book: StepBook::default(),
        }
    }

    pub fn total_assets(&self) -> f64 {
        self.capital + self.accounts.profits + self.accounts.reserves + self.accounts.reinsurance
    }

    pub fn reserve_per_policy(&self) -> Result<f64, ModelError> {
        reserve_per_policy(
            self.solvency_percentile,
            self.loss_model.loss_mean,
            self.loss_model.loss_sd,
        )
    }

    /// Policies the insurer is willing to hold in total.
    pub fn supply_capacity(&self) -> Result<u64, ModelError> {
        capacity(self.asset_share, self.total_assets(), self.reserve_per_policy()?)
    }

    /// Capacity, treating a zero reserve requirement as unlimited supply
    /// bounded by the population.
    pub fn capacity_or(&self, unlimited: u64) -> u64 {
        match self.supply_capacity() {
            Ok(c) => c,
            Err(_) => {
                if self.asset_share > 0.0 && self.total_assets() > 0.0 {
                    unlimited
                } else {
                    0
                }
            }
        }
    }

    /// Raises the modelled rate and reserving percentile, shrinks the asset
    /// share, all by the insurer's bias.
    pub fn respond_to_catastrophe(&mut self, percentile_cap: f64) {
        let b = self.catastrophe_bias;
        self.loss_model.rate *= 1.0 + b;
        self.solvency_percentile = (self.solvency_percentile * (1.0 + b)).min(percentile_cap);
        self.asset_share *= 1.0 - b;
    }

    /// Refreshes exposure moments, reacts to a catastrophe, rebalances reserves.
    pub fn update_loss_model(&mut self, exposures: &[f64], catastrophe: bool, percentile_cap: f64) {
        let (mean, sd) = exposure_moments(exposures);
        self.loss_model.loss_mean = mean;
        self.loss_model.loss_sd = sd;
        if catastrophe {
            self.respond_to_catastrophe(percentile_cap);
        }
        self.rebalance_reserves();
    }

    /// Moves funds between capital and reserves so reserves back the book.
    /// If capital cannot cover the target, reserves hold what is available.
    pub fn rebalance_reserves(&mut self) {
        let per = self.reserve_per_policy().unwrap_or(0.0);
        let target = per * self.policies.len() as f64;
        let available = self.capital + self.accounts.reserves;
        let reserves = target.min(available.max(0.0));
        self.capital = available - reserves;
        self.accounts.reserves = reserves;
    }

    /// Loading drifts toward `min(own, market mean)` after a step without sales.
    pub fn adjust_loading(&mut self, market_mean: f64, sales: usize, speed: f64) {
        if sales > 0 {
            return;
        }
        let target = self.loading.min(market_mean);
        self.loading -= speed * (self.loading - target);
    }

    /// Books a sale: premium in, administration cost out.
    pub fn record_sale(&mut self, individual: usize, premium: f64, rate: f64, exposure: f64) {
        let admin = self.admin_cost_rate * rate * exposure;
        self.accounts.profits += premium - admin;
        self.book.premiums += premium;
        self.book.admin += admin;
        self.book.sales += 1;
        self.policies.push(individual);
        self.liability += exposure;
    }

    /// Pays `amount` from reserves, then capital, then the reinsurance account.
    pub fn settle_claims(&mut self, amount: f64) -> Settlement {
        let mut due = amount.max(0.0);
        let from_reserves = due.min(self.accounts.reserves.max(0.0));
        self.accounts.reserves -= from_reserves;
        due -= from_reserves;
        let from_capital = due.min(self.capital.max(0.0));
        self.capital -= from_capital;
        due -= from_capital;
        if from_capital > 0.0 {
            self.book.drew_capital = true;
        }
        let from_reinsurance = due.min(self.accounts.reinsurance.max(0.0));
        self.accounts.reinsurance -= from_reinsurance;
        due -= from_reinsurance;
        let s = Settlement {
            from_reserves,
            from_capital,
            from_reinsurance,
            unpaid: due,
        };
        self.book.claims += s.paid();
        s
    }

    /// Closes the step: profits and interest roll into capital.
    pub fn close_step(&mut self, interest_rate: f64) {
        self.capital = (1.0 + interest_rate) * self.capital + self.accounts.profits;
        self.accounts.profits = 0.0;
    }

    /// Number of adverse events this step.
    pub fn adverse_events(&self) -> u32 {
        u32::from(self.book.profit() < 0.0) + u32::from(self.book.sales == 0) + u32::from(self.book.drew_capital)
    }

    /// Marks the insurer as gone; the caller handles its contracts.
    pub fn deactivate(&mut self) {
        self.active = false;
        self.policies.clear();
        self.liability = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn sample_insurer() -> InsurerState {
        InsurerState {
            id: 0,
            capital: 500_000.0,
            asset_share: 0.5,
            exit_score: 0.1,
            loading: 0.5,
            solvency_percentile: 0.9,
            catastrophe_bias: 0.5,
            admin_cost_rate: 0.1,
            loss_model: LossModel {
                rate: 0.02,
                loss_mean: 100.0,
                loss_sd: 10.0,
                modeler_fee: 1000.0,
            },
            accounts: Accounts::default(),
            policies: Vec::new(),
            liability: 0.0,
            active: true,
            book: StepBook::default(),
        }
    }

    #[test]
    fn loss_model_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = choose_loss_model(&mut rng, 0.02, &[100.0, 100.0], Interval::point(1.0), 1000.0);
        assert_eq!(m.rate, 0.02);
        assert_eq!((m.loss_mean, m.loss_sd), (100.0, 0.0));
        let (mean, sd) = exposure_moments(&[0.0, 200.0]);
        assert_eq!((mean, sd), (100.0, 100.0));
    }

    #[test]
    fn reserve_examples() {
        assert!((reserve_per_policy(0.5, 100.0, 10.0).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(reserve_per_policy(0.99, 100.0, 0.0).unwrap(), 100.0);
        assert!(reserve_per_policy(0.0, 100.0, 10.0).is_err());
        assert!(reserve_per_policy(1.0, 100.0, 10.0).is_err());
        assert_eq!(reserve_per_policy(0.01, 1.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn catastrophe_response() {
        let mut ins = sample_insurer();
        ins.respond_to_catastrophe(0.999);
        assert!((ins.loss_model.rate - 0.03).abs() < 1e-12);
        assert_eq!(ins.solvency_percentile, 0.999);
        assert!((ins.asset_share - 0.25).abs() < 1e-12);
        let mut calm = sample_insurer();
        calm.catastrophe_bias = 0.0;
        let before = calm.clone();
        calm.respond_to_catastrophe(0.999);
        assert_eq!(calm, before);
    }

    #[test]
    fn asset_sums() {
        let mut ins = sample_insurer();
        ins.capital = 0.0;
        assert_eq!(ins.total_assets(), 0.0);
        ins.capital = 500_000.0;
        ins.accounts.profits = 100.0;
        ins.accounts.reserves = 2000.0;
        assert_eq!(ins.total_assets(), 502_100.0);
        ins.accounts.profits = -100.0;
        assert_eq!(ins.total_assets(), 501_900.0);
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity(0.5, 1_000_000.0, 10_000.0).unwrap(), 50);
        assert_eq!(capacity(0.0, 1_000_000.0, 10_000.0).unwrap(), 0);
        assert_eq!(capacity(1.0, 9_999.0, 10_000.0).unwrap(), 0);
        assert!(capacity(1.0, 9_999.0, 0.0).is_err());
    }

    #[test]
    fn quote_examples() {
        assert!((premium_quote(0.02, 0.5, 1.0, 30_000.0) - 900.0).abs() < 1e-9);
        assert!((premium_quote(0.02, 0.0, 1.0, 30_000.0) - 600.0).abs() < 1e-9);
        assert_eq!(premium_quote(0.02, 0.5, 0.4, 0.0), 0.0);
    }

    #[test]
    fn profit_examples() {
        assert!((expected_profit(0.02, 0.5, 10_000.0, 0.1) - 80.0).abs() < 1e-9);
        assert_eq!(expected_profit(0.02, 0.0, 10_000.0, 0.0), 0.0);
        assert!((expected_profit(0.02, 0.05, 10_000.0, 0.1) + 10.0).abs() < 1e-9);
    }

    #[test]
    fn loading_drift() {
        let mut ins = sample_insurer();
        ins.loading = 1.0;
        ins.adjust_loading(0.5, 3, 0.1);
        assert_eq!(ins.loading, 1.0);
        ins.adjust_loading(0.5, 0, 0.1);
        assert!((ins.loading - 0.95).abs() < 1e-12);
        ins.loading = 0.2;
        ins.adjust_loading(0.5, 0, 0.1);
        assert_eq!(ins.loading, 0.2);
    }

    #[test]
    fn waterfall() {
        let mut ins = sample_insurer();
        ins.capital = 50.0;
        ins.accounts.reserves = 100.0;
        let s = ins.settle_claims(300.0);
        assert_eq!(s.from_reserves, 100.0);
        assert_eq!(s.from_capital, 50.0);
        assert_eq!(s.unpaid, 150.0);
        assert!(ins.book.drew_capital);
    }

    #[test]
    fn rebalance_matches_book() {
        let mut ins = sample_insurer();
        ins.policies = vec![1, 2, 3];
        ins.rebalance_reserves();
        let per = ins.reserve_per_policy().unwrap();
        assert!((ins.accounts.reserves - 3.0 * per).abs() < 1e-9);
        assert!((ins.capital + ins.accounts.reserves - 500_000.0).abs() < 1e-6);
    }

    #[test]
    fn loss_model_update_scales_with_wealth() {
        let mut ins = sample_insurer();
        ins.update_loss_model(&[100.0, 300.0], false, 0.999);
        let m1 = ins.loss_model.loss_mean;
        ins.update_loss_model(&[200.0, 600.0], false, 0.999);
        assert_eq!(ins.loss_model.loss_mean, 2.0 * m1);
        let before = ins.accounts.reserves;
        ins.update_loss_model(&[200.0, 600.0], false, 0.999);
        assert_eq!(ins.accounts.reserves, before);
        ins.catastrophe_bias = 0.2;
        let r = ins.loss_model.rate;
        ins.update_loss_model(&[200.0, 600.0], true, 0.999);
        assert!((ins.loss_model.rate - 1.2 * r).abs() < 1e-15);
    }
}
