//! Government: treasury, taxes, and the eight interventions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::env::{StepLog, World};
use crate::individual::{self, Contract, Provider};
use crate::insurer::premium_quote;
use crate::welfare::{
    AwarenessTerm, Covered, Enrollment, Entrant, Holder, InterventionEffects, Marginal, Treated,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Intervention {
    NoAction,
    StateInsurance,
    EaseSolvency,
    Awareness,
    Subsidy,
    PremiumRegulation,
    Prevention,
    Reinsurance,
}

impl Intervention {
    pub const ALL: [Intervention; 8] = [
        Intervention::NoAction,
        Intervention::StateInsurance,
        Intervention::EaseSolvency,
        Intervention::Awareness,
        Intervention::Subsidy,
        Intervention::PremiumRegulation,
        Intervention::Prevention,
        Intervention::Reinsurance,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Intervention::NoAction => "no-action",
            Intervention::StateInsurance => "state-insurance",
            Intervention::EaseSolvency => "ease-solvency",
            Intervention::Awareness => "awareness",
            Intervention::Subsidy => "subsidy",
            Intervention::PremiumRegulation => "premium-regulation",
            Intervention::Prevention => "prevention",
            Intervention::Reinsurance => "reinsurance",
        }
    }
}

impl fmt::Display for Intervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Intervention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|a| a.name()).collect();
                format!("unknown intervention `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Interventions in force for the next market phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyFlags {
    pub subsidy: bool,
    pub regulation: bool,
    pub last_resort: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaxBracket {
    pub threshold: f64,
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReinsuranceContract {
    pub insurer: usize,
    pub premium: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inflow {
    Taxes,
    Premiums,
    ReinsurancePremiums,
    Refunds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outflow {
    Claims,
    Subsidies,
    Programs,
}

/// Cumulative treasury flows, for closing the ledger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TreasuryFlows {
    pub taxes: f64,
    pub premiums: f64,
    pub reinsurance_premiums: f64,
    pub refunds: f64,
    pub claims: f64,
    pub subsidies: f64,
    pub programs: f64,
    pub interest: f64,
}

impl TreasuryFlows {
    pub fn net(&self) -> f64 {
        self.taxes + self.premiums + self.reinsurance_premiums + self.refunds
            - self.claims
            - self.subsidies
            - self.programs
            - self.interest
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GovernmentState {
    pub treasury: f64,
    pub debt: f64,
    pub tax_brackets: [TaxBracket; 3],
    /// Per-individual receptiveness to awareness campaigns.
    pub receptiveness: Vec<f64>,
    pub flags: PolicyFlags,
    pub reinsurance_book: Vec<ReinsuranceContract>,
    pub flows: TreasuryFlows,
    /// Insurers whose offer a state policy beat during the current market phase.
    undercut: Vec<usize>,
}

impl GovernmentState {
    pub fn new(cfg: &ScenarioConfig, population: usize) -> Self {
        let g = &cfg.government;
        let tax_brackets =
            std::array::from_fn(|k| TaxBracket { threshold: g.tax_thresholds[k], rate: g.tax_rates[k] });
        Self {
            treasury: g.initial_treasury,
            debt: 0.0,
            tax_brackets,
            receptiveness: vec![1.0; population],
            flags: PolicyFlags::default(),
            reinsurance_book: Vec::new(),
            flows: TreasuryFlows::default(),
            undercut: Vec::new(),
        }
    }

    /// Pays out of the treasury, borrowing whatever is missing.
    pub fn spend(&mut self, amount: f64, kind: Outflow) {
        if amount <= 0.0 {
            return;
        }
        match kind {
            Outflow::Claims => self.flows.claims += amount,
            Outflow::Subsidies => self.flows.subsidies += amount,
            Outflow::Programs => self.flows.programs += amount,
        }
        self.treasury -= amount;
        if self.treasury < 0.0 {
            self.debt -= self.treasury;
            self.treasury = 0.0;
        }
    }

    pub fn receive(&mut self, amount: f64, kind: Inflow) {
        if amount <= 0.0 {
            return;
        }
        match kind {
            Inflow::Taxes => self.flows.taxes += amount,
            Inflow::Premiums => self.flows.premiums += amount,
            Inflow::ReinsurancePremiums => self.flows.reinsurance_premiums += amount,
            Inflow::Refunds => self.flows.refunds += amount,
        }
        self.treasury += amount;
    }

    pub fn accrue_interest(&mut self, rate: f64) {
        let interest = self.debt * rate;
        self.debt += interest;
        self.flows.interest += interest;
    }

    /// Pays down debt from the treasury.
    pub fn service_debt(&mut self) {
        let pay = self.debt.min(self.treasury);
        self.debt -= pay;
        self.treasury -= pay;
    }

    /// A catastrophe restores full receptiveness.
    pub fn on_catastrophe(&mut self) {
        self.receptiveness.iter_mut().for_each(|r| *r = 1.0);
    }

    pub fn reinsures(&self, insurer: usize) -> bool {
        self.reinsurance_book.iter().any(|c| c.insurer == insurer)
    }

    pub fn mark_undercut(&mut self, insurer: usize) {
        if !self.undercut.contains(&insurer) {
            self.undercut.push(insurer);
        }
    }

    pub fn was_undercut(&self, insurer: usize) -> bool {
        self.undercut.contains(&insurer)
    }

    /// Flags set by an intervention last for one market phase.
    pub fn clear_market_flags(&mut self) {
        self.flags = PolicyFlags::default();
        self.reinsurance_book.clear();
        self.undercut.clear();
    }

    pub fn bracket_rate(&self, income: f64) -> f64 {
        let mut rate = self.tax_brackets[0].rate;
        for b in &self.tax_brackets {
            if income >= b.threshold {
                rate = b.rate;
            }
        }
        rate
    }
}

/// Dispatches to the matching handler. The log receives externalities that
/// arise during the intervention itself.
pub fn apply_intervention(
    world: &mut World,
    cfg: &ScenarioConfig,
    action: Intervention,
    log: &mut StepLog,
) -> InterventionEffects {
    match action {
        Intervention::NoAction => InterventionEffects::NoAction,
        Intervention::StateInsurance => provide_state_insurance(world, cfg, log),
        Intervention::EaseSolvency => ease_solvency(world, cfg),
        Intervention::Awareness => run_awareness(world, cfg, log),
        Intervention::Subsidy => apply_subsidy(world, cfg),
        Intervention::PremiumRegulation => regulate_premiums(world, cfg),
        Intervention::Prevention => grant_prevention(world, cfg),
        Intervention::Reinsurance => provide_reinsurance(world, cfg),
    }
}

/// Enrols the neediest eligible individual in a state policy priced at
/// `min(fair, pmax)`. Private policyholders are ranked by the surplus they
/// would gain from switching and are refunded by their insurer.
pub fn provide_state_insurance(world: &mut World, cfg: &ScenarioConfig, log: &mut StepLog) -> InterventionEffects {
    let theta = cfg.environment.catastrophe_probability;
    let mut best: Option<(usize, f64)> = None;
    for ind in &world.individuals {
        let on_state = matches!(ind.contract, Some(Contract { provider: Provider::Government, .. }));
        if on_state || !ind.gov_eligible || ind.exposure() <= 0.0 {
            continue;
        }
        let score = match ind.contract {
            Some(c) => ind.max_premium - c.paid,
            None => ind.max_premium,
        };
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((ind.id, score));
        }
    }
    let Some((id, _)) = best else {
        return InterventionEffects::StateInsurance { enrollee: None };
    };

    let (exposure, pmax, previous) = {
        let ind = &world.individuals[id];
        (ind.exposure(), ind.max_premium.max(0.0), ind.contract)
    };
    let fair = theta * exposure;
    let premium = fair.min(pmax).min(world.individuals[id].wealth);
    log.state_insurance_deficit += fair - premium;

    let perceived_exposure = world.individuals[id].perceived_exposure();
    let mut private_rate = 0.0;
    if let Some(c) = previous {
        if let Provider::Insurer(ins_id) = c.provider {
            private_rate = if exposure > 0.0 { c.premium / exposure } else { 0.0 };
            let ins = &mut world.insurers[ins_id];
            ins.policies.retain(|&p| p != id);
            ins.liability -= exposure;
            ins.capital -= c.premium;
            world.individuals[id].wealth += c.paid;
            world.flows.refunds += c.paid;
            world.government.receive(c.subsidy, Inflow::Refunds);
            ins.rebalance_reserves();
        }
    }
    let ind = &mut world.individuals[id];
    ind.wealth -= premium;
    world.flows.premiums += premium;
    ind.contract = Some(Contract {
        provider: Provider::Government,
        premium,
        paid: premium,
        subsidy: 0.0,
        rate: theta,
    });
    world.government.receive(premium, Inflow::Premiums);
    world.government.spend(cfg.government.admin_cost, Outflow::Programs);
    InterventionEffects::StateInsurance {
        enrollee: Some(Enrollment {
            id,
            was_uninsured: previous.is_none(),
            max_premium: pmax,
            private_rate,
            government_rate: if exposure > 0.0 { premium / exposure } else { 0.0 },
            perceived_exposure,
        }),
    }
}

/// Eased percentile: scaled down, never below the floor, never raised.
pub fn eased_percentile(rho: f64, factor: f64, floor: f64) -> f64 {
    if rho <= floor {
        rho
    } else {
        (rho * factor).max(floor)
    }
}

/// Lowers every insurer's solvency percentile. Uninsured individuals who
/// could buy from the extra capacity are the marginal purchasers.
pub fn ease_solvency(world: &mut World, cfg: &ScenarioConfig) -> InterventionEffects {
    let g = &cfg.government;
    let n = world.individuals.len() as u64;
    let mut extra: Vec<(usize, u64)> = Vec::new();
    for ins in world.insurers.iter_mut().filter(|i| i.active) {
        let before = ins.capacity_or(n);
        ins.solvency_percentile = eased_percentile(ins.solvency_percentile, g.solvency_ease, g.solvency_floor);
        let after = ins.capacity_or(n);
        if after > before {
            extra.push((ins.id, after - before));
        }
    }
    let mut marginal = Vec::new();
    for ind in world.individuals.iter().filter(|i| i.contract.is_none()) {
        let mut choice: Option<(usize, f64)> = None;
        for (k, (id, left)) in extra.iter().enumerate() {
            if *left == 0 {
                continue;
            }
            let ins = &world.insurers[*id];
            let (rate, loading) = world.effective_pricing(ins, cfg);
            let q = premium_quote(rate, loading, ind.loss_rate, ind.wealth);
            if q > 0.0 && q <= ind.max_premium && q <= ind.wealth && choice.is_none_or(|(_, b)| q < b) {
                choice = Some((k, q));
            }
        }
        if let Some((k, _)) = choice {
            extra[k].1 -= 1;
            marginal.push(Marginal {
                id: ind.id,
                max_premium: ind.max_premium,
            });
        }
    }
    world.government.spend(g.admin_cost, Outflow::Programs);
    InterventionEffects::EaseSolvency { marginal }
}

/// Moves beliefs toward the truth by each individual's receptiveness, then
/// decays receptiveness.
pub fn run_awareness(world: &mut World, cfg: &ScenarioConfig, log: &mut StepLog) -> InterventionEffects {
    let theta = cfg.environment.catastrophe_probability;
    let decay = cfg.government.cry_wolf_decay;
    let utility = world.utility;
    let mut terms = Vec::with_capacity(world.individuals.len());
    let mut class_counts = [0usize; 3];
    let mut cost = 0.0;
    for ind in &mut world.individuals {
        let rec = world.government.receptiveness[ind.id];
        let before = individual::pmax_rational(ind.wealth, ind.risk_perception, ind.perceived_loss_rate, &utility);
        log.cry_wolf += (1.0 - rec) * (theta - ind.risk_perception).max(0.0) * ind.exposure();
        ind.risk_perception += rec * (theta - ind.risk_perception);
        ind.perceived_loss_rate += rec * (ind.loss_rate - ind.perceived_loss_rate);
        let corrected = individual::pmax_rational(ind.wealth, ind.risk_perception, ind.perceived_loss_rate, &utility);
        terms.push(AwarenessTerm {
            id: ind.id,
            before,
            corrected,
        });
        class_counts[ind.class.index()] += 1;
        cost += cfg.government.awareness_cost[ind.class.index()] * cfg.government.admin_cost;
    }
    world.government.receptiveness.iter_mut().for_each(|r| *r *= decay);
    world.government.spend(cost, Outflow::Programs);
    InterventionEffects::Awareness { terms, class_counts }
}

/// Cheapest quote any active insurer offers, with the rate behind it.
fn cheapest_offer(world: &World, cfg: &ScenarioConfig, id: usize, regulated: bool) -> Option<(f64, f64)> {
    let ind = &world.individuals[id];
    let theta = cfg.environment.catastrophe_probability;
    world
        .active_insurers()
        .map(|ins| {
            let (mut rate, mut loading) = world.effective_pricing(ins, cfg);
            if regulated {
                rate = rate.min(theta);
                loading = loading.min(cfg.government.loading_cap);
            }
            (premium_quote(rate, loading, ind.loss_rate, ind.wealth), rate * (1.0 + loading))
        })
        .filter(|(q, _)| *q > 0.0)
        .fold(None, |acc: Option<(f64, f64)>, q| match acc {
            Some(a) if a.0 <= q.0 => Some(a),
            _ => Some(q),
        })
}

/// The treasury pays a share of every premium in the next market phase.
pub fn apply_subsidy(world: &mut World, cfg: &ScenarioConfig) -> InterventionEffects {
    let s = cfg.government.subsidy_share;
    let mut incumbents = Vec::new();
    let mut entrants = Vec::new();
    for ind in &world.individuals {
        match ind.contract {
            Some(Contract { provider: Provider::Insurer(_), rate, .. }) => incumbents.push(Holder {
                id: ind.id,
                rate,
                perceived_exposure: ind.perceived_exposure(),
            }),
            Some(_) => {}
            None => {
                if let Some((quote, _)) = cheapest_offer(world, cfg, ind.id, false) {
                    let subsidised = (1.0 - s) * quote;
                    if quote > ind.max_premium && subsidised <= ind.max_premium && subsidised <= ind.wealth {
                        let rate = if ind.exposure() > 0.0 { quote / ind.exposure() } else { 0.0 };
                        entrants.push(Entrant {
                            id: ind.id,
                            max_premium: ind.max_premium,
                            rate,
                            perceived_exposure: ind.perceived_exposure(),
                        });
                    }
                }
            }
        }
    }
    world.government.flags.subsidy = s > 0.0;
    InterventionEffects::Subsidy {
        share: s,
        incumbents,
        entrants,
    }
}

/// Caps risk rates at the true probability and loadings at the cap for the
/// next market phase.
pub fn regulate_premiums(world: &mut World, cfg: &ScenarioConfig) -> InterventionEffects {
    let theta = cfg.environment.catastrophe_probability;
    let cap = cfg.government.loading_cap;
    let mut incumbents = Vec::new();
    let mut entrants = Vec::new();
    for ind in &world.individuals {
        match ind.contract {
            Some(Contract { provider: Provider::Insurer(id), .. }) => {
                let ins = &world.insurers[id];
                let (rate, loading) = world.effective_pricing(ins, cfg);
                incumbents.push(crate::welfare::RegulatedHolder {
                    id: ind.id,
                    rate_before: rate * (1.0 + loading),
                    rate_after: rate.min(theta) * (1.0 + loading.min(cap)),
                    perceived_exposure: ind.perceived_exposure(),
                });
            }
            Some(_) => {}
            None => {
                let now = cheapest_offer(world, cfg, ind.id, false);
                let after = cheapest_offer(world, cfg, ind.id, true);
                if let (Some((q_now, _)), Some((q_after, rate_after))) = (now, after) {
                    if q_now > ind.max_premium && q_after <= ind.max_premium && q_after <= ind.wealth {
                        entrants.push(Entrant {
                            id: ind.id,
                            max_premium: ind.max_premium,
                            rate: rate_after,
                            perceived_exposure: ind.perceived_exposure(),
                        });
                    }
                }
            }
        }
    }
    world.government.flags.regulation = true;
    world.government.spend(cfg.government.admin_cost, Outflow::Programs);
    InterventionEffects::PremiumRegulation { incumbents, entrants }
}

/// Gives one prevention measure to the individual with the highest true loss
/// rate (lowest id on ties).
pub fn grant_prevention(world: &mut World, cfg: &ScenarioConfig) -> InterventionEffects {
    let mut best: Option<usize> = None;
    for ind in &world.individuals {
        if ind.loss_rate > 0.0 && best.is_none_or(|b| ind.loss_rate > world.individuals[b].loss_rate) {
            best = Some(ind.id);
        }
    }
    let Some(id) = best else {
        return InterventionEffects::Prevention { treated: None };
    };
    let ind = &mut world.individuals[id];
    let before = ind.loss_rate;
    let after = (before - cfg.government.prevention_reduction).max(0.0);
    ind.perceived_loss_rate *= after / before;
    ind.loss_rate = after;
    let treated = Treated {
        id,
        loss_rate_before: before,
        loss_rate_after: after,
        risk_perception: ind.risk_perception,
        wealth: ind.wealth,
    };
    let cost = cfg.government.prevention_unit_cost * (before - after) * treated.wealth;
    world.government.spend(cost, Outflow::Programs);
    InterventionEffects::Prevention { treated: Some(treated) }
}

/// Sells every active insurer cover on its current book and stands behind any
/// failing insurer during the next market phase.
pub fn provide_reinsurance(world: &mut World, cfg: &ScenarioConfig) -> InterventionEffects {
    let rate = cfg.reinsurance_rate();
    let mut shortfalls = Vec::new();
    let mut book = Vec::new();
    for ins in world.insurers.iter_mut().filter(|i| i.active) {
        let premium = (rate * ins.liability).min(ins.total_assets().max(0.0));
        ins.capital -= premium;
        shortfalls.push((ins.liability - ins.total_assets()).max(0.0));
        book.push(ReinsuranceContract {
            insurer: ins.id,
            premium,
        });
    }
    for c in &book {
        world.government.receive(c.premium, Inflow::ReinsurancePremiums);
    }
    world.government.reinsurance_book = book;
    world.government.flags.last_resort = true;

    let holders = world
        .individuals
        .iter()
        .filter_map(|ind| match ind.contract {
            Some(Contract { provider: Provider::Insurer(id), .. }) => Some(Covered {
                id: ind.id,
                exit_score: world.insurers[id].exit_score,
                risk_perception: ind.risk_perception,
                perceived_exposure: ind.perceived_exposure(),
            }),
            _ => None,
        })
        .collect();
    InterventionEffects::Reinsurance { holders, shortfalls }
}

/// Result of one tax collection.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TaxOutcome {
    pub multiplier: f64,
    pub baseline: f64,
    pub collected: f64,
    /// Revenue raised above what baseline rates would have collected.
    pub raise: f64,
}

/// Collects progressive income taxes. If baseline rates cannot cover the
/// required revenue plus outstanding debt, all rates scale by a common
/// multiplier, capped so that no rate exceeds 100%. Taxes are taken from
/// wealth and never exceed it.
pub fn collect_taxes(world: &mut World, _cfg: &ScenarioConfig, required_revenue: f64) -> TaxOutcome {
    let gov = &mut world.government;
    gov.service_debt();
    let target = required_revenue.max(0.0) + gov.debt;
    let baseline: f64 = world.individuals.iter().map(|i| gov.bracket_rate(i.income) * i.income).sum();
    let max_rate = gov.tax_brackets.iter().map(|b| b.rate).fold(0.0, f64::max);
    let multiplier = if baseline >= target || baseline <= 0.0 {
        1.0
    } else {
        (target / baseline).min(if max_rate > 0.0 { 1.0 / max_rate } else { 1.0 })
    };
    let mut collected = 0.0;
    let mut at_baseline = 0.0;
    for ind in &mut world.individuals {
        let rate = gov.bracket_rate(ind.income);
        let tax = (multiplier * rate * ind.income).min(ind.wealth.max(0.0));
        at_baseline += (rate * ind.income).min(ind.wealth.max(0.0));
        ind.wealth -= tax;
        collected += tax;
    }
    world.flows.taxes += collected;
    gov.receive(collected, Inflow::Taxes);
    gov.service_debt();
    TaxOutcome {
        multiplier,
        baseline,
        collected,
        raise: (collected - at_baseline).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for a in Intervention::ALL {
            assert_eq!(a.name().parse::<Intervention>().unwrap(), a);
            assert_eq!(Intervention::from_index(a.index()), Some(a));
        }
        assert!("bogus".parse::<Intervention>().is_err());
    }

    #[test]
    fn eased_percentile_examples() {
        assert!((eased_percentile(0.9, 0.9, 0.7) - 0.81).abs() < 1e-12);
        assert_eq!(eased_percentile(0.72, 0.9, 0.7), 0.70);
        assert_eq!(eased_percentile(0.70, 0.9, 0.7), 0.70);
        assert_eq!(eased_percentile(0.3, 0.9, 0.7), 0.3);
    }

    #[test]
    fn borrowing_and_repayment() {
        let cfg = ScenarioConfig::default();
        let mut g = GovernmentState::new(&cfg, 3);
        g.receive(100.0, Inflow::Taxes);
        g.spend(250.0, Outflow::Claims);
        assert_eq!((g.treasury, g.debt), (0.0, 150.0));
        g.accrue_interest(0.1);
        assert!((g.debt - 165.0).abs() < 1e-12);
        g.receive(200.0, Inflow::Taxes);
        g.service_debt();
        assert!((g.treasury - 35.0).abs() < 1e-12);
        assert_eq!(g.debt, 0.0);
        let net = g.flows.net();
        assert!((net - (g.treasury - g.debt)).abs() < 1e-9);
    }

    #[test]
    fn bracket_lookup() {
        let cfg = ScenarioConfig::default();
        let g = GovernmentState::new(&cfg, 0);
        assert_eq!(g.bracket_rate(5000.0), 0.02);
        assert_eq!(g.bracket_rate(12_000.0), 0.05);
        assert_eq!(g.bracket_rate(50_000.0), 0.10);
    }
}
