//! World state and the per-step market timeline.
//!
//! Each step runs, in order: catastrophe trial, losses and claim settlement,
//! belief updates, consumption and saving, insurance demand with premium
//! collection, insurer model updates with exit and entry. When a government
//! is present it intervenes once after the market clears.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Interval, ScenarioConfig};
use crate::error::ModelError;
use crate::government::{self, GovernmentState, Intervention};
use crate::individual::{
    self, BiasProfile, Choice, ConsumptionProblem, Contract, DemandContext, IndividualState,
    ParetoUtility, Provider, Quote, SocialClass,
};
use crate::insurer::InsurerState;
use crate::metrics;
use crate::rl::{classify_state, MarketStateId, QTable};
use crate::rng::{StreamTag, Streams};
use crate::welfare::{self, InterventionEffects, WelfareRecord};

/// Quantities the welfare module needs from a step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub catastrophe_losses: f64,
    /// Claims left unpaid by failing insurers without a reinsurance contract.
    pub unmet_claims: f64,
    /// Assets of insurers that left after the government undercut them.
    pub crowded_out_assets: f64,
    pub debt_tax_raise: f64,
    pub cry_wolf: f64,
    pub moral_hazard: f64,
    /// Gap between fair and charged premium on new state policies.
    pub state_insurance_deficit: f64,
    pub last_resort_paid: f64,
    pub reinsurance_paid: f64,
}

impl StepLog {
    pub fn absorb(&mut self, other: &StepLog) {
        self.catastrophe_losses += other.catastrophe_losses;
        self.unmet_claims += other.unmet_claims;
        self.crowded_out_assets += other.crowded_out_assets;
        self.debt_tax_raise += other.debt_tax_raise;
        self.cry_wolf += other.cry_wolf;
        self.moral_hazard += other.moral_hazard;
        self.state_insurance_deficit += other.state_insurance_deficit;
        self.last_resort_paid += other.last_resort_paid;
        self.reinsurance_paid += other.reinsurance_paid;
    }
}

/// Aggregate household flows of one step, used to close the wealth ledger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WealthFlows {
    pub savings: f64,
    pub interest: f64,
    pub losses: f64,
    pub claims: f64,
    pub premiums: f64,
    pub refunds: f64,
    pub taxes: f64,
}

impl WealthFlows {
    pub fn net(&self) -> f64 {
        self.savings + self.interest - self.losses + self.claims - self.premiums + self.refunds - self.taxes
    }
}

/// Market observables of one step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarketSummary {
    pub catastrophe: bool,
    pub coverage: f64,
    pub insured: usize,
    pub new_policies: usize,
    pub entries: Vec<usize>,
    pub exits: Vec<usize>,
    pub insolvencies: Vec<usize>,
    /// Individuals with a positive premium bound below every offer they saw.
    pub unserved: usize,
    /// Loaded rate `p (1 + l)` quoted by each active insurer during demand.
    pub quoted_rates: Vec<(usize, f64)>,
}

impl MarketSummary {
    pub fn mean_quoted_rate(&self) -> Option<f64> {
        if self.quoted_rates.is_empty() {
            None
        } else {
            Some(self.quoted_rates.iter().map(|(_, r)| r).sum::<f64>() / self.quoted_rates.len() as f64)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub t: usize,
    pub individuals: Vec<IndividualState>,
    pub insurers: Vec<InsurerState>,
    pub government: GovernmentState,
    pub catastrophe_log: Vec<usize>,
    /// Class means of the premium bound from the previous demand stage.
    pub class_mean_pmax: [Option<f64>; 3],
    /// Cheapest payable offer each individual saw at the last demand stage.
    pub best_offer: Vec<Option<f64>>,
    pub log: StepLog,
    pub flows: WealthFlows,
    pub utility: ParetoUtility,
    streams: Streams,
    next_insurer_id: usize,
}

fn draw<R: Rng + ?Sized>(rng: &mut R, iv: Interval) -> f64 {
    if iv.hi > iv.lo {
        rng.random_range(iv.lo..=iv.hi)
    } else {
        let _: f64 = rng.random();
        iv.lo
    }
}

/// Class of the i-th of n individuals: the first shares are low, then middle,
/// then upper, using rounded cumulative shares.
fn class_of(i: usize, n: usize, shares: &[f64; 3]) -> SocialClass {
    let low = (shares[0] * n as f64).round() as usize;
    let mid = ((shares[0] + shares[1]) * n as f64).round() as usize;
    if i < low {
        SocialClass::Low
    } else if i < mid {
        SocialClass::Middle
    } else {
        SocialClass::Upper
    }
}

/// Draws the initial population.
pub fn draw_population(cfg: &ScenarioConfig, streams: &Streams) -> Vec<IndividualState> {
    let p = &cfg.population;
    let n = cfg.environment.population;
    (0..n)
        .map(|i| {
            let mut rng = streams.stream(0, StreamTag::Population, i as u64);
            let class = class_of(i, n, &p.class_shares);
            let c = class.index();
            let wealth = draw(&mut rng, p.initial_wealth[c]);
            let risk_perception = draw(&mut rng, p.initial_risk_perception[c]);
            let loss_rate = draw(&mut rng, p.loss_rate[c]);
            let biases = BiasProfile {
                representativeness: draw(&mut rng, p.representativeness),
                optimism: draw(&mut rng, p.optimism),
                myopia: draw(&mut rng, p.myopia),
                simplification: draw(&mut rng, p.simplification),
                inertia: draw(&mut rng, p.inertia),
                herding: draw(&mut rng, p.herding),
            };
            IndividualState {
                id: i,
                class,
                income: p.income[c],
                consumption: 0.0,
                savings: 0.0,
                wealth,
                loss_rate,
                perceived_loss_rate: individual::perceived_loss_rate(loss_rate, biases.optimism),
                risk_perception,
                biases,
                contract: None,
                gov_eligible: true,
                max_premium: 0.0,
            }
        })
        .collect()
}

/// Returns true with probability `theta`, consuming exactly one draw.
pub fn draw_catastrophe<R: Rng + ?Sized>(rng: &mut R, theta: f64) -> bool {
    let u: f64 = rng.random();
    u < theta
}

/// Who pays for an episode's interventions.
#[derive(Clone, Debug)]
pub enum PolicySource<'a> {
    /// Market runs alone; no taxes, no interventions.
    NoGovernment,
    /// Interventions applied in order, cycling when the list runs out.
    Sequence(Vec<Intervention>),
    /// Greedy choice from a trained table.
    Greedy(&'a QTable),
}

/// Everything recorded about one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub market: MarketSummary,
    pub gini: f64,
    pub mean_wealth: f64,
    pub active_insurers: usize,
    pub total_capacity: u64,
    pub state: Option<MarketStateId>,
    pub intervention: Option<Intervention>,
    pub welfare: Option<WelfareRecord>,
    pub treasury: f64,
    pub debt: f64,
    pub wealth: Vec<f64>,
    pub provider: Vec<Option<Provider>>,
    pub max_premium: Vec<f64>,
    pub best_offer: Vec<Option<f64>>,
    pub risk_perception: Vec<f64>,
}

impl StepRecord {
    pub fn reward(&self) -> Option<f64> {
        self.welfare.as_ref().map(|w| w.mvpf)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub records: Vec<StepRecord>,
    pub catastrophe_log: Vec<usize>,
}

/// An intervention whose reward is still accumulating externalities.
pub struct PendingReward {
    pub effects: InterventionEffects,
    pub wtp: f64,
    pub mechanical_cost: f64,
    pub log: StepLog,
}

impl World {
    /// Builds the initial world. Validates the configuration first.
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let utility = ParetoUtility::new(cfg.utility.scale, cfg.utility.curvature)?;
        let streams = Streams::new(seed);
        let individuals = draw_population(cfg, &streams);
        let n = individuals.len();
        let mut world = Self {
            t: 0,
            individuals,
            insurers: Vec::new(),
            government: GovernmentState::new(cfg, n),
            catastrophe_log: Vec::new(),
            class_mean_pmax: [Some(0.0); 3],
            best_offer: vec![None; n],
            log: StepLog::default(),
            flows: WealthFlows::default(),
            utility,
            streams,
            next_insurer_id: 0,
        };
        if !cfg.environment.no_insurance {
            let exposures = world.exposures();
            for _ in 0..cfg.environment.initial_insurers {
                let id = world.next_insurer_id;
                let mut rng = world.streams.stream(0, StreamTag::Insurer, id as u64);
                let ins = InsurerState::draw(
                    id,
                    &cfg.insurers,
                    cfg.environment.catastrophe_probability,
                    &exposures,
                    &mut rng,
                );
                world.insurers.push(ins);
                world.next_insurer_id += 1;
            }
        }
        Ok(world)
    }

    pub fn streams(&self) -> &Streams {
        &self.streams
    }

    pub fn exposures(&self) -> Vec<f64> {
        self.individuals.iter().map(|i| i.exposure()).collect()
    }

    pub fn wealths(&self) -> Vec<f64> {
        self.individuals.iter().map(|i| i.wealth).collect()
    }

    pub fn total_wealth(&self) -> f64 {
        self.individuals.iter().map(|i| i.wealth).sum()
    }

    pub fn active_insurers(&self) -> impl Iterator<Item = &InsurerState> {
        self.insurers.iter().filter(|i| i.active)
    }

    pub fn insurer_index(&self, id: usize) -> Option<usize> {
        // Ids are assigned in push order, so the id is the index.
        (id < self.insurers.len() && self.insurers[id].id == id).then_some(id)
    }

    /// Total policies active insurers are willing to hold.
    pub fn total_capacity(&self) -> u64 {
        let n = self.individuals.len() as u64;
        self.active_insurers().map(|i| i.capacity_or(n)).sum()
    }

    /// Loaded rate and loading an insurer quotes at, after any regulation.
    pub fn effective_pricing(&self, ins: &InsurerState, cfg: &ScenarioConfig) -> (f64, f64) {
        if self.government.flags.regulation {
            (
                ins.loss_model.rate.min(cfg.environment.catastrophe_probability),
                ins.loading.min(cfg.government.loading_cap),
            )
        } else {
            (ins.loss_model.rate, ins.loading)
        }
    }

    /// Cheapest full premium any active insurer would quote this individual.
    /// Zero premiums are never quoted.
    pub fn cheapest_quote(&self, ind: &IndividualState, cfg: &ScenarioConfig) -> Option<f64> {
        self.active_insurers()
            .map(|ins| {
                let (rate, loading) = self.effective_pricing(ins, cfg);
                crate::insurer::premium_quote(rate, loading, ind.loss_rate, ind.wealth)
            })
            .filter(|q| *q > 0.0)
            .fold(None, |acc: Option<f64>, q| Some(acc.map_or(q, |a| a.min(q))))
    }

    /// Runs the market phase of step `self.t` and advances nothing else.
    pub fn step_market(&mut self, cfg: &ScenarioConfig) -> MarketSummary {
        self.log = StepLog::default();
        self.flows = WealthFlows::default();
        let t = self.t;
        let theta = cfg.environment.catastrophe_probability;
        let r = cfg.environment.interest_rate;
        let mut summary = MarketSummary::default();

        let catastrophe = {
            let mut rng = self.streams.stream(t, StreamTag::Catastrophe, 0);
            draw_catastrophe(&mut rng, theta)
        };
        summary.catastrophe = catastrophe;
        if catastrophe {
            self.catastrophe_log.push(t);
            self.apply_catastrophe(&mut summary);
            self.government.on_catastrophe();
        }

        for ind in &mut self.individuals {
            ind.risk_perception = individual::update_risk_perception(ind.risk_perception, &ind.biases, catastrophe);
            let plan = individual::plan_consumption(&ConsumptionProblem::of(ind, r), &self.utility);
            ind.consumption = plan.consumption;
            ind.savings = plan.savings;
            self.flows.savings += plan.savings;
            self.flows.interest += r * ind.wealth;
            ind.wealth = individual::accrue_wealth(ind.wealth, plan.savings, r);
        }

        self.demand(cfg, &mut summary);
        self.moral_hazard(cfg);
        self.insurer_updates(cfg, catastrophe, &mut summary);

        summary.insured = self.individuals.iter().filter(|i| i.is_insured()).count();
        summary.coverage = metrics::coverage_rate(&self.individuals);
        self.government.clear_market_flags();
        summary
    }

    fn apply_catastrophe(&mut self, summary: &mut MarketSummary) {
        let mut claims_by_insurer = vec![0.0; self.insurers.len()];
        let mut claimants: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.insurers.len()];
        let mut government_claims = 0.0;
        for ind in &mut self.individuals {
            let loss = ind.loss_rate * ind.wealth;
            ind.wealth -= loss;
            self.log.catastrophe_losses += loss;
            self.flows.losses += loss;
            match ind.contract.map(|c| c.provider) {
                Some(Provider::Insurer(id)) => {
                    claims_by_insurer[id] += loss;
                    claimants[id].push((ind.id, loss));
                }
                Some(Provider::Government) => {
                    government_claims += loss;
                    ind.wealth += loss;
                    self.flows.claims += loss;
                }
                None => {}
            }
        }
        if government_claims > 0.0 {
            self.government.spend(government_claims, government::Outflow::Claims);
        }
        for (idx, due) in claims_by_insurer.iter().enumerate() {
            if *due <= 0.0 || !self.insurers[idx].active {
                continue;
            }
            let settlement = self.insurers[idx].settle_claims(*due);
            let mut covered = settlement.paid();
            if settlement.unpaid > 0.0 {
                let id = self.insurers[idx].id;
                if self.government.reinsures(id) {
                    self.government.spend(settlement.unpaid, government::Outflow::Claims);
                    self.log.reinsurance_paid += settlement.unpaid;
                    covered += settlement.unpaid;
                } else {
                    self.log.unmet_claims += settlement.unpaid;
                    if self.government.flags.last_resort {
                        self.government.spend(settlement.unpaid, government::Outflow::Claims);
                        self.log.last_resort_paid += settlement.unpaid;
                        covered += settlement.unpaid;
                    }
                }
                summary.insolvencies.push(id);
            }
            // Pay claimants pro rata to what was covered.
            let ratio = if *due > 0.0 { covered / due } else { 0.0 };
            for &(who, loss) in &claimants[idx] {
                let paid = loss * ratio;
                self.individuals[who].wealth += paid;
                self.flows.claims += paid;
            }
        }
        // Insolvent insurers leave at once; their remaining contracts are void.
        for &id in &summary.insolvencies {
            self.remove_insurer(id, false);
        }
    }

    /// Removes an insurer, voiding its contracts. Voluntary exits refund the
    /// premiums of current policyholders out of the insurer's assets.
    fn remove_insurer(&mut self, id: usize, refund: bool) {
        let Some(idx) = self.insurer_index(id) else { return };
        let holders = std::mem::take(&mut self.insurers[idx].policies);
        for who in holders {
            let ind = &mut self.individuals[who];
            if let Some(c) = ind.contract {
                if c.provider == Provider::Insurer(id) {
                    if refund {
                        let ins = &mut self.insurers[idx];
                        let available = ins.total_assets().max(0.0);
                        let back = c.premium.min(available);
                        ins.capital -= back;
                        let share_paid = if c.premium > 0.0 { c.paid / c.premium } else { 0.0 };
                        let to_person = back * share_paid;
                        ind.wealth += to_person;
                        self.flows.refunds += to_person;
                        if back > to_person {
                            self.government.receive(back - to_person, government::Inflow::Refunds);
                        }
                    }
                    ind.contract = None;
                }
            }
        }
        self.insurers[idx].deactivate();
    }

    fn demand(&mut self, cfg: &ScenarioConfig, summary: &mut MarketSummary) {
        let t = self.t;
        let theta = cfg.environment.catastrophe_probability;
        let subsidy = if self.government.flags.subsidy {
            cfg.government.subsidy_share
        } else {
            0.0
        };

        // Last period's private contracts expire; reserves return to capital.
        for ind in &mut self.individuals {
            if matches!(ind.contract, Some(Contract { provider: Provider::Insurer(_), .. })) {
                ind.contract = None;
            }
        }
        let n = self.individuals.len() as u64;
        let mut remaining: Vec<u64> = Vec::with_capacity(self.insurers.len());
        for ins in &mut self.insurers {
            ins.book = Default::default();
            if !ins.active {
                remaining.push(0);
                continue;
            }
            ins.policies.clear();
            ins.liability = 0.0;
            ins.rebalance_reserves();
            remaining.push(ins.capacity_or(n));
        }
        let pricing: Vec<(f64, f64)> = self
            .insurers
            .iter()
            .map(|ins| if ins.active { self.effective_pricing(ins, cfg) } else { (0.0, 0.0) })
            .collect();
        summary.quoted_rates = self
            .insurers
            .iter()
            .zip(&pricing)
            .filter(|(i, _)| i.active)
            .map(|(i, (rate, loading))| (i.id, rate * (1.0 + loading)))
            .collect();

        let peer = self.class_mean_pmax;
        let mut class_sum = [0.0; 3];
        let mut class_count = [0usize; 3];
        let mut quotes: Vec<Quote> = Vec::with_capacity(self.insurers.len());

        for i in 0..self.individuals.len() {
            let ind = &self.individuals[i];
            quotes.clear();
            let exposure = ind.exposure();
            for (idx, ins) in self.insurers.iter().enumerate() {
                if !ins.active || remaining[idx] == 0 {
                    continue;
                }
                let (rate, loading) = pricing[idx];
                let premium = rate * (1.0 + loading) * exposure;
                // Nothing to underwrite at a zero price.
                if !(premium > 0.0) {
                    continue;
                }
                quotes.push(Quote {
                    provider: Provider::Insurer(ins.id),
                    premium,
                    payable: (1.0 - subsidy) * premium,
                    rate,
                });
            }
            let holds_state_policy = matches!(ind.contract, Some(Contract { provider: Provider::Government, .. }));
            let ctx = DemandContext {
                utility: &self.utility,
                peer_mean: peer[ind.class.index()],
                government_fair: holds_state_policy.then_some(theta * exposure),
                subsidy_share: subsidy,
                government_rate: theta,
            };
            let mut rng = self.streams.stream(t, StreamTag::Demand, i as u64);
            let decision = individual::decide_and_purchase(ind, &quotes, &ctx, &mut rng);

            let class = ind.class.index();
            class_sum[class] += decision.max_premium;
            class_count[class] += 1;
            self.best_offer[i] = decision.best_offer;
            let had_state_policy = holds_state_policy;

            let ind = &mut self.individuals[i];
            ind.max_premium = decision.max_premium;
            if decision.max_premium > 0.0
                && !quotes.is_empty()
                && !matches!(decision.choice, Choice::Buy(_))
                && decision.best_offer.is_some_and(|b| decision.max_premium < b)
            {
                summary.unserved += 1;
            }
            match decision.choice {
                Choice::Buy(q) => {
                    let subsidy_part = q.premium - q.payable;
                    ind.wealth -= q.payable;
                    self.flows.premiums += q.payable;
                    ind.contract = Some(Contract {
                        provider: q.provider,
                        premium: q.premium,
                        paid: q.payable,
                        subsidy: subsidy_part,
                        rate: q.rate,
                    });
                    if subsidy_part > 0.0 {
                        self.government.spend(subsidy_part, government::Outflow::Subsidies);
                    }
                    match q.provider {
                        Provider::Government => {
                            self.government.receive(q.payable, government::Inflow::Premiums);
                        }
                        Provider::Insurer(id) => {
                            let idx = id;
                            self.insurers[idx].record_sale(i, q.premium, q.rate, exposure);
                            remaining[idx] -= 1;
                            summary.new_policies += 1;
                            if had_state_policy {
                                // Left the state scheme for a cheaper private offer.
                                ind.gov_eligible = false;
                            }
                        }
                    }
                }
                _ => {
                    if had_state_policy {
                        ind.contract = None;
                    }
                }
            }
            // A state policy that beat an insurer's offer counts as undercutting it.
            if let Some(Contract { provider: Provider::Government, premium, .. }) = ind.contract {
                for q in &quotes {
                    if let Provider::Insurer(id) = q.provider {
                        if premium < q.premium {
                            self.government.mark_undercut(id);
                        }
                    }
                }
            }
        }
        for c in 0..3 {
            self.class_mean_pmax[c] = (class_count[c] > 0).then(|| class_sum[c] / class_count[c] as f64);
        }
    }

    fn moral_hazard(&mut self, cfg: &ScenarioConfig) {
        let factor = cfg.population.moral_hazard_factor;
        let theta = cfg.environment.catastrophe_probability;
        for ind in &mut self.individuals {
            let Some(c) = ind.contract else { continue };
            let below_fair = c.provider == Provider::Government && c.premium < theta * ind.exposure();
            if c.subsidy > 0.0 || below_fair {
                let before = ind.loss_rate;
                ind.loss_rate = individual::moral_hazard(before, factor);
                self.log.moral_hazard += (ind.loss_rate - before) * ind.wealth;
            }
        }
    }

    fn insurer_updates(&mut self, cfg: &ScenarioConfig, catastrophe: bool, summary: &mut MarketSummary) {
        let icfg = &cfg.insurers;
        let exposures = self.exposures();
        let active: Vec<usize> = self.insurers.iter().filter(|i| i.active).map(|i| i.id).collect();
        if active.is_empty() {
            return;
        }
        let mean_loading =
            active.iter().map(|&id| self.insurers[id].loading).sum::<f64>() / active.len() as f64;
        let mut profit_sum = 0.0;
        for &id in &active {
            let ins = &mut self.insurers[id];
            ins.update_loss_model(&exposures, catastrophe, icfg.percentile_cap);
            ins.adjust_loading(mean_loading, ins.book.sales, icfg.loading_adjustment);
            let events = ins.adverse_events();
            ins.exit_score = (ins.exit_score + icfg.exit_increment * f64::from(events)).min(1.0);
            profit_sum += ins.book.profit();
        }
        let mean_profit = profit_sum / active.len() as f64;
        for &id in &active {
            if self.insurers[id].exit_score >= 1.0 {
                if self.government.was_undercut(id) {
                    self.log.crowded_out_assets += self.insurers[id].total_assets().max(0.0);
                }
                self.remove_insurer(id, true);
                summary.exits.push(id);
            }
        }
        if mean_profit > 0.0 {
            for k in 0..icfg.max_entrants_per_step {
                let id = self.next_insurer_id;
                let mut rng = self.streams.stream(self.t, StreamTag::Entry, k as u64);
                let ins = InsurerState::draw(id, icfg, cfg.environment.catastrophe_probability, &exposures, &mut rng);
                self.insurers.push(ins);
                self.next_insurer_id += 1;
                summary.entries.push(id);
            }
        }
        let r = cfg.environment.interest_rate;
        for ins in self.insurers.iter_mut().filter(|i| i.active) {
            ins.close_step(r);
        }
    }

    /// Applies an intervention after the market clears and collects taxes.
    /// Returns the reward components; externalities keep accruing until the
    /// next market phase has run.
    pub fn intervene(&mut self, cfg: &ScenarioConfig, action: Intervention) -> PendingReward {
        let mut log = StepLog::default();
        self.government.accrue_interest(cfg.environment.interest_rate);
        let effects = government::apply_intervention(self, cfg, action, &mut log);
        let wtp = welfare::wtp(&effects, cfg).expect("effects produced by the matching handler");
        let mechanical_cost = welfare::mechanical_cost(&effects, cfg);
        let taxes = government::collect_taxes(self, cfg, 0.0);
        log.debt_tax_raise += taxes.raise;
        PendingReward {
            effects,
            wtp,
            mechanical_cost,
            log,
        }
    }

    /// Advances the clock after a full step.
    pub fn advance(&mut self) {
        self.t += 1;
    }
}

impl PendingReward {
    /// Adds the externalities of the market phase that followed.
    pub fn absorb(&mut self, market_log: &StepLog) {
        self.log.absorb(market_log);
    }

    pub fn finish(self, cfg: &ScenarioConfig) -> WelfareRecord {
        welfare::record(self.effects.intervention(), self.wtp, self.mechanical_cost, &self.log, cfg)
    }
}

/// Runs one full episode and records every step.
pub fn run_episode(cfg: &ScenarioConfig, seed: u64, policy: &PolicySource<'_>) -> Result<EpisodeTrace, ModelError> {
    let mut world = World::new(cfg, seed)?;
    let horizon = cfg.environment.episode_length;
    let mut records: Vec<StepRecord> = Vec::with_capacity(horizon);
    let mut pending: Option<PendingReward> = None;
    for t in 0..horizon {
        let market = world.step_market(cfg);
        if let Some(mut p) = pending.take() {
            p.absorb(&world.log);
            let record = p.finish(cfg);
            records[t - 1].welfare = Some(record);
        }
        let (state, intervention) = match policy {
            PolicySource::NoGovernment => (None, None),
            PolicySource::Sequence(seq) => {
                let s = classify_state(&world, cfg);
                let a = if seq.is_empty() { Intervention::NoAction } else { seq[t % seq.len()] };
                (Some(s), Some(a))
            }
            PolicySource::Greedy(table) => {
                let s = classify_state(&world, cfg);
                (Some(s), Some(table.greedy(s)))
            }
        };
        if let Some(a) = intervention {
            pending = Some(world.intervene(cfg, a));
        }
        records.push(snapshot(&world, market, state, intervention));
        world.advance();
    }
    if let Some(p) = pending.take() {
        let record = p.finish(cfg);
        if let Some(last) = records.last_mut() {
            last.welfare = Some(record);
        }
    }
    Ok(EpisodeTrace {
        seed,
        records,
        catastrophe_log: world.catastrophe_log.clone(),
    })
}

fn snapshot(
    world: &World,
    market: MarketSummary,
    state: Option<MarketStateId>,
    intervention: Option<Intervention>,
) -> StepRecord {
    let wealth = world.wealths();
    let n = wealth.len().max(1) as f64;
    StepRecord {
        t: world.t,
        gini: metrics::gini_index(&wealth).unwrap_or(0.0),
        mean_wealth: wealth.iter().sum::<f64>() / n,
        active_insurers: world.active_insurers().count(),
        total_capacity: world.total_capacity(),
        market,
        state,
        intervention,
        welfare: None,
        treasury: world.government.treasury,
        debt: world.government.debt,
        provider: world.individuals.iter().map(|i| i.contract.map(|c| c.provider)).collect(),
        max_premium: world.individuals.iter().map(|i| i.max_premium).collect(),
        best_offer: world.best_offer.clone(),
        risk_perception: world.individuals.iter().map(|i| i.risk_perception).collect(),
        wealth,
    }
}
