//! Willingness to pay, government cost, and the MVPF reward.

use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, SubsidyWtp};
use crate::env::StepLog;
use crate::error::ModelError;
use crate::government::Intervention;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enrollment {
    pub id: usize,
    /// True when the individual held no contract before enrolment.
    pub was_uninsured: bool,
    pub max_premium: f64,
    /// Loaded rate of the replaced private contract, per unit of true exposure.
    pub private_rate: f64,
    pub government_rate: f64,
    pub perceived_exposure: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub id: usize,
    pub max_premium: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AwarenessTerm {
    pub id: usize,
    /// Rational premium bound under the old beliefs.
    pub before: f64,
    /// Rational premium bound under the corrected beliefs.
    pub corrected: f64,
}

/// A current private policyholder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Holder {
    pub id: usize,
    pub rate: f64,
    pub perceived_exposure: f64,
}

/// An uninsured individual the intervention would bring into the market.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entrant {
    pub id: usize,
    pub max_premium: f64,
    /// Rate they would pay, before any subsidy.
    pub rate: f64,
    pub perceived_exposure: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegulatedHolder {
    pub id: usize,
    pub rate_before: f64,
    pub rate_after: f64,
    pub perceived_exposure: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Treated {
    pub id: usize,
    pub loss_rate_before: f64,
    pub loss_rate_after: f64,
    pub risk_perception: f64,
    pub wealth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Covered {
    pub id: usize,
    pub exit_score: f64,
    pub risk_perception: f64,
    pub perceived_exposure: f64,
}

/// What an intervention did, in the detail its welfare formula needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InterventionEffects {
    NoAction,
    StateInsurance { enrollee: Option<Enrollment> },
    EaseSolvency { marginal: Vec<Marginal> },
    Awareness { terms: Vec<AwarenessTerm>, class_counts: [usize; 3] },
    Subsidy { share: f64, incumbents: Vec<Holder>, entrants: Vec<Entrant> },
    PremiumRegulation { incumbents: Vec<RegulatedHolder>, entrants: Vec<Entrant> },
    Prevention { treated: Option<Treated> },
    Reinsurance { holders: Vec<Covered>, shortfalls: Vec<f64> },
}

impl InterventionEffects {
    pub fn intervention(&self) -> Intervention {
        match self {
            InterventionEffects::NoAction => Intervention::NoAction,
            InterventionEffects::StateInsurance { .. } => Intervention::StateInsurance,
            InterventionEffects::EaseSolvency { .. } => Intervention::EaseSolvency,
            InterventionEffects::Awareness { .. } => Intervention::Awareness,
            InterventionEffects::Subsidy { .. } => Intervention::Subsidy,
            InterventionEffects::PremiumRegulation { .. } => Intervention::PremiumRegulation,
            InterventionEffects::Prevention { .. } => Intervention::Prevention,
            InterventionEffects::Reinsurance { .. } => Intervention::Reinsurance,
        }
    }
}

/// Willingness to pay of the state-insurance beneficiary.
pub fn wtp_state_insurance(was_uninsured: bool, max_premium: f64, p: f64, g: f64, perceived_exposure: f64) -> f64 {
    if was_uninsured {
        max_premium.max(0.0)
    } else {
        ((p - g) * perceived_exposure).max(0.0)
    }
}

/// Reduction in the expected loss from prevention.
pub fn wtp_prevention(before: f64, after: f64, risk_perception: f64, wealth: f64) -> f64 {
    ((before - after) * risk_perception * wealth).max(0.0)
}

/// Scores `effects` as `intervention`; the two must agree.
pub fn wtp_for(intervention: Intervention, effects: &InterventionEffects, cfg: &ScenarioConfig) -> Result<f64, ModelError> {
    if effects.intervention() != intervention {
        return Err(ModelError::MismatchedEffects {
            intervention: intervention.name(),
            effects: effects.intervention().name(),
        });
    }
    wtp(effects, cfg)
}

/// Willingness to pay, each summand floored at zero.
pub fn wtp(effects: &InterventionEffects, cfg: &ScenarioConfig) -> Result<f64, ModelError> {
    let v = match effects {
        InterventionEffects::NoAction => 0.0,
        InterventionEffects::StateInsurance { enrollee } => enrollee.map_or(0.0, |e| {
            wtp_state_insurance(e.was_uninsured, e.max_premium, e.private_rate, e.government_rate, e.perceived_exposure)
        }),
        InterventionEffects::EaseSolvency { marginal } => marginal.iter().map(|m| m.max_premium.max(0.0)).sum(),
        InterventionEffects::Awareness { terms, .. } => {
            terms.iter().map(|t| (t.corrected - t.before).max(0.0)).sum()
        }
        InterventionEffects::Subsidy {
            share,
            incumbents,
            entrants,
        } => {
            let s = *share;
            let inc: f64 = incumbents
                .iter()
                .map(|h| match cfg.government.subsidy_wtp {
                    SubsidyWtp::PremiumSaved => (s * h.rate * h.perceived_exposure).max(0.0),
                    SubsidyWtp::Literal => ((h.rate - s) * h.perceived_exposure).max(0.0),
                })
                .sum();
            let ent: f64 = entrants
                .iter()
                .map(|e| (e.max_premium - (1.0 - s) * e.rate * e.perceived_exposure).max(0.0))
                .sum();
            inc + ent
        }
        InterventionEffects::PremiumRegulation { incumbents, entrants } => {
            let inc: f64 = incumbents
                .iter()
                .map(|h| ((h.rate_before - h.rate_after) * h.perceived_exposure).max(0.0))
                .sum();
            let ent: f64 = entrants
                .iter()
                .map(|e| (e.max_premium - e.rate * e.perceived_exposure).max(0.0))
                .sum();
            inc + ent
        }
        InterventionEffects::Prevention { treated } => treated.map_or(0.0, |t| {
            wtp_prevention(t.loss_rate_before, t.loss_rate_after, t.risk_perception, t.wealth)
        }),
        InterventionEffects::Reinsurance { holders, .. } => holders
            .iter()
            .map(|h| (h.exit_score * h.risk_perception * h.perceived_exposure).max(0.0))
            .sum(),
    };
    Ok(v)
}

/// Direct cost of an intervention to the treasury.
pub fn mechanical_cost(effects: &InterventionEffects, cfg: &ScenarioConfig) -> f64 {
    let g = &cfg.government;
    let x = g.admin_cost;
    match effects {
        InterventionEffects::NoAction => 0.0,
        InterventionEffects::StateInsurance { enrollee } => {
            if enrollee.is_some() {
                x
            } else {
                0.0
            }
        }
        InterventionEffects::EaseSolvency { .. } | InterventionEffects::PremiumRegulation { .. } => x,
        InterventionEffects::Awareness { class_counts, .. } => {
            (0..3).map(|c| class_counts[c] as f64 * g.awareness_cost[c] * x).sum()
        }
        InterventionEffects::Subsidy {
            share,
            incumbents,
            entrants,
        } => {
            incumbents.iter().map(|h| share * h.rate * h.perceived_exposure).sum::<f64>()
                + entrants.iter().map(|e| share * e.rate * e.perceived_exposure).sum::<f64>()
        }
        InterventionEffects::Prevention { treated } => treated.map_or(0.0, |t| {
            g.prevention_unit_cost * (t.loss_rate_before - t.loss_rate_after) * t.wealth
        }),
        InterventionEffects::Reinsurance { shortfalls, .. } => shortfalls.iter().sum(),
    }
}

/// The six fiscal externalities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Externalities {
    pub crowding_out: f64,
    pub debt_tax: f64,
    pub insolvency: f64,
    pub cry_wolf: f64,
    pub moral_hazard: f64,
    pub catastrophe_losses: f64,
}

impl Externalities {
    pub fn total(&self) -> f64 {
        self.crowding_out + self.debt_tax + self.insolvency + self.cry_wolf + self.moral_hazard + self.catastrophe_losses
    }
}

pub fn fiscal_externalities(log: &StepLog) -> Externalities {
    Externalities {
        crowding_out: log.crowded_out_assets.max(0.0),
        debt_tax: log.debt_tax_raise.max(0.0),
        insolvency: log.unmet_claims.max(0.0),
        cry_wolf: log.cry_wolf.max(0.0),
        moral_hazard: log.moral_hazard.max(0.0),
        catastrophe_losses: log.catastrophe_losses.max(0.0),
    }
}

/// `wtp / g`, capped. A free intervention with positive value earns the cap,
/// one with no value earns nothing.
pub fn mvpf(wtp: f64, g_net: f64, cap: f64) -> f64 {
    if g_net > 0.0 {
        (wtp / g_net).clamp(0.0, cap)
    } else if wtp > 0.0 {
        cap
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelfareRecord {
    pub intervention: Intervention,
    pub wtp: f64,
    pub mechanical_cost: f64,
    pub externalities: Externalities,
    pub g_net: f64,
    pub mvpf: f64,
}

pub fn record(intervention: Intervention, wtp: f64, mechanical_cost: f64, log: &StepLog, cfg: &ScenarioConfig) -> WelfareRecord {
    let externalities = fiscal_externalities(log);
    let g_net = mechanical_cost + externalities.total();
    WelfareRecord {
        intervention,
        wtp,
        mechanical_cost,
        externalities,
        g_net,
        mvpf: mvpf(wtp, g_net, cfg.government.reward_cap),
    }
}
