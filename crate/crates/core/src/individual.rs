//! Households: beliefs, consumption, and insurance demand.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SocialClass {
    Low,
    Middle,
    Upper,
}

impl SocialClass {
    pub const ALL: [SocialClass; 3] = [SocialClass::Low, SocialClass::Middle, SocialClass::Upper];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Behavioural biases, fixed for the lifetime of an individual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasProfile {
    /// Multiplier on risk perception right after a catastrophe.
    pub representativeness: f64,
    /// Per-step decay of risk perception, also discounts perceived losses.
    pub optimism: f64,
    /// Weight placed on next period's consumption.
    pub myopia: f64,
    /// Probability of falling back on a rule of thumb for the premium bound.
    pub simplification: f64,
    /// Probability of doing nothing at the demand stage.
    pub inertia: f64,
    /// Weight on the class-mean premium bound when simplifying.
    pub herding: f64,
}

/// Who underwrites a contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provider {
    Government,
    Insurer(usize),
}

/// A one-step, full-coverage contract.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub provider: Provider,
    /// Full premium quoted by the provider.
    pub premium: f64,
    /// Part of the premium paid by the individual.
    pub paid: f64,
    /// Part of the premium paid by the treasury as subsidy.
    pub subsidy: f64,
    /// Loading-free rate the contract was priced at, kept for welfare accounting.
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndividualState {
    pub id: usize,
    pub class: SocialClass,
    pub income: f64,
    pub consumption: f64,
    pub savings: f64,
    pub wealth: f64,
    /// True fraction of wealth lost in a catastrophe.
    pub loss_rate: f64,
    /// Perceived fraction of wealth lost in a catastrophe.
    pub perceived_loss_rate: f64,
    pub risk_perception: f64,
    pub biases: BiasProfile,
    pub contract: Option<Contract>,
    pub gov_eligible: bool,
    pub max_premium: f64,
}

impl IndividualState {
    /// True expected catastrophe loss base, `loss_rate * wealth`.
    pub fn exposure(&self) -> f64 {
        self.loss_rate * self.wealth
    }

    pub fn perceived_exposure(&self) -> f64 {
        self.perceived_loss_rate * self.wealth
    }

    pub fn is_insured(&self) -> bool {
        self.contract.is_some()
    }
}

/// Belief update after a step: spike on a hit, decay otherwise. Clamped to [0, 1].
pub fn update_risk_perception(alpha: f64, biases: &BiasProfile, just_hit: bool) -> f64 {
    let next = if just_hit {
        alpha * (1.0 + biases.representativeness)
    } else {
        alpha * (1.0 - biases.optimism)
    };
    next.clamp(0.0, 1.0)
}

pub fn perceived_loss_rate(loss_rate: f64, optimism: f64) -> f64 {
    (1.0 - optimism) * loss_rate
}

/// Pareto-family utility `1 - (1 + w/scale)^-curvature`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoUtility {
    pub scale: f64,
    pub curvature: f64,
}

impl ParetoUtility {
    pub fn new(scale: f64, curvature: f64) -> Result<Self, ModelError> {
        if scale > 0.0 && curvature > 0.0 && scale.is_finite() && curvature.is_finite() {
            Ok(Self { scale, curvature })
        } else {
            Err(ModelError::BadUtility { scale, curvature })
        }
    }

    pub fn value(&self, wealth: f64) -> Result<f64, ModelError> {
        if !(wealth >= 0.0) {
            return Err(ModelError::NegativeWealth(wealth));
        }
        Ok(1.0 - self.disutility(wealth))
    }

    pub fn inverse(&self, u: f64) -> Result<f64, ModelError> {
        if !(0.0..1.0).contains(&u) {
            return Err(ModelError::UtilityOutOfRange(u));
        }
        Ok(self.inverse_disutility(1.0 - u))
    }

    /// `1 - U(w)`, computed directly to avoid cancellation for large wealth.
    pub fn disutility(&self, wealth: f64) -> f64 {
        pow(1.0 + wealth / self.scale, -self.curvature)
    }

    fn inverse_disutility(&self, d: f64) -> f64 {
        self.scale * (d.powf(-1.0 / self.curvature) - 1.0)
    }

    /// `U'(c)`.
    pub fn marginal(&self, c: f64) -> f64 {
        self.curvature / self.scale * pow(1.0 + c / self.scale, -self.curvature - 1.0)
    }

    /// `U''(c)`, always negative.
    pub fn second_derivative(&self, c: f64) -> f64 {
        self.marginal_pair(c).1
    }

    /// `(U'(c), U''(c))` from a single power.
    fn marginal_pair(&self, c: f64) -> (f64, f64) {
        let b = 1.0 + c / self.scale;
        let m = self.marginal(c);
        (m, -m * (self.curvature + 1.0) / (self.scale * b))
    }
}

/// `b^e`, exact-integer exponents take the cheaper `powi` path.
fn pow(b: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= 64.0 {
        b.powi(e as i32)
    } else {
        b.powf(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsumptionPlan {
    pub consumption: f64,
    pub savings: f64,
}

/// Inputs of the two-period consumption problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsumptionProblem {
    pub income: f64,
    pub myopia: f64,
    pub risk_perception: f64,
    pub perceived_loss_rate: f64,
    pub interest_rate: f64,
}

impl ConsumptionProblem {
    pub fn of(ind: &IndividualState, interest_rate: f64) -> Self {
        Self {
            income: ind.income,
            myopia: ind.biases.myopia,
            risk_perception: ind.risk_perception,
            perceived_loss_rate: ind.perceived_loss_rate,
            interest_rate,
        }
    }

    /// `U'(c) - myopia (1+r) E[U'(c_next)]`, where next-period consumption is
    /// funded by this period's savings and shrinks by the perceived loss rate
    /// in the catastrophe state.
    pub fn euler_residual(&self, u: &ParetoUtility, c: f64) -> f64 {
        let growth = 1.0 + self.interest_rate;
        let saved = growth * (self.income - c);
        let good = u.marginal(saved);
        let bad = u.marginal(saved * (1.0 - self.perceived_loss_rate));
        let expected = (1.0 - self.risk_perception) * good + self.risk_perception * bad;
        u.marginal(c) - self.myopia * growth * expected
    }

    /// The residual and its derivative in `c`; the derivative is negative.
    pub fn euler_residual_and_slope(&self, u: &ParetoUtility, c: f64) -> (f64, f64) {
        let growth = 1.0 + self.interest_rate;
        let saved = growth * (self.income - c);
        let keep = 1.0 - self.perceived_loss_rate;
        let a = self.risk_perception;
        let (m_now, s_now) = u.marginal_pair(c);
        let (m_good, s_good) = u.marginal_pair(saved);
        let (m_bad, s_bad) = u.marginal_pair(saved * keep);
        let residual = m_now - self.myopia * growth * ((1.0 - a) * m_good + a * m_bad);
        let slope = s_now + self.myopia * growth * growth * ((1.0 - a) * s_good + a * keep * s_bad);
        (residual, slope)
    }
}

const ROOT_TOL: f64 = 1e-10;
const ROOT_MAX_ITER: usize = 200;

/// Splits this period's income between consumption and savings.
///
/// Consumption lies in (0, income]. When the Euler residual is non-negative
/// at full consumption there is no interior root and all income is consumed.
/// Otherwise the residual changes sign on (0, income); Newton steps that stay
/// inside the bracket are taken, bisection otherwise.
pub fn plan_consumption(problem: &ConsumptionProblem, u: &ParetoUtility) -> ConsumptionPlan {
    let y = problem.income;
    if problem.myopia <= 0.0 || problem.euler_residual(u, y) >= 0.0 {
        return ConsumptionPlan {
            consumption: y,
            savings: 0.0,
        };
    }
    // The residual is decreasing in c: U'(c) falls while the savings-side
    // marginal utility rises. At c -> 0 it is U'(0) - beta(1+r)E[U'((1+r)y)] > 0
    // unless the individual is extremely patient, in which case the root sits
    // at the lower edge.
    let (mut lo, mut hi) = (0.0_f64, y);
    if problem.euler_residual(u, lo) <= 0.0 {
        // Savings-side pressure dominates even at zero consumption; consume a
        // vanishing amount rather than nothing to keep c strictly positive.
        let c = y * f64::EPSILON;
        return ConsumptionPlan {
            consumption: c,
            savings: y - c,
        };
    }
    let mut c = 0.5 * (lo + hi);
    for _ in 0..ROOT_MAX_ITER {
        let (f, slope) = problem.euler_residual_and_slope(u, c);
        if f > 0.0 {
            lo = c;
        } else if f < 0.0 {
            hi = c;
        } else {
            break;
        }
        let newton = c - f / slope;
        let next = if slope < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let done = (next - c).abs() <= ROOT_TOL * c.max(1.0) || hi - lo <= ROOT_TOL;
        c = next;
        if done {
            break;
        }
    }
    ConsumptionPlan {
        consumption: c,
        savings: y - c,
    }
}

/// `W' = (1+r) W + S`.
pub fn accrue_wealth(wealth: f64, savings: f64, interest_rate: f64) -> f64 {
    (1.0 + interest_rate) * wealth + savings
}

/// Largest premium that leaves expected utility unchanged: `E(W) - CE`.
pub fn pmax_rational(wealth: f64, risk_perception: f64, perceived_loss_rate: f64, u: &ParetoUtility) -> f64 {
    if wealth <= 0.0 || risk_perception <= 0.0 || perceived_loss_rate <= 0.0 {
        return 0.0;
    }
    let hit = (1.0 - perceived_loss_rate) * wealth;
    let expected_disutility =
        (1.0 - risk_perception) * u.disutility(wealth) + risk_perception * u.disutility(hit);
    let certainty_equivalent = u.inverse_disutility(expected_disutility);
    let expected_wealth = (1.0 - risk_perception) * wealth + risk_perception * hit;
    (expected_wealth - certainty_equivalent).max(0.0)
}

/// Rule-of-thumb bound: previous bound pulled toward the class mean.
/// Without a class mean the previous bound is kept.
pub fn pmax_simplified(previous: f64, peer_mean: Option<f64>, herding: f64) -> f64 {
    match peer_mean {
        Some(mean) => (1.0 - herding) * previous + herding * mean,
        None => previous,
    }
}

/// An offer visible to one individual at the demand stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quote {
    pub provider: Provider,
    /// Full premium.
    pub premium: f64,
    /// What the individual would pay after any subsidy.
    pub payable: f64,
    /// Loading-free rate behind the quote.
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Choice {
    Buy(Quote),
    /// Inertia blocked any action.
    Inert,
    /// Offers exist but none is affordable.
    Unaffordable,
    NoOffers,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PurchaseDecision {
    pub max_premium: f64,
    pub simplified: bool,
    pub choice: Choice,
    /// Cheapest payable premium among the offers seen, if any.
    pub best_offer: Option<f64>,
}

/// Inputs for one individual's demand decision.
pub struct DemandContext<'a> {
    pub utility: &'a ParetoUtility,
    /// Previous-step mean premium bound of the individual's class.
    pub peer_mean: Option<f64>,
    /// Fair government premium when the individual holds a state policy.
    pub government_fair: Option<f64>,
    /// Share of every premium paid by the treasury this step.
    pub subsidy_share: f64,
    /// Fair rate used for the state policy.
    pub government_rate: f64,
}

/// Premium bound, inertia gate, then cheapest affordable offer.
///
/// Exactly two uniforms are drawn, the simplification gate then the inertia
/// gate, whatever the outcome. A holder of a state policy is offered renewal
/// at `min(fair, bound)`; inertia keeps that policy rather than dropping it.
/// Ties in payable premium go to the government, then the lowest insurer id.
pub fn decide_and_purchase<R: Rng + ?Sized>(
    ind: &IndividualState,
    quotes: &[Quote],
    ctx: &DemandContext<'_>,
    rng: &mut R,
) -> PurchaseDecision {
    let simplify_draw: f64 = rng.random();
    let inertia_draw: f64 = rng.random();
    let simplified = simplify_draw < ind.biases.simplification;
    let max_premium = if simplified {
        pmax_simplified(ind.max_premium, ctx.peer_mean, ind.biases.herding)
    } else {
        pmax_rational(ind.wealth, ind.risk_perception, ind.perceived_loss_rate, ctx.utility)
    };
    let government = ctx.government_fair.map(|fair| {
        let premium = fair.min(max_premium);
        Quote {
            provider: Provider::Government,
            premium,
            payable: (1.0 - ctx.subsidy_share) * premium,
            rate: ctx.government_rate,
        }
    });
    let best_offer = quotes
        .iter()
        .chain(government.iter())
        .map(|q| q.payable)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.min(p))));
    let choice = if inertia_draw < ind.biases.inertia {
        match government {
            Some(g) if g.payable <= ind.wealth => Choice::Buy(g),
            _ => Choice::Inert,
        }
    } else {
        match cheapest_affordable(quotes, max_premium, ind.wealth) {
            Choice::Buy(q) => match government {
                Some(g) if g.payable <= q.payable && g.payable <= ind.wealth => Choice::Buy(g),
                _ => Choice::Buy(q),
            },
            other => match government {
                Some(g) if g.payable <= ind.wealth && g.payable <= max_premium => Choice::Buy(g),
                _ => other,
            },
        }
    };
    PurchaseDecision {
        max_premium,
        simplified,
        choice,
        best_offer,
    }
}

/// Cheapest quote with payable premium at most `bound` and at most `wealth`.
/// Ties go to the provider that sorts first.
pub fn cheapest_affordable(quotes: &[Quote], bound: f64, wealth: f64) -> Choice {
    if quotes.is_empty() {
        return Choice::NoOffers;
    }
    let mut best: Option<usize> = None;
    for (i, q) in quotes.iter().enumerate() {
        if q.payable > bound || q.payable > wealth {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let bq = &quotes[b];
                if q.payable < bq.payable || (q.payable == bq.payable && q.provider < bq.provider) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.map_or(Choice::Unaffordable, |i| Choice::Buy(quotes[i]))
}

/// Multiplicative drift of the true loss rate, capped at 1.
pub fn moral_hazard(loss_rate: f64, factor: f64) -> f64 {
    (loss_rate * factor).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn biases() -> BiasProfile {
        BiasProfile {
            representativeness: 2.0,
            optimism: 0.1,
            myopia: 0.5,
            simplification: 0.0,
            inertia: 0.0,
            herding: 0.0,
        }
    }

    fn person(wealth: f64) -> IndividualState {
        IndividualState {
            id: 0,
            class: SocialClass::Middle,
            income: 12_000.0,
            consumption: 0.0,
            savings: 0.0,
            wealth,
            loss_rate: 0.5,
            perceived_loss_rate: 0.5,
            risk_perception: 0.1,
            biases: biases(),
            contract: None,
            gov_eligible: true,
            max_premium: 0.0,
        }
    }

    #[test]
    fn risk_perception_rules() {
        let b = biases();
        assert!((update_risk_perception(0.01, &b, true) - 0.03).abs() < 1e-12);
        assert!((update_risk_perception(0.03, &b, false) - 0.027).abs() < 1e-12);
        let b3 = BiasProfile {
            representativeness: 3.0,
            ..b
        };
        assert_eq!(update_risk_perception(0.5, &b3, true), 1.0);
    }

    #[test]
    fn perceived_loss_examples() {
        assert_eq!(perceived_loss_rate(0.7, 0.0), 0.7);
        assert_eq!(perceived_loss_rate(0.7, 1.0), 0.0);
        assert!((perceived_loss_rate(0.8, 0.25) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn utility_examples() {
        let u1 = ParetoUtility::new(1000.0, 1.0).unwrap();
        assert_eq!(u1.value(0.0).unwrap(), 0.0);
        assert!((u1.value(1000.0).unwrap() - 0.5).abs() < 1e-12);
        let u2 = ParetoUtility::new(10_000.0, 2.0).unwrap();
        assert!((u2.value(50_000.0).unwrap() - (1.0 - 1.0 / 36.0)).abs() < 1e-12);
        assert!(matches!(u2.value(-1.0), Err(ModelError::NegativeWealth(_))));
        assert!(ParetoUtility::new(0.0, 1.0).is_err());
        assert!(ParetoUtility::new(1.0, -1.0).is_err());
    }

    #[test]
    fn utility_inverse_examples() {
        let u1 = ParetoUtility::new(1000.0, 1.0).unwrap();
        assert_eq!(u1.inverse(0.0).unwrap(), 0.0);
        assert!((u1.inverse(0.5).unwrap() - 1000.0).abs() < 1e-9);
        assert!(matches!(u1.inverse(1.0), Err(ModelError::UtilityOutOfRange(_))));
        assert!(u1.inverse(-0.1).is_err());
    }

    #[test]
    fn myopia_zero_consumes_all_income() {
        let u = ParetoUtility::new(1000.0, 2.0).unwrap();
        let p = ConsumptionProblem {
            income: 5000.0,
            myopia: 0.0,
            risk_perception: 0.1,
            perceived_loss_rate: 0.5,
            interest_rate: 0.02,
        };
        let plan = plan_consumption(&p, &u);
        assert_eq!(plan.consumption, 5000.0);
        assert_eq!(plan.savings, 0.0);
    }

    #[test]
    fn perfect_smoothing_without_risk() {
        // beta (1+r) = 1 and no perceived risk: U'(c) = U'((1+r)(y-c)).
        let u = ParetoUtility::new(1000.0, 2.0).unwrap();
        let r = 0.25;
        let p = ConsumptionProblem {
            income: 9000.0,
            myopia: 1.0 / (1.0 + r),
            risk_perception: 0.0,
            perceived_loss_rate: 0.3,
            interest_rate: r,
        };
        let plan = plan_consumption(&p, &u);
        let next = (1.0 + r) * plan.savings;
        assert!((plan.consumption - next).abs() < 1e-6, "{} vs {}", plan.consumption, next);
    }

    #[test]
    fn budget_identity_holds() {
        let u = ParetoUtility::new(1000.0, 2.0).unwrap();
        let p = ConsumptionProblem {
            income: 12_000.0,
            myopia: 0.7,
            risk_perception: 0.2,
            perceived_loss_rate: 0.4,
            interest_rate: 0.02,
        };
        let plan = plan_consumption(&p, &u);
        assert!(plan.consumption > 0.0 && plan.consumption <= 12_000.0);
        assert_eq!(plan.consumption + plan.savings, 12_000.0);
    }

    #[test]
    fn accrue_examples() {
        assert!((accrue_wealth(100.0, 0.0, 0.1) - 110.0).abs() < 1e-12);
        assert_eq!(accrue_wealth(0.0, 50.0, 0.0), 50.0);
        assert_eq!(accrue_wealth(100.0, -20.0, 0.0), 80.0);
    }

    #[test]
    fn pmax_zero_without_perceived_risk() {
        let u = ParetoUtility::new(10_000.0, 2.0).unwrap();
        assert_eq!(pmax_rational(50_000.0, 0.0, 0.5, &u), 0.0);
        assert_eq!(pmax_rational(50_000.0, 0.1, 0.0, &u), 0.0);
    }

    #[test]
    fn pmax_simplified_examples() {
        assert_eq!(pmax_simplified(100.0, Some(200.0), 0.0), 100.0);
        assert_eq!(pmax_simplified(100.0, Some(200.0), 1.0), 200.0);
        assert_eq!(pmax_simplified(100.0, Some(200.0), 0.5), 150.0);
        assert_eq!(pmax_simplified(100.0, None, 0.7), 100.0);
    }

    fn quote(id: usize, premium: f64) -> Quote {
        Quote {
            provider: Provider::Insurer(id),
            premium,
            payable: premium,
            rate: 0.02,
        }
    }

    #[test]
    fn cheapest_feasible_quote() {
        let qs = [quote(0, 900.0), quote(1, 850.0), quote(2, 870.0)];
        assert_eq!(cheapest_affordable(&qs, 860.0, 1e6), Choice::Buy(qs[1]));
        assert_eq!(cheapest_affordable(&qs, 800.0, 1e6), Choice::Unaffordable);
        assert_eq!(cheapest_affordable(&[], 800.0, 1e6), Choice::NoOffers);
        // Ties go to the lower id.
        let tied = [quote(3, 850.0), quote(1, 850.0)];
        assert_eq!(cheapest_affordable(&tied, 900.0, 1e6), Choice::Buy(tied[1]));
        // Unaffordable given wealth.
        assert_eq!(cheapest_affordable(&qs, 1e6, 860.0), Choice::Buy(qs[1]));
        assert_eq!(cheapest_affordable(&qs, 1e6, 840.0), Choice::Unaffordable);
    }

    #[test]
    fn inertia_blocks_purchase() {
        let u = ParetoUtility::new(1000.0, 2.0).unwrap();
        let mut ind = person(50_000.0);
        ind.biases.inertia = 1.0;
        let qs = [quote(0, 1.0)];
        let ctx = DemandContext {
            utility: &u,
            peer_mean: None,
            government_fair: None,
            subsidy_share: 0.0,
            government_rate: 0.02,
        };
        let d = decide_and_purchase(&ind, &qs, &ctx, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(d.choice, Choice::Inert);
        ind.biases.inertia = 0.0;
        let d = decide_and_purchase(&ind, &qs, &ctx, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(d.choice, Choice::Buy(qs[0]));
        assert!(!d.simplified);
    }

    #[test]
    fn subsidy_flips_affordability() {
        let mut q = quote(0, 900.0);
        assert_eq!(cheapest_affordable(&[q], 640.0, 1e6), Choice::Unaffordable);
        q.payable = 0.7 * 900.0;
        assert_eq!(cheapest_affordable(&[q], 640.0, 1e6), Choice::Buy(q));
    }

    #[test]
    fn moral_hazard_examples() {
        assert!((moral_hazard(0.5, 1.02) - 0.51).abs() < 1e-12);
        assert_eq!(moral_hazard(0.999, 1.02), 1.0);
    }
}
