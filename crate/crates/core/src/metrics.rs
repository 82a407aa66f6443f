//! Coverage, inequality and the stylized-fact battery.

use serde::{Deserialize, Serialize};

use crate::config::FactThresholds;
use crate::env::EpisodeTrace;
use crate::error::ModelError;
use crate::individual::IndividualState;

/// Insured share of total expected catastrophe loss. Zero when nobody is exposed.
pub fn coverage_rate(individuals: &[IndividualState]) -> f64 {
    let mut insured = 0.0;
    let mut total = 0.0;
    for ind in individuals {
        let e = ind.exposure().max(0.0);
        total += e;
        if ind.is_insured() {
            insured += e;
        }
    }
    if total > 0.0 {
        (insured / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Gini index by the sorted-rank identity, O(n log n).
pub fn gini_index(wealths: &[f64]) -> Result<f64, ModelError> {
    if wealths.is_empty() {
        return Err(ModelError::Empty("gini_index"));
    }
    if let Some(&w) = wealths.iter().find(|w| !(**w >= 0.0)) {
        return Err(ModelError::NegativeWealth(w));
    }
    let mut sorted = wealths.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, w)| (2.0 * (i as f64 + 1.0) - n - 1.0) * w)
        .sum();
    Ok((weighted / (n * total)).max(0.0))
}

/// Outcome of one stylized-fact check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Holds,
    Fails,
    NotApplicable,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }

    pub fn applicable(self) -> bool {
        self != Verdict::NotApplicable
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StylizedFactReport {
    pub catastrophes: usize,
    pub peak_coverage: f64,
    pub terminal_coverage: f64,
    /// Fact 1: coverage ends inadequate.
    pub inadequate_coverage: Verdict,
    /// Mean coverage after minus before, per evaluable catastrophe.
    pub purchase_deltas: Vec<f64>,
    /// Fact 2.
    pub purchases_rise: Verdict,
    /// Observed lapse times, `None` when still insured at the horizon.
    pub lapse_times: Vec<Option<usize>>,
    pub median_lapse: Option<usize>,
    /// Fact 3.
    pub early_lapse: Verdict,
    pub premium_deltas: Vec<f64>,
    /// Fact 4.
    pub premiums_rise: Verdict,
    pub exits_after: Vec<usize>,
    /// Fact 5.
    pub exits_follow: Verdict,
    pub peak_unserved: usize,
    /// Fact 6.
    pub unmet_demand: Verdict,
}

impl StylizedFactReport {
    pub fn verdicts(&self) -> [Verdict; 6] {
        [
            self.inadequate_coverage,
            self.purchases_rise,
            self.early_lapse,
            self.premiums_rise,
            self.exits_follow,
            self.unmet_demand,
        ]
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// A catastrophe-by-catastrophe majority; ties count as holding.
fn majority(flags: impl Iterator<Item = bool>) -> Verdict {
    let (mut yes, mut all) = (0usize, 0usize);
    for f in flags {
        all += 1;
        yes += f as usize;
    }
    if all == 0 {
        Verdict::NotApplicable
    } else {
        Verdict::from_bool(2 * yes >= all)
    }
}

/// Runs the six checks on a no-government trace.
pub fn check_stylized_facts(trace: &EpisodeTrace, th: &FactThresholds) -> StylizedFactReport {
    let recs = &trace.records;
    let horizon = recs.len();
    let coverage: Vec<f64> = recs.iter().map(|r| r.market.coverage).collect();
    let cats: Vec<usize> = recs.iter().filter(|r| r.market.catastrophe).map(|r| r.t).collect();
    let index_of = |t: usize| recs.iter().position(|r| r.t == t);

    let peak_coverage = coverage.iter().copied().fold(0.0, f64::max);
    let terminal_coverage = coverage.last().copied().unwrap_or(0.0);
    let inadequate_coverage = if horizon == 0 {
        Verdict::NotApplicable
    } else {
        Verdict::from_bool(terminal_coverage < th.inadequate_coverage)
    };

    // Purchases: the catastrophe step and the steps after it, against the
    // steps before it. Windows are clipped at the trace boundaries.
    let w = th.window.max(1);
    let mut purchase_deltas = Vec::new();
    for &c in &cats {
        let Some(i) = index_of(c) else { continue };
        if i == 0 {
            continue;
        }
        let before = &coverage[i.saturating_sub(w)..i];
        let after = &coverage[i..(i + w).min(horizon)];
        purchase_deltas.push(mean(after) - mean(before));
    }
    let purchases_rise = majority(purchase_deltas.iter().map(|d| *d > 0.0));

    // Lapses of those who bought in response, censored at the next catastrophe.
    let mut lapse_times = Vec::new();
    for (k, &c) in cats.iter().enumerate() {
        let Some(i) = index_of(c) else { continue };
        let stop = cats
            .get(k + 1)
            .and_then(|&next| index_of(next))
            .unwrap_or(horizon);
        let buy_end = (i + w).min(stop);
        let n = recs[i].provider.len();
        for person in 0..n {
            let before = if i == 0 { None } else { recs[i - 1].provider[person] };
            if before.is_some() {
                continue;
            }
            let Some(bought) = (i..buy_end).find(|&s| recs[s].provider[person].is_some()) else {
                continue;
            };
            let lapse = (bought + 1..stop).find(|&s| recs[s].provider[person].is_none());
            match lapse {
                Some(s) => lapse_times.push(Some(s - bought)),
                // Still insured: only informative once the horizon has passed.
                None if stop - bought > th.lapse_horizon => lapse_times.push(None),
                None => {}
            }
        }
    }
    let median_lapse = median_with_censoring(&lapse_times);
    let early_lapse = if lapse_times.is_empty() {
        Verdict::NotApplicable
    } else {
        Verdict::from_bool(median_lapse.is_some_and(|m| m <= th.lapse_horizon))
    };

    // Quoted rates move between the catastrophe step and the one after.
    let mut premium_deltas = Vec::new();
    for &c in &cats {
        let Some(i) = index_of(c) else { continue };
        if i + 1 >= horizon {
            continue;
        }
        if let (Some(a), Some(b)) = (recs[i].market.mean_quoted_rate(), recs[i + 1].market.mean_quoted_rate()) {
            premium_deltas.push(b - a);
        }
    }
    let premiums_rise = majority(premium_deltas.iter().map(|d| *d > 0.0));

    let mut exits_after = Vec::new();
    for &c in &cats {
        let Some(i) = index_of(c) else { continue };
        let end = (i + th.exit_window + 1).min(horizon);
        exits_after.push(
            recs[i..end]
                .iter()
                .map(|r| r.market.exits.len() + r.market.insolvencies.len())
                .sum(),
        );
    }
    let exits_follow = if exits_after.is_empty() {
        Verdict::NotApplicable
    } else {
        Verdict::from_bool(exits_after.iter().any(|&e| e > 0))
    };

    let peak_unserved = recs.iter().map(|r| r.market.unserved).max().unwrap_or(0);
    let unmet_demand = if horizon == 0 {
        Verdict::NotApplicable
    } else {
        Verdict::from_bool(peak_unserved > 0)
    };

    StylizedFactReport {
        catastrophes: cats.len(),
        peak_coverage,
        terminal_coverage,
        inadequate_coverage,
        purchase_deltas,
        purchases_rise,
        lapse_times,
        median_lapse,
        early_lapse,
        premium_deltas,
        premiums_rise,
        exits_after,
        exits_follow,
        peak_unserved,
        unmet_demand,
    }
}

/// Lower median, with censored observations sorted last.
fn median_with_censoring(xs: &[Option<usize>]) -> Option<usize> {
    if xs.is_empty() {
        return None;
    }
    let mut v: Vec<usize> = xs.iter().map(|x| x.unwrap_or(usize::MAX)).collect();
    v.sort_unstable();
    let m = v[(v.len() - 1) / 2];
    (m != usize::MAX).then_some(m)
}

/// One row of plot data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: usize,
    pub catastrophe: bool,
    pub coverage: f64,
    pub gini: f64,
    pub mean_wealth: f64,
    pub mean_quoted_rate: Option<f64>,
    pub active_insurers: usize,
    pub insured: usize,
    pub unserved: usize,
    pub treasury: f64,
    pub debt: f64,
    pub reward: Option<f64>,
}

pub fn series(trace: &EpisodeTrace) -> Vec<SeriesRow> {
    trace
        .records
        .iter()
        .map(|r| SeriesRow {
            t: r.t,
            catastrophe: r.market.catastrophe,
            coverage: r.market.coverage,
            gini: r.gini,
            mean_wealth: r.mean_wealth,
            mean_quoted_rate: r.market.mean_quoted_rate(),
            active_insurers: r.active_insurers,
            insured: r.market.insured,
            unserved: r.market.unserved,
            treasury: r.treasury,
            debt: r.debt,
            reward: r.reward(),
        })
        .collect()
}
