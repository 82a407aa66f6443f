//! Tabular Q-learning for the government.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, TrainingConfig, UpdateRule};
use crate::env::{PendingReward, World};
use crate::error::ModelError;
use crate::government::Intervention;
use crate::rng::{derive_seed, StreamTag, Streams};

/// One cell of the awareness × supply × affordability lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MarketStateId {
    pub awareness_high: bool,
    pub supply_high: bool,
    pub affordable: bool,
}

impl MarketStateId {
    pub const COUNT: usize = 8;

    pub fn index(self) -> usize {
        (self.awareness_high as usize) << 2 | (self.supply_high as usize) << 1 | (!self.affordable as usize)
    }

    pub fn from_index(i: usize) -> Option<Self> {
        (i < Self::COUNT).then_some(Self {
            awareness_high: i & 4 != 0,
            supply_high: i & 2 != 0,
            affordable: i & 1 == 0,
        })
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..Self::COUNT).filter_map(Self::from_index)
    }

    /// The five cells given names in the published analysis, as (number, cell).
    pub fn named() -> [(u8, Self); 5] {
        let c = |a, s, f| Self {
            awareness_high: a,
            supply_high: s,
            affordable: f,
        };
        [
            (1, c(false, false, true)),
            (2, c(false, true, true)),
            (3, c(false, true, false)),
            (4, c(true, false, false)),
            (5, c(true, true, false)),
        ]
    }

    pub fn label(self) -> String {
        format!(
            "{} awareness, {} supply, {}",
            if self.awareness_high { "high" } else { "low" },
            if self.supply_high { "high" } else { "low" },
            if self.affordable { "affordable" } else { "unaffordable" }
        )
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Classifies the current world.
pub fn classify_state(world: &World, cfg: &ScenarioConfig) -> MarketStateId {
    let theta = cfg.environment.catastrophe_probability;
    let tc = &cfg.training;
    let ratios: Vec<f64> = world
        .individuals
        .iter()
        .map(|i| if theta > 0.0 { i.risk_perception / theta } else { 1.0 })
        .collect();
    let awareness_high = median(ratios).is_some_and(|m| m >= tc.awareness_threshold);

    let any_insurer = world.active_insurers().next().is_some();
    let n = world.individuals.len() as f64;
    let supply_high = any_insurer && world.total_capacity() as f64 >= tc.supply_threshold * n;

    let affordable = any_insurer && {
        let quotes: Vec<f64> = world
            .individuals
            .iter()
            .filter_map(|i| world.cheapest_quote(i, cfg))
            .collect();
        let pmax: Vec<f64> = world.individuals.iter().map(|i| i.max_premium).collect();
        matches!((median(quotes), median(pmax)), (Some(q), Some(p)) if q <= p)
    };
    MarketStateId {
        awareness_high,
        supply_high,
        affordable,
    }
}

/// Dense q-values with visit counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl QTable {
    pub fn new(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            values: vec![0.0; states * actions],
            visits: vec![0; states * actions],
        }
    }

    /// The 8 × 8 government table.
    pub fn market() -> Self {
        Self::new(MarketStateId::COUNT, Intervention::ALL.len())
    }

    /// Builds a table from raw rows. Lengths must agree.
    pub fn from_parts(states: usize, actions: usize, values: Vec<f64>, visits: Vec<u64>) -> Option<Self> {
        (values.len() == states * actions && visits.len() == states * actions).then_some(Self {
            states,
            actions,
            values,
            visits,
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visits
    }

    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.actions + a]
    }

    pub fn set_q(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.actions + a] = v;
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.actions..(s + 1) * self.actions]
    }

    pub fn max_q(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax with ties going to the lowest index.
    pub fn best(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    /// Actions from best to worst; equal values keep index order.
    pub fn ranked(&self, s: usize) -> Vec<usize> {
        let row = self.row(s);
        let mut idx: Vec<usize> = (0..self.actions).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        idx
    }

    pub fn greedy(&self, s: MarketStateId) -> Intervention {
        Intervention::from_index(self.best(s.index())).unwrap_or(Intervention::NoAction)
    }
}

/// ε-greedy choice. Always consumes exactly two draws so streams stay aligned.
pub fn select_action<R: Rng + ?Sized>(table: &QTable, s: usize, epsilon: f64, rng: &mut R) -> usize {
    let explore: f64 = rng.random();
    let pick = rng.random_range(0..table.actions);
    if explore < epsilon {
        pick
    } else {
        table.best(s)
    }
}

/// One tabular update. `next` is `None` at a true terminal state. Returns |Δq|.
pub fn q_update(
    table: &mut QTable,
    s: usize,
    a: usize,
    reward: f64,
    next: Option<usize>,
    eta: f64,
    delta: f64,
    rule: UpdateRule,
) -> f64 {
    let future = next.map_or(0.0, |n| table.max_q(n));
    let target = match rule {
        UpdateRule::Standard => reward + delta * future,
        UpdateRule::NoReward => delta * future,
    };
    let i = s * table.actions + a;
    let old = table.values[i];
    table.values[i] = (1.0 - eta) * old + eta * target;
    table.visits[i] += 1;
    (table.values[i] - old).abs()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub next_state: usize,
    /// The episode really ended; nothing to bootstrap from.
    pub terminal: bool,
    /// The episode was cut off by the step budget; bootstrap from `next_state`.
    pub truncated: bool,
}

/// A finite-state, finite-action episodic environment.
pub trait Environment {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Starts a new episode and returns the initial state.
    fn reset(&mut self, seed: u64) -> usize;
    fn step(&mut self, action: usize) -> Transition;
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingOutcome {
    pub table: QTable,
    /// Largest |Δq| seen in each epoch.
    pub convergence: Vec<f64>,
    pub updates: u64,
}

struct Experience {
    s: usize,
    a: usize,
    t: Transition,
}

fn rollout<E: Environment>(env: &mut E, table: &QTable, tc: &TrainingConfig, episode: u64, out: &mut Vec<Experience>) {
    let eps = tc.epsilon.at(episode, tc.episodes);
    let mut rng: ChaCha8Rng = Streams::new(tc.seed).stream(0, StreamTag::Exploration, episode);
    let mut s = env.reset(derive_seed(tc.seed, episode));
    loop {
        let a = select_action(table, s, eps, &mut rng);
        let t = env.step(a);
        out.push(Experience { s, a, t });
        if t.terminal || t.truncated {
            break;
        }
        s = t.next_state;
    }
}

/// Q-learning against environments produced by `make_env`.
///
/// With `tc.rollouts == 1` every step updates the live table. Otherwise
/// batches of episodes act on a frozen copy and their updates are applied in
/// episode order, so results depend only on the seed and the batch size.
pub fn train<E, F>(make_env: F, tc: &TrainingConfig) -> TrainingOutcome
where
    E: Environment + Send,
    F: Fn() -> E + Sync,
{
    let probe = make_env();
    let mut table = QTable::new(probe.n_states(), probe.n_actions());
    let mut convergence = Vec::new();
    let mut updates = 0u64;
    let epoch = tc.epoch.max(1);
    let mut epoch_max: f64 = 0.0;
    let apply = |table: &mut QTable, xs: &[Experience], updates: &mut u64, epoch_max: &mut f64| {
        for x in xs {
            let next = (!x.t.terminal).then_some(x.t.next_state);
            let d = q_update(table, x.s, x.a, x.t.reward, next, tc.learning_rate, tc.discount, tc.update_rule);
            *epoch_max = epoch_max.max(d);
            *updates += 1;
        }
    };

    let k = tc.rollouts.max(1) as u64;
    if k == 1 {
        let mut env = probe;
        let mut buf = Vec::new();
        for e in 0..tc.episodes {
            let eps = tc.epsilon.at(e, tc.episodes);
            let mut rng: ChaCha8Rng = Streams::new(tc.seed).stream(0, StreamTag::Exploration, e);
            let mut s = env.reset(derive_seed(tc.seed, e));
            loop {
                let a = select_action(&table, s, eps, &mut rng);
                let t = env.step(a);
                buf.clear();
                buf.push(Experience { s, a, t });
                apply(&mut table, &buf, &mut updates, &mut epoch_max);
                if t.terminal || t.truncated {
                    break;
                }
                s = t.next_state;
            }
            if (e + 1) % epoch == 0 {
                convergence.push(epoch_max);
                epoch_max = 0.0;
            }
        }
    } else {
        let mut e = 0;
        while e < tc.episodes {
            let batch: Vec<u64> = (e..(e + k).min(tc.episodes)).collect();
            let frozen = table.clone();
            let results: Vec<Vec<Experience>> = batch
                .par_iter()
                .map(|&ep| {
                    let mut env = make_env();
                    let mut out = Vec::new();
                    rollout(&mut env, &frozen, tc, ep, &mut out);
                    out
                })
                .collect();
            for (ep, xs) in batch.iter().zip(&results) {
                apply(&mut table, xs, &mut updates, &mut epoch_max);
                if (ep + 1) % epoch == 0 {
                    convergence.push(epoch_max);
                    epoch_max = 0.0;
                }
            }
            e += batch.len() as u64;
        }
    }
    if !tc.episodes.is_multiple_of(epoch) {
        convergence.push(epoch_max);
    }
    TrainingOutcome {
        table,
        convergence,
        updates,
    }
}

/// The simulator seen as an episodic environment for the government.
///
/// A step applies an intervention after the market has cleared, then runs the
/// next market phase so the reward carries that phase's externalities.
pub struct MarketEnvironment {
    cfg: ScenarioConfig,
    world: Option<World>,
    steps: usize,
}

impl MarketEnvironment {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            world: None,
            steps: 0,
        })
    }

    pub fn world(&self) -> Option<&World> {
        self.world.as_ref()
    }
}

impl Environment for MarketEnvironment {
    fn n_states(&self) -> usize {
        MarketStateId::COUNT
    }

    fn n_actions(&self) -> usize {
        Intervention::ALL.len()
    }

    fn reset(&mut self, seed: u64) -> usize {
        let mut world = World::new(&self.cfg, seed).expect("configuration validated on construction");
        world.step_market(&self.cfg);
        let s = classify_state(&world, &self.cfg).index();
        self.world = Some(world);
        self.steps = 0;
        s
    }

    fn step(&mut self, action: usize) -> Transition {
        let cfg = &self.cfg;
        let world = self.world.as_mut().expect("reset before step");
        let action = Intervention::from_index(action).unwrap_or(Intervention::NoAction);
        let mut pending: PendingReward = world.intervene(cfg, action);
        world.advance();
        world.step_market(cfg);
        pending.absorb(&world.log);
        let reward = pending.finish(cfg).mvpf;
        self.steps += 1;
        Transition {
            reward,
            next_state: classify_state(world, cfg).index(),
            terminal: false,
            truncated: self.steps >= cfg.training_horizon().max(1),
        }
    }
}

/// Trains the government on a scenario.
pub fn train_market(cfg: &ScenarioConfig) -> Result<TrainingOutcome, ModelError> {
    MarketEnvironment::new(cfg)?;
    Ok(train(
        || MarketEnvironment::new(cfg).expect("validated above"),
        &cfg.training,
    ))
}

/// Best and second-best action per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub state: usize,
    pub best: usize,
    pub second: Option<usize>,
    pub ranking: Vec<usize>,
}

pub fn extract_policy(table: &QTable) -> Vec<PolicyEntry> {
    (0..table.states())
        .map(|s| {
            let ranking = table.ranked(s);
            PolicyEntry {
                state: s,
                best: ranking[0],
                second: ranking.get(1).copied(),
                ranking,
            }
        })
        .collect()
}

/// Deterministic finite MDP given as tables, for checking the learner.
#[derive(Clone, Debug)]
pub struct TabularMdp {
    /// `next[s][a]`.
    pub next: Vec<Vec<usize>>,
    /// `reward[s][a]`.
    pub reward: Vec<Vec<f64>>,
    pub start: usize,
    pub horizon: usize,
    /// Uniformly random start state per episode when true.
    pub random_start: bool,
    state: usize,
    steps: usize,
}

impl TabularMdp {
    pub fn new(next: Vec<Vec<usize>>, reward: Vec<Vec<f64>>, horizon: usize) -> Self {
        Self {
            next,
            reward,
            start: 0,
            horizon,
            random_start: true,
            state: 0,
            steps: 0,
        }
    }
}

impl Environment for TabularMdp {
    fn n_states(&self) -> usize {
        self.next.len()
    }

    fn n_actions(&self) -> usize {
        self.next.first().map_or(0, Vec::len)
    }

    fn reset(&mut self, seed: u64) -> usize {
        self.state = if self.random_start {
            (seed % self.n_states() as u64) as usize
        } else {
            self.start
        };
        self.steps = 0;
        self.state
    }

    fn step(&mut self, action: usize) -> Transition {
        let r = self.reward[self.state][action];
        self.state = self.next[self.state][action];
        self.steps += 1;
        Transition {
            reward: r,
            next_state: self.state,
            terminal: false,
            truncated: self.steps >= self.horizon,
        }
    }
}
