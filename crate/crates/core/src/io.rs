//! Files: traces and plot data as CSV, q-tables as fingerprinted TOML.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ScenarioConfig, TrainingConfig};
use crate::env::EpisodeTrace;
use crate::error::IoError;
use crate::government::Intervention;
use crate::individual::Provider;
use crate::metrics;
use crate::rl::{MarketStateId, QTable};

/// Bumped whenever the q-table layout changes.
pub const QTABLE_FORMAT: u32 = 1;

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| file_err(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| file_err(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| file_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| file_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| file_err(path, e))
}

/// One row of a trace file.
#[derive(Serialize)]
struct TraceRow {
    seed: u64,
    t: usize,
    catastrophe: bool,
    coverage: f64,
    insured: usize,
    new_policies: usize,
    unserved: usize,
    gini: f64,
    mean_wealth: f64,
    active_insurers: usize,
    total_capacity: u64,
    entries: usize,
    exits: usize,
    insolvencies: usize,
    mean_quoted_rate: Option<f64>,
    state: Option<String>,
    intervention: Option<String>,
    wtp: Option<f64>,
    mechanical_cost: Option<f64>,
    crowding_out: Option<f64>,
    debt_tax: Option<f64>,
    insolvency: Option<f64>,
    cry_wolf: Option<f64>,
    moral_hazard: Option<f64>,
    catastrophe_losses: Option<f64>,
    g_net: Option<f64>,
    mvpf: Option<f64>,
    treasury: f64,
    debt: f64,
}

pub fn write_trace_csv(trace: &EpisodeTrace, path: &Path) -> Result<(), IoError> {
    let mut w = writer(path)?;
    for r in &trace.records {
        let wf = r.welfare.as_ref();
        let ext = wf.map(|w| w.externalities);
        w.serialize(TraceRow {
            seed: trace.seed,
            t: r.t,
            catastrophe: r.market.catastrophe,
            coverage: r.market.coverage,
            insured: r.market.insured,
            new_policies: r.market.new_policies,
            unserved: r.market.unserved,
            gini: r.gini,
            mean_wealth: r.mean_wealth,
            active_insurers: r.active_insurers,
            total_capacity: r.total_capacity,
            entries: r.market.entries.len(),
            exits: r.market.exits.len(),
            insolvencies: r.market.insolvencies.len(),
            mean_quoted_rate: r.market.mean_quoted_rate(),
            state: r.state.map(|s| s.label()),
            intervention: r.intervention.map(|a| a.name().to_string()),
            wtp: wf.map(|w| w.wtp),
            mechanical_cost: wf.map(|w| w.mechanical_cost),
            crowding_out: ext.map(|e| e.crowding_out),
            debt_tax: ext.map(|e| e.debt_tax),
            insolvency: ext.map(|e| e.insolvency),
            cry_wolf: ext.map(|e| e.cry_wolf),
            moral_hazard: ext.map(|e| e.moral_hazard),
            catastrophe_losses: ext.map(|e| e.catastrophe_losses),
            g_net: wf.map(|w| w.g_net),
            mvpf: wf.map(|w| w.mvpf),
            treasury: r.treasury,
            debt: r.debt,
        })?;
    }
    w.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

/// Coverage, inequality and market-wide series, one row per step.
pub fn write_series_csv(trace: &EpisodeTrace, path: &Path) -> Result<(), IoError> {
    let mut w = writer(path)?;
    for row in metrics::series(trace) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

#[derive(Serialize)]
struct IndividualRow {
    t: usize,
    id: usize,
    risk_perception: f64,
    wealth: f64,
    max_premium: f64,
    best_offer: Option<f64>,
    provider: String,
}

/// Per-person perception, wealth, premium bound and best offer.
pub fn write_individuals_csv(trace: &EpisodeTrace, path: &Path) -> Result<(), IoError> {
    let mut w = writer(path)?;
    for r in &trace.records {
        for id in 0..r.wealth.len() {
            w.serialize(IndividualRow {
                t: r.t,
                id,
                risk_perception: r.risk_perception[id],
                wealth: r.wealth[id],
                max_premium: r.max_premium[id],
                best_offer: r.best_offer[id],
                provider: match r.provider[id] {
                    None => String::new(),
                    Some(Provider::Government) => "government".into(),
                    Some(Provider::Insurer(j)) => format!("insurer-{j}"),
                },
            })?;
        }
    }
    w.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

#[derive(Serialize)]
struct PremiumRow {
    t: usize,
    catastrophe: bool,
    insurer: usize,
    loaded_rate: f64,
}

/// Loaded premium rate quoted by every active insurer at every step.
pub fn write_premiums_csv(trace: &EpisodeTrace, path: &Path) -> Result<(), IoError> {
    let mut w = writer(path)?;
    for r in &trace.records {
        for &(insurer, loaded_rate) in &r.market.quoted_rates {
            w.serialize(PremiumRow {
                t: r.t,
                catastrophe: r.market.catastrophe,
                insurer,
                loaded_rate,
            })?;
        }
    }
    w.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

/// Hash of everything that shapes the environment a table was learned in.
/// Seeds and learning hyperparameters are excluded; state thresholds are not.
pub fn fingerprint(cfg: &ScenarioConfig) -> String {
    let mut c = cfg.clone();
    c.environment.seed = 0;
    c.training = TrainingConfig {
        awareness_threshold: cfg.training.awareness_threshold,
        supply_threshold: cfg.training.supply_threshold,
        ..TrainingConfig::default()
    };
    let digest = Sha256::digest(c.to_toml_string().as_bytes());
    hex::encode(&digest[..16])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QTableFile {
    format: u32,
    fingerprint: String,
    actions: Vec<String>,
    training: TrainingConfig,
    rows: Vec<QRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QRow {
    state: String,
    q: Vec<f64>,
    visits: Vec<u64>,
}

pub fn qtable_to_string(table: &QTable, cfg: &ScenarioConfig) -> Result<String, IoError> {
    if table.states() != MarketStateId::COUNT || table.actions() != Intervention::ALL.len() {
        return Err(IoError::QTable(format!(
            "expected an {}x{} table, got {}x{}",
            MarketStateId::COUNT,
            Intervention::ALL.len(),
            table.states(),
            table.actions()
        )));
    }
    let rows = MarketStateId::all()
        .map(|s| {
            let i = s.index();
            QRow {
                state: s.label(),
                q: table.row(i).to_vec(),
                visits: (0..table.actions()).map(|a| table.visits(i, a)).collect(),
            }
        })
        .collect();
    let file = QTableFile {
        format: QTABLE_FORMAT,
        fingerprint: fingerprint(cfg),
        actions: Intervention::ALL.iter().map(|a| a.name().to_string()).collect(),
        training: cfg.training.clone(),
        rows,
    };
    toml::to_string(&file).map_err(|e| IoError::QTable(e.to_string()))
}

/// Parses a table and checks it against `cfg` when given.
pub fn qtable_from_str(text: &str, cfg: Option<&ScenarioConfig>) -> Result<(QTable, TrainingConfig), IoError> {
    let file: QTableFile = toml::from_str(text).map_err(|e| IoError::QTable(e.to_string()))?;
    if file.format != QTABLE_FORMAT {
        return Err(IoError::QTable(format!("unsupported format {}", file.format)));
    }
    let names: Vec<&str> = Intervention::ALL.iter().map(|a| a.name()).collect();
    if file.actions != names {
        return Err(IoError::QTable("action columns do not match this build".into()));
    }
    if let Some(cfg) = cfg {
        let expected = fingerprint(cfg);
        if expected != file.fingerprint {
            return Err(IoError::FingerprintMismatch {
                expected,
                found: file.fingerprint,
            });
        }
    }
    if file.rows.len() != MarketStateId::COUNT {
        return Err(IoError::QTable(format!("expected {} rows", MarketStateId::COUNT)));
    }
    let mut values = Vec::with_capacity(64);
    let mut visits = Vec::with_capacity(64);
    for (i, row) in file.rows.iter().enumerate() {
        let label = MarketStateId::from_index(i).map(|s| s.label()).unwrap_or_default();
        if row.state != label {
            return Err(IoError::QTable(format!("row {i} is `{}`, expected `{label}`", row.state)));
        }
        if row.q.len() != names.len() || row.visits.len() != names.len() {
            return Err(IoError::QTable(format!("row {i} has the wrong width")));
        }
        if row.q.iter().any(|q| !q.is_finite()) {
            return Err(IoError::QTable(format!("row {i} holds a non-finite value")));
        }
        values.extend_from_slice(&row.q);
        visits.extend_from_slice(&row.visits);
    }
    let table = QTable::from_parts(MarketStateId::COUNT, names.len(), values, visits)
        .ok_or_else(|| IoError::QTable("inconsistent dimensions".into()))?;
    Ok((table, file.training))
}

pub fn save_qtable(path: &Path, table: &QTable, cfg: &ScenarioConfig) -> Result<(), IoError> {
    write_text(path, &qtable_to_string(table, cfg)?)
}

pub fn load_qtable(path: &Path, cfg: Option<&ScenarioConfig>) -> Result<(QTable, TrainingConfig), IoError> {
    qtable_from_str(&read_text(path)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_ignores_seeds_only() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        b.environment.seed = 99;
        b.training.seed = 7;
        b.training.episodes = 5;
        assert_eq!(fingerprint(&a), fingerprint(&b));
        b.environment.catastrophe_probability = 0.05;
        assert_ne!(fingerprint(&a), fingerprint(&b));
    }

    #[test]
    fn qtable_round_trip_is_lossless() {
        let cfg = ScenarioConfig::default();
        let mut t = QTable::market();
        t.set_q(0, 1, 0.1 + 0.2);
        t.set_q(7, 7, 1.0 / 3.0);
        let text = qtable_to_string(&t, &cfg).unwrap();
        let (back, _) = qtable_from_str(&text, Some(&cfg)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn mismatched_scenario_refused() {
        let cfg = ScenarioConfig::default();
        let text = qtable_to_string(&QTable::market(), &cfg).unwrap();
        let mut other = cfg.clone();
        other.environment.population = 50;
        assert!(matches!(
            qtable_from_str(&text, Some(&other)),
            Err(IoError::FingerprintMismatch { .. })
        ));
    }
}
