//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::config::{load_scenario, ScenarioConfig};
use crate::env::{run_episode, PolicySource};
use crate::error::{ConfigError, IoError, ModelError};
use crate::government::Intervention;
use crate::io;
use crate::metrics::{check_stylized_facts, Verdict};
use crate::rl::{extract_policy, train_market, MarketStateId, QTable};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Usage(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(IoError::File {
            path: "<stdout>".into(),
            source: e,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "catsim", version, about = "Catastrophe insurance market simulator with a learning government")]
pub struct Cli {
    /// Scenario file (TOML). Defaults are used for anything it leaves out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, env = "CATSIM_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
    /// Base seed; overrides the scenario file.
    #[arg(long, global = true, env = "CATSIM_SEED")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run episodes and write one trace per episode.
    Simulate(SimulateArgs),
    /// Train the government and save the q-table.
    Train(TrainArgs),
    /// Run the greedy policy of a saved table and report rewards per state.
    Evaluate(EvaluateArgs),
    /// Check the six stylized facts on no-government episodes.
    StylizedFacts(FactsArgs),
    /// Write plot-ready CSV series.
    ExportPlots,
    /// Render a saved table, marking the best and second-best action.
    PrintQtable(PrintArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    pub episodes: u64,
    /// Market only: no interventions and no taxes.
    #[arg(long, conflicts_with_all = ["policy", "qtable"])]
    pub no_government: bool,
    /// Comma-separated interventions applied in turn.
    #[arg(long, value_delimiter = ',')]
    pub policy: Vec<Intervention>,
    /// Act greedily on a saved table.
    #[arg(long, conflicts_with = "policy")]
    pub qtable: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub episodes: Option<u64>,
    /// Steps per training episode.
    #[arg(long)]
    pub episode_length: Option<usize>,
    /// Output file; defaults to `<out-dir>/qtable.toml`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub qtable: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub episodes: u64,
}

#[derive(Debug, Args)]
pub struct FactsArgs {
    #[arg(long, default_value_t = 50)]
    pub episodes: u64,
}

#[derive(Debug, Args)]
pub struct PrintArgs {
    #[arg(long)]
    pub qtable: PathBuf,
    /// Show all eight states, not only the five named ones.
    #[arg(long)]
    pub all_states: bool,
}

fn scenario(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let (cfg, warnings) = load_scenario(path)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            cfg
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.environment.seed = seed;
        cfg.training.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args` and runs the command, writing the report to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            write!(out, "{e}")?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    execute(&cli, out)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = scenario(cli)?;
    let dir = &cli.out_dir;
    match &cli.command {
        Command::Simulate(a) => simulate(&cfg, dir, a, out),
        Command::Train(a) => train(&cfg, dir, a, out),
        Command::Evaluate(a) => evaluate(&cfg, dir, a, out),
        Command::StylizedFacts(a) => facts(&cfg, dir, a, out),
        Command::ExportPlots => export_plots(&cfg, dir, out),
        Command::PrintQtable(a) => print_qtable(&cfg, a, out),
    }
}

fn simulate(cfg: &ScenarioConfig, dir: &Path, a: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let table = match &a.qtable {
        Some(p) => Some(io::load_qtable(p, Some(cfg))?.0),
        None => None,
    };
    let policy = if let Some(t) = &table {
        PolicySource::Greedy(t)
    } else if a.no_government || a.policy.is_empty() {
        PolicySource::NoGovernment
    } else {
        PolicySource::Sequence(a.policy.clone())
    };
    for k in 0..a.episodes {
        let seed = cfg.environment.seed.wrapping_add(k);
        let trace = run_episode(cfg, seed, &policy)?;
        let path = dir.join(format!("trace_seed{seed}.csv"));
        io::write_trace_csv(&trace, &path)?;
        writeln!(out, "{}", path.display())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceRow {
    epoch: usize,
    max_abs_change: f64,
}

fn train(cfg: &ScenarioConfig, dir: &Path, a: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    if let Some(n) = a.episodes {
        cfg.training.episodes = n;
    }
    if a.episode_length.is_some() {
        cfg.training.episode_length = a.episode_length;
    }
    cfg.validate()?;
    let outcome = train_market(&cfg)?;
    let path = a.output.clone().unwrap_or_else(|| dir.join("qtable.toml"));
    io::save_qtable(&path, &outcome.table, &cfg)?;
    let conv = path.with_file_name(format!(
        "{}_convergence.csv",
        path.file_stem().and_then(|s| s.to_str()).unwrap_or("qtable")
    ));
    let mut w = csv::Writer::from_path(&conv).map_err(IoError::from)?;
    for (epoch, &d) in outcome.convergence.iter().enumerate() {
        w.serialize(ConvergenceRow {
            epoch,
            max_abs_change: d,
        })
        .map_err(IoError::from)?;
    }
    w.flush()?;
    writeln!(out, "{} updates; table written to {}", outcome.updates, path.display())?;
    Ok(())
}

#[derive(Serialize)]
struct EvaluationRow {
    state: String,
    greedy_action: String,
    decisions: usize,
    mean_mvpf: Option<f64>,
}

fn evaluate(cfg: &ScenarioConfig, dir: &Path, a: &EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (table, _) = io::load_qtable(&a.qtable, Some(cfg))?;
    let mut sum = [0.0; MarketStateId::COUNT];
    let mut count = [0usize; MarketStateId::COUNT];
    for k in 0..a.episodes {
        let trace = run_episode(cfg, cfg.environment.seed.wrapping_add(k), &PolicySource::Greedy(&table))?;
        for r in &trace.records {
            if let (Some(s), Some(m)) = (r.state, r.reward()) {
                sum[s.index()] += m;
                count[s.index()] += 1;
            }
        }
    }
    let path = dir.join("evaluation.csv");
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| IoError::File {
            path: d.display().to_string(),
            source: e,
        })?;
    }
    let mut w = csv::Writer::from_path(&path).map_err(IoError::from)?;
    writeln!(out, "{:<45} {:<20} {:>9} {:>10}", "state", "greedy action", "decisions", "mean MVPF")?;
    for s in MarketStateId::all() {
        let i = s.index();
        let mean = (count[i] > 0).then(|| sum[i] / count[i] as f64);
        let action = table.greedy(s);
        writeln!(
            out,
            "{:<45} {:<20} {:>9} {:>10}",
            s.label(),
            action.name(),
            count[i],
            mean.map_or("-".to_string(), |m| format!("{m:.4}"))
        )?;
        w.serialize(EvaluationRow {
            state: s.label(),
            greedy_action: action.name().into(),
            decisions: count[i],
            mean_mvpf: mean,
        })
        .map_err(IoError::from)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FactRow {
    seed: u64,
    catastrophes: usize,
    peak_coverage: f64,
    terminal_coverage: f64,
    inadequate_coverage: Verdict,
    purchases_rise: Verdict,
    early_lapse: Verdict,
    premiums_rise: Verdict,
    exits_follow: Verdict,
    unmet_demand: Verdict,
}

const FACT_NAMES: [&str; 6] = [
    "inadequate coverage",
    "purchases rise after a catastrophe",
    "policies lapse as memory fades",
    "premium rates rise after a catastrophe",
    "insurers exit after a catastrophe",
    "unmet demand at affordable prices",
];

fn facts(cfg: &ScenarioConfig, dir: &Path, a: &FactsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let path = dir.join("stylized_facts.csv");
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| IoError::File {
            path: d.display().to_string(),
            source: e,
        })?;
    }
    let mut w = csv::Writer::from_path(&path).map_err(IoError::from)?;
    let mut tally = [[0usize; 3]; 6];
    for k in 0..a.episodes {
        let seed = cfg.environment.seed.wrapping_add(k);
        let trace = run_episode(cfg, seed, &PolicySource::NoGovernment)?;
        let rep = check_stylized_facts(&trace, &cfg.metrics);
        for (i, v) in rep.verdicts().iter().enumerate() {
            tally[i][match v {
                Verdict::Holds => 0,
                Verdict::Fails => 1,
                Verdict::NotApplicable => 2,
            }] += 1;
        }
        w.serialize(FactRow {
            seed,
            catastrophes: rep.catastrophes,
            peak_coverage: rep.peak_coverage,
            terminal_coverage: rep.terminal_coverage,
            inadequate_coverage: rep.inadequate_coverage,
            purchases_rise: rep.purchases_rise,
            early_lapse: rep.early_lapse,
            premiums_rise: rep.premiums_rise,
            exits_follow: rep.exits_follow,
            unmet_demand: rep.unmet_demand,
        })
        .map_err(IoError::from)?;
    }
    w.flush()?;
    writeln!(out, "{:<42} {:>6} {:>6} {:>6}", "fact", "holds", "fails", "n/a")?;
    for (i, name) in FACT_NAMES.iter().enumerate() {
        writeln!(
            out,
            "{:<42} {:>6} {:>6} {:>6}",
            format!("{}. {name}", i + 1),
            tally[i][0],
            tally[i][1],
            tally[i][2]
        )?;
    }
    Ok(())
}

fn export_plots(cfg: &ScenarioConfig, dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = cfg.environment.seed;
    let trace = run_episode(cfg, seed, &PolicySource::NoGovernment)?;
    let mut bare = cfg.clone();
    bare.environment.no_insurance = true;
    let uninsured = run_episode(&bare, seed, &PolicySource::NoGovernment)?;
    let files = [
        ("series.csv", &trace),
        ("series_no_insurance.csv", &uninsured),
    ];
    for (name, t) in files {
        let p = dir.join(name);
        io::write_series_csv(t, &p)?;
        writeln!(out, "{}", p.display())?;
    }
    let p = dir.join("individuals.csv");
    io::write_individuals_csv(&trace, &p)?;
    writeln!(out, "{}", p.display())?;
    let p = dir.join("premiums.csv");
    io::write_premiums_csv(&trace, &p)?;
    writeln!(out, "{}", p.display())?;
    Ok(())
}

/// Table rows with `**` on the best action and `*` on the runner-up.
pub fn render_qtable(table: &QTable, all_states: bool) -> String {
    let policy = extract_policy(table);
    let mut s = String::new();
    let header: Vec<String> = Intervention::ALL.iter().map(|a| format!("{:>20}", a.name())).collect();
    s.push_str(&format!("{:<10}{}\n", "", header.join("")));
    let rows: Vec<(String, MarketStateId)> = if all_states {
        MarketStateId::all().map(|m| (format!("cell {}", m.index()), m)).collect()
    } else {
        MarketStateId::named()
            .iter()
            .map(|(n, m)| (format!("State {n}"), *m))
            .collect()
    };
    for (name, m) in rows {
        let i = m.index();
        let cells: Vec<String> = (0..table.actions())
            .map(|a| {
                let mark = if policy[i].best == a {
                    "**"
                } else if policy[i].second == Some(a) {
                    "*"
                } else {
                    ""
                };
                format!("{:>20}", format!("{:.3}{mark}", table.q(i, a)))
            })
            .collect();
        s.push_str(&format!("{:<10}{}   {}\n", name, cells.join(""), m.label()));
    }
    s
}

fn print_qtable(cfg: &ScenarioConfig, a: &PrintArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (table, _) = io::load_qtable(&a.qtable, Some(cfg))?;
    write!(out, "{}", render_qtable(&table, a.all_states))?;
    Ok(())
}
