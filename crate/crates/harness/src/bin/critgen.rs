use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use critgen_core::actions::enumerate_actions;
use critgen_core::agent::Ablation;
use critgen_core::world::{build_road, LayoutId};
use critgen_core::Agent;
use critgen_harness::config::{ExperimentConfig, PolicyKind};
use critgen_harness::experiment::{run_evaluation, run_training, CURVE_COLUMNS};
use critgen_harness::metrics::{compare, MetricsReport};
use critgen_harness::replay::replay;
use critgen_harness::{EpisodeTrace, HarnessError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "critgen", version, about = "Reinforcement-learning critical scenario generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write its checkpoint and learning curve.
    Train(RunArgs),
    /// Evaluate a policy and write metrics, a report and collision traces.
    Eval(RunArgs),
    /// Compare metric reports against the first one.
    Compare {
        /// Report files (`report.json`); the first is the baseline.
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-simulate a trace and report the first divergence.
    Replay {
        trace: PathBuf,
        /// Where to write the re-simulated trace.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a road layout as JSON.
    Road {
        /// Layout name or number 1-4.
        layout: String,
    },
    /// Print the action catalog.
    Actions {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Layout name or number 1-4, or `all`.
    #[arg(long)]
    layout: Option<String>,
    /// `agent` (aliases `ddqn`, `avastra`) or `random`.
    #[arg(long)]
    policy: Option<String>,
    /// Training episodes for `train`, episodes per layout for `eval`.
    #[arg(long)]
    episodes: Option<usize>,
    /// Observation period per action, seconds.
    #[arg(long)]
    otp: Option<f64>,
    /// Reward for an actual collision.
    #[arg(long)]
    rcol: Option<f64>,
    /// `full`, `external_only` or `internal_only`.
    #[arg(long)]
    ablation: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Agent checkpoint to evaluate.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn parse_layouts(s: &str) -> Result<Vec<LayoutId>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(LayoutId::ALL.to_vec());
    }
    s.split(',').map(|p| Ok(p.parse::<LayoutId>()?)).collect()
}

impl RunArgs {
    fn resolve(&self, evaluating: bool) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(l) = &self.layout {
            let layouts = parse_layouts(l)?;
            cfg.train_layouts = layouts.clone();
            cfg.eval_layouts = layouts;
        }
        if let Some(p) = &self.policy {
            cfg.policy = p.parse()?;
        }
        if let Some(n) = self.episodes {
            if evaluating {
                cfg.eval_episodes = n;
            } else {
                cfg.episodes = n;
            }
        }
        if let Some(o) = self.otp {
            cfg.episode.otp_seconds = o;
        }
        if let Some(r) = self.rcol {
            cfg.episode.r_col = r;
        }
        if let Some(a) = &self.ablation {
            cfg.episode.ablation = a.parse::<Ablation>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn train(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve(false)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
    let mut done = 0;
    let outcome = run_training(&cfg, |t| {
        done += 1;
        if done % 10 == 0 {
            eprintln!("episode {done}/{}: {}", cfg.episodes, t.end.terminal);
        }
    })?;
    outcome.agent.save_checkpoint(create(&args.out.join("agent.ckpt"))?)?;
    let mut w = csv::Writer::from_writer(create(&args.out.join("curve.csv"))?);
    w.write_record(CURVE_COLUMNS)?;
    for p in &outcome.curve {
        w.write_record([
            p.episode.to_string(),
            p.layout.to_string(),
            p.terminal.to_string(),
            p.steps.to_string(),
            p.env_steps.to_string(),
            format!("{:.6}", p.mean_reward),
            format!("{:.4}", p.epsilon),
            p.mean_loss.map(|l| format!("{l:.6}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    let collisions = outcome.curve.iter().filter(|p| p.terminal == critgen_harness::TerminalCause::Collision).count();
    println!(
        "trained {} episodes ({} environment steps, {collisions} counted collisions); wrote {}",
        cfg.episodes,
        outcome.env_steps,
        args.out.display()
    );
    Ok(())
}

fn load_agent(path: &Path, seed: u64) -> Result<Agent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Agent::load_checkpoint(BufReader::new(File::open(path)?), &mut rng)?)
}

fn eval(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve(true)?;
    let agent = match cfg.policy {
        PolicyKind::Agent => {
            let path = args
                .checkpoint
                .as_ref()
                .ok_or_else(|| HarnessError::Validation("--checkpoint is required for the agent policy".into()))?;
            Some(load_agent(path, cfg.seed)?)
        }
        PolicyKind::Random => None,
    };
    let ev = run_evaluation(&cfg, cfg.policy, agent.as_ref())?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("report.json"), ev.report.to_json())?;
    ev.report.write_csv(create(&args.out.join("metrics.csv"))?)?;
    for t in &ev.traces {
        let name = format!("{}_{}.jsonl", t.header.layout, t.header.seed);
        t.write_jsonl(create(&args.out.join("traces").join(name))?)?;
    }
    ev.report.write_csv(std::io::stdout().lock())?;
    Ok(())
}

fn compare_cmd(paths: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let reports = paths
        .iter()
        .map(|p| MetricsReport::from_json(&fs::read_to_string(p)?))
        .collect::<Result<Vec<_>>>()?;
    let table = compare(&reports)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("comparison.json"), table.to_json())?;
        table.write_csv(create(&dir.join("comparison.csv"))?)?;
    }
    table.write_csv(std::io::stdout().lock())?;
    Ok(())
}

fn replay_cmd(path: &Path, out: Option<&Path>) -> Result<bool> {
    let trace = EpisodeTrace::read_jsonl(BufReader::new(File::open(path)?))?;
    let report = replay(&trace)?;
    if let Some(o) = out {
        report.replayed.write_jsonl(create(o)?)?;
    }
    println!("{}", report.verdict());
    Ok(report.divergence.is_none())
}

fn actions_cmd(json: bool) -> Result<()> {
    let all = enumerate_actions();
    let mut out = std::io::stdout().lock();
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&all)?)?;
    } else {
        for a in &all {
            writeln!(out, "{a}")?;
        }
    }
    Ok(())
}

fn road_cmd(layout: &str) -> Result<()> {
    let road = build_road(layout.parse::<LayoutId>()?);
    writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&road)?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => train(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Compare { reports, out } => compare_cmd(reports, out.as_deref()).map(|_| true),
        Command::Replay { trace, out } => replay_cmd(trace, out.as_deref()),
        Command::Road { layout } => road_cmd(layout).map(|_| true),
        Command::Actions { json } => actions_cmd(*json).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(HarnessError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
