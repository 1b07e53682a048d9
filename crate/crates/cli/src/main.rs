//! `agentcycle`: rollouts, replay, race detection, attribution, the pruning
//! experiment, spec conversion and compliance checks.
//!
//! Exit codes: 0 success, 1 violations or divergence found, 2 usage or config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agentcycle::conversions::{aec_to_posg_det, aec_to_posg_general, check_equivalence, posg_to_aec};
use agentcycle::envs::{make, normalize_config, PursuitConfig, RewardMode, SteppingMode, BUNDLED};
use agentcycle::exec::Execution;
use agentcycle::formal::{battery, validate_spec, AnySpec};
use agentcycle::harness::{
    attribute_rewards, pruning_experiment, race_detect, replay_verify, rollout, PolicySpec, RaceOptions,
    RolloutRequest, Script, Trajectory,
};
use agentcycle::wrappers::compliance::{api_check_with, construction_failure};
use agentcycle::wrappers::mutants::mutants;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "agentcycle", version, about = "Sequential multi-agent environment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Jsonl,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded episode and write its trajectory.
    Rollout(RolloutArgs),
    /// Re-execute a trajectory and report the first divergence.
    Replay(ReplayArgs),
    /// Run a scenario under permuted internal resolution orders.
    RaceDetect(RaceArgs),
    /// Split each agent's return by the actor whose step emitted it.
    Attribute(AttributeArgs),
    /// Compare pruned and unpruned pursuit rewards over matched seeds.
    PruneExp(PruneArgs),
    /// Convert a tabular spec between the POSG and AEC models.
    Convert(ConvertArgs),
    /// Compliance, spec validation and equivalence checks.
    #[command(subcommand)]
    Check(CheckCommand),
}

#[derive(Args)]
struct RolloutArgs {
    /// Bundled environment name or path to a spec file.
    env: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// `random`, `greedy_pursuit` or `scripted:<file>`.
    #[arg(long, default_value = "random")]
    policy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
    /// Episode length for spec environments.
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Store whole observations next to their digests.
    #[arg(long)]
    full_obs: bool,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: Format,
}

#[derive(Args)]
struct ReplayArgs {
    trajectory: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct RaceArgs {
    /// `cleanup_fig5`, `cleanup`, `rps` or `pursuit`.
    env: String,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Aec,
    #[value(alias = "parallel_buggy")]
    ParallelBuggy,
}

#[derive(Args)]
struct AttributeArgs {
    trajectory: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct PruneArgs {
    /// Pursuit config; defaults to 8×8 with 2 pursuers and 1 evader.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Env-step resamples per cycle for the conditional variance.
    #[arg(long, default_value_t = 8)]
    resamples: usize,
    /// Run episodes on one thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    Aec,
    Posg,
    PosgGeneral,
}

#[derive(Args)]
struct ConvertArgs {
    spec: PathBuf,
    #[arg(long, value_enum)]
    to: Target,
    /// Cap on the reward-set product of the general construction.
    #[arg(long, default_value_t = agentcycle::conversions::DEFAULT_REWARD_PRODUCT_CAP)]
    cap: u128,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Random-legal-action API compliance episodes.
    Api {
        /// Bundled environment name or `mutant:<name>`.
        env: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        max_steps: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Structural validation of a spec file.
    Spec {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Exact distribution comparison of a POSG and an AEC derived from one another.
    Equivalence {
        posg: PathBuf,
        aec: PathBuf,
        #[arg(long, default_value_t = 2)]
        horizon: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sequential: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

/// Whether the command found violations or divergence.
enum Verdict {
    Clean,
    Findings,
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_optional(path: &Option<PathBuf>) -> Result<Value> {
    path.as_deref().map_or(Ok(Value::Null), read_json)
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn print_report<T: serde::Serialize + std::fmt::Display>(value: &T, format: Format) -> Result<()> {
    match format {
        Format::Text => print!("{value}"),
        Format::Json | Format::Jsonl => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn resolve_env(name: &str, config: Value, horizon: Option<u64>) -> Result<(String, Value)> {
    if BUNDLED.contains(&name) {
        return Ok((name.to_string(), config));
    }
    let path = Path::new(name);
    if path.is_file() {
        let spec = read_json(path)?;
        return Ok(("spec".to_string(), json!({ "spec": spec, "horizon": horizon })));
    }
    bail!("unknown environment {name:?}; bundled: {}", BUNDLED.join(", "))
}

fn parse_policy(text: &str, env: &str, config: &Value) -> Result<PolicySpec> {
    match text {
        "random" => Ok(PolicySpec::Random),
        "greedy_pursuit" => Ok(PolicySpec::GreedyPursuit),
        _ => {
            let Some(file) = text.strip_prefix("scripted:") else {
                bail!("unknown policy {text:?}; expected random, greedy_pursuit or scripted:<file>")
            };
            let mut probe = make(env, config)?;
            probe.reset(0);
            Ok(PolicySpec::Scripted(Script::from_json(&read_json(Path::new(file))?, &probe)?))
        }
    }
}

fn cmd_rollout(a: RolloutArgs) -> Result<Verdict> {
    if a.format != Format::Jsonl {
        bail!("trajectories are written as jsonl");
    }
    let (env, config) = resolve_env(&a.env, read_optional(&a.config)?, a.horizon)?;
    let config = normalize_config(&env, &config)?;
    let policy = parse_policy(&a.policy, &env, &config)?;
    let req = RolloutRequest { env, config, policy, seed: a.seed, max_steps: a.max_steps, full_obs: a.full_obs };
    let out = rollout(&req)?;
    write_or_print(&a.out, &out.trajectory.to_jsonl())?;
    let mut summary = String::from("returns:\n");
    for (agent, r) in &out.returns {
        summary.push_str(&format!("  {agent}: {r}\n"));
    }
    summary.push_str(&format!("steps: {} finished: {}\n", out.trajectory.records.len(), out.finished));
    if a.out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(Verdict::Clean)
}

fn cmd_replay(a: ReplayArgs) -> Result<Verdict> {
    let outcome = replay_verify(&Trajectory::read(&a.trajectory)?)?;
    match a.format {
        Format::Text if outcome.ok => println!("ok: {} records reproduced", outcome.records_checked),
        Format::Text => println!(
            "diverged at step {}: {}",
            outcome.first_divergence.unwrap_or_default(),
            outcome.detail.as_deref().unwrap_or("")
        ),
        _ => println!("{}", serde_json::to_string_pretty(&outcome)?),
    }
    Ok(if outcome.ok { Verdict::Clean } else { Verdict::Findings })
}

fn cmd_race(a: RaceArgs) -> Result<Verdict> {
    let scenario = read_optional(&a.scenario)?;
    let mode = a.mode.map(|m| match m {
        ModeArg::Aec => SteppingMode::Aec,
        ModeArg::ParallelBuggy => SteppingMode::ParallelBuggy,
    });
    let opts = RaceOptions { trials: a.trials, seed: a.seed, mode, max_steps: a.max_steps };
    let report = race_detect(&a.env, &scenario, &opts)?;
    match a.format {
        Format::Text => {
            println!(
                "{}: {} orders{}, {} distinct outcomes, {} stale observations, divergence: {}",
                report.env,
                report.trials_run,
                if report.exhaustive { " (all permutations)" } else { "" },
                report.distinct(),
                report.stale_observations,
                report.divergence
            );
            for (digest, summary) in &report.outcomes {
                let orders: Vec<_> = report.runs.iter().filter(|r| &r.digest == digest).map(|r| &r.order).collect();
                println!("  {digest} {summary} orders {orders:?}");
            }
        }
        _ => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(if report.divergence { Verdict::Findings } else { Verdict::Clean })
}

fn cmd_attribute(a: AttributeArgs) -> Result<Verdict> {
    let m = attribute_rewards(&Trajectory::read(&a.trajectory)?);
    print_report(&m, a.format)?;
    Ok(Verdict::Clean)
}

fn cmd_prune(a: PruneArgs) -> Result<Verdict> {
    let config: PursuitConfig = match &a.config {
        Some(path) => serde_json::from_value(read_json(path)?).context("pursuit config")?,
        None => PursuitConfig::small(RewardMode::Unpruned),
    };
    let summary = pruning_experiment(&config, a.episodes, a.seed, a.resamples, execution(a.sequential))?;
    print_report(&summary, a.format)?;
    Ok(Verdict::Clean)
}

fn cmd_convert(a: ConvertArgs) -> Result<Verdict> {
    let spec: AnySpec = serde_json::from_value(read_json(&a.spec)?).context("spec file")?;
    let converted = match (spec, a.to) {
        (AnySpec::Posg(p), Target::Aec) => AnySpec::Aec(posg_to_aec(&p)?),
        (AnySpec::Aec(s), Target::Posg) => AnySpec::Posg(aec_to_posg_det(&s)?),
        (AnySpec::Aec(s), Target::PosgGeneral) => AnySpec::Posg(aec_to_posg_general(&s, a.cap)?),
        (AnySpec::Posg(_), _) => bail!("a POSG converts only to aec"),
        (AnySpec::Aec(_), Target::Aec) => bail!("an AEC converts only to posg or posg-general"),
    };
    let mut text = serde_json::to_string_pretty(&converted)?;
    text.push('\n');
    write_or_print(&a.out, &text)?;
    Ok(Verdict::Clean)
}

fn cmd_check(c: CheckCommand) -> Result<Verdict> {
    match c {
        CheckCommand::Api { env, config, episodes, seed, max_steps, format } => {
            let report = match env.strip_prefix("mutant:") {
                Some(name) => {
                    let Some(mut m) = mutants().into_iter().find(|m| m.name == name) else {
                        let names: Vec<_> = mutants().iter().map(|m| m.name).collect();
                        bail!("unknown mutant {name:?}; available: {}", names.join(", "))
                    };
                    api_check_with(&mut m.env, episodes, seed, max_steps)
                }
                None => {
                    let (name, config) = resolve_env(&env, read_optional(&config)?, None)?;
                    match make(&name, &config) {
                        Ok(mut e) => api_check_with(&mut e, episodes, seed, max_steps),
                        Err(err) => construction_failure(&name, &err),
                    }
                }
            };
            print_report(&report, format)?;
            Ok(if report.ok() { Verdict::Clean } else { Verdict::Findings })
        }
        CheckCommand::Spec { spec, format } => {
            let spec: AnySpec = serde_json::from_value(read_json(&spec)?).context("spec file")?;
            let report = validate_spec(&spec);
            match format {
                Format::Text if report.is_empty() => println!("valid"),
                _ => print_report(&report, format)?,
            }
            Ok(if report.is_empty() { Verdict::Clean } else { Verdict::Findings })
        }
        CheckCommand::Equivalence { posg, aec, horizon, tol, seed, sequential, format } => {
            let posg: AnySpec = serde_json::from_value(read_json(&posg)?).context("POSG spec")?;
            let aec: AnySpec = serde_json::from_value(read_json(&aec)?).context("AEC spec")?;
            let (AnySpec::Posg(posg), AnySpec::Aec(aec)) = (posg, aec) else {
                bail!("expected a POSG spec followed by an AEC spec")
            };
            let profiles = battery(&posg.actions, &posg.observations, seed);
            let report = check_equivalence(&posg, &aec, &profiles, horizon, tol, execution(sequential))?;
            match format {
                Format::Text => {
                    println!(
                        "{:?}: {} profiles, horizon {}, max tv {:e}, max reward diff {:e}, max obs diff {:e}, {}",
                        report.direction,
                        report.profiles.len(),
                        report.horizon,
                        report.max_tv,
                        report.max_reward_diff,
                        report.max_obs_diff,
                        match report.first_divergent_t {
                            None => "equivalent".to_string(),
                            Some(t) => format!("first divergence at t = {t}"),
                        }
                    );
                    for note in &report.notes {
                        println!("  note: {note}");
                    }
                }
                _ => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            Ok(if report.ok() { Verdict::Clean } else { Verdict::Findings })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rollout(a) => cmd_rollout(a),
        Command::Replay(a) => cmd_replay(a),
        Command::RaceDetect(a) => cmd_race(a),
        Command::Attribute(a) => cmd_attribute(a),
        Command::PruneExp(a) => cmd_prune(a),
        Command::Convert(a) => cmd_convert(a),
        Command::Check(c) => cmd_check(c),
    };
    match result {
        Ok(Verdict::Clean) => ExitCode::SUCCESS,
        Ok(Verdict::Findings) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
