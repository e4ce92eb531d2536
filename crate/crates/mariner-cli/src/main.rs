//! Command-line front end: run missions and scripted fault situations,
//! batch ablation studies, plan/validate against `.htn` files, and train or
//! evaluate the navigation policy.
//!
//! Exit codes: 0 on success, 1 when a mission or validation reports failure,
//! 2 on usage or configuration errors.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mariner::domain::{self, Domain};
use mariner::htn::{self, Validity};
use mariner::knowledge;
use mariner::mission::{
    ablate, run_mission, run_situation, AblationMode, AblationOptions, LoadedMission,
    MissionConfig, MissionReport,
};
use mariner::rl::{evaluate_policy, train, Policy, TrainFileConfig};
use mariner::semantic::MissionCommand;
use mariner::trace::TraceWriter;
use mariner::world::WorldConfig;

#[derive(Parser)]
#[command(name = "mariner", version, about = "AUV plan-act-replan mission stack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mission from a mission config (or from --world/--command).
    Run {
        /// Mission configuration file (.json).
        #[arg(long)]
        config: Option<PathBuf>,
        /// World file; requires --command and --policy when used without --config.
        #[arg(long)]
        world: Option<PathBuf>,
        /// Natural-language command, e.g. "Search the aborted warship".
        #[arg(long)]
        command: Option<String>,
        /// Navigation policy file; defaults come from the mission config.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Trace output path (.jsonl).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run one of the three scripted fault situations on a base mission.
    Situation {
        /// Scenario number: 1 (speed fault), 2 (lateral push), 3 (obstacle).
        scenario: u8,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Aggregate seeded runs in an ablation mode.
    Ablate {
        /// full, no-llm, or no-task.
        #[arg(long)]
        mode: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Base seed; run i uses seed + i.
        #[arg(long, default_value_t = 100)]
        seed: u64,
        /// Invalid-plan probability for the no-task proposal stub.
        #[arg(long)]
        invalid_probability: Option<f64>,
        /// Write per-run metrics CSV here.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Compute a plan for a domain/problem pair.
    Plan {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
    },
    /// Validate a plan file against a domain/problem pair.
    Validate {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        /// Plan file: one ground action per line.
        #[arg(long)]
        plan: PathBuf,
    },
    /// Train the navigation policy on the corridor task.
    TrainDqn {
        /// Training file with corridor and hyperparameter blocks.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output policy file (.json).
        #[arg(long)]
        out: PathBuf,
        /// Learning-curve CSV (episode, reward, loss).
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Evaluate a policy greedily on the corridor task.
    EvalPolicy {
        #[arg(long)]
        policy: PathBuf,
        /// Corridor/training config describing the evaluation world.
        #[arg(long)]
        world: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 1234)]
        seed: u64,
    },
}

/// Failures that should exit with code 2.
struct ConfigError(String);

impl<E: std::fmt::Display> From<E> for ConfigError {
    fn from(e: E) -> Self {
        ConfigError(e.to_string())
    }
}

fn read_file(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

fn load_domain(path: &Path) -> Result<Domain, ConfigError> {
    Ok(domain::parse_domain(&read_file(path)?)?)
}

fn print_report(report: &MissionReport) {
    println!(
        "mission {}: {} steps, {} phase(s), reason: {}",
        if report.success { "succeeded" } else { "failed" },
        report.total_steps,
        report.phases.len(),
        report.reason
    );
    for (i, phase) in report.phases.iter().enumerate() {
        println!(
            "  phase {}: {} -> [{}]",
            i + 1,
            phase.heuristic.directive,
            phase.plan.join(", ")
        );
    }
    for ev in &report.replan_events {
        println!("  replan @ step {}: flag {:?} -> {:?}", ev.step, ev.flag, ev.directive);
    }
}

fn run_to_completion(
    mission: &LoadedMission,
    seed: u64,
    trace_path: Option<&Path>,
    scenario: Option<u8>,
) -> Result<MissionReport, ConfigError> {
    let report = match trace_path {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            let mut writer = TraceWriter::new(BufWriter::new(file));
            let report = match scenario {
                Some(s) => run_situation(mission, s, seed, &mut writer)?,
                None => run_mission(mission, seed, &mut writer)?,
            };
            writer.into_inner().flush().map_err(|e| ConfigError(e.to_string()))?;
            report
        }
        None => {
            let mut writer = mariner::trace::null_writer();
            match scenario {
                Some(s) => run_situation(mission, s, seed, &mut writer)?,
                None => run_mission(mission, seed, &mut writer)?,
            }
        }
    };
    Ok(report)
}

fn load_mission_args(
    config: Option<&Path>,
    world: Option<&Path>,
    command: Option<&str>,
    policy: Option<&Path>,
) -> Result<LoadedMission, ConfigError> {
    if let Some(cfg_path) = config {
        let mut mission = MissionConfig::load(cfg_path)?;
        if let Some(cmd) = command {
            mission.command = MissionCommand::parse(cmd)?;
            mission.command_text = cmd.to_string();
        }
        if let Some(p) = policy {
            mission.policy = Policy::from_json(&read_file(p)?)?;
        }
        return Ok(mission);
    }
    let world_path =
        world.ok_or_else(|| ConfigError("either --config or --world is required".into()))?;
    let command =
        command.ok_or_else(|| ConfigError("--command is required with --world".into()))?;
    let policy_path =
        policy.ok_or_else(|| ConfigError("--policy is required with --world".into()))?;
    Ok(LoadedMission {
        command: MissionCommand::parse(command)?,
        command_text: command.to_string(),
        world: WorldConfig::from_json(&read_file(world_path)?)?,
        domain: domain::marine_domain(),
        knowledge: knowledge::marine_knowledge(),
        policy: Policy::from_json(&read_file(policy_path)?)?,
        replanner: Default::default(),
        step_budget: mariner::mission::config::DEFAULT_STEP_BUDGET,
        noise: Default::default(),
        faults: Vec::new(),
    })
}

fn real_main() -> Result<ExitCode, ConfigError> {
    match Cli::parse().command {
        Command::Run { config, world, command, policy, seed, trace } => {
            let mission = load_mission_args(
                config.as_deref(),
                world.as_deref(),
                command.as_deref(),
                policy.as_deref(),
            )?;
            let report = run_to_completion(&mission, seed, trace.as_deref(), None)?;
            print_report(&report);
            Ok(if report.success { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Situation { scenario, config, seed, trace } => {
            let mission = MissionConfig::load(&config)?;
            let report = run_to_completion(&mission, seed, trace.as_deref(), Some(scenario))?;
            print_report(&report);
            // A situation run is about the recovery, not mission success.
            Ok(ExitCode::SUCCESS)
        }
        Command::Ablate { mode, config, runs, seed, invalid_probability, metrics } => {
            let mode = AblationMode::parse(&mode)
                .ok_or_else(|| ConfigError(format!("unknown mode `{mode}`")))?;
            let mission = MissionConfig::load(&config)?;
            let mut options = AblationOptions::default();
            if let Some(p) = invalid_probability {
                options.invalid_plan_probability = p;
            }
            let stats = ablate(&mission, mode, runs, seed, options)?;
            println!(
                "{:?}: {} runs, mean steps {:.1}, success rate {:.2}",
                stats.mode, stats.runs, stats.mean_completion_steps, stats.success_rate
            );
            if let Some(path) = metrics {
                let mut out = String::from("seed,steps,success\n");
                for (s, steps, ok) in &stats.per_run {
                    out.push_str(&format!("{s},{steps},{ok}\n"));
                }
                fs::write(&path, out).map_err(|e| ConfigError(e.to_string()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plan { domain: domain_path, problem } => {
            let domain = load_domain(&domain_path)?;
            let problem = domain::parse_problem(&read_file(&problem)?, &domain)?;
            let objects = problem.grounding_objects(&domain);
            match htn::plan(&domain, &objects, &problem.init, &problem.goal) {
                Ok(plan) => {
                    print!("{plan}");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("no plan: {e}");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Validate { domain: domain_path, problem, plan } => {
            let domain = load_domain(&domain_path)?;
            let problem = domain::parse_problem(&read_file(&problem)?, &domain)?;
            let objects = problem.grounding_objects(&domain);
            let steps = domain::parse_plan(&read_file(&plan)?, &domain)?;
            let mut ground = Vec::new();
            for (name, args) in steps {
                ground.push(htn::ground_step(&domain, &objects, &name, &args)?);
            }
            let plan = htn::Plan { steps: ground };
            match htn::validate_plan(&problem.init, &plan, &problem.goal) {
                Validity::Valid => {
                    println!("Valid");
                    Ok(ExitCode::SUCCESS)
                }
                Validity::Invalid { step, violated } => {
                    println!("Invalid at step {step}: {violated} does not hold");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::TrainDqn { config, seed, out, curve } => {
            let cfg: TrainFileConfig = serde_json::from_str(&read_file(&config)?)?;
            let (policy, stats) =
                train(&cfg.corridor, &cfg.train, seed).map_err(|e| ConfigError(e.to_string()))?;
            fs::write(&out, policy.to_json()).map_err(|e| ConfigError(e.to_string()))?;
            let curve_path = curve.unwrap_or_else(|| out.with_extension("curve.csv"));
            let mut csv = String::from("episode,reward,loss\n");
            for s in &stats {
                csv.push_str(&format!("{},{},{}\n", s.episode, s.reward, s.loss));
            }
            fs::write(&curve_path, csv).map_err(|e| ConfigError(e.to_string()))?;
            let tail: Vec<&mariner::rl::EpisodeStats> = stats.iter().rev().take(50).collect();
            let mean: f64 = tail.iter().map(|s| s.reward).sum::<f64>() / tail.len().max(1) as f64;
            println!(
                "trained {} episodes (seed {seed}); mean reward over last {}: {mean:.2}",
                stats.len(),
                tail.len()
            );
            println!("policy -> {}", out.display());
            println!("curve  -> {}", curve_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::EvalPolicy { policy, world, episodes, seed } => {
            let cfg: TrainFileConfig = serde_json::from_str(&read_file(&world)?)?;
            let policy = Policy::from_json(&read_file(&policy)?)?;
            let stats = evaluate_policy(&policy, &cfg.corridor, episodes, seed)
                .map_err(|e| ConfigError(e.to_string()))?;
            println!(
                "{}/{} safe traversals (success rate {:.2}), mean reward {:.2}",
                stats.successes,
                stats.episodes,
                stats.success_rate(),
                stats.mean_reward
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(ConfigError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
