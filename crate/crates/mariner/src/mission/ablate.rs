//! Ablation harnesses: run the same mission with the semantic planner or the
//! task planner switched off and aggregate completion statistics over a
//! batch of seeded runs.

use serde::{Deserialize, Serialize};

use super::{LoadedMission, MissionRunner, Mode};
use crate::trace::null_writer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Full,
    NoLlm,
    NoTask,
}

impl AblationMode {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "full" => AblationMode::Full,
            "no-llm" | "no_llm" => AblationMode::NoLlm,
            "no-task" | "no_task" => AblationMode::NoTask,
            _ => return None,
        })
    }

    fn runner_mode(self) -> Mode {
        match self {
            AblationMode::Full => Mode::Full,
            AblationMode::NoLlm => Mode::NoLlm,
            AblationMode::NoTask => Mode::NoTask,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationOptions {
    /// Probability the task-planner ablation's proposal stub emits the
    /// interleaved invalid plan.
    pub invalid_plan_probability: f64,
}

impl Default for AblationOptions {
    fn default() -> Self {
        AblationOptions { invalid_plan_probability: 0.65 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationStats {
    pub mode: AblationMode,
    pub runs: usize,
    pub mean_completion_steps: f64,
    pub success_rate: f64,
    /// Per-run (seed, steps, success) triples, for inspection.
    pub per_run: Vec<(u64, u64, bool)>,
}

/// Runs `runs` seeded missions in the given mode and aggregates completion
/// steps and success rate. Failed runs contribute their executed steps.
pub fn ablate(
    mission: &LoadedMission,
    mode: AblationMode,
    runs: usize,
    seed_base: u64,
    options: AblationOptions,
) -> std::io::Result<AblationStats> {
    let mut per_run = Vec::with_capacity(runs);
    for i in 0..runs {
        let seed = seed_base + i as u64;
        let mut trace = null_writer();
        let runner = MissionRunner::with_mode(mission, seed, mode.runner_mode(), &mut trace)
            .map_err(|e| std::io::Error::other(e.to_string()))?
            .with_invalid_plan_probability(options.invalid_plan_probability);
        let report = runner.run()?;
        per_run.push((seed, report.total_steps, report.success));
    }
    let mean_completion_steps =
        per_run.iter().map(|(_, s, _)| *s as f64).sum::<f64>() / runs.max(1) as f64;
    let success_rate =
        per_run.iter().filter(|(_, _, ok)| *ok).count() as f64 / runs.max(1) as f64;
    Ok(AblationStats { mode, runs, mean_completion_steps, success_rate, per_run })
}
