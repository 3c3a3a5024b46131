//! Seeded scenario batteries, summary statistics and timing reports.

mod export;

pub use export::{
    histograms, parse_results_csv, results_to_csv, summary_table, timing_table, write_results,
    Histogram, ResultsBundle, RESULTS_CSV_HEADER,
};

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{self, observe_into, Action, EnvError, MissionConfig, MissionState};
use crate::mcts::{self, MctsConfig, MctsError};
use crate::policy::{self, PolicyError, PolicyParams};
use crate::split_seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Mcts(#[from] MctsError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("no results to aggregate")]
    Empty,
    #[error("n_cases must be at least 1")]
    NoCases,
    #[error("policy {label} expects {expected} observation entries, scenario produces {found}")]
    ObservationMismatch {
        label: String,
        expected: usize,
        found: usize,
    },
    #[error("could not build worker pool: {0}")]
    Pool(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Seed offset between scenarios so their debris fields never overlap.
pub const SCENARIO_SEED_STRIDE: u64 = 1_000_000;

// Stream of the case seed that drives planner randomness.
const PLANNER_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Nominal,
    TimeLimited,
    DvLimited,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::Nominal,
        ScenarioKind::TimeLimited,
        ScenarioKind::DvLimited,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Nominal => "nominal",
            ScenarioKind::TimeLimited => "time_limited",
            ScenarioKind::DvLimited => "dv_limited",
        }
    }

    fn ordinal(self) -> u64 {
        match self {
            ScenarioKind::Nominal => 0,
            ScenarioKind::TimeLimited => 1,
            ScenarioKind::DvLimited => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// km/s
    pub dv_max: f64,
    /// days
    pub mission_days: f64,
    pub n_cases: usize,
    pub n_debris: usize,
}

impl Scenario {
    pub fn preset(kind: ScenarioKind, n_cases: usize) -> Self {
        let (dv_max, mission_days) = match kind {
            ScenarioKind::Nominal => (3.0, 7.0),
            ScenarioKind::TimeLimited => (3.0, 3.0),
            ScenarioKind::DvLimited => (1.0, 7.0),
        };
        Self {
            kind,
            dv_max,
            mission_days,
            n_cases,
            n_debris: 50,
        }
    }

    pub fn all(n_cases: usize) -> Vec<Self> {
        ScenarioKind::ALL
            .iter()
            .map(|&k| Self::preset(k, n_cases))
            .collect()
    }

    pub fn with_debris(mut self, n_debris: usize) -> Self {
        self.n_debris = n_debris;
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.as_str()
    }

    pub fn mission_config(&self) -> MissionConfig {
        MissionConfig::nominal()
            .with_budget(self.dv_max, self.mission_days)
            .with_debris(self.n_debris)
    }

    /// First case seed for this scenario when a run starts from `base_seed`.
    pub fn seed_base(&self, base_seed: u64) -> u64 {
        base_seed.wrapping_add(self.kind.ordinal() * SCENARIO_SEED_STRIDE)
    }
}

#[derive(Debug, Clone)]
pub struct PpoPlanner {
    pub label: String,
    pub params: Arc<PolicyParams>,
    /// Argmax instead of sampling.
    pub deterministic: bool,
}

#[derive(Debug, Clone)]
pub enum Planner {
    Random,
    Mcts(MctsConfig),
    Ppo(PpoPlanner),
}

impl Planner {
    pub fn ppo(label: impl Into<String>, params: PolicyParams) -> Self {
        Planner::Ppo(PpoPlanner {
            label: label.into(),
            params: Arc::new(params),
            deterministic: true,
        })
    }

    pub fn name(&self) -> &str {
        match self {
            Planner::Random => "random",
            Planner::Mcts(_) => "mcts",
            Planner::Ppo(p) => &p.label,
        }
    }

    /// Verifies that a policy network fits `config`'s observation layout.
    pub fn check_compatible(&self, config: &MissionConfig) -> Result<()> {
        if let Planner::Ppo(p) = self {
            let found = config.observation_len();
            if p.params.obs_len() != found || p.params.n_actions() != config.n_actions() {
                return Err(EvalError::ObservationMismatch {
                    label: p.label.clone(),
                    expected: p.params.obs_len(),
                    found,
                });
            }
        }
        Ok(())
    }

    /// Picks the next action for `state`.
    pub fn decide(&self, state: &MissionState, rng: &mut ChaCha8Rng) -> Result<Action> {
        choose(self, state, rng, &mut Scratch::default())
    }
}

/// Planner randomness for the episode on debris field `seed`.
pub fn planner_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(seed, PLANNER_STREAM))
}

/// Reusable per-episode buffers for the planners.
#[derive(Default)]
struct Scratch {
    obs: Vec<f64>,
    mask: Vec<bool>,
}

fn choose(
    planner: &Planner,
    state: &MissionState,
    rng: &mut ChaCha8Rng,
    scratch: &mut Scratch,
) -> Result<Action> {
    let n = state.n_debris();
    match planner {
        Planner::Random => {
            state.fill_mask(&mut scratch.mask);
            let valid: Vec<usize> = (0..scratch.mask.len()).filter(|&i| scratch.mask[i]).collect();
            let &i = valid.choose(rng).ok_or(MctsError::NoFeasibleAction)?;
            Ok(Action::from_index(i, n)?)
        }
        Planner::Mcts(cfg) => {
            let cfg = MctsConfig {
                seed: rng.gen(),
                ..*cfg
            };
            Ok(mcts::plan(state, &cfg)?)
        }
        Planner::Ppo(p) => {
            observe_into(state, &mut scratch.obs);
            state.fill_mask(&mut scratch.mask);
            let i = policy::act(&p.params, &scratch.obs, &scratch.mask, p.deterministic, rng)?;
            Ok(Action::from_index(i, n)?)
        }
    }
}

/// One row of results; field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub scenario: String,
    pub planner: String,
    pub seed: u64,
    pub debris_visited: usize,
    pub refuels: usize,
    pub dv_used_kms: f64,
    pub episode_return: f64,
    pub wall_time_s: f64,
    pub mean_decision_latency_s: f64,
}

/// Plays one episode of `scenario` on the debris field of `seed`.
pub fn run_case(planner: &Planner, scenario: &Scenario, seed: u64) -> Result<CaseResult> {
    let config = scenario.mission_config();
    planner.check_compatible(&config)?;
    let started = Instant::now();
    let mut state = env::reset(&config, seed);
    let mut rng = planner_rng(seed);
    let mut scratch = Scratch::default();
    let (mut dv_used, mut ret, mut latency, mut decisions) = (0.0, 0.0, 0.0, 0usize);
    while !env::is_terminal(&state).0 {
        let t0 = Instant::now();
        let action = choose(planner, &state, &mut rng, &mut scratch)?;
        latency += t0.elapsed().as_secs_f64();
        decisions += 1;
        let t = state.apply(action)?;
        dv_used += t.dv_spent;
        ret += t.reward;
    }
    Ok(CaseResult {
        scenario: scenario.name().to_string(),
        planner: planner.name().to_string(),
        seed,
        debris_visited: state.visited_count,
        refuels: state.refuel_count,
        dv_used_kms: dv_used,
        episode_return: ret,
        wall_time_s: started.elapsed().as_secs_f64(),
        mean_decision_latency_s: if decisions == 0 {
            0.0
        } else {
            latency / decisions as f64
        },
    })
}

/// Runs cases `first_seed .. first_seed + n_cases` on up to `jobs` workers.
/// Results are ordered by seed whatever the parallelism.
pub fn run_scenario(
    planner: &Planner,
    scenario: &Scenario,
    first_seed: u64,
    jobs: usize,
) -> Result<Vec<CaseResult>> {
    if scenario.n_cases == 0 {
        return Err(EvalError::NoCases);
    }
    let seeds: Vec<u64> = (0..scenario.n_cases as u64)
        .map(|i| first_seed.wrapping_add(i))
        .collect();
    if jobs <= 1 {
        return seeds.iter().map(|&s| run_case(planner, scenario, s)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| run_case(planner, scenario, s))
            .collect()
    })
}

/// Every (planner, scenario) pair, scenario seeds offset per
/// [`Scenario::seed_base`].
pub fn run_battery(
    planners: &[Planner],
    scenarios: &[Scenario],
    base_seed: u64,
    jobs: usize,
) -> Result<Vec<CaseResult>> {
    let mut out = Vec::new();
    for scenario in scenarios {
        for planner in planners {
            out.extend(run_scenario(planner, scenario, scenario.seed_base(base_seed), jobs)?);
        }
    }
    Ok(out)
}

/// Debris-visited statistics of one (scenario, planner) group. `std` is the
/// population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub planner: String,
    pub n_cases: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl SummaryRow {
    /// `"29.1 ± 1.1"`
    pub fn mean_pm_std(&self) -> String {
        format!("{:.1} ± {:.1}", self.mean, self.std)
    }
}

fn stats(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (min, max, mean, var.sqrt())
}

/// Groups keyed by (scenario, planner) in order of first appearance.
fn groups(results: &[CaseResult]) -> Vec<((String, String), Vec<&CaseResult>)> {
    let mut out: Vec<((String, String), Vec<&CaseResult>)> = Vec::new();
    for r in results {
        let key = (r.scenario.clone(), r.planner.clone());
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => out.push((key, vec![r])),
        }
    }
    out
}

/// One summary row per (scenario, planner) present in `results`.
pub fn summarize(results: &[CaseResult]) -> Result<Vec<SummaryRow>> {
    if results.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(groups(results)
        .into_iter()
        .map(|((scenario, planner), rows)| {
            // Sorting makes the floating-point sums order independent.
            let mut visits: Vec<f64> = rows.iter().map(|r| r.debris_visited as f64).collect();
            visits.sort_by(f64::total_cmp);
            let (min, max, mean, std) = stats(&visits);
            SummaryRow {
                scenario,
                planner,
                n_cases: rows.len(),
                min,
                max,
                mean,
                std,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub scenario: String,
    pub planner: String,
    pub n_cases: usize,
    pub mean_wall_time_s: f64,
    pub max_wall_time_s: f64,
    pub mean_decision_latency_s: f64,
    pub max_decision_latency_s: f64,
}

pub fn timing_report(results: &[CaseResult]) -> Result<Vec<TimingRow>> {
    if results.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(groups(results)
        .into_iter()
        .map(|((scenario, planner), rows)| {
            let wall: Vec<f64> = rows.iter().map(|r| r.wall_time_s).collect();
            let lat: Vec<f64> = rows.iter().map(|r| r.mean_decision_latency_s).collect();
            let (_, wmax, wmean, _) = stats(&wall);
            let (_, lmax, lmean, _) = stats(&lat);
            TimingRow {
                scenario,
                planner,
                n_cases: rows.len(),
                mean_wall_time_s: wmean,
                max_wall_time_s: wmax,
                mean_decision_latency_s: lmean,
                max_decision_latency_s: lmax,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests;
