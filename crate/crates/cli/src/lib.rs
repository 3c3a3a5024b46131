//! `adr` command-line front end: debris generation, training, evaluation and
//! single-episode planning.
//!
//! Seeds: every command takes one `--seed`. Debris fields use it directly
//! (evaluation case `i` of scenario `k` uses `seed + k * 1_000_000 + i`);
//! planner randomness for a case draws from `split_seed(case_seed, 1)`;
//! training uses `seed` for network initialization, episode sampling and
//! minibatch shuffling from a single stream.

pub mod config;
pub mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use adr_core::env::{
    self, action_cost, load_debris_file, save_debris_file, MissionConfig, DR_DAYS_RANGE,
    DR_DV_RANGE,
};
use adr_core::eval::{self, Planner, Scenario, ScenarioKind};
use adr_core::mcts::MctsConfig;
use adr_core::policy::{self, PpoConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "adr", version, about = "Multi-debris rendezvous mission planning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainMode {
    Nominal,
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 64-wide network, 100k steps, lr 3e-4
    Desk,
    /// 256-wide network, 1M (nominal) or 5.5M (randomized) steps, lr 3e-5
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Nominal,
    Time,
    Dv,
    All,
}

impl ScenarioArg {
    fn kinds(self) -> Vec<ScenarioKind> {
        match self {
            ScenarioArg::Nominal => vec![ScenarioKind::Nominal],
            ScenarioArg::Time => vec![ScenarioKind::TimeLimited],
            ScenarioArg::Dv => vec![ScenarioKind::DvLimited],
            ScenarioArg::All => ScenarioKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded debris field as JSON.
    GenDebris {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a masked PPO policy; writes policy.json, train_log.csv and
    /// manifest.json into --out.
    Train {
        #[arg(long, value_enum, default_value = "nominal")]
        mode: TrainMode,
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        debris: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run planners over the scenario battery.
    Evaluate {
        /// random | mcts | ppo:<checkpoint>; repeatable
        #[arg(long, required = true)]
        planner: Vec<String>,
        #[arg(long, value_enum, default_value = "all")]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        debris: Option<usize>,
        /// Parallel cases; 1 keeps timing columns comparable.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        sims: Option<usize>,
        #[arg(long)]
        c_uct: Option<f64>,
        #[arg(long)]
        rollout_depth: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print a step-by-step trace of one planned episode.
    Plan {
        /// Debris-field JSON; otherwise the field is drawn from --seed.
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "mcts")]
        planner: String,
        #[arg(long, value_enum, default_value = "nominal")]
        scenario: ScenarioArg,
        #[arg(long)]
        debris: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        sims: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write trace.txt and manifest.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command; output
/// that would go to stdout is returned.
pub fn run_from<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&args).map_err(|e| anyhow::anyhow!("{}", e.to_string().trim()))?;
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    run(cli, &argv)
}

pub fn run(cli: Cli, argv: &[String]) -> Result<String> {
    match cli.command {
        Command::GenDebris { seed, n, out } => gen_debris(seed, n, &out, argv),
        Command::Train {
            mode,
            preset,
            steps,
            seed,
            debris,
            config,
            out,
        } => train(mode, preset, steps, seed, debris, config.as_deref(), &out, argv),
        Command::Evaluate {
            planner,
            scenario,
            cases,
            seed,
            debris,
            jobs,
            sims,
            c_uct,
            rollout_depth,
            config,
            out_dir,
        } => {
            let (file, file_path) = RunConfig::resolve(config.as_deref())?;
            let mut mcts = file.mcts(MctsConfig::default());
            overlay_mcts(&mut mcts, sims, c_uct, rollout_depth);
            let seed = seed.or(file.scenario.seed).unwrap_or(0);
            let debris = debris.or(file.scenario.n_debris);
            evaluate(EvaluateArgs {
                planners: &planner,
                scenario,
                cases,
                seed,
                debris,
                jobs,
                mcts,
                file_path,
                out_dir: &out_dir,
                argv,
            })
        }
        Command::Plan {
            state,
            seed,
            planner,
            scenario,
            debris,
            horizon,
            sims,
            config,
            out_dir,
        } => {
            let (file, file_path) = RunConfig::resolve(config.as_deref())?;
            let mut mcts = file.mcts(MctsConfig::default());
            overlay_mcts(&mut mcts, sims, None, None);
            let seed = seed.or(file.scenario.seed).unwrap_or(0);
            let kind = match scenario {
                ScenarioArg::All => bail!("plan takes a single scenario"),
                s => s.kinds()[0],
            };
            let base = Scenario::preset(kind, 1).mission_config();
            let mut mission = file.mission(&base)?;
            if let Some(n) = debris {
                mission.n_debris = n;
            }
            mission.validate()?;
            plan(PlanArgs {
                state: state.as_deref(),
                seed,
                planner: &planner,
                mission,
                horizon,
                mcts,
                file_path,
                out_dir: out_dir.as_deref(),
                argv,
            })
        }
    }
}

fn overlay_mcts(cfg: &mut MctsConfig, sims: Option<usize>, c: Option<f64>, depth: Option<usize>) {
    if let Some(v) = sims {
        cfg.simulations_per_step = v;
    }
    if let Some(v) = c {
        cfg.c_uct = v;
    }
    if let Some(v) = depth {
        cfg.rollout_depth = v;
    }
}

fn gen_debris(seed: u64, n: usize, out: &Path, argv: &[String]) -> Result<String> {
    let m = RunManifest::start("gen-debris", argv, seed);
    let field = env::generate_debris_field(seed, n);
    save_debris_file(out, &field)?;
    let mut manifest_path = out.as_os_str().to_owned();
    manifest_path.push(".manifest.json");
    let mut m = m;
    m.config = serde_json::json!({ "n": n, "distribution": env::DebrisDistribution::default() });
    m.finish(Path::new(&manifest_path), &[out.to_path_buf()])?;
    Ok(format!("wrote {n} debris to {}\n", out.display()))
}

#[allow(clippy::too_many_arguments)]
fn train(
    mode: TrainMode,
    preset: Preset,
    steps: Option<usize>,
    seed: Option<u64>,
    debris: Option<usize>,
    config: Option<&Path>,
    out: &Path,
    argv: &[String],
) -> Result<String> {
    let (file, file_path) = RunConfig::resolve(config)?;
    let randomized = mode == TrainMode::Randomized;
    let preset_cfg = match (preset, randomized) {
        (Preset::Desk, _) => PpoConfig::desk(),
        (Preset::Paper, false) => PpoConfig::paper_nominal(),
        (Preset::Paper, true) => PpoConfig::paper_randomized(),
    };
    let mut ppo = file.ppo(preset_cfg);
    ppo.domain_randomized = randomized;
    ppo.seed = seed.or(file.scenario.seed).unwrap_or(0);
    if let Some(s) = steps {
        ppo.total_timesteps = s;
    }
    ppo.validate()?;
    let mut mission = file.mission(&MissionConfig::nominal())?;
    if let Some(n) = debris {
        mission.n_debris = n;
    }
    mission.validate()?;

    let mut m = RunManifest::start("train", argv, ppo.seed);
    m.config_file = file_path.map(|p| p.display().to_string());
    m.config = serde_json::json!({
        "mode": if randomized { "randomized" } else { "nominal" },
        "ppo": ppo,
        "mission": mission,
        "randomization": if randomized {
            serde_json::json!({ "dv_max_kms": [DR_DV_RANGE.0, DR_DV_RANGE.1],
                                "mission_days": [DR_DAYS_RANGE.0, DR_DAYS_RANGE.1] })
        } else {
            serde_json::Value::Null
        },
    });

    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let (params, report) = policy::train(&mission, &ppo)?;
    let ckpt = out.join("policy.json");
    let log = out.join("train_log.csv");
    policy::save_checkpoint(&ckpt, &params, &ppo)?;
    fs::write(&log, report.to_csv()).with_context(|| format!("cannot write {}", log.display()))?;
    m.finish(&out.join("manifest.json"), &[ckpt.clone(), log])?;
    let last = report.rows.last();
    Ok(format!(
        "trained {} steps ({} updates); last mean return {}; checkpoint {}\n",
        ppo.total_timesteps,
        report.rows.len(),
        last.map_or("n/a".into(), |r| format!("{:.3}", r.mean_return)),
        ckpt.display()
    ))
}

/// Planner token: `random`, `mcts` or `ppo:<checkpoint path>`.
pub fn parse_planner(token: &str, mcts: MctsConfig) -> Result<(Planner, Option<usize>)> {
    match token {
        "random" => Ok((Planner::Random, None)),
        "mcts" => {
            mcts.validate()?;
            Ok((Planner::Mcts(mcts), None))
        }
        _ => {
            let Some(path) = token.strip_prefix("ppo:") else {
                bail!("unknown planner `{token}` (expected random, mcts or ppo:<checkpoint>)");
            };
            let (params, cfg) = policy::load_checkpoint(Path::new(path), None)
                .with_context(|| format!("cannot load checkpoint {path}"))?;
            let label = if cfg.domain_randomized {
                "ppo_randomized"
            } else {
                "ppo_nominal"
            };
            let n_debris = params.n_actions() - 1;
            Ok((Planner::ppo(label, params), Some(n_debris)))
        }
    }
}

struct EvaluateArgs<'a> {
    planners: &'a [String],
    scenario: ScenarioArg,
    cases: usize,
    seed: u64,
    debris: Option<usize>,
    jobs: usize,
    mcts: MctsConfig,
    file_path: Option<PathBuf>,
    out_dir: &'a Path,
    argv: &'a [String],
}

fn evaluate(a: EvaluateArgs) -> Result<String> {
    if a.cases == 0 {
        bail!("--cases must be at least 1");
    }
    let mut planners: Vec<Planner> = Vec::new();
    let mut inferred = None;
    for token in a.planners {
        let (p, n) = parse_planner(token, a.mcts)?;
        inferred = inferred.or(n);
        if planners.iter().any(|q| q.name() == p.name()) {
            bail!("planner `{}` given twice", p.name());
        }
        planners.push(p);
    }
    let n_debris = a.debris.or(inferred).unwrap_or(50);
    let scenarios: Vec<Scenario> = a
        .scenario
        .kinds()
        .into_iter()
        .map(|k| Scenario::preset(k, a.cases).with_debris(n_debris))
        .collect();
    for p in &planners {
        p.check_compatible(&scenarios[0].mission_config())?;
    }

    let mut m = RunManifest::start("evaluate", a.argv, a.seed);
    m.config_file = a.file_path.map(|p| p.display().to_string());
    m.config = serde_json::json!({
        "planners": a.planners,
        "scenarios": scenarios,
        "mcts": a.mcts,
        "jobs": a.jobs,
    });
    let results = eval::run_battery(&planners, &scenarios, a.seed, a.jobs)?;
    let mut outputs = eval::write_results(a.out_dir, &results)?;
    let manifest = a.out_dir.join("manifest.json");
    outputs.push(manifest.clone());
    m.finish(&manifest, &outputs[..outputs.len() - 1])?;
    let summaries = eval::summarize(&results)?;
    Ok(eval::summary_table(&summaries))
}

struct PlanArgs<'a> {
    state: Option<&'a Path>,
    seed: u64,
    planner: &'a str,
    mission: MissionConfig,
    horizon: Option<usize>,
    mcts: MctsConfig,
    file_path: Option<PathBuf>,
    out_dir: Option<&'a Path>,
    argv: &'a [String],
}

fn plan(a: PlanArgs) -> Result<String> {
    let mut m = RunManifest::start("plan", a.argv, a.seed);
    let (planner, _) = parse_planner(a.planner, a.mcts)?;
    let mut state = match a.state {
        Some(path) => env::reset_with_debris(&a.mission, load_debris_file(path)?),
        None => env::reset(&a.mission, a.seed),
    };
    planner.check_compatible(&state.config)?;
    let mut rng = eval::planner_rng(a.seed);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "planner {}  debris {}  dv_max {} km/s  duration {} d",
        planner.name(),
        state.n_debris(),
        state.config.dv_max,
        state.config.mission_days()
    );
    let (mut ret, mut cycle_dv, mut steps) = (0.0, 0.0, 0usize);
    loop {
        let (terminal, reason) = env::is_terminal(&state);
        if terminal {
            let _ = writeln!(out, "terminated: {reason}");
            break;
        }
        if a.horizon.is_some_and(|h| steps >= h) {
            let _ = writeln!(out, "horizon reached");
            break;
        }
        let action = planner.decide(&state, &mut rng)?;
        let plan = action_cost(&state, action)?;
        let t = state.apply(action)?;
        steps += 1;
        ret += t.reward;
        cycle_dv = if action == env::Action::Refuel {
            0.0
        } else {
            cycle_dv + t.dv_spent
        };
        let _ = writeln!(
            out,
            "step {steps:>3}  {action:<16} dv {:.4} km/s  time {:.2} h  return {ret:+.1}  cycle_dv {cycle_dv:.4}  remaining_dv {:.4}  elapsed {:.3} d",
            t.dv_spent,
            t.time_spent / 3600.0,
            state.remaining_dv,
            state.elapsed_time / env::SECONDS_PER_DAY
        );
        for leg in plan.legs() {
            let _ = writeln!(
                out,
                "        {:<15} dv {:.5} km/s  duration {:.1} s",
                leg.label.as_str(),
                leg.dv,
                leg.duration
            );
        }
    }
    if let Some(dir) = a.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let trace = dir.join("trace.txt");
        fs::write(&trace, &out).with_context(|| format!("cannot write {}", trace.display()))?;
        m.config_file = a.file_path.map(|p| p.display().to_string());
        m.config = serde_json::json!({ "mission": a.mission, "mcts": a.mcts, "planner": a.planner });
        m.finish(&dir.join("manifest.json"), &[trace])?;
    }
    Ok(out)
}
