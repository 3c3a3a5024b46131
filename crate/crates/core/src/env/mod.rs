//! Masked sequential-decision environment for multi-debris rendezvous.
//!
//! The action space has `n_debris + 1` entries: one rendezvous per debris
//! object followed by a single refuel action at the last index.

mod files;

pub use files::{
    load_debris_file, load_scenario_file, parse_scenario_file, save_debris_file, DebrisRecord,
    ScenarioFile,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::astro::{
    self, coelliptic_rendezvous_plan, rendezvous_legs, sum_legs, wrap_deg_signed, Leg, LegKind,
    OrbitalElements, RendezvousModel, TransferPlan, EARTH_RADIUS, MAX_MISSION_ECC,
};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action index {index} out of range for {n_actions} actions")]
    ActionOutOfRange { index: usize, n_actions: usize },
    #[error("masked action {0}")]
    MaskedAction(Action),
    #[error("invalid mission config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Astro(#[from] astro::AstroError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed debris file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed scenario file: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, EnvError>;

/// Sampling bounds for a debris field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebrisDistribution {
    /// Altitude bounds, km.
    pub altitude: (f64, f64),
    /// Inclination bounds, deg.
    pub inclination: (f64, f64),
    /// Node longitudes are drawn from `raan_center ± raan_half_width`, deg.
    pub raan_center: f64,
    pub raan_half_width: f64,
}

impl Default for DebrisDistribution {
    fn default() -> Self {
        Self {
            altitude: (700.0, 800.0),
            inclination: (94.0, 98.0),
            raan_center: 0.0,
            raan_half_width: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    /// Δv budget restored by each refuel, km/s.
    pub dv_max: f64,
    /// Total mission duration, s.
    pub mission_duration: f64,
    pub n_debris: usize,
    pub station_orbit: OrbitalElements,
    pub chaser_start: OrbitalElements,
    /// Docked time spent refueling, s.
    pub refuel_service_time: f64,
    pub reward_rendezvous: f64,
    /// Signed reward of a refuel trip (negative).
    pub penalty_refuel: f64,
    pub debris_distribution: DebrisDistribution,
    pub rendezvous: RendezvousModel,
}

impl MissionConfig {
    /// 3 km/s, 7 days, 50 debris.
    pub fn nominal() -> Self {
        let station = OrbitalElements::circular(700.0, 96.0, 0.0, 0.0)
            .expect("station orbit constants are valid");
        Self {
            dv_max: 3.0,
            mission_duration: 7.0 * SECONDS_PER_DAY,
            n_debris: 50,
            station_orbit: station,
            chaser_start: station,
            refuel_service_time: 2.0 * 3600.0,
            reward_rendezvous: 1.0,
            penalty_refuel: -0.5,
            debris_distribution: DebrisDistribution::default(),
            rendezvous: RendezvousModel::default(),
        }
    }

    pub fn reduced_fuel() -> Self {
        Self {
            dv_max: 1.0,
            ..Self::nominal()
        }
    }

    pub fn reduced_time() -> Self {
        Self {
            mission_duration: 3.0 * SECONDS_PER_DAY,
            ..Self::nominal()
        }
    }

    pub fn with_budget(mut self, dv_max: f64, mission_days: f64) -> Self {
        self.dv_max = dv_max;
        self.mission_duration = mission_days * SECONDS_PER_DAY;
        self
    }

    pub fn with_debris(mut self, n_debris: usize) -> Self {
        self.n_debris = n_debris;
        self
    }

    pub fn mission_days(&self) -> f64 {
        self.mission_duration / SECONDS_PER_DAY
    }

    pub fn n_actions(&self) -> usize {
        self.n_debris + 1
    }

    pub fn observation_len(&self) -> usize {
        observation_len(self.n_debris)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dv_max > 0.0 && self.dv_max.is_finite()) {
            return Err(EnvError::InvalidConfig(format!(
                "dv_max must be positive, got {}",
                self.dv_max
            )));
        }
        if !(self.mission_duration > 0.0 && self.mission_duration.is_finite()) {
            return Err(EnvError::InvalidConfig(format!(
                "mission_duration must be positive, got {}",
                self.mission_duration
            )));
        }
        if self.n_debris == 0 {
            return Err(EnvError::InvalidConfig("n_debris must be at least 1".into()));
        }
        if !(self.refuel_service_time >= 0.0) {
            return Err(EnvError::InvalidConfig(
                "refuel_service_time must be non-negative".into(),
            ));
        }
        self.station_orbit.validate()?;
        self.chaser_start.validate()?;
        Ok(())
    }
}

/// Uniform draw of the Δv budget from [1, 3.5] km/s and duration from
/// [1, 7] days on top of `base`.
pub fn randomize_mission_config_from<R: Rng + ?Sized>(base: &MissionConfig, rng: &mut R) -> MissionConfig {
    let dv_max = rng.gen_range(DR_DV_RANGE.0..=DR_DV_RANGE.1);
    let days = rng.gen_range(DR_DAYS_RANGE.0..=DR_DAYS_RANGE.1);
    base.clone().with_budget(dv_max, days)
}

/// Domain-randomized variant of the nominal preset.
pub fn randomize_mission_config<R: Rng + ?Sized>(rng: &mut R) -> MissionConfig {
    randomize_mission_config_from(&MissionConfig::nominal(), rng)
}

/// Δv budget range used for domain randomization, km/s.
pub const DR_DV_RANGE: (f64, f64) = (1.0, 3.5);
/// Mission duration range used for domain randomization, days.
pub const DR_DAYS_RANGE: (f64, f64) = (1.0, 7.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Debris {
    pub id: usize,
    pub elements: OrbitalElements,
    pub visited: bool,
}

pub fn generate_debris_field(seed: u64, n: usize) -> Vec<Debris> {
    generate_debris_field_with(seed, n, &DebrisDistribution::default())
}

/// Seeded uniform sampling of `n` near-circular debris orbits.
pub fn generate_debris_field_with(seed: u64, n: usize, dist: &DebrisDistribution) -> Vec<Debris> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|id| {
            let alt = rng.gen_range(dist.altitude.0..=dist.altitude.1);
            let inc = rng.gen_range(dist.inclination.0..=dist.inclination.1);
            let ecc = rng.gen_range(0.0..MAX_MISSION_ECC);
            let raan = if dist.raan_half_width >= 180.0 {
                rng.gen_range(0.0..360.0)
            } else {
                dist.raan_center + rng.gen_range(-dist.raan_half_width..=dist.raan_half_width)
            };
            let argp = rng.gen_range(0.0..360.0);
            let anomaly = rng.gen_range(0.0..360.0);
            let elements =
                OrbitalElements::new(EARTH_RADIUS + alt, ecc, inc, raan, argp, anomaly, 0.0)
                    .expect("sampled elements satisfy the debris bounds");
            Debris {
                id,
                elements,
                visited: false,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Rendezvous(usize),
    Refuel,
}

impl Action {
    pub fn index(self, n_debris: usize) -> usize {
        match self {
            Action::Rendezvous(k) => k,
            Action::Refuel => n_debris,
        }
    }

    pub fn from_index(index: usize, n_debris: usize) -> Result<Self> {
        match index.cmp(&n_debris) {
            std::cmp::Ordering::Less => Ok(Action::Rendezvous(index)),
            std::cmp::Ordering::Equal => Ok(Action::Refuel),
            std::cmp::Ordering::Greater => Err(EnvError::ActionOutOfRange {
                index,
                n_actions: n_debris + 1,
            }),
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::Rendezvous(k) => f.pad(&format!("rendezvous({k})")),
            Action::Refuel => f.pad("refuel"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    None,
    AllVisited,
    FuelExhausted,
    TimeExhausted,
    NoFeasibleAction,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::None => "none",
            TerminationReason::AllVisited => "all_visited",
            TerminationReason::FuelExhausted => "fuel_exhausted",
            TerminationReason::TimeExhausted => "time_exhausted",
            TerminationReason::NoFeasibleAction => "no_feasible_action",
        }
    }
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Full MDP state. Cloning is the only way to branch a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionState {
    /// Chaser orbit; its epoch always equals `elapsed_time`.
    pub chaser: OrbitalElements,
    pub remaining_dv: f64,
    pub elapsed_time: f64,
    pub debris: Vec<Debris>,
    pub visited_count: usize,
    pub refuel_count: usize,
    pub at_station: bool,
    pub config: MissionConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: MissionState,
    pub reward: f64,
    pub terminated: bool,
    pub reason: TerminationReason,
    pub dv_spent: f64,
    pub time_spent: f64,
}

/// Outcome of applying an action in place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub terminated: bool,
    pub reason: TerminationReason,
    pub dv_spent: f64,
    pub time_spent: f64,
}

/// Fresh episode from `config` with a debris field drawn from `seed`.
pub fn reset(config: &MissionConfig, seed: u64) -> MissionState {
    let debris = generate_debris_field_with(seed, config.n_debris, &config.debris_distribution);
    reset_with_debris(config, debris)
}

/// Fresh episode over an explicit debris field; `config.n_debris` is
/// overwritten by the field size.
pub fn reset_with_debris(config: &MissionConfig, mut debris: Vec<Debris>) -> MissionState {
    let mut config = config.clone();
    config.n_debris = debris.len();
    for (i, d) in debris.iter_mut().enumerate() {
        d.id = i;
        d.visited = false;
    }
    MissionState {
        chaser: config.chaser_start.propagated(0.0),
        remaining_dv: config.dv_max,
        elapsed_time: 0.0,
        debris,
        visited_count: 0,
        refuel_count: 0,
        at_station: true,
        config,
    }
}

// Remaining budgets below this are treated as empty.
const FUEL_EPS: f64 = 1e-12;

impl MissionState {
    pub fn n_debris(&self) -> usize {
        self.debris.len()
    }

    pub fn n_actions(&self) -> usize {
        self.debris.len() + 1
    }

    pub fn remaining_time(&self) -> f64 {
        (self.config.mission_duration - self.elapsed_time).max(0.0)
    }

    fn check_index(&self, action: Action) -> Result<()> {
        if let Action::Rendezvous(index) = action {
            if index >= self.n_debris() {
                return Err(EnvError::ActionOutOfRange {
                    index,
                    n_actions: self.n_actions(),
                });
            }
        }
        Ok(())
    }

    fn cost_legs(&self, action: Action) -> [Leg; 6] {
        let model = &self.config.rendezvous;
        match action {
            Action::Rendezvous(k) => rendezvous_legs(&self.chaser, &self.debris[k].elements, model),
            Action::Refuel => rendezvous_legs(&self.chaser, &self.config.station_orbit, model),
        }
    }

    /// Total (dv, time) of an action without materializing its plan.
    fn cost_totals(&self, action: Action) -> (f64, f64) {
        let (dv, t) = sum_legs(&self.cost_legs(action));
        match action {
            Action::Rendezvous(_) => (dv, t),
            Action::Refuel => (dv, t + self.config.refuel_service_time),
        }
    }

    fn affordable(&self, dv: f64, time: f64) -> bool {
        dv <= self.remaining_dv && self.elapsed_time + time <= self.config.mission_duration
    }

    fn refuel_allowed(&self) -> bool {
        self.visited_count >= 1 && !(self.at_station && self.remaining_dv >= self.config.dv_max)
    }

    /// Feasibility of a single action under the masking rule.
    pub fn is_valid(&self, action: Action) -> bool {
        if self.check_index(action).is_err() {
            return false;
        }
        let gate = match action {
            Action::Rendezvous(k) => !self.debris[k].visited,
            Action::Refuel => self.refuel_allowed(),
        };
        if !gate {
            return false;
        }
        let (dv, t) = self.cost_totals(action);
        self.affordable(dv, t)
    }

    /// Writes the mask into `out` (length `n_actions`); returns the number of
    /// feasible actions.
    pub fn fill_mask(&self, out: &mut Vec<bool>) -> usize {
        out.clear();
        let n = self.n_debris();
        let mut count = 0;
        for k in 0..=n {
            let action = if k == n {
                Action::Refuel
            } else {
                Action::Rendezvous(k)
            };
            let ok = self.is_valid(action);
            count += ok as usize;
            out.push(ok);
        }
        count
    }

    /// Applies a feasible action in place. Masked actions are rejected and
    /// leave the state untouched.
    pub fn apply(&mut self, action: Action) -> Result<Transition> {
        self.check_index(action)?;
        if !self.is_valid(action) {
            return Err(EnvError::MaskedAction(action));
        }
        let (dv, dt) = self.cost_totals(action);
        self.remaining_dv = (self.remaining_dv - dv).max(0.0);
        self.elapsed_time += dt;
        let reward = match action {
            Action::Rendezvous(k) => {
                let d = &mut self.debris[k];
                d.visited = true;
                self.visited_count += 1;
                self.chaser = d.elements.propagated(self.elapsed_time);
                self.at_station = false;
                self.config.reward_rendezvous
            }
            Action::Refuel => {
                self.chaser = self.config.station_orbit.propagated(self.elapsed_time);
                self.remaining_dv = self.config.dv_max;
                self.refuel_count += 1;
                self.at_station = true;
                self.config.penalty_refuel
            }
        };
        let (terminated, reason) = is_terminal(self);
        Ok(Transition {
            reward,
            terminated,
            reason,
            dv_spent: dv,
            time_spent: dt,
        })
    }
}

/// Itemized plan of an action from the current state. Refuel plans carry an
/// extra docked service leg.
pub fn action_cost(state: &MissionState, action: Action) -> Result<TransferPlan> {
    state.check_index(action)?;
    let model = &state.config.rendezvous;
    Ok(match action {
        Action::Rendezvous(k) => {
            coelliptic_rendezvous_plan(&state.chaser, &state.debris[k].elements, model)
        }
        Action::Refuel => {
            let mut plan = coelliptic_rendezvous_plan(&state.chaser, &state.config.station_orbit, model);
            plan.push(Leg {
                label: LegKind::RefuelService,
                dv: 0.0,
                duration: state.config.refuel_service_time,
            });
            plan
        }
    })
}

pub fn valid_action_mask(state: &MissionState) -> Vec<bool> {
    let mut mask = Vec::with_capacity(state.n_actions());
    state.fill_mask(&mut mask);
    mask
}

/// Pure transition: returns the successor state, leaving `state` untouched.
pub fn step(state: &MissionState, action: Action) -> Result<StepResult> {
    let mut next = state.clone();
    let t = next.apply(action)?;
    Ok(StepResult {
        state: next,
        reward: t.reward,
        terminated: t.terminated,
        reason: t.reason,
        dv_spent: t.dv_spent,
        time_spent: t.time_spent,
    })
}

/// Termination check; reasons are tested in the order all-visited, time,
/// fuel, no feasible action.
pub fn is_terminal(state: &MissionState) -> (bool, TerminationReason) {
    if state.visited_count >= state.n_debris() {
        return (true, TerminationReason::AllVisited);
    }
    if state.elapsed_time >= state.config.mission_duration {
        return (true, TerminationReason::TimeExhausted);
    }
    if state.remaining_dv <= FUEL_EPS {
        return (true, TerminationReason::FuelExhausted);
    }
    let n = state.n_debris();
    let any = (0..n)
        .map(Action::Rendezvous)
        .chain(std::iter::once(Action::Refuel))
        .any(|a| state.is_valid(a));
    if any {
        (false, TerminationReason::None)
    } else {
        (true, TerminationReason::NoFeasibleAction)
    }
}

pub fn clone_state(state: &MissionState) -> MissionState {
    state.clone()
}

pub const CHASER_FEATURES: usize = 9;
pub const DEBRIS_FEATURES: usize = 5;

pub fn observation_len(n_debris: usize) -> usize {
    CHASER_FEATURES + DEBRIS_FEATURES * n_debris
}

/// Fixed-length encoding of the state.
///
/// Layout: chaser (altitude offset, ecc, inc offset, raan, argp, anomaly),
/// remaining Δv as a fraction of `dv_max`, remaining time as a fraction of the
/// mission duration, docked flag, then per debris (Δsma/100 km, Δinc/4°,
/// ΔRAAN/360°, forward phase gap/360°, visited).
pub fn observe(state: &MissionState) -> Vec<f64> {
    let mut obs = Vec::with_capacity(observation_len(state.n_debris()));
    observe_into(state, &mut obs);
    obs
}

pub fn observe_into(state: &MissionState, obs: &mut Vec<f64>) {
    obs.clear();
    let c = &state.chaser;
    let cfg = &state.config;
    obs.extend_from_slice(&[
        (c.altitude() - 750.0) / 50.0,
        c.ecc / MAX_MISSION_ECC,
        (c.inc - 96.0) / 2.0,
        c.raan / 360.0,
        c.argp / 360.0,
        c.anomaly / 360.0,
        state.remaining_dv / cfg.dv_max,
        state.remaining_time() / cfg.mission_duration,
        if state.at_station { 1.0 } else { 0.0 },
    ]);
    let t = state.elapsed_time;
    let u_c = c.arg_latitude_at(t);
    for d in &state.debris {
        let e = &d.elements;
        let gap = astro::wrap_deg(e.arg_latitude_at(t) - u_c);
        obs.extend_from_slice(&[
            (e.sma - c.sma) / 100.0,
            (e.inc - c.inc) / 4.0,
            wrap_deg_signed(e.raan - c.raan) / 360.0,
            gap / 360.0,
            if d.visited { 1.0 } else { 0.0 },
        ]);
    }
}
