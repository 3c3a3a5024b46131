use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Debris, EnvError, MissionConfig, Result, SECONDS_PER_DAY};
use crate::astro::OrbitalElements;

/// One entry of a debris-field JSON file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebrisRecord {
    pub id: usize,
    pub sma_km: f64,
    pub ecc: f64,
    pub inc_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    pub anomaly_deg: f64,
}

impl From<&Debris> for DebrisRecord {
    fn from(d: &Debris) -> Self {
        let e = &d.elements;
        Self {
            id: d.id,
            sma_km: e.sma,
            ecc: e.ecc,
            inc_deg: e.inc,
            raan_deg: e.raan,
            argp_deg: e.argp,
            anomaly_deg: e.anomaly,
        }
    }
}

impl DebrisRecord {
    pub fn to_debris(&self) -> Result<Debris> {
        let elements = OrbitalElements::new(
            self.sma_km,
            self.ecc,
            self.inc_deg,
            self.raan_deg,
            self.argp_deg,
            self.anomaly_deg,
            0.0,
        )?;
        Ok(Debris {
            id: self.id,
            elements,
            visited: false,
        })
    }
}

fn io_err(path: &Path, source: std::io::Error) -> EnvError {
    EnvError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn save_debris_file(path: &Path, debris: &[Debris]) -> Result<()> {
    let records: Vec<DebrisRecord> = debris.iter().map(DebrisRecord::from).collect();
    let mut text = serde_json::to_string_pretty(&records)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn load_debris_file(path: &Path) -> Result<Vec<Debris>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let records: Vec<DebrisRecord> = serde_json::from_str(&text)?;
    records.iter().map(DebrisRecord::to_debris).collect()
}

/// Scenario overrides as read from a `key = value` text file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dv_max_kms: Option<f64>,
    pub mission_days: Option<f64>,
    pub n_debris: Option<usize>,
    pub refuel_service_time_s: Option<f64>,
    pub seed: Option<u64>,
}

impl ScenarioFile {
    /// Applies every present key on top of `base`.
    pub fn apply(&self, base: &MissionConfig) -> Result<MissionConfig> {
        let mut cfg = base.clone();
        if let Some(v) = self.dv_max_kms {
            cfg.dv_max = v;
        }
        if let Some(v) = self.mission_days {
            cfg.mission_duration = v * SECONDS_PER_DAY;
        }
        if let Some(v) = self.n_debris {
            cfg.n_debris = v;
        }
        if let Some(v) = self.refuel_service_time_s {
            cfg.refuel_service_time = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(v) = self.dv_max_kms {
            out.push_str(&format!("dv_max_kms = {v:?}\n"));
        }
        if let Some(v) = self.mission_days {
            out.push_str(&format!("mission_days = {v:?}\n"));
        }
        if let Some(v) = self.n_debris {
            out.push_str(&format!("n_debris = {v}\n"));
        }
        if let Some(v) = self.refuel_service_time_s {
            out.push_str(&format!("refuel_service_time_s = {v:?}\n"));
        }
        if let Some(v) = self.seed {
            out.push_str(&format!("seed = {v}\n"));
        }
        out
    }
}

pub fn parse_scenario_file(text: &str) -> Result<ScenarioFile> {
    Ok(toml::from_str(text)?)
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_scenario_file(&text)
}
