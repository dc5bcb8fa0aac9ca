//! Scenario files.
//!
//! ```json
//! {
//!   "programs": [{"pid": "p1", "source": "p1.asm", "policy": "p1.policy.json"}],
//!   "schedule": [{"name": "A", "prop": "pc < 10", "period": 2, "category": "health"}],
//!   "interrupts": [{"tick": 5, "pid": "p1"}],
//!   "sampling_stride": 1,
//!   "run_limit": 1000,
//!   "manifest": "manifest.json",
//!   "mac_key": "keys.json",
//!   "monitor": {"interrupt_deadline": 64},
//!   "history": {"capacity": 65536, "checkpoint_interval": 1024}
//! }
//! ```
//!
//! Paths are relative to the scenario file. `manifest` and `mac_key` name
//! policy-format files supplying `golden_manifest`/`expected_pcr_hex` and
//! `mac_key_hex` respectively.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::history::HistoryConfig;
use crate::judgement::{JudgementSchedule, ScheduleEntrySpec};
use crate::monitor::MonitorConfig;
use crate::trust::{GoldenManifest, MacKey, Policy};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario invalid: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("keyed mode is configured but {0} holds no mac_key_hex")]
    KeyMissing(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

/// One program to launch, kept as raw bytes until it has been attested.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramEntry {
    pub pid: String,
    pub source: Vec<u8>,
    pub policy: Option<Vec<u8>>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub programs: Vec<ProgramEntry>,
    pub schedule: JudgementSchedule,
    /// `(tick, pid)` interrupt injections.
    pub interrupts: Vec<(u64, String)>,
    pub sampling_stride: u64,
    pub run_limit: u64,
    pub monitor: MonitorConfig,
    pub history: HistoryConfig,
    pub manifest: Option<GoldenManifest>,
    pub mac_key: Option<MacKey>,
    /// Supervisor configuration measured ahead of the programs, e.g. the scenario file itself.
    pub config_artifacts: Vec<(String, Vec<u8>)>,
}

impl Scenario {
    /// A scenario with defaults and no programs.
    pub fn new(run_limit: u64) -> Scenario {
        Scenario {
            programs: Vec::new(),
            schedule: JudgementSchedule::default(),
            interrupts: Vec::new(),
            sampling_stride: 1,
            run_limit,
            monitor: MonitorConfig::default(),
            history: HistoryConfig::default(),
            manifest: None,
            mac_key: None,
            config_artifacts: Vec::new(),
        }
    }

    pub fn with_program(mut self, pid: &str, source: &str) -> Scenario {
        self.programs.push(ProgramEntry {
            pid: pid.to_string(),
            source: source.as_bytes().to_vec(),
            policy: None,
        });
        self
    }

    /// Every artifact folded into the launch register, in order.
    pub fn artifacts(&self) -> Vec<(String, Vec<u8>)> {
        let mut out = self.config_artifacts.clone();
        for p in &self.programs {
            out.push((program_artifact(&p.pid), p.source.clone()));
            if let Some(policy) = &p.policy {
                out.push((policy_artifact(&p.pid), policy.clone()));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.programs.is_empty() {
            return invalid("no programs");
        }
        let mut pids = HashSet::new();
        for p in &self.programs {
            if p.pid.is_empty() || p.pid.chars().any(|c| c.is_whitespace() || c.is_control()) {
                return invalid(format!("bad pid {:?}", p.pid));
            }
            if !pids.insert(p.pid.as_str()) {
                return invalid(format!("duplicate pid {:?}", p.pid));
            }
        }
        if self.sampling_stride == 0 {
            return invalid("sampling_stride must be at least 1");
        }
        for (tick, pid) in &self.interrupts {
            if *tick > self.run_limit {
                return invalid(format!(
                    "interrupt at tick {tick} is past run_limit {}",
                    self.run_limit
                ));
            }
            if !pids.contains(pid.as_str()) {
                return invalid(format!("interrupt for unknown pid {pid:?}"));
            }
        }
        for e in self.schedule.entries() {
            if let Some(pid) = &e.pid {
                if !pids.contains(pid.as_str()) {
                    return invalid(format!(
                        "schedule entry {:?} names unknown pid {pid:?}",
                        e.name
                    ));
                }
            }
        }
        self.monitor
            .validate()
            .or_else(|e| invalid(e.to_string()))?;
        if self.history.capacity == 0 || self.history.checkpoint_interval == 0 {
            return invalid("history capacity and checkpoint_interval must be at least 1");
        }
        Ok(())
    }

    /// Loads a scenario file and everything it references.
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        Scenario::load_inner(path, true)
    }

    /// Loads a scenario without its golden manifest, e.g. to generate one.
    pub fn load_without_manifest(path: &Path) -> Result<Scenario, ScenarioError> {
        Scenario::load_inner(path, false)
    }

    fn load_inner(path: &Path, with_manifest: bool) -> Result<Scenario, ScenarioError> {
        let bytes = read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let file: ScenarioFile = serde_json::from_slice(&bytes)
            .map_err(|e| ScenarioError::Invalid(format!("{}: {e}", path.display())))?;

        let programs = file
            .programs
            .iter()
            .map(|p| {
                Ok(ProgramEntry {
                    pid: p.pid.clone(),
                    source: read(&base.join(&p.source))?,
                    policy: p.policy.as_ref().map(|f| read(&base.join(f))).transpose()?,
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;

        let schedule = JudgementSchedule::from_specs(&file.schedule)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;

        let load_policy = |name: &str| -> Result<Policy, ScenarioError> {
            let text = String::from_utf8(read(&base.join(name))?)
                .map_err(|_| ScenarioError::Invalid(format!("{name} is not UTF-8")))?;
            Policy::from_json(&text).map_err(|e| ScenarioError::Invalid(format!("{name}: {e}")))
        };
        let manifest = match file.manifest.as_ref().filter(|_| with_manifest) {
            Some(name) => match load_policy(name)?.manifest {
                Some(m) => Some(m),
                None => return invalid(format!("{name} holds no golden_manifest")),
            },
            None => None,
        };
        let mac_key = match &file.mac_key {
            Some(name) => match load_policy(name)?.mac_key {
                Some(k) => Some(k),
                None => return Err(ScenarioError::KeyMissing(name.clone())),
            },
            None => None,
        };

        let mut history = HistoryConfig::default();
        if let Some(h) = file.history {
            history.capacity = h.capacity.unwrap_or(history.capacity);
            history.checkpoint_interval =
                h.checkpoint_interval.unwrap_or(history.checkpoint_interval);
        }

        let scenario = Scenario {
            programs,
            schedule,
            interrupts: file
                .interrupts
                .into_iter()
                .map(|i| (i.tick, i.pid))
                .collect(),
            sampling_stride: file.sampling_stride,
            run_limit: file.run_limit,
            monitor: file.monitor,
            history,
            manifest,
            mac_key,
            config_artifacts: vec![(SCENARIO_ARTIFACT.to_string(), bytes)],
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

pub const SCENARIO_ARTIFACT: &str = "scenario";

pub fn program_artifact(pid: &str) -> String {
    format!("{pid}/program")
}

pub fn policy_artifact(pid: &str) -> String {
    format!("{pid}/policy")
}

fn read(path: &Path) -> Result<Vec<u8>, ScenarioError> {
    fs::read(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn default_stride() -> u64 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProgramRef {
    pid: String,
    source: String,
    #[serde(default)]
    policy: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterruptRef {
    tick: u64,
    pid: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HistoryRef {
    capacity: Option<usize>,
    checkpoint_interval: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    programs: Vec<ProgramRef>,
    #[serde(default)]
    schedule: Vec<ScheduleEntrySpec>,
    #[serde(default)]
    interrupts: Vec<InterruptRef>,
    #[serde(default = "default_stride")]
    sampling_stride: u64,
    run_limit: u64,
    #[serde(default)]
    manifest: Option<String>,
    #[serde(default)]
    mac_key: Option<String>,
    #[serde(default)]
    monitor: MonitorConfig,
    #[serde(default)]
    history: Option<HistoryRef>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let ok = Scenario::new(10).with_program("p1", "HALT");
        assert!(ok.validate().is_ok());
        assert!(Scenario::new(10).validate().is_err());
        let dup = Scenario::new(10)
            .with_program("p", "HALT")
            .with_program("p", "HALT");
        assert!(dup.validate().is_err());
        let mut late = ok.clone();
        late.interrupts.push((11, "p1".into()));
        assert!(late.validate().is_err());
        let mut ghost = ok.clone();
        ghost.interrupts.push((1, "p9".into()));
        assert!(ghost.validate().is_err());
        let mut stride = ok.clone();
        stride.sampling_stride = 0;
        assert!(stride.validate().is_err());
        assert!(Scenario::new(10)
            .with_program("a b", "HALT")
            .validate()
            .is_err());
    }

    #[test]
    fn artifact_order() {
        let mut s = Scenario::new(10)
            .with_program("p1", "HALT")
            .with_program("p2", "NOP");
        s.programs[0].policy = Some(b"{}".to_vec());
        s.config_artifacts
            .push((SCENARIO_ARTIFACT.into(), b"x".to_vec()));
        let names: Vec<String> = s.artifacts().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["scenario", "p1/program", "p1/policy", "p2/program"]);
    }
}
