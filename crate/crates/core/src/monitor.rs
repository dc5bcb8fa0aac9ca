//! Detectors over supervised processes.
//!
//! Only [`FindingKind::CertifiedDivergence`] is a proof: a repeated full-state
//! digest with no external event in between means the deterministic machine is
//! in a cycle it can never leave. Everything else is a heuristic or a policy
//! threshold. No detector ever concludes that a process will terminate; the
//! absence of a finding carries no verdict.

use std::collections::HashMap;
use std::fmt;

use serde::Deserialize;

use crate::digest::Digest;
use crate::history::{EventLogEntry, HistoryStore, Snapshot};
use crate::vm::{VmState, FLAG_ADDR, NUM_REGS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FindingKind {
    CertifiedDivergence,
    SuspectedLoop,
    NonResponsive,
    ResourceBudgetExceeded,
}

impl FindingKind {
    pub const ALL: [FindingKind; 4] = [
        FindingKind::CertifiedDivergence,
        FindingKind::SuspectedLoop,
        FindingKind::NonResponsive,
        FindingKind::ResourceBudgetExceeded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FindingKind::CertifiedDivergence => "CertifiedDivergence",
            FindingKind::SuspectedLoop => "SuspectedLoop",
            FindingKind::NonResponsive => "NonResponsive",
            FindingKind::ResourceBudgetExceeded => "ResourceBudgetExceeded",
        }
    }
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evidence {
    /// Two ticks with identical state digests and no event between them.
    Ticks {
        first: u64,
        second: u64,
    },
    Recurrences {
        pc: u16,
        count: usize,
        window: usize,
    },
    Latency {
        since: u64,
        now: u64,
        deadline: u64,
    },
    Budget {
        tick: u64,
        budget: u64,
    },
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Evidence::Ticks { first, second } => write!(f, "({first},{second})"),
            Evidence::Recurrences { pc, count, window } => {
                write!(f, "pc={pc},count={count},window={window}")
            }
            Evidence::Latency {
                since,
                now,
                deadline,
            } => write!(f, "since={since},now={now},deadline={deadline}"),
            Evidence::Budget { tick, budget } => write!(f, "tick={tick},budget={budget}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub tick: u64,
    pub pid: String,
    pub kind: FindingKind,
    pub evidence: Evidence,
    pub message: String,
}

impl Finding {
    pub fn log_line(&self) -> String {
        format!(
            "FINDING tick={} pid={} kind={} evidence={}",
            self.tick, self.pid, self.kind, self.evidence
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MonitorError {
    #[error("cannot flag a process that is no longer running")]
    FlagOnDead,
    #[error("invalid monitor configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub interrupt_deadline: u64,
    pub loop_window: usize,
    pub loop_revisit_threshold: usize,
    pub watch_set: Vec<u8>,
    pub step_budget: Option<u64>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            interrupt_deadline: 64,
            loop_window: 256,
            loop_revisit_threshold: 8,
            watch_set: (0..NUM_REGS as u8).collect(),
            step_budget: None,
        }
    }
}

impl MonitorConfig {
    /// The supervisor-owned flag cell.
    pub const FLAG_ADDR: u8 = FLAG_ADDR;

    pub fn validate(&self) -> Result<(), MonitorError> {
        let bad = |m: &str| Err(MonitorError::InvalidConfig(m.to_string()));
        if self.interrupt_deadline == 0 {
            return bad("interrupt_deadline must be at least 1");
        }
        if self.loop_window == 0 {
            return bad("loop_window must be at least 1");
        }
        if self.loop_revisit_threshold == 0 {
            return bad("loop_revisit_threshold must be at least 1");
        }
        if self.watch_set.iter().any(|&r| r as usize >= NUM_REGS) {
            return bad("watch_set registers must be in 0..7");
        }
        Ok(())
    }
}

/// Digest-set cycle certifier for one process.
///
/// The set is cleared whenever a state-changing event has been logged since
/// the previous observation, so a certificate never spans an event.
#[derive(Clone, Debug, Default)]
pub struct CycleDetector {
    seen: HashMap<Digest, u64>,
    mutating_events: usize,
}

impl CycleDetector {
    pub fn new() -> CycleDetector {
        CycleDetector::default()
    }

    pub fn detect_certified_divergence(
        &mut self,
        pid: &str,
        snapshot: &Snapshot,
        events: &[EventLogEntry],
    ) -> Option<Finding> {
        let mutating = events.iter().filter(|e| e.kind.mutates_state()).count();
        if mutating != self.mutating_events {
            self.seen.clear();
            self.mutating_events = mutating;
        }
        if !snapshot.is_live() {
            return None;
        }
        match self.seen.get(&snapshot.state_digest) {
            Some(&first) => Some(Finding {
                tick: snapshot.tick,
                pid: pid.to_string(),
                kind: FindingKind::CertifiedDivergence,
                evidence: Evidence::Ticks {
                    first,
                    second: snapshot.tick,
                },
                message: format!(
                    "state at tick {} repeats tick {first}; period {}",
                    snapshot.tick,
                    snapshot.tick - first
                ),
            }),
            None => {
                self.seen.insert(snapshot.state_digest, snapshot.tick);
                None
            }
        }
    }
}

/// Heuristic: over the last `loop_window` snapshots, some pc recurs at least
/// `loop_revisit_threshold` times with every watched register holding the
/// same values at each recurrence. Only considered once the process is live
/// and has run for at least a full window.
pub fn detect_suspected_loop(
    pid: &str,
    history: &HistoryStore,
    config: &MonitorConfig,
) -> Option<Finding> {
    let window = config.loop_window;
    let latest = history.latest()?;
    if history.len() < window || !latest.is_live() || latest.tick < window as u64 {
        return None;
    }
    let mut counts: HashMap<(u16, Vec<u64>), usize> = HashMap::new();
    for snap in history.snapshots().rev().take(window) {
        let watched = config
            .watch_set
            .iter()
            .map(|&r| snap.regs[r as usize])
            .collect();
        *counts.entry((snap.pc, watched)).or_default() += 1;
    }
    let ((pc, _), count) = counts
        .into_iter()
        .filter(|(_, c)| *c >= config.loop_revisit_threshold)
        .max_by_key(|((pc, _), c)| (*c, std::cmp::Reverse(*pc)))?;
    Some(Finding {
        tick: latest.tick,
        pid: pid.to_string(),
        kind: FindingKind::SuspectedLoop,
        evidence: Evidence::Recurrences { pc, count, window },
        message: format!(
            "pc {pc} revisited {count} times in {window} samples with watched registers unchanged"
        ),
    })
}

/// NonResponsive iff an interrupt has been pending for more than the deadline.
pub fn check_interrupt_latency(
    pid: &str,
    state: &VmState,
    config: &MonitorConfig,
    now: u64,
) -> Option<Finding> {
    let since = state.interrupt_since.filter(|_| state.pending_interrupt)?;
    let deadline = config.interrupt_deadline;
    (now.saturating_sub(since) > deadline).then(|| Finding {
        tick: now,
        pid: pid.to_string(),
        kind: FindingKind::NonResponsive,
        evidence: Evidence::Latency {
            since,
            now,
            deadline,
        },
        message: format!(
            "interrupt pending since tick {since} not acknowledged within {deadline} ticks"
        ),
    })
}

pub fn check_resources(pid: &str, state: &VmState, config: &MonitorConfig) -> Option<Finding> {
    let budget = config.step_budget?;
    (state.is_live() && state.tick > budget).then(|| Finding {
        tick: state.tick,
        pid: pid.to_string(),
        kind: FindingKind::ResourceBudgetExceeded,
        evidence: Evidence::Budget {
            tick: state.tick,
            budget,
        },
        message: format!(
            "still running at tick {} past a budget of {budget} steps",
            state.tick
        ),
    })
}

/// Raises the abnormal-behaviour flag in the monitored process's memory.
pub fn set_flag(state: &VmState) -> Result<VmState, MonitorError> {
    if !state.is_live() {
        return Err(MonitorError::FlagOnDead);
    }
    let mut next = state.clone();
    next.mem[FLAG_ADDR as usize] = 1;
    Ok(next)
}
