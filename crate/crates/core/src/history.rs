//! Time-indexed archive of process states and external events.
//!
//! Snapshots keep registers and digests; full machine states are kept only
//! as periodic checkpoints. Any tick between the oldest checkpoint and the
//! newest snapshot can be rebuilt by replaying the program from the nearest
//! checkpoint and re-applying logged events.
//!
//! Ordering convention: an event logged at tick `t` is applied to the state
//! at tick `t` *after* that state's snapshot was recorded, and before the
//! step to `t + 1`. Replay applies events at the same tick in log order.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use crate::digest::Digest;
use crate::monitor;
use crate::vm::{Program, VmState, NUM_REGS};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub tick: u64,
    pub pc: u16,
    /// Decoded current instruction, or `-` when pc is past the end.
    pub instruction: String,
    pub regs: [u64; NUM_REGS],
    pub mem_digest: Digest,
    pub pending_interrupt: bool,
    pub halted: bool,
    pub faulted: bool,
    pub state_digest: Digest,
}

impl Snapshot {
    pub fn capture(state: &VmState, program: &Program) -> Snapshot {
        Snapshot {
            tick: state.tick,
            pc: state.pc,
            instruction: state
                .current_instruction(program)
                .map_or_else(|| "-".to_string(), ToString::to_string),
            regs: state.regs,
            mem_digest: state.mem_digest(),
            pending_interrupt: state.pending_interrupt,
            halted: state.halted,
            faulted: state.faulted,
            state_digest: state.digest(),
        }
    }

    pub fn is_live(&self) -> bool {
        !self.halted && !self.faulted
    }

    pub fn flags_text(&self) -> String {
        [
            if self.pending_interrupt { 'P' } else { '-' },
            if self.halted { 'H' } else { '-' },
            if self.faulted { 'F' } else { '-' },
        ]
        .iter()
        .collect()
    }

    /// Tab-separated export record: `tick pc instr r0..r7 flags state_digest`.
    pub fn export_line(&self) -> String {
        let mut fields = vec![
            self.tick.to_string(),
            self.pc.to_string(),
            self.instruction.clone(),
        ];
        fields.extend(self.regs.iter().map(u64::to_string));
        fields.push(self.flags_text());
        fields.push(self.state_digest.to_hex());
        fields.join("\t")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    InterruptInjected,
    FlagSet,
    ProcessStarted,
    ProcessKilled,
}

impl EventKind {
    /// Whether replay must re-apply this event to the machine state.
    pub fn mutates_state(self) -> bool {
        matches!(self, EventKind::InterruptInjected | EventKind::FlagSet)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::InterruptInjected => "InterruptInjected",
            EventKind::FlagSet => "FlagSet",
            EventKind::ProcessStarted => "ProcessStarted",
            EventKind::ProcessKilled => "ProcessKilled",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EventLogEntry {
    pub tick: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("tick {got} is not after the last recorded tick {last}")]
    NonMonotonicTick { last: u64, got: u64 },
    #[error("event at tick {got} precedes the last event at tick {last}")]
    NonMonotonicEvent { last: u64, got: u64 },
    #[error("invalid range {from}..{to}")]
    InvalidRange { from: u64, to: u64 },
    #[error("no retained snapshot in {from}..{to}")]
    EmptyRange { from: u64, to: u64 },
    #[error("tick {tick} is before the reconstruction horizon {horizon:?}")]
    TickBeforeHorizon { tick: u64, horizon: Option<u64> },
    #[error("tick {tick} is after the newest recorded tick {latest}")]
    TickInFuture { tick: u64, latest: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HistoryConfig {
    pub capacity: usize,
    pub checkpoint_interval: u64,
}

impl Default for HistoryConfig {
    fn default() -> Self {
        HistoryConfig {
            capacity: 65536,
            checkpoint_interval: 1024,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HistoryStore {
    config: HistoryConfig,
    snapshots: VecDeque<Snapshot>,
    checkpoints: BTreeMap<u64, VmState>,
    events: Vec<EventLogEntry>,
    last_tick: Option<u64>,
}

impl Default for HistoryStore {
    fn default() -> Self {
        HistoryStore::new(HistoryConfig::default())
    }
}

impl HistoryStore {
    pub fn new(config: HistoryConfig) -> HistoryStore {
        assert!(config.capacity >= 1, "history capacity must be at least 1");
        assert!(
            config.checkpoint_interval >= 1,
            "checkpoint interval must be at least 1"
        );
        HistoryStore {
            config,
            snapshots: VecDeque::new(),
            checkpoints: BTreeMap::new(),
            events: Vec::new(),
            last_tick: None,
        }
    }

    pub fn config(&self) -> HistoryConfig {
        self.config
    }

    /// Appends a snapshot of `state`. A full checkpoint is kept for the first
    /// record and for the first record in each later checkpoint interval, which
    /// with stride 1 means every tick divisible by the interval.
    pub fn record(
        &mut self,
        state: &VmState,
        program: &Program,
    ) -> Result<&Snapshot, HistoryError> {
        if let Some(last) = self.last_tick {
            if state.tick <= last {
                return Err(HistoryError::NonMonotonicTick {
                    last,
                    got: state.tick,
                });
            }
        }
        let q = self.config.checkpoint_interval;
        let wants_checkpoint = match self.checkpoints.keys().next_back() {
            None => true,
            Some(&cp) => state.tick / q > cp / q,
        };
        if wants_checkpoint {
            self.checkpoints.insert(state.tick, state.clone());
        }
        self.snapshots.push_back(Snapshot::capture(state, program));
        self.last_tick = Some(state.tick);

        while self.snapshots.len() > self.config.capacity {
            self.snapshots.pop_front();
        }
        self.prune_checkpoints();
        Ok(self.snapshots.back().expect("just pushed"))
    }

    fn prune_checkpoints(&mut self) {
        let Some(oldest) = self.snapshots.front().map(|s| s.tick) else {
            return;
        };
        // Keep the newest checkpoint at or before the oldest retained snapshot.
        if let Some(&keep) = self
            .checkpoints
            .range(..=oldest)
            .next_back()
            .map(|(t, _)| t)
        {
            self.checkpoints = self.checkpoints.split_off(&keep);
        }
    }

    pub fn record_event(&mut self, tick: u64, kind: EventKind) -> Result<(), HistoryError> {
        if let Some(last) = self.events.last() {
            if tick < last.tick {
                return Err(HistoryError::NonMonotonicEvent {
                    last: last.tick,
                    got: tick,
                });
            }
        }
        self.events.push(EventLogEntry { tick, kind });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn latest(&self) -> Option<&Snapshot> {
        self.snapshots.back()
    }

    pub fn snapshots(&self) -> impl DoubleEndedIterator<Item = &Snapshot> + ExactSizeIterator {
        self.snapshots.iter()
    }

    pub fn get(&self, tick: u64) -> Option<&Snapshot> {
        let i = self.snapshots.partition_point(|s| s.tick < tick);
        self.snapshots.get(i).filter(|s| s.tick == tick)
    }

    pub fn events(&self) -> &[EventLogEntry] {
        &self.events
    }

    /// Tick of the oldest retained checkpoint; nothing earlier can be rebuilt.
    pub fn horizon(&self) -> Option<u64> {
        self.checkpoints.keys().next().copied()
    }

    pub fn checkpoint_ticks(&self) -> impl Iterator<Item = u64> + '_ {
        self.checkpoints.keys().copied()
    }

    /// Retained snapshots with `from <= tick <= to`, ascending.
    pub fn query(&self, from: u64, to: u64) -> Result<Vec<&Snapshot>, HistoryError> {
        if from > to {
            return Err(HistoryError::InvalidRange { from, to });
        }
        let start = self.snapshots.partition_point(|s| s.tick < from);
        let hits: Vec<&Snapshot> = self
            .snapshots
            .range(start..)
            .take_while(|s| s.tick <= to)
            .collect();
        if hits.is_empty() {
            return Err(HistoryError::EmptyRange { from, to });
        }
        Ok(hits)
    }

    /// Rebuilds the full state at `tick` by replay from the nearest checkpoint.
    pub fn reconstruct(&self, program: &Program, tick: u64) -> Result<VmState, HistoryError> {
        let Some((_, checkpoint)) = self.checkpoints.range(..=tick).next_back() else {
            return Err(HistoryError::TickBeforeHorizon {
                tick,
                horizon: self.horizon(),
            });
        };
        let latest = self.last_tick.unwrap_or(0);
        if tick > latest {
            return Err(HistoryError::TickInFuture { tick, latest });
        }

        let mut state = checkpoint.clone();
        let mut next_event = self.events.partition_point(|e| e.tick < state.tick);
        while state.tick < tick {
            while let Some(ev) = self.events.get(next_event).filter(|e| e.tick == state.tick) {
                state = apply_event(&state, ev.kind);
                next_event += 1;
            }
            state = state.step(program);
        }
        Ok(state)
    }

    pub fn export(&self, from: u64, to: u64) -> Result<String, HistoryError> {
        let mut out = String::new();
        for s in self.query(from, to)? {
            out.push_str(&s.export_line());
            out.push('\n');
        }
        Ok(out)
    }

    pub fn export_all(&self) -> String {
        self.snapshots
            .iter()
            .map(|s| s.export_line() + "\n")
            .collect()
    }
}

fn apply_event(state: &VmState, kind: EventKind) -> VmState {
    match kind {
        EventKind::InterruptInjected => state
            .inject_interrupt(state.tick)
            .unwrap_or_else(|_| state.clone()),
        EventKind::FlagSet => monitor::set_flag(state).unwrap_or_else(|_| state.clone()),
        EventKind::ProcessStarted | EventKind::ProcessKilled => state.clone(),
    }
}
