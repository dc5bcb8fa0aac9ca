//! Decidable judgements over process state.
//!
//! Propositions are quantifier-free or use bounded quantifiers only, so every
//! closed proposition within the range limit evaluates to exactly `yes` or
//! `no`. Each evaluation is appended to a hash-chained [`JudgementLog`].

mod ast;
mod code;
mod eval;
mod log;
mod parse;

use serde::Deserialize;

pub use ast::{Prop, Quantified, RelOp, Term};
pub use code::{canonical_bytes, decode, encode, MalformedCode, PropCode};
pub use eval::{
    eval_term, evaluate, evaluate_with, subst, subst_term, Env, EvalError, Verdict,
    MAX_QUANTIFIER_RANGE,
};
pub use log::{
    entry_bytes, verify_chain, verify_log_text, ChainError, JudgementLog, JudgementRecord, Refusal,
};
pub use parse::{is_variable_name, parse_prop, SyntaxError};

use crate::vm::VmState;

/// Gives access to the latest full state of each known process.
pub trait StateSource {
    fn state_of(&self, pid: &str) -> Option<&VmState>;
    /// Known pids in a stable order.
    fn pids(&self) -> Vec<String>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JudgeError {
    #[error("unknown pid {0:?}")]
    UnknownPid(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Evaluates `prop` against the latest state of `pid` and appends the result.
/// Evaluation failures are logged as refusals and returned as errors.
pub fn judge<S: StateSource + ?Sized>(
    pid: &str,
    prop: &Prop,
    log: &mut JudgementLog,
    source: &S,
) -> Result<JudgementRecord, JudgeError> {
    let prop_code = encode(prop);
    let Some(state) = source.state_of(pid) else {
        log.refuse(Refusal {
            tick: None,
            pid: pid.to_string(),
            prop_code,
            reason: "unknown-pid".to_string(),
        });
        return Err(JudgeError::UnknownPid(pid.to_string()));
    };
    match evaluate(prop, state) {
        Ok(verdict) => Ok(log
            .append(state.tick, pid, prop_code, verdict, state.digest())
            .clone()),
        Err(e) => {
            log.refuse(Refusal {
                tick: Some(state.tick),
                pid: pid.to_string(),
                prop_code,
                reason: e.to_string(),
            });
            Err(e.into())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Health,
    Security,
    Safety,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub name: String,
    pub prop: Prop,
    pub period: u64,
    pub category: Category,
    /// Restricts the entry to one process; `None` judges every known process.
    pub pid: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("schedule entry {name:?}: period must be at least 1")]
    ZeroPeriod { name: String },
    #[error("schedule entry {name:?}: {source}")]
    BadProp { name: String, source: SyntaxError },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JudgementSchedule {
    entries: Vec<ScheduleEntry>,
}

/// Schedule entry as written in a scenario file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntrySpec {
    pub name: String,
    pub prop: String,
    pub period: u64,
    pub category: Category,
    #[serde(default)]
    pub pid: Option<String>,
}

impl JudgementSchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<JudgementSchedule, ScheduleError> {
        if let Some(e) = entries.iter().find(|e| e.period == 0) {
            return Err(ScheduleError::ZeroPeriod {
                name: e.name.clone(),
            });
        }
        Ok(JudgementSchedule { entries })
    }

    pub fn from_specs(specs: &[ScheduleEntrySpec]) -> Result<JudgementSchedule, ScheduleError> {
        let entries = specs
            .iter()
            .map(|s| {
                Ok(ScheduleEntry {
                    name: s.name.clone(),
                    prop: parse_prop(&s.prop).map_err(|source| ScheduleError::BadProp {
                        name: s.name.clone(),
                        source,
                    })?,
                    period: s.period,
                    category: s.category,
                    pid: s.pid.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        JudgementSchedule::new(entries)
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Judges every entry whose period divides `now`, in schedule order.
/// Refusals land in the log's refusal list and are not returned.
pub fn run_schedule<S: StateSource + ?Sized>(
    schedule: &JudgementSchedule,
    now: u64,
    log: &mut JudgementLog,
    source: &S,
) -> Vec<JudgementRecord> {
    let mut out = Vec::new();
    for entry in schedule
        .entries
        .iter()
        .filter(|e| now.is_multiple_of(e.period))
    {
        let pids = match &entry.pid {
            Some(p) => vec![p.clone()],
            None => source.pids(),
        };
        for pid in pids {
            if let Ok(record) = judge(&pid, &entry.prop, log, source) {
                out.push(record);
            }
        }
    }
    out
}
