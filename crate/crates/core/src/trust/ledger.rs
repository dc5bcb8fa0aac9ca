use std::collections::BTreeMap;
use std::fmt;

use super::report::SecurityReport;

pub const INITIAL_SCORE: u8 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TrustClass {
    Untrusted,
    Suspect,
    Trusted,
}

impl TrustClass {
    pub fn of_score(score: u8) -> TrustClass {
        match score {
            80.. => TrustClass::Trusted,
            30..=79 => TrustClass::Suspect,
            _ => TrustClass::Untrusted,
        }
    }
}

impl fmt::Display for TrustClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrustClass::Trusted => "Trusted",
            TrustClass::Suspect => "Suspect",
            TrustClass::Untrusted => "Untrusted",
        })
    }
}

/// Per-process trustworthiness: 100 minus the sum of report severities, floored at 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrustLedger {
    deductions: BTreeMap<String, u64>,
    reports: BTreeMap<String, u64>,
}

impl TrustLedger {
    pub fn new() -> TrustLedger {
        TrustLedger::default()
    }

    pub fn update(&mut self, report: &SecurityReport) {
        *self.deductions.entry(report.pid.clone()).or_default() += report.severity as u64;
        *self.reports.entry(report.pid.clone()).or_default() += 1;
    }

    pub fn score(&self, pid: &str) -> u8 {
        let deducted = self.deductions.get(pid).copied().unwrap_or(0);
        INITIAL_SCORE.saturating_sub(deducted.min(INITIAL_SCORE as u64) as u8)
    }

    pub fn class(&self, pid: &str) -> TrustClass {
        TrustClass::of_score(self.score(pid))
    }

    pub fn report_count(&self, pid: &str) -> u64 {
        self.reports.get(pid).copied().unwrap_or(0)
    }
}

pub fn update_trust(mut ledger: TrustLedger, report: &SecurityReport) -> TrustLedger {
    ledger.update(report);
    ledger
}
