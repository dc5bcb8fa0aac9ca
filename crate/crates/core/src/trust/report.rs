use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::monitor::{Finding, FindingKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReportKind {
    RangeViolation,
    MemoryStructureViolation,
    NonResponsive,
    CertifiedDivergence,
    SuspectedLoop,
    ResourceBudgetExceeded,
    AttestationMismatch,
    MessageIntegrityFailure,
}

impl ReportKind {
    pub const ALL: [ReportKind; 8] = [
        ReportKind::RangeViolation,
        ReportKind::MemoryStructureViolation,
        ReportKind::NonResponsive,
        ReportKind::CertifiedDivergence,
        ReportKind::SuspectedLoop,
        ReportKind::ResourceBudgetExceeded,
        ReportKind::AttestationMismatch,
        ReportKind::MessageIntegrityFailure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::RangeViolation => "RangeViolation",
            ReportKind::MemoryStructureViolation => "MemoryStructureViolation",
            ReportKind::NonResponsive => "NonResponsive",
            ReportKind::CertifiedDivergence => "CertifiedDivergence",
            ReportKind::SuspectedLoop => "SuspectedLoop",
            ReportKind::ResourceBudgetExceeded => "ResourceBudgetExceeded",
            ReportKind::AttestationMismatch => "AttestationMismatch",
            ReportKind::MessageIntegrityFailure => "MessageIntegrityFailure",
        }
    }

    pub fn default_severity(self) -> u8 {
        match self {
            ReportKind::RangeViolation => 15,
            ReportKind::MemoryStructureViolation => 40,
            ReportKind::NonResponsive => 25,
            ReportKind::CertifiedDivergence => 30,
            ReportKind::SuspectedLoop => 10,
            ReportKind::ResourceBudgetExceeded => 10,
            ReportKind::AttestationMismatch => 100,
            ReportKind::MessageIntegrityFailure => 50,
        }
    }
}

impl From<FindingKind> for ReportKind {
    fn from(k: FindingKind) -> ReportKind {
        match k {
            FindingKind::CertifiedDivergence => ReportKind::CertifiedDivergence,
            FindingKind::SuspectedLoop => ReportKind::SuspectedLoop,
            FindingKind::NonResponsive => ReportKind::NonResponsive,
            FindingKind::ResourceBudgetExceeded => ReportKind::ResourceBudgetExceeded,
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown report kind {0:?}")]
pub struct UnknownReportKind(pub String);

impl FromStr for ReportKind {
    type Err = UnknownReportKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownReportKind(s.to_string()))
    }
}

/// Severity per report kind, with optional overrides of the defaults.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SeverityTable {
    overrides: BTreeMap<ReportKind, u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("severity for {kind} must be in 1..=100, got {value}")]
pub struct SeverityOutOfRange {
    pub kind: ReportKind,
    pub value: u64,
}

impl SeverityTable {
    pub fn with_overrides(
        overrides: impl IntoIterator<Item = (ReportKind, u64)>,
    ) -> Result<SeverityTable, SeverityOutOfRange> {
        let mut table = SeverityTable::default();
        for (kind, value) in overrides {
            if !(1..=100).contains(&value) {
                return Err(SeverityOutOfRange { kind, value });
            }
            table.overrides.insert(kind, value as u8);
        }
        Ok(table)
    }

    pub fn severity(&self, kind: ReportKind) -> u8 {
        self.overrides
            .get(&kind)
            .copied()
            .unwrap_or_else(|| kind.default_severity())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecurityReport {
    pub tick: u64,
    pub pid: String,
    pub kind: ReportKind,
    pub severity: u8,
    pub details: String,
}

impl SecurityReport {
    pub fn new(
        kind: ReportKind,
        tick: u64,
        pid: &str,
        details: impl Into<String>,
        severities: &SeverityTable,
    ) -> SecurityReport {
        SecurityReport {
            tick,
            pid: pid.to_string(),
            kind,
            severity: severities.severity(kind),
            details: details.into(),
        }
    }

    pub fn from_finding(finding: &Finding, severities: &SeverityTable) -> SecurityReport {
        SecurityReport::new(
            finding.kind.into(),
            finding.tick,
            &finding.pid,
            format!("evidence={}", finding.evidence),
            severities,
        )
    }

    pub fn log_line(&self) -> String {
        format!(
            "REPORT tick={} pid={} kind={} severity={} {}",
            self.tick, self.pid, self.kind, self.severity, self.details
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_finding_maps_to_one_report_kind() {
        let mapped: Vec<ReportKind> = FindingKind::ALL.iter().map(|&k| k.into()).collect();
        for (f, r) in FindingKind::ALL.iter().zip(&mapped) {
            assert_eq!(f.name(), r.name());
        }
        let mut unique = mapped.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), mapped.len());
    }

    #[test]
    fn severities_in_range() {
        for k in ReportKind::ALL {
            assert!((1..=100).contains(&k.default_severity()));
            assert_eq!(k.name().parse::<ReportKind>().unwrap(), k);
        }
        assert!(SeverityTable::with_overrides([(ReportKind::SuspectedLoop, 0)]).is_err());
        assert!(SeverityTable::with_overrides([(ReportKind::SuspectedLoop, 101)]).is_err());
        let t = SeverityTable::with_overrides([(ReportKind::SuspectedLoop, 55)]).unwrap();
        assert_eq!(t.severity(ReportKind::SuspectedLoop), 55);
        assert_eq!(t.severity(ReportKind::RangeViolation), 15);
    }
}
