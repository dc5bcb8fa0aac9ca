//! Security policy, reports, trust ratings, measured launch and message tags.

mod attest;
mod ledger;
mod mac;
mod policy;
mod report;

pub use attest::{
    measure, verify_launch, AttestError, GoldenManifest, LaunchOutcome, Measurement,
    MeasurementLog, Mismatch, Pcr,
};
pub use ledger::{update_trust, TrustClass, TrustLedger, INITIAL_SCORE};
pub use mac::{hmac_sha256, tag_message, verify_message, MacKey};
pub use policy::{
    check_snapshot, check_write, Policy, PolicyError, ProtectedRegion, RangeDecl, Target,
    TypeRangePolicy, WriteEvent, Writer,
};
pub use report::{
    ReportKind, SecurityReport, SeverityOutOfRange, SeverityTable, UnknownReportKind,
};
