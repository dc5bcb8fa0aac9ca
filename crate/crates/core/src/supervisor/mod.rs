//! Scenario runner: launches attested programs, steps them in lockstep and
//! answers requests at tick boundaries.

mod protocol;
mod replay;
mod scenario;
mod world;

pub use protocol::{
    authenticate, sign_request, verify_response, ErrorCode, Request, Response, END_TRAILER,
    MAC_MARKER,
};
pub use replay::{
    execute, first_difference, log_files, replay, write_logs, LogFiles, ReplayError, JUDGEMENT_LOG,
    REQUESTS_FILE,
};
pub use scenario::{
    policy_artifact, program_artifact, ProgramEntry, Scenario, ScenarioError, SCENARIO_ARTIFACT,
};
pub use world::{parse_script, AttestStatus, ProcStatus, Process, ScriptLine, Supervisor};

/// Process exit codes of the command-line supervisor.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const SCENARIO_INVALID: i32 = 2;
    pub const ATTESTATION_MISMATCH: i32 = 3;
    pub const REPLAY_DIVERGENCE: i32 = 4;
}
