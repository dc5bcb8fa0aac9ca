//! Log directories and deterministic replay.
//!
//! A run writes `history-<pid>.tsv`, `judgement.log`, `reports.log`,
//! `attest.log`, `transcript.log`, `summary.txt` and the request script as
//! `requests.txt`. Replay verifies the judgement chain, reruns the scenario
//! with the recorded requests and compares every file line by line.

use std::fs;
use std::path::{Path, PathBuf};

use super::scenario::{Scenario, ScenarioError};
use super::world::{parse_script, ProcStatus, Supervisor};
use crate::judgement::{verify_log_text, ChainError};

/// Log file names paired with their contents.
pub type LogFiles = Vec<(String, String)>;

pub const JUDGEMENT_LOG: &str = "judgement.log";
pub const REQUESTS_FILE: &str = "requests.txt";

/// Every file a run produces, as `(file name, contents)`.
pub fn log_files(sup: &Supervisor, requests: &str) -> LogFiles {
    let mut files: LogFiles = sup
        .processes()
        .iter()
        .filter(|p| p.status != ProcStatus::Refused)
        .map(|p| (format!("history-{}.tsv", p.pid), p.history.export_all()))
        .collect();
    files.push((JUDGEMENT_LOG.into(), sup.judgements().export()));
    files.push(("reports.log".into(), sup.report_log()));
    files.push(("attest.log".into(), sup.attest_log()));
    files.push(("transcript.log".into(), sup.transcript_log()));
    files.push(("summary.txt".into(), sup.summary()));
    files.push((REQUESTS_FILE.into(), requests.to_string()));
    files
}

pub fn write_logs(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, text) in files {
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

/// Runs a scenario against a request script; returns the supervisor, the
/// rendered responses and the log files.
pub fn execute(
    scenario: Scenario,
    requests: &str,
) -> Result<(Supervisor, Vec<String>, LogFiles), ScenarioError> {
    let script = parse_script(requests)?;
    let mut sup = Supervisor::new(scenario)?;
    let responses = sup.run(&script);
    let files = log_files(&sup, requests);
    Ok((sup, responses, files))
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("judgement log failed verification: {0}")]
    Integrity(ChainError),
    #[error("divergence at {file}:{line}")]
    DivergenceAt { file: String, line: usize },
}

fn read_text(path: &Path) -> Result<String, ReplayError> {
    fs::read_to_string(path).map_err(|source| ReplayError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// First 1-based line at which two texts differ, if any.
pub fn first_difference(a: &str, b: &str) -> Option<usize> {
    let mut la = a.split_inclusive('\n');
    let mut lb = b.split_inclusive('\n');
    let mut line = 1;
    loop {
        match (la.next(), lb.next()) {
            (None, None) => return None,
            (x, y) if x != y => return Some(line),
            _ => line += 1,
        }
    }
}

/// Returns the number of files compared.
pub fn replay(scenario: Scenario, logdir: &Path) -> Result<usize, ReplayError> {
    let recorded_chain = read_text(&logdir.join(JUDGEMENT_LOG))?;
    verify_log_text(&recorded_chain).map_err(ReplayError::Integrity)?;

    let requests_path = logdir.join(REQUESTS_FILE);
    let requests = if requests_path.exists() {
        read_text(&requests_path)?
    } else {
        String::new()
    };
    let (_, _, files) = execute(scenario, &requests)?;

    for (name, text) in &files {
        let path = logdir.join(name);
        if !path.exists() {
            return Err(ReplayError::DivergenceAt {
                file: name.clone(),
                line: 1,
            });
        }
        if let Some(line) = first_difference(&read_text(&path)?, text) {
            return Err(ReplayError::DivergenceAt {
                file: name.clone(),
                line,
            });
        }
    }
    let entries = fs::read_dir(logdir).map_err(|source| ReplayError::Io {
        path: logdir.to_path_buf(),
        source,
    })?;
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with("history-") && !files.iter().any(|(n, _)| *n == name) {
            return Err(ReplayError::DivergenceAt {
                file: name,
                line: 1,
            });
        }
    }
    Ok(files.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_lines() {
        assert_eq!(first_difference("a\nb\n", "a\nb\n"), None);
        assert_eq!(first_difference("a\nb\n", "a\nc\n"), Some(2));
        assert_eq!(first_difference("a\n", "a\nb\n"), Some(2));
        assert_eq!(first_difference("a", "a\n"), Some(1));
        assert_eq!(first_difference("", ""), None);
    }
}
