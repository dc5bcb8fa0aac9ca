//! Hash-chained judgement log.
//!
//! Each record commits to its predecessor: `entry_hash = SHA-256(prev_hash ||
//! entry bytes)`, where the entry bytes are the big-endian id and tick, the
//! length-prefixed pid and proposition code, one verdict byte and the
//! snapshot digest. The first record's `prev_hash` is all zeroes.

use super::code::PropCode;
use super::eval::Verdict;
use crate::digest::Digest;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JudgementRecord {
    pub id: u64,
    pub tick: u64,
    pub pid: String,
    pub prop_code: PropCode,
    pub verdict: Verdict,
    pub snapshot_digest: Digest,
    pub prev_hash: Digest,
    pub entry_hash: Digest,
}

/// A judgement that could not be made; kept outside the chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Refusal {
    pub tick: Option<u64>,
    pub pid: String,
    pub prop_code: PropCode,
    pub reason: String,
}

impl Refusal {
    pub fn log_line(&self) -> String {
        let tick = self.tick.map_or_else(|| "-".to_string(), |t| t.to_string());
        format!(
            "REFUSAL tick={tick} pid={} prop={} reason={}",
            self.pid,
            self.prop_code.to_hex(),
            self.reason
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("record {index} (id {id}) does not verify")]
    Broken { index: usize, id: u64 },
}

pub fn entry_bytes(
    id: u64,
    tick: u64,
    pid: &str,
    prop_code: &PropCode,
    verdict: Verdict,
    snapshot_digest: &Digest,
) -> Vec<u8> {
    let code = prop_code.to_bytes();
    let mut out = Vec::with_capacity(8 + 8 + 4 + pid.len() + 4 + code.len() + 1 + 32);
    out.extend_from_slice(&id.to_be_bytes());
    out.extend_from_slice(&tick.to_be_bytes());
    out.extend_from_slice(&(pid.len() as u32).to_be_bytes());
    out.extend_from_slice(pid.as_bytes());
    out.extend_from_slice(&(code.len() as u32).to_be_bytes());
    out.extend_from_slice(&code);
    out.push(match verdict {
        Verdict::Yes => 1,
        Verdict::No => 0,
    });
    out.extend_from_slice(snapshot_digest.as_bytes());
    out
}

impl JudgementRecord {
    pub fn compute_hash(&self) -> Digest {
        let body = entry_bytes(
            self.id,
            self.tick,
            &self.pid,
            &self.prop_code,
            self.verdict,
            &self.snapshot_digest,
        );
        Digest::of_parts([self.prev_hash.as_bytes().as_slice(), &body])
    }

    /// `id tick pid prop_code verdict snapshot_digest prev_hash entry_hash`, tab-separated.
    pub fn export_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.id,
            self.tick,
            self.pid,
            self.prop_code.to_hex(),
            self.verdict,
            self.snapshot_digest,
            self.prev_hash,
            self.entry_hash
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<JudgementRecord, ChainError> {
        let bad = |message: String| ChainError::Malformed {
            line: line_no,
            message,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(bad(format!("expected 8 fields, found {}", f.len())));
        }
        let num = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| bad(format!("bad number {s:?}")))
        };
        let digest = |s: &str| Digest::from_hex(s).map_err(|e| bad(e.to_string()));
        let verdict = match f[4] {
            "yes" => Verdict::Yes,
            "no" => Verdict::No,
            other => return Err(bad(format!("verdict must be yes or no, found {other:?}"))),
        };
        Ok(JudgementRecord {
            id: num(f[0])?,
            tick: num(f[1])?,
            pid: f[2].to_string(),
            prop_code: PropCode::from_hex(f[3]).map_err(|e| bad(e.to_string()))?,
            verdict,
            snapshot_digest: digest(f[5])?,
            prev_hash: digest(f[6])?,
            entry_hash: digest(f[7])?,
        })
    }
}

/// Checks ids are sequential from 1 and every hash links to its predecessor.
pub fn verify_chain(records: &[JudgementRecord]) -> Result<(), ChainError> {
    let mut prev = Digest::ZERO;
    for (index, r) in records.iter().enumerate() {
        if r.id != index as u64 + 1 || r.prev_hash != prev || r.compute_hash() != r.entry_hash {
            return Err(ChainError::Broken { index, id: r.id });
        }
        prev = r.entry_hash;
    }
    Ok(())
}

/// Parses an exported log and verifies its chain. Returns the record count.
pub fn verify_log_text(text: &str) -> Result<usize, ChainError> {
    let records = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| JudgementRecord::parse_line(l, i + 1))
        .collect::<Result<Vec<_>, _>>()?;
    verify_chain(&records)?;
    Ok(records.len())
}

#[derive(Clone, Debug, Default)]
pub struct JudgementLog {
    records: Vec<JudgementRecord>,
    refusals: Vec<Refusal>,
}

impl JudgementLog {
    pub fn new() -> JudgementLog {
        JudgementLog::default()
    }

    pub fn append(
        &mut self,
        tick: u64,
        pid: &str,
        prop_code: PropCode,
        verdict: Verdict,
        snapshot_digest: Digest,
    ) -> &JudgementRecord {
        let prev_hash = self.records.last().map_or(Digest::ZERO, |r| r.entry_hash);
        let mut record = JudgementRecord {
            id: self.records.len() as u64 + 1,
            tick,
            pid: pid.to_string(),
            prop_code,
            verdict,
            snapshot_digest,
            prev_hash,
            entry_hash: Digest::ZERO,
        };
        record.entry_hash = record.compute_hash();
        self.records.push(record);
        self.records.last().expect("just pushed")
    }

    pub fn refuse(&mut self, refusal: Refusal) {
        self.refusals.push(refusal);
    }

    pub fn records(&self) -> &[JudgementRecord] {
        &self.records
    }

    pub fn refusals(&self) -> &[Refusal] {
        &self.refusals
    }

    pub fn verify(&self) -> Result<(), ChainError> {
        verify_chain(&self.records)
    }

    pub fn export(&self) -> String {
        self.records
            .iter()
            .map(|r| r.export_line() + "\n")
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judgement::{encode, parse_prop};

    fn code(src: &str) -> PropCode {
        encode(&parse_prop(src).unwrap())
    }

    #[test]
    fn genesis_record() {
        let mut log = JudgementLog::new();
        let r = log
            .append(0, "p1", code("true"), Verdict::Yes, Digest::ZERO)
            .clone();
        assert_eq!(r.id, 1);
        assert_eq!(r.prev_hash, Digest::ZERO);
        assert!(log.verify().is_ok());
    }

    #[test]
    fn tick_distinguishes_identical_judgements() {
        let mut log = JudgementLog::new();
        let a = log
            .append(3, "p1", code("pc = 0"), Verdict::Yes, Digest::ZERO)
            .clone();
        let b = log
            .append(4, "p1", code("pc = 0"), Verdict::Yes, Digest::ZERO)
            .clone();
        assert_ne!(a.id, b.id);
        assert_ne!(a.entry_hash, b.entry_hash);
    }

    #[test]
    fn export_parse_round_trip_and_tamper() {
        let mut log = JudgementLog::new();
        for t in 0..10 {
            log.append(
                t,
                "p",
                code("tick > 3"),
                (t > 3).into(),
                Digest::of(&[t as u8]),
            );
        }
        let text = log.export();
        assert_eq!(verify_log_text(&text), Ok(10));
        let tampered = text.replacen("\tno\t", "\tyes\t", 1);
        assert_eq!(
            verify_log_text(&tampered),
            Err(ChainError::Broken { index: 0, id: 1 })
        );
        let dropped: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        assert!(verify_log_text(&dropped).is_err());
        assert!(matches!(
            verify_log_text("1\t2\tmaybe\n"),
            Err(ChainError::Malformed { line: 1, .. })
        ));
    }
}
