use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use super::attest::{GoldenManifest, Measurement};
use super::mac::MacKey;
use super::report::{ReportKind, SecurityReport, SeverityTable};
use crate::digest::Digest;
use crate::vm::{VmState, FLAG_ADDR, NUM_REGS};

/// A range-checked storage location: `r<i>` or `mem[<a>]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Reg(u8),
    Mem(u8),
}

impl Target {
    pub fn read(self, state: &VmState) -> u64 {
        match self {
            Target::Reg(i) => state.regs[i as usize],
            Target::Mem(a) => state.mem[a as usize],
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Reg(i) => write!(f, "r{i}"),
            Target::Mem(a) => write!(f, "mem[{a}]"),
        }
    }
}

impl FromStr for Target {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PolicyError::BadTarget(s.to_string());
        if let Some(i) = s.strip_prefix('r') {
            let i: u8 = i.parse().map_err(|_| bad())?;
            return if (i as usize) < NUM_REGS {
                Ok(Target::Reg(i))
            } else {
                Err(bad())
            };
        }
        let a = s
            .strip_prefix("mem[")
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(bad)?;
        a.parse().map(Target::Mem).map_err(|_| bad())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RangeDecl {
    pub target: Target,
    pub lo: u64,
    pub hi: u64,
}

/// Expected value ranges, inclusive, at most one per target.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeRangePolicy {
    decls: Vec<RangeDecl>,
}

impl TypeRangePolicy {
    pub fn new(decls: Vec<RangeDecl>) -> Result<TypeRangePolicy, PolicyError> {
        let mut seen = HashSet::new();
        for d in &decls {
            if d.lo > d.hi {
                return Err(PolicyError::EmptyRange(d.target.to_string()));
            }
            if !seen.insert(d.target) {
                return Err(PolicyError::DuplicateTarget(d.target.to_string()));
            }
        }
        Ok(TypeRangePolicy { decls })
    }

    pub fn decls(&self) -> &[RangeDecl] {
        &self.decls
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }
}

/// Memory the program must not write: `[lo, hi]` plus the flag cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
pub struct ProtectedRegion {
    pub lo: u8,
    pub hi: u8,
}

impl Default for ProtectedRegion {
    fn default() -> Self {
        ProtectedRegion { lo: 0, hi: 15 }
    }
}

impl ProtectedRegion {
    pub fn new(lo: u8, hi: u8) -> Result<ProtectedRegion, PolicyError> {
        if lo > hi {
            return Err(PolicyError::EmptyRange(format!("protected [{lo},{hi}]")));
        }
        Ok(ProtectedRegion { lo, hi })
    }

    pub fn covers(&self, addr: u8) -> bool {
        (self.lo..=self.hi).contains(&addr) || addr == FLAG_ADDR
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Writer {
    Process(String),
    Supervisor,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WriteEvent {
    pub writer: Writer,
    pub addr: u8,
    pub tick: u64,
}

/// One RangeViolation per declared target whose current value is out of range.
pub fn check_snapshot(
    policy: &TypeRangePolicy,
    pid: &str,
    state: &VmState,
    severities: &SeverityTable,
) -> Vec<SecurityReport> {
    policy
        .decls
        .iter()
        .filter_map(|d| {
            let value = d.target.read(state);
            (value < d.lo || value > d.hi).then(|| {
                SecurityReport::new(
                    ReportKind::RangeViolation,
                    state.tick,
                    pid,
                    format!(
                        "target={} value={value} range=[{},{}]",
                        d.target, d.lo, d.hi
                    ),
                    severities,
                )
            })
        })
        .collect()
}

/// A program write into the protected region or the flag cell is a violation;
/// supervisor writes never are.
pub fn check_write(
    region: &ProtectedRegion,
    write: &WriteEvent,
    severities: &SeverityTable,
) -> Option<SecurityReport> {
    let Writer::Process(pid) = &write.writer else {
        return None;
    };
    region.covers(write.addr).then(|| {
        SecurityReport::new(
            ReportKind::MemoryStructureViolation,
            write.tick,
            pid,
            format!("addr={} region=[{},{}]", write.addr, region.lo, region.hi),
            severities,
        )
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("bad range target {0:?}; expected r0..r7 or mem[0..255]")]
    BadTarget(String),
    #[error("empty range for {0}")]
    EmptyRange(String),
    #[error("duplicate range target {0}")]
    DuplicateTarget(String),
    #[error("bad severity override: {0}")]
    BadSeverity(String),
    #[error("bad digest in policy: {0}")]
    BadDigest(String),
    #[error("mac_key_hex must be 64 hex characters")]
    BadMacKey,
    #[error("golden_manifest and expected_pcr_hex must be given together")]
    IncompleteManifest,
    #[error("policy JSON: {0}")]
    Json(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeSpec {
    target: String,
    lo: u64,
    hi: u64,
}

/// Policy file as written on disk.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    #[serde(default)]
    ranges: Vec<RangeSpec>,
    #[serde(default)]
    protected: Option<ProtectedRegion>,
    #[serde(default)]
    severities: BTreeMap<String, u64>,
    #[serde(default)]
    golden_manifest: Option<Vec<Measurement>>,
    #[serde(default)]
    expected_pcr_hex: Option<String>,
    #[serde(default)]
    mac_key_hex: Option<String>,
}

/// A loaded policy.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Policy {
    pub ranges: TypeRangePolicy,
    pub protected: ProtectedRegion,
    pub severities: SeverityTable,
    pub manifest: Option<GoldenManifest>,
    pub mac_key: Option<MacKey>,
}

impl Policy {
    pub fn from_json(text: &str) -> Result<Policy, PolicyError> {
        let file: PolicyFile =
            serde_json::from_str(text).map_err(|e| PolicyError::Json(e.to_string()))?;
        let decls = file
            .ranges
            .iter()
            .map(|r| {
                Ok(RangeDecl {
                    target: r.target.parse()?,
                    lo: r.lo,
                    hi: r.hi,
                })
            })
            .collect::<Result<Vec<_>, PolicyError>>()?;
        let protected = match file.protected {
            Some(p) => ProtectedRegion::new(p.lo, p.hi)?,
            None => ProtectedRegion::default(),
        };
        let overrides = file
            .severities
            .iter()
            .map(|(k, v)| {
                k.parse::<ReportKind>()
                    .map(|kind| (kind, *v))
                    .map_err(|e| PolicyError::BadSeverity(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let severities = SeverityTable::with_overrides(overrides)
            .map_err(|e| PolicyError::BadSeverity(e.to_string()))?;
        let manifest = match (file.golden_manifest, file.expected_pcr_hex) {
            (Some(entries), Some(pcr)) => Some(GoldenManifest {
                entries,
                expected_pcr: Digest::from_hex(&pcr)
                    .map_err(|e| PolicyError::BadDigest(e.to_string()))?,
            }),
            (None, None) => None,
            _ => return Err(PolicyError::IncompleteManifest),
        };
        let mac_key = file
            .mac_key_hex
            .map(|k| MacKey::from_hex(&k).ok_or(PolicyError::BadMacKey))
            .transpose()?;
        Ok(Policy {
            ranges: TypeRangePolicy::new(decls)?,
            protected,
            severities,
            manifest,
            mac_key,
        })
    }
}
