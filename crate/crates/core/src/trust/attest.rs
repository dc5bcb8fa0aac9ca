//! Simulated measured launch: artifacts are hashed in order and folded into
//! an extend-only register, then compared against a golden manifest.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::digest::Digest;

/// SHA-256 of the exact artifact bytes.
pub fn measure(bytes: &[u8]) -> Digest {
    Digest::of(bytes)
}

/// Extend-only digest register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pcr(Digest);

impl Default for Pcr {
    fn default() -> Self {
        Pcr::genesis()
    }
}

impl Pcr {
    pub fn genesis() -> Pcr {
        Pcr(Digest::ZERO)
    }

    /// `H(pcr || measurement)`.
    #[must_use]
    pub fn extend(&self, measurement: &Digest) -> Pcr {
        Pcr(Digest::of_parts([
            self.0.as_bytes().as_slice(),
            measurement.as_bytes(),
        ]))
    }

    pub fn value(&self) -> Digest {
        self.0
    }
}

impl fmt::Display for Pcr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    #[serde(rename = "sha256_hex")]
    pub digest: Digest,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldenManifest {
    pub entries: Vec<Measurement>,
    pub expected_pcr: Digest,
}

impl GoldenManifest {
    /// The manifest that `artifacts` would verify against.
    pub fn from_artifacts<'a, I>(artifacts: I) -> GoldenManifest
    where
        I: IntoIterator<Item = (&'a str, &'a [u8])>,
    {
        let mut log = MeasurementLog::new();
        for (name, bytes) in artifacts {
            log.measure_and_extend(name, bytes);
        }
        GoldenManifest {
            expected_pcr: log.pcr.value(),
            entries: log.entries,
        }
    }

    /// Policy-format JSON holding `golden_manifest` and `expected_pcr_hex`.
    pub fn to_json(&self) -> String {
        let value = serde_json::json!({
            "golden_manifest": self.entries,
            "expected_pcr_hex": self.expected_pcr.to_hex(),
        });
        serde_json::to_string_pretty(&value).expect("manifest serializes") + "\n"
    }
}

/// Running register plus the ordered measurements folded into it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MeasurementLog {
    pub pcr: Pcr,
    pub entries: Vec<Measurement>,
}

impl MeasurementLog {
    pub fn new() -> MeasurementLog {
        MeasurementLog::default()
    }

    pub fn measure_and_extend(&mut self, name: &str, bytes: &[u8]) -> Digest {
        let digest = measure(bytes);
        self.pcr = self.pcr.extend(&digest);
        self.entries.push(Measurement {
            name: name.to_string(),
            digest,
        });
        digest
    }

    /// `pcr=<hex>` then one `measure <index> <name> <hex>` line per entry.
    pub fn render(&self) -> Vec<String> {
        let mut lines = vec![format!("pcr={}", self.pcr)];
        lines.extend(
            self.entries
                .iter()
                .enumerate()
                .map(|(i, m)| format!("measure {i} {} {}", m.name, m.digest)),
        );
        lines
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mismatch {
    /// Artifact at `index` differs from the manifest entry at that position.
    Entry {
        index: usize,
        name: String,
        expected: Option<Measurement>,
        actual: Digest,
    },
    /// The manifest lists more artifacts than were presented.
    Missing {
        index: usize,
        name: String,
    },
    FinalPcr {
        expected: Digest,
        actual: Digest,
    },
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::Entry {
                index,
                name,
                expected: Some(e),
                actual,
            } => write!(
                f,
                "artifact {index} {name} measured {actual}, manifest expects {} {}",
                e.name, e.digest
            ),
            Mismatch::Entry {
                index,
                name,
                expected: None,
                actual,
            } => write!(f, "artifact {index} {name} ({actual}) not in manifest"),
            Mismatch::Missing { index, name } => {
                write!(f, "manifest entry {index} {name} was not presented")
            }
            Mismatch::FinalPcr { expected, actual } => {
                write!(f, "final pcr {actual} differs from expected {expected}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaunchOutcome {
    pub log: MeasurementLog,
    pub mismatches: Vec<Mismatch>,
}

impl LaunchOutcome {
    pub fn is_ok(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// Indices of presented artifacts whose own measurement did not match.
    pub fn mismatched_artifacts(&self) -> Vec<usize> {
        self.mismatches
            .iter()
            .filter_map(|m| match m {
                Mismatch::Entry { index, .. } => Some(*index),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttestError {
    #[error("no golden manifest loaded")]
    ManifestMissing,
}

/// Measures `artifacts` in order into a fresh register and compares every
/// measurement and the final register value with the manifest.
pub fn verify_launch(
    manifest: Option<&GoldenManifest>,
    artifacts: &[(String, Vec<u8>)],
) -> Result<LaunchOutcome, AttestError> {
    let manifest = manifest.ok_or(AttestError::ManifestMissing)?;
    let mut log = MeasurementLog::new();
    let mut mismatches = Vec::new();
    for (index, (name, bytes)) in artifacts.iter().enumerate() {
        let actual = log.measure_and_extend(name, bytes);
        let expected = manifest.entries.get(index);
        if expected.is_none_or(|e| e.name != *name || e.digest != actual) {
            mismatches.push(Mismatch::Entry {
                index,
                name: name.clone(),
                expected: expected.cloned(),
                actual,
            });
        }
    }
    for (index, e) in manifest.entries.iter().enumerate().skip(artifacts.len()) {
        mismatches.push(Mismatch::Missing {
            index,
            name: e.name.clone(),
        });
    }
    if log.pcr.value() != manifest.expected_pcr {
        mismatches.push(Mismatch::FinalPcr {
            expected: manifest.expected_pcr,
            actual: log.pcr.value(),
        });
    }
    Ok(LaunchOutcome { log, mismatches })
}
