use std::fs;
use std::io::Write;
use std::path::Path;

use fibration_forge::fibration::{CheckSummary, VerificationReport};
use fibration_forge::ForgeError;
use serde::Serialize;
use serde_json::Value;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Exit code for a library error.
pub fn exit_code(e: &ForgeError) -> i32 {
    match e {
        ForgeError::InvalidInput(_) => EXIT_INPUT,
        ForgeError::Mismatch { .. } | ForgeError::ExtensionFailed { .. } => EXIT_VERIFY,
        _ => EXIT_DOMAIN,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: &'static str,
    /// `null` when the check has no finite value.
    pub margin: Option<f64>,
    pub witness: Vec<f64>,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, margin: f64, witness: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            status: if passed { "pass" } else { "fail" },
            margin: margin.is_finite().then_some(margin),
            witness: witness.into_iter().map(|w| if w.is_finite() { w } else { 0.0 }).collect(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == "pass"
    }

    fn from_summary(c: &CheckSummary) -> Self {
        Self::new(c.name, c.passed(), c.margin, c.witness.clone())
    }
}

pub fn verification_checks(r: &VerificationReport) -> Vec<Check> {
    r.checks.iter().map(Check::from_summary).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub version: &'static str,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn new(command: Value, seed: u64) -> Self {
        Self {
            command,
            checks: Vec::new(),
            pass: true,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            results: None,
            error: None,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.passed();
        self.checks.push(check);
    }

    pub fn fail_with(&mut self, error: String) {
        self.pass = false;
        self.error = Some(error);
    }

    pub fn to_json(&self) -> String {
        fibration_forge::io::to_json_string(self)
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
