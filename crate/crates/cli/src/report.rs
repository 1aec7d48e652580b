use std::collections::BTreeMap;

use defectlab_core::full2d_check::Check2dReport;
use defectlab_core::mode_analysis::{KernelCheck, ModeScanEntry};
use defectlab_core::radial_solver::DiagnosticsReport;
use defectlab_core::stability_radial::UniquenessReport;
use defectlab_core::{BulkConstants, BulkMinima};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Pass/fail of one qualitative prediction, with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub operation: String,
    pub expectation: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Measured discrepancy of an algebraic identity over random draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub operation: String,
    pub draws: usize,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityCheck {
    pub fn new(name: &str, operation: &str, discrepancies: &[f64], tolerance: f64) -> Self {
        let max = discrepancies.iter().copied().fold(0.0, f64::max);
        Self {
            name: name.into(),
            operation: operation.into(),
            draws: discrepancies.len(),
            max_discrepancy: max,
            tolerance,
            pass: max <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub form: String,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub extension: bool,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub r_eff: f64,
    pub n_nodes: usize,
    pub newton_iterations: usize,
    pub residual_norm: f64,
    pub u_origin_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub bulk: BulkConstants,
    pub minima: BulkMinima,
    pub profile: ProfileSummary,
    pub diagnostics: Option<DiagnosticsReport>,
    pub spectra: Vec<SpectrumSummary>,
    pub mode_scan: Vec<ModeScanEntry>,
    pub kernel: Option<KernelCheck>,
    pub check2d: Option<Check2dReport>,
    pub uniqueness: Option<UniquenessReport>,
    pub identities: Vec<IdentityCheck>,
    pub verdicts: Vec<Verdict>,
    /// "pass" when every verdict and identity passed, else "fail".
    pub verdict: String,
    pub artifacts: Vec<String>,
    /// Seconds per stage; the only nondeterministic part of a report.
    pub wall_times: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass) && self.identities.iter().all(|i| i.pass)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn identity(&self, name: &str) -> Option<&IdentityCheck> {
        self.identities.iter().find(|v| v.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Structural check of an emitted report.
pub fn validate_report_json(text: &str) -> Result<(), String> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let obj = v.as_object().ok_or("report is not an object")?;
    match obj.get("schema_version").and_then(|x| x.as_u64()) {
        Some(x) if x == SCHEMA_VERSION as u64 => {}
        other => {
            return Err(format!(
                "schema_version {other:?}, expected {SCHEMA_VERSION}"
            ))
        }
    }
    for key in [
        "config",
        "bulk",
        "minima",
        "profile",
        "spectra",
        "mode_scan",
        "identities",
        "verdicts",
        "verdict",
        "artifacts",
        "wall_times",
    ] {
        if !obj.contains_key(key) {
            return Err(format!("missing field {key}"));
        }
    }
    for v in obj["verdicts"]
        .as_array()
        .ok_or("verdicts is not an array")?
    {
        for key in ["name", "operation", "tolerance", "pass"] {
            if v.get(key).is_none() {
                return Err(format!("verdict without {key}"));
            }
        }
    }
    for v in obj["identities"]
        .as_array()
        .ok_or("identities is not an array")?
    {
        for key in ["name", "operation", "tolerance", "max_discrepancy", "pass"] {
            if v.get(key).is_none() {
                return Err(format!("identity without {key}"));
            }
        }
    }
    match obj["verdict"].as_str() {
        Some("pass") | Some("fail") => {}
        _ => return Err("verdict must be pass or fail".into()),
    }
    serde_json::from_value::<RunReport>(v)
        .map(|_| ())
        .map_err(|e| e.to_string())
}
