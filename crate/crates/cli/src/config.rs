use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use defectlab_core::fem::Grading;
use defectlab_core::{Domain, ModelParams, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::error::RunError;

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    Hash,
    PartialOrd,
    Ord,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Diagnose,
    Stability,
    Modes,
    Check2d,
    Uniqueness,
    Sweep,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Diagnose => "diagnose",
            Analysis::Stability => "stability",
            Analysis::Modes => "modes",
            Analysis::Check2d => "check2d",
            Analysis::Uniqueness => "uniqueness",
            Analysis::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    B2,
    #[value(name = "R")]
    #[serde(rename = "R")]
    Radius,
    K,
    NElements,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::B2 => "b2",
            SweepAxis::Radius => "R",
            SweepAxis::K => "k",
            SweepAxis::NElements => "n_elements",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Textual grading: `uniform`, `geometric:<ratio>` or `total:<ratio>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradingArg(pub Grading);

impl FromStr for GradingArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let ratio = |x: &str| {
            x.parse::<f64>()
                .map_err(|e| format!("bad grading ratio {x:?}: {e}"))
        };
        match s.split_once(':') {
            None if s == "uniform" => Ok(GradingArg(Grading::Uniform)),
            Some(("geometric", r)) => Ok(GradingArg(Grading::Geometric { ratio: ratio(r)? })),
            Some(("total", r)) => Ok(GradingArg(Grading::GeometricTotal { ratio: ratio(r)? })),
            _ => Err(format!(
                "grading must be uniform, geometric:<ratio> or total:<ratio>, got {s:?}"
            )),
        }
    }
}

impl fmt::Display for GradingArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Grading::Uniform => write!(f, "uniform"),
            Grading::Geometric { ratio } => write!(f, "geometric:{ratio}"),
            Grading::GeometricTotal { ratio } => write!(f, "total:{ratio}"),
        }
    }
}

/// `inf` selects the whole plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusArg(pub Domain);

impl FromStr for RadiusArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("inf") {
            return Ok(RadiusArg(Domain::WholePlane));
        }
        let r: f64 = s.parse().map_err(|e| format!("bad radius {s:?}: {e}"))?;
        if r.is_infinite() {
            Ok(RadiusArg(Domain::WholePlane))
        } else {
            Ok(RadiusArg(Domain::FiniteDisk { radius: r }))
        }
    }
}

impl fmt::Display for RadiusArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Domain::WholePlane => write!(f, "inf"),
            Domain::FiniteDisk { radius } => write!(f, "{radius}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshConfig {
    pub n_elements: usize,
    pub grading: Grading,
    pub degree: usize,
    /// Truncation radius for whole-plane runs.
    pub r_eff: Option<f64>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            n_elements: 400,
            grading: Grading::default(),
            degree: 6,
            r_eff: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            max_newton: d.max_newton,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Check2dConfig {
    pub n_phi: usize,
    pub band_limit: usize,
    pub draws: usize,
}

impl Default for Check2dConfig {
    fn default() -> Self {
        Self {
            n_phi: 32,
            band_limit: 6,
            draws: 5,
        }
    }
}

/// Everything a run depends on; a run is reproducible from this alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub params: ModelParams,
    pub mesh: MeshConfig,
    pub solver: SolverConfig,
    pub analyses: Vec<Analysis>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Random draws per identity check.
    pub draws: usize,
    pub check2d: Check2dConfig,
    pub uniqueness_starts: usize,
    /// Write the Q-field VTK and perturbation CSV from check2d.
    pub export_fields: bool,
    pub sweep: Option<SweepSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams {
                a2: 1.0,
                b2: 1.0,
                c2: 1.0,
                k: 1,
                domain: Domain::FiniteDisk { radius: 10.0 },
            },
            mesh: MeshConfig::default(),
            solver: SolverConfig::default(),
            analyses: vec![Analysis::Diagnose],
            out: None,
            seed: 0,
            draws: 20,
            check2d: Check2dConfig::default(),
            uniqueness_starts: 8,
            export_fields: false,
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        self.params
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))?;
        if let Some(r) = self.mesh.r_eff {
            if !(r.is_finite() && r > 0.0) {
                return Err(RunError::Config(format!("r_eff must be positive, got {r}")));
            }
        }
        if !(self.solver.tol.is_finite() && self.solver.tol > 0.0) {
            return Err(RunError::Config(format!(
                "tol must be positive, got {}",
                self.solver.tol
            )));
        }
        if self.analyses.contains(&Analysis::Sweep) && self.sweep.is_none() {
            return Err(RunError::Config(
                "sweep analysis needs an axis and values".into(),
            ));
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            n_elements: self.mesh.n_elements,
            grading: self.mesh.grading,
            degree: self.mesh.degree,
            tol: self.solver.tol,
            max_newton: self.solver.max_newton,
            truncation_radius: self.mesh.r_eff,
            ..Default::default()
        }
    }

    pub fn wants(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }

    /// Flags that parse back into this config under `defectlab run`.
    pub fn to_args(&self) -> Vec<String> {
        let p = &self.params;
        let mut a = vec![
            format!("--a2={}", p.a2),
            format!("--b2={}", p.b2),
            format!("--c2={}", p.c2),
            format!("--k={}", p.k),
            format!("--radius={}", RadiusArg(p.domain)),
            format!("--n-elements={}", self.mesh.n_elements),
            format!("--grading={}", GradingArg(self.mesh.grading)),
            format!("--degree={}", self.mesh.degree),
            format!("--tol={}", self.solver.tol),
            format!("--max-newton={}", self.solver.max_newton),
            format!("--seed={}", self.seed),
            format!("--draws={}", self.draws),
            format!("--n-phi={}", self.check2d.n_phi),
            format!("--band-limit={}", self.check2d.band_limit),
            format!("--check-draws={}", self.check2d.draws),
            format!("--starts={}", self.uniqueness_starts),
        ];
        if let Some(r) = self.mesh.r_eff {
            a.push(format!("--r-eff={r}"));
        }
        let names: Vec<&str> = self.analyses.iter().map(|x| x.name()).collect();
        a.push(format!("--analyses={}", names.join(",")));
        if let Some(o) = &self.out {
            a.push(format!("--out={}", o.display()));
        }
        if self.export_fields {
            a.push("--export-fields".into());
        }
        if let Some(s) = &self.sweep {
            a.push(format!("--axis={}", s.axis.name()));
            if !s.values.is_empty() {
                let v: Vec<String> = s.values.iter().map(|x| x.to_string()).collect();
                a.push(format!("--values={}", v.join(",")));
            }
        }
        a
    }
}
