use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Analysis, GradingArg, RadiusArg, RunConfig, SweepAxis, SweepSpec};
use crate::error::RunError;

#[derive(Debug, Parser)]
#[command(
    name = "defectlab",
    version,
    about = "Radially symmetric Landau-de Gennes point defects: profiles, spectra and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the radial profile only.
    Solve(RunArgs),
    /// Solve and check signs, monotonicity and far-field decay.
    Diagnose(RunArgs),
    /// Lowest spectrum of the radial second variation plus its Hardy identity.
    Stability(RunArgs),
    /// Fourier-mode scan, kernel check and mode identities.
    Modes(RunArgs),
    /// Direct 2-D evaluation of the second variation against the mode sum.
    Check2d(RunArgs),
    /// Multi-start probe for a second radial solution.
    Uniqueness(RunArgs),
    /// Independent runs along one parameter axis.
    Sweep(RunArgs),
    /// Run exactly the analyses listed in --analyses (or the config file).
    Run(RunArgs),
}

impl Command {
    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Solve(a)
            | Command::Diagnose(a)
            | Command::Stability(a)
            | Command::Modes(a)
            | Command::Check2d(a)
            | Command::Uniqueness(a)
            | Command::Sweep(a)
            | Command::Run(a) => a,
        }
    }

    /// Analysis implied by the subcommand (`run` and `solve` imply none).
    pub fn implied(&self) -> Option<Analysis> {
        match self {
            Command::Solve(_) | Command::Run(_) => None,
            Command::Diagnose(_) => Some(Analysis::Diagnose),
            Command::Stability(_) => Some(Analysis::Stability),
            Command::Modes(_) => Some(Analysis::Modes),
            Command::Check2d(_) => Some(Analysis::Check2d),
            Command::Uniqueness(_) => Some(Analysis::Uniqueness),
            Command::Sweep(_) => Some(Analysis::Sweep),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub a2: Option<f64>,
    #[arg(long)]
    pub b2: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    /// Winding index (nonzero integer).
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<i32>,
    /// Disk radius, or `inf` for the whole plane.
    #[arg(long, allow_negative_numbers = true)]
    pub radius: Option<RadiusArg>,
    /// Truncation radius for whole-plane runs.
    #[arg(long)]
    pub r_eff: Option<f64>,
    #[arg(long)]
    pub n_elements: Option<usize>,
    /// `uniform`, `geometric:<ratio>` (per element) or `total:<ratio>` (largest/smallest).
    #[arg(long)]
    pub grading: Option<GradingArg>,
    /// Polynomial degree of the radial elements.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Newton tolerance on the scaled residual.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Newton iterations per solver round.
    #[arg(long)]
    pub max_newton: Option<usize>,
    /// Extra analyses, comma separated (diagnose, stability, modes, check2d, uniqueness, sweep).
    #[arg(long)]
    pub analyses: Option<String>,
    /// Output directory for the report and CSV artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random draws per identity check.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub n_phi: Option<usize>,
    #[arg(long)]
    pub band_limit: Option<usize>,
    /// Random fields in the 2-D check.
    #[arg(long)]
    pub check_draws: Option<usize>,
    /// Starts for the uniqueness probe.
    #[arg(long)]
    pub starts: Option<usize>,
    /// Also write the Q-field VTK and a perturbation CSV.
    #[arg(long)]
    pub export_fields: bool,
    /// Concurrent sweep runs.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum)]
    pub axis: Option<SweepAxis>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub values: Vec<f64>,
}

impl RunArgs {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn to_config(
        &self,
        implied: Option<Analysis>,
        is_run: bool,
    ) -> Result<RunConfig, RunError> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    RunError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| RunError::Config(format!("bad config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let p = &mut c.params;
        if let Some(x) = self.a2 {
            p.a2 = x;
        }
        if let Some(x) = self.b2 {
            p.b2 = x;
        }
        if let Some(x) = self.c2 {
            p.c2 = x;
        }
        if let Some(x) = self.k {
            p.k = x;
        }
        if let Some(x) = self.radius {
            p.domain = x.0;
        }
        if let Some(x) = self.r_eff {
            c.mesh.r_eff = Some(x);
        }
        if let Some(x) = self.n_elements {
            c.mesh.n_elements = x;
        }
        if let Some(x) = self.grading {
            c.mesh.grading = x.0;
        }
        if let Some(x) = self.degree {
            c.mesh.degree = x;
        }
        if let Some(x) = self.tol {
            c.solver.tol = x;
        }
        if let Some(x) = self.max_newton {
            c.solver.max_newton = x;
        }
        if let Some(x) = &self.out {
            c.out = Some(x.clone());
        }
        if let Some(x) = self.seed {
            c.seed = x;
        }
        if let Some(x) = self.draws {
            c.draws = x;
        }
        if let Some(x) = self.n_phi {
            c.check2d.n_phi = x;
        }
        if let Some(x) = self.band_limit {
            c.check2d.band_limit = x;
        }
        if let Some(x) = self.check_draws {
            c.check2d.draws = x;
        }
        if let Some(x) = self.starts {
            c.uniqueness_starts = x;
        }
        if self.export_fields {
            c.export_fields = true;
        }
        if let Some(axis) = self.axis {
            c.sweep = Some(SweepSpec {
                axis,
                values: self.values.clone(),
            });
        } else if !self.values.is_empty() {
            return Err(RunError::Config("--values needs --axis".into()));
        }
        let given = self.analyses.as_deref().map(parse_analyses).transpose()?;
        if is_run {
            if let Some(a) = given {
                c.analyses = a;
            }
        } else {
            let mut list: Vec<Analysis> = implied.into_iter().collect();
            for a in given.iter().flatten() {
                if !list.contains(a) {
                    list.push(*a);
                }
            }
            if implied == Some(Analysis::Sweep) && list.len() == 1 {
                list.extend([Analysis::Diagnose, Analysis::Stability]);
            }
            c.analyses = list;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Comma-separated analysis names; the empty string is the empty list.
pub fn parse_analyses(s: &str) -> Result<Vec<Analysis>, RunError> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            <Analysis as ValueEnum>::from_str(x, true)
                .map_err(|_| RunError::Config(format!("unknown analysis {x:?}")))
        })
        .collect()
}

/// Parsed configuration plus runtime-only settings.
pub struct Invocation {
    pub config: RunConfig,
    pub jobs: usize,
}

pub fn invocation(cli: &Cli) -> Result<Invocation, RunError> {
    let args = cli.command.args();
    let config = args.to_config(
        cli.command.implied(),
        matches!(cli.command, Command::Run(_)),
    )?;
    Ok(Invocation {
        config,
        jobs: args.jobs.unwrap_or(1),
    })
}
