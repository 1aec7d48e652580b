use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use defectlab_core::full2d_check::{self, PerturbationField};
use defectlab_core::mode_analysis::{self, HardyFactors, Sector};
use defectlab_core::model::spectral_scale;
use defectlab_core::radial_solver::{self, origin_amplitude, Profile};
use defectlab_core::stability_radial::{self, random_compact_sample};
use defectlab_core::{bulk_constants, minima_of_f, Domain, FormError, Regime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Analysis, RunConfig, SweepAxis};
use crate::error::RunError;
use crate::report::{
    IdentityCheck, ProfileSummary, RunReport, SpectrumSummary, Verdict, SCHEMA_VERSION,
};

/// Relative tolerance for every algebraic identity check.
pub const IDENTITY_TOL: f64 = 1e-8;
/// Eigenvalues above −SPECTRAL_TOL·scale count as nonnegative.
pub const SPECTRAL_TOL: f64 = 1e-8;
/// Relative tolerance of the fitted far-field coefficients.
pub const ASYMPTOTIC_TOL: f64 = 0.05;
/// Profiles of one uniqueness cluster agree to this many s₊.
pub const UNIQUENESS_TOL: f64 = 1e-8;

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.0.insert(stage.into(), t.elapsed().as_secs_f64());
        out
    }
}

fn summarize(s: &stability_radial::SpectrumResult) -> SpectrumSummary {
    SpectrumSummary {
        form: s.label.to_string(),
        eigenvalues: s.eigenvalues.clone(),
        residuals: s.residuals.clone(),
        extension: s.extension,
        scale: s.scale,
    }
}

fn draw_seed(base: u64, tag: u64, i: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(tag << 32)
        .wrapping_add(i as u64)
}

/// Solve, then run every requested analysis on the profile.
pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    config.validate()?;
    let params = config.params;
    let mut timer = Timer(BTreeMap::new());
    let opts = config.solver_options();
    let profile = timer
        .time("solve", || radial_solver::solve(&params, &opts))
        .map_err(|e| RunError::solver("solve", e))?;
    let bulk = bulk_constants(&params);
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        bulk,
        minima: minima_of_f(&params),
        profile: ProfileSummary {
            r_eff: profile.r_eff(),
            n_nodes: profile.n_nodes(),
            newton_iterations: profile.newton_iterations,
            residual_norm: profile.residual_norm,
            u_origin_slope: origin_amplitude(&profile),
        },
        diagnostics: None,
        spectra: vec![],
        mode_scan: vec![],
        kernel: None,
        check2d: None,
        uniqueness: None,
        identities: vec![],
        verdicts: vec![],
        verdict: String::new(),
        artifacts: vec![],
        wall_times: BTreeMap::new(),
    };
    let mut files: Vec<(String, String)> = vec![("profile.csv".into(), profile.to_csv())];
    let stable_regime = bulk.regime != Regime::SuperCritical;

    if config.wants(Analysis::Diagnose) {
        let d = timer.time("diagnose", || radial_solver::diagnose(&profile));
        let m = &d.monotonicity;
        report.verdicts.push(Verdict {
            name: "monotone_profile".into(),
            operation: "diagnose".into(),
            expectation: m.expected.clone(),
            measured: m.worst_u_violation.max(m.worst_v_violation),
            tolerance: m.derivative_tol,
            pass: m.ok,
        });
        if let Some(ok) = d.critical_v_constant_ok {
            report.verdicts.push(Verdict {
                name: "critical_v_constant".into(),
                operation: "diagnose".into(),
                expectation: "v = -s+/sqrt(6) everywhere".into(),
                measured: d.max_v_deviation / bulk.s_plus,
                tolerance: radial_solver::CRITICAL_V_TOL,
                pass: ok,
            });
        }
        if let (Some(pe), Some(qe)) = (d.p1_rel_err, d.q1_rel_err) {
            let q_err = if bulk.regime == Regime::Critical {
                0.0
            } else {
                qe
            };
            report.verdicts.push(Verdict {
                name: "far_field_coefficients".into(),
                operation: "diagnose/fit_asymptotics".into(),
                expectation: "fitted (p1, q1) match the closed form".into(),
                measured: pe.max(q_err),
                tolerance: ASYMPTOTIC_TOL,
                pass: pe.max(q_err) <= ASYMPTOTIC_TOL,
            });
        }
        report.verdicts.push(Verdict {
            name: "cone_and_bounds".into(),
            operation: "diagnose".into(),
            expectation: "u > 0, v < 0, sqrt(3) v + u < 0 and box bounds in the interior".into(),
            measured: 0.0,
            tolerance: 0.0,
            pass: d.sign_ok && d.box_bounds_ok && d.sqrt3_inequality_ok,
        });
        report.diagnostics = Some(d);
    }

    if config.wants(Analysis::Stability) {
        timer.time("stability", || {
            stability_stage(config, &profile, &mut report, &mut files)
        })?;
    }
    if config.wants(Analysis::Modes) {
        timer.time("modes", || {
            modes_stage(config, &profile, &mut report, &mut files)
        })?;
    }
    if config.wants(Analysis::Check2d) {
        timer.time("check2d", || {
            check2d_stage(config, &profile, &mut report, &mut files)
        })?;
    }
    if config.wants(Analysis::Uniqueness) {
        let u = timer
            .time("uniqueness", || {
                stability_radial::uniqueness_probe(
                    &params,
                    &opts,
                    config.uniqueness_starts,
                    config.seed,
                )
            })
            .map_err(|e| RunError::form("uniqueness", e))?;
        if stable_regime {
            let dev = u.max_pairwise_deviation / bulk.s_plus;
            report.verdicts.push(Verdict {
                name: "unique_profile".into(),
                operation: "uniqueness_probe".into(),
                expectation: "all starts converge to one profile".into(),
                measured: dev,
                tolerance: UNIQUENESS_TOL,
                pass: u.failures.is_empty() && u.distinct_count == 1 && dev <= UNIQUENESS_TOL,
            });
        }
        report.uniqueness = Some(u);
    }

    report.verdict = if report.all_pass() { "pass" } else { "fail" }.into();
    report.wall_times = timer.0;
    if let Some(dir) = &config.out {
        write_outputs(dir, &mut report, &files)?;
    }
    Ok(report)
}

fn stability_stage(
    config: &RunConfig,
    profile: &Profile,
    report: &mut RunReport,
    files: &mut Vec<(String, String)>,
) -> Result<(), RunError> {
    let err = |e: FormError| RunError::form("stability", e);
    let form = stability_radial::assemble_b(profile).map_err(err)?;
    let spec = stability_radial::lowest_spectrum(&form, 3).map_err(err)?;
    files.push(("b_eigenvectors.csv".into(), spec.eigenvectors_csv()));
    if report.bulk.regime != Regime::SuperCritical {
        report.verdicts.push(Verdict {
            name: "radial_strict_stability".into(),
            operation: "lowest_spectrum(B)".into(),
            expectation: "lambda_min(B) > 0".into(),
            measured: spec.lambda_min(),
            tolerance: 0.0,
            pass: spec.lambda_min() > 0.0,
        });
    }
    report.spectra.push(summarize(&spec));
    let disc: Vec<f64> = (0..config.draws)
        .map(|i| {
            let xi = random_compact_sample(profile, draw_seed(config.seed, 1, 2 * i));
            let eta = random_compact_sample(profile, draw_seed(config.seed, 1, 2 * i + 1));
            stability_radial::hardy_certificate_b(profile, &xi, &eta).map(|h| h.discrepancy())
        })
        .collect::<Result<_, _>>()
        .map_err(err)?;
    report.identities.push(IdentityCheck::new(
        "hardy_b",
        "hardy_certificate_b",
        &disc,
        IDENTITY_TOL,
    ));
    Ok(())
}

fn modes_stage(
    config: &RunConfig,
    profile: &Profile,
    report: &mut RunReport,
    files: &mut Vec<(String, String)>,
) -> Result<(), RunError> {
    let err = |e: FormError| RunError::form("modes", e);
    let k = profile.params.k;
    let ak = k.abs();
    let scale = spectral_scale(&profile.params);
    let scan =
        mode_analysis::mode_scan(profile, 0..=8.max(ak + 2), -2..=3.max(ak + 2)).map_err(err)?;
    files.push((
        "mode_scan.json".into(),
        serde_json::to_string_pretty(&scan.entries).expect("serializable"),
    ));
    let min_of = |s: Sector| {
        scan.entries
            .iter()
            .filter(|e| e.sector == s)
            .map(|e| e.lambda_min)
            .fold(f64::INFINITY, f64::min)
    };
    let (v1, v2) = (min_of(Sector::V1), min_of(Sector::V2));
    if ak == 1 {
        report.verdicts.push(Verdict {
            name: "mode_positivity".into(),
            operation: "mode_scan".into(),
            expectation: "lambda_min(P_m) >= -tol*scale and lambda_min(V2 pairs) > 0".into(),
            measured: v1.min(v2),
            tolerance: SPECTRAL_TOL * scale,
            pass: v1 >= -SPECTRAL_TOL * scale && v2 > 0.0,
        });
        let bounds: Vec<f64> = (2..=4)
            .map(|m| mode_analysis::hardy_bound_m(profile, m))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let worst = bounds.iter().copied().fold(f64::INFINITY, f64::min);
        report.verdicts.push(Verdict {
            name: "inverse_square_bound".into(),
            operation: "hardy_bound_m (m = 2..4)".into(),
            expectation: "P_m >= int |w|^2 / r dr for m >= 2".into(),
            measured: worst,
            tolerance: 1e-6,
            pass: worst >= 1.0 - 1e-6,
        });
        let kc = mode_analysis::kernel_check_m1(profile).map_err(err)?;
        report.kernel = Some(kc);
    } else {
        let lam = scan.lowest.lambda_min();
        report.verdicts.push(Verdict {
            name: "higher_winding_instability".into(),
            operation: "mode_scan".into(),
            expectation: "some scanned form has lambda_min < 0".into(),
            measured: lam,
            tolerance: SPECTRAL_TOL * scale,
            pass: lam < -SPECTRAL_TOL * scale,
        });
    }
    report.spectra.push(summarize(&scan.lowest));
    report.mode_scan = scan.entries;

    let sample = |i: usize| random_compact_sample(profile, draw_seed(config.seed, 2, i));
    let p0: Vec<f64> = (0..config.draws)
        .map(|i| {
            mode_analysis::split_p0(
                profile,
                &sample(3 * i),
                &sample(3 * i + 1),
                &sample(3 * i + 2),
            )
            .map(|s| s.discrepancy())
        })
        .collect::<Result<_, _>>()
        .map_err(err)?;
    report.identities.push(IdentityCheck::new(
        "p0_split",
        "split_p0",
        &p0,
        IDENTITY_TOL,
    ));
    if ak == 1 && report.bulk.regime != Regime::Critical {
        let mut split = Vec::new();
        let mut sos = Vec::new();
        for i in 0..config.draws {
            let f = HardyFactors {
                eta: sample(1000 + 3 * i),
                xi: sample(1001 + 3 * i),
                zeta: sample(1002 + 3 * i),
            };
            for m in 1..=3 {
                let h = mode_analysis::hardy_split_jm_im(profile, m, &f).map_err(err)?;
                split.push(h.split_discrepancy());
                sos.push(h.sos_discrepancy());
            }
        }
        report.identities.push(IdentityCheck::new(
            "jm_im_split",
            "hardy_split_jm_im (m = 1..3)",
            &split,
            IDENTITY_TOL,
        ));
        report.identities.push(IdentityCheck::new(
            "im_sum_of_squares",
            "hardy_split_jm_im (m = 1..3)",
            &sos,
            IDENTITY_TOL,
        ));
    }
    Ok(())
}

fn check2d_stage(
    config: &RunConfig,
    profile: &Profile,
    report: &mut RunReport,
    files: &mut Vec<(String, String)>,
) -> Result<(), RunError> {
    let c = &config.check2d;
    let err = |e| RunError::field("check2d", e);
    let rep = full2d_check::check_2d(
        profile,
        c.n_phi,
        c.band_limit,
        c.draws,
        draw_seed(config.seed, 3, 0),
    )
    .map_err(err)?;
    let disc = vec![rep.max_discrepancy; rep.draws];
    report.identities.push(IdentityCheck::new(
        "mode_sum",
        "mode_sum_check",
        &disc,
        IDENTITY_TOL,
    ));
    let split = vec![rep.v1_v2_split_discrepancy; rep.draws];
    report
        .identities
        .push(IdentityCheck::new("v1_v2_split", "l_direct", &split, 1e-10));
    if profile.params.k.abs() == 1 {
        let scale = spectral_scale(&profile.params);
        report.verdicts.push(Verdict {
            name: "second_variation_nonnegative".into(),
            operation: "l_direct on random band-limited fields".into(),
            expectation: "L[Q](P) >= -tol*scale".into(),
            measured: rep.min_direct,
            tolerance: SPECTRAL_TOL * scale,
            pass: rep.min_direct >= -SPECTRAL_TOL * scale,
        });
    }
    if config.export_fields {
        let q = full2d_check::reconstruct_q(profile, c.n_phi).map_err(err)?;
        files.push(("q_field.vtk".into(), q.to_vtk()));
        let p =
            PerturbationField::random(profile, c.n_phi, c.band_limit, draw_seed(config.seed, 3, 0))
                .map_err(err)?;
        files.push(("perturbation.csv".into(), p.to_csv()));
    }
    report.check2d = Some(rep);
    Ok(())
}

fn write_outputs(
    dir: &Path,
    report: &mut RunReport,
    files: &[(String, String)],
) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
        report.artifacts.push(name.clone());
    }
    report.artifacts.push("report.json".into());
    fs::write(dir.join("report.json"), report.to_json())?;
    Ok(())
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub lambda_min_radial: Option<f64>,
    pub lambda_min_v1: Option<f64>,
    pub lambda_min_v2: Option<f64>,
    pub q1_hat: Option<f64>,
    pub monotonicity: Option<String>,
    pub kernel_rayleigh: Option<f64>,
    pub error: Option<String>,
}

pub fn apply_axis(base: &RunConfig, axis: SweepAxis, value: f64) -> Result<RunConfig, RunError> {
    let mut c = base.clone();
    c.sweep = None;
    c.analyses.retain(|a| *a != Analysis::Sweep);
    c.out = None;
    let int = |x: f64| -> Result<i64, RunError> {
        if x.fract() == 0.0 && x.is_finite() {
            Ok(x as i64)
        } else {
            Err(RunError::Config(format!(
                "{} needs integer values, got {x}",
                axis.name()
            )))
        }
    };
    match axis {
        SweepAxis::B2 => c.params.b2 = value,
        SweepAxis::Radius => match c.params.domain {
            Domain::WholePlane => c.mesh.r_eff = Some(value),
            Domain::FiniteDisk { .. } => c.params.domain = Domain::FiniteDisk { radius: value },
        },
        SweepAxis::K => c.params.k = int(value)? as i32,
        SweepAxis::NElements => c.mesh.n_elements = int(value)?.max(0) as usize,
    }
    Ok(c)
}

fn row_of(value: f64, r: &Result<RunReport, RunError>) -> SweepRow {
    match r {
        Ok(rep) => {
            let min_of = |s: Sector| {
                rep.mode_scan
                    .iter()
                    .filter(|e| e.sector == s)
                    .map(|e| e.lambda_min)
                    .reduce(f64::min)
            };
            SweepRow {
                value,
                lambda_min_radial: rep
                    .spectra
                    .iter()
                    .find(|s| s.form == "B")
                    .map(|s| s.eigenvalues[0]),
                lambda_min_v1: min_of(Sector::V1),
                lambda_min_v2: min_of(Sector::V2),
                q1_hat: rep.diagnostics.as_ref().and_then(|d| d.q1_hat),
                monotonicity: rep
                    .diagnostics
                    .as_ref()
                    .map(|d| d.monotonicity.verdict.clone()),
                kernel_rayleigh: rep.kernel.map(|k| k.rayleigh),
                error: None,
            }
        }
        Err(e) => SweepRow {
            value,
            lambda_min_radial: None,
            lambda_min_v1: None,
            lambda_min_v2: None,
            q1_hat: None,
            monotonicity: None,
            kernel_rayleigh: None,
            error: Some(e.to_string()),
        },
    }
}

pub struct SweepOutcome {
    pub reports: Vec<Result<RunReport, RunError>>,
    pub rows: Vec<SweepRow>,
}

impl SweepOutcome {
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        let mut s = String::from("value,lambda_min_radial,lambda_min_v1,lambda_min_v2,q1_hat,monotonicity,kernel_rayleigh,error\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.value,
                opt(r.lambda_min_radial),
                opt(r.lambda_min_v1),
                opt(r.lambda_min_v2),
                opt(r.q1_hat),
                r.monotonicity.clone().unwrap_or_default().replace(',', ";"),
                opt(r.kernel_rayleigh),
                r.error.clone().unwrap_or_default().replace(',', ";"),
            );
        }
        s
    }
}

/// Independent runs along one axis, at most `jobs` at a time; failures stay per-run.
pub fn sweep(base: &RunConfig, axis: SweepAxis, values: &[f64], jobs: usize) -> SweepOutcome {
    let go = || -> Vec<Result<RunReport, RunError>> {
        values
            .par_iter()
            .map(|&v| apply_axis(base, axis, v).and_then(|c| run(&c)))
            .collect()
    };
    let reports = match rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
    {
        Ok(pool) => pool.install(go),
        Err(_) => go(),
    };
    let rows = values
        .iter()
        .zip(&reports)
        .map(|(&v, r)| row_of(v, r))
        .collect();
    SweepOutcome { reports, rows }
}

/// Writes the sweep table and per-run reports (sequentially) under `dir`.
pub fn write_sweep(dir: &Path, outcome: &SweepOutcome) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep.csv"), outcome.to_csv())?;
    for (i, r) in outcome.reports.iter().enumerate() {
        if let Ok(rep) = r {
            fs::write(dir.join(format!("run_{i:03}.json")), rep.to_json())?;
        }
    }
    Ok(())
}

/// Sign change of q̂₁ between consecutive sweep rows, if any.
pub fn q1_sign_change(rows: &[SweepRow]) -> Option<(f64, f64)> {
    rows.windows(2)
        .find_map(|w| match (w[0].q1_hat, w[1].q1_hat) {
            (Some(a), Some(b)) if a * b < 0.0 => Some((w[0].value, w[1].value)),
            _ => None,
        })
}
