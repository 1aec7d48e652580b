//! Acceptance suite: one PASS/FAIL line per criterion, tolerances and time
//! budgets fixed below. The table goes to stderr even when output is captured.

use std::io::Write;
use std::time::Instant;

use defectlab::{run, RunConfig};
use defectlab_core::full2d_check::check_2d;
use defectlab_core::mode_analysis::{
    default_scan, hardy_split_jm_im, kernel_check_m1, mode_scan, split_p0, HardyFactors, Sector,
};
use defectlab_core::model::spectral_scale;
use defectlab_core::radial_solver::{diagnose, solve};
use defectlab_core::stability_radial::{
    assemble_b, hardy_certificate_b, lowest_spectrum, random_compact_sample, uniqueness_probe,
};
use defectlab_core::{bulk_constants, Domain, ModelParams, Profile, Regime, SolverOptions};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT6: f64 = 2.449_489_742_783_178;

/// Sub-, critical and supercritical parameter sets (a², b², c²).
const REGIMES: [(f64, f64, f64); 3] = [(1.0, 1.0, 1.0), (1.0, SQRT3, 1.0), (0.1, 2.0, 1.0)];

fn params(a2: f64, b2: f64, c2: f64, k: i32, domain: Domain) -> ModelParams {
    ModelParams::new(a2, b2, c2, k, domain).unwrap()
}

fn disk(radius: f64) -> Domain {
    Domain::FiniteDisk { radius }
}

fn solved(p: &ModelParams, n: usize, r_eff: Option<f64>) -> Profile {
    solve(
        p,
        &SolverOptions {
            n_elements: n,
            truncation_radius: r_eff,
            ..Default::default()
        },
    )
    .unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Critical regime: v ≡ −s₊/√6 to 1e−8·s₊ (R = 20, N = 2000).
fn c1() -> Outcome {
    let p = params(1.0, SQRT3, 1.0, 1, disk(20.0));
    let prof = solved(&p, 2000, None);
    let s = bulk_constants(&p).s_plus;
    let dev = prof
        .v
        .iter()
        .fold(0.0f64, |m, &v| m.max((v + s / SQRT6).abs()))
        / s;
    outcome(
        dev <= 1e-8,
        format!("max|v + s+/sqrt6|/s+ = {dev:.2e} (tol 1e-8)"),
    )
}

/// Monotone profiles: u' ≥ 0 and v' with the regime's sign at every interior node, to 1e−10·s₊.
fn c2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut all_ok = true;
    for (a2, b2, c2) in REGIMES {
        let p = params(a2, b2, c2, 1, disk(20.0));
        let prof = solved(&p, 400, None);
        let bc = bulk_constants(&p);
        let n = prof.n_nodes();
        let tol = 1e-10 * bc.s_plus;
        for i in 1..n - 1 {
            let (du, dv) = (prof.du[i], prof.dv[i]);
            let v_bad = match bc.regime {
                Regime::SubCritical => -dv,
                Regime::Critical => dv.abs(),
                Regime::SuperCritical => dv,
            };
            let bad = (-du).max(v_bad).max(0.0) / bc.s_plus;
            worst = worst.max(bad);
            all_ok &= bad * bc.s_plus <= tol;
        }
        all_ok &= diagnose(&prof).monotonicity.ok;
    }
    outcome(
        all_ok,
        format!("worst wrong-sign derivative {worst:.2e}*s+ (tol 1e-10)"),
    )
}

/// Far field: (p̂₁, q̂₁) within 5% at R_eff = 60, and q̂₁ changes sign across the critical b².
fn c3() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut q1s = vec![];
    for (a2, b2, c2) in [REGIMES[0], REGIMES[2]] {
        let prof = solved(&params(a2, b2, c2, 1, Domain::WholePlane), 400, Some(60.0));
        let d = diagnose(&prof);
        worst = worst.max(d.p1_rel_err.unwrap()).max(d.q1_rel_err.unwrap());
        q1s.push(d.q1_hat.unwrap());
    }
    let flip = q1s[0] * q1s[1] < 0.0;
    outcome(
        worst <= 0.05 && flip,
        format!(
            "max rel err {worst:.2e} (tol 5e-2); q1_hat sub {:.4}, super {:.4}",
            q1s[0], q1s[1]
        ),
    )
}

/// λ_min(B) > 0 for b⁴ ≤ 3a²c², agreeing to 1e−6 across N ∈ {1000, 2000, 4000}.
fn c4() -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for (a2, b2, c2) in [REGIMES[0], REGIMES[1]] {
        let p = params(a2, b2, c2, 1, disk(10.0));
        let lams: Vec<f64> = [1000, 2000, 4000]
            .iter()
            .map(|&n| {
                lowest_spectrum(&assemble_b(&solved(&p, n, None)).unwrap(), 1)
                    .unwrap()
                    .lambda_min()
            })
            .collect();
        let spread = lams
            .iter()
            .map(|l| (l - lams[2]).abs() / lams[2].abs())
            .fold(0.0, f64::max);
        ok &= lams.iter().all(|&l| l > 0.0) && spread <= 1e-6;
        parts.push(format!("lambda_min {:.8} spread {spread:.1e}", lams[2]));
    }
    outcome(ok, format!("{} (tol 1e-6)", parts.join("; ")))
}

/// Hardy rewrites of B, Jₘ + Iₘ (m = 1..3) and 𝒫₀ = B + F̃ over 100 draws each, to 1e−8.
fn c5() -> Outcome {
    let (mut b, mut jm, mut sos, mut p0) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (a2, b2, c2) in [REGIMES[0], REGIMES[2]] {
        let prof = solved(&params(a2, b2, c2, 1, disk(10.0)), 200, None);
        let draw = |s: u64| random_compact_sample(&prof, s);
        for i in 0..100u64 {
            let s = 10 * i;
            b = b.max(
                hardy_certificate_b(&prof, &draw(s), &draw(s + 1))
                    .unwrap()
                    .discrepancy(),
            );
            p0 = p0.max(
                split_p0(&prof, &draw(s + 2), &draw(s + 3), &draw(s + 4))
                    .unwrap()
                    .discrepancy(),
            );
            let f = HardyFactors {
                eta: draw(s + 5),
                xi: draw(s + 6),
                zeta: draw(s + 7),
            };
            for m in 1..=3 {
                let h = hardy_split_jm_im(&prof, m, &f).unwrap();
                jm = jm.max(h.split_discrepancy());
                sos = sos.max(h.sos_discrepancy());
            }
        }
    }
    let worst = b.max(jm).max(sos).max(p0);
    outcome(
        worst <= 1e-8,
        format!("B {b:.1e}, Jm+Im {jm:.1e}, Im sos {sos:.1e}, P0 {p0:.1e} (tol 1e-8)"),
    )
}

/// λ_min(𝒫ₘ) ≥ −1e−8·scale for m = 0..8 and V₂ pairs > 0 for n = −2..3, k = ±1, three regimes.
fn c6() -> Outcome {
    let mut ok = true;
    let (mut v1_min, mut v2_min) = (f64::INFINITY, f64::INFINITY);
    for (a2, b2, c2) in REGIMES {
        for k in [1, -1] {
            let p = params(a2, b2, c2, k, Domain::WholePlane);
            let prof = solved(&p, 200, Some(60.0));
            let scale = spectral_scale(&p);
            let scan = mode_scan(&prof, 0..=8, -2..=3).unwrap();
            for e in &scan.entries {
                match e.sector {
                    Sector::V1 => {
                        ok &= e.lambda_min >= -1e-8 * scale;
                        v1_min = v1_min.min(e.lambda_min / scale);
                    }
                    Sector::V2 => {
                        ok &= e.lambda_min > 0.0;
                        v2_min = v2_min.min(e.lambda_min / scale);
                    }
                }
            }
        }
    }
    outcome(
        ok,
        format!("min lambda/scale: V1 {v1_min:.3e} (tol -1e-8), V2 {v2_min:.3e} (> 0)"),
    )
}

/// Translation triple in 𝒫₁: Rayleigh quotient ∝ R_eff^slope with slope −2 ± 0.3.
fn c7() -> Outcome {
    let p = params(1.0, 1.0, 1.0, 1, Domain::WholePlane);
    let rs = [30.0f64, 60.0, 120.0];
    let qs: Vec<f64> = rs
        .iter()
        .map(|&r| kernel_check_m1(&solved(&p, 300, Some(r))).unwrap().rayleigh)
        .collect();
    if qs.iter().any(|&q| q <= 0.0) {
        return outcome(false, format!("nonpositive quotient {qs:?}"));
    }
    let xs: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = qs.iter().map(|q| q.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    outcome(
        (slope + 2.0).abs() <= 0.3,
        format!(
            "log-log slope {slope:.3} (target -2 +/- 0.3), quotients {:.3e} {:.3e} {:.3e}",
            qs[0], qs[1], qs[2]
        ),
    )
}

/// k = 2 at R_eff = 60 has a negative scanned form; the k = 1 control has none.
fn c8() -> Outcome {
    let k2 = solved(
        &params(1.0, 1.0, 1.0, 2, Domain::WholePlane),
        200,
        Some(60.0),
    );
    let k1 = solved(
        &params(1.0, 1.0, 1.0, 1, Domain::WholePlane),
        200,
        Some(60.0),
    );
    let s2 = default_scan(&k2).unwrap();
    let s1 = default_scan(&k1).unwrap();
    let neg2 = s2.negative_entries(1e-8).len();
    let neg1 = s1.negative_entries(1e-8).len();
    outcome(
        neg2 > 0 && s2.lowest.lambda_min() < 0.0 && neg1 == 0,
        format!(
            "k=2 lowest {:.5} ({neg2} negative forms); k=1 negative forms {neg1}",
            s2.lowest.lambda_min()
        ),
    )
}

/// |ℒ_direct − Σ modes| ≤ 1e−8·(1 + |ℒ|) on 20 random band-limited fields.
fn c9() -> Outcome {
    let prof = solved(&params(1.0, 1.0, 1.0, 1, disk(10.0)), 100, None);
    let rep = check_2d(&prof, 32, 6, 20, 2024).unwrap();
    outcome(
        rep.draws == 20 && rep.max_discrepancy <= 1e-8,
        format!("max discrepancy {:.2e} (tol 1e-8)", rep.max_discrepancy),
    )
}

/// Eight randomized starts collapse to one profile within 1e−8·s₊.
fn c10() -> Outcome {
    let p = params(1.0, 1.0, 1.0, 1, disk(10.0));
    let s = bulk_constants(&p).s_plus;
    let rep = uniqueness_probe(
        &p,
        &SolverOptions {
            n_elements: 200,
            ..Default::default()
        },
        8,
        7,
    )
    .unwrap();
    let dev = rep.max_pairwise_deviation / s;
    outcome(
        rep.converged == 8 && rep.distinct_count == 1 && dev <= 1e-8,
        format!(
            "{} converged, {} cluster(s), max deviation {dev:.2e}*s+ (tol 1e-8)",
            rep.converged, rep.distinct_count
        ),
    )
}

/// Polished min f at a² = 0, b² = c² = 1 is −0.0023148 ± 1e−6, and the report carries
/// its discrepancy against the commonly printed constant.
fn c11() -> Outcome {
    let mut c = RunConfig::default();
    c.params = params(0.0, 1.0, 1.0, 1, disk(10.0));
    // The minimum does not depend on the profile; a light mesh keeps the run short.
    c.mesh.n_elements = 100;
    c.analyses.clear();
    let rep = run(&c).unwrap();
    let m = &rep.minima;
    let err = (m.value + 0.0023148).abs();
    let recorded =
        (m.discrepancy - (m.value - m.printed_constant)).abs() <= 1e-15 && m.discrepancy != 0.0;
    outcome(
        err <= 1e-6 && recorded,
        format!(
            "min f {:.9} (target -0.0023148 +/- 1e-6); printed {:.9}, discrepancy {:.3e}",
            m.value, m.printed_constant, m.discrepancy
        ),
    )
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, f64, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        ("c1  critical-regime exactness", 5.0, c1),
        ("c2  monotone regimes", 15.0, c2),
        ("c3  far-field coefficients", 20.0, c3),
        ("c4  strict radial stability", 30.0, c4),
        ("c5  Hardy identities", 60.0, c5),
        ("c6  mode positivity k = +/-1", 60.0, c6),
        ("c7  translation kernel", 60.0, c7),
        ("c8  instability for |k| > 1", 60.0, c8),
        ("c9  mode-sum identity", 30.0, c9),
        ("c10 uniqueness probe", 60.0, c10),
        ("c11 bulk minimum", 1.0, c11),
    ];
    let mut failed = vec![];
    for (name, budget, f) in criteria {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        let pass = o.pass && secs <= budget;
        // Straight to the stderr handle so the table survives libtest's output capture.
        let _ = writeln!(
            std::io::stderr(),
            "{} {name}: {}; {secs:.2} s (budget {budget} s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
