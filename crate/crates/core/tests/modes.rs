mod common;

use common::{params, regimes, simpson, solved, SQRT3};
use defectlab_core::forms::Cutoff;
use defectlab_core::mode_analysis::{
    assemble_pm, assemble_v2_pair, default_scan, hardy_bound_m, hardy_split_jm_im,
    hardy_split_v2_j1, instability_search, kernel_check_m1, mode_scan, pm_value, split_p0,
    translation_triple, v2_lower_bound_check, v2_pair_value, w0_coupling_max, HardyFactors,
    ModeSpec, Sector,
};
use defectlab_core::stability_radial::{lowest_spectrum, random_compact_sample};
use defectlab_core::{bulk_constants, Domain, FormError, Profile, Regime};

const SQRT6: f64 = 2.449_489_742_783_178;

fn whole(a2: f64, b2: f64, c2: f64, k: i32, n: usize) -> Profile {
    solved(&params(a2, b2, c2, k, Domain::WholePlane), n, Some(60.0))
}

fn triple(profile: &Profile, seed: u64) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|i| random_compact_sample(profile, 3 * seed + i))
}

/// 𝒫ₘ from pointwise values of the FE interpolants.
fn pm_oracle(profile: &Profile, m: i32, w: &[Vec<f64>; 3]) -> f64 {
    let p = &profile.params;
    let (a2, b2, c2) = (p.a2, p.b2, p.c2);
    let (am, ak) = (m.abs() as f64, p.k.abs() as f64);
    let sp = &profile.space;
    simpson(profile, 10 * sp.degree(), |e, r| {
        if r == 0.0 {
            return 0.0;
        }
        let (u, _) = sp.eval_in(&profile.u, e, r);
        let (v, _) = sp.eval_in(&profile.v, e, r);
        let (w0, d0) = sp.eval_in(&w[0], e, r);
        let (w1, d1) = sp.eval_in(&w[1], e, r);
        let (w2, d2) = sp.eval_in(&w[2], e, r);
        let dens = d0 * d0
            + d1 * d1
            + d2 * d2
            + am * am / (r * r) * w0 * w0
            + ((am * w1 - ak * w2).powi(2) + (ak * w1 - am * w2).powi(2)) / (r * r)
            + (-a2 - 2.0 * b2 * v / SQRT6 + c2 * (u * u + 3.0 * v * v)) * w0 * w0
            + (-a2 + 2.0 * b2 * v / SQRT6 + c2 * (3.0 * u * u + v * v)) * w1 * w1
            + 4.0 * u * w0 * w1 * (b2 / SQRT6 + c2 * v)
            + (-a2 + 2.0 * b2 * v / SQRT6 + c2 * (u * u + v * v)) * w2 * w2;
        dens * r
    })
}

#[test]
fn zero_triple_and_negative_mode() {
    let prof = common::sub_disk(50);
    let z = vec![0.0; prof.n_nodes()];
    for m in 0..=8 {
        assert_eq!(pm_value(&prof, m, &z, &z, &z), 0.0);
    }
    assert_eq!(v2_pair_value(&prof, 2, &z, &z), 0.0);
    assert!(matches!(
        assemble_pm(&prof, -1, 1),
        Err(FormError::NegativeMode(-1))
    ));
    assert!(matches!(
        assemble_pm(&prof, 1, 2),
        Err(FormError::WindingMismatch { .. })
    ));
}

#[test]
fn pm_matrix_matches_quadrature_oracle() {
    let prof = common::sub_disk(100);
    let form = assemble_pm(&prof, 5, 1).unwrap();
    for seed in 0..5 {
        let w = triple(&prof, seed);
        let x = form.dofs.restrict(&[&w[0], &w[1], &w[2]]);
        let via_matrix = form.value(&x);
        let oracle = pm_oracle(&prof, 5, &w);
        assert!(
            (via_matrix - oracle).abs() <= 1e-8 * oracle.abs(),
            "{via_matrix} vs {oracle}"
        );
    }
}

#[test]
fn mode_positivity_for_unit_winding() {
    for (a2, b2, c2) in regimes() {
        for k in [1, -1] {
            let prof = whole(a2, b2, c2, k, 200);
            let scan = mode_scan(&prof, 0..=8, -2..=3).unwrap();
            let scale = scan.lowest.scale;
            for e in &scan.entries {
                match e.sector {
                    Sector::V1 => assert!(e.lambda_min >= -1e-8 * scale, "{e:?}"),
                    Sector::V2 => assert!(e.lambda_min > 0.0, "{e:?}"),
                }
                assert!(!e.extension_flag);
            }
            assert_eq!(
                scan.entries
                    .iter()
                    .filter(|e| e.sector == Sector::V1)
                    .count(),
                9
            );
            assert!(scan.negative_entries(1e-8).is_empty());
        }
    }
}

#[test]
fn pm_spectrum_increases_with_m() {
    for (a2, b2, c2) in regimes() {
        let prof = whole(a2, b2, c2, 1, 200);
        let lams: Vec<f64> = (1..=8)
            .map(|m| {
                lowest_spectrum(&assemble_pm(&prof, m, 1).unwrap(), 1)
                    .unwrap()
                    .lambda_min()
            })
            .collect();
        assert!(lams.windows(2).all(|w| w[1] >= w[0]), "{lams:?}");
    }
}

/// 𝒫ₘ ≥ ∫ Σ w_l²/r dr for m ≥ 2.
#[test]
fn inverse_square_bound_for_m_at_least_two() {
    for (a2, b2, c2) in regimes() {
        let prof = whole(a2, b2, c2, 1, 200);
        for m in 2..=5 {
            let lam = hardy_bound_m(&prof, m).unwrap();
            assert!(lam >= 1.0 - 1e-8, "m={m}: {lam}");
        }
    }
    assert!(hardy_bound_m(&common::sub_disk(50), 1).is_err());
}

#[test]
fn p0_split_identity() {
    for (a2, b2, c2) in regimes() {
        let prof = solved(&params(a2, b2, c2, 1, common::disk(10.0)), 100, None);
        for seed in 0..100 {
            let w = triple(&prof, 500 + seed);
            let s = split_p0(&prof, &w[0], &w[1], &w[2]).unwrap();
            assert!(s.discrepancy() <= 1e-8, "seed {seed}: {s:?}");
            assert!(s.f_part >= 0.0);
        }
    }
}

#[test]
fn p0_w2_part_on_scaled_bumps() {
    let prof = common::sub_disk(100);
    let bump = random_compact_sample(&prof, 77);
    let w2: Vec<f64> = bump.iter().zip(&prof.u).map(|(b, u)| b * u).collect();
    let z = vec![0.0; prof.n_nodes()];
    let s = split_p0(&prof, &z, &z, &w2).unwrap();
    let sp = &prof.space;
    let oracle = simpson(&prof, 10 * sp.degree(), |e, r| {
        let (u, _) = sp.eval_in(&prof.u, e, r);
        let (_, db) = sp.eval_in(&bump, e, r);
        db * db * u * u * r
    });
    // w₂/u is the interpolant of bump·u divided by u, close to but not exactly the bump.
    assert!(
        (s.f_part - oracle).abs() <= 1e-6 * oracle,
        "{} vs {oracle}",
        s.f_part
    );
    assert!(s.f_part > 0.0 && s.b_part == 0.0);
}

/// Smooth step in log r from 0 at `a` to 1 at `b`.
fn log_ramp(r: f64, a: f64, b: f64) -> f64 {
    if r <= a {
        0.0
    } else if r >= b {
        1.0
    } else {
        (std::f64::consts::FRAC_PI_2 * (r / a).ln() / (b / a).ln())
            .sin()
            .powi(2)
    }
}

/// A window that is 1 on a plateau and switches off logarithmically on the outside.
fn log_window(profile: &Profile, inner: (f64, f64), outer: (f64, f64)) -> Vec<f64> {
    let n = profile.n_nodes();
    let mut w: Vec<f64> = profile
        .r()
        .iter()
        .map(|&r| log_ramp(r, inner.0, inner.1) * (1.0 - log_ramp(r, outer.0, outer.1)))
        .collect();
    for i in [0, 1, n - 2, n - 1] {
        w[i] = 0.0;
    }
    w
}

#[test]
fn constant_zeta_gives_vanishing_w2_part() {
    let prof = solved(
        &params(1.0, 1.0, 1.0, 1, Domain::WholePlane),
        400,
        Some(400.0),
    );
    let z = vec![0.0; prof.n_nodes()];
    let vals: Vec<f64> = [(2.0, 8.0), (4.0, 32.0), (8.0, 256.0)]
        .iter()
        .map(|&outer| {
            let chi = log_window(&prof, (0.1, 0.3), outer);
            let w2: Vec<f64> = chi.iter().zip(&prof.u).map(|(c, u)| c * u).collect();
            split_p0(&prof, &z, &z, &w2).unwrap().f_part
        })
        .collect();
    assert!(vals[0] > vals[1] && vals[1] > vals[2], "{vals:?}");
}

fn factors(profile: &Profile, seed: u64) -> HardyFactors {
    let [eta, xi, zeta] = triple(profile, seed);
    HardyFactors { eta, xi, zeta }
}

#[test]
fn jm_im_split_identities() {
    for (a2, b2, c2) in [(1.0, 1.0, 1.0), (0.1, 2.0, 1.0)] {
        let prof = solved(&params(a2, b2, c2, 1, common::disk(10.0)), 100, None);
        let sub = bulk_constants(&prof.params).regime == Regime::SubCritical;
        for m in 1..=3 {
            for seed in 0..100 {
                let h = hardy_split_jm_im(&prof, m, &factors(&prof, 900 + seed)).unwrap();
                assert!(h.split_discrepancy() <= 1e-8, "m={m} seed={seed}: {h:?}");
                assert!(h.sos_discrepancy() <= 1e-8, "m={m} seed={seed}: {h:?}");
                if sub && m == 2 {
                    assert!(h.j_m >= 0.0 && h.i_m >= 0.0, "{h:?}");
                }
            }
        }
    }
}

#[test]
fn jm_im_guards() {
    let crit = solved(&params(1.0, SQRT3, 1.0, 1, common::disk(10.0)), 50, None);
    let f = factors(&crit, 1);
    assert!(matches!(
        hardy_split_jm_im(&crit, 1, &f),
        Err(FormError::CriticalRegime)
    ));
    let sub = common::sub_disk(50);
    let f = factors(&sub, 1);
    assert!(hardy_split_jm_im(&sub, 0, &f).is_err());
    let k2 = solved(&params(1.0, 1.0, 1.0, 2, common::disk(10.0)), 50, None);
    assert!(matches!(
        hardy_split_jm_im(&k2, 1, &factors(&k2, 1)),
        Err(FormError::NeedsUnitWinding(2))
    ));
}

/// On the translation factors (η, ξ, ζ) = (χ, χ, χ/r) the sum-of-squares
/// integrand of I₁ lives only where χ varies, so J₁ and I₁ shrink as the
/// outer switch-off moves out.
#[test]
fn translation_factors_make_j1_and_i1_small() {
    let prof = solved(
        &params(1.0, 1.0, 1.0, 1, Domain::WholePlane),
        800,
        Some(300.0),
    );
    let r = prof.r().to_vec();
    let mut last = (f64::INFINITY, f64::INFINITY);
    for outer in [(2.0, 8.0), (4.0, 32.0), (8.0, 256.0)] {
        let chi = log_window(&prof, (0.5, 1.5), outer);
        let zeta: Vec<f64> = chi
            .iter()
            .zip(&r)
            .map(|(c, &x)| if x > 0.0 { c / x } else { 0.0 })
            .collect();
        let h = hardy_split_jm_im(
            &prof,
            1,
            &HardyFactors {
                eta: chi.clone(),
                xi: chi.clone(),
                zeta,
            },
        )
        .unwrap();
        assert!(
            h.split_discrepancy() <= 1e-8 && h.sos_discrepancy() <= 1e-8,
            "{h:?} {} {}",
            h.split_discrepancy(),
            h.sos_discrepancy()
        );
        assert!(h.j_m < last.0 && h.i_m < last.1, "{h:?} after {last:?}");
        last = (h.j_m, h.i_m);
    }
}

#[test]
fn critical_regime_decouples_w0() {
    let crit = whole(1.0, SQRT3, 1.0, 1, 100);
    let sub = whole(1.0, 1.0, 1.0, 1, 100);
    for m in 0..=4 {
        assert_eq!(w0_coupling_max(&assemble_pm(&crit, m, 1).unwrap()), 0.0);
        assert!(w0_coupling_max(&assemble_pm(&sub, m, 1).unwrap()) > 1e-3);
    }
}

fn kernel_slope(rs: &[f64], qs: &[f64]) -> f64 {
    let xs: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = qs.iter().map(|q| q.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn translation_kernel_decays_like_inverse_square() {
    let p = params(1.0, 1.0, 1.0, 1, Domain::WholePlane);
    let rs = [30.0, 60.0, 120.0];
    let qs: Vec<f64> = rs
        .iter()
        .map(|&r| kernel_check_m1(&solved(&p, 300, Some(r))).unwrap().rayleigh)
        .collect();
    assert!(qs.windows(2).all(|w| w[1] < w[0]) && qs[2] > 0.0, "{qs:?}");
    let slope = kernel_slope(&rs, &qs);
    assert!((slope + 2.0).abs() <= 0.3, "slope {slope} from {qs:?}");
}

#[test]
fn kernel_quotient_on_finite_disks() {
    let mut last = f64::INFINITY;
    for r in [10.0, 20.0, 40.0] {
        let prof = solved(&params(1.0, 1.0, 1.0, 1, common::disk(r)), 200, None);
        let kc = kernel_check_m1(&prof).unwrap();
        let spec = lowest_spectrum(&assemble_pm(&prof, 1, 1).unwrap(), 2).unwrap();
        assert!(kc.rayleigh >= spec.eigenvalues[0] * (1.0 - 1e-9));
        assert!(
            kc.rayleigh < 0.1 * spec.eigenvalues[1],
            "{} vs {:?}",
            kc.rayleigh,
            spec.eigenvalues
        );
        assert!(kc.rayleigh < last);
        last = kc.rayleigh;
    }
}

#[test]
fn kernel_quotient_is_scale_invariant() {
    let prof = whole(1.0, 1.0, 1.0, 1, 200);
    let form = assemble_pm(&prof, 1, 1).unwrap();
    let (w0, w1, w2) = translation_triple(&prof, &Cutoff::outer(30.0, 60.0));
    let x = form.dofs.restrict(&[&w0, &w1, &w2]);
    let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    assert!((form.rayleigh(&x) / form.rayleigh(&x2) - 1.0).abs() < 1e-13);
    assert!((form.rayleigh(&x) / kernel_check_m1(&prof).unwrap().rayleigh - 1.0).abs() < 1e-12);
    assert!(matches!(
        kernel_check_m1(&whole(1.0, 1.0, 1.0, 2, 50)),
        Err(FormError::NeedsUnitWinding(2))
    ));
}

#[test]
fn v2_pair_forms() {
    for (a2, b2, c2) in [(1.0, 1.0, 1.0), (0.1, 2.0, 1.0)] {
        let prof = whole(a2, b2, c2, 1, 200);
        let forms = assemble_v2_pair(&prof, 1, 1).unwrap();
        assert_eq!(forms.len(), 1);
        assert!(lowest_spectrum(&forms[0], 1).unwrap().lambda_min() > 0.0);
    }
    let k2 = whole(1.0, 1.0, 1.0, 2, 100);
    assert_eq!(assemble_v2_pair(&k2, 1, 2).unwrap().len(), 2);
    assert!(assemble_v2_pair(&k2, 0, 2).unwrap()[0].extension);
}

#[test]
fn v2_lower_bound() {
    let prof = common::sub_disk(100);
    let z = vec![0.0; prof.n_nodes()];
    assert_eq!(v2_lower_bound_check(&prof, 2, &z, &z).unwrap(), (0.0, 0.0));
    for seed in 0..100u64 {
        let n = 2 + (seed % 3) as i32;
        let xn = random_compact_sample(&prof, 4000 + 2 * seed);
        let xp = random_compact_sample(&prof, 4001 + 2 * seed);
        let (lhs, rhs) = v2_lower_bound_check(&prof, n, &xn, &xp).unwrap();
        assert!(rhs > 0.0);
        assert!(lhs >= rhs - 1e-8 * lhs.abs(), "n={n}: {lhs} < {rhs}");
    }
    assert!(v2_lower_bound_check(&prof, 1, &z, &z).is_err());
    let neg = solved(&params(1.0, 1.0, 1.0, -1, common::disk(10.0)), 100, None);
    let xn = random_compact_sample(&neg, 1);
    let (lhs, rhs) = v2_lower_bound_check(&neg, -2, &xn, &xn).unwrap();
    assert!(lhs >= rhs && rhs > 0.0);
}

#[test]
fn v2_j1_rewrite() {
    for (a2, b2, c2) in regimes() {
        let prof = solved(&params(a2, b2, c2, 1, common::disk(10.0)), 100, None);
        for seed in 0..100u64 {
            let e0 = random_compact_sample(&prof, 7000 + 2 * seed);
            let e1 = random_compact_sample(&prof, 7001 + 2 * seed);
            let (direct, rewritten) = hardy_split_v2_j1(&prof, &e0, &e1).unwrap();
            assert!(
                (direct - rewritten).abs() <= 1e-8 * (1.0 + direct.abs()),
                "{direct} vs {rewritten}"
            );
            assert!(direct > 0.0);
        }
    }
}

#[test]
fn higher_winding_is_unstable() {
    let k2 = whole(1.0, 1.0, 1.0, 2, 200);
    let k3 = whole(1.0, 1.0, 1.0, 3, 200);
    let s2 = instability_search(&k2).unwrap();
    let s3 = instability_search(&k3).unwrap();
    assert!(s2.lambda_min() < 0.0);
    assert!(
        s3.lambda_min() <= s2.lambda_min(),
        "{} vs {}",
        s3.lambda_min(),
        s2.lambda_min()
    );
    assert!(s2.extension && s3.extension);
    let scan = default_scan(&k2).unwrap();
    assert!(!scan.negative_entries(1e-8).is_empty());
    assert!(scan.entries.iter().all(|e| e.extension_flag));

    let k1 = whole(1.0, 1.0, 1.0, 1, 200);
    assert!(matches!(
        instability_search(&k1),
        Err(FormError::NeedsHigherWinding(1))
    ));
    let control = default_scan(&k1).unwrap();
    assert!(control.negative_entries(1e-8).is_empty());
    assert!(control.lowest.lambda_min() >= -1e-8 * control.lowest.scale);
}

#[test]
fn mode_spec_pairs() {
    let s = ModeSpec::v2(3, 1);
    assert_eq!(s.partner(), Some(-2));
    assert_eq!(s.canonical().m_or_n, -2);
    assert!(!s.self_paired());
    assert!(ModeSpec::v2(1, 2).self_paired());
    assert_eq!(ModeSpec::v2(1, 2).component_roles().len(), 1);
    assert_eq!(ModeSpec::v1(2, 1).component_roles(), vec!["w0", "w1", "w2"]);
    assert_eq!(ModeSpec::v1(2, 1).partner(), None);
}
