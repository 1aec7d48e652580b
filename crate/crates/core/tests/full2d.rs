mod common;

use std::f64::consts::PI;

use common::{params, regimes, solved};
use defectlab_core::full2d_check::{
    basis, check_2d, director, el_residual, l_direct, mode_sum_check, reconstruct_q,
    reconstruct_q_with, residual_window, PerturbationField, QTensorField,
};
use defectlab_core::mode_analysis::{pm_value, v2_pair_value};
use defectlab_core::stability_radial::random_compact_sample;
use defectlab_core::{bulk_constants, Domain, FieldError, Profile};
use nalgebra::{Matrix3, Rotation3, Vector3};

fn disk_profile(k: i32) -> Profile {
    solved(&params(1.0, 1.0, 1.0, k, common::disk(10.0)), 100, None)
}

#[test]
fn reconstructed_q_structure() {
    for k in [1, -1, 2] {
        let prof = disk_profile(k);
        let q = reconstruct_q_with(&prof, 64, 32).unwrap();
        let e3 = Vector3::z();
        for i in 0..q.n_r() {
            let (u, _, v, _) = prof.eval(q.r[i]);
            for j in 0..q.n_phi {
                let m = q.matrix(i, j);
                assert!(m.trace().abs() <= 1e-14);
                assert!((m - m.transpose()).norm() == 0.0);
                assert!((m.norm_squared() - (u * u + v * v)).abs() <= 1e-12);
                assert!((m * e3 - e3 * (2.0 * v / 6f64.sqrt())).norm() <= 1e-14);
            }
        }
    }
}

#[test]
fn boundary_value_is_uniaxial() {
    for k in [1, 2, -3] {
        let prof = disk_profile(k);
        let s = bulk_constants(&prof.params).s_plus;
        let q = reconstruct_q_with(&prof, 16, 24).unwrap();
        let last = q.n_r() - 1;
        for j in 0..q.n_phi {
            let n = director(k, q.phi(j));
            let target = (n * n.transpose() - Matrix3::identity() / 3.0) * s;
            assert!((q.matrix(last, j) - target).norm() <= 1e-12);
        }
    }
}

#[test]
fn rotation_equivariance() {
    for k in [1, 2, 3] {
        let prof = disk_profile(k);
        let q = reconstruct_q_with(&prof, 20, 24).unwrap();
        for shift in [1, 5, 11] {
            let psi = 2.0 * PI * shift as f64 / 24.0;
            let rot =
                Rotation3::from_axis_angle(&Vector3::z_axis(), 0.5 * k as f64 * psi).into_inner();
            for i in 0..q.n_r() {
                for j in 0..24 {
                    let moved = q.matrix(i, (j + shift) % 24);
                    assert!((moved - rot * q.matrix(i, j) * rot.transpose()).norm() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn el_residual_converges_second_order() {
    let prof = solved(&params(1.0, 1.0, 1.0, 1, common::disk(10.0)), 400, None);
    let res: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| el_residual(&reconstruct_q_with(&prof, n, 32).unwrap(), &prof.params))
        .collect();
    for w in res.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "{res:?}");
    }
    let q = reconstruct_q_with(&prof, 64, 32).unwrap();
    assert_eq!(residual_window(&q), (10.0 / 32.0, 10.0 - 10.0 / 32.0));
}

#[test]
fn el_residual_of_constant_fields() {
    let r: Vec<f64> = (0..40).map(|i| 0.25 * i as f64).collect();
    for (a2, b2, c2) in regimes() {
        let p = params(a2, b2, c2, 1, Domain::WholePlane);
        let s = bulk_constants(&p).s_plus;
        let n0 = Vector3::new(0.6, 0.8, 0.0);
        let uniaxial = (n0 * n0.transpose() - Matrix3::identity() / 3.0) * s;
        let q = QTensorField::constant(1, r.clone(), 32, uniaxial).unwrap();
        assert!(el_residual(&q, &p) <= 1e-12, "{}", el_residual(&q, &p));
        let zero = QTensorField::constant(2, r.clone(), 32, Matrix3::zeros()).unwrap();
        assert_eq!(el_residual(&zero, &p), 0.0);
    }
}

#[test]
fn perturbation_norm_matches_components() {
    let prof = disk_profile(1);
    let p = PerturbationField::random(&prof, 16, 3, 5).unwrap();
    let n = p.n_nodes();
    for j in [0, 7] {
        let b = basis(1, 2.0 * PI * j as f64 / 16.0);
        for i in (0..n).step_by(17) {
            let w: Vec<f64> = (0..5).map(|l| p.w[l][j * n + i]).collect();
            let m = (0..5).fold(Matrix3::zeros(), |acc, l| acc + b[l] * w[l]);
            let sum: f64 = w.iter().map(|x| x * x).sum();
            assert!((m.norm_squared() - sum).abs() <= 1e-14 * (1.0 + sum));
        }
    }
}

fn triple(prof: &Profile, seed: u64) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|i| random_compact_sample(prof, 3 * seed + i))
}

#[test]
fn single_modes_reduce_to_radial_forms() {
    for k in [1, -1, 2] {
        let prof = disk_profile(k);
        let q = reconstruct_q(&prof, 32).unwrap();
        for m in 0..=4usize {
            let w = triple(&prof, 40 + m as u64);
            let field = PerturbationField::v1_mode(&prof, 32, m, &w[0], &w[1], &w[2]).unwrap();
            let direct = l_direct(&q, &field).unwrap();
            let factor = if m == 0 { 2.0 * PI } else { PI };
            let radial = factor * pm_value(&prof, m as i32, &w[0], &w[1], &w[2]);
            assert!(
                (direct - radial).abs() <= 1e-8 * (1.0 + direct.abs()),
                "k={k} m={m}: {direct} vs {radial}"
            );
            let rep = mode_sum_check(&q, &field).unwrap();
            assert_eq!(rep.n_terms(1e-10 * (1.0 + direct.abs())), 1);
            assert!(rep.discrepancy() <= 1e-10);
        }
    }
}

#[test]
fn v2_pairs_reduce_to_pair_forms() {
    for k in [1, 2] {
        let prof = disk_profile(k);
        let q = reconstruct_q(&prof, 32).unwrap();
        for n in [-1, 2, 3] {
            let xn = random_compact_sample(&prof, (310 + n) as u64);
            let xp = random_compact_sample(&prof, (410 + n) as u64);
            let field = PerturbationField::v2_pair(&prof, 32, n, &xn, &xp).unwrap();
            let direct = l_direct(&q, &field).unwrap();
            let radial = 2.0 * PI * v2_pair_value(&prof, n, &xn, &xp);
            assert!(
                (direct - radial).abs() <= 1e-8 * (1.0 + direct.abs()),
                "k={k} n={n}: {direct} vs {radial}"
            );
            assert!(direct > 0.0);
        }
    }
}

#[test]
fn translation_energy_falls_with_radius() {
    let p = params(1.0, 1.0, 1.0, 1, Domain::WholePlane);
    let vals: Vec<f64> = [30.0, 60.0, 120.0]
        .iter()
        .map(|&r| {
            let prof = solved(&p, 200, Some(r));
            l_direct(
                &reconstruct_q(&prof, 16).unwrap(),
                &PerturbationField::translation(&prof, 16).unwrap(),
            )
            .unwrap()
        })
        .collect();
    assert!(
        vals[0] > vals[1] && vals[1] > vals[2] && vals[2] > 0.0,
        "{vals:?}"
    );
}

#[test]
fn random_fields_match_mode_sum() {
    for (a2, b2, c2) in regimes() {
        let prof = solved(&params(a2, b2, c2, 1, common::disk(10.0)), 100, None);
        let rep = check_2d(&prof, 32, 6, 20, 11).unwrap();
        assert_eq!(rep.draws, 20);
        assert!(rep.max_discrepancy <= 1e-8, "{rep:?}");
        assert!(rep.v1_v2_split_discrepancy <= 1e-10, "{rep:?}");
        assert!(rep.min_direct > 0.0);
    }
    let k2 = disk_profile(2);
    assert!(check_2d(&k2, 32, 6, 5, 3).unwrap().max_discrepancy <= 1e-8);
}

#[test]
fn v2_only_fields_are_positive() {
    let prof = disk_profile(1);
    let q = reconstruct_q(&prof, 32).unwrap();
    for seed in 0..5 {
        let p = PerturbationField::random(&prof, 32, 6, 100 + seed).unwrap();
        let whole = l_direct(&q, &p).unwrap();
        let (v1, v2) = (
            l_direct(&q, &p.v1_part()).unwrap(),
            l_direct(&q, &p.v2_part()).unwrap(),
        );
        assert!((whole - v1 - v2).abs() <= 1e-10 * (1.0 + whole.abs()));
        assert!(v2 > 0.0);
    }
}

#[test]
fn field_guards() {
    let prof = disk_profile(2);
    let q = reconstruct_q(&prof, 16).unwrap();
    // band 6 with |k| = 2 needs n_phi/2 ≥ 9.
    let p = PerturbationField::random(&prof, 16, 6, 1).unwrap();
    assert_eq!(
        l_direct(&q, &p),
        Err(FieldError::Aliasing {
            band: 6,
            n_phi: 16,
            k: 2
        })
    );
    let p = PerturbationField::random(&prof, 16, 5, 1).unwrap();
    assert!(l_direct(&q, &p).is_ok());
    let other = disk_profile(1);
    let p = PerturbationField::zeros(&other, 16).unwrap();
    assert_eq!(
        l_direct(&reconstruct_q(&other, 16).unwrap(), &p).unwrap(),
        0.0
    );
    let coarse = solved(&params(1.0, 1.0, 1.0, 2, common::disk(10.0)), 50, None);
    assert_eq!(
        l_direct(&q, &PerturbationField::zeros(&coarse, 16).unwrap()),
        Err(FieldError::GridMismatch)
    );
    let bare = QTensorField::constant(2, vec![0.0, 1.0, 2.0, 3.0], 16, Matrix3::zeros()).unwrap();
    assert_eq!(l_direct(&bare, &p), Err(FieldError::NoProfile));
}
