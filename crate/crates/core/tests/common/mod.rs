#![allow(dead_code)]

use defectlab_core::radial_solver::{solve, SolverOptions};
use defectlab_core::{Domain, ModelParams, Profile};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

pub fn params(a2: f64, b2: f64, c2: f64, k: i32, domain: Domain) -> ModelParams {
    ModelParams::new(a2, b2, c2, k, domain).unwrap()
}

pub fn disk(r: f64) -> Domain {
    Domain::FiniteDisk { radius: r }
}

/// One parameter set per regime: sub-, critical and supercritical.
pub fn regimes() -> [(f64, f64, f64); 3] {
    [(1.0, 1.0, 1.0), (1.0, SQRT3, 1.0), (0.1, 2.0, 1.0)]
}

pub fn opts(n: usize, r_eff: Option<f64>) -> SolverOptions {
    SolverOptions {
        n_elements: n,
        truncation_radius: r_eff,
        ..Default::default()
    }
}

pub fn solved(p: &ModelParams, n: usize, r_eff: Option<f64>) -> Profile {
    solve(p, &opts(n, r_eff)).unwrap()
}

/// Subcritical k = 1 profile on the disk of radius 10.
pub fn sub_disk(n: usize) -> Profile {
    solved(&params(1.0, 1.0, 1.0, 1, disk(10.0)), n, None)
}

/// Composite Simpson rule per element with `panels` panel pairs; `f(e, r)`
/// evaluates inside element e so one-sided derivatives at element ends are right.
pub fn simpson(profile: &Profile, panels: usize, f: impl Fn(usize, f64) -> f64) -> f64 {
    let mesh = &profile.space.mesh;
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element(e);
        let h = (b - a) / (2 * panels) as f64;
        let mut s = f(e, a) + f(e, b);
        for i in 1..2 * panels {
            s += f(e, a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        total += s * h / 3.0;
    }
    total
}
