//! Second variation of the radial energy,
//!
//!   B(ξ, η) = ∫ { ξ'² + k²ξ²/r² + η'² + f_pp ξ² + 2 f_pq ξη + f_qq η² } r dr,
//!
//! its lowest spectrum, the Hardy rewrite that makes its positivity manifest,
//! and a multi-start uniqueness probe for the radial solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{lowest_eigenpairs, EigenOptions};
use crate::error::FormError;
use crate::fem::FeSpace;
use crate::forms::{self, Cutoff, FormLabel, MassKind, QuadForm};
use crate::model::{bulk_constants, spectral_scale, ModelParams, SQRT6};
use crate::radial_solver::{
    self, b_form_spec, boundary_values, initial_guess_on, Profile, SolverOptions,
};

/// Lowest eigenpairs of one form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub label: FormLabel,
    pub eigenvalues: Vec<f64>,
    /// M-normalized eigenvectors on the reduced unknowns; not serialized.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    /// ‖Kx − λMx‖ / (‖Kx‖ + |λ|‖Mx‖).
    pub residuals: Vec<f64>,
    pub extension: bool,
    pub scale: f64,
}

impl SpectrumResult {
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    /// CSV with one column per eigenvector.
    pub fn eigenvectors_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let cols: Vec<String> = (0..self.eigenvectors.len())
            .map(|j| format!("x{j}"))
            .collect();
        let _ = writeln!(s, "index,{}", cols.join(","));
        let n = self.eigenvectors.first().map_or(0, |v| v.len());
        for i in 0..n {
            let row: Vec<String> = self.eigenvectors.iter().map(|v| v[i].to_string()).collect();
            let _ = writeln!(s, "{i},{}", row.join(","));
        }
        s
    }
}

pub(crate) fn require_converged(profile: &Profile) -> Result<(), FormError> {
    if profile.converged {
        Ok(())
    } else {
        Err(FormError::Unconverged(profile.residual_norm))
    }
}

pub(crate) fn check_length(profile: &Profile, x: &[f64]) -> Result<(), FormError> {
    if x.len() == profile.n_nodes() {
        Ok(())
    } else {
        Err(FormError::BadLength {
            got: x.len(),
            expected: profile.n_nodes(),
        })
    }
}

/// Nodal samples vanishing at the first and last two nodes.
pub(crate) fn check_compact(profile: &Profile, x: &[f64]) -> Result<(), FormError> {
    check_length(profile, x)?;
    let n = x.len();
    if [0, 1, n - 2, n - 1].iter().any(|&i| x[i] != 0.0) {
        return Err(FormError::NotCompactlySupported);
    }
    Ok(())
}

/// Random nodal sample: a sum of two or three smooth bumps with random
/// amplitudes, supported inside [0.02 R, 0.9 R] so it passes [`check_compact`].
pub fn random_compact_sample(profile: &Profile, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big_r = profile.r_eff();
    let (lo, hi) = (0.02 * big_r, 0.9 * big_r);
    let c_hi = (0.4 * big_r).min(12.0).max(lo + 0.2 * (hi - lo));
    let n_bumps = rng.gen_range(2..=3);
    let bumps: Vec<(f64, f64, f64)> = (0..n_bumps)
        .map(|_| {
            let c = rng.gen_range(lo + 0.05 * big_r..c_hi);
            let w = rng
                .gen_range(0.03 * big_r..0.3 * big_r)
                .min(c - lo)
                .min(hi - c);
            (rng.gen_range(-1.0..1.0), c, w)
        })
        .collect();
    let mut x: Vec<f64> = profile
        .r()
        .iter()
        .map(|&r| {
            bumps
                .iter()
                .map(|&(a, c, w)| {
                    let t = (r - c) / w;
                    if t.abs() < 1.0 {
                        a * (1.0 - t * t).powi(4)
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect();
    let n = x.len();
    for i in [0, 1, n - 2, n - 1] {
        x[i] = 0.0;
    }
    x
}

/// B on the profile's space with the L²(r dr) mass.
pub fn assemble_b(profile: &Profile) -> Result<QuadForm, FormError> {
    assemble_b_with_mass(profile, &MassKind::L2)
}

/// (1 + 1/r²) weight on ξ: the natural pairing of the space B lives on.
pub fn weighted_mass() -> MassKind {
    MassKind::Weighted(vec![1.0, 0.0])
}

pub fn assemble_b_with_mass(profile: &Profile, mass: &MassKind) -> Result<QuadForm, FormError> {
    require_converged(profile)?;
    let spec = b_form_spec(&profile.params);
    let (stiffness, mass, dofs) = forms::assemble(&profile.space, &profile.quad, &spec, mass);
    Ok(QuadForm {
        stiffness,
        mass,
        dofs,
        label: FormLabel::B,
        extension: false,
        scale: spectral_scale(&profile.params),
    })
}

pub fn eigen_options(form: &QuadForm) -> EigenOptions {
    EigenOptions {
        initial_shift: -1e-8 * form.scale,
        scale: form.scale,
        ..Default::default()
    }
}

pub fn lowest_spectrum(form: &QuadForm, count: usize) -> Result<SpectrumResult, FormError> {
    lowest_spectrum_with(form, count, &eigen_options(form))
}

pub fn lowest_spectrum_with(
    form: &QuadForm,
    count: usize,
    opts: &EigenOptions,
) -> Result<SpectrumResult, FormError> {
    let pairs = lowest_eigenpairs(&form.stiffness, &form.mass, count, opts)?;
    Ok(SpectrumResult {
        label: form.label.clone(),
        eigenvalues: pairs.values,
        eigenvectors: pairs.vectors,
        residuals: pairs.residuals,
        extension: form.extension,
        scale: form.scale,
    })
}

/// B(ξ, η) by quadrature for nodal arrays on the profile's space.
pub fn b_value(profile: &Profile, xi: &[f64], eta: &[f64]) -> f64 {
    let spec = b_form_spec(&profile.params);
    forms::evaluate(&profile.space, &profile.quad, &spec, &[xi, eta])
}

/// Both sides of the Hardy rewrite of B at ξ = u ξ̃, η = v η̃.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyCertificate {
    pub direct: f64,
    pub rewritten: f64,
}

impl HardyCertificate {
    pub fn discrepancy(&self) -> f64 {
        (self.direct - self.rewritten).abs() / (1.0 + self.direct.abs())
    }
}

/// B(u ξ̃, v η̃) and its sum-of-squares form
///
///   ∫ { u²ξ̃'² + v²η̃'² + (2c²v² − b²(u² + v²)/(√6 v)) (vη̃)² + 2c²u²(uξ̃)²
///       + 4u(uξ̃)(vη̃)(b²/√6 + c²v) } r dr,
///
/// which agree once the boundary terms of the integration by parts vanish.
pub fn hardy_certificate_b(
    profile: &Profile,
    xi_t: &[f64],
    eta_t: &[f64],
) -> Result<HardyCertificate, FormError> {
    check_compact(profile, xi_t)?;
    check_compact(profile, eta_t)?;
    let p = &profile.params;
    let sp = &profile.space;
    let c = &profile.quad;
    let spec = b_form_spec(p);
    let mut tab = (usize::MAX, vec![], vec![], vec![], vec![]);
    let direct = forms::evaluate_with(sp, c, &spec, &mut |e, q, val, der| {
        if tab.0 != e {
            let (a, da) = sp.element_values(xi_t, e);
            let (b, db) = sp.element_values(eta_t, e);
            tab = (e, a, da, b, db);
        }
        let i = c.at(e, q);
        val[0] = c.u[i] * tab.1[q];
        der[0] = c.du[i] * tab.1[q] + c.u[i] * tab.2[q];
        val[1] = c.v[i] * tab.3[q];
        der[1] = c.dv[i] * tab.3[q] + c.v[i] * tab.4[q];
    });
    let bb = p.b2 / SQRT6;
    let mut rewritten = 0.0;
    for e in 0..sp.n_elements() {
        let (a, da) = sp.element_values(xi_t, e);
        let (b, db) = sp.element_values(eta_t, e);
        for q in 0..c.nq {
            let i = c.at(e, q);
            let (u, v) = (c.u[i], c.v[i]);
            let (xi, eta) = (u * a[q], v * b[q]);
            let dens = u * u * da[q] * da[q]
                + v * v * db[q] * db[q]
                + (2.0 * p.c2 * v * v - p.b2 * (u * u + v * v) / (SQRT6 * v)) * eta * eta
                + 2.0 * p.c2 * u * u * xi * xi
                + 4.0 * u * xi * eta * (bb + p.c2 * v);
            rewritten += dens * c.wr[i];
        }
    }
    Ok(HardyCertificate { direct, rewritten })
}

/// B on (u'χ, v'χ) for a window χ vanishing near both ends.
pub fn b_on_derivative_pair(profile: &Profile, window: &Cutoff) -> f64 {
    let sp = &profile.space;
    let c = &profile.quad;
    let spec = b_form_spec(&profile.params);
    let mut tab = (usize::MAX, vec![], vec![]);
    forms::evaluate_with(sp, c, &spec, &mut |e, q, val, der| {
        if tab.0 != e {
            tab = (
                e,
                sp.element_second_derivative(&profile.u, e),
                sp.element_second_derivative(&profile.v, e),
            );
        }
        let i = c.at(e, q);
        let (chi, dchi) = window.eval(c.r[i]);
        val[0] = c.du[i] * chi;
        der[0] = tab.1[q] * chi + c.du[i] * dchi;
        val[1] = c.dv[i] * chi;
        der[1] = tab.2[q] * chi + c.dv[i] * dchi;
    })
}

/// Outcome of the multi-start uniqueness probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub seeds: Vec<u64>,
    pub converged: usize,
    /// One message per start that failed to converge.
    pub failures: Vec<String>,
    pub distinct_count: usize,
    pub cluster_sizes: Vec<usize>,
    /// Largest sup-norm distance between two members of the largest cluster.
    pub max_pairwise_deviation: f64,
    pub cluster_tol: f64,
}

/// Profiles within this many s₊ in sup norm are one solution.
pub const CLUSTER_TOL: f64 = 1e-6;

/// Cone-respecting randomized start: the default guess plus a few radial bumps,
/// clipped to u ≥ 0, v ≤ 0, with the essential data restored.
pub fn randomized_guess(params: &ModelParams, space: FeSpace, seed: u64) -> Profile {
    let base = initial_guess_on(params, space);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = bulk_constants(params).s_plus;
    let r_eff = base.r_eff();
    let bumps = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64, f64)> {
        (0..3)
            .map(|_| {
                (
                    rng.gen_range(-0.4..0.4) * s,
                    rng.gen_range(0.05..0.8) * r_eff,
                    rng.gen_range(0.05..0.3) * r_eff,
                )
            })
            .collect()
    };
    let bu = bumps(&mut rng);
    let bv = bumps(&mut rng);
    let eval = |b: &[(f64, f64, f64)], r: f64| -> f64 {
        b.iter()
            .map(|&(a, c, w)| a * (-((r - c) / w).powi(2)).exp())
            .sum::<f64>()
            * (1.0 - r / r_eff)
    };
    let n = base.n_nodes();
    let mut u = base.u.clone();
    let mut v = base.v.clone();
    for i in 1..n - 1 {
        let r = base.r()[i];
        u[i] = (u[i] + eval(&bu, r) * (r / r_eff)).max(0.0);
        v[i] = (v[i] + eval(&bv, r)).min(0.0);
    }
    let (ub, vb) = boundary_values(params, r_eff);
    u[0] = 0.0;
    u[n - 1] = ub;
    v[n - 1] = vb;
    Profile::from_nodal(*params, base.space, u, v)
}

/// Per-start seeds derived from one master seed.
pub fn start_seeds(seed: u64, n_starts: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_starts).map(|_| rng.gen()).collect()
}

pub fn uniqueness_probe(
    params: &ModelParams,
    opts: &SolverOptions,
    n_starts: usize,
    seed: u64,
) -> Result<UniquenessReport, FormError> {
    if n_starts < 2 {
        return Err(FormError::TooFewStarts(n_starts));
    }
    uniqueness_probe_seeds(params, opts, &start_seeds(seed, n_starts))
}

/// Probe with explicit per-start seeds (identical seeds give identical starts).
pub fn uniqueness_probe_seeds(
    params: &ModelParams,
    opts: &SolverOptions,
    seeds: &[u64],
) -> Result<UniquenessReport, FormError> {
    if seeds.len() < 2 {
        return Err(FormError::TooFewStarts(seeds.len()));
    }
    params.validate().map_err(|e| FormError::Solver(e.into()))?;
    let mesh = radial_solver::build_mesh(
        params,
        opts.n_elements,
        opts.grading,
        opts.truncation_radius,
    )
    .map_err(|e| FormError::Solver(e.into()))?;
    let space = FeSpace::new(mesh, opts.degree).map_err(|e| FormError::Solver(e.into()))?;
    let results: Vec<Result<Profile, String>> = seeds
        .par_iter()
        .map(|&sd| {
            let guess = randomized_guess(params, space.clone(), sd);
            radial_solver::solve_profile(params, &guess, opts)
                .map_err(|e| format!("seed {sd}: {e}"))
        })
        .collect();
    let s = bulk_constants(params).s_plus;
    let tol = CLUSTER_TOL * s;
    let mut failures = Vec::new();
    let mut solved = Vec::new();
    for r in results {
        match r {
            Ok(p) => solved.push(p),
            Err(m) => failures.push(m),
        }
    }
    let dist = |a: &Profile, b: &Profile| -> f64 {
        a.u.iter()
            .zip(&b.u)
            .chain(a.v.iter().zip(&b.v))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    // Greedy clustering against each cluster's first member.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..solved.len() {
        match clusters
            .iter_mut()
            .find(|c| dist(&solved[c[0]], &solved[i]) <= tol)
        {
            Some(c) => c.push(i),
            None => clusters.push(vec![i]),
        }
    }
    clusters.sort_by(|a, b| b.len().cmp(&a.len()));
    let mut max_dev: f64 = 0.0;
    if let Some(main) = clusters.first() {
        for (x, &i) in main.iter().enumerate() {
            for &j in &main[x + 1..] {
                max_dev = max_dev.max(dist(&solved[i], &solved[j]));
            }
        }
    }
    Ok(UniquenessReport {
        seeds: seeds.to_vec(),
        converged: solved.len(),
        failures,
        distinct_count: clusters.len(),
        cluster_sizes: clusters.iter().map(|c| c.len()).collect(),
        max_pairwise_deviation: max_dev,
        cluster_tol: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Domain;
    use crate::radial_solver::solve;

    fn profile(radius: f64, n: usize) -> Profile {
        let p = ModelParams::new(1.0, 1.0, 1.0, 1, Domain::FiniteDisk { radius }).unwrap();
        solve(
            &p,
            &SolverOptions {
                n_elements: n,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn unconverged_profile_rejected() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 1, Domain::FiniteDisk { radius: 4.0 }).unwrap();
        let mesh = radial_solver::build_mesh(&p, 16, Default::default(), None).unwrap();
        let g = radial_solver::initial_guess(&p, &mesh, 2).unwrap();
        assert!(matches!(assemble_b(&g), Err(FormError::Unconverged(_))));
    }

    #[test]
    fn zero_pair_has_zero_value() {
        let prof = profile(4.0, 32);
        let z = vec![0.0; prof.n_nodes()];
        assert_eq!(b_value(&prof, &z, &z), 0.0);
        let c = hardy_certificate_b(&prof, &z, &z).unwrap();
        assert_eq!((c.direct, c.rewritten), (0.0, 0.0));
    }

    #[test]
    fn subcritical_b_is_positive() {
        let prof = profile(6.0, 64);
        let form = assemble_b(&prof).unwrap();
        let s = lowest_spectrum(&form, 3).unwrap();
        assert!(s.lambda_min() > 0.0);
        assert!(s.residuals.iter().all(|&r| r <= 1e-8));
        for (l, x) in s.eigenvalues.iter().zip(&s.eigenvectors) {
            assert!((form.rayleigh(x) - l).abs() <= 1e-10 * l.abs());
        }
    }

    #[test]
    fn support_is_checked() {
        let prof = profile(4.0, 32);
        let mut x = vec![0.0; prof.n_nodes()];
        x[1] = 1.0;
        let z = vec![0.0; prof.n_nodes()];
        assert_eq!(
            hardy_certificate_b(&prof, &x, &z),
            Err(FormError::NotCompactlySupported)
        );
        assert!(matches!(
            hardy_certificate_b(&prof, &z[1..], &z),
            Err(FormError::BadLength { .. })
        ));
    }

    #[test]
    fn identical_seeds_identical_profiles() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 1, Domain::FiniteDisk { radius: 5.0 }).unwrap();
        let opts = SolverOptions {
            n_elements: 48,
            ..Default::default()
        };
        let rep = uniqueness_probe_seeds(&p, &opts, &[7, 7]).unwrap();
        assert_eq!(rep.converged, 2);
        assert_eq!(rep.distinct_count, 1);
        assert_eq!(rep.max_pairwise_deviation, 0.0);
        assert!(uniqueness_probe(&p, &opts, 1, 0).is_err());
    }
}
