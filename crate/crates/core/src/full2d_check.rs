//! Direct 2-D evaluation of the second variation.
//!
//! A radial profile is lifted to the tensor field Q = u E₁ + v E₀ on a polar
//! grid, perturbations P = Σ wᵢ Eᵢ are sampled at FE nodes in r and uniformly
//! in φ, and ℒ[Q](P) is integrated directly with full 3×3 tensors. The mode
//! sum rebuilds the same number from the Fourier coefficients of wᵢ and the
//! radial forms of [`crate::mode_analysis`].

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::forms::{self, Cutoff};
use crate::mode_analysis::{pm_value, translation_triple, v2_form_spec, v2_pair_value, V2Part};
use crate::model::{ModelParams, SQRT2, SQRT6};
use crate::radial_solver::Profile;
use crate::stability_radial::require_converged;

/// Radial samples used by [`reconstruct_q`].
pub const DEFAULT_N_R: usize = 512;
/// Angular samples used by the CLI check.
pub const DEFAULT_N_PHI: usize = 128;

/// Orthonormal basis E₀…E₄ of symmetric traceless 3×3 matrices at angle φ.
pub fn basis(k: i32, phi: f64) -> [Matrix3<f64>; 5] {
    let (s, c) = (k as f64 * phi).sin_cos();
    let h = 1.0 / SQRT2;
    let e0 = Matrix3::from_diagonal(&nalgebra::Vector3::new(-1.0, -1.0, 2.0)) / SQRT6;
    let e1 = Matrix3::new(c, s, 0.0, s, -c, 0.0, 0.0, 0.0, 0.0) * h;
    let e2 = Matrix3::new(-s, c, 0.0, c, s, 0.0, 0.0, 0.0, 0.0) * h;
    let e3 = Matrix3::new(0.0, 0.0, h, 0.0, 0.0, 0.0, h, 0.0, 0.0);
    let e4 = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, h, 0.0, h, 0.0);
    [e0, e1, e2, e3, e4]
}

/// Director n = (cos kφ/2, sin kφ/2, 0).
pub fn director(k: i32, phi: f64) -> nalgebra::Vector3<f64> {
    let (s, c) = (0.5 * k as f64 * phi).sin_cos();
    nalgebra::Vector3::new(c, s, 0.0)
}

fn check_n_phi(n_phi: usize) -> Result<(), FieldError> {
    if n_phi < 8 || n_phi % 2 != 0 {
        return Err(FieldError::BadAngularGrid(n_phi));
    }
    Ok(())
}

fn angles(n_phi: usize) -> Vec<f64> {
    (0..n_phi)
        .map(|j| 2.0 * PI * j as f64 / n_phi as f64)
        .collect()
}

/// Q on a polar grid, stored as moving-basis components.
#[derive(Debug, Clone)]
pub struct QTensorField {
    pub k: i32,
    pub r: Vec<f64>,
    pub n_phi: usize,
    /// Components q₀…q₄, index `i * n_phi + j` for ring i and angle j.
    pub comps: [Vec<f64>; 5],
    profile: Option<Profile>,
}

impl QTensorField {
    pub fn n_r(&self) -> usize {
        self.r.len()
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    pub fn profile(&self) -> Option<&Profile> {
        self.profile.as_ref()
    }

    pub fn component(&self, l: usize, i: usize, j: usize) -> f64 {
        self.comps[l][i * self.n_phi + j]
    }

    /// The 3×3 tensor at ring i, angle j.
    pub fn matrix(&self, i: usize, j: usize) -> Matrix3<f64> {
        let b = basis(self.k, self.phi(j));
        (0..5).fold(Matrix3::zeros(), |acc, l| {
            acc + b[l] * self.component(l, i, j)
        })
    }

    /// A spatially constant tensor `q` expressed in the moving basis.
    pub fn constant(
        k: i32,
        r: Vec<f64>,
        n_phi: usize,
        q: Matrix3<f64>,
    ) -> Result<Self, FieldError> {
        check_n_phi(n_phi)?;
        if r.len() < 4 {
            return Err(FieldError::BadRadialGrid(r.len()));
        }
        let mut comps: [Vec<f64>; 5] = Default::default();
        comps
            .iter_mut()
            .for_each(|c| *c = vec![0.0; r.len() * n_phi]);
        for j in 0..n_phi {
            let b = basis(k, 2.0 * PI * j as f64 / n_phi as f64);
            for l in 0..5 {
                let x = (q.transpose() * b[l]).trace();
                for i in 0..r.len() {
                    comps[l][i * n_phi + j] = x;
                }
            }
        }
        Ok(Self {
            k,
            r,
            n_phi,
            comps,
            profile: None,
        })
    }

    /// Legacy-VTK structured grid with the six independent entries of Q.
    pub fn to_vtk(&self) -> String {
        let (nr, np) = (self.n_r(), self.n_phi);
        let mut s = String::from(
            "# vtk DataFile Version 3.0\nQ tensor field\nASCII\nDATASET STRUCTURED_GRID\n",
        );
        let _ = writeln!(s, "DIMENSIONS {np} {nr} 1\nPOINTS {} double", nr * np);
        for i in 0..nr {
            for j in 0..np {
                let (sn, cs) = self.phi(j).sin_cos();
                let _ = writeln!(s, "{} {} 0", self.r[i] * cs, self.r[i] * sn);
            }
        }
        let _ = writeln!(s, "POINT_DATA {}", nr * np);
        let mats: Vec<Matrix3<f64>> = (0..nr)
            .flat_map(|i| (0..np).map(move |j| (i, j)))
            .map(|(i, j)| self.matrix(i, j))
            .collect();
        for (name, a, b) in [
            ("Qxx", 0, 0),
            ("Qxy", 0, 1),
            ("Qxz", 0, 2),
            ("Qyy", 1, 1),
            ("Qyz", 1, 2),
            ("Qzz", 2, 2),
        ] {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for m in &mats {
                let _ = writeln!(s, "{}", m[(a, b)]);
            }
        }
        s
    }
}

/// Q = u E₁ + v E₀ on a uniform grid of [`DEFAULT_N_R`] radii.
pub fn reconstruct_q(profile: &Profile, n_phi: usize) -> Result<QTensorField, FieldError> {
    reconstruct_q_with(profile, DEFAULT_N_R, n_phi)
}

pub fn reconstruct_q_with(
    profile: &Profile,
    n_r: usize,
    n_phi: usize,
) -> Result<QTensorField, FieldError> {
    require_converged(profile)?;
    check_n_phi(n_phi)?;
    if n_r < 4 {
        return Err(FieldError::BadRadialGrid(n_r));
    }
    let big_r = profile.r_eff();
    let r: Vec<f64> = (0..n_r)
        .map(|i| big_r * i as f64 / (n_r - 1) as f64)
        .collect();
    let mut comps: [Vec<f64>; 5] = Default::default();
    comps.iter_mut().for_each(|c| *c = vec![0.0; n_r * n_phi]);
    for (i, &ri) in r.iter().enumerate() {
        let (u, _, v, _) = profile.eval(ri);
        for j in 0..n_phi {
            comps[0][i * n_phi + j] = v;
            comps[1][i * n_phi + j] = u;
        }
    }
    Ok(QTensorField {
        k: profile.params.k,
        r,
        n_phi,
        comps,
        profile: Some(profile.clone()),
    })
}

/// Radii entering [`el_residual`]: the grid minus an R/32 margin at both ends.
pub fn residual_window(field: &QTensorField) -> (f64, f64) {
    let big_r = *field.r.last().unwrap();
    (big_r / 32.0, big_r - big_r / 32.0)
}

const ENTRIES: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn to_matrix(e: &[f64; 6]) -> Matrix3<f64> {
    Matrix3::new(e[0], e[1], e[2], e[1], e[3], e[4], e[2], e[4], e[5])
}

/// Max over window points of |ΔQ + a²Q + b²(Q² − |Q|²I/3) − c²|Q|²Q|.
///
/// Central differences in r on the (uniform) radial grid, spectral
/// differentiation in φ.
pub fn el_residual(field: &QTensorField, params: &ModelParams) -> f64 {
    let (nr, np) = (field.n_r(), field.n_phi);
    let mut cart = vec![[0.0; 6]; nr * np];
    for i in 0..nr {
        for j in 0..np {
            let m = field.matrix(i, j);
            cart[i * np + j] = ENTRIES.map(|(a, b)| m[(a, b)]);
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(np);
    let ifft = FftPlanner::new().plan_fft_inverse(np);
    let (lo, hi) = residual_window(field);
    (1..nr - 1)
        .into_par_iter()
        .filter(|&i| field.r[i] >= lo && field.r[i] <= hi)
        .map(|i| {
            let r = field.r[i];
            let (hm, hp) = (r - field.r[i - 1], field.r[i + 1] - r);
            let mut dpp = vec![[0.0; 6]; np];
            for (t, _) in ENTRIES.iter().enumerate() {
                let mut buf: Vec<Complex64> = (0..np)
                    .map(|j| Complex64::new(cart[i * np + j][t], 0.0))
                    .collect();
                fft.process(&mut buf);
                for (n, x) in buf.iter_mut().enumerate() {
                    let f = signed_freq(n, np) as f64;
                    *x *= -f * f / np as f64;
                }
                ifft.process(&mut buf);
                for j in 0..np {
                    dpp[j][t] = buf[j].re;
                }
            }
            let mut worst: f64 = 0.0;
            for j in 0..np {
                let mut lap = [0.0; 6];
                for t in 0..6 {
                    let (a, b, c) = (
                        cart[(i - 1) * np + j][t],
                        cart[i * np + j][t],
                        cart[(i + 1) * np + j][t],
                    );
                    let d2 = 2.0 * (hm * c - (hm + hp) * b + hp * a) / (hm * hp * (hm + hp));
                    let d1 = (hm * hm * c + (hp * hp - hm * hm) * b - hp * hp * a)
                        / (hm * hp * (hm + hp));
                    lap[t] = d2 + d1 / r + dpp[j][t] / (r * r);
                }
                let q = to_matrix(&cart[i * np + j]);
                let n2 = q.norm_squared();
                let res = to_matrix(&lap)
                    + q * params.a2
                    + (q * q - Matrix3::identity() * (n2 / 3.0)) * params.b2
                    - q * (params.c2 * n2);
                worst = worst.max(res.norm());
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

fn signed_freq(n: usize, np: usize) -> i64 {
    if n < np / 2 {
        n as i64
    } else if n == np / 2 {
        0
    } else {
        n as i64 - np as i64
    }
}

/// Perturbation P = Σ wᵢ Eᵢ sampled at the profile's FE nodes and N_φ angles.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationField {
    pub n_phi: usize,
    /// Nodal radii of the FE space the samples live on.
    pub r: Vec<f64>,
    /// Largest azimuthal frequency present.
    pub band_limit: usize,
    /// w₀…w₄, index `j * n_nodes + node`, so each angle is a nodal array.
    pub w: [Vec<f64>; 5],
}

impl PerturbationField {
    pub fn zeros(profile: &Profile, n_phi: usize) -> Result<Self, FieldError> {
        check_n_phi(n_phi)?;
        let n = profile.n_nodes();
        let mut w: [Vec<f64>; 5] = Default::default();
        w.iter_mut().for_each(|c| *c = vec![0.0; n * n_phi]);
        Ok(Self {
            n_phi,
            r: profile.r().to_vec(),
            band_limit: 0,
            w,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.r.len()
    }

    pub fn column(&self, l: usize, j: usize) -> &[f64] {
        let n = self.n_nodes();
        &self.w[l][j * n..(j + 1) * n]
    }

    fn add_mode(&mut self, l: usize, radial: &[f64], m: usize, sine: bool) {
        let n = self.n_nodes();
        for j in 0..self.n_phi {
            let phi = 2.0 * PI * j as f64 / self.n_phi as f64;
            let a = if sine {
                (m as f64 * phi).sin()
            } else {
                (m as f64 * phi).cos()
            };
            for (x, &y) in self.w[l][j * n..(j + 1) * n].iter_mut().zip(radial) {
                *x += a * y;
            }
        }
        self.band_limit = self.band_limit.max(m);
    }

    /// (w₀, w₁) cos mφ and w₂ = −sgn(k) w₂ sin mφ (constant for m = 0).
    ///
    /// ℒ of this field is π𝒫ₘ(w₀, w₁, w₂) for m ≥ 1 and 2π𝒫₀ for m = 0.
    pub fn v1_mode(
        profile: &Profile,
        n_phi: usize,
        m: usize,
        w0: &[f64],
        w1: &[f64],
        w2: &[f64],
    ) -> Result<Self, FieldError> {
        let mut f = Self::zeros(profile, n_phi)?;
        f.add_mode(0, w0, m, false);
        f.add_mode(1, w1, m, false);
        if m == 0 {
            f.add_mode(2, w2, 0, false);
        } else {
            let s = -(profile.params.k.signum() as f64);
            let w2s: Vec<f64> = w2.iter().map(|x| s * x).collect();
            f.add_mode(2, &w2s, m, true);
        }
        Ok(f)
    }

    /// w₃ + i w₄ = ξₙ e^{inφ} + ξ_{k−n} e^{i(k−n)φ} with real radial parts.
    pub fn v2_pair(
        profile: &Profile,
        n_phi: usize,
        n: i32,
        xn: &[f64],
        xp: &[f64],
    ) -> Result<Self, FieldError> {
        let mut f = Self::zeros(profile, n_phi)?;
        let k = profile.params.k;
        for (idx, x) in [(n, xn), (k - n, xp)] {
            let m = idx.unsigned_abs() as usize;
            let s = idx.signum() as f64;
            f.add_mode(3, x, m, false);
            if m > 0 {
                let xs: Vec<f64> = x.iter().map(|y| s * y).collect();
                f.add_mode(4, &xs, m, true);
            }
        }
        Ok(f)
    }

    /// Translation triple (v′, u′, u/r) in the m = 1 pattern, cut off on [R/2, R].
    pub fn translation(profile: &Profile, n_phi: usize) -> Result<Self, FieldError> {
        let big_r = profile.r_eff();
        let (w0, w1, w2) = translation_triple(profile, &Cutoff::outer(0.5 * big_r, big_r));
        Self::v1_mode(profile, n_phi, 1, &w0, &w1, &w2)
    }

    /// Random band-limited field: every (component, mode, cos/sin) slot gets a
    /// uniform amplitude times a smooth bump supported inside (0, 0.9 R).
    pub fn random(
        profile: &Profile,
        n_phi: usize,
        band_limit: usize,
        seed: u64,
    ) -> Result<Self, FieldError> {
        let mut f = Self::zeros(profile, n_phi)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let big_r = profile.r_eff();
        let (c_hi, w_hi) = ((0.3 * big_r).max(1.0), (0.25 * big_r).max(0.6));
        for l in 0..5 {
            for m in 0..=band_limit {
                for sine in [false, true] {
                    if m == 0 && sine {
                        continue;
                    }
                    let amp: f64 = rng.gen_range(-1.0..1.0);
                    let c: f64 = rng.gen_range(0.5..c_hi);
                    let w = rng.gen_range(0.3..w_hi).min(c - 0.1).min(0.9 * big_r - c);
                    let radial: Vec<f64> = profile
                        .r()
                        .iter()
                        .map(|&r| amp * bump((r - c) / w))
                        .collect();
                    f.add_mode(l, &radial, m, sine);
                }
            }
        }
        f.band_limit = band_limit;
        Ok(f)
    }

    /// Copy keeping only the listed components.
    pub fn project(&self, keep: &[usize]) -> Self {
        let mut out = self.clone();
        for l in 0..5 {
            if !keep.contains(&l) {
                out.w[l].iter_mut().for_each(|x| *x = 0.0);
            }
        }
        out
    }

    pub fn v1_part(&self) -> Self {
        self.project(&[0, 1, 2])
    }

    pub fn v2_part(&self) -> Self {
        self.project(&[3, 4])
    }

    /// Rows `r,phi,w0,w1,w2,w3,w4`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,phi,w0,w1,w2,w3,w4\n");
        let n = self.n_nodes();
        for i in 0..n {
            for j in 0..self.n_phi {
                let phi = 2.0 * PI * j as f64 / self.n_phi as f64;
                let _ = write!(s, "{},{}", self.r[i], phi);
                for l in 0..5 {
                    let _ = write!(s, ",{}", self.w[l][j * n + i]);
                }
                s.push('\n');
            }
        }
        s
    }
}

fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (1.0 - t * t).powi(4)
    } else {
        0.0
    }
}

fn check_pair<'a>(q: &'a QTensorField, p: &PerturbationField) -> Result<&'a Profile, FieldError> {
    let profile = q.profile().ok_or(FieldError::NoProfile)?;
    if p.r.as_slice() != profile.r() || p.n_phi < 8 {
        return Err(FieldError::GridMismatch);
    }
    let k = profile.params.k.unsigned_abs();
    if p.band_limit + 1 + k as usize > p.n_phi / 2 {
        return Err(FieldError::Aliasing {
            band: p.band_limit,
            n_phi: p.n_phi,
            k,
        });
    }
    let n = p.n_nodes();
    if (0..p.n_phi).any(|j| p.w.iter().any(|c| c[j * n + n - 1] != 0.0)) {
        return Err(FieldError::NotCompactlySupported);
    }
    Ok(profile)
}

/// φ-derivative of every nodal column, computed spectrally.
fn phi_derivative(
    p: &PerturbationField,
    fft: &Arc<dyn Fft<f64>>,
    ifft: &Arc<dyn Fft<f64>>,
) -> [Vec<f64>; 5] {
    let (n, np) = (p.n_nodes(), p.n_phi);
    let mut out: [Vec<f64>; 5] = Default::default();
    for (l, o) in out.iter_mut().enumerate() {
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut buf: Vec<Complex64> = (0..np)
                    .map(|j| Complex64::new(p.w[l][j * n + i], 0.0))
                    .collect();
                fft.process(&mut buf);
                for (m, x) in buf.iter_mut().enumerate() {
                    *x *= Complex64::new(0.0, signed_freq(m, np) as f64 / np as f64);
                }
                ifft.process(&mut buf);
                buf.iter().map(|z| z.re).collect()
            })
            .collect();
        *o = vec![0.0; n * np];
        for (i, c) in cols.iter().enumerate() {
            for j in 0..np {
                o[j * n + i] = c[j];
            }
        }
    }
    out
}

/// ℒ[Q](P) = ∫ |∇P|² − a²|P|² − 2b² tr(P²Q) + c²(|Q|²|P|² + 2 tr(QP)²) dx.
///
/// Gauss quadrature of the profile's FE space in r and the trapezoid rule in φ.
/// The gradient is taken in the moving frame, where only E₁ and E₂ rotate.
pub fn l_direct(q: &QTensorField, p: &PerturbationField) -> Result<f64, FieldError> {
    let profile = check_pair(q, p)?;
    let params = &profile.params;
    let (sp, c) = (&profile.space, &profile.quad);
    let np = p.n_phi;
    let n = p.n_nodes();
    let mut planner = FftPlanner::new();
    let dphi = phi_derivative(
        p,
        &planner.plan_fft_forward(np),
        &planner.plan_fft_inverse(np),
    );
    let bases: Vec<[Matrix3<f64>; 5]> =
        angles(np).iter().map(|&phi| basis(params.k, phi)).collect();
    let kf = params.k as f64;
    let dphi_w = 2.0 * PI / np as f64;
    let partial: Vec<f64> = (0..sp.n_elements())
        .into_par_iter()
        .map(|e| {
            let mut acc = 0.0;
            for j in 0..np {
                let vals: Vec<(Vec<f64>, Vec<f64>)> = (0..5)
                    .map(|l| sp.element_values(&p.w[l][j * n..(j + 1) * n], e))
                    .collect();
                let dps: Vec<Vec<f64>> = (0..5)
                    .map(|l| sp.element_values(&dphi[l][j * n..(j + 1) * n], e).0)
                    .collect();
                let b = &bases[j];
                for qi in 0..c.nq {
                    let i = c.at(e, qi);
                    let r = c.r[i];
                    let w: [f64; 5] = std::array::from_fn(|l| vals[l].0[qi]);
                    let wr: f64 = (0..5).map(|l| vals[l].1[qi].powi(2)).sum();
                    let d: [f64; 5] = std::array::from_fn(|l| dps[l][qi]);
                    let ang = d[0].powi(2)
                        + (d[1] - kf * w[2]).powi(2)
                        + (d[2] + kf * w[1]).powi(2)
                        + d[3].powi(2)
                        + d[4].powi(2);
                    let pm = (0..5).fold(Matrix3::zeros(), |acc, l| acc + b[l] * w[l]);
                    let qm = b[1] * c.u[i] + b[0] * c.v[i];
                    let (p2, q2) = (pm.norm_squared(), qm.norm_squared());
                    let tqp = (qm * pm).trace();
                    let pot = -params.a2 * p2 - 2.0 * params.b2 * (pm * pm * qm).trace()
                        + params.c2 * (q2 * p2 + 2.0 * tqp * tqp);
                    acc += (wr + ang / (r * r) + pot) * c.wr[i];
                }
            }
            acc * dphi_w
        })
        .collect();
    Ok(partial.iter().sum())
}

/// Direct and mode-summed values of ℒ[Q](P).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSumReport {
    pub direct: f64,
    pub via_modes: f64,
    pub v1_terms: Vec<(usize, f64)>,
    /// Keyed by the smaller index of each pair {n, k − n}.
    pub v2_terms: Vec<(i32, f64)>,
}

impl ModeSumReport {
    pub fn discrepancy(&self) -> f64 {
        (self.direct - self.via_modes).abs() / (1.0 + self.direct.abs())
    }

    pub fn n_terms(&self, tol: f64) -> usize {
        self.v1_terms.iter().filter(|t| t.1.abs() > tol).count()
            + self.v2_terms.iter().filter(|t| t.1.abs() > tol).count()
    }
}

/// Sums the Fourier-sector forms over the modes of P and compares with [`l_direct`].
///
/// V1: with wₗ = aₗ cos mφ + bₗ sin mφ, the m-th term is
/// π[𝒫ₘ(a₀, a₁, −sgn(k) b₂) + 𝒫ₘ(b₀, b₁, sgn(k) a₂)] (2π𝒫₀(a₀, a₁, a₂) for m = 0).
/// V2: with w₃ + i w₄ = Σ ξₙ e^{inφ}, each pair {n, k − n} contributes 2π times the
/// pair form on (Re ξₙ, Re ξ_{k−n}) plus the pair form on (Im ξₙ, −Im ξ_{k−n}).
pub fn mode_sum_check(
    q: &QTensorField,
    p: &PerturbationField,
) -> Result<ModeSumReport, FieldError> {
    let direct = l_direct(q, p)?;
    let profile = q.profile().unwrap();
    let k = profile.params.k;
    let sk = if k >= 0 { 1.0 } else { -1.0 };
    let (n, np) = (p.n_nodes(), p.n_phi);
    let big_m = p.band_limit;
    let fft = FftPlanner::new().plan_fft_forward(np);
    let spectrum = |data: &dyn Fn(usize, usize) -> Complex64| -> Vec<Vec<Complex64>> {
        // [node][frequency]
        (0..n)
            .map(|i| {
                let mut buf: Vec<Complex64> = (0..np).map(|j| data(i, j)).collect();
                fft.process(&mut buf);
                buf.iter().map(|z| z / np as f64).collect()
            })
            .collect()
    };
    let s: Vec<Vec<Vec<Complex64>>> = (0..3)
        .map(|l| spectrum(&|i, j| Complex64::new(p.w[l][j * n + i], 0.0)))
        .collect();
    let cos_sin = |l: usize, m: usize| -> (Vec<f64>, Vec<f64>) {
        let f = if m == 0 { 1.0 } else { 2.0 };
        (
            s[l].iter().map(|c| f * c[m].re).collect(),
            s[l].iter().map(|c| -f * c[m].im).collect(),
        )
    };
    let v1_terms: Vec<(usize, f64)> = (0..=big_m)
        .into_par_iter()
        .map(|m| {
            let (a0, b0) = cos_sin(0, m);
            let (a1, b1) = cos_sin(1, m);
            let (a2, b2) = cos_sin(2, m);
            let mi = m as i32;
            let val = if m == 0 {
                2.0 * PI * pm_value(profile, 0, &a0, &a1, &a2)
            } else {
                let mb2: Vec<f64> = b2.iter().map(|x| -sk * x).collect();
                let pa2: Vec<f64> = a2.iter().map(|x| sk * x).collect();
                PI * (pm_value(profile, mi, &a0, &a1, &mb2) + pm_value(profile, mi, &b0, &b1, &pa2))
            };
            (m, val)
        })
        .collect();

    let xi = spectrum(&|i, j| Complex64::new(p.w[3][j * n + i], p.w[4][j * n + i]));
    let bm = big_m as i32;
    let coeff = |idx: i32| -> (Vec<f64>, Vec<f64>) {
        if idx.abs() > bm {
            return (vec![0.0; n], vec![0.0; n]);
        }
        let slot = idx.rem_euclid(np as i32) as usize;
        (
            xi.iter().map(|c| c[slot].re).collect(),
            xi.iter().map(|c| c[slot].im).collect(),
        )
    };
    let keys: BTreeSet<i32> = (-bm..=bm).map(|idx| idx.min(k - idx)).collect();
    let params = &profile.params;
    let v2_terms: Vec<(i32, f64)> = keys
        .into_par_iter()
        .map(|nn| {
            let partner = k - nn;
            let (re_n, im_n) = coeff(nn);
            let val = if partner == nn {
                let re = forms::evaluate(
                    &profile.space,
                    &profile.quad,
                    &v2_form_spec(params, nn, k, V2Part::SelfReal),
                    &[&re_n],
                );
                let im = forms::evaluate(
                    &profile.space,
                    &profile.quad,
                    &v2_form_spec(params, nn, k, V2Part::SelfImag),
                    &[&im_n],
                );
                re + im
            } else {
                let (re_p, im_p) = coeff(partner);
                let neg_im_p: Vec<f64> = im_p.iter().map(|x| -x).collect();
                v2_pair_value(profile, nn, &re_n, &re_p)
                    + v2_pair_value(profile, nn, &im_n, &neg_im_p)
            };
            (nn, 2.0 * PI * val)
        })
        .collect();
    let via_modes =
        v1_terms.iter().map(|t| t.1).sum::<f64>() + v2_terms.iter().map(|t| t.1).sum::<f64>();
    Ok(ModeSumReport {
        direct,
        via_modes,
        v1_terms,
        v2_terms,
    })
}

/// Summary of a batch of random mode-sum checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check2dReport {
    pub n_phi: usize,
    pub band_limit: usize,
    pub draws: usize,
    pub max_discrepancy: f64,
    pub min_direct: f64,
    pub v1_v2_split_discrepancy: f64,
    pub el_residual: f64,
}

pub fn check_2d(
    profile: &Profile,
    n_phi: usize,
    band_limit: usize,
    draws: usize,
    seed: u64,
) -> Result<Check2dReport, FieldError> {
    let q = reconstruct_q(profile, n_phi)?;
    let mut max_discrepancy: f64 = 0.0;
    let mut min_direct = f64::INFINITY;
    let mut split: f64 = 0.0;
    for d in 0..draws {
        let p = PerturbationField::random(profile, n_phi, band_limit, seed.wrapping_add(d as u64))?;
        let rep = mode_sum_check(&q, &p)?;
        max_discrepancy = max_discrepancy.max(rep.discrepancy());
        min_direct = min_direct.min(rep.direct);
        let parts = l_direct(&q, &p.v1_part())? + l_direct(&q, &p.v2_part())?;
        split = split.max((rep.direct - parts).abs() / (1.0 + rep.direct.abs()));
    }
    Ok(Check2dReport {
        n_phi,
        band_limit,
        draws,
        max_discrepancy,
        min_direct,
        v1_v2_split_discrepancy: split,
        el_residual: el_residual(&q, &profile.params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Domain;
    use crate::radial_solver::{solve, SolverOptions};

    fn profile() -> Profile {
        let p = ModelParams::new(1.0, 1.0, 1.0, 1, Domain::FiniteDisk { radius: 6.0 }).unwrap();
        solve(
            &p,
            &SolverOptions {
                n_elements: 40,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn basis_orthonormal_traceless() {
        for phi in [0.0, 0.3, 2.0] {
            let b = basis(1, phi);
            for i in 0..5 {
                assert!(b[i].trace().abs() < 1e-15);
                assert_eq!(b[i], b[i].transpose());
                for j in 0..5 {
                    let d = (b[i].transpose() * b[j]).trace();
                    assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn bad_grids_rejected() {
        let prof = profile();
        assert_eq!(
            reconstruct_q(&prof, 7).unwrap_err(),
            FieldError::BadAngularGrid(7)
        );
        assert_eq!(
            reconstruct_q(&prof, 6).unwrap_err(),
            FieldError::BadAngularGrid(6)
        );
        let q = reconstruct_q_with(&prof, 32, 16).unwrap();
        let p = PerturbationField::random(&prof, 16, 7, 1).unwrap();
        assert!(matches!(l_direct(&q, &p), Err(FieldError::Aliasing { .. })));
    }

    #[test]
    fn zero_perturbation() {
        let prof = profile();
        let q = reconstruct_q_with(&prof, 32, 16).unwrap();
        let p = PerturbationField::zeros(&prof, 16).unwrap();
        assert_eq!(l_direct(&q, &p).unwrap(), 0.0);
    }

    #[test]
    fn zero_field_residual() {
        let r: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let q = QTensorField::constant(1, r, 16, Matrix3::zeros()).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0, 1, Domain::WholePlane).unwrap();
        assert_eq!(el_residual(&q, &p), 0.0);
    }

    #[test]
    fn random_field_vanishes_near_ends() {
        let prof = profile();
        let p = PerturbationField::random(&prof, 16, 3, 9).unwrap();
        let n = p.n_nodes();
        for l in 0..5 {
            for j in 0..16 {
                assert_eq!(p.w[l][j * n], 0.0);
                assert_eq!(p.w[l][j * n + n - 1], 0.0);
            }
        }
    }
}
