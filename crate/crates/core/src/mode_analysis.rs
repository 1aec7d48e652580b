//! Fourier-mode reduction of the full second variation.
//!
//! In-plane perturbations w₀E₀ + w₁E₁ + w₂E₂ (sector V1) split into the radial
//! forms 𝒫ₘ over (w₀, w₁, w₂); out-of-plane ones w₃E₃ + w₄E₄ (sector V2) split
//! into forms coupling the azimuthal indices n and k − n of w = w₃ + i w₄.
//! The derivations are for |k| = 1; forms for other windings follow the same
//! algebra and are flagged as extensions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::FormError;
use crate::forms::{self, Cutoff, FormLabel, FormSpec, MassKind, OriginConstraint, QuadForm};
use crate::model::{bulk_constants, spectral_scale, ModelParams, Regime, SQRT2, SQRT3, SQRT6};
use crate::radial_solver::Profile;
use crate::stability_radial::{
    b_value, check_compact, eigen_options, lowest_spectrum, lowest_spectrum_with,
    require_converged, SpectrumResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    V1,
    V2,
}

/// One Fourier sector: 𝒫ₘ for V1, the pair (n, k − n) for V2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub sector: Sector,
    pub m_or_n: i32,
    pub k: i32,
}

impl ModeSpec {
    pub fn v1(m: i32, k: i32) -> Self {
        Self {
            sector: Sector::V1,
            m_or_n: m,
            k,
        }
    }

    pub fn v2(n: i32, k: i32) -> Self {
        Self {
            sector: Sector::V2,
            m_or_n: n,
            k,
        }
    }

    pub fn partner(&self) -> Option<i32> {
        (self.sector == Sector::V2).then(|| self.k - self.m_or_n)
    }

    pub fn self_paired(&self) -> bool {
        self.partner() == Some(self.m_or_n)
    }

    /// Representative with n ≤ k − n, so that {n, k − n} has one spelling.
    pub fn canonical(&self) -> Self {
        match self.partner() {
            Some(p) if p < self.m_or_n => Self { m_or_n: p, ..*self },
            _ => *self,
        }
    }

    pub fn component_roles(&self) -> Vec<String> {
        match self.sector {
            Sector::V1 => vec!["w0".into(), "w1".into(), "w2".into()],
            Sector::V2 if self.self_paired() => vec![format!("xi{}", self.m_or_n)],
            Sector::V2 => vec![
                format!("xi{}", self.m_or_n),
                format!("xi{}", self.k - self.m_or_n),
            ],
        }
    }
}

fn check_winding(profile: &Profile, k: i32) -> Result<(), FormError> {
    if k.abs() != profile.params.k.abs() {
        return Err(FormError::WindingMismatch {
            asked: k,
            profile: profile.params.k,
        });
    }
    Ok(())
}

/// Form spec of 𝒫ₘ on (w₀, w₁, w₂).
///
/// In the critical regime b²/√6 + c²v vanishes identically for the exact
/// solution, so the w₀–w₁ coupling is dropped there rather than left at
/// round-off size.
pub fn pm_form_spec(params: &ModelParams, m: i32, k: i32) -> FormSpec<'_> {
    let (am, ak) = (m.unsigned_abs() as f64, k.unsigned_abs() as f64);
    let mut singular = vec![0.0; 9];
    singular[0] = am * am;
    singular[4] = am * am + ak * ak;
    singular[8] = am * am + ak * ak;
    singular[5] = -2.0 * am * ak;
    singular[7] = -2.0 * am * ak;
    let decoupled = bulk_constants(params).regime == Regime::Critical;
    let (a2, b2, c2) = (params.a2, params.b2, params.c2);
    let origin = if m == 0 {
        OriginConstraint::Pinned(vec![false, true, true])
    } else if m.abs() == k.abs() {
        OriginConstraint::Tied {
            i: 1,
            j: 2,
            pinned: vec![true, false, false],
        }
    } else {
        OriginConstraint::Pinned(vec![true, true, true])
    };
    FormSpec {
        n_fields: 3,
        singular,
        potential: Box::new(move |_, u, _, v, _, out: &mut [f64]| {
            out.iter_mut().for_each(|x| *x = 0.0);
            out[0] = -a2 - 2.0 * b2 * v / SQRT6 + c2 * (u * u + 3.0 * v * v);
            out[4] = -a2 + 2.0 * b2 * v / SQRT6 + c2 * (3.0 * u * u + v * v);
            out[8] = -a2 + 2.0 * b2 * v / SQRT6 + c2 * (u * u + v * v);
            let coupling = if decoupled {
                0.0
            } else {
                2.0 * u * (b2 / SQRT6 + c2 * v)
            };
            out[1] = coupling;
            out[3] = coupling;
        }),
        origin,
        label: FormLabel::Pm { m, k },
    }
}

pub fn assemble_pm(profile: &Profile, m: i32, k: i32) -> Result<QuadForm, FormError> {
    assemble_pm_with_mass(profile, m, k, &MassKind::L2)
}

pub fn assemble_pm_with_mass(
    profile: &Profile,
    m: i32,
    k: i32,
    mass: &MassKind,
) -> Result<QuadForm, FormError> {
    if m < 0 {
        return Err(FormError::NegativeMode(m));
    }
    require_converged(profile)?;
    check_winding(profile, k)?;
    let spec = pm_form_spec(&profile.params, m, k);
    let (stiffness, mass, dofs) = forms::assemble(&profile.space, &profile.quad, &spec, mass);
    Ok(QuadForm {
        stiffness,
        mass,
        dofs,
        label: spec.label.clone(),
        extension: k.abs() != 1,
        scale: spectral_scale(&profile.params),
    })
}

/// 𝒫ₘ(w₀, w₁, w₂) by quadrature on nodal arrays.
pub fn pm_value(profile: &Profile, m: i32, w0: &[f64], w1: &[f64], w2: &[f64]) -> f64 {
    let spec = pm_form_spec(&profile.params, m, profile.params.k);
    forms::evaluate(&profile.space, &profile.quad, &spec, &[w0, w1, w2])
}

/// Field owning each reduced unknown (tied pairs report their first field).
pub fn reduced_fields(form: &QuadForm) -> Vec<usize> {
    let mut owner = vec![usize::MAX; form.dofs.n_reduced];
    for (full, deps) in form.dofs.map.iter().enumerate() {
        for &(r, _) in deps {
            if owner[r] == usize::MAX {
                owner[r] = full % form.dofs.n_fields;
            }
        }
    }
    owner
}

/// Largest stiffness entry coupling w₀ to (w₁, w₂).
pub fn w0_coupling_max(form: &QuadForm) -> f64 {
    let owner = reduced_fields(form);
    let kd = form.stiffness.bandwidth();
    let n = form.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(kd)..i {
            if (owner[i] == 0) != (owner[j] == 0) {
                worst = worst.max(form.stiffness.get(i, j).abs());
            }
        }
    }
    worst
}

/// 𝒫₀ split into the radial second variation and the w₂ part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P0Split {
    /// B(w₁, w₀).
    pub b_part: f64,
    /// ∫ (ζ')² u² r dr with ζ = w₂/u.
    pub f_part: f64,
    /// 𝒫₀(w₀, w₁, w₂).
    pub p0: f64,
}

impl P0Split {
    pub fn discrepancy(&self) -> f64 {
        (self.p0 - self.b_part - self.f_part).abs() / (1.0 + self.p0.abs())
    }
}

pub fn split_p0(
    profile: &Profile,
    w0: &[f64],
    w1: &[f64],
    w2: &[f64],
) -> Result<P0Split, FormError> {
    check_compact(profile, w0)?;
    check_compact(profile, w1)?;
    check_compact(profile, w2)?;
    let sp = &profile.space;
    let c = &profile.quad;
    let mut f_part = 0.0;
    for e in 0..sp.n_elements() {
        let (w, dw) = sp.element_values(w2, e);
        for q in 0..c.nq {
            let i = c.at(e, q);
            let num = dw[q] * c.u[i] - w[q] * c.du[i];
            if num != 0.0 {
                f_part += num * num / (c.u[i] * c.u[i]) * c.wr[i];
            }
        }
    }
    Ok(P0Split {
        b_part: b_value(profile, w1, w0),
        f_part,
        p0: pm_value(profile, 0, w0, w1, w2),
    })
}

/// Hardy factors of a V1 triple: w₀ = v'η, w₁ = u'ξ, w₂ = uζ.
#[derive(Debug, Clone, PartialEq)]
pub struct HardyFactors {
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
    pub zeta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardySplit {
    pub j_m: f64,
    pub i_m: f64,
    pub sos_i_m: f64,
    /// 𝒫ₘ(v'η, u'ξ, uζ) evaluated directly.
    pub p_m: f64,
}

impl HardySplit {
    /// |𝒫ₘ − Jₘ − Iₘ| relative to 1 + |𝒫ₘ|.
    pub fn split_discrepancy(&self) -> f64 {
        (self.p_m - self.j_m - self.i_m).abs() / (1.0 + self.p_m.abs())
    }

    pub fn sos_discrepancy(&self) -> f64 {
        (self.i_m - self.sos_i_m).abs() / (1.0 + self.i_m.abs())
    }
}

/// Jₘ, Iₘ, the sum-of-squares form of Iₘ, and 𝒫ₘ on the factored triple.
pub fn hardy_split_jm_im(
    profile: &Profile,
    m: i32,
    factors: &HardyFactors,
) -> Result<HardySplit, FormError> {
    let p = &profile.params;
    if p.k.abs() != 1 {
        return Err(FormError::NeedsUnitWinding(p.k));
    }
    if m < 1 {
        return Err(FormError::ModeOutOfRange {
            got: m,
            need: "m >= 1",
        });
    }
    if bulk_constants(p).regime == Regime::Critical {
        return Err(FormError::CriticalRegime);
    }
    for f in [&factors.eta, &factors.xi, &factors.zeta] {
        check_compact(profile, f)?;
    }
    let sp = &profile.space;
    let c = &profile.quad;
    let mf = m as f64;
    let bb = p.b2 / SQRT6;
    let spec = pm_form_spec(p, m, p.k);
    let (mut j_m, mut i_m, mut sos) = (0.0, 0.0, 0.0);
    let mut tabs: Vec<[Vec<f64>; 6]> = Vec::with_capacity(sp.n_elements());
    for e in 0..sp.n_elements() {
        let (eta, deta) = sp.element_values(&factors.eta, e);
        let (xi, dxi) = sp.element_values(&factors.xi, e);
        let (zeta, dzeta) = sp.element_values(&factors.zeta, e);
        for q in 0..c.nq {
            let i = c.at(e, q);
            let (r, u, du, v, dv) = (c.r[i], c.u[i], c.du[i], c.v[i], c.dv[i]);
            let (r2, r3) = (r * r, r * r * r);
            let j = dv * dv * deta[q] * deta[q]
                + du * du * dxi[q] * dxi[q]
                + (mf * mf - 1.0) * dv * dv * eta[q] * eta[q] / r2
                - 2.0 * u * dv * du * (bb + p.c2 * v) * (xi[q] - eta[q]).powi(2);
            let im = (mf * mf - 1.0) / r2 * du * du * xi[q] * xi[q]
                + mf * mf / r2 * u * u * zeta[q] * zeta[q]
                + u * u * dzeta[q] * dzeta[q]
                + 2.0 / r3 * u * du * xi[q] * xi[q]
                - 4.0 * mf / r2 * u * du * xi[q] * zeta[q];
            let s = (mf - 1.0).powi(2) / r2 * (du * du * xi[q] * xi[q] + u * u * zeta[q] * zeta[q])
                + 2.0 * (mf - 1.0) / r2 * (du * xi[q] - u * zeta[q]).powi(2)
                + 2.0 * u * du / r3 * (xi[q] - zeta[q] * r).powi(2)
                + u * u / r2 * (zeta[q] + dzeta[q] * r).powi(2);
            j_m += j * c.wr[i];
            i_m += im * c.wr[i];
            sos += s * c.wr[i];
        }
        tabs.push([eta, deta, xi, dxi, zeta, dzeta]);
    }
    let mut cur = (usize::MAX, vec![], vec![]);
    let p_m = forms::evaluate_with(sp, c, &spec, &mut |e, q, val, der| {
        if cur.0 != e {
            cur = (
                e,
                sp.element_second_derivative(&profile.u, e),
                sp.element_second_derivative(&profile.v, e),
            );
        }
        let t = &tabs[e];
        let i = c.at(e, q);
        val[0] = c.dv[i] * t[0][q];
        der[0] = cur.2[q] * t[0][q] + c.dv[i] * t[1][q];
        val[1] = c.du[i] * t[2][q];
        der[1] = cur.1[q] * t[2][q] + c.du[i] * t[3][q];
        val[2] = c.u[i] * t[4][q];
        der[2] = c.du[i] * t[4][q] + c.u[i] * t[5][q];
    });
    Ok(HardySplit {
        j_m,
        i_m,
        sos_i_m: sos,
        p_m,
    })
}

/// Rayleigh quotient of the translation triple (v', u', u/r) in 𝒫₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub r_eff: f64,
    pub rayleigh: f64,
    pub value: f64,
    pub norm2: f64,
}

/// The triple is multiplied by a window equal to 1 on [0, R/2] that vanishes at
/// R_eff, so it satisfies the outer boundary condition.
pub fn kernel_check_m1(profile: &Profile) -> Result<KernelCheck, FormError> {
    let k = profile.params.k;
    if k.abs() != 1 {
        return Err(FormError::NeedsUnitWinding(k));
    }
    let form = assemble_pm(profile, 1, k)?;
    let (w0, w1, w2) = translation_triple(
        profile,
        &Cutoff::outer(0.5 * profile.r_eff(), profile.r_eff()),
    );
    let x = form.dofs.restrict(&[&w0, &w1, &w2]);
    let value = form.value(&x);
    let norm2 = form.mass.quad(&x);
    Ok(KernelCheck {
        r_eff: profile.r_eff(),
        rayleigh: value / norm2,
        value,
        norm2,
    })
}

/// Nodal samples of (v'χ, u'χ, (u/r)χ); u/r at the origin is its limit u'(0).
pub fn translation_triple(profile: &Profile, window: &Cutoff) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let r = profile.r();
    let chi: Vec<f64> = r.iter().map(|&x| window.eval(x).0).collect();
    let w0 = profile.dv.iter().zip(&chi).map(|(a, b)| a * b).collect();
    let w1 = profile.du.iter().zip(&chi).map(|(a, b)| a * b).collect();
    let w2 = (0..r.len())
        .map(|i| {
            if i == 0 {
                profile.du[0] * chi[0]
            } else {
                profile.u[i] / r[i] * chi[i]
            }
        })
        .collect();
    (w0, w1, w2)
}

/// Form spec of the V2 pair (ξₙ, ξ_{k−n}), or of the real or imaginary part
/// of a self-paired index.
pub fn v2_form_spec(params: &ModelParams, n: i32, k: i32, part: V2Part) -> FormSpec<'_> {
    let (a2, b2, c2) = (params.a2, params.b2, params.c2);
    let diag = move |u: f64, v: f64| -a2 - b2 * v / SQRT6 + c2 * (u * u + v * v);
    match part {
        V2Part::Pair => {
            let m = k - n;
            FormSpec {
                n_fields: 2,
                singular: vec![(n * n) as f64, 0.0, 0.0, (m * m) as f64],
                potential: Box::new(move |_, u, _, v, _, out: &mut [f64]| {
                    let d = diag(u, v);
                    out[0] = d;
                    out[3] = d;
                    out[1] = -b2 * u / SQRT2;
                    out[2] = -b2 * u / SQRT2;
                }),
                origin: OriginConstraint::Pinned(vec![n != 0, m != 0]),
                label: FormLabel::V2Pair { n, partner: m, k },
            }
        }
        V2Part::SelfReal | V2Part::SelfImag => {
            let sign = if part == V2Part::SelfReal { -1.0 } else { 1.0 };
            FormSpec {
                n_fields: 1,
                singular: vec![(n * n) as f64],
                potential: Box::new(move |_, u, _, v, _, out: &mut [f64]| {
                    out[0] = diag(u, v) + sign * b2 * u / SQRT2;
                }),
                origin: OriginConstraint::Pinned(vec![n != 0]),
                label: if part == V2Part::SelfReal {
                    FormLabel::V2SelfReal { n, k }
                } else {
                    FormLabel::V2SelfImag { n, k }
                },
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum V2Part {
    Pair,
    SelfReal,
    SelfImag,
}

/// V2 forms for the index pair {n, k − n}: one form for a genuine pair, the
/// real and imaginary parts for a self-paired index.
pub fn assemble_v2_pair(profile: &Profile, n: i32, k: i32) -> Result<Vec<QuadForm>, FormError> {
    require_converged(profile)?;
    check_winding(profile, k)?;
    let parts: &[V2Part] = if 2 * n == k {
        &[V2Part::SelfReal, V2Part::SelfImag]
    } else {
        &[V2Part::Pair]
    };
    Ok(parts
        .iter()
        .map(|&part| {
            let spec = v2_form_spec(&profile.params, n, k, part);
            let (stiffness, mass, dofs) =
                forms::assemble(&profile.space, &profile.quad, &spec, &MassKind::L2);
            QuadForm {
                stiffness,
                mass,
                dofs,
                label: spec.label.clone(),
                extension: k.abs() != 1,
                scale: spectral_scale(&profile.params),
            }
        })
        .collect())
}

/// Paired V2 form on (ξₙ, ξ_{k−n}) by quadrature.
pub fn v2_pair_value(profile: &Profile, n: i32, xn: &[f64], xp: &[f64]) -> f64 {
    let spec = v2_form_spec(&profile.params, n, profile.params.k, V2Part::Pair);
    forms::evaluate(&profile.space, &profile.quad, &spec, &[xn, xp])
}

/// The J₂ lower bound: lhs is the paired form, rhs = ∫ (b²/√2)(−√3v − u)(ξₙ² + ξ_{k−n}²) r dr.
pub fn v2_lower_bound_check(
    profile: &Profile,
    n: i32,
    xn: &[f64],
    xp: &[f64],
) -> Result<(f64, f64), FormError> {
    let k = profile.params.k;
    if k.abs() != 1 {
        return Err(FormError::NeedsUnitWinding(k));
    }
    if k * n < 2 {
        return Err(FormError::ModeOutOfRange {
            got: n,
            need: "k*n >= 2",
        });
    }
    check_compact(profile, xn)?;
    check_compact(profile, xp)?;
    let lhs = v2_pair_value(profile, n, xn, xp);
    let sp = &profile.space;
    let c = &profile.quad;
    let mut rhs = 0.0;
    for e in 0..sp.n_elements() {
        let (a, _) = sp.element_values(xn, e);
        let (b, _) = sp.element_values(xp, e);
        for q in 0..c.nq {
            let i = c.at(e, q);
            rhs += profile.params.b2 / SQRT2
                * (-SQRT3 * c.v[i] - c.u[i])
                * (a[q] * a[q] + b[q] * b[q])
                * c.wr[i];
        }
    }
    Ok((lhs, rhs))
}

/// Both sides of the J₁ rewrite with ξ₀ = vη₀, ξ₁ = uη₁ (k = 1 pair (1, 0)):
/// ∫ [u²η₁'² + v²η₀'² − b²/(√6 v) (√3 v ξ₁ + u ξ₀)²] r dr.
pub fn hardy_split_v2_j1(
    profile: &Profile,
    eta0: &[f64],
    eta1: &[f64],
) -> Result<(f64, f64), FormError> {
    let k = profile.params.k;
    if k.abs() != 1 {
        return Err(FormError::NeedsUnitWinding(k));
    }
    check_compact(profile, eta0)?;
    check_compact(profile, eta1)?;
    let p = &profile.params;
    let sp = &profile.space;
    let c = &profile.quad;
    // Field order (ξ_k, ξ_0): index k pairs with k − k = 0.
    let spec = v2_form_spec(p, k, k, V2Part::Pair);
    let mut cur = (usize::MAX, vec![], vec![], vec![], vec![]);
    let direct = forms::evaluate_with(sp, c, &spec, &mut |e, q, val, der| {
        if cur.0 != e {
            let (a, da) = sp.element_values(eta1, e);
            let (b, db) = sp.element_values(eta0, e);
            cur = (e, a, da, b, db);
        }
        let i = c.at(e, q);
        val[0] = c.u[i] * cur.1[q];
        der[0] = c.du[i] * cur.1[q] + c.u[i] * cur.2[q];
        val[1] = c.v[i] * cur.3[q];
        der[1] = c.dv[i] * cur.3[q] + c.v[i] * cur.4[q];
    });
    let mut rewritten = 0.0;
    for e in 0..sp.n_elements() {
        let (a, da) = sp.element_values(eta1, e);
        let (b, db) = sp.element_values(eta0, e);
        for q in 0..c.nq {
            let i = c.at(e, q);
            let (u, v) = (c.u[i], c.v[i]);
            let (x1, x0) = (u * a[q], v * b[q]);
            let d = u * u * da[q] * da[q] + v * v * db[q] * db[q]
                - p.b2 / (SQRT6 * v) * (SQRT3 * v * x1 + u * x0).powi(2);
            rewritten += d * c.wr[i];
        }
    }
    Ok((direct, rewritten))
}

/// λ_min of 𝒫ₘ against ∫ Σ w_l²/r dr; at least 1 for m ≥ 2 on a stable profile.
pub fn hardy_bound_m(profile: &Profile, m: i32) -> Result<f64, FormError> {
    if m < 2 {
        return Err(FormError::ModeOutOfRange {
            got: m,
            need: "m >= 2",
        });
    }
    let form = assemble_pm_with_mass(profile, m, profile.params.k, &MassKind::InverseSquare)?;
    let opts = eigen_options(&form);
    Ok(lowest_spectrum_with(&form, 1, &opts)?.lambda_min())
}

/// One row of a mode scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScanEntry {
    pub sector: Sector,
    pub m_or_n: i32,
    pub k: i32,
    pub label: FormLabel,
    pub lambda_min: f64,
    pub extension_flag: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScan {
    pub entries: Vec<ModeScanEntry>,
    /// Spectrum of the form holding the smallest eigenvalue.
    pub lowest: SpectrumResult,
}

impl ModeScan {
    pub fn negative_entries(&self, tol: f64) -> Vec<&ModeScanEntry> {
        self.entries
            .iter()
            .filter(|e| e.lambda_min < -tol * self.lowest.scale)
            .collect()
    }
}

/// Eigenpairs computed per scanned form.
pub const SCAN_EIGENPAIRS: usize = 5;

/// V1 forms for m in `m_range` and V2 pairs {n, k − n} for n in `n_range`.
pub fn mode_scan(
    profile: &Profile,
    m_range: std::ops::RangeInclusive<i32>,
    n_range: std::ops::RangeInclusive<i32>,
) -> Result<ModeScan, FormError> {
    require_converged(profile)?;
    let k = profile.params.k;
    let mut specs: Vec<ModeSpec> = m_range.map(|m| ModeSpec::v1(m, k)).collect();
    let mut seen = Vec::new();
    for n in n_range {
        let c = ModeSpec::v2(n, k).canonical();
        if !seen.contains(&c.m_or_n) {
            seen.push(c.m_or_n);
            specs.push(c);
        }
    }
    let results: Vec<Result<Vec<(ModeSpec, SpectrumResult)>, FormError>> = specs
        .par_iter()
        .map(|s| {
            let forms = match s.sector {
                Sector::V1 => vec![assemble_pm(profile, s.m_or_n, k)?],
                Sector::V2 => assemble_v2_pair(profile, s.m_or_n, k)?,
            };
            forms
                .iter()
                .map(|f| Ok((*s, lowest_spectrum(f, SCAN_EIGENPAIRS.min(f.n()))?)))
                .collect()
        })
        .collect();
    let mut entries = Vec::new();
    let mut lowest: Option<SpectrumResult> = None;
    for r in results {
        for (s, spec) in r? {
            entries.push(ModeScanEntry {
                sector: s.sector,
                m_or_n: s.m_or_n,
                k,
                label: spec.label.clone(),
                lambda_min: spec.lambda_min(),
                extension_flag: spec.extension,
                residual: spec.residuals.first().copied().unwrap_or(0.0),
            });
            if lowest
                .as_ref()
                .is_none_or(|l| spec.lambda_min() < l.lambda_min())
            {
                lowest = Some(spec);
            }
        }
    }
    Ok(ModeScan {
        entries,
        lowest: lowest.expect("scan covers at least one form"),
    })
}

/// Default scan ranges: m ∈ 0..=|k|+2 and n ∈ −2..=|k|+2.
pub fn default_scan(profile: &Profile) -> Result<ModeScan, FormError> {
    let ak = profile.params.k.abs();
    mode_scan(profile, 0..=ak + 2, -2..=ak + 2)
}

/// Most negative eigenpair over the default scan of a |k| ≥ 2 profile.
pub fn instability_search(profile: &Profile) -> Result<SpectrumResult, FormError> {
    let k = profile.params.k;
    if k.abs() < 2 {
        return Err(FormError::NeedsHigherWinding(k));
    }
    let scan = default_scan(profile)?;
    let lam = scan.lowest.lambda_min();
    if lam < -1e-8 * scan.lowest.scale {
        Ok(scan.lowest)
    } else {
        Err(FormError::NoNegativeDirection(lam))
    }
}
