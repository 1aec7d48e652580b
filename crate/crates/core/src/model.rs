//! Bulk potential, closed-form constants and regime classification.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub(crate) const SQRT2: f64 = std::f64::consts::SQRT_2;
pub(crate) const SQRT3: f64 = 1.732_050_807_568_877_2;
pub(crate) const SQRT6: f64 = 2.449_489_742_783_178;

/// Relative width of the band around b⁴ = 3a²c² that is classified as critical.
pub const CRITICAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    FiniteDisk { radius: f64 },
    WholePlane,
}

/// Physical coefficients, winding index and domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub k: i32,
    pub domain: Domain,
}

impl ModelParams {
    pub fn new(a2: f64, b2: f64, c2: f64, k: i32, domain: Domain) -> Result<Self, ModelError> {
        let p = Self {
            a2,
            b2,
            c2,
            k,
            domain,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.a2.is_finite() && self.a2 >= 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "a2 must be >= 0, got {}",
                self.a2
            )));
        }
        if !(self.b2.is_finite() && self.b2 > 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "b2 must be > 0, got {}",
                self.b2
            )));
        }
        if !(self.c2.is_finite() && self.c2 > 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "c2 must be > 0, got {}",
                self.c2
            )));
        }
        if self.k == 0 {
            return Err(ModelError::InvalidParams(
                "winding index k must be nonzero".into(),
            ));
        }
        if let Domain::FiniteDisk { radius } = self.domain {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(ModelError::InvalidParams(format!(
                    "radius must be > 0, got {radius}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_b2(&self, b2: f64) -> Self {
        Self { b2, ..*self }
    }

    pub fn is_whole_plane(&self) -> bool {
        matches!(self.domain, Domain::WholePlane)
    }

    pub fn abs_k(&self) -> f64 {
        self.k.unsigned_abs() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SubCritical,
    Critical,
    SuperCritical,
}

impl Regime {
    pub fn classify(a2: f64, b2: f64, c2: f64) -> Self {
        let lhs = b2 * b2;
        let rhs = 3.0 * a2 * c2;
        let d = lhs - rhs;
        if d.abs() <= CRITICAL_TOL * lhs.max(rhs) {
            Regime::Critical
        } else if d < 0.0 {
            Regime::SubCritical
        } else {
            Regime::SuperCritical
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkConstants {
    pub s_plus: f64,
    pub s_minus: f64,
    pub regime: Regime,
    pub u_star: f64,
    pub v_star: f64,
}

pub fn bulk_constants(params: &ModelParams) -> BulkConstants {
    let (a2, b2, c2) = (params.a2, params.b2, params.c2);
    let disc = (b2 * b2 + 24.0 * a2 * c2).sqrt();
    let s_plus = (b2 + disc) / (4.0 * c2);
    // Rationalized form of (b² − disc)/(4c²); the direct form cancels badly for small a².
    let s_minus = -6.0 * a2 / (b2 + disc);
    BulkConstants {
        s_plus,
        s_minus,
        regime: Regime::classify(a2, b2, c2),
        u_star: s_plus / SQRT2,
        v_star: -s_plus / SQRT6,
    }
}

pub fn bulk_f(params: &ModelParams, p: f64, q: f64) -> f64 {
    let rho2 = p * p + q * q;
    -0.5 * params.a2 * rho2 + 0.25 * params.c2 * rho2 * rho2
        - params.b2 / (3.0 * SQRT6) * q * (q * q - 3.0 * p * p)
}

/// Gradient (h, g) = (∂f/∂p, ∂f/∂q).
pub fn bulk_grad(params: &ModelParams, p: f64, q: f64) -> (f64, f64) {
    let (a2, b2, c2) = (params.a2, params.b2, params.c2);
    let rho2 = p * p + q * q;
    let h = p * (-a2 + (2.0f64 / 3.0).sqrt() * b2 * q + c2 * rho2);
    let g = q * (-a2 - b2 * q / SQRT6 + c2 * rho2) + b2 * p * p / SQRT6;
    (h, g)
}

pub fn bulk_hessian(params: &ModelParams, p: f64, q: f64) -> [[f64; 2]; 2] {
    let (a2, b2, c2) = (params.a2, params.b2, params.c2);
    let fpp = -a2 + 2.0 * b2 * q / SQRT6 + c2 * (3.0 * p * p + q * q);
    let fqq = -a2 - 2.0 * b2 * q / SQRT6 + c2 * (p * p + 3.0 * q * q);
    let fpq = 2.0 * p * (b2 / SQRT6 + c2 * q);
    [[fpp, fpq], [fpq, fqq]]
}

/// Largest eigenvalue magnitude of the bulk Hessian at the far-field minimum.
///
/// Used as the natural unit for "small" eigenvalues of the second-variation forms.
pub fn spectral_scale(params: &ModelParams) -> f64 {
    let bc = bulk_constants(params);
    let h = bulk_hessian(params, bc.u_star, bc.v_star);
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr).abs() + disc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCoeffs {
    pub p1: f64,
    pub q1: f64,
}

/// Coefficients of the r⁻² corrections u ≈ s₊/√2 + p1/r², v ≈ −s₊/√6 + q1/r².
pub fn asymptotic_coeffs(params: &ModelParams) -> Result<AsymptoticCoeffs, ModelError> {
    if !params.is_whole_plane() {
        return Err(ModelError::FiniteDomain);
    }
    Ok(asymptotic_coeffs_unchecked(params))
}

pub(crate) fn asymptotic_coeffs_unchecked(params: &ModelParams) -> AsymptoticCoeffs {
    let bc = bulk_constants(params);
    let (b2, c2, s) = (params.b2, params.c2, bc.s_plus);
    let k2 = (params.k as f64).powi(2);
    let den = b2 * (-b2 + 4.0 * c2 * s);
    let p1 = -(SQRT2 * k2 / 2.0) * (2.0 * b2 + c2 * s) / den;
    let q1 = if bc.regime == Regime::Critical {
        0.0
    } else {
        -(SQRT6 * k2 / 2.0) * (-b2 + c2 * s) / den
    };
    AsymptoticCoeffs { p1, q1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkMinima {
    /// (0, 2s₊/√6), (s₊/√2, −s₊/√6), (−s₊/√2, −s₊/√6), each Newton-polished.
    pub locations: Vec<(f64, f64)>,
    /// Minimum value evaluated at the polished points.
    pub value: f64,
    /// −a²s₊²/3 − 2b²s₊³/27 + c²s₊⁴/6, the constant as usually printed.
    pub printed_constant: f64,
    /// −a²s₊²/3 − 2b²s₊³/27 + c²s₊⁴/9, the value of f at the minimizers.
    pub closed_form: f64,
    /// value − printed_constant.
    pub discrepancy: f64,
}

pub fn minima_of_f(params: &ModelParams) -> BulkMinima {
    let bc = bulk_constants(params);
    let s = bc.s_plus;
    let seeds = [
        (0.0, 2.0 * s / SQRT6),
        (s / SQRT2, -s / SQRT6),
        (-s / SQRT2, -s / SQRT6),
    ];
    let locations: Vec<(f64, f64)> = seeds
        .iter()
        .map(|&(p, q)| polish_critical_point(params, p, q))
        .collect();
    let value = locations
        .iter()
        .map(|&(p, q)| bulk_f(params, p, q))
        .fold(f64::INFINITY, f64::min);
    let (a2, b2, c2) = (params.a2, params.b2, params.c2);
    let base = -a2 * s * s / 3.0 - 2.0 * b2 * s.powi(3) / 27.0;
    let printed_constant = base + c2 * s.powi(4) / 6.0;
    let closed_form = base + c2 * s.powi(4) / 9.0;
    BulkMinima {
        locations,
        value,
        printed_constant,
        closed_form,
        discrepancy: value - printed_constant,
    }
}

/// Newton iteration on ∇f = 0.
pub fn polish_critical_point(params: &ModelParams, mut p: f64, mut q: f64) -> (f64, f64) {
    for _ in 0..50 {
        let (h, g) = bulk_grad(params, p, q);
        let m = bulk_hessian(params, p, q);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dp = (m[1][1] * h - m[0][1] * g) / det;
        let dq = (m[0][0] * g - m[1][0] * h) / det;
        p -= dp;
        q -= dq;
        if dp.abs().max(dq.abs()) <= 1e-16 * (1.0 + p.abs().max(q.abs())) {
            break;
        }
    }
    (p, q)
}
