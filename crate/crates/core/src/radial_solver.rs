//! Finite-element solution of the singular radial system
//!
//!   u'' + u'/r − k²u/r² = h(u, v),   v'' + v'/r = g(u, v),
//!   u(0) = 0, v'(0) = 0, u(R) = s₊/√2, v(R) = −s₊/√6,
//!
//! in the r-weighted weak form, plus diagnostics of the qualitative
//! properties of the solution.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, SymBand};
use crate::error::{MeshError, SolverError};
use crate::fem::{FeSpace, Grading, RadialMesh, MIN_ELEMENTS};
use crate::forms::{self, DofMap, FormLabel, FormSpec, MassKind, OriginConstraint, QuadCache};
use crate::model::{
    asymptotic_coeffs_unchecked, bulk_constants, bulk_f, bulk_grad, bulk_hessian, spectral_scale,
    Domain, ModelParams, Regime, SQRT3, SQRT6,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub n_elements: usize,
    pub grading: Grading,
    /// Polynomial degree of the Lagrange elements.
    pub degree: usize,
    /// Scaled residual at which Newton stops.
    pub tol: f64,
    /// Newton iterations per round.
    pub max_newton: usize,
    /// Number of b² stages used to reach a supercritical target.
    pub continuation_steps: usize,
    /// Outer radius for whole-plane runs; `None` applies the |p1|/R² ≤ 1e−3·s₊ rule.
    pub truncation_radius: Option<f64>,
    pub gradient_flow_steps: usize,
    /// Newton / gradient-flow alternations before giving up.
    pub max_rounds: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_elements: 2000,
            grading: Grading::default(),
            degree: 6,
            tol: 1e-10,
            max_newton: 50,
            continuation_steps: 10,
            truncation_radius: None,
            gradient_flow_steps: 200,
            max_rounds: 4,
        }
    }
}

/// Outer radius of the computational interval.
pub fn effective_radius(params: &ModelParams, truncation: Option<f64>) -> f64 {
    match params.domain {
        Domain::FiniteDisk { radius } => radius,
        Domain::WholePlane => truncation.unwrap_or_else(|| {
            let s = bulk_constants(params).s_plus;
            let p1 = asymptotic_coeffs_unchecked(params).p1;
            (p1.abs() * 1e3 / s).sqrt()
        }),
    }
}

pub fn build_mesh(
    params: &ModelParams,
    n_elements: usize,
    grading: Grading,
    truncation: Option<f64>,
) -> Result<RadialMesh, MeshError> {
    if n_elements < MIN_ELEMENTS {
        return Err(MeshError::TooFewElements {
            got: n_elements,
            min: MIN_ELEMENTS,
        });
    }
    RadialMesh::partition(effective_radius(params, truncation), n_elements, grading)
}

/// Dirichlet data (u(R_eff), v(R_eff)).
pub fn boundary_values(params: &ModelParams, r_eff: f64) -> (f64, f64) {
    let bc = bulk_constants(params);
    let (u0, v0) = (bc.u_star, bc.v_star);
    match params.domain {
        Domain::FiniteDisk { .. } => (u0, v0),
        Domain::WholePlane => {
            let a = asymptotic_coeffs_unchecked(params);
            (u0 + a.p1 / (r_eff * r_eff), v0 + a.q1 / (r_eff * r_eff))
        }
    }
}

/// A (possibly unconverged) radial profile on a finite-element space.
#[derive(Debug, Clone)]
pub struct Profile {
    pub params: ModelParams,
    pub space: FeSpace,
    /// Nodal values at `space.dof_r`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Nodal derivatives, averaged across element boundaries.
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub boundary: (f64, f64),
    pub residual_norm: f64,
    pub converged: bool,
    pub newton_iterations: usize,
    pub quad: QuadCache,
}

impl Profile {
    pub fn from_nodal(params: ModelParams, space: FeSpace, u: Vec<f64>, v: Vec<f64>) -> Self {
        let du = space.nodal_derivative(&u);
        let dv = space.nodal_derivative(&v);
        let quad = QuadCache::new(&space, &u, &v);
        let boundary = (*u.last().unwrap(), *v.last().unwrap());
        Self {
            params,
            space,
            u,
            v,
            du,
            dv,
            boundary,
            residual_norm: f64::INFINITY,
            converged: false,
            newton_iterations: 0,
            quad,
        }
    }

    pub fn mesh(&self) -> &RadialMesh {
        &self.space.mesh
    }

    pub fn r(&self) -> &[f64] {
        &self.space.dof_r
    }

    pub fn r_eff(&self) -> f64 {
        self.space.mesh.r_eff
    }

    pub fn n_nodes(&self) -> usize {
        self.u.len()
    }

    pub fn s_plus(&self) -> f64 {
        bulk_constants(&self.params).s_plus
    }

    /// (u, u', v, v') at radius r.
    pub fn eval(&self, r: f64) -> (f64, f64, f64, f64) {
        let e = self.space.mesh.locate(r);
        let (u, du) = self.space.eval_in(&self.u, e, r);
        let (v, dv) = self.space.eval_in(&self.v, e, r);
        (u, du, v, dv)
    }

    /// CSV with header `r,u,v,du,dv`, one row per nodal point.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,u,v,du,dv\n");
        for i in 0..self.n_nodes() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                self.space.dof_r[i], self.u[i], self.v[i], self.du[i], self.dv[i]
            );
        }
        s
    }
}

/// Parses the output of [`Profile::to_csv`] into columns (r, u, v, du, dv).
pub fn parse_profile_csv(text: &str) -> Result<[Vec<f64>; 5], String> {
    let mut lines = text.lines();
    match lines.next() {
        Some("r,u,v,du,dv") => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let mut cols: [Vec<f64>; 5] = Default::default();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(format!("line {}: expected 5 fields", ln + 2));
        }
        for (c, p) in cols.iter_mut().zip(parts) {
            c.push(
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("line {}: {e}", ln + 2))?,
            );
        }
    }
    Ok(cols)
}

/// Starting profile: u₀ = A r^{|k|}/(r² + ℓ²)^{|k|/2} with ℓ = 1/(c s₊), v₀ ≡ −s₊/√6,
/// both adjusted at r = R_eff to the essential data.
pub fn initial_guess(
    params: &ModelParams,
    mesh: &RadialMesh,
    degree: usize,
) -> Result<Profile, SolverError> {
    let space = FeSpace::new(mesh.clone(), degree)?;
    Ok(initial_guess_on(params, space))
}

pub fn initial_guess_on(params: &ModelParams, space: FeSpace) -> Profile {
    let bc = bulk_constants(params);
    let ell = 1.0 / (params.c2 * bc.s_plus * bc.s_plus).sqrt();
    let kk = params.abs_k();
    let shape = |r: f64| (r / (r * r + ell * ell).sqrt()).powf(kk);
    let r_eff = space.mesh.r_eff;
    let (ub, vb) = boundary_values(params, r_eff);
    let amp = ub / shape(r_eff);
    let n = space.n_dofs();
    let mut u = space.interpolate(|r| amp * shape(r));
    u[0] = 0.0;
    u[n - 1] = ub;
    let mut v = vec![bc.v_star; n];
    v[n - 1] = vb;
    Profile::from_nodal(*params, space, u, v)
}

/// Form spec of the second variation B; also the Newton Jacobian.
pub fn b_form_spec<'a>(params: &'a ModelParams) -> FormSpec<'a> {
    let k2 = (params.k as f64).powi(2);
    FormSpec {
        n_fields: 2,
        singular: vec![k2, 0.0, 0.0, 0.0],
        potential: Box::new(move |_, u, _, v, _, out: &mut [f64]| {
            let h = bulk_hessian(params, u, v);
            out[0] = h[0][0];
            out[1] = h[0][1];
            out[2] = h[1][0];
            out[3] = h[1][1];
        }),
        origin: OriginConstraint::Pinned(vec![true, false]),
        label: FormLabel::B,
    }
}

fn shifted_identity_spec<'a>(params: &'a ModelParams, shift: f64) -> FormSpec<'a> {
    let k2 = (params.k as f64).powi(2);
    FormSpec {
        n_fields: 2,
        singular: vec![k2, 0.0, 0.0, 0.0],
        potential: Box::new(move |_, _, _, _, _, out: &mut [f64]| {
            out[0] = shift;
            out[1] = 0.0;
            out[2] = 0.0;
            out[3] = shift;
        }),
        origin: OriginConstraint::Pinned(vec![true, false]),
        label: FormLabel::Custom {
            name: "preconditioner".into(),
        },
    }
}

/// Weak residual on the free unknowns.
fn residual(
    params: &ModelParams,
    space: &FeSpace,
    dofs: &DofMap,
    u: &[f64],
    v: &[f64],
) -> Vec<f64> {
    let k2 = (params.k as f64).powi(2);
    let re = &space.reference;
    let nl = re.n_local();
    let mut full = vec![0.0; 2 * space.n_dofs()];
    for e in 0..space.n_elements() {
        let (r, w, hlen) = space.element_quadrature(e);
        let jac = 2.0 / hlen;
        let (uq, duq) = space.element_values(u, e);
        let (vq, dvq) = space.element_values(v, e);
        let base = space.dof(e, 0);
        for q in 0..r.len() {
            let wr = w[q] * r[q];
            let (h, g) = bulk_grad(params, uq[q], vq[q]);
            let cu = k2 * uq[q] / (r[q] * r[q]) + h;
            for a in 0..nl {
                let (phi, dphi) = (re.phi[q][a], re.dphi[q][a] * jac);
                full[2 * (base + a)] += wr * (duq[q] * dphi + cu * phi);
                full[2 * (base + a) + 1] += wr * (dvq[q] * dphi + g * phi);
            }
        }
    }
    let mut red = vec![0.0; dofs.n_reduced];
    for (i, deps) in dofs.map.iter().enumerate() {
        for &(j, c) in deps {
            red[j] += c * full[i];
        }
    }
    red
}

struct Scaling {
    diag: Vec<f64>,
    s_plus: f64,
}

impl Scaling {
    fn sup(&self, res: &[f64]) -> f64 {
        res.iter()
            .zip(&self.diag)
            .map(|(r, d)| (r / d).abs())
            .fold(0.0, f64::max)
            / self.s_plus
    }

    fn l2(&self, res: &[f64]) -> f64 {
        res.iter()
            .zip(&self.diag)
            .map(|(r, d)| (r / d).powi(2))
            .sum::<f64>()
            .sqrt()
            / self.s_plus
    }
}

fn scaling(params: &ModelParams, space: &FeSpace, cache: &QuadCache) -> (Scaling, SymBand, DofMap) {
    let eps = spectral_scale(params);
    let spec = shifted_identity_spec(params, eps);
    let (k, _, dofs) = forms::assemble(space, cache, &spec, &MassKind::L2);
    let diag = (0..k.n()).map(|i| k.diag(i)).collect();
    (
        Scaling {
            diag,
            s_plus: bulk_constants(params).s_plus,
        },
        k,
        dofs,
    )
}

fn apply_update(dofs: &DofMap, u: &mut [f64], v: &mut [f64], delta: &[f64], alpha: f64) {
    let fields = dofs.expand(delta);
    for i in 0..u.len() {
        u[i] += alpha * fields[0][i];
        v[i] += alpha * fields[1][i];
    }
}

/// Full Newton steps taken after the tolerance is met.
const POLISH_STEPS: usize = 3;

enum NewtonOutcome {
    Converged { residual: f64, iterations: usize },
    Stalled { residual: f64, iterations: usize },
}

fn newton(
    params: &ModelParams,
    space: &FeSpace,
    dofs: &DofMap,
    sc: &Scaling,
    u: &mut Vec<f64>,
    v: &mut Vec<f64>,
    opts: &SolverOptions,
) -> Result<NewtonOutcome, SolverError> {
    let spec = b_form_spec(params);
    let mut res = residual(params, space, dofs, u, v);
    let mut merit = sc.l2(&res);
    let step = |u: &[f64], v: &[f64], res: &[f64]| -> Option<Vec<f64>> {
        let cache = QuadCache::new(space, u, v);
        let (jac, _, _) = forms::assemble(space, &cache, &spec, &MassKind::L2);
        let lu = BandLu::from_sym(&jac).ok()?;
        let mut delta: Vec<f64> = res.iter().map(|x| -x).collect();
        lu.solve_in_place(&mut delta);
        delta.iter().all(|x| x.is_finite()).then_some(delta)
    };
    for it in 0..opts.max_newton {
        let sup = sc.sup(&res);
        if sup <= opts.tol {
            // The stopping test is loose for smooth error modes; polish with full
            // steps while they still pay off.
            let mut extra = 0;
            while extra < POLISH_STEPS {
                let Some(delta) = step(u, v, &res) else { break };
                let (mut ut, mut vt) = (u.to_vec(), v.to_vec());
                apply_update(dofs, &mut ut, &mut vt, &delta, 1.0);
                let rt = residual(params, space, dofs, &ut, &vt);
                let mt = sc.l2(&rt);
                if !(mt < 0.5 * merit) {
                    break;
                }
                *u = ut;
                *v = vt;
                res = rt;
                merit = mt;
                extra += 1;
            }
            return Ok(NewtonOutcome::Converged {
                residual: sc.sup(&res),
                iterations: it + extra,
            });
        }
        let Some(delta) = step(u, v, &res) else {
            return Ok(NewtonOutcome::Stalled {
                residual: sup,
                iterations: it,
            });
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= 1.0 / 256.0 {
            let (mut ut, mut vt) = (u.clone(), v.clone());
            apply_update(dofs, &mut ut, &mut vt, &delta, alpha);
            let rt = residual(params, space, dofs, &ut, &vt);
            let mt = sc.l2(&rt);
            if mt.is_finite() && (mt < (1.0 - 1e-4 * alpha) * merit || sc.sup(&rt) <= opts.tol) {
                *u = ut;
                *v = vt;
                res = rt;
                merit = mt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // At the round-off floor a full step no longer reduces the merit.
            let sup = sc.sup(&res);
            if sup <= opts.tol {
                return Ok(NewtonOutcome::Converged {
                    residual: sup,
                    iterations: it,
                });
            }
            return Ok(NewtonOutcome::Stalled {
                residual: sup,
                iterations: it,
            });
        }
    }
    let sup = sc.sup(&res);
    if sup <= opts.tol {
        Ok(NewtonOutcome::Converged {
            residual: sup,
            iterations: opts.max_newton,
        })
    } else {
        Ok(NewtonOutcome::Stalled {
            residual: sup,
            iterations: opts.max_newton,
        })
    }
}

/// Semi-implicit gradient flow with the quartic treated explicitly and a
/// stabilizing shift S: (M/τ + K₀ + S M) δ = −R(x); iterates clipped to u ≥ 0, v ≤ 0.
fn gradient_flow(
    params: &ModelParams,
    space: &FeSpace,
    dofs: &DofMap,
    u: &mut [f64],
    v: &mut [f64],
    steps: usize,
) -> Result<(), SolverError> {
    let bc = bulk_constants(params);
    let rho2 = u
        .iter()
        .zip(v.iter())
        .map(|(a, b)| a * a + b * b)
        .fold(bc.s_plus * bc.s_plus, f64::max);
    let stab = params.a2 + 3.0 * params.c2 * rho2 + 2.0 * params.b2 * rho2.sqrt() / SQRT6;
    let tau = 1.0;
    let cache = QuadCache::new(space, u, v);
    let spec = shifted_identity_spec(params, stab + 1.0 / tau);
    let (p, _, _) = forms::assemble(space, &cache, &spec, &MassKind::L2);
    let chol = p.cholesky()?;
    let last = u.len() - 1;
    for _ in 0..steps {
        let mut d = residual(params, space, dofs, u, v);
        chol.solve_in_place(&mut d);
        apply_update(dofs, u, v, &d, -1.0);
        for i in 0..last {
            u[i] = u[i].max(0.0);
            v[i] = v[i].min(0.0);
        }
    }
    Ok(())
}

/// Solves from a given starting profile on its own space.
pub fn solve_profile(
    params: &ModelParams,
    guess: &Profile,
    opts: &SolverOptions,
) -> Result<Profile, SolverError> {
    params.validate()?;
    let space = guess.space.clone();
    let n = space.n_dofs();
    let (ub, vb) = boundary_values(params, space.mesh.r_eff);
    if guess.u[0] != 0.0 {
        return Err(SolverError::BadGuess(format!(
            "u(0) = {} must be 0",
            guess.u[0]
        )));
    }
    let tol_b = 1e-12 * (1.0 + ub.abs() + vb.abs());
    if (guess.u[n - 1] - ub).abs() > tol_b || (guess.v[n - 1] - vb).abs() > tol_b {
        return Err(SolverError::BadGuess(
            "outer boundary values do not match the essential data".into(),
        ));
    }
    let mut u = guess.u.clone();
    let mut v = guess.v.clone();
    u[n - 1] = ub;
    v[n - 1] = vb;
    let (sc, _, dofs) = scaling(params, &space, &guess.quad);
    let mut total_iters = 0;
    let mut last_res = f64::INFINITY;
    for round in 0..opts.max_rounds.max(1) {
        match newton(params, &space, &dofs, &sc, &mut u, &mut v, opts)? {
            NewtonOutcome::Converged {
                residual,
                iterations,
            } => {
                total_iters += iterations;
                check_cone(&space, &u, &v, bulk_constants(params).s_plus)?;
                let mut p = Profile::from_nodal(*params, space, u, v);
                p.residual_norm = residual;
                p.converged = true;
                p.newton_iterations = total_iters;
                return Ok(p);
            }
            NewtonOutcome::Stalled {
                residual,
                iterations,
            } => {
                total_iters += iterations;
                last_res = residual;
                if round + 1 < opts.max_rounds {
                    // Newton left the basin; relax from the last good cone-clipped state.
                    if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
                        u = guess.u.clone();
                        v = guess.v.clone();
                    }
                    gradient_flow(
                        params,
                        &space,
                        &dofs,
                        &mut u,
                        &mut v,
                        opts.gradient_flow_steps,
                    )?;
                }
            }
        }
    }
    Err(SolverError::NonConvergence {
        residual: last_res,
        iterations: total_iters,
    })
}

fn check_cone(space: &FeSpace, u: &[f64], v: &[f64], s_plus: f64) -> Result<(), SolverError> {
    let tol = 1e-10 * s_plus;
    let mut worst = (0.0, 0.0);
    for i in 0..u.len() {
        let viol = (-u[i]).max(v[i]);
        if viol > tol && viol > worst.0 {
            worst = (viol, space.dof_r[i]);
        }
    }
    if worst.0 > 0.0 {
        Err(SolverError::SignViolation {
            violation: worst.0,
            r: worst.1,
        })
    } else {
        Ok(())
    }
}

/// Builds the mesh, the starting guess and solves, continuing in b² for supercritical targets.
pub fn solve(params: &ModelParams, opts: &SolverOptions) -> Result<Profile, SolverError> {
    params.validate()?;
    let mesh = build_mesh(
        params,
        opts.n_elements,
        opts.grading,
        opts.truncation_radius,
    )?;
    let space = FeSpace::new(mesh, opts.degree)?;
    solve_on(params, space, opts)
}

pub fn solve_on(
    params: &ModelParams,
    space: FeSpace,
    opts: &SolverOptions,
) -> Result<Profile, SolverError> {
    let target = bulk_constants(params);
    if target.regime != Regime::SuperCritical || opts.continuation_steps == 0 {
        let guess = initial_guess_on(params, space);
        return solve_profile(params, &guess, opts);
    }
    let steps = opts.continuation_steps;
    let b2c = (3.0 * params.a2 * params.c2).sqrt();
    let first = if b2c > 0.0 { 0 } else { 1 };
    let mut prev: Option<Profile> = None;
    let mut iters = 0;
    for j in first..=steps {
        let b2 = if j == steps {
            params.b2
        } else {
            b2c + (params.b2 - b2c) * j as f64 / steps as f64
        };
        let stage = params.with_b2(b2);
        let guess = match &prev {
            None => initial_guess_on(&stage, space.clone()),
            Some(p) => rescaled_guess(&stage, p),
        };
        let sol = solve_profile(&stage, &guess, opts)?;
        iters += sol.newton_iterations;
        prev = Some(sol);
    }
    let mut p = prev.expect("at least one continuation stage");
    p.newton_iterations = iters;
    Ok(p)
}

/// Previous stage scaled to the new s₊ with the new essential data.
fn rescaled_guess(params: &ModelParams, prev: &Profile) -> Profile {
    let s_new = bulk_constants(params).s_plus;
    let s_old = prev.s_plus();
    let f = s_new / s_old;
    let n = prev.n_nodes();
    let mut u: Vec<f64> = prev.u.iter().map(|x| x * f).collect();
    let mut v: Vec<f64> = prev.v.iter().map(|x| x * f).collect();
    let (ub, vb) = boundary_values(params, prev.r_eff());
    u[0] = 0.0;
    u[n - 1] = ub;
    v[n - 1] = vb;
    Profile::from_nodal(*params, prev.space.clone(), u, v)
}

/// Energy ∫ [½(u'² + v'²) + k²u²/(2r²) + f(u, v) − f(u*, v*)] r dr over [0, R_eff].
pub fn energy(profile: &Profile) -> f64 {
    let p = &profile.params;
    let bc = bulk_constants(p);
    let fmin = bulk_f(p, bc.u_star, bc.v_star);
    let k2 = (p.k as f64).powi(2);
    let c = &profile.quad;
    (0..c.r.len())
        .map(|i| {
            let r = c.r[i];
            let dens = 0.5 * (c.du[i].powi(2) + c.dv[i].powi(2))
                + 0.5 * k2 * c.u[i].powi(2) / (r * r)
                + bulk_f(p, c.u[i], c.v[i])
                - fmin;
            dens * c.wr[i]
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Up,
    Down,
    Constant,
    Mixed,
}

impl Trend {
    fn word(self) -> &'static str {
        match self {
            Trend::Up => "up",
            Trend::Down => "down",
            Trend::Constant => "constant",
            Trend::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub u: Trend,
    pub v: Trend,
    /// e.g. "u up, v down".
    pub verdict: String,
    /// What the regime predicts.
    pub expected: String,
    pub ok: bool,
    /// Largest derivative of the wrong sign (0 when none).
    pub worst_u_violation: f64,
    pub worst_v_violation: f64,
    pub derivative_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub regime: Regime,
    pub box_bounds_ok: bool,
    pub sign_ok: bool,
    pub sqrt3_inequality_ok: bool,
    pub monotonicity: Monotonicity,
    pub p1: Option<f64>,
    pub q1: Option<f64>,
    pub p1_hat: Option<f64>,
    pub q1_hat: Option<f64>,
    pub p1_rel_err: Option<f64>,
    pub q1_rel_err: Option<f64>,
    pub critical_v_constant_ok: Option<bool>,
    pub max_v_deviation: f64,
    pub max_residual: f64,
    pub energy: f64,
}

/// Relative tolerance (in units of s₊) for derivative signs and the critical-regime plateau.
pub const DERIVATIVE_TOL: f64 = 1e-10;
pub const CRITICAL_V_TOL: f64 = 1e-8;

pub fn diagnose(profile: &Profile) -> DiagnosticsReport {
    let p = &profile.params;
    let bc = bulk_constants(p);
    let s = bc.s_plus;
    let n = profile.n_nodes();
    let interior = 1..n - 1;
    let v_lo = (-s / SQRT6).min(2.0 * bc.s_minus / SQRT6);
    let v_hi = (-s / SQRT6).max(2.0 * bc.s_minus / SQRT6);
    let slack = 1e-10 * s;
    let mut box_ok = true;
    let mut sign_ok = true;
    let mut sqrt3_ok = true;
    for i in interior.clone() {
        let (u, v) = (profile.u[i], profile.v[i]);
        if !(u > 0.0 && u < bc.u_star) {
            box_ok = false;
        }
        if !(v > v_lo - slack && v < v_hi + slack) {
            box_ok = false;
        }
        if !(u >= 0.0 && v <= 0.0) {
            sign_ok = false;
        }
        if !(SQRT3 * v + u < 0.0) {
            sqrt3_ok = false;
        }
    }
    let dtol = DERIVATIVE_TOL * s;
    let trend = |d: &[f64]| -> (Trend, f64, f64) {
        let vals = &d[1..n - 1];
        let max_abs = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let worst_neg = vals.iter().fold(0.0f64, |m, &x| m.max(-x));
        let worst_pos = vals.iter().fold(0.0f64, |m, &x| m.max(x));
        if max_abs <= dtol {
            (Trend::Constant, worst_neg, worst_pos)
        } else if worst_neg <= dtol {
            (Trend::Up, worst_neg, worst_pos)
        } else if worst_pos <= dtol {
            (Trend::Down, worst_neg, worst_pos)
        } else {
            (Trend::Mixed, worst_neg, worst_pos)
        }
    };
    let (tu, u_neg, _) = trend(&profile.du);
    let (tv, v_neg, v_pos) = trend(&profile.dv);
    let (expected_v, v_viol) = match bc.regime {
        Regime::SubCritical => (Trend::Up, v_neg),
        Regime::Critical => (Trend::Constant, v_neg.max(v_pos)),
        Regime::SuperCritical => (Trend::Down, v_pos),
    };
    let mono = Monotonicity {
        u: tu,
        v: tv,
        verdict: format!("u {}, v {}", tu.word(), tv.word()),
        expected: format!("u up, v {}", expected_v.word()),
        ok: tu == Trend::Up && tv == expected_v,
        worst_u_violation: u_neg,
        worst_v_violation: if tv == expected_v { 0.0 } else { v_viol },
        derivative_tol: dtol,
    };
    let max_v_dev = profile
        .v
        .iter()
        .fold(0.0f64, |m, &x| m.max((x - bc.v_star).abs()));
    let critical_v_constant_ok =
        (bc.regime == Regime::Critical).then(|| max_v_dev <= CRITICAL_V_TOL * s);
    let (mut p1, mut q1, mut p1_hat, mut q1_hat, mut p1e, mut q1e) =
        (None, None, None, None, None, None);
    if p.is_whole_plane() {
        let a = asymptotic_coeffs_unchecked(p);
        let (ph, qh) = fit_asymptotics(profile);
        p1 = Some(a.p1);
        q1 = Some(a.q1);
        p1_hat = Some(ph);
        q1_hat = Some(qh);
        p1e = Some(rel_err(ph, a.p1));
        q1e = Some(rel_err(qh, a.q1));
    }
    DiagnosticsReport {
        regime: bc.regime,
        box_bounds_ok: box_ok,
        sign_ok,
        sqrt3_inequality_ok: sqrt3_ok,
        monotonicity: mono,
        p1,
        q1,
        p1_hat,
        q1_hat,
        p1_rel_err: p1e,
        q1_rel_err: q1e,
        critical_v_constant_ok,
        max_v_deviation: max_v_dev,
        max_residual: profile.residual_norm,
        energy: energy(profile),
    }
}

fn rel_err(x: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        x.abs()
    } else {
        (x / reference - 1.0).abs()
    }
}

/// Least-squares fit of u − s₊/√2 ≈ p̂₁ r⁻² and v + s₊/√6 ≈ q̂₁ r⁻² over [R/4, R/2].
pub fn fit_asymptotics(profile: &Profile) -> (f64, f64) {
    let bc = bulk_constants(&profile.params);
    let r_eff = profile.r_eff();
    let (mut sxx, mut sxu, mut sxv) = (0.0, 0.0, 0.0);
    for (i, &r) in profile.r().iter().enumerate() {
        if r < 0.25 * r_eff || r > 0.5 * r_eff {
            continue;
        }
        let x = 1.0 / (r * r);
        sxx += x * x;
        sxu += x * (profile.u[i] - bc.u_star);
        sxv += x * (profile.v[i] - bc.v_star);
    }
    (sxu / sxx, sxv / sxx)
}

/// u₀ amplitude at the origin: u ≈ α r^{|k|}.
pub fn origin_amplitude(profile: &Profile) -> f64 {
    let r = profile.r()[1];
    profile.u[1] / r.powf(profile.params.abs_k())
}
