//! Generic assembly of radial quadratic forms
//!
//!   Q(w) = ∫ { Σ_f |w_f'|² + wᵀ (S / r²) w + wᵀ V(r) w } r dr
//!
//! over F coupled fields in the continuous Lagrange space of a profile, with
//! essential constraints at r = 0 and r = R_eff.

use serde::{Deserialize, Serialize};

use crate::banded::SymBand;
use crate::fem::FeSpace;

/// Profile data sampled at every quadrature point, element-major.
#[derive(Debug, Clone)]
pub struct QuadCache {
    pub nq: usize,
    pub r: Vec<f64>,
    /// Quadrature weight times r (the measure r dr).
    pub wr: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
}

impl QuadCache {
    pub fn new(space: &FeSpace, u: &[f64], v: &[f64]) -> Self {
        let nq = space.reference.qx.len();
        let ne = space.n_elements();
        let mut c = Self {
            nq,
            r: Vec::with_capacity(ne * nq),
            wr: Vec::with_capacity(ne * nq),
            u: Vec::with_capacity(ne * nq),
            du: Vec::with_capacity(ne * nq),
            v: Vec::with_capacity(ne * nq),
            dv: Vec::with_capacity(ne * nq),
        };
        for e in 0..ne {
            let (r, w, _) = space.element_quadrature(e);
            let (uu, ud) = space.element_values(u, e);
            let (vv, vd) = space.element_values(v, e);
            for q in 0..nq {
                c.r.push(r[q]);
                c.wr.push(w[q] * r[q]);
            }
            c.u.extend(uu);
            c.du.extend(ud);
            c.v.extend(vv);
            c.dv.extend(vd);
        }
        c
    }

    #[inline]
    pub fn at(&self, e: usize, q: usize) -> usize {
        e * self.nq + q
    }
}

/// Essential conditions at r = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum OriginConstraint {
    /// Per-field flag: true if the field is pinned to zero at r = 0.
    Pinned(Vec<bool>),
    /// Fields i and j tied: only (w_i + w_j)/√2 survives at r = 0; other fields listed as pinned.
    Tied {
        i: usize,
        j: usize,
        pinned: Vec<bool>,
    },
}

/// Sector tag of an assembled form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "sector", rename_all = "snake_case")]
pub enum FormLabel {
    B,
    Pm { m: i32, k: i32 },
    V2Pair { n: i32, partner: i32, k: i32 },
    V2SelfReal { n: i32, k: i32 },
    V2SelfImag { n: i32, k: i32 },
    Custom { name: String },
}

impl std::fmt::Display for FormLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FormLabel::B => write!(f, "B"),
            FormLabel::Pm { m, k } => write!(f, "P{m}(k={k})"),
            FormLabel::V2Pair { n, partner, k } => write!(f, "V2({n},{partner};k={k})"),
            FormLabel::V2SelfReal { n, k } => write!(f, "V2re({n};k={k})"),
            FormLabel::V2SelfImag { n, k } => write!(f, "V2im({n};k={k})"),
            FormLabel::Custom { name } => write!(f, "{name}"),
        }
    }
}

/// Pointwise potential V(r, u, u', v, v') written into an F×F row-major buffer.
pub type Potential<'a> = dyn Fn(f64, f64, f64, f64, f64, &mut [f64]) + Sync + 'a;

pub struct FormSpec<'a> {
    pub n_fields: usize,
    /// Row-major F×F coefficient of 1/r².
    pub singular: Vec<f64>,
    pub potential: Box<Potential<'a>>,
    pub origin: OriginConstraint,
    pub label: FormLabel,
}

impl<'a> FormSpec<'a> {
    pub fn pinned_at_origin(&self, f: usize) -> bool {
        match &self.origin {
            OriginConstraint::Pinned(p) => p[f],
            OriginConstraint::Tied { pinned, .. } => pinned[f],
        }
    }
}

/// Map from nodal unknowns (node-major, field-minor) to reduced unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub n_fields: usize,
    pub n_nodes: usize,
    /// For each full index, the reduced unknowns it depends on with coefficients.
    pub map: Vec<Vec<(usize, f64)>>,
    pub n_reduced: usize,
}

impl DofMap {
    pub fn new(n_fields: usize, n_nodes: usize, origin: &OriginConstraint) -> Self {
        let mut map = vec![Vec::new(); n_fields * n_nodes];
        let mut next = 0;
        let last = n_nodes - 1;
        for node in 0..n_nodes {
            if node == last {
                break;
            }
            for f in 0..n_fields {
                let full = node * n_fields + f;
                if node == 0 {
                    match origin {
                        OriginConstraint::Pinned(p) => {
                            if !p[f] {
                                map[full].push((next, 1.0));
                                next += 1;
                            }
                        }
                        OriginConstraint::Tied { i, j, pinned } => {
                            if f == *i {
                                let c = std::f64::consts::FRAC_1_SQRT_2;
                                map[node * n_fields + *i].push((next, c));
                                map[node * n_fields + *j].push((next, c));
                                next += 1;
                            } else if f != *j && !pinned[f] {
                                map[full].push((next, 1.0));
                                next += 1;
                            }
                        }
                    }
                } else {
                    map[full].push((next, 1.0));
                    next += 1;
                }
            }
        }
        Self {
            n_fields,
            n_nodes,
            map,
            n_reduced: next,
        }
    }

    /// Full nodal arrays (one per field) from a reduced vector.
    pub fn expand(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_nodes]; self.n_fields];
        for (full, deps) in self.map.iter().enumerate() {
            let (node, f) = (full / self.n_fields, full % self.n_fields);
            out[f][node] = deps.iter().map(|&(r, c)| c * x[r]).sum();
        }
        out
    }

    /// Least-squares restriction of full nodal arrays onto the reduced unknowns.
    ///
    /// Constrained values are dropped; tied pairs keep their symmetric part.
    pub fn restrict(&self, fields: &[&[f64]]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_reduced];
        let mut norm = vec![0.0; self.n_reduced];
        for (full, deps) in self.map.iter().enumerate() {
            let (node, f) = (full / self.n_fields, full % self.n_fields);
            for &(r, c) in deps {
                x[r] += c * fields[f][node];
                norm[r] += c * c;
            }
        }
        x.iter_mut().zip(norm).for_each(|(v, n)| *v /= n);
        x
    }
}

/// Pairing used for the mass matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum MassKind {
    /// ∫ Σ w_f² r dr.
    L2,
    /// ∫ Σ (1 + c_f / r²) w_f² r dr; c_f > 0 only for fields pinned at the origin.
    Weighted(Vec<f64>),
    /// ∫ Σ w_f² / r dr; needs every field pinned at the origin.
    InverseSquare,
}

/// Assembled stiffness/mass pencil on the reduced unknowns.
#[derive(Debug, Clone)]
pub struct QuadForm {
    pub stiffness: SymBand,
    pub mass: SymBand,
    pub dofs: DofMap,
    pub label: FormLabel,
    /// Set for forms outside the |k| = 1 setting they were derived for.
    pub extension: bool,
    /// Unit for "small" eigenvalues.
    pub scale: f64,
}

impl QuadForm {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.stiffness.quad(x)
    }

    pub fn value_of_fields(&self, fields: &[&[f64]]) -> f64 {
        let x = self.dofs.restrict(fields);
        self.value(&x)
    }

    pub fn rayleigh(&self, x: &[f64]) -> f64 {
        self.stiffness.quad(x) / self.mass.quad(x)
    }

    pub fn n(&self) -> usize {
        self.stiffness.n()
    }
}

/// Assembles the stiffness matrix and the requested mass matrix.
pub fn assemble(
    space: &FeSpace,
    cache: &QuadCache,
    spec: &FormSpec,
    mass: &MassKind,
) -> (SymBand, SymBand, DofMap) {
    let nf = spec.n_fields;
    let dofs = DofMap::new(nf, space.n_dofs(), &spec.origin);
    let p = space.degree();
    let nl = p + 1;
    // Bandwidth in reduced numbering: scan element connectivity.
    let mut kd = 0;
    let mut elem_red: Vec<Vec<(usize, usize, f64)>> = Vec::with_capacity(space.n_elements());
    for e in 0..space.n_elements() {
        let mut list = Vec::new();
        for a in 0..nl {
            for f in 0..nf {
                let full = space.dof(e, a) * nf + f;
                for &(r, c) in &dofs.map[full] {
                    list.push((a * nf + f, r, c));
                }
            }
        }
        let lo = list.iter().map(|t| t.1).min();
        let hi = list.iter().map(|t| t.1).max();
        if let (Some(lo), Some(hi)) = (lo, hi) {
            kd = kd.max(hi - lo);
        }
        elem_red.push(list);
    }
    let n = dofs.n_reduced;
    let mut k = SymBand::zeros(n, kd);
    let mut m = SymBand::zeros(n, kd);
    let (l2_w, mass_w): (f64, Vec<f64>) = match mass {
        MassKind::L2 => (1.0, vec![0.0; nf]),
        MassKind::Weighted(c) => (1.0, c.clone()),
        MassKind::InverseSquare => (0.0, vec![1.0; nf]),
    };
    let nloc = nl * nf;
    let mut ke = vec![0.0; nloc * nloc];
    let mut me = vec![0.0; nloc * nloc];
    let mut vbuf = vec![0.0; nf * nf];
    let re = &space.reference;
    for e in 0..space.n_elements() {
        ke.iter_mut().for_each(|x| *x = 0.0);
        me.iter_mut().for_each(|x| *x = 0.0);
        let (r0, r1) = space.mesh.element(e);
        let jac = 2.0 / (r1 - r0);
        for q in 0..cache.nq {
            let i = cache.at(e, q);
            let (r, wr) = (cache.r[i], cache.wr[i]);
            (spec.potential)(
                r,
                cache.u[i],
                cache.du[i],
                cache.v[i],
                cache.dv[i],
                &mut vbuf,
            );
            let inv_r2 = 1.0 / (r * r);
            let phi = &re.phi[q];
            let dphi = &re.dphi[q];
            for a in 0..nl {
                for b in 0..nl {
                    let pp = phi[a] * phi[b] * wr;
                    let dd = dphi[a] * dphi[b] * jac * jac * wr;
                    for f in 0..nf {
                        let row = a * nf + f;
                        for g in 0..nf {
                            let col = b * nf + g;
                            let mut val =
                                (spec.singular[f * nf + g] * inv_r2 + vbuf[f * nf + g]) * pp;
                            if f == g {
                                val += dd;
                                me[row * nloc + col] += pp * (l2_w + mass_w[f] * inv_r2);
                            }
                            ke[row * nloc + col] += val;
                        }
                    }
                }
            }
        }
        let list = &elem_red[e];
        for &(li, ri, ci) in list {
            for &(lj, rj, cj) in list {
                if rj > ri {
                    continue;
                }
                let kv = ke[li * nloc + lj] * ci * cj;
                let mv = me[li * nloc + lj] * ci * cj;
                if kv != 0.0 {
                    k.add(ri, rj, kv);
                }
                if mv != 0.0 {
                    m.add(ri, rj, mv);
                }
            }
        }
    }
    (k, m, dofs)
}

/// Evaluates the form by quadrature on full nodal arrays, ignoring constraints.
pub fn evaluate(space: &FeSpace, cache: &QuadCache, spec: &FormSpec, fields: &[&[f64]]) -> f64 {
    let nf = spec.n_fields;
    let mut current = usize::MAX;
    let mut tab: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    evaluate_with(space, cache, spec, &mut |e, q, val, der| {
        if e != current {
            tab = (0..nf)
                .map(|f| space.element_values(fields[f], e))
                .collect();
            current = e;
        }
        for f in 0..nf {
            val[f] = tab[f].0[q];
            der[f] = tab[f].1[q];
        }
    })
}

/// Evaluates the form on fields given pointwise: `fill(e, q, values, derivatives)`
/// supplies every field and its r-derivative at quadrature point q of element e.
pub fn evaluate_with(
    space: &FeSpace,
    cache: &QuadCache,
    spec: &FormSpec,
    fill: &mut dyn FnMut(usize, usize, &mut [f64], &mut [f64]),
) -> f64 {
    let nf = spec.n_fields;
    let mut vbuf = vec![0.0; nf * nf];
    let mut vals = vec![0.0; nf];
    let mut ders = vec![0.0; nf];
    let mut total = 0.0;
    for e in 0..space.n_elements() {
        let mut acc = 0.0;
        for q in 0..cache.nq {
            let i = cache.at(e, q);
            let r = cache.r[i];
            fill(e, q, &mut vals, &mut ders);
            (spec.potential)(
                r,
                cache.u[i],
                cache.du[i],
                cache.v[i],
                cache.dv[i],
                &mut vbuf,
            );
            let mut s = 0.0;
            for f in 0..nf {
                s += ders[f] * ders[f];
                for g in 0..nf {
                    s += (spec.singular[f * nf + g] / (r * r) + vbuf[f * nf + g])
                        * vals[f]
                        * vals[g];
                }
            }
            acc += s * cache.wr[i];
        }
        total += acc;
    }
    total
}

/// Smooth window: 0 below `inner.0`, cos² ramp to 1 at `inner.1`, 1 up to
/// `outer.0`, cos² ramp down to 0 at `outer.1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub inner: Option<(f64, f64)>,
    pub outer: (f64, f64),
}

impl Cutoff {
    /// Equal to 1 on [0, start], vanishing from `end` on.
    pub fn outer(start: f64, end: f64) -> Self {
        Self {
            inner: None,
            outer: (start, end),
        }
    }

    pub fn band(inner: (f64, f64), outer: (f64, f64)) -> Self {
        Self {
            inner: Some(inner),
            outer,
        }
    }

    /// (χ, χ').
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let ramp = |t: f64, a: f64, b: f64| -> (f64, f64) {
            // Rises from 0 at a to 1 at b.
            if t <= a {
                (0.0, 0.0)
            } else if t >= b {
                (1.0, 0.0)
            } else {
                let x = std::f64::consts::FRAC_PI_2 * (t - a) / (b - a);
                (
                    x.sin().powi(2),
                    (2.0 * x).sin() * std::f64::consts::FRAC_PI_2 / (b - a),
                )
            }
        };
        let (lo, dlo) = match self.inner {
            Some((a, b)) => ramp(r, a, b),
            None => (1.0, 0.0),
        };
        let (hi, dhi) = ramp(-r, -self.outer.1, -self.outer.0);
        (lo * hi, dlo * hi - lo * dhi)
    }
}
