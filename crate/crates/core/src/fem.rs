//! Radial meshes and continuous Lagrange finite elements on [0, R].
//!
//! Elements of degree p carry their local nodes at the Gauss-Lobatto-Legendre
//! points; integrals use Gauss-Legendre rules with enough points to integrate
//! the weighted energy densities exactly for polynomial data.

use serde::{Deserialize, Serialize};

use crate::error::MeshError;

pub const MIN_ELEMENTS: usize = 16;
pub const MAX_DEGREE: usize = 16;

/// Element-size distribution.
///
/// `Geometric { ratio }` makes each element `ratio` times longer than its inner
/// neighbour, so ratio > 1 concentrates elements toward r = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    Geometric {
        ratio: f64,
    },
    /// Geometric growth with largest/smallest element length equal to `ratio`.
    GeometricTotal {
        ratio: f64,
    },
}

impl Default for Grading {
    fn default() -> Self {
        Grading::GeometricTotal { ratio: 1.5 }
    }
}

impl Grading {
    fn validate(&self) -> Result<(), MeshError> {
        match *self {
            Grading::Uniform => Ok(()),
            Grading::Geometric { ratio } | Grading::GeometricTotal { ratio } => {
                if ratio.is_finite() && ratio > 0.0 {
                    Ok(())
                } else {
                    Err(MeshError::BadGrading(ratio))
                }
            }
        }
    }

    fn per_element_ratio(&self, n: usize) -> f64 {
        match *self {
            Grading::Uniform => 1.0,
            Grading::Geometric { ratio } => ratio,
            Grading::GeometricTotal { ratio } => {
                if n <= 1 {
                    1.0
                } else {
                    ratio.powf(1.0 / (n - 1) as f64)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialMesh {
    /// Element vertices, r₀ = 0 < r₁ < … < r_N = R_eff.
    pub nodes: Vec<f64>,
    pub grading: Grading,
    pub r_eff: f64,
}

impl RadialMesh {
    /// Raw partition of [0, r_eff] into `n` elements; no minimum element count.
    pub fn partition(r_eff: f64, n: usize, grading: Grading) -> Result<Self, MeshError> {
        grading.validate()?;
        if !(r_eff.is_finite() && r_eff > 0.0) {
            return Err(MeshError::BadRadius(r_eff));
        }
        if n == 0 {
            return Err(MeshError::TooFewElements { got: 0, min: 1 });
        }
        let q = grading.per_element_ratio(n);
        let mut sizes = Vec::with_capacity(n);
        let mut s = 1.0;
        for _ in 0..n {
            sizes.push(s);
            s *= q;
        }
        let total: f64 = sizes.iter().sum();
        let mut nodes = Vec::with_capacity(n + 1);
        nodes.push(0.0);
        let mut acc = 0.0;
        for h in &sizes[..n - 1] {
            acc += h;
            nodes.push(r_eff * acc / total);
        }
        nodes.push(r_eff);
        Ok(Self {
            nodes,
            grading,
            r_eff,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    pub fn min_size(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_size(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Splits every element in two at its midpoint.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.r_eff);
        Self {
            nodes,
            grading: self.grading,
            r_eff: self.r_eff,
        }
    }

    /// Index of the element containing r (clamped to the mesh).
    pub fn locate(&self, r: f64) -> usize {
        let n = self.n_elements();
        if r <= 0.0 {
            return 0;
        }
        if r >= self.r_eff {
            return n - 1;
        }
        match self.nodes.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        }
    }
}

/// Gauss-Legendre points and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// P_n(z) and P_n'(z) by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = if (1.0 - z * z).abs() < 1e-300 {
        let s = if z > 0.0 || n % 2 == 0 { 1.0 } else { -1.0 };
        s * (n * (n + 1)) as f64 / 2.0
    } else {
        n as f64 * (p0 - z * p1) / (1.0 - z * z)
    };
    (p1, d)
}

/// Gauss-Lobatto-Legendre points on [−1, 1]: ±1 and the roots of P_p'.
pub fn gauss_lobatto_points(p: usize) -> Vec<f64> {
    assert!(p >= 1);
    let mut x = vec![0.0; p + 1];
    x[0] = -1.0;
    x[p] = 1.0;
    for i in 1..p {
        // Chebyshev-Gauss-Lobatto start, Newton on P_p'.
        let mut z = -(std::f64::consts::PI * i as f64 / p as f64).cos();
        for _ in 0..100 {
            let (pp, d1) = legendre_with_derivative(p, z);
            // P'' from the Legendre ODE: (1−z²)P'' = 2zP' − p(p+1)P.
            let d2 = (2.0 * z * d1 - (p * (p + 1)) as f64 * pp) / (1.0 - z * z);
            let dz = d1 / d2;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
    }
    if p % 2 == 0 {
        x[p / 2] = 0.0;
    }
    x
}

/// Lagrange basis on fixed reference nodes, tabulated at a quadrature rule.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub qx: Vec<f64>,
    pub qw: Vec<f64>,
    /// phi[q][a] and dphi[q][a] (derivative in the reference coordinate).
    pub phi: Vec<Vec<f64>>,
    pub dphi: Vec<Vec<f64>>,
    /// Second reference derivatives at the quadrature points.
    pub d2phi: Vec<Vec<f64>>,
    weights_bary: Vec<f64>,
}

impl ReferenceElement {
    pub fn new(degree: usize, n_quad: usize) -> Self {
        let nodes = gauss_lobatto_points(degree);
        let (qx, qw) = gauss_legendre(n_quad);
        let weights_bary = barycentric_weights(&nodes);
        let mut re = Self {
            degree,
            nodes,
            qx: qx.clone(),
            qw,
            phi: vec![],
            dphi: vec![],
            d2phi: vec![],
            weights_bary,
        };
        let tab: Vec<(Vec<f64>, Vec<f64>)> = qx.iter().map(|&x| re.eval(x)).collect();
        re.phi = tab.iter().map(|t| t.0.clone()).collect();
        re.dphi = tab.iter().map(|t| t.1.clone()).collect();
        // p' is a degree p−1 polynomial, so p'' = Σ_b p'(x_b) φ_b'.
        let dmat: Vec<Vec<f64>> = re.nodes.iter().map(|&x| re.eval(x).1).collect();
        let n = re.nodes.len();
        re.d2phi = re
            .dphi
            .iter()
            .map(|dq| {
                (0..n)
                    .map(|a| (0..n).map(|b| dq[b] * dmat[b][a]).sum())
                    .collect()
            })
            .collect();
        re
    }

    pub fn n_local(&self) -> usize {
        self.degree + 1
    }

    /// Basis values and reference derivatives at x ∈ [−1, 1].
    pub fn eval(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.nodes.len();
        let mut phi = vec![0.0; n];
        let mut dphi = vec![0.0; n];
        if let Some(j) = self.nodes.iter().position(|&z| z == x) {
            phi[j] = 1.0;
            // Derivative at a node from the differentiation-matrix formula.
            let mut djj = 0.0;
            for a in 0..n {
                if a != j {
                    let d = self.weights_bary[a] / self.weights_bary[j] / (x - self.nodes[a]);
                    dphi[a] = d;
                    djj -= d;
                }
            }
            dphi[j] = djj;
            return (phi, dphi);
        }
        // Product form: φ_a(x) = w_a ℓ(x)/(x − x_a), ℓ(x) = Π (x − x_b).
        let ell: f64 = self.nodes.iter().map(|z| x - z).product();
        for a in 0..n {
            let da = x - self.nodes[a];
            phi[a] = self.weights_bary[a] * ell / da;
            // d/dx [ℓ/(x−x_a)] = ℓ/(x−x_a) · Σ_{b≠a} 1/(x−x_b). Summing without the
            // a term avoids cancellation when x sits next to node a.
            let s: f64 = (0..n)
                .filter(|&b| b != a)
                .map(|b| 1.0 / (x - self.nodes[b]))
                .sum();
            dphi[a] = phi[a] * s;
        }
        (phi, dphi)
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let p: f64 = nodes
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, z)| nodes[j] - z)
                .product();
            1.0 / p
        })
        .collect()
}

/// Continuous degree-p Lagrange space over a radial mesh.
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: RadialMesh,
    pub reference: ReferenceElement,
    /// Coordinates of the global nodal unknowns, increasing.
    pub dof_r: Vec<f64>,
}

impl FeSpace {
    pub fn new(mesh: RadialMesh, degree: usize) -> Result<Self, MeshError> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(MeshError::BadDegree {
                got: degree,
                max: MAX_DEGREE,
            });
        }
        let reference = ReferenceElement::new(degree, quad_points_for(degree));
        let mut dof_r = Vec::with_capacity(mesh.n_elements() * degree + 1);
        for e in 0..mesh.n_elements() {
            let (r0, r1) = mesh.element(e);
            for a in 0..degree {
                dof_r.push(r0 + 0.5 * (reference.nodes[a] + 1.0) * (r1 - r0));
            }
        }
        dof_r.push(mesh.r_eff);
        Ok(Self {
            mesh,
            reference,
            dof_r,
        })
    }

    pub fn degree(&self) -> usize {
        self.reference.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_r.len()
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    /// Global index of local node a in element e.
    #[inline]
    pub fn dof(&self, e: usize, a: usize) -> usize {
        e * self.reference.degree + a
    }

    /// Quadrature points of element e mapped to r, with weights including dr (not r).
    pub fn element_quadrature(&self, e: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let (r0, r1) = self.mesh.element(e);
        let h = r1 - r0;
        let r = self
            .reference
            .qx
            .iter()
            .map(|&x| r0 + 0.5 * (x + 1.0) * h)
            .collect();
        let w = self.reference.qw.iter().map(|&w| 0.5 * w * h).collect();
        (r, w, h)
    }

    /// Values and r-derivatives of the FE function with nodal values `c` at the element's quadrature points.
    pub fn element_values(&self, c: &[f64], e: usize) -> (Vec<f64>, Vec<f64>) {
        let (r0, r1) = self.mesh.element(e);
        let jac = 2.0 / (r1 - r0);
        let nl = self.reference.n_local();
        let base = self.dof(e, 0);
        let nq = self.reference.qx.len();
        let mut val = vec![0.0; nq];
        let mut der = vec![0.0; nq];
        for q in 0..nq {
            let (mut s, mut d) = (0.0, 0.0);
            for a in 0..nl {
                s += c[base + a] * self.reference.phi[q][a];
                d += c[base + a] * self.reference.dphi[q][a];
            }
            val[q] = s;
            der[q] = d * jac;
        }
        (val, der)
    }

    /// Second r-derivative of the FE function at the element's quadrature points.
    pub fn element_second_derivative(&self, c: &[f64], e: usize) -> Vec<f64> {
        let (r0, r1) = self.mesh.element(e);
        let jac = 2.0 / (r1 - r0);
        let base = self.dof(e, 0);
        self.reference
            .d2phi
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(a, d)| c[base + a] * d)
                    .sum::<f64>()
                    * jac
                    * jac
            })
            .collect()
    }

    /// Value and derivative of the FE function at an arbitrary radius.
    pub fn eval(&self, c: &[f64], r: f64) -> (f64, f64) {
        let e = self.mesh.locate(r);
        self.eval_in(c, e, r)
    }

    pub fn eval_in(&self, c: &[f64], e: usize, r: f64) -> (f64, f64) {
        let (r0, r1) = self.mesh.element(e);
        let x = (2.0 * (r - r0) / (r1 - r0) - 1.0).clamp(-1.0, 1.0);
        let (phi, dphi) = self.reference.eval(x);
        let base = self.dof(e, 0);
        let (mut s, mut d) = (0.0, 0.0);
        for a in 0..phi.len() {
            s += c[base + a] * phi[a];
            d += c[base + a] * dphi[a];
        }
        (s, d * 2.0 / (r1 - r0))
    }

    /// Derivative at every nodal point; element-boundary values are averaged.
    pub fn nodal_derivative(&self, c: &[f64]) -> Vec<f64> {
        let p = self.degree();
        let mut d = vec![0.0; self.n_dofs()];
        let mut cnt = vec![0u32; self.n_dofs()];
        for e in 0..self.n_elements() {
            let (r0, r1) = self.mesh.element(e);
            let jac = 2.0 / (r1 - r0);
            let base = self.dof(e, 0);
            for a in 0..=p {
                let (_, dphi) = self.reference.eval(self.reference.nodes[a]);
                let s: f64 = (0..=p).map(|b| c[base + b] * dphi[b]).sum();
                d[base + a] += s * jac;
                cnt[base + a] += 1;
            }
        }
        d.iter_mut().zip(cnt).for_each(|(v, c)| *v /= c as f64);
        d
    }

    /// Nodal interpolant of a function of r.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.dof_r.iter().map(|&r| f(r)).collect()
    }

    /// Whether nodal index i sits on an element boundary.
    pub fn is_vertex(&self, i: usize) -> bool {
        i % self.degree() == 0
    }
}

/// Gauss points used per element for degree p.
pub fn quad_points_for(degree: usize) -> usize {
    2 * degree + 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_partition() {
        let m = RadialMesh::partition(1.0, 4, Grading::Uniform).unwrap();
        assert_eq!(m.nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn geometric_partition() {
        let m = RadialMesh::partition(1.0, 4, Grading::Geometric { ratio: 2.0 }).unwrap();
        let want = [0.0, 1.0 / 15.0, 3.0 / 15.0, 7.0 / 15.0, 1.0];
        for (a, b) in m.nodes.iter().zip(want) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn total_ratio_grading() {
        let m = RadialMesh::partition(10.0, 200, Grading::GeometricTotal { ratio: 1.5 }).unwrap();
        assert_relative_eq!(m.max_size() / m.min_size(), 1.5, max_relative = 1e-10);
    }

    #[test]
    fn bad_grading_rejected() {
        assert!(RadialMesh::partition(1.0, 4, Grading::Geometric { ratio: 0.0 }).is_err());
        assert!(RadialMesh::partition(1.0, 4, Grading::Geometric { ratio: -1.0 }).is_err());
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!(
                    (num - exact).abs() < 1e-13,
                    "n={n} deg={deg}: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn lobatto_points_known() {
        let x = gauss_lobatto_points(2);
        assert_eq!(x, vec![-1.0, 0.0, 1.0]);
        let x = gauss_lobatto_points(3);
        assert_relative_eq!(x[2], 1.0 / 5f64.sqrt(), epsilon = 1e-15);
        let x = gauss_lobatto_points(4);
        assert_relative_eq!(x[3], (3.0f64 / 7.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn second_derivative_exact_for_polynomials() {
        let mesh = RadialMesh::partition(3.0, 5, Grading::Geometric { ratio: 1.3 }).unwrap();
        for p in 2..=8 {
            let sp = FeSpace::new(mesh.clone(), p).unwrap();
            let c = sp.interpolate(|r| r.powi(p as i32) - 2.0 * r * r + r);
            for e in 0..sp.n_elements() {
                let (r, _, _) = sp.element_quadrature(e);
                let d2 = sp.element_second_derivative(&c, e);
                for (rq, dq) in r.iter().zip(d2) {
                    let want = (p * (p - 1)) as f64 * rq.powi(p as i32 - 2) - 4.0;
                    assert_relative_eq!(dq, want, max_relative = 1e-9, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn basis_reproduces_polynomials() {
        for p in 1..=10 {
            let re = ReferenceElement::new(p, quad_points_for(p));
            let f = |x: f64| x.powi(p as i32) - 0.5 * x + 0.25;
            let df = |x: f64| p as f64 * x.powi(p as i32 - 1) - 0.5;
            let c: Vec<f64> = re.nodes.iter().map(|&x| f(x)).collect();
            for &x in &[-1.0, -0.3, 0.123, 0.9, 1.0] {
                let (phi, dphi) = re.eval(x);
                let v: f64 = phi.iter().zip(&c).map(|(a, b)| a * b).sum();
                let d: f64 = dphi.iter().zip(&c).map(|(a, b)| a * b).sum();
                assert!((v - f(x)).abs() < 1e-12, "p={p} x={x}");
                assert!(
                    (d - df(x)).abs() < 1e-10 * (1.0 + df(x).abs()),
                    "p={p} x={x}: {d} vs {}",
                    df(x)
                );
            }
        }
    }

    #[test]
    fn derivative_stable_next_to_nodes() {
        let re = ReferenceElement::new(6, 14);
        for &z in &re.nodes {
            for dx in [1e-15, -1e-15, 1e-12] {
                let x = (z + dx).clamp(-1.0, 1.0);
                let (_, d) = re.eval(x);
                let (_, exact) = re.eval(z);
                for (a, b) in d.iter().zip(&exact) {
                    assert!(
                        (a - b).abs() < 1e-9 * (1.0 + b.abs()),
                        "{a} vs {b} near {z}"
                    );
                }
            }
        }
    }

    #[test]
    fn space_evaluates_interpolant() {
        let mesh = RadialMesh::partition(3.0, 20, Grading::Geometric { ratio: 1.05 }).unwrap();
        let sp = FeSpace::new(mesh, 4).unwrap();
        let c = sp.interpolate(|r| r.powi(3) - r);
        let (v, d) = sp.eval(&c, 1.7);
        assert_relative_eq!(v, 1.7f64.powi(3) - 1.7, epsilon = 1e-12);
        assert_relative_eq!(d, 3.0 * 1.7 * 1.7 - 1.0, epsilon = 1e-10);
        let nd = sp.nodal_derivative(&c);
        for (i, &r) in sp.dof_r.iter().enumerate() {
            assert!((nd[i] - (3.0 * r * r - 1.0)).abs() < 1e-9);
        }
    }
}
