//! Banded matrix storage with Cholesky and pivoted LU factorizations.

use nalgebra::DMatrix;

use crate::error::LinalgError;

/// Symmetric band matrix holding the lower triangle: entry (i, j) with
/// i − kd ≤ j ≤ i lives at `data[i * (kd + 1) + (i − j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    kd: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, kd: usize) -> Self {
        let kd = kd.min(n.saturating_sub(1));
        Self {
            n,
            kd,
            data: vec![0.0; n * (kd + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0);
        for i in 0..n {
            m.data[i] = 1.0;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.kd, "entry ({i},{j}) outside band {}", self.kd);
        i * (self.kd + 1) + (i - j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let d = i.abs_diff(j);
        if d > self.kd {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `val` to the symmetric pair (i, j), (j, i).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, val: f64) {
        let k = self.idx(i, j);
        self.data[k] += val;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let w = self.kd + 1;
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = row[0] * x[i];
            let jmax = self.kd.min(i);
            for d in 1..=jmax {
                let a = row[d];
                let j = i - d;
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        let y = self.mul_vec(x);
        dot(x, &y)
    }

    /// self − sigma · other, both on the same dimension.
    pub fn shifted(&self, other: &SymBand, sigma: f64) -> SymBand {
        assert_eq!(self.n, other.n);
        let kd = self.kd.max(other.kd);
        let mut out = SymBand::zeros(self.n, kd);
        for i in 0..self.n {
            for d in 0..=kd.min(i) {
                let j = i - d;
                let v = self.get(i, j) - sigma * other.get(i, j);
                if v != 0.0 {
                    out.add(i, j, v);
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (self.kd + 1)]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn cholesky(&self) -> Result<BandCholesky, LinalgError> {
        BandCholesky::factor(self)
    }
}

/// Lower-triangular Cholesky factor in the same band layout.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    kd: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &SymBand) -> Result<Self, LinalgError> {
        let (n, kd) = (a.n, a.kd);
        let w = kd + 1;
        let mut l = a.data.clone();
        for j in 0..n {
            // l[j][j]
            let mut s = l[j * w];
            for d in 1..=kd.min(j) {
                let v = l[j * w + d];
                s -= v * v;
            }
            if !(s > 0.0) || !s.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: j, pivot: s });
            }
            let djj = s.sqrt();
            l[j * w] = djj;
            // Column j below the diagonal: rows i = j+1 ..= j+kd.
            for i in (j + 1)..n.min(j + kd + 1) {
                let dij = i - j;
                let mut s = l[i * w + dij];
                // Σ_k L[i][k] L[j][k] over k < j within both bands.
                let kmin = i.saturating_sub(kd);
                for k in kmin..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                l[i * w + dij] = s / djj;
            }
        }
        Ok(Self { n, kd, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kd) = (self.n, self.kd);
        let w = kd + 1;
        for i in 0..n {
            let mut s = b[i];
            for d in 1..=kd.min(i) {
                s -= self.l[i * w + d] * b[i - d];
            }
            b[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for d in 1..=kd.min(n - 1 - i) {
                let r = i + d;
                s -= self.l[r * w + d] * b[r];
            }
            b[i] = s / self.l[i * w];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// log det of the factored matrix.
    pub fn log_det(&self) -> f64 {
        (0..self.n)
            .map(|i| 2.0 * self.l[i * (self.kd + 1)].ln())
            .sum()
    }
}

/// General band LU with partial pivoting, for the symmetric-indefinite Newton systems.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row i holds columns i − kl ..= i + kl + ku (extra kl for pivot fill).
    u: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn from_sym(a: &SymBand) -> Result<Self, LinalgError> {
        let (n, kd) = (a.n, a.kd);
        let (kl, ku) = (kd, kd);
        let w = 2 * kl + ku + 1;
        let mut u = vec![0.0; n * w];
        for i in 0..n {
            let jlo = i.saturating_sub(kd);
            let jhi = (i + kd).min(n - 1);
            for j in jlo..=jhi {
                u[i * w + (j + kl - i)] = a.get(i, j);
            }
        }
        let mut lu = Self {
            n,
            kl,
            ku,
            u,
            mult: vec![0.0; n * kl.max(1)],
            piv: vec![0; n],
        };
        lu.factor()?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        let w = 2 * self.kl + self.ku + 1;
        i * w + (j + self.kl - i)
    }

    fn factor(&mut self) -> Result<(), LinalgError> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self
            .u
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in 0..n {
            let rmax = (i + kl).min(n - 1);
            let mut p = i;
            let mut best = self.u[self.at(i, i)].abs();
            for r in (i + 1)..=rmax {
                let v = self.u[self.at(r, i)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= 1e-300 * scale || !best.is_finite() {
                return Err(LinalgError::Singular(i));
            }
            self.piv[i] = p;
            let cmax = (i + kl + ku).min(n - 1);
            if p != i {
                for c in i..=cmax {
                    let (a, b) = (self.at(i, c), self.at(p, c));
                    self.u.swap(a, b);
                }
            }
            let d = self.u[self.at(i, i)];
            for r in (i + 1)..=rmax {
                let ri = self.at(r, i);
                let m = self.u[ri] / d;
                self.u[ri] = 0.0;
                self.mult[i * kl + (r - i - 1)] = m;
                if m != 0.0 {
                    for c in (i + 1)..=cmax {
                        let v = self.u[self.at(i, c)];
                        let rc = self.at(r, c);
                        self.u[rc] -= m * v;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for i in 0..n {
            let p = self.piv[i];
            if p != i {
                b.swap(i, p);
            }
            let bi = b[i];
            for r in (i + 1)..=(i + kl).min(n - 1) {
                b[r] -= self.mult[i * kl + (r - i - 1)] * bi;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in (i + 1)..=(i + kl + ku).min(n - 1) {
                s -= self.u[self.at(i, c)] * b[c];
            }
            b[i] = s / self.u[self.at(i, i)];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, kd: usize, seed: u64) -> SymBand {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SymBand::zeros(n, kd);
        for i in 0..n {
            for j in i.saturating_sub(kd)..i {
                a.add(i, j, rng.gen_range(-1.0..1.0));
            }
            a.add(i, i, 2.0 * kd as f64 + 1.0 + rng.gen::<f64>());
        }
        a
    }

    #[test]
    fn mul_vec_matches_dense() {
        let a = random_spd(40, 5, 1);
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = a.mul_vec(&x);
        let yd = a.to_dense() * nalgebra::DVector::from_vec(x.clone());
        for i in 0..40 {
            assert!((y[i] - yd[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_solves() {
        let a = random_spd(60, 7, 2);
        let x: Vec<f64> = (0..60).map(|i| 1.0 + i as f64 * 0.01).collect();
        let b = a.mul_vec(&x);
        let ch = a.cholesky().unwrap();
        let y = ch.solve(&b);
        for i in 0..60 {
            assert!((y[i] - x[i]).abs() < 1e-12);
        }
        let det = a.to_dense().determinant().ln();
        assert!((ch.log_det() - det).abs() < 1e-9);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = random_spd(30, 3, 3);
        let shifted = a.shifted(&SymBand::identity(30), 100.0);
        assert!(matches!(
            shifted.cholesky(),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn lu_solves_indefinite() {
        let a = random_spd(80, 6, 4).shifted(&SymBand::identity(80), 9.3);
        let x: Vec<f64> = (0..80).map(|i| (i as f64).cos()).collect();
        let mut b = a.mul_vec(&x);
        let lu = BandLu::from_sym(&a).unwrap();
        lu.solve_in_place(&mut b);
        for i in 0..80 {
            assert!((b[i] - x[i]).abs() < 1e-9, "{} vs {}", b[i], x[i]);
        }
    }

    #[test]
    fn lu_needs_pivoting() {
        // Zero diagonal forces a row swap at every step.
        let n = 10;
        let mut a = SymBand::zeros(n, 1);
        for i in 1..n {
            a.add(i, i - 1, 1.0 + i as f64);
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let mut b = a.mul_vec(&x);
        let lu = BandLu::from_sym(&a).unwrap();
        lu.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }
}
