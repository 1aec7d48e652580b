//! Lowest eigenpairs of a symmetric-definite banded pencil K x = λ M x.
//!
//! Shift-invert block subspace iteration with Rayleigh-Ritz on a banded
//! Cholesky factorization of K − σM; σ is kept below the spectrum, which the
//! success of the factorization certifies. Small problems go dense.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::banded::{dot, BandCholesky, SymBand};
use crate::error::EigenError;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    /// First shift to try; lowered until K − σM factors.
    pub initial_shift: f64,
    /// Natural size of the spectrum, used to step the shift down.
    pub scale: f64,
    /// Target relative residual.
    pub tol: f64,
    /// Residual accepted once the iteration stagnates at the round-off floor.
    pub accept_tol: f64,
    pub max_iter: usize,
    /// Problems at or below this size are solved densely.
    pub dense_limit: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            initial_shift: -1e-8,
            scale: 1.0,
            tol: 1e-10,
            accept_tol: 1e-8,
            max_iter: 400,
            dense_limit: 512,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// M-normalized eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    /// ‖Kx − λMx‖ / (‖Kx‖ + |λ|‖Mx‖).
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

pub fn residual(k: &SymBand, m: &SymBand, lambda: f64, x: &[f64]) -> f64 {
    let kx = k.mul_vec(x);
    let mx = m.mul_vec(x);
    let num: f64 = kx
        .iter()
        .zip(&mx)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt();
    let den = norm(&kx) + lambda.abs() * norm(&mx);
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn lowest_eigenpairs(
    k: &SymBand,
    m: &SymBand,
    count: usize,
    opts: &EigenOptions,
) -> Result<Eigenpairs, EigenError> {
    let n = k.n();
    if count == 0 {
        return Ok(Eigenpairs {
            values: vec![],
            vectors: vec![],
            residuals: vec![],
            iterations: 0,
        });
    }
    if count > n {
        return Err(EigenError::TooMany {
            requested: count,
            available: n,
        });
    }
    if n <= opts.dense_limit {
        return dense(k, m, count);
    }
    subspace(k, m, count, opts)
}

fn dense(k: &SymBand, m: &SymBand, count: usize) -> Result<Eigenpairs, EigenError> {
    let kd = k.to_dense();
    let md = m.to_dense();
    let (values, vecs) = dense_generalized(&kd, &md)?;
    let mut out = Eigenpairs {
        values: vec![],
        vectors: vec![],
        residuals: vec![],
        iterations: 1,
    };
    for j in 0..count {
        let x: Vec<f64> = vecs.column(j).iter().copied().collect();
        out.residuals.push(residual(k, m, values[j], &x));
        out.values.push(values[j]);
        out.vectors.push(x);
    }
    Ok(out)
}

/// Ascending eigenvalues and M-orthonormal eigenvectors of a small dense pencil.
pub fn dense_generalized(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>), EigenError> {
    let n = k.nrows();
    let chol = m
        .clone()
        .cholesky()
        .ok_or(crate::error::LinalgError::NotPositiveDefinite {
            row: 0,
            pivot: f64::NAN,
        })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(crate::error::LinalgError::Singular(0))?;
    let mut c = &linv * k * linv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    let back = linv.transpose();
    for (j, &i) in idx.iter().enumerate() {
        let y = &back * eig.eigenvectors.column(i);
        vecs.set_column(j, &y);
    }
    Ok((values, vecs))
}

fn factor_below(
    k: &SymBand,
    m: &SymBand,
    opts: &EigenOptions,
) -> Result<(f64, BandCholesky), EigenError> {
    let scale = opts.scale.abs().max(f64::MIN_POSITIVE);
    let mut sigma = opts.initial_shift;
    for attempt in 0..80 {
        if let Ok(ch) = k.shifted(m, sigma).cholesky() {
            return Ok((sigma, ch));
        }
        sigma = if attempt == 0 {
            sigma.min(-0.1 * scale)
        } else {
            sigma - scale * 2f64.powi(attempt as i32 - 1)
        };
    }
    Err(EigenError::FactorizationFailure(80))
}

fn subspace(
    k: &SymBand,
    m: &SymBand,
    count: usize,
    opts: &EigenOptions,
) -> Result<Eigenpairs, EigenError> {
    let n = k.n();
    let (mut sigma, mut chol) = factor_below(k, m, opts)?;
    let block = (count + count.min(8) + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut values = vec![0.0; block];
    let mut residuals = vec![f64::INFINITY; block];
    let mut last_shift_iter = 0;
    let mut best = f64::INFINITY;
    let mut best_iter = 0;
    for it in 1..=opts.max_iter {
        // Y = (K − σM)⁻¹ M X
        let y: Vec<Vec<f64>> = x
            .iter()
            .map(|xi| {
                let mut t = m.mul_vec(xi);
                chol.solve_in_place(&mut t);
                t
            })
            .collect();
        let (y, my) = m_orthonormalize(m, y, &mut rng);
        // Rayleigh-Ritz on span(Y).
        let ky: Vec<Vec<f64>> = y.iter().map(|v| k.mul_vec(v)).collect();
        let kp = DMatrix::from_fn(block, block, |i, j| dot(&y[i], &ky[j]));
        let mp = DMatrix::from_fn(block, block, |i, j| dot(&y[i], &my[j]));
        let kp = (&kp + kp.transpose()) * 0.5;
        let mp = (&mp + mp.transpose()) * 0.5;
        let (theta, c) = match dense_generalized(&kp, &mp) {
            Ok(r) => r,
            Err(_) => {
                // Block lost rank; re-seed the trailing vectors.
                for xi in x.iter_mut().skip(count) {
                    xi.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
                }
                continue;
            }
        };
        let mut nx = vec![vec![0.0; n]; block];
        for j in 0..block {
            for i in 0..block {
                let cij = c[(i, j)];
                if cij != 0.0 {
                    for (t, yv) in nx[j].iter_mut().zip(&y[i]) {
                        *t += cij * yv;
                    }
                }
            }
        }
        x = nx;
        values.copy_from_slice(&theta[..block]);
        let mut worst: f64 = 0.0;
        for j in 0..count {
            residuals[j] = residual(k, m, values[j], &x[j]);
            worst = worst.max(residuals[j]);
        }
        if worst < 0.5 * best {
            best = worst;
            best_iter = it;
        }
        let stagnant = it - best_iter >= 12 || it == opts.max_iter;
        if worst <= opts.tol || (stagnant && worst <= opts.accept_tol) {
            return Ok(Eigenpairs {
                values: values[..count].to_vec(),
                vectors: x[..count].to_vec(),
                residuals: residuals[..count].to_vec(),
                iterations: it,
            });
        }
        // Move the shift toward the spectrum; a successful factorization proves σ < λ_min.
        if it - last_shift_iter >= 3 {
            let gap = (values[count.min(block - 1)] - values[0]).abs();
            let step = (0.05 * gap)
                .max(1e-6 * values[0].abs())
                .max(1e-14 * opts.scale.abs());
            let cand = values[0] - step;
            if cand > sigma {
                if let Ok(ch) = k.shifted(m, cand).cholesky() {
                    sigma = cand;
                    chol = ch;
                    last_shift_iter = it;
                }
            }
        }
    }
    let worst = residuals[..count].iter().cloned().fold(0.0, f64::max);
    Err(EigenError::NonConvergence {
        residual: worst,
        iterations: opts.max_iter,
    })
}

/// Twice-applied modified Gram-Schmidt in the M inner product.
fn m_orthonormalize(
    m: &SymBand,
    mut y: Vec<Vec<f64>>,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = m.n();
    let mut my: Vec<Vec<f64>> = Vec::with_capacity(y.len());
    for j in 0..y.len() {
        for attempt in 0..3 {
            for _ in 0..2 {
                for i in 0..j {
                    let c = dot(&y[j], &my[i]);
                    let (head, tail) = y.split_at_mut(j);
                    for (t, s) in tail[0].iter_mut().zip(&head[i]) {
                        *t -= c * s;
                    }
                }
            }
            let mut mj = m.mul_vec(&y[j]);
            let nrm = dot(&y[j], &mj).sqrt();
            if nrm > 1e-300 && nrm.is_finite() {
                y[j].iter_mut().for_each(|v| *v /= nrm);
                mj.iter_mut().for_each(|v| *v /= nrm);
                my.push(mj);
                break;
            }
            // Degenerate direction: replace with noise and retry.
            y[j] = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(attempt < 2, "could not complete an M-orthonormal block");
        }
    }
    (y, my)
}
