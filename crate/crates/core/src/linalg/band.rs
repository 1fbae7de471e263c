use super::sparse::{norm2, SparseSym};
use crate::error::{Error, Result};

/// Relative pivot threshold against the largest diagonal entry.
pub const PIVOT_THRESHOLD: f64 = 1e-13;

/// Default relative residual tolerance for SPD solves.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Cholesky factor of a banded SPD matrix.
///
/// Lexicographic node numbering on a structured grid gives a half-bandwidth
/// equal to the row length, so the factor costs `O(n·b²)` and stays within the
/// band. Built once and reused for every right-hand side.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // row i holds L[i, i-bw..=i] (leading entries unused when i < bw)
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.dim();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if j <= i {
                    data[i * w + (j + bw - i)] = x;
                }
            }
        }
        let threshold = PIVOT_THRESHOLD * a.max_abs_diagonal();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = data[i * w + (j + bw - i)];
                for k in jlo..j {
                    s -= data[i * w + (k + bw - i)] * data[j * w + (k + bw - j)];
                }
                if j == i {
                    if !(s > threshold) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    data[i * w + bw] = s.sqrt();
                } else {
                    data[i * w + (j + bw - i)] = s / data[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let (bw, w) = (self.bw, self.bw + 1);
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.data[i * w + (k + bw - i)] * x[k];
            }
            x[i] = s / self.data[i * w + bw];
        }
        for i in (0..self.n).rev() {
            x[i] /= self.data[i * w + bw];
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                x[k] -= self.data[i * w + (k + bw - i)] * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// A factored SPD matrix paired with the matrix itself, so solves can be
/// checked and refined against the true residual.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    a: SparseSym,
    chol: BandCholesky,
}

impl SpdSolver {
    pub fn new(a: SparseSym) -> Result<Self> {
        let chol = BandCholesky::factor(&a)?;
        Ok(Self { a, chol })
    }

    pub fn matrix(&self) -> &SparseSym {
        &self.a
    }

    pub fn factor(&self) -> &BandCholesky {
        &self.chol
    }

    pub fn solve(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        if b.len() != self.a.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.a.dim(),
                actual: b.len(),
                context: "spd_solve right-hand side",
            });
        }
        let bnorm = norm2(b);
        let mut x = self.chol.solve(b);
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut residual = f64::INFINITY;
        for _ in 0..4 {
            let ax = self.a.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            residual = norm2(&r) / bnorm;
            if residual <= tol {
                return Ok(x);
            }
            let dx = self.chol.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        }
        Err(Error::NotConverged { residual, tol })
    }
}

/// Solve `A x = b` for SPD `A` to the relative residual `tol`.
pub fn spd_solve(a: &SparseSym, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    SpdSolver::new(a.clone())?.solve(b, tol)
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1)
    }

    /// Gaussian elimination with partial pivoting, independent of Cholesky.
    fn gauss_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
        let n = a.nrows();
        let mut m = a.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let p = (col..n)
                .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
                .unwrap();
            m.swap_rows(col, p);
            x.swap(col, p);
            for r in col + 1..n {
                let f = m[(r, col)] / m[(col, col)];
                for c in col..n {
                    m[(r, c)] -= f * m[(col, c)];
                }
                x[r] -= f * x[col];
            }
        }
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| m[(r, c)] * x[c]).sum();
            x[r] = (x[r] - s) / m[(r, r)];
        }
        x
    }

    #[test]
    fn identity_and_diagonal() {
        let b = vec![1.0, -2.0, 3.5];
        let x = spd_solve(&SparseSym::identity(3), &b, RESIDUAL_TOL).unwrap();
        assert_eq!(x, b);
        let x = spd_solve(&SparseSym::from_diagonal(&[2.0]), &[4.0], RESIDUAL_TOL).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn matches_gaussian_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = random_spd(8, &mut rng);
        let b: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = spd_solve(&SparseSym::from_dense(&d), &b, RESIDUAL_TOL).unwrap();
        let oracle = gauss_solve(&d, &b);
        for (a, o) in x.iter().zip(&oracle) {
            assert!((a - o).abs() < 1e-10 * o.abs().max(1.0));
        }
    }

    #[test]
    fn hundred_random_instances_reproduce_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let n = 1 + trial % 50;
            let d = random_spd(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = SparseSym::from_dense(&d);
            let x = spd_solve(&a, &b, RESIDUAL_TOL).unwrap();
            let r = &d * DVector::from_column_slice(&x) - DVector::from_column_slice(&b);
            assert!(r.norm() <= RESIDUAL_TOL * norm2(&b));
        }
    }

    #[test]
    fn banded_tridiagonal() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseSym::from_triplets(n, t);
        assert_eq!(a.bandwidth(), 1);
        let b = vec![1.0; n];
        let x = spd_solve(&a, &b, RESIDUAL_TOL).unwrap();
        // continuous analogue: x_i = (i+1)(n-i)/2
        for (i, xi) in x.iter().enumerate() {
            let e = ((i + 1) * (n - i)) as f64 / 2.0;
            assert!((xi - e).abs() < 1e-9 * e);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = SparseSym::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(
            BandCholesky::factor(&a),
            Err(Error::NotPositiveDefinite { row: 1, .. })
        ));
        let z = SparseSym::from_diagonal(&[1.0, 0.0]);
        assert!(spd_solve(&z, &[1.0, 1.0], RESIDUAL_TOL).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let s = SpdSolver::new(SparseSym::identity(2)).unwrap();
        assert!(matches!(
            s.solve(&[1.0], RESIDUAL_TOL),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
