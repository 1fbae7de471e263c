//! Generalized symmetric-definite eigenproblems `A v = λ B v`.
//!
//! Local spectral problems are a few hundred unknowns at most, so they are
//! reduced to a dense standard problem through the Cholesky factor of `B`
//! and handed to a symmetric QR eigensolver. The largest eigenvalue of big
//! sparse pencils goes through Lanczos instead.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::band::BandCholesky;
use super::sparse::{dot, SparseSym};
use crate::error::{Error, Result};

/// Eigenpairs with ascending eigenvalues and `B`-orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn truncate(mut self, m: usize) -> Self {
        self.values.truncate(m);
        self.vectors = self.vectors.columns(0, m).into_owned();
        self
    }

    pub fn vector(&self, j: usize) -> DVector<f64> {
        self.vectors.column(j).into_owned()
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// All eigenpairs of the dense pencil `(A, B)` with `B` SPD.
pub fn gen_eig_dense(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<EigPairs> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.nrows(),
            context: "generalized eigenproblem",
        });
    }
    if n == 0 {
        return Ok(EigPairs {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let mut bs = b.clone();
    symmetrize(&mut bs);
    let chol = Cholesky::new(bs).ok_or_else(|| Error::NotPositiveDefinite {
        row: 0,
        pivot: f64::NAN,
    })?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ
    let mut lia = a.clone();
    if !l.solve_lower_triangular_mut(&mut lia) {
        return Err(Error::Singular("Cholesky factor of B".into()));
    }
    let mut c = lia.transpose();
    l.solve_lower_triangular_mut(&mut c);
    symmetrize(&mut c);
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut y = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        y.set_column(k, &eig.eigenvectors.column(i));
    }
    // v = L⁻ᵀ y
    let lt = l.transpose();
    if !lt.solve_upper_triangular_mut(&mut y) {
        return Err(Error::Singular("Cholesky factor of B".into()));
    }
    Ok(EigPairs { values, vectors: y })
}

/// The `m` smallest eigenpairs of `A v = λ B v`.
pub fn gen_eig_smallest(a: &SparseSym, b: &SparseSym, m: usize) -> Result<EigPairs> {
    if m > a.dim() {
        return Err(Error::InvalidArgument(format!(
            "requested {m} eigenpairs of a {}-dimensional problem",
            a.dim()
        )));
    }
    if b.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
            context: "generalized eigenproblem",
        });
    }
    Ok(gen_eig_dense(&a.to_dense(), &b.to_dense())?.truncate(m))
}

/// Largest eigenvalue of the dense pencil `(A, B)`.
pub fn gen_eig_max_dense(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let e = gen_eig_dense(a, b)?;
    e.values
        .last()
        .copied()
        .ok_or_else(|| Error::InvalidArgument("empty pencil".into()))
}

/// Largest eigenvalue of `A v = λ M v` by Lanczos in the `M` inner product
/// with full reorthogonalization. `M` must be SPD.
pub fn lanczos_max(a: &SparseSym, m: &SparseSym, rel_tol: f64, max_iter: usize) -> Result<f64> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty pencil".into()));
    }
    let mchol = BandCholesky::factor(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2b);
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nq = m.quad(&q).sqrt();
    q.iter_mut().for_each(|v| *v /= nq);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut mbasis: Vec<Vec<f64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let limit = max_iter.min(n);
    for it in 0..limit {
        let aq = a.matvec(&q);
        let alpha = dot(&q, &aq);
        let mut w = mchol.solve(&aq);
        let mq = m.matvec(&q);
        basis.push(q.clone());
        mbasis.push(mq);
        alphas.push(alpha);
        // w -= alpha q + beta q_prev, then full reorthogonalization (twice)
        for _ in 0..2 {
            for (qb, mqb) in basis.iter().zip(&mbasis) {
                let c = dot(mqb, &w);
                w.iter_mut().zip(qb).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let beta = m.quad(&w).max(0.0).sqrt();

        let k = alphas.len();
        let exhausted = it + 1 == n || beta <= 1e-14 * alpha.abs().max(1e-300);
        if k % 5 != 0 && !exhausted && it + 1 < limit {
            betas.push(beta);
            q = w.iter().map(|v| v / beta).collect();
            continue;
        }
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imax, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, &v)| (i, v))
            .unwrap();
        let resid = beta * eig.eigenvectors[(k - 1, imax)].abs();
        if resid <= rel_tol * theta.abs() || exhausted {
            return Ok(theta);
        }
        betas.push(beta);
        q = w.iter().map(|v| v / beta).collect();
    }
    Err(Error::EigenNotConverged { iterations: limit })
}
