use nalgebra::{DMatrix, DVector};

use super::band::BandCholesky;
use super::sparse::{norm2, SparseSym};
use crate::error::{Error, Result};

/// Relative pivot below which a constraint is declared dependent on the
/// constraints before it.
const CONSTRAINT_PIVOT_TOL: f64 = 1e-12;

/// Saddle-point solver for
///
/// ```text
/// [ A  Cᵀ ] [x]   [b]
/// [ C  0  ] [μ] = [g]
/// ```
///
/// with `A` SPD and `C` of full row rank, via the Schur complement `C A⁻¹ Cᵀ`.
/// Both factorizations are kept so that many right-hand sides on the same
/// patch reuse them.
#[derive(Debug, Clone)]
pub struct KktSolver {
    a: SparseSym,
    c: DMatrix<f64>,
    chol: BandCholesky,
    /// A⁻¹ Cᵀ, one column per constraint
    ainv_ct: DMatrix<f64>,
    /// lower Cholesky factor of the Schur complement
    schur_l: DMatrix<f64>,
}

impl KktSolver {
    /// `c` holds one constraint per row.
    pub fn new(a: SparseSym, c: DMatrix<f64>) -> Result<Self> {
        let n = a.dim();
        if c.ncols() != n && c.nrows() > 0 {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: c.ncols(),
                context: "constraint matrix columns",
            });
        }
        let chol = BandCholesky::factor(&a)?;
        let m = c.nrows();
        let mut ainv_ct = DMatrix::zeros(n, m);
        for k in 0..m {
            let row: Vec<f64> = c.row(k).iter().copied().collect();
            let y = chol.solve(&row);
            ainv_ct.set_column(k, &DVector::from_vec(y));
        }
        let mut schur = if m > 0 { &c * &ainv_ct } else { DMatrix::zeros(0, 0) };
        for i in 0..m {
            for j in 0..i {
                let v = 0.5 * (schur[(i, j)] + schur[(j, i)]);
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let schur_l = cholesky_rank_checked(&schur)?;
        Ok(Self {
            a,
            c,
            chol,
            ainv_ct,
            schur_l,
        })
    }

    pub fn n_constraints(&self) -> usize {
        self.c.nrows()
    }

    fn solve_once(&self, b: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let y = self.chol.solve(b);
        let m = self.c.nrows();
        if m == 0 {
            return (y, Vec::new());
        }
        let yv = DVector::from_column_slice(&y);
        let rhs = &self.c * &yv - DVector::from_column_slice(g);
        let mut mu = rhs;
        self.schur_l.solve_lower_triangular_mut(&mut mu);
        self.schur_l.transpose().solve_upper_triangular_mut(&mut mu);
        let x = yv - &self.ainv_ct * &mu;
        (x.as_slice().to_vec(), mu.as_slice().to_vec())
    }

    /// Residuals `(‖b − Ax − Cᵀμ‖, ‖g − Cx‖)`.
    pub fn residuals(&self, x: &[f64], mu: &[f64], b: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ax = self.a.matvec(x);
        let ctmu = if mu.is_empty() {
            vec![0.0; x.len()]
        } else {
            (self.c.transpose() * DVector::from_column_slice(mu)).as_slice().to_vec()
        };
        let r1: Vec<f64> = (0..x.len()).map(|i| b[i] - ax[i] - ctmu[i]).collect();
        let r2: Vec<f64> = if g.is_empty() {
            Vec::new()
        } else {
            let cx = &self.c * DVector::from_column_slice(x);
            (0..g.len()).map(|i| g[i] - cx[i]).collect()
        };
        (r1, r2)
    }

    /// Solves with two rounds of iterative refinement on the full system.
    pub fn solve(&self, b: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if b.len() != self.a.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.a.dim(),
                actual: b.len(),
                context: "KKT primal right-hand side",
            });
        }
        if g.len() != self.c.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.c.nrows(),
                actual: g.len(),
                context: "KKT constraint right-hand side",
            });
        }
        let (mut x, mut mu) = self.solve_once(b, g);
        for _ in 0..2 {
            let (r1, r2) = self.residuals(&x, &mu, b, g);
            if norm2(&r1) == 0.0 && norm2(&r2) == 0.0 {
                break;
            }
            let (dx, dmu) = self.solve_once(&r1, &r2);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
            mu.iter_mut().zip(&dmu).for_each(|(a, d)| *a += d);
        }
        Ok((x, mu))
    }
}

/// Unpivoted Cholesky that reports the first row whose pivot collapses
/// relative to its original diagonal.
fn cholesky_rank_checked(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = s.nrows();
    let mut l = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > CONSTRAINT_PIVOT_TOL * s[(j, j)].abs()) || s[(j, j)] <= 0.0 {
            return Err(Error::RankDeficientConstraint { index: j });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..m {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    Ok(l)
}

/// One-shot saddle-point solve; returns `(x, μ)`.
pub fn kkt_solve(
    a: &SparseSym,
    c: &DMatrix<f64>,
    b: &[f64],
    g: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    KktSolver::new(a.clone(), c.clone())?.solve(b, g)
}
