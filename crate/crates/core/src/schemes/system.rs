use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::linalg::{BandCholesky, SparseSym};
use crate::spaces::{ReducedBasis, SpaceTag};

/// A square matrix, either a small dense Galerkin projection or the sparse
/// fine-grid matrix itself.
#[derive(Debug, Clone)]
pub enum Operator {
    Dense(DMatrix<f64>),
    Sparse(SparseSym),
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Dense(m) => m.nrows(),
            Operator::Sparse(s) => s.dim(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Operator::Dense(m) => (m * DVector::from_column_slice(x)).as_slice().to_vec(),
            Operator::Sparse(s) => s.matvec(x),
        }
    }

    /// `xᵀ Op x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        match self {
            Operator::Dense(_) => self.apply(x).iter().zip(x).map(|(a, b)| a * b).sum(),
            Operator::Sparse(s) => s.quad(x),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::Sparse(s) => s.to_dense(),
        }
    }

    /// `self + s·other`; both operands must have the same storage.
    pub(crate) fn add_scaled(&self, s: f64, other: &Operator) -> Operator {
        match (self, other) {
            (Operator::Dense(a), Operator::Dense(b)) => Operator::Dense(a + b * s),
            (Operator::Sparse(a), Operator::Sparse(b)) => Operator::Sparse(a.add_scaled(s, b)),
            (a, b) => Operator::Dense(a.to_dense() + b.to_dense() * s),
        }
    }
}

/// A factored matrix ready for repeated solves.
#[derive(Debug, Clone)]
pub(crate) enum Factor {
    Cholesky(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
    Band(BandCholesky),
}

impl Factor {
    pub(crate) fn spd(op: &Operator, what: &str) -> Result<Self> {
        match op {
            Operator::Dense(m) => Cholesky::new(m.clone())
                .map(Factor::Cholesky)
                .ok_or_else(|| Error::Singular(format!("{what} is not positive definite"))),
            Operator::Sparse(s) => Ok(Factor::Band(BandCholesky::factor(s)?)),
        }
    }

    pub(crate) fn general(m: DMatrix<f64>, what: &str) -> Result<Self> {
        let lu = LU::new(m);
        if !lu.is_invertible() {
            return Err(Error::Singular(what.to_string()));
        }
        Ok(Factor::Lu(lu))
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let v = DVector::from_column_slice(b);
        let x = match self {
            Factor::Cholesky(c) => c.solve(&v),
            Factor::Lu(lu) => lu
                .solve(&v)
                .ok_or_else(|| Error::Singular("LU solve".into()))?,
            Factor::Band(b) => return Ok(b.solve(&v.as_slice().to_vec())),
        };
        Ok(x.as_slice().to_vec())
    }
}

/// Mass and stiffness in the coordinates of a space, with the block split
/// `n1 + n2` between `V_{H,1}` and `V_{H,2}` columns.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub m: Operator,
    pub a: Operator,
    pub n1: usize,
    pub n2: usize,
    basis: Option<ReducedBasis>,
}

fn symmetrized(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

impl ReducedSystem {
    /// Dense system given directly; the first `n1` coordinates form block 1.
    pub fn from_dense(m: DMatrix<f64>, a: DMatrix<f64>, n1: usize) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n || a.nrows() != n || a.ncols() != n || n1 > n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: a.nrows(),
                context: "reduced mass and stiffness",
            });
        }
        Ok(Self {
            m: Operator::Dense(m),
            a: Operator::Dense(a),
            n1,
            n2: n - n1,
            basis: None,
        })
    }

    /// The full fine space; every coordinate is in block 1.
    pub fn fine(a: SparseSym, m: SparseSym) -> Result<Self> {
        if a.dim() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                actual: a.dim(),
                context: "fine mass and stiffness",
            });
        }
        let n = m.dim();
        Ok(Self {
            m: Operator::Sparse(m),
            a: Operator::Sparse(a),
            n1: n,
            n2: 0,
            basis: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn basis(&self) -> Option<&ReducedBasis> {
        self.basis.as_ref()
    }

    /// Maps a fine load vector to the reduced coordinates.
    pub fn load(&self, fine: &[f64]) -> Vec<f64> {
        match &self.basis {
            Some(b) => (b.matrix().transpose() * DVector::from_column_slice(fine)).as_slice().to_vec(),
            None => fine.to_vec(),
        }
    }

    /// Fine vector represented by the coefficients `c`.
    pub fn lift(&self, c: &[f64]) -> Vec<f64> {
        match &self.basis {
            Some(b) => b.prolong(c),
            None => c.to_vec(),
        }
    }

    /// `L²` projection of a fine vector: solves `M_r c = Rᵀ M u`.
    pub fn l2_project(&self, m_fine: &SparseSym, u: &[f64]) -> Result<Vec<f64>> {
        match &self.basis {
            None => Ok(u.to_vec()),
            Some(_) => {
                let rhs = self.load(&m_fine.matvec(u));
                Factor::spd(&self.m, "reduced mass")?.solve(&rhs)
            }
        }
    }
}

/// Galerkin projection `RᵀMR`, `RᵀAR`. Columns tagged `cem` must precede
/// those tagged `v2`; they form blocks 1 and 2.
pub fn reduce(a: &SparseSym, m: &SparseSym, basis: &ReducedBasis) -> Result<ReducedSystem> {
    if a.dim() != basis.n_dofs() || m.dim() != basis.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: basis.n_dofs(),
            actual: a.dim(),
            context: "fine matrices vs basis rows",
        });
    }
    let n1 = basis.info().iter().take_while(|c| c.tag == SpaceTag::Cem).count();
    if basis.info()[n1..].iter().any(|c| c.tag == SpaceTag::Cem) {
        return Err(Error::InvalidArgument(
            "basis columns must list all cem functions before the v2 functions".into(),
        ));
    }
    let r = basis.matrix();
    let mr = symmetrized(r.transpose() * m.mul_dense(r));
    let ar = symmetrized(r.transpose() * a.mul_dense(r));
    if Cholesky::new(mr.clone()).is_none() {
        return Err(Error::Singular(
            "reduced mass matrix is not positive definite (basis is rank deficient)".into(),
        ));
    }
    Ok(ReducedSystem {
        m: Operator::Dense(mr),
        a: Operator::Dense(ar),
        n1,
        n2: basis.len() - n1,
        basis: Some(basis.clone()),
    })
}
