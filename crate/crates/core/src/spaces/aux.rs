//! Local spectral problems on the coarse elements.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::assembly::{element_mass, element_stiffness, PermeabilityField, WeightedField};
use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::linalg::gen_eig_dense;

/// Eigenfunctions of one coarse element, stored on the fine DOFs of its
/// closure. They are `L²` functions on `K_i` only; values on `∂K_i` belong
/// to this element and are not shared with the neighbours.
#[derive(Debug, Clone)]
pub struct LocalEigen {
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
    /// one column per eigenfunction, rows follow `dofs`
    pub vectors: DMatrix<f64>,
}

impl LocalEigen {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenfunction `j` extended by zero to a global fine vector.
    pub fn global(&self, j: usize, n_dofs: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_dofs];
        for (k, &d) in self.dofs.iter().enumerate() {
            out[d] = self.vectors[(k, j)];
        }
        out
    }

    /// Values of a global fine vector on this element's DOFs.
    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.dofs.iter().map(|&d| v[d]).collect()
    }
}

/// Auxiliary functions `ψ_j^{(i)}` with the element matrices of `s_i`.
#[derive(Debug, Clone)]
pub struct AuxSpace {
    pub elements: Vec<LocalEigen>,
    /// `s_i` on the DOFs of `K_i`
    local_s: Vec<DMatrix<f64>>,
    /// `S_i ψ_j^{(i)}` as sparse (dof, value) lists
    s_psi: Vec<Vec<Vec<(usize, f64)>>>,
}

/// Second-space auxiliary functions `ξ_j^{(i)}` with the element mass
/// matrices.
#[derive(Debug, Clone)]
pub struct AuxSpace2 {
    pub elements: Vec<LocalEigen>,
    local_m: Vec<DMatrix<f64>>,
    m_xi: Vec<Vec<Vec<(usize, f64)>>>,
}

/// Fine DOFs on the closure of a coarse element: every node of `K_i` that
/// is not on `∂Ω`. This is the space `H¹(K_i)` with the global boundary
/// condition.
pub fn element_dofs(grid: &GridHierarchy, elem: usize) -> Vec<usize> {
    grid.element_nodes(elem)
        .iter()
        .filter_map(|&n| grid.dof_of_node(n))
        .collect()
}

/// Matrix of a bilinear form integrated over the cells of one element only.
fn element_matrix(
    grid: &GridHierarchy,
    elem: usize,
    dofs: &[usize],
    cell_matrix: impl Fn(usize) -> [[f64; 4]; 4],
) -> DMatrix<f64> {
    let pos: HashMap<usize, usize> = dofs.iter().enumerate().map(|(k, &d)| (d, k)).collect();
    let mut out = DMatrix::zeros(dofs.len(), dofs.len());
    for &cell in grid.element_cells(elem) {
        let local = cell_matrix(cell);
        let idx = grid.cell_nodes(cell).map(|n| grid.dof_of_node(n).map(|d| pos[&d]));
        for (a, ia) in idx.iter().enumerate() {
            let Some(i) = *ia else { continue };
            for (b, ib) in idx.iter().enumerate() {
                if let Some(j) = *ib {
                    out[(i, j)] += local[a][b];
                }
            }
        }
    }
    out
}

fn stiffness_on(grid: &GridHierarchy, field: &PermeabilityField, elem: usize, dofs: &[usize]) -> DMatrix<f64> {
    element_matrix(grid, elem, dofs, |c| element_stiffness(field.get(c), grid.h()))
}

fn mass_on(grid: &GridHierarchy, elem: usize, dofs: &[usize], weight: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let me = element_mass(grid.h());
    element_matrix(grid, elem, dofs, |c| {
        let w = weight(c);
        me.map(|row| row.map(|v| v * w))
    })
}

/// Columns of `mat · vectors` as sparse global (dof, value) lists.
fn sparse_columns(mat: &DMatrix<f64>, e: &LocalEigen) -> Vec<Vec<(usize, f64)>> {
    let prod = mat * &e.vectors;
    (0..e.len())
        .map(|j| {
            e.dofs
                .iter()
                .enumerate()
                .map(|(k, &d)| (d, prod[(k, j)]))
                .filter(|(_, v)| *v != 0.0)
                .collect()
        })
        .collect()
}

fn local_pair(mat: &DMatrix<f64>, e: &LocalEigen, j: usize, l: usize) -> f64 {
    (e.vectors.column(l).transpose() * mat * e.vectors.column(j))[(0, 0)]
}

impl AuxSpace {
    /// `s_i` on the DOFs of element `elem`.
    pub fn local_weighted_mass(&self, elem: usize) -> &DMatrix<f64> {
        &self.local_s[elem]
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn total(&self) -> usize {
        self.elements.iter().map(LocalEigen::len).sum()
    }

    /// Sparse `S_i ψ_j^{(i)}`, the row of the constraint `s(·, ψ_j^{(i)})`.
    pub fn s_psi(&self, elem: usize, j: usize) -> &[(usize, f64)] {
        &self.s_psi[elem][j]
    }

    /// `s(v, ψ_j^{(i)})` for a global fine function `v`.
    pub fn s_inner(&self, elem: usize, j: usize, v: &[f64]) -> f64 {
        self.s_psi[elem][j].iter().map(|&(d, w)| w * v[d]).sum()
    }

    /// `s(ψ_j^{(i)}, ψ_l^{(m)})`; zero across elements.
    pub fn s_pair(&self, i: usize, j: usize, m: usize, l: usize) -> f64 {
        if i != m {
            return 0.0;
        }
        local_pair(&self.local_s[i], &self.elements[i], j, l)
    }

    /// `Π_i` applied to values on the DOFs of element `elem`.
    pub fn project_local(&self, elem: usize, x: &[f64]) -> Vec<f64> {
        let e = &self.elements[elem];
        let sx = &self.local_s[elem] * DVector::from_column_slice(x);
        let coeffs = e.vectors.transpose() * sx;
        (&e.vectors * coeffs).as_slice().to_vec()
    }
}

impl AuxSpace2 {
    /// `L²` mass on the DOFs of element `elem`.
    pub fn local_mass(&self, elem: usize) -> &DMatrix<f64> {
        &self.local_m[elem]
    }

    pub fn total(&self) -> usize {
        self.elements.iter().map(LocalEigen::len).sum()
    }

    /// Sparse `M_i ξ_j^{(i)}`.
    pub fn m_xi(&self, elem: usize, j: usize) -> &[(usize, f64)] {
        &self.m_xi[elem][j]
    }

    /// `(v, ξ_j^{(i)})` for a global fine function `v`.
    pub fn l2_inner(&self, elem: usize, j: usize, v: &[f64]) -> f64 {
        self.m_xi[elem][j].iter().map(|&(d, w)| w * v[d]).sum()
    }

    /// `(ξ_j^{(i)}, ξ_l^{(m)})`; zero across elements.
    pub fn l2_pair(&self, i: usize, j: usize, m: usize, l: usize) -> f64 {
        if i != m {
            return 0.0;
        }
        local_pair(&self.local_m[i], &self.elements[i], j, l)
    }
}

/// The `counts[i]` smallest eigenpairs of `a_i` versus `s_i` on each
/// element, over `H¹(K_i)`.
pub fn aux_spectral(
    grid: &GridHierarchy,
    field: &PermeabilityField,
    kt: &WeightedField,
    counts: &[usize],
) -> Result<AuxSpace> {
    if counts.len() != grid.n_elements() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_elements(),
            actual: counts.len(),
            context: "auxiliary counts per element",
        });
    }
    if field.n() != grid.fine_n() || kt.n() != grid.fine_n() {
        return Err(Error::DimensionMismatch {
            expected: grid.fine_n(),
            actual: if field.n() != grid.fine_n() { field.n() } else { kt.n() },
            context: "cells per side vs fine grid",
        });
    }
    let built = (0..grid.n_elements())
        .into_par_iter()
        .map(|e| {
            let dofs = element_dofs(grid, e);
            let l = counts[e];
            if l > dofs.len() {
                return Err(Error::InvalidArgument(format!(
                    "element {e}: {l} auxiliary functions requested, local space has dimension {}",
                    dofs.len()
                )));
            }
            let sl = mass_on(grid, e, &dofs, |c| kt.get(c));
            if sl.iter().all(|&v| v == 0.0) {
                return Err(Error::DegenerateWeight { element: e });
            }
            let al = stiffness_on(grid, field, e, &dofs);
            let eig = gen_eig_dense(&al, &sl).map_err(|err| match err {
                Error::NotPositiveDefinite { .. } | Error::Singular(_) => Error::DegenerateWeight { element: e },
                other => other,
            })?;
            let eig = eig.truncate(l);
            let local = LocalEigen {
                dofs,
                values: eig.values.iter().map(|v| v.max(0.0)).collect(),
                vectors: eig.vectors,
            };
            let rows = sparse_columns(&sl, &local);
            Ok((local, sl, rows))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut elements = Vec::with_capacity(built.len());
    let mut local_s = Vec::with_capacity(built.len());
    let mut s_psi = Vec::with_capacity(built.len());
    for (e, s, r) in built {
        elements.push(e);
        local_s.push(s);
        s_psi.push(r);
    }
    Ok(AuxSpace {
        elements,
        local_s,
        s_psi,
    })
}

/// `Π v`: the element-wise `s_i`-orthogonal projection onto the auxiliary
/// space, one vector per element on that element's DOFs.
pub fn project_pi(aux: &AuxSpace, v: &[f64]) -> Vec<Vec<f64>> {
    aux.elements
        .iter()
        .enumerate()
        .map(|(i, e)| aux.project_local(i, &e.restrict(v)))
        .collect()
}

/// Orthonormal basis of the null space of the rows of `c`.
fn null_space(c: &DMatrix<f64>, elem: usize) -> Result<DMatrix<f64>> {
    let n = c.ncols();
    let m = c.nrows();
    if m == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let gram = c * c.transpose();
    let chol = gram
        .clone()
        .cholesky()
        .ok_or(Error::RankDeficientConstraint { index: elem })?;
    let proj = DMatrix::identity(n, n) - c.transpose() * chol.solve(c);
    let eig = SymmetricEigen::new(0.5 * (&proj + proj.transpose()));
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
    if keep.len() != n - m {
        return Err(Error::RankDeficientConstraint { index: elem });
    }
    let mut z = DMatrix::zeros(n, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        z.set_column(col, &eig.eigenvectors.column(k));
    }
    Ok(z)
}

/// The `counts[i]` smallest eigenpairs of `a_i` versus the `L²` mass on each
/// element, over the functions of `V(K_i)` (zero trace on `∂K_i`) with
/// `Π_i v = 0`.
pub fn v2_aux_spectral(
    grid: &GridHierarchy,
    field: &PermeabilityField,
    aux1: &AuxSpace,
    counts: &[usize],
) -> Result<AuxSpace2> {
    if counts.len() != grid.n_elements() || aux1.n_elements() != grid.n_elements() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_elements(),
            actual: counts.len().min(aux1.n_elements()),
            context: "second-space counts per element",
        });
    }
    let built = (0..grid.n_elements())
        .into_par_iter()
        .map(|e| {
            let local = &aux1.elements[e];
            let dofs = &local.dofs;
            let inner: Vec<usize> = grid.element_interior_dofs(e);
            let pick: Vec<usize> = dofs
                .iter()
                .enumerate()
                .filter(|(_, d)| inner.binary_search(d).is_ok())
                .map(|(k, _)| k)
                .collect();
            let c_full = (&aux1.local_s[e] * &local.vectors).transpose();
            let c = c_full.select_columns(&pick);
            let z_in = null_space(&c, e)?;
            let mut z = DMatrix::zeros(dofs.len(), z_in.ncols());
            for (r, &k) in pick.iter().enumerate() {
                z.set_row(k, &z_in.row(r));
            }
            if counts[e] > z.ncols() {
                return Err(Error::InvalidArgument(format!(
                    "element {e}: {} second-space functions requested, constrained space has dimension {}",
                    counts[e],
                    z.ncols()
                )));
            }
            let ml = mass_on(grid, e, dofs, |_| 1.0);
            let az = z.transpose() * stiffness_on(grid, field, e, dofs) * &z;
            let mz = z.transpose() * &ml * &z;
            let eig = gen_eig_dense(&az, &mz)?.truncate(counts[e]);
            let xi = LocalEigen {
                dofs: dofs.clone(),
                values: eig.values.iter().map(|v| v.max(0.0)).collect(),
                vectors: &z * &eig.vectors,
            };
            let rows = sparse_columns(&ml, &xi);
            Ok((xi, ml, rows))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut elements = Vec::with_capacity(built.len());
    let mut local_m = Vec::with_capacity(built.len());
    let mut m_xi = Vec::with_capacity(built.len());
    for (e, m, r) in built {
        elements.push(e);
        local_m.push(m);
        m_xi.push(r);
    }
    Ok(AuxSpace2 {
        elements,
        local_m,
        m_xi,
    })
}
