//! Constrained energy minimizing basis functions on oversampled patches.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::aux::{AuxSpace, AuxSpace2};
use super::{ColumnInfo, ReducedBasis, SpaceTag};
use crate::assembly::{assemble, PermeabilityField, Weight};
use crate::error::{Error, Result};
use crate::grid::{GridHierarchy, OversamplePatch};
use crate::linalg::{norm2, KktSolver, SparseSym};

/// Constraint residual above which a basis solve is rejected.
const CONSTRAINT_TOL: f64 = 1e-9;

/// Position of each global DOF inside a patch, if any.
fn patch_positions(grid: &GridHierarchy, patch: &OversamplePatch) -> Vec<Option<usize>> {
    let mut pos = vec![None; grid.n_dofs()];
    for (k, &d) in patch.local_dofs.iter().enumerate() {
        pos[d] = Some(k);
    }
    pos
}

fn scatter_row(row: &mut [f64], entries: &[(usize, f64)], pos: &[Option<usize>]) {
    for &(d, v) in entries {
        if let Some(k) = pos[d] {
            row[k] = v;
        }
    }
}

fn wrap(element: usize, local: usize) -> impl Fn(Error) -> Error {
    move |e| Error::BasisConstruction {
        element,
        local,
        source: Box::new(e),
    }
}

struct PatchSolve {
    columns: Vec<Vec<(usize, f64)>>,
}

fn solve_patch(
    grid: &GridHierarchy,
    a: &SparseSym,
    elem: usize,
    layers: usize,
    rows: &[Vec<(usize, f64)>],
    targets: &[Vec<f64>],
) -> Result<PatchSolve> {
    let patch = grid.oversample(elem, layers)?;
    let pos = patch_positions(grid, &patch);
    let np = patch.local_dofs.len();
    let mut c = DMatrix::zeros(rows.len(), np);
    for (r, entries) in rows.iter().enumerate() {
        let mut row = vec![0.0; np];
        scatter_row(&mut row, entries, &pos);
        c.row_mut(r).copy_from_slice(&row);
    }
    let ap = a.submatrix(&patch.local_dofs);
    let solver = KktSolver::new(ap, c).map_err(wrap(elem, 0))?;
    let zero = vec![0.0; np];
    let mut columns = Vec::with_capacity(targets.len());
    for (j, g) in targets.iter().enumerate() {
        let (x, mu) = solver.solve(&zero, g).map_err(wrap(elem, j))?;
        let (_, r2) = solver.residuals(&x, &mu, &zero, g);
        let res = norm2(&r2);
        if res > CONSTRAINT_TOL * norm2(g).max(1.0) {
            return Err(wrap(elem, j)(Error::NotConverged {
                residual: res,
                tol: CONSTRAINT_TOL,
            }));
        }
        columns.push(
            patch
                .local_dofs
                .iter()
                .zip(&x)
                .map(|(&d, &v)| (d, v))
                .collect(),
        );
    }
    Ok(PatchSolve { columns })
}

fn patch_elements(grid: &GridHierarchy, elem: usize, layers: usize) -> Result<Vec<usize>> {
    Ok(grid.oversample(elem, layers)?.elements)
}

fn into_basis(grid: &GridHierarchy, solves: Vec<PatchSolve>, tag: SpaceTag) -> ReducedBasis {
    let n = solves.iter().map(|s| s.columns.len()).sum();
    let mut r = DMatrix::zeros(grid.n_dofs(), n);
    let mut info = Vec::with_capacity(n);
    let mut col = 0;
    for (element, s) in solves.into_iter().enumerate() {
        for (local, entries) in s.columns.into_iter().enumerate() {
            for (d, v) in entries {
                r[(d, col)] = v;
            }
            info.push(ColumnInfo { element, local, tag });
            col += 1;
        }
    }
    ReducedBasis::from_parts(r, info)
}

/// `V_cem`: for every auxiliary function, the `a`-minimal function on its
/// oversampled patch with prescribed `s`-moments against all auxiliary
/// functions of the patch.
pub fn cem_basis(
    grid: &GridHierarchy,
    field: &PermeabilityField,
    aux: &AuxSpace,
    layers: usize,
) -> Result<ReducedBasis> {
    let a = assemble(grid, Weight::Stiffness(field))?;
    let solves = (0..grid.n_elements())
        .into_par_iter()
        .map(|i| {
            let elems = patch_elements(grid, i, layers)?;
            let mut rows = Vec::new();
            let mut index = Vec::new();
            for &m in &elems {
                for l in 0..aux.elements[m].len() {
                    rows.push(aux.s_psi(m, l).to_vec());
                    index.push((m, l));
                }
            }
            let targets: Vec<Vec<f64>> = (0..aux.elements[i].len())
                .map(|j| index.iter().map(|&(m, l)| aux.s_pair(i, j, m, l)).collect())
                .collect();
            solve_patch(grid, &a, i, layers, &rows, &targets)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(into_basis(grid, solves, SpaceTag::Cem))
}

/// `V_{H,2}`: `a`-minimal functions on the patch that are `s`-orthogonal to
/// the first auxiliary space and carry prescribed `L²` moments against the
/// second one.
pub fn v2_basis(
    grid: &GridHierarchy,
    field: &PermeabilityField,
    aux1: &AuxSpace,
    aux2: &AuxSpace2,
    layers: usize,
) -> Result<ReducedBasis> {
    let a = assemble(grid, Weight::Stiffness(field))?;
    let solves = (0..grid.n_elements())
        .into_par_iter()
        .map(|i| {
            let elems = patch_elements(grid, i, layers)?;
            let mut rows = Vec::new();
            for &m in &elems {
                for l in 0..aux1.elements[m].len() {
                    rows.push(aux1.s_psi(m, l).to_vec());
                }
            }
            let n1 = rows.len();
            let mut index = Vec::new();
            for &m in &elems {
                for l in 0..aux2.elements[m].len() {
                    rows.push(aux2.m_xi(m, l).to_vec());
                    index.push((m, l));
                }
            }
            let targets: Vec<Vec<f64>> = (0..aux2.elements[i].len())
                .map(|j| {
                    let mut g = vec![0.0; n1];
                    g.extend(index.iter().map(|&(m, l)| aux2.l2_pair(i, j, m, l)));
                    g
                })
                .collect();
            solve_patch(grid, &a, i, layers, &rows, &targets)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(into_basis(grid, solves, SpaceTag::V2))
}
