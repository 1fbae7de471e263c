//! Multiscale partition of unity and the weight `κ̃ = κ Σᵢ |∇χᵢ|²`.

use rayon::prelude::*;

use super::{element_stiffness, PermeabilityField, WeightedField};
use crate::error::Result;
use crate::grid::GridHierarchy;
use crate::linalg::{BandCholesky, SparseSym};

/// Multiscale hat functions `χᵢ`, one per coarse vertex.
///
/// On each coarse element the four functions of its corners are stored on
/// the element's fine nodes (boundary included, lexicographic), in the
/// counter-clockwise corner order of [`GridHierarchy::element_vertices`].
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    coarse_n: usize,
    refine: usize,
    local: Vec<[Vec<f64>; 4]>,
}

/// Bilinear hat of corner `c` at local coordinates `(a, b) ∈ [0, 1]²`.
fn corner_hat(c: usize, a: f64, b: f64) -> f64 {
    match c {
        0 => (1.0 - a) * (1.0 - b),
        1 => a * (1.0 - b),
        2 => a * b,
        _ => (1.0 - a) * b,
    }
}

/// Solves the four κ-harmonic problems on one coarse element.
fn element_partition(grid: &GridHierarchy, field: &PermeabilityField, elem: usize) -> Result<[Vec<f64>; 4]> {
    let r = grid.refine();
    let side = r + 1;
    let (ex, ey) = grid.element_coords(elem);
    let local_node = |ix: usize, iy: usize| ix + iy * side;
    let is_interior = |ix: usize, iy: usize| ix > 0 && iy > 0 && ix < r && iy < r;
    let interior_index = |ix: usize, iy: usize| (ix - 1) + (iy - 1) * (r - 1);

    // boundary values for each corner
    let mut values: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; side * side]);
    for iy in 0..side {
        for ix in 0..side {
            if !is_interior(ix, iy) {
                let (a, b) = (ix as f64 / r as f64, iy as f64 / r as f64);
                for (c, v) in values.iter_mut().enumerate() {
                    v[local_node(ix, iy)] = corner_hat(c, a, b);
                }
            }
        }
    }

    let n_int = (r - 1) * (r - 1);
    let mut triplets = Vec::with_capacity(16 * r * r);
    let mut rhs: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n_int]);
    for cy in 0..r {
        for cx in 0..r {
            let cell = grid.cell_index(ex * r + cx, ey * r + cy);
            let k = element_stiffness(field.get(cell), grid.h());
            let corners = [(cx, cy), (cx + 1, cy), (cx + 1, cy + 1), (cx, cy + 1)];
            for (p, &(px, py)) in corners.iter().enumerate() {
                if !is_interior(px, py) {
                    continue;
                }
                let i = interior_index(px, py);
                for (q, &(qx, qy)) in corners.iter().enumerate() {
                    if is_interior(qx, qy) {
                        triplets.push((i, interior_index(qx, qy), k[p][q]));
                    } else {
                        for c in 0..4 {
                            rhs[c][i] -= k[p][q] * values[c][local_node(qx, qy)];
                        }
                    }
                }
            }
        }
    }
    if n_int > 0 {
        let chol = BandCholesky::factor(&SparseSym::from_triplets(n_int, triplets))?;
        for c in 0..4 {
            let x = chol.solve(&rhs[c]);
            for iy in 1..r {
                for ix in 1..r {
                    values[c][local_node(ix, iy)] = x[interior_index(ix, iy)];
                }
            }
        }
    }
    Ok(values)
}

/// Multiscale partition of unity for the given permeability.
pub fn msfem_partition(grid: &GridHierarchy, field: &PermeabilityField) -> Result<PartitionOfUnity> {
    field.check_grid(grid)?;
    let local = (0..grid.n_elements())
        .into_par_iter()
        .map(|e| element_partition(grid, field, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitionOfUnity {
        coarse_n: grid.coarse_n(),
        refine: grid.refine(),
        local,
    })
}

impl PartitionOfUnity {
    /// Number of coarse vertices, boundary vertices included.
    pub fn n_vertices(&self) -> usize {
        (self.coarse_n + 1) * (self.coarse_n + 1)
    }

    /// Values of the function attached to corner `corner` of `elem` on the
    /// element's fine nodes.
    pub fn on_element(&self, elem: usize, corner: usize) -> &[f64] {
        &self.local[elem][corner]
    }

    /// `χ_vertex` on every fine node of the grid.
    pub fn chi_nodes(&self, grid: &GridHierarchy, vertex: usize) -> Vec<f64> {
        let mut out = vec![0.0; grid.n_nodes()];
        for e in 0..grid.n_elements() {
            if let Some(c) = grid.element_vertices(e).iter().position(|&v| v == vertex) {
                for (&node, &v) in grid.element_nodes(e).iter().zip(&self.local[e][c]) {
                    out[node] = v;
                }
            }
        }
        out
    }

    /// `χ_vertex` restricted to the interior DOFs.
    pub fn chi_dofs(&self, grid: &GridHierarchy, vertex: usize) -> Vec<f64> {
        let nodes = self.chi_nodes(grid, vertex);
        (0..grid.n_dofs()).map(|d| nodes[grid.node_of_dof(d)]).collect()
    }

    /// `Σ_i |∇χᵢ|²` at the midpoint of every fine cell.
    pub fn gradient_energy(&self, grid: &GridHierarchy) -> Vec<f64> {
        let r = self.refine;
        let h = grid.h();
        (0..grid.n_cells())
            .into_par_iter()
            .map(|cell| {
                let e = grid.element_of_cell(cell);
                let (cx, cy) = grid.cell_coords(cell);
                let (lx, ly) = (cx % r, cy % r);
                let idx = [
                    lx + ly * (r + 1),
                    lx + 1 + ly * (r + 1),
                    lx + 1 + (ly + 1) * (r + 1),
                    lx + (ly + 1) * (r + 1),
                ];
                self.local[e]
                    .iter()
                    .map(|chi| {
                        let v = idx.map(|i| chi[i]);
                        let gx = ((v[1] - v[0]) + (v[2] - v[3])) / (2.0 * h);
                        let gy = ((v[3] - v[0]) + (v[2] - v[1])) / (2.0 * h);
                        gx * gx + gy * gy
                    })
                    .sum()
            })
            .collect()
    }
}

/// `κ̃ = κ Σᵢ |∇χᵢ|²` per fine cell.
pub fn kappa_tilde(grid: &GridHierarchy, field: &PermeabilityField, pou: &PartitionOfUnity) -> Result<WeightedField> {
    field.check_grid(grid)?;
    let g = pou.gradient_energy(grid);
    WeightedField::new(
        grid.fine_n(),
        g.iter().zip(field.values()).map(|(s, k)| s * k).collect(),
    )
}
