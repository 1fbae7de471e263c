//! Q1 finite-element assembly on the fine grid.
//!
//! Coefficients are piecewise constant per fine cell, so every element
//! integral below is exact. Global matrices live on the interior DOFs only.

mod partition;
mod raster;

use std::path::Path;

use rayon::prelude::*;

pub use partition::{kappa_tilde, msfem_partition, PartitionOfUnity};
pub use raster::Raster;

use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::linalg::SparseSym;

const MASS_PATTERN: [[f64; 4]; 4] = [
    [4.0, 2.0, 1.0, 2.0],
    [2.0, 4.0, 2.0, 1.0],
    [1.0, 2.0, 4.0, 2.0],
    [2.0, 1.0, 2.0, 4.0],
];

const STIFFNESS_PATTERN: [[f64; 4]; 4] = [
    [4.0, -1.0, -2.0, -1.0],
    [-1.0, 4.0, -1.0, -2.0],
    [-2.0, -1.0, 4.0, -1.0],
    [-1.0, -2.0, -1.0, 4.0],
];

/// Q1 mass matrix of an `h × h` cell, corners counter-clockwise.
pub fn element_mass(h: f64) -> [[f64; 4]; 4] {
    let s = h * h / 36.0;
    MASS_PATTERN.map(|row| row.map(|v| v * s))
}

/// Q1 stiffness matrix of a square cell with constant coefficient. In two
/// dimensions it does not depend on the cell size.
pub fn element_stiffness(kappa_cell: f64, _h: f64) -> [[f64; 4]; 4] {
    let s = kappa_cell / 6.0;
    STIFFNESS_PATTERN.map(|row| row.map(|v| v * s))
}

/// Positive permeability, one value per fine cell, lexicographic.
#[derive(Debug, Clone, PartialEq)]
pub struct PermeabilityField {
    n: usize,
    values: Vec<f64>,
}

impl PermeabilityField {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: values.len(),
                context: "permeability cells",
            });
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "permeability must be positive and finite, cell {i} has {}",
                values[i]
            )));
        }
        Ok(Self { n, values })
    }

    pub fn constant(n: usize, kappa: f64) -> Result<Self> {
        Self::new(n, vec![kappa; n * n])
    }

    /// Cells per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn contrast(&self) -> f64 {
        self.max() / self.min()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.values.iter().map(|v| v * c).collect())
    }

    pub fn from_raster(r: Raster) -> Result<Self> {
        if r.nx != r.ny {
            return Err(Error::InvalidArgument(format!(
                "permeability raster must be square, got {} x {}",
                r.nx, r.ny
            )));
        }
        Self::new(r.nx, r.values)
    }

    pub fn to_raster(&self) -> Raster {
        Raster {
            nx: self.n,
            ny: self.n,
            values: self.values.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_raster(Raster::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_raster().write(path)
    }

    fn check_grid(&self, grid: &GridHierarchy) -> Result<()> {
        if self.n != grid.fine_n() {
            return Err(Error::DimensionMismatch {
                expected: grid.fine_n(),
                actual: self.n,
                context: "field cells per side vs fine grid",
            });
        }
        Ok(())
    }
}

/// Nonnegative per-cell weight `κ̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedField {
    n: usize,
    values: Vec<f64>,
}

impl WeightedField {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: values.len(),
                context: "weight cells",
            });
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weight must be nonnegative and finite, cell {i} has {}",
                values[i]
            )));
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    fn check_grid(&self, grid: &GridHierarchy) -> Result<()> {
        if self.n != grid.fine_n() {
            return Err(Error::DimensionMismatch {
                expected: grid.fine_n(),
                actual: self.n,
                context: "weight cells per side vs fine grid",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    Mass,
    Stiffness(&'a PermeabilityField),
    WeightedMass(&'a WeightedField),
}

/// Global matrix on the interior DOFs.
pub fn assemble(grid: &GridHierarchy, weight: Weight<'_>) -> Result<SparseSym> {
    match weight {
        Weight::Mass => {}
        Weight::Stiffness(k) => k.check_grid(grid)?,
        Weight::WeightedMass(w) => w.check_grid(grid)?,
    }
    let h = grid.h();
    let unit_mass = element_mass(h);
    let triplets: Vec<(usize, usize, f64)> = (0..grid.n_cells())
        .into_par_iter()
        .flat_map_iter(|cell| {
            let local = match weight {
                Weight::Mass => unit_mass,
                Weight::Stiffness(k) => element_stiffness(k.get(cell), h),
                Weight::WeightedMass(w) => {
                    let c = w.get(cell);
                    unit_mass.map(|row| row.map(|v| v * c))
                }
            };
            let dofs = grid.cell_nodes(cell).map(|n| grid.dof_of_node(n));
            let mut out = Vec::with_capacity(16);
            for (a, da) in dofs.iter().enumerate() {
                let Some(i) = *da else { continue };
                for (b, db) in dofs.iter().enumerate() {
                    if let Some(j) = *db {
                        out.push((i, j, local[a][b]));
                    }
                }
            }
            out
        })
        .collect();
    Ok(SparseSym::from_triplets(grid.n_dofs(), triplets))
}

/// A source term `f(x, y, t)`.
pub trait SourceTerm: Sync {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64;
}

impl<F> SourceTerm for F
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self(x, y, t)
    }
}

/// `(f(·, t), φ_j)` for every interior DOF, with `f` replaced by its bilinear
/// interpolant on each cell (boundary nodes included).
pub fn load_vector(grid: &GridHierarchy, f: &dyn SourceTerm, t: f64) -> Vec<f64> {
    let nodal: Vec<f64> = (0..grid.n_nodes())
        .into_par_iter()
        .map(|n| {
            let (x, y) = grid.node_position(n);
            f.eval(x, y, t)
        })
        .collect();
    let me = element_mass(grid.h());
    let mut out = vec![0.0; grid.n_dofs()];
    for cell in 0..grid.n_cells() {
        let nodes = grid.cell_nodes(cell);
        for (a, &na) in nodes.iter().enumerate() {
            if let Some(i) = grid.dof_of_node(na) {
                out[i] += (0..4).map(|b| me[a][b] * nodal[nodes[b]]).sum::<f64>();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;
    use crate::grid::build_grids;
    use crate::linalg::{gen_eig_dense, gen_eig_smallest};

    fn random_field(n: usize, seed: u64) -> PermeabilityField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        PermeabilityField::new(n, (0..n * n).map(|_| 10f64.powf(rng.gen_range(0.0..5.0))).collect())
            .unwrap()
    }

    #[test]
    fn unit_mass_matrix() {
        let m = element_mass(1.0);
        assert!((m[0][0] - 4.0 / 36.0).abs() < 1e-16);
        assert!((m[0][2] - 1.0 / 36.0).abs() < 1e-16);
        for h in [1.0, 0.3, 0.01] {
            let m = element_mass(h);
            let total: f64 = m.iter().flatten().sum();
            assert!((total - h * h).abs() < 1e-15);
        }
        let small = element_mass(0.01);
        for (r1, r2) in small.iter().zip(&element_mass(1.0)) {
            for (a, b) in r1.iter().zip(r2) {
                assert!((a - 1e-4 * b).abs() < 1e-18);
            }
        }
    }

    // Exact integrals of products of bilinear shape functions via 2-point
    // Gauss rules, which integrate biquadratics exactly.
    #[test]
    fn element_matrices_match_quadrature() {
        let g = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
        let phi = |k: usize, x: f64, y: f64| match k {
            0 => (1.0 - x) * (1.0 - y),
            1 => x * (1.0 - y),
            2 => x * y,
            _ => (1.0 - x) * y,
        };
        let grad = |k: usize, x: f64, y: f64| match k {
            0 => (-(1.0 - y), -(1.0 - x)),
            1 => (1.0 - y, -x),
            2 => (y, x),
            _ => (-y, 1.0 - x),
        };
        let m = element_mass(1.0);
        let a = element_stiffness(1.0, 1.0);
        for i in 0..4 {
            for j in 0..4 {
                let mut qm = 0.0;
                let mut qa = 0.0;
                for &x in &g {
                    for &y in &g {
                        qm += 0.25 * phi(i, x, y) * phi(j, x, y);
                        let (gi, gj) = (grad(i, x, y), grad(j, x, y));
                        qa += 0.25 * (gi.0 * gj.0 + gi.1 * gj.1);
                    }
                }
                assert!((qm - m[i][j]).abs() < 1e-15);
                assert!((qa - a[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stiffness_rows_and_linearity() {
        for kappa in [1.0, 3.7, 1e5] {
            let a = element_stiffness(kappa, 0.1);
            for row in a {
                assert!(row.iter().sum::<f64>().abs() <= 1e-12 * kappa);
            }
            let a1 = element_stiffness(1.0, 0.5);
            for (r1, r2) in a.iter().zip(&a1) {
                for (x, y) in r1.iter().zip(r2) {
                    assert!((x - kappa * y).abs() <= 1e-12 * kappa);
                }
            }
        }
    }

    #[test]
    fn mass_is_positive_definite() {
        let g = build_grids(2, 2).unwrap();
        let m = assemble(&g, Weight::Mass).unwrap();
        let e = gen_eig_dense(&m.to_dense(), &nalgebra::DMatrix::identity(m.dim(), m.dim())).unwrap();
        assert!(e.values[0] > 0.0);
        assert!(m.is_symmetric());
    }

    fn q1_first_eigenvalue(h: f64) -> f64 {
        let c = (PI * h).cos();
        2.0 * 6.0 / (h * h) * (1.0 - c) / (2.0 + c)
    }

    #[test]
    fn laplacian_first_eigenvalue() {
        // (2,2): h = 1/4, compare with the exact tensor-product Q1 eigenvalue
        let g = build_grids(2, 2).unwrap();
        let k = PermeabilityField::constant(g.fine_n(), 1.0).unwrap();
        let a = assemble(&g, Weight::Stiffness(&k)).unwrap();
        let m = assemble(&g, Weight::Mass).unwrap();
        let lam = gen_eig_smallest(&a, &m, 1).unwrap().values[0];
        assert!((lam - q1_first_eigenvalue(0.25)).abs() < 1e-10 * lam);
        // at h = 1/4 the Q1 eigenvalue sits about 5.2 % above 2π²
        assert!((lam / (2.0 * PI * PI) - 1.0).abs() < 0.06);

        let g = build_grids(2, 4).unwrap();
        let k = PermeabilityField::constant(g.fine_n(), 1.0).unwrap();
        let a = assemble(&g, Weight::Stiffness(&k)).unwrap();
        let m = assemble(&g, Weight::Mass).unwrap();
        let lam = gen_eig_smallest(&a, &m, 1).unwrap().values[0];
        assert!((lam - q1_first_eigenvalue(0.125)).abs() < 1e-10 * lam);
        assert!((lam / (2.0 * PI * PI) - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_weight_gives_zero_matrix() {
        let g = build_grids(2, 3).unwrap();
        let w = WeightedField::new(g.fine_n(), vec![0.0; g.n_cells()]).unwrap();
        let s = assemble(&g, Weight::WeightedMass(&w)).unwrap();
        assert_eq!(s.to_dense().abs().max(), 0.0);
    }

    #[test]
    fn weighted_mass_with_unit_weight_is_mass() {
        let g = build_grids(3, 2).unwrap();
        let w = WeightedField::new(g.fine_n(), vec![1.0; g.n_cells()]).unwrap();
        let s = assemble(&g, Weight::WeightedMass(&w)).unwrap().to_dense();
        let m = assemble(&g, Weight::Mass).unwrap().to_dense();
        assert!((s - m).abs().max() < 1e-18);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = build_grids(2, 2).unwrap();
        let k = PermeabilityField::constant(5, 1.0).unwrap();
        assert!(matches!(
            assemble(&g, Weight::Stiffness(&k)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn field_validation() {
        assert!(PermeabilityField::new(2, vec![1.0, 2.0, 0.0, 1.0]).is_err());
        assert!(PermeabilityField::new(2, vec![1.0, 2.0, f64::NAN, 1.0]).is_err());
        assert!(PermeabilityField::new(2, vec![1.0; 3]).is_err());
        let k = PermeabilityField::new(2, vec![1.0, 1e5, 1.0, 2.0]).unwrap();
        assert_eq!(k.contrast(), 1e5);
        assert!(WeightedField::new(1, vec![-1.0]).is_err());
    }

    #[test]
    fn field_raster_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("kappa.txt");
        let k = random_field(6, 4);
        k.write(&p).unwrap();
        let back = PermeabilityField::read(&p).unwrap();
        assert_eq!(k, back);
        std::fs::write(&p, "2 3\n1 1\n1 1\n1 1\n").unwrap();
        assert!(PermeabilityField::read(&p).is_err());
    }

    #[test]
    fn load_of_zero_and_one() {
        let g = build_grids(3, 3).unwrap();
        let zero = load_vector(&g, &|_: f64, _: f64, _: f64| 0.0, 0.0);
        assert!(zero.iter().all(|&v| v == 0.0));
        let one = load_vector(&g, &|_: f64, _: f64, _: f64| 1.0, 0.0);
        // every interior node touches four cells: h²
        for v in one {
            assert!((v - g.h() * g.h()).abs() < 1e-15);
        }
    }

    #[test]
    fn sine_load_matches_quadrature() {
        let g = build_grids(10, 10).unwrap();
        let f = |x: f64, y: f64, _t: f64| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin();
        let load = load_vector(&g, &f, 0.0);
        // 4-point Gauss-Legendre per cell against the hat function
        let gp = [
            (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
            (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        ];
        let h = g.h();
        let mut worst: f64 = 0.0;
        for dof in (0..g.n_dofs()).step_by(37) {
            let (nx, ny) = g.node_position(g.node_of_dof(dof));
            let mut q = 0.0;
            for (dx, dy) in [(-1.0, -1.0), (0.0, -1.0), (0.0, 0.0), (-1.0, 0.0)] {
                let (x0, y0) = (nx + dx * h, ny + dy * h);
                for &(sx, wx) in &gp {
                    for &(sy, wy) in &gp {
                        let x = x0 + 0.5 * h * (sx + 1.0);
                        let y = y0 + 0.5 * h * (sy + 1.0);
                        let hat = (1.0 - (x - nx).abs() / h) * (1.0 - (y - ny).abs() / h);
                        q += 0.25 * h * h * wx * wy * f(x, y, 0.0) * hat;
                    }
                }
            }
            worst = worst.max(((load[dof] - q) / q).abs());
        }
        assert!(worst < 1e-3, "relative error {worst}");
    }

    #[test]
    fn global_s_is_sum_of_element_blocks() {
        let g = build_grids(3, 3).unwrap();
        let vals: Vec<f64> = (0..g.n_cells()).map(|c| 1.0 + (c % 7) as f64).collect();
        let w = WeightedField::new(g.fine_n(), vals.clone()).unwrap();
        let s = assemble(&g, Weight::WeightedMass(&w)).unwrap().to_dense();
        let mut sum = nalgebra::DMatrix::zeros(g.n_dofs(), g.n_dofs());
        for e in 0..g.n_elements() {
            let mut only = vec![0.0; g.n_cells()];
            for &c in g.element_cells(e) {
                only[c] = vals[c];
            }
            let we = WeightedField::new(g.fine_n(), only).unwrap();
            sum += assemble(&g, Weight::WeightedMass(&we)).unwrap().to_dense();
        }
        assert!((s - sum).abs().max() < 1e-14);
    }

    #[test]
    fn stiffness_null_space_is_trivial() {
        let g = build_grids(2, 3).unwrap();
        let k = random_field(g.fine_n(), 8);
        let a = assemble(&g, Weight::Stiffness(&k)).unwrap();
        assert!(a.is_symmetric());
        let e = gen_eig_dense(&a.to_dense(), &nalgebra::DMatrix::identity(a.dim(), a.dim())).unwrap();
        assert!(e.values[0] > 0.0);
    }

    proptest! {
        #[test]
        fn energy_is_monotone_in_kappa(
            seed in 0u64..1000,
            v in proptest::collection::vec(-1.0f64..1.0, 25),
            bump in proptest::collection::vec(0.0f64..10.0, 36),
        ) {
            let g = build_grids(2, 3).unwrap();
            let k1 = random_field(6, seed);
            let k2 = PermeabilityField::new(
                6,
                k1.values().iter().zip(&bump).map(|(a, b)| a + b).collect(),
            ).unwrap();
            let a1 = assemble(&g, Weight::Stiffness(&k1)).unwrap();
            let a2 = assemble(&g, Weight::Stiffness(&k2)).unwrap();
            let (e1, e2) = (a1.quad(&v), a2.quad(&v));
            prop_assert!(e1 <= e2 * (1.0 + 1e-12) + 1e-12);
            prop_assert!(e1 >= -1e-9 * k1.max());
        }
    }
}
