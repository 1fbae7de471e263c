//! Coarse multiscale spaces: the constraint energy minimizing space `V_cem`
//! (also `V_{H,1}`) and the complementary space `V_{H,2}` used for the
//! explicit part of the splitting.

mod aux;
mod basis;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

pub use aux::{aux_spectral, project_pi, v2_aux_spectral, AuxSpace, AuxSpace2, LocalEigen};
pub use basis::{cem_basis, v2_basis};

use crate::assembly::{kappa_tilde, msfem_partition, PermeabilityField};
use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::linalg::{gen_eig_dense, SparseSym};

/// Default number of auxiliary functions per element in both spaces.
pub const DEFAULT_COUNT: usize = 3;

/// Basis counts and oversampling for both spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceParams {
    /// auxiliary functions per element for `V_cem`
    pub l: usize,
    /// auxiliary functions per element for `V_{H,2}`
    pub j: usize,
    pub layers: usize,
}

impl Default for SpaceParams {
    fn default() -> Self {
        Self {
            l: DEFAULT_COUNT,
            j: DEFAULT_COUNT,
            layers: crate::grid::DEFAULT_LAYERS,
        }
    }
}

/// Everything built from one permeability field.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub aux: AuxSpace,
    pub aux2: AuxSpace2,
    pub cem: ReducedBasis,
    pub v2: ReducedBasis,
}

impl Spaces {
    /// `V_cem` columns followed by `V_{H,2}` columns.
    pub fn combined(&self) -> ReducedBasis {
        self.cem.concat(&self.v2)
    }
}

/// Partition of unity, both auxiliary spaces and both bases.
pub fn build_spaces(grid: &GridHierarchy, field: &PermeabilityField, params: SpaceParams) -> Result<Spaces> {
    let ne = grid.n_elements();
    let pou = msfem_partition(grid, field)?;
    let kt = kappa_tilde(grid, field, &pou)?;
    let aux = aux_spectral(grid, field, &kt, &vec![params.l; ne])?;
    let cem = cem_basis(grid, field, &aux, params.layers)?;
    let aux2 = v2_aux_spectral(grid, field, &aux, &vec![params.j; ne])?;
    let v2 = v2_basis(grid, field, &aux, &aux2, params.layers)?;
    Ok(Spaces { aux, aux2, cem, v2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceTag {
    Cem,
    V2,
}

impl SpaceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceTag::Cem => "cem",
            SpaceTag::V2 => "v2",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "cem" => Some(SpaceTag::Cem),
            "v2" => Some(SpaceTag::V2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnInfo {
    pub element: usize,
    pub local: usize,
    pub tag: SpaceTag,
}

/// Basis functions as the columns of a dense `n_dofs × n` matrix.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    r: DMatrix<f64>,
    info: Vec<ColumnInfo>,
}

impl ReducedBasis {
    pub fn from_parts(r: DMatrix<f64>, info: Vec<ColumnInfo>) -> Self {
        assert_eq!(r.ncols(), info.len());
        Self { r, info }
    }

    pub fn len(&self) -> usize {
        self.info.len()
    }

    pub fn is_empty(&self) -> bool {
        self.info.is_empty()
    }

    pub fn n_dofs(&self) -> usize {
        self.r.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn info(&self) -> &[ColumnInfo] {
        &self.info
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.r.column(j).iter().copied().collect()
    }

    /// Fine vector `R c`.
    pub fn prolong(&self, coeffs: &[f64]) -> Vec<f64> {
        (&self.r * nalgebra::DVector::from_column_slice(coeffs)).as_slice().to_vec()
    }

    /// Columns of `self` followed by those of `other`.
    pub fn concat(&self, other: &ReducedBasis) -> ReducedBasis {
        let mut r = DMatrix::zeros(self.n_dofs(), self.len() + other.len());
        r.columns_mut(0, self.len()).copy_from(&self.r);
        r.columns_mut(self.len(), other.len()).copy_from(&other.r);
        let mut info = self.info.clone();
        info.extend_from_slice(&other.info);
        ReducedBasis { r, info }
    }

    /// Columns with the given tag, in order.
    pub fn select(&self, tag: SpaceTag) -> ReducedBasis {
        let idx: Vec<usize> = (0..self.len()).filter(|&j| self.info[j].tag == tag).collect();
        let r = self.r.select_columns(&idx);
        ReducedBasis {
            r,
            info: idx.iter().map(|&j| self.info[j]).collect(),
        }
    }

    /// Fails unless the `M`-Gram matrix is well conditioned enough to
    /// certify linearly independent columns.
    pub fn check_full_rank(&self, m: &SparseSym) -> Result<()> {
        if self.is_empty() {
            return Ok(());
        }
        let gram = self.r.transpose() * m.mul_dense(&self.r);
        let eig = gen_eig_dense(&gram, &DMatrix::identity(self.len(), self.len()))?;
        let (lo, hi) = (eig.values[0], *eig.values.last().unwrap());
        if !(lo > 1e-12 * hi) {
            return Err(Error::Singular(format!(
                "basis Gram matrix has eigenvalue range [{lo:e}, {hi:e}]"
            )));
        }
        Ok(())
    }

    /// Writes the basis with a header identifying grid, field and the
    /// construction parameters `build` (one line of free text).
    pub fn write_cache(&self, path: &Path, grid: &GridHierarchy, field: &PermeabilityField, build: &str) -> Result<()> {
        let mut head = String::new();
        let _ = writeln!(head, "fracms-basis 1");
        let _ = writeln!(head, "grid {} {}", grid.coarse_n(), grid.refine());
        let _ = writeln!(head, "field {}", field_checksum(field));
        let _ = writeln!(head, "build {}", build.replace('\n', " "));
        let _ = writeln!(head, "columns {} rows {}", self.len(), self.n_dofs());
        for c in &self.info {
            let _ = writeln!(head, "{} {} {}", c.element, c.local, c.tag.as_str());
        }
        head.push_str("data\n");
        let mut bytes = head.into_bytes();
        bytes.reserve(8 * self.r.len());
        for v in self.r.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Loads a cached basis, rejecting files built for another grid, field
    /// or set of construction parameters.
    pub fn read_cache(path: &Path, grid: &GridHierarchy, field: &PermeabilityField, build: &str) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let marker = b"data\n";
        let split = bytes
            .windows(marker.len())
            .position(|w| w == marker)
            .ok_or(Error::Parse {
                line: 1,
                message: "missing data marker".into(),
            })?;
        let head = std::str::from_utf8(&bytes[..split]).map_err(|_| Error::Parse {
            line: 1,
            message: "header is not UTF-8".into(),
        })?;
        let lines: Vec<&str> = head.lines().collect();
        let bad = |line: usize, what: &str| Error::Parse {
            line: line + 1,
            message: what.to_string(),
        };
        if lines.first() != Some(&"fracms-basis 1") {
            return Err(bad(0, "not a basis cache"));
        }
        let expected_grid = format!("grid {} {}", grid.coarse_n(), grid.refine());
        if lines.get(1) != Some(&expected_grid.as_str()) {
            return Err(Error::Config(format!(
                "basis cache {} was built for another grid",
                path.display()
            )));
        }
        let expected_field = format!("field {}", field_checksum(field));
        if lines.get(2) != Some(&expected_field.as_str()) {
            return Err(Error::Config(format!(
                "basis cache {} was built for another permeability field",
                path.display()
            )));
        }
        let expected_build = format!("build {}", build.replace('\n', " "));
        if lines.get(3) != Some(&expected_build.as_str()) {
            return Err(Error::Config(format!(
                "basis cache {} was built with other parameters",
                path.display()
            )));
        }
        let dims: Vec<&str> = lines.get(4).ok_or(bad(4, "missing column count"))?.split_whitespace().collect();
        let (ncols, nrows) = match dims.as_slice() {
            ["columns", c, "rows", r] => (
                c.parse::<usize>().map_err(|_| bad(4, "bad column count"))?,
                r.parse::<usize>().map_err(|_| bad(4, "bad row count"))?,
            ),
            _ => return Err(bad(4, "expected `columns <n> rows <m>`")),
        };
        if nrows != grid.n_dofs() {
            return Err(bad(4, "row count does not match the grid"));
        }
        if lines.len() != 5 + ncols {
            return Err(bad(lines.len().min(5 + ncols), "column metadata count mismatch"));
        }
        let mut info = Vec::with_capacity(ncols);
        for (k, line) in lines[5..].iter().enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                [e, l, t] => e
                    .parse()
                    .ok()
                    .zip(l.parse().ok())
                    .zip(SpaceTag::parse(t))
                    .map(|((element, local), tag)| ColumnInfo { element, local, tag }),
                _ => None,
            };
            info.push(parsed.ok_or(bad(5 + k, "bad column metadata"))?);
        }
        let data = &bytes[split + marker.len()..];
        if data.len() != 8 * ncols * nrows {
            return Err(bad(lines.len(), "data block has the wrong length"));
        }
        let values: Vec<f64> = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            r: DMatrix::from_vec(nrows, ncols, values),
            info,
        })
    }
}

/// SHA-256 of the field's dimensions and cell values.
pub fn field_checksum(field: &PermeabilityField) -> String {
    let mut h = Sha256::new();
    h.update((field.n() as u64).to_le_bytes());
    for v in field.values() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
