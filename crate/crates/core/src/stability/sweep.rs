use std::fmt::Write as _;

use rayon::prelude::*;

use super::StabilityReport;
use crate::assembly::{assemble, PermeabilityField, Weight};
use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::schemes::{reduce, ReducedSystem};
use crate::spaces::{build_spaces, SpaceParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub contrast: f64,
    pub lambda_full: f64,
    pub lambda_v2: f64,
    pub gamma: f64,
    pub dt_exp: f64,
    pub dt_partial: f64,
}

/// Stability quantities for one geometry at several contrasts. `mask` marks
/// the high-permeability cells; the background is 1.
pub fn contrast_sweep(
    grid: &GridHierarchy,
    mask: &[bool],
    contrasts: &[f64],
    alpha: f64,
    params: SpaceParams,
) -> Result<Vec<SweepRow>> {
    if mask.len() != grid.n_cells() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_cells(),
            actual: mask.len(),
            context: "geometry mask",
        });
    }
    if contrasts.windows(2).any(|w| !(w[0] < w[1])) || contrasts.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::InvalidArgument("contrasts must be positive and ascending".into()));
    }
    contrasts
        .par_iter()
        .map(|&contrast| {
            let values = mask.iter().map(|&hi| if hi { contrast } else { 1.0 }).collect();
            let field = PermeabilityField::new(grid.fine_n(), values)?;
            let a = assemble(grid, Weight::Stiffness(&field))?;
            let m = assemble(grid, Weight::Mass)?;
            let spaces = build_spaces(grid, &field, params)?;
            let coarse = reduce(&a, &m, &spaces.combined())?;
            let fine = ReducedSystem::fine(a, m)?;
            let r = StabilityReport::compute(alpha, &fine, &coarse)?;
            Ok(SweepRow {
                contrast,
                lambda_full: r.lambda_max_full,
                lambda_v2: r.lambda_max_v2,
                gamma: r.gamma,
                dt_exp: r.dt_max_explicit,
                dt_partial: r.dt_max_partial,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("contrast,lambda_full,lambda_v2,gamma,dt_exp,dt_partial\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.contrast, r.lambda_full, r.lambda_v2, r.gamma, r.dt_exp, r.dt_partial
        );
    }
    s
}
