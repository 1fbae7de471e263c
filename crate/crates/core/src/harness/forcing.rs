use std::f64::consts::PI;

use super::config::ForcingSpec;
use crate::assembly::{Raster, SourceTerm};
use crate::error::{Error, Result};

/// `2π² sin(πx) sin(πy)`, the source whose steady state is `sin(πx) sin(πy)`.
pub fn smooth_source(x: f64, y: f64) -> f64 {
    2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()
}

/// A space-time source term.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Smooth,
    /// Cell-wise constant rasters, one per coarse time level or a single one
    /// for all times.
    Rasters { levels: Vec<Raster>, dt: f64 },
}

impl Source {
    pub fn is_time_independent(&self) -> bool {
        match self {
            Source::Smooth => true,
            Source::Rasters { levels, .. } => levels.len() == 1,
        }
    }

    fn level(&self, t: f64) -> usize {
        match self {
            Source::Smooth => 0,
            Source::Rasters { levels, dt } => {
                if levels.len() == 1 {
                    0
                } else {
                    // level k covers ((k−1)ΔT, kΔT]
                    let k = (t / dt - 1e-9).ceil().max(0.0) as usize;
                    k.min(levels.len() - 1)
                }
            }
        }
    }
}

impl SourceTerm for Source {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Source::Smooth => smooth_source(x, y),
            Source::Rasters { levels, .. } => {
                let r = &levels[self.level(t)];
                let ix = ((x * r.nx as f64) as usize).min(r.nx - 1);
                let iy = ((y * r.ny as f64) as usize).min(r.ny - 1);
                r.get(ix, iy)
            }
        }
    }
}

/// Two-valued indicator of a centred square on an `n × n` cell grid. A cell
/// is inside when its centre is.
pub fn indicator_raster(n: usize, inside: f64, outside: f64, side: f64) -> Result<Raster> {
    if !(side > 0.0 && side <= 1.0) {
        return Err(Error::InvalidArgument(format!("square side {side} outside (0, 1]")));
    }
    let lo = 0.5 - side / 2.0;
    let hi = 0.5 + side / 2.0;
    let values = (0..n * n)
        .map(|c| {
            let x = ((c % n) as f64 + 0.5) / n as f64;
            let y = ((c / n) as f64 + 0.5) / n as f64;
            if (lo..=hi).contains(&x) && (lo..=hi).contains(&y) {
                inside
            } else {
                outside
            }
        })
        .collect();
    Raster::new(n, n, values)
}

/// Source term on an `n × n` fine grid with `steps` coarse steps of `dt`.
pub fn gen_forcing(spec: &ForcingSpec, n: usize, steps: usize, dt: f64) -> Result<Source> {
    match spec {
        ForcingSpec::Smooth => Ok(Source::Smooth),
        ForcingSpec::Discontinuous { inside, outside, side } => Ok(Source::Rasters {
            levels: vec![indicator_raster(n, *inside, *outside, *side)?],
            dt,
        }),
        ForcingSpec::Custom { rasters } => {
            if rasters.len() != 1 && rasters.len() != steps + 1 {
                return Err(Error::Config(format!(
                    "custom forcing needs 1 or {} rasters, got {}",
                    steps + 1,
                    rasters.len()
                )));
            }
            let levels = rasters
                .iter()
                .map(|p| {
                    let r = Raster::read(p)?;
                    if r.nx != n || r.ny != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            actual: if r.nx != n { r.nx } else { r.ny },
                            context: "forcing raster cells per side vs fine grid",
                        });
                    }
                    Ok(r)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Source::Rasters { levels, dt })
        }
    }
}
