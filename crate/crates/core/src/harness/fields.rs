use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::FieldSpec;
use crate::assembly::{PermeabilityField, Raster};
use crate::error::{Error, Result};

const EXPERIMENT1: &str = include_str!("../../data/kappa_experiment1.txt");
const EXPERIMENT2: &str = include_str!("../../data/kappa_experiment2.txt");

/// Names accepted by [`FieldSpec::Bundled`].
pub const BUNDLED: [&str; 2] = ["experiment1", "experiment2"];

/// The shipped 0/1 channel mask with the given name.
pub fn bundled_mask(name: &str) -> Result<Raster> {
    match name {
        "experiment1" => Raster::parse(EXPERIMENT1),
        "experiment2" => Raster::parse(EXPERIMENT2),
        other => Err(Error::Config(format!(
            "unknown bundled field `{other}`; available: {}",
            BUNDLED.join(", ")
        ))),
    }
}

/// Nearest-cell resampling of a square raster to `n × n`.
fn resample(r: &Raster, n: usize) -> Result<Vec<f64>> {
    if r.nx != r.ny || r.nx == 0 {
        return Err(Error::InvalidArgument(format!("raster is {}x{}, expected square", r.nx, r.ny)));
    }
    if r.nx == n {
        return Ok(r.values.clone());
    }
    let pick = |i: usize| ((i as f64 + 0.5) * r.nx as f64 / n as f64) as usize;
    Ok((0..n * n).map(|c| r.get(pick(c % n), pick(c / n))).collect())
}

fn check_contrast(c: f64) -> Result<()> {
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("contrast {c} must be finite and at least 1")));
    }
    Ok(())
}

fn from_mask(n: usize, mask: &[bool], contrast: f64) -> Result<PermeabilityField> {
    PermeabilityField::new(n, mask.iter().map(|&m| if m { contrast } else { 1.0 }).collect())
}

/// High-permeability cells of a random channel layout: alternately
/// horizontal and vertical strips spanning 50 to 90 percent of the domain.
pub fn channel_mask(n: usize, count: usize, width: usize, seed: u64) -> Result<Vec<bool>> {
    if width == 0 || width > n {
        return Err(Error::InvalidArgument(format!("channel width {width} outside 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; n * n];
    for k in 0..count {
        let len = ((rng.gen_range(0.5..0.9) * n as f64) as usize).max(1);
        let start = rng.gen_range(0..=n - len);
        let across = rng.gen_range(0..=n - width);
        for a in start..start + len {
            for b in across..across + width {
                let (x, y) = if k % 2 == 0 { (a, b) } else { (b, a) };
                mask[x + y * n] = true;
            }
        }
    }
    Ok(mask)
}

/// High-permeability cells of randomly placed square inclusions.
pub fn inclusion_mask(n: usize, count: usize, size: usize, seed: u64) -> Result<Vec<bool>> {
    if size == 0 || size > n {
        return Err(Error::InvalidArgument(format!("inclusion size {size} outside 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; n * n];
    for _ in 0..count {
        let x0 = rng.gen_range(0..=n - size);
        let y0 = rng.gen_range(0..=n - size);
        for y in y0..y0 + size {
            for x in x0..x0 + size {
                mask[x + y * n] = true;
            }
        }
    }
    Ok(mask)
}

/// Permeability on an `n × n` cell grid. Generated fields take the values
/// 1 and `contrast` only; the same seed always gives the same field.
pub fn gen_field(spec: &FieldSpec, n: usize) -> Result<PermeabilityField> {
    match spec {
        FieldSpec::Channels {
            contrast,
            count,
            width,
            seed,
        } => {
            check_contrast(*contrast)?;
            from_mask(n, &channel_mask(n, *count, *width, *seed)?, *contrast)
        }
        FieldSpec::Inclusions {
            contrast,
            count,
            size,
            seed,
        } => {
            check_contrast(*contrast)?;
            from_mask(n, &inclusion_mask(n, *count, *size, *seed)?, *contrast)
        }
        FieldSpec::File { path, contrast } => {
            let raster = Raster::read(path)?;
            match contrast {
                Some(c) => {
                    check_contrast(*c)?;
                    let mask: Vec<bool> = resample(&raster, n)?.iter().map(|&v| v != 0.0).collect();
                    from_mask(n, &mask, *c)
                }
                None => {
                    let field = PermeabilityField::from_raster(raster)?;
                    if field.n() != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            actual: field.n(),
                            context: "field file cells per side vs fine grid",
                        });
                    }
                    Ok(field)
                }
            }
        }
        FieldSpec::Bundled { name, contrast } => {
            check_contrast(*contrast)?;
            let mask: Vec<bool> = resample(&bundled_mask(name)?, n)?.iter().map(|&v| v != 0.0).collect();
            from_mask(n, &mask, *contrast)
        }
    }
}
