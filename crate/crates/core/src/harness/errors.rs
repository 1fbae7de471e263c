use crate::error::{Error, Result};
use crate::linalg::SparseSym;
use crate::schemes::Trajectory;
use crate::spaces::ReducedBasis;

/// Errors of a coarse run against the fine reference at each coarse level.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    /// relative `L²` error
    pub l2: Vec<f64>,
    /// relative energy error
    pub energy: Vec<f64>,
    /// levels where the reference vanishes and the error is absolute
    pub absolute: Vec<bool>,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.l2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l2.is_empty()
    }

    /// Errors at the last level, `(L², energy)`.
    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.l2.last()?, *self.energy.last()?))
    }
}

/// Lifts `traj` to the fine space with `basis` (identity when `None`) and
/// compares with `reference` at the coincident times. The reference step
/// must divide the trajectory step.
pub fn error_series(
    traj: &Trajectory,
    basis: Option<&ReducedBasis>,
    reference: &Trajectory,
    a_fine: &SparseSym,
    m_fine: &SparseSym,
) -> Result<ErrorSeries> {
    let r = traj.dt / reference.dt;
    let ratio = r.round();
    if !(ratio >= 1.0 && (r - ratio).abs() <= 1e-9 * ratio) {
        return Err(Error::InvalidArgument(format!(
            "time grids incompatible: coarse step {} is not a multiple of reference step {}",
            traj.dt, reference.dt
        )));
    }
    let ratio = ratio as usize;
    if traj.steps() * ratio > reference.steps() {
        return Err(Error::InvalidArgument(format!(
            "reference covers {} steps, trajectory needs {}",
            reference.steps(),
            traj.steps() * ratio
        )));
    }
    let n = m_fine.dim();
    let mut out = ErrorSeries {
        l2: Vec::with_capacity(traj.states.len()),
        energy: Vec::with_capacity(traj.states.len()),
        absolute: Vec::with_capacity(traj.states.len()),
    };
    for (k, u) in traj.states.iter().enumerate() {
        let lifted = match basis {
            Some(b) => b.prolong(u),
            None => u.clone(),
        };
        let reference = &reference.states[k * ratio];
        if lifted.len() != n || reference.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: lifted.len().min(reference.len()),
                context: "lifted state vs fine matrices",
            });
        }
        let diff: Vec<f64> = lifted.iter().zip(reference).map(|(x, y)| x - y).collect();
        let (dm, da) = (m_fine.quad(&diff).max(0.0).sqrt(), a_fine.quad(&diff).max(0.0).sqrt());
        let (rm, ra) = (m_fine.quad(reference).max(0.0).sqrt(), a_fine.quad(reference).max(0.0).sqrt());
        let zero = rm == 0.0 || ra == 0.0;
        out.l2.push(if rm == 0.0 { dm } else { dm / rm });
        out.energy.push(if ra == 0.0 { da } else { da / ra });
        out.absolute.push(zero);
    }
    Ok(out)
}
