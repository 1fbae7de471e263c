//! Time stepping with the L1 kernel: implicit, explicit and partially
//! explicit schemes on reduced spaces, and the fine-grid reference solver.

mod system;
mod trajectory;

use std::fmt;

use nalgebra::DMatrix;

pub use system::{reduce, Operator, ReducedSystem};
pub use trajectory::Trajectory;

use crate::assembly::{assemble, load_vector, PermeabilityField, SourceTerm, Weight};
use crate::error::{Error, Result};
use crate::fractional::L1Kernel;
use crate::grid::GridHierarchy;
use crate::linalg::norm2;
pub(crate) use system::Factor;

/// Growth factor of `‖u^k‖` over `‖u⁰‖ + 1` at which a run is declared
/// divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Implicit,
    Explicit,
    /// Block 1 stiffness implicit, block 2 stiffness lagged.
    Partial,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Implicit => "implicit",
            Scheme::Explicit => "explicit",
            Scheme::Partial => "partial",
        })
    }
}

/// A scheme with its left-hand matrix factored once.
#[derive(Debug, Clone)]
pub struct Stepper {
    scheme: Scheme,
    alpha0: f64,
    factor: Factor,
}

impl Stepper {
    pub fn new(scheme: Scheme, sys: &ReducedSystem, kernel: &L1Kernel) -> Result<Self> {
        let alpha0 = kernel.alpha0();
        let factor = match scheme {
            Scheme::Implicit => Factor::spd(&sys_lhs_implicit(sys, alpha0), "implicit step matrix")?,
            Scheme::Explicit => Factor::spd(&sys.m, "mass matrix")?,
            Scheme::Partial => {
                if sys.n2 == 0 {
                    Factor::spd(&sys_lhs_implicit(sys, alpha0), "implicit step matrix")?
                } else {
                    let Operator::Dense(m) = &sys.m else {
                        return Err(Error::InvalidArgument(
                            "partially explicit stepping needs a dense reduced system".into(),
                        ));
                    };
                    let mut lhs: DMatrix<f64> = m.clone();
                    let a = sys.a.to_dense();
                    for j in 0..sys.n1 {
                        for i in 0..sys.dim() {
                            lhs[(i, j)] += alpha0 * a[(i, j)];
                        }
                    }
                    Factor::general(lhs, "partially explicit block matrix is singular")?
                }
            }
        };
        Ok(Self { scheme, alpha0, factor })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// `u^{k+1}` from the history combination `w_k`, the current state `u^k`
    /// and the load `F^{k+1}`.
    pub fn step(&self, sys: &ReducedSystem, w: &[f64], u: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let n = sys.dim();
        for (len, what) in [(w.len(), "history"), (u.len(), "state"), (f.len(), "load")] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: len,
                    context: what,
                });
            }
        }
        let mut rhs = sys.m.apply(w);
        let lagged: Option<Vec<f64>> = match self.scheme {
            Scheme::Implicit => None,
            Scheme::Explicit => Some(u.to_vec()),
            Scheme::Partial if sys.n2 == 0 => None,
            Scheme::Partial => {
                let mut u2 = u.to_vec();
                u2[..sys.n1].iter_mut().for_each(|v| *v = 0.0);
                Some(u2)
            }
        };
        if let Some(x) = lagged {
            let ax = sys.a.apply(&x);
            rhs.iter_mut().zip(&ax).for_each(|(r, v)| *r -= self.alpha0 * v);
        }
        rhs.iter_mut().zip(f).for_each(|(r, v)| *r += self.alpha0 * v);
        self.factor.solve(&rhs)
    }
}

fn sys_lhs_implicit(sys: &ReducedSystem, alpha0: f64) -> Operator {
    sys.m.add_scaled(alpha0, &sys.a)
}

fn single_step(
    scheme: Scheme,
    sys: &ReducedSystem,
    kernel: &L1Kernel,
    history: &[Vec<f64>],
    f_next: &[f64],
) -> Result<Vec<f64>> {
    let w = kernel.history_rhs(history)?;
    let u = history.last().expect("history_rhs rejects an empty history");
    Stepper::new(scheme, sys, kernel)?.step(sys, &w, u, f_next)
}

/// One implicit step from the history `u⁰..u^k`.
pub fn step_implicit(sys: &ReducedSystem, kernel: &L1Kernel, history: &[Vec<f64>], f_next: &[f64]) -> Result<Vec<f64>> {
    single_step(Scheme::Implicit, sys, kernel, history, f_next)
}

/// One explicit step from the history `u⁰..u^k`.
pub fn step_explicit(sys: &ReducedSystem, kernel: &L1Kernel, history: &[Vec<f64>], f_next: &[f64]) -> Result<Vec<f64>> {
    single_step(Scheme::Explicit, sys, kernel, history, f_next)
}

/// One partially explicit step from the history `u⁰..u^k`.
pub fn step_partial(sys: &ReducedSystem, kernel: &L1Kernel, history: &[Vec<f64>], f_next: &[f64]) -> Result<Vec<f64>> {
    single_step(Scheme::Partial, sys, kernel, history, f_next)
}

/// Factored mass matrix of a system.
pub(crate) fn mass_factor(sys: &ReducedSystem) -> Result<Factor> {
    Factor::spd(&sys.m, "mass matrix")
}

/// Load vectors in reduced coordinates.
pub enum Forcing<'a> {
    Zero,
    /// The same load at every step.
    Constant(Vec<f64>),
    /// Load at the given time.
    Timed(&'a (dyn Fn(f64) -> Vec<f64> + Sync)),
}

impl Forcing<'_> {
    pub fn at(&self, t: f64, n: usize) -> Vec<f64> {
        match self {
            Forcing::Zero => vec![0.0; n],
            Forcing::Constant(f) => f.clone(),
            Forcing::Timed(g) => g(t),
        }
    }
}

/// A completed or aborted run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    /// Step at which the divergence guard fired.
    pub diverged_at: Option<usize>,
    /// Vector updates spent on history sums.
    pub history_axpys: usize,
}

impl RunOutcome {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Advances `u⁰` through all steps of the kernel. A blow-up stops the run
/// and is reported in the outcome; the trajectory then ends at the state
/// that tripped the guard.
pub fn run_scheme(
    scheme: Scheme,
    sys: &ReducedSystem,
    kernel: &L1Kernel,
    u0: &[f64],
    forcing: &Forcing<'_>,
    label: &str,
) -> Result<RunOutcome> {
    let n = sys.dim();
    if u0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: u0.len(),
            context: "initial state",
        });
    }
    let stepper = Stepper::new(scheme, sys, kernel)?;
    let limit = DIVERGENCE_FACTOR * (norm2(u0) + 1.0);
    let mut states = Vec::with_capacity(kernel.steps() + 1);
    states.push(u0.to_vec());
    let mut axpys = 0;
    let mut diverged_at = None;
    for k in 0..kernel.steps() {
        let (w, c) = kernel.history_rhs_counted(&states)?;
        axpys += c;
        let f = forcing.at((k + 1) as f64 * kernel.dt(), n);
        let next = stepper.step(sys, &w, &states[k], &f)?;
        let size = norm2(&next);
        states.push(next);
        if !(size <= limit) {
            diverged_at = Some(k + 1);
            break;
        }
    }
    Ok(RunOutcome {
        trajectory: Trajectory::new(label, kernel.alpha(), kernel.dt(), states),
        diverged_at,
        history_axpys: axpys,
    })
}

/// Implicit solve on the full fine space with step `dt_fine` for `steps`
/// steps. `forcing` and `u0` are in fine coordinates.
pub fn fine_reference(
    grid: &GridHierarchy,
    field: &PermeabilityField,
    alpha: f64,
    dt_fine: f64,
    steps: usize,
    forcing: &Forcing<'_>,
    u0: &[f64],
) -> Result<RunOutcome> {
    let a = assemble(grid, Weight::Stiffness(field))?;
    let m = assemble(grid, Weight::Mass)?;
    let sys = ReducedSystem::fine(a, m)?;
    let kernel = L1Kernel::new(alpha, dt_fine, steps)?;
    run_scheme(Scheme::Implicit, &sys, &kernel, u0, forcing, "fine")
}

/// Fine load of a source term at every requested time.
pub fn fine_load<'a>(grid: &'a GridHierarchy, f: &'a dyn SourceTerm) -> impl Fn(f64) -> Vec<f64> + Sync + 'a {
    move |t| load_vector(grid, f, t)
}

#[cfg(test)]
mod tests;
