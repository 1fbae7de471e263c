//! Numeric kernels: sparse SPD solves, dense generalized eigenproblems,
//! saddle-point solves and the Gamma function.

mod band;
mod eigen;
mod gamma;
mod kkt;
mod sparse;

pub use band::{spd_solve, BandCholesky, SpdSolver, PIVOT_THRESHOLD, RESIDUAL_TOL};
pub use eigen::{gen_eig_dense, gen_eig_max_dense, gen_eig_smallest, lanczos_max, EigPairs};
pub use gamma::gamma_fn;
pub use kkt::{kkt_solve, KktSolver};
pub use sparse::{dot, norm2, SparseSym};
