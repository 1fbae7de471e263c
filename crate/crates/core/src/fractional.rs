//! L1 discretization of the Caputo derivative.
//!
//! On a uniform grid `T_k = k·ΔT` the derivative at `T_{k+1}` is approximated by
//!
//! ```text
//! (1/α₀) Σ_{j=0}^{k} b_j (u^{k+1−j} − u^{k−j}),   b_j = (j+1)^{1−α} − j^{1−α},
//! α₀ = Γ(2−α) ΔT^α.
//! ```
//!
//! Moving everything except `u^{k+1}` to the right gives `(u^{k+1} − w_k)/α₀`
//! with the history combination
//! `w_k = (1−b₁) u^k + Σ_{j=1}^{k−1} (b_j − b_{j+1}) u^{k−j} + b_k u⁰`,
//! whose weights are nonnegative and sum to one.

use crate::error::{Error, Result};
use crate::linalg::gamma_fn;

#[derive(Debug, Clone)]
pub struct L1Kernel {
    alpha: f64,
    dt: f64,
    steps: usize,
    alpha0: f64,
    weights: Vec<f64>,
}

/// `(j+1)^{1−α} − j^{1−α}` without cancellation for large `j`.
fn l1_weight(alpha: f64, j: usize) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let jf = j as f64;
    let p = 1.0 - alpha;
    jf.powf(p) * (p * (1.0 / jf).ln_1p()).exp_m1()
}

impl L1Kernel {
    pub fn new(alpha: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fractional order must lie in (0, 1), got {alpha}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("need at least one time step".into()));
        }
        let alpha0 = gamma_fn(2.0 - alpha)? * dt.powf(alpha);
        let weights = (0..=steps).map(|j| l1_weight(alpha, j)).collect();
        Ok(Self {
            alpha,
            dt,
            steps,
            alpha0,
            weights,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `Γ(2−α) ΔT^α`
    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `b_j`, computed on the fly beyond the precomputed range.
    pub fn b(&self, j: usize) -> f64 {
        self.weights
            .get(j)
            .copied()
            .unwrap_or_else(|| l1_weight(self.alpha, j))
    }

    /// Compensated `Σ_{j≤k} b_j`.
    pub fn partial_sum(&self, k: usize) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for j in 0..=k {
            let y = self.b(j) - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    /// Coefficients `c_i` with `w_k = Σ_i c_i u^i`, indexed by time level
    /// `i = 0..=k`.
    pub fn history_coefficients(&self, k: usize) -> Vec<f64> {
        let mut c = vec![0.0; k + 1];
        if k == 0 {
            c[0] = 1.0;
            return c;
        }
        c[k] = 1.0 - self.b(1);
        for j in 1..k {
            c[k - j] = self.b(j) - self.b(j + 1);
        }
        c[0] += self.b(k);
        c
    }

    /// `w_k` for a vector-valued history `u⁰..u^k`. Returns the combination and
    /// the number of vector updates performed.
    pub fn history_rhs_counted(&self, history: &[Vec<f64>]) -> Result<(Vec<f64>, usize)> {
        let last = history
            .last()
            .ok_or_else(|| Error::InvalidArgument("empty history".into()))?;
        let k = history.len() - 1;
        let coef = self.history_coefficients(k);
        let mut w = vec![0.0; last.len()];
        for (u, &c) in history.iter().zip(&coef) {
            if u.len() != w.len() {
                return Err(Error::DimensionMismatch {
                    expected: w.len(),
                    actual: u.len(),
                    context: "history state",
                });
            }
            w.iter_mut().zip(u).for_each(|(wi, ui)| *wi += c * ui);
        }
        Ok((w, history.len()))
    }

    pub fn history_rhs(&self, history: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.history_rhs_counted(history).map(|(w, _)| w)
    }
}

pub fn make_kernel(alpha: f64, dt: f64, steps: usize) -> Result<L1Kernel> {
    L1Kernel::new(alpha, dt, steps)
}

/// Discrete Caputo derivative of a scalar series sampled at `T_0, T_1, …`.
/// Entry `k` approximates the derivative at `T_{k+1}`.
pub fn caputo_apply(kernel: &L1Kernel, samples: &[f64]) -> Vec<f64> {
    if samples.len() < 2 {
        return Vec::new();
    }
    (0..samples.len() - 1)
        .map(|k| {
            let s: f64 = (0..=k)
                .map(|j| kernel.b(j) * (samples[k + 1 - j] - samples[k - j]))
                .sum();
            s / kernel.alpha0()
        })
        .collect()
}
