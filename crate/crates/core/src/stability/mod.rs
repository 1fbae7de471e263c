//! Stability analysis: top eigenvalues, the subspace constant between the
//! two coarse spaces, maximal stable time steps and energy audits.

mod sweep;

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;

pub use sweep::{contrast_sweep, sweep_csv, SweepRow};

use crate::error::{Error, Result};
use crate::fractional::L1Kernel;
use crate::linalg::{gamma_fn, gen_eig_dense, gen_eig_max_dense, lanczos_max};
use crate::schemes::{Forcing, Operator, ReducedSystem, Trajectory};

/// Above this dimension the top eigenvalue is found by Lanczos.
pub const DENSE_EIG_LIMIT: usize = 2000;
const LANCZOS_TOL: f64 = 1e-10;
const LANCZOS_MAX_ITER: usize = 600;

/// Largest `λ` with `A v = λ M v`.
pub fn lambda_max(a: &Operator, m: &Operator) -> Result<f64> {
    if a.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            actual: a.dim(),
            context: "eigenvalue pencil",
        });
    }
    match (a, m) {
        (Operator::Sparse(a), Operator::Sparse(m)) if a.dim() > DENSE_EIG_LIMIT => {
            lanczos_max(a, m, LANCZOS_TOL, LANCZOS_MAX_ITER)
        }
        _ => gen_eig_max_dense(&a.to_dense(), &m.to_dense()),
    }
}

/// How far apart the two coarse spaces are in `L²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEstimate {
    /// cosine of the minimal angle between the spaces
    pub cosine: f64,
    /// `min ‖u₁ + u₂‖² / ‖u₂‖²` over both spaces, computed directly
    pub min_ratio: f64,
    /// smallest `γ` with `‖u₁ + u₂‖² ≥ 2(1 − γ²)‖u₂‖²` for all `u₁, u₂`
    pub gamma: f64,
}

impl GammaEstimate {
    /// Whether the splitting conditions can hold at all (`γ < 1`).
    pub fn admissible(&self) -> bool {
        self.gamma < 1.0
    }
}

fn cholesky_l(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

/// Subspace constant from the blocks of the combined mass matrix.
pub fn estimate_gamma(m11: &DMatrix<f64>, m12: &DMatrix<f64>, m22: &DMatrix<f64>) -> Result<GammaEstimate> {
    let (n1, n2) = (m11.nrows(), m22.nrows());
    if m12.nrows() != n1 || m12.ncols() != n2 {
        return Err(Error::DimensionMismatch {
            expected: n1 * n2,
            actual: m12.nrows() * m12.ncols(),
            context: "off-diagonal mass block",
        });
    }
    if n1 == 0 || n2 == 0 {
        return Ok(GammaEstimate {
            cosine: 0.0,
            min_ratio: 1.0,
            gamma: 0.5f64.sqrt(),
        });
    }
    let l1 = cholesky_l(m11, "first diagonal mass block")?;
    let l2 = cholesky_l(m22, "second diagonal mass block")?;
    // K = L₁⁻¹ M₁₂ L₂⁻ᵀ; its largest singular value is the cosine
    let mut k = m12.clone();
    l1.solve_lower_triangular_mut(&mut k);
    let mut kt = k.transpose();
    l2.solve_lower_triangular_mut(&mut kt);
    let ktk = &kt * kt.transpose();
    let top = gen_eig_max_dense(&ktk, &DMatrix::identity(n2, n2))?;
    let cosine = top.max(0.0).sqrt().min(1.0);

    // min over u₁ of ‖u₁ + u₂‖² is u₂ᵀ(M₂₂ − M₂₁M₁₁⁻¹M₁₂)u₂
    let chol11 = m11.clone().cholesky().expect("factored above");
    let schur = m22 - m12.transpose() * chol11.solve(m12);
    let min_ratio = gen_eig_dense(&schur, m22)?.values[0].clamp(0.0, 1.0);
    let gamma = (1.0 - 0.5 * min_ratio).sqrt();
    Ok(GammaEstimate {
        cosine,
        min_ratio,
        gamma,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || lambda.is_infinite() {
        return Err(Error::InvalidArgument(format!("eigenvalue {lambda} must be finite and nonnegative")));
    }
    Ok(())
}

/// Largest `ΔT` with `α₀ λ ≤ 1/2`; infinite when `λ = 0`.
pub fn dt_max_explicit(alpha: f64, lambda: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 / (2.0 * gamma_fn(2.0 - alpha)? * lambda)).powf(1.0 / alpha))
}

/// Largest `ΔT` with `α₀ λ ≤ 1 − γ²`; infinite when `λ = 0`.
pub fn dt_max_partial(alpha: f64, gamma: f64, lambda: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_lambda(lambda)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("subspace constant {gamma} outside [0, 1)")));
    }
    if lambda == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(((1.0 - gamma * gamma) / (gamma_fn(2.0 - alpha)? * lambda)).powf(1.0 / alpha))
}

/// Both sides of the energy estimate for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAudit {
    /// `‖u^N‖_a²`
    pub lhs: f64,
    /// `‖u⁰‖_a² + α₀ Σ_k ‖f^{k+1}‖²`
    pub rhs: f64,
    /// `rhs − lhs` at the final level
    pub slack: f64,
    /// smallest slack over all intermediate levels
    pub min_slack: f64,
}

/// Audits `‖u^n‖_a² ≤ ‖u⁰‖_a² + α₀ Σ_{k<n} ‖f^{k+1}‖²` at every level of a
/// trajectory. `‖f‖` is the norm of the `L²` projection of `f` onto the
/// space, `F_rᵀ M_r⁻¹ F_r`, which is the quantity the scheme actually sees.
pub fn energy_audit(
    traj: &Trajectory,
    sys: &ReducedSystem,
    forcing: &Forcing<'_>,
    kernel: &L1Kernel,
) -> Result<EnergyAudit> {
    let n = sys.dim();
    if traj.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: traj.dim(),
            context: "trajectory vs system",
        });
    }
    let m_factor = crate::schemes::mass_factor(sys)?;
    let a0 = kernel.alpha0();
    let mut rhs = sys.a.quad(&traj.states[0]);
    let mut min_slack = f64::INFINITY;
    let mut slack = 0.0;
    let mut lhs = rhs;
    let mut cached: Option<f64> = None;
    for (k, u) in traj.states.iter().enumerate().skip(1) {
        let fnorm = match (forcing, cached) {
            (Forcing::Zero, _) => 0.0,
            (Forcing::Constant(_), Some(v)) => v,
            _ => {
                let f = forcing.at(k as f64 * kernel.dt(), n);
                let v: f64 = m_factor.solve(&f)?.iter().zip(&f).map(|(x, y)| x * y).sum();
                if matches!(forcing, Forcing::Constant(_)) {
                    cached = Some(v);
                }
                v
            }
        };
        rhs += a0 * fnorm;
        lhs = sys.a.quad(u);
        slack = rhs - lhs;
        min_slack = min_slack.min(slack);
    }
    Ok(EnergyAudit {
        lhs,
        rhs,
        slack,
        min_slack: if min_slack.is_finite() { min_slack } else { slack },
    })
}

/// Stability quantities of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub alpha: f64,
    /// top eigenvalue of the fine stiffness against the fine mass
    pub lambda_max_full: f64,
    /// top eigenvalue on `V_cem + V_{H,2}`
    pub lambda_max_coarse: f64,
    /// top eigenvalue on `V_{H,2}`
    pub lambda_max_v2: f64,
    pub gamma: f64,
    pub gamma_cosine: f64,
    pub min_ratio: f64,
    pub dt_max_explicit: f64,
    pub dt_max_partial: f64,
}

impl StabilityReport {
    /// `fine` is the fine-grid system; `coarse` the combined system with
    /// `V_cem` in block 1 and `V_{H,2}` in block 2.
    pub fn compute(alpha: f64, fine: &ReducedSystem, coarse: &ReducedSystem) -> Result<Self> {
        let lambda_max_full = lambda_max(&fine.a, &fine.m)?;
        let lambda_max_coarse = lambda_max(&coarse.a, &coarse.m)?;
        let m = coarse.m.to_dense();
        let a = coarse.a.to_dense();
        let (n1, n2) = (coarse.n1, coarse.n2);
        let m22 = m.view((n1, n1), (n2, n2)).into_owned();
        let a22 = a.view((n1, n1), (n2, n2)).into_owned();
        let lambda_max_v2 = if n2 == 0 { 0.0 } else { gen_eig_max_dense(&a22, &m22)? };
        let g = estimate_gamma(
            &m.view((0, 0), (n1, n1)).into_owned(),
            &m.view((0, n1), (n1, n2)).into_owned(),
            &m22,
        )?;
        let dt_partial = if g.admissible() {
            dt_max_partial(alpha, g.gamma, lambda_max_v2)?
        } else {
            0.0
        };
        Ok(Self {
            alpha,
            lambda_max_full,
            lambda_max_coarse,
            lambda_max_v2,
            gamma: g.gamma,
            gamma_cosine: g.cosine,
            min_ratio: g.min_ratio,
            dt_max_explicit: dt_max_explicit(alpha, lambda_max_full)?,
            dt_max_partial: dt_partial,
        })
    }

    fn fields(&self) -> [(&'static str, f64); 9] {
        [
            ("alpha", self.alpha),
            ("lambda_max_full", self.lambda_max_full),
            ("lambda_max_coarse", self.lambda_max_coarse),
            ("lambda_max_v2", self.lambda_max_v2),
            ("gamma", self.gamma),
            ("gamma_cosine", self.gamma_cosine),
            ("min_ratio", self.min_ratio),
            ("dt_max_explicit", self.dt_max_explicit),
            ("dt_max_partial", self.dt_max_partial),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

impl FromStr for StabilityReport {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut r = StabilityReport {
            alpha: f64::NAN,
            lambda_max_full: f64::NAN,
            lambda_max_coarse: f64::NAN,
            lambda_max_v2: f64::NAN,
            gamma: f64::NAN,
            gamma_cosine: f64::NAN,
            min_ratio: f64::NAN,
            dt_max_explicit: f64::NAN,
            dt_max_partial: f64::NAN,
        };
        let mut seen = 0;
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: ln + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            let v: f64 = v.trim().parse().map_err(|e| err(format!("bad value for {k}: {e}")))?;
            let slot = match k.trim() {
                "alpha" => &mut r.alpha,
                "lambda_max_full" => &mut r.lambda_max_full,
                "lambda_max_coarse" => &mut r.lambda_max_coarse,
                "lambda_max_v2" => &mut r.lambda_max_v2,
                "gamma" => &mut r.gamma,
                "gamma_cosine" => &mut r.gamma_cosine,
                "min_ratio" => &mut r.min_ratio,
                "dt_max_explicit" => &mut r.dt_max_explicit,
                "dt_max_partial" => &mut r.dt_max_partial,
                other => return Err(err(format!("unknown key `{other}`"))),
            };
            *slot = v;
            seen += 1;
        }
        if seen != 9 {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("expected 9 keys, found {seen}"),
            });
        }
        Ok(r)
    }
}
