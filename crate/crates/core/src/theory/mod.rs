//! Conditioning and stochastic-stationarity checks for linear planning
//! problems, plus a few nonlinear sanity checks.
//!
//! Everything here works in `f64`. Monte-Carlo checks split their samples
//! into fixed chunks, each with its own derived [`RngStream`], and reduce
//! the chunks in index order, so results do not depend on the thread pool.

use serde::Serialize;

use crate::error::{argument, check_dim, Result};
use crate::numerics::{max_eig_sym, vector, DenseMatrix, RngStream};
use crate::worldmodel::LinearModel;

mod boltzmann;
mod contraction;
mod report;
mod smoothing;
mod stochastic;

pub use boltzmann::{boltzmann_check, BoltzmannConfig, BoltzmannReport};
pub use contraction::{block_hessians, contraction_check, ContractionReport};
pub use report::{
    bonferroni_z, boltzmann_checks, contraction_checks, drift_checks, lifted_smoothness_checks, ou_tube_checks,
    rollout_covariance_checks, run_all_checks, shooting_growth_checks, smoothing_checks, unstable_system,
    CheckResult, CheckStatus,
};
pub use smoothing::{
    clamp_smoothed_derivative, clamp_smoothing_check, gaussian_norm_mean, gaussian_smoothing_check,
    ClampProbe, SmoothingProbe, SmoothingReport,
};
pub use stochastic::{
    ou_tube_check, rollout_covariance_check, tube_drift_check, OuTubeReport, RolloutCovarianceReport,
    TubeDriftReport,
};

type Mat = DenseMatrix<f64>;

/// `s_{t+1} = A s_t + B a_t` over a horizon `T` from `s0` towards `g`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearPlanSystem {
    pub a: Mat,
    pub b: Mat,
    pub horizon: usize,
    pub s0: Vec<f64>,
    pub g: Vec<f64>,
}

impl LinearPlanSystem {
    pub fn new(a: Mat, b: Mat, horizon: usize, s0: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if !a.is_square() || a.rows() == 0 {
            return Err(argument("A must be square and non-empty"));
        }
        check_dim("B rows", a.rows(), b.rows())?;
        check_dim("s0", a.rows(), s0.len())?;
        check_dim("g", a.rows(), g.len())?;
        if b.cols() == 0 {
            return Err(argument("B needs at least one column"));
        }
        if horizon == 0 {
            return Err(argument("horizon must be >= 1"));
        }
        Ok(Self { a, b, horizon, s0, g })
    }

    /// Zero start and goal.
    pub fn homogeneous(a: Mat, b: Mat, horizon: usize) -> Result<Self> {
        let n = a.rows();
        Self::new(a, b, horizon, vec![0.0; n], vec![0.0; n])
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn action_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn model(&self) -> Result<LinearModel<f64>> {
        LinearModel::new(self.a.clone(), self.b.clone())
    }

    /// Length of `z = (s_1..s_{T−1}, a_0..a_{T−1})`.
    pub fn lifted_dim(&self) -> usize {
        self.state_dim() * (self.horizon - 1) + self.action_dim() * self.horizon
    }
}

/// `C_T = [A^{T−1}B, A^{T−2}B, …, B]`, shape `n × mT`.
pub fn controllability(sys: &LinearPlanSystem) -> Mat {
    let (n, m, t) = (sys.state_dim(), sys.action_dim(), sys.horizon);
    let mut c = Mat::zeros(n, m * t);
    let mut block = sys.b.clone();
    for k in (0..t).rev() {
        c.set_block(0, k * m, &block);
        block = sys.a.matmul(&block).expect("square A");
    }
    c
}

/// `M` and `b` with `‖Mz − b‖²` equal to the lifted loss, `z` states first.
///
/// Row blocks: `s_1 − B a_0 = A s0`, then `A s_t + B a_t − s_{t+1} = 0`,
/// then `−A s_{T−1} − B a_{T−1} = −g`.
pub fn lifted_matrix(sys: &LinearPlanSystem) -> Result<(Mat, Vec<f64>)> {
    let (n, m, t) = (sys.state_dim(), sys.action_dim(), sys.horizon);
    if t < 2 {
        return Err(argument("lifted_matrix needs horizon >= 2"));
    }
    let s_col = |k: usize| (k - 1) * n;
    let a_col = |k: usize| n * (t - 1) + k * m;
    let eye = Mat::identity(n);
    let neg_a = sys.a.scaled(-1.0);
    let neg_b = sys.b.scaled(-1.0);
    let mut mat = Mat::zeros(n * t, sys.lifted_dim());
    let mut b = vec![0.0; n * t];
    for k in 0..t {
        let row = k * n;
        if k == 0 {
            mat.set_block(row, s_col(1), &eye);
            mat.set_block(row, a_col(0), &neg_b);
            b[..n].copy_from_slice(&sys.a.matvec(&sys.s0));
        } else if k == t - 1 {
            mat.set_block(row, s_col(k), &neg_a);
            mat.set_block(row, a_col(k), &neg_b);
            for (bi, gi) in b[row..row + n].iter_mut().zip(&sys.g) {
                *bi = -gi;
            }
        } else {
            mat.set_block(row, s_col(k), &sys.a);
            mat.set_block(row, a_col(k), &sys.b);
            mat.set_block(row, s_col(k + 1), &eye.scaled(-1.0));
        }
    }
    Ok((mat, b))
}

/// Splits a states-first `z` into free states and actions.
pub fn split_lifted(sys: &LinearPlanSystem, z: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    check_dim("z", sys.lifted_dim(), z.len())?;
    let cut = sys.state_dim() * (sys.horizon - 1);
    Ok((
        vector::unflatten(&z[..cut], sys.state_dim()),
        vector::unflatten(&z[cut..], sys.action_dim()),
    ))
}

/// Permutation `p` with `z_interleaved[i] = z_states_first[p[i]]`, where the
/// interleaved order is `(s_1, a_0, s_2, a_1, …, s_{T−1}, a_{T−2}, a_{T−1})`.
///
/// Grouping `(s_{t+1}, a_t)` per step makes the stop-gradient update
/// Jacobian block lower triangular.
pub fn interleaved_permutation(n: usize, m: usize, horizon: usize) -> Vec<usize> {
    let a_base = n * (horizon - 1);
    let mut p = Vec::with_capacity(a_base + m * horizon);
    for t in 0..horizon {
        if t + 1 < horizon {
            p.extend((0..n).map(|j| t * n + j));
        }
        p.extend((0..m).map(|j| a_base + t * m + j));
    }
    p
}

/// Inverse of [`interleaved_permutation`].
pub fn states_first_permutation(n: usize, m: usize, horizon: usize) -> Vec<usize> {
    let fwd = interleaved_permutation(n, m, horizon);
    let mut inv = vec![0; fwd.len()];
    for (i, &j) in fwd.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

/// `out[i] = x[perm[i]]`.
pub fn permute(x: &[f64], perm: &[usize]) -> Vec<f64> {
    perm.iter().map(|&j| x[j]).collect()
}

/// Left eigenvector data for the shooting lower bound: `Aᵀv = λv`, `‖v‖ = 1`,
/// `‖w‖ = 1` and `μ = |⟨v, Bw⟩| > 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeDirection {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
}

/// Tolerance for eigenpair and normalization certification.
pub const EIGENPAIR_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothnessReport {
    /// `λ_max(2 C_Tᵀ C_T)`
    pub l_shooting: f64,
    /// `λ_max(2 MᵀM)`; `None` for horizon 1.
    pub l_lifted: Option<f64>,
    /// `2μ²|λ|^{2(T−1)}` when a mode direction was supplied.
    pub lower_bound_shooting: Option<f64>,
    /// `6(1 + ‖A‖² + ‖B‖²)`
    pub upper_bound_lifted: f64,
}

impl ModeDirection {
    /// Fills in `μ` from `v`, `w` and `B`.
    pub fn new(sys: &LinearPlanSystem, v: Vec<f64>, w: Vec<f64>, lambda: f64) -> Result<Self> {
        check_dim("mode v", sys.state_dim(), v.len())?;
        check_dim("mode w", sys.action_dim(), w.len())?;
        let mu = vector::dot(&v, &sys.b.matvec(&w)).abs();
        let mode = Self { v, w, lambda, mu };
        mode.certify(sys)?;
        Ok(mode)
    }

    pub fn certify(&self, sys: &LinearPlanSystem) -> Result<()> {
        check_dim("mode v", sys.state_dim(), self.v.len())?;
        check_dim("mode w", sys.action_dim(), self.w.len())?;
        if (vector::norm(&self.v) - 1.0).abs() > EIGENPAIR_TOL || (vector::norm(&self.w) - 1.0).abs() > EIGENPAIR_TOL {
            return Err(argument("mode vectors must have unit norm"));
        }
        let atv = sys.a.matvec_t(&self.v);
        let resid = vector::dist(&atv, &vector::scale(&self.v, self.lambda));
        if resid > EIGENPAIR_TOL {
            return Err(argument(format!("invalid eigenpair: ‖Aᵀv − λv‖ = {resid:e}")));
        }
        let mu = vector::dot(&self.v, &sys.b.matvec(&self.w)).abs();
        if !(mu > 0.0) || (mu - self.mu).abs() > EIGENPAIR_TOL * mu.max(1.0) {
            return Err(argument("μ must equal |⟨v, Bw⟩| and be positive"));
        }
        Ok(())
    }
}

/// Shooting and lifted smoothness constants with their bounds.
pub fn smoothness_report(sys: &LinearPlanSystem, mode: Option<&ModeDirection>) -> Result<SmoothnessReport> {
    if let Some(md) = mode {
        md.certify(sys)?;
    }
    // λ_max(CᵀC) = λ_max(CCᵀ); the n × n side is cheaper.
    let c = controllability(sys);
    let l_shooting = 2.0 * max_eig_sym(&c.transpose().gram(), 1e-12)?;
    let l_lifted = if sys.horizon >= 2 {
        let (m, _) = lifted_matrix(sys)?;
        let small = if m.rows() <= m.cols() { m.transpose().gram() } else { m.gram() };
        Some(2.0 * max_eig_sym(&small, 1e-12)?)
    } else {
        None
    };
    let na = crate::numerics::spectral_norm(&sys.a, 1e-12)?;
    let nb = crate::numerics::spectral_norm(&sys.b, 1e-12)?;
    let lower_bound_shooting =
        mode.map(|md| 2.0 * md.mu * md.mu * md.lambda.abs().powi(2 * (sys.horizon as i32 - 1)));
    Ok(SmoothnessReport {
        l_shooting,
        l_lifted,
        lower_bound_shooting,
        upper_bound_lifted: 6.0 * (1.0 + na * na + nb * nb),
    })
}

/// Splits `total` samples into `chunks` nearly equal parts.
pub(crate) fn chunk_sizes(total: usize, chunks: usize) -> Vec<usize> {
    let chunks = chunks.max(1).min(total.max(1));
    (0..chunks)
        .map(|i| total / chunks + usize::from(i < total % chunks))
        .collect()
}

pub(crate) const MC_CHUNKS: usize = 32;

pub(crate) fn chunk_rngs(rng: &RngStream, chunks: usize) -> Vec<RngStream> {
    (0..chunks as u64).map(|i| rng.derive(i)).collect()
}
