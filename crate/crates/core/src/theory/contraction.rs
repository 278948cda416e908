use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{interleaved_permutation, split_lifted, LinearPlanSystem, Mat};
use crate::error::{argument, Error, Result};
use crate::numerics::{sym_eigenvalues, vector};
use crate::objectives::{grasp_parts, GoalWeights, PlanProblem};

/// Per-step Hessians of the stop-gradient loss in the `(s_{t+1}, a_t)`
/// variables: `2[[I, −B], [−Bᵀ, (1+β)BᵀB]]` for `t < T−1` and
/// `2(1+β)BᵀB` for the last step, whose state is pinned.
pub fn block_hessians(sys: &LinearPlanSystem, beta: f64) -> Vec<Mat> {
    let (n, m) = (sys.state_dim(), sys.action_dim());
    let btb = sys.b.gram().scaled(2.0 * (1.0 + beta));
    let mut full = Mat::zeros(n + m, n + m);
    full.set_block(0, 0, &Mat::identity(n).scaled(2.0));
    full.set_block(0, n, &sys.b.scaled(-2.0));
    full.set_block(n, 0, &sys.b.transpose().scaled(-2.0));
    full.set_block(n, n, &btb);
    let mut out = vec![full; sys.horizon - 1];
    out.push(btb);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub eta: f64,
    /// Smallest and largest eigenvalue over all block Hessians.
    pub mu: f64,
    pub l: f64,
    /// `max{|1 − ημ|, |1 − ηL|}`
    pub q_bound: f64,
    /// Largest error ratio `‖z_{k+1} − z*‖ / ‖z_k − z*‖` after burn-in.
    pub observed_ratio: f64,
    pub burn_in: usize,
    pub iterations: usize,
    /// Largest entry of the update Jacobian above the block diagonal in the
    /// interleaved ordering.
    pub triangular_defect: f64,
    /// Largest deviation of the Jacobian's diagonal blocks from the block Hessians.
    pub block_defect: f64,
}

fn grad_flat(p: &PlanProblem<'_, f64>, sys: &LinearPlanSystem, w: &GoalWeights<f64>, z: &[f64]) -> Result<Vec<f64>> {
    let (free, actions) = split_lifted(sys, z)?;
    let (_, g) = grasp_parts(p, &free, &actions, w)?;
    let mut out = vector::flatten(&g.d_states);
    out.extend(vector::flatten(&g.d_actions));
    Ok(out)
}

/// Iterates `z ← z − η ∇̃L(z)` with the stop-gradient GRASP gradient on a
/// linear system (no noise, no sync) and measures the asymptotic error ratio.
///
/// `z*` is the exact fixed point of the affine update, obtained by solving
/// its linear system. The run stops once the error falls to `1e−9` of its
/// peak; ratios are read from the last tenth of the run.
pub fn contraction_check(sys: &LinearPlanSystem, beta: f64, eta: f64, max_iters: usize) -> Result<ContractionReport> {
    if sys.horizon < 2 {
        return Err(argument("contraction check needs horizon >= 2"));
    }
    if !(beta > 0.0 && eta > 0.0) {
        return Err(argument("beta and eta must be positive"));
    }
    let model = sys.model()?;
    let p = PlanProblem::new(&model, &sys.s0, &sys.g, sys.horizon)?;
    let w = GoalWeights::Constant(beta);
    let (n, m, t) = (sys.state_dim(), sys.action_dim(), sys.horizon);
    let dim = sys.lifted_dim();

    let blocks = block_hessians(sys, beta);
    let mut mu = f64::INFINITY;
    let mut l = f64::NEG_INFINITY;
    for h in &blocks {
        let ev = sym_eigenvalues(h, 1e-12)?;
        mu = mu.min(ev[0]);
        l = l.max(*ev.last().expect("non-empty block"));
    }
    let q_bound = (1.0 - eta * mu).abs().max((1.0 - eta * l).abs());

    // gradient is affine: ∇̃L(z) = J z + c
    let zero = vec![0.0; dim];
    let c = grad_flat(&p, sys, &w, &zero)?;
    let mut jac = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..dim {
        let mut e = zero.clone();
        e[j] = 1.0;
        let gj = grad_flat(&p, sys, &w, &e)?;
        for i in 0..dim {
            jac[(i, j)] = gj[i] - c[i];
        }
    }

    let perm = interleaved_permutation(n, m, t);
    let mut offsets = Vec::with_capacity(t + 1);
    let mut at = 0;
    for k in 0..t {
        offsets.push(at);
        at += if k + 1 < t { n + m } else { m };
    }
    offsets.push(at);
    let block_of = |i: usize| offsets.partition_point(|&o| o <= i) - 1;
    let mut triangular_defect: f64 = 0.0;
    let mut block_defect: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let v = jac[(perm[i], perm[j])];
            let (bi, bj) = (block_of(i), block_of(j));
            if bj > bi {
                triangular_defect = triangular_defect.max(v.abs());
            } else if bi == bj {
                let h = blocks[bi].get(i - offsets[bi], j - offsets[bi]);
                block_defect = block_defect.max((v - h).abs());
            }
        }
    }

    let rhs = -DVector::from_vec(c);
    let zstar = jac
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| argument("stop-gradient update has no unique fixed point"))?;
    let zstar: Vec<f64> = zstar.iter().copied().collect();

    let mut z: Vec<f64> = zstar.iter().map(|x| x + 1.0).collect();
    let mut err = vector::dist(&z, &zstar);
    let mut peak = err;
    let mut ratios = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters {
        let g = grad_flat(&p, sys, &w, &z)?;
        vector::axpy(-eta, &g, &mut z);
        let next = vector::dist(&z, &zstar);
        iterations += 1;
        if !next.is_finite() {
            return Err(Error::Divergence { step: iterations });
        }
        if next <= 1e-9 * peak {
            break;
        }
        ratios.push(next / err);
        peak = peak.max(next);
        err = next;
    }
    if ratios.is_empty() {
        return Err(argument("error vanished in one step; nothing to measure"));
    }
    let burn_in = ratios.len() - (ratios.len() / 10).max(1);
    let observed_ratio = ratios[burn_in..].iter().copied().fold(0.0, f64::max);
    Ok(ContractionReport {
        eta,
        mu,
        l,
        q_bound,
        observed_ratio,
        burn_in,
        iterations,
        triangular_defect,
        block_defect,
    })
}
