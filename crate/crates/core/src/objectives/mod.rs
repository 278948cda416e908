//! Planning losses and their gradients.
//!
//! All losses are plain sums over timesteps (no averaging). Per-step terms
//! are evaluated through the batch path and reduced with a fixed pairwise
//! tree, so values are bit-stable under any thread count.

use rayon::prelude::*;

use crate::error::{argument, check_dim, Error, Result};
use crate::numerics::{vector, Real};
use crate::worldmodel::{batch_step, Trajectory, WorldModel, PARALLEL_BATCH_MIN};

mod landscape;

pub use landscape::{landscape_slice, LandscapeField};

/// Reach `goal` from `s0` in `horizon` steps under `model`.
#[derive(Clone, Copy)]
pub struct PlanProblem<'a, T: Real> {
    pub model: &'a dyn WorldModel<T>,
    pub s0: &'a [T],
    pub goal: &'a [T],
    pub horizon: usize,
    /// Per-coordinate bound `|a_i| ≤ b` enforced by every planner.
    pub action_bound: Option<T>,
}

impl<'a, T: Real> PlanProblem<'a, T> {
    pub fn new(model: &'a dyn WorldModel<T>, s0: &'a [T], goal: &'a [T], horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(argument("horizon must be >= 1"));
        }
        check_dim("initial state", model.state_dim(), s0.len())?;
        check_dim("goal", model.state_dim(), goal.len())?;
        if !vector::all_finite(s0) || !vector::all_finite(goal) {
            return Err(argument("initial state and goal must be finite"));
        }
        Ok(Self {
            model,
            s0,
            goal,
            horizon,
            action_bound: None,
        })
    }

    pub fn with_action_bound(mut self, bound: Option<T>) -> Result<Self> {
        if let Some(b) = bound {
            if !(b > T::zero()) || !b.is_finite() {
                return Err(argument(format!("action bound must be positive, got {b}")));
            }
        }
        self.action_bound = bound;
        Ok(self)
    }

    /// Clamps every action coordinate into `[−b, b]`.
    pub fn project_actions(&self, actions: &mut [Vec<T>]) {
        if let Some(b) = self.action_bound {
            for x in actions.iter_mut().flatten() {
                *x = x.max(-b).min(b);
            }
        }
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.model.action_dim()
    }

    pub(crate) fn check_actions(&self, actions: &[Vec<T>]) -> Result<()> {
        check_dim("action sequence", self.horizon, actions.len())?;
        for a in actions {
            check_dim("action", self.action_dim(), a.len())?;
        }
        Ok(())
    }

    pub(crate) fn check_free_states(&self, free: &[Vec<T>]) -> Result<()> {
        check_dim("free states", self.horizon - 1, free.len())?;
        for s in free {
            check_dim("state", self.state_dim(), s.len())?;
        }
        Ok(())
    }

    /// Splits a full trajectory into its free states after checking that
    /// both boundary states match the problem.
    fn free_states<'t>(&self, traj: &'t Trajectory<T>) -> Result<&'t [Vec<T>]> {
        check_dim("trajectory horizon", self.horizon, traj.horizon())?;
        if traj.states[0].as_slice() != self.s0 {
            return Err(argument("trajectory must start at the problem's initial state"));
        }
        if traj.terminal() != self.goal {
            return Err(argument("trajectory must end at the goal"));
        }
        let free = &traj.states[1..self.horizon];
        self.check_free_states(free)?;
        self.check_actions(&traj.actions)?;
        Ok(free)
    }
}

/// Gradients of a lifted loss.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrads<T> {
    pub d_actions: Vec<Vec<T>>,
    /// One entry per free state `s_1..s_{T-1}`.
    pub d_states: Vec<Vec<T>>,
}

/// State `s_t` given free states, with `s_0` and `s_T = g` pinned.
#[inline]
fn state_at<'s, T: Real>(p: &PlanProblem<'s, T>, free: &'s [Vec<T>], t: usize) -> &'s [T] {
    if t == 0 {
        p.s0
    } else if t == p.horizon {
        p.goal
    } else {
        &free[t - 1]
    }
}

fn sum_terms<T: Real>(terms: &[T]) -> T {
    vector::pairwise_sum(terms)
}

fn map_steps<R: Send>(horizon: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    if horizon >= PARALLEL_BATCH_MIN {
        (0..horizon).into_par_iter().map(f).collect()
    } else {
        (0..horizon).map(f).collect()
    }
}

/// `‖s_T(a, s0) − g‖²` and its action gradient by a reverse sweep.
pub fn shooting_value_grad<T: Real>(p: &PlanProblem<'_, T>, actions: &[Vec<T>]) -> Result<(T, Vec<Vec<T>>)> {
    p.check_actions(actions)?;
    let states = shooting_states(p, actions)?;
    let resid = vector::sub(&states[p.horizon], p.goal);
    let value = vector::norm_sq(&resid);
    let mut lam: Vec<T> = resid.iter().map(|&r| r + r).collect();
    let mut grads = vec![Vec::new(); p.horizon];
    for t in (0..p.horizon).rev() {
        if t == 0 {
            grads[0] = p.model.pullback_action(&states[0], &actions[0], &lam);
        } else {
            let (gs, ga) = p.model.pullback(&states[t], &actions[t], &lam);
            grads[t] = ga;
            lam = gs;
        }
    }
    Ok((value, grads))
}

/// Shooting loss value only.
pub fn shooting_value<T: Real>(p: &PlanProblem<'_, T>, actions: &[Vec<T>]) -> Result<T> {
    p.check_actions(actions)?;
    let states = shooting_states(p, actions)?;
    Ok(vector::dist_sq(&states[p.horizon], p.goal))
}

fn shooting_states<T: Real>(p: &PlanProblem<'_, T>, actions: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let mut states = Vec::with_capacity(p.horizon + 1);
    states.push(p.s0.to_vec());
    for (t, a) in actions.iter().enumerate() {
        let next = p.model.step(&states[t], a);
        if !vector::all_finite(&next) {
            return Err(Error::Divergence { step: t + 1 });
        }
        states.push(next);
    }
    Ok(states)
}

fn predictions<T: Real>(p: &PlanProblem<'_, T>, free: &[Vec<T>], actions: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let pairs: Vec<(&[T], &[T])> = (0..p.horizon)
        .map(|t| (state_at(p, free, t), actions[t].as_slice()))
        .collect();
    let mu = batch_step(p.model, &pairs);
    if let Some(t) = mu.iter().position(|m| !vector::all_finite(m)) {
        return Err(Error::Divergence { step: t });
    }
    Ok(mu)
}

/// `Σ_t ‖F(s_t, a_t) − s_{t+1}‖²` with full gradients through both state
/// arguments. The trajectory must start at `s0` and end at `g`.
pub fn lifted_value_grad<T: Real>(p: &PlanProblem<'_, T>, traj: &Trajectory<T>) -> Result<(T, LossGrads<T>)> {
    let free = p.free_states(traj)?;
    lifted_parts(p, free, &traj.actions)
}

pub(crate) fn lifted_parts<T: Real>(
    p: &PlanProblem<'_, T>,
    free: &[Vec<T>],
    actions: &[Vec<T>],
) -> Result<(T, LossGrads<T>)> {
    let mu = predictions(p, free, actions)?;
    let resid: Vec<Vec<T>> = (0..p.horizon)
        .map(|t| vector::sub(&mu[t], state_at(p, free, t + 1)))
        .collect();
    let terms: Vec<T> = resid.iter().map(|r| vector::norm_sq(r)).collect();
    let two = T::lit(2.0);
    let pulled = map_steps(p.horizon, |t| {
        let c: Vec<T> = resid[t].iter().map(|&r| two * r).collect();
        if t == 0 {
            (Vec::new(), p.model.pullback_action(p.s0, &actions[0], &c))
        } else {
            p.model.pullback(state_at(p, free, t), &actions[t], &c)
        }
    });
    let mut d_actions = Vec::with_capacity(p.horizon);
    let mut d_states = Vec::with_capacity(p.horizon - 1);
    for (t, (gs, ga)) in pulled.into_iter().enumerate() {
        d_actions.push(ga);
        if t > 0 {
            d_states.push(gs.iter().zip(&resid[t - 1]).map(|(&g, &r)| g - two * r).collect());
        }
    }
    Ok((sum_terms(&terms), LossGrads { d_actions, d_states }))
}

/// Lifted loss value only.
pub fn lifted_value<T: Real>(p: &PlanProblem<'_, T>, free: &[Vec<T>], actions: &[Vec<T>]) -> Result<T> {
    p.check_free_states(free)?;
    p.check_actions(actions)?;
    let mu = predictions(p, free, actions)?;
    let terms: Vec<T> = (0..p.horizon)
        .map(|t| vector::dist_sq(&mu[t], state_at(p, free, t + 1)))
        .collect();
    Ok(sum_terms(&terms))
}

/// Stop-gradient lifted loss with dense goal shaping,
/// `Σ_t ‖μ_t − s_{t+1}‖² + γ Σ_t ‖μ_t − g‖²` where `μ_t = F(s̄_t, a_t)`.
///
/// State inputs of `F` are treated as constants: `d_states` carries only
/// the `−2(μ_t − s_{t+1})` pull on each next state, and the state Jacobian of
/// the model is never queried.
pub fn grasp_value_grad<T: Real>(
    p: &PlanProblem<'_, T>,
    traj: &Trajectory<T>,
    gamma: T,
) -> Result<(T, LossGrads<T>)> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(argument(format!("gamma must be positive, got {gamma}")));
    }
    let free = p.free_states(traj)?;
    grasp_parts(p, free, &traj.actions, &GoalWeights::Constant(gamma))
}

/// As [`grasp_value_grad`] with a per-step goal weight `β_t ≥ 0`.
pub fn grasp_value_grad_weighted<T: Real>(
    p: &PlanProblem<'_, T>,
    traj: &Trajectory<T>,
    betas: &[T],
) -> Result<(T, LossGrads<T>)> {
    let w = GoalWeights::PerStep(betas.to_vec());
    w.validate(p.horizon)?;
    let free = p.free_states(traj)?;
    grasp_parts(p, free, &traj.actions, &w)
}

/// Goal-term coefficients `β_t`.
#[derive(Clone, Debug, PartialEq)]
pub enum GoalWeights<T> {
    Constant(T),
    PerStep(Vec<T>),
}

impl<T: Real> GoalWeights<T> {
    #[inline]
    pub fn at(&self, t: usize) -> T {
        match self {
            GoalWeights::Constant(g) => *g,
            GoalWeights::PerStep(b) => b[t],
        }
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        match self {
            GoalWeights::Constant(g) if !(*g > T::zero()) || !g.is_finite() => {
                Err(argument(format!("gamma must be positive, got {g}")))
            }
            GoalWeights::PerStep(b) => {
                check_dim("goal weights", horizon, b.len())?;
                if b.iter().any(|x| !(*x >= T::zero()) || !x.is_finite()) {
                    return Err(argument("goal weights must be finite and non-negative"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

pub(crate) fn grasp_parts<T: Real>(
    p: &PlanProblem<'_, T>,
    free: &[Vec<T>],
    actions: &[Vec<T>],
    weights: &GoalWeights<T>,
) -> Result<(T, LossGrads<T>)> {
    let mu = predictions(p, free, actions)?;
    let two = T::lit(2.0);
    let mut dyn_terms = Vec::with_capacity(p.horizon);
    let mut goal_terms = Vec::with_capacity(p.horizon);
    let mut cots = Vec::with_capacity(p.horizon);
    let mut d_states = Vec::with_capacity(p.horizon - 1);
    for t in 0..p.horizon {
        let r = vector::sub(&mu[t], state_at(p, free, t + 1));
        let e = vector::sub(&mu[t], p.goal);
        let beta = weights.at(t);
        dyn_terms.push(vector::norm_sq(&r));
        goal_terms.push(beta * vector::norm_sq(&e));
        cots.push(r.iter().zip(&e).map(|(&ri, &ei)| two * (ri + beta * ei)).collect::<Vec<T>>());
        if t + 1 < p.horizon {
            d_states.push(r.iter().map(|&ri| -two * ri).collect());
        }
    }
    let d_actions = map_steps(p.horizon, |t| {
        p.model.pullback_action(state_at(p, free, t), &actions[t], &cots[t])
    });
    let value = sum_terms(&dyn_terms) + sum_terms(&goal_terms);
    Ok((value, LossGrads { d_actions, d_states }))
}

/// GRASP loss value only.
pub fn grasp_value<T: Real>(
    p: &PlanProblem<'_, T>,
    free: &[Vec<T>],
    actions: &[Vec<T>],
    weights: &GoalWeights<T>,
) -> Result<T> {
    weights.validate(p.horizon)?;
    p.check_free_states(free)?;
    p.check_actions(actions)?;
    let mu = predictions(p, free, actions)?;
    let mut dyn_terms = Vec::with_capacity(p.horizon);
    let mut goal_terms = Vec::with_capacity(p.horizon);
    for t in 0..p.horizon {
        dyn_terms.push(vector::dist_sq(&mu[t], state_at(p, free, t + 1)));
        goal_terms.push(weights.at(t) * vector::dist_sq(&mu[t], p.goal));
    }
    Ok(sum_terms(&dyn_terms) + sum_terms(&goal_terms))
}
