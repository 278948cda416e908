//! Differentiable dynamics `F(s, a) → s'` with gradient access split by input.
//!
//! Splitting the vector-Jacobian product into its state and action halves is
//! what lets the objectives express stop-gradient semantics: a loss that
//! treats a state input as constant simply never asks for the state half.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{argument, check_dim, Result};
use crate::numerics::Real;

mod document;
mod linear;
mod mlp;
mod wall;

pub use document::{AnyModel, ModelDims, ModelDocument, ModelMetadata};
pub use linear::LinearModel;
pub use mlp::{one_step_mse, train_mlp, MlpModel, TrainConfig, TrainReport, Transition};
pub use wall::{Wall, WallWorld};

/// Pairs at or above this count are evaluated on the rayon pool.
pub const PARALLEL_BATCH_MIN: usize = 64;

/// A differentiable next-state map.
///
/// Implementors assume dimensions were already validated; the provided
/// `forward`/`vjp_*` methods do the checking.
pub trait WorldModel<T: Real>: Send + Sync {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;

    /// Next state for valid-length inputs.
    fn step(&self, s: &[T], a: &[T]) -> Vec<T>;

    /// `((∂F/∂s)ᵀ c, (∂F/∂a)ᵀ c)` at `(s, a)`.
    fn pullback(&self, s: &[T], a: &[T], cotangent: &[T]) -> (Vec<T>, Vec<T>);

    /// `(∂F/∂a)ᵀ c` alone. Override when the state half is expensive.
    fn pullback_action(&self, s: &[T], a: &[T], cotangent: &[T]) -> Vec<T> {
        self.pullback(s, a, cotangent).1
    }

    fn check_inputs(&self, s: &[T], a: &[T]) -> Result<()> {
        check_dim("state", self.state_dim(), s.len())?;
        check_dim("action", self.action_dim(), a.len())
    }

    fn forward(&self, s: &[T], a: &[T]) -> Result<Vec<T>> {
        self.check_inputs(s, a)?;
        Ok(self.step(s, a))
    }

    fn vjp_state(&self, s: &[T], a: &[T], cotangent: &[T]) -> Result<Vec<T>> {
        self.check_inputs(s, a)?;
        check_dim("cotangent", self.state_dim(), cotangent.len())?;
        Ok(self.pullback(s, a, cotangent).0)
    }

    fn vjp_action(&self, s: &[T], a: &[T], cotangent: &[T]) -> Result<Vec<T>> {
        self.check_inputs(s, a)?;
        check_dim("cotangent", self.state_dim(), cotangent.len())?;
        Ok(self.pullback_action(s, a, cotangent))
    }
}

impl<T: Real, M: WorldModel<T> + ?Sized> WorldModel<T> for &M {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn action_dim(&self) -> usize {
        (**self).action_dim()
    }
    fn step(&self, s: &[T], a: &[T]) -> Vec<T> {
        (**self).step(s, a)
    }
    fn pullback(&self, s: &[T], a: &[T], c: &[T]) -> (Vec<T>, Vec<T>) {
        (**self).pullback(s, a, c)
    }
    fn pullback_action(&self, s: &[T], a: &[T], c: &[T]) -> Vec<T> {
        (**self).pullback_action(s, a, c)
    }
}

/// States `s_0..s_T` and actions `a_0..a_{T-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub states: Vec<Vec<T>>,
    pub actions: Vec<Vec<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(states: Vec<Vec<T>>, actions: Vec<Vec<T>>) -> Result<Self> {
        if actions.is_empty() {
            return Err(argument("trajectory needs horizon >= 1"));
        }
        check_dim("trajectory states", actions.len() + 1, states.len())?;
        Ok(Self { states, actions })
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn terminal(&self) -> &[T] {
        self.states.last().expect("non-empty trajectory")
    }
}

/// Sequential rollout `s_{t+1} = F(s_t, a_t)` from `s0`.
pub fn rollout<T: Real, M: WorldModel<T> + ?Sized>(
    model: &M,
    s0: &[T],
    actions: &[Vec<T>],
) -> Result<Trajectory<T>> {
    if actions.is_empty() {
        return Err(argument("rollout needs horizon >= 1"));
    }
    check_dim("initial state", model.state_dim(), s0.len())?;
    for a in actions {
        check_dim("action", model.action_dim(), a.len())?;
    }
    let mut states = Vec::with_capacity(actions.len() + 1);
    states.push(s0.to_vec());
    for a in actions {
        let next = model.step(states.last().expect("non-empty"), a);
        states.push(next);
    }
    Ok(Trajectory {
        states,
        actions: actions.to_vec(),
    })
}

/// Evaluates `F` on every pair. Results are identical to mapping
/// [`WorldModel::forward`] regardless of pool size.
pub fn batch_forward<T: Real, M: WorldModel<T> + ?Sized>(
    model: &M,
    pairs: &[(&[T], &[T])],
) -> Result<Vec<Vec<T>>> {
    for (s, a) in pairs {
        model.check_inputs(s, a)?;
    }
    Ok(batch_step(model, pairs))
}

pub(crate) fn batch_step<T: Real, M: WorldModel<T> + ?Sized>(
    model: &M,
    pairs: &[(&[T], &[T])],
) -> Vec<Vec<T>> {
    if pairs.len() >= PARALLEL_BATCH_MIN {
        pairs.par_iter().map(|(s, a)| model.step(s, a)).collect()
    } else {
        pairs.iter().map(|(s, a)| model.step(s, a)).collect()
    }
}

/// Wraps a model and counts evaluations. Counts are order independent, so
/// they serve as a deterministic cost clock.
pub struct CountingModel<'a, T: Real> {
    inner: &'a dyn WorldModel<T>,
    forwards: AtomicU64,
    pullbacks: AtomicU64,
}

impl<'a, T: Real> CountingModel<'a, T> {
    pub fn new(inner: &'a dyn WorldModel<T>) -> Self {
        Self {
            inner,
            forwards: AtomicU64::new(0),
            pullbacks: AtomicU64::new(0),
        }
    }

    pub fn forwards(&self) -> u64 {
        self.forwards.load(Ordering::Relaxed)
    }

    pub fn pullbacks(&self) -> u64 {
        self.pullbacks.load(Ordering::Relaxed)
    }
}

impl<T: Real> WorldModel<T> for CountingModel<'_, T> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }
    fn step(&self, s: &[T], a: &[T]) -> Vec<T> {
        self.forwards.fetch_add(1, Ordering::Relaxed);
        self.inner.step(s, a)
    }
    fn pullback(&self, s: &[T], a: &[T], c: &[T]) -> (Vec<T>, Vec<T>) {
        self.pullbacks.fetch_add(1, Ordering::Relaxed);
        self.inner.pullback(s, a, c)
    }
    fn pullback_action(&self, s: &[T], a: &[T], c: &[T]) -> Vec<T> {
        self.pullbacks.fetch_add(1, Ordering::Relaxed);
        self.inner.pullback_action(s, a, c)
    }
}
