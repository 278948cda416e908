use serde::{Deserialize, Serialize};

use super::WorldModel;
use crate::error::{argument, check_dim, Result};
use crate::numerics::{DenseMatrix, Real};

/// `s' = A s + B a + c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<T> {
    a: DenseMatrix<T>,
    b: DenseMatrix<T>,
    c: Vec<T>,
}

impl<T: Real> LinearModel<T> {
    pub fn new(a: DenseMatrix<T>, b: DenseMatrix<T>) -> Result<Self> {
        let n = a.rows();
        Self::with_offset(a, b, vec![T::zero(); n])
    }

    pub fn with_offset(a: DenseMatrix<T>, b: DenseMatrix<T>, c: Vec<T>) -> Result<Self> {
        if !a.is_square() || a.rows() == 0 {
            return Err(argument("A must be square and non-empty"));
        }
        check_dim("B rows", a.rows(), b.rows())?;
        if b.cols() == 0 {
            return Err(argument("B needs at least one column"));
        }
        check_dim("offset", a.rows(), c.len())?;
        if c.iter().any(|x| !x.is_finite()) {
            return Err(argument("offset must be finite"));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DenseMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix<T> {
        &self.b
    }

    pub fn offset(&self) -> &[T] {
        &self.c
    }
}

impl<T: Real> WorldModel<T> for LinearModel<T> {
    fn state_dim(&self) -> usize {
        self.a.rows()
    }

    fn action_dim(&self) -> usize {
        self.b.cols()
    }

    fn step(&self, s: &[T], a: &[T]) -> Vec<T> {
        let mut out = self.a.matvec(s);
        for ((o, bi), ci) in out.iter_mut().zip(self.b.matvec(a)).zip(&self.c) {
            *o += bi + *ci;
        }
        out
    }

    fn pullback(&self, _s: &[T], _a: &[T], c: &[T]) -> (Vec<T>, Vec<T>) {
        (self.a.matvec_t(c), self.b.matvec_t(c))
    }

    fn pullback_action(&self, _s: &[T], _a: &[T], c: &[T]) -> Vec<T> {
        self.b.matvec_t(c)
    }
}
