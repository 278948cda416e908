use serde::{Deserialize, Serialize};

use super::WorldModel;
use crate::error::{argument, Result};
use crate::numerics::Real;

/// Capsule-shaped obstacle: every point within `thickness` of the segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wall<T> {
    pub p1: [T; 2],
    pub p2: [T; 2],
    pub thickness: T,
}

impl<T: Real> Wall<T> {
    pub fn new(p1: [T; 2], p2: [T; 2], thickness: T) -> Result<Self> {
        if !(thickness > T::zero()) || !thickness.is_finite() {
            return Err(argument("wall thickness must be positive"));
        }
        if p1.iter().chain(&p2).any(|x| !x.is_finite()) {
            return Err(argument("wall endpoints must be finite"));
        }
        Ok(Self { p1, p2, thickness })
    }

    /// Closest point on the segment and whether it lies strictly inside.
    fn closest(&self, p: [T; 2]) -> ([T; 2], Option<[T; 2]>) {
        let d = [self.p2[0] - self.p1[0], self.p2[1] - self.p1[1]];
        let len_sq = d[0] * d[0] + d[1] * d[1];
        if len_sq == T::zero() {
            return (self.p1, None);
        }
        let t = ((p[0] - self.p1[0]) * d[0] + (p[1] - self.p1[1]) * d[1]) / len_sq;
        if t <= T::zero() {
            (self.p1, None)
        } else if t >= T::one() {
            (self.p2, None)
        } else {
            let len = len_sq.sqrt();
            (
                [self.p1[0] + t * d[0], self.p1[1] + t * d[1]],
                Some([d[0] / len, d[1] / len]),
            )
        }
    }
}

/// Point mass in the plane pushed out of soft walls.
///
/// `s' = p − Σ_w ∇Φ_w(p)` with `p = s + δa`. Each wall contributes a penalty
/// of penetration depth `u = thickness − d̃`, where `d̃ = √(d² + ε²) − ε` is a
/// smoothed distance to the segment. The penalty is quadratic in `u` beyond a
/// short cubic ramp, so its gradient is continuously differentiable.
/// Steps longer than a wall's thickness can land past its centerline and
/// tunnel through.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallWorld<T> {
    walls: Vec<Wall<T>>,
    stiffness: T,
    step_scale: T,
}

/// Ramp width as a fraction of thickness.
const RAMP_FRACTION: f64 = 0.2;
/// Distance smoothing as a fraction of thickness.
const CORE_FRACTION: f64 = 0.1;

struct Contact<T> {
    /// `∇Φ_w(p)`
    grad: [T; 2],
    /// `∇²Φ_w(p)`, symmetric
    hess: [[T; 2]; 2],
}

impl<T: Real> WallWorld<T> {
    pub fn new(walls: Vec<Wall<T>>, stiffness: T, step_scale: T) -> Result<Self> {
        if !(stiffness >= T::zero()) || !stiffness.is_finite() {
            return Err(argument("stiffness must be non-negative"));
        }
        if !(step_scale > T::zero()) || !step_scale.is_finite() {
            return Err(argument("step_scale must be positive"));
        }
        Ok(Self {
            walls,
            stiffness,
            step_scale,
        })
    }

    pub fn walls(&self) -> &[Wall<T>] {
        &self.walls
    }

    pub fn stiffness(&self) -> T {
        self.stiffness
    }

    pub fn step_scale(&self) -> T {
        self.step_scale
    }

    /// Smoothed distance from `p` to the nearest wall surface, negative inside.
    pub fn clearance(&self, p: &[T]) -> T {
        let mut best = T::infinity();
        for w in &self.walls {
            let (q, _) = w.closest([p[0], p[1]]);
            let eps = T::lit(CORE_FRACTION) * w.thickness;
            let d_sq = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            best = best.min((d_sq + eps * eps).sqrt() - eps - w.thickness);
        }
        best
    }

    fn contact(&self, w: &Wall<T>, p: [T; 2], need_hess: bool) -> Option<Contact<T>> {
        let th = w.thickness;
        let eps = T::lit(CORE_FRACTION) * th;
        let ramp = T::lit(RAMP_FRACTION) * th;
        let (q, tangent) = w.closest(p);
        let diff = [p[0] - q[0], p[1] - q[1]];
        let r = (diff[0] * diff[0] + diff[1] * diff[1] + eps * eps).sqrt();
        let u = th - (r - eps);
        if u <= T::zero() {
            return None;
        }
        let k = self.stiffness;
        let half = T::lit(0.5);
        // φ'(u), φ''(u) of the ramped penalty
        let (d1, d2) = if u < ramp {
            (k * u * u * half / ramp, k * u / ramp)
        } else {
            (k * (u - half * ramp), k)
        };
        let gr = [diff[0] / r, diff[1] / r];
        // Φ = φ(th − r + ε): ∇Φ = −φ' ∇r
        let grad = [-d1 * gr[0], -d1 * gr[1]];
        let mut hess = [[T::zero(); 2]; 2];
        if need_hess {
            // ∇²r = (I − ∂q/∂p)/r − diff diffᵀ/r³
            let r3 = r * r * r;
            for i in 0..2 {
                for j in 0..2 {
                    let id = if i == j { T::one() } else { T::zero() };
                    let proj = tangent.map_or(T::zero(), |t| t[i] * t[j]);
                    let hr = (id - proj) / r - diff[i] * diff[j] / r3;
                    hess[i][j] = d2 * gr[i] * gr[j] - d1 * hr;
                }
            }
        }
        Some(Contact { grad, hess })
    }

    fn displaced(&self, s: &[T], a: &[T]) -> [T; 2] {
        [s[0] + self.step_scale * a[0], s[1] + self.step_scale * a[1]]
    }

    /// `(I − ΣH_w) c`; the Jacobian is symmetric so this is also its transpose.
    fn jacobian_apply(&self, p: [T; 2], c: &[T]) -> [T; 2] {
        let mut out = [c[0], c[1]];
        for w in &self.walls {
            if let Some(ct) = self.contact(w, p, true) {
                for i in 0..2 {
                    out[i] -= ct.hess[i][0] * c[0] + ct.hess[i][1] * c[1];
                }
            }
        }
        out
    }
}

impl<T: Real> WorldModel<T> for WallWorld<T> {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn step(&self, s: &[T], a: &[T]) -> Vec<T> {
        let p = self.displaced(s, a);
        let mut out = vec![p[0], p[1]];
        for w in &self.walls {
            if let Some(ct) = self.contact(w, p, false) {
                out[0] -= ct.grad[0];
                out[1] -= ct.grad[1];
            }
        }
        out
    }

    fn pullback(&self, s: &[T], a: &[T], c: &[T]) -> (Vec<T>, Vec<T>) {
        let js = self.jacobian_apply(self.displaced(s, a), c);
        let d = self.step_scale;
        (js.to_vec(), vec![d * js[0], d * js[1]])
    }
}
