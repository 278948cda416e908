use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{argument, Result};
use crate::numerics::{vector, Real, RngStream};

/// Loss values on a `grid × grid` lattice spanned by two orthonormal
/// directions through `center`. `values[i * grid + j]` sits at
/// `center + α_i u + β_j v`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LandscapeField<T> {
    pub grid: usize,
    pub radius: T,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> LandscapeField<T> {
    /// Lattice coordinate `i`, uniform on `[−radius, radius]`.
    pub fn coord(&self, i: usize) -> T {
        let frac = T::lit(i as f64 / (self.grid - 1) as f64);
        -self.radius + (self.radius + self.radius) * frac
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[i * self.grid + j]
    }

    /// Sum of absolute differences between lattice neighbours.
    pub fn total_variation(&self) -> T {
        let g = self.grid;
        let mut terms = Vec::with_capacity(2 * g * g);
        for i in 0..g {
            for j in 0..g {
                if i + 1 < g {
                    terms.push((self.at(i + 1, j) - self.at(i, j)).abs());
                }
                if j + 1 < g {
                    terms.push((self.at(i, j + 1) - self.at(i, j)).abs());
                }
            }
        }
        vector::pairwise_sum(&terms)
    }

    /// Variation left after removing the best-fit quadratic surface, relative
    /// to the field's range. Zero for exactly quadratic fields (and for flat
    /// ones); kinks and oscillations raise it.
    pub fn roughness(&self) -> f64 {
        let g = self.grid;
        let vals: Vec<f64> = self.values.iter().map(|v| v.as_f64()).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if !(range > 0.0) || !range.is_finite() {
            return 0.0;
        }
        let scale = if self.radius > T::zero() { self.radius.as_f64() } else { 1.0 };
        let mut x = DMatrix::<f64>::zeros(g * g, 6);
        for i in 0..g {
            for j in 0..g {
                let (a, b) = (self.coord(i).as_f64() / scale, self.coord(j).as_f64() / scale);
                for (k, v) in [1.0, a, b, a * a, a * b, b * b].into_iter().enumerate() {
                    x[(i * g + j, k)] = v;
                }
            }
        }
        let y = DVector::from_vec(vals.iter().map(|v| (v - lo) / range).collect());
        let Ok(coef) = x.clone().svd(true, true).solve(&y, 1e-12) else {
            return 0.0;
        };
        let r = &y - &x * coef;
        let mut tv = 0.0;
        for i in 0..g {
            for j in 0..g {
                if i + 1 < g {
                    tv += (r[(i + 1) * g + j] - r[i * g + j]).abs();
                }
                if j + 1 < g {
                    tv += (r[i * g + j + 1] - r[i * g + j]).abs();
                }
            }
        }
        tv
    }

    /// `alpha,beta,loss` rows in lattice order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,beta,loss\n");
        for i in 0..self.grid {
            for j in 0..self.grid {
                let _ = writeln!(out, "{},{},{}", self.coord(i), self.coord(j), self.at(i, j));
            }
        }
        out
    }
}

fn unit_gaussian<T: Real>(rng: &mut RngStream, dim: usize) -> Vec<T> {
    loop {
        let x: Vec<T> = (0..dim).map(|_| T::lit(rng.standard_normal())).collect();
        let n = vector::norm(&x);
        if n > T::zero() {
            return vector::scale(&x, T::one() / n);
        }
    }
}

fn remove_component<T: Real>(v: &mut [T], u: &[T]) {
    let c = vector::dot(v, u);
    vector::axpy(-c, u, v);
}

/// Two random orthonormal directions in `R^dim`.
pub(crate) fn orthonormal_pair<T: Real>(rng: &mut RngStream, dim: usize) -> Result<(Vec<T>, Vec<T>)> {
    if dim < 2 {
        return Err(argument("landscape slices need at least two parameters"));
    }
    let u = unit_gaussian(rng, dim);
    loop {
        let mut v = unit_gaussian(rng, dim);
        remove_component(&mut v, &u);
        let n = vector::norm(&v);
        if n < T::lit(1e-3) {
            continue;
        }
        v = vector::scale(&v, T::one() / n);
        remove_component(&mut v, &u);
        let n = vector::norm(&v);
        return Ok((u, vector::scale(&v, T::one() / n)));
    }
}

/// Evaluates `loss` on the slice `center + αu + βv`, `α, β ∈ [−radius, radius]`.
pub fn landscape_slice<T, F>(
    loss: F,
    center: &[T],
    rng: &mut RngStream,
    grid: usize,
    radius: T,
) -> Result<LandscapeField<T>>
where
    T: Real,
    F: Fn(&[T]) -> Result<T> + Sync,
{
    if grid < 3 {
        return Err(argument("landscape grid must be >= 3"));
    }
    if !(radius >= T::zero()) || !radius.is_finite() {
        return Err(argument("landscape radius must be finite and non-negative"));
    }
    let (u, v) = orthonormal_pair(rng, center.len())?;
    let mut field = LandscapeField {
        grid,
        radius,
        u,
        v,
        values: Vec::new(),
    };
    let coords: Vec<T> = (0..grid).map(|i| field.coord(i)).collect();
    let values = (0..grid * grid)
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (coords[idx / grid], coords[idx % grid]);
            let x: Vec<T> = center
                .iter()
                .zip(field.u.iter().zip(&field.v))
                .map(|(&c, (&ui, &vi))| c + a * ui + b * vi)
                .collect();
            loss(&x)
        })
        .collect::<Result<Vec<T>>>()?;
    field.values = values;
    Ok(field)
}
