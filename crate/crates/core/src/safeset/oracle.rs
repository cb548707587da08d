//! Grid-based safe-set oracle.
//!
//! Works directly from the pointwise definition (every admissible
//! disturbance has an admissible control landing back in the set) on a
//! discretized target, using only map evaluation. It shares no code with
//! the interval-set sculpting path and serves as its cross-check.

use rayon::prelude::*;

use super::{ControlParams, SafeSetError};
use crate::interval_set::IntervalSet;
use crate::map_model::PiecewiseLinearMap;
use crate::scalar::Scalar;

/// Surviving grid points of the discretized target.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMask<T = f64> {
    pub points: Vec<T>,
    pub alive: Vec<bool>,
    pub spacing: T,
    /// Deletion sweeps until nothing changed.
    pub sweeps: usize,
}

impl<T: Scalar> GridMask<T> {
    /// Maximal runs of consecutive surviving points as `(first, last)`.
    pub fn runs(&self) -> Vec<(T, T)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, &a) in self.alive.iter().enumerate() {
            match (a, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push((self.points[s], self.points[i - 1]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((self.points[s], self.points[self.points.len() - 1]));
        }
        out
    }

    pub fn count_alive(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count_alive() == 0
    }

    /// Runs as an interval set (isolated points become point components).
    pub fn to_interval_set(&self) -> IntervalSet<T> {
        IntervalSet::from_pairs(&self.runs()).expect("grid runs are ordered")
    }
}

fn samples<T: Scalar>(half_width: T, n: usize) -> Vec<T> {
    if n <= 1 {
        return vec![T::zero()];
    }
    let step = T::two() * half_width / T::lit((n - 1) as f64);
    (0..n)
        .map(|k| {
            if k == n - 1 {
                half_width
            } else {
                -half_width + step * T::lit(k as f64)
            }
        })
        .collect()
}

/// Deletes grid points of `Q` from which some sampled disturbance leaves
/// every sampled control more than one grid spacing away from a surviving
/// point, until nothing changes.
pub fn brute_force_safe_grid<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    p: &ControlParams<T>,
    n_grid: usize,
    n_xi: usize,
    n_u: usize,
) -> Result<GridMask<T>, SafeSetError> {
    if n_grid < 100 {
        return Err(SafeSetError::InvalidParams(format!(
            "grid needs at least 100 points, got {n_grid}"
        )));
    }
    if n_xi == 0 || n_u == 0 {
        return Err(SafeSetError::InvalidParams(
            "disturbance and control sample counts must be positive".into(),
        ));
    }
    let (a, b) = (p.target.lo(), p.target.hi());
    let h = (b - a) / T::lit((n_grid - 1) as f64);
    let points: Vec<T> = (0..n_grid)
        .map(|i| if i == n_grid - 1 { b } else { a + h * T::lit(i as f64) })
        .collect();
    let images = points
        .iter()
        .map(|&x| f.eval(x))
        .collect::<Result<Vec<_>, _>>()?;
    let xis = samples(p.beta, n_xi);
    let us = samples(p.u_bound, n_u);
    let slack = h * T::lit(1e-9);
    let last = (n_grid - 1) as f64;

    let mut alive = vec![true; n_grid];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        // prefix[i] = survivors among indices < i
        let mut prefix = Vec::with_capacity(n_grid + 1);
        prefix.push(0u32);
        for &al in &alive {
            prefix.push(prefix[prefix.len() - 1] + al as u32);
        }
        let near_survivor = |y: T| -> bool {
            let lo = ((y - h - slack - a) / h).as_f64().ceil().max(0.0);
            let hi = ((y + h + slack - a) / h).as_f64().floor().min(last);
            if lo > hi {
                return false;
            }
            let (lo, hi) = (lo as usize, hi as usize);
            prefix[hi + 1] > prefix[lo]
        };
        let next: Vec<bool> = (0..n_grid)
            .into_par_iter()
            .map(|i| {
                alive[i]
                    && xis.iter().all(|&xi| {
                        let base = images[i] + xi;
                        us.iter().any(|&u| near_survivor(base + u))
                    })
            })
            .collect();
        if next == alive {
            break;
        }
        alive = next;
        if !alive.iter().any(|&x| x) {
            break;
        }
    }
    Ok(GridMask {
        points,
        alive,
        spacing: h,
        sweeps,
    })
}
