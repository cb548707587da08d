//! Bifurcations of the maximal safe set in the `(U, β)` plane.
//!
//! As `U` decreases the safe set changes its number of components only
//! when a component shrinks to a point (B1) or the gap between adjacent
//! components equals `2U` (B2). This module flags both conditions, sweeps
//! the parameter plane, locates events along lines of constant `β` by
//! bisection, computes `u_min(β)` and continues boundary points in `U`.

pub mod boundary;
pub mod lemma;
pub mod linalg;
pub mod trace;

use rayon::prelude::*;
use serde::Serialize;

use crate::interval_set::{Interval, IntervalSet};
use crate::map_model::PiecewiseLinearMap;
use crate::safeset::{maximal_safe_set, ControlParams, SafeSetError, SafeSetResult, SolverOptions};
use crate::scalar::Scalar;

pub use boundary::{jacobian_nonsingular, BoundaryError, BoundarySystem, JacobianReport};
pub use lemma::{lemma_a1_check, LemmaReport};
pub use trace::{trace_boundaries, TraceOptions, TraceRecord};

/// Component width at or below which B1 is flagged.
pub const POINT_TOL: f64 = 1e-6;
/// Distance of a gap from `2U` at or below which B2 is flagged.
pub const GAP_TOL: f64 = 1e-6;
/// Bracket width for event localization in `U`.
pub const LOCALIZE_TOL: f64 = 1e-9;

/// Indices of components of width at most `point_tol`.
pub fn check_b1<T: Scalar>(s: &IntervalSet<T>, point_tol: T) -> Vec<usize> {
    s.components()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.width() <= point_tol)
        .map(|(k, _)| k)
        .collect()
}

/// Indices `k` such that the gap between components `k` and `k+1` is
/// within `gap_tol` of `2U`.
pub fn check_b2<T: Scalar>(s: &IntervalSet<T>, u_bound: T, gap_tol: T) -> Vec<usize> {
    s.gaps()
        .enumerate()
        .filter(|(_, g)| (*g - T::two() * u_bound).abs() <= gap_tol)
        .map(|(k, _)| k)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BifurcationKind {
    /// B1: a component shrinks to a point.
    VanishingPoint,
    /// B2 without B1: a gap equals `2U`.
    Split,
    /// A component-count change where neither condition was detected.
    Unflagged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationEvent<T = f64> {
    pub kind: BifurcationKind,
    pub u_at: T,
    pub beta_at: T,
    /// Point component (B1) or left component of the critical gap (B2).
    pub component_index: Option<usize>,
    /// `U` bracket containing the event.
    pub bracket: (T, T),
    pub components_above: usize,
    pub components_below: usize,
    pub detail: String,
}

/// Solves at `(u, β)` on target `q` with the given options.
pub fn solve_at<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    q: Interval<T>,
    u: T,
    beta: T,
    opts: &SolverOptions<T>,
) -> Result<SafeSetResult<T>, SafeSetError> {
    let p = ControlParams::new(u, beta, q.lo(), q.hi())?;
    maximal_safe_set(f, &p, opts)
}

fn count_at<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    q: Interval<T>,
    u: T,
    beta: T,
    opts: &SolverOptions<T>,
) -> Result<usize, SafeSetError> {
    Ok(solve_at(f, q, u, beta, opts)?.safe_set.num_components())
}

/// Narrows a `U` bracket whose ends have different component counts to
/// width `tol`, then classifies the event from the set just above it.
#[allow(clippy::too_many_arguments)]
pub fn localize_event<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    q: Interval<T>,
    beta: T,
    mut lo: T,
    mut hi: T,
    tol: T,
    opts: &SolverOptions<T>,
) -> Result<BifurcationEvent<T>, SafeSetError> {
    let above = count_at(f, q, hi, beta, opts)?;
    while hi - lo > tol {
        let mid = (lo + hi) / T::two();
        if count_at(f, q, mid, beta, opts)? == above {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let below = count_at(f, q, lo, beta, opts)?;
    classify(f, q, beta, lo, hi, above, below, opts)
}

#[allow(clippy::too_many_arguments)]
fn classify<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    q: Interval<T>,
    beta: T,
    lo: T,
    hi: T,
    above: usize,
    below: usize,
    opts: &SolverOptions<T>,
) -> Result<BifurcationEvent<T>, SafeSetError> {
    let s = solve_at(f, q, hi, beta, opts)?.safe_set;
    let b1 = check_b1(&s, T::lit(POINT_TOL));
    let b2 = check_b2(&s, hi, T::lit(GAP_TOL));
    let (kind, component_index, detail) = if let Some(&k) = b1.first() {
        let c = s.components()[k];
        (
            BifurcationKind::VanishingPoint,
            Some(k),
            format!("component {k} has width {:e} at {}", c.width().as_f64(), c.midpoint()),
        )
    } else if let Some(&k) = b2.first() {
        let g = s.components()[k + 1].lo() - s.components()[k].hi();
        (
            BifurcationKind::Split,
            Some(k),
            format!("gap after component {k} minus 2U is {:e}", (g - T::two() * hi).as_f64()),
        )
    } else {
        (
            BifurcationKind::Unflagged,
            None,
            "neither a point component nor a gap of width 2U".to_string(),
        )
    };
    Ok(BifurcationEvent {
        kind,
        u_at: (lo + hi) / T::two(),
        beta_at: beta,
        component_index,
        bracket: (lo, hi),
        components_above: above,
        components_below: below,
        detail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineSample<T = f64> {
    pub u: T,
    pub n_components: usize,
    pub measure: T,
    pub b1: Vec<usize>,
    pub b2: Vec<usize>,
    #[serde(skip)]
    pub set: IntervalSet<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineScan<T = f64> {
    pub beta: T,
    pub samples: Vec<LineSample<T>>,
    pub events: Vec<BifurcationEvent<T>>,
    /// Adjacent samples with equal counts but Hausdorff distance above
    /// `10·du`, as `(u_lo, u_hi, distance, flagged)`.
    pub jumps: Vec<(T, T, T, bool)>,
}

/// Samples `u_lo, u_lo + du, …, u_hi` at fixed `β`, then locates every
/// change in the component count by bisection.
pub fn scan_line<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    q: Interval<T>,
    beta: T,
    u_lo: T,
    u_hi: T,
    du: T,
    opts: &SolverOptions<T>,
) -> Result<LineScan<T>, SafeSetError> {
    if !(du > T::zero() && u_lo > T::zero() && u_hi >= u_lo) {
        return Err(SafeSetError::InvalidParams(
            "need 0 < u_lo <= u_hi and du > 0".into(),
        ));
    }
    let steps = ((u_hi - u_lo) / du).round().as_f64() as usize;
    let us: Vec<T> = (0..=steps)
        .map(|k| u_lo + du * T::lit(k as f64))
        .collect();
    let samples = us
        .par_iter()
        .map(|&u| {
            let s = solve_at(f, q, u, beta, opts)?.safe_set;
            Ok(LineSample {
                u,
                n_components: s.num_components(),
                measure: s.measure(),
                b1: check_b1(&s, T::lit(POINT_TOL)),
                b2: check_b2(&s, u, T::lit(GAP_TOL)),
                set: s,
            })
        })
        .collect::<Result<Vec<_>, SafeSetError>>()?;

    let mut events = Vec::new();
    let mut jumps = Vec::new();
    for w in samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.n_components != b.n_components {
            events.push(localize_event(
                f,
                q,
                beta,
                a.u,
                b.u,
                T::lit(LOCALIZE_TOL),
                opts,
            )?);
        } else if a.n_components > 0 {
            let d = a.set.hausdorff_distance(&b.set)?;
            if d > T::lit(10.0) * du {
                let flagged = !(a.b1.is_empty() && a.b2.is_empty() && b.b1.is_empty() && b.b2.is_empty());
                jumps.push((a.u, b.u, d, flagged));
            }
        }
    }
    events.sort_by(|x, y| y.u_at.partial_cmp(&x.u_at).unwrap_or(std::cmp::Ordering::Equal));
    Ok(LineScan {
        beta,
        samples,
        events,
        jumps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Computed,
    /// `U ≥ β`, skipped unless requested.
    OutsideRegime,
    NotConverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell<T = f64> {
    #[serde(rename = "u")]
    pub u_bound: T,
    pub beta: T,
    pub exists: bool,
    pub measure: T,
    pub n_components: usize,
    pub status: CellStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions<T = f64> {
    /// Also compute cells with `U ≥ β`.
    pub include_outside_regime: bool,
    pub solver: SolverOptions<T>,
}

impl<T: Scalar> Default for SweepOptions<T> {
    fn default() -> Self {
        Self {
            include_outside_regime: false,
            solver: SolverOptions::default(),
        }
    }
}

/// `n` points `lo + (i+1)(hi−lo)/n`, so `(0, 0.2]` with `n = 200` gives
/// `0.001, …, 0.2`.
pub fn right_grid<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    let step = (hi - lo) / T::lit(n as f64);
    (1..=n)
        .map(|i| if i == n { hi } else { lo + step * T::lit(i as f64) })
        .collect()
}

fn sweep_cell<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    q: Interval<T>,
    u: T,
    beta: T,
    opts: &SweepOptions<T>,
) -> SweepCell<T> {
    let blank = |status| SweepCell {
        u_bound: u,
        beta,
        exists: false,
        measure: T::zero(),
        n_components: 0,
        status,
    };
    if u >= beta && !opts.include_outside_regime {
        return blank(CellStatus::OutsideRegime);
    }
    match solve_at(f, q, u, beta, &opts.solver) {
        Ok(r) => SweepCell {
            u_bound: u,
            beta,
            exists: !r.safe_set.is_empty(),
            measure: r.safe_set.measure(),
            n_components: r.safe_set.num_components(),
            status: if r.converged {
                CellStatus::Computed
            } else {
                CellStatus::NotConverged
            },
        },
        Err(_) => blank(CellStatus::Failed),
    }
}

/// One cell per `(U, β)` pair, computed in parallel on the current rayon
/// pool and sorted by `(U, β)`.
pub fn sweep<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    q: Interval<T>,
    u_grid: &[T],
    beta_grid: &[T],
    opts: &SweepOptions<T>,
) -> Vec<SweepCell<T>> {
    let pairs: Vec<(T, T)> = u_grid
        .iter()
        .flat_map(|&u| beta_grid.iter().map(move |&b| (u, b)))
        .collect();
    let mut cells: Vec<SweepCell<T>> = pairs
        .par_iter()
        .map(|&(u, b)| sweep_cell(f, q, u, b, opts))
        .collect();
    cells.sort_by(|a, b| {
        (a.u_bound, a.beta)
            .partial_cmp(&(b.u_bound, b.beta))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    cells
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UMin<T = f64> {
    pub beta: T,
    /// `None` when even `U = β` leaves no safe set.
    pub u_min: Option<T>,
    pub iterations: usize,
}

/// Smallest `U ∈ (0, β]` with a nonempty safe set, by bisection to `tol`.
/// Returns the upper end of the final bracket.
pub fn u_min<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    q: Interval<T>,
    beta: T,
    tol: T,
    opts: &SolverOptions<T>,
) -> Result<UMin<T>, SafeSetError> {
    if !(beta > T::zero() && tol > T::zero()) {
        return Err(SafeSetError::InvalidParams(
            "beta and tol must be positive".into(),
        ));
    }
    let nonempty = |u: T| -> Result<bool, SafeSetError> {
        Ok(!solve_at(f, q, u, beta, opts)?.safe_set.is_empty())
    };
    if !nonempty(beta)? {
        return Ok(UMin {
            beta,
            u_min: None,
            iterations: 1,
        });
    }
    let (mut lo, mut hi) = (T::zero(), beta);
    let mut iterations = 1;
    while hi - lo > tol {
        let mid = (lo + hi) / T::two();
        iterations += 1;
        if nonempty(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(UMin {
        beta,
        u_min: Some(hi),
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UMinSample<T = f64> {
    pub beta: T,
    pub u_min: Option<T>,
    /// Components of the safe set just above `u_min`.
    pub n_components: usize,
    /// B2 holds there: a split point of the `u_min` graph.
    pub split: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeSegment {
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub n_points: usize,
    /// Least-squares slope; `None` for fewer than two points.
    pub slope: Option<f64>,
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeReport<T = f64> {
    pub samples: Vec<UMinSample<T>>,
    pub segments: Vec<SlopeSegment>,
    pub max_deviation: Option<f64>,
    pub insufficient_data: bool,
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Samples `u_min` at `n_samples` evenly spaced `β`, splits the graph at
/// split-flagged samples and at changes of the component count, and fits
/// a slope per piece.
pub fn umin_slope_check<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    q: Interval<T>,
    beta_lo: T,
    beta_hi: T,
    n_samples: usize,
    tol: T,
    opts: &SolverOptions<T>,
) -> Result<SlopeReport<T>, SafeSetError> {
    if !(beta_lo > T::zero() && beta_hi >= beta_lo) {
        return Err(SafeSetError::InvalidParams(
            "need 0 < beta_lo <= beta_hi".into(),
        ));
    }
    let betas: Vec<T> = if n_samples <= 1 {
        vec![beta_lo]
    } else {
        let step = (beta_hi - beta_lo) / T::lit((n_samples - 1) as f64);
        (0..n_samples)
            .map(|k| {
                if k == n_samples - 1 {
                    beta_hi
                } else {
                    beta_lo + step * T::lit(k as f64)
                }
            })
            .collect()
    };
    let samples = betas
        .par_iter()
        .map(|&b| {
            let m = u_min(f, q, b, tol, opts)?;
            let (n_components, split) = match m.u_min {
                Some(u) => {
                    let s = solve_at(f, q, u, b, opts)?.safe_set;
                    let split = !check_b2(&s, u, T::lit(GAP_TOL)).is_empty();
                    (s.num_components(), split)
                }
                None => (0, false),
            };
            Ok(UMinSample {
                beta: b,
                u_min: m.u_min,
                n_components,
                split,
            })
        })
        .collect::<Result<Vec<_>, SafeSetError>>()?;

    let mut segments = Vec::new();
    let mut current: Vec<&UMinSample<T>> = Vec::new();
    let mut flush = |seg: &mut Vec<&UMinSample<T>>| {
        if seg.is_empty() {
            return;
        }
        let xs: Vec<f64> = seg.iter().map(|s| s.beta.as_f64()).collect();
        let ys: Vec<f64> = seg.iter().map(|s| s.u_min.unwrap().as_f64()).collect();
        let slope = ls_slope(&xs, &ys);
        segments.push(SlopeSegment {
            beta_lo: xs[0],
            beta_hi: xs[xs.len() - 1],
            n_points: xs.len(),
            slope,
            deviation: slope.map(|s| (s - 1.0).abs()),
        });
        seg.clear();
    };
    for s in &samples {
        if s.u_min.is_none() || s.split {
            flush(&mut current);
            continue;
        }
        if current
            .last()
            .is_some_and(|prev| prev.n_components != s.n_components)
        {
            flush(&mut current);
        }
        current.push(s);
    }
    flush(&mut current);

    let max_deviation = segments
        .iter()
        .filter_map(|s| s.deviation)
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
    Ok(SlopeReport {
        insufficient_data: max_deviation.is_none(),
        samples,
        segments,
        max_deviation,
    })
}
