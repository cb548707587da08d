//! Maximal safe sets by the sculpting iteration.
//!
//! A set `S ⊆ Q` is safe when `f(S) + β ⊆ S + U`: from any point of `S`,
//! whatever disturbance of size at most `β` arrives, a control of size at
//! most `U` brings the state back into `S`. The maximal safe set is the
//! largest fixed point of
//!
//! ```text
//! S ↦ S ∩ f⁻¹( erode( dilate(S, U), β ) )
//! ```
//!
//! below `Q`, reached by iterating from `S₀ = Q`.

mod oracle;

pub use oracle::{brute_force_safe_grid, GridMask};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bifurcation::boundary::BoundarySystem;
use crate::interval_set::{Interval, IntervalSet, SetError};
use crate::map_model::{MapError, PiecewiseLinearMap};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SafeSetError {
    #[error("map is not expanding; pass the non-expanding override to proceed")]
    NonExpanding,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("target [{lo}, {hi}] is not inside the map domain")]
    TargetOutsideDomain { lo: f64, hi: f64 },
    #[error("operation requires a nonempty safe set")]
    EmptySet,
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Control bound `U`, disturbance bound `β` and target interval `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams<T = f64> {
    pub u_bound: T,
    pub beta: T,
    pub target: Interval<T>,
}

impl<T: Scalar> ControlParams<T> {
    pub fn new(u_bound: T, beta: T, q_lo: T, q_hi: T) -> Result<Self, SafeSetError> {
        if !(u_bound > T::zero() && u_bound.is_finite()) {
            return Err(SafeSetError::InvalidParams(format!(
                "control bound must be positive, got {u_bound}"
            )));
        }
        if !(beta > T::zero() && beta.is_finite()) {
            return Err(SafeSetError::InvalidParams(format!(
                "disturbance bound must be positive, got {beta}"
            )));
        }
        if !(q_lo < q_hi) {
            return Err(SafeSetError::InvalidParams(format!(
                "target must be a non-degenerate interval, got [{q_lo}, {q_hi}]"
            )));
        }
        let target = Interval::new(q_lo, q_hi)?;
        Ok(Self {
            u_bound,
            beta,
            target,
        })
    }

    /// Same target, different bounds.
    pub fn with_bounds(&self, u_bound: T, beta: T) -> Result<Self, SafeSetError> {
        Self::new(u_bound, beta, self.target.lo(), self.target.hi())
    }

    pub fn target_set(&self) -> IntervalSet<T> {
        IntervalSet::from_interval(self.target)
    }

    pub fn regime(&self) -> Regime {
        if self.u_bound < self.beta {
            Regime::PartialControl
        } else {
            Regime::OutsideRegime
        }
    }
}

/// Whether the control bound is weaker than the disturbance bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    PartialControl,
    OutsideRegime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T = f64> {
    /// Stop once consecutive iterates are within this Hausdorff distance.
    pub tol: T,
    pub max_iter: usize,
    pub allow_non_expanding: bool,
    /// Re-solve boundary equations after convergence.
    pub polish: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::default_tol(),
            max_iter: 100_000,
            allow_non_expanding: false,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeSetResult<T = f64> {
    pub safe_set: IntervalSet<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Hausdorff distance between the last two iterates.
    pub residual: T,
    /// Residual of the maximality identity; `None` for an empty set.
    pub maximality_residual: Option<T>,
    pub polished: bool,
    /// Components of width at most `merge_eps`, collapsed to exact points.
    pub point_components: Vec<usize>,
    pub regime: Regime,
}

/// Outcome of checking `f(S) + β ⊆ S + U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyReport<T = f64> {
    pub safe: bool,
    /// Largest distance from a point of `f(S) + β` to `S + U`.
    pub worst_violation: T,
    /// Where that distance is attained.
    pub worst_point: Option<T>,
}

fn check_map<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    p: &ControlParams<T>,
    allow_non_expanding: bool,
) -> Result<(), SafeSetError> {
    if !f.is_expanding() && !allow_non_expanding {
        return Err(SafeSetError::NonExpanding);
    }
    let dom = f.domain();
    if p.target.lo() < dom.lo() || p.target.hi() > dom.hi() {
        return Err(SafeSetError::TargetOutsideDomain {
            lo: p.target.lo().as_f64(),
            hi: p.target.hi().as_f64(),
        });
    }
    Ok(())
}

/// One sculpting step: `S ∩ f⁻¹(erode(dilate(S, U), β))`.
pub fn sculpt_step<T: Scalar>(
    s: &IntervalSet<T>,
    f: &PiecewiseLinearMap<T>,
    p: &ControlParams<T>,
    allow_non_expanding: bool,
) -> Result<IntervalSet<T>, SafeSetError> {
    check_map(f, p, allow_non_expanding)?;
    if s.is_empty() {
        return Ok(IntervalSet::empty());
    }
    let landing = s.dilate(p.u_bound)?.erode(p.beta)?;
    Ok(s.intersect(&f.preimage_of(&landing)))
}

pub fn maximal_safe_set<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    p: &ControlParams<T>,
    opts: &SolverOptions<T>,
) -> Result<SafeSetResult<T>, SafeSetError> {
    if !(opts.tol > T::zero()) || opts.max_iter == 0 {
        return Err(SafeSetError::InvalidParams(
            "tolerance must be positive and max_iter at least 1".into(),
        ));
    }
    check_map(f, p, opts.allow_non_expanding)?;

    let mut s = p.target_set();
    let mut residual = T::infinity();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = sculpt_step(&s, f, p, true)?;
        if next.is_empty() {
            s = next;
            residual = T::zero();
            converged = true;
            break;
        }
        residual = s.hausdorff_distance(&next)?;
        s = next;
        if residual <= opts.tol {
            converged = true;
            break;
        }
    }

    let mut polished = false;
    if converged && opts.polish && !s.is_empty() {
        if let Some(better) = polish(f, p, &s, opts.tol) {
            s = better;
            polished = true;
        }
    }

    let (s, point_components) = collapse_points(s);
    let maximality_residual = if s.is_empty() {
        None
    } else {
        Some(verify_maximality(&s, f, p)?)
    };
    Ok(SafeSetResult {
        safe_set: s,
        iterations,
        converged,
        residual,
        maximality_residual,
        polished,
        point_components,
        regime: p.regime(),
    })
}

/// Replace iterate endpoints by the exact solution of the boundary
/// equations when the structure is unambiguous and the result stays safe.
fn polish<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    p: &ControlParams<T>,
    s: &IntervalSet<T>,
    tol: T,
) -> Option<IntervalSet<T>> {
    let classify_tol = (tol * T::lit(1e3)).max(T::lit(1e-9));
    let sys = BoundarySystem::build(f, s, p, classify_tol).ok()?;
    let solved = sys.solve(f, p.u_bound, sys.points()).ok()?;
    let moved = sys
        .points()
        .iter()
        .zip(&solved)
        .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
    if moved > classify_tol {
        return None;
    }
    let candidate = sys.to_set(&solved).ok()?;
    if candidate.num_components() != s.num_components() {
        return None;
    }
    let before = verify_safe(s, f, p, T::zero()).ok()?.worst_violation;
    let after = verify_safe(&candidate, f, p, T::zero()).ok()?.worst_violation;
    (after <= before.max(T::merge_eps())).then_some(candidate)
}

fn collapse_points<T: Scalar>(s: IntervalSet<T>) -> (IntervalSet<T>, Vec<usize>) {
    let eps = T::merge_eps();
    let mut points = Vec::new();
    let ivs: Vec<Interval<T>> = s
        .components()
        .iter()
        .enumerate()
        .map(|(k, iv)| {
            if iv.width() <= eps {
                points.push(k);
                Interval::raw(iv.midpoint(), iv.midpoint())
            } else {
                *iv
            }
        })
        .collect();
    if points.is_empty() {
        (s, points)
    } else {
        (IntervalSet::from_intervals(ivs), points)
    }
}

/// Checks `f(S) + β ⊆ S + U` up to `tol` and reports the worst offender.
pub fn verify_safe<T: Scalar>(
    s: &IntervalSet<T>,
    f: &PiecewiseLinearMap<T>,
    p: &ControlParams<T>,
    tol: T,
) -> Result<SafetyReport<T>, SafeSetError> {
    if s.is_empty() {
        return Ok(SafetyReport {
            safe: true,
            worst_violation: T::zero(),
            worst_point: None,
        });
    }
    let reach = f.image_of(s)?.dilate(p.beta)?;
    let cover = s.dilate(p.u_bound)?;
    let (point, dist) = reach
        .farthest_from(&cover)
        .expect("dilated nonempty set is nonempty");
    Ok(SafetyReport {
        safe: dist <= tol,
        worst_violation: dist,
        worst_point: Some(point),
    })
}

/// Hausdorff distance between `f(S) + β` and `[f(Q) + β] ∩ [S + U]`.
/// Zero (up to roundoff) for the maximal safe set.
pub fn verify_maximality<T: Scalar>(
    s: &IntervalSet<T>,
    f: &PiecewiseLinearMap<T>,
    p: &ControlParams<T>,
) -> Result<T, SafeSetError> {
    if s.is_empty() {
        return Err(SafeSetError::EmptySet);
    }
    let lhs = f.image_of(s)?.dilate(p.beta)?;
    let rhs = f
        .image_of(&p.target_set())?
        .dilate(p.beta)?
        .intersect(&s.dilate(p.u_bound)?);
    if rhs.is_empty() {
        return Ok(T::infinity());
    }
    Ok(lhs.hausdorff_distance(&rhs)?)
}
