//! Continuation of safe-set boundary points in `U` at fixed `β`.

use serde::Serialize;
use thiserror::Error;

use super::boundary::{label, BoundaryError, BoundarySystem};
use super::{localize_event, solve_at, BifurcationEvent, GAP_TOL, LOCALIZE_TOL, POINT_TOL};
use crate::interval_set::{Interval, IntervalSet};
use crate::map_model::PiecewiseLinearMap;
use crate::safeset::{verify_maximality, verify_safe, ControlParams, SafeSetError, SolverOptions};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("no safe set at the starting control bound {0}")]
    EmptyStart(f64),
    #[error(transparent)]
    Safe(#[from] SafeSetError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions<T = f64> {
    pub du: T,
    /// Recompute the set from scratch every this many continued steps.
    pub validate_every: usize,
    pub stop_at_first_event: bool,
    /// Matching tolerance when classifying boundary equations.
    pub classify_tol: T,
    pub solver: SolverOptions<T>,
}

impl<T: Scalar> Default for TraceOptions<T> {
    fn default() -> Self {
        Self {
            du: T::lit(1e-4),
            validate_every: 10,
            stop_at_first_event: false,
            classify_tol: T::lit(1e-9),
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleSource {
    /// Solved from the boundary equations.
    Continued,
    /// Recomputed from scratch after the continued set was rejected.
    Recomputed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSample<T = f64> {
    pub u: T,
    pub labels: Vec<String>,
    pub points: Vec<T>,
    pub source: SampleSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Validation<T = f64> {
    pub u: T,
    /// Hausdorff distance between continued and recomputed sets.
    pub mismatch: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord<T = f64> {
    pub beta: T,
    pub u_from: T,
    pub u_to: T,
    pub samples: Vec<TraceSample<T>>,
    pub events: Vec<BifurcationEvent<T>>,
    pub validations: Vec<Validation<T>>,
    /// Control bounds where the equation structure changed without a
    /// change in the component count.
    pub switches: Vec<T>,
    pub max_mismatch: Option<T>,
    /// Why the trace ended before `u_to`, if it did.
    pub stopped: Option<String>,
}

fn sample<T: Scalar>(u: T, x: &[T], source: SampleSource) -> TraceSample<T> {
    TraceSample {
        u,
        labels: (0..x.len()).map(label).collect(),
        points: x.to_vec(),
        source,
    }
}

/// Signs of `gap − 2U` for each gap.
fn gap_signs<T: Scalar>(x: &[T], u: T) -> Vec<bool> {
    (1..x.len() / 2)
        .map(|k| x[2 * k] - x[2 * k - 1] - T::two() * u > T::zero())
        .collect()
}

/// Accepts a continued endpoint vector when it is a valid, flag-free,
/// safe and maximal set with the same gap pattern as before.
fn acceptable<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    p: &ControlParams<T>,
    x: &[T],
    prev_signs: &[bool],
) -> Option<IntervalSet<T>> {
    let point_tol = T::lit(POINT_TOL);
    let gap_tol = T::lit(GAP_TOL);
    for k in 0..x.len() / 2 {
        if x[2 * k + 1] - x[2 * k] <= point_tol {
            return None;
        }
        if k > 0 && (x[2 * k] - x[2 * k - 1] - T::two() * p.u_bound).abs() <= gap_tol {
            return None;
        }
    }
    if gap_signs(x, p.u_bound) != prev_signs {
        return None;
    }
    if x.first()? < &p.target.lo() || x.last()? > &p.target.hi() {
        return None;
    }
    let s = IntervalSet::from_pairs(&x.chunks(2).map(|c| (c[0], c[1])).collect::<Vec<_>>()).ok()?;
    if s.num_components() * 2 != x.len() {
        return None;
    }
    if !verify_safe(&s, f, p, T::lit(1e-9)).ok()?.safe {
        return None;
    }
    (verify_maximality(&s, f, p).ok()? <= T::lit(1e-8)).then_some(s)
}

/// Steps `U` from `u_from` toward `u_to`, solving the boundary equations
/// with an Euler predictor and Newton corrector. A rejected step triggers
/// a recomputation; a changed component count is located by bisection
/// and reported as an event, after which tracing resumes from the
/// recomputed set.
pub fn trace_boundaries<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    q: Interval<T>,
    beta: T,
    u_from: T,
    u_to: T,
    opts: &TraceOptions<T>,
) -> Result<TraceRecord<T>, TraceError> {
    if !(opts.du > T::zero()) || opts.validate_every == 0 {
        return Err(SafeSetError::InvalidParams("du and validate_every must be positive".into()).into());
    }
    let params = |u: T| ControlParams::new(u, beta, q.lo(), q.hi());
    let start = solve_at(f, q, u_from, beta, &opts.solver)?.safe_set;
    if start.is_empty() {
        return Err(TraceError::EmptyStart(u_from.as_f64()));
    }
    let mut sys = Some(BoundarySystem::build(f, &start, &params(u_from)?, opts.classify_tol)?);
    let mut x: Vec<T> = start.components().iter().flat_map(|c| [c.lo(), c.hi()]).collect();
    let mut u = u_from;

    let mut rec = TraceRecord {
        beta,
        u_from,
        u_to,
        samples: vec![sample(u, &x, SampleSource::Recomputed)],
        events: Vec::new(),
        validations: Vec::new(),
        switches: Vec::new(),
        max_mismatch: None,
        stopped: None,
    };

    let span = (u_to - u_from).abs();
    let dir = if u_to >= u_from { T::one() } else { -T::one() };
    let steps = (span / opts.du - T::lit(1e-9)).ceil().as_f64() as usize;
    let mut continued = 0usize;
    for j in 1..=steps {
        let u_next = if j == steps {
            u_to
        } else {
            u_from + dir * opts.du * T::lit(j as f64)
        };
        let p = params(u_next)?;

        let candidate = sys.as_ref().and_then(|sys| {
            let dx = sys.derivative().ok()?;
            let pred: Vec<T> = x.iter().zip(&dx).map(|(a, d)| *a + *d * (u_next - u)).collect();
            let sol = sys.solve(f, u_next, &pred).ok()?;
            acceptable(f, &p, &sol, &gap_signs(&x, u)).map(|s| (sol, s))
        });

        if let Some((sol, set)) = candidate {
            x = sol;
            u = u_next;
            rec.samples.push(sample(u, &x, SampleSource::Continued));
            continued += 1;
            if continued.is_multiple_of(opts.validate_every) {
                let fresh = solve_at(f, q, u, beta, &opts.solver)?.safe_set;
                let mismatch = if fresh.is_empty() {
                    T::infinity()
                } else {
                    set.hausdorff_distance(&fresh).map_err(SafeSetError::from)?
                };
                rec.validations.push(Validation { u, mismatch });
            }
            continue;
        }

        let fresh = solve_at(f, q, u_next, beta, &opts.solver)?.safe_set;
        let before = x.len() / 2;
        if fresh.num_components() != before {
            let (lo, hi) = if u < u_next { (u, u_next) } else { (u_next, u) };
            let ev = localize_event(f, q, beta, lo, hi, T::lit(LOCALIZE_TOL), &opts.solver)?;
            rec.events.push(ev);
            if opts.stop_at_first_event {
                rec.stopped = Some("stopped at first event".into());
                break;
            }
        }
        u = u_next;
        if fresh.is_empty() {
            rec.samples.push(sample(u, &[], SampleSource::Recomputed));
            rec.stopped = Some("safe set vanished".into());
            break;
        }
        let rebuilt = BoundarySystem::build(f, &fresh, &p, opts.classify_tol).ok();
        if fresh.num_components() == before {
            let same = match (&sys, &rebuilt) {
                (Some(a), Some(b)) => a.same_structure(b),
                _ => false,
            };
            if !same {
                rec.switches.push(u);
            }
        }
        sys = rebuilt;
        x = fresh.components().iter().flat_map(|c| [c.lo(), c.hi()]).collect();
        rec.samples.push(sample(u, &x, SampleSource::Recomputed));
    }
    rec.max_mismatch = rec
        .validations
        .iter()
        .map(|v| v.mismatch)
        .fold(None, |m: Option<T>, d| Some(m.map_or(d, |m| m.max(d))));
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifurcation::BifurcationKind;

    #[test]
    fn short_bifurcation_free_trace_matches_recomputation() {
        let f = PiecewiseLinearMap::<f64>::asymmetric_tent();
        let q = Interval::new(0.5, 1.0).unwrap();
        let r = trace_boundaries(&f, q, 0.05, 0.04, 0.042, &TraceOptions::default()).unwrap();
        assert!(r.events.is_empty());
        assert_eq!(r.samples.len(), 21);
        assert!(r.samples[1..]
            .iter()
            .all(|s| s.source == SampleSource::Continued));
        assert_eq!(r.validations.len(), 2);
        assert!(r.max_mismatch.unwrap() <= 1e-8);
    }

    #[test]
    fn downward_trace_stops_at_vanishing_point() {
        let f = PiecewiseLinearMap::<f64>::asymmetric_tent();
        let q = Interval::new(0.5, 1.0).unwrap();
        let r = trace_boundaries(&f, q, 0.05, 0.037, 0.035, &TraceOptions::default()).unwrap();
        assert_eq!(r.events.len(), 1);
        let ev = &r.events[0];
        assert_eq!(ev.kind, BifurcationKind::VanishingPoint);
        assert!((ev.u_at - 0.0357391).abs() < 1e-6);
        assert_eq!(r.stopped.as_deref(), Some("safe set vanished"));
    }
}
