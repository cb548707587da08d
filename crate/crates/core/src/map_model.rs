//! Continuous piecewise-linear maps of an interval into the real line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval_set::{Interval, IntervalSet};
use crate::scalar::Scalar;

/// Name under which [`PiecewiseLinearMap::asymmetric_tent`] is registered.
pub const ASYMMETRIC_TENT: &str = "asymmetric-tent";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("a map needs at least two breakpoints, got {0}")]
    TooFewBreakpoints(usize),
    #[error("{breakpoints} breakpoints but {values} values")]
    LengthMismatch { breakpoints: usize, values: usize },
    #[error("breakpoints must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("map definition contains a non-finite number")]
    NonFinite,
    #[error("x = {x} lies outside the domain [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },
    #[error("map is not differentiable at breakpoint {0}")]
    AtBreakpoint(f64),
    #[error("unknown builtin map {0:?}")]
    UnknownBuiltin(String),
    #[error("invalid map file: {0}")]
    Parse(String),
}

/// On-disk form: `{"breakpoints": [...], "values": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapDefinition<T = f64> {
    pub breakpoints: Vec<T>,
    pub values: Vec<T>,
}

/// A continuous map given by its values at strictly increasing breakpoints,
/// linear in between. The domain is exactly `[x_0, x_m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearMap<T = f64> {
    breakpoints: Vec<T>,
    values: Vec<T>,
    expanding: bool,
}

impl<T: Scalar> PiecewiseLinearMap<T> {
    pub fn new(breakpoints: Vec<T>, values: Vec<T>) -> Result<Self, MapError> {
        if breakpoints.len() != values.len() {
            return Err(MapError::LengthMismatch {
                breakpoints: breakpoints.len(),
                values: values.len(),
            });
        }
        if breakpoints.len() < 2 {
            return Err(MapError::TooFewBreakpoints(breakpoints.len()));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(MapError::NonFinite);
        }
        if let Some(k) = breakpoints.windows(2).position(|w| w[0] >= w[1]) {
            return Err(MapError::NotIncreasing(k + 1));
        }
        let mut map = Self {
            breakpoints,
            values,
            expanding: false,
        };
        map.expanding = (0..map.num_pieces()).all(|k| map.slope(k).abs() > T::one());
        Ok(map)
    }

    /// `1.3x` on `[0, 0.7]`, `0.91 - 3(x - 0.7)` on `[0.7, 1]`.
    pub fn asymmetric_tent() -> Self {
        Self::new(
            vec![T::zero(), T::lit(0.7), T::one()],
            vec![T::zero(), T::lit(0.91), T::lit(0.01)],
        )
        .expect("builtin map is valid")
    }

    pub fn builtin(name: &str) -> Result<Self, MapError> {
        match name {
            ASYMMETRIC_TENT => Ok(Self::asymmetric_tent()),
            other => Err(MapError::UnknownBuiltin(other.to_string())),
        }
    }

    pub fn from_definition(def: MapDefinition<T>) -> Result<Self, MapError> {
        Self::new(def.breakpoints, def.values)
    }

    pub fn definition(&self) -> MapDefinition<T> {
        MapDefinition {
            breakpoints: self.breakpoints.clone(),
            values: self.values.clone(),
        }
    }

    #[inline]
    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `|slope| > 1` on every piece.
    #[inline]
    pub fn is_expanding(&self) -> bool {
        self.expanding
    }

    #[inline]
    pub fn num_pieces(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn domain(&self) -> Interval<T> {
        Interval::raw(self.breakpoints[0], self.breakpoints[self.num_pieces()])
    }

    #[inline]
    pub fn slope(&self, piece: usize) -> T {
        (self.values[piece + 1] - self.values[piece])
            / (self.breakpoints[piece + 1] - self.breakpoints[piece])
    }

    fn check_domain(&self, x: T) -> Result<(), MapError> {
        let d = self.domain();
        if d.contains(x) {
            Ok(())
        } else {
            Err(MapError::OutsideDomain {
                x: x.as_f64(),
                lo: d.lo().as_f64(),
                hi: d.hi().as_f64(),
            })
        }
    }

    /// Index of a piece containing `x` (the left piece at interior
    /// breakpoints). Assumes `x` is in the domain.
    pub fn piece_of(&self, x: T) -> usize {
        let k = self.breakpoints.partition_point(|&b| b < x);
        k.saturating_sub(1).min(self.num_pieces() - 1)
    }

    /// Evaluate on a given piece's linear formula (also valid slightly
    /// outside the piece, which the boundary solver relies on).
    #[inline]
    pub fn eval_on_piece(&self, piece: usize, x: T) -> T {
        let (x0, x1) = (self.breakpoints[piece], self.breakpoints[piece + 1]);
        let (v0, v1) = (self.values[piece], self.values[piece + 1]);
        if x == x0 {
            v0
        } else if x == x1 {
            v1
        } else {
            v0 + (x - x0) * (v1 - v0) / (x1 - x0)
        }
    }

    pub fn eval(&self, x: T) -> Result<T, MapError> {
        self.check_domain(x)?;
        Ok(self.eval_on_piece(self.piece_of(x), x))
    }

    /// Is `x` within `tol` of an interior breakpoint where the slope
    /// actually changes?
    pub fn is_kink(&self, x: T, tol: T) -> bool {
        (1..self.num_pieces()).any(|k| {
            (x - self.breakpoints[k]).abs() <= tol && self.slope(k - 1) != self.slope(k)
        })
    }

    /// Slope of the piece containing `x`. Domain endpoints use their
    /// one-sided slope; interior kinks are an error.
    pub fn derivative_at(&self, x: T) -> Result<T, MapError> {
        self.check_domain(x)?;
        if self.is_kink(x, T::merge_eps()) {
            return Err(MapError::AtBreakpoint(x.as_f64()));
        }
        Ok(self.slope(self.piece_of(x)))
    }

    /// Exact image `f(X)`; `X` must lie inside the domain.
    pub fn image_of(&self, set: &IntervalSet<T>) -> Result<IntervalSet<T>, MapError> {
        let dom = self.domain();
        if let Some(h) = set.hull() {
            self.check_domain(h.lo())?;
            self.check_domain(h.hi())?;
        } else {
            return Ok(IntervalSet::empty());
        }
        let mut out = Vec::new();
        for iv in set.components() {
            let first = self.piece_of(iv.lo().max(dom.lo()));
            for k in first..self.num_pieces() {
                let (x0, x1) = (self.breakpoints[k], self.breakpoints[k + 1]);
                if x0 > iv.hi() {
                    break;
                }
                let a = iv.lo().max(x0);
                let b = iv.hi().min(x1);
                if a > b {
                    continue;
                }
                let (fa, fb) = (self.eval_on_piece(k, a), self.eval_on_piece(k, b));
                out.push(Interval::raw(fa.min(fb), fa.max(fb)));
            }
        }
        Ok(IntervalSet::from_intervals(out))
    }

    /// Exact preimage `f^{-1}(Y)` intersected with the domain, solved
    /// independently on each linear piece.
    pub fn preimage_of(&self, set: &IntervalSet<T>) -> IntervalSet<T> {
        let mut out = Vec::new();
        for k in 0..self.num_pieces() {
            let (x0, x1) = (self.breakpoints[k], self.breakpoints[k + 1]);
            let (v0, v1) = (self.values[k], self.values[k + 1]);
            let (vlo, vhi) = (v0.min(v1), v0.max(v1));
            let start = set.components().partition_point(|iv| iv.hi() < vlo);
            for iv in &set.components()[start..] {
                if iv.lo() > vhi {
                    break;
                }
                if v0 == v1 {
                    out.push(Interval::raw(x0, x1));
                    break;
                }
                let c = iv.lo().max(vlo);
                let d = iv.hi().min(vhi);
                let inv = |y: T| {
                    if y == v0 {
                        x0
                    } else if y == v1 {
                        x1
                    } else {
                        (x0 + (y - v0) * (x1 - x0) / (v1 - v0)).max(x0).min(x1)
                    }
                };
                let (p, q) = (inv(c), inv(d));
                out.push(Interval::raw(p.min(q), p.max(q)));
            }
        }
        IntervalSet::from_intervals(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tent() -> PiecewiseLinearMap {
        PiecewiseLinearMap::asymmetric_tent()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn tent_values() {
        let f = tent();
        assert_eq!(f.eval(0.7), Ok(0.91));
        assert_eq!(f.eval(0.0), Ok(0.0));
        assert_eq!(f.eval(1.0), Ok(0.01));
        assert!(close(f.eval(0.5).unwrap(), 0.65, 1e-15));
        assert!(close(f.eval(0.91).unwrap(), 0.28, 1e-15));
        assert!(f.is_expanding());
        assert!(matches!(f.eval(1.2), Err(MapError::OutsideDomain { .. })));
        assert!(matches!(f.eval(-1e-9), Err(MapError::OutsideDomain { .. })));
    }

    #[test]
    fn derivatives() {
        let f = tent();
        assert!(close(f.derivative_at(0.3).unwrap(), 1.3, 1e-14));
        assert!(close(f.derivative_at(0.8).unwrap(), -3.0, 1e-14));
        assert_eq!(f.derivative_at(0.7), Err(MapError::AtBreakpoint(0.7)));
        assert!(close(f.derivative_at(1.0).unwrap(), -3.0, 1e-14));
    }

    #[test]
    fn construction_errors() {
        type M = PiecewiseLinearMap<f64>;
        assert_eq!(M::new(vec![0.0], vec![0.0]), Err(MapError::TooFewBreakpoints(1)));
        assert!(matches!(
            M::new(vec![0.0, 1.0], vec![0.0]),
            Err(MapError::LengthMismatch { .. })
        ));
        assert_eq!(
            M::new(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]),
            Err(MapError::NotIncreasing(2))
        );
        assert_eq!(M::new(vec![0.0, f64::NAN], vec![0.0, 1.0]), Err(MapError::NonFinite));
        let slow = M::new(vec![0.0, 1.0], vec![0.0, 0.5]).unwrap();
        assert!(!slow.is_expanding());
        assert!(matches!(M::builtin("logistic"), Err(MapError::UnknownBuiltin(_))));
    }

    #[test]
    fn image_of_sets() {
        let f = tent();
        let img = f.image_of(&IntervalSet::single(0.5, 1.0).unwrap()).unwrap();
        let p = img.to_pairs();
        assert_eq!(p.len(), 1);
        assert!(close(p[0].0, 0.01, 1e-15) && close(p[0].1, 0.91, 1e-15));

        let i3 = IntervalSet::single(0.8019, 0.8084).unwrap();
        let p = f.image_of(&i3).unwrap().to_pairs();
        assert!(close(p[0].0, 0.5848, 1e-12) && close(p[0].1, 0.6043, 1e-12));

        assert!(f.image_of(&IntervalSet::empty()).unwrap().is_empty());
        assert!(f.image_of(&IntervalSet::single(0.9, 1.1).unwrap()).is_err());
    }

    #[test]
    fn preimage_of_sets() {
        let f = tent();
        let peak = f.preimage_of(&IntervalSet::single(0.91, 1.0).unwrap());
        assert_eq!(peak.to_pairs(), vec![(0.7, 0.7)]);

        let two = f.preimage_of(&IntervalSet::single(0.65, 0.65).unwrap()).to_pairs();
        assert_eq!(two.len(), 2);
        assert!(close(two[0].0, 0.5, 1e-15));
        // 0.91 - 3(x - 0.7) = 0.65
        assert!(close(two[1].0, 0.7 + 0.26 / 3.0, 1e-15));

        assert!(f.preimage_of(&IntervalSet::single(2.0, 3.0).unwrap()).is_empty());
    }

    #[test]
    fn flat_piece_preimage_is_whole_piece() {
        let f = PiecewiseLinearMap::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0]).unwrap();
        let pre = f.preimage_of(&IntervalSet::single(0.9, 1.5).unwrap());
        assert_eq!(pre.to_pairs(), vec![(0.9, 2.0)]);
    }

    #[test]
    fn definition_round_trip() {
        let def: MapDefinition =
            serde_json::from_str(r#"{"breakpoints":[0,0.7,1],"values":[0,0.91,0.01]}"#).unwrap();
        assert_eq!(PiecewiseLinearMap::from_definition(def).unwrap(), tent());
    }
}
