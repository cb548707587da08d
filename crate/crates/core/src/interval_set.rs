//! Compact subsets of the real line stored as finite unions of disjoint
//! closed intervals.
//!
//! Every [`IntervalSet`] is kept in canonical form: components are sorted,
//! and consecutive components are separated by a gap strictly larger than
//! the scalar type's `merge_eps`. Inputs that overlap, abut, or sit closer
//! than `merge_eps` are merged during normalization. Degenerate (single
//! point) components are legal and never dropped.

use std::cmp::Ordering;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SetError {
    #[error("interval lower end {lo} exceeds upper end {hi}")]
    Inverted { lo: f64, hi: f64 },
    #[error("interval endpoint is not finite")]
    NonFinite,
    #[error("radius must be non-negative, got {0}")]
    NegativeRadius(f64),
    #[error("operation requires a nonempty set")]
    Empty,
}

/// A closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T = f64> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self, SetError> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(SetError::NonFinite);
        }
        if lo > hi {
            return Err(SetError::Inverted {
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: T) -> Result<Self, SetError> {
        Self::new(x, x)
    }

    #[inline]
    pub fn lo(&self) -> T {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> T {
        self.hi
    }

    #[inline]
    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    #[inline]
    pub fn midpoint(&self) -> T {
        self.lo + (self.hi - self.lo) / T::two()
    }

    #[inline]
    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Distance from `x` to the interval (zero inside).
    #[inline]
    pub fn distance_to(&self, x: T) -> T {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            T::zero()
        }
    }

    // Endpoints are produced by arithmetic on valid intervals; callers
    // guarantee ordering.
    #[inline]
    pub(crate) fn raw(lo: T, hi: T) -> Self {
        debug_assert!(lo <= hi, "raw interval {lo:?} > {hi:?}");
        Self { lo, hi }
    }
}

/// Canonical finite union of disjoint closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet<T = f64> {
    intervals: Vec<Interval<T>>,
}

impl<T: Scalar> Default for IntervalSet<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T: Scalar> IntervalSet<T> {
    pub fn empty() -> Self {
        Self {
            intervals: Vec::new(),
        }
    }

    pub fn from_interval(iv: Interval<T>) -> Self {
        Self {
            intervals: vec![iv],
        }
    }

    /// Single-component set `[lo, hi]`.
    pub fn single(lo: T, hi: T) -> Result<Self, SetError> {
        Interval::new(lo, hi).map(Self::from_interval)
    }

    /// Builds a canonical set from arbitrary `(lo, hi)` pairs, merging
    /// components separated by at most `merge_eps`.
    pub fn normalize(raw: &[(T, T)], merge_eps: T) -> Result<Self, SetError> {
        let ivs = raw
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::merge(ivs, merge_eps))
    }

    /// [`IntervalSet::normalize`] with the default `merge_eps`.
    pub fn from_pairs(raw: &[(T, T)]) -> Result<Self, SetError> {
        Self::normalize(raw, T::merge_eps())
    }

    pub fn from_intervals(ivs: Vec<Interval<T>>) -> Self {
        Self::merge(ivs, T::merge_eps())
    }

    fn merge(mut ivs: Vec<Interval<T>>, merge_eps: T) -> Self {
        ivs.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(Ordering::Equal));
        let mut out: Vec<Interval<T>> = Vec::with_capacity(ivs.len());
        for iv in ivs {
            match out.last_mut() {
                Some(last) if iv.lo - last.hi <= merge_eps => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => out.push(iv),
            }
        }
        let set = Self { intervals: out };
        debug_assert!(set.is_canonical_with(merge_eps));
        set
    }

    /// Checks the sorted/separated invariant against the default `merge_eps`.
    pub fn is_canonical(&self) -> bool {
        self.is_canonical_with(T::merge_eps())
    }

    fn is_canonical_with(&self, merge_eps: T) -> bool {
        self.intervals.iter().all(|iv| iv.lo <= iv.hi && iv.lo.is_finite() && iv.hi.is_finite())
            && self
                .intervals
                .windows(2)
                .all(|w| w[1].lo - w[0].hi > merge_eps)
    }

    #[inline]
    pub fn components(&self) -> &[Interval<T>] {
        &self.intervals
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    #[inline]
    pub fn num_components(&self) -> usize {
        self.intervals.len()
    }

    pub fn to_pairs(&self) -> Vec<(T, T)> {
        self.intervals.iter().map(|iv| (iv.lo, iv.hi)).collect()
    }

    /// Smallest interval containing the set.
    pub fn hull(&self) -> Option<Interval<T>> {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(a), Some(b)) => Some(Interval::raw(a.lo, b.hi)),
            _ => None,
        }
    }

    /// Sum of component lengths.
    pub fn measure(&self) -> T {
        self.intervals.iter().fold(T::zero(), |m, c| m + c.width())
    }

    /// Gaps between adjacent components, left to right.
    pub fn gaps(&self) -> impl Iterator<Item = T> + '_ {
        self.intervals.windows(2).map(|w| w[1].lo - w[0].hi)
    }

    pub fn min_gap(&self) -> Option<T> {
        self.gaps().fold(None, |acc, g| match acc {
            Some(m) if m <= g => Some(m),
            _ => Some(g),
        })
    }

    pub fn contains(&self, x: T) -> bool {
        self.locate(x).is_ok()
    }

    /// `Ok(k)` if component `k` contains `x`, otherwise `Err(k)` where `k`
    /// is the number of components lying entirely left of `x`.
    fn locate(&self, x: T) -> Result<usize, usize> {
        let k = self.intervals.partition_point(|iv| iv.hi < x);
        match self.intervals.get(k) {
            Some(iv) if iv.lo <= x => Ok(k),
            _ => Err(k),
        }
    }

    /// Index of the component containing `x`, if any.
    pub fn component_containing(&self, x: T) -> Option<usize> {
        self.locate(x).ok()
    }

    /// Distance from `x` to the set; `+inf` for the empty set.
    pub fn point_distance(&self, x: T) -> T {
        match self.locate(x) {
            Ok(_) => T::zero(),
            Err(k) => {
                let left = k
                    .checked_sub(1)
                    .map(|j| x - self.intervals[j].hi)
                    .unwrap_or_else(T::infinity);
                let right = self
                    .intervals
                    .get(k)
                    .map(|iv| iv.lo - x)
                    .unwrap_or_else(T::infinity);
                left.min(right)
            }
        }
    }

    /// Closest element of the set to `x`. At the exact midpoint of a gap
    /// the lower candidate wins.
    pub fn nearest_point(&self, x: T) -> Result<T, SetError> {
        if self.is_empty() {
            return Err(SetError::Empty);
        }
        Ok(match self.locate(x) {
            Ok(_) => x,
            Err(k) => {
                let left = k.checked_sub(1).map(|j| self.intervals[j].hi);
                let right = self.intervals.get(k).map(|iv| iv.lo);
                match (left, right) {
                    (Some(l), Some(r)) => {
                        if x - l <= r - x {
                            l
                        } else {
                            r
                        }
                    }
                    (Some(l), None) => l,
                    (None, Some(r)) => r,
                    (None, None) => unreachable!("nonempty set"),
                }
            }
        })
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all = Vec::with_capacity(self.intervals.len() + other.intervals.len());
        all.extend_from_slice(&self.intervals);
        all.extend_from_slice(&other.intervals);
        Self::from_intervals(all)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let (a, b) = (&self.intervals, &other.intervals);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let lo = a[i].lo.max(b[j].lo);
            let hi = a[i].hi.min(b[j].hi);
            if lo <= hi {
                out.push(Interval::raw(lo, hi));
            }
            if a[i].hi < b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::from_intervals(out)
    }

    /// `X + u`: every point within distance `u` of the set.
    pub fn dilate(&self, u: T) -> Result<Self, SetError> {
        check_radius(u)?;
        Ok(Self::from_intervals(
            self.intervals
                .iter()
                .map(|iv| Interval::raw(iv.lo - u, iv.hi + u))
                .collect(),
        ))
    }

    /// Points whose closed `u`-ball lies inside the set. Components
    /// narrower than `2u` vanish; width exactly `2u` leaves a point.
    pub fn erode(&self, u: T) -> Result<Self, SetError> {
        check_radius(u)?;
        Ok(Self::from_intervals(
            self.intervals
                .iter()
                .filter_map(|iv| {
                    let (lo, hi) = (iv.lo + u, iv.hi - u);
                    (lo <= hi).then(|| Interval::raw(lo, hi))
                })
                .collect(),
        ))
    }

    /// Shift every point by `t`.
    pub fn translate(&self, t: T) -> Self {
        Self::from_intervals(
            self.intervals
                .iter()
                .map(|iv| Interval::raw(iv.lo + t, iv.hi + t))
                .collect(),
        )
    }

    /// Complement taken inside `bounds`, as a closed set (the closure of
    /// `bounds \ X`).
    pub fn complement_within(&self, bounds: Interval<T>) -> Self {
        let mut out = Vec::new();
        let mut cursor = bounds.lo;
        for iv in &self.intervals {
            if iv.hi < bounds.lo {
                continue;
            }
            if iv.lo > bounds.hi {
                break;
            }
            if iv.lo > cursor {
                out.push(Interval::raw(cursor, iv.lo));
            }
            cursor = cursor.max(iv.hi);
        }
        if cursor < bounds.hi {
            out.push(Interval::raw(cursor, bounds.hi));
        }
        Self::from_intervals(out)
    }

    /// `sup_{x in self} d(x, other)`; `+inf` when `other` is empty and
    /// `self` is not.
    pub fn directed_distance(&self, other: &Self) -> T {
        if self.is_empty() {
            return T::zero();
        }
        if other.is_empty() {
            return T::infinity();
        }
        // d(., other) is piecewise linear on each component of self with
        // maxima at component endpoints or at midpoints of gaps of other.
        let mut worst = T::zero();
        for iv in &self.intervals {
            worst = worst
                .max(other.point_distance(iv.lo))
                .max(other.point_distance(iv.hi));
        }
        for w in other.intervals.windows(2) {
            let mid = w[0].hi + (w[1].lo - w[0].hi) / T::two();
            if self.contains(mid) {
                worst = worst.max(other.point_distance(mid));
            }
        }
        worst
    }

    /// Point of `self` farthest from `other` together with that distance.
    pub fn farthest_from(&self, other: &Self) -> Option<(T, T)> {
        let mut best: Option<(T, T)> = None;
        let mut consider = |x: T| {
            let d = other.point_distance(x);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((x, d));
            }
        };
        for iv in &self.intervals {
            consider(iv.lo);
            consider(iv.hi);
        }
        for w in other.intervals.windows(2) {
            let mid = w[0].hi + (w[1].lo - w[0].hi) / T::two();
            if self.contains(mid) {
                consider(mid);
            }
        }
        best
    }

    pub fn hausdorff_distance(&self, other: &Self) -> Result<T, SetError> {
        if self.is_empty() || other.is_empty() {
            return Err(SetError::Empty);
        }
        Ok(self
            .directed_distance(other)
            .max(other.directed_distance(self)))
    }

    /// `self ⊆ other` up to `slack`.
    pub fn is_subset_of(&self, other: &Self, slack: T) -> bool {
        self.directed_distance(other) <= slack
    }
}

fn check_radius<T: Scalar>(u: T) -> Result<(), SetError> {
    if u.is_nan() || u < T::zero() {
        Err(SetError::NegativeRadius(u.as_f64()))
    } else {
        Ok(())
    }
}

impl<T: Scalar> Serialize for IntervalSet<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[T; 2]> = self.intervals.iter().map(|iv| [iv.lo, iv.hi]).collect();
        pairs.serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for IntervalSet<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let pairs: Vec<[T; 2]> = Vec::deserialize(deserializer)?;
        let raw: Vec<(T, T)> = pairs.into_iter().map(|[lo, hi]| (lo, hi)).collect();
        Self::from_pairs(&raw).map_err(D::Error::custom)
    }
}
