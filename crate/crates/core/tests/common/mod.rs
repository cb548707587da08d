//! Interval-set laws shared by the property suites and the acceptance run.
#![allow(dead_code)]

use partial_control::{Interval, IntervalSet};
use proptest::prelude::*;

pub type Raw = Vec<(f64, f64)>;

pub const EPS: f64 = 1e-12;

/// Up to six intervals with endpoints in `[0, 1.3]`.
pub fn raw_set(min: usize) -> impl Strategy<Value = Raw> {
    prop::collection::vec((0.0..1.0f64, 0.0..0.3f64), min..6)
        .prop_map(|v| v.into_iter().map(|(a, w)| (a, a + w)).collect())
}

pub fn set(raw: &Raw) -> IntervalSet {
    IntervalSet::from_pairs(raw).expect("generated pairs are valid")
}

/// Same components up to `tol` in every endpoint.
pub fn same(a: &IntervalSet, b: &IntervalSet, tol: f64) -> Result<(), String> {
    let (pa, pb) = (a.to_pairs(), b.to_pairs());
    if pa.len() != pb.len() {
        return Err(format!("{pa:?} vs {pb:?}"));
    }
    for (x, y) in pa.iter().zip(&pb) {
        if (x.0 - y.0).abs() > tol || (x.1 - y.1).abs() > tol {
            return Err(format!("{pa:?} vs {pb:?}"));
        }
    }
    Ok(())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn law_normalize_idempotent(raw: &Raw) -> Result<(), String> {
    let once = set(raw);
    ensure(once.is_canonical(), || format!("not canonical: {once:?}"))?;
    let twice = IntervalSet::from_pairs(&once.to_pairs()).map_err(|e| e.to_string())?;
    ensure(once == twice, || format!("{once:?} vs {twice:?}"))
}

pub fn law_dilate_semigroup(raw: &Raw, extra: &Raw, u: f64, v: f64) -> Result<(), String> {
    let x = set(raw);
    let step = x.dilate(u).unwrap().dilate(v).unwrap();
    same(&step, &x.dilate(u + v).unwrap(), 1e-12)?;
    let y = x.union(&set(extra));
    ensure(
        x.dilate(u).unwrap().is_subset_of(&y.dilate(u).unwrap(), 0.0),
        || "dilation not monotone".into(),
    )
}

pub fn law_adjunction(raw: &Raw, extra: &Raw, u: f64) -> Result<(), String> {
    let a = set(raw);
    let closed = a.dilate(u).unwrap().erode(u).unwrap();
    ensure(a.is_subset_of(&closed, EPS), || "A not inside its closing".into())?;
    let opened = a.erode(u).unwrap().dilate(u).unwrap();
    ensure(opened.is_subset_of(&a, EPS), || "opening escapes A".into())?;
    let b = a.dilate(u).unwrap().union(&set(extra));
    ensure(a.is_subset_of(&b.erode(u).unwrap(), EPS), || {
        "A + u inside B but A not inside B - u".into()
    })
}

/// `erode(dilate(X, U), δ) = dilate(X, U − δ)` when no gap is within `2δ`
/// of `2U`.
pub fn law_split_identity(raw: &Raw, u: f64, frac: f64) -> Result<(), String> {
    let x = set(raw);
    let margin = x
        .gaps()
        .map(|g| (g - 2.0 * u).abs())
        .fold(f64::INFINITY, f64::min);
    if margin < 1e-9 {
        return Ok(());
    }
    let delta = frac * (margin / 2.0).min(u);
    let lhs = x.dilate(u).unwrap().erode(delta).unwrap();
    same(&lhs, &x.dilate(u - delta).unwrap(), 1e-12)
}

/// A gap of exactly `2U` breaks the identity for every small `δ`.
pub fn law_split_identity_fails_at_gap(a: f64, w1: f64, u: f64, w2: f64, frac: f64) -> Result<(), String> {
    let b = a + w1;
    let x = IntervalSet::from_pairs(&[(a, b), (b + 2.0 * u, b + 2.0 * u + w2)]).unwrap();
    let delta = frac * u;
    let lhs = x.dilate(u).unwrap().erode(delta).unwrap();
    let rhs = x.dilate(u - delta).unwrap();
    ensure(lhs.num_components() == 1 && rhs.num_components() == 2, || {
        format!("{lhs:?} vs {rhs:?}")
    })
}

/// Nested `K_δ = K + δ` decrease to `K` in the Hausdorff distance.
pub fn law_nested_hausdorff(raw: &Raw, d0: f64) -> Result<(), String> {
    let k = set(raw);
    let mut prev: Option<IntervalSet> = None;
    for j in 0..40 {
        let d = d0 * 0.5f64.powi(j);
        let kd = k.dilate(d).unwrap();
        let h = k.hausdorff_distance(&kd).unwrap();
        ensure(h <= d + EPS, || format!("d_H = {h} > {d}"))?;
        if let Some(p) = &prev {
            ensure(kd.is_subset_of(p, 0.0), || "chain not nested".into())?;
        }
        prev = Some(kd);
    }
    Ok(())
}

/// `∩_δ (K_δ + (u + δ)) = K + u` for a nested family shrinking to `K`.
pub fn law_nested_dilation(raw: &Raw, other: &Raw, u: f64, d0: f64) -> Result<(), String> {
    let k = set(raw);
    let r = set(other);
    let mut acc: Option<IntervalSet> = None;
    let mut d_min = d0;
    for j in 0..40 {
        let d = d0 * 0.5f64.powi(j);
        d_min = d;
        let kd = k.union(&k.dilate(d).unwrap().intersect(&r));
        let term = kd.dilate(u + d).unwrap();
        acc = Some(match acc {
            None => term,
            Some(a) => a.intersect(&term),
        });
    }
    let inter = acc.unwrap();
    let target = k.dilate(u).unwrap();
    ensure(target.is_subset_of(&inter, EPS), || "K + u not in intersection".into())?;
    let h = inter.hausdorff_distance(&target).unwrap();
    ensure(h <= 2.0 * d_min + EPS, || format!("d_H = {h}"))
}

/// Eroding the complement equals the complement of the dilation, away
/// from the bounding interval.
pub fn law_duality(raw: &Raw, u: f64) -> Result<(), String> {
    let x = set(raw);
    let bounds = Interval::new(-1.0, 2.5).unwrap();
    let inner = IntervalSet::single(-1.0 + u, 2.5 - u).unwrap();
    let lhs = x
        .complement_within(bounds)
        .erode(u)
        .unwrap()
        .intersect(&inner);
    let rhs = x
        .dilate(u)
        .unwrap()
        .complement_within(bounds)
        .intersect(&inner);
    // a gap within roundoff of 2u may leave a sliver on one side only
    let drop_slivers = |s: IntervalSet| {
        IntervalSet::from_intervals(
            s.components()
                .iter()
                .copied()
                .filter(|c| c.width() > 1e-9)
                .collect(),
        )
    };
    let (lhs, rhs) = (drop_slivers(lhs), drop_slivers(rhs));
    same(&lhs, &rhs, 1e-12)
}
