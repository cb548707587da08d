mod common;

use common::*;
use partial_control::IntervalSet;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn normalization_is_idempotent(raw in raw_set(0)) {
        prop_assert_eq!(law_normalize_idempotent(&raw), Ok(()));
    }

    #[test]
    fn dilation_semigroup_and_monotone(raw in raw_set(0), extra in raw_set(0), u in 0.0..0.2f64, v in 0.0..0.2f64) {
        prop_assert_eq!(law_dilate_semigroup(&raw, &extra, u, v), Ok(()));
    }

    #[test]
    fn erosion_dilation_adjunction(raw in raw_set(0), extra in raw_set(0), u in 0.0..0.2f64) {
        prop_assert_eq!(law_adjunction(&raw, &extra, u), Ok(()));
    }

    #[test]
    fn split_identity_away_from_critical_gap(raw in raw_set(1), u in 0.001..0.2f64, frac in 0.01..0.99f64) {
        prop_assert_eq!(law_split_identity(&raw, u, frac), Ok(()));
    }

    #[test]
    fn split_identity_fails_at_critical_gap(a in 0.0..1.0f64, w1 in 0.01..0.3f64, u in 0.001..0.2f64, w2 in 0.01..0.3f64, frac in 0.01..0.99f64) {
        prop_assert_eq!(law_split_identity_fails_at_gap(a, w1, u, w2, frac), Ok(()));
    }

    #[test]
    fn nested_chain_converges(raw in raw_set(1), d0 in 0.001..0.5f64) {
        prop_assert_eq!(law_nested_hausdorff(&raw, d0), Ok(()));
    }

    #[test]
    fn intersection_of_dilated_chain(raw in raw_set(1), other in raw_set(0), u in 0.0..0.2f64, d0 in 0.001..0.2f64) {
        prop_assert_eq!(law_nested_dilation(&raw, &other, u, d0), Ok(()));
    }

    #[test]
    fn complement_duality(raw in raw_set(0), u in 0.0..0.3f64) {
        prop_assert_eq!(law_duality(&raw, u), Ok(()));
    }

    #[test]
    fn operations_stay_canonical(a in raw_set(0), b in raw_set(0), u in 0.0..0.2f64, t in -1.0..1.0f64) {
        let (x, y) = (set(&a), set(&b));
        for s in [
            x.union(&y),
            x.intersect(&y),
            x.dilate(u).unwrap(),
            x.erode(u).unwrap(),
            x.translate(t),
        ] {
            prop_assert!(s.is_canonical());
        }
        prop_assert!(x.intersect(&y).is_subset_of(&x, 0.0));
        prop_assert!(x.is_subset_of(&x.union(&y), 0.0));
    }

    #[test]
    fn nearest_point_is_in_set_and_closest(raw in raw_set(1), y in -0.5..1.8f64) {
        let s = set(&raw);
        let p = s.nearest_point(y).unwrap();
        prop_assert!(s.contains(p));
        prop_assert!(((p - y).abs() - s.point_distance(y)).abs() <= 1e-15);
    }

    #[test]
    fn hausdorff_is_symmetric_metric(a in raw_set(1), b in raw_set(1), c in raw_set(1)) {
        let (x, y, z) = (set(&a), set(&b), set(&c));
        let dxy = x.hausdorff_distance(&y).unwrap();
        prop_assert_eq!(dxy, y.hausdorff_distance(&x).unwrap());
        prop_assert_eq!(x.hausdorff_distance(&x).unwrap(), 0.0);
        let via = dxy + y.hausdorff_distance(&z).unwrap();
        prop_assert!(x.hausdorff_distance(&z).unwrap() <= via + 1e-12);
    }

    #[test]
    fn json_round_trip(raw in raw_set(0)) {
        let s = set(&raw);
        let text = serde_json::to_string(&s).unwrap();
        let back: IntervalSet = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(s, back);
    }
}
