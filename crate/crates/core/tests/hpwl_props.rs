mod common;

use layoutpilot_core::geom::Point;
use layoutpilot_core::layout::AreaRatio;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hpwl_matches_bbox_scan(seed in any::<u64>(), n in 2usize..16) {
        let l = common::random_layout(&mut common::rng(seed), n, 40);
        prop_assert_eq!(l.hpwl(), common::hpwl_oracle(&l));
    }

    #[test]
    fn hpwl_is_translation_invariant(seed in any::<u64>(), dx in -50i64..50, dy in -50i64..50) {
        let l = common::random_layout(&mut common::rng(seed), 10, 30);
        let mut t = l.clone();
        for p in t.placements.values_mut() {
            p.origin = p.origin.offset(dx, dy);
        }
        prop_assert_eq!(t.hpwl(), l.hpwl());
    }

    #[test]
    fn hpwl_is_mirror_invariant(seed in any::<u64>(), axis in -40i64..80) {
        let l = common::random_layout(&mut common::rng(seed), 10, 30);
        let mut m = l.clone();
        for p in m.placements.values_mut() {
            p.origin = Point::new(2 * axis - p.origin.x - p.w, p.origin.y);
            p.orientation = p.orientation.flip_horizontal();
        }
        prop_assert_eq!(m.hpwl(), l.hpwl());
    }

    #[test]
    fn self_area_ratio_is_one(seed in any::<u64>(), n in 1usize..12) {
        let l = common::random_layout(&mut common::rng(seed), n, 30);
        prop_assert_eq!(l.area_ratio(&l).unwrap(), AreaRatio::from_fraction(1, 1));
    }
}
