use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hyperperc::hypgeom::{distance, halfspace, Isometry, Point};
use hyperperc::oracles::{tree_branching_sum, tree_susceptibility, tree_susceptibility_series, tree_two_point};

fn point3() -> impl Strategy<Value = Point> {
    (-3.0f64..3.0, -3.0f64..3.0, 0.05f64..5.0).prop_map(|(x, y, h)| Point::new(vec![x, y, h]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distance_is_a_metric(a in point3(), b in point3(), c in point3()) {
        let ab = distance(&a, &b).unwrap();
        let ba = distance(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        prop_assert!(ab <= distance(&a, &c).unwrap() + distance(&c, &b).unwrap() + 1e-9);
        prop_assert!(distance(&a, &a).unwrap() < 1e-7);
    }

    #[test]
    fn isometries_preserve_distance(a in point3(), b in point3(), seed in any::<u64>()) {
        let g = Isometry::random(3, &mut ChaCha8Rng::seed_from_u64(seed));
        let d0 = distance(&a, &b).unwrap();
        let d1 = distance(&g.apply(&a), &g.apply(&b)).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-7 * (1.0 + d0));
    }

    #[test]
    fn halfspace_holds_the_nearer_point(a in point3(), b in point3(), seed in any::<u64>()) {
        prop_assume!(distance(&a, &b).unwrap() > 1e-3);
        let h = halfspace(&a, &b).unwrap();
        prop_assert!(h.contains(&a));
        prop_assert!(!h.contains_strictly(&b));
        let g = Isometry::random(3, &mut ChaCha8Rng::seed_from_u64(seed));
        let gh = g.apply_halfspace(&h);
        prop_assert!(gh.contains(&g.apply(&a)));
        prop_assert!((gh.distance_to_boundary(&g.apply(&a)) - h.distance_to_boundary(&a)).abs() < 1e-6);
    }

    #[test]
    fn tree_two_point_is_multiplicative(p in 0.0f64..1.0, m in 0usize..30, n in 0usize..30) {
        assert_relative_eq!(tree_two_point(3, p, m + n), tree_two_point(3, p, m) * tree_two_point(3, p, n), max_relative = 1e-12);
    }

    #[test]
    fn branching_sum_stays_below_one_subcritically(k in 3usize..7, frac in 0.0f64..1.0, n in 0usize..50) {
        let p = frac / (k as f64 - 1.0);
        prop_assert!(tree_branching_sum(k, p, n) <= 1.0 + 1e-12);
    }
}

#[test]
fn susceptibility_closed_form_at_sample_points() {
    for &(k, p) in &[(3, 0.1), (3, 0.45), (4, 0.3), (5, 0.2)] {
        assert_relative_eq!(tree_susceptibility(k, p), tree_susceptibility_series(k, p, 1e-15), max_relative = 1e-10);
    }
}
