//! Cross-module invariants through the public API.

use circlab::constructions::{build_intervals, build_schedule, default_depth, ScheduleKind};
use circlab::energy::{e1, e1_levels};
use circlab::studies::{compare_across_levels, drift};
use circlab::weights::{jones_factors, WeightSpec};
use circlab::{CircleMap, Complex64, EnergyParams, EnergyReport, GrowthConfig, PoissonExtension};
use proptest::prelude::*;
use std::f64::consts::PI;

fn pl_map(a: f64, b: f64) -> CircleMap {
    CircleMap::piecewise_linear(vec![(0.0, 0.0), (a, b), (1.0, 1.0)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rotations_have_identity_level_sums(rho in 0.0f64..1.0, alpha in -0.9f64..0.9, lambda in -2.0f64..2.0) {
        let pr = EnergyParams::new(2.0, alpha, lambda).unwrap();
        let id = e1_levels(&CircleMap::identity(), &pr, 8).unwrap();
        let rot = e1_levels(&CircleMap::rotation(rho).unwrap(), &pr, 8).unwrap();
        for (a, b) in id.iter().zip(&rot) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn level_sums_are_nonnegative(a in 0.05f64..0.95, b in 0.05f64..0.95, p in 1.2f64..3.5) {
        let pr = EnergyParams::new(p, 0.0, 0.0).unwrap();
        let r = e1(&pl_map(a, b), &pr, 10, &GrowthConfig::default()).unwrap();
        prop_assert!(r.per_level.iter().all(|&v| v >= 0.0 && v.is_finite()));
        let c = r.cumulative();
        prop_assert!(c.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn ratio_drift_is_symmetric(scale in 0.1f64..10.0, decay in 0.3f64..0.8) {
        let cfg = GrowthConfig::default();
        let pr = EnergyParams::new(2.0, 0.0, 0.0).unwrap();
        let a: Vec<f64> = (1..=14).map(|j| decay.powi(j)).collect();
        let b: Vec<f64> = (1..=14).map(|j| scale * (0.5 * decay).powi(j)).collect();
        let ra = EnergyReport::from_levels("a", pr, a, &cfg);
        let rb = EnergyReport::from_levels("b", pr, b, &cfg);
        let ab = compare_across_levels(&ra, &rb, &[10, 12, 14], &cfg, 0.1);
        let ba = compare_across_levels(&rb, &ra, &[10, 12, 14], &cfg, 0.1);
        prop_assert_eq!(ab.basis, ba.basis);
        prop_assert_eq!(ab.passed, ba.passed);
        let (x, y) = (ab.drift.unwrap(), ba.drift.unwrap());
        prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x));
    }

    #[test]
    fn jones_identity_holds(p in 1.1f64..4.0, t in 0.01f64..0.99, lambda in -3.0f64..3.0, r in 0.0f64..3.0) {
        let alpha = -1.0 + p * t;
        let f = jones_factors(p, alpha, lambda).unwrap();
        prop_assert!((f.a1 + f.a2 - 1.0).abs() < 1e-12);
        prop_assert!((-f.a1 + f.a2 * (p - 1.0) - alpha).abs() < 1e-12);
        prop_assume!((r - 1.0).abs() > 1e-6);
        let w = WeightSpec::main(alpha, lambda).at_modulus(r);
        let prod = f.w1.at_modulus(r) * f.w2.at_modulus(r).powf(1.0 - p);
        prop_assert!((prod - w).abs() <= 1e-9 * w, "{prod} vs {w}");
    }

    #[test]
    fn cantor_function_is_monotone(s in 0.6f64..2.5, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let kind = ScheduleKind::Power { s };
        let depth = default_depth(kind);
        let tree = build_intervals(&build_schedule(kind, depth).unwrap(), depth).unwrap();
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(tree.f(lo) <= tree.f(hi));
        prop_assert!((tree.f(x) + tree.f(1.0 - x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_extends_to_a_rotation(rho in 0.0f64..1.0, r in 0.0f64..0.95, t in 0.0f64..1.0) {
        let ext = PoissonExtension::new(CircleMap::rotation(rho).unwrap());
        let z = Complex64::from_polar(r, 2.0 * PI * t);
        let h = ext.extend(z).unwrap();
        let want = Complex64::from_polar(1.0, 2.0 * PI * rho) * z;
        prop_assert!((h - want).norm() < 1e-8, "{h} vs {want}");
    }
}

#[test]
fn drift_is_scale_free() {
    let a = [1.0, 1.05, 1.1];
    let b: Vec<f64> = a.iter().map(|x| 7.0 * x).collect();
    assert!((drift(&a).unwrap() - drift(&b).unwrap()).abs() < 1e-12);
    assert!((drift(&a).unwrap() - 0.1).abs() < 1e-12);
}
