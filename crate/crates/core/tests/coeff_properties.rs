use sfde_core::coeff::{builtin, check_a1, log_grid, BuiltinParams};
use sfde_core::sampling::{RandomPairs, SegmentLaw};
use sfde_core::ControlFunction;

#[test]
fn control_functions_satisfy_class_conditions() {
    let grid = log_grid(1e-9, 1e3, 400);
    for u in [ControlFunction::one(), ControlFunction::log()] {
        u.validate_on_grid(&grid).unwrap();
        for w in grid.windows(2) {
            assert!(u.eval(w[0]) >= 1.0);
            assert!(u.modulus(w[0]) <= u.modulus(w[1]));
            let mid = 0.5 * (w[0] + w[1]);
            assert!(u.modulus(mid) >= 0.5 * (u.modulus(w[0]) + u.modulus(w[1])) * (1.0 - 1e-12));
        }
    }
}

#[test]
fn lipschitz_ratio_is_stable_under_doubling() {
    for name in ["linear_drift", "shifted_drift_pair", "delayed_drift", "geometric_diffusion"] {
        let cs = builtin(name, &BuiltinParams::default()).unwrap();
        let law = SegmentLaw::new(cs.shape.dim, cs.shape.r0);
        let u = ControlFunction::one();
        let r1 = check_a1(&cs, &u, &mut RandomPairs::new(law.clone(), 1), 2_000, f64::INFINITY).unwrap();
        let r2 = check_a1(&cs, &u, &mut RandomPairs::new(law, 1), 4_000, f64::INFINITY).unwrap();
        assert!(r1.max_ratio.is_finite() && r1.max_ratio > 0.0, "{name}");
        assert!((r2.max_ratio / r1.max_ratio - 1.0).abs() <= 0.05, "{name}: {} vs {}", r1.max_ratio, r2.max_ratio);
    }
}
