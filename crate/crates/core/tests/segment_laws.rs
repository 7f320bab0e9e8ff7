use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sfde_core::sampling::SegmentLaw;
use sfde_core::{History, Segment};

fn law(dim: usize, intervals: usize) -> SegmentLaw {
    SegmentLaw { intervals, ..SegmentLaw::new(dim, 1.0) }
}

fn draw(seed: u64, dim: usize, intervals: usize) -> Segment {
    law(dim, intervals).draw(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// `a <= b` on aligned skeletons, by direct evaluation at the union of nodes.
fn leq_oracle(a: &Segment, b: &Segment) -> bool {
    let mut thetas: Vec<f64> = a.thetas().iter().chain(b.thetas()).copied().collect();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    (0..a.dim())
        .all(|i| thetas.iter().all(|&th| a.eval(i, th) <= b.eval(i, th) && a.left_limit(i, th) <= b.left_limit(i, th)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn order_laws(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>(), k1 in 1usize..6, k2 in 1usize..6) {
        let a = draw(s1, 2, k1);
        let b = draw(s2, 2, k2);
        let c = draw(s3, 2, k1);
        prop_assert!(a.leq(&a).unwrap());
        prop_assert_eq!(a.leq(&b).unwrap(), leq_oracle(&a, &b));
        let m = a.meet(&b).unwrap();
        let j = a.join(&b).unwrap();
        prop_assert!(m.leq(&a).unwrap() && m.leq(&b).unwrap());
        prop_assert!(a.leq(&j).unwrap() && b.leq(&j).unwrap());
        // Transitivity along a constructed chain.
        let lo = m.meet(&c).unwrap();
        prop_assert!(lo.leq(&m).unwrap() && lo.leq(&j).unwrap());
        // Absorption.
        let back = a.meet(&a.join(&b).unwrap()).unwrap();
        let (x, y) = Segment::align(&a, &back).unwrap();
        for i in 0..2 {
            for &th in x.thetas() {
                prop_assert_eq!(x.eval(i, th), y.eval(i, th));
                prop_assert_eq!(x.left_limit(i, th), y.left_limit(i, th));
            }
        }
    }

    #[test]
    fn antisymmetry(seed in any::<u64>()) {
        let a = draw(seed, 3, 4);
        let b = a.map_values(|v| v);
        prop_assert!(a.leq(&b).unwrap() && b.leq(&a).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sup_norm_is_a_norm(s1 in any::<u64>(), s2 in any::<u64>(), k in 1usize..6, lambda in -5.0f64..5.0) {
        let a = draw(s1, 2, k);
        let b = draw(s2, 2, k + 1);
        let sum = a.add_scaled(&b, 1.0).unwrap();
        let tol = 1e-12 * (a.sup_norm() + b.sup_norm());
        prop_assert!(sum.sup_norm() <= a.sup_norm() + b.sup_norm() + tol);
        let scaled = a.map_values(|v| lambda * v);
        prop_assert!((scaled.sup_norm() - lambda.abs() * a.sup_norm()).abs() <= 1e-12 * a.sup_norm());
        prop_assert!(a.meet(&b).unwrap().sup_norm() <= a.sup_norm() + b.sup_norm());
    }

    #[test]
    fn history_windows_are_cadlag(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = law(1, 4).draw(&mut rng);
        let res = 0.125 / 65536.0;
        let mut h = History::from_initial(&xi, 0.0, res).unwrap();
        let mut jump_ticks = Vec::new();
        let mut x = xi.head()[0];
        for k in 1..=24i64 {
            let tick = k * 16384;
            x += (seed.rotate_left(k as u32) % 7) as f64 - 3.0;
            h.push(tick, &[x]);
            if k % 5 == 0 {
                x += 10.0;
                h.jump_last(&[x]);
                jump_ticks.push(tick);
            }
        }
        for k in 1..=24i64 {
            let t = h.time_of(k * 16384);
            let right = h.segment_at(t).unwrap();
            let left = h.left_segment_at(t).unwrap();
            if jump_ticks.contains(&(k * 16384)) {
                prop_assert!((right.head()[0] - left.head()[0] - 10.0).abs() < 1e-12);
                prop_assert!((left.head()[0] - (h.value_at(t).unwrap()[0] - 10.0)).abs() < 1e-12);
            } else {
                prop_assert_eq!(right.head(), left.head());
            }
            // Value at theta = 0 is the right limit of the path.
            let eps = h.time_of(k * 16384 + 1);
            if k < 24 {
                let next = h.value_at(eps).unwrap()[0];
                prop_assert!((next - right.head()[0]).abs() < 1e-3);
            }
        }
    }
}
