use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sfde_core::coeff::{builtin, BuiltinParams, CATALOGUE};
use sfde_core::order::{check_cond_diffusion, check_cond_drift, check_cond_jump, Condition, OrderSampler};
use sfde_core::{psi, psi_prime, psi_second, verify_order_mc, McOptions, OrderMetric, Segment, SolverConfig};

/// Five-point Gauss-Legendre on `[a, b]`; exact for polynomials up to degree 9.
fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] =
        [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    X.iter().zip(W).map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
}

/// Integral over `[0, s]` split at the breakpoints of the piecewise polynomial.
fn piecewise(f: &impl Fn(f64) -> f64, n: u32, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let nf = f64::from(n);
    let mut cuts = vec![0.0];
    cuts.extend([0.5 / nf, 1.0 / nf].into_iter().filter(|&c| c < s));
    cuts.push(s);
    cuts.windows(2).map(|w| gauss(f, w[0], w[1])).sum()
}

/// The displayed second derivative, written out independently.
fn second_oracle(n: u32, u: f64) -> f64 {
    let nf = f64::from(n);
    if u > 0.0 && u <= 0.5 / nf {
        4.0 * nf * nf * u
    } else if u > 0.5 / nf && u < 1.0 / nf {
        -4.0 * nf * nf * (u - 1.0 / nf)
    } else {
        0.0
    }
}

fn psi_oracle(n: u32, s: f64) -> f64 {
    let first = |r: f64| piecewise(&|u| second_oracle(n, u), n, r);
    piecewise(&first, n, s)
}

#[test]
fn closed_form_matches_quadrature() {
    for k in 0..=10 {
        let n = 1u32 << k;
        for j in 0..=400 {
            let s = -1.0 + 11.0 * f64::from(j) / 400.0;
            assert!((psi(n, s) - psi_oracle(n, s)).abs() <= 1e-10, "n={n} s={s}");
        }
        let nf = f64::from(n);
        for s in [1.0 / nf, 1.5 / nf, 3.0, 10.0] {
            assert!((psi_oracle(n, s) - (s - 0.5 / nf)).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn psi_family_properties(k in 0u32..=10, s in prop_oneof![-1.0f64..0.0, 0.0f64..0.01, 0.0f64..10.0]) {
        let n = 1u32 << k;
        let nf = f64::from(n);
        let d = psi_prime(n, s);
        prop_assert!((0.0..=1.0).contains(&d));
        if s <= 0.0 {
            prop_assert_eq!(d, 0.0);
            prop_assert_eq!(psi(n, s), 0.0);
        }
        prop_assert!(psi(n, s) >= 0.0 && psi(n, s) <= s.max(0.0));
        prop_assert!(psi(n, s) <= psi(2 * n, s));
        let q = s * psi_second(n, s);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&q));
        if s <= 0.0 || s >= 1.0 / nf {
            prop_assert_eq!(q, 0.0);
        }
    }
}

#[test]
fn failed_verdicts_carry_confirmed_witnesses() {
    for entry in CATALOGUE {
        let cs = builtin(entry.name, &BuiltinParams::default()).unwrap();
        for seed in 0..4 {
            let reports = [
                check_cond_drift(&cs, &mut OrderSampler::for_shape(&cs, seed), 300).unwrap(),
                check_cond_diffusion(&cs, &mut OrderSampler::for_shape(&cs, seed), 300).unwrap(),
                check_cond_jump(&cs, &mut OrderSampler::for_shape(&cs, seed), 300).unwrap(),
            ];
            for (r, c) in reports.iter().zip([Condition::Drift, Condition::Diffusion, Condition::Jump]) {
                assert!(r.sampled);
                match &r.witness {
                    Some(w) => assert!(!r.pass && w.confirms(&cs, c), "{} {c:?}", entry.name),
                    None => assert!(r.pass),
                }
            }
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    0.5 * (v[(v.len() - 1) / 2] + v[v.len() / 2])
}

#[test]
fn discrete_violations_fade_under_refinement() {
    // Order holds for the exact solutions; Euler steps with 1 + s dB < 0 can flip it.
    let cs = builtin("geometric_diffusion", &BuiltinParams::default().with("s", 3.0)).unwrap();
    let (xi, xibar) = (Segment::constant(0.0, &[1.0]), Segment::constant(0.0, &[2.0]));
    let mut medians = Vec::new();
    for h in [0.02, 0.01, 0.005] {
        let sups: Vec<f64> = (0..32)
            .map(|seed| {
                let opts = McOptions::new(50, seed);
                verify_order_mc(&cs, &xi, &xibar, &SolverConfig::new(h, 0.0, 0.5), &opts).unwrap().hard_sup
            })
            .collect();
        medians.push(median(sups));
    }
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

#[test]
fn soft_metric_increases_to_the_hard_one() {
    let cs = builtin("geometric_diffusion", &BuiltinParams::default().with("s", 3.0)).unwrap();
    let (xi, xibar) = (Segment::constant(0.0, &[1.0]), Segment::constant(0.0, &[2.0]));
    let mut opts = McOptions::new(200, 5);
    opts.psi_levels = (0..=12).map(|k| 1 << k).collect();
    let m = verify_order_mc(&cs, &xi, &xibar, &SolverConfig::new(0.02, 0.0, 0.5), &opts).unwrap();
    assert!(m.hard_sup > 0.0);
    let bound: f64 = {
        let ok: Vec<f64> = m.per_path.iter().flatten().map(|v| v * v).collect();
        ok.iter().sum::<f64>() / ok.len() as f64
    };
    for w in m.soft_psi.windows(2) {
        assert!(w[0].value <= w[1].value);
    }
    for s in &m.soft_psi {
        assert!(s.value <= bound && s.value <= m.hard_sup * m.hard_sup);
    }
    let last = m.soft_psi.last().unwrap().value;
    assert!((bound - last) / bound < 0.05, "{last} vs {bound}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduction_ignores_path_order(values in prop::collection::vec(prop::option::weighted(0.9, 0.0f64..3.0), 1..200), seed in any::<u64>()) {
        let levels = [1, 4, 16, 64];
        let a = OrderMetric::from_paths(values.clone(), &levels);
        let mut shuffled = values;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = OrderMetric::from_paths(shuffled, &levels);
        prop_assert_eq!(a.hard_sup.to_bits(), b.hard_sup.to_bits());
        prop_assert_eq!(a.violation_frequency.to_bits(), b.violation_frequency.to_bits());
        prop_assert_eq!(a.failed_paths, b.failed_paths);
        for (x, y) in a.soft_psi.iter().zip(&b.soft_psi) {
            prop_assert_eq!(x.value.to_bits(), y.value.to_bits());
        }
    }
}
