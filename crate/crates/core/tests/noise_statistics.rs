use proptest::prelude::*;
use sfde_core::{MarkMeasure, NoiseSpec, SeedRecord};

fn brownian(m: usize, steps: usize, h: f64) -> NoiseSpec {
    NoiseSpec { m, measure: MarkMeasure::empty(), t0: 0.0, horizon: steps as f64 * h, base_step: h }
}

#[test]
fn increment_variance_and_mean() {
    let h = 0.01;
    let noise = brownian(2, 100_000, h).realize(SeedRecord::new(11, 3)).unwrap();
    for j in 0..2 {
        let xs: Vec<f64> = (0..noise.steps()).map(|k| noise.increment(k)[j]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var / h - 1.0).abs() < 0.01, "variance {var}");
        assert!(mean.abs() < 3.0 * (h / n).sqrt(), "mean {mean}");
    }
}

#[test]
fn path_streams_are_uncorrelated() {
    let spec = brownian(1, 100_000, 1.0);
    let a = spec.realize(SeedRecord::new(5, 0)).unwrap();
    let b = spec.realize(SeedRecord::new(5, 1)).unwrap();
    let n = a.steps();
    let (xa, xb): (Vec<f64>, Vec<f64>) = (0..n).map(|k| (a.increment(k)[0], b.increment(k)[0])).unzip();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&xa), mean(&xb));
    let cov: f64 = xa.iter().zip(&xb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = xa.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = xb.iter().map(|y| (y - mb).powi(2)).sum();
    let rho = cov / (va * vb).sqrt();
    assert!(rho.abs() < 0.01, "rho {rho}");
}

#[test]
fn arrival_count_and_mark_frequencies() {
    let weights = [1.0, 2.0, 7.0];
    let measure = MarkMeasure::from_weights(&weights).unwrap();
    let horizon = 10_000.0;
    let spec = NoiseSpec { m: 1, measure, t0: 0.0, horizon, base_step: 1.0 };
    let noise = spec.realize(SeedRecord::new(8, 0)).unwrap();
    let n = noise.events().len() as f64;
    let lambda = 10.0 * horizon;
    assert!((n - lambda).abs() < 3.0 * lambda.sqrt(), "count {n}");
    for (k, w) in weights.iter().enumerate() {
        let p = w / 10.0;
        let c = noise.events().iter().filter(|e| e.mark == k).count() as f64;
        assert!((c - n * p).abs() < 3.0 * (n * p * (1.0 - p)).sqrt(), "mark {k}: {c}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn realizations_are_pure_functions_of_the_seed(master in any::<u64>(), path in 0u64..1000) {
        let spec = NoiseSpec { m: 2, measure: MarkMeasure::single(3.0), t0: 0.5, horizon: 2.5, base_step: 0.05 };
        let a = spec.realize(SeedRecord::new(master, path)).unwrap();
        let b = spec.realize(SeedRecord::new(master, path)).unwrap();
        prop_assert_eq!(&a, &b);
        let c = spec.realize(SeedRecord::new(master, path + 1)).unwrap();
        prop_assert_ne!(a, c);
    }
}
