//! Random segment generators used by the sampled condition checkers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::segment::Segment;

/// Shape of randomly drawn segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLaw {
    pub dim: usize,
    pub r0: f64,
    /// Equal subintervals of `[-r0, 0]` (ignored when `r0 = 0`).
    pub intervals: usize,
    /// Standard deviation of node values.
    pub scale: f64,
    /// Probability of one interior jump mark.
    pub jump_probability: f64,
    /// Times are drawn uniformly from `[0, t_max]`.
    pub t_max: f64,
}

impl SegmentLaw {
    pub fn new(dim: usize, r0: f64) -> Self {
        SegmentLaw { dim, r0, intervals: 8, scale: 2.0, jump_probability: 0.3, t_max: 1.0 }
    }

    pub fn draw(&self, rng: &mut impl Rng) -> Segment {
        let mut seg = Segment::from_fn(self.dim, self.r0, self.intervals, |_, v| {
            for x in v.iter_mut() {
                *x = self.scale * rng.sample::<f64, _>(StandardNormal);
            }
        });
        if seg.len() > 2 && rng.random::<f64>() < self.jump_probability {
            let k = rng.random_range(1..seg.len() - 1);
            let theta = seg.thetas()[k];
            let pre: Vec<f64> = (0..self.dim).map(|_| self.scale * rng.sample::<f64, _>(StandardNormal)).collect();
            let nodes = (0..seg.len()).map(|j| (seg.thetas()[j], seg.node(j).to_vec())).collect();
            seg = Segment::new(self.dim, self.r0, nodes, vec![(theta, pre)]).expect("valid random segment");
        }
        seg
    }

    /// Perturbation on the skeleton of `base`; `positive` clips Gaussian draws at zero.
    pub fn perturbation(&self, base: &Segment, positive: bool, rng: &mut impl Rng) -> Segment {
        let n = base.len() * self.dim + base.jumps().count() * self.dim;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let g: f64 = self.scale * rng.sample::<f64, _>(StandardNormal);
                if positive {
                    g.max(0.0)
                } else {
                    g
                }
            })
            .collect();
        let next = std::cell::Cell::new(0);
        base.map_values(|_| {
            let k = next.get();
            next.set(k + 1);
            draws[k]
        })
    }

    pub fn draw_time(&self, rng: &mut impl Rng) -> f64 {
        rng.random::<f64>() * self.t_max
    }
}

/// `(t, a, b)` triple fed to a checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub t: f64,
    pub a: Segment,
    pub b: Segment,
}

/// Source of segment pairs for the Lipschitz-type validator.
pub trait PairSource {
    fn next_pair(&mut self) -> SamplePair;
    fn describe(&self) -> String;
}

/// Independent draw `a` plus a perturbation of log-uniform size in `[1e-6, 1] * scale`.
pub struct RandomPairs {
    law: SegmentLaw,
    rng: ChaCha8Rng,
    seed: u64,
}

impl RandomPairs {
    pub fn new(law: SegmentLaw, seed: u64) -> Self {
        RandomPairs { law, rng: ChaCha8Rng::seed_from_u64(seed), seed }
    }
}

impl PairSource for RandomPairs {
    fn next_pair(&mut self) -> SamplePair {
        let a = self.law.draw(&mut self.rng);
        let size = 10f64.powf(-6.0 * self.rng.random::<f64>());
        let d = self.law.perturbation(&a, false, &mut self.rng);
        let b = a.add_scaled(&d, size).expect("same skeleton");
        SamplePair { t: self.law.draw_time(&mut self.rng), a, b }
    }

    fn describe(&self) -> String {
        format!(
            "random pairs: gaussian nodes (scale {}, {} intervals, jump prob {}), log-uniform gap 1e-6..1, t ~ U[0,{}], seed {}",
            self.law.scale, self.law.intervals, self.law.jump_probability, self.law.t_max, self.seed
        )
    }
}

/// Cycles through a fixed list.
pub struct FixedPairs {
    pairs: Vec<SamplePair>,
    next: usize,
}

impl FixedPairs {
    pub fn new(pairs: Vec<SamplePair>) -> Self {
        assert!(!pairs.is_empty(), "FixedPairs needs at least one pair");
        FixedPairs { pairs, next: 0 }
    }
}

impl PairSource for FixedPairs {
    fn next_pair(&mut self) -> SamplePair {
        let p = self.pairs[self.next % self.pairs.len()].clone();
        self.next += 1;
        p
    }

    fn describe(&self) -> String {
        format!("fixed list of {} pairs", self.pairs.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_valid_and_seeded() {
        let law = SegmentLaw::new(2, 1.0);
        let mut a = RandomPairs::new(law.clone(), 4);
        let mut b = RandomPairs::new(law, 4);
        for _ in 0..50 {
            let p = a.next_pair();
            assert_eq!(p, b.next_pair());
            assert!(p.a.same_skeleton(&p.b));
            assert!((0.0..=1.0).contains(&p.t));
        }
    }

    #[test]
    fn positive_perturbation_orders() {
        let law = SegmentLaw::new(3, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = law.draw(&mut rng);
            let d = law.perturbation(&x, true, &mut rng);
            assert!(x.leq(&x.add_scaled(&d, 1.0).unwrap()).unwrap());
        }
    }
}
