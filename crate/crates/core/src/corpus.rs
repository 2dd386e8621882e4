//! Seeded random miniature instances for the identity and inequality suites.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::measures::{Alternate, Null, Prior, ProductNull, TestingProblem, Weighted};
use crate::numerics::stream_rng;

/// Shape limits for [`random_finite_problem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusShape {
    pub max_coords: usize,
    pub max_alternates: usize,
}

impl Default for CorpusShape {
    fn default() -> Self {
        Self {
            max_coords: 3,
            max_alternates: 4,
        }
    }
}

fn probability_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    // bounded away from zero so relative densities stay moderate
    let raw: Vec<f64> = (0..len).map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// A random problem on binary coordinates: Bernoulli null marginals, and a
/// random mixture of dense-table and product alternates with random weights.
pub fn random_finite_problem(seed: u64, index: u64, shape: CorpusShape) -> Result<TestingProblem> {
    let mut rng = stream_rng(seed, index);
    let n = rng.random_range(1..=shape.max_coords);
    let uniform = rng.random_bool(0.3);
    let marginals: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            if uniform {
                vec![0.5, 0.5]
            } else {
                let q = rng.random_range(0.2..0.8);
                vec![1.0 - q, q]
            }
        })
        .collect();
    let null = ProductNull::new(marginals)?;
    let states = 1usize << n;
    let count = rng.random_range(1..=shape.max_alternates);
    let weights = probability_vector(&mut rng, count);
    let list = weights
        .into_iter()
        .enumerate()
        .map(|(i, weight)| {
            let alternate = match rng.random_range(0..3) {
                0 => Alternate::Table(probability_vector(&mut rng, states)),
                1 => Alternate::Product((0..n).map(|_| probability_vector(&mut rng, 2)).collect()),
                _ if uniform && n >= 1 => {
                    let subset: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
                    let subset = if subset.is_empty() { vec![0] } else { subset };
                    Alternate::ParityBump {
                        subset,
                        amplitude: rng.random_range(-1.0..=1.0),
                    }
                }
                _ => Alternate::Table(probability_vector(&mut rng, states)),
            };
            Weighted {
                label: format!("a{i}"),
                weight,
                alternate,
            }
        })
        .collect();
    TestingProblem::new(format!("corpus-{seed}-{index}"), Null::Product(null), Prior::Explicit(list))
}

/// `count` problems from consecutive streams of `seed`.
pub fn finite_corpus(seed: u64, count: usize, shape: CorpusShape) -> Result<Vec<TestingProblem>> {
    (0..count as u64).map(|i| random_finite_problem(seed, i, shape)).collect()
}

/// A random discrete law as `(weight, value)` atoms with values in
/// `[-1, 1]` and up to `max_atoms` atoms.
pub fn random_discrete_variable(seed: u64, index: u64, max_atoms: usize) -> Vec<(f64, f64)> {
    let mut rng = stream_rng(seed, index);
    let count = rng.random_range(1..=max_atoms);
    let weights = probability_vector(&mut rng, count);
    weights
        .into_iter()
        .map(|w| (w, rng.random_range(-1.0..=1.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_reproducible_and_valid() {
        let a = finite_corpus(11, 30, CorpusShape::default()).unwrap();
        let b = finite_corpus(11, 30, CorpusShape::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.explicit().unwrap(), y.explicit().unwrap());
            assert!(x.null.dim() <= 3);
            assert!(x.explicit().unwrap().len() <= 4);
        }
    }

    #[test]
    fn discrete_variables_are_normalised() {
        for i in 0..20 {
            let v = random_discrete_variable(3, i, 12);
            assert!(v.len() <= 12);
            assert!((v.iter().map(|a| a.0).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
