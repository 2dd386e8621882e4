//! Spiked tensor: `D_u = N(λ u^{⊗r}, I)` with `u` uniform on `{±1/√n}^n`.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use rand::Rng;

use super::{Param, PriorKind, ZooInstance};
use crate::error::{Error, Result};
use crate::measures::{mean_shift_pair, Alternate, Degree, Null, PairAtom, Prior, Sampler, TestingProblem};
use crate::numerics::ln_binomial;

const MAX_EXACT_N: usize = 14;
/// Largest `2^n · n^r` stored for an exact prior.
const EXACT_ENTRY_CAP: u128 = 1 << 24;
const DIM_CAP: u128 = 1 << 22;

fn mean_tensor(bits: u64, n: usize, r: usize, lambda: f64) -> Vec<f64> {
    let dim = n.pow(r as u32);
    let scale = lambda * (n as f64).powf(-(r as f64) / 2.0);
    let mut out = Vec::with_capacity(dim);
    for mut idx in 0..dim {
        let mut sign = 1.0;
        for _ in 0..r {
            if bits >> (idx % n) & 1 == 0 {
                sign = -sign;
            }
            idx /= n;
        }
        out.push(scale * sign);
    }
    out
}

/// `⟨u, v⟩` for sign vectors differing in `h` places.
fn overlap(n: usize, h: usize) -> f64 {
    (n as f64 - 2.0 * h as f64) / n as f64
}

pub fn make_tensor_pca(n: usize, r: usize, lambda: f64, prior: PriorKind) -> Result<ZooInstance> {
    if n == 0 || r == 0 || n > 63 {
        return Err(Error::InvalidInput(format!("tensor PCA needs 1 ≤ n ≤ 63 and r ≥ 1, got n = {n}, r = {r}")));
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidInput("signal strength must be finite".into()));
    }
    let dim = (n as u128).checked_pow(r as u32).unwrap_or(u128::MAX);
    let params = vec![
        Param::count("n", n),
        Param::count("r", r),
        Param::signal("lambda", lambda),
    ];
    let lam2 = lambda * lambda;
    let law = Arc::new(move |d: Degree| {
        let ln2n = n as f64 * std::f64::consts::LN_2;
        Ok((0..=n)
            .map(|h| {
                let (full_x, low_x) = mean_shift_pair(lam2 * overlap(n, h).powi(r as i32), d);
                PairAtom {
                    weight: (ln_binomial(n as f64, h as f64) - ln2n).exp(),
                    full_x,
                    low_x,
                }
            })
            .collect())
    });
    let null = Null::Gaussian { dim: dim as usize };
    let problem = if dim > DIM_CAP {
        None
    } else {
        match prior {
            PriorKind::Exact => {
                if n > MAX_EXACT_N || (1u128 << n) * dim > EXACT_ENTRY_CAP {
                    return Err(Error::StateCap {
                        states: (1u128 << n) * dim,
                        cap: EXACT_ENTRY_CAP,
                    });
                }
                let alts = (0..1u64 << n)
                    .map(|b| Alternate::MeanShift(mean_tensor(b, n, r, lambda)))
                    .collect();
                Some(TestingProblem::new("tensor_pca", null, Prior::uniform(alts))?)
            }
            PriorKind::Sampled => {
                let sampler: Sampler = Arc::new(move |rng| {
                    let bits: u64 = rng.random::<u64>() & ((1u64 << n) - 1);
                    Ok(Alternate::MeanShift(mean_tensor(bits, n, r, lambda)))
                });
                Some(TestingProblem::new("tensor_pca", null, Prior::Sampler(sampler))?)
            }
        }
    };
    let formula = Arc::new(move |i: usize, j: usize, d: Degree| {
        let h = ((i ^ j) as u64).count_ones() as usize;
        Ok(mean_shift_pair(lam2 * overlap(n, h).powi(r as i32), d))
    });
    Ok(ZooInstance::new("tensor_pca", params, problem, Some(law), Some(formula)))
}

/// `√(2π / (1 - 2kλ²/n))`, the bound on `‖E_u D̄_u^{⊗k}‖²`; `None` outside
/// its hypothesis `kλ² < n/2`.
pub fn tensor_pca_k_sample_bound(n: usize, k: u32, lambda: f64) -> Option<f64> {
    let a = 2.0 * k as f64 * lambda * lambda / n as f64;
    (a < 1.0).then(|| (2.0 * PI / (1.0 - a)).sqrt())
}

/// `2 e^{r+1} m λ² k^{(r-2)/2} / n^{r/2}`, the bound on the squared
/// `(1, k)`-LDLR at `m` samples; `None` outside its hypothesis
/// `2 e m λ² k^{(r-2)/2} ≤ n^{r/2}`.
pub fn tensor_pca_ldlr_bound(n: usize, r: usize, m: u64, k: u32, lambda: f64) -> Option<f64> {
    let core = m as f64 * lambda * lambda * (k as f64).powf((r as f64 - 2.0) / 2.0) / (n as f64).powf(r as f64 / 2.0);
    (2.0 * E * core <= 1.0).then(|| 2.0 * E.powi(r as i32 + 1) * core)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldlr::{k_sample_lr_norm, ldlr_norm, SamplewiseDegree};
    use crate::measures::{AtomPlan, PairSource};

    #[test]
    fn closed_form_matches_mean_vectors() {
        let z = make_tensor_pca(4, 3, 0.8, PriorKind::Exact).unwrap();
        assert!(z.closed_form_discrepancy(Degree::Unbounded).unwrap() < 1e-12);
        assert!(z.closed_form_discrepancy(Degree::Finite(1)).unwrap() < 1e-12);
        // closed-form law against the explicit prior's pairs
        let a = z.closed_form_atoms(Degree::Finite(2)).unwrap();
        let b = z.problem().unwrap().pair_atoms(Degree::Finite(2), AtomPlan::Exact).unwrap();
        let fa = a.expect(|f, l| f * f + l);
        let fb = b.expect(|f, l| f * f + l);
        assert!((fa - fb).abs() < 1e-12);
    }

    #[test]
    fn zero_signal_is_null() {
        let z = make_tensor_pca(6, 2, 0.0, PriorKind::Exact).unwrap();
        let r = ldlr_norm(&z, 10, SamplewiseDegree::new(Degree::Unbounded, 3), AtomPlan::Exact).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn k_sample_bound_at_n6_r3() {
        let (n, k) = (6, 2);
        let lambda = 0.5 * (n as f64 / (2.0 * k as f64)).sqrt();
        let z = make_tensor_pca(n, 3, lambda, PriorKind::Exact).unwrap();
        let rep = k_sample_lr_norm(&z, k, AtomPlan::Exact).unwrap();
        assert!(rep.uncentered <= tensor_pca_k_sample_bound(n, k, lambda).unwrap());
    }

    #[test]
    fn hypotheses_reported() {
        assert!(tensor_pca_k_sample_bound(4, 2, 1.0).is_none());
        assert!(tensor_pca_ldlr_bound(4, 2, 100, 2, 1.0).is_none());
        assert!(tensor_pca_ldlr_bound(4, 2, 1, 2, 0.1).is_some());
    }

    #[test]
    fn sampled_prior_draws_sign_tensors() {
        let z = make_tensor_pca(3, 2, 1.0, PriorKind::Sampled).unwrap();
        let atoms = z
            .problem()
            .unwrap()
            .pair_atoms(Degree::Unbounded, AtomPlan::MonteCarlo { seed: 3, budget: 50 })
            .unwrap();
        // ⟨u,v⟩² ∈ {1, 1/9}
        for a in atoms.atoms {
            let c = (1.0 + a.full_x).ln();
            assert!((c - 1.0).abs() < 1e-12 || (c - 1.0 / 9.0).abs() < 1e-12);
        }
    }
}
