//! Planted sparse parities: `D_u` uniform on `{±1}^n` conditioned on
//! `x^u = 1`, i.e. relative density `1 + χ_u`.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::index::sample;

use super::{Param, ZooInstance};
use crate::error::{Error, Result};
use crate::measures::{Alternate, Degree, Null, PairAtom, Prior, ProductNull, Sampler, TestingProblem};
use crate::noise::k_subsets;
use crate::numerics::ln_binomial;

/// Families up to this size are enumerated.
const MAX_EXPLICIT: f64 = 65_536.0;

/// Pair law of uniformly weighted distinct parities: `x = 1` on the
/// diagonal, `0` elsewhere.
fn parity_law(size: f64, s: usize, d: Degree) -> Vec<PairAtom> {
    let diag = 1.0 / size;
    let low = if d.admits(s as u32) { 1.0 } else { 0.0 };
    let mut atoms = vec![PairAtom {
        weight: diag,
        full_x: 1.0,
        low_x: low,
    }];
    if diag < 1.0 {
        atoms.push(PairAtom {
            weight: 1.0 - diag,
            full_x: 0.0,
            low_x: 0.0,
        });
    }
    atoms
}

fn parity_problem(n: usize, set: Vec<Vec<usize>>) -> Result<TestingProblem> {
    let alts = set
        .into_iter()
        .map(|subset| Alternate::ParityBump { subset, amplitude: 1.0 })
        .collect();
    TestingProblem::new("sparse_parity", Null::Product(ProductNull::uniform_binary(n)), Prior::uniform(alts))
}

/// A uniform prior over the given distinct `s`-sparse parities.
pub fn make_sparse_parity(n: usize, s: usize, parity_set: Vec<Vec<usize>>) -> Result<ZooInstance> {
    if parity_set.is_empty() {
        return Err(Error::InvalidInput("parity set is empty".into()));
    }
    let mut seen = BTreeSet::new();
    let mut set = Vec::with_capacity(parity_set.len());
    for mut u in parity_set {
        u.sort_unstable();
        if u.len() != s || u.windows(2).any(|w| w[0] == w[1]) || u.iter().any(|&j| j >= n) {
            return Err(Error::InvalidInput(format!("{u:?} is not an {s}-subset of 0..{n}")));
        }
        if !seen.insert(u.clone()) {
            return Err(Error::InvalidInput(format!("duplicate parity {u:?}")));
        }
        set.push(u);
    }
    let size = set.len();
    let params = vec![Param::count("n", n), Param::count("s", s), Param::count("size", size)];
    let problem = parity_problem(n, set)?;
    let law = Arc::new(move |d: Degree| Ok(parity_law(size as f64, s, d)));
    let formula = Arc::new(move |i: usize, j: usize, d: Degree| {
        let x = (i == j) as u8 as f64;
        Ok((x, if d.admits(s as u32) { x } else { 0.0 }))
    });
    Ok(ZooInstance::new("sparse_parity", params, Some(problem), Some(law), Some(formula)))
}

/// Every `s`-subset of `[n]`. Enumerated when small; otherwise a sampled
/// prior with the exact closed-form pair law.
pub fn make_sparse_parity_family(n: usize, s: usize) -> Result<ZooInstance> {
    if s == 0 || s > n {
        return Err(Error::InvalidInput(format!("need 1 ≤ s ≤ n, got s = {s}, n = {n}")));
    }
    let size = ln_binomial(n as f64, s as f64).exp();
    if !size.is_finite() {
        return Err(Error::Overflow(format!("C({n},{s}) does not fit in a float")));
    }
    if size <= MAX_EXPLICIT {
        return make_sparse_parity(n, s, k_subsets(n, s));
    }
    let params = vec![Param::count("n", n), Param::count("s", s), Param::signal("size", size)];
    let sampler: Sampler = Arc::new(move |rng| {
        let mut subset = sample(rng, n, s).into_vec();
        subset.sort_unstable();
        Ok(Alternate::ParityBump { subset, amplitude: 1.0 })
    });
    let problem = TestingProblem::new(
        "sparse_parity",
        Null::Product(ProductNull::uniform_binary(n)),
        Prior::Sampler(sampler),
    )?;
    let law = Arc::new(move |d: Degree| Ok(parity_law(size, s, d)));
    Ok(ZooInstance::new("sparse_parity", params, Some(problem), Some(law), None))
}

/// `10^{4k} m^{2k}`, the family size at which `SDA(m') ≥ 100^k (m/m')^k`
/// holds for every `m' ≤ m`.
pub fn parity_family_size(k: u32, m: u64) -> f64 {
    10f64.powi(4 * k as i32) * (m as f64).powi(2 * k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldlr::{k_sample_lr_norm, ldlr_norm, SamplewiseDegree};
    use crate::measures::{correlation_atoms, AtomPlan};

    #[test]
    fn below_order_ldlr_vanishes() {
        let z = make_sparse_parity(6, 3, k_subsets(6, 3).into_iter().take(8).collect()).unwrap();
        let r = ldlr_norm(&z, 20, SamplewiseDegree::new(Degree::Finite(2), 20), AtomPlan::Exact).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(z.closed_form_discrepancy(Degree::Finite(2)).unwrap() == 0.0);
        assert!(z.closed_form_discrepancy(Degree::Unbounded).unwrap() == 0.0);
    }

    #[test]
    fn k_sample_at_most_two() {
        let k = 3;
        let z = make_sparse_parity(8, 2, k_subsets(8, 2).into_iter().take(1 << k).collect()).unwrap();
        let r = k_sample_lr_norm(&z, k, AtomPlan::Exact).unwrap();
        assert!(r.uncentered <= 2.0, "{}", r.uncentered);
    }

    #[test]
    fn single_parity_single_atom() {
        let z = make_sparse_parity(4, 2, vec![vec![1, 3]]).unwrap();
        let a = correlation_atoms(&z, true, 0, 0).unwrap();
        assert_eq!(a.atoms, vec![(1.0, 1.0)]);
    }

    #[test]
    fn duplicates_rejected() {
        assert!(make_sparse_parity(4, 2, vec![vec![0, 1], vec![1, 0]]).is_err());
        assert!(make_sparse_parity(4, 2, vec![vec![0, 4]]).is_err());
    }

    #[test]
    fn huge_family_closed_form() {
        let z = make_sparse_parity_family(4000, 20).unwrap();
        assert!(!z.has_explicit_prior());
        assert!(z.param("size").unwrap() > parity_family_size(8, 10));
        let a = z.closed_form_atoms(Degree::Unbounded).unwrap();
        assert_eq!(a.atoms.len(), 2);
    }
}
