//! Multi-sample hypergraph planted clique and bipartite planted dense
//! subgraph.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;

use super::{check_prob, Param, ZooInstance};
use crate::error::{Error, Result};
use crate::measures::{
    Alternate, Degree, Null, PairAtom, Prior, ProductNull, Sampler, TestingProblem, Weighted,
};
use crate::noise::k_subsets;
use crate::numerics::{binomial, csum, ln_binomial};

/// Largest hyperedge count with tabulated coordinates.
const MAX_EDGES: f64 = (1u64 << 20) as f64;
/// Largest `C(N,K) · C(N,s)` for an enumerated prior.
const MAX_EXPLICIT_ENTRIES: f64 = (1u64 << 22) as f64;
const MAX_BIPARTITE_EXPLICIT_N: usize = 8;
const MAX_BIPARTITE_TABLE_N: usize = 20;
/// Largest number of coefficient tuples summed by the coefficient routes.
const MAX_TUPLES: f64 = 2e7;

fn hypergeometric(n: usize, k: usize, j: usize) -> f64 {
    let (n, k, j) = (n as f64, k as f64, j as f64);
    (ln_binomial(k, j) + ln_binomial(n - k, k - j) - ln_binomial(n, k)).exp()
}

/// Excesses when `c` hyperedges are shared: `(1+γ)^c - 1` and its
/// degree-`d` part `Σ_{1≤t≤d} C(c,t) γ^t`.
fn shared_edges_pair(c: u64, gamma: f64, d: Degree) -> Result<(f64, f64)> {
    let full = (c as f64 * gamma.ln_1p()).exp_m1();
    let low = match d {
        Degree::Unbounded => full,
        Degree::Finite(d) => {
            let top = (d as u64).min(c);
            let mut terms = Vec::with_capacity(top as usize);
            for t in 1..=top {
                terms.push((ln_binomial(c as f64, t as f64) + t as f64 * gamma.ln()).exp());
            }
            csum(terms)
        }
    };
    Ok((full, low))
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    small.iter().all(|x| big.binary_search(x).is_ok())
}

fn clique_alternate(edges: &[Vec<usize>], u: &[usize], q: f64) -> Alternate {
    Alternate::Product(
        edges
            .iter()
            .map(|e| if is_subset(e, u) { vec![0.0, 1.0] } else { vec![1.0 - q, q] })
            .collect(),
    )
}

fn random_subset(rng: &mut rand_chacha::ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut u = sample(rng, n, k).into_vec();
    u.sort_unstable();
    u
}

/// `D_∅ = G_s(N, q)` against `G_s(N, u, q)` with `u` a uniform `K`-subset;
/// coordinates are the `s`-subsets of `[N]` in lexicographic order.
pub fn make_multisample_hpc(n: usize, k: usize, s: usize, q: f64) -> Result<ZooInstance> {
    if k > n {
        return Err(Error::InvalidInput(format!("clique size K = {k} exceeds N = {n}")));
    }
    if s == 0 || s > k {
        return Err(Error::InvalidInput(format!("hyperedge size s = {s} must lie in 1..=K")));
    }
    check_prob("q", q, true, true)?;
    let gamma = (1.0 - q) / q;
    let params = vec![
        Param::count("N", n),
        Param::count("K", k),
        Param::count("s", s),
        Param::prob("q", q),
    ];
    let law = Arc::new(move |d: Degree| {
        (0..=k)
            .map(|j| {
                let c = binomial(j as u64, s as u64)?.round() as u64;
                let (full_x, low_x) = shared_edges_pair(c, gamma, d)?;
                Ok(PairAtom {
                    weight: hypergeometric(n, k, j),
                    full_x,
                    low_x,
                })
            })
            .filter(|a| !matches!(a, Ok(p) if p.weight == 0.0))
            .collect()
    });
    let n_edges = binomial(n as u64, s as u64)?;
    let n_alts = binomial(n as u64, k as u64).unwrap_or(f64::INFINITY);
    let mut formula = None;
    let problem = if n_edges <= MAX_EDGES {
        let edges = Arc::new(k_subsets(n, s));
        let null = Null::Product(ProductNull::bernoulli(edges.len(), q)?);
        if n_alts * n_edges <= MAX_EXPLICIT_ENTRIES {
            let sets = k_subsets(n, k);
            let list = sets
                .iter()
                .map(|u| Weighted {
                    label: format!("{u:?}"),
                    weight: 1.0 / sets.len() as f64,
                    alternate: clique_alternate(&edges, u, q),
                })
                .collect();
            let sets = Arc::new(sets);
            formula = Some(Arc::new(move |i: usize, j: usize, d: Degree| {
                let shared = sets[i].iter().filter(|x| sets[j].binary_search(x).is_ok()).count();
                shared_edges_pair(binomial(shared as u64, s as u64)?.round() as u64, gamma, d)
            }) as super::PairFormula);
            Some(TestingProblem::new("hpc", null, Prior::Explicit(list))?)
        } else {
            let sampler: Sampler = Arc::new(move |rng| Ok(clique_alternate(&edges, &random_subset(rng, n, k), q)));
            Some(TestingProblem::new("hpc", null, Prior::Sampler(sampler))?)
        }
    } else {
        None
    };
    Ok(ZooInstance::new("hpc", params, problem, Some(law), formula))
}

/// Fourier coefficient `C(K,|V|)/C(N,|V|) · γ^{½Σ|α_i|}` of `E_u D̄_u^{⊗m}`,
/// where `α_i` is the set of hyperedges (each a sorted vertex list) of
/// sample `i` and `V` the vertices they touch.
pub fn hpc_coefficient(n: usize, k: usize, q: f64, alpha: &[Vec<Vec<usize>>]) -> Result<f64> {
    let mut verts: Vec<usize> = alpha.iter().flatten().flatten().copied().collect();
    verts.sort_unstable();
    verts.dedup();
    let v = verts.len() as u64;
    if v > k as u64 {
        return Ok(0.0);
    }
    let edges: usize = alpha.iter().map(Vec::len).sum();
    let gamma = (1.0 - q) / q;
    Ok(binomial(k as u64, v)? / binomial(n as u64, v)? * gamma.powf(edges as f64 / 2.0))
}

/// Fourier coefficient `(K/N)^{|L|+|R|} γ^{½Σ|α_i|}` of `E_u D̄_u^{⊗m}` for
/// bipartite PDS, with `L` the samples whose `α_i` is nonempty and `R` the
/// union of the `α_i`.
pub fn bipartite_coefficient(n: usize, k: usize, p: f64, q: f64, alpha: &[Vec<usize>]) -> f64 {
    let gamma = (p - q).powi(2) / (q * (1.0 - q));
    let mut right: Vec<usize> = alpha.iter().flatten().copied().collect();
    right.sort_unstable();
    right.dedup();
    let left = alpha.iter().filter(|a| !a.is_empty()).count();
    let total: usize = alpha.iter().map(Vec::len).sum();
    let r = k as f64 / n as f64;
    r.powi((left + right.len()) as i32) * gamma.powf(total as f64 / 2.0)
}

/// Nonempty subsets of `0..universe` of size at most `d`.
fn small_subsets(universe: usize, d: usize) -> Vec<Vec<usize>> {
    (1..=d.min(universe)).flat_map(|j| k_subsets(universe, j)).collect()
}

/// `Σ_{t=1}^{k} C(m,t) Σ_{α_1..α_t} coef(α)²` over tuples of nonempty
/// per-sample index sets of size at most `d`.
fn ldlr_by_tuples<T: Clone>(
    blocks: &[T],
    m: u64,
    k: u32,
    coef: &dyn Fn(&[T]) -> Result<f64>,
) -> Result<f64> {
    if (k as u64) > m {
        return Err(Error::InvalidInput(format!("k = {k} exceeds m = {m}")));
    }
    if (blocks.len() as f64).powi(k as i32) > MAX_TUPLES {
        return Err(Error::StateCap {
            states: (blocks.len() as u128).saturating_pow(k),
            cap: MAX_TUPLES as u128,
        });
    }
    let mut total = Vec::new();
    for t in 1..=k as usize {
        let mut idx = vec![0usize; t];
        let mut acc = Vec::new();
        loop {
            let tuple: Vec<T> = idx.iter().map(|&i| blocks[i].clone()).collect();
            acc.push(coef(&tuple)?.powi(2));
            let Some(pos) = (0..t).rev().find(|&p| idx[p] + 1 < blocks.len()) else { break };
            idx[pos] += 1;
            for x in &mut idx[pos + 1..] {
                *x = 0;
            }
        }
        total.push(binomial(m, t as u64)? * csum(acc));
    }
    Ok(csum(total))
}

/// Squared `(d, k)`-LDLR at `m` samples for hypergraph planted clique,
/// summed over Fourier coefficients.
pub fn hpc_ldlr_by_coefficients(n: usize, k: usize, s: usize, q: f64, m: u64, d: u32, kk: u32) -> Result<f64> {
    let edges = k_subsets(n, s);
    let blocks: Vec<Vec<Vec<usize>>> = small_subsets(edges.len(), d as usize)
        .into_iter()
        .map(|set| set.into_iter().map(|e| edges[e].clone()).collect())
        .collect();
    ldlr_by_tuples(&blocks, m, kk, &|tuple| hpc_coefficient(n, k, q, tuple))
}

/// Squared `(d, k)`-LDLR at `m` samples for bipartite PDS, summed over
/// Fourier coefficients.
pub fn bipartite_ldlr_by_coefficients(n: usize, k: usize, p: f64, q: f64, m: u64, d: u32, kk: u32) -> Result<f64> {
    let blocks = small_subsets(n, d as usize);
    ldlr_by_tuples(&blocks, m, kk, &|tuple| Ok(bipartite_coefficient(n, k, p, q, tuple)))
}

/// Dense table of `D_u = (K/N) D'_u + (1 - K/N) Ber(q)^N` over `{0,1}^N`.
fn bipartite_table(n: usize, mask: u64, frac: f64, p: f64, q: f64) -> Vec<f64> {
    (0..1u64 << n)
        .map(|x| {
            let (mut planted, mut base) = (1.0, 1.0);
            for i in 0..n {
                let one = x >> i & 1 == 1;
                let bq = if one { q } else { 1.0 - q };
                base *= bq;
                planted *= if mask >> i & 1 == 1 {
                    if one {
                        p
                    } else {
                        1.0 - p
                    }
                } else {
                    bq
                };
            }
            frac * planted + (1.0 - frac) * base
        })
        .collect()
}

/// `D_∅ = Ber(q)^N` against the mixture `(K/N) D'_u + (1 - K/N) D_∅` with
/// each vertex in `u` independently with probability `K/N`.
pub fn make_bipartite_pds(n: usize, k: usize, p: f64, q: f64) -> Result<ZooInstance> {
    if k > n || n == 0 {
        return Err(Error::InvalidInput(format!("need 0 < K ≤ N, got K = {k}, N = {n}")));
    }
    check_prob("q", q, true, true)?;
    check_prob("p", p, true, false)?;
    if p <= q {
        return Err(Error::InvalidInput(format!("need q < p, got p = {p}, q = {q}")));
    }
    let frac = k as f64 / n as f64;
    let gamma = (p - q).powi(2) / (q * (1.0 - q));
    let params = vec![
        Param::count("N", n),
        Param::count("K", k),
        Param::prob("p", p),
        Param::prob("q", q),
    ];
    let pair_at = move |shared: u64, d: Degree| -> Result<(f64, f64)> {
        let (f, l) = shared_edges_pair(shared, gamma, d)?;
        Ok((frac * frac * f, frac * frac * l))
    };
    // |u ∩ v| ~ Bin(N, (K/N)²)
    let law = Arc::new(move |d: Degree| {
        let r2 = frac * frac;
        (0..=n)
            .map(|j| {
                let (full_x, low_x) = pair_at(j as u64, d)?;
                let ln_w = ln_binomial(n as f64, j as f64)
                    + j as f64 * r2.ln()
                    + (n - j) as f64 * (-r2).ln_1p();
                Ok(PairAtom {
                    weight: if r2 == 1.0 { (j == n) as u8 as f64 } else { ln_w.exp() },
                    full_x,
                    low_x,
                })
            })
            .collect()
    });
    let mut formula = None;
    let problem = if n <= MAX_BIPARTITE_TABLE_N {
        let null = Null::Product(ProductNull::bernoulli(n, q)?);
        if n <= MAX_BIPARTITE_EXPLICIT_N {
            let list = (0..1u64 << n)
                .map(|mask| {
                    let size = mask.count_ones() as i32;
                    Weighted {
                        label: format!("{mask:0n$b}"),
                        weight: frac.powi(size) * (1.0 - frac).powi(n as i32 - size),
                        alternate: Alternate::Table(bipartite_table(n, mask, frac, p, q)),
                    }
                })
                .filter(|w| w.weight > 0.0)
                .collect::<Vec<_>>();
            let masks: Arc<Vec<u64>> = Arc::new(
                (0..1u64 << n)
                    .filter(|m| {
                        let size = m.count_ones() as i32;
                        frac.powi(size) * (1.0 - frac).powi(n as i32 - size) > 0.0
                    })
                    .collect(),
            );
            formula = Some(Arc::new(move |i: usize, j: usize, d: Degree| {
                pair_at((masks[i] & masks[j]).count_ones() as u64, d)
            }) as super::PairFormula);
            Some(TestingProblem::new("bipartite_pds", null, Prior::Explicit(list))?)
        } else {
            let sampler: Sampler = Arc::new(move |rng| {
                let mut mask = 0u64;
                for i in 0..n {
                    if rng.random::<f64>() < frac {
                        mask |= 1 << i;
                    }
                }
                Ok(Alternate::Table(bipartite_table(n, mask, frac, p, q)))
            });
            Some(TestingProblem::new("bipartite_pds", null, Prior::Sampler(sampler))?)
        }
    } else {
        None
    };
    Ok(ZooInstance::new("bipartite_pds", params, problem, Some(law), formula))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldlr::{brute_force_ldlr, ldlr_norm, SamplewiseDegree};
    use crate::measures::{fourier_coefficients, AtomPlan};

    #[test]
    fn hpc_closed_form_all_pairs() {
        for q in [0.5, 0.75] {
            let z = make_multisample_hpc(6, 3, 2, q).unwrap();
            assert!(z.closed_form_discrepancy(Degree::Unbounded).unwrap() < 1e-10);
            assert!(z.closed_form_discrepancy(Degree::Finite(2)).unwrap() < 1e-10);
        }
    }

    #[test]
    fn disjoint_cliques_are_uncorrelated() {
        let z = make_multisample_hpc(6, 2, 2, 0.5).unwrap();
        // alternates {0,1} and {2,3} share no vertex
        let sets = k_subsets(6, 2);
        let i = sets.iter().position(|u| u == &vec![0, 1]).unwrap();
        let j = sets.iter().position(|u| u == &vec![2, 3]).unwrap();
        let f = z.formula.as_ref().unwrap();
        assert_eq!(f(i, j, Degree::Unbounded).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn hpc_coefficient_route_matches_identity() {
        let (n, k, s, q) = (4, 3, 2, 0.6);
        let z = make_multisample_hpc(n, k, s, q).unwrap();
        for (m, d, kk) in [(2u64, 1u32, 1u32), (3, 1, 2), (2, 2, 2)] {
            let by_coef = hpc_ldlr_by_coefficients(n, k, s, q, m, d, kk).unwrap();
            let id = ldlr_norm(&z, m, SamplewiseDegree::new(Degree::Finite(d), kk), AtomPlan::Exact).unwrap();
            assert!((by_coef - id.value).abs() < 1e-10, "{by_coef} vs {}", id.value);
        }
    }

    #[test]
    fn bipartite_coefficients_match_fourier_transform() {
        let (n, k, p, q) = (5, 2, 0.9, 0.4);
        let z = make_bipartite_pds(n, k, p, q).unwrap();
        let list = z.problem().unwrap().explicit().unwrap();
        // mixture of D_u^{⊗2} over {0,1}^{2N}, sample 0 in the low bits
        let mut mix = vec![0.0; 1 << (2 * n)];
        for w in list {
            let Alternate::Table(t) = &w.alternate else { panic!() };
            for (b, tb) in t.iter().enumerate() {
                for (a, ta) in t.iter().enumerate() {
                    mix[a | b << n] += w.weight * ta * tb;
                }
            }
        }
        let null = ProductNull::bernoulli(2 * n, q).unwrap();
        let coeffs = fourier_coefficients(&null, &mix);
        let mut worst = 0.0f64;
        for (idx, c) in coeffs.iter().enumerate() {
            let a0: Vec<usize> = (0..n).filter(|i| idx >> i & 1 == 1).collect();
            let a1: Vec<usize> = (0..n).filter(|i| idx >> (i + n) & 1 == 1).collect();
            worst = worst.max((c - bipartite_coefficient(n, k, p, q, &[a0, a1])).abs());
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn bipartite_routes_agree() {
        let (n, k, p, q) = (4, 2, 0.8, 0.3);
        let z = make_bipartite_pds(n, k, p, q).unwrap();
        assert!(z.closed_form_discrepancy(Degree::Unbounded).unwrap() < 1e-12);
        assert!(z.closed_form_discrepancy(Degree::Finite(1)).unwrap() < 1e-12);
        let deg = SamplewiseDegree::new(Degree::Finite(2), 2);
        let id = ldlr_norm(&z, 3, deg, AtomPlan::Exact).unwrap().value;
        let coef = bipartite_ldlr_by_coefficients(n, k, p, q, 3, 2, 2).unwrap();
        let brute = brute_force_ldlr(z.problem().unwrap(), 2, deg).unwrap().value;
        let id2 = ldlr_norm(&z, 2, deg, AtomPlan::Exact).unwrap().value;
        assert!((id - coef).abs() < 1e-10);
        assert!((brute - id2).abs() < 1e-10);
    }

    #[test]
    fn k_above_n_rejected() {
        assert!(make_multisample_hpc(3, 4, 2, 0.5).is_err());
        assert!(make_bipartite_pds(3, 4, 0.9, 0.5).is_err());
    }

    #[test]
    fn large_instance_is_closed_form_only() {
        let z = make_multisample_hpc(100_000, 300, 2, 0.99).unwrap();
        assert!(z.problem().is_err());
        let a = z.closed_form_atoms(Degree::Unbounded).unwrap();
        let mass: f64 = a.atoms.iter().map(|x| x.weight).sum();
        assert!((mass - 1.0).abs() < 1e-9);
    }
}
