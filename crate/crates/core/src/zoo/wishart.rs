//! Sparse spiked covariance: `D_s = N(0, I + λ s sᵀ)` with `s = s'/√(ρn)`,
//! `s'` having i.i.d. entries in `{0, ±1}` and `s = 0` once
//! `‖s'‖² > 2ρn`.
//!
//! Pairs satisfy `⟨D̄_u, D̄_v⟩ = (1 - λ²⟨u,v⟩²)^{-1/2} = φ(λ²⟨u,v⟩²/4)` with
//! `φ(x) = Σ_ℓ C(2ℓ,ℓ) x^ℓ`, and the degree-`d` part keeps `ℓ ≤ ⌊d/2⌋`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::distribution::{Binomial, DiscreteCDF};
use statrs::function::factorial::ln_factorial;

use super::{Param, PriorKind, ZooInstance};
use crate::error::{Error, Result};
use crate::measures::{Alternate, Degree, Null, PairAtom, Prior, Sampler, TestingProblem, Weighted};
use crate::numerics::{binomial, csum, double_factorial, factorial, ln_binomial};

const MAX_EXPLICIT_N: usize = 6;
const MAX_TUPLES: u64 = 20_000_000;

fn check(n: usize, rho: f64, lambda: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("wishart needs n ≥ 1".into()));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidInput(format!("rho = {rho} outside (0, 1]")));
    }
    if !(0.0..0.5).contains(&lambda) {
        return Err(Error::InvalidInput(format!(
            "lambda = {lambda} outside [0, 1/2), where the φ series converges"
        )));
    }
    Ok(())
}

/// Largest admissible `‖s'‖²`.
fn support_cap(n: usize, rho: f64) -> usize {
    (2.0 * rho * n as f64).floor() as usize
}

/// `k ln p` with `0 ln 0 = 0`.
fn xlny(k: usize, lnp: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * lnp
    }
}

/// Pair excesses at overlap `ip = ⟨u, v⟩`.
fn pair_at(lambda: f64, ip: f64, d: Degree) -> (f64, f64) {
    let a = lambda * lambda * ip * ip;
    let full = (-0.5 * (-a).ln_1p()).exp_m1();
    let low = match d {
        Degree::Unbounded => full,
        Degree::Finite(d) => {
            let z = a / 4.0;
            let mut term = 1.0;
            let mut acc = Vec::new();
            for l in 1..=(d / 2) as u64 {
                // C(2l,l) / C(2l-2,l-1) = 2(2l-1)/l
                term *= z * 2.0 * (2 * l - 1) as f64 / l as f64;
                acc.push(term);
            }
            csum(acc)
        }
    };
    (full, low)
}

#[allow(clippy::needless_range_loop)]
fn pair_law(n: usize, rho: f64, lambda: f64, d: Degree) -> Vec<PairAtom> {
    let lnf = |k: usize| ln_factorial(k as u64);
    let t = support_cap(n, rho);
    let (lr, lq) = (rho.ln(), (1.0 - rho).ln());
    // weight of n11 = a with both supports inside the cap
    let mut by_shared = vec![0.0; t + 1];
    for a in 0..=t {
        for b in 0..=(t - a) {
            for c in 0..=(t - a) {
                if a + b + c > n {
                    continue;
                }
                let rest = n - a - b - c;
                let ln_multi = lnf(n)
                    - lnf(a)
                    - lnf(b)
                    - lnf(c)
                    - lnf(rest);
                let lw = ln_multi + xlny(2 * a, lr) + xlny(b + c, lr) + xlny(b + c, lq) + xlny(2 * rest, lq);
                by_shared[a] += lw.exp();
            }
        }
    }
    let mut atoms = Vec::new();
    let scale = rho * n as f64;
    for (a, &w) in by_shared.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for h in 0..=a {
            let wh = w * (ln_binomial(a as f64, h as f64) - a as f64 * std::f64::consts::LN_2).exp();
            let (full_x, low_x) = pair_at(lambda, (a as f64 - 2.0 * h as f64) / scale, d);
            atoms.push(PairAtom {
                weight: wh,
                full_x,
                low_x,
            });
        }
    }
    let rest = 1.0 - csum(atoms.iter().map(|a| a.weight));
    if rest > 0.0 {
        atoms.push(PairAtom {
            weight: rest,
            full_x: 0.0,
            low_x: 0.0,
        });
    }
    atoms
}

/// `A` with `(I + A)^{-1} = I + λ s sᵀ`.
fn perturbation(s: &[f64], lambda: f64) -> DMatrix<f64> {
    let v = DVector::from_column_slice(s);
    let c = -lambda / (1.0 + lambda * v.norm_squared());
    &v * v.transpose() * c
}

/// All spikes with their probabilities, truncated ones merged into `s = 0`.
fn spike_table(n: usize, rho: f64) -> Vec<(f64, Vec<f64>)> {
    let t = support_cap(n, rho);
    let scale = 1.0 / (rho * n as f64).sqrt();
    let mut zero = 0.0;
    let mut out = Vec::new();
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let mut s = vec![0.0; n];
        let mut w = 1.0;
        let mut support = 0;
        for x in s.iter_mut() {
            match c % 3 {
                0 => w *= 1.0 - rho,
                1 => {
                    w *= rho / 2.0;
                    *x = scale;
                    support += 1;
                }
                _ => {
                    w *= rho / 2.0;
                    *x = -scale;
                    support += 1;
                }
            }
            c /= 3;
        }
        if w == 0.0 {
            continue;
        }
        if support > t || support == 0 {
            zero += w;
        } else {
            out.push((w, s));
        }
    }
    if zero > 0.0 {
        out.push((zero, vec![0.0; n]));
    }
    out
}

fn draw_spike(rng: &mut impl Rng, n: usize, rho: f64) -> Vec<f64> {
    let t = support_cap(n, rho);
    let scale = 1.0 / (rho * n as f64).sqrt();
    let mut s = vec![0.0; n];
    let mut support = 0;
    for x in s.iter_mut() {
        if rng.random::<f64>() < rho {
            *x = if rng.random::<bool>() { scale } else { -scale };
            support += 1;
        }
    }
    if support > t {
        s.fill(0.0);
    }
    s
}

pub fn make_spiked_wishart(n: usize, rho: f64, lambda: f64, prior: PriorKind) -> Result<ZooInstance> {
    check(n, rho, lambda)?;
    let params = vec![Param::count("n", n), Param::prob("rho", rho), Param::signal("lambda", lambda)];
    let null = Null::Gaussian { dim: n };
    let (problem, formula) = match prior {
        PriorKind::Exact => {
            if n > MAX_EXPLICIT_N {
                return Err(Error::StateCap {
                    states: 3u128.pow(n as u32),
                    cap: 3u128.pow(MAX_EXPLICIT_N as u32),
                });
            }
            let table = spike_table(n, rho);
            let list = table
                .iter()
                .enumerate()
                .map(|(i, (w, s))| Weighted {
                    label: format!("spike{i}"),
                    weight: *w,
                    alternate: Alternate::Covariance(perturbation(s, lambda)),
                })
                .collect();
            let spikes: Vec<Vec<f64>> = table.into_iter().map(|(_, s)| s).collect();
            let formula: super::PairFormula = Arc::new(move |i: usize, j: usize, d: Degree| {
                let ip = csum(spikes[i].iter().zip(&spikes[j]).map(|(a, b)| a * b));
                Ok(pair_at(lambda, ip, d))
            });
            (TestingProblem::new("wishart", null, Prior::Explicit(list))?, Some(formula))
        }
        PriorKind::Sampled => {
            let sampler: Sampler = Arc::new(move |rng| Ok(Alternate::Covariance(perturbation(&draw_spike(rng, n, rho), lambda))));
            (TestingProblem::new("wishart", null, Prior::Sampler(sampler))?, None)
        }
    };
    let law = Arc::new(move |d: Degree| Ok(pair_law(n, rho, lambda, d)));
    Ok(ZooInstance::new("wishart", params, Some(problem), Some(law), formula))
}

/// `E u^β` under the truncated spike law: zero unless every `β_j` is even,
/// else `(ρn)^{-|β|/2} ρ^{|B|} P(Bin(n-|B|, ρ) ≤ ⌊2ρn⌋ - |B|)` with
/// `B = supp β`.
pub fn wishart_u_moment(n: usize, rho: f64, beta: &[usize]) -> Result<f64> {
    if beta.len() != n {
        return Err(Error::DimensionMismatch(format!("multi-index of length {} for n = {n}", beta.len())));
    }
    if beta.iter().any(|b| b % 2 == 1) {
        return Ok(0.0);
    }
    let total: usize = beta.iter().sum();
    if total == 0 {
        return Ok(1.0);
    }
    let support = beta.iter().filter(|&&b| b > 0).count();
    let t = support_cap(n, rho);
    if support > t {
        return Ok(0.0);
    }
    let tail = if support == n {
        1.0
    } else {
        Binomial::new(rho, (n - support) as u64)
            .map_err(|e| Error::InvalidInput(e.to_string()))?
            .cdf((t - support) as u64)
    };
    Ok((rho * n as f64).powf(-(total as f64) / 2.0) * rho.powi(support as i32) * tail)
}

/// `(E_u ⟨D̄_u, H_α⟩)²` for a tuple of per-sample multi-indices `α_i`:
/// `λ^{Σ|α_i|} Π ((|α_i|-1)!!)² / α_i! · (E u^{Σα_i})²`, zero when some
/// `|α_i|` is odd.
pub fn wishart_coefficient_square(n: usize, rho: f64, lambda: f64, alpha: &[Vec<usize>]) -> Result<f64> {
    check(n, rho, lambda)?;
    let mut sum = vec![0usize; n];
    let mut factor = 1.0;
    for a in alpha {
        if a.len() != n {
            return Err(Error::DimensionMismatch(format!("multi-index of length {} for n = {n}", a.len())));
        }
        let deg: usize = a.iter().sum();
        if deg % 2 == 1 {
            return Ok(0.0);
        }
        let df = double_factorial(deg as i64 - 1);
        factor *= lambda.powi(deg as i32) * df * df / a.iter().map(|&x| factorial(x as u64)).product::<f64>();
        for (s, x) in sum.iter_mut().zip(a) {
            *s += x;
        }
    }
    let mom = wishart_u_moment(n, rho, &sum)?;
    Ok(factor * mom * mom)
}

/// Multi-indices over `n` coordinates with total degree `deg`.
fn compositions(n: usize, deg: usize) -> Vec<Vec<usize>> {
    fn rec(j: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if j + 1 == cur.len() {
            cur[j] = left;
            out.push(cur.clone());
            return;
        }
        for x in (0..=left).rev() {
            cur[j] = x;
            rec(j + 1, left - x, cur, out);
        }
    }
    let mut out = Vec::new();
    rec(0, deg, &mut vec![0; n], &mut out);
    out
}

/// Squared `(d, k)`-LDLR at `m` samples summed over Hermite coefficients:
/// `Σ_{t≤k} C(m,t) Σ (E_u⟨D̄_u, H_α⟩)²` over tuples with every `|α_i|` even
/// in `[2, d]`.
pub fn wishart_ldlr_by_hermite(n: usize, rho: f64, lambda: f64, m: u64, d: u32, k: u32) -> Result<f64> {
    check(n, rho, lambda)?;
    let mut singles = Vec::new();
    for deg in (2..=d as usize).step_by(2) {
        for a in compositions(n, deg) {
            let df = double_factorial(deg as i64 - 1);
            let w = lambda.powi(deg as i32) * df * df / a.iter().map(|&x| factorial(x as u64)).product::<f64>();
            singles.push((w, a));
        }
    }
    if singles.is_empty() {
        return Ok(0.0);
    }
    let mut total = Vec::new();
    for t in 1..=k.min(m.min(u32::MAX as u64) as u32) as usize {
        let count = (singles.len() as u64).checked_pow(t as u32).unwrap_or(u64::MAX);
        if count > MAX_TUPLES {
            return Err(Error::StateCap {
                states: count as u128,
                cap: MAX_TUPLES as u128,
            });
        }
        let mut idx = vec![0usize; t];
        let mut acc = Vec::with_capacity(count as usize);
        loop {
            let mut beta = vec![0usize; n];
            let mut w = 1.0;
            for &i in &idx {
                w *= singles[i].0;
                for (b, x) in beta.iter_mut().zip(&singles[i].1) {
                    *b += x;
                }
            }
            let mom = wishart_u_moment(n, rho, &beta)?;
            acc.push(w * mom * mom);
            // odometer
            let mut p = 0;
            while p < t {
                idx[p] += 1;
                if idx[p] < singles.len() {
                    break;
                }
                idx[p] = 0;
                p += 1;
            }
            if p == t {
                break;
            }
        }
        total.push(binomial(m, t as u64)? * csum(acc));
    }
    Ok(csum(total))
}

/// `(λ²/(4ρn))^{k(d+1)}`, the closed-form bound on `‖E_u (D̄_u^{>d})^{⊗k}‖²`;
/// `None` outside its hypotheses `2nk(d+1)ρ² ≤ 1`, `λ < 1/2`, `d` even.
pub fn wishart_high_degree_bound(n: usize, rho: f64, lambda: f64, d: u32, k: u32) -> Option<f64> {
    let kd = k as f64 * (d as f64 + 1.0);
    let ok = 2.0 * n as f64 * kd * rho * rho <= 1.0 && lambda < 0.5 && d.is_multiple_of(2);
    ok.then(|| (lambda * lambda / (4.0 * rho * n as f64)).powf(kd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldlr::{high_degree_norm, ldlr_norm, SamplewiseDegree};
    use crate::measures::{AtomPlan, PairSource};

    #[test]
    fn closed_form_matches_determinant() {
        for &(n, rho) in &[(3, 0.5), (4, 0.4), (5, 1.0)] {
            let z = make_spiked_wishart(n, rho, 0.45, PriorKind::Exact).unwrap();
            assert!(z.closed_form_discrepancy(Degree::Unbounded).unwrap() < 1e-10);
            assert!(z.closed_form_discrepancy(Degree::Finite(1)).unwrap() < 1e-12);
            let law = z.closed_form_atoms(Degree::Unbounded).unwrap();
            let brute = z.problem().unwrap().pair_atoms(Degree::Unbounded, AtomPlan::Exact).unwrap();
            for k in 1..4 {
                let a = law.expect(|f, _| f.powi(k));
                let b = brute.expect(|f, _| f.powi(k));
                assert!((a - b).abs() < 1e-12, "n={n} k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn odd_degree_coefficients_vanish() {
        let c = wishart_coefficient_square(3, 0.5, 0.3, &[vec![1, 0, 0], vec![1, 1, 1]]).unwrap();
        assert_eq!(c, 0.0);
        // even degrees but an odd combined exponent
        let c = wishart_coefficient_square(3, 0.5, 0.3, &[vec![1, 1, 0], vec![2, 0, 0]]).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn orthogonal_spikes_are_uncorrelated() {
        assert_eq!(pair_at(0.4, 0.0, Degree::Unbounded), (0.0, 0.0));
    }

    #[test]
    fn moments_match_direct_summation() {
        let (n, rho) = (4, 0.6);
        let table = spike_table(n, rho);
        for beta in [vec![2, 0, 0, 0], vec![2, 2, 0, 0], vec![4, 2, 0, 0], vec![2, 2, 2, 0], vec![1, 1, 0, 0]] {
            let direct = csum(table.iter().map(|(w, s)| {
                w * s.iter().zip(&beta).map(|(x, &b)| x.powi(b as i32)).product::<f64>()
            }));
            let formula = wishart_u_moment(n, rho, &beta).unwrap();
            assert!((direct - formula).abs() < 1e-14, "{beta:?}: {direct} vs {formula}");
        }
    }

    #[test]
    fn hermite_route_matches_pair_route() {
        let (n, rho, lambda) = (3, 0.5, 0.4);
        let z = make_spiked_wishart(n, rho, lambda, PriorKind::Exact).unwrap();
        for &(m, d, k) in &[(4u64, 2u32, 2u32), (6, 4, 2), (3, 2, 3)] {
            let a = wishart_ldlr_by_hermite(n, rho, lambda, m, d, k).unwrap();
            let b = ldlr_norm(&z, m, SamplewiseDegree::new(Degree::Finite(d), k), AtomPlan::Exact)
                .unwrap()
                .value;
            assert!((a - b).abs() < 1e-12 * b.max(1.0), "m={m} d={d} k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn lambda_at_half_rejected() {
        assert!(make_spiked_wishart(4, 0.5, 0.5, PriorKind::Sampled).is_err());
    }

    /// At `n = 8, d = 2, k = 2` the closed-form high-degree bound fails: a shared
    /// coordinate already gives `E(φ^{>1}(Z))² ≫ (λ²/(4ρn))^6`.
    #[test]
    fn high_degree_bound_fails_at_small_n() {
        let (n, d, k, lambda) = (8, 2, 2, 0.45);
        let rho = 0.99 / (2.0 * n as f64 * k as f64 * (d as f64 + 1.0)).sqrt();
        let bound = wishart_high_degree_bound(n, rho, lambda, d, k).unwrap();
        let z = make_spiked_wishart(n, rho, lambda, PriorKind::Sampled).unwrap();
        let lhs = high_degree_norm(&z, Degree::Finite(d), k, AtomPlan::Exact).unwrap();
        // series oracle: Σ_{ℓ≥2} C(2ℓ,ℓ) z^ℓ summed to a negligible tail
        let atoms = z.closed_form_atoms(Degree::Unbounded).unwrap();
        let series = atoms.expect(|f, _| {
            let ip2 = (1.0 - (1.0 + f).powi(-2)) / (lambda * lambda);
            let zz = lambda * lambda * ip2 / 4.0;
            let mut c = 2.0;
            let mut acc = 0.0;
            for l in 2..200u32 {
                c *= 2.0 * (2 * l - 1) as f64 / l as f64;
                acc += c * zz.powi(l as i32);
            }
            assert!(c * zz.powi(199) < 1e-30);
            acc.powi(k as i32)
        });
        assert!((lhs - series).abs() < 1e-12 * lhs, "{lhs} vs {series}");
        assert!(lhs > bound, "{lhs} vs {bound}");
    }
}
