use crate::error::{Error, Result};
use crate::measures::{axis_transform, ProductNull, TestingProblem, DENSE_STATE_CAP};
use crate::numerics::csum;

use super::{Backend, LdlrReport, SamplewiseDegree};

const GS_TOL: f64 = 1e-12;
const BASIS_STATE_CAP: usize = 4096;

/// Orthonormal basis of functions of one sample, ordered by stratum.
///
/// Built by Gram–Schmidt (two passes) over the indicator monomials
/// `Π_{j∈T} 1[x_j = a_j]`, where each `a_j` ranges over all but the last
/// symbol of coordinate `j`. `strata[r]` is `|T|` of the monomial that
/// produced vector `r`, so vectors of stratum at most `d` span exactly the
/// functions of degree at most `d`.
#[derive(Clone, Debug)]
pub struct SampleBasis {
    pub vectors: Vec<Vec<f64>>,
    pub strata: Vec<u32>,
    pub weights: Vec<f64>,
}

pub fn sample_basis(null: &ProductNull) -> Result<SampleBasis> {
    let s = null.checked_states(BASIS_STATE_CAP as u128)?;
    let weights = null.table()?;
    let radices = null.radices();
    let n = radices.len();
    let mut symbols = vec![0usize; n];
    let states: Vec<Vec<usize>> = (0..s)
        .map(|x| {
            null.decode(x, &mut symbols);
            symbols.clone()
        })
        .collect();

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut strata = Vec::with_capacity(s);
    let ip = |a: &[f64], b: &[f64]| csum(a.iter().zip(b).zip(&weights).map(|((x, y), w)| x * y * w));

    for size in 0..=n {
        for subset in subsets_of_size(n, size) {
            // every assignment of non-last symbols to the chosen coordinates
            let counts: Vec<usize> = subset.iter().map(|&j| radices[j] - 1).collect();
            let total: usize = counts.iter().product();
            for code in 0..total {
                let mut c = code;
                let assign: Vec<usize> = counts
                    .iter()
                    .map(|&k| {
                        let a = c % k;
                        c /= k;
                        a
                    })
                    .collect();
                let mut v: Vec<f64> = states
                    .iter()
                    .map(|x| {
                        let hit = subset.iter().zip(&assign).all(|(&j, &a)| x[j] == a);
                        if hit {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let norm0 = ip(&v, &v).sqrt();
                for _ in 0..2 {
                    for b in &vectors {
                        let c = ip(&v, b);
                        for (vi, bi) in v.iter_mut().zip(b) {
                            *vi -= c * bi;
                        }
                    }
                }
                let norm = ip(&v, &v).sqrt();
                if norm <= GS_TOL * norm0.max(1.0) {
                    continue;
                }
                v.iter_mut().for_each(|x| *x /= norm);
                vectors.push(v);
                strata.push(size as u32);
            }
        }
    }
    if vectors.len() != s {
        return Err(Error::InvalidInput(format!(
            "Gram-Schmidt produced {} vectors for {s} states",
            vectors.len()
        )));
    }
    Ok(SampleBasis {
        vectors,
        strata,
        weights,
    })
}

fn subsets_of_size(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    rec(0, n, size, &mut cur, &mut out);
    out
}

struct Projection {
    coeffs: Vec<f64>,
    basis: SampleBasis,
    s: usize,
}

/// Coefficients of `E_u D̄_u^{⊗m} - 1` in the product basis, with every
/// tuple outside samplewise degree `(d, k)` zeroed.
fn project(problem: &TestingProblem, m: u32, degree: SamplewiseDegree) -> Result<Projection> {
    let null = problem.null.as_product()?;
    let list = problem.explicit()?;
    let basis = sample_basis(null)?;
    let s = basis.vectors.len();
    let total = (s as u128).checked_pow(m).unwrap_or(u128::MAX);
    if total > DENSE_STATE_CAP {
        return Err(Error::StateCap {
            states: total,
            cap: DENSE_STATE_CAP,
        });
    }
    let total = total as usize;

    let mut f = vec![-1.0; total];
    for w in list {
        let ratio: Vec<f64> = w
            .alternate
            .to_table(null)?
            .iter()
            .zip(&basis.weights)
            .map(|(a, p)| a / p)
            .collect();
        let mut prod = vec![1.0];
        for _ in 0..m {
            let mut next = Vec::with_capacity(prod.len() * s);
            for r in &ratio {
                next.extend(prod.iter().map(|p| p * r));
            }
            prod = next;
        }
        for (fi, pi) in f.iter_mut().zip(&prod) {
            *fi += w.weight * pi;
        }
    }

    // W[r][x] = π(x) b_r(x) turns values into coefficients
    let forward: Vec<Vec<f64>> = basis
        .vectors
        .iter()
        .map(|b| b.iter().zip(&basis.weights).map(|(x, p)| x * p).collect())
        .collect();
    let radices = vec![s; m as usize];
    let mats: Vec<&[Vec<f64>]> = vec![forward.as_slice(); m as usize];
    axis_transform(&mut f, &radices, &mats);

    for (idx, c) in f.iter_mut().enumerate() {
        let mut rest = idx;
        let mut active = 0;
        let mut keep = true;
        for _ in 0..m {
            let r = rest % s;
            rest /= s;
            let stratum = basis.strata[r];
            if stratum > 0 {
                active += 1;
            }
            if !degree.d.admits(stratum) {
                keep = false;
            }
        }
        if !keep || active > degree.k {
            *c = 0.0;
        }
    }
    Ok(Projection {
        coeffs: f,
        basis,
        s,
    })
}

/// Squared norm of the projection of `E_u D̄_u^{⊗m} - 1` onto functions of
/// samplewise degree `(d, k)`, computed from an explicit orthonormal basis
/// of `(Ω^N)^m`. Needs dense alternates and `|Ω^N|^m ≤ 2^22`.
pub fn brute_force_ldlr(problem: &TestingProblem, m: u32, degree: SamplewiseDegree) -> Result<LdlrReport> {
    let value = if degree.k == 0 {
        0.0
    } else {
        let p = project(problem, m, degree)?;
        csum(p.coeffs.iter().map(|c| c * c))
    };
    Ok(LdlrReport {
        problem_id: problem.id.clone(),
        m: m as u64,
        degree,
        value,
        per_t: Vec::new(),
        stderr: None,
        backend: Backend::BruteForce,
        mode: crate::measures::AtomMode::Exact,
    })
}

/// The optimal samplewise-degree-`(d, k)` distinguisher: the projection of
/// `E_u D̄_u^{⊗m} - 1`, tabulated over `(Ω^N)^m` with sample 0 varying
/// fastest.
pub fn projection_distinguisher(problem: &TestingProblem, m: u32, degree: SamplewiseDegree) -> Result<Vec<f64>> {
    let mut p = project(problem, m, degree)?;
    let s = p.s;
    // inverse: value(x) = Σ_r c_r b_r(x)
    let inverse: Vec<Vec<f64>> = (0..s)
        .map(|x| p.basis.vectors.iter().map(|b| b[x]).collect())
        .collect();
    let radices = vec![s; m as usize];
    let mats: Vec<&[Vec<f64>]> = vec![inverse.as_slice(); m as usize];
    axis_transform(&mut p.coeffs, &radices, &mats);
    Ok(p.coeffs)
}
