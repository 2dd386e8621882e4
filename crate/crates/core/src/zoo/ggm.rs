//! Planted signed regular subgraphs in a Gaussian graphical model:
//! `D_u = N(0, (I + κΔ_u)^{-1})` with `Δ_u` the signed adjacency matrix of
//! a random `d`-regular graph on a uniform `s`-subset of `[n]`, conditioned
//! on its spectrum lying in `[-2√d, 2√d]`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Param, ZooInstance};
use crate::error::{Error, Result};
use crate::measures::{draw_alternate, Alternate, Null, Prior, Sampler, TestingProblem};
use crate::numerics::{csum, stream_rng};

/// Configuration-model draws allowed per graph.
const DRAW_BUDGET: u64 = 100_000;

/// Acceptance statistics of the rejection sampler.
#[derive(Debug, Default)]
pub struct GgmStats {
    pub attempts: AtomicU64,
    pub accepted: AtomicU64,
}

impl GgmStats {
    pub fn acceptance_rate(&self) -> f64 {
        let a = self.attempts.load(Ordering::Relaxed);
        if a == 0 {
            return 0.0;
        }
        self.accepted.load(Ordering::Relaxed) as f64 / a as f64
    }
}

/// A uniformly signed `d`-regular graph on `s` vertices from the
/// configuration model, rejecting loops, multi-edges and spectra outside
/// `[-2√d, 2√d]`.
pub fn signed_regular_graph(s: usize, d: usize, rng: &mut impl Rng, stats: &GgmStats) -> Result<DMatrix<f64>> {
    if d == 0 || d >= s || (s * d) % 2 == 1 {
        return Err(Error::InvalidInput(format!("no simple {d}-regular graph on {s} vertices")));
    }
    let radius = 2.0 * (d as f64).sqrt();
    let mut stubs: Vec<usize> = (0..s).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    for _ in 0..DRAW_BUDGET {
        stats.attempts.fetch_add(1, Ordering::Relaxed);
        stubs.shuffle(rng);
        let mut adj = DMatrix::<f64>::zeros(s, s);
        let simple = stubs.chunks_exact(2).all(|e| {
            let (a, b) = (e[0], e[1]);
            if a == b || adj[(a, b)] != 0.0 {
                return false;
            }
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            adj[(a, b)] = sign;
            adj[(b, a)] = sign;
            true
        });
        if !simple {
            continue;
        }
        let eig = adj.clone().symmetric_eigenvalues();
        if eig.iter().all(|x| x.abs() <= radius) {
            stats.accepted.fetch_add(1, Ordering::Relaxed);
            return Ok(adj);
        }
    }
    Err(Error::RejectionBudget(format!(
        "{DRAW_BUDGET} draws without an admissible {d}-regular graph on {s} vertices (acceptance rate {:.3e})",
        stats.acceptance_rate()
    )))
}

fn check(n: usize, s: usize, d: usize, kappa: f64) -> Result<()> {
    if !(n > s && s > d && d >= 1) {
        return Err(Error::InvalidInput(format!("need n > s > d ≥ 1, got n = {n}, s = {s}, d = {d}")));
    }
    if (s * d) % 2 == 1 {
        return Err(Error::InvalidInput(format!("s·d = {} must be even", s * d)));
    }
    if !(kappa >= 0.0 && kappa * (d as f64).sqrt() < 1.0 / 6.0) {
        return Err(Error::InvalidInput(format!("kappa = {kappa} violates 0 ≤ κ√d < 1/6")));
    }
    Ok(())
}

/// Instance together with the acceptance statistics of its sampler.
pub fn make_prs_ggm_with_stats(
    n: usize,
    s: usize,
    d: usize,
    kappa: f64,
    seed: u64,
) -> Result<(ZooInstance, Arc<GgmStats>)> {
    check(n, s, d, kappa)?;
    let stats = Arc::new(GgmStats::default());
    let shared = Arc::clone(&stats);
    let sampler: Sampler = Arc::new(move |rng| {
        let support = sample(rng, n, s).into_vec();
        let g = signed_regular_graph(s, d, rng, &shared)?;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (i, &vi) in support.iter().enumerate() {
            for (j, &vj) in support.iter().enumerate() {
                a[(vi, vj)] = kappa * g[(i, j)];
            }
        }
        Ok(Alternate::Covariance(a))
    });
    let prior = Prior::Sampler(sampler);
    // one draw up front so an infeasible configuration fails here
    draw_alternate(&prior, &mut stream_rng(seed, 0))?;
    let problem = TestingProblem::new("ggm", Null::Gaussian { dim: n }, prior)?;
    let params = vec![
        Param::count("n", n),
        Param::count("s", s),
        Param::count("d", d),
        Param::signal("kappa", kappa),
    ];
    Ok((ZooInstance::new("ggm", params, Some(problem), None, None), stats))
}

pub fn make_prs_ggm(n: usize, s: usize, d: usize, kappa: f64, seed: u64) -> Result<ZooInstance> {
    Ok(make_prs_ggm_with_stats(n, s, d, kappa, seed)?.0)
}

/// `(s²/n)((1 + κ²d)^{s/2} - 1)^k`, the closed-form bound on
/// `E(⟨D̄_u, D̄_v⟩ - 1)^k`.
pub fn ggm_moment_bound(n: usize, s: usize, d: usize, kappa: f64, k: u32) -> f64 {
    let s = s as f64;
    (s * s / n as f64) * ((1.0 + kappa * kappa * d as f64).powf(s / 2.0) - 1.0).powi(k as i32)
}

/// Monte-Carlo estimate of `E_{x∼N(0,I)} D̄_A(x) D̄_B(x)` with
/// `D̄_A(x) = √det(I+A) exp(-xᵀAx/2)`; returns mean and standard error.
pub fn ggm_correlation_mc(a: &DMatrix<f64>, b: &DMatrix<f64>, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let n = a.nrows();
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch("perturbations differ in shape".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let det = |m: DMatrix<f64>| -> Result<f64> {
        let v = m.determinant();
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::NotPositive("I + A is not positive definite".into()))
        }
    };
    let scale = (det(&eye + a)? * det(&eye + b)?).sqrt();
    let ab = a + b;
    let mut rng = stream_rng(seed, 0);
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let x = nalgebra::DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
            scale * (-0.5 * x.dot(&(&ab * &x))).exp()
        })
        .collect();
    let mean = csum(values.iter().copied()) / samples as f64;
    let var = csum(values.iter().map(|v| (v - mean).powi(2))) / (samples - 1) as f64;
    Ok((mean, (var / samples as f64).sqrt()))
}

/// An explicit uniform prior over `count` seeded draws from the instance's
/// sampler.
pub fn ggm_sub_prior(instance: &ZooInstance, count: usize, seed: u64) -> Result<ZooInstance> {
    let p = instance.problem()?;
    let alts = (0..count)
        .map(|i| draw_alternate(&p.prior, &mut stream_rng(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let problem = TestingProblem::new("ggm", p.null.clone(), Prior::uniform(alts))?;
    let mut params = instance.params.clone();
    params.push(Param::count("draws", count));
    Ok(ZooInstance::new("ggm", params, Some(problem), None, None))
}
