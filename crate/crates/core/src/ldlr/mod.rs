//! Samplewise-degree projections of the `m`-sample likelihood ratio.
//!
//! For pair excesses `x_uv = ⟨D̄_u^{≤d}, D̄_v^{≤d}⟩ - 1` the squared
//! `(d, k)`-LDLR norm at `m` samples is `E_{u,v} Σ_{t=1}^{k} C(m,t) x_uv^t`.
//! [`brute_force_ldlr`] recomputes it from an explicit basis of `m`-sample
//! functions and serves as the independent check of that identity.

mod brute;

pub use brute::{brute_force_ldlr, projection_distinguisher, sample_basis, SampleBasis};

use crate::error::{Error, Result};
use crate::measures::{AtomMode, AtomPlan, Degree, PairAtoms, PairSource};
use crate::numerics::{binomial, binomial_times_power, csum, EXACT_BINOMIAL_LIMIT};

pub use crate::numerics::elementary_symmetric;

/// Per-sample degree `d` and active-sample bound `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SamplewiseDegree {
    pub d: Degree,
    pub k: u32,
}

impl SamplewiseDegree {
    pub fn new(d: Degree, k: u32) -> Self {
        Self { d, k }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Identity,
    BruteForce,
}

impl Backend {
    pub fn tag(self) -> &'static str {
        match self {
            Backend::Identity => "identity",
            Backend::BruteForce => "brute-force",
        }
    }
}

/// Squared `(d, k)`-LDLR norm at `m` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct LdlrReport {
    pub problem_id: String,
    pub m: u64,
    pub degree: SamplewiseDegree,
    /// Squared norm.
    pub value: f64,
    /// Contribution `C(m,t) E x^t` of each `t = 1..=k`.
    pub per_t: Vec<f64>,
    pub stderr: Option<f64>,
    pub backend: Backend,
    pub mode: AtomMode,
}

impl LdlrReport {
    pub fn norm(&self) -> f64 {
        self.value.max(0.0).sqrt()
    }
}

/// `C(m,t) x^t` with the binomial kept in log space when `m` is large.
fn scaled_power(m: u64, t: u32, x: f64) -> Result<f64> {
    if m <= EXACT_BINOMIAL_LIMIT {
        Ok(binomial(m, t as u64)? * x.powi(t as i32))
    } else {
        binomial_times_power(m, t as u64, x)
    }
}

/// Squared LDLR, per-`t` contributions and Monte-Carlo error from pair atoms
/// already truncated at the wanted per-sample degree.
pub fn ldlr_from_atoms(atoms: &PairAtoms, m: u64, k: u32) -> Result<(f64, Vec<f64>, Option<f64>)> {
    if (k as u64) > m {
        return Err(Error::InvalidInput(format!("k = {k} exceeds m = {m}")));
    }
    let mut per_t = Vec::with_capacity(k as usize);
    for t in 1..=k {
        let terms = atoms
            .atoms
            .iter()
            .map(|a| Ok(a.weight * scaled_power(m, t, a.low_x)?))
            .collect::<Result<Vec<f64>>>()?;
        per_t.push(csum(terms));
    }
    let value = csum(per_t.iter().copied());
    if !value.is_finite() {
        return Err(Error::Overflow(format!("LDLR at m = {m}, k = {k} is not finite")));
    }
    let stderr = match atoms.mode {
        AtomMode::Exact => None,
        AtomMode::MonteCarlo { .. } => {
            let samples = atoms
                .atoms
                .iter()
                .map(|a| {
                    let mut s = 0.0;
                    for t in 1..=k {
                        s += scaled_power(m, t, a.low_x)?;
                    }
                    Ok(s)
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(standard_error(&samples, value))
        }
    };
    Ok((value, per_t, stderr))
}

fn standard_error(samples: &[f64], mean: f64) -> f64 {
    let n = samples.len() as f64;
    let var = csum(samples.iter().map(|s| (s - mean).powi(2))) / (n - 1.0).max(1.0);
    (var / n).sqrt()
}

/// Squared `(d, k)`-LDLR at `m` samples through the pair-value identity.
pub fn ldlr_norm(
    source: &dyn PairSource,
    m: u64,
    degree: SamplewiseDegree,
    plan: AtomPlan,
) -> Result<LdlrReport> {
    let atoms = source.pair_atoms(degree.d, plan)?;
    let (value, per_t, stderr) = ldlr_from_atoms(&atoms, m, degree.k)?;
    Ok(LdlrReport {
        problem_id: source.id().to_string(),
        m,
        degree,
        value,
        per_t,
        stderr,
        backend: Backend::Identity,
        mode: atoms.mode,
    })
}

/// `E⟨D̄_u, D̄_v⟩^k` and `E(⟨D̄_u, D̄_v⟩ - 1)^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct KSampleReport {
    pub k: u32,
    pub uncentered: f64,
    pub centered: f64,
    pub uncentered_stderr: Option<f64>,
    pub centered_stderr: Option<f64>,
}

pub fn k_sample_from_atoms(atoms: &PairAtoms, k: u32) -> KSampleReport {
    let (uncentered, uncentered_stderr) = atoms.mean_with_stderr(|full_x, _| (1.0 + full_x).powi(k as i32));
    let (centered, centered_stderr) = atoms.mean_with_stderr(|full_x, _| full_x.powi(k as i32));
    KSampleReport {
        k,
        uncentered,
        centered,
        uncentered_stderr,
        centered_stderr,
    }
}

/// Squared norms of the uncentered and centered `k`-sample likelihood
/// ratios. The centered value is a squared norm only for even `k`.
pub fn k_sample_lr_norm(source: &dyn PairSource, k: u32, plan: AtomPlan) -> Result<KSampleReport> {
    let atoms = source.pair_atoms(Degree::Unbounded, plan)?;
    Ok(k_sample_from_atoms(&atoms, k))
}

fn require_even(k: u32) -> Result<()> {
    if k == 0 || k % 2 == 1 {
        return Err(Error::InvalidInput(format!("k = {k} must be even and positive")));
    }
    Ok(())
}

/// `E_{u,v}(⟨D̄_u, D̄_v⟩ - ⟨D̄_u^{≤d}, D̄_v^{≤d}⟩)^k`, the squared norm of
/// `E_u (D̄_u^{>d})^{⊗k}`.
pub fn high_degree_from_atoms(atoms: &PairAtoms, k: u32) -> Result<(f64, Option<f64>)> {
    require_even(k)?;
    Ok(atoms.mean_with_stderr(|full_x, low_x| (full_x - low_x).powi(k as i32)))
}

pub fn high_degree_norm(source: &dyn PairSource, d: Degree, k: u32, plan: AtomPlan) -> Result<f64> {
    require_even(k)?;
    let atoms = source.pair_atoms(d, plan)?;
    Ok(high_degree_from_atoms(&atoms, k)?.0)
}

/// The three squared norms of the Hölder-type split and its margin
/// `low^{1/k} + high^{1/k} - centered^{1/k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderReport {
    pub d: Degree,
    pub k: u32,
    pub centered: f64,
    pub low: f64,
    pub high: f64,
    pub margin: f64,
}

pub fn holder_from_atoms(atoms: &PairAtoms, k: u32) -> Result<HolderReport> {
    require_even(k)?;
    let ki = k as i32;
    let centered = atoms.expect(|full_x, _| full_x.powi(ki)).max(0.0);
    let low = atoms.expect(|_, low_x| low_x.powi(ki)).max(0.0);
    let high = atoms.expect(|full_x, low_x| (full_x - low_x).powi(ki)).max(0.0);
    let r = 1.0 / k as f64;
    Ok(HolderReport {
        d: atoms.degree,
        k,
        centered,
        low,
        high,
        margin: low.powf(r) + high.powf(r) - centered.powf(r),
    })
}

pub fn holder_split_check(source: &dyn PairSource, d: Degree, k: u32, plan: AtomPlan) -> Result<HolderReport> {
    holder_from_atoms(&source.pair_atoms(d, plan)?, k)
}

/// `E(⟨D̄_u^{≤d}, D̄_v^{≤d}⟩ - 1)^k` against `LDLR² / C(m,k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostingReport {
    pub m: u64,
    pub d: Degree,
    pub k: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

pub fn boosting_from_atoms(atoms: &PairAtoms, m: u64, k: u32) -> Result<BoostingReport> {
    require_even(k)?;
    let lhs = atoms.expect(|_, low_x| low_x.powi(k as i32));
    let (value, _, _) = ldlr_from_atoms(atoms, m, k)?;
    let rhs = value / binomial(m, k as u64)?;
    Ok(BoostingReport {
        m,
        d: atoms.degree,
        k,
        lhs,
        rhs,
        margin: rhs - lhs,
    })
}

pub fn boosting_bound_check(
    source: &dyn PairSource,
    m: u64,
    d: Degree,
    k: u32,
    plan: AtomPlan,
) -> Result<BoostingReport> {
    boosting_from_atoms(&source.pair_atoms(d, plan)?, m, k)
}

/// Both forms of the bound on the `k`-sample high-degree norm in terms of
/// the degree-1 correlations, for Gaussian mean shifts and for product
/// measures on a binary cube.
#[derive(Clone, Debug, PartialEq)]
pub struct IndependentBoundReport {
    pub d: u32,
    pub k: u32,
    /// `‖E_u (D̄_u^{>d})^{⊗k}‖²`.
    pub high: f64,
    /// `E(⟨D̄_u^{≤1}, D̄_v^{≤1}⟩ - 1)^{2k(d+1)}`.
    pub linear_moment: f64,
    /// `‖E_u D̄_u^{⊗2k}‖² = E⟨D̄_u, D̄_v⟩^{2k}`.
    pub two_k_sample: f64,
    /// `high^{1/k}` against `linear_moment^{1/2k} (1 + two_k_sample)^{1/2k} / (d+1)!`.
    pub gaussian_margin: f64,
    /// `high` against `linear_moment^{1/2} two_k_sample^{1/2}`.
    pub product_margin: f64,
}

pub fn independent_bound_check(source: &dyn PairSource, d: u32, k: u32, plan: AtomPlan) -> Result<IndependentBoundReport> {
    require_even(k)?;
    let at_d = source.pair_atoms(Degree::Finite(d), plan)?;
    let at_1 = source.pair_atoms(Degree::Finite(1), plan)?;
    let (high, _) = high_degree_from_atoms(&at_d, k)?;
    let high = high.max(0.0);
    let linear_moment = at_1.expect(|_, low_x| low_x.powi((2 * k * (d + 1)) as i32));
    let two_k_sample = at_1.expect(|full_x, _| (1.0 + full_x).powi(2 * k as i32));
    let kf = k as f64;
    let gaussian_rhs = linear_moment.powf(1.0 / (2.0 * kf)) * (1.0 + two_k_sample).powf(1.0 / (2.0 * kf))
        / crate::numerics::factorial(d as u64 + 1);
    let product_rhs = (linear_moment * two_k_sample).sqrt();
    Ok(IndependentBoundReport {
        d,
        k,
        high,
        linear_moment,
        two_k_sample,
        gaussian_margin: gaussian_rhs - high.powf(1.0 / kf),
        product_margin: product_rhs - high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Alternate, Null, Prior, ProductNull, TestingProblem};

    fn single(alt: Alternate, null: Null) -> TestingProblem {
        TestingProblem::new("single", null, Prior::uniform(vec![alt])).unwrap()
    }

    #[test]
    fn null_prior_has_zero_ldlr() {
        let p = TestingProblem::null_only("n", Null::Product(ProductNull::uniform_binary(3)));
        for m in 1..5 {
            for k in 1..=m as u32 {
                for d in [Degree::Finite(0), Degree::Finite(2), Degree::Unbounded] {
                    let r = ldlr_norm(&p, m, SamplewiseDegree::new(d, k), AtomPlan::Exact).unwrap();
                    assert!(r.value.abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn two_samples_full_degree_is_square_minus_one() {
        let null = ProductNull::bernoulli(2, 0.4).unwrap();
        let alt = Alternate::Product(vec![vec![0.5, 0.5], vec![0.3, 0.7]]);
        let p = single(alt.clone(), Null::Product(null));
        let x = p.inner_product(&alt, &alt).unwrap() - 1.0;
        let r = ldlr_norm(&p, 2, SamplewiseDegree::new(Degree::Unbounded, 2), AtomPlan::Exact).unwrap();
        assert!((r.value - (2.0 * x + x * x)).abs() < 1e-14);
        assert!((r.value - ((1.0 + x).powi(2) - 1.0)).abs() < 1e-14);
        assert!((r.per_t.iter().sum::<f64>() - r.value).abs() < 1e-14);
    }

    #[test]
    fn gaussian_high_degree_is_power_of_exp_tail() {
        let c: f64 = 0.3;
        let mu = vec![c.sqrt(), 0.0];
        let p = single(Alternate::MeanShift(mu), Null::Gaussian { dim: 2 });
        for d in 0..4 {
            let h = high_degree_norm(&p, Degree::Finite(d), 2, AtomPlan::Exact).unwrap();
            let tail = crate::numerics::exp_tail(c, d);
            assert!((h - tail * tail).abs() < 1e-14);
        }
        assert_eq!(high_degree_norm(&p, Degree::Unbounded, 2, AtomPlan::Exact).unwrap(), 0.0);
        assert!(high_degree_norm(&p, Degree::Finite(1), 3, AtomPlan::Exact).is_err());
    }

    #[test]
    fn single_gaussian_holder_closed_form() {
        let c: f64 = 0.7;
        let p = single(Alternate::MeanShift(vec![c.sqrt()]), Null::Gaussian { dim: 1 });
        let r = holder_split_check(&p, Degree::Finite(1), 2, AtomPlan::Exact).unwrap();
        assert!((r.centered - (c.exp() - 1.0).powi(2)).abs() < 1e-14);
        assert!((r.low - c * c).abs() < 1e-14);
        assert!((r.high - (c.exp() - 1.0 - c).powi(2)).abs() < 1e-14);
        assert!(r.margin >= -1e-12);
    }

    #[test]
    fn m_below_k_rejected() {
        let p = TestingProblem::null_only("n", Null::Gaussian { dim: 1 });
        assert!(ldlr_norm(&p, 1, SamplewiseDegree::new(Degree::Unbounded, 2), AtomPlan::Exact).is_err());
    }

    #[test]
    fn huge_m_uses_log_binomials() {
        let p = single(Alternate::MeanShift(vec![1e-4]), Null::Gaussian { dim: 1 });
        let r = ldlr_norm(&p, 1_000_000_000, SamplewiseDegree::new(Degree::Finite(1), 2), AtomPlan::Exact)
            .unwrap();
        let x = 1e-8;
        let want = 1e9 * x + 1e9 * (1e9 - 1.0) / 2.0 * x * x;
        assert!((r.value / want - 1.0).abs() < 1e-9);
    }
}
