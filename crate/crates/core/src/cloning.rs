//! Reductions between one sample and many: Gaussian cloning by an
//! orthogonal rotation, Bernoulli cloning of edge indicators, and
//! statistical checks of the clone laws.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::numerics::{ln_binomial, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloneConfig {
    pub m: usize,
    /// Base edge density for Bernoulli cloning; `None` for Gaussian.
    pub gamma: Option<f64>,
    pub seed: u64,
}

impl CloneConfig {
    pub fn gaussian(m: usize, seed: u64) -> Result<Self> {
        let c = Self { m, gamma: None, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn bernoulli(m: usize, gamma: f64, seed: u64) -> Result<Self> {
        let c = Self {
            m,
            gamma: Some(gamma),
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidInput("clone count must be at least 1".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::InvalidInput(format!("gamma = {g} outside (0, 1)")));
            }
        }
        Ok(())
    }

    fn gamma(&self) -> Result<f64> {
        self.validate()?;
        self.gamma
            .ok_or_else(|| Error::InvalidInput("Bernoulli cloning needs a base density".into()))
    }
}

/// Householder vector `v = e_1 - 1/√m` (zero when `m = 1`).
fn householder_vector(m: usize) -> Vec<f64> {
    let u = 1.0 / (m as f64).sqrt();
    let mut v = vec![-u; m];
    v[0] += 1.0;
    v
}

fn reflect(v: &[f64], z: &mut [f64]) {
    let vv: f64 = v.iter().map(|x| x * x).sum();
    if vv == 0.0 {
        return;
    }
    let c = 2.0 * v.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>() / vv;
    for (zi, vi) in z.iter_mut().zip(v) {
        *zi -= c * vi;
    }
}

/// The symmetric orthogonal reflection whose first column is `1/√m`.
pub fn householder_matrix(m: usize) -> DMatrix<f64> {
    let v = DVector::from_vec(householder_vector(m));
    let vv = v.dot(&v);
    let id = DMatrix::identity(m, m);
    if vv == 0.0 {
        id
    } else {
        id - (&v * v.transpose()) * (2.0 / vv)
    }
}

/// Rotates `(x, Z_2, …, Z_m)` with fresh standard normals `Z_i`. If
/// `x ∼ N(μ, 1)` the outputs are independent `N(μ/√m, 1)`.
pub fn gaussian_clone(x: f64, config: &CloneConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, 0);
    let mut z = Vec::with_capacity(config.m);
    z.push(x);
    z.extend((1..config.m).map(|_| rng.sample::<f64, _>(StandardNormal)));
    reflect(&householder_vector(config.m), &mut z);
    Ok(z)
}

/// `Σ y_i / √m`, the sufficient statistic for a shared mean.
pub fn gaussian_unclone(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::InvalidInput("nothing to unclone".into()));
    }
    Ok(y.iter().sum::<f64>() / (y.len() as f64).sqrt())
}

/// Law of the number of ones when a zero is cloned: `j` ones with
/// probability `C(m,j) g^j (1-g)^{m-j} / (1-γ)` for `j < m`, `g = γ^{1/m}`.
pub fn zero_support_pmf(gamma: f64, m: usize) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma < 1.0) || m == 0 {
        return Err(Error::InvalidInput(format!("need 0 < gamma < 1 and m >= 1, got {gamma}, {m}")));
    }
    let ln_g = gamma.ln() / m as f64;
    // ln(1 - g) without cancellation when g is near 1
    let ln_1mg = (-ln_g.exp_m1()).ln();
    let logs: Vec<f64> = (0..m)
        .map(|j| ln_binomial(m as f64, j as f64) + j as f64 * ln_g + (m - j) as f64 * ln_1mg)
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Probability of one clone vector `v` given the input bit.
pub fn clone_vector_probability(x: bool, v: &[bool], gamma: f64) -> Result<f64> {
    let m = v.len();
    let ones = v.iter().filter(|&&b| b).count();
    if x {
        return Ok(if ones == m { 1.0 } else { 0.0 });
    }
    if ones == m {
        return Ok(0.0);
    }
    let pmf = zero_support_pmf(gamma, m)?;
    Ok(pmf[ones] / (ln_binomial(m as f64, ones as f64)).exp())
}

fn clone_bit(x: bool, m: usize, pmf: &[f64], rng: &mut impl Rng) -> Vec<bool> {
    if x {
        return vec![true; m];
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut j = pmf.len() - 1;
    for (i, p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            j = i;
            break;
        }
    }
    let mut out = vec![false; m];
    for i in sample_indices(rng, m, j).iter() {
        out[i] = true;
    }
    out
}

/// A one is cloned to all ones; a zero to a vector drawn so that, when
/// `x ∼ Ber(γ)`, the clones are i.i.d. `Ber(γ^{1/m})`. The AND of the
/// output is always `x`.
pub fn bernoulli_clone(x: bool, config: &CloneConfig) -> Result<Vec<bool>> {
    let gamma = config.gamma()?;
    let pmf = zero_support_pmf(gamma, config.m)?;
    let mut rng = stream_rng(config.seed, 0);
    Ok(clone_bit(x, config.m, &pmf, &mut rng))
}

pub fn bernoulli_unclone(y: &[bool]) -> bool {
    y.iter().all(|&b| b)
}

/// Rank of an increasing subset in colexicographic order: `Σ_i C(a_i, i+1)`.
pub fn colex_rank(subset: &[usize]) -> u64 {
    subset
        .iter()
        .enumerate()
        .map(|(i, &a)| exact_binomial(a as u64, i as u64 + 1))
        .sum()
}

/// Inverse of [`colex_rank`] for subsets of size `s`.
pub fn colex_unrank(mut rank: u64, s: usize) -> Vec<usize> {
    let mut out = vec![0; s];
    for i in (0..s).rev() {
        let k = i as u64 + 1;
        let mut a = i as u64;
        while exact_binomial(a + 1, k) <= rank {
            a += 1;
        }
        rank -= exact_binomial(a, k);
        out[i] = a as usize;
    }
    out
}

fn exact_binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as u64
}

/// An `s`-uniform hypergraph on `[N]` as indicator bits over `C([N], s)`,
/// indexed by colexicographic rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    pub n: usize,
    pub s: usize,
    pub bits: Vec<bool>,
}

impl Hypergraph {
    pub fn new(n: usize, s: usize, bits: Vec<bool>) -> Result<Self> {
        let want = exact_binomial(n as u64, s as u64) as usize;
        if s == 0 || bits.len() != want {
            return Err(Error::DimensionMismatch(format!(
                "C({n}, {s}) = {want} hyperedges, got {} bits",
                bits.len()
            )));
        }
        Ok(Self { n, s, bits })
    }

    pub fn empty(n: usize, s: usize) -> Self {
        let len = exact_binomial(n as u64, s as u64) as usize;
        Self {
            n,
            s,
            bits: vec![false; len],
        }
    }

    pub fn complete(n: usize, s: usize) -> Self {
        let mut g = Self::empty(n, s);
        g.bits.iter_mut().for_each(|b| *b = true);
        g
    }

    pub fn edge(&self, subset: &[usize]) -> bool {
        self.bits[colex_rank(subset) as usize]
    }

    pub fn set_edge(&mut self, subset: &[usize], value: bool) {
        let r = colex_rank(subset) as usize;
        self.bits[r] = value;
    }

    /// Text bitmap: a header line `N s`, then the bits as `0`/`1` in rank
    /// order, 64 per line.
    pub fn to_bitmap(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.s);
        for chunk in self.bits.chunks(64) {
            out.extend(chunk.iter().map(|&b| if b { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    pub fn from_bitmap(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty bitmap".into()))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header token {t:?}"))))
            .collect::<Result<_>>()?;
        let [n, s] = nums[..] else {
            return Err(Error::Parse(format!("header must be `N s`, got {header:?}")));
        };
        let mut bits = Vec::new();
        for line in lines {
            for c in line.chars().filter(|c| !c.is_whitespace()) {
                bits.push(match c {
                    '0' => false,
                    '1' => true,
                    other => return Err(Error::Parse(format!("unexpected character {other:?}"))),
                });
            }
        }
        Self::new(n, s, bits)
    }
}

/// Clones every hyperedge indicator independently, with per-edge seeds.
pub fn pc_clone(graph: &Hypergraph, config: &CloneConfig) -> Result<Vec<Hypergraph>> {
    let gamma = config.gamma()?;
    let m = config.m;
    let pmf = zero_support_pmf(gamma, m)?;
    let mut out = vec![Hypergraph::empty(graph.n, graph.s); m];
    for (e, &x) in graph.bits.iter().enumerate() {
        let mut rng = stream_rng(config.seed, e as u64);
        for (i, b) in clone_bit(x, m, &pmf, &mut rng).into_iter().enumerate() {
            out[i].bits[e] = b;
        }
    }
    Ok(out)
}

/// Entrywise AND of the clones.
pub fn pc_unclone(graphs: &[Hypergraph]) -> Result<Hypergraph> {
    let first = graphs
        .first()
        .ok_or_else(|| Error::InvalidInput("nothing to unclone".into()))?;
    let mut out = first.clone();
    for g in &graphs[1..] {
        if g.n != first.n || g.s != first.s {
            return Err(Error::DimensionMismatch(format!(
                "graphs on ({}, {}) and ({}, {})",
                first.n, first.s, g.n, g.s
            )));
        }
        for (a, b) in out.bits.iter_mut().zip(&g.bits) {
            *a &= *b;
        }
    }
    Ok(out)
}

/// Chi-square goodness of fit.
#[derive(Clone, Debug, PartialEq)]
pub struct GofReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
}

pub fn chi_square(observed: &[u64], probs: &[f64]) -> Result<GofReport> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(Error::DimensionMismatch("observed and expected lengths differ".into()));
    }
    let n: u64 = observed.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (o, e) in observed.iter().zip(&expected) {
        if *e > 0.0 {
            stat += (*o as f64 - e).powi(2) / e;
            cells += 1;
        } else if *o > 0 {
            stat = f64::INFINITY;
        }
    }
    let dof = cells.saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let p_value = if stat.is_finite() { dist.sf(stat) } else { 0.0 };
    Ok(GofReport {
        statistic: stat,
        dof,
        p_value,
        observed: observed.to_vec(),
        expected,
    })
}

/// Draws `x ∼ Ber(γ)`, clones it, and tests the joint law of the clones
/// against i.i.d. `Ber(γ^{1/m})` over all `2^m` outcomes.
pub fn bernoulli_clone_gof(gamma: f64, m: usize, trials: usize, seed: u64) -> Result<GofReport> {
    if m > 16 {
        return Err(Error::InvalidInput(format!("m = {m} gives too many outcome cells")));
    }
    let pmf = zero_support_pmf(gamma, m)?;
    let g = gamma.powf(1.0 / m as f64);
    let mut counts = vec![0u64; 1 << m];
    let mut rng = stream_rng(seed, 0);
    for _ in 0..trials {
        let x = rng.random_bool(gamma);
        let v = clone_bit(x, m, &pmf, &mut rng);
        let code = v.iter().enumerate().fold(0usize, |c, (i, &b)| c | (b as usize) << i);
        counts[code] += 1;
    }
    let probs: Vec<f64> = (0..1usize << m)
        .map(|code| {
            let ones = code.count_ones() as i32;
            g.powi(ones) * (1.0 - g).powi(m as i32 - ones)
        })
        .collect();
    chi_square(&counts, &probs)
}

/// Moments of Gaussian clones of `x ∼ N(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianCloneReport {
    pub m: usize,
    pub trials: usize,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Off-diagonal sample correlations, row-major upper triangle.
    pub correlations: Vec<f64>,
    pub mardia: MardiaReport,
}

/// Mardia's multivariate skewness and kurtosis with their asymptotic
/// standardizations under normality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MardiaReport {
    pub skewness: f64,
    pub kurtosis: f64,
    /// `(n b₁/6 - df) / √(2 df)`, `df = p(p+1)(p+2)/6`.
    pub skewness_z: f64,
    /// `(b₂ - p(p+2)) / √(8p(p+2)/n)`.
    pub kurtosis_z: f64,
}

/// Skewness uses `b₁ = Σ_{abc} (mean z_a z_b z_c)²` on whitened data,
/// which equals the pairwise form `n⁻² Σ_{ij} (z_i·z_j)³` in linear time.
pub fn mardia(samples: &[Vec<f64>]) -> Result<MardiaReport> {
    let n = samples.len();
    let p = samples.first().map_or(0, |s| s.len());
    if n < p + 2 || p == 0 {
        return Err(Error::InvalidInput(format!("{n} samples of dimension {p} are too few")));
    }
    let nf = n as f64;
    let mean: Vec<f64> = (0..p).map(|a| samples.iter().map(|s| s[a]).sum::<f64>() / nf).collect();
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for s in samples {
        for a in 0..p {
            for b in 0..p {
                cov[(a, b)] += (s[a] - mean[a]) * (s[b] - mean[b]) / nf;
            }
        }
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::NotPositive("sample covariance is singular".into()))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::NotPositive("sample covariance is singular".into()))?;
    let mut third = vec![0.0; p * p * p];
    let mut fourth = 0.0;
    let mut z = DVector::<f64>::zeros(p);
    for s in samples {
        let c = DVector::from_iterator(p, (0..p).map(|a| s[a] - mean[a]));
        linv.mul_to(&c, &mut z);
        for a in 0..p {
            for b in 0..p {
                for cidx in 0..p {
                    third[(a * p + b) * p + cidx] += z[a] * z[b] * z[cidx];
                }
            }
        }
        fourth += z.norm_squared().powi(2);
    }
    let skewness: f64 = third.iter().map(|t| (t / nf).powi(2)).sum();
    let kurtosis = fourth / nf;
    let pf = p as f64;
    let df = pf * (pf + 1.0) * (pf + 2.0) / 6.0;
    Ok(MardiaReport {
        skewness,
        kurtosis,
        skewness_z: (nf * skewness / 6.0 - df) / (2.0 * df).sqrt(),
        kurtosis_z: (kurtosis - pf * (pf + 2.0)) / (8.0 * pf * (pf + 2.0) / nf).sqrt(),
    })
}

pub fn gaussian_clone_moments(m: usize, trials: usize, seed: u64) -> Result<GaussianCloneReport> {
    if m == 0 || trials < 2 {
        return Err(Error::InvalidInput("need m >= 1 and at least two trials".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let v = householder_vector(m);
    let samples: Vec<Vec<f64>> = (0..trials)
        .map(|_| {
            let mut z: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            reflect(&v, &mut z);
            z
        })
        .collect();
    let nf = trials as f64;
    let means: Vec<f64> = (0..m).map(|a| samples.iter().map(|s| s[a]).sum::<f64>() / nf).collect();
    let variances: Vec<f64> = (0..m)
        .map(|a| samples.iter().map(|s| (s[a] - means[a]).powi(2)).sum::<f64>() / (nf - 1.0))
        .collect();
    let mut correlations = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let c = samples
                .iter()
                .map(|s| (s[a] - means[a]) * (s[b] - means[b]))
                .sum::<f64>()
                / (nf - 1.0);
            correlations.push(c / (variances[a] * variances[b]).sqrt());
        }
    }
    let mardia = mardia(&samples)?;
    Ok(GaussianCloneReport {
        m,
        trials,
        means,
        variances,
        correlations,
        mardia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_clone_is_identity() {
        let c = CloneConfig::gaussian(1, 3).unwrap();
        assert_eq!(gaussian_clone(1.25, &c).unwrap(), vec![1.25]);
        assert_eq!(gaussian_unclone(&[1.25]).unwrap(), 1.25);
    }

    #[test]
    fn householder_is_orthogonal_with_flat_first_column() {
        for m in [1, 2, 5, 17, 64] {
            let h = householder_matrix(m);
            let err = (h.transpose() * &h - DMatrix::<f64>::identity(m, m)).abs().max();
            assert!(err < 1e-12, "m = {m}");
            for i in 0..m {
                assert!((h[(i, 0)] - 1.0 / (m as f64).sqrt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unclone_inverts_clone() {
        let c = CloneConfig::gaussian(7, 11).unwrap();
        let y = gaussian_clone(-0.8, &c).unwrap();
        assert!((gaussian_unclone(&y).unwrap() + 0.8).abs() < 1e-14);
        assert_eq!(gaussian_unclone(&[0.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn quarter_density_two_clones() {
        let pmf = zero_support_pmf(0.25, 2).unwrap();
        assert!((pmf[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((pmf[1] - 2.0 / 3.0).abs() < 1e-15);
        for v in [[false, false], [false, true], [true, false]] {
            assert!((clone_vector_probability(false, &v, 0.25).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(clone_vector_probability(false, &[true, true], 0.25).unwrap(), 0.0);
    }

    #[test]
    fn near_one_density_stays_finite() {
        let pmf = zero_support_pmf(1.0 - 1e-12, 50).unwrap();
        assert!(pmf.iter().all(|p| p.is_finite() && *p >= 0.0));
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn and_of_clones_is_input() {
        for seed in 0..200 {
            let c = CloneConfig::bernoulli(5, 0.3, seed).unwrap();
            assert!(bernoulli_clone(true, &c).unwrap().iter().all(|&b| b));
            assert!(!bernoulli_unclone(&bernoulli_clone(false, &c).unwrap()));
        }
        assert!(CloneConfig::bernoulli(3, 1.0, 0).is_err());
    }

    #[test]
    fn colex_round_trip() {
        let mut rank = 0;
        // colex order: sorted by largest element first
        for c in 2..7usize {
            for b in 1..c {
                for a in 0..b {
                    assert_eq!(colex_rank(&[a, b, c]), rank);
                    assert_eq!(colex_unrank(rank, 3), vec![a, b, c]);
                    rank += 1;
                }
            }
        }
        assert_eq!(colex_rank(&[0, 1, 2]), 0);
    }

    #[test]
    fn bitmap_round_trip() {
        let mut g = Hypergraph::empty(6, 2);
        g.set_edge(&[1, 4], true);
        g.set_edge(&[0, 5], true);
        let back = Hypergraph::from_bitmap(&g.to_bitmap()).unwrap();
        assert_eq!(back, g);
        assert!(back.edge(&[1, 4]));
        assert!(Hypergraph::from_bitmap("6 2\n0101").is_err());
    }

    #[test]
    fn pc_round_trip_and_extremes() {
        let c = CloneConfig::bernoulli(3, 0.5, 9).unwrap();
        let mut g = Hypergraph::empty(7, 3);
        for (i, b) in g.bits.iter_mut().enumerate() {
            *b = i % 3 == 0;
        }
        assert_eq!(pc_unclone(&pc_clone(&g, &c).unwrap()).unwrap(), g);
        let full = Hypergraph::complete(5, 2);
        assert!(pc_clone(&full, &c).unwrap().iter().all(|h| *h == full));
        let bad = Hypergraph::empty(5, 3);
        assert!(pc_unclone(&[full, bad]).is_err());
    }

    #[test]
    fn mardia_of_normal_data_is_small() {
        let r = gaussian_clone_moments(3, 20_000, 5).unwrap();
        assert!(r.mardia.skewness_z.abs() < 4.0);
        assert!(r.mardia.kurtosis_z.abs() < 4.0);
    }
}
