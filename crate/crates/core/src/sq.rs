//! Statistical-query oracles, query algorithms and the conversion of a
//! query sequence into a low-degree polynomial test.
//!
//! A `VSTAT(m)` oracle answers a query `φ` with any value within
//! `τ = max(1/m, √(p(1-p)/m))` of `p = E_D φ`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::measures::{
    draw_alternate, fourier_coefficients, null_alternate, Alternate, Null, ProductNull, TestingProblem,
    DENSE_STATE_CAP,
};
use crate::numerics::{binomial, elementary_symmetric_all, stream_rng};

const RANGE_TOL: f64 = 1e-12;
/// Default cap on queries per run.
pub const DEFAULT_QUERY_CAP: usize = 100_000;

/// A query `φ` with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Query {
    /// Values over the states of a finite product null.
    Table(Vec<f64>),
    /// `½(1 + x^u)` on `{±1}^n`, symbol 0 read as `-1`.
    Parity(Vec<usize>),
    /// `1[⟨w, x⟩ ≥ t]` on a Gaussian space.
    MeanThreshold { direction: Vec<f64>, threshold: f64 },
}

impl Query {
    pub fn validate(&self, null: &Null) -> Result<()> {
        match (self, null) {
            (Query::Table(t), Null::Product(p)) => {
                let n = p.checked_states(DENSE_STATE_CAP)?;
                if t.len() != n {
                    return Err(Error::DimensionMismatch(format!("query has {} values for {n} states", t.len())));
                }
                if t.iter().any(|&v| !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v)) {
                    return Err(Error::InvalidInput("query values must lie in [0, 1]".into()));
                }
                Ok(())
            }
            (Query::Parity(u), Null::Product(p)) => {
                if !p.is_binary() {
                    return Err(Error::Unsupported("parity queries need a binary null".into()));
                }
                if u.iter().any(|&j| j >= p.coords()) {
                    return Err(Error::InvalidInput("parity index out of range".into()));
                }
                Ok(())
            }
            (Query::MeanThreshold { direction, .. }, Null::Gaussian { dim }) => {
                if direction.len() != *dim || direction.iter().all(|&w| w == 0.0) {
                    return Err(Error::DimensionMismatch("threshold direction must be a nonzero vector of the space dimension".into()));
                }
                Ok(())
            }
            _ => Err(Error::Unsupported("query does not match the problem's null".into())),
        }
    }

    /// Values over the states of a finite null.
    pub fn tabulate(&self, null: &ProductNull) -> Result<Vec<f64>> {
        match self {
            Query::Table(t) => Ok(t.clone()),
            Query::Parity(u) => {
                let n = null.checked_states(DENSE_STATE_CAP)?;
                Ok((0..n).map(|s| 0.5 * (1.0 + parity_sign(s, u))).collect())
            }
            Query::MeanThreshold { .. } => Err(Error::Unsupported("threshold queries have no finite table".into())),
        }
    }
}

fn parity_sign(state: usize, u: &[usize]) -> f64 {
    let zeros = u.iter().filter(|&&j| state >> j & 1 == 0).count();
    if zeros % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `E_D φ` for `D` given as an alternate on the problem's space.
pub fn expectation(null: &Null, dist: &Alternate, q: &Query) -> Result<f64> {
    q.validate(null)?;
    match (q, dist) {
        (Query::Parity(u), Alternate::ParityBump { subset, amplitude }) => {
            let mut a = u.clone();
            a.sort_unstable();
            let mut b = subset.clone();
            b.sort_unstable();
            Ok(0.5 * (1.0 + if a == b { *amplitude } else { 0.0 }))
        }
        (Query::Parity(u), Alternate::Product(ms)) => {
            let e: f64 = u.iter().map(|&j| ms[j][1] - ms[j][0]).product();
            Ok(0.5 * (1.0 + e))
        }
        (Query::MeanThreshold { direction, threshold }, alt) => {
            let norm2: f64 = direction.iter().map(|w| w * w).sum();
            let (mean, var) = match alt {
                Alternate::MeanShift(mu) => (direction.iter().zip(mu).map(|(w, m)| w * m).sum(), norm2),
                Alternate::Covariance(a) => {
                    let k = a.nrows();
                    let prec = nalgebra::DMatrix::<f64>::identity(k, k) + a;
                    let w = nalgebra::DVector::from_column_slice(direction);
                    let sol = prec
                        .cholesky()
                        .ok_or_else(|| Error::NotPositive("I + A is not positive definite".into()))?
                        .solve(&w);
                    (0.0, w.dot(&sol))
                }
                other => {
                    return Err(Error::Unsupported(format!(
                        "threshold query against a {} alternate",
                        other.kind()
                    )))
                }
            };
            let z = Normal::new(mean, var.sqrt()).map_err(|e| Error::InvalidInput(e.to_string()))?;
            Ok(z.sf(*threshold))
        }
        (q, alt) => {
            let p = null.as_product()?;
            let table = alt.to_table(p)?;
            let values = q.tabulate(p)?;
            Ok(table.iter().zip(&values).map(|(a, b)| a * b).sum())
        }
    }
}

/// VSTAT tolerance `max(1/m, √(p(1-p)/m))`.
pub fn vstat_tolerance(p: f64, m: f64) -> f64 {
    (1.0 / m).max((p * (1.0 - p)).max(0.0).sqrt() / m.sqrt())
}

/// Chooses an answer given the true value, tolerance and transcript so far.
pub type CustomAdversary = Arc<dyn Fn(f64, f64, &SqTranscript) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Adversary {
    Honest,
    /// The point of `[p - τ, p + τ]` closest to the null expectation.
    TowardNull,
    Custom(CustomAdversary),
}

impl Adversary {
    pub fn tag(&self) -> &'static str {
        match self {
            Adversary::Honest => "honest",
            Adversary::TowardNull => "toward_null",
            Adversary::Custom(_) => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "honest" => Ok(Adversary::Honest),
            "toward_null" | "toward-null" => Ok(Adversary::TowardNull),
            other => Err(Error::Parse(format!("unknown adversary {other:?}"))),
        }
    }
}

impl fmt::Debug for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One oracle answer.
#[derive(Clone, Debug, PartialEq)]
pub struct Answer {
    pub query_id: String,
    pub true_value: f64,
    pub tau: f64,
    pub returned: f64,
    pub adversary: &'static str,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SqTranscript {
    pub answers: Vec<Answer>,
}

impl SqTranscript {
    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    /// Every answer lies within its tolerance of the true value.
    pub fn is_valid(&self) -> bool {
        self.answers
            .iter()
            .all(|a| (a.returned - a.true_value).abs() <= a.tau * (1.0 + 1e-12))
    }
}

/// Answers `q` for distribution `dist` as `VSTAT(m_oracle)` with the given
/// adversary, and appends the answer to `transcript`.
pub fn vstat_answer(
    problem: &TestingProblem,
    dist: &Alternate,
    id: &str,
    q: &Query,
    m_oracle: f64,
    adversary: &Adversary,
    transcript: &mut SqTranscript,
) -> Result<Answer> {
    if !(m_oracle > 0.0) {
        return Err(Error::InvalidInput(format!("oracle parameter {m_oracle} must be positive")));
    }
    let p = expectation(&problem.null, dist, q)?;
    let tau = vstat_tolerance(p, m_oracle);
    let returned = match adversary {
        Adversary::Honest => p,
        Adversary::TowardNull => {
            let p0 = expectation(&problem.null, &null_alternate(&problem.null), q)?;
            p0.clamp(p - tau, p + tau)
        }
        Adversary::Custom(f) => {
            let v = f(p, tau, transcript);
            if !((v - p).abs() <= tau) {
                return Err(Error::InvalidInput(format!(
                    "custom adversary answered {v} outside [{}, {}]",
                    p - tau,
                    p + tau
                )));
            }
            v
        }
    };
    let a = Answer {
        query_id: id.to_string(),
        true_value: p,
        tau,
        returned,
        adversary: adversary.tag(),
    };
    transcript.answers.push(a.clone());
    Ok(a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hypothesis {
    Null,
    Alternate,
}

pub enum Step {
    Ask { id: String, query: Query },
    Decide(Hypothesis),
}

/// A query algorithm: maps the transcript so far to the next query or a verdict.
pub trait SqPolicy: Send + Sync {
    fn name(&self) -> &str;
    fn next(&self, transcript: &SqTranscript, m_oracle: f64, rng: &mut ChaCha8Rng) -> Result<Step>;
}

/// Declares the null without asking anything.
pub struct EmptyPolicy;

impl SqPolicy for EmptyPolicy {
    fn name(&self) -> &str {
        "empty"
    }

    fn next(&self, _: &SqTranscript, _: f64, _: &mut ChaCha8Rng) -> Result<Step> {
        Ok(Step::Decide(Hypothesis::Null))
    }
}

/// Asks a fixed list of queries and declares the alternate iff some answer
/// differs from its null value by more than the null-side tolerance.
pub struct NonadaptivePolicy {
    pub name: String,
    /// `(id, query, E_∅ φ)`.
    pub queries: Vec<(String, Query, f64)>,
}

impl NonadaptivePolicy {
    pub fn new(name: impl Into<String>, null: &Null, queries: Vec<(String, Query)>) -> Result<Self> {
        let base = null_alternate(null);
        let queries = queries
            .into_iter()
            .map(|(id, q)| {
                let p0 = expectation(null, &base, &q)?;
                Ok((id, q, p0))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            name: name.into(),
            queries,
        })
    }

    /// One parity query per subset; the scan for a planted sparse parity.
    pub fn parity_scan(null: &Null, subsets: &[Vec<usize>]) -> Result<Self> {
        let queries = subsets
            .iter()
            .map(|u| (format!("parity{u:?}"), Query::Parity(u.clone())))
            .collect();
        Self::new("parity-scan", null, queries)
    }
}

impl SqPolicy for NonadaptivePolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn next(&self, transcript: &SqTranscript, m_oracle: f64, _: &mut ChaCha8Rng) -> Result<Step> {
        let i = transcript.len();
        if let Some((id, q, _)) = self.queries.get(i) {
            return Ok(Step::Ask {
                id: id.clone(),
                query: q.clone(),
            });
        }
        let alarm = transcript.answers.iter().zip(&self.queries).any(|(a, (_, _, p0))| {
            (a.returned - p0).abs() > vstat_tolerance(*p0, m_oracle)
        });
        Ok(Step::Decide(if alarm {
            Hypothesis::Alternate
        } else {
            Hypothesis::Null
        }))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SqRunReport {
    pub policy: String,
    pub adversary: &'static str,
    pub m_oracle: f64,
    pub trials: usize,
    /// Fraction of null trials declared alternate.
    pub type_one: f64,
    /// Fraction of alternate trials declared null.
    pub type_two: f64,
    /// `1 - (type_one + type_two)/2`.
    pub success: f64,
    pub max_queries: usize,
    /// Transcripts of the first trials, when requested.
    pub transcripts: Vec<(Hypothesis, SqTranscript)>,
}

fn run_once(
    policy: &dyn SqPolicy,
    problem: &TestingProblem,
    dist: &Alternate,
    m_oracle: f64,
    adversary: &Adversary,
    query_cap: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Hypothesis, SqTranscript)> {
    let mut t = SqTranscript::default();
    loop {
        match policy.next(&t, m_oracle, rng)? {
            Step::Decide(h) => return Ok((h, t)),
            Step::Ask { id, query } => {
                if t.len() >= query_cap {
                    return Err(Error::QueryCap(query_cap));
                }
                vstat_answer(problem, dist, &id, &query, m_oracle, adversary, &mut t)?;
                debug_assert!(t.is_valid());
            }
        }
    }
}

/// Runs `trials` trials under each hypothesis; alternate trials draw `u`
/// from the prior with a per-trial seed.
#[allow(clippy::too_many_arguments)]
pub fn run_sq_algorithm(
    policy: &dyn SqPolicy,
    problem: &TestingProblem,
    m_oracle: f64,
    adversary: &Adversary,
    trials: usize,
    seed: u64,
    query_cap: usize,
    keep_transcripts: usize,
) -> Result<SqRunReport> {
    if trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    let null_dist = null_alternate(&problem.null);
    let (mut false_alarm, mut miss, mut max_q) = (0usize, 0usize, 0usize);
    let mut transcripts = Vec::new();
    for i in 0..trials {
        let mut rng = stream_rng(seed, 2 * i as u64);
        let (h, t) = run_once(policy, problem, &null_dist, m_oracle, adversary, query_cap, &mut rng)?;
        if !t.is_valid() {
            return Err(Error::InvalidInput("oracle answer outside tolerance".into()));
        }
        false_alarm += (h == Hypothesis::Alternate) as usize;
        max_q = max_q.max(t.len());
        if transcripts.len() < keep_transcripts {
            transcripts.push((Hypothesis::Null, t));
        }

        let mut rng = stream_rng(seed, 2 * i as u64 + 1);
        let u = draw_alternate(&problem.prior, &mut rng)?;
        let (h, t) = run_once(policy, problem, &u, m_oracle, adversary, query_cap, &mut rng)?;
        if !t.is_valid() {
            return Err(Error::InvalidInput("oracle answer outside tolerance".into()));
        }
        miss += (h == Hypothesis::Null) as usize;
        max_q = max_q.max(t.len());
        if transcripts.len() < keep_transcripts {
            transcripts.push((Hypothesis::Alternate, t));
        }
    }
    let n = trials as f64;
    let type_one = false_alarm as f64 / n;
    let type_two = miss as f64 / n;
    Ok(SqRunReport {
        policy: policy.name().to_string(),
        adversary: adversary.tag(),
        m_oracle,
        trials,
        type_one,
        type_two,
        success: 1.0 - 0.5 * (type_one + type_two),
        max_queries: max_q,
        transcripts,
    })
}

/// A function of `m` samples.
#[derive(Clone, Debug, PartialEq)]
pub enum SampleFunction {
    /// Values over `(Ω^N)^m`, sample 0 varying fastest.
    Tabulated { m: u32, values: Vec<f64> },
    /// `Σ c · Π_i χ_{α_i}(x_i)` in the null's orthonormal characters, with
    /// `α_i` given by a state index per sample (0 is the constant).
    Characters { m: u32, terms: Vec<(f64, Vec<usize>)> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistinguisherScore {
    pub advantage: f64,
    pub null_std: f64,
    /// `advantage / null_std`, infinite when the null variance vanishes
    /// with a nonzero advantage.
    pub beta: f64,
    pub unbounded: bool,
}

impl DistinguisherScore {
    fn from_moments(e0: f64, e_alt: f64, var0: f64) -> Self {
        let advantage = (e0 - e_alt).abs();
        let null_std = var0.max(0.0).sqrt();
        let tiny = 1e-15 * (1.0 + e0.abs());
        if advantage <= tiny {
            return Self {
                advantage,
                null_std,
                beta: 0.0,
                unbounded: false,
            };
        }
        if null_std == 0.0 {
            return Self {
                advantage,
                null_std,
                beta: f64::INFINITY,
                unbounded: true,
            };
        }
        Self {
            advantage,
            null_std,
            beta: advantage / null_std,
            unbounded: false,
        }
    }

    pub fn is_good(&self) -> bool {
        self.beta > 1.0
    }
}

fn tensor_power_table(table: &[f64], m: u32) -> Vec<f64> {
    let mut prod = vec![1.0];
    for _ in 0..m {
        let mut next = Vec::with_capacity(prod.len() * table.len());
        for t in table {
            next.extend(prod.iter().map(|p| p * t));
        }
        prod = next;
    }
    prod
}

/// Advantage and null standard deviation of an `m`-sample test.
pub fn distinguisher_score(p: &SampleFunction, problem: &TestingProblem, m: u32) -> Result<DistinguisherScore> {
    let null = problem.null.as_product()?;
    let list = problem.explicit()?;
    match p {
        SampleFunction::Tabulated { m: pm, values } => {
            if *pm != m {
                return Err(Error::DimensionMismatch(format!("function of {pm} samples scored at m = {m}")));
            }
            let base = null.table()?;
            let total = (base.len() as u128).checked_pow(m).unwrap_or(u128::MAX);
            if total != values.len() as u128 {
                return Err(Error::DimensionMismatch(format!("{} values for {total} states", values.len())));
            }
            let pi = tensor_power_table(&base, m);
            let e0: f64 = pi.iter().zip(values).map(|(a, b)| a * b).sum();
            let var0: f64 = pi.iter().zip(values).map(|(a, b)| a * (b - e0).powi(2)).sum();
            let mut e_alt = 0.0;
            for w in list {
                let t = tensor_power_table(&w.alternate.to_table(null)?, m);
                e_alt += w.weight * t.iter().zip(values).map(|(a, b)| a * b).sum::<f64>();
            }
            Ok(DistinguisherScore::from_moments(e0, e_alt, var0))
        }
        SampleFunction::Characters { m: pm, terms } => {
            if *pm != m || terms.iter().any(|(_, a)| a.len() != m as usize) {
                return Err(Error::DimensionMismatch("character term length differs from m".into()));
            }
            let mut merged: BTreeMap<&[usize], f64> = BTreeMap::new();
            for (c, a) in terms {
                *merged.entry(a.as_slice()).or_insert(0.0) += c;
            }
            let constant = merged
                .iter()
                .filter(|(a, _)| a.iter().all(|&x| x == 0))
                .map(|(_, c)| *c)
                .sum::<f64>();
            let var0: f64 = merged
                .iter()
                .filter(|(a, _)| a.iter().any(|&x| x != 0))
                .map(|(_, c)| c * c)
                .sum();
            let mut e_alt = 0.0;
            for w in list {
                let coeffs = fourier_coefficients(null, &w.alternate.to_table(null)?);
                let e: f64 = merged
                    .iter()
                    .map(|(a, c)| c * a.iter().map(|&x| coeffs[x]).product::<f64>())
                    .sum();
                e_alt += w.weight * e;
            }
            Ok(DistinguisherScore::from_moments(constant, e_alt, var0))
        }
    }
}

/// The polynomial `f_Ψ(x_1..x_m) = Σ_t C(m,k)^{-1/2} e_k(ψ̄_t(x_1), …, ψ̄_t(x_m))`
/// with `ψ̄_t = (ψ_t - p_t)/√p_t`, kept in factored form.
#[derive(Clone, Debug, PartialEq)]
pub struct FPsi {
    pub m: u64,
    pub k: u32,
    /// Centered queries tabulated over one sample.
    pub centered: Vec<Vec<f64>>,
    pub null_means: Vec<f64>,
}

impl FPsi {
    /// Evaluates at `m` sample states.
    pub fn evaluate(&self, states: &[usize]) -> Result<f64> {
        if states.len() as u64 != self.m {
            return Err(Error::DimensionMismatch(format!("{} samples for m = {}", states.len(), self.m)));
        }
        let scale = binomial(self.m, self.k as u64)?.sqrt();
        let mut total = 0.0;
        for c in &self.centered {
            let x: Vec<f64> = states.iter().map(|&s| c[s]).collect();
            total += elementary_symmetric_all(&x, self.k as usize)[self.k as usize] / scale;
        }
        Ok(total)
    }
}

/// Exact moments of `f_Ψ` from independence across samples.
#[derive(Clone, Debug, PartialEq)]
pub struct FPsiReport {
    /// `E_∅ f = Σ_t √C(m,k) (E_∅ ψ̄_t)^k`; zero up to rounding.
    pub null_mean: f64,
    /// `E_∅ f² = Σ_{s,t} (E_∅ ψ̄_s ψ̄_t)^k`.
    pub null_second_moment: f64,
    pub queries: usize,
    /// `E_u E_{D_u^{⊗m}} f = Σ_t √C(m,k) E_u (E_{D_u} ψ̄_t)^k`.
    pub alternate_mean: f64,
    /// `max_t |E_{D_u} ψ̄_t|` per alternate, with its prior weight.
    pub alternate_deviation: Vec<(f64, f64)>,
    pub binom: f64,
}

impl FPsiReport {
    pub fn null_std_within_queries(&self) -> bool {
        self.null_second_moment.sqrt() <= self.queries as f64 * (1.0 + 1e-12)
    }

    /// `(1 - η) √(C(m,k) (τ/2)^k)`, with `η` the prior mass of alternates on
    /// which no query deviates by `√(τ/2)` after centering.
    pub fn alternate_lower_bound(&self, tau: f64, k: u32) -> f64 {
        let thresh = (tau / 2.0).sqrt();
        let hit: f64 = self
            .alternate_deviation
            .iter()
            .filter(|(_, d)| *d >= thresh * (1.0 - 1e-12))
            .map(|(w, _)| w)
            .sum();
        hit.min(1.0) * (self.binom * (tau / 2.0).powi(k as i32)).sqrt()
    }
}

pub fn build_f_psi(queries: &[Query], problem: &TestingProblem, m: u64, k: u32) -> Result<(FPsi, FPsiReport)> {
    if k == 0 || k % 2 == 1 {
        return Err(Error::InvalidInput(format!("k = {k} must be even and positive")));
    }
    if (k as u64) > m {
        return Err(Error::InvalidInput(format!("k = {k} exceeds m = {m}")));
    }
    let null = problem.null.as_product()?;
    let pi = null.table()?;
    let mut centered = Vec::with_capacity(queries.len());
    let mut null_means = Vec::with_capacity(queries.len());
    for (t, q) in queries.iter().enumerate() {
        q.validate(&problem.null)?;
        let v = q.tabulate(null)?;
        let p: f64 = pi.iter().zip(&v).map(|(a, b)| a * b).sum();
        if !(p > 0.0 && p <= 0.5 + RANGE_TOL) {
            return Err(Error::InvalidInput(format!(
                "query {t} has null mean {p}; it must lie in (0, 1/2], so complement it (use 1 - ψ)"
            )));
        }
        let sp = p.sqrt();
        centered.push(v.iter().map(|x| (x - p) / sp).collect::<Vec<f64>>());
        null_means.push(p);
    }
    let binom = binomial(m, k as u64)?;
    let kk = k as i32;
    let mut null_mean = 0.0;
    for c in &centered {
        let e: f64 = pi.iter().zip(c).map(|(a, b)| a * b).sum();
        null_mean += binom.sqrt() * e.powi(kk);
    }
    let mut second = 0.0;
    for a in &centered {
        for b in &centered {
            let e: f64 = pi.iter().zip(a).zip(b).map(|((p, x), y)| p * x * y).sum();
            second += e.powi(kk);
        }
    }
    let list = problem.explicit()?;
    let mut alternate_mean = 0.0;
    let mut deviation = Vec::with_capacity(list.len());
    for w in list {
        let t = w.alternate.to_table(null)?;
        let mut dev = 0.0f64;
        for c in &centered {
            let e: f64 = t.iter().zip(c).map(|(a, b)| a * b).sum();
            alternate_mean += w.weight * binom.sqrt() * e.powi(kk);
            dev = dev.max(e.abs());
        }
        deviation.push((w.weight, dev));
    }
    let f = FPsi {
        m,
        k,
        centered,
        null_means,
    };
    Ok((
        f,
        FPsiReport {
            null_mean,
            null_second_moment: second,
            queries: queries.len(),
            alternate_mean,
            alternate_deviation: deviation,
            binom,
        },
    ))
}

/// Both sides of `(ε^{2/k} + δ^{2/k} C(m,k)^{1/k})^{k/2} ≥ ½ E_S f / √(E_∅ f²)`
/// for a test of the form `f_Ψ`, with `ε` the `(d,k)`-LDLR norm and `δ` the
/// `k`-sample high-degree norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn truncation_check(report: &FPsiReport, epsilon: f64, delta: f64, k: u32) -> TruncationCheck {
    let kf = k as f64;
    let lhs = (epsilon.powf(2.0 / kf) + delta.powf(2.0 / kf) * report.binom.powf(1.0 / kf)).powf(kf / 2.0);
    let rhs = if report.null_second_moment > 0.0 {
        0.5 * report.alternate_mean / report.null_second_moment.sqrt()
    } else {
        0.0
    };
    TruncationCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-12 * rhs.abs().max(1.0),
    }
}
