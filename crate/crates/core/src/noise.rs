//! Markov noise operators on a single coordinate, their `(d, ε)`
//! certification, random restrictions and niceness certificates.
//!
//! An operator is a row-stochastic matrix `T[x][y] = Pr(x → y)`. It acts on
//! a distribution `p` as `pT` and on a function `f` as `Tf(x) = Σ_y T[x][y] f(y)`.
//! Applied to a product space it acts independently on every coordinate.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldlr::{k_sample_from_atoms, ldlr_from_atoms};
use crate::measures::{
    axis_transform, draw_alternate, fourier_coefficients, Alternate, AtomPlan, Degree,
    PairSource, Prior, ProductNull, TestingProblem, Weighted,
};
use crate::numerics::{elementary_symmetric_all, stream_rng};
use crate::sda::{check_ldlr_to_sda, LdlrToSdaReport};

const ROW_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
/// Slack on `|λ|` when certifying.
pub const CERTIFY_TOL: f64 = 1e-9;
const CLUSTER_TOL: f64 = 1e-6;
const RANK_TOL: f64 = 1e-8;
const MAX_ALPHABET: usize = 64;
/// Restrictions over at most this many elements are enumerated exactly.
pub const EXACT_RESTRICTION_LIMIT: usize = 12;
/// Seeded draws of `R` used past the exact limit.
pub const RESTRICTION_DRAWS: usize = 256;
const BOUND_PATTERN_LIMIT: usize = 12;

/// A single-coordinate Markov operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MarkovOperatorSpec {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for MarkovOperatorSpec {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<MarkovOperatorSpec> for Vec<Vec<f64>> {
    fn from(op: MarkovOperatorSpec) -> Self {
        op.rows
    }
}

impl MarkovOperatorSpec {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("operator must be a square matrix of size at least 2".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidInput(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidInput(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn identity(k: usize) -> Self {
        let rows = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { rows }
    }

    /// Keeps the symbol with probability `ρ`, otherwise resamples it from
    /// `marginal`. On a binary coordinate this is `T_ρ`; `ρ = 0` is the full
    /// resampler.
    pub fn resample(marginal: &[f64], rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidInput(format!("rho = {rho} outside [0, 1]")));
        }
        let k = marginal.len();
        let rows = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| (1.0 - rho) * marginal[j] + if i == j { rho } else { 0.0 })
                    .collect()
            })
            .collect();
        Self::new(rows)
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `pT`.
    pub fn push_forward(&self, p: &[f64]) -> Vec<f64> {
        (0..self.size())
            .map(|y| p.iter().zip(&self.rows).map(|(px, row)| px * row[y]).sum())
            .collect()
    }

    pub fn check_stationary(&self, marginal: &[f64]) -> Result<()> {
        if marginal.len() != self.size() {
            return Err(Error::DimensionMismatch(format!(
                "operator on {} symbols, coordinate has {}",
                self.size(),
                marginal.len()
            )));
        }
        let image = self.push_forward(marginal);
        let err = image
            .iter()
            .zip(marginal)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err > STATIONARY_TOL {
            return Err(Error::InvalidInput(format!(
                "operator does not preserve the null marginal (error {err:.3e})"
            )));
        }
        Ok(())
    }

    /// Columns-as-rows form for [`axis_transform`]: output symbol `y` is
    /// `Σ_x T[x][y] p(x)`.
    fn transposed(&self) -> Vec<Vec<f64>> {
        let k = self.size();
        (0..k).map(|y| (0..k).map(|x| self.rows[x][y]).collect()).collect()
    }

    /// Non-unit eigenvalue of a binary operator, `T[0][0] + T[1][1] - 1`.
    pub fn binary_eigenvalue(&self) -> Result<f64> {
        if self.size() != 2 {
            return Err(Error::Unsupported("binary eigenvalue of a non-binary operator".into()));
        }
        Ok(self.rows[0][0] + self.rows[1][1] - 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "p")]
pub enum RestrictionMode {
    Coordinate,
    /// Coordinates are `[n]^p`; `R ⊆ [n]` keeps the principal subtensor.
    Subtensor(u32),
    /// Coordinates are `C([n], p)`; `R ⊆ [n]` keeps `C(R, p)`.
    Subset(u32),
}

/// Keeps a random set `R` fixed (each element independently with
/// probability `rate`) and applies `operator` to every other coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictionSpec {
    pub mode: RestrictionMode,
    pub rate: f64,
    pub operator: MarkovOperatorSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseSpec {
    Operator(MarkovOperatorSpec),
    Restriction(RestrictionSpec),
}

/// Lexicographic `p`-subsets of `[n]`: the coordinate order of subset mode.
pub fn k_subsets(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if p > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..p).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..p).rev().find(|&i| cur[i] < n - p + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..p {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// The ground-set elements each coordinate depends on, and the ground-set size.
#[derive(Clone, Debug)]
struct Layout {
    universe: usize,
    coords: Vec<Vec<usize>>,
}

impl Layout {
    fn new(mode: RestrictionMode, n_coords: usize) -> Result<Self> {
        match mode {
            RestrictionMode::Coordinate => Ok(Self {
                universe: n_coords,
                coords: (0..n_coords).map(|j| vec![j]).collect(),
            }),
            RestrictionMode::Subtensor(p) => {
                let p = p as usize;
                if p == 0 {
                    return Err(Error::InvalidInput("tensor order must be positive".into()));
                }
                let n = (n_coords as f64).powf(1.0 / p as f64).round() as usize;
                if n.checked_pow(p as u32) != Some(n_coords) {
                    return Err(Error::DimensionMismatch(format!(
                        "{n_coords} coordinates do not factor as [n]^{p}"
                    )));
                }
                let coords = (0..n_coords)
                    .map(|mut j| {
                        (0..p)
                            .map(|_| {
                                let i = j % n;
                                j /= n;
                                i
                            })
                            .collect()
                    })
                    .collect();
                Ok(Self { universe: n, coords })
            }
            RestrictionMode::Subset(p) => {
                let p = p as usize;
                let mut n = p;
                while k_subsets(n, p).len() < n_coords {
                    n += 1;
                    if n > 4096 {
                        break;
                    }
                }
                let coords = k_subsets(n, p);
                if coords.len() != n_coords || p == 0 {
                    return Err(Error::DimensionMismatch(format!(
                        "{n_coords} coordinates are not C(n, {p}) for any n"
                    )));
                }
                Ok(Self { universe: n, coords })
            }
        }
    }

    fn kept(&self, r: &[bool]) -> Vec<bool> {
        self.coords.iter().map(|c| c.iter().all(|&i| r[i])).collect()
    }
}

fn mask_to_set(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

fn set_label(r: &[bool]) -> String {
    let items: Vec<String> = r
        .iter()
        .enumerate()
        .filter(|(_, k)| **k)
        .map(|(i, _)| i.to_string())
        .collect();
    format!("R={{{}}}", items.join(","))
}

fn set_probability(r: &[bool], rate: f64) -> f64 {
    r.iter().map(|&k| if k { rate } else { 1.0 - rate }).product()
}

/// Applies `op` to every coordinate not marked as kept.
fn noise_alternate(
    alt: &Alternate,
    null: &ProductNull,
    op: &MarkovOperatorSpec,
    kept: &[bool],
) -> Result<Alternate> {
    let radices = null.radices();
    match alt {
        Alternate::Table(t) => {
            let forward = op.transposed();
            let ident = MarkovOperatorSpec::identity(op.size()).rows;
            let mats: Vec<&[Vec<f64>]> = kept
                .iter()
                .zip(&radices)
                .map(|(&k, &r)| {
                    if r != op.size() {
                        Err(Error::DimensionMismatch("operator and coordinate alphabets differ".into()))
                    } else if k {
                        Ok(ident.as_slice())
                    } else {
                        Ok(forward.as_slice())
                    }
                })
                .collect::<Result<_>>()?;
            let mut out = t.clone();
            axis_transform(&mut out, &radices, &mats);
            Ok(Alternate::Table(out))
        }
        Alternate::Product(ms) => Ok(Alternate::Product(
            ms.iter()
                .zip(kept)
                .map(|(p, &k)| if k { p.clone() } else { op.push_forward(p) })
                .collect(),
        )),
        Alternate::ParityBump { subset, amplitude } => {
            let lambda = op.binary_eigenvalue()?;
            let hit = subset.iter().filter(|&&j| !kept[j]).count() as i32;
            Ok(Alternate::ParityBump {
                subset: subset.clone(),
                amplitude: amplitude * lambda.powi(hit),
            })
        }
        Alternate::MeanShift(_) | Alternate::Covariance(_) => Err(Error::Unsupported(
            "coordinate noise needs a finite product null".into(),
        )),
    }
}

/// Ornstein–Uhlenbeck noise on a Gaussian mean shift: `μ ↦ ρμ`.
pub fn ou_mean_shift(mu: &[f64], rho: f64) -> Alternate {
    Alternate::MeanShift(mu.iter().map(|x| rho * x).collect())
}

fn check_operator(null: &ProductNull, op: &MarkovOperatorSpec) -> Result<()> {
    for j in 0..null.coords() {
        op.check_stationary(null.marginal(j))
            .map_err(|e| Error::InvalidInput(format!("coordinate {j}: {e}")))?;
    }
    Ok(())
}

/// Returns the noised or randomly restricted problem. Restrictions become
/// priors over `(u, R)` labels: exact over all `R` when the ground set has at
/// most [`EXACT_RESTRICTION_LIMIT`] elements, otherwise over
/// [`RESTRICTION_DRAWS`] draws of `R` seeded by `seed`. Sampler priors stay
/// samplers and draw `R` alongside `u`.
pub fn apply_noise(problem: &TestingProblem, spec: &NoiseSpec, seed: u64) -> Result<TestingProblem> {
    let null = problem.null.as_product().map_err(|_| {
        Error::Unsupported("noise operators need a finite product null".into())
    })?;
    let null_owned = problem.null.clone();
    match spec {
        NoiseSpec::Operator(op) => {
            check_operator(null, op)?;
            let all = vec![false; null.coords()];
            let prior = match &problem.prior {
                Prior::Explicit(list) => Prior::Explicit(
                    list.iter()
                        .map(|w| {
                            Ok(Weighted {
                                label: w.label.clone(),
                                weight: w.weight,
                                alternate: noise_alternate(&w.alternate, null, op, &all)?,
                            })
                        })
                        .collect::<Result<_>>()?,
                ),
                Prior::Sampler(f) => {
                    let f = f.clone();
                    let op = op.clone();
                    let p = null.clone();
                    Prior::Sampler(Arc::new(move |rng: &mut ChaCha8Rng| {
                        noise_alternate(&f(rng)?, &p, &op, &vec![false; p.coords()])
                    }))
                }
            };
            TestingProblem::new(format!("{}+noise", problem.id), null_owned, prior)
        }
        NoiseSpec::Restriction(rs) => {
            if !(0.0..=1.0).contains(&rs.rate) {
                return Err(Error::InvalidInput(format!("rate = {} outside [0, 1]", rs.rate)));
            }
            check_operator(null, &rs.operator)?;
            let layout = Layout::new(rs.mode, null.coords())?;
            let prior = match &problem.prior {
                Prior::Explicit(list) => {
                    let sets: Vec<(Vec<bool>, f64)> = if layout.universe <= EXACT_RESTRICTION_LIMIT {
                        (0..1u64 << layout.universe)
                            .map(|m| {
                                let r = mask_to_set(m, layout.universe);
                                let p = set_probability(&r, rs.rate);
                                (r, p)
                            })
                            .filter(|(_, p)| *p > 0.0)
                            .collect()
                    } else {
                        let mut rng = stream_rng(seed, 0);
                        (0..RESTRICTION_DRAWS)
                            .map(|_| {
                                let r = (0..layout.universe).map(|_| rng.random_bool(rs.rate)).collect();
                                (r, 1.0 / RESTRICTION_DRAWS as f64)
                            })
                            .collect()
                    };
                    let mut out = Vec::with_capacity(sets.len() * list.len());
                    for (r, pr) in &sets {
                        let kept = layout.kept(r);
                        for w in list {
                            out.push(Weighted {
                                label: format!("{}|{}", w.label, set_label(r)),
                                weight: w.weight * pr,
                                alternate: noise_alternate(&w.alternate, null, &rs.operator, &kept)?,
                            });
                        }
                    }
                    renormalize(&mut out);
                    Prior::Explicit(out)
                }
                Prior::Sampler(_) => {
                    let base = problem.prior.clone();
                    let rs = rs.clone();
                    let p = null.clone();
                    Prior::Sampler(Arc::new(move |rng: &mut ChaCha8Rng| {
                        let u = draw_alternate(&base, rng)?;
                        let r: Vec<bool> = (0..layout.universe).map(|_| rng.random_bool(rs.rate)).collect();
                        noise_alternate(&u, &p, &rs.operator, &layout.kept(&r))
                    }))
                }
            };
            TestingProblem::new(format!("{}+restrict", problem.id), null_owned, prior)
        }
    }
}

fn renormalize(list: &mut [Weighted]) {
    let total: f64 = list.iter().map(|w| w.weight).sum();
    for w in list.iter_mut() {
        w.weight /= total;
    }
}

/// Outcome of a `(d, ε)` certification.
#[derive(Clone, Debug, PartialEq)]
pub struct Certification {
    pub certified: bool,
    pub spectrum: Vec<Complex<f64>>,
    /// Largest `|λ|` on mean-zero functions of one coordinate.
    pub radius: f64,
    /// `radius^d`, the largest `|λ|` on functions of degree at least `d`.
    pub bound: f64,
}

/// Decides whether `T^{⊗N}` is a `(d, ε)`-operator for every `N`. Eigenvalues
/// of the tensor power on degree-`≥ d` functions are products of at least
/// `d` non-unit factors, so this holds iff `T` is diagonalizable and
/// `radius^d ≤ ε` (up to [`CERTIFY_TOL`]).
pub fn certify_d_eps(op: &MarkovOperatorSpec, marginal: &[f64], d: u32, eps: f64) -> Result<Certification> {
    let k = op.size();
    if k > MAX_ALPHABET {
        return Err(Error::InvalidInput(format!("alphabet of {k} symbols exceeds {MAX_ALPHABET}")));
    }
    op.check_stationary(marginal)?;
    let m = DMatrix::from_fn(k, k, |i, j| op.rows[i][j]);
    let spectrum: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().copied().collect();

    // every eigenvalue cluster must have full geometric multiplicity
    let mc = m.map(|x| Complex::new(x, 0.0));
    let mut seen = vec![false; k];
    for i in 0..k {
        if seen[i] {
            continue;
        }
        let members: Vec<usize> = (0..k)
            .filter(|&j| (spectrum[j] - spectrum[i]).norm() < CLUSTER_TOL)
            .collect();
        for &j in &members {
            seen[j] = true;
        }
        let centre = members.iter().map(|&j| spectrum[j]).sum::<Complex<f64>>() / members.len() as f64;
        let shifted = &mc - DMatrix::<Complex<f64>>::identity(k, k) * centre;
        let sv = shifted.svd(false, false).singular_values;
        let null_dim = sv.iter().filter(|&&s| s < RANK_TOL * k as f64).count();
        if null_dim < members.len() {
            return Err(Error::Defective(format!(
                "eigenvalue {centre} has algebraic multiplicity {} but only {null_dim} eigenvectors",
                members.len()
            )));
        }
    }

    // drop one unit eigenvalue (the constants)
    let mut rest = spectrum.clone();
    let unit = rest
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - Complex::new(1.0, 0.0)).norm().total_cmp(&(b.1 - Complex::new(1.0, 0.0)).norm()))
        .map(|(i, _)| i)
        .expect("nonempty spectrum");
    rest.remove(unit);
    let radius = rest.iter().map(|z| z.norm()).fold(0.0, f64::max).min(1.0);
    let bound = if d == 0 { 1.0 } else { radius.powi(d as i32) };
    Ok(Certification {
        certified: bound <= eps + CERTIFY_TOL,
        spectrum,
        radius,
        bound,
    })
}

/// Largest deviation of noised character coefficients from
/// `λ^{|α|} · (original coefficient)` on a binary product null.
pub fn attenuation_error(null: &ProductNull, alt: &Alternate, op: &MarkovOperatorSpec) -> Result<f64> {
    if !null.is_binary() {
        return Err(Error::Unsupported("attenuation check needs a binary null".into()));
    }
    check_operator(null, op)?;
    let lambda = op.binary_eigenvalue()?;
    let before = fourier_coefficients(null, &alt.to_table(null)?);
    let noised = noise_alternate(alt, null, op, &vec![false; null.coords()])?;
    let after = fourier_coefficients(null, &noised.to_table(null)?);
    Ok(before
        .iter()
        .zip(&after)
        .enumerate()
        .map(|(s, (b, a))| (a - lambda.powi(s.count_ones() as i32) * b).abs())
        .fold(0.0, f64::max))
}

/// Both sides of the high-degree bound for a random restriction.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictionBoundReport {
    /// `‖E_{R,u} (T^{R̄} D̄_u^{>d})^{⊗k}‖²`, by exact Fourier summation.
    pub lhs: f64,
    /// `(rate + (1-rate) ρ^k)^{2(d+1)} · K` in coordinate mode.
    pub intermediate: Option<f64>,
    pub rhs: f64,
    /// `K = ‖E_u D̄_u^{⊗k}‖²`.
    pub k_sample: f64,
    pub rho: f64,
    /// Whether `2·rate ≤ 1` and `2^{p/k} ρ ≤ 1` (tensor modes only).
    pub preconditions: bool,
    pub margin: f64,
}

/// Character coefficients of an alternate on a binary product null.
enum Spectrum {
    /// `D̂(α) = Π_{j∈α} w_j`.
    Product(Vec<f64>),
    /// Indexed by bitmask, coordinate 0 in bit 0.
    Dense(Vec<f64>),
}

fn spectrum_of(alt: &Alternate, null: &ProductNull) -> Result<Spectrum> {
    match alt {
        Alternate::Product(ms) => {
            let basis = null.character_basis();
            Ok(Spectrum::Product(
                ms.iter()
                    .zip(&basis)
                    .map(|(p, b)| p.iter().zip(&b.values[1]).map(|(x, c)| x * c).sum())
                    .collect(),
            ))
        }
        other => Ok(Spectrum::Dense(fourier_coefficients(null, &other.to_table(null)?))),
    }
}

/// `Σ_{|α|>d} D̂_u(α) D̂_v(α) Π_{j∈α} ω_j`.
fn weighted_high_sum(u: &Spectrum, v: &Spectrum, omega: &[f64], d: usize) -> f64 {
    match (u, v) {
        (Spectrum::Product(a), Spectrum::Product(b)) => {
            let x: Vec<f64> = a.iter().zip(b).zip(omega).map(|((p, q), w)| p * q * w).collect();
            let e = elementary_symmetric_all(&x, x.len());
            e.iter().skip(d + 1).sum()
        }
        _ => {
            let (du, dv) = (dense(u, omega.len()), dense(v, omega.len()));
            let mut acc = 0.0;
            for (s, (cu, cv)) in du.iter().zip(dv.iter()).enumerate() {
                if (s.count_ones() as usize) <= d {
                    continue;
                }
                let mut w = cu * cv;
                let mut bits = s;
                while bits != 0 {
                    let j = bits.trailing_zeros() as usize;
                    w *= omega[j];
                    bits &= bits - 1;
                }
                acc += w;
            }
            acc
        }
    }
}

fn dense(s: &Spectrum, n: usize) -> std::borrow::Cow<'_, [f64]> {
    match s {
        Spectrum::Dense(c) => std::borrow::Cow::Borrowed(c),
        Spectrum::Product(w) => {
            let mut c = vec![1.0; 1 << n];
            for (st, v) in c.iter_mut().enumerate() {
                for (j, wj) in w.iter().enumerate() {
                    if st >> j & 1 == 1 {
                        *v *= wj;
                    }
                }
            }
            std::borrow::Cow::Owned(c)
        }
    }
}

/// Computes `E_{u,v} E_{R,R'} (Σ_{|α|>d} D̂_u(α)D̂_v(α) Π_{j∈α} ω_j(R,R'))^k`,
/// with `ω_j = λ^{[j ∉ K(R)] + [j ∉ K(R')]}`, which equals the left side by
/// Parseval, against the restriction bound of the matching mode.
pub fn verify_restriction_bounds(
    problem: &TestingProblem,
    spec: &RestrictionSpec,
    d: i64,
    k: u32,
) -> Result<RestrictionBoundReport> {
    if d < 0 {
        return Err(Error::InvalidInput(format!("degree d = {d} must be nonnegative")));
    }
    if k == 0 || k % 2 == 1 {
        return Err(Error::InvalidInput(format!("k = {k} must be even and positive")));
    }
    let d = d as usize;
    let null = problem.null.as_product()?;
    if !null.is_binary() {
        return Err(Error::Unsupported("restriction bounds need a binary product null".into()));
    }
    check_operator(null, &spec.operator)?;
    let lambda = spec.operator.binary_eigenvalue()?;
    let rho = lambda.abs();
    let rate = spec.rate;
    let n = null.coords();
    let layout = Layout::new(spec.mode, n)?;
    let list = problem.explicit()?;
    let spectra = list
        .iter()
        .map(|w| spectrum_of(&w.alternate, null))
        .collect::<Result<Vec<_>>>()?;
    if n > 20 && spectra.iter().any(|s| matches!(s, Spectrum::Dense(_))) {
        return Err(Error::StateCap {
            states: 1u128 << n,
            cap: 1 << 20,
        });
    }

    // weighted list of ω patterns
    let patterns: Vec<(Vec<f64>, f64)> = match spec.mode {
        RestrictionMode::Coordinate => {
            if n > BOUND_PATTERN_LIMIT {
                return Err(Error::InvalidInput(format!(
                    "{n} coordinates exceed the exact enumeration limit {BOUND_PATTERN_LIMIT}"
                )));
            }
            // per coordinate: kept by both, by one, by neither
            let probs = [rate * rate, 2.0 * rate * (1.0 - rate), (1.0 - rate) * (1.0 - rate)];
            let weights = [1.0, lambda, lambda * lambda];
            let total = 3usize.pow(n as u32);
            (0..total)
                .filter_map(|mut code| {
                    let mut omega = Vec::with_capacity(n);
                    let mut p = 1.0;
                    for _ in 0..n {
                        let c = code % 3;
                        code /= 3;
                        omega.push(weights[c]);
                        p *= probs[c];
                    }
                    (p > 0.0).then_some((omega, p))
                })
                .collect()
        }
        _ => {
            if layout.universe > BOUND_PATTERN_LIMIT / 2 {
                return Err(Error::InvalidInput(format!(
                    "ground set of {} exceeds the exact enumeration limit {}",
                    layout.universe,
                    BOUND_PATTERN_LIMIT / 2
                )));
            }
            let sets: Vec<(Vec<bool>, f64)> = (0..1u64 << layout.universe)
                .map(|m| {
                    let r = mask_to_set(m, layout.universe);
                    let p = set_probability(&r, rate);
                    (layout.kept(&r), p)
                })
                .filter(|(_, p)| *p > 0.0)
                .collect();
            let mut out = Vec::with_capacity(sets.len() * sets.len());
            for (a, pa) in &sets {
                for (b, pb) in &sets {
                    let omega = a
                        .iter()
                        .zip(b)
                        .map(|(&x, &y)| lambda.powi((!x) as i32 + (!y) as i32))
                        .collect();
                    out.push((omega, pa * pb));
                }
            }
            out
        }
    };

    let mut lhs = 0.0;
    let mut k_sample = 0.0;
    let ones = vec![1.0; n];
    for (i, su) in spectra.iter().enumerate() {
        for (j, sv) in spectra.iter().enumerate() {
            let w = list[i].weight * list[j].weight;
            let mut inner = 0.0;
            for (omega, p) in &patterns {
                inner += p * weighted_high_sum(su, sv, omega, d).powi(k as i32);
            }
            lhs += w * inner;
            // ⟨D̄_u, D̄_v⟩ = Σ_α D̂_u(α)D̂_v(α), including α = ∅
            let full = 1.0 + weighted_high_sum(su, sv, &ones, 0);
            k_sample += w * full.powi(k as i32);
        }
    }

    let kf = k as f64;
    let dp1 = (d + 1) as f64;
    let (rhs, intermediate, preconditions) = match spec.mode {
        RestrictionMode::Coordinate => {
            let factor = (4f64.powf(dp1) * rho.powf(2.0 * dp1 * kf)).max((2.0 * rate).powf(2.0 * dp1));
            let mid = (rate + (1.0 - rate) * rho.powf(kf)).powf(2.0 * dp1);
            (factor * k_sample, Some(mid * k_sample), true)
        }
        RestrictionMode::Subtensor(p) | RestrictionMode::Subset(p) => {
            let pf = p as f64;
            let factor = (4f64.powf(dp1) * rho.powf(dp1 * kf / pf))
                .max((2.0 * rate).powf(2.0 * (0.5 * dp1).powf(1.0 / pf)));
            let pre = 2.0 * rate <= 1.0 && 2f64.powf(pf / kf) * rho <= 1.0;
            (factor * k_sample, None, pre)
        }
    };
    Ok(RestrictionBoundReport {
        lhs,
        intermediate,
        rhs,
        k_sample,
        rho,
        preconditions,
        margin: rhs - lhs,
    })
}

/// Whether no `k`-purely high-degree function of `k` samples distinguishes
/// with advantage `m^{-k/2}/4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NicenessCertificate {
    pub delta: f64,
    pub k: u32,
    pub threshold: f64,
    pub valid: bool,
}

/// `δ² = ‖E_u (D̄_u^{>k})^{⊗k}‖²` compared with `(m^{-k/2}/4)²`.
pub fn niceness_certificate(source: &dyn PairSource, m: f64, k: u32, plan: AtomPlan) -> Result<NicenessCertificate> {
    if k == 0 || k % 2 == 1 {
        return Err(Error::InvalidInput(format!("k = {k} must be even and positive")));
    }
    let delta2 = crate::ldlr::high_degree_norm(source, Degree::Finite(k), k, plan)?.max(0.0);
    let threshold = m.powf(-(k as f64) / 2.0) / 4.0;
    Ok(NicenessCertificate {
        delta: delta2.sqrt(),
        k,
        threshold,
        valid: delta2 <= threshold * threshold,
    })
}

/// The SDA bound for a noised family: with `T` a `(d+1, ρ^{d+1})` operator,
/// `C^k` the `k`-sample norm of the clean family and `ε` the `(d, k)`-LDLR of
/// the noised one, checks `SDA(TS, m/(q^{2/k}(kε^{2/k} + ρ^{2(d+1)} C m))) ≥ q`.
pub fn verify_noisy_sda(
    problem: &TestingProblem,
    op: &MarkovOperatorSpec,
    m: u64,
    d: u32,
    k: u32,
    q: u64,
) -> Result<LdlrToSdaReport> {
    let null = problem.null.as_product()?;
    let cert = certify_d_eps(op, null.marginal(0), d + 1, 1.0)?;
    let rho = cert.radius;
    let clean = problem.pair_atoms(Degree::Unbounded, AtomPlan::Exact)?;
    let c_k = k_sample_from_atoms(&clean, k).uncentered;
    let noised = apply_noise(problem, &NoiseSpec::Operator(op.clone()), 0)?;
    let low = noised.pair_atoms(Degree::Finite(d), AtomPlan::Exact)?;
    let (eps2, _, _) = ldlr_from_atoms(&low, m, k)?;
    // δ^{2/k} = ρ^{2(d+1)} C
    let delta = (rho.powf(2.0 * (d + 1) as f64 * k as f64) * c_k).sqrt();
    check_ldlr_to_sda(&low.correlation(), m, Degree::Finite(d), k, q, eps2.max(0.0).sqrt(), delta)
}

/// The SDA bound for a randomly restricted family, with `δ²` taken from the
/// restriction bound.
pub fn verify_restricted_sda(
    problem: &TestingProblem,
    spec: &RestrictionSpec,
    m: u64,
    d: u32,
    k: u32,
    q: u64,
) -> Result<(RestrictionBoundReport, LdlrToSdaReport)> {
    let bound = verify_restriction_bounds(problem, spec, d as i64, k)?;
    let restricted = apply_noise(problem, &NoiseSpec::Restriction(spec.clone()), 0)?;
    let low = restricted.pair_atoms(Degree::Finite(d), AtomPlan::Exact)?;
    let (eps2, _, _) = ldlr_from_atoms(&low, m, k)?;
    let report = check_ldlr_to_sda(
        &low.correlation(),
        m,
        Degree::Finite(d),
        k,
        q,
        eps2.max(0.0).sqrt(),
        bound.rhs.max(0.0).sqrt(),
    )?;
    Ok((bound, report))
}
