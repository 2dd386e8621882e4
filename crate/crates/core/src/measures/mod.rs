//! Null and planted distributions, relative densities and the inner product
//! `⟨f, g⟩ = E_{x∼D_∅} f(x) g(x)`.
//!
//! Finite problems live on a [`ProductNull`]; alternates are dense tables,
//! product measures or parity bumps. Gaussian problems use closed forms for
//! mean shifts and precision perturbations. Everything downstream consumes
//! the law of the pair excesses `(⟨D̄_u, D̄_v⟩ - 1, ⟨D̄_u^{≤d}, D̄_v^{≤d}⟩ - 1)`
//! under independent prior draws, exposed as [`PairAtoms`].

mod alternate;
mod null;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use alternate::{
    covariance_correlation, covariance_correlation_ratio, mean_shift_pair, product_pair,
    Alternate, Degree, Null,
};
pub(crate) use alternate::PairContext;
pub use null::{
    axis_transform, fourier_coefficients, index_degrees, CoordinateCharacters, ProductNull,
    DENSE_STATE_CAP,
};

use crate::error::{Error, Result};
use crate::numerics::{csum, stream_rng};

const WEIGHT_TOL: f64 = 1e-12;

/// An alternate with its prior weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Weighted {
    pub label: String,
    pub weight: f64,
    pub alternate: Alternate,
}

pub type Sampler = Arc<dyn Fn(&mut ChaCha8Rng) -> Result<Alternate> + Send + Sync>;

/// Prior over the alternates.
#[derive(Clone)]
pub enum Prior {
    Explicit(Vec<Weighted>),
    /// Seeded sampler; deterministic given the generator state.
    Sampler(Sampler),
}

impl fmt::Debug for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Explicit(list) => f.debug_tuple("Explicit").field(&list.len()).finish(),
            Prior::Sampler(_) => f.write_str("Sampler"),
        }
    }
}

impl Prior {
    /// Uniform weights over `alts`, labelled by position.
    pub fn uniform(alts: Vec<Alternate>) -> Self {
        let w = 1.0 / alts.len() as f64;
        Prior::Explicit(
            alts.into_iter()
                .enumerate()
                .map(|(i, alternate)| Weighted {
                    label: i.to_string(),
                    weight: w,
                    alternate,
                })
                .collect(),
        )
    }
}

/// Null distribution together with a prior over alternates.
#[derive(Clone, Debug)]
pub struct TestingProblem {
    pub id: String,
    pub null: Null,
    pub prior: Prior,
}

impl TestingProblem {
    pub fn new(id: impl Into<String>, null: Null, prior: Prior) -> Result<Self> {
        if let Prior::Explicit(list) = &prior {
            if list.is_empty() {
                return Err(Error::InvalidInput("prior has no alternates".into()));
            }
            if list.iter().any(|w| !(w.weight >= 0.0) || !w.weight.is_finite()) {
                return Err(Error::InvalidInput("prior weight negative or non-finite".into()));
            }
            let total = csum(list.iter().map(|w| w.weight));
            if (total - 1.0).abs() > WEIGHT_TOL {
                return Err(Error::InvalidInput(format!("prior weights sum to {total}")));
            }
            for w in list {
                w.alternate.validate(&null)?;
            }
        }
        Ok(Self {
            id: id.into(),
            null,
            prior,
        })
    }

    /// The problem whose only alternate is the null itself.
    pub fn null_only(id: impl Into<String>, null: Null) -> Self {
        let alt = null_alternate(&null);
        Self {
            id: id.into(),
            null,
            prior: Prior::uniform(vec![alt]),
        }
    }

    pub fn explicit(&self) -> Result<&[Weighted]> {
        match &self.prior {
            Prior::Explicit(list) => Ok(list),
            Prior::Sampler(_) => Err(Error::Unsupported(
                "operation needs an explicit prior".into(),
            )),
        }
    }

    pub fn inner_product(&self, u: &Alternate, v: &Alternate) -> Result<f64> {
        Ok(1.0 + self.pair_excess(u, v, Degree::Unbounded)?.0)
    }

    /// `⟨D̄_u^{≤d}, D̄_v^{≤d}⟩`.
    pub fn low_degree_correlation(&self, u: &Alternate, v: &Alternate, d: Degree) -> Result<f64> {
        Ok(1.0 + self.pair_excess(u, v, d)?.1)
    }

    /// `(⟨D̄_u, D̄_v⟩ - 1, ⟨D̄_u^{≤d}, D̄_v^{≤d}⟩ - 1)` for one pair.
    pub fn pair_excess(&self, u: &Alternate, v: &Alternate, d: Degree) -> Result<(f64, f64)> {
        u.validate(&self.null)?;
        v.validate(&self.null)?;
        let ctx = PairContext::new(&self.null, needs_dense([u, v]))?;
        let pu = ctx.prepare(u)?;
        let pv = ctx.prepare(v)?;
        ctx.pair(&pu, &pv, d)
    }
}

/// The alternate equal to the null distribution.
pub fn null_alternate(null: &Null) -> Alternate {
    match null {
        Null::Product(p) => Alternate::Product(p.marginals().to_vec()),
        Null::Gaussian { dim } => Alternate::MeanShift(vec![0.0; *dim]),
    }
}

pub(crate) fn needs_dense<'a>(alts: impl IntoIterator<Item = &'a Alternate>) -> bool {
    let mut kinds = alts.into_iter().map(Alternate::kind).peekable();
    let first = kinds.peek().copied();
    let mut mixed = false;
    let mut any_table = false;
    for k in kinds {
        any_table |= k == "table";
        mixed |= Some(k) != first;
    }
    any_table || mixed
}

/// One value of the pair law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairAtom {
    pub weight: f64,
    /// `⟨D̄_u, D̄_v⟩ - 1`.
    pub full_x: f64,
    /// `⟨D̄_u^{≤d}, D̄_v^{≤d}⟩ - 1`.
    pub low_x: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomMode {
    Exact,
    MonteCarlo { seed: u64, budget: usize },
}

impl AtomMode {
    pub fn is_exact(self) -> bool {
        matches!(self, AtomMode::Exact)
    }

    pub fn tag(self) -> &'static str {
        match self {
            AtomMode::Exact => "exact",
            AtomMode::MonteCarlo { .. } => "montecarlo",
        }
    }

    pub fn seed(self) -> Option<u64> {
        match self {
            AtomMode::Exact => None,
            AtomMode::MonteCarlo { seed, .. } => Some(seed),
        }
    }
}

/// Law of the pair values under independent draws `u, v ∼ μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairAtoms {
    pub atoms: Vec<PairAtom>,
    pub degree: Degree,
    pub mode: AtomMode,
}

impl PairAtoms {
    /// Expectation of `f(full_x, low_x)`.
    pub fn expect(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        csum(self.atoms.iter().map(|a| a.weight * f(a.full_x, a.low_x)))
    }

    /// Mean and standard error of `f(full_x, low_x)`; the error is zero for
    /// exact atoms.
    pub fn mean_with_stderr(&self, f: impl Fn(f64, f64) -> f64) -> (f64, Option<f64>) {
        let mean = self.expect(&f);
        match self.mode {
            AtomMode::Exact => (mean, None),
            AtomMode::MonteCarlo { .. } => {
                let n = self.atoms.len() as f64;
                let var = csum(self.atoms.iter().map(|a| (f(a.full_x, a.low_x) - mean).powi(2)))
                    / (n - 1.0).max(1.0);
                (mean, Some((var / n).sqrt()))
            }
        }
    }

    /// Merges atoms with identical values.
    pub fn compressed(mut self) -> Self {
        self.atoms.sort_by(|a, b| {
            a.full_x
                .total_cmp(&b.full_x)
                .then(a.low_x.total_cmp(&b.low_x))
        });
        let mut out: Vec<PairAtom> = Vec::with_capacity(self.atoms.len());
        for a in self.atoms {
            match out.last_mut() {
                Some(l) if l.full_x == a.full_x && l.low_x == a.low_x => l.weight += a.weight,
                _ => out.push(a),
            }
        }
        self.atoms = out;
        self
    }

    /// The correlation variable `⟨D̄_u, D̄_v⟩ - 1`.
    pub fn correlation(&self) -> CorrelationAtoms {
        CorrelationAtoms {
            atoms: self
                .atoms
                .iter()
                .map(|a| (a.weight, a.full_x))
                .collect(),
            mode: self.mode,
        }
    }
}

/// Discrete law of `⟨D̄_u, D̄_v⟩ - 1` as `(weight, value)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationAtoms {
    pub atoms: Vec<(f64, f64)>,
    pub mode: AtomMode,
}

impl CorrelationAtoms {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|(w, v)| !(*w >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("atom with negative weight or non-finite value".into()));
        }
        let total = csum(atoms.iter().map(|a| a.0));
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("atom weights sum to {total}")));
        }
        Ok(Self {
            atoms,
            mode: AtomMode::Exact,
        })
    }
}

/// How pair atoms are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomPlan {
    /// All pairs of an explicit prior.
    Exact,
    /// `budget` independent pairs drawn from the prior.
    MonteCarlo { seed: u64, budget: usize },
    /// Exact when the prior is explicit, otherwise Monte-Carlo.
    Auto { seed: u64, budget: usize },
}

impl Default for AtomPlan {
    fn default() -> Self {
        AtomPlan::Auto {
            seed: 0,
            budget: 20_000,
        }
    }
}

/// Anything that can produce the pair law at a given per-sample degree.
pub trait PairSource: Send + Sync {
    fn id(&self) -> &str;
    fn pair_atoms(&self, d: Degree, plan: AtomPlan) -> Result<PairAtoms>;
}

impl PairSource for TestingProblem {
    fn id(&self) -> &str {
        &self.id
    }

    fn pair_atoms(&self, d: Degree, plan: AtomPlan) -> Result<PairAtoms> {
        match (plan, &self.prior) {
            (AtomPlan::Exact, _) | (AtomPlan::Auto { .. }, Prior::Explicit(_)) => {
                exact_pairs(self, d)
            }
            (AtomPlan::MonteCarlo { seed, budget }, _)
            | (AtomPlan::Auto { seed, budget }, Prior::Sampler(_)) => {
                sampled_pairs(self, d, seed, budget)
            }
        }
    }
}

fn exact_pairs(problem: &TestingProblem, d: Degree) -> Result<PairAtoms> {
    let list = problem.explicit().map_err(|_| {
        Error::Unsupported("exact correlation atoms need an explicit prior".into())
    })?;
    let ctx = PairContext::new(
        &problem.null,
        needs_dense(list.iter().map(|w| &w.alternate)),
    )?;
    let prepared = list
        .iter()
        .map(|w| ctx.prepare(&w.alternate))
        .collect::<Result<Vec<_>>>()?;
    let mut atoms = Vec::with_capacity(list.len() * list.len());
    for (i, wi) in list.iter().enumerate() {
        for (j, wj) in list.iter().enumerate() {
            // row j < i is already filled
            let (full_x, low_x) = if j < i {
                let a: &PairAtom = &atoms[j * list.len() + i];
                (a.full_x, a.low_x)
            } else {
                ctx.pair(&prepared[i], &prepared[j], d)?
            };
            atoms.push(PairAtom {
                weight: wi.weight * wj.weight,
                full_x,
                low_x,
            });
        }
    }
    Ok(PairAtoms {
        atoms,
        degree: d,
        mode: AtomMode::Exact,
    })
}

/// Draws one alternate from the prior.
pub fn draw_alternate(prior: &Prior, rng: &mut ChaCha8Rng) -> Result<Alternate> {
    match prior {
        Prior::Explicit(list) => {
            let r: f64 = rng.random();
            let mut acc = 0.0;
            for w in list {
                acc += w.weight;
                if r < acc {
                    return Ok(w.alternate.clone());
                }
            }
            Ok(list.last().expect("nonempty prior").alternate.clone())
        }
        Prior::Sampler(s) => s(rng),
    }
}

fn sampled_pairs(problem: &TestingProblem, d: Degree, seed: u64, budget: usize) -> Result<PairAtoms> {
    if budget < 2 {
        return Err(Error::InvalidInput("Monte-Carlo budget must be at least 2".into()));
    }
    let w = 1.0 / budget as f64;
    let mut atoms = Vec::with_capacity(budget);
    for i in 0..budget {
        let mut rng = stream_rng(seed, i as u64);
        let u = draw_alternate(&problem.prior, &mut rng)?;
        let v = draw_alternate(&problem.prior, &mut rng)?;
        let (full_x, low_x) = problem.pair_excess(&u, &v, d)?;
        atoms.push(PairAtom {
            weight: w,
            full_x,
            low_x,
        });
    }
    Ok(PairAtoms {
        atoms,
        degree: d,
        mode: AtomMode::MonteCarlo { seed, budget },
    })
}

/// Law of `⟨D̄_u, D̄_v⟩ - 1`: every pair of an explicit prior when `exact`,
/// otherwise `budget` seeded draws with uniform weights.
pub fn correlation_atoms(
    source: &dyn PairSource,
    exact: bool,
    budget: usize,
    seed: u64,
) -> Result<CorrelationAtoms> {
    let plan = if exact {
        AtomPlan::Exact
    } else {
        AtomPlan::MonteCarlo { seed, budget }
    };
    Ok(source.pair_atoms(Degree::Unbounded, plan)?.correlation())
}
