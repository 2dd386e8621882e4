//! Constructors for the standard planted problems, each with a closed-form
//! pair law so that large instances never need dense tables.

mod clique;
mod counterexample;
mod ggm;
mod parity;
mod tensor_pca;
mod wishart;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{AtomMode, AtomPlan, Degree, PairAtom, PairAtoms, PairSource, TestingProblem};

pub use clique::{
    bipartite_coefficient, bipartite_ldlr_by_coefficients, hpc_coefficient, hpc_ldlr_by_coefficients,
    make_bipartite_pds, make_multisample_hpc,
};
pub use counterexample::{counterexample_vectors, make_sda_counterexample, CounterexampleVectors};
pub use ggm::{
    ggm_correlation_mc, ggm_moment_bound, ggm_sub_prior, make_prs_ggm, make_prs_ggm_with_stats, signed_regular_graph,
    GgmStats,
};
pub use parity::{make_sparse_parity, make_sparse_parity_family, parity_family_size};
pub use tensor_pca::{make_tensor_pca, tensor_pca_k_sample_bound, tensor_pca_ldlr_bound};
pub use wishart::{
    make_spiked_wishart, wishart_coefficient_square, wishart_high_degree_bound, wishart_ldlr_by_hermite,
    wishart_u_moment,
};

/// What a parameter measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Count,
    Probability,
    Signal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Param {
    pub name: &'static str,
    pub value: f64,
    pub unit: Unit,
}

impl Param {
    pub fn count(name: &'static str, value: usize) -> Self {
        Self {
            name,
            value: value as f64,
            unit: Unit::Count,
        }
    }

    pub fn prob(name: &'static str, value: f64) -> Self {
        Self {
            name,
            value,
            unit: Unit::Probability,
        }
    }

    pub fn signal(name: &'static str, value: f64) -> Self {
        Self {
            name,
            value,
            unit: Unit::Signal,
        }
    }
}

/// Whether an instance enumerates its prior or samples from it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Exact,
    Sampled,
}

/// Exact pair law at a given per-sample degree.
pub type PairLaw = Arc<dyn Fn(Degree) -> Result<Vec<PairAtom>> + Send + Sync>;
/// Closed-form pair excesses for alternates `i, j` of the explicit prior.
pub type PairFormula = Arc<dyn Fn(usize, usize, Degree) -> Result<(f64, f64)> + Send + Sync>;

#[derive(Clone)]
pub struct ZooInstance {
    /// Stable family name used in reports.
    pub family: &'static str,
    problem: Option<TestingProblem>,
    id: String,
    pub params: Vec<Param>,
    law: Option<PairLaw>,
    formula: Option<PairFormula>,
}

impl fmt::Debug for ZooInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ZooInstance")
            .field("id", &self.id)
            .field("params", &self.params)
            .field("closed_form", &self.law.is_some())
            .finish()
    }
}

fn instance_id(family: &str, params: &[Param]) -> String {
    let body: Vec<String> = params.iter().map(|p| format!("{}={}", p.name, p.value)).collect();
    format!("{family}({})", body.join(","))
}

impl ZooInstance {
    pub(crate) fn new(
        family: &'static str,
        params: Vec<Param>,
        problem: Option<TestingProblem>,
        law: Option<PairLaw>,
        formula: Option<PairFormula>,
    ) -> Self {
        let id = instance_id(family, &params);
        let problem = problem.map(|mut p| {
            p.id = id.clone();
            p
        });
        Self {
            family,
            problem,
            id,
            params,
            law,
            formula,
        }
    }

    /// The underlying problem; absent for instances too large to represent
    /// outside their closed form.
    pub fn problem(&self) -> Result<&TestingProblem> {
        self.problem
            .as_ref()
            .ok_or_else(|| Error::Unsupported(format!("{} exists only in closed form", self.id)))
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn has_closed_form(&self) -> bool {
        self.law.is_some()
    }

    pub fn has_explicit_prior(&self) -> bool {
        self.problem.as_ref().is_some_and(|p| p.explicit().is_ok())
    }

    /// Exact pair law from the closed form.
    pub fn closed_form_atoms(&self, d: Degree) -> Result<PairAtoms> {
        let law = self
            .law
            .as_ref()
            .ok_or_else(|| Error::Unsupported(format!("{} has no closed-form pair law", self.id)))?;
        Ok(PairAtoms {
            atoms: law(d)?,
            degree: d,
            mode: AtomMode::Exact,
        }
        .compressed())
    }

    /// Largest discrepancy between the closed-form pair excesses and the
    /// generic computation over every pair of the explicit prior.
    pub fn closed_form_discrepancy(&self, d: Degree) -> Result<f64> {
        let formula = self
            .formula
            .as_ref()
            .ok_or_else(|| Error::Unsupported(format!("{} has no pair formula", self.id)))?;
        let p = self.problem()?;
        let list = p.explicit()?;
        let mut worst = 0.0f64;
        for (i, u) in list.iter().enumerate() {
            for (j, v) in list.iter().enumerate() {
                let (f0, l0) = formula(i, j, d)?;
                let (f1, l1) = p.pair_excess(&u.alternate, &v.alternate, d)?;
                worst = worst.max((f0 - f1).abs()).max((l0 - l1).abs());
            }
        }
        Ok(worst)
    }
}

impl PairSource for ZooInstance {
    fn id(&self) -> &str {
        &self.id
    }

    fn pair_atoms(&self, d: Degree, plan: AtomPlan) -> Result<PairAtoms> {
        match plan {
            AtomPlan::Exact | AtomPlan::Auto { .. } if self.law.is_some() => self.closed_form_atoms(d),
            _ => self.problem()?.pair_atoms(d, plan),
        }
    }
}

fn check_prob(name: &str, v: f64, open_low: bool, open_high: bool) -> Result<()> {
    let lo_ok = if open_low { v > 0.0 } else { v >= 0.0 };
    let hi_ok = if open_high { v < 1.0 } else { v <= 1.0 };
    if lo_ok && hi_ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} = {v} outside its range")))
    }
}

/// Builds an instance by family name from named numeric parameters.
pub fn make_by_name(family: &str, get: &dyn Fn(&str) -> Option<f64>, seed: u64) -> Result<ZooInstance> {
    let need = |k: &str| get(k).ok_or_else(|| Error::InvalidInput(format!("{family} needs parameter {k:?}")));
    let count = |k: &str| -> Result<usize> {
        let v = need(k)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::InvalidInput(format!("{k} = {v} must be a nonnegative integer")));
        }
        Ok(v as usize)
    };
    let prior = match get("sampled") {
        Some(v) if v != 0.0 => PriorKind::Sampled,
        _ => PriorKind::Exact,
    };
    match family {
        "tensor_pca" => make_tensor_pca(count("n")?, count("r")?, need("lambda")?, prior),
        "hpc" => make_multisample_hpc(count("N")?, count("K")?, count("s")?, need("q")?),
        "bipartite_pds" => make_bipartite_pds(count("N")?, count("K")?, need("p")?, need("q")?),
        "sparse_parity" => make_sparse_parity_family(count("n")?, count("s")?),
        "wishart" => make_spiked_wishart(count("n")?, need("rho")?, need("lambda")?, prior),
        "ggm" => make_prs_ggm(count("n")?, count("s")?, count("d")?, need("kappa")?, seed),
        "counterexample" => make_sda_counterexample(count("n")?, seed),
        other => Err(Error::InvalidInput(format!("unknown zoo family {other:?}"))),
    }
}

/// Family names accepted by [`make_by_name`].
pub const FAMILIES: [&str; 7] = [
    "tensor_pca",
    "hpc",
    "bipartite_pds",
    "sparse_parity",
    "wishart",
    "ggm",
    "counterexample",
];
