//! TOML problem files. The grammar is documented in `docs/problem-file.md`.
//!
//! A file either lists a null and explicit alternates, or names a zoo
//! family with its parameters; either may carry a noise section.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Alternate, Null, Prior, ProductNull, TestingProblem, Weighted};
use crate::noise::{apply_noise, MarkovOperatorSpec, NoiseSpec, RestrictionMode, RestrictionSpec};
use crate::zoo::{make_by_name, ZooInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null: Option<NullSection>,
    #[serde(default, rename = "alternate", skip_serializing_if = "Vec::is_empty")]
    pub alternates: Vec<AlternateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zoo: Option<ZooSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NullSection {
    /// Independent coordinates with explicit marginals.
    Product { marginals: Vec<Vec<f64>> },
    /// `n` binary coordinates, each `1` with probability `q` (default ½).
    Binary {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<f64>,
    },
    Gaussian { dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Prior weight; omitted weights share the remaining mass equally.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(flatten)]
    pub body: AlternateBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlternateBody {
    Table { probs: Vec<f64> },
    Product { marginals: Vec<Vec<f64>> },
    MeanShift { mean: Vec<f64> },
    /// Holds `A` for `N(0, (I + A)^{-1})`, row-major.
    Covariance { matrix: Vec<Vec<f64>> },
    Parity {
        subset: Vec<usize>,
        #[serde(default = "unit")]
        amplitude: f64,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZooSection {
    pub family: String,
    #[serde(default)]
    pub seed: u64,
    /// Numeric (or boolean) family parameters.
    #[serde(flatten)]
    pub params: BTreeMap<String, toml::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Explicit single-coordinate operator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<MarkovOperatorSpec>,
    /// Resample toward the null marginal with keep probability `rho`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Apply the operator only outside a random kept set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restriction: Option<RestrictionSection>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestrictionSection {
    pub mode: RestrictionMode,
    pub rate: f64,
}

/// A loaded problem: either a zoo instance or an explicit problem.
#[derive(Clone, Debug)]
pub enum Loaded {
    Zoo(ZooInstance),
    Explicit(TestingProblem),
}

impl Loaded {
    pub fn problem(&self) -> Result<&TestingProblem> {
        match self {
            Loaded::Zoo(z) => z.problem(),
            Loaded::Explicit(p) => Ok(p),
        }
    }

    pub fn source(&self) -> &dyn crate::measures::PairSource {
        match self {
            Loaded::Zoo(z) => z,
            Loaded::Explicit(p) => p,
        }
    }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build(&self) -> Result<Loaded> {
        let loaded = match (&self.zoo, &self.null) {
            (Some(_), Some(_)) => {
                return Err(Error::Parse("a problem file has either [zoo] or [null], not both".into()))
            }
            (Some(z), None) => {
                if !self.alternates.is_empty() {
                    return Err(Error::Parse("[[alternate]] entries are not allowed with [zoo]".into()));
                }
                Loaded::Zoo(build_zoo(z)?)
            }
            (None, Some(n)) => Loaded::Explicit(self.build_explicit(n)?),
            (None, None) => return Err(Error::Parse("a problem file needs [zoo] or [null]".into())),
        };
        match &self.noise {
            None => Ok(loaded),
            Some(ns) => {
                let base = loaded.problem()?;
                let spec = noise_spec(ns, base)?;
                let mut noised = apply_noise(base, &spec, ns.seed)?;
                if let Some(id) = &self.id {
                    noised.id = id.clone();
                }
                Ok(Loaded::Explicit(noised))
            }
        }
    }

    fn build_explicit(&self, ns: &NullSection) -> Result<TestingProblem> {
        let null = match ns {
            NullSection::Product { marginals } => Null::Product(ProductNull::new(marginals.clone())?),
            NullSection::Binary { n, q } => Null::Product(ProductNull::bernoulli(*n, q.unwrap_or(0.5))?),
            NullSection::Gaussian { dim } => Null::Gaussian { dim: *dim },
        };
        if self.alternates.is_empty() {
            return Err(Error::Parse("explicit problems need at least one [[alternate]]".into()));
        }
        let given: f64 = self.alternates.iter().filter_map(|a| a.weight).sum();
        let missing = self.alternates.iter().filter(|a| a.weight.is_none()).count();
        let share = if missing > 0 { (1.0 - given) / missing as f64 } else { 0.0 };
        let list = self
            .alternates
            .iter()
            .enumerate()
            .map(|(i, a)| {
                Ok(Weighted {
                    label: a.label.clone().unwrap_or_else(|| format!("alt{i}")),
                    weight: a.weight.unwrap_or(share),
                    alternate: a.body.to_alternate()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TestingProblem::new(self.id.clone().unwrap_or_else(|| "problem".into()), null, Prior::Explicit(list))
    }
}

impl AlternateBody {
    fn to_alternate(&self) -> Result<Alternate> {
        Ok(match self {
            AlternateBody::Table { probs } => Alternate::Table(probs.clone()),
            AlternateBody::Product { marginals } => Alternate::Product(marginals.clone()),
            AlternateBody::MeanShift { mean } => Alternate::MeanShift(mean.clone()),
            AlternateBody::Covariance { matrix } => {
                let n = matrix.len();
                if matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::Parse("covariance matrix must be square".into()));
                }
                Alternate::Covariance(nalgebra::DMatrix::from_fn(n, n, |i, j| matrix[i][j]))
            }
            AlternateBody::Parity { subset, amplitude } => Alternate::ParityBump {
                subset: subset.clone(),
                amplitude: *amplitude,
            },
        })
    }
}

fn value_as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Integer(i) => Some(*i as f64),
        toml::Value::Float(f) => Some(*f),
        toml::Value::Boolean(b) => Some(if *b { 1.0 } else { 0.0 }),
        _ => None,
    }
}

fn build_zoo(z: &ZooSection) -> Result<ZooInstance> {
    for (k, v) in &z.params {
        if value_as_f64(v).is_none() {
            return Err(Error::Parse(format!("zoo parameter {k:?} must be a number or boolean")));
        }
    }
    make_by_name(&z.family, &|name| z.params.get(name).and_then(value_as_f64), z.seed)
}

fn noise_spec(ns: &NoiseSection, base: &TestingProblem) -> Result<NoiseSpec> {
    let op = match (&ns.operator, ns.rho) {
        (Some(op), None) => op.clone(),
        (None, Some(rho)) => {
            let null = base.null.as_product()?;
            let first = null.marginal(0).to_vec();
            if (1..null.coords()).any(|j| null.marginal(j) != first.as_slice()) {
                return Err(Error::Parse(
                    "rho noise needs identical null marginals; give an explicit operator".into(),
                ));
            }
            MarkovOperatorSpec::resample(&first, rho)?
        }
        _ => return Err(Error::Parse("[noise] needs exactly one of operator or rho".into())),
    };
    Ok(match &ns.restriction {
        None => NoiseSpec::Operator(op),
        Some(r) => NoiseSpec::Restriction(RestrictionSpec {
            mode: r.mode,
            rate: r.rate,
            operator: op,
        }),
    })
}

/// Reads and builds a problem file from disk.
pub fn load_problem(path: &std::path::Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    ProblemFile::parse(&text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPLICIT: &str = r#"
id = "two-tables"

[null]
kind = "binary"
n = 2
q = 0.3

[[alternate]]
kind = "table"
probs = [0.1, 0.2, 0.3, 0.4]
weight = 0.25

[[alternate]]
kind = "product"
marginals = [[0.5, 0.5], [0.6, 0.4]]
"#;

    #[test]
    fn explicit_file_builds() {
        let f = ProblemFile::parse(EXPLICIT).unwrap();
        let p = f.build().unwrap();
        let list = p.problem().unwrap().explicit().unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[1].weight, 0.75);
        assert_eq!(p.source().id(), "two-tables");
    }

    #[test]
    fn zoo_file_builds() {
        let text = "[zoo]\nfamily = \"tensor_pca\"\nn = 4\nr = 2\nlambda = 0.5\n";
        let p = ProblemFile::parse(text).unwrap().build().unwrap();
        assert!(matches!(p, Loaded::Zoo(_)));
        assert_eq!(p.source().id(), "tensor_pca(n=4,r=2,lambda=0.5)");
    }

    #[test]
    fn floats_round_trip_exactly() {
        let mut f = ProblemFile::parse(EXPLICIT).unwrap();
        f.alternates[0].weight = Some(0.1 + 0.2);
        f.alternates[1].body = AlternateBody::Product {
            marginals: vec![vec![1.0 / 3.0, 2.0 / 3.0], vec![std::f64::consts::FRAC_1_PI, 1.0 - std::f64::consts::FRAC_1_PI]],
        };
        let back = ProblemFile::parse(&f.to_toml().unwrap()).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn noise_section_applies() {
        let text = format!("{EXPLICIT}\n[noise]\nrho = 0.5\n").replace("q = 0.3", "q = 0.5");
        let p = ProblemFile::parse(&text).unwrap().build().unwrap();
        assert!(matches!(p, Loaded::Explicit(_)));
        let bad = format!("{EXPLICIT}\n[noise]\nrho = 0.5\n").replace("kind = \"binary\"\nn = 2\nq = 0.3", "kind = \"product\"\nmarginals = [[0.5, 0.5], [0.3, 0.7]]");
        assert!(ProblemFile::parse(&bad).unwrap().build().is_err());
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(ProblemFile::parse("[null]\nkind = \"binary\"\nn = 2\nextra = 1\n").is_err());
        assert!(ProblemFile::parse("id = \"x\"\n").unwrap().build().is_err());
        let both = "[null]\nkind = \"gaussian\"\ndim = 2\n[zoo]\nfamily = \"hpc\"\n";
        assert!(ProblemFile::parse(both).unwrap().build().is_err());
        let unknown = "[zoo]\nfamily = \"nope\"\n";
        assert!(ProblemFile::parse(unknown).unwrap().build().is_err());
    }
}
