//! Parameter sweeps. The sweep file grammar is documented in
//! `docs/sweep-file.md`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lowdeg::ldlr::{high_degree_from_atoms, k_sample_lr_norm, ldlr_norm, SamplewiseDegree};
use lowdeg::measures::{AtomPlan, Degree, PairSource};
use lowdeg::numerics::stream_rng;
use lowdeg::problem_file::{Loaded, ProblemFile, RestrictionSection};
use lowdeg::sda::{correlation_matrix, product_sda, sda, SdaValue, DEFAULT_Q_CAP};
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::report::{check_state_cap, csv_sink, num, parse_degree, read_spec, RunManifest, TaskStatus};
use crate::{Common, Failure, EXIT_INFEASIBLE, EXIT_PASS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Ldlr,
    Sda,
    ProductSda,
    KLr,
    HighDegree,
}

impl Quantity {
    fn tag(self) -> &'static str {
        match self {
            Quantity::Ldlr => "ldlr",
            Quantity::Sda => "sda",
            Quantity::ProductSda => "product_sda",
            Quantity::KLr => "k_lr",
            Quantity::HighDegree => "high_degree",
        }
    }

    fn needs(self) -> &'static [&'static str] {
        match self {
            Quantity::Ldlr => &["m", "d", "k"],
            Quantity::Sda | Quantity::ProductSda => &["m"],
            Quantity::KLr => &["k"],
            Quantity::HighDegree => &["d", "k"],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Inline problem, in the problem-file grammar.
    #[serde(default)]
    pub problem: Option<ProblemFile>,
    /// Problem file path, relative to the sweep file.
    #[serde(default)]
    pub problem_file: Option<PathBuf>,
    #[serde(default, rename = "axis")]
    pub axes: Vec<Axis>,
    pub quantities: Vec<Quantity>,
    /// Fixed values of `m`, `d` and `k` not swept by an axis.
    #[serde(default)]
    pub params: toml::Table,
    /// Pair budget when a prior must be sampled.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Used when `--out` is absent.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_budget() -> usize {
    20_000
}

const QUANTITY_PARAMS: [&str; 3] = ["m", "d", "k"];
const NOISE_PARAMS: [&str; 3] = ["noise.rho", "noise.rate", "noise.seed"];

impl SweepSpec {
    pub fn parse(text: &str, dir: &Path) -> Result<(Self, ProblemFile), Failure> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Failure::usage(format!("sweep file: {e}")))?;
        let base = match (&spec.problem, &spec.problem_file) {
            (Some(p), None) => p.clone(),
            (None, Some(f)) => {
                let path = dir.join(f);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
                ProblemFile::parse(&text)?
            }
            _ => return Err(Failure::usage("a sweep needs exactly one of [problem] or problem_file")),
        };
        spec.validate(&base)?;
        Ok((spec, base))
    }

    fn validate(&self, base: &ProblemFile) -> Result<(), Failure> {
        if self.axes.is_empty() || self.axes.iter().any(|a| a.values.is_empty()) {
            return Err(Failure::usage("the sweep grid is empty"));
        }
        if self.quantities.is_empty() {
            return Err(Failure::usage("a sweep needs at least one quantity"));
        }
        let mut seen = BTreeSet::new();
        for a in &self.axes {
            if !seen.insert(a.name.as_str()) {
                return Err(Failure::usage(format!("axis {:?} appears twice", a.name)));
            }
            let known = QUANTITY_PARAMS.contains(&a.name.as_str()) || NOISE_PARAMS.contains(&a.name.as_str());
            if !known && base.zoo.is_none() {
                return Err(Failure::usage(format!(
                    "axis {:?} is not m, d, k or a noise parameter, and the problem has no [zoo] section",
                    a.name
                )));
            }
            if a.name.starts_with("noise.") && base.noise.is_none() {
                return Err(Failure::usage(format!("axis {:?} needs a [noise] section", a.name)));
            }
        }
        for key in self.params.keys() {
            if !QUANTITY_PARAMS.contains(&key.as_str()) {
                return Err(Failure::usage(format!("unknown entry {key:?} in [params]")));
            }
        }
        for q in &self.quantities {
            for need in q.needs() {
                if !seen.contains(need) && !self.params.contains_key(*need) {
                    return Err(Failure::usage(format!("quantity {} needs {need} as a param or axis", q.tag())));
                }
            }
        }
        Ok(())
    }

    fn grid_len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Axis values at grid index `i`; the first axis varies slowest.
    fn point(&self, mut i: usize) -> Vec<&toml::Value> {
        let mut out = vec![&self.axes[0].values[0]; self.axes.len()];
        for (j, a) in self.axes.iter().enumerate().rev() {
            out[j] = &a.values[i % a.values.len()];
            i /= a.values.len();
        }
        out
    }
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Integer(i) => Some(*i as f64),
        toml::Value::Float(f) => Some(*f),
        _ => None,
    }
}

fn as_count(name: &str, v: &toml::Value) -> Result<u64, String> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(format!("{name} = {v} must be a nonnegative integer")),
    }
}

fn text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parameters of one grid point.
struct Point {
    problem: ProblemFile,
    m: Option<toml::Value>,
    d: Option<toml::Value>,
    k: Option<toml::Value>,
}

fn build_point(spec: &SweepSpec, base: &ProblemFile, values: &[&toml::Value]) -> Result<Point, String> {
    let mut problem = base.clone();
    let get = |k: &str| spec.params.get(k).cloned();
    let (mut m, mut d, mut k) = (get("m"), get("d"), get("k"));
    for (axis, v) in spec.axes.iter().zip(values) {
        let v = (*v).clone();
        match axis.name.as_str() {
            "m" => m = Some(v),
            "d" => d = Some(v),
            "k" => k = Some(v),
            "noise.rho" | "noise.rate" | "noise.seed" => {
                let noise = problem.noise.as_mut().ok_or("no [noise] section")?;
                let f = as_f64(&v).ok_or_else(|| format!("{} = {v} must be a number", axis.name))?;
                match axis.name.as_str() {
                    "noise.rho" => noise.rho = Some(f),
                    "noise.seed" => noise.seed = as_count("noise.seed", &v)?,
                    _ => match noise.restriction.as_mut() {
                        Some(RestrictionSection { rate, .. }) => *rate = f,
                        None => return Err("noise.rate needs a restriction".into()),
                    },
                }
            }
            "seed" => {
                let zoo = problem.zoo.as_mut().ok_or("no [zoo] section")?;
                zoo.seed = as_count("seed", &v)?;
            }
            name => {
                let zoo = problem.zoo.as_mut().ok_or("no [zoo] section")?;
                zoo.params.insert(name.to_string(), v);
            }
        }
    }
    Ok(Point { problem, m, d, k })
}

struct Row {
    quantity: &'static str,
    value: Option<f64>,
    stderr: Option<f64>,
    status: String,
}

fn need<'a>(v: &'a Option<toml::Value>, name: &str) -> Result<&'a toml::Value, String> {
    v.as_ref().ok_or_else(|| format!("{name} is not set"))
}

fn degree(v: &toml::Value) -> Result<Degree, String> {
    parse_degree(&text(v)).map_err(|f| f.message)
}

fn sda_status(v: SdaValue) -> (Option<f64>, String) {
    match v {
        SdaValue::Finite(q) => (Some(q as f64), "ok".into()),
        SdaValue::AtLeast(q) => (Some(q as f64), "lower-bound".into()),
    }
}

fn evaluate(q: Quantity, point: &Point, loaded: &Loaded, plan: AtomPlan) -> Result<(Option<f64>, Option<f64>, String), String> {
    let source: &dyn PairSource = loaded.source();
    let e = |err: lowdeg::Error| err.to_string();
    let m_f = || as_f64(need(&point.m, "m")?).ok_or_else(|| "m must be a number".to_string());
    Ok(match q {
        Quantity::Ldlr => {
            let m = as_count("m", need(&point.m, "m")?)?;
            let d = degree(need(&point.d, "d")?)?;
            let k = as_count("k", need(&point.k, "k")?)? as u32;
            let r = ldlr_norm(source, m, SamplewiseDegree::new(d, k), plan).map_err(e)?;
            (Some(r.value), r.stderr, "ok".into())
        }
        Quantity::Sda => {
            let (v, status) = sda_status(sda(source, m_f()?, plan).map_err(e)?.value);
            (v, None, status)
        }
        Quantity::ProductSda => {
            let cm = correlation_matrix(loaded.problem().map_err(e)?).map_err(e)?;
            let r = product_sda(&cm, m_f()?, DEFAULT_Q_CAP).map_err(e)?;
            let (v, status) = sda_status(r.lower);
            let status = if r.exact { status } else { "lower-bound".into() };
            (v, None, status)
        }
        Quantity::KLr => {
            let k = as_count("k", need(&point.k, "k")?)? as u32;
            let r = k_sample_lr_norm(source, k, plan).map_err(e)?;
            (Some(r.uncentered), r.uncentered_stderr, "ok".into())
        }
        Quantity::HighDegree => {
            let d = degree(need(&point.d, "d")?)?;
            let k = as_count("k", need(&point.k, "k")?)? as u32;
            let atoms = source.pair_atoms(d, plan).map_err(e)?;
            let (v, se) = high_degree_from_atoms(&atoms, k).map_err(e)?;
            (Some(v), se, "ok".into())
        }
    })
}

fn run_point(spec: &SweepSpec, base: &ProblemFile, index: usize, seed: u64, cap: u64) -> (String, Vec<Row>) {
    let infeasible = |id: String, msg: String| {
        let rows = spec
            .quantities
            .iter()
            .map(|q| Row {
                quantity: q.tag(),
                value: None,
                stderr: None,
                status: format!("infeasible: {msg}"),
            })
            .collect();
        (id, rows)
    };
    let base_id = base
        .id
        .clone()
        .or_else(|| base.zoo.as_ref().map(|z| z.family.clone()))
        .unwrap_or_else(|| "problem".into());
    let point = match build_point(spec, base, &spec.point(index)) {
        Ok(p) => p,
        Err(msg) => return infeasible(base_id, msg),
    };
    let loaded = match point.problem.build().and_then(|l| check_state_cap(&l, cap).map(|_| l)) {
        Ok(l) => l,
        Err(err) => return infeasible(base_id, err.to_string()),
    };
    let plan = AtomPlan::Auto {
        seed,
        budget: spec.budget,
    };
    let rows = spec
        .quantities
        .iter()
        .map(|&q| match evaluate(q, &point, &loaded, plan) {
            Ok((Some(v), _, _)) if !v.is_finite() => Row {
                quantity: q.tag(),
                value: None,
                stderr: None,
                status: format!("non-finite: {v}"),
            },
            Ok((value, stderr, status)) => Row {
                quantity: q.tag(),
                value,
                stderr: stderr.filter(|s| s.is_finite()),
                status,
            },
            Err(msg) => Row {
                quantity: q.tag(),
                value: None,
                stderr: None,
                status: format!("infeasible: {msg}"),
            },
        })
        .collect();
    (loaded.source().id().to_string(), rows)
}

/// Seed of grid point `index`, derived from the run seed.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    stream_rng(seed, index as u64).random()
}

pub fn cmd_sweep(common: &Common) -> Result<u8, Failure> {
    let started = Instant::now();
    let (path, bytes) = read_spec(common)?;
    let body = String::from_utf8(bytes.clone()).map_err(|_| Failure::usage("sweep file is not UTF-8"))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let (spec, base) = SweepSpec::parse(&body, dir)?;
    let out = common.out.clone().or_else(|| spec.out.as_ref().map(|o| dir.join(o)));

    let results: Vec<(String, Vec<Row>)> = (0..spec.grid_len())
        .into_par_iter()
        .map(|i| run_point(&spec, &base, i, point_seed(common.seed, i), common.cap_states))
        .collect();

    let mut w = csv_sink(out.as_deref())?;
    let mut header = vec!["problem-id".to_string()];
    header.extend(spec.axes.iter().map(|a| a.name.clone()));
    header.extend(["quantity", "value", "stderr", "seed", "status"].map(String::from));
    w.write_record(&header)?;
    let (mut total, mut infeasible) = (0usize, 0usize);
    let mut tasks = Vec::new();
    for (i, (id, rows)) in results.iter().enumerate() {
        let seed = point_seed(common.seed, i).to_string();
        let values: Vec<String> = spec.point(i).into_iter().map(text).collect();
        for row in rows {
            total += 1;
            if row.status.starts_with("infeasible") || row.status.starts_with("non-finite") {
                infeasible += 1;
            }
            let mut rec = vec![id.clone()];
            rec.extend(values.iter().cloned());
            rec.extend([row.quantity.to_string(), num(row.value), num(row.stderr), seed.clone(), row.status.clone()]);
            w.write_record(&rec)?;
        }
        let bad = rows.iter().filter(|r| r.status != "ok" && r.status != "lower-bound").count();
        tasks.push(TaskStatus {
            name: format!("point {i}"),
            status: if bad == 0 { "ok".into() } else { format!("{bad} infeasible") },
            seconds: 0.0,
            detail: values.join(","),
        });
    }
    w.flush()?;
    RunManifest::new("sweep", common.seed, &bytes, started, tasks).write_beside(out.as_deref())?;
    Ok(if infeasible == total { EXIT_INFEASIBLE } else { EXIT_PASS })
}
