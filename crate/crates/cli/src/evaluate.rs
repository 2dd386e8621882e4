//! Single-point `ldlr` and `sda` rows.

use std::time::Instant;

use lowdeg::ldlr::{ldlr_norm, LdlrReport, SamplewiseDegree};
use lowdeg::measures::AtomPlan;
use lowdeg::problem_file::{load_problem, Loaded};
use lowdeg::sda::{sda, SdaReport};
use serde::Serialize;

use crate::report::{check_state_cap, csv_sink, num, parse_degree, read_spec, RunManifest, TaskStatus};
use crate::{Common, Failure, EXIT_PASS};

#[derive(Debug, Serialize)]
pub struct LdlrRow {
    #[serde(rename = "problem-id")]
    pub problem_id: String,
    pub m: u64,
    pub d: String,
    pub k: u32,
    pub value: String,
    pub stderr: String,
    pub backend: String,
    pub seed: String,
}

impl From<&LdlrReport> for LdlrRow {
    fn from(r: &LdlrReport) -> Self {
        Self {
            problem_id: r.problem_id.clone(),
            m: r.m,
            d: r.degree.d.to_string(),
            k: r.degree.k,
            value: num(Some(r.value)),
            stderr: num(r.stderr),
            backend: r.backend.tag().into(),
            seed: r.mode.seed().map(|s| s.to_string()).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SdaRow {
    #[serde(rename = "problem-id")]
    pub problem_id: String,
    pub m: f64,
    pub q: String,
    #[serde(rename = "witness-prob")]
    pub witness_prob: String,
    #[serde(rename = "witness-mean")]
    pub witness_mean: String,
    pub mode: String,
    pub seed: String,
}

impl SdaRow {
    pub fn new(problem_id: &str, r: &SdaReport) -> Self {
        Self {
            problem_id: problem_id.into(),
            m: r.m,
            q: r.value.to_string(),
            witness_prob: num(r.witness.as_ref().map(|w| w.prob)),
            witness_mean: num(r.witness.as_ref().map(|w| w.mean)),
            mode: r.mode.tag().into(),
            seed: r.mode.seed().map(|s| s.to_string()).unwrap_or_default(),
        }
    }
}

fn load(common: &Common) -> Result<(Vec<u8>, Loaded), Failure> {
    let (path, bytes) = read_spec(common)?;
    let loaded = load_problem(&path)?;
    check_state_cap(&loaded, common.cap_states)?;
    Ok((bytes, loaded))
}

fn finish(common: &Common, command: &str, spec: &[u8], started: Instant, detail: String) -> Result<u8, Failure> {
    let task = TaskStatus {
        name: command.into(),
        status: "ok".into(),
        seconds: started.elapsed().as_secs_f64(),
        detail,
    };
    RunManifest::new(command, common.seed, spec, started, vec![task]).write_beside(common.out.as_deref())?;
    Ok(EXIT_PASS)
}

pub fn cmd_ldlr(common: &Common, m: u64, d: &str, k: u32, budget: usize) -> Result<u8, Failure> {
    let started = Instant::now();
    let d = parse_degree(d)?;
    let (spec, loaded) = load(common)?;
    let plan = AtomPlan::Auto {
        seed: common.seed,
        budget,
    };
    let r = ldlr_norm(loaded.source(), m, SamplewiseDegree::new(d, k), plan)?;
    if !r.value.is_finite() {
        return Err(Failure {
            code: crate::EXIT_FAIL,
            message: format!("LDLR is not finite: {}", r.value),
        });
    }
    let mut w = csv_sink(common.out.as_deref())?;
    w.serialize(LdlrRow::from(&r))?;
    w.flush()?;
    finish(common, "ldlr", &spec, started, format!("value {}", r.value))
}

pub fn cmd_sda(common: &Common, m: f64, budget: usize) -> Result<u8, Failure> {
    let started = Instant::now();
    if m.is_nan() || m <= 0.0 {
        return Err(Failure::usage("--m must be positive"));
    }
    let (spec, loaded) = load(common)?;
    let plan = AtomPlan::Auto {
        seed: common.seed,
        budget,
    };
    let r = sda(loaded.source(), m, plan)?;
    let mut w = csv_sink(common.out.as_deref())?;
    w.serialize(SdaRow::new(loaded.source().id(), &r))?;
    w.flush()?;
    finish(common, "sda", &spec, started, format!("SDA {}", r.value))
}
