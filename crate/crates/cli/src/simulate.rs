//! `clone-test` and `sq-sim`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use lowdeg::cloning::{
    bernoulli_clone_gof, gaussian_clone_moments, householder_matrix, pc_clone, pc_unclone, CloneConfig, Hypergraph,
};
use lowdeg::problem_file::load_problem;
use lowdeg::sq::{run_sq_algorithm, Adversary, EmptyPolicy, Hypothesis, NonadaptivePolicy, Query, SqPolicy};
use lowdeg::noise::k_subsets;
use serde::{Deserialize, Serialize};

use crate::report::{check_state_cap, csv_sink, num, sha256_hex, RunManifest, TaskStatus};
use crate::{Common, Failure, EXIT_FAIL, EXIT_PASS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CloneKind {
    Bernoulli,
    Gaussian,
    Pc,
}

#[derive(Args, Debug)]
pub struct CloneArgs {
    #[arg(long, value_enum)]
    pub kind: CloneKind,
    /// Clone counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub m: Vec<usize>,
    /// Base edge densities for Bernoulli and planted-clique cloning.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.9")]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Smallest accepted goodness-of-fit p-value.
    #[arg(long, default_value_t = 1e-3)]
    pub alpha: f64,
    /// Input hypergraph bitmap (pc).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Directory receiving `clone-m<m>-g<gamma>-<i>.txt` bitmaps (pc).
    #[arg(long)]
    pub clone_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct CloneRow {
    kind: &'static str,
    m: usize,
    gamma: String,
    trials: usize,
    statistic: &'static str,
    value: String,
    reference: String,
    seed: u64,
    status: &'static str,
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn bernoulli_rows(args: &CloneArgs, seed: u64) -> Result<Vec<CloneRow>, Failure> {
    let mut rows = Vec::new();
    for &m in &args.m {
        for &gamma in &args.gamma {
            let r = bernoulli_clone_gof(gamma, m, args.trials, seed)?;
            let row = |statistic, value: f64, reference: f64, status| CloneRow {
                kind: "bernoulli",
                m,
                gamma: gamma.to_string(),
                trials: args.trials,
                statistic,
                value: num(Some(value)),
                reference: num(Some(reference)),
                seed,
                status,
            };
            rows.push(row("chi_square", r.statistic, r.dof as f64, "info"));
            rows.push(row("p_value", r.p_value, args.alpha, verdict(r.p_value > args.alpha)));
        }
    }
    Ok(rows)
}

fn gaussian_rows(args: &CloneArgs, seed: u64) -> Result<Vec<CloneRow>, Failure> {
    let mut rows = Vec::new();
    let band = 4.0 / (args.trials as f64).sqrt();
    for &m in &args.m {
        let r = gaussian_clone_moments(m, args.trials, seed)?;
        let h = householder_matrix(m);
        let mut orth = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let dot: f64 = (0..m).map(|l| h[(i, l)] * h[(j, l)]).sum();
                orth = orth.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let var_dev = r.variances.iter().fold(0.0f64, |a, v| a.max((v - 1.0).abs()));
        let stats = [
            ("orthogonality", orth, 1e-12),
            ("max_abs_mean", max_abs(&r.means), band),
            ("max_variance_deviation", var_dev, band * 2f64.sqrt()),
            ("max_abs_correlation", max_abs(&r.correlations), band),
            ("mardia_skewness_z", r.mardia.skewness_z.abs(), 4.0),
            ("mardia_kurtosis_z", r.mardia.kurtosis_z.abs(), 4.0),
        ];
        rows.extend(stats.into_iter().map(|(statistic, value, reference)| CloneRow {
            kind: "gaussian",
            m,
            gamma: String::new(),
            trials: args.trials,
            statistic,
            value: num(Some(value)),
            reference: num(Some(reference)),
            seed,
            status: verdict(value <= reference),
        }));
    }
    Ok(rows)
}

fn pc_rows(args: &CloneArgs, seed: u64) -> Result<Vec<CloneRow>, Failure> {
    let path = args
        .graph
        .as_ref()
        .ok_or_else(|| Failure::usage("pc cloning needs --graph <bitmap>"))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let graph = Hypergraph::from_bitmap(&text)?;
    let mut rows = Vec::new();
    for &m in &args.m {
        for &gamma in &args.gamma {
            let clones = pc_clone(&graph, &CloneConfig::bernoulli(m, gamma, seed)?)?;
            let back = pc_unclone(&clones)?;
            if let Some(dir) = &args.clone_dir {
                write_clones(dir, m, gamma, &clones)?;
            }
            let density = clones
                .iter()
                .map(|g| g.bits.iter().filter(|&&b| b).count() as f64 / g.bits.len().max(1) as f64)
                .sum::<f64>()
                / m as f64;
            let row = |statistic, value: f64, reference: f64, status| CloneRow {
                kind: "pc",
                m,
                gamma: gamma.to_string(),
                trials: 1,
                statistic,
                value: num(Some(value)),
                reference: num(Some(reference)),
                seed,
                status,
            };
            rows.push(row("round_trip", if back == graph { 1.0 } else { 0.0 }, 1.0, verdict(back == graph)));
            rows.push(row("mean_clone_density", density, gamma.powf(1.0 / m as f64), "info"));
        }
    }
    Ok(rows)
}

fn write_clones(dir: &Path, m: usize, gamma: f64, clones: &[Hypergraph]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    for (i, g) in clones.iter().enumerate() {
        std::fs::write(dir.join(format!("clone-m{m}-g{gamma}-{i}.txt")), g.to_bitmap())?;
    }
    Ok(())
}

pub fn cmd_clone_test(common: &Common, args: &CloneArgs) -> Result<u8, Failure> {
    let started = Instant::now();
    if args.m.is_empty() || args.m.contains(&0) || args.trials < 2 {
        return Err(Failure::usage("clone counts must be positive and trials at least 2"));
    }
    let rows = match args.kind {
        CloneKind::Bernoulli => bernoulli_rows(args, common.seed)?,
        CloneKind::Gaussian => gaussian_rows(args, common.seed)?,
        CloneKind::Pc => pc_rows(args, common.seed)?,
    };
    let mut w = csv_sink(common.out.as_deref())?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let failed = rows.iter().filter(|r| r.status == "fail").count();
    let task = TaskStatus {
        name: "clone-test".into(),
        status: if failed == 0 { "pass".into() } else { format!("{failed} failed") },
        seconds: started.elapsed().as_secs_f64(),
        detail: format!("{:?}", args.kind),
    };
    let key = format!("{:?} m={:?} gamma={:?} trials={}", args.kind, args.m, args.gamma, args.trials);
    RunManifest::new("clone-test", common.seed, key.as_bytes(), started, vec![task])
        .write_beside(common.out.as_deref())?;
    Ok(if failed == 0 { EXIT_PASS } else { EXIT_FAIL })
}

#[derive(Args, Debug)]
pub struct SqArgs {
    /// Problem file; `--spec` is accepted as well.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Sample-size parameter `m` of the VSTAT(m) oracle.
    #[arg(long)]
    pub oracle_m: f64,
    /// `honest` or `toward_null`.
    #[arg(long, default_value = "honest")]
    pub adversary: String,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// `empty`, `parity-scan`, `parity-scan:<s>` or a policy file.
    #[arg(long, default_value = "parity-scan")]
    pub policy: String,
    #[arg(long, default_value_t = lowdeg::sq::DEFAULT_QUERY_CAP)]
    pub query_cap: usize,
}

/// A nonadaptive policy file: a name and a list of queries.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    name: String,
    #[serde(rename = "query")]
    queries: Vec<QueryEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum QueryEntry {
    Parity { id: Option<String>, subset: Vec<usize> },
    Table { id: Option<String>, values: Vec<f64> },
    Threshold { id: Option<String>, direction: Vec<f64>, threshold: f64 },
}

fn build_policy(spec: &str, null: &lowdeg::measures::Null) -> Result<Box<dyn SqPolicy>, Failure> {
    let n = null.dim();
    if spec == "empty" {
        return Ok(Box::new(EmptyPolicy));
    }
    if spec == "parity-scan" {
        let subsets: Vec<Vec<usize>> = (1..=n).flat_map(|s| k_subsets(n, s)).collect();
        return Ok(Box::new(NonadaptivePolicy::parity_scan(null, &subsets)?));
    }
    if let Some(s) = spec.strip_prefix("parity-scan:") {
        let s: usize = s.parse().map_err(|_| Failure::usage(format!("bad parity order in {spec:?}")))?;
        return Ok(Box::new(NonadaptivePolicy::parity_scan(null, &k_subsets(n, s))?));
    }
    let text = std::fs::read_to_string(spec).map_err(|e| Failure::usage(format!("policy {spec:?}: {e}")))?;
    let file: PolicyFile = toml::from_str(&text).map_err(|e| Failure::usage(format!("policy file: {e}")))?;
    let queries = file
        .queries
        .into_iter()
        .enumerate()
        .map(|(i, q)| {
            let name = |id: Option<String>| id.unwrap_or_else(|| format!("q{i}"));
            match q {
                QueryEntry::Parity { id, subset } => (name(id), Query::Parity(subset)),
                QueryEntry::Table { id, values } => (name(id), Query::Table(values)),
                QueryEntry::Threshold {
                    id,
                    direction,
                    threshold,
                } => (name(id), Query::MeanThreshold { direction, threshold }),
            }
        })
        .collect();
    Ok(Box::new(NonadaptivePolicy::new(file.name, null, queries)?))
}

#[derive(Debug, Serialize)]
struct SqRow {
    #[serde(rename = "problem-id")]
    problem_id: String,
    policy: String,
    adversary: &'static str,
    #[serde(rename = "oracle-m")]
    oracle_m: f64,
    trials: usize,
    success: f64,
    #[serde(rename = "type-one")]
    type_one: f64,
    #[serde(rename = "type-two")]
    type_two: f64,
    #[serde(rename = "max-queries")]
    max_queries: usize,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct TranscriptRow<'a> {
    trial: usize,
    hypothesis: &'static str,
    step: usize,
    #[serde(rename = "query-id")]
    query_id: &'a str,
    #[serde(rename = "true-value")]
    true_value: f64,
    tau: f64,
    returned: f64,
    adversary: &'static str,
}

pub fn cmd_sq_sim(common: &Common, args: &SqArgs) -> Result<u8, Failure> {
    let started = Instant::now();
    let path = args
        .problem
        .clone()
        .or_else(|| common.spec.clone())
        .ok_or_else(|| Failure::usage("sq-sim needs --problem <file>"))?;
    if args.oracle_m.is_nan() || args.oracle_m <= 0.0 || args.trials == 0 {
        return Err(Failure::usage("--oracle-m must be positive and --trials at least 1"));
    }
    let adversary = Adversary::parse(&args.adversary)?;
    let loaded = load_problem(&path)?;
    check_state_cap(&loaded, common.cap_states)?;
    let problem = loaded.problem()?;
    let policy = build_policy(&args.policy, &problem.null)?;
    let keep = if common.dump_transcripts.is_some() { 2 * args.trials } else { 0 };
    let r = run_sq_algorithm(
        policy.as_ref(),
        problem,
        args.oracle_m,
        &adversary,
        args.trials,
        common.seed,
        args.query_cap,
        keep,
    )?;
    let mut w = csv_sink(common.out.as_deref())?;
    w.serialize(SqRow {
        problem_id: problem.id.clone(),
        policy: r.policy.clone(),
        adversary: r.adversary,
        oracle_m: r.m_oracle,
        trials: r.trials,
        success: r.success,
        type_one: r.type_one,
        type_two: r.type_two,
        max_queries: r.max_queries,
        seed: common.seed,
    })?;
    w.flush()?;
    if let Some(dump) = &common.dump_transcripts {
        let mut t = csv_sink(Some(dump))?;
        for (trial, (h, transcript)) in r.transcripts.iter().enumerate() {
            for (step, a) in transcript.answers.iter().enumerate() {
                t.serialize(TranscriptRow {
                    trial,
                    hypothesis: match h {
                        Hypothesis::Null => "null",
                        Hypothesis::Alternate => "alternate",
                    },
                    step,
                    query_id: &a.query_id,
                    true_value: a.true_value,
                    tau: a.tau,
                    returned: a.returned,
                    adversary: a.adversary,
                })?;
            }
        }
        t.flush()?;
    }
    let spec = std::fs::read(&path)?;
    let task = TaskStatus {
        name: "sq-sim".into(),
        status: "ok".into(),
        seconds: started.elapsed().as_secs_f64(),
        detail: format!("policy {} spec {}", args.policy, sha256_hex(&spec)),
    };
    RunManifest::new("sq-sim", common.seed, &spec, started, vec![task]).write_beside(common.out.as_deref())?;
    Ok(EXIT_PASS)
}
