//! Verification suites: each task recomputes a quantity two ways or checks
//! an inequality on seeded instances, and reports pass or fail.

use std::io::Write;
use std::time::Instant;

use clap::ValueEnum;
use lowdeg::cloning::{
    bernoulli_clone, bernoulli_clone_gof, bernoulli_unclone, gaussian_clone, gaussian_clone_moments, gaussian_unclone,
    householder_matrix, pc_clone, pc_unclone, CloneConfig, Hypergraph,
};
use lowdeg::corpus::{finite_corpus, random_discrete_variable, CorpusShape};
use lowdeg::ldlr::{
    boosting_from_atoms, brute_force_ldlr, holder_from_atoms, independent_bound_check, k_sample_lr_norm, ldlr_norm,
    SamplewiseDegree,
};
use lowdeg::measures::{
    null_alternate, Alternate, AtomPlan, Degree, Null, PairSource, Prior, ProductNull, TestingProblem,
};
use lowdeg::noise::{
    apply_noise, attenuation_error, k_subsets, verify_noisy_sda, verify_restriction_bounds, MarkovOperatorSpec,
    NoiseSpec, RestrictionMode, RestrictionSpec,
};
use lowdeg::numerics::stream_rng;
use lowdeg::sda::{
    correlation_matrix, moment_tail_check, product_sda, sda_from_atoms, verify_ldlr_to_sda, verify_sda_to_ldlr,
    DEFAULT_Q_CAP,
};
use lowdeg::sq::{build_f_psi, run_sq_algorithm, Adversary, NonadaptivePolicy, Query, DEFAULT_QUERY_CAP};
use lowdeg::zoo::{
    make_bipartite_pds, make_multisample_hpc, make_sda_counterexample, make_sparse_parity, make_sparse_parity_family,
    make_tensor_pca, parity_family_size, tensor_pca_k_sample_bound, tensor_pca_ldlr_bound, PriorKind,
};
use rand::Rng;
use rayon::prelude::*;

use crate::report::{sink, RunManifest, TaskStatus};
use crate::{Common, Failure, EXIT_FAIL, EXIT_PASS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identities,
    Inequalities,
    Noise,
    Cloning,
    Sq,
    Zoo,
    All,
}

type Outcome = Result<String, String>;
type Task = (&'static str, &'static str, fn(u64) -> Outcome);

fn e<T>(r: lowdeg::Result<T>) -> Result<T, String> {
    r.map_err(|err| err.to_string())
}

const TASKS: &[Task] = &[
    ("identities", "ldlr-identity-vs-brute-force", ldlr_identity),
    ("identities", "unit-mass", unit_mass),
    ("identities", "zoo-closed-forms", zoo_closed_forms),
    ("inequalities", "holder-and-boosting", holder_and_boosting),
    ("inequalities", "moment-tail", moment_tail),
    ("inequalities", "ldlr-to-sda", ldlr_to_sda),
    ("inequalities", "sda-to-ldlr", sda_to_ldlr),
    ("inequalities", "independent-high-degree", independent_high_degree),
    ("noise", "fourier-attenuation", fourier_attenuation),
    ("noise", "restriction-bounds", restriction_bounds),
    ("noise", "noisy-sda", noisy_sda),
    ("cloning", "round-trips", clone_round_trips),
    ("cloning", "bernoulli-gof", bernoulli_gof),
    ("cloning", "gaussian-clone", gaussian_clone_check),
    ("sq", "parity-scan", parity_scan),
    ("sq", "f-psi", f_psi),
    ("zoo", "tensor-pca-bounds", tensor_pca_bounds),
    ("zoo", "product-sda-separation", product_sda_separation),
];

impl Suite {
    fn tag(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Inequalities => "inequalities",
            Suite::Noise => "noise",
            Suite::Cloning => "cloning",
            Suite::Sq => "sq",
            Suite::Zoo => "zoo",
            Suite::All => "all",
        }
    }

    fn tasks(self) -> Vec<&'static Task> {
        TASKS.iter().filter(|t| self == Suite::All || t.0 == self.tag()).collect()
    }
}

#[derive(serde::Serialize)]
struct VerifyReport {
    suite: &'static str,
    pass: bool,
    #[serde(flatten)]
    manifest: RunManifest,
}

pub fn cmd_verify(suite: Suite, common: &Common) -> Result<u8, Failure> {
    let started = Instant::now();
    let seed = common.seed;
    let tasks: Vec<TaskStatus> = suite
        .tasks()
        .par_iter()
        .map(|(group, name, run)| {
            let t = Instant::now();
            let outcome = run(seed);
            let seconds = t.elapsed().as_secs_f64();
            let (status, detail) = match outcome {
                Ok(d) => ("pass", d),
                Err(d) => ("fail", d),
            };
            TaskStatus {
                name: format!("{group}/{name}"),
                status: status.into(),
                seconds,
                detail,
            }
        })
        .collect();
    let pass = tasks.iter().all(|t| t.status == "pass");
    for t in &tasks {
        eprintln!("{} {} ({:.1}s): {}", t.status.to_uppercase(), t.name, t.seconds, t.detail);
    }
    let key = format!("verify {} seed {seed}", suite.tag());
    let report = VerifyReport {
        suite: suite.tag(),
        pass,
        manifest: RunManifest::new("verify", seed, key.as_bytes(), started, tasks),
    };
    let mut out = sink(common.out.as_deref())?;
    let text = serde_json::to_string_pretty(&report).map_err(|err| Failure::usage(err.to_string()))?;
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

fn corpus(seed: u64) -> Result<Vec<TestingProblem>, String> {
    e(finite_corpus(seed, 100, CorpusShape::default()))
}

const DEGREES: [Degree; 3] = [Degree::Finite(0), Degree::Finite(1), Degree::Finite(2)];

fn ldlr_identity(seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in corpus(seed)? {
        for m in 1..=5u64 {
            for d in DEGREES {
                for k in 1..=m.min(3) as u32 {
                    let deg = SamplewiseDegree::new(d, k);
                    let fast = e(ldlr_norm(&p, m, deg, AtomPlan::Exact))?.value;
                    let slow = e(brute_force_ldlr(&p, m as u32, deg))?.value;
                    worst = worst.max((fast - slow).abs());
                    count += 1;
                }
            }
        }
    }
    if worst > 1e-9 {
        return Err(format!("worst |identity - brute force| = {worst:.3e}"));
    }
    Ok(format!("{count} comparisons, worst {worst:.2e}"))
}

fn unit_mass(seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    for p in corpus(seed)? {
        let one = null_alternate(&p.null);
        for w in e(p.explicit())? {
            worst = worst.max((e(p.inner_product(&w.alternate, &one))? - 1.0).abs());
        }
    }
    if worst > 1e-10 {
        return Err(format!("<D_u, 1> off by {worst:.3e}"));
    }
    Ok(format!("worst {worst:.2e}"))
}

fn zoo_closed_forms(_: u64) -> Outcome {
    let instances = [
        e(make_multisample_hpc(6, 3, 2, 0.5))?,
        e(make_multisample_hpc(6, 3, 2, 0.75))?,
        e(make_bipartite_pds(5, 2, 0.7, 0.5))?,
        e(make_tensor_pca(4, 2, 0.8, PriorKind::Exact))?,
        e(make_sparse_parity_family(6, 2))?,
    ];
    let mut worst = 0.0f64;
    for z in &instances {
        for d in [Degree::Finite(1), Degree::Finite(2), Degree::Unbounded] {
            worst = worst.max(e(z.closed_form_discrepancy(d))?);
        }
    }
    if worst > 1e-10 {
        return Err(format!("closed forms differ from dense tables by {worst:.3e}"));
    }
    Ok(format!("{} instances, worst {worst:.2e}", instances.len()))
}

fn holder_and_boosting(seed: u64) -> Outcome {
    let (mut holder, mut boost) = (f64::INFINITY, f64::INFINITY);
    for p in corpus(seed)? {
        for d in DEGREES {
            let atoms = e(p.pair_atoms(d, AtomPlan::Exact))?;
            for k in [2u32, 4] {
                holder = holder.min(e(holder_from_atoms(&atoms, k))?.margin);
                for m in k as u64..=5 {
                    boost = boost.min(e(boosting_from_atoms(&atoms, m, k))?.margin);
                }
            }
        }
    }
    if holder < -1e-10 || boost < -1e-10 {
        return Err(format!("margins {holder:.3e} / {boost:.3e}"));
    }
    Ok(format!("min margins {holder:.2e} / {boost:.2e}"))
}

fn moment_tail(seed: u64) -> Outcome {
    let mut slack = f64::INFINITY;
    for i in 0..200 {
        let atoms: Vec<(f64, f64)> = random_discrete_variable(seed, i, 12)
            .into_iter()
            .map(|(w, v)| (w, v.abs()))
            .collect();
        for (p, q) in [(2.0, 1.0), (4.0, 2.0), (8.0, 2.0)] {
            let r = e(moment_tail_check(&atoms, p, q))?;
            slack = slack.min(r.rhs - r.lhs);
            if r.lhs > r.rhs {
                return Err(format!("variable {i}: {} > {}", r.lhs, r.rhs));
            }
        }
    }
    Ok(format!("min slack {slack:.2e}"))
}

fn ldlr_to_sda(seed: u64) -> Outcome {
    let mut count = 0;
    for p in corpus(seed)? {
        for m in [4u64, 10, 1000] {
            for d in [Degree::Finite(1), Degree::Unbounded] {
                for q in [2u64, 4, 8] {
                    let r = e(verify_ldlr_to_sda(&p, m, d, 2, q, AtomPlan::Exact))?;
                    if !r.pass {
                        return Err(format!("{}: {r:?}", p.id));
                    }
                    count += 1;
                }
            }
        }
    }
    Ok(format!("{count} grid points"))
}

fn sda_to_ldlr(_: u64) -> Outcome {
    let z = e(make_sparse_parity_family(100_000, 20))?;
    let size = z.param("size").ok_or("family size is not recorded")?;
    let atoms = e(z.closed_form_atoms(Degree::Unbounded))?.correlation();
    for m in [1u64, 10, 100] {
        let r = e(verify_sda_to_ldlr(&atoms, m, 8))?;
        if !(r.hypothesis && r.conclusion) || size < parity_family_size(8, m) {
            return Err(format!("m = {m}: {r:?}"));
        }
    }
    Ok("hypothesis and conclusion hold at m = 1, 10, 100".into())
}

fn independent_high_degree(seed: u64) -> Outcome {
    let mut rng = stream_rng(seed, 7);
    let (mut gauss, mut prod) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..40 {
        let n = rng.random_range(1..=5usize);
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.8)).collect();
        let count = rng.random_range(1..=4usize);
        let binary = (0..count)
            .map(|_| Alternate::Product((0..n).map(|_| {
                let p = rng.random_range(0.05..0.95);
                vec![1.0 - p, p]
            }).collect()))
            .collect();
        let null = e(ProductNull::new(q.iter().map(|&p| vec![1.0 - p, p]).collect()))?;
        let p = e(TestingProblem::new("product", Null::Product(null), Prior::uniform(binary)))?;
        let shifts = (0..count)
            .map(|_| Alternate::MeanShift((0..n).map(|_| rng.random_range(-0.8..0.8)).collect()))
            .collect();
        let g = e(TestingProblem::new("gauss", Null::Gaussian { dim: n }, Prior::uniform(shifts)))?;
        for d in 1..=2 {
            for k in [2u32, 4] {
                prod = prod.min(e(independent_bound_check(&p, d, k, AtomPlan::Exact))?.product_margin);
                gauss = gauss.min(e(independent_bound_check(&g, d, k, AtomPlan::Exact))?.gaussian_margin);
            }
        }
    }
    if gauss < -1e-10 || prod < -1e-10 {
        return Err(format!("margins gaussian {gauss:.3e}, product {prod:.3e}"));
    }
    Ok(format!("min margins gaussian {gauss:.2e}, product {prod:.2e}"))
}

fn uniform_binary(p: &TestingProblem) -> bool {
    p.null.as_product().map(|n| n.is_uniform_binary()).unwrap_or(false)
}

fn parity_problem(n: usize, s: usize) -> Result<TestingProblem, String> {
    let alts = k_subsets(n, s)
        .into_iter()
        .map(|subset| Alternate::ParityBump { subset, amplitude: 1.0 })
        .collect();
    e(TestingProblem::new(
        format!("parity-{n}-{s}"),
        Null::Product(ProductNull::uniform_binary(n)),
        Prior::uniform(alts),
    ))
}

fn fourier_attenuation(seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in corpus(seed)?.iter().filter(|p| uniform_binary(p)) {
        let null = e(p.null.as_product())?;
        for rho in [0.0, 0.3, 0.6] {
            let op = e(MarkovOperatorSpec::resample(null.marginal(0), rho))?;
            for w in e(p.explicit())? {
                worst = worst.max(e(attenuation_error(null, &w.alternate, &op))?);
                count += 1;
            }
        }
    }
    if worst > 1e-12 {
        return Err(format!("attenuation error {worst:.3e}"));
    }
    Ok(format!("{count} alternates, worst {worst:.2e}"))
}

fn restriction_bounds(_: u64) -> Outcome {
    let mut margin = f64::INFINITY;
    let mut count = 0;
    for (n, s) in [(6usize, 2usize), (6, 3)] {
        let p = parity_problem(n, s)?;
        for rate in [0.0, 0.25, 0.5] {
            for rho in [0.0, 0.3, 0.6] {
                let spec = RestrictionSpec {
                    mode: RestrictionMode::Coordinate,
                    rate,
                    operator: e(MarkovOperatorSpec::resample(&[0.5, 0.5], rho))?,
                };
                for d in 0..=2i64 {
                    for k in [2u32, 4] {
                        let r = e(verify_restriction_bounds(&p, &spec, d, k))?;
                        if r.preconditions {
                            margin = margin.min(r.margin);
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    if margin < -1e-10 {
        return Err(format!("min margin {margin:.3e}"));
    }
    Ok(format!("{count} checks, min margin {margin:.2e}"))
}

fn noisy_sda(_: u64) -> Outcome {
    let p = parity_problem(6, 2)?;
    for rho in [0.3, 0.6] {
        let op = e(MarkovOperatorSpec::resample(&[0.5, 0.5], rho))?;
        for q in [2u64, 4, 8] {
            let r = e(verify_noisy_sda(&p, &op, 10, 1, 2, q))?;
            if !r.pass {
                return Err(format!("rho = {rho}, q = {q}: {r:?}"));
            }
        }
    }
    Ok("6 grid points".into())
}

fn clone_round_trips(seed: u64) -> Outcome {
    for trial in 0..100u64 {
        for m in 1..=6usize {
            let s = seed.wrapping_add(trial);
            let cfg = e(CloneConfig::bernoulli(m, 0.5, s))?;
            for x in [false, true] {
                if bernoulli_unclone(&e(bernoulli_clone(x, &cfg))?) != x {
                    return Err(format!("AND round trip failed at m = {m}"));
                }
            }
            let x = (trial as f64 - 50.0) / 7.0;
            let y = e(gaussian_unclone(&e(gaussian_clone(x, &e(CloneConfig::gaussian(m, s))?))?))?;
            if (y - x).abs() > 1e-12 * x.abs().max(1.0) {
                return Err(format!("Gaussian round trip {x} -> {y}"));
            }
        }
    }
    let mut g = Hypergraph::empty(7, 3);
    for set in k_subsets(7, 3).iter().step_by(3) {
        g.set_edge(set, true);
    }
    let clones = e(pc_clone(&g, &e(CloneConfig::bernoulli(4, 0.5, seed))?))?;
    if e(pc_unclone(&clones))? != g {
        return Err("hypergraph round trip failed".into());
    }
    Ok("AND, sum and hypergraph round trips exact".into())
}

fn bernoulli_gof(seed: u64) -> Outcome {
    let mut min_p = f64::INFINITY;
    for m in 1..=4 {
        for gamma in [0.25, 0.5, 0.9] {
            let r = e(bernoulli_clone_gof(gamma, m, 100_000, seed))?;
            min_p = min_p.min(r.p_value);
        }
    }
    if min_p <= 1e-3 {
        return Err(format!("min p-value {min_p:.3e}"));
    }
    Ok(format!("min p-value {min_p:.4}"))
}

fn gaussian_clone_check(seed: u64) -> Outcome {
    for m in 1..=16 {
        let h = householder_matrix(m);
        for i in 0..m {
            for j in 0..m {
                let dot: f64 = (0..m).map(|l| h[(i, l)] * h[(j, l)]).sum();
                if (dot - if i == j { 1.0 } else { 0.0 }).abs() > 1e-12 {
                    return Err(format!("Householder matrix not orthogonal at m = {m}"));
                }
            }
        }
    }
    let trials = 100_000;
    let band = 4.0 / (trials as f64).sqrt();
    for m in 1..=4 {
        let r = e(gaussian_clone_moments(m, trials, seed))?;
        let ok = r.means.iter().all(|x| x.abs() <= band)
            && r.variances.iter().all(|v| (v - 1.0).abs() <= band * 2f64.sqrt())
            && r.correlations.iter().all(|c| c.abs() <= band)
            && r.mardia.skewness_z.abs() <= 4.0
            && r.mardia.kurtosis_z.abs() <= 4.0;
        if !ok {
            return Err(format!("moments outside 4-sigma bands at m = {m}: {r:?}"));
        }
    }
    Ok("orthogonal to 1e-12, moments within 4-sigma bands".into())
}

fn parity_scan(seed: u64) -> Outcome {
    let (n, s) = (6usize, 2usize);
    let set: Vec<Vec<usize>> = k_subsets(n, s).into_iter().take(8).collect();
    let z = e(make_sparse_parity(n, s, set.clone()))?;
    let low = e(ldlr_norm(&z, 50, SamplewiseDegree::new(Degree::Finite(s as u32 - 1), 50), AtomPlan::Exact))?.value;
    let ks = e(k_sample_lr_norm(&z, 3, AtomPlan::Exact))?.uncentered;
    if low.abs() > 1e-12 || ks > 2.0 {
        return Err(format!("low part {low}, k-sample {ks}"));
    }
    let rho: f64 = 0.5;
    let op = e(MarkovOperatorSpec::resample(&[0.5, 0.5], rho))?;
    let noised = e(apply_noise(e(z.problem())?, &NoiseSpec::Operator(op), seed))?;
    let policy = e(NonadaptivePolicy::parity_scan(&noised.null, &set))?;
    let base = rho.powi(-2 * s as i32);
    let run = |m, adv: &Adversary| run_sq_algorithm(&policy, &noised, m, adv, 1000, seed, DEFAULT_QUERY_CAP, 0);
    let strong = e(run(9.0 * base, &Adversary::Honest))?.success;
    let weak = e(run(base, &Adversary::TowardNull))?.success;
    if strong < 0.99 || weak > 0.5 {
        return Err(format!("success {strong} honest, {weak} toward_null"));
    }
    Ok(format!("success {strong:.3} honest at 9x, {weak:.3} toward_null at 1x"))
}

fn f_psi(seed: u64) -> Outcome {
    let mut count = 0;
    for (n, s) in [(5usize, 2usize), (6, 3)] {
        let set = k_subsets(n, s);
        let z = e(make_sparse_parity(n, s, set.clone()))?;
        for rho in [1.0f64, 0.8] {
            let op = e(MarkovOperatorSpec::resample(&[0.5, 0.5], rho))?;
            let problem = e(apply_noise(e(z.problem())?, &NoiseSpec::Operator(op), seed))?;
            let queries: Vec<Query> = set.iter().map(|u| Query::Parity(u.clone())).collect();
            let tau = rho.powi(2 * s as i32);
            for m in 2..=8u64 {
                let (_, r) = e(build_f_psi(&queries, &problem, m, 2))?;
                let q = queries.len() as f64;
                let lower = r.alternate_lower_bound(tau, 2);
                if r.null_mean.abs() > 1e-12 || r.null_second_moment > q * q || r.alternate_mean < lower * (1.0 - 1e-12) {
                    return Err(format!("n={n} s={s} rho={rho} m={m}: bound {lower}, {r:?}"));
                }
                count += 1;
            }
        }
    }
    Ok(format!("{count} instances"))
}

fn tensor_pca_bounds(_: u64) -> Outcome {
    let mut worst = 0.0f64;
    for n in [6usize, 8] {
        for r in [2usize, 3] {
            for k in [2u32, 4] {
                let lambda = 0.5 * (n as f64 / (2.0 * k as f64)).sqrt();
                let z = e(make_tensor_pca(n, r, lambda, PriorKind::Exact))?;
                let got = e(k_sample_lr_norm(&z, k, AtomPlan::Exact))?.uncentered;
                let bound = tensor_pca_k_sample_bound(n, k, lambda).ok_or("k-sample bound undefined")?;
                worst = worst.max(got / bound);
                for m in [4u64, 10, 100] {
                    let scale = (n as f64).powf(r as f64 / 2.0)
                        / (2.0 * std::f64::consts::E * m as f64 * (k as f64).powf((r as f64 - 2.0) / 2.0));
                    let lambda = 0.5 * scale.sqrt();
                    let z = e(make_tensor_pca(n, r, lambda, PriorKind::Exact))?;
                    let got = e(ldlr_norm(&z, m, SamplewiseDegree::new(Degree::Finite(1), k), AtomPlan::Exact))?.value;
                    let bound = tensor_pca_ldlr_bound(n, r, m, k, lambda).ok_or("LDLR bound undefined")?;
                    worst = worst.max(got / bound);
                }
            }
        }
    }
    if worst > 1.0 {
        return Err(format!("largest value / bound = {worst}"));
    }
    Ok(format!("largest value / bound = {worst:.3}"))
}

fn product_sda_separation(seed: u64) -> Outcome {
    let z = e(make_sda_counterexample(256, seed))?;
    let cm = e(correlation_matrix(e(z.problem())?))?;
    let atoms = cm.atoms();
    let max = atoms.atoms.iter().fold(0.0f64, |a, (_, x)| a.max(x.abs()));
    for scale in [0.7, 0.5, 0.35] {
        let m = 1.0 / (scale * max);
        let plain = e(sda_from_atoms(&atoms, m, DEFAULT_Q_CAP))?.value.lower();
        let prod = e(product_sda(&cm, m, DEFAULT_Q_CAP))?.lower.lower();
        if prod >= 4 * plain.max(1) {
            return Ok(format!("at m = {m:.1}: product-SDA >= {prod}, SDA = {plain}"));
        }
    }
    Err("no oracle parameter separates product-SDA from SDA by 4x".into())
}
