//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::time::Instant;

use lowdeg::cloning::{
    bernoulli_clone, bernoulli_clone_gof, bernoulli_unclone, gaussian_clone, gaussian_clone_moments,
    gaussian_unclone, householder_matrix, pc_clone, pc_unclone, CloneConfig, Hypergraph,
};
use lowdeg::corpus::{finite_corpus, random_discrete_variable, CorpusShape};
use lowdeg::ldlr::{
    boosting_from_atoms, brute_force_ldlr, holder_from_atoms, k_sample_lr_norm, ldlr_norm, SamplewiseDegree,
};
use lowdeg::measures::{
    covariance_correlation, covariance_correlation_ratio, draw_alternate, Alternate, AtomPlan, Degree, Null, PairSource,
    Prior, ProductNull, TestingProblem,
};
use lowdeg::noise::{
    apply_noise, attenuation_error, k_subsets, verify_noisy_sda, verify_restricted_sda, verify_restriction_bounds,
    MarkovOperatorSpec, NoiseSpec, RestrictionMode, RestrictionSpec,
};
use lowdeg::numerics::stream_rng;
use lowdeg::sda::{
    correlation_matrix, moment_tail_check, product_sda, sda_from_atoms, verify_ldlr_to_sda, verify_sda_to_ldlr,
};
use lowdeg::sq::{build_f_psi, run_sq_algorithm, Adversary, NonadaptivePolicy, Query, DEFAULT_QUERY_CAP};
use lowdeg::zoo::{
    ggm_correlation_mc, ggm_moment_bound, ggm_sub_prior, make_bipartite_pds, make_multisample_hpc, make_prs_ggm,
    make_sda_counterexample, make_sparse_parity, make_sparse_parity_family, make_spiked_wishart, make_tensor_pca,
    parity_family_size, tensor_pca_k_sample_bound, tensor_pca_ldlr_bound, PriorKind, ZooInstance,
};

const SEED: u64 = 20_240_601;
const SDA_CAP: u64 = 1_000_000_000;

/// Outcome of one criterion: pass flag and a one-line summary.
type Outcome = Result<String, String>;

fn fail<T>(msg: impl Into<String>) -> Result<T, String> {
    Err(msg.into())
}

fn ok_or<E: std::fmt::Display, T>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn corpus() -> Vec<TestingProblem> {
    finite_corpus(SEED, 100, CorpusShape::default()).expect("corpus")
}

fn degrees() -> [Degree; 3] {
    [Degree::Finite(0), Degree::Finite(1), Degree::Finite(2)]
}

fn c1_ldlr_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut checks = 0;
    for p in corpus() {
        for m in 1..=5u32 {
            for d in degrees() {
                for k in 1..=m.min(3) {
                    let deg = SamplewiseDegree::new(d, k);
                    let a = ok_or(ldlr_norm(&p, m as u64, deg, AtomPlan::Exact))?;
                    let b = ok_or(brute_force_ldlr(&p, m, deg))?;
                    let err = (a.value - b.value).abs();
                    worst = worst.max(err);
                    checks += 1;
                    if err > 1e-9 {
                        return fail(format!("{} m={m} d={d:?} k={k}: {} vs {}", p.id, a.value, b.value));
                    }
                }
            }
        }
    }
    Ok(format!("{checks} comparisons, worst |diff| = {worst:.2e}"))
}

/// Brute-force `sup_A Pr[A] E[X|A]^p` by recursive enumeration of subsets.
fn subset_sup(atoms: &[(f64, f64)], p: f64) -> f64 {
    fn go(atoms: &[(f64, f64)], i: usize, w: f64, mass: f64, p: f64, best: &mut f64) {
        if i == atoms.len() {
            if w > 0.0 {
                *best = best.max(w * (mass / w).powf(p));
            }
            return;
        }
        go(atoms, i + 1, w, mass, p, best);
        go(atoms, i + 1, w + atoms[i].0, mass + atoms[i].0 * atoms[i].1, p, best);
    }
    let mut best = 0.0;
    go(atoms, 0, 0.0, 0.0, p, &mut best);
    best
}

fn c2_inequalities() -> Outcome {
    let mut holder_min = f64::INFINITY;
    let mut boost_min = f64::INFINITY;
    for p in corpus() {
        for d in degrees() {
            let atoms = ok_or(p.pair_atoms(d, AtomPlan::Exact))?;
            for k in [2u32, 4] {
                let h = ok_or(holder_from_atoms(&atoms, k))?;
                holder_min = holder_min.min(h.margin);
                for m in (k as u64)..=5 {
                    let b = ok_or(boosting_from_atoms(&atoms, m, k))?;
                    boost_min = boost_min.min(b.margin);
                }
            }
        }
    }
    if holder_min < -1e-10 || boost_min < -1e-10 {
        return fail(format!("holder margin {holder_min:.3e}, boosting margin {boost_min:.3e}"));
    }
    let mut fact_min = f64::INFINITY;
    for i in 0..200 {
        let atoms: Vec<(f64, f64)> = random_discrete_variable(SEED, i, 12)
            .into_iter()
            .map(|(w, v)| (w, v.abs()))
            .collect();
        for (p, q) in [(2.0, 1.0), (4.0, 2.0), (3.0, 1.5), (8.0, 2.0)] {
            let r = ok_or(moment_tail_check(&atoms, p, q))?;
            let sup = subset_sup(&atoms, p);
            if (r.sup - sup).abs() > 1e-12 * sup.max(1e-300) {
                return fail(format!("variable {i}: sup {} vs brute force {sup}", r.sup));
            }
            fact_min = fact_min.min(r.rhs - r.lhs);
            if r.lhs > r.rhs {
                return fail(format!("variable {i} p={p} q={q}: {} > {}", r.lhs, r.rhs));
            }
        }
    }
    Ok(format!(
        "holder min margin {holder_min:.3e}, boosting min margin {boost_min:.3e}, moment-tail min slack {fact_min:.3e}"
    ))
}

fn explicit_zoo() -> Result<Vec<ZooInstance>, String> {
    let ggm = ok_or(make_prs_ggm(8, 4, 1, 0.1, SEED))?;
    let list = vec![
        ok_or(make_tensor_pca(6, 2, 0.8, PriorKind::Exact))?,
        ok_or(make_tensor_pca(4, 3, 1.2, PriorKind::Exact))?,
        ok_or(make_multisample_hpc(6, 3, 2, 0.5))?,
        ok_or(make_multisample_hpc(7, 4, 3, 0.75))?,
        ok_or(make_bipartite_pds(5, 2, 0.7, 0.5))?,
        ok_or(make_sparse_parity_family(6, 2))?,
        ok_or(make_sparse_parity(8, 3, vec![vec![0, 1, 2], vec![2, 4, 6], vec![1, 5, 7]]))?,
        ok_or(make_spiked_wishart(5, 0.4, 0.3, PriorKind::Exact))?,
        ok_or(ggm_sub_prior(&ggm, 12, SEED))?,
        ok_or(make_sda_counterexample(16, SEED))?,
    ];
    for z in &list {
        if !z.has_explicit_prior() {
            return fail(format!("{} lacks an explicit prior", z.id()));
        }
    }
    Ok(list)
}

fn c3_ldlr_to_sda() -> Outcome {
    let zoo = explicit_zoo()?;
    let mut checks = 0;
    for z in &zoo {
        for m in [4u64, 10, 1000] {
            for d in [Degree::Finite(1), Degree::Unbounded] {
                for k in [2u32, 4] {
                    for q in [2u64, 4, 8] {
                        let r = ok_or(verify_ldlr_to_sda(z, m, d, k, q, AtomPlan::Exact))?;
                        // second route: the full SDA search at m*
                        let atoms = ok_or(z.pair_atoms(Degree::Unbounded, AtomPlan::Exact))?.correlation();
                        let s = ok_or(sda_from_atoms(&atoms, r.m_star, SDA_CAP))?;
                        checks += 1;
                        if !r.pass || !s.value.at_least(q) {
                            return fail(format!(
                                "{} m={m} d={d:?} k={k} q={q}: m*={} SDA={}",
                                z.id(),
                                r.m_star,
                                s.value
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{} instances, {checks} (m,d,k,q) points", zoo.len()))
}

fn c4_sda_to_ldlr() -> Outcome {
    let k = 8;
    let z = ok_or(make_sparse_parity_family(100_000, 20))?;
    let size = z.param("size").unwrap_or(0.0);
    let atoms = ok_or(z.closed_form_atoms(Degree::Unbounded))?.correlation();
    let mut worst = 0.0f64;
    for m in [1u64, 10, 100] {
        if size < parity_family_size(k, m) {
            return fail(format!("family of size {size:.3e} too small for m = {m}"));
        }
        let r = ok_or(verify_sda_to_ldlr(&atoms, m, k))?;
        if !r.hypothesis {
            return fail(format!("SDA hypothesis fails at m = {m}"));
        }
        if !r.conclusion {
            return fail(format!("squared LDLR {} > 1 at m = {m}", r.ldlr));
        }
        worst = worst.max(r.ldlr);
    }
    Ok(format!("|S| = {size:.3e}, largest squared (inf,1)-LDLR = {worst:.3e}"))
}

fn c5_clique_closed_form() -> Outcome {
    let (n, k, s) = (6, 3, 2);
    let sets = k_subsets(n, k);
    let mut worst = 0.0f64;
    for q in [0.5, 0.75] {
        let z = ok_or(make_multisample_hpc(n, k, s, q))?;
        let p = ok_or(z.problem())?;
        let null = ok_or(p.null.as_product())?;
        let base = ok_or(null.table())?;
        let list = ok_or(p.explicit())?;
        let tables: Vec<Vec<f64>> = list
            .iter()
            .map(|w| ok_or(w.alternate.to_table(null)))
            .collect::<Result<_, _>>()?;
        for (i, u) in sets.iter().enumerate() {
            for (j, v) in sets.iter().enumerate() {
                let brute: f64 = base
                    .iter()
                    .zip(&tables[i])
                    .zip(&tables[j])
                    .filter(|((b, _), _)| **b > 0.0)
                    .map(|((b, a), c)| a * c / b)
                    .sum();
                let shared = u.iter().filter(|x| v.contains(x)).count() as i32;
                let pairs = shared * (shared - 1) / 2;
                let want = q.powi(-pairs);
                worst = worst.max((brute - want).abs());
                let (full, _) = ok_or(p.pair_excess(&list[i].alternate, &list[j].alternate, Degree::Unbounded))?;
                worst = worst.max((1.0 + full - want).abs());
            }
        }
    }
    if worst > 1e-10 {
        return fail(format!("worst deviation {worst:.3e}"));
    }
    Ok(format!("all {} pairs at q in {{1/2, 3/4}}, worst |diff| = {worst:.2e}", 2 * sets.len() * sets.len()))
}

fn c6_tensor_pca() -> Outcome {
    let mut checks = 0;
    let mut tightest = 0.0f64;
    for n in [6usize, 8] {
        for r in [2usize, 3] {
            for k in [2u32, 4] {
                let lam_k = 0.5 * (n as f64 / (2.0 * k as f64)).sqrt();
                let z = ok_or(make_tensor_pca(n, r, lam_k, PriorKind::Exact))?;
                let rep = ok_or(k_sample_lr_norm(&z, k, AtomPlan::Exact))?;
                let Some(bound) = tensor_pca_k_sample_bound(n, k, lam_k) else {
                    return fail(format!("k-sample hypothesis fails at n={n} k={k}"));
                };
                checks += 1;
                tightest = tightest.max(rep.uncentered / bound);
                if rep.uncentered > bound {
                    return fail(format!("k-sample n={n} r={r} k={k}: {} > {bound}", rep.uncentered));
                }
                for m in [4u64, 10, 100] {
                    let kr = (k as f64).powf((r as f64 - 2.0) / 2.0);
                    let boundary = ((n as f64).powf(r as f64 / 2.0) / (2.0 * std::f64::consts::E * m as f64 * kr)).sqrt();
                    let lam = 0.5 * boundary;
                    let z = ok_or(make_tensor_pca(n, r, lam, PriorKind::Exact))?;
                    let v = ok_or(ldlr_norm(&z, m, SamplewiseDegree::new(Degree::Finite(1), k), AtomPlan::Exact))?.value;
                    let Some(bound) = tensor_pca_ldlr_bound(n, r, m, k, lam) else {
                        return fail(format!("LDLR hypothesis fails at n={n} r={r} m={m} k={k}"));
                    };
                    checks += 1;
                    tightest = tightest.max(v / bound);
                    if v > bound {
                        return fail(format!("LDLR n={n} r={r} m={m} k={k}: {v} > {bound}"));
                    }
                }
            }
        }
    }
    Ok(format!("{checks} grid points, largest value/bound = {tightest:.3}"))
}

fn c7_parity_tightness() -> Outcome {
    let (n, s, k) = (6usize, 2usize, 3u32);
    let set: Vec<Vec<usize>> = k_subsets(n, s).into_iter().take(1 << k).collect();
    let z = ok_or(make_sparse_parity(n, s, set.clone()))?;
    let low = ok_or(ldlr_norm(
        &z,
        50,
        SamplewiseDegree::new(Degree::Finite(s as u32 - 1), 50),
        AtomPlan::Exact,
    ))?
    .value;
    if low.abs() > 1e-12 {
        return fail(format!("(s-1, inf)-LDLR = {low}"));
    }
    let ks = ok_or(k_sample_lr_norm(&z, k, AtomPlan::Exact))?.uncentered;
    if ks > 2.0 {
        return fail(format!("k-sample LR {ks} > 2"));
    }
    let rho = 0.5;
    let op = ok_or(MarkovOperatorSpec::resample(&[0.5, 0.5], rho))?;
    let noised = ok_or(apply_noise(ok_or(z.problem())?, &NoiseSpec::Operator(op), SEED))?;
    let policy = ok_or(NonadaptivePolicy::parity_scan(&noised.null, &set))?;
    let base = rho.powi(-2 * s as i32);
    let trials = 1000;
    let strong = ok_or(run_sq_algorithm(
        &policy,
        &noised,
        9.0 * base,
        &Adversary::Honest,
        trials,
        SEED,
        DEFAULT_QUERY_CAP,
        0,
    ))?;
    let weak = ok_or(run_sq_algorithm(
        &policy,
        &noised,
        base,
        &Adversary::TowardNull,
        trials,
        SEED,
        DEFAULT_QUERY_CAP,
        0,
    ))?;
    if strong.success < 0.99 || weak.success > 0.5 {
        return fail(format!(
            "success {} against honest VSTAT({}), {} against toward_null VSTAT({base})",
            strong.success,
            9.0 * base,
            weak.success
        ));
    }
    Ok(format!(
        "low part {low:.1e}, k-sample {ks:.4}, {} queries: success {:.3} honest / {:.3} toward_null",
        set.len(),
        strong.success,
        weak.success
    ))
}

fn c8_cloning() -> Outcome {
    for seed in 0..200u64 {
        for m in 1..=6 {
            let cfg = ok_or(CloneConfig::bernoulli(m, 0.3, seed))?;
            for x in [false, true] {
                if bernoulli_unclone(&ok_or(bernoulli_clone(x, &cfg))?) != x {
                    return fail(format!("AND round trip failed at m={m} seed={seed}"));
                }
            }
            let gcfg = ok_or(CloneConfig::gaussian(m, seed))?;
            let x = seed as f64 / 37.0 - 2.5;
            let y = ok_or(gaussian_unclone(&ok_or(gaussian_clone(x, &gcfg))?))?;
            if (y - x).abs() > 1e-12 * x.abs().max(1.0) {
                return fail(format!("sum round trip {x} -> {y}"));
            }
        }
    }
    let mut g = Hypergraph::empty(6, 2);
    g.set_edge(&[0, 1], true);
    g.set_edge(&[2, 5], true);
    g.set_edge(&[3, 4], true);
    let copies = ok_or(pc_clone(&g, &ok_or(CloneConfig::bernoulli(3, 0.5, SEED))?))?;
    if ok_or(pc_unclone(&copies))? != g {
        return fail("hypergraph AND round trip failed");
    }
    let mut min_p = 1.0f64;
    for m in 1..=4 {
        for gamma in [0.25, 0.5, 0.9] {
            let r = ok_or(bernoulli_clone_gof(gamma, m, 100_000, SEED + m as u64))?;
            min_p = min_p.min(r.p_value);
            if r.p_value <= 0.001 {
                return fail(format!("GOF p = {} at m={m} gamma={gamma}", r.p_value));
            }
        }
    }
    let mut orth = 0.0f64;
    for m in 1..=16 {
        let h = householder_matrix(m);
        let e = &h * h.transpose() - nalgebra::DMatrix::<f64>::identity(m, m);
        orth = orth.max(e.amax());
    }
    if orth > 1e-12 {
        return fail(format!("Householder orthogonality error {orth:.3e}"));
    }
    let trials = 100_000;
    let band = 4.0 / (trials as f64).sqrt();
    for m in 1usize..=4 {
        let r = ok_or(gaussian_clone_moments(m, trials, SEED))?;
        let mean_ok = r.means.iter().all(|x| x.abs() <= band);
        let var_ok = r.variances.iter().all(|v| (v - 1.0).abs() <= band * 2f64.sqrt());
        let corr_ok = r.correlations.iter().all(|c| c.abs() <= band);
        let mardia_ok = r.mardia.skewness_z.abs() <= 4.0 && r.mardia.kurtosis_z.abs() <= 4.0;
        if !(mean_ok && var_ok && corr_ok && mardia_ok) {
            return fail(format!("Gaussian clone moments out of 4-sigma band at m={m}: {r:?}"));
        }
    }
    Ok(format!("round trips exact, min GOF p = {min_p:.4}, orthogonality {orth:.1e}"))
}

fn uniform_problem(id: &str, n: usize, alts: Vec<Alternate>) -> Result<TestingProblem, String> {
    ok_or(TestingProblem::new(id, Null::Product(ProductNull::uniform_binary(n)), Prior::uniform(alts)))
}

fn parity_problem(n: usize, s: usize) -> Result<TestingProblem, String> {
    let alts = k_subsets(n, s)
        .into_iter()
        .map(|subset| Alternate::ParityBump { subset, amplitude: 1.0 })
        .collect();
    uniform_problem("parity", n, alts)
}

/// Planted `K`-subsets of `[n]` raising the bias of every coordinate of
/// `[n]^p` (or of `C([n],p)`) inside the subset.
fn planted_tensor(n: usize, k: usize, mode: RestrictionMode, bias: f64) -> Result<TestingProblem, String> {
    let coords: Vec<Vec<usize>> = match mode {
        RestrictionMode::Subtensor(p) => (0..n.pow(p))
            .map(|mut i| {
                (0..p)
                    .map(|_| {
                        let c = i % n;
                        i /= n;
                        c
                    })
                    .collect()
            })
            .collect(),
        RestrictionMode::Subset(p) => k_subsets(n, p as usize),
        RestrictionMode::Coordinate => (0..n).map(|i| vec![i]).collect(),
    };
    let alts = k_subsets(n, k)
        .into_iter()
        .map(|u| {
            Alternate::Product(
                coords
                    .iter()
                    .map(|c| {
                        if c.iter().all(|x| u.contains(x)) {
                            vec![0.5 - bias, 0.5 + bias]
                        } else {
                            vec![0.5, 0.5]
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    uniform_problem("planted", coords.len(), alts)
}

fn c9_noise() -> Outcome {
    let mut min_margin = f64::INFINITY;
    let mut checks = 0;
    // coordinate mode on exact miniatures with N ≤ 10
    let mut coordinate = vec![
        parity_problem(6, 2)?,
        parity_problem(6, 3)?,
        planted_tensor(10, 1, RestrictionMode::Coordinate, 0.3)?,
    ];
    for p in ok_or(finite_corpus(SEED + 9, 40, CorpusShape::default()))? {
        if ok_or(p.null.as_product())?.is_uniform_binary() {
            coordinate.push(p);
        }
    }
    for p in &coordinate {
        // 3^N restriction patterns per pair: a reduced grid at N = 10
        let (rates, rhos): (&[f64], &[f64]) = if p.null.dim() > 8 {
            (&[0.25], &[0.5])
        } else {
            (&[0.0, 0.1, 0.25, 0.5], &[0.0, 0.3, 0.6])
        };
        for &rate in rates {
            for &rho in rhos {
                let spec = RestrictionSpec {
                    mode: RestrictionMode::Coordinate,
                    rate,
                    operator: ok_or(MarkovOperatorSpec::resample(&[0.5, 0.5], rho))?,
                };
                for d in 0..=2i64 {
                    for k in [2u32, 4] {
                        let r = ok_or(verify_restriction_bounds(p, &spec, d, k))?;
                        min_margin = min_margin.min(r.margin);
                        checks += 1;
                        if r.margin < -1e-10 {
                            return fail(format!("coordinate bound {} rate={rate} rho={rho} d={d} k={k}: {r:?}", p.id));
                        }
                    }
                }
                // the restricted family has one alternate per (R, u); keep it small
                if p.null.dim() <= 6 {
                    let (_, sda) = ok_or(verify_restricted_sda(p, &spec, 10, 1, 2, 4))?;
                    if !sda.pass {
                        return fail(format!("restricted SDA bound fails on {} rate={rate} rho={rho}", p.id));
                    }
                }
            }
        }
    }
    // tensor modes, p = 2, n ≤ 5
    let tensor = vec![
        (planted_tensor(4, 2, RestrictionMode::Subtensor(2), 0.4)?, RestrictionMode::Subtensor(2)),
        (planted_tensor(5, 3, RestrictionMode::Subtensor(2), 0.2)?, RestrictionMode::Subtensor(2)),
        (planted_tensor(5, 3, RestrictionMode::Subset(2), 0.3)?, RestrictionMode::Subset(2)),
    ];
    for (p, mode) in &tensor {
        for rate in [0.1, 0.3, 0.5] {
            for k in [2u32, 4] {
                // 2^{p/k} ρ ≤ 1
                let rho_max = 2f64.powf(-2.0 / k as f64);
                for rho in [0.0, 0.5 * rho_max, rho_max] {
                    let spec = RestrictionSpec {
                        mode: *mode,
                        rate,
                        operator: ok_or(MarkovOperatorSpec::resample(&[0.5, 0.5], rho))?,
                    };
                    for d in 0..=2i64 {
                        let r = ok_or(verify_restriction_bounds(p, &spec, d, k))?;
                        if !r.preconditions {
                            return fail(format!("preconditions unexpectedly fail: {r:?}"));
                        }
                        min_margin = min_margin.min(r.margin);
                        checks += 1;
                        if r.margin < -1e-10 {
                            return fail(format!("{mode:?} bound rate={rate} rho={rho} d={d} k={k}: {r:?}"));
                        }
                    }
                }
            }
        }
    }
    // noise operators on the same miniatures
    for p in coordinate.iter().take(3) {
        for rho in [0.2, 0.5, 0.8] {
            let op = ok_or(MarkovOperatorSpec::resample(&[0.5, 0.5], rho))?;
            for q in [2u64, 4, 8] {
                let r = ok_or(verify_noisy_sda(p, &op, 20, 1, 2, q))?;
                if !r.pass {
                    return fail(format!("noisy SDA bound fails on {} rho={rho} q={q}", p.id));
                }
            }
        }
    }
    let mut atten = 0.0f64;
    for (i, p) in corpus().iter().enumerate().take(30) {
        let null = ok_or(p.null.as_product())?;
        let marginal = null.marginal(0).to_vec();
        if null.marginals().iter().any(|m| *m != marginal) {
            continue;
        }
        let op = ok_or(MarkovOperatorSpec::resample(&marginal, 0.1 + 0.02 * i as f64))?;
        for w in ok_or(p.explicit())? {
            atten = atten.max(ok_or(attenuation_error(null, &w.alternate, &op))?);
        }
    }
    let null = ok_or(ProductNull::bernoulli(5, 0.3))?;
    let mut rng = stream_rng(SEED, 9);
    for _ in 0..20 {
        use rand::Rng;
        let alt = Alternate::Product(
            (0..5)
                .map(|_| {
                    let q: f64 = rng.random_range(0.05..0.95);
                    vec![1.0 - q, q]
                })
                .collect(),
        );
        let op = ok_or(MarkovOperatorSpec::resample(null.marginal(0), rng.random_range(0.0..1.0)))?;
        atten = atten.max(ok_or(attenuation_error(&null, &alt, &op))?);
    }
    if atten > 1e-12 {
        return fail(format!("Fourier attenuation error {atten:.3e}"));
    }
    Ok(format!("{checks} bound checks, min margin {min_margin:.3e}, attenuation error {atten:.1e}"))
}

fn c10_counterexample() -> Outcome {
    let z = ok_or(make_sda_counterexample(256, SEED))?;
    let cm = ok_or(correlation_matrix(ok_or(z.problem())?))?;
    let atoms = cm.atoms();
    // candidate oracle parameters just below 1/max|X|, where the top of the
    // spectrum decides both quantities
    let max = atoms.atoms.iter().fold(0.0f64, |a, (_, x)| a.max(x.abs()));
    let mut best: Option<(f64, u64, u64)> = None;
    for scale in [0.7, 0.5, 0.35] {
        let m = 1.0 / (scale * max);
        let plain = ok_or(sda_from_atoms(&atoms, m, SDA_CAP))?.value.lower();
        let prod = ok_or(product_sda(&cm, m, SDA_CAP))?.lower.lower();
        let ratio = |p: u64, q: u64| q as f64 / p.max(1) as f64;
        if best.is_none_or(|(_, p, q)| ratio(plain, prod) > ratio(p, q)) {
            best = Some((m, plain, prod));
        }
        if prod >= 4 * plain.max(1) {
            break;
        }
    }
    let Some((m, plain, prod)) = best else {
        return fail("no candidate oracle parameter");
    };
    if prod < 4 * plain {
        return fail(format!("at m = {m:.3}: product-SDA {prod} < 4 x SDA {plain}"));
    }
    Ok(format!("at m = {m:.3}: product-SDA >= {prod}, SDA = {plain}"))
}

fn c11_ggm() -> Outcome {
    let mut worst = 0.0f64;
    let z = ok_or(make_prs_ggm(4, 3, 2, 0.08, SEED))?;
    let p = ok_or(z.problem())?;
    let mut mc_worst = 0.0f64;
    for i in 0..5u64 {
        let mut rng = stream_rng(SEED, 100 + i);
        let (Alternate::Covariance(a), Alternate::Covariance(b)) = (
            ok_or(draw_alternate(&p.prior, &mut rng))?,
            ok_or(draw_alternate(&p.prior, &mut rng))?,
        ) else {
            return fail("GGM prior drew a non-covariance alternate");
        };
        let det = ok_or(covariance_correlation(&a, &b))?;
        let ratio = ok_or(covariance_correlation_ratio(&a, &b))?;
        worst = worst.max((det - ratio).abs());
        let (mc, se) = ok_or(ggm_correlation_mc(&a, &b, 100_000, SEED + i))?;
        mc_worst = mc_worst.max((mc - det).abs() / se);
        if (mc - det).abs() > 3.0 * se {
            return fail(format!("Monte Carlo {mc} ± {se} vs determinant {det}"));
        }
    }
    if worst > 1e-10 {
        return fail(format!("determinant routes differ by {worst:.3e}"));
    }
    let (n, s, d) = (60, 6, 3);
    let kappa = 0.9 / (6.0 * (d as f64).sqrt());
    let z = ok_or(make_prs_ggm(n, s, d, kappa, SEED))?;
    let atoms = ok_or(z.pair_atoms(Degree::Unbounded, AtomPlan::MonteCarlo { seed: SEED, budget: 4000 }))?;
    let mut detail = Vec::new();
    for k in [1u32, 2, 3] {
        let (mean, se) = atoms.mean_with_stderr(|f, _| f.powi(k as i32));
        let se = se.unwrap_or(0.0);
        let bound = ggm_moment_bound(n, s, d, kappa, k);
        if mean > bound + se {
            return fail(format!("k={k}: moment {mean} ± {se} exceeds {bound}"));
        }
        detail.push(format!("k={k}: {mean:.2e}±{se:.1e} <= {bound:.2e}"));
    }
    Ok(format!(
        "determinant gap {worst:.1e}, MC within {mc_worst:.2} SE; {}",
        detail.join(", ")
    ))
}

fn c12_f_psi() -> Outcome {
    let mut checks = 0;
    for (n, s) in [(5usize, 2usize), (6, 3)] {
        let set = k_subsets(n, s);
        let z = ok_or(make_sparse_parity(n, s, set.clone()))?;
        for rho in [1.0, 0.8] {
            let problem = if rho < 1.0 {
                let op = ok_or(MarkovOperatorSpec::resample(&[0.5, 0.5], rho))?;
                ok_or(apply_noise(ok_or(z.problem())?, &NoiseSpec::Operator(op), SEED))?
            } else {
                ok_or(z.problem())?.clone()
            };
            let queries: Vec<Query> = set.iter().map(|u| Query::Parity(u.clone())).collect();
            // the planted parity moves its centred query to ρ^s/√2 = √(τ/2)
            let tau = rho.powi(2 * s as i32);
            for m in 2..=8u64 {
                let (_, r) = ok_or(build_f_psi(&queries, &problem, m, 2))?;
                let q = queries.len() as f64;
                let lower = r.alternate_lower_bound(tau, 2);
                checks += 1;
                // relative 1e-12 absorbs rounding where the bound is attained
                if r.null_mean.abs() > 1e-12
                    || r.null_second_moment > q * q
                    || r.alternate_mean < lower * (1.0 - 1e-12)
                {
                    return fail(format!("n={n} s={s} rho={rho} m={m}: {r:?}, bound {lower}"));
                }
            }
        }
    }
    Ok(format!("{checks} instances"))
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 12] = [
        ("C1 LDLR pair identity vs brute force", c1_ldlr_identity),
        ("C2 Holder, boosting and moment-tail inequalities", c2_inequalities),
        ("C3 LDLR bound implies SDA bound", c3_ldlr_to_sda),
        ("C4 SDA bound implies LDLR bound", c4_sda_to_ldlr),
        ("C5 planted clique closed form", c5_clique_closed_form),
        ("C6 tensor PCA bounds", c6_tensor_pca),
        ("C7 sparse parity tightness", c7_parity_tightness),
        ("C8 cloning", c8_cloning),
        ("C9 noise and random restrictions", c9_noise),
        ("C10 SDA vs product-SDA separation", c10_counterexample),
        ("C11 Gaussian graphical model", c11_ggm),
        ("C12 f_Psi distinguisher", c12_f_psi),
    ];
    // LOWDEG_ACCEPTANCE=C3,C9 runs a subset while debugging
    let only = std::env::var("LOWDEG_ACCEPTANCE").ok();
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let tag = name.split_whitespace().next().unwrap_or(name);
        if only.as_deref().is_some_and(|o| !o.split(',').any(|t| t == tag)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                println!("FAIL {name} ({secs:.1}s): {detail}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
