//! Property tests over seeded random instances.

use lowdeg::corpus::{random_finite_problem, CorpusShape};
use lowdeg::ldlr::{independent_bound_check, ldlr_norm, SamplewiseDegree};
use lowdeg::measures::{null_alternate, Alternate, AtomPlan, CorrelationAtoms, Degree, Null, PairSource, Prior, ProductNull, TestingProblem};
use lowdeg::noise::{apply_noise, verify_noisy_sda, MarkovOperatorSpec, NoiseSpec};
use lowdeg::numerics::elementary_symmetric_all;
use lowdeg::sda::{correlation_matrix, product_sda, sda_from_atoms, tail_conditional_expectation, verify_ldlr_to_sda};
use lowdeg::sq::{run_sq_algorithm, Adversary, NonadaptivePolicy};
use proptest::prelude::*;

const CAP: u64 = 1 << 40;

fn problem(seed: u64, index: u64) -> TestingProblem {
    random_finite_problem(seed, index, CorpusShape::default()).unwrap()
}

/// The first problem at or after `index` whose null is uniform on `{0,1}^n`.
fn uniform_problem(seed: u64, index: u64) -> TestingProblem {
    (index..)
        .map(|i| problem(seed, i))
        .find(|p| p.null.as_product().unwrap().is_uniform_binary())
        .unwrap()
}

fn close_above(a: f64, b: f64) -> bool {
    a >= b - 1e-12 * b.abs().max(1.0)
}

fn prob_vec(raw: &[f64]) -> Vec<f64> {
    let t: f64 = raw.iter().sum();
    raw.iter().map(|x| x / t).collect()
}

/// A product null and product alternates with at most 4 coordinates of at
/// most 3 symbols.
fn product_instance() -> impl Strategy<Value = (ProductNull, Vec<Alternate>)> {
    (1usize..=4, 2usize..=3).prop_flat_map(|(n, r)| {
        let marg = prop::collection::vec(prop::collection::vec(0.1f64..1.0, r), n);
        let alts = prop::collection::vec(prop::collection::vec(prop::collection::vec(0.0f64..1.0, r), n), 1..4);
        (marg, alts).prop_map(|(marg, alts)| {
            let null = ProductNull::new(marg.iter().map(|m| prob_vec(m)).collect()).unwrap();
            let alts = alts
                .into_iter()
                .map(|a| Alternate::Product(a.iter().map(|m| prob_vec(&m.iter().map(|x| x + 1e-3).collect::<Vec<_>>())).collect()))
                .collect();
            (null, alts)
        })
    })
}

/// Product alternates on a binary null with at most 6 coordinates.
fn binary_product_problem() -> impl Strategy<Value = TestingProblem> {
    (1usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(0.2f64..0.8, n),
            prop::collection::vec(prop::collection::vec(0.05f64..0.95, n), 1..5),
        )
            .prop_map(move |(q, alts)| {
                let null = ProductNull::new(q.iter().map(|&p| vec![1.0 - p, p]).collect()).unwrap();
                let alts = alts
                    .into_iter()
                    .map(|a| Alternate::Product(a.iter().map(|&p| vec![1.0 - p, p]).collect()))
                    .collect();
                TestingProblem::new("product", Null::Product(null), Prior::uniform(alts)).unwrap()
            })
    })
}

fn gaussian_problem() -> impl Strategy<Value = TestingProblem> {
    (1usize..=4).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(-0.8f64..0.8, n), 1..5).prop_map(move |mus| {
            let alts = mus.into_iter().map(Alternate::MeanShift).collect();
            TestingProblem::new("gauss", Null::Gaussian { dim: n }, Prior::uniform(alts)).unwrap()
        })
    })
}

fn degrees() -> [Degree; 4] {
    [Degree::Finite(0), Degree::Finite(1), Degree::Finite(2), Degree::Unbounded]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn densities_have_unit_mass_and_symmetric_inner_products(seed in any::<u64>(), index in 0u64..1000) {
        let p = problem(seed, index);
        let one = null_alternate(&p.null);
        let list = p.explicit().unwrap();
        for u in list {
            prop_assert!((p.inner_product(&u.alternate, &one).unwrap() - 1.0).abs() < 1e-10);
            for v in list {
                let a = p.inner_product(&u.alternate, &v.alternate).unwrap();
                let b = p.inner_product(&v.alternate, &u.alternate).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn product_backend_matches_dense_tables((null, alts) in product_instance()) {
        let tables: Vec<Alternate> = alts.iter().map(|a| Alternate::Table(a.to_table(&null).unwrap())).collect();
        let p = TestingProblem::new("mixed", Null::Product(null), Prior::uniform(alts.clone())).unwrap();
        for (i, u) in alts.iter().enumerate() {
            for (j, v) in alts.iter().enumerate() {
                for d in degrees() {
                    let a = p.pair_excess(u, v, d).unwrap();
                    let b = p.pair_excess(&tables[i], &tables[j], d).unwrap();
                    prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12, "{a:?} vs {b:?} at {d:?}");
                }
            }
        }
    }

    #[test]
    fn ldlr_is_monotone_and_sums_its_terms(seed in any::<u64>(), index in 0u64..1000) {
        let p = problem(seed, index);
        let value = |m: u64, d: Degree, k: u32| ldlr_norm(&p, m, SamplewiseDegree::new(d, k), AtomPlan::Exact).unwrap();
        for m in 1..=6u64 {
            for k in 1..=m.min(4) as u32 {
                let mut last = -1.0;
                for d in degrees() {
                    let r = value(m, d, k);
                    prop_assert!(r.value >= -1e-12);
                    let sum: f64 = r.per_t.iter().sum();
                    prop_assert!((sum - r.value).abs() <= 1e-10 * r.value.max(1.0));
                    prop_assert!(close_above(r.value, last), "not monotone in d");
                    last = r.value;
                    if k > 1 {
                        prop_assert!(close_above(r.value, value(m, d, k - 1).value), "not monotone in k");
                    }
                    if m > k as u64 {
                        prop_assert!(close_above(r.value, value(m - 1, d, k).value), "not monotone in m");
                    }
                }
            }
        }
    }

    #[test]
    fn tail_mean_and_sda_are_monotone(seed in any::<u64>(), index in 0u64..1000) {
        let p = problem(seed, index);
        let atoms = p.pair_atoms(Degree::Unbounded, AtomPlan::Exact).unwrap().correlation();
        let mut last = f64::INFINITY;
        for i in 1..=50 {
            let t = tail_conditional_expectation(&atoms, i as f64 / 50.0).unwrap();
            prop_assert!(close_above(last, t));
            last = t;
        }
        let mut last = u64::MAX;
        for e in 0..12 {
            let m = 10f64.powf(e as f64 / 2.0);
            let r = sda_from_atoms(&atoms, m, CAP).unwrap();
            prop_assert!(r.value.lower() <= last);
            last = r.value.lower();
            if let Some(w) = r.witness {
                let q_fail = r.value.lower() + 1;
                prop_assert!(w.prob >= 1.0 / (q_fail as f64).powi(2) * (1.0 - 1e-12));
                prop_assert!(w.mean > 1.0 / m);
            }
        }
    }

    #[test]
    fn product_sda_dominates_sda(seed in any::<u64>(), index in 0u64..1000, e in 0u32..8) {
        let p = problem(seed, index);
        let cm = correlation_matrix(&p).unwrap();
        let m = 10f64.powf(e as f64 / 2.0);
        let plain = sda_from_atoms(&cm.atoms(), m, CAP).unwrap().value.lower();
        let prod = product_sda(&cm, m, CAP).unwrap();
        prop_assert!(prod.lower.lower() >= plain);
        prop_assert!(prod.upper.lower() >= prod.lower.lower());
    }

    #[test]
    fn ldlr_bound_implies_sda_bound(seed in any::<u64>(), index in 0u64..1000, m in 2u64..50, q in 1u64..20) {
        let p = problem(seed, index);
        for d in [Degree::Finite(0), Degree::Finite(1), Degree::Unbounded] {
            let r = verify_ldlr_to_sda(&p, m, d, 2, q, AtomPlan::Exact).unwrap();
            prop_assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn noise_preserves_mass_and_noisy_sda_bound_holds(seed in any::<u64>(), index in 0u64..1000, rho in 0.0f64..1.0) {
        let p = uniform_problem(seed, index);
        let null = p.null.as_product().unwrap().clone();
        let marginal = null.marginal(0).to_vec();
        let op = MarkovOperatorSpec::resample(&marginal, rho).unwrap();
        let noised = apply_noise(&p, &NoiseSpec::Operator(op.clone()), seed).unwrap();
        for w in noised.explicit().unwrap() {
            let total: f64 = w.alternate.to_table(&null).unwrap().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }
        for q in [2u64, 5] {
            prop_assert!(verify_noisy_sda(&p, &op, 10, 1, 2, q).unwrap().pass);
        }
    }

    #[test]
    fn vstat_answers_stay_within_tolerance(seed in any::<u64>(), index in 0u64..1000, m in 1.0f64..1e4) {
        let p = uniform_problem(seed, index);
        let n = p.null.dim();
        let subsets: Vec<Vec<usize>> = (1..1usize << n)
            .map(|mask| (0..n).filter(|j| mask >> j & 1 == 1).collect())
            .collect();
        let policy = NonadaptivePolicy::parity_scan(&p.null, &subsets).unwrap();
        for adv in [Adversary::Honest, Adversary::TowardNull] {
            let r = run_sq_algorithm(&policy, &p, m, &adv, 5, seed, 1000, 10).unwrap();
            prop_assert!(r.transcripts.iter().all(|(_, t)| t.is_valid()));
        }
    }

    #[test]
    fn product_high_degree_bound(p in binary_product_problem(), d in 1u32..3, k in prop::sample::select(vec![2u32, 4])) {
        let r = independent_bound_check(&p, d, k, AtomPlan::Exact).unwrap();
        prop_assert!(r.product_margin >= -1e-10, "{r:?}");
    }

    #[test]
    fn gaussian_high_degree_bound(p in gaussian_problem(), d in 1u32..4, k in prop::sample::select(vec![2u32, 4])) {
        let r = independent_bound_check(&p, d, k, AtomPlan::Exact).unwrap();
        prop_assert!(r.gaussian_margin >= -1e-10, "{r:?}");
    }

    #[test]
    fn monomial_and_symmetric_polynomial_claims(
        p in binary_product_problem(),
        multiset in prop::collection::vec(0usize..6, 1..5),
        a in 1usize..3,
        b in 1usize..3,
        poly in prop::collection::vec((0usize..6, 0usize..6, 0.0f64..2.0), 0..3),
    ) {
        let null = p.null.as_product().unwrap();
        let n = null.coords();
        // u_i = E_{D_u} χ_i with χ_i the standardized indicator of symbol 1
        let vectors: Vec<(f64, Vec<f64>)> = p
            .explicit()
            .unwrap()
            .iter()
            .map(|w| {
                let Alternate::Product(ms) = &w.alternate else { unreachable!() };
                let u = (0..n)
                    .map(|i| {
                        let q = null.marginal(i)[1];
                        (ms[i][1] - q) / (q * (1.0 - q)).sqrt()
                    })
                    .collect();
                (w.weight, u)
            })
            .collect();
        let hadamard = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).map(|(x, y)| x * y).collect() };
        // monomial-positive p(x) = 1 + Σ c x_i x_j
        let p_of = |x: &[f64]| 1.0 + poly.iter().map(|&(i, j, c)| c * x[i % n] * x[j % n]).sum::<f64>();
        let (mut mono, mut lhs, mut rhs) = (0.0, 0.0, 0.0);
        for (wu, u) in &vectors {
            for (wv, v) in &vectors {
                let x = hadamard(u, v);
                let w = wu * wv;
                mono += w * multiset.iter().map(|&i| x[i % n]).product::<f64>();
                let e = elementary_symmetric_all(&x, a + b);
                lhs += w * e[a + b] * p_of(&x);
                rhs += w * e[a] * e[b] * p_of(&x);
            }
        }
        prop_assert!(mono >= -1e-12);
        prop_assert!(lhs <= rhs + 1e-10 * rhs.abs().max(1.0), "{lhs} > {rhs}");
        // ⟨D̄_u^{=t}, D̄_v^{=t}⟩ = e_t(u∘v)
        let list = p.explicit().unwrap();
        for (i, (_, u)) in vectors.iter().enumerate() {
            for (j, (_, v)) in vectors.iter().enumerate() {
                let e = elementary_symmetric_all(&hadamard(u, v), n);
                for t in 1..=n as u32 {
                    let hi = p.pair_excess(&list[i].alternate, &list[j].alternate, Degree::Finite(t)).unwrap().1;
                    let lo = p.pair_excess(&list[i].alternate, &list[j].alternate, Degree::Finite(t - 1)).unwrap().1;
                    prop_assert!((hi - lo - e[t as usize]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn correlation_atoms_reject_bad_weights(w in -1.0f64..0.0) {
        prop_assert!(CorrelationAtoms::new(vec![(w, 0.1), (1.0 - w, 0.0)]).is_err());
    }
}
