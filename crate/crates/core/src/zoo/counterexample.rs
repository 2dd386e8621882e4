//! A family on a single `n`-ary coordinate whose SDA and product-SDA
//! separate. Rows `v_i` of `V = M^{1/2}` for `M = G + 3√n I` are centred to
//! `w_i` and turned into densities `D̄_i(k) = (w_ik + 2v_max) / (2v_max)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Param, ZooInstance};
use crate::error::{Error, Result};
use crate::measures::{Alternate, Degree, Null, PairAtom, Prior, ProductNull, TestingProblem};
use crate::numerics::{csum, stream_rng};

const MAX_N: usize = 4096;
const MAX_ATTEMPTS: u64 = 10;

#[derive(Clone, Debug)]
pub struct CounterexampleVectors {
    /// Rows are the `v_i`.
    pub v: DMatrix<f64>,
    /// Rows are the centred `w_i = v_i - mean(v_i)·1`.
    pub w: DMatrix<f64>,
    /// `max |v_ik|`.
    pub v_max: f64,
    /// `max_i |⟨v_i, 1⟩| / √n`.
    pub alpha: f64,
    /// Attempts needed for a positive semidefinite `M`.
    pub attempts: u64,
}

impl CounterexampleVectors {
    /// `⟨D̄_i, D̄_j⟩ - 1 = ⟨w_i, w_j⟩ / (4n v_max²)`.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        let n = self.w.ncols() as f64;
        self.w.row(i).dot(&self.w.row(j)) / (4.0 * n * self.v_max * self.v_max)
    }

    /// Density table of `D_i` over `[n]`.
    pub fn table(&self, i: usize) -> Vec<f64> {
        let n = self.w.ncols() as f64;
        self.w
            .row(i)
            .iter()
            .map(|x| (x + 2.0 * self.v_max) / (2.0 * self.v_max) / n)
            .collect()
    }
}

pub fn counterexample_vectors(n: usize, seed: u64) -> Result<CounterexampleVectors> {
    if !(2..=MAX_N).contains(&n) {
        return Err(Error::InvalidInput(format!("n = {n} outside 2..={MAX_N}")));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream_rng(seed, attempt);
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let g: f64 = rng.sample(StandardNormal);
                m[(i, j)] = g;
                m[(j, i)] = g;
            }
            m[(i, i)] += 3.0 * (n as f64).sqrt();
        }
        let eig = m.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&x| x < 0.0) {
            continue;
        }
        let root = eig.eigenvalues.map(f64::sqrt);
        let v = &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose();
        let v_max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut w = v.clone();
        let mut alpha = 0.0f64;
        for mut row in w.row_iter_mut() {
            let s = csum(row.iter().copied());
            alpha = alpha.max(s.abs() / (n as f64).sqrt());
            row.add_scalar_mut(-s / n as f64);
        }
        return Ok(CounterexampleVectors {
            v,
            w,
            v_max,
            alpha,
            attempts: attempt + 1,
        });
    }
    Err(Error::NotPositive(format!("M not positive semidefinite in {MAX_ATTEMPTS} draws")))
}

pub fn make_sda_counterexample(n: usize, seed: u64) -> Result<ZooInstance> {
    let vecs = Arc::new(counterexample_vectors(n, seed)?);
    let null = Null::Product(ProductNull::new(vec![vec![1.0 / n as f64; n]])?);
    let alts = (0..n).map(|i| Alternate::Table(vecs.table(i))).collect();
    let problem = TestingProblem::new("counterexample", null, Prior::uniform(alts))?;
    let params = vec![Param::count("n", n), Param::count("seed", seed as usize)];
    let cv = Arc::clone(&vecs);
    let law = Arc::new(move |d: Degree| {
        let w = 1.0 / (n * n) as f64;
        let mut atoms = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let x = cv.correlation(i, j);
                atoms.push(PairAtom {
                    weight: w,
                    full_x: x,
                    low_x: if d.admits(1) { x } else { 0.0 },
                });
            }
        }
        Ok(atoms)
    });
    let formula = Arc::new(move |i: usize, j: usize, d: Degree| {
        let x = vecs.correlation(i, j);
        Ok((x, if d.admits(1) { x } else { 0.0 }))
    });
    Ok(ZooInstance::new("counterexample", params, Some(problem), Some(law), Some(formula)))
}
