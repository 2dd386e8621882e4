use nalgebra::DMatrix;

use super::null::{fourier_coefficients, index_degrees, product_table, ProductNull, DENSE_STATE_CAP};
use crate::error::{Error, Result};
use crate::numerics::{csum, elementary_symmetric_all, exp_head_excess};

const TABLE_MASS_TOL: f64 = 1e-10;
const LOG_SPACE_BELOW: f64 = 1e-300;

/// Per-sample degree bound. `Unbounded` keeps the whole density.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Degree {
    Finite(u32),
    Unbounded,
}

impl Degree {
    pub fn admits(self, deg: u32) -> bool {
        match self {
            Degree::Finite(d) => deg <= d,
            Degree::Unbounded => true,
        }
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Degree::Finite(d) => Some(d),
            Degree::Unbounded => None,
        }
    }
}

impl std::fmt::Display for Degree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Degree::Finite(d) => write!(f, "{d}"),
            Degree::Unbounded => write!(f, "inf"),
        }
    }
}

/// Null distribution backends.
#[derive(Clone, Debug, PartialEq)]
pub enum Null {
    Product(ProductNull),
    /// Standard Gaussian `N(0, I_dim)`.
    Gaussian { dim: usize },
}

impl Null {
    pub fn dim(&self) -> usize {
        match self {
            Null::Product(p) => p.coords(),
            Null::Gaussian { dim } => *dim,
        }
    }

    pub fn as_product(&self) -> Result<&ProductNull> {
        match self {
            Null::Product(p) => Ok(p),
            Null::Gaussian { .. } => Err(Error::Unsupported(
                "operation needs a finite product null".into(),
            )),
        }
    }
}

/// One planted distribution `D_u`.
#[derive(Clone, Debug, PartialEq)]
pub enum Alternate {
    /// Probability of every null state.
    Table(Vec<f64>),
    /// Independent coordinates with the given marginals.
    Product(Vec<Vec<f64>>),
    /// `N(μ, I)` against a standard Gaussian null.
    MeanShift(Vec<f64>),
    /// `N(0, (I + A)^{-1})` against a standard Gaussian null; holds `A`.
    Covariance(DMatrix<f64>),
    /// Relative density `1 + amplitude · χ_subset` on uniform `{±1}^n`.
    ParityBump { subset: Vec<usize>, amplitude: f64 },
}

impl Alternate {
    pub fn kind(&self) -> &'static str {
        match self {
            Alternate::Table(_) => "table",
            Alternate::Product(_) => "product",
            Alternate::MeanShift(_) => "mean-shift",
            Alternate::Covariance(_) => "covariance",
            Alternate::ParityBump { .. } => "parity",
        }
    }

    pub fn validate(&self, null: &Null) -> Result<()> {
        match (self, null) {
            (Alternate::Table(t), Null::Product(p)) => {
                let n = p.checked_states(DENSE_STATE_CAP)?;
                if t.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "table has {} entries, null has {n} states",
                        t.len()
                    )));
                }
                check_probabilities(t, "table")
            }
            (Alternate::Product(ms), Null::Product(p)) => {
                if ms.len() != p.coords() {
                    return Err(Error::DimensionMismatch(format!(
                        "product alternate has {} coordinates, null has {}",
                        ms.len(),
                        p.coords()
                    )));
                }
                for (j, m) in ms.iter().enumerate() {
                    if m.len() != p.marginal(j).len() {
                        return Err(Error::DimensionMismatch(format!(
                            "coordinate {j}: alphabet {} vs null {}",
                            m.len(),
                            p.marginal(j).len()
                        )));
                    }
                    check_probabilities(m, "product marginal")?;
                }
                Ok(())
            }
            (Alternate::ParityBump { subset, amplitude }, Null::Product(p)) => {
                if !p.is_uniform_binary() {
                    return Err(Error::Unsupported(
                        "parity alternates need a uniform binary null".into(),
                    ));
                }
                if !amplitude.is_finite() || amplitude.abs() > 1.0 {
                    return Err(Error::InvalidMeasure(format!(
                        "parity amplitude {amplitude} outside [-1, 1]"
                    )));
                }
                let mut seen = subset.clone();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() != subset.len() || seen.last().is_some_and(|&i| i >= p.coords()) {
                    return Err(Error::InvalidInput(
                        "parity subset has repeated or out-of-range indices".into(),
                    ));
                }
                Ok(())
            }
            (Alternate::MeanShift(mu), Null::Gaussian { dim }) => {
                if mu.len() != *dim {
                    return Err(Error::DimensionMismatch(format!(
                        "mean has length {}, null dimension {dim}",
                        mu.len()
                    )));
                }
                if mu.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidMeasure("non-finite mean entry".into()));
                }
                Ok(())
            }
            (Alternate::Covariance(a), Null::Gaussian { dim }) => {
                if a.nrows() != *dim || a.ncols() != *dim {
                    return Err(Error::DimensionMismatch(format!(
                        "perturbation is {}x{}, null dimension {dim}",
                        a.nrows(),
                        a.ncols()
                    )));
                }
                if (a - a.transpose()).amax() > 1e-12 {
                    return Err(Error::InvalidMeasure("perturbation is not symmetric".into()));
                }
                let eye = DMatrix::identity(*dim, *dim);
                if (eye + a).cholesky().is_none() {
                    return Err(Error::NotPositive("I + A is not positive definite".into()));
                }
                Ok(())
            }
            (alt, _) => Err(Error::Unsupported(format!(
                "{} alternate is incompatible with this null",
                alt.kind()
            ))),
        }
    }

    /// Dense probability table over the null's states.
    pub fn to_table(&self, null: &ProductNull) -> Result<Vec<f64>> {
        match self {
            Alternate::Table(t) => Ok(t.clone()),
            Alternate::Product(ms) => {
                let n = null.checked_states(DENSE_STATE_CAP)?;
                Ok(product_table(ms, n))
            }
            Alternate::ParityBump { subset, amplitude } => {
                let n = null.checked_states(DENSE_STATE_CAP)?;
                let base = 1.0 / n as f64;
                Ok((0..n)
                    .map(|s| {
                        let ones = subset.iter().filter(|&&i| (s >> i) & 1 == 1).count();
                        // symbol 0 is -1
                        let chi = if (subset.len() - ones) % 2 == 0 { 1.0 } else { -1.0 };
                        base * (1.0 + amplitude * chi)
                    })
                    .collect())
            }
            other => Err(Error::Unsupported(format!(
                "{} alternate has no finite table",
                other.kind()
            ))),
        }
    }
}

fn check_probabilities(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidMeasure(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let s = csum(p.iter().copied());
    if (s - 1.0).abs() > TABLE_MASS_TOL {
        return Err(Error::InvalidMeasure(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// An alternate preprocessed for repeated pairing.
pub(crate) enum Prepared<'a> {
    Table { probs: Vec<f64>, coeffs: Vec<f64> },
    Product(&'a [Vec<f64>]),
    Mean(&'a [f64]),
    Cov(&'a DMatrix<f64>),
    Parity { subset: Vec<usize>, amplitude: f64 },
}

/// Shared data for pairing alternates against one null.
pub(crate) struct PairContext<'a> {
    pub null: &'a Null,
    table: Option<NullTable>,
}

struct NullTable {
    probs: Vec<f64>,
    degrees: Vec<u32>,
    log_space: bool,
}

impl<'a> PairContext<'a> {
    /// `dense` forces every finite alternate into table form.
    pub fn new(null: &'a Null, dense: bool) -> Result<Self> {
        let table = match (null, dense) {
            (Null::Product(p), true) => {
                let probs = p.table()?;
                let degrees = index_degrees(&p.radices(), probs.len());
                let log_space = probs.iter().any(|&x| x < LOG_SPACE_BELOW);
                Some(NullTable {
                    probs,
                    degrees,
                    log_space,
                })
            }
            _ => None,
        };
        Ok(Self { null, table })
    }

    pub fn prepare(&self, alt: &'a Alternate) -> Result<Prepared<'a>> {
        if self.table.is_some() {
            let p = self.null.as_product()?;
            let probs = alt.to_table(p)?;
            let coeffs = fourier_coefficients(p, &probs);
            return Ok(Prepared::Table { probs, coeffs });
        }
        Ok(match alt {
            Alternate::Product(ms) => Prepared::Product(ms),
            Alternate::MeanShift(mu) => Prepared::Mean(mu),
            Alternate::Covariance(a) => Prepared::Cov(a),
            Alternate::ParityBump { subset, amplitude } => {
                let mut s = subset.clone();
                s.sort_unstable();
                Prepared::Parity {
                    subset: s,
                    amplitude: *amplitude,
                }
            }
            Alternate::Table(_) => {
                return Err(Error::Unsupported(
                    "table alternate needs a dense pairing context".into(),
                ))
            }
        })
    }

    /// `(⟨D̄_u, D̄_v⟩ - 1, ⟨D̄_u^{≤d}, D̄_v^{≤d}⟩ - 1)`, each computed without
    /// forming the value near 1 first where the backend allows it.
    pub fn pair(&self, u: &Prepared<'_>, v: &Prepared<'_>, d: Degree) -> Result<(f64, f64)> {
        match (u, v) {
            (
                Prepared::Table { probs: pu, coeffs: cu },
                Prepared::Table { probs: pv, coeffs: cv },
            ) => {
                let nt = self.table.as_ref().expect("dense context");
                let terms = pu.iter().zip(pv).zip(&nt.probs);
                let full = if nt.log_space {
                    csum(
                        terms
                            .filter(|&((a, b), _n)| *a > 0.0 && *b > 0.0 ).map(|((a, b), n)| (a.ln() + b.ln() - n.ln()).exp())
                            .chain([-1.0]),
                    )
                } else {
                    csum(terms.map(|((a, b), n)| a * b / n).chain([-1.0]))
                };
                let low = match d {
                    Degree::Unbounded => full,
                    // index 0 is the constant character, whose product is 1
                    Degree::Finite(_) => csum(
                        cu.iter()
                            .zip(cv)
                            .zip(&nt.degrees)
                            .skip(1)
                            .filter(|(_, deg)| d.admits(**deg))
                            .map(|((a, b), _)| a * b),
                    ),
                };
                Ok((full, low))
            }
            (Prepared::Product(mu), Prepared::Product(mv)) => {
                let p = self.null.as_product()?;
                let w: Vec<f64> = (0..p.coords())
                    .map(|j| {
                        csum(
                            mu[j].iter()
                                .zip(&mv[j])
                                .zip(p.marginal(j))
                                .map(|((a, b), n)| a * b / n)
                                .chain([-1.0]),
                        )
                    })
                    .collect();
                Ok(product_pair(&w, d))
            }
            (Prepared::Mean(a), Prepared::Mean(b)) => {
                if a.len() != b.len() {
                    return Err(Error::DimensionMismatch("mean lengths differ".into()));
                }
                let c = csum(a.iter().zip(*b).map(|(x, y)| x * y));
                Ok(mean_shift_pair(c, d))
            }
            (Prepared::Cov(a), Prepared::Cov(b)) => {
                let full = covariance_correlation(a, b)? - 1.0;
                let low = match d {
                    Degree::Unbounded => full,
                    // centred Gaussians have no Hermite mass in degree one
                    Degree::Finite(0) | Degree::Finite(1) => 0.0,
                    Degree::Finite(k) => {
                        return Err(Error::Unsupported(format!(
                            "degree-{k} truncation of covariance alternates"
                        )))
                    }
                };
                Ok((full, low))
            }
            (
                Prepared::Parity {
                    subset: su,
                    amplitude: au,
                },
                Prepared::Parity {
                    subset: sv,
                    amplitude: av,
                },
            ) => {
                let bump = if su == sv { au * av } else { 0.0 };
                let low = if d.admits(su.len() as u32) { bump } else { 0.0 };
                Ok((bump, low))
            }
            _ => Err(Error::Unsupported(
                "mixed alternate kinds in one pairing context".into(),
            )),
        }
    }
}

/// Excess pair values for product alternates from the per-coordinate
/// excesses `w_j`: `Π(1 + w_j) - 1 = Σ_{t≥1} e_t(w)` and the degree-`d`
/// part `Σ_{1≤t≤d} e_t(w)`.
pub fn product_pair(w: &[f64], d: Degree) -> (f64, f64) {
    let e = elementary_symmetric_all(w, w.len());
    let full = csum(e[1..].iter().copied());
    let low = match d {
        Degree::Unbounded => full,
        Degree::Finite(d) => csum(e[1..=(d as usize).min(w.len())].iter().copied()),
    };
    (full, low)
}

/// Excess pair values for Gaussian mean shifts with `c = ⟨μ_u, μ_v⟩`:
/// `exp(c) - 1` and `Σ_{1≤t≤d} c^t / t!`.
pub fn mean_shift_pair(c: f64, d: Degree) -> (f64, f64) {
    let full = c.exp_m1();
    let low = match d {
        Degree::Unbounded => full,
        Degree::Finite(d) => exp_head_excess(c, d),
    };
    (full, low)
}

fn active_indices(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<usize> {
    (0..a.nrows())
        .filter(|&i| {
            (0..a.ncols()).any(|j| a[(i, j)] != 0.0 || b[(i, j)] != 0.0)
        })
        .collect()
}

fn principal(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

fn check_pd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.clone().cholesky().is_none() {
        return Err(Error::NotPositive(format!("{name} is not positive definite")));
    }
    Ok(())
}

/// `⟨D̄_A, D̄_B⟩ = det(I - (I+A)^{-1} A B (I+B)^{-1})^{-1/2}` for
/// `D_A = N(0, (I+A)^{-1})`, evaluated on the coordinates where `A` or `B`
/// is nonzero.
pub fn covariance_correlation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch("perturbations differ in shape".into()));
    }
    let idx = active_indices(a, b);
    if idx.is_empty() {
        return Ok(1.0);
    }
    let a = principal(a, &idx);
    let b = principal(b, &idx);
    let eye = DMatrix::<f64>::identity(idx.len(), idx.len());
    let ia = &eye + &a;
    let ib = &eye + &b;
    check_pd(&ia, "I + A")?;
    check_pd(&ib, "I + B")?;
    check_pd(&(&eye + &a + &b), "I + A + B")?;
    let ia_inv = ia.try_inverse().ok_or_else(|| Error::NotPositive("I + A is singular".into()))?;
    let ib_inv = ib.try_inverse().ok_or_else(|| Error::NotPositive("I + B is singular".into()))?;
    let det = (&eye - ia_inv * &a * &b * ib_inv).determinant();
    if !(det > 0.0) {
        return Err(Error::NotPositive(format!(
            "determinant {det} of I - (I+A)^-1 AB (I+B)^-1"
        )));
    }
    Ok(1.0 / det.sqrt())
}

/// `sqrt(det(I+A) det(I+B) / det(I+A+B))`, the same quantity through
/// Cholesky log-determinants.
pub fn covariance_correlation_ratio(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let ld = |m: DMatrix<f64>, name: &str| -> Result<f64> {
        let c = m
            .cholesky()
            .ok_or_else(|| Error::NotPositive(format!("{name} is not positive definite")))?;
        Ok(2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>())
    };
    let la = ld(&eye + a, "I + A")?;
    let lb = ld(&eye + b, "I + B")?;
    let lab = ld(&eye + a + b, "I + A + B")?;
    Ok((0.5 * (la + lb - lab)).exp())
}
