use crate::error::{Error, Result};

/// Dense tables above this many states are refused.
pub const DENSE_STATE_CAP: u128 = 1 << 22;

const MASS_TOL: f64 = 1e-12;

/// Product measure over `Ω_1 × ... × Ω_N` with full support on every
/// coordinate.
///
/// States are indexed in mixed radix with coordinate 0 varying fastest.
/// For binary coordinates symbol 1 is the "one" (or `+1`) symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductNull {
    marginals: Vec<Vec<f64>>,
}

/// Orthonormal functions of one coordinate. Row 0 is the constant function;
/// rows `1..K` are mean zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateCharacters {
    pub values: Vec<Vec<f64>>,
}

impl ProductNull {
    pub fn new(marginals: Vec<Vec<f64>>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidMeasure("null has no coordinates".into()));
        }
        for (j, p) in marginals.iter().enumerate() {
            if p.len() < 2 {
                return Err(Error::InvalidMeasure(format!(
                    "coordinate {j} has alphabet size {} < 2",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidMeasure(format!(
                    "coordinate {j} has a negative or non-finite probability"
                )));
            }
            if p.contains(&0.0) {
                return Err(Error::InvalidMeasure(format!(
                    "coordinate {j} is fixed: a symbol has probability zero"
                )));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidMeasure(format!(
                    "coordinate {j} sums to {s}"
                )));
            }
        }
        Ok(Self { marginals })
    }

    /// Uniform measure on `{±1}^n`.
    pub fn uniform_binary(n: usize) -> Self {
        Self {
            marginals: vec![vec![0.5, 0.5]; n.max(1)],
        }
    }

    /// `Ber(q)^{⊗n}` on `{0,1}^n`.
    pub fn bernoulli(n: usize, q: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - q, q]; n])
    }

    pub fn coords(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    pub fn marginal(&self, j: usize) -> &[f64] {
        &self.marginals[j]
    }

    pub fn radices(&self) -> Vec<usize> {
        self.marginals.iter().map(Vec::len).collect()
    }

    /// Number of states, saturating at `u128::MAX`.
    pub fn state_count(&self) -> u128 {
        self.marginals
            .iter()
            .fold(1u128, |acc, p| acc.saturating_mul(p.len() as u128))
    }

    pub fn checked_states(&self, cap: u128) -> Result<usize> {
        let states = self.state_count();
        if states > cap {
            return Err(Error::StateCap { states, cap });
        }
        Ok(states as usize)
    }

    pub fn is_uniform_binary(&self) -> bool {
        self.marginals
            .iter()
            .all(|p| p.len() == 2 && p[0] == 0.5 && p[1] == 0.5)
    }

    pub fn is_binary(&self) -> bool {
        self.marginals.iter().all(|p| p.len() == 2)
    }

    /// Symbols of state `s`.
    pub fn decode(&self, mut s: usize, out: &mut [usize]) {
        for (j, p) in self.marginals.iter().enumerate() {
            out[j] = s % p.len();
            s /= p.len();
        }
    }

    /// Probability of every state, capped at [`DENSE_STATE_CAP`].
    pub fn table(&self) -> Result<Vec<f64>> {
        let n = self.checked_states(DENSE_STATE_CAP)?;
        Ok(product_table(&self.marginals, n))
    }

    /// Helmert-type orthonormal characters for every coordinate.
    ///
    /// With prefix sums `S_a = p_0 + ... + p_a`, row `a ≥ 1` takes the value
    /// `-p_a / c` below `a`, `S_{a-1} / c` at `a` and zero above, where
    /// `c = sqrt(p_a S_{a-1} S_a)`. On a binary coordinate with `P(1) = q`
    /// this is `(x - q) / sqrt(q(1-q))`.
    pub fn character_basis(&self) -> Vec<CoordinateCharacters> {
        self.marginals.iter().map(|p| helmert(p)).collect()
    }
}

pub(crate) fn helmert(p: &[f64]) -> CoordinateCharacters {
    let k = p.len();
    let mut values = vec![vec![0.0; k]; k];
    values[0] = vec![1.0; k];
    let mut prefix = p[0];
    for a in 1..k {
        let next = prefix + p[a];
        let c = (p[a] * prefix * next).sqrt();
        values[a][..a].fill(-p[a] / c);
        values[a][a] = prefix / c;
        prefix = next;
    }
    CoordinateCharacters { values }
}

pub(crate) fn product_table(marginals: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut t = vec![1.0; n];
    let mut stride = 1;
    for p in marginals {
        let k = p.len();
        for (s, v) in t.iter_mut().enumerate() {
            *v *= p[(s / stride) % k];
        }
        stride *= k;
    }
    t
}

/// Applies `mats[j]` (rows indexed by output symbol, columns by input
/// symbol) along every axis `j` of a mixed-radix array in place.
pub fn axis_transform(data: &mut [f64], radices: &[usize], mats: &[&[Vec<f64>]]) {
    let mut stride = 1;
    let mut buf = Vec::new();
    let mut out = Vec::new();
    for (j, &k) in radices.iter().enumerate() {
        let m = mats[j];
        buf.resize(k, 0.0);
        out.resize(m.len(), 0.0);
        let block = k * stride;
        for base in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                for x in 0..k {
                    buf[x] = data[base + inner + x * stride];
                }
                for (r, row) in m.iter().enumerate() {
                    out[r] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
                }
                for r in 0..k {
                    data[base + inner + r * stride] = out[r];
                }
            }
        }
        stride = block;
    }
}

/// Number of nonzero digits of every mixed-radix index.
pub fn index_degrees(radices: &[usize], len: usize) -> Vec<u32> {
    let mut deg = vec![0u32; len];
    let mut stride = 1;
    for &k in radices {
        for (s, d) in deg.iter_mut().enumerate() {
            if (s / stride) % k != 0 {
                *d += 1;
            }
        }
        stride *= k;
    }
    deg
}

/// Character coefficients `⟨D̄, χ_α⟩ = Σ_x D(x) χ_α(x)` of a density table.
pub fn fourier_coefficients(null: &ProductNull, density: &[f64]) -> Vec<f64> {
    let basis = null.character_basis();
    let mats: Vec<&[Vec<f64>]> = basis.iter().map(|b| b.values.as_slice()).collect();
    let mut c = density.to_vec();
    axis_transform(&mut c, &null.radices(), &mats);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_sign_character_is_identity() {
        let b = helmert(&[0.5, 0.5]);
        // symbol 0 is -1, symbol 1 is +1
        assert_eq!(b.values[1], vec![-1.0, 1.0]);
    }

    #[test]
    fn bernoulli_character_matches_standardization() {
        let q = 0.3;
        let b = helmert(&[1.0 - q, q]);
        let s = (q * (1.0 - q)).sqrt();
        assert!((b.values[1][0] - (0.0 - q) / s).abs() < 1e-15);
        assert!((b.values[1][1] - (1.0 - q) / s).abs() < 1e-15);
    }

    #[test]
    fn characters_orthonormal_on_ternary() {
        let p = [0.2, 0.5, 0.3];
        let b = helmert(&p);
        for r in 0..3 {
            for t in 0..3 {
                let ip: f64 = (0..3).map(|x| p[x] * b.values[r][x] * b.values[t][x]).sum();
                let want = if r == t { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-12, "{r} {t} {ip}");
            }
        }
    }

    #[test]
    fn fixed_coordinate_rejected() {
        assert!(ProductNull::new(vec![vec![1.0, 0.0]]).is_err());
        assert!(ProductNull::new(vec![vec![0.6, 0.3]]).is_err());
    }

    #[test]
    fn state_cap_enforced() {
        let null = ProductNull::uniform_binary(23);
        assert!(matches!(null.table(), Err(Error::StateCap { .. })));
    }

    #[test]
    fn transform_of_null_is_delta_at_constant() {
        let null = ProductNull::new(vec![vec![0.3, 0.7], vec![0.2, 0.3, 0.5]]).unwrap();
        let t = null.table().unwrap();
        let c = fourier_coefficients(&null, &[1.0 / 6.0; 6]);
        assert!((c[0] - 1.0).abs() < 1e-15);
        let c0 = fourier_coefficients(&null, &t);
        assert!((c0[0] - 1.0).abs() < 1e-15);
        assert!(c0[1..].iter().all(|x| x.abs() < 1e-12));
    }
}
