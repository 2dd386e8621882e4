//! Small numerical kernels shared by every module: compensated summation,
//! binomial coefficients, elementary symmetric polynomials and seeded
//! generator derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of an iterator.
pub fn csum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Sample counts up to this bound get exact integer binomials.
pub const EXACT_BINOMIAL_LIMIT: u64 = 60;

/// `C(m, t)` as a float. Exact integer arithmetic for `m <= 60`, log-gamma
/// otherwise. Returns an error when the value does not fit in an `f64`.
pub fn binomial(m: u64, t: u64) -> Result<f64> {
    if t > m {
        return Ok(0.0);
    }
    if m <= EXACT_BINOMIAL_LIMIT {
        let t = t.min(m - t);
        let mut acc: u128 = 1;
        for i in 0..t {
            acc = acc * (m - i) as u128 / (i + 1) as u128;
        }
        return Ok(acc as f64);
    }
    let t = t.min(m - t);
    let v = if t <= DIRECT_PRODUCT_LIMIT {
        (0..t).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
    } else {
        ln_binomial(m as f64, t as f64).exp()
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("C({m},{t}) exceeds the f64 range")))
    }
}

/// Orders up to this use a running product instead of log-gamma, which
/// loses relative accuracy for large arguments.
const DIRECT_PRODUCT_LIMIT: u64 = 256;

/// `ln C(n, k)`, valid for real arguments.
pub fn ln_binomial(n: f64, k: f64) -> f64 {
    if k < 0.0 || k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0.0 || k == n {
        return 0.0;
    }
    let small = k.min(n - k);
    if small.fract() == 0.0 && small <= DIRECT_PRODUCT_LIMIT as f64 {
        return (0..small as u64)
            .map(|i| ((n - i as f64) / (i + 1) as f64).ln())
            .sum();
    }
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// `C(m, t) * x^t` evaluated in log space so that huge `m` and tiny `x`
/// do not overflow or underflow prematurely. Sign of `x` is kept.
pub fn binomial_times_power(m: u64, t: u64, x: f64) -> Result<f64> {
    if t > m {
        return Ok(0.0);
    }
    if t == 0 {
        return binomial(m, 0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if m <= EXACT_BINOMIAL_LIMIT {
        let v = binomial(m, t)? * x.powi(t as i32);
        if v.is_finite() {
            return Ok(v);
        }
    }
    let sign = if x < 0.0 && t % 2 == 1 { -1.0 } else { 1.0 };
    let ln = ln_binomial(m as f64, t as f64) + t as f64 * x.abs().ln();
    let v = sign * ln.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!(
            "C({m},{t})·x^{t} overflows (log magnitude {ln:.3})"
        )))
    }
}

/// All elementary symmetric polynomials `e_0..=e_max` of `x`, by the
/// standard one-variable-at-a-time recurrence.
pub fn elementary_symmetric_all(x: &[f64], max: usize) -> Vec<f64> {
    let top = max.min(x.len());
    let mut e = vec![0.0; max + 1];
    e[0] = 1.0;
    for (i, &xi) in x.iter().enumerate() {
        let hi = top.min(i + 1);
        for t in (1..=hi).rev() {
            e[t] += xi * e[t - 1];
        }
    }
    e
}

/// `e_t(x) = Σ_{|S|=t} Π_{i∈S} x_i`.
pub fn elementary_symmetric(x: &[f64], t: usize) -> Result<f64> {
    if t > x.len() {
        return Err(Error::InvalidInput(format!(
            "order {t} exceeds vector length {}",
            x.len()
        )));
    }
    Ok(elementary_symmetric_all(x, t)[t])
}

/// `(n-1)!!` style double factorial: `n!! = n (n-2) (n-4) ...`, with
/// `0!! = (-1)!! = 1`.
pub fn double_factorial(n: i64) -> f64 {
    let mut acc = 1.0;
    let mut i = n;
    while i > 1 {
        acc *= i as f64;
        i -= 2;
    }
    acc
}

pub fn factorial(n: u64) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Generator for stream `stream` of a run seeded with `seed`. Distinct
/// streams are independent, so work can be split without changing results.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Truncated exponential series `Σ_{t≤d} c^t / t!`.
pub fn exp_truncated(c: f64, d: u32) -> f64 {
    let mut term = 1.0;
    let mut acc = CompensatedSum::new();
    acc.add(1.0);
    for t in 1..=d {
        term *= c / t as f64;
        acc.add(term);
        if term == 0.0 {
            break;
        }
    }
    acc.value()
}

/// `Σ_{1≤t≤d} c^t / t!`, the truncated series without its constant term.
pub fn exp_head_excess(c: f64, d: u32) -> f64 {
    let mut term = 1.0;
    let mut acc = CompensatedSum::new();
    for t in 1..=d {
        term *= c / t as f64;
        acc.add(term);
        if term == 0.0 {
            break;
        }
    }
    acc.value()
}

/// Tail `exp(c) - Σ_{t≤d} c^t/t!`, summed directly when the head would
/// cancel most of `exp(c)`.
pub fn exp_tail(c: f64, d: u32) -> f64 {
    if c.abs() < 1.0 {
        let mut term = 1.0;
        for t in 1..=d {
            term *= c / t as f64;
        }
        let mut acc = CompensatedSum::new();
        let mut t = d + 1;
        loop {
            term *= c / t as f64;
            acc.add(term);
            if term.abs() <= 1e-18 * acc.value().abs().max(f64::MIN_POSITIVE) || t > d + 400 {
                break;
            }
            t += 1;
        }
        acc.value()
    } else {
        c.exp() - exp_truncated(c, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e2_of_one_two_three() {
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0], 2).unwrap(), 11.0);
    }

    #[test]
    fn e0_and_top_order() {
        let x = [0.3, -0.7, 0.9, 0.5];
        assert_eq!(elementary_symmetric(&x, 0).unwrap(), 1.0);
        let prod: f64 = x.iter().product();
        assert!((elementary_symmetric(&x, 4).unwrap() - prod).abs() < 1e-15);
        assert!(elementary_symmetric(&x, 5).is_err());
    }

    #[test]
    fn binomials_exact_and_large() {
        assert_eq!(binomial(5, 2).unwrap(), 10.0);
        assert_eq!(binomial(60, 30).unwrap(), 118264581564861424.0);
        let big = binomial(1_000_000_000, 2).unwrap();
        assert!((big / 4.999999995e17 - 1.0).abs() < 1e-9);
        assert!(binomial(1_000_000_000, 100_000).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn exp_tail_matches_difference() {
        for &c in &[-0.5f64, 0.01, 0.3, 2.0] {
            for d in 0..5 {
                let direct = c.exp() - exp_truncated(c, d);
                assert!((exp_tail(c, d) - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn double_factorials() {
        assert_eq!(double_factorial(-1), 1.0);
        assert_eq!(double_factorial(0), 1.0);
        assert_eq!(double_factorial(5), 15.0);
        assert_eq!(double_factorial(6), 48.0);
    }
}
