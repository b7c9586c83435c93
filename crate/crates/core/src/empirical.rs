//! Exact empirical CDFs and generalized-inverse quantile functions.
//!
//! Conventions are pinned so that every counterfactual formula reduces to
//! integer counting over sorted arrays:
//!
//! - `F(y) = #{x <= y} / n`, a right-continuous step function.
//! - `Q(tau) = inf { x in sample : F(x) >= tau }` for `tau` in `(0, 1]`,
//!   the left-continuous generalized inverse. `Q(0)` is the sample minimum.
//!
//! No interpolation or smoothing is applied anywhere.

use crate::error::{Error, Result};

/// An immutable, ascending multiset of finite outcome values.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
}

impl SortedSample {
    /// Sorts `values` ascending. Ties are kept.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(bad));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; a `SortedSample` holds at least one value.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Arithmetic mean, summed in ascending order.
    ///
    /// This is exactly `(1/n) * sum_i Q(i/n)`, i.e. the integral of the step
    /// quantile function over `(0, 1]`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Number of values `<= y`.
    pub fn count_le(&self, y: f64) -> usize {
        self.values.partition_point(|&v| v <= y)
    }

    /// Number of values `< y`.
    pub fn count_lt(&self, y: f64) -> usize {
        self.values.partition_point(|&v| v < y)
    }

    /// Empirical CDF at `y`.
    pub fn cdf(&self, y: f64) -> f64 {
        self.count_le(y) as f64 / self.values.len() as f64
    }

    /// Generalized-inverse quantile at `tau`.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidProbability(tau));
        }
        Ok(self.values[self.lower_rank(tau) - 1])
    }

    /// Smallest `k` in `1..=n` with `k/n >= tau`; `1` when `tau <= 0`.
    ///
    /// The comparison is made against `k as f64 / n as f64`, the same
    /// expression `cdf` produces, so `Q(F(x))` never drifts by one rank
    /// through rounding.
    fn lower_rank(&self, tau: f64) -> usize {
        let n = self.values.len();
        if tau <= 0.0 {
            return 1;
        }
        let nf = n as f64;
        let mut k = ((tau * nf).ceil() as usize).clamp(1, n);
        while k > 1 && (k - 1) as f64 / nf >= tau {
            k -= 1;
        }
        while k < n && (k as f64 / nf) < tau {
            k += 1;
        }
        k
    }

    /// Right-continuous inverse `inf { x : F(x) > t }`; `None` stands for
    /// `+inf` (no sample point has `F(x) > t`).
    pub fn upper_quantile(&self, t: f64) -> Option<f64> {
        let n = self.values.len();
        let nf = n as f64;
        // smallest k with k/n > t; values[k-1] has F >= k/n, and every
        // strictly smaller value has F <= (k-1)/n <= t
        let mut k = ((t * nf).floor().max(0.0) as usize).min(n);
        while k > 0 && (k as f64 / nf) > t {
            k -= 1;
        }
        while k < n && (k as f64 / nf) <= t {
            k += 1;
        }
        if k == 0 || (k as f64 / nf) <= t {
            return None;
        }
        Some(self.values[k - 1])
    }

    pub fn ecdf(&self) -> EmpiricalCdf<'_> {
        EmpiricalCdf { base: self }
    }

    pub fn quantile_fn(&self) -> QuantileFunction<'_> {
        QuantileFunction { base: self }
    }

    /// Applies `f` to every value and re-sorts.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Borrowed view evaluating the empirical CDF of a sample.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalCdf<'a> {
    base: &'a SortedSample,
}

impl EmpiricalCdf<'_> {
    pub fn eval(&self, y: f64) -> f64 {
        self.base.cdf(y)
    }

    pub fn sample(&self) -> &SortedSample {
        self.base
    }
}

/// Borrowed view evaluating the quantile function of a sample.
#[derive(Debug, Clone, Copy)]
pub struct QuantileFunction<'a> {
    base: &'a SortedSample,
}

impl QuantileFunction<'_> {
    pub fn eval(&self, tau: f64) -> Result<f64> {
        self.base.quantile(tau)
    }

    pub fn sample(&self) -> &SortedSample {
        self.base
    }
}

/// `Q_to(F_from(y))`. When `F_from(y) == 0` the result is the minimum of
/// the `Q_to` sample.
pub fn rank_map(y: f64, from: EmpiricalCdf<'_>, to: QuantileFunction<'_>) -> f64 {
    let tau = from.eval(y);
    to.base.values[to.base.lower_rank(tau) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> SortedSample {
        SortedSample::from_slice(v).unwrap()
    }

    /// Brute-force generalized inverse straight from the definition.
    fn brute_quantile(v: &[f64], tau: f64) -> f64 {
        let n = v.len() as f64;
        v.iter()
            .copied()
            .filter(|&y| v.iter().filter(|&&x| x <= y).count() as f64 / n >= tau)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn build_sorted_examples() {
        assert_eq!(s(&[3.0, 1.0, 2.0]).values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s(&[5.0]).values(), &[5.0]);
        assert_eq!(s(&[2.0, 2.0, 1.0]).values(), &[1.0, 2.0, 2.0]);
    }

    #[test]
    fn build_sorted_errors() {
        assert!(matches!(SortedSample::new(vec![]), Err(Error::EmptySample)));
        assert!(matches!(
            SortedSample::new(vec![1.0, f64::NAN]),
            Err(Error::InvalidValue(_))
        ));
        assert!(matches!(
            SortedSample::new(vec![f64::INFINITY]),
            Err(Error::InvalidValue(_))
        ));
    }

    #[test]
    fn cdf_examples() {
        let a = s(&[1.0, 2.0, 3.0]);
        assert_eq!(a.cdf(2.0), 2.0 / 3.0);
        assert_eq!(a.cdf(0.5), 0.0);
        assert_eq!(a.cdf(3.0), 1.0);
        assert_eq!(a.cdf(1e9), 1.0);
        assert_eq!(s(&[1.0, 2.0, 2.0]).cdf(2.0), 1.0);
    }

    #[test]
    fn quantile_examples() {
        let a = s(&[1.0, 2.0, 3.0]);
        assert_eq!(a.quantile(0.5).unwrap(), 2.0);
        assert_eq!(a.quantile(1.0).unwrap(), 3.0);
        assert_eq!(a.quantile(0.0).unwrap(), 1.0);
        let b = s(&[4.0, 6.0]);
        assert_eq!(brute_quantile(&[4.0, 6.0], 0.5), 4.0);
        assert_eq!(b.quantile(0.5).unwrap(), 4.0);
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        let a = s(&[1.0, 2.0]);
        assert!(matches!(a.quantile(-0.1), Err(Error::InvalidProbability(_))));
        assert!(matches!(a.quantile(1.5), Err(Error::InvalidProbability(_))));
        assert!(a.quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_matches_brute_force_on_awkward_sizes() {
        for n in 1..40usize {
            let v: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64).collect();
            let sample = SortedSample::from_slice(&v).unwrap();
            for k in 0..=n {
                for tau in [k as f64 / n as f64, (k as f64 + 0.5) / n as f64] {
                    if tau > 0.0 && tau <= 1.0 {
                        assert_eq!(sample.quantile(tau).unwrap(), brute_quantile(&v, tau));
                    }
                }
            }
        }
    }

    #[test]
    fn rank_map_examples() {
        let from = s(&[1.0, 2.0, 3.0]);
        let to = s(&[2.0, 4.0, 6.0]);
        assert_eq!(rank_map(2.0, from.ecdf(), to.quantile_fn()), 4.0);
        assert_eq!(rank_map(3.0, from.ecdf(), to.quantile_fn()), 6.0);
        // below the support: F = 0 maps to the target minimum
        assert_eq!(rank_map(0.0, from.ecdf(), to.quantile_fn()), 2.0);
        for &y in from.values() {
            assert_eq!(rank_map(y, from.ecdf(), from.quantile_fn()), y);
        }
    }

    #[test]
    fn mean_examples() {
        assert_eq!(s(&[4.0, 6.0]).mean(), 5.0);
        assert_eq!(s(&[1.0, 2.0, 3.0]).mean(), 2.0);
        assert_eq!(s(&[5.0, 7.0]).mean(), 6.0);
    }

    #[test]
    fn upper_quantile_is_right_inverse() {
        let a = s(&[1.0, 2.0, 2.0, 5.0]);
        assert_eq!(a.upper_quantile(0.0), Some(1.0));
        assert_eq!(a.upper_quantile(0.25), Some(2.0));
        assert_eq!(a.upper_quantile(0.5), Some(2.0));
        assert_eq!(a.upper_quantile(0.75), Some(5.0));
        assert_eq!(a.upper_quantile(0.9), Some(5.0));
        assert_eq!(a.upper_quantile(1.0), None);
    }
}
