use ndarray::NdFloat;
use num_traits::FromPrimitive;
use std::iter::Sum;

/// Floating-point scalar used throughout the crate: `f32` or `f64`.
pub trait Scalar: NdFloat + FromPrimitive + Sum + Default {
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable in every Scalar")
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::from_f64_lossy(0.5)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `ln cosh(x)`, accurate for small `|x|` and free of overflow for large `|x|`.
pub fn ln_cosh<S: Scalar>(x: S) -> S {
    let a = x.abs();
    if a < S::from_f64_lossy(20.0) {
        let s = (a * S::half()).sinh();
        (S::two() * s * s).ln_1p()
    } else {
        a - S::from_f64_lossy(std::f64::consts::LN_2) + (-S::two() * a).exp().ln_1p()
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-x})`.
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Log-sum-exp accumulator: a partial sum `scale * e^{max}`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LogSum<S> {
    pub max: S,
    pub scaled: S,
}

impl<S: Scalar> LogSum<S> {
    pub fn empty() -> Self {
        Self {
            max: S::neg_infinity(),
            scaled: S::zero(),
        }
    }

    pub fn from_slice(xs: &[S]) -> Self {
        let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
        if max == S::neg_infinity() {
            return Self::empty();
        }
        Self {
            max,
            scaled: pairwise_sum(&xs.iter().map(|&x| (x - max).exp()).collect::<Vec<_>>()),
        }
    }

    pub fn merge(self, other: Self) -> Self {
        if self.max == S::neg_infinity() {
            return other;
        }
        if other.max == S::neg_infinity() {
            return self;
        }
        let max = self.max.max(other.max);
        Self {
            max,
            scaled: self.scaled * (self.max - max).exp() + other.scaled * (other.max - max).exp(),
        }
    }

    pub fn ln(self) -> S {
        if self.max == S::neg_infinity() {
            S::neg_infinity()
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Pairwise log-sum-exp over a list of partial sums, in index order.
pub(crate) fn merge_tree<S: Scalar>(parts: &[LogSum<S>]) -> LogSum<S> {
    match parts.len() {
        0 => LogSum::empty(),
        1 => parts[0],
        n => merge_tree(&parts[..n / 2]).merge(merge_tree(&parts[n / 2..])),
    }
}

/// Pairwise (cascade) summation with a fixed reduction order.
pub fn pairwise_sum<S: Scalar>(xs: &[S]) -> S {
    if xs.len() <= 16 {
        return xs.iter().copied().fold(S::zero(), |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_cosh_matches_direct_formula() {
        for &x in &[0.0f64, 1e-9, 0.3, -1.7, 5.0, 19.9, 20.1, 40.0] {
            let direct = x.cosh().ln();
            assert!(
                (ln_cosh(x) - direct).abs() <= 1e-14 * direct.abs().max(1.0),
                "x={x}"
            );
        }
        assert_eq!(ln_cosh(0.0f64), 0.0);
        assert!((ln_cosh(1000.0f64) - (1000.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn log_sum_merges_in_any_split() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin() * 50.0).collect();
        let whole = LogSum::from_slice(&xs).ln();
        let parts: Vec<_> = xs.chunks(7).map(LogSum::from_slice).collect();
        let split = merge_tree(&parts).ln();
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((whole - naive).abs() < 1e-12);
        assert!((split - naive).abs() < 1e-12);
    }

    #[test]
    fn softplus_and_sigmoid_are_stable() {
        assert!((softplus(800.0f64) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0f64) >= 0.0);
        assert_eq!(sigmoid(-1000.0f64), 0.0);
        assert_eq!(sigmoid(1000.0f64), 1.0);
        assert!((sigmoid(0.0f32) - 0.5).abs() < 1e-7);
    }
}
