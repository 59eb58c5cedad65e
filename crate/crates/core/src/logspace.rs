//! Base-2 log-domain accumulation.
//!
//! Probability masses in the tree estimator reach 2^-2000 and below, far past
//! the f64 subnormal range, so they are only ever handled as log2 exponents.

/// log2(2^a + 2^b).
pub fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2
}

/// log2(2^a - 2^b) for b <= a. Returns -inf when the difference is zero and
/// NaN when `b > a`.
pub fn log2_sub(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b > a {
        return f64::NAN;
    }
    if b == a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp2()).ln_1p() / std::f64::consts::LN_2
}

/// log2 of the sum of 2^x over the iterator; -inf when empty.
pub fn log2_sum<I: IntoIterator<Item = f64>>(exponents: I) -> f64 {
    let values: Vec<f64> = exponents.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let scaled: f64 = values.iter().map(|&v| (v - max).exp2()).sum();
    max + scaled.log2()
}

/// log2(2^x - 1) for x >= 0, switching to `x` once the -1 is below f64 resolution.
pub fn log2_minus_one(x: f64) -> f64 {
    if x >= 52.0 {
        x
    } else {
        x + (-(-x).exp2()).ln_1p() / std::f64::consts::LN_2
    }
}
