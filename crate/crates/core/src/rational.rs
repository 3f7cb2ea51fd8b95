//! Exact rationals for values and acceptance probabilities.

use num_bigint::BigInt;
use num_rational::BigRational;

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type Rational = BigRational;

/// `num / den` in lowest terms. Panics if `den == 0`.
pub fn ratio(num: u64, den: u64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn from_int(n: u64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Parses `"3/4"`, `"1"` or `"0"`.
pub fn parse(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d == BigInt::from(0) {
                return None;
            }
            Some(BigRational::new(n, d))
        }
        None => s.parse::<BigInt>().ok().map(BigRational::from_integer),
    }
}

/// `base^exp`, exactly.
pub fn pow(base: &Rational, exp: u32) -> Rational {
    num_traits::pow(base.clone(), exp as usize)
}

/// Smallest integer `c` with `c >= delta * n` (i.e. `ceil(delta * n)`).
pub fn ceil_times(delta: &Rational, n: usize) -> u64 {
    let prod = delta * from_int(n as u64);
    let c = prod.ceil().to_integer();
    u64::try_from(c).unwrap_or(0)
}
