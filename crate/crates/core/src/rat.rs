//! Exact rational time values.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{de, Deserializer, Serializer};
use std::fmt;

/// Exact rational number; always normalized with a positive denominator.
pub type Rat = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse rational {0:?}")]
pub struct ParseRatError(pub String);

pub fn rat(n: i128, d: i128) -> Rat {
    Rat::new(n, d)
}

pub fn int(n: i128) -> Rat {
    Rat::from_integer(n)
}

/// Parses `"a/b"`, `"a"` or `"-a/b"`.
pub fn parse_rat(text: &str) -> Result<Rat, ParseRatError> {
    let err = || ParseRatError(text.to_string());
    let t = text.trim();
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: i128 = n.parse().map_err(|_| err())?;
    let d: i128 = d.parse().map_err(|_| err())?;
    if d == 0 {
        return Err(err());
    }
    Ok(Rat::new(n, d))
}

pub fn format_rat(x: &Rat) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Wrapper for `Display` in the `a/b` form.
pub struct Show<'a>(pub &'a Rat);

impl fmt::Display for Show<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rat(self.0))
    }
}

/// Smallest multiple of `grid` that is `>= x`. `grid` must be positive.
pub fn ceil_to(x: &Rat, grid: &Rat) -> Rat {
    (x / grid).ceil() * grid
}

/// Largest multiple of `grid` that is `<= x`. `grid` must be positive.
pub fn floor_to(x: &Rat, grid: &Rat) -> Rat {
    (x / grid).floor() * grid
}

/// `x / grid` as an integer; panics when `x` is not a multiple of `grid`.
pub fn units(x: &Rat, grid: &Rat) -> i64 {
    let q = x / grid;
    assert!(q.is_integer(), "{} is not a multiple of {}", Show(x), Show(grid));
    i64::try_from(*q.numer()).expect("unit count fits in i64")
}

/// `floor(x / grid)` as an integer.
pub fn floor_units(x: &Rat, grid: &Rat) -> i64 {
    i64::try_from(*(x / grid).floor().numer()).expect("unit count fits in i64")
}

/// Smallest `e >= 0` with `base^e >= x`, for `base > 1`.
pub fn ceil_log(x: &Rat, base: &Rat) -> u32 {
    assert!(*base > Rat::one());
    let mut e = 0;
    let mut pow = Rat::one();
    while pow < *x {
        pow *= base;
        e += 1;
    }
    e
}

/// Geometric-then-arithmetic rounding: `base_unit·(1+eps)^ceil(log_{1+eps}(x/base_unit))`
/// followed by rounding up to a multiple of `grid`. Values below `base_unit` map to `base_unit`
/// before the arithmetic step.
pub fn geometric_round(x: &Rat, eps: &Rat, base_unit: &Rat, grid: &Rat) -> Rat {
    let factor = Rat::one() + eps;
    let e = ceil_log(&(x / base_unit), &factor);
    let geo = num_traits::pow(factor, e as usize) * base_unit;
    ceil_to(&geo, grid)
}

/// `1/eps` for `eps = 1/k`; errors for any other value.
pub fn reciprocal_int(eps: &Rat) -> Option<i128> {
    if eps.is_positive() && eps.numer().is_one() {
        Some(*eps.denom())
    } else {
        None
    }
}

/// Lowest-common-multiple denominator of a set of rationals.
pub fn common_denominator<'a>(xs: impl IntoIterator<Item = &'a Rat>) -> i128 {
    xs.into_iter().fold(1i128, |acc, x| acc.lcm(x.denom()))
}

pub fn is_zero(x: &Rat) -> bool {
    x.is_zero()
}

/// Serde helpers: rationals travel as `"a/b"` strings; integers are also accepted on input.
pub mod serde_rat {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rat(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Rat;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational as \"a/b\" or an integer")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rat, E> {
                parse_rat(v).map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rat, E> {
                Ok(int(v as i128))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rat, E> {
                Ok(int(v as i128))
            }
        }
        d.deserialize_any(V)
    }
}


/// Optional rationals in the same encoding; `None` is `null`.
pub mod serde_opt_rat {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => serde_rat::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rat>, D::Error> {
        serde_rat::deserialize(d).map(Some)
    }
}
