//! Exact rational numbers backed by arbitrary-precision integers.

use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num::{BigInt, BigRational, One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A reduced fraction with positive denominator.
///
/// Values whose numerator and denominator fit in an i64 are stored inline; the
/// representation is canonical, so derived equality and hashing are exact.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rational(Repr);

#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    Small(i64, i64),
    Big(BigRational),
}

impl Default for Rational {
    fn default() -> Self {
        Rational::zero()
    }
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Reduce n/d (d ≠ 0) computed in i128.
fn from_i128(n: i128, d: i128) -> Rational {
    let g = gcd_u128(n.unsigned_abs(), d.unsigned_abs()) as i128;
    let (mut n, mut d) = (n / g, d / g);
    if d < 0 {
        (n, d) = (-n, -d);
    }
    match (i64::try_from(n), i64::try_from(d)) {
        (Ok(n), Ok(d)) => Rational(Repr::Small(n, d)),
        _ => Rational(Repr::Big(BigRational::new_raw(BigInt::from(n), BigInt::from(d)))),
    }
}

fn from_big(v: BigRational) -> Rational {
    match (i64::try_from(v.numer()), i64::try_from(v.denom())) {
        (Ok(n), Ok(d)) => Rational(Repr::Small(n, d)),
        _ => Rational(Repr::Big(v)),
    }
}

impl Rational {
    pub fn zero() -> Self {
        Rational(Repr::Small(0, 1))
    }

    pub fn one() -> Self {
        Rational(Repr::Small(1, 1))
    }

    pub fn from_int(v: i64) -> Self {
        Rational(Repr::Small(v, 1))
    }

    pub fn new(num: i64, den: i64) -> Result<Self, Error> {
        if den == 0 {
            return Err(Error::DivisionByZero(format!("{num}/0")));
        }
        Ok(from_i128(num as i128, den as i128))
    }

    fn big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(b) => b.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }

    pub fn is_one(&self) -> bool {
        matches!(self.0, Repr::Small(1, 1))
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, _) => BigInt::from(*n),
            Repr::Big(b) => b.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(_, d) => BigInt::from(*d),
            Repr::Big(b) => b.denom().clone(),
        }
    }

    pub fn checked_div(&self, other: &Rational) -> Result<Rational, Error> {
        if other.is_zero() {
            return Err(Error::DivisionByZero(format!("{self} / 0")));
        }
        Ok(match (&self.0, &other.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => mul_small(*a, *b, *d, *c),
            _ => from_big(self.big() / other.big()),
        })
    }

    pub fn recip(&self) -> Result<Rational, Error> {
        Rational::one().checked_div(self)
    }

    pub fn abs(&self) -> Rational {
        if self < &Rational::zero() {
            -self
        } else {
            self.clone()
        }
    }

    /// Integer power; negative exponents fail on zero.
    pub fn pow(&self, e: i32) -> Result<Rational, Error> {
        if e < 0 {
            return self.recip()?.pow(-e);
        }
        let mut acc = Rational::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        Ok(acc)
    }
}

/// (a/b)·(c/d) with b, d > 0 up to sign.
fn mul_small(a: i64, b: i64, c: i64, d: i64) -> Rational {
    from_i128(a as i128 * c as i128, b as i128 * d as i128)
}

fn add_small(a: i64, b: i64, c: i64, d: i64) -> Rational {
    if b == d {
        return from_i128(a as i128 + c as i128, b as i128);
    }
    from_i128(a as i128 * d as i128 + c as i128 * b as i128, b as i128 * d as i128)
}

fn add(x: &Rational, y: &Rational) -> Rational {
    match (&x.0, &y.0) {
        (Repr::Small(a, b), Repr::Small(c, d)) => add_small(*a, *b, *c, *d),
        _ => from_big(x.big() + y.big()),
    }
}

fn sub(x: &Rational, y: &Rational) -> Rational {
    add(x, &-y)
}

fn mul(x: &Rational, y: &Rational) -> Rational {
    match (&x.0, &y.0) {
        (Repr::Small(a, b), Repr::Small(c, d)) => mul_small(*a, *b, *c, *d),
        _ => from_big(x.big() * y.big()),
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => (*a as i128 * *d as i128).cmp(&(*c as i128 * *b as i128)),
            _ => self.big().cmp(&other.big()),
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, 1) => write!(f, "{n}"),
            Repr::Small(n, d) => write!(f, "{n}/{d}"),
            Repr::Big(b) if b.denom().is_one() => write!(f, "{}", b.numer()),
            Repr::Big(b) => write!(f, "{}/{}", b.numer(), b.denom()),
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || Error::Parse(format!("not a rational: {s:?}"));
        match s.split_once('/') {
            None => Ok(from_big(BigRational::from_integer(s.parse::<BigInt>().map_err(|_| bad())?))),
            Some((p, q)) => {
                let p: BigInt = p.trim().parse().map_err(|_| bad())?;
                let q: BigInt = q.trim().parse().map_err(|_| bad())?;
                if q.is_zero() {
                    return Err(Error::DivisionByZero(s.to_string()));
                }
                Ok(from_big(BigRational::new(p, q)))
            }
        }
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Rational::from_int(v)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $atr:ident, $am:ident, $f:ident) => {
        impl $tr<&Rational> for &Rational {
            type Output = Rational;
            fn $m(self, o: &Rational) -> Rational {
                $f(self, o)
            }
        }
        impl $tr<Rational> for Rational {
            type Output = Rational;
            fn $m(self, o: Rational) -> Rational {
                $f(&self, &o)
            }
        }
        impl $tr<&Rational> for Rational {
            type Output = Rational;
            fn $m(self, o: &Rational) -> Rational {
                $f(&self, o)
            }
        }
        impl $tr<Rational> for &Rational {
            type Output = Rational;
            fn $m(self, o: Rational) -> Rational {
                $f(self, &o)
            }
        }
        impl $atr<&Rational> for Rational {
            fn $am(&mut self, o: &Rational) {
                *self = $f(self, o);
            }
        }
        impl $atr<Rational> for Rational {
            fn $am(&mut self, o: Rational) {
                *self = $f(self, &o);
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign, add);
binop!(Sub, sub, SubAssign, sub_assign, sub);
binop!(Mul, mul, MulAssign, mul_assign, mul);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        -&self
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match &self.0 {
            Repr::Small(n, d) => match n.checked_neg() {
                Some(m) => Rational(Repr::Small(m, *d)),
                None => from_big(-self.big()),
            },
            Repr::Big(b) => from_big(-b),
        }
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl Product for Rational {
    fn product<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::one(), |a, b| a * b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> Rational {
        Rational::new(p, q).unwrap()
    }

    #[test]
    fn small_examples() {
        assert_eq!(r(1, 2) + r(1, 3), r(5, 6));
        assert_eq!(r(2, -4).to_string(), "-1/2");
        assert_eq!(r(7, 3) * r(3, 7), Rational::one());
        assert_eq!(r(0, 5).to_string(), "0");
        assert_eq!(r(6, 3).to_string(), "2");
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert!(r(1, 2).checked_div(&Rational::zero()).is_err());
        assert!(Rational::new(1, 0).is_err());
        assert!("3/0".parse::<Rational>().is_err());
        assert!(Rational::zero().pow(-1).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for s in ["0", "-7", "5/6", "-123456789012345678901234567891/2"] {
            let v: Rational = s.parse().unwrap();
            assert_eq!(v.to_string(), s);
        }
        assert_eq!("4/-6".parse::<Rational>().unwrap(), r(-2, 3));
        assert!("x".parse::<Rational>().is_err());
    }

    #[test]
    fn serde_uses_strings() {
        let v = r(-3, 4);
        let js = serde_json::to_string(&v).unwrap();
        assert_eq!(js, "\"-3/4\"");
        let back: Rational = serde_json::from_str(&js).unwrap();
        assert_eq!(back, v);
    }

    fn arb() -> impl Strategy<Value = Rational> {
        (-1000i64..1000, 1i64..60).prop_map(|(p, q)| r(p, q))
    }

    #[test]
    fn overflow_promotes_and_demotes() {
        let big = Rational::from_int(i64::MAX);
        let sq = &big * &big;
        assert_eq!(sq.to_string(), "85070591730234615847396907784232501249");
        assert_eq!(sq.checked_div(&big).unwrap(), big);
        assert_eq!(-Rational::from_int(i64::MIN), &Rational::from_int(i64::MAX) + &Rational::one());
        assert!(Rational::from_int(i64::MIN) < r(-1, 3));
        assert_eq!((&sq - &sq), Rational::zero());
        assert!((&sq - &sq).is_zero());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn field_axioms(a in arb(), b in arb(), c in arb()) {
            prop_assert_eq!(&(&a + &b) - &b, a.clone());
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            if !b.is_zero() {
                prop_assert_eq!(&a.checked_div(&b).unwrap() * &b, a.clone());
            }
            prop_assert!(a.denom() > BigInt::zero());
            prop_assert_eq!(num::Integer::gcd(&a.numer(), &a.denom()).is_one() || a.is_zero(), true);
        }

        #[test]
        fn agrees_with_big_arithmetic(a in any::<i64>(), b in 1i64.., c in any::<i64>(), d in 1i64..) {
            let (x, y) = (r(a, b), r(c, d));
            let bx = BigRational::new(BigInt::from(a), BigInt::from(b));
            let by = BigRational::new(BigInt::from(c), BigInt::from(d));
            prop_assert_eq!(&x + &y, from_big(&bx + &by));
            prop_assert_eq!(&x - &y, from_big(&bx - &by));
            prop_assert_eq!(&x * &y, from_big(&bx * &by));
            prop_assert_eq!(x.cmp(&y), bx.cmp(&by));
            if !y.is_zero() {
                prop_assert_eq!(x.checked_div(&y).unwrap(), from_big(&bx / &by));
            }
        }
    }
}
