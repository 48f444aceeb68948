//! Exact rational arithmetic helpers.
//!
//! Every energy, knapsack weight and capacity in this crate is a
//! [`Rational`]. Floating point only enters through weight tensors, which are
//! converted exactly (every finite `f64` is a dyadic rational).

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn from_count(v: u64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Exact conversion of a finite float.
pub fn from_f64(v: f64) -> Rational {
    Rational::from_float(v).expect("non-finite float has no rational value")
}

pub fn to_f64(v: &Rational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Smallest integer `>= v`.
pub fn ceil_int(v: &Rational) -> BigInt {
    v.ceil().to_integer()
}

pub fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Largest positive rational dividing every nonzero argument; `None` when all
/// arguments are zero.
pub fn gcd_all<'a, I: IntoIterator<Item = &'a Rational>>(values: I) -> Option<Rational> {
    let mut acc: Option<Rational> = None;
    for v in values {
        if v.is_zero() {
            continue;
        }
        let v = v.abs();
        acc = Some(match acc {
            None => v,
            Some(a) => gcd_pair(&a, &v),
        });
    }
    acc
}

/// gcd(a/b, c/d) = gcd(a*d, c*b) / (b*d), reduced.
fn gcd_pair(x: &Rational, y: &Rational) -> Rational {
    let (a, b) = (x.numer(), x.denom());
    let (c, d) = (y.numer(), y.denom());
    let num = (a * d).gcd(&(c * b));
    Rational::new(num, b * d)
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a, I: IntoIterator<Item = &'a Rational>>(values: I) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Parses `"3"`, `"-3/4"`, `"0.125"` or `"1e-3"` into an exact rational.
pub fn parse(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty rational".into());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n
            .trim()
            .parse()
            .map_err(|_| format!("bad numerator in {s:?}"))?;
        let d: BigInt = d
            .trim()
            .parse()
            .map_err(|_| format!("bad denominator in {s:?}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = s[i + 1..]
                .parse()
                .map_err(|_| format!("bad exponent in {s:?}"))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(format!("no digits in {s:?}"));
    }
    if !whole
        .chars()
        .chain(frac.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(format!("not a number: {s:?}"));
    }
    let all: BigInt = format!("{whole}{frac}0").parse::<BigInt>().unwrap() / 10;
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        Rational::from_integer(all * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(all, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Canonical text form: `"7"` or `"-7/3"`.
pub fn format(v: &Rational) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Serde adapter: writes canonical strings, reads JSON integers, floats
/// (through their shortest decimal form) or rational strings.
pub mod serde_q {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        d.deserialize_any(QVisitor)
    }

    pub(super) struct QVisitor;

    impl Visitor<'_> for QVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or a rational string such as \"3/4\"")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(int(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            Ok(Rational::from_integer(BigInt::from(v)))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            if !v.is_finite() {
                return Err(E::custom("non-finite number"));
            }
            parse(&v.to_string()).map_err(E::custom)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            parse(v).map_err(E::custom)
        }
    }
}

pub mod serde_q_vec {
    use super::*;
    use serde::de::SeqAccess;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for q in v {
            seq.serialize_element(&format(q))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        struct SeqVisitor;
        impl<'de> Visitor<'de> for SeqVisitor {
            type Value = Vec<Rational>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a list of numbers or rational strings")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(q) = seq.next_element::<Wrapped>()? {
                    out.push(q.0);
                }
                Ok(out)
            }
        }
        d.deserialize_seq(SeqVisitor)
    }

    struct Wrapped(Rational);

    impl<'de> serde::Deserialize<'de> for Wrapped {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            d.deserialize_any(serde_q::QVisitor).map(Wrapped)
        }
    }
}

/// Optional rational; `null` or absent reads as `None`.
pub mod serde_q_opt {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(q) => s.serialize_some(&format(q)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        struct OptVisitor;
        impl<'de> Visitor<'de> for OptVisitor {
            type Value = Option<Rational>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("null, a number or a rational string")
            }
            fn visit_none<E: de::Error>(self) -> Result<Self::Value, E> {
                Ok(None)
            }
            fn visit_unit<E: de::Error>(self) -> Result<Self::Value, E> {
                Ok(None)
            }
            fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<Self::Value, D::Error> {
                d.deserialize_any(serde_q::QVisitor).map(Some)
            }
        }
        d.deserialize_option(OptVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse("3").unwrap(), int(3));
        assert_eq!(parse("-3/4").unwrap(), ratio(-3, 4));
        assert_eq!(parse("0.125").unwrap(), ratio(1, 8));
        assert_eq!(parse("1e-3").unwrap(), ratio(1, 1000));
        assert_eq!(parse("2.5E2").unwrap(), int(250));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
    }

    #[test]
    fn gcd_of_rationals() {
        let v = [int(0), ratio(1, 3), ratio(2, 3)];
        assert_eq!(gcd_all(&v).unwrap(), ratio(1, 3));
        let v = [ratio(11, 2), ratio(11, 2)];
        assert_eq!(gcd_all(&v).unwrap(), ratio(11, 2));
        let v = [ratio(1, 2), ratio(1, 3)];
        assert_eq!(gcd_all(&v).unwrap(), ratio(1, 6));
        assert!(gcd_all(&[int(0)]).is_none());
    }

    #[test]
    fn float_conversion_is_exact() {
        assert_eq!(from_f64(0.5), ratio(1, 2));
        assert_eq!(from_f64(-3.0), int(-3));
        let q = from_f64(0.1);
        assert_eq!(to_f64(&q), 0.1);
    }

    #[test]
    fn format_round_trip() {
        for s in ["7", "-7/3", "0"] {
            assert_eq!(format(&parse(s).unwrap()), s);
        }
    }
}
