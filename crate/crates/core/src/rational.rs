use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QrlError, Result};

/// Non-negative rational number num/den in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(QrlError::Domain("zero denominator".into()));
        }
        let g = gcd(num, den).max(1);
        Ok(Rational { num: num / g, den: den / g })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// True when 0 < self < 1.
    pub fn in_unit_interval(&self) -> bool {
        self.num > 0 && self.num < self.den
    }

    /// ⌈2^{n·self}⌉ in exact arithmetic.
    pub fn ceil_pow2(&self, n: u64) -> BigUint {
        // smallest k with k^den ≥ 2^(n·num)
        let target = BigUint::one() << (n * self.num) as usize;
        let den = self.den as u32;
        let bits = (n * self.num).div_ceil(self.den) as usize + 1;
        let (mut lo, mut hi) = (BigUint::zero(), BigUint::one() << bits);
        while lo < hi {
            let mid: BigUint = (&lo + &hi) >> 1usize;
            if mid.pow(den) >= target {
                hi = mid;
            } else {
                lo = mid + 1u32;
            }
        }
        lo
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Rational {
    type Err = QrlError;
    /// Accepts `a/b` or a finite decimal such as `0.25`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || QrlError::Parse(format!("invalid rational `{s}`"));
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let a = a.trim().parse().map_err(|_| bad())?;
            let b = b.trim().parse().map_err(|_| bad())?;
            return Rational::new(a, b).map_err(|_| bad());
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        let f: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int.checked_mul(den).and_then(|x| x.checked_add(f)).ok_or_else(bad)?;
        Rational::new(num, den)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(serde_json::Number),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse(),
            Raw::Number(n) => n.to_string().parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}
