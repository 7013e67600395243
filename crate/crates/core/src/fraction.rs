//! Exact non-negative rationals used for every rate, weight and threshold.
//!
//! Rates arrive as decimal strings (`"0.012"`, `"0.500000000000000000"`) or
//! as `n/d` and are stored reduced. Multiplying a rate by a micro-unit
//! amount always truncates toward zero.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

const MAX_DECIMAL_PLACES: usize = 30;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction(Ratio<u128>);

impl Fraction {
    pub const ZERO: Fraction = Fraction(Ratio::new_raw(0, 1));
    pub const ONE: Fraction = Fraction(Ratio::new_raw(1, 1));

    /// Panics if `denom` is zero.
    pub fn new(numer: u128, denom: u128) -> Self {
        Fraction(Ratio::new(numer, denom))
    }

    pub fn from_integer(n: u128) -> Self {
        Fraction(Ratio::from_integer(n))
    }

    pub fn numer(&self) -> u128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u128 {
        *self.0.denom()
    }

    pub fn ratio(&self) -> Ratio<u128> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_at_most_one(&self) -> bool {
        self.numer() <= self.denom()
    }

    /// `floor(self * amount)`, saturating at `u128::MAX`.
    pub fn mul_floor(&self, amount: u128) -> u128 {
        let (n, d) = (self.numer(), self.denom());
        if let Some(p) = amount.checked_mul(n) {
            return p / d;
        }
        // Split amount = q*d + r so the large part never overflows when n <= d.
        let (q, r) = amount.div_rem(&d);
        if let Some(hi) = q.checked_mul(n) {
            if let Some(lo) = r.checked_mul(n) {
                if let Some(total) = hi.checked_add(lo / d) {
                    return total;
                }
            }
        }
        let wide = BigUint::from(amount) * BigUint::from(n) / BigUint::from(d);
        wide.to_u128().unwrap_or(u128::MAX)
    }

    pub fn checked_add(&self, other: &Fraction) -> Option<Fraction> {
        let l = num_integer::lcm(self.denom(), other.denom());
        let a = self.numer().checked_mul(l / self.denom())?;
        let b = other.numer().checked_mul(l / other.denom())?;
        Some(Fraction(Ratio::new(a.checked_add(b)?, l)))
    }

    pub fn checked_sub(&self, other: &Fraction) -> Option<Fraction> {
        if self < other {
            return None;
        }
        let l = num_integer::lcm(self.denom(), other.denom());
        let a = self.numer().checked_mul(l / self.denom())?;
        let b = other.numer().checked_mul(l / other.denom())?;
        Some(Fraction(Ratio::new(a - b, l)))
    }

    pub fn checked_mul(&self, other: &Fraction) -> Option<Fraction> {
        // cross-reduce before multiplying
        let g1 = self.numer().gcd(&other.denom()).max(1);
        let g2 = other.numer().gcd(&self.denom()).max(1);
        let n = (self.numer() / g1).checked_mul(other.numer() / g2)?;
        let d = (self.denom() / g2).checked_mul(other.denom() / g1)?;
        Some(Fraction(Ratio::new(n, d)))
    }

    pub fn abs_diff(&self, other: &Fraction) -> Fraction {
        match self.cmp(other) {
            Ordering::Less => other.checked_sub(self),
            _ => self.checked_sub(other),
        }
        .unwrap_or(Fraction::ONE)
    }

    pub fn clamp_to(&self, lo: Fraction, hi: Fraction) -> Fraction {
        if *self < lo {
            lo
        } else if *self > hi {
            hi
        } else {
            *self
        }
    }

    pub fn to_f32(&self) -> f32 {
        self.numer() as f32 / self.denom() as f32
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// Decimal rendering when the denominator only has factors 2 and 5.
    fn terminating_decimal(&self) -> Option<String> {
        let mut d = self.denom();
        let (mut twos, mut fives) = (0u32, 0u32);
        while d.is_multiple_of(2) {
            d /= 2;
            twos += 1;
        }
        while d.is_multiple_of(5) {
            d /= 5;
            fives += 1;
        }
        if d != 1 {
            return None;
        }
        let places = twos.max(fives);
        let scale = 10u128.checked_pow(places)?;
        let scaled = self.numer().checked_mul(scale / self.denom())?;
        let int = scaled / scale;
        let frac = scaled % scale;
        if places == 0 {
            Some(int.to_string())
        } else {
            Some(format!("{int}.{frac:0width$}", width = places as usize))
        }
    }
}

impl Default for Fraction {
    fn default() -> Self {
        Fraction::ZERO
    }
}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.terminating_decimal() {
            Some(s) => f.write_str(&s),
            None => write!(f, "{}/{}", self.numer(), self.denom()),
        }
    }
}

impl fmt::Debug for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fraction({self})")
    }
}

impl FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || Error::Parse(format!("invalid fraction `{s}`"));
        if let Some((n, d)) = s.split_once('/') {
            let n: u128 = n.trim().parse().map_err(|_| bad())?;
            let d: u128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Fraction::new(n, d));
        }
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let frac = frac.trim_end_matches('0');
        if frac.len() > MAX_DECIMAL_PLACES {
            return Err(bad());
        }
        let scale = 10u128.pow(frac.len() as u32);
        let int: u128 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_v: u128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let numer = int
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac_v))
            .ok_or_else(bad)?;
        Ok(Fraction::new(numer, scale))
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if serializer.is_human_readable() {
            serializer.serialize_str(&self.to_string())
        } else {
            (self.numer(), self.denom()).serialize(serializer)
        }
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        if deserializer.is_human_readable() {
            #[derive(Deserialize)]
            #[serde(untagged)]
            enum Repr {
                Str(String),
                Int(u64),
            }
            match Repr::deserialize(deserializer)? {
                Repr::Str(s) => s.parse().map_err(D::Error::custom),
                Repr::Int(n) => Ok(Fraction::from_integer(n as u128)),
            }
        } else {
            let (n, d) = <(u128, u128)>::deserialize(deserializer)?;
            if d == 0 {
                return Err(D::Error::custom("zero denominator"));
            }
            Ok(Fraction::new(n, d))
        }
    }
}

/// A scalar in which a voting-power share can be compared against a cap.
///
/// The exact implementation is [`Fraction`]; `f32` reproduces the
/// single-precision comparison used by the deployed chain code.
pub trait PowerShare: PartialOrd + Sized {
    fn share(part: u128, whole: u128) -> Self;
    fn from_fraction(f: Fraction) -> Self;

    /// `part / whole > cap`. An empty whole counts as a full share.
    fn exceeds(part: u128, whole: u128, cap: Fraction) -> bool {
        if whole == 0 {
            return Self::from_fraction(Fraction::ONE) > Self::from_fraction(cap);
        }
        Self::share(part, whole) > Self::from_fraction(cap)
    }
}

impl PowerShare for Fraction {
    fn share(part: u128, whole: u128) -> Self {
        Fraction::new(part, whole)
    }

    fn from_fraction(f: Fraction) -> Self {
        f
    }

    fn exceeds(part: u128, whole: u128, cap: Fraction) -> bool {
        if whole == 0 {
            return Fraction::ONE > cap;
        }
        // part/whole > n/d  <=>  part*d > n*whole, evaluated without rounding
        let lhs = BigUint::from(part) * BigUint::from(cap.denom());
        let rhs = BigUint::from(cap.numer()) * BigUint::from(whole);
        lhs > rhs
    }
}

impl PowerShare for f32 {
    fn share(part: u128, whole: u128) -> Self {
        part as f32 / whole as f32
    }

    fn from_fraction(f: Fraction) -> Self {
        f.to_f32()
    }
}
