//! Denominated integer amounts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Native staking denomination.
pub const ULUNA: &str = "uluna";
/// Stable denomination.
pub const UUSD: &str = "uusd";
/// Reference denomination the treasury tax cap is quoted in.
pub const USDR: &str = "usdr";

/// Micro-units per whole token.
pub const MICRO: u128 = 1_000_000;

pub fn is_valid_denom(denom: &str) -> bool {
    let mut chars = denom.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && denom.len() <= 128
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '/' | ':' | '.' | '_' | '-'))
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Coin {
    pub denom: String,
    pub amount: u128,
}

impl Coin {
    pub fn new(amount: u128, denom: impl Into<String>) -> Self {
        Coin {
            denom: denom.into(),
            amount,
        }
    }
}

impl fmt::Display for Coin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.amount, self.denom)
    }
}

impl fmt::Debug for Coin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coin({self})")
    }
}

impl FromStr for Coin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
        let (num, denom) = s.split_at(split);
        if num.is_empty() || !is_valid_denom(denom) {
            return Err(Error::Parse(format!("invalid coin `{s}`")));
        }
        let amount = num
            .parse()
            .map_err(|_| Error::Parse(format!("invalid coin amount `{num}`")))?;
        Ok(Coin::new(amount, denom))
    }
}

/// An amount that may be written as an integer or, when it does not fit a
/// 64-bit config integer, as a decimal string.
#[derive(Deserialize)]
#[serde(untagged)]
enum AmountRepr {
    Int(u64),
    Str(String),
}

impl AmountRepr {
    fn into_u128<E: serde::de::Error>(self) -> std::result::Result<u128, E> {
        match self {
            AmountRepr::Int(n) => Ok(n as u128),
            AmountRepr::Str(s) => s.trim().parse().map_err(E::custom),
        }
    }
}

/// Serde helper for `u128` fields that accept integers or strings.
pub mod amount_serde {
    use super::AmountRepr;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        AmountRepr::deserialize(d)?.into_u128()
    }
}

/// [`amount_serde`] for the values of a denom-keyed map.
pub mod amount_map_serde {
    use super::AmountRepr;
    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, u128>, s: S) -> Result<S::Ok, S::Error> {
        let mut out = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            out.serialize_entry(k, &v.to_string())?;
        }
        out.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, u128>, D::Error> {
        BTreeMap::<String, AmountRepr>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| Ok((k, v.into_u128()?)))
            .collect()
    }
}

impl<'de> Deserialize<'de> for Coin {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        struct Map {
            denom: String,
            amount: AmountRepr,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Str(String),
            Map(Map),
        }
        match Repr::deserialize(d)? {
            Repr::Str(s) => s.parse().map_err(D::Error::custom),
            Repr::Map(m) => {
                if !is_valid_denom(&m.denom) {
                    return Err(D::Error::custom(format!("invalid denom `{}`", m.denom)));
                }
                Ok(Coin::new(m.amount.into_u128()?, m.denom))
            }
        }
    }
}

/// A set of coins with at most one entry per denom and no zero entries.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Coins(BTreeMap<String, u128>);

impl Coins {
    pub fn new() -> Self {
        Coins::default()
    }

    pub fn single(amount: u128, denom: impl Into<String>) -> Self {
        let mut c = Coins::new();
        if amount > 0 {
            c.0.insert(denom.into(), amount);
        }
        c
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u128)>,
        S: Into<String>,
    {
        let mut c = Coins::new();
        for (d, a) in pairs {
            c.add_amount(&d.into(), a)?;
        }
        Ok(c)
    }

    pub fn amount_of(&self, denom: &str) -> u128 {
        self.0.get(denom).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u128)> + '_ {
        self.0.iter().map(|(d, a)| (d.as_str(), *a))
    }

    pub fn denoms(&self) -> impl Iterator<Item = &str> + '_ {
        self.0.keys().map(String::as_str)
    }

    pub fn add_amount(&mut self, denom: &str, amount: u128) -> Result<()> {
        if amount == 0 {
            return Ok(());
        }
        let slot = self.0.entry(denom.to_string()).or_insert(0);
        *slot = slot
            .checked_add(amount)
            .ok_or_else(|| Error::AmountOverflow(denom.to_string()))?;
        Ok(())
    }

    pub fn add(&mut self, other: &Coins) -> Result<()> {
        for (d, a) in other.iter() {
            self.add_amount(d, a)?;
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Coins) -> Result<Coins> {
        let mut out = self.clone();
        out.add(other)?;
        Ok(out)
    }

    /// True when every denom of `other` is covered by `self`.
    pub fn covers(&self, other: &Coins) -> bool {
        other.iter().all(|(d, a)| self.amount_of(d) >= a)
    }

    /// First denom in which `self` falls short of `other`, with (needed, held).
    pub fn shortfall(&self, other: &Coins) -> Option<(String, u128, u128)> {
        other
            .iter()
            .find(|(d, a)| self.amount_of(d) < *a)
            .map(|(d, a)| (d.to_string(), a, self.amount_of(d)))
    }

    /// Subtracts `other`; on shortfall nothing is modified.
    pub fn sub(&mut self, other: &Coins, holder: &str) -> Result<()> {
        if let Some((denom, needed, available)) = self.shortfall(other) {
            return Err(Error::InsufficientFunds {
                holder: holder.to_string(),
                denom,
                needed,
                available,
            });
        }
        for (d, a) in other.iter() {
            let left = self.amount_of(d) - a;
            if left == 0 {
                self.0.remove(d);
            } else {
                self.0.insert(d.to_string(), left);
            }
        }
        Ok(())
    }

    pub fn checked_sub(&self, other: &Coins) -> Option<Coins> {
        let mut out = self.clone();
        out.sub(other, "").ok()?;
        Some(out)
    }

    /// Saturating per-denom difference.
    pub fn saturating_sub(&self, other: &Coins) -> Coins {
        let mut out = Coins::new();
        for (d, a) in self.iter() {
            let left = a.saturating_sub(other.amount_of(d));
            if left > 0 {
                out.0.insert(d.to_string(), left);
            }
        }
        out
    }

    pub fn map_amounts(&self, mut f: impl FnMut(&str, u128) -> u128) -> Coins {
        let mut out = Coins::new();
        for (d, a) in self.iter() {
            let v = f(d, a);
            if v > 0 {
                out.0.insert(d.to_string(), v);
            }
        }
        out
    }
}

impl fmt::Display for Coins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (d, a) in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{a}{d}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Coins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coins[{self}]")
    }
}

impl FromStr for Coins {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut coins = Coins::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let c: Coin = part.parse()?;
            coins.add_amount(&c.denom, c.amount)?;
        }
        Ok(coins)
    }
}

impl From<Coin> for Coins {
    fn from(c: Coin) -> Self {
        Coins::single(c.amount, c.denom)
    }
}

impl<'de> Deserialize<'de> for Coins {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Str(String),
            List(Vec<Coin>),
            Map(BTreeMap<String, AmountRepr>),
        }
        let mut coins = Coins::new();
        match Repr::deserialize(d)? {
            Repr::Str(s) => return s.parse().map_err(D::Error::custom),
            Repr::List(list) => {
                for c in list {
                    coins.add_amount(&c.denom, c.amount).map_err(D::Error::custom)?;
                }
            }
            Repr::Map(m) => {
                for (denom, a) in m {
                    let a = a.into_u128()?;
                    coins.add_amount(&denom, a).map_err(D::Error::custom)?;
                }
            }
        }
        Ok(coins)
    }
}
