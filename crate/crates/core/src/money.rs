//! Integer currency amounts in the smallest unit (10^18 units = 1 ether).

use std::fmt;
use std::iter::Sum;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const WEI_PER_ETHER: u128 = 1_000_000_000_000_000_000;
pub const WEI_PER_GWEI: u128 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoneyParseError {
    #[error("empty amount")]
    Empty,
    #[error("invalid amount {0:?}")]
    Invalid(String),
    #[error("unknown unit {0:?} (use wei, gwei or ether)")]
    UnknownUnit(String),
    #[error("amount {0:?} does not fit")]
    Overflow(String),
}

/// Non-negative amount. Arithmetic is checked; callers decide what overflow means.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(pub u128);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn wei(n: u128) -> Money {
        Money(n)
    }

    pub const fn ether(n: u128) -> Money {
        Money(n * WEI_PER_ETHER)
    }

    pub fn checked_add(self, rhs: Money) -> Option<Money> {
        self.0.checked_add(rhs.0).map(Money)
    }

    pub fn checked_sub(self, rhs: Money) -> Option<Money> {
        self.0.checked_sub(rhs.0).map(Money)
    }

    pub fn checked_mul(self, factor: u128) -> Option<Money> {
        self.0.checked_mul(factor).map(Money)
    }

    pub fn saturating_sub(self, rhs: Money) -> Money {
        Money(self.0.saturating_sub(rhs.0))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Signed view for payoff arithmetic.
    pub fn signed(self) -> i128 {
        i128::try_from(self.0).expect("amount exceeds i128")
    }

    pub fn as_ether_f64(self) -> f64 {
        self.0 as f64 / WEI_PER_ETHER as f64
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Money({})", self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |acc, m| {
            acc.checked_add(m).expect("money sum overflow")
        })
    }
}

impl FromStr for Money {
    type Err = MoneyParseError;

    /// Accepts `123`, `123 wei`, `5 gwei`, `0.5 ether`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(MoneyParseError::Empty);
        }
        let (number, unit) = match s.split_once(char::is_whitespace) {
            Some((n, u)) => (n.trim(), u.trim()),
            None => (s, "wei"),
        };
        let (scale, decimals) = match unit {
            "wei" => (1u128, 0usize),
            "gwei" => (WEI_PER_GWEI, 9),
            "ether" | "eth" => (WEI_PER_ETHER, 18),
            other => return Err(MoneyParseError::UnknownUnit(other.to_string())),
        };
        let number = number.replace('_', "");
        let (int_part, frac_part) = match number.split_once('.') {
            Some((i, f)) => (i, f),
            None => (number.as_str(), ""),
        };
        let digits_ok = |p: &str| p.chars().all(|c| c.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty())
            || !digits_ok(int_part)
            || !digits_ok(frac_part)
            || frac_part.len() > decimals
        {
            return Err(MoneyParseError::Invalid(s.to_string()));
        }
        let overflow = || MoneyParseError::Overflow(s.to_string());
        let int: u128 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| overflow())?
        };
        let mut frac: u128 = 0;
        if !frac_part.is_empty() {
            frac = frac_part.parse().map_err(|_| overflow())?;
            frac *= 10u128.pow((decimals - frac_part.len()) as u32);
        }
        int.checked_mul(scale)
            .and_then(|v| v.checked_add(frac))
            .map(Money)
            .ok_or_else(overflow)
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct MoneyVisitor;

        impl Visitor<'_> for MoneyVisitor {
            type Value = Money;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or an amount string such as \"0.5 ether\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Money, E> {
                Ok(Money(v as u128))
            }

            fn visit_u128<E: de::Error>(self, v: u128) -> Result<Money, E> {
                Ok(Money(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Money, E> {
                u128::try_from(v)
                    .map(Money)
                    .map_err(|_| E::custom("amount must be non-negative"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Money, E> {
                v.parse().map_err(E::custom)
            }
        }

        d.deserialize_any(MoneyVisitor)
    }
}

/// Signed payoffs travel as decimal strings, like `Money`.
pub mod signed_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &i128, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i128, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
