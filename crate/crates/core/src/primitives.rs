//! Fixed-width chain primitives with lowercase `0x` hex serialization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use tiny_keccak::{Hasher, Keccak};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HexError {
    #[error("missing 0x prefix in {0:?}")]
    MissingPrefix(String),
    #[error("invalid hex digits in {0:?}")]
    InvalidDigits(String),
    #[error("expected {expected} bytes, got {got} in {text:?}")]
    Length { expected: usize, got: usize, text: String },
}

/// Decodes a `0x`-prefixed hex string of arbitrary length. Odd-length input is left padded.
pub fn decode_hex(text: &str) -> Result<Vec<u8>, HexError> {
    let body = text
        .strip_prefix("0x")
        .or_else(|| text.strip_prefix("0X"))
        .ok_or_else(|| HexError::MissingPrefix(text.to_string()))?;
    let padded;
    let body = if body.len() % 2 == 1 {
        padded = format!("0{body}");
        padded.as_str()
    } else {
        body
    };
    hex::decode(body).map_err(|_| HexError::InvalidDigits(text.to_string()))
}

pub fn encode_hex(bytes: &[u8]) -> String {
    format!("0x{}", hex::encode(bytes))
}

pub fn keccak256(data: &[u8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut hasher = Keccak::v256();
    hasher.update(data);
    hasher.finalize(&mut out);
    out
}

macro_rules! fixed_bytes {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;
            pub const ZERO: Self = Self([0u8; $len]);

            pub fn from_slice(bytes: &[u8]) -> Option<Self> {
                <[u8; $len]>::try_from(bytes).ok().map(Self)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }
        }

        impl FromStr for $name {
            type Err = HexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let bytes = decode_hex(s)?;
                Self::from_slice(&bytes).ok_or(HexError::Length {
                    expected: $len,
                    got: bytes.len(),
                    text: s.to_string(),
                })
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("0x")?;
                for b in &self.0 {
                    write!(f, "{b:02x}")?;
                }
                Ok(())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(self, f)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let text = String::deserialize(deserializer)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes!(
    /// 20-byte account address.
    Address,
    20
);
fixed_bytes!(
    /// 32-byte word: transaction hashes, log topics.
    B256,
    32
);
fixed_bytes!(
    /// First four bytes of calldata.
    Selector,
    4
);

pub type TxHash = B256;

impl Selector {
    /// Selector of a canonical function signature such as `transfer(address,uint256)`.
    pub fn of_signature(signature: &str) -> Self {
        let hash = keccak256(signature.as_bytes());
        Self([hash[0], hash[1], hash[2], hash[3]])
    }
}

impl B256 {
    /// Topic hash of a canonical event signature such as `Transfer(address,address,uint256)`.
    pub fn of_signature(signature: &str) -> Self {
        Self(keccak256(signature.as_bytes()))
    }
}

/// Unsigned 256-bit quantity (wei), stored big-endian. Serialized as a minimal hex quantity.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Wei(pub [u8; 32]);

impl Wei {
    pub const ZERO: Self = Self([0u8; 32]);

    pub fn from_u128(value: u128) -> Self {
        let mut out = [0u8; 32];
        out[16..].copy_from_slice(&value.to_be_bytes());
        Self(out)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|b| *b == 0)
    }
}

impl FromStr for Wei {
    type Err = HexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = decode_hex(s)?;
        let start = bytes.iter().position(|b| *b != 0).unwrap_or(bytes.len());
        let significant = &bytes[start..];
        if significant.len() > 32 {
            return Err(HexError::Length { expected: 32, got: significant.len(), text: s.to_string() });
        }
        let mut out = [0u8; 32];
        out[32 - significant.len()..].copy_from_slice(significant);
        Ok(Self(out))
    }
}

impl fmt::Display for Wei {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = hex::encode(self.0);
        let trimmed = digits.trim_start_matches('0');
        if trimmed.is_empty() {
            f.write_str("0x0")
        } else {
            write!(f, "0x{trimmed}")
        }
    }
}

impl fmt::Debug for Wei {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Wei {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Wei {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Hex-quantity helpers for `u64` fields (`"0x1b4"`). Plain JSON numbers are accepted on input.
pub mod quantity {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &u64, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&format_args!("{value:#x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(n) => Ok(n),
            Raw::Text(t) => parse(&t).map_err(serde::de::Error::custom),
        }
    }

    pub fn parse(text: &str) -> Result<u64, String> {
        match text.strip_prefix("0x") {
            Some(h) => u64::from_str_radix(h, 16).map_err(|e| format!("bad quantity {text:?}: {e}")),
            None => text.parse().map_err(|e| format!("bad quantity {text:?}: {e}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transfer_selector_matches_erc20() {
        assert_eq!(Selector::of_signature("transfer(address,uint256)").to_string(), "0xa9059cbb");
        assert_eq!(Selector::of_signature("transferFrom(address,address,uint256)").to_string(), "0x23b872dd");
    }

    #[test]
    fn transfer_topic_matches_erc20() {
        assert_eq!(
            B256::of_signature("Transfer(address,address,uint256)").to_string(),
            "0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"
        );
    }

    #[test]
    fn address_parse_is_case_insensitive_and_prints_lowercase() {
        let a: Address = "0xDeaDbeefdEAdbeefdEadbEEFdeadbeEFdEaDbeeF".parse().unwrap();
        assert_eq!(a.to_string(), "0xdeadbeefdeadbeefdeadbeefdeadbeefdeadbeef");
        assert!("deadbeef".parse::<Address>().is_err());
        assert!("0x1234".parse::<Address>().is_err());
    }

    #[test]
    fn wei_quantity_roundtrip() {
        let w: Wei = "0xde0b6b3a7640000".parse().unwrap();
        assert_eq!(w, Wei::from_u128(1_000_000_000_000_000_000));
        assert_eq!(w.to_string(), "0xde0b6b3a7640000");
        assert_eq!("0x0".parse::<Wei>().unwrap().to_string(), "0x0");
        assert_eq!("0x".parse::<Wei>().unwrap(), Wei::ZERO);
    }
}
