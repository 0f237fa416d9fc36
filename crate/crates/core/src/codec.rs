//! Base64 helpers for byte fields in the JSON file formats.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

use crate::error::{Error, Result};

pub fn encode(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn decode_array<const N: usize>(text: &str) -> Result<[u8; N]> {
    let bytes = STANDARD
        .decode(text.trim())
        .map_err(|e| Error::KeyMaterial(e.to_string()))?;
    bytes
        .as_slice()
        .try_into()
        .map_err(|_| Error::KeyMaterial(format!("expected {N} bytes, got {}", bytes.len())))
}

macro_rules! base64_newtype {
    ($name:ident, $len:expr) => {
        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&$crate::codec::encode(&self.0))
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = <String as serde::Deserialize>::deserialize(d)?;
                $crate::codec::decode_array::<$len>(&text)
                    .map($name)
                    .map_err(serde::de::Error::custom)
            }
        }
    };
}

pub(crate) use base64_newtype;
