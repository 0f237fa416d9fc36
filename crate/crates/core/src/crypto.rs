//! Ed25519 keys and deterministic credential signatures.
//!
//! Credentials are signed over a canonical byte encoding so that two
//! credentials with the same pair set always produce the same message, and
//! therefore (Ed25519 being deterministic) the same signature.

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::codec::base64_newtype;
use crate::error::{Error, Result};
use crate::model::Credential;

pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;
pub const SEED_LEN: usize = 32;

const PAIR_SEPARATOR: u8 = 0x1F;
const VALUE_SEPARATOR: u8 = 0x3D;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

base64_newtype!(PublicKey, PUBLIC_KEY_LEN);
base64_newtype!(Signature, SIGNATURE_LEN);

impl std::fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublicKey({})", crate::codec::encode(&self.0))
    }
}

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Signature({})", crate::codec::encode(&self.0))
    }
}

/// An Ed25519 signing key together with its verification key.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn from_seed(seed: &[u8; SEED_LEN]) -> Self {
        KeyPair {
            signing: SigningKey::from_bytes(seed),
        }
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    /// The 32-byte secret seed; the public key is derivable from it.
    pub fn secret_seed(&self) -> [u8; SEED_LEN] {
        self.signing.to_bytes()
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("pk", &self.public_key())
            .finish_non_exhaustive()
    }
}

/// Generates a key pair, deterministically when a seed is supplied.
pub fn keygen(seed: Option<&[u8]>) -> Result<KeyPair> {
    let seed: [u8; SEED_LEN] = match seed {
        Some(bytes) => bytes.try_into().map_err(|_| Error::SeedLength(bytes.len()))?,
        None => {
            let mut buf = [0u8; SEED_LEN];
            rand::rngs::OsRng.fill_bytes(&mut buf);
            buf
        }
    };
    Ok(KeyPair::from_seed(&seed))
}

/// A credential plus a signature over its canonical encoding.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedCredential {
    pub credential: Credential,
    pub signature: Signature,
    pub signer_pk: PublicKey,
}

fn check_reserved(text: &str) -> Result<()> {
    for byte in [PAIR_SEPARATOR, VALUE_SEPARATOR] {
        if text.as_bytes().contains(&byte) {
            return Err(Error::ReservedByte {
                byte,
                text: text.to_string(),
            });
        }
    }
    Ok(())
}

/// Canonical byte encoding of a credential.
///
/// Layout: pair count as a 4-byte big-endian integer, then `name=value`
/// segments sorted bytewise by (name, value) and joined by 0x1F.
pub fn canonical_encode(c: &Credential) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(4 + c.len() * 16);
    out.extend_from_slice(&(c.len() as u32).to_be_bytes());
    // Credential iterates in (name, value) byte order already.
    for (i, (name, value)) in c.iter().enumerate() {
        check_reserved(name)?;
        check_reserved(value)?;
        if i > 0 {
            out.push(PAIR_SEPARATOR);
        }
        out.extend_from_slice(name.as_bytes());
        out.push(VALUE_SEPARATOR);
        out.extend_from_slice(value.as_bytes());
    }
    Ok(out)
}

pub fn sign_credential(keys: &KeyPair, c: &Credential) -> Result<SignedCredential> {
    let message = canonical_encode(c)?;
    let signature = keys.signing.sign(&message);
    Ok(SignedCredential {
        credential: c.clone(),
        signature: Signature(signature.to_bytes()),
        signer_pk: keys.public_key(),
    })
}

/// True iff `sc.signature` is valid for `sc.credential` under `pk`.
pub fn verify_credential(pk: &PublicKey, sc: &SignedCredential) -> bool {
    let Ok(message) = canonical_encode(&sc.credential) else {
        return false;
    };
    verify_message(pk, &message, &sc.signature)
}

pub(crate) fn verify_message(pk: &PublicKey, message: &[u8], sig: &Signature) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(&pk.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    key.verify(message, &sig).is_ok()
}
