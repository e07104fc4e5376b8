//! Hash lock, result protection and enclave sealing primitives.
//!
//! SHA-256 is the real thing (the contract compares real digests). Result
//! protection is ChaCha20-Poly1305 with a detached Ed25519 signature over the
//! ciphertext, so third parties can check integrity without the decryption key.

use std::fmt;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("expected {expected} bytes, got {actual}")]
    WrongLength { expected: usize, actual: usize },
    #[error("tamper detected")]
    TamperDetected,
    #[error("result was protected for a different key")]
    WrongKey,
    #[error("sealed blob belongs to a different enclave identity")]
    IdentityMismatch,
    #[error("invalid hex: {0}")]
    Hex(String),
}

macro_rules! bytes32 {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; 32]);

        impl $name {
            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
                let raw = hex::decode(s).map_err(|e| CryptoError::Hex(e.to_string()))?;
                Self::from_slice(&raw)
            }

            pub fn from_slice(raw: &[u8]) -> Result<Self, CryptoError> {
                let bytes: [u8; 32] = raw.try_into().map_err(|_| CryptoError::WrongLength {
                    expected: 32,
                    actual: raw.len(),
                })?;
                Ok(Self(bytes))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

bytes32!(
    /// Preimage of a task's hash lock.
    Secret
);
bytes32!(
    /// SHA-256 output.
    Digest
);

impl Secret {
    /// Draws a fresh secret, skipping the all-zero sentinel.
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        loop {
            let mut bytes = [0u8; 32];
            rng.fill_bytes(&mut bytes);
            if bytes != [0u8; 32] {
                return Secret(bytes);
            }
        }
    }

    pub fn digest(&self) -> Digest {
        sha256(&self.0)
    }
}

/// Same seed, same secret.
pub fn generate_secret(seed: u64) -> Secret {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Secret::random(&mut rng)
}

pub fn sha256(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Hash lock digest of a 32-byte secret.
pub fn hash_secret(secret: &[u8]) -> Result<Digest, CryptoError> {
    if secret.len() != 32 {
        return Err(CryptoError::WrongLength {
            expected: 32,
            actual: secret.len(),
        });
    }
    Ok(sha256(secret))
}

/// Key material a requestor hands to the enclave for one task.
#[derive(Clone)]
pub struct ResultKeys {
    encryption_key: [u8; 32],
    signing_key: SigningKey,
}

impl fmt::Debug for ResultKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResultKeys")
            .field("key_id", &hex::encode(self.key_id()))
            .finish_non_exhaustive()
    }
}

impl ResultKeys {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut encryption_key = [0u8; 32];
        rng.fill_bytes(&mut encryption_key);
        let mut signing_seed = [0u8; 32];
        rng.fill_bytes(&mut signing_seed);
        ResultKeys {
            encryption_key,
            signing_key: SigningKey::from_bytes(&signing_seed),
        }
    }

    /// Public fingerprint of the encryption key.
    pub fn key_id(&self) -> [u8; 8] {
        let mut h = Sha256::new();
        h.update(b"spoc-result-key-id");
        h.update(self.encryption_key);
        let d: [u8; 32] = h.finalize().into();
        d[..8].try_into().expect("slice of 8")
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.signing_key.verifying_key()
    }

    /// Raw key material, for sealing enclave state.
    pub fn to_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(&self.encryption_key);
        out[32..].copy_from_slice(&self.signing_key.to_bytes());
        out
    }

    pub fn from_bytes(raw: &[u8; 64]) -> Self {
        let encryption_key: [u8; 32] = raw[..32].try_into().expect("32 bytes");
        let signing_seed: [u8; 32] = raw[32..].try_into().expect("32 bytes");
        ResultKeys {
            encryption_key,
            signing_key: SigningKey::from_bytes(&signing_seed),
        }
    }
}

/// Encrypted, signed task output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectedResult {
    #[serde(with = "hex::serde")]
    pub key_id: [u8; 8],
    #[serde(with = "hex::serde")]
    pub nonce: [u8; 12],
    #[serde(with = "hex::serde")]
    pub ciphertext: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub signature: Vec<u8>,
}

impl ProtectedResult {
    fn signed_bytes(key_id: &[u8; 8], nonce: &[u8; 12], ciphertext: &[u8]) -> Vec<u8> {
        let mut msg = Vec::with_capacity(8 + 12 + ciphertext.len() + 16);
        msg.extend_from_slice(b"spoc-result-v1");
        msg.extend_from_slice(key_id);
        msg.extend_from_slice(nonce);
        msg.extend_from_slice(ciphertext);
        msg
    }

    /// Third-party integrity check; needs only the public verifying key.
    pub fn verify_signature(&self, key: &VerifyingKey) -> bool {
        let Ok(sig) = Signature::from_slice(&self.signature) else {
            return false;
        };
        let msg = Self::signed_bytes(&self.key_id, &self.nonce, &self.ciphertext);
        key.verify(&msg, &sig).is_ok()
    }
}

pub fn protect_result<R: RngCore + ?Sized>(
    plaintext: &[u8],
    keys: &ResultKeys,
    rng: &mut R,
) -> ProtectedResult {
    let key_id = keys.key_id();
    let mut nonce = [0u8; 12];
    rng.fill_bytes(&mut nonce);
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&keys.encryption_key));
    let ciphertext = cipher
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: plaintext,
                aad: &key_id,
            },
        )
        .expect("chacha20poly1305 encryption is infallible for in-memory buffers");
    let signature =
        keys.signing_key
            .sign(&ProtectedResult::signed_bytes(&key_id, &nonce, &ciphertext));
    ProtectedResult {
        key_id,
        nonce,
        ciphertext,
        signature: signature.to_bytes().to_vec(),
    }
}

pub fn open_result(protected: &ProtectedResult, keys: &ResultKeys) -> Result<Vec<u8>, CryptoError> {
    if protected.key_id != keys.key_id() {
        return Err(CryptoError::WrongKey);
    }
    if !protected.verify_signature(&keys.verifying_key()) {
        return Err(CryptoError::TamperDetected);
    }
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&keys.encryption_key));
    cipher
        .decrypt(
            Nonce::from_slice(&protected.nonce),
            Payload {
                msg: &protected.ciphertext,
                aad: &protected.key_id,
            },
        )
        .map_err(|_| CryptoError::TamperDetected)
}

/// Per-platform root from which enclave seal keys are derived.
#[derive(Clone)]
pub struct PlatformKey([u8; 32]);

impl PlatformKey {
    pub fn new(root: [u8; 32]) -> Self {
        PlatformKey(root)
    }

    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5ea1_5ea1_5ea1_5ea1);
        let mut root = [0u8; 32];
        rng.fill_bytes(&mut root);
        PlatformKey(root)
    }

    fn seal_key(&self, identity: &Digest) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"spoc-seal-key");
        h.update(self.0);
        h.update(identity.0);
        h.finalize().into()
    }
}

impl fmt::Debug for PlatformKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PlatformKey(..)")
    }
}

/// Enclave state encrypted under an identity-bound seal key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealedBlob {
    #[serde(with = "hex::serde")]
    pub nonce: [u8; 12],
    #[serde(with = "hex::serde")]
    pub ciphertext: Vec<u8>,
}

pub fn seal<R: RngCore + ?Sized>(
    platform: &PlatformKey,
    identity: &Digest,
    state: &[u8],
    rng: &mut R,
) -> SealedBlob {
    let mut nonce = [0u8; 12];
    rng.fill_bytes(&mut nonce);
    let key = platform.seal_key(identity);
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&key));
    let ciphertext = cipher
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: state,
                aad: &identity.0,
            },
        )
        .expect("chacha20poly1305 encryption is infallible for in-memory buffers");
    SealedBlob { nonce, ciphertext }
}

pub fn unseal(
    platform: &PlatformKey,
    identity: &Digest,
    blob: &SealedBlob,
) -> Result<Vec<u8>, CryptoError> {
    let key = platform.seal_key(identity);
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&key));
    cipher
        .decrypt(
            Nonce::from_slice(&blob.nonce),
            Payload {
                msg: &blob.ciphertext,
                aad: &identity.0,
            },
        )
        .map_err(|_| CryptoError::IdentityMismatch)
}
