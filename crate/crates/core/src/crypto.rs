//! Keyed primitives: the PRF that derives tags, level hash keys and cuckoo
//! positions, XOR tag sharing, and authenticated encryption of elements.
//!
//! The PRF is AES-256-CMAC. Every call is prefixed with a domain byte so the
//! tag stream keyed by `tk` and the level-key stream keyed by `lk` can never
//! collide, and with the input count so variable-length inputs stay
//! prefix-free.

use std::fmt;

use aes::Aes256;
use aes_gcm::aead::{AeadInPlace, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use cmac::{Cmac, Mac};
use rand::{CryptoRng, Rng, RngCore};
use thiserror::Error;

pub const KEY_BYTES: usize = 32;
pub const TAG_BYTES: usize = 16;
pub const NONCE_BYTES: usize = 12;
pub const AUTH_TAG_BYTES: usize = 16;
pub const ADDR_BYTES: usize = 8;

/// Addresses with the top bit set name dummy elements.
pub const DUMMY_ADDR_BIT: u64 = 1 << 63;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("element ciphertext failed authentication")]
    AuthFailure,
    #[error("ciphertext is {got} bytes, expected {expected}")]
    BadCiphertextLength { expected: usize, got: usize },
    #[error("element value is {got} bytes, expected {expected}")]
    BadValueLength { expected: usize, got: usize },
}

/// 256 bits of client-only key material.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey([u8; KEY_BYTES]);

impl SecretKey {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; KEY_BYTES];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn from_bytes(bytes: [u8; KEY_BYTES]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_BYTES] {
        &self.0
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// Domain separation byte mixed into every PRF call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Tag = 1,
    LevelKey = 2,
    Hash0 = 3,
    Hash1 = 4,
}

fn prf_half(mac: &Cmac<Aes256>, half: u8, domain: Domain, inputs: &[u64]) -> [u8; 16] {
    let mut mac = mac.clone();
    mac.update(&[half, domain as u8]);
    mac.update(&(inputs.len() as u32).to_le_bytes());
    for x in inputs {
        mac.update(&x.to_le_bytes());
    }
    mac.finalize().into_bytes().into()
}

fn keyed_mac(key: &[u8; KEY_BYTES]) -> Cmac<Aes256> {
    <Cmac<Aes256> as Mac>::new_from_slice(key).expect("CMAC accepts 32-byte keys")
}

/// 256-bit PRF output for `(domain, inputs)` under `key`.
pub fn prf(key: &SecretKey, domain: Domain, inputs: &[u64]) -> [u8; 32] {
    let mac = keyed_mac(&key.0);
    let mut out = [0u8; 32];
    out[..16].copy_from_slice(&prf_half(&mac, 0, domain, inputs));
    out[16..].copy_from_slice(&prf_half(&mac, 1, domain, inputs));
    out
}

/// A 128-bit address label. Zero is reserved for empty tag slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Tag(pub u128);

impl Tag {
    pub const ZERO: Tag = Tag(0);

    pub fn to_bytes(self) -> [u8; TAG_BYTES] {
        self.0.to_le_bytes()
    }

    pub fn from_bytes(bytes: [u8; TAG_BYTES]) -> Self {
        Tag(u128::from_le_bytes(bytes))
    }

    pub fn from_slice(bytes: &[u8]) -> Self {
        let mut buf = [0u8; TAG_BYTES];
        buf.copy_from_slice(&bytes[..TAG_BYTES]);
        Self::from_bytes(buf)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl std::ops::BitXor for Tag {
    type Output = Tag;
    fn bitxor(self, rhs: Tag) -> Tag {
        Tag(self.0 ^ rhs.0)
    }
}

/// Derives the tag of `addr` under the tag key. Never returns the zero tag.
pub fn derive_tag(tk: &SecretKey, addr: u64) -> Tag {
    let mac = keyed_mac(&tk.0);
    let tag = Tag(u128::from_le_bytes(prf_half(&mac, 0, Domain::Tag, &[addr])));
    if !tag.is_zero() {
        return tag;
    }
    (1u64..)
        .map(|retry| Tag(u128::from_le_bytes(prf_half(&mac, 0, Domain::Tag, &[addr, retry]))))
        .find(|t| !t.is_zero())
        .expect("unbounded retry")
}

/// Key for one level's cuckoo hash functions in one epoch.
#[derive(Clone)]
pub struct HashKey {
    bytes: [u8; KEY_BYTES],
    mac: Cmac<Aes256>,
}

impl HashKey {
    pub fn from_bytes(bytes: [u8; KEY_BYTES]) -> Self {
        Self { bytes, mac: keyed_mac(&bytes) }
    }

    pub fn as_bytes(&self) -> &[u8; KEY_BYTES] {
        &self.bytes
    }
}

impl PartialEq for HashKey {
    fn eq(&self, other: &Self) -> bool {
        self.bytes == other.bytes
    }
}

impl Eq for HashKey {}

impl fmt::Debug for HashKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("HashKey(..)")
    }
}

pub fn derive_level_key(lk: &SecretKey, level: u32, epoch: u64) -> HashKey {
    HashKey::from_bytes(prf(lk, Domain::LevelKey, &[u64::from(level), epoch]))
}

/// Candidate positions of `tag` in the two tables of length `table_len`.
/// Both lie in `[1, table_len)`; slot 0 is never a real position.
pub fn hash_positions(hk: &HashKey, tag: Tag, table_len: usize) -> (usize, usize) {
    assert!(table_len >= 2, "cuckoo tables need at least two slots");
    let words = [tag.0 as u64, (tag.0 >> 64) as u64];
    let span = (table_len - 1) as u128;
    let pick = |domain| {
        let r = u128::from_le_bytes(prf_half(&hk.mac, 0, domain, &words));
        1 + (r % span) as usize
    };
    (pick(Domain::Hash0), pick(Domain::Hash1))
}

/// Splits `tag` into two XOR shares; the first share is uniform.
pub fn share_tag<R: RngCore + ?Sized>(tag: Tag, rng: &mut R) -> (Tag, Tag) {
    let s0 = Tag(rng.gen());
    (s0, s0 ^ tag)
}

pub fn random_nonzero_tag<R: RngCore + ?Sized>(rng: &mut R) -> Tag {
    loop {
        let t = Tag(rng.gen());
        if !t.is_zero() {
            return t;
        }
    }
}

/// A logical record. Dummy elements carry an address in the dummy namespace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub addr: u64,
    pub value: Vec<u8>,
}

impl Element {
    pub fn new(addr: u64, value: Vec<u8>) -> Self {
        Self { addr, value }
    }

    pub fn dummy(addr_suffix: u64, block_size: usize) -> Self {
        Self { addr: DUMMY_ADDR_BIT | addr_suffix, value: vec![0; block_size] }
    }

    pub fn is_dummy(&self) -> bool {
        self.addr & DUMMY_ADDR_BIT != 0
    }
}

/// Byte length of a sealed element with a `block_size`-byte value.
pub const fn ciphertext_len(block_size: usize) -> usize {
    NONCE_BYTES + ADDR_BYTES + block_size + AUTH_TAG_BYTES
}

/// `nonce ∥ AES-GCM(addr_le ∥ value) ∥ auth tag`.
#[derive(Clone, PartialEq, Eq)]
pub struct ElementCiphertext(Vec<u8>);

impl ElementCiphertext {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn nonce(&self) -> &[u8] {
        &self.0[..NONCE_BYTES]
    }

    pub fn body(&self) -> &[u8] {
        &self.0[NONCE_BYTES..self.0.len() - AUTH_TAG_BYTES]
    }

    pub fn auth_tag(&self) -> &[u8] {
        &self.0[self.0.len() - AUTH_TAG_BYTES..]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for ElementCiphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ElementCiphertext({} bytes)", self.0.len())
    }
}

/// Element encryption with a cached key schedule.
#[derive(Clone)]
pub struct ElementCipher {
    aead: Aes256Gcm,
    block_size: usize,
}

impl ElementCipher {
    pub fn new(ek: &SecretKey, block_size: usize) -> Self {
        let aead = Aes256Gcm::new_from_slice(ek.as_bytes()).expect("32-byte AES-GCM key");
        Self { aead, block_size }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn seal<R: RngCore + ?Sized>(
        &self,
        element: &Element,
        rng: &mut R,
    ) -> Result<ElementCiphertext, CryptoError> {
        if element.value.len() != self.block_size {
            return Err(CryptoError::BadValueLength {
                expected: self.block_size,
                got: element.value.len(),
            });
        }
        let mut out = vec![0u8; ciphertext_len(self.block_size)];
        rng.fill_bytes(&mut out[..NONCE_BYTES]);
        let (nonce, rest) = out.split_at_mut(NONCE_BYTES);
        let (body, tag_out) = rest.split_at_mut(ADDR_BYTES + self.block_size);
        body[..ADDR_BYTES].copy_from_slice(&element.addr.to_le_bytes());
        body[ADDR_BYTES..].copy_from_slice(&element.value);
        let tag = self
            .aead
            .encrypt_in_place_detached(Nonce::from_slice(nonce), &[], body)
            .expect("AES-GCM encryption of bounded buffer");
        tag_out.copy_from_slice(&tag);
        Ok(ElementCiphertext(out))
    }

    pub fn open(&self, ct: &[u8]) -> Result<Element, CryptoError> {
        let expected = ciphertext_len(self.block_size);
        if ct.len() != expected {
            return Err(CryptoError::BadCiphertextLength { expected, got: ct.len() });
        }
        let nonce = Nonce::from_slice(&ct[..NONCE_BYTES]);
        let mut body = ct[NONCE_BYTES..expected - AUTH_TAG_BYTES].to_vec();
        let tag = aes_gcm::Tag::from_slice(&ct[expected - AUTH_TAG_BYTES..]);
        self.aead
            .decrypt_in_place_detached(nonce, &[], &mut body, tag)
            .map_err(|_| CryptoError::AuthFailure)?;
        let mut addr = [0u8; ADDR_BYTES];
        addr.copy_from_slice(&body[..ADDR_BYTES]);
        Ok(Element { addr: u64::from_le_bytes(addr), value: body.split_off(ADDR_BYTES) })
    }
}

pub fn seal_element<R: RngCore + ?Sized>(
    ek: &SecretKey,
    element: &Element,
    rng: &mut R,
) -> Result<ElementCiphertext, CryptoError> {
    ElementCipher::new(ek, element.value.len()).seal(element, rng)
}

pub fn open_element(
    ek: &SecretKey,
    ct: &ElementCiphertext,
    block_size: usize,
) -> Result<Element, CryptoError> {
    ElementCipher::new(ek, block_size).open(ct.as_bytes())
}
