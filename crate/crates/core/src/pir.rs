//! Two-server read-only and write-only PIR over fixed-width block tables,
//! driven by single-bit DPF keys.

use bitvec::prelude::*;
use rand::RngCore;
use thiserror::Error;

use crate::dpf::{self, DpfError, DpfKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PirError {
    #[error("key domain {key} does not match table length {table}")]
    DomainMismatch { key: u64, table: u64 },
    #[error("block width {got} does not match table width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Dpf(#[from] DpfError),
}

/// `len` blocks of `width` bytes stored contiguously.
#[derive(Clone, PartialEq, Eq)]
pub struct BlockTable {
    width: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for BlockTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BlockTable({} x {} bytes)", self.len(), self.width)
    }
}

impl BlockTable {
    pub fn zeroed(len: usize, width: usize) -> Self {
        assert!(width > 0, "block width must be positive");
        Self { width, data: vec![0; len * width] }
    }

    pub fn from_blocks<I, B>(width: usize, blocks: I) -> Self
    where
        I: IntoIterator<Item = B>,
        B: AsRef<[u8]>,
    {
        let mut data = Vec::new();
        for b in blocks {
            assert_eq!(b.as_ref().len(), width, "block width mismatch");
            data.extend_from_slice(b.as_ref());
        }
        Self { width, data }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, i: usize) -> &[u8] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [u8] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn set(&mut self, i: usize, block: &[u8]) {
        self.get_mut(i).copy_from_slice(block);
    }

    pub fn is_zero_at(&self, i: usize) -> bool {
        self.get(i).iter().all(|&b| b == 0)
    }

    pub fn clear(&mut self) {
        self.data.fill(0);
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.width)
    }
}

pub fn pir_read_query<R: RngCore + ?Sized>(
    index: usize,
    table_len: usize,
    rng: &mut R,
) -> Result<(DpfKey, DpfKey), PirError> {
    Ok(dpf::gen(index as u64, table_len as u64, rng)?)
}

/// XOR of the blocks selected by `share`. The share is the server's own
/// view, so skipping unset rows reveals nothing to it.
pub fn inner_product(share: &BitSlice<u64, Lsb0>, table: &BlockTable) -> Result<Vec<u8>, PirError> {
    if share.len() != table.len() {
        return Err(PirError::DomainMismatch { key: share.len() as u64, table: table.len() as u64 });
    }
    let mut acc = vec![0u8; table.width()];
    for j in ones(share) {
        xor_into(&mut acc, table.get(j));
    }
    Ok(acc)
}

pub fn pir_read_answer(key: &DpfKey, table: &BlockTable) -> Result<Vec<u8>, PirError> {
    check_domain(key, table)?;
    inner_product(&key.eval_full(), table)
}

/// Indices of set bits, ascending. Reads a word at a time.
pub fn ones(share: &BitSlice<u64, Lsb0>) -> impl Iterator<Item = usize> + '_ {
    share.chunks(64).enumerate().flat_map(|(ci, chunk)| {
        let mut w: u64 = chunk.load_le();
        std::iter::from_fn(move || {
            if w == 0 {
                return None;
            }
            let b = w.trailing_zeros() as usize;
            w &= w - 1;
            Some(ci * 64 + b)
        })
    })
}

pub fn xor_into(acc: &mut [u8], other: &[u8]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a ^= b;
    }
}

pub fn pir_read_combine(r0: &[u8], r1: &[u8]) -> Vec<u8> {
    assert_eq!(r0.len(), r1.len(), "answer widths differ");
    let mut out = r0.to_vec();
    xor_into(&mut out, r1);
    out
}

pub fn pir_write_query<R: RngCore + ?Sized>(
    index: usize,
    delta: &[u8],
    table_len: usize,
    rng: &mut R,
) -> Result<(DpfKey, DpfKey, Vec<u8>), PirError> {
    let (k0, k1) = dpf::gen(index as u64, table_len as u64, rng)?;
    Ok((k0, k1, delta.to_vec()))
}

/// `table[j] ^= delta` wherever `share[j]` is set.
pub fn masked_xor_apply(
    share: &BitSlice<u64, Lsb0>,
    delta: &[u8],
    table: &mut BlockTable,
) -> Result<(), PirError> {
    if share.len() != table.len() {
        return Err(PirError::DomainMismatch { key: share.len() as u64, table: table.len() as u64 });
    }
    if delta.len() != table.width() {
        return Err(PirError::WidthMismatch { expected: table.width(), got: delta.len() });
    }
    for j in ones(share) {
        xor_into(table.get_mut(j), delta);
    }
    Ok(())
}

pub fn pir_write_apply(key: &DpfKey, delta: &[u8], table: &mut BlockTable) -> Result<(), PirError> {
    check_domain(key, table)?;
    masked_xor_apply(&key.eval_full(), delta, table)
}

pub fn pir_build(share0: &BlockTable, share1: &BlockTable) -> BlockTable {
    assert_eq!(share0.width, share1.width, "table widths differ");
    assert_eq!(share0.len(), share1.len(), "table lengths differ");
    let mut out = share0.clone();
    xor_into(&mut out.data, &share1.data);
    out
}

fn check_domain(key: &DpfKey, table: &BlockTable) -> Result<(), PirError> {
    if key.domain_size != table.len() as u64 {
        return Err(PirError::DomainMismatch { key: key.domain_size, table: table.len() as u64 });
    }
    Ok(())
}
