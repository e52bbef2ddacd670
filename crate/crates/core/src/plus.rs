//! Single-key read and write over every level above l.
//!
//! The client sends one DPF key per table over the bottom-level domain. A
//! server folds the expanded share down to a level's length and rotates it
//! by a client-chosen offset, which moves the unit to the wanted slot. The
//! tag write uses one key over four bottom-level lengths; each level reads
//! its own window of that vector.

use bitvec::prelude::*;
use thiserror::Error;

use crate::client::{unexpected, Client};
use crate::crypto::{random_nonzero_tag, Tag};
use crate::dpf::{self, BitVectorShare};
use crate::error::{Error, Result};
use crate::pir::{ones, xor_into, BlockTable, PirError};
use crate::transport::Message;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlusError {
    #[error("share length {share} is not a multiple of {len}")]
    DivisibilityViolation { share: usize, len: usize },
    #[error("fold length must be nonzero")]
    ZeroLength,
}

/// Where the element was found above level l. All zero when it was not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FoundLocator {
    pub f_tab: u8,
    pub f_len: usize,
    pub f_pos: usize,
}

impl FoundLocator {
    pub const NONE: FoundLocator = FoundLocator { f_tab: 0, f_len: 0, f_pos: 0 };

    /// Point of the tag-write key inside a domain of `4 * len_big_l`.
    pub fn write_index(&self, len_big_l: usize) -> usize {
        self.f_pos + self.f_len + self.f_tab as usize * 2 * len_big_l
    }
}

/// XORs consecutive `len`-bit chunks of `share` together.
pub fn fold_share(share: &BitSlice<u64, Lsb0>, len: usize) -> Result<BitVectorShare, PlusError> {
    if len == 0 {
        return Err(PlusError::ZeroLength);
    }
    if !share.len().is_multiple_of(len) {
        return Err(PlusError::DivisibilityViolation { share: share.len(), len });
    }
    if len.is_multiple_of(64) {
        let words = len / 64;
        let mut acc = vec![0u64; words];
        for chunk in share.chunks_exact(len) {
            for (a, w) in acc.iter_mut().zip(chunk.chunks_exact(64)) {
                *a ^= w.load_le::<u64>();
            }
        }
        return Ok(BitVec::from_vec(acc));
    }
    let mut acc = bitvec![u64, Lsb0; 0; len];
    for chunk in share.chunks_exact(len) {
        for (i, b) in chunk.iter().by_vals().enumerate() {
            if b {
                let cur = acc[i];
                acc.set(i, !cur);
            }
        }
    }
    Ok(acc)
}

/// `out[j] = bits[(j + off) mod len]`.
pub fn rotate_left_bits(bits: &BitSlice<u64, Lsb0>, off: usize) -> BitVectorShare {
    if bits.is_empty() {
        return BitVec::new();
    }
    let off = off % bits.len();
    let mut v = BitVec::with_capacity(bits.len());
    v.extend_from_bitslice(&bits[off..]);
    v.extend_from_bitslice(&bits[..off]);
    v
}

/// Inner product of `rotate_left_bits(share, off)` with `table`, without
/// materializing the rotation.
pub fn rotated_inner_product(share: &BitSlice<u64, Lsb0>, off: usize, table: &BlockTable) -> Result<Vec<u8>, PirError> {
    let len = table.len();
    if share.len() != len {
        return Err(PirError::DomainMismatch { key: share.len() as u64, table: len as u64 });
    }
    let mut acc = vec![0u8; table.width()];
    for k in ones(share) {
        xor_into(&mut acc, table.get((k + len - off % len) % len));
    }
    Ok(acc)
}

/// Slice counterpart of `rotate_left_bits`, used as a reference in tests.
pub fn rotate_left<T: Clone>(items: &[T], off: usize) -> Vec<T> {
    if items.is_empty() {
        return Vec::new();
    }
    let off = off % items.len();
    items[off..].iter().chain(&items[..off]).cloned().collect()
}

/// Offset that moves a unit at `r_pos mod len` to `target`.
pub fn read_offset(r_pos: usize, len: usize, target: usize) -> usize {
    ((r_pos % len) + len - target) % len
}

impl Client {
    /// Reads every full level above l with one key pair per table.
    pub(crate) fn op_ele_read(
        &mut self,
        tag: Tag,
        addr: u64,
        found: &mut Option<Vec<u8>>,
    ) -> Result<FoundLocator> {
        use rand::Rng;
        let params = self.state.params;
        let len_l = params.len_big_l();
        let r_pos = [self.rng.gen_range(0..len_l), self.rng.gen_range(0..len_l)];
        let (a0, a1) = dpf::gen(r_pos[0] as u64, len_l as u64, &mut self.rng)?;
        let (b0, b1) = dpf::gen(r_pos[1] as u64, len_l as u64, &mut self.rng)?;
        self.links.send(0, &Message::OpReadInit { keys: [a0, b0] })?;
        self.links.send(1, &Message::OpReadInit { keys: [a1, b1] })?;

        let mut locator = FoundLocator::NONE;
        self.last_offsets.clear();
        for level in params.ell + 1..=params.big_l {
            if !self.state.full[level as usize] {
                continue;
            }
            let len = params.table_len(level);
            let hashed = self.positions(level, tag);
            let mut targets = [0usize; 2];
            for (t, slot) in targets.iter_mut().enumerate() {
                *slot = if found.is_none() {
                    if t == 0 { hashed.0 } else { hashed.1 }
                } else {
                    self.random_position(len)
                };
            }
            let offsets = [
                read_offset(r_pos[0], len, targets[0]) as u32,
                read_offset(r_pos[1], len, targets[1]) as u32,
            ];
            self.last_offsets.push((level, offsets));
            self.links.send_both(&Message::OpReadLevel { level: level as u8, offsets })?;
            let mut resp: [[Vec<u8>; 2]; 2] = Default::default();
            for (b, r) in resp.iter_mut().enumerate() {
                match self.recv(b)? {
                    Message::OpReadResp { blocks } => *r = blocks,
                    other => return Err(unexpected(b, &other)),
                }
            }
            for t in 0..2 {
                let mut block = std::mem::take(&mut resp[0][t]);
                if block.len() != resp[1][t].len() {
                    return Err(Error::ServerDisagreement("answer widths differ"));
                }
                xor_into(&mut block, &resp[1][t]);
                if let Some(e) = self.open_block(&block)? {
                    if found.is_none() && e.addr == addr {
                        *found = Some(e.value);
                        locator = FoundLocator { f_tab: t as u8, f_len: len, f_pos: targets[t] };
                    }
                }
            }
        }
        self.last_locator = locator;
        Ok(locator)
    }

    /// Marks the slot named by `locator` with a fresh random tag share; a
    /// `NONE` locator touches no slot.
    pub(crate) fn op_tag_write(&mut self, locator: FoundLocator) -> Result<()> {
        let len_l = self.state.params.len_big_l();
        let ind = locator.write_index(len_l);
        let (k0, k1) = dpf::gen(ind as u64, 4 * len_l as u64, &mut self.rng)?;
        let tag = random_nonzero_tag(&mut self.rng);
        self.links.send(0, &Message::OpWrite { key: k0, tag })?;
        self.links.send(1, &Message::OpWrite { key: k1, tag })?;
        Ok(())
    }
}

/// Window of the tag-write vector that lands on a level of length `len`.
pub fn level_window(half: &BitSlice<u64, Lsb0>, len: usize) -> BitVectorShare {
    if 2 * len <= half.len() {
        return half[len..2 * len].to_bitvec();
    }
    let mut v = rotate_left_bits(half, len);
    v.truncate(len);
    v
}
