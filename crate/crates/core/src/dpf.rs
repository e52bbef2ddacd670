//! Two-party distributed point function with a single-bit payload.
//!
//! Tree-based construction over `ceil(log2 n)` levels with 128-bit seeds. The
//! length-doubling PRG is fixed-key AES-128 in Matyas-Meyer-Oseas mode, one
//! key per child, so full-domain expansion encrypts whole tree levels in
//! batches.

use std::sync::OnceLock;

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::{Aes128, Block};
use bitvec::prelude::*;
use rand::{Rng, RngCore};
use thiserror::Error;

/// Per-party expansion of a key: one share bit per domain index.
pub type BitVectorShare = BitVec<u64, Lsb0>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DpfError {
    #[error("index {index} outside domain of size {domain}")]
    IndexOutOfDomain { index: u64, domain: u64 },
    #[error("domain size must be at least 1")]
    EmptyDomain,
    #[error("domain size {0} exceeds the u32 wire limit")]
    DomainTooLarge(u64),
    #[error("malformed key encoding")]
    MalformedKey,
}

const PRG_KEY_LEFT: [u8; 16] = *b"dpf-prg-left-key";
const PRG_KEY_RIGHT: [u8; 16] = *b"dpf-prg-rightkey";

/// Subtrees of this many levels are expanded one at a time in `eval_full`,
/// bounding scratch memory independently of the domain size.
const SUBTREE_BITS: u32 = 12;

struct Prg {
    left: Aes128,
    right: Aes128,
}

fn prg() -> &'static Prg {
    static PRG: OnceLock<Prg> = OnceLock::new();
    PRG.get_or_init(|| Prg {
        left: Aes128::new(GenericArray::from_slice(&PRG_KEY_LEFT)),
        right: Aes128::new(GenericArray::from_slice(&PRG_KEY_RIGHT)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Expanded {
    s_left: u128,
    t_left: bool,
    s_right: u128,
    t_right: bool,
}

fn split(x: u128) -> (u128, bool) {
    (x & !1, x & 1 == 1)
}

fn expand(seed: u128) -> Expanded {
    let prg = prg();
    let mut l = GenericArray::from(seed.to_le_bytes());
    let mut r = l;
    prg.left.encrypt_block(&mut l);
    prg.right.encrypt_block(&mut r);
    let (s_left, t_left) = split(u128::from_le_bytes(l.into()) ^ seed);
    let (s_right, t_right) = split(u128::from_le_bytes(r.into()) ^ seed);
    Expanded { s_left, t_left, s_right, t_right }
}

/// Output bit derived from a leaf seed.
fn convert(seed: u128) -> bool {
    (seed >> 1) & 1 == 1
}

/// Depth of the evaluation tree for a domain of `n` points.
pub fn tree_depth(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrectionWord {
    pub seed: u128,
    pub t_left: bool,
    pub t_right: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DpfKey {
    pub party: u8,
    pub domain_size: u64,
    pub root_seed: u128,
    pub correction_words: Vec<CorrectionWord>,
    pub final_correction: bool,
}

/// Serialized key length for a domain of `n` points.
pub fn key_len(n: u64) -> usize {
    1 + 4 + 16 + 17 * tree_depth(n) as usize + 1
}

/// Keys for the point function that is 1 at `point_index` and 0 elsewhere.
pub fn gen<R: RngCore + ?Sized>(
    point_index: u64,
    domain_size: u64,
    rng: &mut R,
) -> Result<(DpfKey, DpfKey), DpfError> {
    if domain_size == 0 {
        return Err(DpfError::EmptyDomain);
    }
    if domain_size > u64::from(u32::MAX) {
        return Err(DpfError::DomainTooLarge(domain_size));
    }
    if point_index >= domain_size {
        return Err(DpfError::IndexOutOfDomain { index: point_index, domain: domain_size });
    }
    let depth = tree_depth(domain_size);
    let roots = [rng.gen::<u128>() & !1, rng.gen::<u128>() & !1];
    let mut s = roots;
    let mut t = [false, true];
    let mut cws = Vec::with_capacity(depth as usize);
    for level in 0..depth {
        let bit = (point_index >> (depth - 1 - level)) & 1 == 1;
        let e = [expand(s[0]), expand(s[1])];
        let t_left_cw = e[0].t_left ^ e[1].t_left ^ bit ^ true;
        let t_right_cw = e[0].t_right ^ e[1].t_right ^ bit;
        let seed_cw = if bit {
            e[0].s_left ^ e[1].s_left
        } else {
            e[0].s_right ^ e[1].s_right
        };
        for b in 0..2 {
            let (s_keep, t_keep, t_cw) = if bit {
                (e[b].s_right, e[b].t_right, t_right_cw)
            } else {
                (e[b].s_left, e[b].t_left, t_left_cw)
            };
            s[b] = s_keep ^ if t[b] { seed_cw } else { 0 };
            t[b] = t_keep ^ (t[b] & t_cw);
        }
        cws.push(CorrectionWord { seed: seed_cw, t_left: t_left_cw, t_right: t_right_cw });
    }
    let final_correction = convert(s[0]) ^ convert(s[1]) ^ true;
    let key = |party: u8| DpfKey {
        party,
        domain_size,
        root_seed: roots[party as usize],
        correction_words: cws.clone(),
        final_correction,
    };
    Ok((key(0), key(1)))
}

impl DpfKey {
    pub fn depth(&self) -> u32 {
        self.correction_words.len() as u32
    }

    fn step(&self, seed: u128, t: bool, level: usize, right: bool) -> (u128, bool) {
        let e = expand(seed);
        let cw = &self.correction_words[level];
        let (s, tt, t_cw) = if right {
            (e.s_right, e.t_right, cw.t_right)
        } else {
            (e.s_left, e.t_left, cw.t_left)
        };
        if t {
            (s ^ cw.seed, tt ^ t_cw)
        } else {
            (s, tt)
        }
    }

    fn leaf_bit(&self, seed: u128, t: bool) -> bool {
        convert(seed) ^ (t & self.final_correction)
    }

    /// This party's share of the point function at `index`.
    pub fn eval(&self, index: u64) -> Result<bool, DpfError> {
        if index >= self.domain_size {
            return Err(DpfError::IndexOutOfDomain { index, domain: self.domain_size });
        }
        let depth = self.depth();
        let (mut s, mut t) = (self.root_seed, self.party == 1);
        for level in 0..depth {
            let right = (index >> (depth - 1 - level)) & 1 == 1;
            (s, t) = self.step(s, t, level as usize, right);
        }
        Ok(self.leaf_bit(s, t))
    }

    /// Shares for every index of the domain, by level-order tree expansion.
    pub fn eval_full(&self) -> BitVectorShare {
        let n = self.domain_size;
        let depth = self.depth();
        let mut words = vec![0u64; n.div_ceil(64) as usize];
        let top = depth.saturating_sub(SUBTREE_BITS);
        let sub = depth - top;
        let mut scratch = Vec::new();

        let mut seeds = vec![self.root_seed];
        let mut ts = vec![self.party == 1];
        let (mut next_s, mut next_t) = (Vec::new(), Vec::new());
        for level in 0..top {
            let needed = n.div_ceil(1 << (depth - level - 1)) as usize;
            self.expand_level(&seeds, &ts, level as usize, needed, &mut next_s, &mut next_t, &mut scratch);
            std::mem::swap(&mut seeds, &mut next_s);
            std::mem::swap(&mut ts, &mut next_t);
        }

        let mut sub_seeds = Vec::with_capacity(1 << sub);
        let mut sub_ts = Vec::with_capacity(1 << sub);
        for (node, (&s, &t)) in seeds.iter().zip(&ts).enumerate() {
            let base = (node as u64) << sub;
            let leaves = (n - base).min(1 << sub);
            sub_seeds.clear();
            sub_ts.clear();
            sub_seeds.push(s);
            sub_ts.push(t);
            for k in 0..sub {
                let level = top + k;
                let needed = leaves.div_ceil(1 << (sub - k - 1)) as usize;
                self.expand_level(&sub_seeds, &sub_ts, level as usize, needed, &mut next_s, &mut next_t, &mut scratch);
                std::mem::swap(&mut sub_seeds, &mut next_s);
                std::mem::swap(&mut sub_ts, &mut next_t);
            }
            for (j, (&s, &t)) in sub_seeds.iter().zip(&sub_ts).enumerate() {
                let idx = base as usize + j;
                words[idx / 64] |= u64::from(self.leaf_bit(s, t)) << (idx % 64);
            }
        }
        let mut out = BitVectorShare::from_vec(words);
        out.truncate(n as usize);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn expand_level(
        &self,
        seeds: &[u128],
        ts: &[bool],
        level: usize,
        needed: usize,
        out_s: &mut Vec<u128>,
        out_t: &mut Vec<bool>,
        scratch: &mut Vec<Block>,
    ) {
        let prg = prg();
        let cw = &self.correction_words[level];
        let m = seeds.len();
        scratch.clear();
        scratch.extend(seeds.iter().map(|s| Block::from(s.to_le_bytes())));
        scratch.extend_from_within(..);
        let (left, right) = scratch.split_at_mut(m);
        prg.left.encrypt_blocks(left);
        prg.right.encrypt_blocks(right);
        out_s.clear();
        out_t.clear();
        for i in 0..m {
            let mask = u128::from(ts[i]).wrapping_neg();
            let l = u128::from_le_bytes(left[i].into()) ^ seeds[i];
            let r = u128::from_le_bytes(right[i].into()) ^ seeds[i];
            out_s.push((l & !1) ^ (cw.seed & mask));
            out_t.push((l & 1 == 1) ^ (ts[i] & cw.t_left));
            out_s.push((r & !1) ^ (cw.seed & mask));
            out_t.push((r & 1 == 1) ^ (ts[i] & cw.t_right));
        }
        out_s.truncate(needed);
        out_t.truncate(needed);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(key_len(self.domain_size));
        self.write_to(&mut out);
        out
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.push(self.party);
        out.extend_from_slice(&(self.domain_size as u32).to_le_bytes());
        out.extend_from_slice(&self.root_seed.to_le_bytes());
        for cw in &self.correction_words {
            out.extend_from_slice(&cw.seed.to_le_bytes());
            out.push(u8::from(cw.t_left) | (u8::from(cw.t_right) << 1));
        }
        out.push(u8::from(self.final_correction));
    }

    /// Parses one key from the front of `bytes`, returning it and the bytes consumed.
    pub fn read_from(bytes: &[u8]) -> Result<(Self, usize), DpfError> {
        if bytes.len() < 5 {
            return Err(DpfError::MalformedKey);
        }
        let party = bytes[0];
        let domain_size = u64::from(u32::from_le_bytes(bytes[1..5].try_into().unwrap()));
        if party > 1 || domain_size == 0 {
            return Err(DpfError::MalformedKey);
        }
        let len = key_len(domain_size);
        if bytes.len() < len {
            return Err(DpfError::MalformedKey);
        }
        let u128_at = |at: usize| u128::from_le_bytes(bytes[at..at + 16].try_into().unwrap());
        let root_seed = u128_at(5);
        let depth = tree_depth(domain_size) as usize;
        let mut correction_words = Vec::with_capacity(depth);
        for level in 0..depth {
            let at = 21 + 17 * level;
            let flags = bytes[at + 16];
            if flags > 3 {
                return Err(DpfError::MalformedKey);
            }
            correction_words.push(CorrectionWord {
                seed: u128_at(at),
                t_left: flags & 1 == 1,
                t_right: flags & 2 == 2,
            });
        }
        let final_correction = match bytes[len - 1] {
            0 => false,
            1 => true,
            _ => return Err(DpfError::MalformedKey),
        };
        let key = DpfKey { party, domain_size, root_seed, correction_words, final_correction };
        Ok((key, len))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DpfError> {
        match Self::read_from(bytes)? {
            (key, used) if used == bytes.len() => Ok(key),
            _ => Err(DpfError::MalformedKey),
        }
    }
}
