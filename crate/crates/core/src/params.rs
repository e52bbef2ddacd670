//! Level sizes and capacities derived from the database size.

use thiserror::Error;

use crate::crypto::ciphertext_len;

pub const MIN_LOG_N: u32 = 8;
pub const MAX_LOG_N: u32 = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamsError {
    #[error("unsupported database size {0}: need a power of two in [2^8, 2^24] with l + 1 < L")]
    UnsupportedN(u64),
    #[error("block size must be positive")]
    ZeroBlockSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Params {
    /// Number of logical blocks.
    pub n: u64,
    /// Value bytes per block.
    pub block_size: usize,
    /// `L = log2 N`, the bottom level.
    pub big_l: u32,
    /// `l = ceil(2 log2 L)`, the smallest level.
    pub ell: u32,
    /// Buffer length, stash bound and level-l rebuild period.
    pub p: usize,
    /// Element capacity of level l.
    pub cap_ell: usize,
    /// Table length of level l.
    pub len_ell: usize,
    pub max_evictions: usize,
}

fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

pub fn params_from_n(n: u64, block_size: usize) -> Result<Params, ParamsError> {
    if block_size == 0 {
        return Err(ParamsError::ZeroBlockSize);
    }
    if !n.is_power_of_two() || !((1 << MIN_LOG_N)..=(1 << MAX_LOG_N)).contains(&n) {
        return Err(ParamsError::UnsupportedN(n));
    }
    let big_l = n.trailing_zeros();
    let ell = ceil_log2(u64::from(big_l * big_l));
    if ell + 1 >= big_l {
        return Err(ParamsError::UnsupportedN(n));
    }
    let p = 1usize << ceil_log2(u64::from(big_l));
    let cap_ell = (1usize << (ell + 1)) + p * (big_l - ell) as usize;
    let len_ell = (2 * cap_ell).next_power_of_two();
    Ok(Params {
        n,
        block_size,
        big_l,
        ell,
        p,
        cap_ell,
        len_ell,
        max_evictions: 4 * big_l as usize,
    })
}

impl Params {
    /// Per-table length of `level`.
    pub fn table_len(&self, level: u32) -> usize {
        assert!(self.has_level(level), "level {level} out of range");
        if level == self.ell {
            self.len_ell
        } else {
            1 << (level + 1)
        }
    }

    pub fn has_level(&self, level: u32) -> bool {
        (self.ell..=self.big_l).contains(&level)
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<u32> {
        self.ell..=self.big_l
    }

    /// Levels strictly below the bottom and strictly above level l.
    pub fn mid_levels(&self) -> std::ops::Range<u32> {
        self.ell + 1..self.big_l
    }

    pub fn len_big_l(&self) -> usize {
        self.table_len(self.big_l)
    }

    pub fn ct_width(&self) -> usize {
        ciphertext_len(self.block_size)
    }

    /// Slots in the buffer and stash arrays, counting reserved slot 0.
    pub fn area_len(&self) -> usize {
        self.p + 1
    }

    pub fn epoch_len(&self) -> u64 {
        self.n
    }
}
