//! Deterministic two-table cuckoo placement.
//!
//! Both servers run this on identical inputs, so the element tables stay
//! byte-identical without coordination. Each slot keeps the element
//! ciphertext and this server's tag share side by side, plus the plaintext
//! candidate positions needed to move the item on eviction.

use thiserror::Error;

use crate::crypto::{Tag, TAG_BYTES};
use crate::pir::BlockTable;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CuckooError {
    #[error("position {pos} illegal for table length {len}")]
    IllegalPosition { pos: u32, len: usize },
    #[error("ciphertext width {got} does not match level width {expected}")]
    WidthMismatch { expected: usize, got: usize },
}

/// Candidate positions at the target level and at the fallback level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Positions {
    pub home: [u32; 2],
    pub fallback: [u32; 2],
}

impl Positions {
    pub fn same_level(pos0: u32, pos1: u32) -> Self {
        Self { home: [pos0, pos1], fallback: [pos0, pos1] }
    }

    /// The same item re-targeted at its fallback level.
    pub fn demoted(self) -> Self {
        Self { home: self.fallback, fallback: self.fallback }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotItem {
    pub ct: Vec<u8>,
    pub tag_share: Tag,
    pub pos: Positions,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    Placed { table: u8, pos: u32 },
    Overflow(SlotItem),
}

/// Two cuckoo tables with mirrored tag tables and per-slot positions.
#[derive(Debug, Clone)]
pub struct CuckooLevel {
    len: usize,
    elements: [BlockTable; 2],
    tags: [BlockTable; 2],
    positions: [Vec<Positions>; 2],
    occupied: [Vec<bool>; 2],
    count: usize,
}

impl CuckooLevel {
    pub fn new(len: usize, ct_width: usize) -> Self {
        assert!(len >= 2, "cuckoo tables need at least two slots");
        let table = || BlockTable::zeroed(len, ct_width);
        let tag = || BlockTable::zeroed(len, TAG_BYTES);
        Self {
            len,
            elements: [table(), table()],
            tags: [tag(), tag()],
            positions: [vec![Positions::default(); len], vec![Positions::default(); len]],
            occupied: [vec![false; len], vec![false; len]],
            count: 0,
        }
    }

    pub fn table_len(&self) -> usize {
        self.len
    }

    pub fn ct_width(&self) -> usize {
        self.elements[0].width()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn elements(&self, table: usize) -> &BlockTable {
        &self.elements[table]
    }

    pub fn tags(&self, table: usize) -> &BlockTable {
        &self.tags[table]
    }

    pub fn tags_mut(&mut self, table: usize) -> &mut BlockTable {
        &mut self.tags[table]
    }

    pub fn is_occupied(&self, table: usize, pos: usize) -> bool {
        self.occupied[table][pos]
    }

    pub fn clear(&mut self) {
        for t in 0..2 {
            self.elements[t].clear();
            self.tags[t].clear();
            self.positions[t].fill(Positions::default());
            self.occupied[t].fill(false);
        }
        self.count = 0;
    }

    fn take(&mut self, table: usize, pos: usize) -> SlotItem {
        let item = SlotItem {
            ct: self.elements[table].get(pos).to_vec(),
            tag_share: Tag::from_slice(self.tags[table].get(pos)),
            pos: self.positions[table][pos],
        };
        self.elements[table].get_mut(pos).fill(0);
        self.tags[table].get_mut(pos).fill(0);
        self.positions[table][pos] = Positions::default();
        self.occupied[table][pos] = false;
        self.count -= 1;
        item
    }

    fn put(&mut self, table: usize, pos: usize, item: SlotItem) {
        debug_assert!(!self.occupied[table][pos]);
        self.elements[table].set(pos, &item.ct);
        self.tags[table].set(pos, &item.tag_share.to_bytes());
        self.positions[table][pos] = item.pos;
        self.occupied[table][pos] = true;
        self.count += 1;
    }

    pub fn get(&self, table: usize, pos: usize) -> Option<SlotItem> {
        self.occupied[table][pos].then(|| SlotItem {
            ct: self.elements[table].get(pos).to_vec(),
            tag_share: Tag::from_slice(self.tags[table].get(pos)),
            pos: self.positions[table][pos],
        })
    }

    /// Occupied slots in stream order: table 0 ascending, then table 1.
    pub fn iter_items(&self) -> impl Iterator<Item = SlotItem> + '_ {
        (0..2).flat_map(move |t| (0..self.len).filter_map(move |p| self.get(t, p)))
    }
}

/// Places `item` by the fixed rule: table 0 at `home[0]`, else table 1 at
/// `home[1]`, else evict from table 0 and keep bouncing the evictee between
/// tables. After `max_evictions` displacements the homeless item is returned.
pub fn cuckoo_place(
    level: &mut CuckooLevel,
    item: SlotItem,
    max_evictions: usize,
) -> Result<Placement, CuckooError> {
    for &p in &item.pos.home {
        if p == 0 || p as usize >= level.len {
            return Err(CuckooError::IllegalPosition { pos: p, len: level.len });
        }
    }
    if item.ct.len() != level.ct_width() {
        return Err(CuckooError::WidthMismatch { expected: level.ct_width(), got: item.ct.len() });
    }
    for t in 0..2 {
        let p = item.pos.home[t] as usize;
        if !level.occupied[t][p] {
            level.put(t, p, item);
            return Ok(Placement::Placed { table: t as u8, pos: p as u32 });
        }
    }
    let mut cur = item;
    let mut t = 0usize;
    for _ in 0..max_evictions {
        let p = cur.pos.home[t] as usize;
        let evicted = level.take(t, p);
        level.put(t, p, cur);
        cur = evicted;
        t ^= 1;
        let q = cur.pos.home[t] as usize;
        if !level.occupied[t][q] {
            level.put(t, q, cur);
            return Ok(Placement::Placed { table: t as u8, pos: q as u32 });
        }
    }
    Ok(Placement::Overflow(cur))
}

pub fn cuckoo_lookup_positions(
    level: &CuckooLevel,
    pos0: usize,
    pos1: usize,
) -> (Option<SlotItem>, Option<SlotItem>) {
    (level.get(0, pos0), level.get(1, pos1))
}
