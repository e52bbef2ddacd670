//! One server's storage: buffer, stash and cuckoo levels, each holding
//! replicated ciphertexts next to this server's tag shares.

use thiserror::Error;

use crate::crypto::{Tag, TAG_BYTES};
use crate::cuckoo::{cuckoo_place, CuckooError, CuckooLevel, Placement, Positions, SlotItem};
use crate::params::Params;
use crate::pir::BlockTable;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("level {0} does not exist")]
    BadLevel(u32),
    #[error("stash overflow: more than {0} items")]
    StashOverflow(usize),
    #[error("buffer full at {0} items")]
    BufferFull(usize),
    #[error("ciphertext width {got} does not match {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Cuckoo(#[from] CuckooError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaKind {
    Buffer,
    Stash,
}

/// Append-only array with slot 0 reserved.
#[derive(Debug, Clone)]
pub struct Area {
    elements: BlockTable,
    tags: BlockTable,
    /// Used slots including the reserved one; the next free index.
    len: usize,
}

impl Area {
    fn new(slots: usize, ct_width: usize) -> Self {
        Self {
            elements: BlockTable::zeroed(slots, ct_width),
            tags: BlockTable::zeroed(slots, TAG_BYTES),
            len: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Items held, excluding the reserved slot.
    pub fn count(&self) -> usize {
        self.len - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len == 1
    }

    pub fn capacity(&self) -> usize {
        self.elements.len() - 1
    }

    pub fn elements(&self) -> &BlockTable {
        &self.elements
    }

    pub fn tags(&self) -> &BlockTable {
        &self.tags
    }

    pub fn tags_mut(&mut self) -> &mut BlockTable {
        &mut self.tags
    }

    fn push(&mut self, ct: &[u8], tag: Tag) -> bool {
        if self.len >= self.elements.len() {
            return false;
        }
        self.elements.set(self.len, ct);
        self.tags.set(self.len, &tag.to_bytes());
        self.len += 1;
        true
    }

    fn clear(&mut self) {
        self.elements.clear();
        self.tags.clear();
        self.len = 1;
    }

    /// `(ciphertext, tag share)` in ascending slot order, skipping slot 0.
    pub fn iter_items(&self) -> impl Iterator<Item = (Vec<u8>, Tag)> + '_ {
        (1..self.len).map(|i| (self.elements.get(i).to_vec(), Tag::from_slice(self.tags.get(i))))
    }
}

#[derive(Debug, Clone)]
pub struct ServerStore {
    params: Params,
    buffer: Area,
    stash: Area,
    levels: Vec<CuckooLevel>,
}

impl ServerStore {
    pub fn new(params: Params) -> Self {
        let w = params.ct_width();
        let levels = params.levels().map(|i| CuckooLevel::new(params.table_len(i), w)).collect();
        Self {
            params,
            buffer: Area::new(params.area_len(), w),
            stash: Area::new(params.area_len(), w),
            levels,
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn area(&self, kind: AreaKind) -> &Area {
        match kind {
            AreaKind::Buffer => &self.buffer,
            AreaKind::Stash => &self.stash,
        }
    }

    pub fn area_mut(&mut self, kind: AreaKind) -> &mut Area {
        match kind {
            AreaKind::Buffer => &mut self.buffer,
            AreaKind::Stash => &mut self.stash,
        }
    }

    pub fn level(&self, level: u32) -> Result<&CuckooLevel, StoreError> {
        if !self.params.has_level(level) {
            return Err(StoreError::BadLevel(level));
        }
        Ok(&self.levels[(level - self.params.ell) as usize])
    }

    pub fn level_mut(&mut self, level: u32) -> Result<&mut CuckooLevel, StoreError> {
        if !self.params.has_level(level) {
            return Err(StoreError::BadLevel(level));
        }
        Ok(&mut self.levels[(level - self.params.ell) as usize])
    }

    fn check_width(&self, ct: &[u8]) -> Result<(), StoreError> {
        let expected = self.params.ct_width();
        if ct.len() != expected {
            return Err(StoreError::WidthMismatch { expected, got: ct.len() });
        }
        Ok(())
    }

    /// Places an item at `level`, falling back to level l and then the stash.
    pub fn insert(
        &mut self,
        ct: Vec<u8>,
        tag_share: Tag,
        pos: Positions,
        level: u32,
    ) -> Result<(), StoreError> {
        self.check_width(&ct)?;
        let ell = self.params.ell;
        let max = self.params.max_evictions;
        let pos = if level == ell { pos.demoted() } else { pos };
        let mut homeless = match cuckoo_place(self.level_mut(level)?, SlotItem { ct, tag_share, pos }, max)? {
            Placement::Placed { .. } => return Ok(()),
            Placement::Overflow(item) => item,
        };
        if level != ell {
            homeless.pos = homeless.pos.demoted();
            homeless = match cuckoo_place(self.level_mut(ell)?, homeless, max)? {
                Placement::Placed { .. } => return Ok(()),
                Placement::Overflow(item) => item,
            };
        }
        if self.stash.push(&homeless.ct, homeless.tag_share) {
            Ok(())
        } else {
            Err(StoreError::StashOverflow(self.stash.capacity()))
        }
    }

    pub fn append(&mut self, ct: &[u8], tag_share: Tag) -> Result<(), StoreError> {
        self.check_width(ct)?;
        if self.buffer.push(ct, tag_share) {
            Ok(())
        } else {
            Err(StoreError::BufferFull(self.buffer.capacity()))
        }
    }

    /// Items in rebuild stream order: buffer, stash, level l, then levels
    /// `l+1..=top` when `include_mid` is set. Within a level, table 0 then
    /// table 1, each ascending.
    pub fn rebuild_items(&self, top: u32, include_mid: bool) -> Result<Vec<(Vec<u8>, Tag)>, StoreError> {
        let ell = self.params.ell;
        if include_mid && !self.params.has_level(top) {
            return Err(StoreError::BadLevel(top));
        }
        let mut out: Vec<(Vec<u8>, Tag)> = self.buffer.iter_items().chain(self.stash.iter_items()).collect();
        let upper = if include_mid { top } else { ell };
        for level in ell..=upper {
            out.extend(self.level(level)?.iter_items().map(|s| (s.ct, s.tag_share)));
        }
        Ok(out)
    }

    /// Clears buffer, stash and levels `l..=top`.
    pub fn clear_through(&mut self, top: u32) -> Result<(), StoreError> {
        if !self.params.has_level(top) {
            return Err(StoreError::BadLevel(top));
        }
        self.buffer.clear();
        self.stash.clear();
        for level in self.params.ell..=top {
            self.level_mut(level)?.clear();
        }
        Ok(())
    }

    /// Whether level l holds anything, and how many items sit in the stash.
    pub fn report(&self) -> (bool, usize) {
        (!self.levels[0].is_empty(), self.stash.count())
    }

    /// Digest of the replicated element area, equal on both servers.
    pub fn element_area_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(self.buffer.elements.as_bytes());
        out.extend_from_slice(self.stash.elements.as_bytes());
        for l in &self.levels {
            out.extend_from_slice(l.elements(0).as_bytes());
            out.extend_from_slice(l.elements(1).as_bytes());
        }
        out
    }

    /// Every tag table in a fixed order, for reconstruction in tests.
    pub fn tag_area(&self) -> Vec<&BlockTable> {
        let mut out = vec![&self.buffer.tags, &self.stash.tags];
        for l in &self.levels {
            out.push(l.tags(0));
            out.push(l.tags(1));
        }
        out
    }
}
