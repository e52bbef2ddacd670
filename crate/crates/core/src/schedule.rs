//! Rebuild schedule arithmetic.

use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rebuild {
    None,
    Ell,
    Level(u32),
    Bottom,
}

/// Number of times `level` has been rebuilt after `ctr` accesses, counting
/// from the last bottom rebuild. Levels between l and L fill like the bits of
/// a binary counter of merges.
pub fn epoch_of(ctr: u64, level: u32, params: &Params) -> u64 {
    assert!(params.has_level(level), "level {level} out of range");
    if level == params.ell {
        ctr / params.p as u64
    } else if level == params.big_l {
        ctr >> params.big_l
    } else {
        let k = level - params.ell - 1;
        let merges = ctr >> (params.ell + 1);
        (merges + (1 << k)) >> (k + 1)
    }
}

/// Rebuild due after the access that brought the counter to `ctr`.
/// `full` is indexed by absolute level.
pub fn rebuild_trigger(ctr: u64, full: &[bool], params: &Params) -> Rebuild {
    if ctr.is_multiple_of(1 << params.big_l) {
        Rebuild::Bottom
    } else if ctr.is_multiple_of(1 << (params.ell + 1)) {
        params.mid_levels().find(|&j| !full[j as usize]).map_or(Rebuild::Bottom, Rebuild::Level)
    } else if ctr.is_multiple_of(params.p as u64) {
        Rebuild::Ell
    } else {
        Rebuild::None
    }
}
