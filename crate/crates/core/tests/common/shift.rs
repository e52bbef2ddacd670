//! Exhaustive checks of the folded read and windowed write used by the
//! single-key deep-level access.

use bitvec::prelude::*;
use cforam::dpf::{self, BitVectorShare};
use cforam::pir::{inner_product, BlockTable};
use cforam::plus::{fold_share, level_window, read_offset, rotate_left_bits, rotated_inner_product};
use cforam::FoundLocator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn lens(len_l: usize) -> impl Iterator<Item = usize> {
    (1..=len_l.trailing_zeros()).map(|k| 1 << k)
}

fn random_table(rng: &mut ChaCha20Rng, len: usize) -> BlockTable {
    BlockTable::from_blocks(8, (0..len).map(|_| rng.gen::<[u8; 8]>()))
}

/// Every random position, level length and target: the two folded answers
/// XOR to the target block. Returns the number of cases.
pub fn read_path(len_l: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut cases = 0;
    for r_pos in 0..len_l {
        let (k0, k1) = dpf::gen(r_pos as u64, len_l as u64, &mut rng).map_err(|e| e.to_string())?;
        let (s0, s1) = (k0.eval_full(), k1.eval_full());
        for len in lens(len_l) {
            let table = random_table(&mut rng, len);
            let f0 = fold_share(&s0, len).map_err(|e| e.to_string())?;
            let f1 = fold_share(&s1, len).map_err(|e| e.to_string())?;
            for target in 0..len {
                let off = read_offset(r_pos, len, target);
                let mut got = rotated_inner_product(&f0, off, &table).map_err(|e| e.to_string())?;
                let a1 = rotated_inner_product(&f1, off, &table).map_err(|e| e.to_string())?;
                cforam::pir::xor_into(&mut got, &a1);
                if got != table.get(target) {
                    return Err(format!("Len_L {len_l} rPos {r_pos} len {len} target {target}"));
                }
                // Same answer through an explicit rotation.
                let slow = inner_product(&rotate_left_bits(&f0, off), &table).map_err(|e| e.to_string())?;
                if slow != rotated_inner_product(&f0, off, &table).map_err(|e| e.to_string())? {
                    return Err(format!("rotation shortcut differs at rPos {r_pos} len {len} off {off}"));
                }
                cases += 1;
            }
        }
    }
    Ok(cases)
}

/// Every locator plus NONE: after windowing, the XOR of the two servers'
/// vectors is the unit vector at the found slot of the found level and table,
/// and zero everywhere else.
pub fn write_path(len_l: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut locators = vec![FoundLocator::NONE];
    for f_tab in 0..2u8 {
        for f_len in lens(len_l) {
            for f_pos in 0..f_len {
                locators.push(FoundLocator { f_tab, f_len, f_pos });
            }
        }
    }
    let mut cases = 0;
    for loc in locators {
        let ind = loc.write_index(len_l);
        let (k0, k1) = dpf::gen(ind as u64, 4 * len_l as u64, &mut rng).map_err(|e| e.to_string())?;
        let (s0, s1) = (k0.eval_full(), k1.eval_full());
        for t in 0..2 {
            let half = t * 2 * len_l..(t + 1) * 2 * len_l;
            for len in lens(len_l) {
                let mut w = level_window(&s0[half.clone()], len);
                w ^= level_window(&s1[half.clone()], len);
                let mut want: BitVectorShare = bitvec![u64, Lsb0; 0; len];
                if loc != FoundLocator::NONE && loc.f_tab as usize == t && loc.f_len == len {
                    want.set(loc.f_pos, true);
                }
                if w != want {
                    return Err(format!("locator {loc:?} leaks into table {t} len {len}"));
                }
                cases += 1;
            }
        }
    }
    Ok(cases)
}

/// Folding a unit vector at r to length len gives the unit vector at r mod len.
pub fn fold_units(len_l: usize) -> Result<usize, String> {
    let mut cases = 0;
    for r in 0..len_l {
        let mut e: BitVectorShare = bitvec![u64, Lsb0; 0; len_l];
        e.set(r, true);
        for len in lens(len_l) {
            let f = fold_share(&e, len).map_err(|e| e.to_string())?;
            if f.len() != len || f.count_ones() != 1 || !f[r % len] {
                return Err(format!("fold of e_{r} to {len}"));
            }
            cases += 1;
        }
    }
    Ok(cases)
}

/// Offset arithmetic: zero when the folded position is the target, a full
/// turn is the identity, and rotations compose.
pub fn rotations(len_l: usize) -> Result<usize, String> {
    let mut cases = 0;
    for len in lens(len_l) {
        for r_pos in 0..len_l {
            if read_offset(r_pos, len, r_pos % len) != 0 {
                return Err(format!("nonzero offset at rPos {r_pos} len {len}"));
            }
        }
        let v: BitVectorShare = (0..len).map(|i| i % 3 == 0).collect();
        if rotate_left_bits(&v, len) != v || rotate_left_bits(&v, 0) != v {
            return Err(format!("full turn is not the identity at len {len}"));
        }
        for a in 0..len {
            for b in 0..len {
                let twice = rotate_left_bits(&rotate_left_bits(&v, a), b);
                if twice != rotate_left_bits(&v, (a + b) % len) {
                    return Err(format!("rotations {a} and {b} do not compose at len {len}"));
                }
                cases += 1;
            }
        }
    }
    Ok(cases)
}
