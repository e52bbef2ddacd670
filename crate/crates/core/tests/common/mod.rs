#![allow(dead_code)]

pub mod shift;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use cforam::bench::{initial_database, OracleStore};
use cforam::crypto::{derive_tag, ElementCipher, Tag};
use cforam::pir::BlockTable;
use cforam::store::AreaKind;
use cforam::transport::inproc::inproc_links;
use cforam::transport::Links;
use cforam::{params_from_n, Client, Scheme, Server};

pub type Servers = [Arc<Mutex<Server>>; 2];

pub fn inproc_client(scheme: Scheme, n: u64, block_size: usize, seed: u64) -> (Client, Servers, OracleStore) {
    let (links, servers) = inproc_links([seed * 2 + 1, seed * 2 + 2]);
    let client = setup_with(links, scheme, n, block_size, seed);
    (client, servers, OracleStore::new(initial_database(seed, n, block_size)))
}

pub fn setup_with(links: Links, scheme: Scheme, n: u64, block_size: usize, seed: u64) -> Client {
    let params = params_from_n(n, block_size).unwrap();
    Client::setup(params, scheme, seed, 0, links, initial_database(seed, n, block_size)).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loc {
    Buffer(usize),
    Stash(usize),
    Level { level: u32, table: usize, pos: usize },
}

#[derive(Debug, Clone)]
pub struct Item {
    pub loc: Loc,
    pub addr: u64,
    pub value: Vec<u8>,
    pub dummy: bool,
    /// Reconstructed tag equals the tag of `addr` under the current tag key.
    pub live: bool,
}

#[derive(Debug, Default)]
pub struct Snapshot {
    pub items: Vec<Item>,
    /// Reconstructed tag at every slot, occupied or not.
    pub tags: HashMap<Loc, Tag>,
}

impl Snapshot {
    pub fn reals(&self) -> impl Iterator<Item = &Item> {
        self.items.iter().filter(|i| !i.dummy)
    }

    pub fn dummies(&self) -> usize {
        self.items.iter().filter(|i| i.dummy).count()
    }

    pub fn live_copies(&self, addr: u64) -> Vec<&Item> {
        self.reals().filter(|i| i.addr == addr && i.live).collect()
    }
}

fn xor_tag(a: &BlockTable, b: &BlockTable, i: usize) -> Tag {
    Tag::from_slice(a.get(i)) ^ Tag::from_slice(b.get(i))
}

/// Decrypts both servers' storage and checks the structural invariants
/// that must hold between any two protocol steps.
pub fn snapshot(client: &Client, servers: &Servers) -> Snapshot {
    let s0 = servers[0].lock().unwrap();
    let s1 = servers[1].lock().unwrap();
    let (st0, st1) = (s0.store().unwrap(), s1.store().unwrap());
    assert!(st0.element_area_bytes() == st1.element_area_bytes(), "element areas differ");

    let params = *client.params();
    let state = client.state();
    let cipher = ElementCipher::new(client.element_key(), params.block_size);
    let mut snap = Snapshot::default();
    let visit = |snap: &mut Snapshot, loc: Loc, ct: &[u8], tag: Tag| {
        snap.tags.insert(loc, tag);
        if ct.iter().all(|&b| b == 0) {
            return;
        }
        let e = cipher.open(ct).expect("stored ciphertext authenticates");
        let live = !e.is_dummy() && derive_tag(&state.tk, e.addr) == tag;
        snap.items.push(Item { loc, addr: e.addr, dummy: e.is_dummy(), value: e.value, live });
    };

    for (kind, len) in [(AreaKind::Buffer, state.len_b), (AreaKind::Stash, state.len_s)] {
        let (a0, a1) = (st0.area(kind), st1.area(kind));
        assert_eq!(a0.len(), len, "{kind:?} length disagrees with client");
        assert!(len <= params.area_len(), "{kind:?} over capacity");
        assert!(a0.elements().is_zero_at(0), "{kind:?} slot 0 used");
        for i in 0..a0.elements().len() {
            let loc = if kind == AreaKind::Buffer { Loc::Buffer(i) } else { Loc::Stash(i) };
            if i >= len {
                assert!(a0.elements().is_zero_at(i), "{kind:?} slot {i} beyond length");
            }
            visit(&mut snap, loc, a0.elements().get(i), xor_tag(a0.tags(), a1.tags(), i));
        }
    }
    for level in params.levels() {
        let (l0, l1) = (st0.level(level).unwrap(), st1.level(level).unwrap());
        for t in 0..2 {
            assert!(l0.elements(t).is_zero_at(0), "level {level} table {t} slot 0 used");
            for pos in 0..l0.table_len() {
                let loc = Loc::Level { level, table: t, pos };
                visit(&mut snap, loc, l0.elements(t).get(pos), xor_tag(l0.tags(t), l1.tags(t), pos));
            }
        }
        if level > params.ell && !state.full[level as usize] {
            assert!(l0.is_empty(), "level {level} holds items but is marked empty");
        }
    }
    snap
}

/// Every address has exactly one live copy and it holds the oracle's value.
pub fn assert_single_live_copy(snap: &Snapshot, oracle: &OracleStore, n: u64) {
    for addr in 0..n {
        let live = snap.live_copies(addr);
        assert_eq!(live.len(), 1, "addr {addr}: live copies {live:?}");
        assert_eq!(live[0].value, oracle.get(addr), "addr {addr} stale at {:?}", live[0].loc);
    }
}
