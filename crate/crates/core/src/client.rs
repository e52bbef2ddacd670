//! Client session for the base scheme: setup, access and the three rebuild
//! kinds. The optimized scheme reuses all of it and swaps the deep-level
//! read/write path (see `plus`).

use bitvec::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::crypto::{
    derive_level_key, derive_tag, hash_positions, random_nonzero_tag, share_tag, CryptoError,
    Element, ElementCipher, SecretKey, Tag,
};
use crate::dpf;
use crate::error::{Error, Result};
use crate::params::Params;
use crate::pir::xor_into;
use crate::plus::FoundLocator;
use crate::schedule::{epoch_of, rebuild_trigger, Rebuild};
use crate::transport::message::{ErrorCode, Hello, ScanTarget, WriteTarget, PROTOCOL_VERSION};
use crate::transport::{Links, Message, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Cforam,
    CforamPlus,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Cforam => "cforam",
            Scheme::CforamPlus => "cforam-plus",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cforam" => Ok(Scheme::Cforam),
            "cforam-plus" | "cforam+" => Ok(Scheme::CforamPlus),
            _ => Err(format!("unknown scheme {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRequest {
    pub op: Op,
    pub addr: u64,
    pub write_value: Option<Vec<u8>>,
}

impl AccessRequest {
    pub fn read(addr: u64) -> Self {
        Self { op: Op::Read, addr, write_value: None }
    }

    pub fn write(addr: u64, value: Vec<u8>) -> Self {
        Self { op: Op::Write, addr, write_value: Some(value) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RebuildCounts {
    pub ell: u64,
    pub level: u64,
    pub bottom: u64,
}

/// Keys, counter and per-level flags; no per-element state.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub params: Params,
    pub lk: SecretKey,
    pub tk: SecretKey,
    pub ctr: u64,
    /// Indexed by absolute level; entries below l are unused.
    pub full: Vec<bool>,
    pub len_b: usize,
    pub len_s: usize,
}

/// Counts plaintext blocks the client holds at once.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MemGauge {
    live: usize,
    peak: usize,
}

impl MemGauge {
    fn hold(&mut self) {
        self.live += 1;
        self.peak = self.peak.max(self.live);
    }

    fn release(&mut self) {
        self.live -= 1;
    }

    pub fn peak(&self) -> usize {
        self.peak
    }

    pub fn reset_peak(&mut self) {
        self.peak = self.live;
    }
}

pub struct Client {
    pub(crate) state: ClientState,
    pub(crate) scheme: Scheme,
    pub(crate) ek: SecretKey,
    pub(crate) cipher: ElementCipher,
    pub(crate) rng: ChaCha20Rng,
    pub(crate) links: Links,
    pub(crate) rebuilds: RebuildCounts,
    pub(crate) gauge: MemGauge,
    pub(crate) dummy_seq: u64,
    pub(crate) last_locator: FoundLocator,
    pub(crate) last_offsets: Vec<(u32, [u32; 2])>,
}

impl Client {
    /// Connects to both servers and loads `elements`, which must list every
    /// address in `[0, N)` exactly once.
    pub fn setup<I>(
        params: Params,
        scheme: Scheme,
        seed: u64,
        latency_ms: u32,
        mut links: Links,
        elements: I,
    ) -> Result<Client>
    where
        I: IntoIterator<Item = (u64, Vec<u8>)>,
    {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let lk = SecretKey::random(&mut rng);
        let tk = SecretKey::random(&mut rng);
        let ek = SecretKey::random(&mut rng);
        links.set_phase(Phase::Setup);
        for b in 0..2 {
            let hello = Hello {
                version: PROTOCOL_VERSION,
                role: b as u8,
                n: params.n as u32,
                block_size: params.block_size as u32,
                latency_ms,
            };
            links.send(b, &Message::Hello(hello))?;
        }
        let mut client = Client {
            state: ClientState {
                params,
                lk,
                tk,
                ctr: 0,
                full: vec![false; params.big_l as usize + 1],
                len_b: 1,
                len_s: 1,
            },
            scheme,
            cipher: ElementCipher::new(&ek, params.block_size),
            ek,
            rng,
            links,
            rebuilds: RebuildCounts::default(),
            gauge: MemGauge::default(),
            dummy_seq: 0,
            last_locator: FoundLocator::default(),
            last_offsets: Vec::new(),
        };
        for b in 0..2 {
            match client.recv(b)? {
                Message::Hello(_) => {}
                other => return Err(unexpected(b, &other)),
            }
        }

        let mut seen = bitvec![u64, Lsb0; 0; params.n as usize];
        for (addr, value) in elements {
            if addr >= params.n {
                return Err(Error::AddressOutOfRange(addr));
            }
            if seen.replace(addr as usize, true) {
                return Err(Error::InvalidSetup(format!("duplicate address {addr}")));
            }
            if value.len() != params.block_size {
                return Err(Error::BadValueLength { expected: params.block_size, got: value.len() });
            }
            client.gauge.hold();
            client.insert(&Element::new(addr, value), params.big_l)?;
            client.gauge.release();
        }
        if seen.count_ones() as u64 != params.n {
            return Err(Error::InvalidSetup(format!("{} of {} addresses supplied", seen.count_ones(), params.n)));
        }
        client.state.full[params.big_l as usize] = true;
        client.report()?;
        Ok(client)
    }

    pub fn params(&self) -> &Params {
        &self.state.params
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn state(&self) -> &ClientState {
        &self.state
    }

    pub fn element_key(&self) -> &SecretKey {
        &self.ek
    }

    pub fn links(&self) -> &Links {
        &self.links
    }

    pub fn links_mut(&mut self) -> &mut Links {
        &mut self.links
    }

    pub fn rebuild_counts(&self) -> RebuildCounts {
        self.rebuilds
    }

    pub fn gauge(&self) -> MemGauge {
        self.gauge
    }

    pub fn gauge_mut(&mut self) -> &mut MemGauge {
        &mut self.gauge
    }

    /// Locator produced by the last optimized read path.
    pub fn last_locator(&self) -> FoundLocator {
        self.last_locator
    }

    /// `(level, offsets)` sent by the last optimized read path.
    pub fn last_offsets(&self) -> &[(u32, [u32; 2])] {
        &self.last_offsets
    }

    pub(crate) fn recv(&mut self, server: usize) -> Result<Message> {
        match self.links.recv(server)? {
            Message::Error { code } => Err(remote_error(server, code)),
            m => Ok(m),
        }
    }

    fn hash_key(&self, level: u32) -> crate::crypto::HashKey {
        derive_level_key(&self.state.lk, level, epoch_of(self.state.ctr, level, &self.state.params))
    }

    pub(crate) fn positions(&self, level: u32, tag: Tag) -> (usize, usize) {
        hash_positions(&self.hash_key(level), tag, self.state.params.table_len(level))
    }

    /// Sends one element to both servers for placement at `level`, with
    /// level l as the overflow target.
    pub(crate) fn insert(&mut self, e: &Element, level: u32) -> Result<()> {
        let ell = self.state.params.ell;
        let tag = derive_tag(&self.state.tk, e.addr);
        let (h0, h1) = self.positions(level, tag);
        let (f0, f1) = if level == ell { (h0, h1) } else { self.positions(ell, tag) };
        let ct = self.cipher.seal(e, &mut self.rng)?.into_bytes();
        let shares = share_tag(tag, &mut self.rng);
        let pos = [h0 as u32, h1 as u32, f0 as u32, f1 as u32];
        self.links.send(0, &Message::Insert { ct: ct.clone(), tag: shares.0, pos, level: level as u8 })?;
        self.links.send(1, &Message::Insert { ct, tag: shares.1, pos, level: level as u8 })?;
        Ok(())
    }

    fn open(&self, ct: &[u8]) -> Result<Element> {
        self.cipher.open(ct).map_err(|e| match e {
            CryptoError::AuthFailure => Error::ServerDisagreement("element failed authentication"),
            other => Error::Crypto(other),
        })
    }

    /// Decrypts a reconstructed block; `None` for an empty slot.
    pub(crate) fn open_block(&self, block: &[u8]) -> Result<Option<Element>> {
        if block.iter().all(|&b| b == 0) {
            return Ok(None);
        }
        self.open(block).map(Some)
    }

    pub(crate) fn pir_write(
        &mut self,
        target: WriteTarget,
        level: u32,
        pos: usize,
        domain: usize,
        delta: Tag,
    ) -> Result<()> {
        let (k0, k1) = dpf::gen(pos as u64, domain as u64, &mut self.rng)?;
        self.links.send(0, &Message::PirWrite { target, level: level as u8, key: k0, delta })?;
        self.links.send(1, &Message::PirWrite { target, level: level as u8, key: k1, delta })?;
        Ok(())
    }

    /// Pulls buffer or stash from server 0, newest first. Returns the slot
    /// of the first match, or 0.
    fn scan(&mut self, which: ScanTarget, len: usize, addr: u64, found: &mut Option<Vec<u8>>) -> Result<usize> {
        self.links.send(0, &Message::ScanReq { which })?;
        let mut pos = 0;
        let mut k = 0usize;
        loop {
            match self.recv(0)? {
                Message::ScanItem { ct } => {
                    k += 1;
                    if k >= len {
                        return Err(Error::ServerDisagreement("scan longer than expected"));
                    }
                    if found.is_none() {
                        let e = self.open(&ct)?;
                        if e.addr == addr {
                            pos = len - k;
                            *found = Some(e.value);
                        }
                    }
                }
                Message::ScanEnd if k + 1 == len => return Ok(pos),
                Message::ScanEnd => return Err(Error::ServerDisagreement("scan shorter than expected")),
                other => return Err(unexpected(0, &other)),
            }
        }
    }

    /// PIR-reads both tables of `level` at the hashed positions, then marks
    /// the matching slot (or slot 0) in the tag tables.
    pub(crate) fn read_level_pir(
        &mut self,
        level: u32,
        tag: Tag,
        addr: u64,
        found: &mut Option<Vec<u8>>,
        tau_rand: Tag,
    ) -> Result<()> {
        let len = self.state.params.table_len(level);
        let (r0, r1) = self.positions(level, tag);
        let pos = [r0, r1];
        let mut keys = Vec::with_capacity(2);
        for &p in &pos {
            keys.push(dpf::gen(p as u64, len as u64, &mut self.rng)?);
        }
        for b in 0..2 {
            for (t, (k0, k1)) in keys.iter().enumerate() {
                let key = if b == 0 { k0.clone() } else { k1.clone() };
                self.links.send(b, &Message::PirRead { level: level as u8, table: t as u8, key })?;
            }
        }
        let mut answers = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
        for (b, row) in answers.iter_mut().enumerate() {
            for slot in row.iter_mut() {
                match self.recv(b)? {
                    Message::PirReadResp { block } => *slot = block,
                    other => return Err(unexpected(b, &other)),
                }
            }
        }
        let mut write_pos = [0usize; 2];
        for t in 0..2 {
            let mut block = std::mem::take(&mut answers[0][t]);
            if block.len() != answers[1][t].len() {
                return Err(Error::ServerDisagreement("answer widths differ"));
            }
            xor_into(&mut block, &answers[1][t]);
            if let Some(e) = self.open_block(&block)? {
                if found.is_none() && e.addr == addr {
                    *found = Some(e.value);
                    write_pos[t] = pos[t];
                }
            }
        }
        for (t, &p) in write_pos.iter().enumerate() {
            self.pir_write(WriteTarget::table(t), level, p, len, tau_rand)?;
        }
        Ok(())
    }

    pub fn read(&mut self, addr: u64) -> Result<Vec<u8>> {
        self.access(&AccessRequest::read(addr))
    }

    pub fn write(&mut self, addr: u64, value: Vec<u8>) -> Result<Vec<u8>> {
        self.access(&AccessRequest::write(addr, value))
    }

    /// Runs one access and returns the value held before it. Reads of an
    /// address that was never written return the zero block.
    pub fn access(&mut self, req: &AccessRequest) -> Result<Vec<u8>> {
        let params = self.state.params;
        if req.addr >= params.n {
            return Err(Error::AddressOutOfRange(req.addr));
        }
        let new_value = match (req.op, &req.write_value) {
            (Op::Write, Some(v)) if v.len() == params.block_size => Some(v.clone()),
            (Op::Write, Some(v)) => {
                return Err(Error::BadValueLength { expected: params.block_size, got: v.len() })
            }
            (Op::Write, None) => return Err(Error::BadValueLength { expected: params.block_size, got: 0 }),
            (Op::Read, _) => None,
        };
        let tag = derive_tag(&self.state.tk, req.addr);
        let tau_rand = random_nonzero_tag(&mut self.rng);
        let mut found = None;

        self.links.set_phase(Phase::Scan);
        let pos_eb = self.scan(ScanTarget::Buffer, self.state.len_b, req.addr, &mut found)?;
        let pos_es = self.scan(ScanTarget::Stash, self.state.len_s, req.addr, &mut found)?;
        let area = params.area_len();
        self.pir_write(WriteTarget::Buffer, 0, pos_eb, area, tau_rand)?;
        self.pir_write(WriteTarget::Stash, 0, pos_es, area, tau_rand)?;

        self.links.set_phase(Phase::LevelEll);
        if self.state.full[params.ell as usize] {
            self.read_level_pir(params.ell, tag, req.addr, &mut found, tau_rand)?;
        }

        self.links.set_phase(Phase::LevelsDeep);
        match self.scheme {
            Scheme::Cforam => {
                for level in params.ell + 1..=params.big_l {
                    if self.state.full[level as usize] {
                        self.read_level_pir(level, tag, req.addr, &mut found, tau_rand)?;
                    }
                }
            }
            Scheme::CforamPlus => {
                let locator = self.op_ele_read(tag, req.addr, &mut found)?;
                self.op_tag_write(locator)?;
            }
        }

        self.links.set_phase(Phase::WriteBack);
        let old = found.unwrap_or_else(|| vec![0; params.block_size]);
        let value = new_value.unwrap_or_else(|| old.clone());
        let ct = self.cipher.seal(&Element::new(req.addr, value), &mut self.rng)?.into_bytes();
        let shares = share_tag(tag, &mut self.rng);
        self.links.send(0, &Message::Append { ct: ct.clone(), tag: shares.0 })?;
        self.links.send(1, &Message::Append { ct, tag: shares.1 })?;
        self.state.len_b += 1;
        self.state.ctr += 1;

        self.links.set_phase(Phase::Rebuild);
        match rebuild_trigger(self.state.ctr, &self.state.full, &params) {
            Rebuild::None => {}
            Rebuild::Ell => {
                self.rebuild_level(params.ell)?;
                self.rebuilds.ell += 1;
            }
            Rebuild::Level(j) => {
                self.rebuild_level(j)?;
                self.rebuilds.level += 1;
            }
            Rebuild::Bottom => {
                self.rebuild_bottom()?;
                self.rebuilds.bottom += 1;
            }
        }
        Ok(old)
    }

    fn next_dummy(&mut self) -> Element {
        self.dummy_seq = (self.dummy_seq + 1) & 0xffff_ffff;
        Element::dummy((self.state.ctr << 32) | self.dummy_seq, self.state.params.block_size)
    }

    /// Reads the next aligned pair of rebuild items. `None` at end of stream.
    fn next_rebuild_item(&mut self, taken: &mut u32) -> Result<Option<Element>> {
        let m0 = self.recv(0)?;
        let m1 = self.recv(1)?;
        match (m0, m1) {
            (Message::RebItem { ct: Some(ct), tag: t0 }, Message::RebItem { ct: None, tag: t1 }) => {
                *taken += 1;
                let mut e = self.open(&ct)?;
                self.gauge.hold();
                if !e.is_dummy() && derive_tag(&self.state.tk, e.addr) != t0 ^ t1 {
                    e = self.next_dummy();
                }
                Ok(Some(e))
            }
            (Message::RebEnd { count: c0 }, Message::RebEnd { count: c1 }) if c0 == c1 && c0 == *taken => Ok(None),
            _ => Err(Error::StreamMisalignment),
        }
    }

    /// Merges buffer, stash, level l and (for `j > l`) levels `l+1..j` into `j`.
    pub fn rebuild_level(&mut self, j: u32) -> Result<()> {
        let params = self.state.params;
        let ell = params.ell;
        let (top, include_mid) = if j > ell { (j - 1, true) } else { (ell, false) };
        self.links.send_both(&Message::RebuildPull { top: top as u8, include_mid })?;
        self.links.send_both(&Message::Clear { top: top as u8 })?;
        let mut taken = 0;
        while let Some(e) = self.next_rebuild_item(&mut taken)? {
            self.insert(&e, j)?;
            self.gauge.release();
        }
        for level in ell + 1..j {
            self.state.full[level as usize] = false;
        }
        self.state.full[j as usize] = true;
        self.state.len_b = 1;
        self.state.len_s = 1;
        self.report()
    }

    /// Rebuilds everything into level L under fresh keys, dropping dummies
    /// through two server-side shuffles.
    pub fn rebuild_bottom(&mut self) -> Result<()> {
        let params = self.state.params;
        let big_l = params.big_l;
        self.links.send_both(&Message::RebuildPull { top: big_l as u8, include_mid: true })?;
        self.links.send_both(&Message::Clear { top: big_l as u8 })?;
        let mut taken = 0;
        while let Some(e) = self.next_rebuild_item(&mut taken)? {
            let ct = self.cipher.seal(&e, &mut self.rng)?.into_bytes();
            self.links.send(0, &Message::ShufflePush { ct })?;
            self.gauge.release();
        }

        self.links.send(0, &Message::ShufflePullReq)?;
        let mut reals = 0u64;
        loop {
            match self.recv(0)? {
                Message::ShuffleItem { ct } => {
                    let e = self.open(&ct)?;
                    if !e.is_dummy() {
                        reals += 1;
                        self.gauge.hold();
                        let ct = self.cipher.seal(&e, &mut self.rng)?.into_bytes();
                        self.links.send(1, &Message::ShufflePush { ct })?;
                        self.gauge.release();
                    }
                }
                Message::ShuffleEnd => break,
                other => return Err(unexpected(0, &other)),
            }
        }
        if reals != params.n {
            return Err(Error::CountMismatch { expected: params.n, got: reals });
        }

        self.state.lk = SecretKey::random(&mut self.rng);
        self.state.tk = SecretKey::random(&mut self.rng);
        self.state.ctr = 0;
        self.state.full.iter_mut().for_each(|f| *f = false);

        self.links.send(1, &Message::ShufflePullReq)?;
        loop {
            match self.recv(1)? {
                Message::ShuffleItem { ct } => {
                    let e = self.open(&ct)?;
                    self.gauge.hold();
                    self.insert(&e, big_l)?;
                    self.gauge.release();
                }
                Message::ShuffleEnd => break,
                other => return Err(unexpected(1, &other)),
            }
        }
        self.state.full[big_l as usize] = true;
        self.state.len_b = 1;
        self.state.len_s = 1;
        self.report()
    }

    /// Asks server 0 whether level l is occupied and how full the stash is.
    fn report(&mut self) -> Result<()> {
        self.links.send(0, &Message::ReportReq)?;
        match self.recv(0)? {
            Message::Report { full_ell, stash_count } => {
                if stash_count as usize > self.state.params.p {
                    return Err(Error::StashOverflow);
                }
                self.state.full[self.state.params.ell as usize] = full_ell;
                self.state.len_s = stash_count as usize + 1;
                Ok(())
            }
            other => Err(unexpected(0, &other)),
        }
    }

    pub(crate) fn random_position(&mut self, len: usize) -> usize {
        self.rng.gen_range(1..len)
    }
}

pub(crate) fn unexpected(server: usize, m: &Message) -> Error {
    Error::UnexpectedMessage { server, got: m.name() }
}

fn remote_error(server: usize, raw: u16) -> Error {
    match ErrorCode::from_u16(raw) {
        Some(ErrorCode::StashOverflow) => Error::StashOverflow,
        code => Error::Remote { server, code, raw },
    }
}
