//! Server-side request handling shared by every transport.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::cuckoo::{CuckooError, Positions};
use crate::dpf::BitVectorShare;
use crate::params::{params_from_n, Params};
use crate::pir::{self, BlockTable, PirError};
use crate::plus::{fold_share, level_window, rotated_inner_product};
use crate::store::{AreaKind, ServerStore, StoreError};
use crate::transport::message::{ErrorCode, Hello, Message, ScanTarget, WriteTarget, PROTOCOL_VERSION};

/// One server's state machine. `handle` maps each request to the frames
/// pushed back, possibly none.
pub struct Server {
    role: u8,
    expected: Option<(u64, usize)>,
    store: Option<ServerStore>,
    shuffle_rng: ChaCha20Rng,
    shuffle_pool: Vec<Vec<u8>>,
    opread: Option<[BitVectorShare; 2]>,
    latency_ms: u32,
    fixed_latency: Option<u32>,
}

impl Server {
    pub fn new(role: u8, shuffle_seed: u64) -> Self {
        Self {
            role,
            expected: None,
            store: None,
            shuffle_rng: ChaCha20Rng::seed_from_u64(shuffle_seed),
            shuffle_pool: Vec::new(),
            opread: None,
            latency_ms: 0,
            fixed_latency: None,
        }
    }

    /// Uses `ms` as the one-way delay, ignoring the value the client sends.
    pub fn with_latency(mut self, ms: u32) -> Self {
        self.fixed_latency = Some(ms);
        self.latency_ms = ms;
        self
    }

    /// Rejects HELLOs whose database shape differs from `(n, block_size)`.
    pub fn with_expected_params(mut self, n: u64, block_size: usize) -> Self {
        self.expected = Some((n, block_size));
        self
    }

    pub fn role(&self) -> u8 {
        self.role
    }

    pub fn latency_ms(&self) -> u32 {
        self.latency_ms
    }

    pub fn store(&self) -> Option<&ServerStore> {
        self.store.as_ref()
    }

    pub fn handle(&mut self, msg: Message) -> Vec<Message> {
        let mut out = Vec::new();
        if let Err(code) = self.dispatch(msg, &mut out) {
            out.push(Message::Error { code: code as u16 });
        }
        out
    }

    fn store_mut(&mut self) -> Result<&mut ServerStore, ErrorCode> {
        self.store.as_mut().ok_or(ErrorCode::NotInitialized)
    }

    fn params(&self) -> Result<Params, ErrorCode> {
        self.store.as_ref().map(|s| *s.params()).ok_or(ErrorCode::NotInitialized)
    }

    fn dispatch(&mut self, msg: Message, out: &mut Vec<Message>) -> Result<(), ErrorCode> {
        match msg {
            Message::Hello(h) => {
                if h.version != PROTOCOL_VERSION || h.role != self.role {
                    return Err(ErrorCode::ParamsMismatch);
                }
                if let Some((n, b)) = self.expected {
                    if u64::from(h.n) != n || h.block_size as usize != b {
                        return Err(ErrorCode::ParamsMismatch);
                    }
                }
                let params = params_from_n(u64::from(h.n), h.block_size as usize)
                    .map_err(|_| ErrorCode::ParamsMismatch)?;
                self.store = Some(ServerStore::new(params));
                self.shuffle_pool.clear();
                self.opread = None;
                self.latency_ms = self.fixed_latency.unwrap_or(h.latency_ms);
                out.push(Message::Hello(Hello { version: PROTOCOL_VERSION, ..h }));
            }
            Message::Insert { ct, tag, pos, level } => {
                let pos = Positions { home: [pos[0], pos[1]], fallback: [pos[2], pos[3]] };
                self.store_mut()?.insert(ct, tag, pos, u32::from(level)).map_err(store_code)?;
            }
            Message::ScanReq { which } => {
                let kind = match which {
                    ScanTarget::Buffer => AreaKind::Buffer,
                    ScanTarget::Stash => AreaKind::Stash,
                };
                let area = self.store_mut()?.area(kind);
                for i in (1..area.len()).rev() {
                    out.push(Message::ScanItem { ct: area.elements().get(i).to_vec() });
                }
                out.push(Message::ScanEnd);
            }
            Message::PirRead { level, table, key } => {
                let store = self.store_mut()?;
                let lvl = store.level(u32::from(level)).map_err(store_code)?;
                let t = table_index(table)?;
                let block = pir::pir_read_answer(&key, lvl.elements(t)).map_err(pir_code)?;
                out.push(Message::PirReadResp { block });
            }
            Message::PirWrite { target, level, key, delta } => {
                let table = self.tag_table(target, level)?;
                pir::pir_write_apply(&key, &delta.to_bytes(), table).map_err(pir_code)?;
            }
            Message::Append { ct, tag } => {
                self.store_mut()?.append(&ct, tag).map_err(store_code)?;
            }
            Message::RebuildPull { top, include_mid } => {
                let role = self.role;
                let items =
                    self.store_mut()?.rebuild_items(u32::from(top), include_mid).map_err(store_code)?;
                let count = items.len() as u32;
                for (ct, tag) in items {
                    let ct = (role == 0).then_some(ct);
                    out.push(Message::RebItem { ct, tag });
                }
                out.push(Message::RebEnd { count });
            }
            Message::Clear { top } => {
                self.store_mut()?.clear_through(u32::from(top)).map_err(store_code)?;
            }
            Message::ShufflePush { ct } => {
                let width = self.params()?.ct_width();
                if ct.len() != width {
                    return Err(ErrorCode::Malformed);
                }
                self.shuffle_pool.push(ct);
            }
            Message::ShufflePullReq => {
                self.params()?;
                let mut pool = std::mem::take(&mut self.shuffle_pool);
                pool.shuffle(&mut self.shuffle_rng);
                out.extend(pool.into_iter().map(|ct| Message::ShuffleItem { ct }));
                out.push(Message::ShuffleEnd);
            }
            Message::OpReadInit { keys } => {
                let len = self.params()?.len_big_l() as u64;
                if keys.iter().any(|k| k.domain_size != len) {
                    return Err(ErrorCode::DomainMismatch);
                }
                self.opread = Some([keys[0].eval_full(), keys[1].eval_full()]);
            }
            Message::OpReadLevel { level, offsets } => {
                let params = self.params()?;
                let level = u32::from(level);
                if level <= params.ell || level > params.big_l {
                    return Err(ErrorCode::BadLevel);
                }
                let shares = self.opread.as_ref().ok_or(ErrorCode::Protocol)?;
                let store = self.store.as_ref().ok_or(ErrorCode::NotInitialized)?;
                let lvl = store.level(level).map_err(store_code)?;
                let len_i = params.table_len(level);
                let mut blocks: [Vec<u8>; 2] = Default::default();
                for t in 0..2 {
                    if offsets[t] as usize >= len_i {
                        return Err(ErrorCode::IllegalPosition);
                    }
                    let folded = fold_share(&shares[t], len_i).map_err(|_| ErrorCode::DomainMismatch)?;
                    blocks[t] =
                        rotated_inner_product(&folded, offsets[t] as usize, lvl.elements(t)).map_err(pir_code)?;
                }
                out.push(Message::OpReadResp { blocks });
            }
            Message::OpWrite { key, tag } => {
                let params = self.params()?;
                let len_l = params.len_big_l();
                if key.domain_size != 4 * len_l as u64 {
                    return Err(ErrorCode::DomainMismatch);
                }
                let v = key.eval_full();
                let halves = [&v[..2 * len_l], &v[2 * len_l..]];
                let delta = tag.to_bytes();
                let store = self.store_mut()?;
                for level in params.ell + 1..=params.big_l {
                    let len_i = params.table_len(level);
                    let lvl = store.level_mut(level).map_err(store_code)?;
                    for (t, half) in halves.iter().enumerate() {
                        let window = level_window(half, len_i);
                        pir::masked_xor_apply(&window, &delta, lvl.tags_mut(t))
                            .map_err(pir_code)?;
                    }
                }
                self.opread = None;
            }
            Message::ReportReq => {
                let (full_ell, stash) = self.store_mut()?.report();
                out.push(Message::Report { full_ell, stash_count: stash as u32 });
            }
            Message::ScanItem { .. }
            | Message::ScanEnd
            | Message::PirReadResp { .. }
            | Message::RebItem { .. }
            | Message::RebEnd { .. }
            | Message::ShuffleItem { .. }
            | Message::ShuffleEnd
            | Message::OpReadResp { .. }
            | Message::Report { .. }
            | Message::Error { .. } => return Err(ErrorCode::Protocol),
        }
        Ok(())
    }

    fn tag_table(&mut self, target: WriteTarget, level: u8) -> Result<&mut BlockTable, ErrorCode> {
        let store = self.store_mut()?;
        Ok(match target {
            WriteTarget::Buffer => store.area_mut(AreaKind::Buffer).tags_mut(),
            WriteTarget::Stash => store.area_mut(AreaKind::Stash).tags_mut(),
            WriteTarget::Table0 | WriteTarget::Table1 => {
                let t = (target == WriteTarget::Table1) as usize;
                store.level_mut(u32::from(level)).map_err(store_code)?.tags_mut(t)
            }
        })
    }
}

fn table_index(table: u8) -> Result<usize, ErrorCode> {
    match table {
        0 | 1 => Ok(table as usize),
        _ => Err(ErrorCode::Malformed),
    }
}

fn store_code(e: StoreError) -> ErrorCode {
    match e {
        StoreError::BadLevel(_) => ErrorCode::BadLevel,
        StoreError::StashOverflow(_) => ErrorCode::StashOverflow,
        StoreError::BufferFull(_) => ErrorCode::Protocol,
        StoreError::WidthMismatch { .. } => ErrorCode::Malformed,
        StoreError::Cuckoo(CuckooError::IllegalPosition { .. }) => ErrorCode::IllegalPosition,
        StoreError::Cuckoo(CuckooError::WidthMismatch { .. }) => ErrorCode::Malformed,
    }
}

fn pir_code(e: PirError) -> ErrorCode {
    match e {
        PirError::DomainMismatch { .. } => ErrorCode::DomainMismatch,
        PirError::WidthMismatch { .. } | PirError::Dpf(_) => ErrorCode::Malformed,
    }
}
