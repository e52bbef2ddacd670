//! Message catalog and its payload encodings. All integers little-endian.

use thiserror::Error;

use crate::crypto::{Tag, TAG_BYTES};
use crate::dpf::DpfKey;

pub const PROTOCOL_VERSION: u8 = 0x01;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed {0} frame")]
    MalformedFrame(&'static str),
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("frame length {0} exceeds limit")]
    LengthOverflow(u32),
}

/// Codes carried by ERROR frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum ErrorCode {
    Malformed = 1,
    UnknownType = 2,
    NotInitialized = 3,
    StashOverflow = 4,
    IllegalPosition = 5,
    DomainMismatch = 6,
    BadLevel = 7,
    Busy = 8,
    ParamsMismatch = 9,
    Protocol = 10,
}

impl ErrorCode {
    pub fn from_u16(code: u16) -> Option<Self> {
        use ErrorCode::*;
        Some(match code {
            1 => Malformed,
            2 => UnknownType,
            3 => NotInitialized,
            4 => StashOverflow,
            5 => IllegalPosition,
            6 => DomainMismatch,
            7 => BadLevel,
            8 => Busy,
            9 => ParamsMismatch,
            10 => Protocol,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ScanTarget {
    Buffer = 0,
    Stash = 1,
}

/// Tag table addressed by a PIR write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum WriteTarget {
    Buffer = 0,
    Stash = 1,
    Table0 = 2,
    Table1 = 3,
}

impl WriteTarget {
    pub fn table(t: usize) -> Self {
        if t == 0 {
            WriteTarget::Table0
        } else {
            WriteTarget::Table1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub version: u8,
    pub role: u8,
    pub n: u32,
    pub block_size: u32,
    pub latency_ms: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello(Hello),
    /// Positions are `[home0, home1, fallback0, fallback1]`.
    Insert { ct: Vec<u8>, tag: Tag, pos: [u32; 4], level: u8 },
    ScanReq { which: ScanTarget },
    ScanItem { ct: Vec<u8> },
    ScanEnd,
    PirRead { level: u8, table: u8, key: DpfKey },
    PirReadResp { block: Vec<u8> },
    PirWrite { target: WriteTarget, level: u8, key: DpfKey, delta: Tag },
    Append { ct: Vec<u8>, tag: Tag },
    RebuildPull { top: u8, include_mid: bool },
    RebItem { ct: Option<Vec<u8>>, tag: Tag },
    RebEnd { count: u32 },
    /// Clears buffer, stash and every level up to `top` inclusive.
    Clear { top: u8 },
    ShufflePush { ct: Vec<u8> },
    ShufflePullReq,
    ShuffleItem { ct: Vec<u8> },
    ShuffleEnd,
    OpReadInit { keys: [DpfKey; 2] },
    OpReadLevel { level: u8, offsets: [u32; 2] },
    OpReadResp { blocks: [Vec<u8>; 2] },
    OpWrite { key: DpfKey, tag: Tag },
    Report { full_ell: bool, stash_count: u32 },
    Error { code: u16 },
    ReportReq,
}

pub mod ty {
    pub const HELLO: u8 = 0x01;
    pub const INSERT: u8 = 0x02;
    pub const SCAN_REQ: u8 = 0x03;
    pub const SCAN_ITEM: u8 = 0x04;
    pub const SCAN_END: u8 = 0x05;
    pub const PIR_READ: u8 = 0x06;
    pub const PIR_READ_RESP: u8 = 0x07;
    pub const PIR_WRITE: u8 = 0x08;
    pub const APPEND: u8 = 0x09;
    pub const REBUILD_PULL: u8 = 0x0A;
    pub const REB_ITEM: u8 = 0x0B;
    pub const REB_END: u8 = 0x0C;
    pub const CLEAR: u8 = 0x0D;
    pub const SHUFFLE_PUSH: u8 = 0x0E;
    pub const SHUFFLE_PULL_REQ: u8 = 0x0F;
    pub const SHUFFLE_ITEM: u8 = 0x10;
    pub const SHUFFLE_END: u8 = 0x11;
    pub const OPREAD_INIT: u8 = 0x12;
    pub const OPREAD_LEVEL: u8 = 0x13;
    pub const OPREAD_RESP: u8 = 0x14;
    pub const OPWRITE: u8 = 0x15;
    pub const REPORT: u8 = 0x16;
    pub const ERROR: u8 = 0x17;
    pub const REPORT_REQ: u8 = 0x18;
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        use Message::*;
        match self {
            Hello(_) => ty::HELLO,
            Insert { .. } => ty::INSERT,
            ScanReq { .. } => ty::SCAN_REQ,
            ScanItem { .. } => ty::SCAN_ITEM,
            ScanEnd => ty::SCAN_END,
            PirRead { .. } => ty::PIR_READ,
            PirReadResp { .. } => ty::PIR_READ_RESP,
            PirWrite { .. } => ty::PIR_WRITE,
            Append { .. } => ty::APPEND,
            RebuildPull { .. } => ty::REBUILD_PULL,
            RebItem { .. } => ty::REB_ITEM,
            RebEnd { .. } => ty::REB_END,
            Clear { .. } => ty::CLEAR,
            ShufflePush { .. } => ty::SHUFFLE_PUSH,
            ShufflePullReq => ty::SHUFFLE_PULL_REQ,
            ShuffleItem { .. } => ty::SHUFFLE_ITEM,
            ShuffleEnd => ty::SHUFFLE_END,
            OpReadInit { .. } => ty::OPREAD_INIT,
            OpReadLevel { .. } => ty::OPREAD_LEVEL,
            OpReadResp { .. } => ty::OPREAD_RESP,
            OpWrite { .. } => ty::OPWRITE,
            Report { .. } => ty::REPORT,
            Error { .. } => ty::ERROR,
            ReportReq => ty::REPORT_REQ,
        }
    }

    pub fn name(&self) -> &'static str {
        type_name(self.msg_type())
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        use Message::*;
        let mut out = Vec::new();
        match self {
            Hello(h) => {
                out.push(h.version);
                out.push(h.role);
                out.extend_from_slice(&h.n.to_le_bytes());
                out.extend_from_slice(&h.block_size.to_le_bytes());
                out.extend_from_slice(&h.latency_ms.to_le_bytes());
            }
            Insert { ct, tag, pos, level } => {
                out.extend_from_slice(ct);
                out.extend_from_slice(&tag.to_bytes());
                for p in pos {
                    out.extend_from_slice(&p.to_le_bytes());
                }
                out.push(*level);
            }
            ScanReq { which } => out.push(*which as u8),
            ScanItem { ct } | ShufflePush { ct } | ShuffleItem { ct } => out.extend_from_slice(ct),
            ScanEnd | ShufflePullReq | ShuffleEnd | ReportReq => {}
            PirRead { level, table, key } => {
                out.push(*level);
                out.push(*table);
                key.write_to(&mut out);
            }
            PirReadResp { block } => out.extend_from_slice(block),
            PirWrite { target, level, key, delta } => {
                out.push(*target as u8);
                out.push(*level);
                key.write_to(&mut out);
                out.extend_from_slice(&delta.to_bytes());
            }
            Append { ct, tag } => {
                out.extend_from_slice(ct);
                out.extend_from_slice(&tag.to_bytes());
            }
            RebuildPull { top, include_mid } => {
                out.push(*top);
                out.push(u8::from(*include_mid));
            }
            RebItem { ct, tag } => {
                match ct {
                    Some(ct) => {
                        out.push(1);
                        out.extend_from_slice(ct);
                    }
                    None => out.push(0),
                }
                out.extend_from_slice(&tag.to_bytes());
            }
            RebEnd { count } => out.extend_from_slice(&count.to_le_bytes()),
            Clear { top } => out.push(*top),
            OpReadInit { keys } => {
                keys[0].write_to(&mut out);
                keys[1].write_to(&mut out);
            }
            OpReadLevel { level, offsets } => {
                out.push(*level);
                out.extend_from_slice(&offsets[0].to_le_bytes());
                out.extend_from_slice(&offsets[1].to_le_bytes());
            }
            OpReadResp { blocks } => {
                out.extend_from_slice(&blocks[0]);
                out.extend_from_slice(&blocks[1]);
            }
            OpWrite { key, tag } => {
                key.write_to(&mut out);
                out.extend_from_slice(&tag.to_bytes());
            }
            Report { full_ell, stash_count } => {
                out.push(u8::from(*full_ell));
                out.extend_from_slice(&stash_count.to_le_bytes());
            }
            Error { code } => out.extend_from_slice(&code.to_le_bytes()),
        }
        out
    }

    pub fn decode(msg_type: u8, payload: &[u8]) -> Result<Message, WireError> {
        let name = type_name(msg_type);
        if name == "UNKNOWN" {
            return Err(WireError::UnknownType(msg_type));
        }
        let bad = || WireError::MalformedFrame(name);
        let mut r = Reader { buf: payload, bad: name };
        let msg = match msg_type {
            ty::HELLO => Message::Hello(Hello {
                version: r.u8()?,
                role: r.u8()?,
                n: r.u32()?,
                block_size: r.u32()?,
                latency_ms: r.u32()?,
            }),
            ty::INSERT => {
                let fixed = TAG_BYTES + 16 + 1;
                let ct = r.take(payload.len().checked_sub(fixed).filter(|&n| n > 0).ok_or_else(bad)?)?;
                let tag = r.tag()?;
                let pos = [r.u32()?, r.u32()?, r.u32()?, r.u32()?];
                Message::Insert { ct, tag, pos, level: r.u8()? }
            }
            ty::SCAN_REQ => Message::ScanReq {
                which: match r.u8()? {
                    0 => ScanTarget::Buffer,
                    1 => ScanTarget::Stash,
                    _ => return Err(bad()),
                },
            },
            ty::SCAN_ITEM => Message::ScanItem { ct: r.rest_nonempty()? },
            ty::SCAN_END => Message::ScanEnd,
            ty::PIR_READ => Message::PirRead { level: r.u8()?, table: r.u8()?, key: r.key()? },
            ty::PIR_READ_RESP => Message::PirReadResp { block: r.rest_nonempty()? },
            ty::PIR_WRITE => Message::PirWrite {
                target: match r.u8()? {
                    0 => WriteTarget::Buffer,
                    1 => WriteTarget::Stash,
                    2 => WriteTarget::Table0,
                    3 => WriteTarget::Table1,
                    _ => return Err(bad()),
                },
                level: r.u8()?,
                key: r.key()?,
                delta: r.tag()?,
            },
            ty::APPEND => {
                let ct = r.take(payload.len().checked_sub(TAG_BYTES).filter(|&n| n > 0).ok_or_else(bad)?)?;
                Message::Append { ct, tag: r.tag()? }
            }
            ty::REBUILD_PULL => Message::RebuildPull { top: r.u8()?, include_mid: r.flag()? },
            ty::REB_ITEM => {
                let ct = if r.flag()? {
                    let len = payload.len().checked_sub(1 + TAG_BYTES).filter(|&n| n > 0).ok_or_else(bad)?;
                    Some(r.take(len)?)
                } else {
                    None
                };
                Message::RebItem { ct, tag: r.tag()? }
            }
            ty::REB_END => Message::RebEnd { count: r.u32()? },
            ty::CLEAR => Message::Clear { top: r.u8()? },
            ty::SHUFFLE_PUSH => Message::ShufflePush { ct: r.rest_nonempty()? },
            ty::SHUFFLE_PULL_REQ => Message::ShufflePullReq,
            ty::SHUFFLE_ITEM => Message::ShuffleItem { ct: r.rest_nonempty()? },
            ty::SHUFFLE_END => Message::ShuffleEnd,
            ty::OPREAD_INIT => Message::OpReadInit { keys: [r.key()?, r.key()?] },
            ty::OPREAD_LEVEL => Message::OpReadLevel { level: r.u8()?, offsets: [r.u32()?, r.u32()?] },
            ty::OPREAD_RESP => {
                if payload.is_empty() || !payload.len().is_multiple_of(2) {
                    return Err(bad());
                }
                let half = payload.len() / 2;
                Message::OpReadResp { blocks: [r.take(half)?, r.take(half)?] }
            }
            ty::OPWRITE => Message::OpWrite { key: r.key()?, tag: r.tag()? },
            ty::REPORT => Message::Report { full_ell: r.flag()?, stash_count: r.u32()? },
            ty::ERROR => Message::Error { code: r.u16()? },
            ty::REPORT_REQ => Message::ReportReq,
            _ => unreachable!("type names cover every known type"),
        };
        if !r.buf.is_empty() {
            return Err(bad());
        }
        Ok(msg)
    }
}

pub fn type_name(msg_type: u8) -> &'static str {
    match msg_type {
        ty::HELLO => "HELLO",
        ty::INSERT => "INSERT",
        ty::SCAN_REQ => "SCAN_REQ",
        ty::SCAN_ITEM => "SCAN_ITEM",
        ty::SCAN_END => "SCAN_END",
        ty::PIR_READ => "PIR_READ",
        ty::PIR_READ_RESP => "PIR_READ_RESP",
        ty::PIR_WRITE => "PIR_WRITE",
        ty::APPEND => "APPEND",
        ty::REBUILD_PULL => "REBUILD_PULL",
        ty::REB_ITEM => "REB_ITEM",
        ty::REB_END => "REB_END",
        ty::CLEAR => "CLEAR",
        ty::SHUFFLE_PUSH => "SHUFFLE_PUSH",
        ty::SHUFFLE_PULL_REQ => "SHUFFLE_PULL_REQ",
        ty::SHUFFLE_ITEM => "SHUFFLE_ITEM",
        ty::SHUFFLE_END => "SHUFFLE_END",
        ty::OPREAD_INIT => "OPREAD_INIT",
        ty::OPREAD_LEVEL => "OPREAD_LEVEL",
        ty::OPREAD_RESP => "OPREAD_RESP",
        ty::OPWRITE => "OPWRITE",
        ty::REPORT => "REPORT",
        ty::ERROR => "ERROR",
        ty::REPORT_REQ => "REPORT_REQ",
        _ => "UNKNOWN",
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    bad: &'static str,
}

impl Reader<'_> {
    fn err(&self) -> WireError {
        WireError::MalformedFrame(self.bad)
    }

    fn take(&mut self, n: usize) -> Result<Vec<u8>, WireError> {
        Ok(self.slice(n)?.to_vec())
    }

    fn slice(&mut self, n: usize) -> Result<&[u8], WireError> {
        if self.buf.len() < n {
            return Err(self.err());
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.slice(1)?[0])
    }

    fn flag(&mut self) -> Result<bool, WireError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(self.err()),
        }
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.slice(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.slice(4)?.try_into().unwrap()))
    }

    fn tag(&mut self) -> Result<Tag, WireError> {
        Ok(Tag::from_slice(self.slice(TAG_BYTES)?))
    }

    fn key(&mut self) -> Result<DpfKey, WireError> {
        let (key, used) = DpfKey::read_from(self.buf).map_err(|_| self.err())?;
        self.buf = &self.buf[used..];
        Ok(key)
    }

    fn rest_nonempty(&mut self) -> Result<Vec<u8>, WireError> {
        if self.buf.is_empty() {
            return Err(self.err());
        }
        let n = self.buf.len();
        self.take(n)
    }
}
