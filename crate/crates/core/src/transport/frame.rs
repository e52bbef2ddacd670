//! `u32 length ∥ u8 type ∥ payload` framing over byte streams.

use std::io::{self, Read, Write};

use super::message::WireError;

pub const HEADER_BYTES: usize = 5;
pub const MAX_PAYLOAD: u32 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn wire_len(&self) -> usize {
        HEADER_BYTES + self.payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.push(self.msg_type);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<(Frame, usize), WireError> {
        if bytes.len() < HEADER_BYTES {
            return Err(WireError::MalformedFrame("header"));
        }
        let len = u32::from_le_bytes(bytes[..4].try_into().unwrap());
        if len > MAX_PAYLOAD {
            return Err(WireError::LengthOverflow(len));
        }
        let end = HEADER_BYTES + len as usize;
        if bytes.len() < end {
            return Err(WireError::MalformedFrame("truncated"));
        }
        Ok((Frame { msg_type: bytes[4], payload: bytes[HEADER_BYTES..end].to_vec() }, end))
    }
}

pub fn write_frame<W: Write + ?Sized>(w: &mut W, frame: &Frame) -> io::Result<()> {
    if frame.payload.len() > MAX_PAYLOAD as usize {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            WireError::LengthOverflow(frame.payload.len() as u32),
        ));
    }
    w.write_all(&(frame.payload.len() as u32).to_le_bytes())?;
    w.write_all(&[frame.msg_type])?;
    w.write_all(&frame.payload)
}

/// Reads one frame. A clean end of stream before the header yields `Ok(None)`.
pub fn read_frame<R: Read + ?Sized>(r: &mut R) -> io::Result<Option<Frame>> {
    let mut header = [0u8; HEADER_BYTES];
    let mut got = 0;
    while got < HEADER_BYTES {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => {
                return Err(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    WireError::MalformedFrame("header"),
                ))
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_le_bytes(header[..4].try_into().unwrap());
    if len > MAX_PAYLOAD {
        return Err(io::Error::new(io::ErrorKind::InvalidData, WireError::LengthOverflow(len)));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            io::Error::new(io::ErrorKind::UnexpectedEof, WireError::MalformedFrame("truncated"))
        } else {
            e
        }
    })?;
    Ok(Some(Frame { msg_type: header[4], payload }))
}
