//! The client's pair of server connections, with metering and transcripts.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};

use sha2::{Digest, Sha256};

use super::frame::Frame;
use super::message::{type_name, Message};
use super::meter::{BandwidthMeter, Direction, Phase};
use super::TransportError;

/// A bidirectional frame stream to one server.
pub trait FrameIo: Send {
    fn send_frame(&mut self, frame: &Frame) -> io::Result<()>;
    /// Next frame from the server; `None` when the server closed the stream.
    fn recv_frame(&mut self) -> Result<Option<Frame>, TransportError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShapeEntry {
    pub server: u8,
    pub to_server: bool,
    pub msg_type: u8,
    pub payload_len: u32,
}

/// Running digest of every frame plus optional shape and byte logs.
pub struct Transcript {
    hasher: Sha256,
    shapes: Option<Vec<ShapeEntry>>,
    bytes: Option<Vec<u8>>,
    log: Option<File>,
}

impl Transcript {
    fn new() -> Self {
        let log = std::env::var_os("ORAM_LOG").and_then(|path| {
            OpenOptions::new().create(true).append(true).open(path).ok()
        });
        Self { hasher: Sha256::new(), shapes: None, bytes: None, log }
    }

    fn observe(&mut self, server: usize, dir: Direction, frame: &Frame) {
        let to_server = dir == Direction::ToServer;
        self.hasher.update([server as u8, u8::from(to_server)]);
        let raw = frame.to_bytes();
        self.hasher.update(&raw);
        if let Some(shapes) = &mut self.shapes {
            shapes.push(ShapeEntry {
                server: server as u8,
                to_server,
                msg_type: frame.msg_type,
                payload_len: frame.payload.len() as u32,
            });
        }
        if let Some(bytes) = &mut self.bytes {
            bytes.extend_from_slice(&raw);
        }
        if let Some(log) = &mut self.log {
            let arrow = if to_server { "->" } else { "<-" };
            let _ = writeln!(
                log,
                "s{server} {arrow} {} {}",
                type_name(frame.msg_type),
                frame.payload.len()
            );
        }
    }

    pub fn digest(&self) -> [u8; 32] {
        self.hasher.clone().finalize().into()
    }

    pub fn record_shapes(&mut self, on: bool) {
        self.shapes = on.then(Vec::new);
    }

    pub fn take_shapes(&mut self) -> Vec<ShapeEntry> {
        self.shapes.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn capture_bytes(&mut self, on: bool) {
        self.bytes = on.then(Vec::new);
    }

    pub fn captured_bytes(&self) -> &[u8] {
        self.bytes.as_deref().unwrap_or(&[])
    }
}

pub struct Links {
    conns: [Box<dyn FrameIo>; 2],
    meter: BandwidthMeter,
    phase: Phase,
    transcript: Transcript,
}

impl Links {
    pub fn new(s0: Box<dyn FrameIo>, s1: Box<dyn FrameIo>) -> Self {
        Self { conns: [s0, s1], meter: BandwidthMeter::new(), phase: Phase::Setup, transcript: Transcript::new() }
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn meter(&self) -> &BandwidthMeter {
        &self.meter
    }

    pub fn meter_mut(&mut self) -> &mut BandwidthMeter {
        &mut self.meter
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn transcript_mut(&mut self) -> &mut Transcript {
        &mut self.transcript
    }

    pub fn send(&mut self, server: usize, msg: &Message) -> Result<(), TransportError> {
        let frame = Frame { msg_type: msg.msg_type(), payload: msg.encode_payload() };
        self.meter.record(server, Direction::ToServer, self.phase, frame.payload.len());
        self.transcript.observe(server, Direction::ToServer, &frame);
        self.conns[server].send_frame(&frame)?;
        Ok(())
    }

    /// Sends the same message to both servers.
    pub fn send_both(&mut self, msg: &Message) -> Result<(), TransportError> {
        self.send(0, msg)?;
        self.send(1, msg)
    }

    pub fn recv(&mut self, server: usize) -> Result<Message, TransportError> {
        let frame = self.conns[server].recv_frame()?.ok_or(TransportError::Closed(server))?;
        self.meter.record(server, Direction::ToClient, self.phase, frame.payload.len());
        self.transcript.observe(server, Direction::ToClient, &frame);
        Ok(Message::decode(frame.msg_type, &frame.payload)?)
    }
}
