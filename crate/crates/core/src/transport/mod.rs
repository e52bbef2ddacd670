//! Framed client/server wire protocol, the loopback and TCP transports, and
//! byte metering.

pub mod frame;
pub mod inproc;
pub mod link;
pub mod message;
pub mod meter;
pub mod tcp;

use std::io;

use thiserror::Error;

pub use frame::{Frame, HEADER_BYTES};
pub use link::{FrameIo, Links, ShapeEntry, Transcript};
pub use message::{ErrorCode, Message, WireError};
pub use meter::{BandwidthMeter, Direction, MeterReport, Phase};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("connection closed by server {0}")]
    Closed(usize),
    #[error("no response pending from in-process server")]
    NothingPending,
}
