use thiserror::Error;

use crate::crypto::CryptoError;
use crate::dpf::DpfError;
use crate::params::ParamsError;
use crate::pir::PirError;
use crate::plus::PlusError;
use crate::transport::{ErrorCode, TransportError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Dpf(#[from] DpfError),
    #[error(transparent)]
    Pir(#[from] PirError),
    #[error(transparent)]
    Plus(#[from] PlusError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("stash overflow during placement")]
    StashOverflow,
    #[error("server {server} returned error {code:?}")]
    Remote { server: usize, code: Option<ErrorCode>, raw: u16 },
    #[error("servers disagree: {0}")]
    ServerDisagreement(&'static str),
    #[error("rebuild streams from the two servers do not line up")]
    StreamMisalignment,
    #[error("expected {expected} real elements after deduplication, got {got}")]
    CountMismatch { expected: u64, got: u64 },
    #[error("unexpected {got} from server {server}")]
    UnexpectedMessage { server: usize, got: &'static str },
    #[error("address {0} outside the database")]
    AddressOutOfRange(u64),
    #[error("value is {got} bytes, block size is {expected}")]
    BadValueLength { expected: usize, got: usize },
    #[error("invalid setup input: {0}")]
    InvalidSetup(String),
    #[error("returned value diverges from the oracle at operation {0}")]
    MismatchAt(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
