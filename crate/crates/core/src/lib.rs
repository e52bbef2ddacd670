//! Two-server oblivious RAM with a constant-size client: the base scheme
//! and the variant that reads all deep levels with one key pair.

pub mod bench;
pub mod client;
pub mod crypto;
pub mod cuckoo;
pub mod dpf;
pub mod error;
pub mod params;
pub mod pir;
pub mod plus;
pub mod schedule;
pub mod server;
pub mod store;
pub mod transport;

pub use client::{AccessRequest, Client, ClientState, MemGauge, Op, RebuildCounts, Scheme};
pub use error::{Error, Result};
pub use params::{params_from_n, Params};
pub use plus::FoundLocator;
pub use server::Server;
