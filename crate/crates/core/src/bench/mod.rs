//! Workload generation, oracle checking and benchmark reporting.

pub mod oracle;
pub mod runner;
pub mod workload;

pub use oracle::{oracle_replay, OracleStore};
pub use runner::{run, to_csv, RunConfig, RunReport, TransportKind};
pub use workload::{initial_database, AddressDist, WorkloadSpec};
