//! Drives one scheme through setup and a workload, checking every return
//! against the oracle, and formats benchmark rows.

use std::fmt::Write as _;
use std::net::SocketAddr;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use super::oracle::OracleStore;
use super::workload::{initial_database, WorkloadSpec};
use crate::client::{Client, RebuildCounts, Scheme};
use crate::error::Result;
use crate::params::params_from_n;
use crate::transport::inproc::inproc_links;
use crate::transport::tcp::TcpLink;
use crate::transport::{Links, MeterReport, Phase};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportKind {
    InProc,
    Tcp([SocketAddr; 2]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub n: u64,
    pub block_size: usize,
    pub workload: WorkloadSpec,
    pub transport: TransportKind,
    /// One-way delay requested from the servers at HELLO.
    pub latency_ms: u32,
}

impl RunConfig {
    pub fn inproc(scheme: Scheme, n: u64, block_size: usize, workload: WorkloadSpec) -> Self {
        Self { scheme, n, block_size, workload, transport: TransportKind::InProc, latency_ms: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scheme: Scheme,
    pub n: u64,
    pub block_size: usize,
    pub n_ops: usize,
    pub setup: Duration,
    pub online: Duration,
    /// Counters for the workload only; setup traffic is in `setup_bytes`.
    pub meter: MeterReport,
    pub setup_bytes: u64,
    pub rebuilds: RebuildCounts,
    pub peak_client_blocks: usize,
    /// SHA-256 over the frames of the whole session.
    pub transcript_digest: [u8; 32],
    /// SHA-256 over the returned values in order.
    pub returns_digest: [u8; 32],
}

impl RunReport {
    /// Wire bytes (payload plus header) per access, rebuilds included.
    pub fn amortized_bytes(&self) -> f64 {
        self.meter.online().wire_bytes as f64 / self.n_ops as f64
    }

    /// Payload-only bits per access, rebuilds included.
    pub fn amortized_payload_bits(&self) -> f64 {
        8.0 * self.meter.online().payload_bytes as f64 / self.n_ops as f64
    }

    pub fn amortized_ms(&self) -> f64 {
        self.online.as_secs_f64() * 1000.0 / self.n_ops as f64
    }

    pub fn rebuild_bytes_share(&self) -> f64 {
        let total = self.meter.online().wire_bytes;
        if total == 0 {
            0.0
        } else {
            self.meter.rebuild.wire_bytes as f64 / total as f64
        }
    }
}

fn connect(cfg: &RunConfig, seed: u64) -> Result<Links> {
    Ok(match &cfg.transport {
        TransportKind::InProc => inproc_links(server_seeds(seed)).0,
        TransportKind::Tcp(addrs) => {
            let s0 = TcpLink::connect(addrs[0]).map_err(crate::transport::TransportError::from)?;
            let s1 = TcpLink::connect(addrs[1]).map_err(crate::transport::TransportError::from)?;
            Links::new(Box::new(s0), Box::new(s1))
        }
    })
}

/// Shuffle seeds the in-process servers use for a given workload seed.
pub fn server_seeds(seed: u64) -> [u64; 2] {
    [seed.wrapping_mul(2).wrapping_add(1), seed.wrapping_mul(2).wrapping_add(2)]
}

/// Runs setup plus the workload. Any divergence from the oracle aborts
/// with `MismatchAt`.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let params = params_from_n(cfg.n, cfg.block_size)?;
    let seed = cfg.workload.seed;
    let links = connect(cfg, seed)?;

    let t0 = Instant::now();
    let mut client = Client::setup(
        params,
        cfg.scheme,
        seed,
        cfg.latency_ms,
        links,
        initial_database(seed, cfg.n, cfg.block_size),
    )?;
    let setup = t0.elapsed();
    let setup_bytes = client.links().meter().report().setup.wire_bytes;
    client.links_mut().meter_mut().reset();
    client.gauge_mut().reset_peak();

    let mut oracle = OracleStore::new(initial_database(seed, cfg.n, cfg.block_size));
    let mut returns = Sha256::new();
    let t1 = Instant::now();
    for (i, req) in cfg.workload.requests(cfg.n, cfg.block_size).enumerate() {
        let got = client.access(&req)?;
        oracle.check(i, &req, &got)?;
        returns.update(&got);
    }
    let online = t1.elapsed();
    client.links_mut().set_phase(Phase::Setup);

    Ok(RunReport {
        scheme: cfg.scheme,
        n: cfg.n,
        block_size: cfg.block_size,
        n_ops: cfg.workload.n_ops,
        setup,
        online,
        meter: client.links().meter().report(),
        setup_bytes,
        rebuilds: client.rebuild_counts(),
        peak_client_blocks: client.gauge().peak(),
        transcript_digest: client.links().transcript().digest(),
        returns_digest: returns.finalize().into(),
    })
}

pub const CSV_HEADER: &str = "scheme,N,B,amortized_bytes,amortized_ms,setup_s,rebuild_bytes_share,ratio_to_cforam";

/// One CSV row per report, in input order. `ratio_to_cforam` divides by the
/// base-scheme row with the same N and B, and is empty if there is none.
/// With `timing` off the two wall-clock columns are written as 0.
pub fn to_csv(reports: &[RunReport], timing: bool) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let base = reports
            .iter()
            .find(|b| b.scheme == Scheme::Cforam && b.n == r.n && b.block_size == r.block_size);
        let ratio = base.map(|b| format!("{:.6}", r.amortized_bytes() / b.amortized_bytes())).unwrap_or_default();
        let (ms, setup_s) = if timing { (r.amortized_ms(), r.setup.as_secs_f64()) } else { (0.0, 0.0) };
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{:.4},{:.4},{:.6},{}",
            r.scheme.name(),
            r.n,
            r.block_size,
            r.amortized_bytes(),
            ms,
            setup_s,
            r.rebuild_bytes_share(),
            ratio
        );
    }
    out
}

/// Human-readable summary printed by the `run` command.
pub fn describe(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scheme {}  N {}  B {}  ops {}", r.scheme.name(), r.n, r.block_size, r.n_ops);
    let _ = writeln!(s, "setup        {:>14} bytes  {:.3} s", r.setup_bytes, r.setup.as_secs_f64());
    let _ = writeln!(s, "access       {:>14} bytes", r.meter.access.wire_bytes);
    let _ = writeln!(s, "rebuild      {:>14} bytes", r.meter.rebuild.wire_bytes);
    let _ = writeln!(s, "amortized    {:>14.1} bytes/access  {:.3} ms/access", r.amortized_bytes(), r.amortized_ms());
    let _ = writeln!(
        s,
        "rebuilds     ell {}  level {}  bottom {}",
        r.rebuilds.ell, r.rebuilds.level, r.rebuilds.bottom
    );
    let _ = writeln!(s, "peak client  {} blocks", r.peak_client_blocks);
    let hex: String = r.transcript_digest.iter().map(|b| format!("{b:02x}")).collect();
    let _ = writeln!(s, "transcript   {hex}");
    s
}
