use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cforam::bench::{run, runner, to_csv, AddressDist, RunConfig, TransportKind, WorkloadSpec};
use cforam::transport::tcp;
use cforam::{params_from_n, Scheme, Server};

#[derive(Parser)]
#[command(name = "cforam", version, about = "Cforam and Cforam+ servers, workload runner and benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one server daemon.
    Serve {
        /// 0 or 1 (also accepts s0 / s1).
        #[arg(long, value_parser = parse_role)]
        role: u8,
        #[arg(long, default_value = "127.0.0.1:7000")]
        listen: String,
        #[arg(long, value_parser = parse_size)]
        n: u64,
        #[arg(long, default_value_t = 32)]
        block_size: usize,
        /// One-way delay added to every frame in each direction.
        #[arg(long)]
        latency_ms: Option<u32>,
        #[arg(long, default_value_t = 0)]
        shuffle_seed: u64,
    },
    /// Set up a database, run a workload and check every result. In-process
    /// servers use shuffle seeds 2*seed+1 and 2*seed+2.
    Run {
        #[arg(long, default_value = "cforam")]
        scheme: Scheme,
        #[arg(long, default_value = "inproc")]
        transport: String,
        /// Two addresses, `host:port,host:port`, for the tcp transport.
        #[arg(long)]
        servers: Option<String>,
        #[arg(long, value_parser = parse_size)]
        n: u64,
        #[arg(long, default_value_t = 32)]
        block_size: usize,
        /// Number of accesses; defaults to N.
        #[arg(long, value_parser = parse_size)]
        ops: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        zipf: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        read_fraction: f64,
        /// Delay requested from the servers at connection time.
        #[arg(long, default_value_t = 0)]
        latency_ms: u32,
    },
    /// Run a grid of in-process configurations and write a CSV.
    Bench {
        #[arg(long, value_delimiter = ',', value_parser = parse_size, default_value = "2^8,2^10,2^12")]
        n_list: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "32")]
        b_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "cforam,cforam-plus")]
        schemes: Vec<Scheme>,
        /// Output path; stdout when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Accesses per grid point; defaults to N (one epoch).
        #[arg(long, value_parser = parse_size)]
        ops: Option<u64>,
        /// Write zeros in the wall-clock columns so output is reproducible.
        #[arg(long)]
        no_timing: bool,
    },
}

/// Accepts `4096` or `2^12`.
fn parse_size(s: &str) -> Result<u64, String> {
    match s.split_once('^') {
        Some(("2", e)) => {
            let e: u32 = e.trim().parse().map_err(|_| format!("bad exponent in {s:?}"))?;
            1u64.checked_shl(e).filter(|_| e < 64).ok_or_else(|| format!("{s:?} too large"))
        }
        Some(_) => Err(format!("only powers of two may use ^, got {s:?}")),
        None => s.trim().parse().map_err(|_| format!("not a number: {s:?}")),
    }
}

fn parse_role(s: &str) -> Result<u8, String> {
    match s {
        "0" | "s0" => Ok(0),
        "1" | "s1" => Ok(1),
        _ => Err(format!("role must be 0 or 1, got {s:?}")),
    }
}

fn parse_servers(s: &str) -> Result<[SocketAddr; 2]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        bail!("--servers needs two comma-separated addresses");
    }
    Ok([
        parts[0].trim().parse().with_context(|| format!("bad address {:?}", parts[0]))?,
        parts[1].trim().parse().with_context(|| format!("bad address {:?}", parts[1]))?,
    ])
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Command::Serve { role, listen, n, block_size, latency_ms, shuffle_seed } => {
            params_from_n(n, block_size)?;
            let listener = TcpListener::bind(&listen).with_context(|| format!("binding {listen}"))?;
            eprintln!("s{role} listening on {}", listener.local_addr()?);
            tcp::serve(listener, move || {
                let s = Server::new(role, shuffle_seed).with_expected_params(n, block_size);
                match latency_ms {
                    Some(ms) => s.with_latency(ms),
                    None => s,
                }
            })?;
        }
        Command::Run {
            scheme,
            transport,
            servers,
            n,
            block_size,
            ops,
            seed,
            zipf,
            read_fraction,
            latency_ms,
        } => {
            let transport = match transport.as_str() {
                "inproc" => TransportKind::InProc,
                "tcp" => {
                    let s = servers.context("--servers is required with --transport tcp")?;
                    TransportKind::Tcp(parse_servers(&s)?)
                }
                other => bail!("unknown transport {other:?}"),
            };
            let workload = WorkloadSpec {
                seed,
                n_ops: ops.unwrap_or(n) as usize,
                read_fraction,
                dist: zipf.map_or(AddressDist::Uniform, AddressDist::Zipf),
            };
            let cfg = RunConfig { scheme, n, block_size, workload, transport, latency_ms };
            let report = run(&cfg)?;
            print!("{}", runner::describe(&report));
            println!("oracle       {} accesses, 0 mismatches", report.n_ops);
        }
        Command::Bench { n_list, b_list, schemes, csv, seed, ops, no_timing } => {
            let mut reports = Vec::new();
            for &n in &n_list {
                for &b in &b_list {
                    for &scheme in &schemes {
                        let workload = WorkloadSpec::uniform(seed, ops.unwrap_or(n) as usize);
                        let r = run(&RunConfig::inproc(scheme, n, b, workload))
                            .with_context(|| format!("{} N={n} B={b}", scheme.name()))?;
                        eprintln!("{} N={n} B={b}: {:.1} bytes/access", scheme.name(), r.amortized_bytes());
                        reports.push(r);
                    }
                }
            }
            let out = to_csv(&reports, !no_timing);
            match csv {
                Some(path) => std::fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{out}"),
            }
        }
    }
    Ok(())
}
