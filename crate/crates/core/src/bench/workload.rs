//! Seeded access workloads and initial database contents.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Zipf};

use crate::client::AccessRequest;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AddressDist {
    Uniform,
    Zipf(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadSpec {
    pub seed: u64,
    pub n_ops: usize,
    /// Probability that an operation is a read.
    pub read_fraction: f64,
    pub dist: AddressDist,
}

impl WorkloadSpec {
    pub fn uniform(seed: u64, n_ops: usize) -> Self {
        Self { seed, n_ops, read_fraction: 0.5, dist: AddressDist::Uniform }
    }

    /// The request stream for a database of `n` blocks of `block_size` bytes.
    pub fn requests(&self, n: u64, block_size: usize) -> Requests {
        let zipf = match self.dist {
            AddressDist::Uniform => None,
            AddressDist::Zipf(theta) => Some(Zipf::new(n, theta).expect("zipf exponent must be positive")),
        };
        Requests {
            rng: ChaCha20Rng::seed_from_u64(self.seed ^ 0x5157_4f52_4b4c_4f41),
            left: self.n_ops,
            n,
            block_size,
            read_fraction: self.read_fraction,
            zipf,
        }
    }
}

pub struct Requests {
    rng: ChaCha20Rng,
    left: usize,
    n: u64,
    block_size: usize,
    read_fraction: f64,
    zipf: Option<Zipf<f64>>,
}

impl Iterator for Requests {
    type Item = AccessRequest;

    fn next(&mut self) -> Option<AccessRequest> {
        if self.left == 0 {
            return None;
        }
        self.left -= 1;
        let addr = match &self.zipf {
            None => self.rng.gen_range(0..self.n),
            Some(z) => (z.sample(&mut self.rng) as u64).clamp(1, self.n) - 1,
        };
        if self.rng.gen_bool(self.read_fraction) {
            Some(AccessRequest::read(addr))
        } else {
            let mut value = vec![0u8; self.block_size];
            self.rng.fill_bytes(&mut value);
            Some(AccessRequest::write(addr, value))
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.left, Some(self.left))
    }
}

/// Deterministic initial contents: `(addr, value)` for every address in order.
pub fn initial_database(seed: u64, n: u64, block_size: usize) -> impl Iterator<Item = (u64, Vec<u8>)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x494e_4954_4442_0000);
    (0..n).map(move |addr| {
        let mut v = vec![0u8; block_size];
        rng.fill_bytes(&mut v);
        (addr, v)
    })
}
