//! Plaintext reference store used to check every returned value.

use crate::client::{AccessRequest, Op};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleStore {
    values: Vec<Vec<u8>>,
}

impl OracleStore {
    pub fn new<I: IntoIterator<Item = (u64, Vec<u8>)>>(initial: I) -> Self {
        let mut values = Vec::new();
        for (addr, v) in initial {
            let addr = addr as usize;
            if values.len() <= addr {
                values.resize(addr + 1, Vec::new());
            }
            values[addr] = v;
        }
        Self { values }
    }

    pub fn get(&self, addr: u64) -> &[u8] {
        &self.values[addr as usize]
    }

    /// Applies `req` and returns the value held before it.
    pub fn access(&mut self, req: &AccessRequest) -> Vec<u8> {
        let slot = &mut self.values[req.addr as usize];
        match (req.op, &req.write_value) {
            (Op::Write, Some(v)) => std::mem::replace(slot, v.clone()),
            _ => slot.clone(),
        }
    }

    /// Checks one returned value; `index` is reported on divergence.
    pub fn check(&mut self, index: usize, req: &AccessRequest, got: &[u8]) -> Result<()> {
        if self.access(req) == got {
            Ok(())
        } else {
            Err(Error::MismatchAt(index))
        }
    }
}

/// Replays `reqs` against `oracle` and compares each against `returns`.
pub fn oracle_replay(oracle: &mut OracleStore, reqs: &[AccessRequest], returns: &[Vec<u8>]) -> Result<()> {
    for (i, req) in reqs.iter().enumerate() {
        let got = returns.get(i).ok_or(Error::MismatchAt(i))?;
        oracle.check(i, req, got)?;
    }
    if returns.len() > reqs.len() {
        return Err(Error::MismatchAt(reqs.len()));
    }
    Ok(())
}
