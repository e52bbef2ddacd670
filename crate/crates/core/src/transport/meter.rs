//! Byte counters per server, direction and protocol phase.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Setup,
    Scan,
    LevelEll,
    LevelsDeep,
    WriteBack,
    Rebuild,
}

impl Phase {
    pub const ALL: [Phase; 6] =
        [Phase::Setup, Phase::Scan, Phase::LevelEll, Phase::LevelsDeep, Phase::WriteBack, Phase::Rebuild];

    fn index(self) -> usize {
        self as usize
    }

    pub fn is_access(self) -> bool {
        matches!(self, Phase::Scan | Phase::LevelEll | Phase::LevelsDeep | Phase::WriteBack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToServer,
    ToClient,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counter {
    pub frames: u64,
    /// Payload plus header bytes.
    pub wire_bytes: u64,
    pub payload_bytes: u64,
}

impl Counter {
    fn add(&mut self, other: &Counter) {
        self.frames += other.frames;
        self.wire_bytes += other.wire_bytes;
        self.payload_bytes += other.payload_bytes;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BandwidthMeter {
    // [server][direction][phase]
    counts: [[[Counter; 6]; 2]; 2],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MeterReport {
    pub setup: Counter,
    pub access: Counter,
    pub rebuild: Counter,
}

impl MeterReport {
    pub fn online(&self) -> Counter {
        let mut c = self.access;
        c.add(&self.rebuild);
        c
    }
}

impl BandwidthMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, server: usize, dir: Direction, phase: Phase, payload_len: usize) {
        let c = &mut self.counts[server][dir as usize][phase.index()];
        c.frames += 1;
        c.payload_bytes += payload_len as u64;
        c.wire_bytes += (payload_len + super::frame::HEADER_BYTES) as u64;
    }

    pub fn get(&self, server: usize, dir: Direction, phase: Phase) -> Counter {
        self.counts[server][dir as usize][phase.index()]
    }

    /// Both servers and both directions for one phase.
    pub fn phase_total(&self, phase: Phase) -> Counter {
        let mut c = Counter::default();
        for s in 0..2 {
            for d in 0..2 {
                c.add(&self.counts[s][d][phase.index()]);
            }
        }
        c
    }

    pub fn total(&self) -> Counter {
        let mut c = Counter::default();
        for p in Phase::ALL {
            c.add(&self.phase_total(p));
        }
        c
    }

    pub fn report(&self) -> MeterReport {
        let mut r = MeterReport::default();
        for p in Phase::ALL {
            let c = self.phase_total(p);
            match p {
                Phase::Setup => r.setup.add(&c),
                Phase::Rebuild => r.rebuild.add(&c),
                _ => r.access.add(&c),
            }
        }
        r
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

pub fn meter_report(meter: &BandwidthMeter) -> MeterReport {
    meter.report()
}
