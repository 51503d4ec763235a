use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{BankLabel, Upsettable};
use crate::simkernel::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FaultTarget {
    Bank(BankLabel),
    Config,
    BootPrimary,
}

impl fmt::Display for FaultTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultTarget::Bank(l) => f.write_str(l.name()),
            FaultTarget::Config => f.write_str("config"),
            FaultTarget::BootPrimary => f.write_str("boot-primary"),
        }
    }
}

impl FromStr for FaultTarget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "config" => Ok(FaultTarget::Config),
            "boot-primary" => Ok(FaultTarget::BootPrimary),
            other => other
                .parse::<BankLabel>()
                .map(FaultTarget::Bank)
                .map_err(|_| format!("unknown fault target `{s}`")),
        }
    }
}

impl TryFrom<String> for FaultTarget {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FaultTarget> for String {
    fn from(t: FaultTarget) -> String {
        t.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledFlip {
    pub at: SimTime,
    pub target: FaultTarget,
    pub bit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub t: SimTime,
    pub target: FaultTarget,
    pub bit: u64,
    pub scheduled: bool,
}

/// Poisson single-event-upset source plus an explicit flip schedule.
#[derive(Debug, Clone)]
pub struct FaultInjector {
    /// Expected upsets per second per megabit.
    pub seu_rate: f64,
    pub targets: BTreeSet<FaultTarget>,
    pub seed: u64,
    rng: ChaCha8Rng,
    schedule: Vec<ScheduledFlip>,
    next_scheduled: usize,
    injected: u64,
}

impl FaultInjector {
    pub fn new(
        seu_rate: f64,
        targets: impl IntoIterator<Item = FaultTarget>,
        seed: u64,
        mut schedule: Vec<ScheduledFlip>,
    ) -> Self {
        schedule.sort_by_key(|s| s.at);
        FaultInjector {
            seu_rate,
            targets: targets.into_iter().collect(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            schedule,
            next_scheduled: 0,
            injected: 0,
        }
    }

    pub fn schedule(&self) -> &[ScheduledFlip] {
        &self.schedule
    }

    pub fn injected(&self) -> u64 {
        self.injected
    }

    /// Expected number of stochastic flips for one target over `dt_ms`.
    pub fn expected_flips(&self, bits: u64, dt_ms: u64) -> f64 {
        self.seu_rate * (dt_ms as f64 / 1000.0) * (bits as f64 / 1e6)
    }

    /// Draws and applies the upsets for the interval ending at `now`, then
    /// any scheduled flips due by `now`. `memories` must be passed in a
    /// stable order for runs to be reproducible.
    pub fn inject_faults(
        &mut self,
        now: SimTime,
        dt_ms: u64,
        memories: &mut [&mut dyn Upsettable],
    ) -> Vec<FaultEvent> {
        let mut events = Vec::new();
        for mem in memories.iter_mut() {
            let target = mem.target();
            let bits = mem.bit_len();
            if !self.targets.contains(&target) || bits == 0 {
                continue;
            }
            let lambda = self.expected_flips(bits, dt_ms);
            if lambda <= 0.0 {
                continue;
            }
            let n = Poisson::new(lambda).unwrap().sample(&mut self.rng) as u64;
            for _ in 0..n {
                let bit = self.rng.random_range(0..bits);
                mem.flip_bit(bit);
                events.push(FaultEvent {
                    t: now,
                    target,
                    bit,
                    scheduled: false,
                });
            }
        }
        while let Some(s) = self.schedule.get(self.next_scheduled).copied() {
            if s.at > now {
                break;
            }
            self.next_scheduled += 1;
            if let Some(mem) = memories.iter_mut().find(|m| m.target() == s.target) {
                if s.bit < mem.bit_len() {
                    mem.flip_bit(s.bit);
                    events.push(FaultEvent {
                        t: now,
                        target: s.target,
                        bit: s.bit,
                        scheduled: true,
                    });
                }
            }
        }
        self.injected += events.len() as u64;
        events
    }
}
