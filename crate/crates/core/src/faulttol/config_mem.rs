use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FaultTarget, Upsettable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfigScrubReport {
    pub divergence_before: u64,
    pub divergence_after: u64,
    pub words_rewritten: u64,
}

/// Simulated FPGA configuration memory with a protected golden copy.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigMemory {
    bits: Vec<u64>,
    golden: Vec<u64>,
    n_bits: u64,
}

impl ConfigMemory {
    /// A bitstream of `n_bits` pseudo-random bits derived from `seed`.
    pub fn new(n_bits: u64, seed: u64) -> Self {
        let words = n_bits.div_ceil(64) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut golden: Vec<u64> = (0..words).map(|_| rng.random()).collect();
        let tail = n_bits % 64;
        if tail != 0 {
            *golden.last_mut().unwrap() &= (1u64 << tail) - 1;
        }
        ConfigMemory {
            bits: golden.clone(),
            golden,
            n_bits,
        }
    }

    pub fn n_bits(&self) -> u64 {
        self.n_bits
    }

    pub fn divergence(&self) -> u64 {
        self.bits
            .iter()
            .zip(&self.golden)
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum()
    }

    /// Rewrites every diverged word from the golden copy.
    pub fn scrub(&mut self) -> ConfigScrubReport {
        let divergence_before = self.divergence();
        let mut words_rewritten = 0;
        for (live, gold) in self.bits.iter_mut().zip(&self.golden) {
            if live != gold {
                *live = *gold;
                words_rewritten += 1;
            }
        }
        ConfigScrubReport {
            divergence_before,
            divergence_after: self.divergence(),
            words_rewritten,
        }
    }
}

impl Upsettable for ConfigMemory {
    fn target(&self) -> FaultTarget {
        FaultTarget::Config
    }

    fn bit_len(&self) -> u64 {
        self.n_bits
    }

    fn flip_bit(&mut self, bit: u64) {
        assert!(bit < self.n_bits);
        self.bits[(bit / 64) as usize] ^= 1 << (bit % 64);
    }
}
