//! (72,64) extended Hamming SEC-DED code.
//!
//! Layout: Hamming positions 1..=71, with parity bits at the powers of two
//! (1, 2, 4, .., 64) and the 64 data bits filling the remaining positions in
//! ascending order. An overall even-parity bit sits at position 0.
//!
//! Bit numbering used by [`CodeWord::flip`] and [`EccStatus::Corrected`]:
//! 0..=63 are data bits (LSB first), 64 is the overall parity bit and
//! 65..=71 are the Hamming parity bits for positions 1, 2, 4, .., 64.
//! The check byte stores the overall parity in bit 0 and Hamming parity
//! `p_(2^j)` in bit `j + 1`.

use serde::{Deserialize, Serialize};

pub const CODEWORD_BITS: u32 = 72;

/// Hamming position of each data bit.
const DATA_POS: [u8; 64] = {
    let mut out = [0u8; 64];
    let mut pos = 1u8;
    let mut i = 0;
    while i < 64 {
        if pos & (pos - 1) != 0 {
            out[i] = pos;
            i += 1;
        }
        pos += 1;
    }
    out
};

/// Data-bit masks covered by each Hamming parity bit.
const PARITY_MASKS: [u64; 7] = {
    let mut masks = [0u64; 7];
    let mut i = 0;
    while i < 64 {
        let mut j = 0;
        while j < 7 {
            if DATA_POS[i] & (1 << j) != 0 {
                masks[j] |= 1 << i;
            }
            j += 1;
        }
        i += 1;
    }
    masks
};

/// Inverse of `DATA_POS`; 0xFF marks parity positions.
const POS_TO_DATA: [u8; 128] = {
    let mut out = [0xFFu8; 128];
    let mut i = 0;
    while i < 64 {
        out[DATA_POS[i] as usize] = i as u8;
        i += 1;
    }
    out
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CodeWord {
    pub data: u64,
    pub check: u8,
}

impl CodeWord {
    /// Flips one of the 72 codeword bits.
    pub fn flip(&mut self, bit: u32) {
        assert!(bit < CODEWORD_BITS, "codeword bit {bit} out of range");
        if bit < 64 {
            self.data ^= 1 << bit;
        } else {
            self.check ^= 1 << (bit - 64);
        }
    }

    pub fn to_bytes(self) -> [u8; 9] {
        let mut out = [0u8; 9];
        out[..8].copy_from_slice(&self.data.to_le_bytes());
        out[8] = self.check;
        out
    }

    pub fn from_bytes(b: &[u8; 9]) -> Self {
        CodeWord {
            data: u64::from_le_bytes(b[..8].try_into().unwrap()),
            check: b[8],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EccStatus {
    Clean,
    Corrected(u32),
    Uncorrectable,
}

fn hamming_parity(data: u64) -> u8 {
    let mut p = 0u8;
    for (j, mask) in PARITY_MASKS.iter().enumerate() {
        p |= (((data & mask).count_ones() & 1) as u8) << j;
    }
    p
}

pub fn ecc_encode(data: u64) -> CodeWord {
    let hp = hamming_parity(data);
    let overall = ((data.count_ones() + hp.count_ones()) & 1) as u8;
    CodeWord {
        data,
        check: (hp << 1) | overall,
    }
}

/// Syndrome decode. Uncorrectable words return their data bits unchanged.
pub fn ecc_decode(cw: CodeWord) -> (u64, EccStatus) {
    let syndrome = hamming_parity(cw.data) ^ (cw.check >> 1);
    let parity_odd = (cw.data.count_ones() + cw.check.count_ones()) & 1 == 1;
    match (syndrome, parity_odd) {
        (0, false) => (cw.data, EccStatus::Clean),
        (0, true) => (cw.data, EccStatus::Corrected(64)),
        (s, true) if s.is_power_of_two() => {
            (cw.data, EccStatus::Corrected(65 + s.trailing_zeros()))
        }
        // positions past 71 only arise from three or more flips
        (s, true) => match POS_TO_DATA[s as usize] {
            0xFF => (cw.data, EccStatus::Uncorrectable),
            bit => (cw.data ^ (1 << bit), EccStatus::Corrected(bit as u32)),
        },
        (_, false) => (cw.data, EccStatus::Uncorrectable),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn layout_tables_are_consistent() {
        assert_eq!(DATA_POS[0], 3);
        assert_eq!(DATA_POS[63], 71);
        for (i, p) in DATA_POS.iter().enumerate() {
            assert!(!p.is_power_of_two());
            assert_eq!(POS_TO_DATA[*p as usize] as usize, i);
        }
    }

    #[test]
    fn zero_word_is_zero_codeword() {
        assert_eq!(ecc_encode(0), CodeWord { data: 0, check: 0 });
    }

    #[test]
    fn clean_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let w: u64 = rng.random();
            assert_eq!(ecc_decode(ecc_encode(w)), (w, EccStatus::Clean));
        }
    }

    #[test]
    fn check_bits_injective_over_random_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut seen = HashSet::new();
        let mut words = HashSet::new();
        for _ in 0..100_000 {
            let w: u64 = rng.random();
            if words.insert(w) {
                assert!(seen.insert(ecc_encode(w)));
            }
        }
    }

    #[test]
    fn every_single_flip_is_corrected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w: u64 = rng.random();
        let cw = ecc_encode(w);
        for bit in 0..CODEWORD_BITS {
            let mut bad = cw;
            bad.flip(bit);
            assert_eq!(ecc_decode(bad), (w, EccStatus::Corrected(bit)), "bit {bit}");
        }
    }

    #[test]
    fn every_double_flip_is_detected() {
        let w = 0xDEAD_BEEF_0123_4567;
        let cw = ecc_encode(w);
        let mut n = 0;
        for a in 0..CODEWORD_BITS {
            for b in (a + 1)..CODEWORD_BITS {
                let mut bad = cw;
                bad.flip(a);
                bad.flip(b);
                assert_eq!(ecc_decode(bad).1, EccStatus::Uncorrectable);
                n += 1;
            }
        }
        assert_eq!(n, 2556);
    }

    #[test]
    fn byte_round_trip() {
        let cw = ecc_encode(0x0102_0304_0506_0708);
        assert_eq!(CodeWord::from_bytes(&cw.to_bytes()), cw);
    }

    proptest::proptest! {
        #[test]
        fn at_most_two_flips_never_silently_corrupt(w: u64, a in 0u32..72, b in 0u32..72) {
            let mut cw = ecc_encode(w);
            cw.flip(a);
            if a != b { cw.flip(b); }
            let (data, status) = ecc_decode(cw);
            if status != EccStatus::Uncorrectable {
                proptest::prop_assert_eq!(data, w);
            }
        }
    }
}
