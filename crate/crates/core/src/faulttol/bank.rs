use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ecc::{ecc_decode, ecc_encode, CodeWord, EccStatus, CODEWORD_BITS};
use super::Upsettable;
use super::FaultTarget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BankLabel {
    ImageFlash,
    CompressedFlash,
    TelemetryFlash,
    BootFlash,
}

impl BankLabel {
    pub const ALL: [BankLabel; 4] = [
        BankLabel::ImageFlash,
        BankLabel::CompressedFlash,
        BankLabel::TelemetryFlash,
        BankLabel::BootFlash,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BankLabel::ImageFlash => "image-flash",
            BankLabel::CompressedFlash => "compressed-flash",
            BankLabel::TelemetryFlash => "telemetry-flash",
            BankLabel::BootFlash => "boot-flash",
        }
    }

    fn code(self) -> u8 {
        BankLabel::ALL.iter().position(|l| *l == self).unwrap() as u8
    }
}

impl fmt::Display for BankLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BankLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BankLabel::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s)
            .ok_or_else(|| format!("unknown bank `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScrubReport {
    pub corrected: u64,
    pub uncorrectable: u64,
    pub words_scanned: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReadStats {
    pub corrected: u64,
    pub uncorrectable: u64,
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("bank dump too short: {0} bytes")]
    Truncated(usize),
    #[error("not a bank dump (bad magic)")]
    BadMagic,
    #[error("unsupported bank dump version {0}")]
    Version(u16),
    #[error("unknown bank label code {0}")]
    Label(u8),
    #[error("dump declares {declared} words but carries {actual}")]
    Length { declared: usize, actual: usize },
}

const DUMP_MAGIC: &[u8; 4] = b"ECCB";
const DUMP_VERSION: u16 = 1;
const DUMP_HEADER: usize = 12;

/// An array of SEC-DED protected 64-bit words.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    pub label: BankLabel,
    words: Vec<CodeWord>,
    corrected: u64,
    bad_words: BTreeSet<usize>,
}

impl MemoryBank {
    pub fn new(label: BankLabel, n_words: usize) -> Self {
        MemoryBank {
            label,
            words: vec![CodeWord::default(); n_words],
            corrected: 0,
            bad_words: BTreeSet::new(),
        }
    }

    /// Encodes `bytes`, zero-padding the final word.
    pub fn from_bytes(label: BankLabel, bytes: &[u8]) -> Self {
        let words = bytes
            .chunks(8)
            .map(|c| {
                let mut w = [0u8; 8];
                w[..c.len()].copy_from_slice(c);
                ecc_encode(u64::from_le_bytes(w))
            })
            .collect();
        MemoryBank {
            label,
            words,
            corrected: 0,
            bad_words: BTreeSet::new(),
        }
    }

    pub fn len_words(&self) -> usize {
        self.words.len()
    }

    pub fn len_bytes(&self) -> usize {
        self.words.len() * 8
    }

    pub fn words(&self) -> &[CodeWord] {
        &self.words
    }

    pub fn word_mut(&mut self, i: usize) -> &mut CodeWord {
        &mut self.words[i]
    }

    pub fn corrected_count(&self) -> u64 {
        self.corrected
    }

    /// Number of distinct words flagged uncorrectable by scrubbing.
    pub fn uncorrectable_count(&self) -> u64 {
        self.bad_words.len() as u64
    }

    pub fn bad_words(&self) -> &BTreeSet<usize> {
        &self.bad_words
    }

    pub fn read_word(&self, i: usize) -> (u64, EccStatus) {
        ecc_decode(self.words[i])
    }

    pub fn write_word(&mut self, i: usize, data: u64) {
        self.words[i] = ecc_encode(data);
        self.bad_words.remove(&i);
    }

    /// Decoded read. Corrections are applied to the returned bytes only;
    /// the stored words are left for the scrubber.
    pub fn read_bytes(&self, offset: usize, len: usize) -> (Vec<u8>, ReadStats) {
        let mut stats = ReadStats::default();
        let mut out = Vec::with_capacity(len);
        if len == 0 {
            return (out, stats);
        }
        let first = offset / 8;
        let last = (offset + len - 1) / 8;
        for i in first..=last {
            let (data, status) = self.read_word(i);
            match status {
                EccStatus::Clean => {}
                EccStatus::Corrected(_) => stats.corrected += 1,
                EccStatus::Uncorrectable => stats.uncorrectable += 1,
            }
            let bytes = data.to_le_bytes();
            let lo = if i == first { offset % 8 } else { 0 };
            let hi = if i == last { (offset + len - 1) % 8 + 1 } else { 8 };
            out.extend_from_slice(&bytes[lo..hi]);
        }
        (out, stats)
    }

    pub fn write_bytes(&mut self, offset: usize, bytes: &[u8]) {
        for (k, b) in bytes.iter().enumerate() {
            let pos = offset + k;
            let i = pos / 8;
            let (data, _) = self.read_word(i);
            let mut le = data.to_le_bytes();
            le[pos % 8] = *b;
            self.write_word(i, u64::from_le_bytes(le));
        }
    }

    /// Decoded contents of the whole bank.
    pub fn data_bytes(&self) -> Vec<u8> {
        self.read_bytes(0, self.len_bytes()).0
    }

    /// One full scrub pass: correct and rewrite single-bit errors, flag
    /// uncorrectable words and leave their bits untouched.
    pub fn scrub(&mut self) -> ScrubReport {
        let mut report = ScrubReport {
            words_scanned: self.words.len() as u64,
            ..ScrubReport::default()
        };
        for i in 0..self.words.len() {
            let (data, status) = ecc_decode(self.words[i]);
            match status {
                EccStatus::Clean => {}
                EccStatus::Corrected(_) => {
                    self.words[i] = ecc_encode(data);
                    self.corrected += 1;
                    report.corrected += 1;
                }
                EccStatus::Uncorrectable => {
                    self.bad_words.insert(i);
                    report.uncorrectable += 1;
                }
            }
        }
        report
    }

    /// Like [`MemoryBank::scrub`] but read-only.
    pub fn audit(&self) -> ScrubReport {
        let mut report = ScrubReport {
            words_scanned: self.words.len() as u64,
            ..ScrubReport::default()
        };
        for w in &self.words {
            match ecc_decode(*w).1 {
                EccStatus::Clean => {}
                EccStatus::Corrected(_) => report.corrected += 1,
                EccStatus::Uncorrectable => report.uncorrectable += 1,
            }
        }
        report
    }

    /// Binary dump: `ECCB`, u16 version, u8 label, u8 reserved, u32 word
    /// count, then 9 bytes per word (data LE, check). All little-endian.
    pub fn to_dump(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(DUMP_HEADER + 9 * self.words.len());
        out.extend_from_slice(DUMP_MAGIC);
        out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
        out.push(self.label.code());
        out.push(0);
        out.extend_from_slice(&(self.words.len() as u32).to_le_bytes());
        for w in &self.words {
            out.extend_from_slice(&w.to_bytes());
        }
        out
    }

    pub fn from_dump(bytes: &[u8]) -> Result<Self, DumpError> {
        if bytes.len() < DUMP_HEADER {
            return Err(DumpError::Truncated(bytes.len()));
        }
        if &bytes[..4] != DUMP_MAGIC {
            return Err(DumpError::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != DUMP_VERSION {
            return Err(DumpError::Version(version));
        }
        let label = *BankLabel::ALL
            .get(bytes[6] as usize)
            .ok_or(DumpError::Label(bytes[6]))?;
        let declared = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[DUMP_HEADER..];
        if body.len() != declared * 9 {
            return Err(DumpError::Length {
                declared,
                actual: body.len() / 9,
            });
        }
        let words = body
            .chunks_exact(9)
            .map(|c| CodeWord::from_bytes(c.try_into().unwrap()))
            .collect();
        Ok(MemoryBank {
            label,
            words,
            corrected: 0,
            bad_words: BTreeSet::new(),
        })
    }

    /// Bad-word map as line-delimited JSON.
    pub fn bad_words_jsonl(&self) -> String {
        let mut out = String::new();
        for i in &self.bad_words {
            let w = self.words[*i];
            out.push_str(
                &serde_json::json!({
                    "bank": self.label.name(),
                    "word": i,
                    "data": format!("{:016x}", w.data),
                    "check": format!("{:02x}", w.check),
                })
                .to_string(),
            );
            out.push('\n');
        }
        out
    }
}

impl Upsettable for MemoryBank {
    fn target(&self) -> FaultTarget {
        FaultTarget::Bank(self.label)
    }

    fn bit_len(&self) -> u64 {
        self.words.len() as u64 * CODEWORD_BITS as u64
    }

    fn flip_bit(&mut self, bit: u64) {
        let word = (bit / CODEWORD_BITS as u64) as usize;
        self.words[word].flip((bit % CODEWORD_BITS as u64) as u32);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bank(n: usize, seed: u64) -> MemoryBank {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bytes: Vec<u8> = (0..n * 8).map(|_| rng.random()).collect();
        MemoryBank::from_bytes(BankLabel::ImageFlash, &bytes)
    }

    #[test]
    fn clean_bank_scrubs_to_zero() {
        let mut b = random_bank(64, 1);
        assert_eq!(
            b.scrub(),
            ScrubReport {
                corrected: 0,
                uncorrectable: 0,
                words_scanned: 64
            }
        );
    }

    #[test]
    fn five_single_flips_corrected_once() {
        let mut b = random_bank(64, 2);
        let before = b.clone();
        for (w, bit) in [(0, 3), (7, 70), (12, 64), (30, 0), (63, 41)] {
            b.word_mut(w).flip(bit);
        }
        assert_eq!(b.scrub().corrected, 5);
        assert_eq!(b.scrub().corrected, 0);
        assert_eq!(b.words(), before.words());
    }

    #[test]
    fn double_flip_flagged_and_preserved() {
        let mut b = random_bank(16, 3);
        b.word_mut(4).flip(1);
        b.word_mut(4).flip(2);
        let damaged = b.words()[4];
        let r = b.scrub();
        assert_eq!(r.uncorrectable, 1);
        assert!(b.bad_words().contains(&4));
        assert_eq!(b.words()[4], damaged);
        assert_eq!(b.uncorrectable_count(), 1);
        // rescanning does not double count the word
        b.scrub();
        assert_eq!(b.uncorrectable_count(), 1);
        assert!(b.bad_words_jsonl().contains("\"word\":4"));
    }

    #[test]
    fn byte_io_round_trip_across_word_edges() {
        let mut b = MemoryBank::new(BankLabel::CompressedFlash, 8);
        b.write_bytes(5, b"hello world");
        let (got, stats) = b.read_bytes(5, 11);
        assert_eq!(got, b"hello world");
        assert_eq!(stats, ReadStats::default());
        b.word_mut(1).flip(9);
        let (got, stats) = b.read_bytes(5, 11);
        assert_eq!(got, b"hello world");
        assert_eq!(stats.corrected, 1);
    }

    #[test]
    fn dump_round_trip_and_errors() {
        let b = random_bank(10, 4);
        let dump = b.to_dump();
        let back = MemoryBank::from_dump(&dump).unwrap();
        assert_eq!(back.words(), b.words());
        assert_eq!(back.label, BankLabel::ImageFlash);
        assert!(matches!(MemoryBank::from_dump(&dump[..5]), Err(DumpError::Truncated(5))));
        assert!(matches!(MemoryBank::from_dump(&dump[..dump.len() - 1]), Err(DumpError::Length { .. })));
        let mut bad = dump.clone();
        bad[0] = b'X';
        assert!(matches!(MemoryBank::from_dump(&bad), Err(DumpError::BadMagic)));
    }

    proptest::proptest! {
        #[test]
        fn one_scrub_restores_any_single_flip_set(seed: u64, picks in proptest::collection::btree_set(0usize..32, 0..32), bits in proptest::collection::vec(0u32..72, 32)) {
            let mut b = random_bank(32, seed);
            let before = b.clone();
            for (k, w) in picks.iter().enumerate() {
                b.word_mut(*w).flip(bits[k]);
            }
            let r = b.scrub();
            proptest::prop_assert_eq!(r.corrected as usize, picks.len());
            proptest::prop_assert_eq!(b.words(), before.words());
        }
    }
}
