//! Shared housekeeping memory: fixed-size slots in an ECC-protected flash
//! region, addressed by index only and written circularly.

use serde_json::json;
use thiserror::Error;

use crate::faulttol::{BankLabel, MemoryBank};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TelemetryError {
    #[error("record of {len} bytes does not fit a {max}-byte slot")]
    Oversized { len: usize, max: usize },
}

/// Each slot holds a little-endian u16 length followed by the record.
#[derive(Debug, Clone)]
pub struct SharedTelemetryMemory {
    bank: MemoryBank,
    slot_size: usize,
    capacity: usize,
    write_cursor: usize,
    writes: u64,
}

impl SharedTelemetryMemory {
    pub fn new(slot_size: usize, capacity: usize) -> Self {
        assert!(slot_size > 2 && capacity > 0);
        SharedTelemetryMemory {
            bank: MemoryBank::new(BankLabel::TelemetryFlash, (slot_size * capacity).div_ceil(8)),
            slot_size,
            capacity,
            write_cursor: 0,
            writes: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn max_record(&self) -> usize {
        self.slot_size - 2
    }

    pub fn write_cursor(&self) -> usize {
        self.write_cursor
    }

    /// Total records ever written, including overwritten ones.
    pub fn writes(&self) -> u64 {
        self.writes
    }

    pub fn bank(&self) -> &MemoryBank {
        &self.bank
    }

    pub fn bank_mut(&mut self) -> &mut MemoryBank {
        &mut self.bank
    }

    pub fn write_telemetry(&mut self, record: &[u8]) -> Result<usize, TelemetryError> {
        if record.len() > self.max_record() {
            return Err(TelemetryError::Oversized {
                len: record.len(),
                max: self.max_record(),
            });
        }
        let slot = self.write_cursor;
        let base = slot * self.slot_size;
        let mut buf = vec![0u8; self.slot_size];
        buf[..2].copy_from_slice(&(record.len() as u16).to_le_bytes());
        buf[2..2 + record.len()].copy_from_slice(record);
        self.bank.write_bytes(base, &buf);
        self.write_cursor = (slot + 1) % self.capacity;
        self.writes += 1;
        Ok(slot)
    }

    /// Contents of a slot, or `None` if it was never written.
    pub fn read_slot(&self, slot: usize) -> Option<Vec<u8>> {
        if slot >= self.capacity || slot as u64 >= self.writes {
            return None;
        }
        let (bytes, _) = self.bank.read_bytes(slot * self.slot_size, self.slot_size);
        let len = (u16::from_le_bytes([bytes[0], bytes[1]]) as usize).min(self.max_record());
        Some(bytes[2..2 + len].to_vec())
    }

    /// Records in write order, oldest first, with the sequence number of
    /// each write.
    pub fn records_since(&self, first_write: u64) -> Vec<(u64, Vec<u8>)> {
        let oldest = self.writes.saturating_sub(self.capacity as u64);
        (first_write.max(oldest)..self.writes)
            .map(|w| (w, self.read_slot((w % self.capacity as u64) as usize).unwrap()))
            .collect()
    }

    pub fn dump_jsonl(&self) -> String {
        let mut out = String::new();
        for (seq, rec) in self.records_since(0) {
            let hex: String = rec.iter().map(|b| format!("{b:02x}")).collect();
            let line = json!({
                "slot": seq % self.capacity as u64,
                "seq": seq,
                "len": rec.len(),
                "hex": hex,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_write_is_slot_zero() {
        let mut m = SharedTelemetryMemory::new(32, 8);
        assert_eq!(m.write_telemetry(b"abc").unwrap(), 0);
        assert_eq!(m.read_slot(0).unwrap(), b"abc");
        assert_eq!(m.read_slot(1), None);
    }

    #[test]
    fn wraps_after_capacity() {
        let mut m = SharedTelemetryMemory::new(32, 8);
        let slots: Vec<usize> = (0..10u8).map(|i| m.write_telemetry(&[i]).unwrap()).collect();
        assert_eq!(&slots[8..], &[0, 1]);
        assert_eq!(m.read_slot(0).unwrap(), vec![8]);
        assert_eq!(m.records_since(0).len(), 8);
        assert_eq!(m.records_since(0)[0].1, vec![2]);
    }

    #[test]
    fn oversized_rejected() {
        let mut m = SharedTelemetryMemory::new(32, 8);
        assert_eq!(
            m.write_telemetry(&[0; 31]),
            Err(TelemetryError::Oversized { len: 31, max: 30 })
        );
    }

    #[test]
    fn random_writes_read_back_last_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = SharedTelemetryMemory::new(40, 13);
        let mut oracle: Vec<Option<Vec<u8>>> = vec![None; 13];
        for _ in 0..500 {
            let len = rng.random_range(0..=38);
            let rec: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            let slot = m.write_telemetry(&rec).unwrap();
            oracle[slot] = Some(rec);
            let probe = rng.random_range(0..13);
            assert_eq!(m.read_slot(probe), oracle[probe]);
        }
    }
}
