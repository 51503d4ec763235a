//! SPI flash behind a burst-mode controller. Each burst ends in a
//! completion interrupt; the top half stores the data, and a bottom half
//! run as the following event issues the next block address.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::i2c::BusError;
use crate::faulttol::{BankLabel, MemoryBank, ReadStats, Upsettable};
use crate::simkernel::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpiFault {
    #[default]
    None,
    /// The given 1-based burst of the next transfer never completes.
    Timeout { burst: u32 },
    /// Every burst read upsets one stored bit.
    Bitrot,
}

#[derive(Debug, Clone)]
pub struct SpiFlashModel {
    pub page_size: usize,
    pub burst_size: usize,
    pub read_latency_ticks: u64,
    pub timeout_ticks: u64,
    bank: MemoryBank,
    fault: SpiFault,
    rng: ChaCha8Rng,
}

impl SpiFlashModel {
    pub fn new(label: BankLabel, capacity: usize, burst_size: usize, read_latency_ticks: u64) -> Self {
        assert!(burst_size > 0);
        SpiFlashModel {
            page_size: 256,
            burst_size,
            read_latency_ticks,
            timeout_ticks: 50,
            bank: MemoryBank::new(label, capacity.div_ceil(8)),
            fault: SpiFault::None,
            rng: ChaCha8Rng::seed_from_u64(label as u64),
        }
    }

    pub fn capacity(&self) -> usize {
        self.bank.len_bytes()
    }

    pub fn bank(&self) -> &MemoryBank {
        &self.bank
    }

    pub fn bank_mut(&mut self) -> &mut MemoryBank {
        &mut self.bank
    }

    pub fn fault(&self) -> SpiFault {
        self.fault
    }

    pub fn set_fault(&mut self, fault: SpiFault) {
        self.fault = fault;
    }

    pub fn write(&mut self, offset: usize, bytes: &[u8]) -> Result<(), BusError> {
        self.check_range(offset, bytes.len())?;
        self.bank.write_bytes(offset, bytes);
        Ok(())
    }

    pub fn read(&mut self, offset: usize, len: usize) -> Result<(Vec<u8>, ReadStats), BusError> {
        self.check_range(offset, len)?;
        if self.fault == SpiFault::Bitrot {
            let bit = self.rng.random_range(0..self.bank.bit_len());
            self.bank.flip_bit(bit);
        }
        Ok(self.bank.read_bytes(offset, len))
    }

    fn check_range(&self, start: usize, len: usize) -> Result<(), BusError> {
        if start + len > self.capacity() {
            return Err(BusError::SpiRange {
                start,
                len,
                capacity: self.capacity(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransferId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpiEvent {
    BurstDone(TransferId),
    BottomHalf(TransferId),
    Timeout(TransferId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BurstTransfer {
    pub start: usize,
    pub total: usize,
    pub sink: Vec<u8>,
    pub addresses_issued: u32,
    pub completions: u32,
    pub corrected: u64,
    pub uncorrectable: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransferResult {
    Finished(BurstTransfer),
    Aborted { transfer: BurstTransfer, error: BusError },
}

/// What the caller must do after a controller step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpiStep {
    pub schedule: Vec<(SimTime, SpiEvent)>,
    pub result: Option<(TransferId, TransferResult)>,
}

#[derive(Debug, Clone, Default)]
pub struct SpiController {
    transfers: BTreeMap<TransferId, BurstTransfer>,
    next_id: u32,
}

impl SpiController {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn in_flight(&self) -> usize {
        self.transfers.len()
    }

    pub fn transfer(&self, id: TransferId) -> Option<&BurstTransfer> {
        self.transfers.get(&id)
    }

    /// Drops every transfer, as a power cycle does.
    pub fn reset(&mut self) {
        self.transfers.clear();
    }

    pub fn spi_burst_read(
        &mut self,
        flash: &mut SpiFlashModel,
        now: SimTime,
        start: usize,
        total: usize,
    ) -> Result<(TransferId, SpiStep), BusError> {
        flash.check_range(start, total)?;
        let id = TransferId(self.next_id);
        self.next_id += 1;
        self.transfers.insert(
            id,
            BurstTransfer {
                start,
                total,
                sink: Vec::with_capacity(total),
                addresses_issued: 0,
                completions: 0,
                corrected: 0,
                uncorrectable: 0,
            },
        );
        if total == 0 {
            let t = self.transfers.remove(&id).unwrap();
            return Ok((
                id,
                SpiStep {
                    schedule: vec![],
                    result: Some((id, TransferResult::Finished(t))),
                },
            ));
        }
        let step = self.issue(flash, now, id);
        Ok((id, step))
    }

    fn issue(&mut self, flash: &mut SpiFlashModel, now: SimTime, id: TransferId) -> SpiStep {
        let t = self.transfers.get_mut(&id).expect("live transfer");
        t.addresses_issued += 1;
        let ev = match flash.fault {
            SpiFault::Timeout { burst } if burst == t.addresses_issued => {
                flash.fault = SpiFault::None;
                (now + flash.timeout_ticks, SpiEvent::Timeout(id))
            }
            _ => (now + flash.read_latency_ticks, SpiEvent::BurstDone(id)),
        };
        SpiStep {
            schedule: vec![ev],
            result: None,
        }
    }

    /// Top half, run from the completion interrupt.
    pub fn top_half(&mut self, flash: &mut SpiFlashModel, now: SimTime, id: TransferId) -> SpiStep {
        let Some(t) = self.transfers.get_mut(&id) else {
            return SpiStep::default();
        };
        let offset = t.start + t.sink.len();
        let len = flash.burst_size.min(t.total - t.sink.len());
        let (bytes, stats) = flash.read(offset, len).expect("range checked at start");
        t.sink.extend_from_slice(&bytes);
        t.completions += 1;
        t.corrected += stats.corrected;
        t.uncorrectable += stats.uncorrectable;
        SpiStep {
            schedule: vec![(now, SpiEvent::BottomHalf(id))],
            result: None,
        }
    }

    /// Bottom half: next block address, or hand back the finished transfer.
    pub fn bottom_half(&mut self, flash: &mut SpiFlashModel, now: SimTime, id: TransferId) -> SpiStep {
        let Some(t) = self.transfers.get(&id) else {
            return SpiStep::default();
        };
        if t.sink.len() < t.total {
            return self.issue(flash, now, id);
        }
        let t = self.transfers.remove(&id).unwrap();
        SpiStep {
            schedule: vec![],
            result: Some((id, TransferResult::Finished(t))),
        }
    }

    pub fn on_timeout(&mut self, id: TransferId) -> SpiStep {
        let Some(t) = self.transfers.remove(&id) else {
            return SpiStep::default();
        };
        let error = BusError::SpiTimeout(t.sink.len());
        SpiStep {
            schedule: vec![],
            result: Some((id, TransferResult::Aborted { transfer: t, error })),
        }
    }
}
