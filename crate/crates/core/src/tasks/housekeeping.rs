use thiserror::Error;

use crate::fsm::Mode;
use crate::simkernel::SimTime;

pub const HK_TAG: u8 = b'H';
pub const HK_RECORD_LEN: usize = 81;
pub const MAX_TEMPERATURES: usize = 4;

/// One housekeeping sample. Sensor fields are `None` when the read failed.
#[derive(Debug, Clone, PartialEq)]
pub struct HousekeepingRecord {
    pub timestamp: SimTime,
    pub battery_soc: f64,
    pub omega: Option<[f64; 3]>,
    pub b_field: Option<[f32; 3]>,
    pub temperatures: Vec<f32>,
    pub mode: Mode,
    pub ecc_corrected: u32,
    pub ecc_uncorrectable: u32,
    pub bus_fault_flags: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("housekeeping record must be {HK_RECORD_LEN} bytes, got {0}")]
    Length(usize),
    #[error("not a housekeeping record (tag {0:#04x})")]
    Tag(u8),
    #[error("bad field: {0}")]
    Field(&'static str),
}

impl HousekeepingRecord {
    /// Fixed 81-byte little-endian layout: tag, t, soc, validity bits,
    /// omega (3×f64), B (3×f32), temperature count, 4 temperature slots
    /// (f32), mode code, ECC counters (2×u32), bus fault flags.
    pub fn to_bytes(&self) -> [u8; HK_RECORD_LEN] {
        assert!(self.temperatures.len() <= MAX_TEMPERATURES);
        let mut b = [0u8; HK_RECORD_LEN];
        let mut o = 0;
        let mut put = |bytes: &[u8]| {
            b[o..o + bytes.len()].copy_from_slice(bytes);
            o += bytes.len();
        };
        put(&[HK_TAG]);
        put(&self.timestamp.ticks().to_le_bytes());
        put(&self.battery_soc.to_le_bytes());
        put(&[u8::from(self.omega.is_some()) | (u8::from(self.b_field.is_some()) << 1)]);
        for w in self.omega.unwrap_or_default() {
            put(&w.to_le_bytes());
        }
        for f in self.b_field.unwrap_or_default() {
            put(&f.to_le_bytes());
        }
        put(&[self.temperatures.len() as u8]);
        for i in 0..MAX_TEMPERATURES {
            put(&self.temperatures.get(i).copied().unwrap_or(0.0).to_le_bytes());
        }
        put(&[self.mode.code()]);
        put(&self.ecc_corrected.to_le_bytes());
        put(&self.ecc_uncorrectable.to_le_bytes());
        put(&[self.bus_fault_flags]);
        debug_assert_eq!(o, HK_RECORD_LEN);
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, RecordError> {
        if b.len() != HK_RECORD_LEN {
            return Err(RecordError::Length(b.len()));
        }
        if b[0] != HK_TAG {
            return Err(RecordError::Tag(b[0]));
        }
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let valid = b[17];
        let omega = [f64_at(18), f64_at(26), f64_at(34)];
        let field = [f32_at(42), f32_at(46), f32_at(50)];
        let n_temp = b[54] as usize;
        if n_temp > MAX_TEMPERATURES {
            return Err(RecordError::Field("temperature count"));
        }
        let temperatures = (0..n_temp).map(|i| f32_at(55 + 4 * i)).collect();
        Ok(HousekeepingRecord {
            timestamp: SimTime(u64::from_le_bytes(b[1..9].try_into().unwrap())),
            battery_soc: f64_at(9),
            omega: (valid & 1 != 0).then_some(omega),
            b_field: (valid & 2 != 0).then_some(field),
            temperatures,
            mode: Mode::from_code(b[71]).ok_or(RecordError::Field("mode"))?,
            ecc_corrected: u32_at(72),
            ecc_uncorrectable: u32_at(76),
            bus_fault_flags: b[80],
        })
    }
}
