use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAG_ADDR: u8 = 0x1E;
pub const MAG_DATA: u8 = 0x03;
/// Tesla per magnetometer LSB.
pub const MAG_LSB: f64 = 2e-9;

pub const GYRO_ADDR: u8 = 0x68;
pub const GYRO_DATA: u8 = 0x43;
/// rad/s per gyro LSB.
pub const GYRO_LSB: f64 = 1e-4;

pub const TEMP_ADDR: u8 = 0x48;
pub const TEMP_DATA: u8 = 0x00;
/// °C per temperature LSB.
pub const TEMP_LSB: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "error")]
pub enum BusError {
    #[error("no device at address {0:#04x}")]
    NoDevice(u8),
    #[error("device {0:#04x} did not acknowledge")]
    Nack(u8),
    #[error("read of {len} bytes from register {reg:#04x} runs past the register file")]
    RegisterRange { reg: u8, len: usize },
    #[error("SPI transfer timed out after {0} bytes")]
    SpiTimeout(usize),
    #[error("address range {start}+{len} exceeds flash capacity {capacity}")]
    SpiRange { start: usize, len: usize, capacity: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum I2cFault {
    #[default]
    None,
    Nack,
    Stuck,
}

/// A device on the bus: a 256-byte register file. Gaussian noise, in LSB,
/// can be attached to any big-endian 16-bit word by its first register.
#[derive(Debug, Clone)]
pub struct I2cDeviceModel {
    pub address: u8,
    pub name: String,
    registers: [u8; 256],
    fault: I2cFault,
    stale: Option<[u8; 256]>,
    noise_sigma: BTreeMap<u8, f64>,
    rng: ChaCha8Rng,
}

impl I2cDeviceModel {
    pub fn new(address: u8, name: &str, seed: u64) -> Self {
        assert!(address < 0x80, "7-bit address");
        I2cDeviceModel {
            address,
            name: name.to_string(),
            registers: [0; 256],
            fault: I2cFault::None,
            stale: None,
            noise_sigma: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ ((address as u64) << 32)),
        }
    }

    pub fn with_noise(mut self, reg: u8, sigma_lsb: f64) -> Self {
        self.noise_sigma.insert(reg, sigma_lsb);
        self
    }

    pub fn fault(&self) -> I2cFault {
        self.fault
    }

    pub fn set_fault(&mut self, fault: I2cFault) {
        self.stale = (fault == I2cFault::Stuck).then_some(self.registers);
        self.fault = fault;
    }

    /// Device-side register update (the sensor refreshing its outputs).
    pub fn set_registers(&mut self, reg: u8, bytes: &[u8]) {
        let start = reg as usize;
        self.registers[start..start + bytes.len()].copy_from_slice(bytes);
    }

    pub fn set_words(&mut self, reg: u8, words: &[i16]) {
        let bytes: Vec<u8> = words.iter().flat_map(|w| w.to_be_bytes()).collect();
        self.set_registers(reg, &bytes);
    }

    pub fn registers(&self) -> &[u8; 256] {
        &self.registers
    }

    pub fn read(&mut self, reg: u8, len: usize) -> Result<Vec<u8>, BusError> {
        let start = reg as usize;
        if start + len > 256 {
            return Err(BusError::RegisterRange { reg, len });
        }
        match self.fault {
            I2cFault::Nack => return Err(BusError::Nack(self.address)),
            I2cFault::Stuck => {
                return Ok(self.stale.expect("snapshot taken on fault")[start..start + len].to_vec())
            }
            I2cFault::None => {}
        }
        let mut out = self.registers[start..start + len].to_vec();
        for (&r, &sigma) in &self.noise_sigma {
            let (r, end) = (r as usize, start + len);
            if sigma <= 0.0 || r < start || r + 2 > end {
                continue;
            }
            let off = r - start;
            let word = i16::from_be_bytes([out[off], out[off + 1]]) as f64;
            let noisy = word + Normal::new(0.0, sigma).unwrap().sample(&mut self.rng).round();
            let noisy = noisy.clamp(i16::MIN as f64, i16::MAX as f64) as i16;
            out[off..off + 2].copy_from_slice(&noisy.to_be_bytes());
        }
        Ok(out)
    }
}

/// Which bit of `bus_fault_flags` a device owns.
pub fn fault_bit(address: u8) -> u8 {
    match address {
        MAG_ADDR => 0x01,
        GYRO_ADDR => 0x02,
        TEMP_ADDR => 0x04,
        _ => 0x80,
    }
}

pub const SPI_FAULT_BIT: u8 = 0x08;

#[derive(Debug, Clone, Default)]
pub struct I2cBus {
    devices: BTreeMap<u8, I2cDeviceModel>,
    fault_flags: u8,
    transactions: u64,
}

impl I2cBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, dev: I2cDeviceModel) -> Result<(), String> {
        if self.devices.contains_key(&dev.address) {
            return Err(format!("address {:#04x} already in use", dev.address));
        }
        self.devices.insert(dev.address, dev);
        Ok(())
    }

    pub fn device_mut(&mut self, address: u8) -> Option<&mut I2cDeviceModel> {
        self.devices.get_mut(&address)
    }

    pub fn device(&self, address: u8) -> Option<&I2cDeviceModel> {
        self.devices.get(&address)
    }

    /// Bus-level flags: a device's bit is set by a NACK and cleared by its
    /// next successful read.
    pub fn fault_flags(&self) -> u8 {
        self.fault_flags
    }

    pub fn transactions(&self) -> u64 {
        self.transactions
    }

    pub fn read(&mut self, address: u8, reg: u8, len: usize) -> Result<Vec<u8>, BusError> {
        self.transactions += 1;
        let dev = self
            .devices
            .get_mut(&address)
            .ok_or(BusError::NoDevice(address))?;
        let result = dev.read(reg, len);
        match result {
            Ok(_) => self.fault_flags &= !fault_bit(address),
            Err(BusError::Nack(_)) => self.fault_flags |= fault_bit(address),
            Err(_) => {}
        }
        result
    }
}

pub fn decode_words(bytes: &[u8]) -> Vec<i16> {
    bytes
        .chunks_exact(2)
        .map(|c| i16::from_be_bytes([c[0], c[1]]))
        .collect()
}

pub fn quantize(value: f64, lsb: f64) -> i16 {
    (value / lsb).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}
