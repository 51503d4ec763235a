//! Simulated spacecraft hardware.

mod access;
mod actuators;
mod environment;
mod eps;
mod i2c;
mod spi;
mod telemetry_mem;

pub use access::DeviceAccess;
pub use actuators::{magnetic_torque, ActuatorState};
pub use environment::{EnvironmentState, StepLog};
pub use eps::{EpsModel, PowerCycle};
pub use i2c::{
    decode_words, fault_bit, quantize, BusError, I2cBus, I2cDeviceModel, I2cFault, GYRO_ADDR,
    GYRO_DATA, GYRO_LSB, MAG_ADDR, MAG_DATA, MAG_LSB, SPI_FAULT_BIT, TEMP_ADDR, TEMP_DATA,
    TEMP_LSB,
};
pub use spi::{BurstTransfer, SpiController, SpiEvent, SpiFault, SpiFlashModel, SpiStep, TransferId, TransferResult};
pub use telemetry_mem::{SharedTelemetryMemory, TelemetryError};

use nalgebra::Vector3;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compression::HyperspectralCube;
use crate::faulttol::{BankLabel, BootImageStore, ConfigMemory, FaultTarget, MemoryBank, Upsettable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeGeometry {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub bit_depth: u8,
}

impl CubeGeometry {
    pub fn bytes(&self) -> usize {
        self.width * self.height * self.bands * 2
    }
}

/// Ring of 256-byte packets read by the telemetry MCU.
#[derive(Debug, Clone)]
pub struct DownlinkBuffer {
    packets: Vec<[u8; 256]>,
    capacity: usize,
    cursor: usize,
    written: u64,
}

impl DownlinkBuffer {
    pub fn new(capacity: usize) -> Self {
        DownlinkBuffer {
            packets: Vec::new(),
            capacity,
            cursor: 0,
            written: 0,
        }
    }

    pub fn push(&mut self, packet: [u8; 256]) -> usize {
        let slot = self.cursor;
        if self.packets.len() < self.capacity {
            self.packets.push(packet);
        } else {
            self.packets[slot] = packet;
        }
        self.cursor = (slot + 1) % self.capacity;
        self.written += 1;
        slot
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn slot(&self, i: usize) -> Option<&[u8; 256]> {
        self.packets.get(i)
    }
}

/// Everything needed to build a [`Hardware`] instance. The seed and the
/// initial physical state are filled in from other scenario sections.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    #[serde(skip)]
    pub seed: u64,
    pub initial_soc: f64,
    pub discharge_rate: f64,
    pub charge_rate: f64,
    pub hw_watchdog_timeout_ms: u64,
    #[serde(skip)]
    pub omega0: [f64; 3],
    #[serde(skip)]
    pub inertia: [f64; 3],
    #[serde(skip)]
    pub b_inertial: [f64; 3],
    pub dipole_per_duty: f64,
    pub mag_noise_lsb: f64,
    pub gyro_noise_lsb: f64,
    pub temp_noise_lsb: f64,
    pub board_temp_c: f64,
    pub raw_cube: CubeGeometry,
    pub image_flash_bytes: usize,
    pub compressed_flash_bytes: usize,
    pub spi_burst_size: usize,
    pub spi_latency_ticks: u64,
    pub telemetry_slot_size: usize,
    pub telemetry_slots: usize,
    pub downlink_packets: usize,
    pub config_bits: u64,
    pub boot_image_bytes: usize,
    pub tmr_checksum: bool,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        HardwareConfig {
            seed: 1,
            initial_soc: 0.9,
            discharge_rate: 2e-5,
            charge_rate: 1e-4,
            hw_watchdog_timeout_ms: 5000,
            omega0: [0.0, 0.0, 0.3],
            inertia: [0.05, 0.05, 0.02],
            b_inertial: [2.0e-5, 3.0e-5, 0.0],
            dipole_per_duty: 0.5,
            mag_noise_lsb: 2.0,
            gyro_noise_lsb: 1.0,
            temp_noise_lsb: 1.0,
            board_temp_c: 20.0,
            raw_cube: CubeGeometry {
                width: 32,
                height: 32,
                bands: 16,
                bit_depth: 12,
            },
            image_flash_bytes: 64 * 1024,
            compressed_flash_bytes: 64 * 1024,
            spi_burst_size: 4096,
            spi_latency_ticks: 5,
            telemetry_slot_size: 96,
            telemetry_slots: 512,
            downlink_packets: 256,
            config_bits: 65_536,
            boot_image_bytes: 8192,
            tmr_checksum: false,
        }
    }
}

pub struct Hardware {
    pub i2c: I2cBus,
    pub image_flash: SpiFlashModel,
    pub compressed_flash: SpiFlashModel,
    pub spi: SpiController,
    pub spi_fault_flag: u8,
    pub telemetry: SharedTelemetryMemory,
    pub downlink: DownlinkBuffer,
    pub eps: EpsModel,
    pub actuators: ActuatorState,
    pub env: EnvironmentState,
    pub config_mem: ConfigMemory,
    pub boot: BootImageStore,
    pub raw_cube: CubeGeometry,
    pub board_temp_c: f64,
    pub self_check_passed: bool,
    pub tmr_checksum: bool,
}

impl Hardware {
    /// Builds the devices and loads a band-correlated synthetic cube into
    /// the raw-image flash.
    pub fn new(cfg: &HardwareConfig) -> Result<Self, String> {
        let g = cfg.raw_cube;
        if g.bytes() > cfg.image_flash_bytes {
            return Err(format!(
                "raw cube needs {} bytes but image flash holds {}",
                g.bytes(),
                cfg.image_flash_bytes
            ));
        }
        if cfg.spi_burst_size == 0 {
            return Err("spi burst size must be positive".into());
        }
        let mut i2c = I2cBus::new();
        i2c.register(I2cDeviceModel::new(MAG_ADDR, "magnetometer", cfg.seed).with_noise(MAG_DATA, cfg.mag_noise_lsb)
            .with_noise(MAG_DATA + 2, cfg.mag_noise_lsb)
            .with_noise(MAG_DATA + 4, cfg.mag_noise_lsb))?;
        i2c.register(I2cDeviceModel::new(GYRO_ADDR, "gyro", cfg.seed).with_noise(GYRO_DATA, cfg.gyro_noise_lsb)
            .with_noise(GYRO_DATA + 2, cfg.gyro_noise_lsb)
            .with_noise(GYRO_DATA + 4, cfg.gyro_noise_lsb))?;
        i2c.register(I2cDeviceModel::new(TEMP_ADDR, "temperature", cfg.seed).with_noise(TEMP_DATA, cfg.temp_noise_lsb))?;

        let mut image_flash = SpiFlashModel::new(
            BankLabel::ImageFlash,
            cfg.image_flash_bytes,
            cfg.spi_burst_size,
            cfg.spi_latency_ticks,
        );
        let cube = HyperspectralCube::band_correlated(g.width, g.height, g.bands, g.bit_depth, cfg.seed);
        image_flash
            .write(0, &cube.to_le_bytes())
            .map_err(|e| e.to_string())?;
        let compressed_flash = SpiFlashModel::new(
            BankLabel::CompressedFlash,
            cfg.compressed_flash_bytes,
            cfg.spi_burst_size,
            cfg.spi_latency_ticks,
        );

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xB007);
        let mut boot_image = vec![0u8; cfg.boot_image_bytes];
        rng.fill_bytes(&mut boot_image);

        let mut eps = EpsModel::new(cfg.initial_soc, cfg.hw_watchdog_timeout_ms);
        eps.discharge_rate = cfg.discharge_rate;
        eps.charge_rate = cfg.charge_rate;

        let mut hw = Hardware {
            i2c,
            image_flash,
            compressed_flash,
            spi: SpiController::new(),
            spi_fault_flag: 0,
            telemetry: SharedTelemetryMemory::new(cfg.telemetry_slot_size, cfg.telemetry_slots),
            downlink: DownlinkBuffer::new(cfg.downlink_packets.max(1)),
            eps,
            actuators: ActuatorState::new(cfg.dipole_per_duty),
            env: EnvironmentState::new(
                Vector3::from(cfg.omega0),
                Vector3::from(cfg.inertia),
                Vector3::from(cfg.b_inertial),
            ),
            config_mem: ConfigMemory::new(cfg.config_bits, cfg.seed ^ 0xC0F1),
            boot: BootImageStore::new(boot_image),
            raw_cube: g,
            board_temp_c: cfg.board_temp_c,
            self_check_passed: false,
            tmr_checksum: cfg.tmr_checksum,
        };
        hw.refresh_sensors();
        Ok(hw)
    }

    /// Pushes the true physical state into the sensor registers.
    pub fn refresh_sensors(&mut self) {
        let b = self.env.b_body();
        let w = self.env.omega;
        if let Some(d) = self.i2c.device_mut(MAG_ADDR) {
            d.set_words(MAG_DATA, &[quantize(b.x, MAG_LSB), quantize(b.y, MAG_LSB), quantize(b.z, MAG_LSB)]);
        }
        if let Some(d) = self.i2c.device_mut(GYRO_ADDR) {
            d.set_words(GYRO_DATA, &[quantize(w.x, GYRO_LSB), quantize(w.y, GYRO_LSB), quantize(w.z, GYRO_LSB)]);
        }
        let t = self.board_temp_c;
        if let Some(d) = self.i2c.device_mut(TEMP_ADDR) {
            d.set_words(TEMP_DATA, &[quantize(t, TEMP_LSB)]);
        }
    }

    pub fn banks(&self) -> [&MemoryBank; 3] {
        [self.image_flash.bank(), self.compressed_flash.bank(), self.telemetry.bank()]
    }

    pub fn banks_mut(&mut self) -> [&mut MemoryBank; 3] {
        [
            self.image_flash.bank_mut(),
            self.compressed_flash.bank_mut(),
            self.telemetry.bank_mut(),
        ]
    }

    /// Every upset-prone store, in a fixed order.
    pub fn upsettable(&mut self) -> [&mut dyn Upsettable; 5] {
        [
            self.image_flash.bank_mut(),
            self.compressed_flash.bank_mut(),
            self.telemetry.bank_mut(),
            &mut self.config_mem,
            &mut self.boot,
        ]
    }

    pub fn upsettable_bits(&self) -> Vec<(FaultTarget, u64)> {
        let stores: [&dyn Upsettable; 5] = [
            self.image_flash.bank(),
            self.compressed_flash.bank(),
            self.telemetry.bank(),
            &self.config_mem,
            &self.boot,
        ];
        stores.iter().map(|m| (m.target(), m.bit_len())).collect()
    }

    pub fn stored_stream(&mut self) -> Option<Vec<u8>> {
        access::read_stored_stream(&mut self.compressed_flash).ok().flatten()
    }
}
