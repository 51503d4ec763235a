//! Userspace device-access functions. Task bodies receive a
//! [`DeviceAccess`] and have no other path to the hardware.

use nalgebra::Vector3;

use super::i2c::{
    decode_words, BusError, GYRO_ADDR, GYRO_DATA, GYRO_LSB, MAG_ADDR, MAG_DATA, MAG_LSB, TEMP_ADDR,
    TEMP_DATA, TEMP_LSB,
};
use super::spi::{SpiStep, TransferId};
use super::telemetry_mem::TelemetryError;
use super::{CubeGeometry, Hardware};
use crate::faulttol::{BankLabel, BootSelection, ConfigScrubReport, ScrubReport};
use crate::flightplan::KickGrant;
use crate::simkernel::SimTime;

pub struct DeviceAccess<'a> {
    hw: &'a mut Hardware,
    now: SimTime,
    bus_ticks: u64,
}

impl<'a> DeviceAccess<'a> {
    pub fn new(hw: &'a mut Hardware, now: SimTime) -> Self {
        DeviceAccess {
            hw,
            now,
            bus_ticks: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Bus time consumed so far, one tick per I2C transaction.
    pub fn bus_ticks(&self) -> u64 {
        self.bus_ticks
    }

    pub fn i2c_read(&mut self, address: u8, reg: u8, len: usize) -> Result<Vec<u8>, BusError> {
        self.bus_ticks += 1;
        self.hw.i2c.read(address, reg, len)
    }

    pub fn read_magnetometer(&mut self) -> Result<Vector3<f64>, BusError> {
        let w = decode_words(&self.i2c_read(MAG_ADDR, MAG_DATA, 6)?);
        Ok(Vector3::new(w[0] as f64, w[1] as f64, w[2] as f64) * MAG_LSB)
    }

    pub fn read_gyro(&mut self) -> Result<Vector3<f64>, BusError> {
        let w = decode_words(&self.i2c_read(GYRO_ADDR, GYRO_DATA, 6)?);
        Ok(Vector3::new(w[0] as f64, w[1] as f64, w[2] as f64) * GYRO_LSB)
    }

    pub fn read_temperature(&mut self) -> Result<f64, BusError> {
        let w = decode_words(&self.i2c_read(TEMP_ADDR, TEMP_DATA, 2)?);
        Ok(w[0] as f64 * TEMP_LSB)
    }

    pub fn bus_fault_flags(&self) -> u8 {
        self.hw.i2c.fault_flags() | self.hw.spi_fault_flag
    }

    pub fn set_magnetorquer(&mut self, duty: [f64; 3]) {
        self.hw.actuators.set_magnetorquer(duty);
    }

    pub fn dipole_per_duty(&self) -> f64 {
        self.hw.actuators.dipole_per_duty
    }

    pub fn write_telemetry(&mut self, record: &[u8]) -> Result<usize, TelemetryError> {
        self.hw.telemetry.write_telemetry(record)
    }

    pub fn telemetry_writes(&self) -> u64 {
        self.hw.telemetry.writes()
    }

    pub fn telemetry_since(&self, first_write: u64) -> Vec<(u64, Vec<u8>)> {
        self.hw.telemetry.records_since(first_write)
    }

    pub fn write_downlink(&mut self, packet: &[u8; 256]) -> usize {
        self.hw.downlink.push(*packet)
    }

    /// Bulk status record from the EPS.
    pub fn eps_battery_soc(&self) -> f64 {
        self.hw.eps.battery_soc
    }

    pub fn power_cycle_count(&self) -> u64 {
        self.hw.eps.power_cycle_count()
    }

    /// Corrected and uncorrectable totals over every ECC bank.
    pub fn ecc_counters(&self) -> (u64, u64) {
        self.hw
            .banks()
            .iter()
            .fold((0, 0), |(c, u), b| (c + b.corrected_count(), u + b.uncorrectable_count()))
    }

    pub fn scrub_banks(&mut self) -> Vec<(BankLabel, ScrubReport)> {
        self.hw
            .banks_mut()
            .into_iter()
            .map(|b| (b.label, b.scrub()))
            .collect()
    }

    pub fn scrub_config(&mut self) -> ConfigScrubReport {
        self.hw.config_mem.scrub()
    }

    pub fn boot_selection(&self) -> BootSelection {
        self.hw.boot.select_boot_image()
    }

    pub fn self_check(&self) -> bool {
        self.hw.self_check_passed
    }

    pub fn set_self_check(&mut self, passed: bool) {
        self.hw.self_check_passed = passed;
    }

    pub fn raw_cube_geometry(&self) -> CubeGeometry {
        self.hw.raw_cube
    }

    pub fn spi_burst_read(&mut self, start: usize, total: usize) -> Result<(TransferId, SpiStep), BusError> {
        let now = self.now;
        self.hw
            .spi
            .spi_burst_read(&mut self.hw.image_flash, now, start, total)
    }

    /// Replaces the stored compressed stream (u32 length prefix).
    pub fn write_compressed(&mut self, stream: &[u8]) -> Result<(), BusError> {
        let mut buf = (stream.len() as u32).to_le_bytes().to_vec();
        buf.extend_from_slice(stream);
        self.hw.compressed_flash.write(0, &buf)
    }

    pub fn read_compressed(&mut self) -> Result<Option<Vec<u8>>, BusError> {
        read_stored_stream(&mut self.hw.compressed_flash)
    }

    pub fn compressed_capacity(&self) -> usize {
        self.hw.compressed_flash.capacity() - 4
    }

    pub fn tmr_enabled(&self) -> bool {
        self.hw.tmr_checksum
    }

    pub fn kick_watchdog(&mut self, grant: KickGrant) {
        self.hw.eps.eps_kick(self.now, grant);
    }
}

pub(crate) fn read_stored_stream(
    flash: &mut super::SpiFlashModel,
) -> Result<Option<Vec<u8>>, BusError> {
    let (len, _) = flash.read(0, 4)?;
    let len = u32::from_le_bytes(len.try_into().unwrap()) as usize;
    if len == 0 || len + 4 > flash.capacity() {
        return Ok(None);
    }
    Ok(Some(flash.read(4, len)?.0))
}
