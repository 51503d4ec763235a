//! Mode-specific task bodies. They reach hardware only through
//! [`crate::devices::DeviceAccess`].

mod bdot;
mod downlink;
mod housekeeping;

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use bdot::BdotState;
pub use downlink::{deframe, fletcher16, frame, FrameError, PACKET_LEN, PAYLOAD_LEN};
pub use housekeeping::{HousekeepingRecord, RecordError, HK_RECORD_LEN, MAX_TEMPERATURES};

use crate::compression::{decode_bytes, encode, CodecParams, HyperspectralCube};
use crate::devices::{BurstTransfer, DeviceAccess, SpiStep, TransferId};
use crate::faulttol::{tmr_vote, BankLabel, BootImage, Disagreement};
use crate::flightplan::TaskExit;
use crate::fsm::{HealthMetrics, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskBody {
    Noop,
    Housekeeping,
    SensorPoll,
    BdotControl,
    PointingControl,
    ImagingSequence,
    DownlinkPrep,
    Beacon,
    MemoryScrub,
    ConfigScrub,
    SelfCheck,
}

impl TaskBody {
    pub const ALL: [TaskBody; 11] = [
        TaskBody::Noop,
        TaskBody::Housekeeping,
        TaskBody::SensorPoll,
        TaskBody::BdotControl,
        TaskBody::PointingControl,
        TaskBody::ImagingSequence,
        TaskBody::DownlinkPrep,
        TaskBody::Beacon,
        TaskBody::MemoryScrub,
        TaskBody::ConfigScrub,
        TaskBody::SelfCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskBody::Noop => "noop",
            TaskBody::Housekeeping => "housekeeping",
            TaskBody::SensorPoll => "sensor-poll",
            TaskBody::BdotControl => "bdot-control",
            TaskBody::PointingControl => "pointing-control",
            TaskBody::ImagingSequence => "imaging-sequence",
            TaskBody::DownlinkPrep => "downlink-prep",
            TaskBody::Beacon => "beacon",
            TaskBody::MemoryScrub => "memory-scrub",
            TaskBody::ConfigScrub => "config-scrub",
            TaskBody::SelfCheck => "self-check",
        }
    }

    /// Bodies that command actuators.
    pub fn is_control_law(self) -> bool {
        matches!(self, TaskBody::BdotControl | TaskBody::PointingControl)
    }
}

impl fmt::Display for TaskBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskBody {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskBody::ALL
            .iter()
            .copied()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown task body `{s}`"))
    }
}

pub const BEACON_TAG: u8 = b'B';
pub const BEACON_LEN: usize = 32;

/// State carried between activations. Owned by the engine, handed to each
/// body alongside its [`DeviceAccess`].
#[derive(Debug, Clone)]
pub struct TaskContext {
    pub mode: Mode,
    pub bdot: BdotState,
    pub codec: CodecParams,
    pub beacon_seq: u32,
    pub last_omega: [f64; 3],
    pub last_temperature: Option<f64>,
    /// First telemetry write not yet framed for downlink.
    pub downlink_cursor: u64,
    pub packet_seq: u16,
    /// CRC of the compressed stream last framed for downlink.
    pub stream_sent_crc: Option<u32>,
    pub imaging: Option<TransferId>,
}

impl TaskContext {
    pub fn new(mode: Mode, bdot_gain: f64, codec: CodecParams) -> Self {
        TaskContext {
            mode,
            bdot: BdotState::new(bdot_gain),
            codec,
            beacon_seq: 0,
            last_omega: [0.0; 3],
            last_temperature: None,
            downlink_cursor: 0,
            packet_seq: 0,
            stream_sent_crc: None,
            imaging: None,
        }
    }
}

/// Observable side effects of one activation, logged as telemetry.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "note", rename_all = "snake_case")]
pub enum TaskNote {
    Housekeeping {
        slot: usize,
        gyro_valid: bool,
        mag_valid: bool,
        temp_valid: bool,
    },
    SensorPoll {
        bus_fault_flags: u8,
    },
    Bdot {
        duty: [f64; 3],
        mag_valid: bool,
    },
    Pointing,
    Beacon {
        slot: usize,
        seq: u32,
        mode: Mode,
        battery_soc: f64,
        omega_mag: f64,
    },
    Scrub {
        bank: BankLabel,
        corrected: u64,
        uncorrectable: u64,
        words_scanned: u64,
    },
    ConfigScrub {
        divergence_before: u64,
        divergence_after: u64,
        words_rewritten: u64,
    },
    SelfCheck {
        passed: bool,
        boot_image: BootImage,
        magnetometer_ok: bool,
    },
    ImagingStarted {
        transfer: TransferId,
        bytes: usize,
    },
    ImagingStored {
        raw_bytes: usize,
        encoded_bytes: usize,
        ratio: f64,
        crc: u32,
        vote: Disagreement,
        corrected: u64,
    },
    ImagingAborted {
        bytes_received: usize,
        reason: String,
    },
    Downlink {
        packets: usize,
        payload_bytes: usize,
    },
    Anomaly {
        message: String,
    },
}

#[derive(Debug, Clone, Default)]
pub struct BodyOutcome {
    pub exit: Option<TaskExit>,
    pub notes: Vec<TaskNote>,
    /// SPI events the engine must schedule for an asynchronous transfer.
    pub spi: Option<SpiStep>,
}

impl BodyOutcome {
    fn ok(notes: Vec<TaskNote>) -> Self {
        BodyOutcome {
            exit: Some(TaskExit::Ok),
            notes,
            spi: None,
        }
    }

    fn failed(notes: Vec<TaskNote>) -> Self {
        BodyOutcome {
            exit: Some(TaskExit::Failed),
            notes,
            spi: None,
        }
    }

    pub fn exit(&self) -> TaskExit {
        self.exit.unwrap_or(TaskExit::Ok)
    }
}

/// Runs one activation of `body`.
pub fn run_body(body: TaskBody, ctx: &mut TaskContext, dev: &mut DeviceAccess) -> BodyOutcome {
    match body {
        TaskBody::Noop => BodyOutcome::ok(vec![]),
        TaskBody::Housekeeping => task_housekeeping(ctx, dev),
        TaskBody::SensorPoll => {
            let _ = dev.read_gyro().map(|w| ctx.last_omega = w.into());
            let _ = dev.read_magnetometer();
            let _ = dev.read_temperature().map(|t| ctx.last_temperature = Some(t));
            BodyOutcome::ok(vec![TaskNote::SensorPoll {
                bus_fault_flags: dev.bus_fault_flags(),
            }])
        }
        TaskBody::BdotControl => {
            let (duty, mag_valid) = task_bdot_control(&mut ctx.bdot, dev);
            BodyOutcome::ok(vec![TaskNote::Bdot { duty, mag_valid }])
        }
        TaskBody::PointingControl => {
            dev.set_magnetorquer([0.0; 3]);
            BodyOutcome::ok(vec![TaskNote::Pointing])
        }
        TaskBody::ImagingSequence => task_imaging_start(ctx, dev),
        TaskBody::DownlinkPrep => task_downlink_prep(ctx, dev),
        TaskBody::Beacon => task_beacon(ctx, dev),
        TaskBody::MemoryScrub => BodyOutcome::ok(
            dev.scrub_banks()
                .into_iter()
                .map(|(bank, r)| TaskNote::Scrub {
                    bank,
                    corrected: r.corrected,
                    uncorrectable: r.uncorrectable,
                    words_scanned: r.words_scanned,
                })
                .collect(),
        ),
        TaskBody::ConfigScrub => {
            let r = dev.scrub_config();
            BodyOutcome::ok(vec![TaskNote::ConfigScrub {
                divergence_before: r.divergence_before,
                divergence_after: r.divergence_after,
                words_rewritten: r.words_rewritten,
            }])
        }
        TaskBody::SelfCheck => {
            let boot = dev.boot_selection();
            let magnetometer_ok = dev.read_magnetometer().is_ok();
            let passed = !boot.critical && magnetometer_ok;
            dev.set_self_check(passed);
            BodyOutcome::ok(vec![TaskNote::SelfCheck {
                passed,
                boot_image: boot.image,
                magnetometer_ok,
            }])
        }
    }
}

/// Health snapshot for the check node, falling back to the last good
/// reading when a sensor cannot be read.
pub fn gather_health(ctx: &mut TaskContext, dev: &mut DeviceAccess) -> HealthMetrics {
    if let Ok(w) = dev.read_gyro() {
        ctx.last_omega = w.into();
    }
    if let Ok(t) = dev.read_temperature() {
        ctx.last_temperature = Some(t);
    }
    let mut m = HealthMetrics::new(dev.eps_battery_soc(), ctx.last_omega);
    m.temperatures = ctx.last_temperature.into_iter().collect();
    m.uncorrectable_ecc = dev.ecc_counters().1;
    m.bus_fault_flags = dev.bus_fault_flags();
    m.self_check_passed = dev.self_check();
    m
}

pub fn task_housekeeping(ctx: &mut TaskContext, dev: &mut DeviceAccess) -> BodyOutcome {
    let omega = dev.read_gyro().ok().map(<[f64; 3]>::from);
    let b_field = dev
        .read_magnetometer()
        .ok()
        .map(|b| [b.x as f32, b.y as f32, b.z as f32]);
    let temperature = dev.read_temperature().ok();
    if let Some(w) = omega {
        ctx.last_omega = w;
    }
    if temperature.is_some() {
        ctx.last_temperature = temperature;
    }
    let (corrected, uncorrectable) = dev.ecc_counters();
    let record = HousekeepingRecord {
        timestamp: dev.now(),
        battery_soc: dev.eps_battery_soc(),
        omega,
        b_field,
        temperatures: temperature.map(|t| t as f32).into_iter().collect(),
        mode: ctx.mode,
        ecc_corrected: corrected.min(u32::MAX as u64) as u32,
        ecc_uncorrectable: uncorrectable.min(u32::MAX as u64) as u32,
        bus_fault_flags: dev.bus_fault_flags(),
    };
    match dev.write_telemetry(&record.to_bytes()) {
        Ok(slot) => BodyOutcome::ok(vec![TaskNote::Housekeeping {
            slot,
            gyro_valid: omega.is_some(),
            mag_valid: b_field.is_some(),
            temp_valid: temperature.is_some(),
        }]),
        Err(e) => BodyOutcome::failed(vec![TaskNote::Anomaly {
            message: e.to_string(),
        }]),
    }
}

/// Returns the commanded duty and whether the magnetometer was readable.
pub fn task_bdot_control(state: &mut BdotState, dev: &mut DeviceAccess) -> ([f64; 3], bool) {
    match dev.read_magnetometer() {
        Ok(b) => {
            let duty = state.command(b, dev.now(), dev.dipole_per_duty());
            dev.set_magnetorquer(duty);
            (duty, true)
        }
        Err(_) => {
            state.reset();
            dev.set_magnetorquer([0.0; 3]);
            ([0.0; 3], false)
        }
    }
}

pub fn beacon_bytes(mode: Mode, seq: u32, t: u64, soc: f64, omega_mag: f64) -> [u8; BEACON_LEN] {
    let mut b = [0u8; BEACON_LEN];
    b[0] = BEACON_TAG;
    b[1] = mode.code();
    b[4..8].copy_from_slice(&seq.to_le_bytes());
    b[8..16].copy_from_slice(&t.to_le_bytes());
    b[16..24].copy_from_slice(&soc.to_le_bytes());
    b[24..32].copy_from_slice(&omega_mag.to_le_bytes());
    b
}

pub fn task_beacon(ctx: &mut TaskContext, dev: &mut DeviceAccess) -> BodyOutcome {
    if let Ok(w) = dev.read_gyro() {
        ctx.last_omega = w.into();
    }
    let soc = dev.eps_battery_soc();
    let omega_mag = Vector3::from(ctx.last_omega).norm();
    let seq = ctx.beacon_seq;
    ctx.beacon_seq = ctx.beacon_seq.wrapping_add(1);
    let bytes = beacon_bytes(ctx.mode, seq, dev.now().ticks(), soc, omega_mag);
    match dev.write_telemetry(&bytes) {
        Ok(slot) => BodyOutcome::ok(vec![TaskNote::Beacon {
            slot,
            seq,
            mode: ctx.mode,
            battery_soc: soc,
            omega_mag,
        }]),
        Err(e) => BodyOutcome::failed(vec![TaskNote::Anomaly {
            message: e.to_string(),
        }]),
    }
}

/// Frames telemetry written since the last pass, then any compressed
/// stream not yet sent. Each telemetry record is prefixed by its u16
/// length; a stream is prefixed by the tag `S` and its u32 length.
pub fn task_downlink_prep(ctx: &mut TaskContext, dev: &mut DeviceAccess) -> BodyOutcome {
    let mut payload = Vec::new();
    for (seq, record) in dev.telemetry_since(ctx.downlink_cursor) {
        payload.extend_from_slice(&(record.len() as u16).to_le_bytes());
        payload.extend_from_slice(&record);
        ctx.downlink_cursor = seq + 1;
    }
    ctx.downlink_cursor = ctx.downlink_cursor.max(dev.telemetry_writes());
    if let Ok(Some(stream)) = dev.read_compressed() {
        let crc = crc32fast::hash(&stream);
        if ctx.stream_sent_crc != Some(crc) {
            payload.push(b'S');
            payload.extend_from_slice(&(stream.len() as u32).to_le_bytes());
            payload.extend_from_slice(&stream);
            ctx.stream_sent_crc = Some(crc);
        }
    }
    let packets = frame(&payload, ctx.packet_seq);
    for p in &packets {
        dev.write_downlink(p);
    }
    ctx.packet_seq = ctx.packet_seq.wrapping_add(packets.len() as u16);
    BodyOutcome::ok(vec![TaskNote::Downlink {
        packets: packets.len(),
        payload_bytes: payload.len(),
    }])
}

/// Starts the raw-cube burst read. The activation stays open until the
/// transfer finishes or aborts; see [`finish_imaging`] and [`abort_imaging`].
pub fn task_imaging_start(ctx: &mut TaskContext, dev: &mut DeviceAccess) -> BodyOutcome {
    if ctx.imaging.is_some() {
        return BodyOutcome::failed(vec![TaskNote::Anomaly {
            message: "imaging transfer already in flight".into(),
        }]);
    }
    let bytes = dev.raw_cube_geometry().bytes();
    match dev.spi_burst_read(0, bytes) {
        Ok((transfer, step)) => {
            ctx.imaging = Some(transfer);
            BodyOutcome {
                exit: None,
                notes: vec![TaskNote::ImagingStarted { transfer, bytes }],
                spi: Some(step),
            }
        }
        Err(e) => BodyOutcome::failed(vec![TaskNote::ImagingAborted {
            bytes_received: 0,
            reason: e.to_string(),
        }]),
    }
}

fn stream_checksum(stream: &[u8], tmr: bool) -> (u32, Disagreement) {
    if !tmr {
        return (crc32fast::hash(stream), Disagreement::None);
    }
    let replicas: [u64; 3] = std::array::from_fn(|_| crc32fast::hash(stream) as u64);
    let (v, d) = tmr_vote(replicas[0], replicas[1], replicas[2]);
    (v as u32, d)
}

/// Compresses the received cube and stores it in the second flash. On any
/// failure the raw cube stays where it is and an anomaly is reported.
pub fn finish_imaging(ctx: &mut TaskContext, dev: &mut DeviceAccess, transfer: BurstTransfer) -> BodyOutcome {
    ctx.imaging = None;
    let g = dev.raw_cube_geometry();
    let samples: Vec<u16> = transfer
        .sink
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    let anomaly = |message: String| BodyOutcome::failed(vec![TaskNote::Anomaly { message }]);
    if transfer.uncorrectable > 0 {
        return anomaly(format!("raw cube read with {} uncorrectable words", transfer.uncorrectable));
    }
    let cube = match HyperspectralCube::new(g.width, g.height, g.bands, g.bit_depth, samples) {
        Ok(c) => c,
        Err(e) => return anomaly(format!("raw cube rejected: {e}")),
    };
    let stream = encode(&cube, ctx.codec);
    let bytes = stream.to_bytes();
    match decode_bytes(&bytes) {
        Ok(back) if back == cube => {}
        Ok(_) => return anomaly("compression verify mismatch".into()),
        Err(e) => return anomaly(format!("compression verify failed: {e}")),
    }
    if bytes.len() > dev.compressed_capacity() {
        return anomaly(format!(
            "compressed stream of {} bytes exceeds flash capacity {}",
            bytes.len(),
            dev.compressed_capacity()
        ));
    }
    if let Err(e) = dev.write_compressed(&bytes) {
        return anomaly(format!("compressed flash write failed: {e}"));
    }
    let (crc, vote) = stream_checksum(&bytes, dev.tmr_enabled());
    BodyOutcome::ok(vec![TaskNote::ImagingStored {
        raw_bytes: transfer.total,
        encoded_bytes: bytes.len(),
        ratio: stream.ratio(),
        crc,
        vote,
        corrected: transfer.corrected,
    }])
}

pub fn abort_imaging(ctx: &mut TaskContext, transfer: &BurstTransfer, reason: String) -> BodyOutcome {
    ctx.imaging = None;
    BodyOutcome::failed(vec![TaskNote::ImagingAborted {
        bytes_received: transfer.sink.len(),
        reason,
    }])
}
