use serde::{Deserialize, Serialize};

use crate::flightplan::KickGrant;
use crate::simkernel::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerCycle {
    pub count: u64,
    pub last_kick: Option<SimTime>,
}

/// Power subsystem: the battery and the hardware watchdog it hosts.
#[derive(Debug, Clone)]
pub struct EpsModel {
    pub battery_soc: f64,
    /// Fraction per second drawn by each active load.
    pub discharge_rate: f64,
    /// Fraction per second from the solar array.
    pub charge_rate: f64,
    pub hw_watchdog_timeout_ms: u64,
    hw_watchdog_remaining_ms: u64,
    power_cycle_count: u64,
    last_kick: Option<SimTime>,
    kicks: u64,
}

impl EpsModel {
    pub fn new(battery_soc: f64, hw_watchdog_timeout_ms: u64) -> Self {
        EpsModel {
            battery_soc: battery_soc.clamp(0.0, 1.0),
            discharge_rate: 0.0,
            charge_rate: 0.0,
            hw_watchdog_timeout_ms,
            hw_watchdog_remaining_ms: hw_watchdog_timeout_ms,
            power_cycle_count: 0,
            last_kick: None,
            kicks: 0,
        }
    }

    pub fn hw_watchdog_remaining_ms(&self) -> u64 {
        self.hw_watchdog_remaining_ms
    }

    pub fn power_cycle_count(&self) -> u64 {
        self.power_cycle_count
    }

    pub fn last_kick(&self) -> Option<SimTime> {
        self.last_kick
    }

    pub fn kicks(&self) -> u64 {
        self.kicks
    }

    /// GPIO kick. Consumes the grant minted by a healthy watchdog scan.
    pub fn eps_kick(&mut self, now: SimTime, _grant: KickGrant) {
        self.hw_watchdog_remaining_ms = self.hw_watchdog_timeout_ms;
        self.last_kick = Some(now);
        self.kicks += 1;
    }

    /// Counts the watchdog down by `dt_ms`; on expiry the OBC is power
    /// cycled and the countdown restarts.
    pub fn eps_tick(&mut self, dt_ms: u64) -> Option<PowerCycle> {
        self.hw_watchdog_remaining_ms = self.hw_watchdog_remaining_ms.saturating_sub(dt_ms);
        if self.hw_watchdog_remaining_ms > 0 {
            return None;
        }
        self.power_cycle_count += 1;
        self.hw_watchdog_remaining_ms = self.hw_watchdog_timeout_ms;
        Some(PowerCycle {
            count: self.power_cycle_count,
            last_kick: self.last_kick,
        })
    }

    pub fn update_battery(&mut self, dt_s: f64, active_loads: usize) {
        let net = self.charge_rate - self.discharge_rate * active_loads as f64;
        self.battery_soc = (self.battery_soc + net * dt_s).clamp(0.0, 1.0);
    }

    pub fn set_soc(&mut self, soc: f64) {
        self.battery_soc = soc.clamp(0.0, 1.0);
    }
}

#[cfg(test)]
pub(crate) fn test_grant() -> KickGrant {
    use crate::flightplan::{Flightplan, FlightplanConfig};
    use crate::fsm::{Mode, ModeTable};
    let mut modes = ModeTable::new();
    modes.insert(Mode::Nominal, vec![]).unwrap();
    let mut fp = Flightplan::new(modes, Mode::Nominal, SimTime(0), FlightplanConfig::default()).unwrap();
    fp.software_watchdog_scan(SimTime(0)).kick.unwrap()
}
