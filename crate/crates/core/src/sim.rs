//! The simulation engine: one event loop driving the kernel, the
//! flightplan, the devices and the fault injector.
//!
//! Ordering within a tick: kernel events fire first in `(time, seq)`
//! order, each followed by interrupt service; flightplan dispatch for the
//! tick happens after the queue holds nothing earlier or equal.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::Serialize;
use serde_json::json;

use crate::devices::{
    DeviceAccess, Hardware, SpiEvent, SpiFault, SpiStep, TransferResult, SPI_FAULT_BIT,
};
use crate::faulttol::{BankLabel, FaultInjector};
use crate::flightplan::{
    CompletedSwitch, Dispatch, Flightplan, InstanceHandle, SwitchCause, SwitchOutcome, TaskExit,
    TaskSpec, Terminated,
};
use crate::fsm::{handle_emergency_interrupt, HealthMetrics, Mode};
use crate::scenario::{FaultAction, Scenario, ScenarioError, SPI_LINE};
use crate::simkernel::{EventKind, HandlerId, Kernel, SimTime};
use crate::tasks::{abort_imaging, finish_imaging, gather_health, run_body, BodyOutcome, TaskContext, TaskNote};
use crate::telemetry::{Telemetry, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq)]
enum SimEvent {
    EnvStep,
    TaskComplete { handle: InstanceHandle, exit: TaskExit },
    WatchdogScan,
    EpsDeadline,
    Spi(SpiEvent),
    Monitor(usize),
    Fault(usize),
    SeuTick,
    ScheduledFlips,
    DrainTimeout,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeChange {
    pub t: SimTime,
    pub from: Mode,
    pub to: Mode,
    pub cause: SwitchCause,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BankAudit {
    pub bank: BankLabel,
    pub corrected: u64,
    pub uncorrectable: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub duration_ms: u64,
    pub initial_mode: Mode,
    pub final_mode: Mode,
    pub mode_timeline: Vec<ModeChange>,
    pub power_cycles: u64,
    pub hw_kicks: u64,
    pub watchdog_scans: u64,
    pub spawns: u64,
    pub overruns: u64,
    pub tasks_killed: u64,
    pub seu_injected: u64,
    pub scrub_corrected: u64,
    pub scrub_uncorrectable: u64,
    pub config_scrubs: u64,
    pub config_divergence_after_max: u64,
    pub final_audit: Vec<BankAudit>,
    pub compression_ratios: Vec<f64>,
    pub downlink_packets: u64,
    pub lost_interrupts: u64,
    pub final_omega_mag: f64,
    pub final_battery_soc: f64,
}

impl Summary {
    pub fn uncorrectable_words(&self) -> u64 {
        self.final_audit.iter().map(|a| a.uncorrectable).sum()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario {} (seed {}), {:.1} s simulated", self.scenario, self.seed, self.duration_ms as f64 / 1000.0);
        let _ = writeln!(s, "mode timeline:");
        let _ = writeln!(s, "  {:>10.3} s  start in {}", 0.0, self.initial_mode);
        for c in &self.mode_timeline {
            let _ = writeln!(s, "  {:>10.3} s  {} -> {} ({:?})", c.t.as_secs_f64(), c.from, c.to, c.cause);
        }
        let _ = writeln!(s, "final mode {}  |w| = {:.4} rad/s  soc = {:.3}", self.final_mode, self.final_omega_mag, self.final_battery_soc);
        let _ = writeln!(s, "power cycles {}  hw kicks {}  watchdog scans {}", self.power_cycles, self.hw_kicks, self.watchdog_scans);
        let _ = writeln!(s, "activations {}  overruns {}  killed {}", self.spawns, self.overruns, self.tasks_killed);
        let _ = writeln!(
            s,
            "seu injected {}  scrub corrected {}  scrub uncorrectable {}  config scrubs {} (max divergence after {})",
            self.seu_injected, self.scrub_corrected, self.scrub_uncorrectable, self.config_scrubs, self.config_divergence_after_max
        );
        for a in &self.final_audit {
            let _ = writeln!(s, "  final audit {:<16} corrected={} uncorrectable={}", a.bank.name(), a.corrected, a.uncorrectable);
        }
        if self.compression_ratios.is_empty() {
            let _ = writeln!(s, "compression: no images stored");
        } else {
            let ratios: Vec<String> = self.compression_ratios.iter().map(|r| format!("{r:.3}")).collect();
            let _ = writeln!(s, "compression ratios: {}", ratios.join(", "));
        }
        let _ = writeln!(s, "downlink packets {}  lost interrupts {}", self.downlink_packets, self.lost_interrupts);
        s
    }
}

pub struct Simulation {
    scenario: Scenario,
    kernel: Kernel<SimEvent>,
    fp: Flightplan,
    hw: Hardware,
    ctx: TaskContext,
    injector: FaultInjector,
    telemetry: Telemetry,
    stalled: bool,
    pending_hangs: Vec<(SimTime, String)>,
    hung: BTreeSet<InstanceHandle>,
    imaging: Option<InstanceHandle>,
    monitor_state: Vec<bool>,
    eps_deadline: Option<crate::simkernel::EventId>,
    eps_anchor: SimTime,
    timeline: Vec<ModeChange>,
    spawns: u64,
    killed: u64,
    scrub_corrected: u64,
    scrub_uncorrectable: u64,
    config_scrubs: u64,
    config_divergence_after_max: u64,
    ratios: Vec<f64>,
    downlink_packets: u64,
    finished: bool,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        let invalid = |key: &str, message: String| ScenarioError {
            key: key.into(),
            line: None,
            message,
        };
        let mut hw = Hardware::new(&scenario.hardware).map_err(|m| invalid("hardware", m))?;
        for flip in &scenario.seu.schedule {
            let bits = hw
                .upsettable()
                .iter()
                .find(|m| m.target() == flip.target)
                .map(|m| m.bit_len())
                .unwrap_or(0);
            if flip.bit >= bits {
                return Err(invalid(
                    "fault.bit",
                    format!("bit {} is outside {} ({} bits)", flip.bit, flip.target, bits),
                ));
            }
        }
        let fp = Flightplan::new(
            scenario.modes.clone(),
            scenario.initial_mode,
            SimTime::ZERO,
            scenario.flightplan.clone(),
        )
        .map_err(|e| invalid("run.initial_mode", e.to_string()))?;
        let mut kernel = Kernel::new();
        for (i, m) in scenario.monitors.iter().enumerate() {
            kernel
                .register_line(m.line, HandlerId(i as u32))
                .map_err(|e| invalid("rule.interrupt_line", e.to_string()))?;
        }
        kernel
            .register_line(SPI_LINE, HandlerId(u32::MAX))
            .map_err(|e| invalid("rule.interrupt_line", e.to_string()))?;

        let injector = FaultInjector::new(
            scenario.seu.rate_per_mbit_s,
            scenario.seu.targets.iter().copied(),
            scenario.seed ^ 0x5E05,
            scenario.seu.schedule.clone(),
        );
        let ctx = TaskContext::new(scenario.initial_mode, scenario.bdot_gain, scenario.codec);
        let truth = HealthMetrics::new(hw.eps.battery_soc, hw.env.omega.into());
        let monitor_state = scenario.monitors.iter().map(|m| m.predicate.holds(&truth)).collect();
        let mut sim = Simulation {
            kernel,
            fp,
            hw,
            ctx,
            injector,
            telemetry: Telemetry::new(),
            stalled: false,
            pending_hangs: Vec::new(),
            hung: BTreeSet::new(),
            imaging: None,
            monitor_state,
            eps_deadline: None,
            eps_anchor: SimTime::ZERO,
            timeline: Vec::new(),
            spawns: 0,
            killed: 0,
            scrub_corrected: 0,
            scrub_uncorrectable: 0,
            config_scrubs: 0,
            config_divergence_after_max: 0,
            ratios: Vec::new(),
            downlink_packets: 0,
            finished: false,
            scenario,
        };
        sim.start();
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn hardware(&self) -> &Hardware {
        &self.hw
    }

    pub fn flightplan(&self) -> &Flightplan {
        &self.fp
    }

    pub fn telemetry(&self) -> &Telemetry {
        &self.telemetry
    }

    pub fn now(&self) -> SimTime {
        self.kernel.now()
    }

    fn start(&mut self) {
        let s = &self.scenario;
        self.telemetry.log(
            SimTime::ZERO,
            "header",
            json!({
                "schema": SCHEMA_VERSION,
                "scenario": s.name,
                "seed": s.seed,
                "duration_ms": s.duration_ms,
                "interrupts_enabled": s.interrupts_enabled,
            }),
        );
        let sel = self.hw.boot.select_boot_image();
        self.telemetry.log(SimTime::ZERO, "boot", json!({ "selection": sel, "reason": "initial" }));
        self.telemetry.log(SimTime::ZERO, "mode", json!({ "mode": s.initial_mode }));

        let env_step = s.env_step_ms;
        let wd = s.flightplan.watchdog_period_ms;
        let seu_tick = s.seu.tick_ms;
        let fault_times: Vec<SimTime> = s.faults.iter().map(|f| f.at).collect();
        let flip_times: BTreeSet<SimTime> = s.seu.schedule.iter().map(|f| f.at).collect();
        let seu_on = s.seu.rate_per_mbit_s > 0.0;

        self.schedule(SimTime(env_step), EventKind::Timer, SimEvent::EnvStep);
        self.schedule(SimTime(wd), EventKind::Timer, SimEvent::WatchdogScan);
        self.arm_eps_deadline(SimTime::ZERO);
        if seu_on {
            self.schedule(SimTime(seu_tick), EventKind::FaultInjection, SimEvent::SeuTick);
        }
        for (i, at) in fault_times.into_iter().enumerate() {
            self.schedule(at, EventKind::FaultInjection, SimEvent::Fault(i));
        }
        for at in flip_times {
            self.schedule(at, EventKind::FaultInjection, SimEvent::ScheduledFlips);
        }
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind, ev: SimEvent) -> crate::simkernel::EventId {
        self.kernel
            .schedule_event(at, kind, ev)
            .expect("engine never schedules into the past")
    }

    fn arm_eps_deadline(&mut self, anchor: SimTime) {
        if let Some(id) = self.eps_deadline.take() {
            self.kernel.cancel(id);
        }
        self.eps_anchor = anchor;
        let at = anchor + self.hw.eps.hw_watchdog_timeout_ms;
        self.eps_deadline = Some(self.schedule(at, EventKind::Timer, SimEvent::EpsDeadline));
    }

    /// Runs to the scenario duration and returns the summary.
    pub fn run(&mut self) -> Summary {
        let end = self.scenario.duration();
        self.run_until(end);
        self.finish()
    }

    /// Processes everything strictly before `until`.
    pub fn run_until(&mut self, until: SimTime) {
        loop {
            let tk = self.kernel.peek_time();
            let tf = if self.stalled { None } else { self.fp.next_due() };
            let next = match (tk, tf) {
                (Some(a), Some(b)) => a.min(b),
                (a, b) => match a.or(b) {
                    Some(t) => t,
                    None => break,
                },
            };
            if next >= until {
                break;
            }
            if tk == Some(next) {
                let ev = self.kernel.pop_next(next).expect("peeked");
                self.handle_event(ev.payload);
            } else {
                self.kernel.advance_until(next);
                self.dispatch(next);
            }
            self.service_interrupts();
        }
        self.kernel.advance_until(until);
    }

    fn finish(&mut self) -> Summary {
        let now = self.kernel.now();
        let final_audit: Vec<BankAudit> = self
            .hw
            .banks()
            .iter()
            .map(|b| {
                let r = b.audit();
                BankAudit {
                    bank: b.label,
                    corrected: r.corrected,
                    uncorrectable: r.uncorrectable,
                }
            })
            .collect();
        let summary = Summary {
            scenario: self.scenario.name.clone(),
            seed: self.scenario.seed,
            duration_ms: self.scenario.duration_ms,
            initial_mode: self.scenario.initial_mode,
            final_mode: self.fp.mode(),
            mode_timeline: self.timeline.clone(),
            power_cycles: self.hw.eps.power_cycle_count(),
            hw_kicks: self.hw.eps.kicks(),
            watchdog_scans: self.fp.ledger().scans,
            spawns: self.spawns,
            overruns: self.fp.total_overruns(),
            tasks_killed: self.killed,
            seu_injected: self.injector.injected(),
            scrub_corrected: self.scrub_corrected,
            scrub_uncorrectable: self.scrub_uncorrectable,
            config_scrubs: self.config_scrubs,
            config_divergence_after_max: self.config_divergence_after_max,
            final_audit,
            compression_ratios: self.ratios.clone(),
            downlink_packets: self.downlink_packets,
            lost_interrupts: self.kernel.lost_interrupts(),
            final_omega_mag: self.hw.env.omega.norm(),
            final_battery_soc: self.hw.eps.battery_soc,
        };
        if !self.finished {
            self.finished = true;
            self.telemetry.log(now, "summary", &summary);
        }
        summary
    }

    fn truth(&self) -> HealthMetrics {
        HealthMetrics::new(self.hw.eps.battery_soc, self.hw.env.omega.into())
    }

    /// Hardware threshold monitors, edge triggered on the true state.
    fn check_monitors(&mut self) {
        let truth = self.truth();
        for i in 0..self.scenario.monitors.len() {
            let holds = self.scenario.monitors[i].predicate.holds(&truth);
            let rising = holds && !self.monitor_state[i];
            self.monitor_state[i] = holds;
            if rising && self.scenario.interrupts_enabled {
                let line = self.scenario.monitors[i].line;
                self.kernel.raise_interrupt(line, SimEvent::Monitor(i));
            }
        }
    }

    fn handle_event(&mut self, ev: SimEvent) {
        let now = self.kernel.now();
        match ev {
            SimEvent::EnvStep => {
                let dt_ms = self.scenario.env_step_ms;
                let dipole = self.hw.actuators.dipole();
                let log = self.hw.env.env_step(dt_ms as f64 / 1000.0, &dipole);
                let loads = self.fp.running_count() + 1;
                self.hw.eps.update_battery(dt_ms as f64 / 1000.0, loads);
                self.hw.refresh_sensors();
                let omega: [f64; 3] = self.hw.env.omega.into();
                self.telemetry.log(
                    now,
                    "env",
                    json!({
                        "omega": omega,
                        "omega_mag": self.hw.env.omega.norm(),
                        "dipole": <[f64; 3]>::from(dipole),
                        "torque": log.torque,
                        "work": log.work,
                        "energy": log.energy_after,
                        "battery_soc": self.hw.eps.battery_soc,
                    }),
                );
                self.check_monitors();
                self.schedule(now + dt_ms, EventKind::Timer, SimEvent::EnvStep);
            }
            SimEvent::TaskComplete { handle, exit } => self.complete(handle, exit),
            SimEvent::WatchdogScan => {
                self.watchdog_scan();
                let period = self.scenario.flightplan.watchdog_period_ms;
                self.schedule(now + period, EventKind::Timer, SimEvent::WatchdogScan);
            }
            SimEvent::EpsDeadline => {
                self.eps_deadline = None;
                let elapsed = now.saturating_sub(self.eps_anchor);
                match self.hw.eps.eps_tick(elapsed) {
                    Some(pc) => self.power_cycle(pc.count, pc.last_kick),
                    None => self.arm_eps_deadline(now),
                }
            }
            SimEvent::Spi(SpiEvent::BurstDone(id)) => {
                self.kernel.raise_interrupt(SPI_LINE, SimEvent::Spi(SpiEvent::BurstDone(id)));
            }
            SimEvent::Spi(SpiEvent::BottomHalf(id)) => {
                let step = self.hw.spi.bottom_half(&mut self.hw.image_flash, now, id);
                self.spi_step(step);
            }
            SimEvent::Spi(SpiEvent::Timeout(id)) => {
                let step = self.hw.spi.on_timeout(id);
                self.spi_step(step);
            }
            SimEvent::Monitor(i) => self.on_monitor_interrupt(i),
            SimEvent::Fault(i) => self.apply_fault(i),
            SimEvent::SeuTick => {
                let dt = self.scenario.seu.tick_ms;
                self.inject(now, dt);
                self.schedule(now + dt, EventKind::FaultInjection, SimEvent::SeuTick);
            }
            SimEvent::ScheduledFlips => self.inject(now, 0),
            SimEvent::DrainTimeout => {
                if let Some((killed, done)) = self.fp.expire_drain(now) {
                    self.log_kills(now, &killed, "drain_timeout");
                    self.switched(done);
                }
            }
        }
    }

    fn service_interrupts(&mut self) {
        while self.kernel.has_pending_interrupts() {
            for d in self.kernel.take_interrupts() {
                let now = self.kernel.now();
                match d.payload {
                    SimEvent::Spi(SpiEvent::BurstDone(id)) => {
                        let step = self.hw.spi.top_half(&mut self.hw.image_flash, now, id);
                        self.spi_step(step);
                    }
                    SimEvent::Monitor(i) => self.on_monitor_interrupt(i),
                    other => unreachable!("not an interrupt payload: {other:?}"),
                }
            }
        }
    }

    fn on_monitor_interrupt(&mut self, i: usize) {
        let now = self.kernel.now();
        let m = &self.scenario.monitors[i];
        let (line, rule) = (m.line, m.rule.clone());
        let current = self.fp.mode();
        let target = handle_emergency_interrupt(current, line, &self.scenario.rules).unwrap_or(current);
        let handled = !self.stalled;
        self.telemetry.log(
            now,
            "interrupt",
            json!({ "line": line.0, "rule": rule, "mode": current, "target": target, "handled": handled }),
        );
        if !handled || target == current {
            return;
        }
        let (killed, done) = self.fp.force_switch(target, now, SwitchCause::Interrupt);
        self.log_kills(now, &killed, "interrupt_switch");
        if let Some(done) = done {
            self.switched(done);
        }
    }

    fn dispatch(&mut self, now: SimTime) {
        match self.fp.dispatch_front(now) {
            Dispatch::Idle => {}
            Dispatch::Check => self.check_node(now),
            Dispatch::Deferred { task, overruns } => {
                self.telemetry.log(now, "overrun", json!({ "task": task, "overruns": overruns }));
            }
            Dispatch::Spawned { handle, spec } => self.spawn(now, handle, spec),
        }
    }

    fn check_node(&mut self, now: SimTime) {
        self.ctx.mode = self.fp.mode();
        let metrics = gather_health(&mut self.ctx, &mut DeviceAccess::new(&mut self.hw, now));
        let from = self.fp.mode();
        if let Some(outcome) = self.fp.evaluate_check_node(now, &metrics, &self.scenario.rules) {
            self.switch_outcome(now, from, outcome, SwitchCause::Polled, Some(&metrics));
        }
    }

    fn switch_outcome(&mut self, now: SimTime, from: Mode, outcome: SwitchOutcome, cause: SwitchCause, metrics: Option<&HealthMetrics>) {
        let (target, state) = match &outcome {
            SwitchOutcome::Completed(c) => (Some(c.to), "completed"),
            SwitchOutcome::Draining(p) => (Some(p.target), "draining"),
            SwitchOutcome::AlreadyInMode => (None, "already_in_mode"),
            SwitchOutcome::AlreadyPending => (None, "already_pending"),
        };
        self.telemetry.log(
            now,
            "switch_requested",
            json!({
                "cause": cause,
                "from": from,
                "target": target,
                "state": state,
                "battery_soc": metrics.map(|m| m.battery_soc),
                "omega_mag": metrics.map(|m| m.omega_mag),
            }),
        );
        match outcome {
            SwitchOutcome::Completed(done) => self.switched(done),
            SwitchOutcome::Draining(p) => {
                self.schedule(p.drain_deadline, EventKind::Timer, SimEvent::DrainTimeout);
            }
            _ => {}
        }
    }

    fn switched(&mut self, done: CompletedSwitch) {
        self.telemetry.log(
            done.completed_at,
            "mode_switch",
            json!({
                "from": done.from,
                "to": done.to,
                "cause": done.cause,
                "requested_at": done.requested_at.ticks(),
            }),
        );
        self.timeline.push(ModeChange {
            t: done.completed_at,
            from: done.from,
            to: done.to,
            cause: done.cause,
        });
        self.ctx.mode = done.to;
        self.ctx.bdot.reset();
        self.hw.actuators.set_magnetorquer([0.0; 3]);
    }

    fn spawn(&mut self, now: SimTime, handle: InstanceHandle, spec: TaskSpec) {
        self.spawns += 1;
        self.telemetry.log(now, "spawn", json!({ "task": spec.name, "handle": handle.0, "body": spec.body }));
        if let Some(i) = self
            .pending_hangs
            .iter()
            .position(|(at, task)| *task == spec.name && *at <= now)
        {
            self.pending_hangs.remove(i);
            self.hung.insert(handle);
            self.telemetry.log(now, "task_hung", json!({ "task": spec.name, "handle": handle.0 }));
            return;
        }
        self.fp.record_checkin(&spec.name, now);
        self.ctx.mode = self.fp.mode();
        let (outcome, ticks) = {
            let mut dev = DeviceAccess::new(&mut self.hw, now);
            let out = run_body(spec.body, &mut self.ctx, &mut dev);
            (out, dev.bus_ticks())
        };
        self.log_notes(now, &spec.name, &outcome.notes);
        let exit = outcome.exit();
        let async_transfer = outcome.spi.is_some();
        if let Some(step) = outcome.spi {
            self.imaging = Some(handle);
            self.spi_step(step);
        }
        if !async_transfer {
            let done = now + spec.nominal_duration_ms.max(ticks);
            self.schedule(done, EventKind::Timer, SimEvent::TaskComplete { handle, exit });
        }
    }

    fn complete(&mut self, handle: InstanceHandle, exit: TaskExit) {
        let now = self.kernel.now();
        if self.hung.contains(&handle) {
            return;
        }
        if let Ok(c) = self.fp.on_completion(handle, exit) {
            self.telemetry.log(
                now,
                "complete",
                json!({
                    "task": c.task,
                    "handle": handle.0,
                    "exit": c.exit,
                    "started_at": c.started_at.ticks(),
                    "run_count": c.run_count,
                }),
            );
        }
        if let Some(done) = self.fp.try_complete_switch(now) {
            self.switched(done);
        }
    }

    fn spi_step(&mut self, step: SpiStep) {
        for (at, ev) in step.schedule {
            self.schedule(at, EventKind::BusCompletion, SimEvent::Spi(ev));
        }
        let Some((_, result)) = step.result else {
            return;
        };
        let now = self.kernel.now();
        let outcome = match result {
            TransferResult::Finished(t) => {
                self.hw.spi_fault_flag = 0;
                finish_imaging(&mut self.ctx, &mut DeviceAccess::new(&mut self.hw, now), t)
            }
            TransferResult::Aborted { transfer, error } => {
                self.hw.spi_fault_flag = SPI_FAULT_BIT;
                abort_imaging(&mut self.ctx, &transfer, error.to_string())
            }
        };
        let task = self
            .imaging
            .and_then(|h| self.fp.running().into_iter().find(|(_, i)| i.handle == h))
            .map(|(name, _)| name)
            .unwrap_or_else(|| "imaging-sequence".into());
        self.log_notes(now, &task, &outcome.notes);
        if let Some(handle) = self.imaging.take() {
            self.complete(handle, outcome.exit());
        }
    }

    fn log_notes(&mut self, now: SimTime, task: &str, notes: &[TaskNote]) {
        for note in notes {
            match note {
                TaskNote::Scrub { corrected, uncorrectable, .. } => {
                    self.scrub_corrected += corrected;
                    self.scrub_uncorrectable += uncorrectable;
                }
                TaskNote::ConfigScrub { divergence_after, .. } => {
                    self.config_scrubs += 1;
                    self.config_divergence_after_max = self.config_divergence_after_max.max(*divergence_after);
                }
                TaskNote::ImagingStored { ratio, .. } => self.ratios.push(*ratio),
                TaskNote::Downlink { packets, .. } => self.downlink_packets += *packets as u64,
                _ => {}
            }
            let mut v = serde_json::to_value(note).expect("notes serialize");
            let obj = v.as_object_mut().expect("notes are objects");
            let kind = obj
                .remove("note")
                .and_then(|k| k.as_str().map(str::to_string))
                .expect("tagged");
            obj.insert("task".into(), json!(task));
            self.telemetry.log(now, &kind, v);
        }
    }

    fn log_kills(&mut self, now: SimTime, killed: &[Terminated], reason: &str) {
        for k in killed {
            self.killed += 1;
            self.hung.remove(&k.handle);
            if self.imaging == Some(k.handle) {
                self.imaging = None;
                self.ctx.imaging = None;
                self.hw.spi.reset();
            }
            self.telemetry.log(
                now,
                "task_killed",
                json!({
                    "task": k.task,
                    "handle": k.handle.0,
                    "started_at": k.started_at.ticks(),
                    "reason": reason,
                }),
            );
        }
    }

    fn watchdog_scan(&mut self) {
        if self.stalled {
            return;
        }
        let now = self.kernel.now();
        let out = self.fp.software_watchdog_scan(now);
        let scan = self.fp.ledger().scans;
        self.telemetry.log(
            now,
            "watchdog_scan",
            json!({ "scan": scan, "healthy": out.kick.is_some(), "killed": out.terminated.len() }),
        );
        self.log_kills(now, &out.terminated, "watchdog");
        if let Some(grant) = out.kick {
            let scan = grant.scan();
            DeviceAccess::new(&mut self.hw, now).kick_watchdog(grant);
            self.telemetry.log(now, "hw_kick", json!({ "origin": "software_watchdog", "scan": scan }));
            self.arm_eps_deadline(now);
        }
        if let Some(done) = self.fp.try_complete_switch(now) {
            self.switched(done);
        }
    }

    fn power_cycle(&mut self, count: u64, last_kick: Option<SimTime>) {
        let now = self.kernel.now();
        self.telemetry.log(
            now,
            "power_cycle",
            json!({
                "count": count,
                "last_kick": last_kick.map(SimTime::ticks),
                "since_last_kick": now.saturating_sub(last_kick.unwrap_or(SimTime::ZERO)),
                "timeout_ms": self.hw.eps.hw_watchdog_timeout_ms,
            }),
        );
        self.stalled = false;
        self.pending_hangs.clear();
        self.hw.spi.reset();
        self.hw.spi_fault_flag = 0;
        self.hw.self_check_passed = false;
        let sel = self.hw.boot.select_boot_image();
        self.telemetry.log(now, "boot", json!({ "selection": sel, "reason": "power_cycle" }));
        let from = self.fp.mode();
        let lost = self.fp.reboot(Mode::Recovery, now);
        self.log_kills(now, &lost, "power_cycle");
        self.hung.clear();
        self.imaging = None;
        self.ctx.imaging = None;
        self.switched(CompletedSwitch {
            from,
            to: Mode::Recovery,
            cause: SwitchCause::PowerCycle,
            requested_at: now,
            completed_at: now,
        });
        self.arm_eps_deadline(now);
    }

    fn inject(&mut self, now: SimTime, dt_ms: u64) {
        let events = self.injector.inject_faults(now, dt_ms, &mut self.hw.upsettable());
        for e in events {
            self.telemetry.log(now, "seu", json!({ "target": e.target, "bit": e.bit, "scheduled": e.scheduled }));
        }
    }

    fn apply_fault(&mut self, i: usize) {
        let now = self.kernel.now();
        let action = self.scenario.faults[i].action.clone();
        let describe = format!("{action:?}");
        self.telemetry.log(now, "fault", json!({ "action": describe }));
        match action {
            FaultAction::Hang { task } => self.pending_hangs.push((now, task)),
            FaultAction::Stall => self.stalled = true,
            FaultAction::I2c { device, fault } => {
                if let Some(d) = self.hw.i2c.device_mut(device.address()) {
                    d.set_fault(fault);
                }
            }
            FaultAction::SpiTimeout { burst } => self.hw.image_flash.set_fault(SpiFault::Timeout { burst }),
            FaultAction::CorruptBootChecksum => self.hw.boot.corrupt_primary_checksum(),
            FaultAction::SetSoc(soc) => {
                self.hw.eps.set_soc(soc);
                self.check_monitors();
            }
            FaultAction::SetOmega(w) => {
                self.hw.env.omega = Vector3::from(w);
                self.hw.refresh_sensors();
                self.check_monitors();
            }
            FaultAction::Command(mode) => {
                if self.stalled {
                    return;
                }
                let from = self.fp.mode();
                let outcome = self.fp.request_mode_switch(mode, now, SwitchCause::Command);
                self.switch_outcome(now, from, outcome, SwitchCause::Command, None);
            }
        }
    }
}

/// Convenience: parse, run and return the simulation for inspection.
pub fn run_scenario(scenario: Scenario) -> Result<(Simulation, Summary), ScenarioError> {
    let mut sim = Simulation::new(scenario)?;
    let summary = sim.run();
    Ok((sim, summary))
}

impl Simulation {
    /// Health snapshot as the check node would see it now.
    pub fn observed_health(&mut self) -> HealthMetrics {
        let now = self.kernel.now();
        gather_health(&mut self.ctx, &mut DeviceAccess::new(&mut self.hw, now))
    }

    pub fn body_outcome_for_test(&mut self, body: crate::tasks::TaskBody) -> BodyOutcome {
        let now = self.kernel.now();
        run_body(body, &mut self.ctx, &mut DeviceAccess::new(&mut self.hw, now))
    }
}
