//! Scenario files: TOML sections of `key = value` pairs, validated in full
//! before a run starts. The grammar is documented in `scenarios/README.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::compression::{CodecParams, CoderParams, PredictorParams};
use crate::devices::{HardwareConfig, I2cFault, GYRO_ADDR, MAG_ADDR, TEMP_ADDR};
use crate::faulttol::{BankLabel, FaultTarget, ScheduledFlip};
use crate::flightplan::{FlightplanConfig, TaskSpec};
use crate::fsm::{Mode, ModeTable, Predicate, Trigger, TransitionRule};
use crate::simkernel::{LineId, SimTime};
use crate::tasks::TaskBody;

pub const DEFAULT_SCENARIO: &str = include_str!("../../../scenarios/default.toml");

/// Interrupt line reserved for SPI transfer completions.
pub const SPI_LINE: LineId = LineId(3);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorId {
    Magnetometer,
    Gyro,
    Temperature,
}

impl SensorId {
    pub fn address(self) -> u8 {
        match self {
            SensorId::Magnetometer => MAG_ADDR,
            SensorId::Gyro => GYRO_ADDR,
            SensorId::Temperature => TEMP_ADDR,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FaultAction {
    /// The next activation of `task` at or after the fault time never
    /// checks in or completes.
    Hang { task: String },
    /// The flightplan process stops dispatching and scanning.
    Stall,
    I2c { device: SensorId, fault: I2cFault },
    SpiTimeout { burst: u32 },
    CorruptBootChecksum,
    SetSoc(f64),
    SetOmega([f64; 3]),
    /// Ground command requesting a mode switch.
    Command(Mode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledFault {
    pub at: SimTime,
    pub action: FaultAction,
}

/// Hardware threshold monitor that raises `line` on a rising edge of
/// `predicate` over the true spacecraft state.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitor {
    pub rule: String,
    pub line: LineId,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeuConfig {
    pub rate_per_mbit_s: f64,
    pub targets: Vec<FaultTarget>,
    pub tick_ms: u64,
    pub schedule: Vec<ScheduledFlip>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub telemetry: String,
    pub summary: String,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub duration_ms: u64,
    pub seed: u64,
    pub initial_mode: Mode,
    pub interrupts_enabled: bool,
    pub flightplan: FlightplanConfig,
    pub env_step_ms: u64,
    pub hardware: HardwareConfig,
    pub bdot_gain: f64,
    pub codec: CodecParams,
    pub tasks: Vec<(TaskSpec, Vec<Mode>)>,
    pub modes: ModeTable,
    pub rules: Vec<TransitionRule>,
    pub monitors: Vec<Monitor>,
    pub faults: Vec<ScheduledFault>,
    pub seu: SeuConfig,
    pub output: OutputConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    hardware: HardwareConfig,
    #[serde(default)]
    environment: RawEnvironment,
    #[serde(default)]
    control: RawControl,
    #[serde(default)]
    codec: RawCodec,
    #[serde(default)]
    seu: RawSeu,
    #[serde(default)]
    output: RawOutput,
    #[serde(default, rename = "task")]
    tasks: Vec<RawTask>,
    #[serde(default, rename = "rule")]
    rules: Vec<RawRule>,
    #[serde(default, rename = "fault")]
    faults: Vec<Spanned<RawFault>>,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawRun {
    duration_s: f64,
    seed: u64,
    initial_mode: Mode,
    interrupts_enabled: bool,
    poll_period_ms: u64,
    watchdog_period_ms: u64,
    drain_timeout_ms: Option<u64>,
    env_step_ms: u64,
}

impl Default for RawRun {
    fn default() -> Self {
        let fp = FlightplanConfig::default();
        RawRun {
            duration_s: 600.0,
            seed: 1,
            initial_mode: Mode::Detumble,
            interrupts_enabled: true,
            poll_period_ms: fp.poll_period_ms,
            watchdog_period_ms: fp.watchdog_period_ms,
            drain_timeout_ms: None,
            env_step_ms: 100,
        }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawEnvironment {
    omega: [f64; 3],
    inertia: [f64; 3],
    b_inertial: [f64; 3],
}

impl Default for RawEnvironment {
    fn default() -> Self {
        let hw = HardwareConfig::default();
        RawEnvironment {
            omega: hw.omega0,
            inertia: hw.inertia,
            b_inertial: hw.b_inertial,
        }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawControl {
    bdot_gain: f64,
}

impl Default for RawControl {
    fn default() -> Self {
        RawControl { bdot_gain: 2e5 }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawCodec {
    p: u8,
    weight_resolution: u8,
    update_scaling: u8,
    u_max: u8,
    initial_k: u8,
    counter_limit: u16,
}

impl Default for RawCodec {
    fn default() -> Self {
        let c = CodecParams::default();
        RawCodec {
            p: c.predictor.p,
            weight_resolution: c.predictor.weight_resolution,
            update_scaling: c.predictor.update_scaling,
            u_max: c.coder.u_max,
            initial_k: c.coder.initial_k,
            counter_limit: c.coder.counter_limit,
        }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSeu {
    rate_per_mbit_s: f64,
    targets: Option<Vec<FaultTarget>>,
    tick_ms: u64,
}

impl Default for RawSeu {
    fn default() -> Self {
        RawSeu {
            rate_per_mbit_s: 0.0,
            targets: None,
            tick_ms: 1000,
        }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawOutput {
    telemetry: String,
    summary: String,
}

impl Default for RawOutput {
    fn default() -> Self {
        RawOutput {
            telemetry: "telemetry.jsonl".into(),
            summary: "summary.txt".into(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    name: Spanned<String>,
    body: TaskBody,
    period_ms: u64,
    duration_ms: u64,
    grace_ms: Option<u64>,
    control: Option<bool>,
    modes: Spanned<Vec<Mode>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    name: Spanned<String>,
    from: Option<Vec<Mode>>,
    when: Spanned<String>,
    to: Spanned<Mode>,
    priority: Spanned<i32>,
    interrupt_line: Option<Spanned<u8>>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawFault {
    Hang { at_ms: u64, task: String },
    Stall { at_ms: u64 },
    I2c { at_ms: u64, device: String, fault: I2cFault },
    SpiTimeout { at_ms: u64, burst: u32 },
    BitFlip { at_ms: u64, target: FaultTarget, bit: u64 },
    CorruptBootChecksum { at_ms: u64 },
    SetSoc { at_ms: u64, soc: f64 },
    SetOmega { at_ms: u64, omega: [f64; 3] },
    Command { at_ms: u64, mode: Mode },
}

fn line_of(src: &str, span: Range<usize>) -> usize {
    src[..span.start.min(src.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn err(&self, key: impl Into<String>, span: Option<Range<usize>>, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            key: key.into(),
            line: span.map(|s| line_of(self.src, s)),
            message: message.into(),
        }
    }
}

impl Scenario {
    pub fn default_scenario() -> Self {
        Scenario::parse(DEFAULT_SCENARIO).expect("default scenario is valid")
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let src = std::fs::read_to_string(path).map_err(|e| ScenarioError {
            key: path.display().to_string(),
            line: None,
            message: e.to_string(),
        })?;
        Scenario::parse(&src)
    }

    pub fn parse(src: &str) -> Result<Self, ScenarioError> {
        let cx = Ctx { src };
        let raw: RawScenario = toml::from_str(src).map_err(|e| {
            let message = e.message().to_string();
            let key = message
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "(syntax)".into());
            cx.err(key, e.span(), message)
        })?;
        build(&cx, raw)
    }

    pub fn duration(&self) -> SimTime {
        SimTime(self.duration_ms)
    }

    pub fn set_duration_s(&mut self, s: f64) -> Result<(), ScenarioError> {
        self.duration_ms = duration_ms(s).ok_or_else(|| ScenarioError {
            key: "--duration".into(),
            line: None,
            message: format!("duration must be a positive number of seconds, got {s}"),
        })?;
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.hardware.seed = seed;
    }

    /// Drops every task with this body from every mode.
    pub fn without_body(&mut self, body: TaskBody) {
        self.tasks.retain(|(spec, _)| spec.body != body);
        self.modes = mode_table(&self.tasks).expect("removing tasks keeps the table valid");
    }
}

fn duration_ms(s: f64) -> Option<u64> {
    (s.is_finite() && s > 0.0).then(|| (s * 1000.0).round() as u64).filter(|ms| *ms > 0)
}

fn mode_table(tasks: &[(TaskSpec, Vec<Mode>)]) -> Result<ModeTable, crate::fsm::ModeTableError> {
    let mut table = ModeTable::new();
    for mode in Mode::ALL {
        let specs = tasks
            .iter()
            .filter(|(_, modes)| modes.contains(&mode))
            .map(|(s, _)| s.clone())
            .collect();
        table.insert(mode, specs)?;
    }
    Ok(table)
}

fn build(cx: &Ctx, raw: RawScenario) -> Result<Scenario, ScenarioError> {
    let run = raw.run;
    let duration_ms =
        duration_ms(run.duration_s).ok_or_else(|| cx.err("run.duration_s", None, "must be positive"))?;
    if run.poll_period_ms == 0 {
        return Err(cx.err("run.poll_period_ms", None, "must be positive"));
    }
    if run.watchdog_period_ms == 0 {
        return Err(cx.err("run.watchdog_period_ms", None, "must be positive"));
    }
    if run.env_step_ms == 0 {
        return Err(cx.err("run.env_step_ms", None, "must be positive"));
    }

    let mut hardware = raw.hardware;
    hardware.seed = run.seed;
    hardware.omega0 = raw.environment.omega;
    hardware.inertia = raw.environment.inertia;
    hardware.b_inertial = raw.environment.b_inertial;
    if hardware.inertia.iter().any(|i| !(*i > 0.0)) {
        return Err(cx.err("environment.inertia", None, "every principal moment must be positive"));
    }
    if !(0.0..=1.0).contains(&hardware.initial_soc) {
        return Err(cx.err("hardware.initial_soc", None, "must lie in [0, 1]"));
    }
    if hardware.hw_watchdog_timeout_ms == 0 {
        return Err(cx.err("hardware.hw_watchdog_timeout_ms", None, "must be positive"));
    }
    if !(hardware.dipole_per_duty > 0.0) {
        return Err(cx.err("hardware.dipole_per_duty", None, "must be positive"));
    }
    if hardware.raw_cube.bytes() > hardware.image_flash_bytes {
        return Err(cx.err("hardware.raw_cube", None, "raw cube does not fit in the image flash"));
    }
    if hardware.spi_burst_size == 0 {
        return Err(cx.err("hardware.spi_burst_size", None, "must be positive"));
    }
    if hardware.telemetry_slot_size < 3 || hardware.telemetry_slots == 0 {
        return Err(cx.err("hardware.telemetry_slots", None, "telemetry memory is too small"));
    }
    if !(raw.control.bdot_gain >= 0.0) {
        return Err(cx.err("control.bdot_gain", None, "must be non-negative"));
    }

    let c = raw.codec;
    let codec = CodecParams {
        predictor: PredictorParams {
            p: c.p,
            weight_resolution: c.weight_resolution,
            update_scaling: c.update_scaling,
        },
        coder: CoderParams {
            u_max: c.u_max,
            initial_k: c.initial_k,
            counter_limit: c.counter_limit,
        },
    };
    codec.predictor.validate().map_err(|m| cx.err("codec", None, m))?;
    if codec.coder.u_max == 0 || codec.coder.counter_limit < 2 {
        return Err(cx.err("codec", None, "u_max must be positive and counter_limit at least 2"));
    }

    let mut tasks = Vec::new();
    let mut names = BTreeSet::new();
    for t in raw.tasks {
        let span = t.name.span();
        let name = t.name.into_inner();
        if !names.insert(name.clone()) {
            return Err(cx.err("task.name", Some(span), format!("duplicate task `{name}`")));
        }
        let mut spec = TaskSpec::new(&name, t.body, t.period_ms, t.duration_ms);
        spec.is_control = t.control.unwrap_or(t.body.is_control_law());
        if let Some(g) = t.grace_ms {
            spec.watchdog_grace_ms = g;
        }
        spec.validate().map_err(|m| cx.err("task.period_ms", Some(span.clone()), m))?;
        let modes_span = t.modes.span();
        let modes = t.modes.into_inner();
        if modes.is_empty() {
            return Err(cx.err("task.modes", Some(modes_span), format!("task `{name}` belongs to no mode")));
        }
        let clash = modes.iter().find(|mode| {
            spec.is_control && tasks.iter().any(|(s, m): &(TaskSpec, Vec<Mode>)| s.is_control && m.contains(mode))
        });
        if let Some(mode) = clash {
            return Err(cx.err(
                "task.modes",
                Some(modes_span),
                format!("mode {mode} would run two control tasks (`{name}` is the second)"),
            ));
        }
        tasks.push((spec, modes));
    }
    let modes = mode_table(&tasks).map_err(|e| cx.err("task", None, e.to_string()))?;

    let mut rules = Vec::new();
    let mut monitors = Vec::new();
    let mut lines = BTreeMap::new();
    let mut rule_names = BTreeSet::new();
    let mut priorities: BTreeMap<(Mode, i32), String> = BTreeMap::new();
    for r in raw.rules {
        let name_span = r.name.span();
        let name = r.name.into_inner();
        if !rule_names.insert(name.clone()) {
            return Err(cx.err("rule.name", Some(name_span), format!("duplicate rule `{name}`")));
        }
        let predicate: Predicate = r
            .when
            .get_ref()
            .parse()
            .map_err(|m: String| cx.err("rule.when", Some(r.when.span()), m))?;
        let to = *r.to.get_ref();
        if modes.mode_tasks(to).map(|t| t.is_empty()).unwrap_or(true) {
            return Err(cx.err("rule.to", Some(r.to.span()), format!("mode {to} has no tasks")));
        }
        let from = r
            .from
            .unwrap_or_else(|| Mode::ALL.iter().copied().filter(|m| *m != to).collect());
        let priority = *r.priority.get_ref();
        for m in &from {
            if let Some(other) = priorities.insert((*m, priority), name.clone()) {
                return Err(cx.err(
                    "rule.priority",
                    Some(r.priority.span()),
                    format!("priority {priority} from mode {m} is already used by rule `{other}`"),
                ));
            }
        }
        let rule = TransitionRule {
            name: name.clone(),
            from,
            predicate,
            to,
            trigger: Trigger::Polled,
            priority,
        };
        if let Some(line) = r.interrupt_line {
            let span = line.span();
            let line = LineId(line.into_inner());
            if line == SPI_LINE {
                return Err(cx.err("rule.interrupt_line", Some(span), "line 3 is reserved for SPI"));
            }
            if !to.is_emergency() {
                return Err(cx.err(
                    "rule.interrupt_line",
                    Some(span),
                    format!("interrupt rules must target an emergency mode, not {to}"),
                ));
            }
            if let Some(other) = lines.insert(line, name.clone()) {
                return Err(cx.err("rule.interrupt_line", Some(span), format!("line {} already bound to `{other}`", line.0)));
            }
            rules.push(TransitionRule {
                trigger: Trigger::Interrupt(line),
                ..rule.clone()
            });
            monitors.push(Monitor {
                rule: name,
                line,
                predicate,
            });
        }
        rules.push(rule);
    }

    for (key, mode) in [("run.initial_mode", run.initial_mode), ("(recovery)", Mode::Recovery)] {
        if modes.mode_tasks(mode).map(|t| t.is_empty()).unwrap_or(true) {
            return Err(cx.err(key, None, format!("mode {mode} has no tasks")));
        }
    }

    let mut faults = Vec::new();
    let mut schedule = Vec::new();
    for f in raw.faults {
        let span = f.span();
        let (at_ms, action) = match f.into_inner() {
            RawFault::Hang { at_ms, task } => {
                if !names.contains(&task) {
                    return Err(cx.err("fault.task", Some(span), format!("no task named `{task}`")));
                }
                (at_ms, FaultAction::Hang { task })
            }
            RawFault::Stall { at_ms } => (at_ms, FaultAction::Stall),
            RawFault::I2c { at_ms, device, fault } => {
                let device = match device.as_str() {
                    "magnetometer" => SensorId::Magnetometer,
                    "gyro" => SensorId::Gyro,
                    "temperature" => SensorId::Temperature,
                    other => return Err(cx.err("fault.device", Some(span), format!("unknown device `{other}`"))),
                };
                (at_ms, FaultAction::I2c { device, fault })
            }
            RawFault::SpiTimeout { at_ms, burst } => {
                if burst == 0 {
                    return Err(cx.err("fault.burst", Some(span), "bursts are numbered from 1"));
                }
                (at_ms, FaultAction::SpiTimeout { burst })
            }
            RawFault::BitFlip { at_ms, target, bit } => {
                schedule.push(ScheduledFlip {
                    at: SimTime(at_ms),
                    target,
                    bit,
                });
                continue;
            }
            RawFault::CorruptBootChecksum { at_ms } => (at_ms, FaultAction::CorruptBootChecksum),
            RawFault::SetSoc { at_ms, soc } => {
                if !(0.0..=1.0).contains(&soc) {
                    return Err(cx.err("fault.soc", Some(span), "must lie in [0, 1]"));
                }
                (at_ms, FaultAction::SetSoc(soc))
            }
            RawFault::SetOmega { at_ms, omega } => (at_ms, FaultAction::SetOmega(omega)),
            RawFault::Command { at_ms, mode } => {
                if modes.mode_tasks(mode).map(|t| t.is_empty()).unwrap_or(true) {
                    return Err(cx.err("fault.mode", Some(span), format!("mode {mode} has no tasks")));
                }
                (at_ms, FaultAction::Command(mode))
            }
        };
        faults.push(ScheduledFault {
            at: SimTime(at_ms),
            action,
        });
    }
    faults.sort_by_key(|f| f.at);

    let seu = SeuConfig {
        rate_per_mbit_s: raw.seu.rate_per_mbit_s,
        targets: raw.seu.targets.unwrap_or_else(|| {
            BankLabel::ALL
                .iter()
                .filter(|l| **l != BankLabel::BootFlash)
                .map(|l| FaultTarget::Bank(*l))
                .chain([FaultTarget::Config, FaultTarget::BootPrimary])
                .collect()
        }),
        tick_ms: raw.seu.tick_ms,
        schedule,
    };
    if !(seu.rate_per_mbit_s >= 0.0) {
        return Err(cx.err("seu.rate_per_mbit_s", None, "must be non-negative"));
    }
    if seu.tick_ms == 0 {
        return Err(cx.err("seu.tick_ms", None, "must be positive"));
    }
    if seu.targets.contains(&FaultTarget::Bank(BankLabel::BootFlash)) {
        return Err(cx.err("seu.targets", None, "boot-flash is modelled as `boot-primary`"));
    }

    Ok(Scenario {
        name: raw.name.unwrap_or_else(|| "unnamed".into()),
        duration_ms,
        seed: run.seed,
        initial_mode: run.initial_mode,
        interrupts_enabled: run.interrupts_enabled,
        flightplan: FlightplanConfig {
            poll_period_ms: run.poll_period_ms,
            watchdog_period_ms: run.watchdog_period_ms,
            drain_timeout_ms: run.drain_timeout_ms,
        },
        env_step_ms: run.env_step_ms,
        hardware,
        bdot_gain: raw.control.bdot_gain,
        codec,
        tasks,
        modes,
        rules,
        monitors,
        faults,
        seu,
        output: OutputConfig {
            telemetry: raw.output.telemetry,
            summary: raw.output.summary,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(extra: &str) -> Result<Scenario, ScenarioError> {
        Scenario::parse(&format!("{DEFAULT_SCENARIO}\n{extra}"))
    }

    #[test]
    fn default_parses() {
        let s = Scenario::default_scenario();
        assert_eq!(s.initial_mode, Mode::Detumble);
        assert_eq!(s.duration_ms, 600_000);
        let detumble: Vec<&str> = s.modes.mode_tasks(Mode::Detumble).unwrap().iter().map(|t| t.name.as_str()).collect();
        assert_eq!(detumble, ["housekeeping", "sensor-poll", "bdot-control", "beacon"]);
        assert_eq!(s.monitors.len(), 2);
    }

    #[test]
    fn two_control_tasks_in_one_mode() {
        let e = with(
            "[[task]]\nname = \"spin\"\nbody = \"bdot-control\"\nperiod_ms = 100\nduration_ms = 5\nmodes = [\"Nominal\"]\n",
        )
        .unwrap_err();
        assert!(e.message.contains("Nominal"), "{e}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let src = DEFAULT_SCENARIO.replacen("seed = 42", "seed = 42\nsed = 1", 1);
        let e = Scenario::parse(&src).unwrap_err();
        let expect = src.lines().position(|l| l.starts_with("sed =")).unwrap() + 1;
        assert_eq!(e.line, Some(expect), "{e}");
        assert_eq!(e.key, "sed");
    }

    #[test]
    fn duplicate_priority_rejected() {
        let e = with("[[rule]]\nname = \"dup\"\nfrom = [\"Detumble\"]\nwhen = \"omega_mag < 0.01\"\nto = \"Nominal\"\npriority = 10\n")
            .unwrap_err();
        assert!(e.message.contains("priority"), "{e}");
    }

    #[test]
    fn missing_hang_target_rejected() {
        let e = with("[[fault]]\nkind = \"hang\"\nat_ms = 5\ntask = \"nope\"\n").unwrap_err();
        assert!(e.message.contains("nope"), "{e}");
    }

    #[test]
    fn interrupt_rule_needs_emergency_target() {
        let e = with("[[rule]]\nname = \"odd\"\nwhen = \"battery_soc > 0.99\"\nto = \"Nominal\"\npriority = 55\ninterrupt_line = 7\n")
            .unwrap_err();
        assert_eq!(e.key, "rule.interrupt_line", "{e}");
    }

    #[test]
    fn without_body_prunes_tasks() {
        let mut s = Scenario::default_scenario();
        s.without_body(TaskBody::MemoryScrub);
        assert!(s.modes.mode_tasks(Mode::Nominal).unwrap().iter().all(|t| t.body != TaskBody::MemoryScrub));
    }
}
