//! Mode state machine: normal and emergency modes, guarded transitions and
//! the per-mode task table.
//!
//! Polled rules are checked by the flightplan's check node. Interrupt rules
//! are bound to an interrupt line and bypass the poll entirely.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flightplan::TaskSpec;
use crate::simkernel::LineId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Detumble,
    SunPointing,
    Nominal,
    Imaging,
    Downlink,
    SafeLowPower,
    EmergencyDetumble,
    Recovery,
}

impl Mode {
    pub const NORMAL: [Mode; 5] = [
        Mode::Detumble,
        Mode::SunPointing,
        Mode::Nominal,
        Mode::Imaging,
        Mode::Downlink,
    ];
    pub const EMERGENCY: [Mode; 3] = [Mode::SafeLowPower, Mode::EmergencyDetumble, Mode::Recovery];
    pub const ALL: [Mode; 8] = [
        Mode::Detumble,
        Mode::SunPointing,
        Mode::Nominal,
        Mode::Imaging,
        Mode::Downlink,
        Mode::SafeLowPower,
        Mode::EmergencyDetumble,
        Mode::Recovery,
    ];

    pub fn is_emergency(self) -> bool {
        Mode::EMERGENCY.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Detumble => "Detumble",
            Mode::SunPointing => "SunPointing",
            Mode::Nominal => "Nominal",
            Mode::Imaging => "Imaging",
            Mode::Downlink => "Downlink",
            Mode::SafeLowPower => "SafeLowPower",
            Mode::EmergencyDetumble => "EmergencyDetumble",
            Mode::Recovery => "Recovery",
        }
    }

    /// Compact numeric id used in fixed-size telemetry records.
    pub fn code(self) -> u8 {
        Mode::ALL.iter().position(|m| *m == self).unwrap() as u8
    }

    pub fn from_code(code: u8) -> Option<Mode> {
        Mode::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

/// Snapshot of the health parameters the state machine reasons about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthMetrics {
    pub battery_soc: f64,
    pub omega: [f64; 3],
    pub omega_mag: f64,
    pub temperatures: Vec<f64>,
    pub uncorrectable_ecc: u64,
    pub bus_fault_flags: u8,
    pub self_check_passed: bool,
}

impl HealthMetrics {
    pub fn new(battery_soc: f64, omega: [f64; 3]) -> Self {
        HealthMetrics {
            battery_soc: battery_soc.clamp(0.0, 1.0),
            omega,
            omega_mag: Vector3::from(omega).norm(),
            temperatures: Vec::new(),
            uncorrectable_ecc: 0,
            bus_fault_flags: 0,
            self_check_passed: false,
        }
    }

    pub fn value(&self, metric: Metric) -> f64 {
        match metric {
            Metric::BatterySoc => self.battery_soc,
            Metric::OmegaMag => self.omega_mag,
            Metric::MaxTemperature => self
                .temperatures
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            Metric::MinTemperature => self
                .temperatures
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
            Metric::UncorrectableEcc => self.uncorrectable_ecc as f64,
            Metric::BusFaults => self.bus_fault_flags.count_ones() as f64,
            Metric::SelfCheck => {
                if self.self_check_passed {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    BatterySoc,
    OmegaMag,
    MaxTemperature,
    MinTemperature,
    UncorrectableEcc,
    BusFaults,
    SelfCheck,
}

impl Metric {
    const NAMES: [(&'static str, Metric); 7] = [
        ("battery_soc", Metric::BatterySoc),
        ("omega_mag", Metric::OmegaMag),
        ("max_temperature", Metric::MaxTemperature),
        ("min_temperature", Metric::MinTemperature),
        ("uncorrectable_ecc", Metric::UncorrectableEcc),
        ("bus_faults", Metric::BusFaults),
        ("self_check", Metric::SelfCheck),
    ];

    pub fn name(self) -> &'static str {
        Metric::NAMES.iter().find(|(_, m)| *m == self).unwrap().0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
        }
    }
}

/// `metric <op> threshold`, e.g. `battery_soc < 0.3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub metric: Metric,
    pub op: Comparison,
    pub threshold: f64,
}

impl Predicate {
    pub fn new(metric: Metric, op: Comparison, threshold: f64) -> Self {
        Predicate {
            metric,
            op,
            threshold,
        }
    }

    pub fn holds(&self, m: &HealthMetrics) -> bool {
        let v = m.value(self.metric);
        match self.op {
            Comparison::Lt => v < self.threshold,
            Comparison::Le => v <= self.threshold,
            Comparison::Gt => v > self.threshold,
            Comparison::Ge => v >= self.threshold,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.metric.name(), self.op.symbol(), self.threshold)
    }
}

impl FromStr for Predicate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let [metric, op, value] = parts.as_slice() else {
            return Err(format!("expected `<metric> <op> <value>`, got `{s}`"));
        };
        let metric = Metric::NAMES
            .iter()
            .find(|(n, _)| n == metric)
            .map(|(_, m)| *m)
            .ok_or_else(|| format!("unknown metric `{metric}`"))?;
        let op = match *op {
            "<" => Comparison::Lt,
            "<=" => Comparison::Le,
            ">" => Comparison::Gt,
            ">=" => Comparison::Ge,
            other => return Err(format!("unknown comparison `{other}`")),
        };
        let threshold: f64 = value
            .parse()
            .map_err(|_| format!("threshold `{value}` is not a number"))?;
        Ok(Predicate::new(metric, op, threshold))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Polled,
    Interrupt(LineId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRule {
    pub name: String,
    pub from: Vec<Mode>,
    pub predicate: Predicate,
    pub to: Mode,
    pub trigger: Trigger,
    pub priority: i32,
}

impl TransitionRule {
    pub fn applies_from(&self, mode: Mode) -> bool {
        self.from.contains(&mode)
    }
}

/// Highest-priority polled rule that applies to `current` and whose predicate
/// holds. Ties (excluded by validation) resolve to table order.
pub fn evaluate_polled_transitions(
    current: Mode,
    metrics: &HealthMetrics,
    table: &[TransitionRule],
) -> Option<Mode> {
    let mut best: Option<&TransitionRule> = None;
    for rule in table {
        if rule.trigger != Trigger::Polled || !rule.applies_from(current) {
            continue;
        }
        if !rule.predicate.holds(metrics) {
            continue;
        }
        if best.is_none_or(|b| rule.priority > b.priority) {
            best = Some(rule);
        }
    }
    best.map(|r| r.to)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InterruptError {
    #[error("no interrupt rule is bound to line {0:?}")]
    Unbound(LineId),
}

/// Emergency target for an interrupt on `line`. A line whose rule does not
/// apply to the current mode, or whose target is already active, leaves the
/// mode unchanged.
pub fn handle_emergency_interrupt(
    current: Mode,
    line: LineId,
    table: &[TransitionRule],
) -> Result<Mode, InterruptError> {
    let rule = table
        .iter()
        .find(|r| r.trigger == Trigger::Interrupt(line))
        .ok_or(InterruptError::Unbound(line))?;
    if current == rule.to || !rule.applies_from(current) {
        return Ok(current);
    }
    Ok(rule.to)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModeTableError {
    #[error("mode {0} has no task list")]
    UnknownMode(Mode),
    #[error("mode {mode} has {count} control tasks; at most one is allowed")]
    MultipleControlTasks { mode: Mode, count: usize },
}

/// Static task list per mode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModeTable {
    tasks: BTreeMap<Mode, Vec<TaskSpec>>,
}

impl ModeTable {
    pub fn new() -> Self {
        ModeTable::default()
    }

    pub fn insert(&mut self, mode: Mode, tasks: Vec<TaskSpec>) -> Result<(), ModeTableError> {
        let count = tasks.iter().filter(|t| t.is_control).count();
        if count > 1 {
            return Err(ModeTableError::MultipleControlTasks { mode, count });
        }
        self.tasks.insert(mode, tasks);
        Ok(())
    }

    pub fn mode_tasks(&self, mode: Mode) -> Result<&[TaskSpec], ModeTableError> {
        self.tasks
            .get(&mode)
            .map(|v| v.as_slice())
            .ok_or(ModeTableError::UnknownMode(mode))
    }

    pub fn contains(&self, mode: Mode) -> bool {
        self.tasks.contains_key(&mode)
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        self.tasks.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn polled(name: &str, from: &[Mode], pred: &str, to: Mode, prio: i32) -> TransitionRule {
        TransitionRule {
            name: name.into(),
            from: from.to_vec(),
            predicate: pred.parse().unwrap(),
            to,
            trigger: Trigger::Polled,
            priority: prio,
        }
    }

    fn default_like_table() -> Vec<TransitionRule> {
        vec![
            polled("detumbled", &[Mode::Detumble], "omega_mag < 0.02", Mode::SunPointing, 10),
            polled(
                "low-power",
                &[Mode::Nominal, Mode::Detumble, Mode::Imaging],
                "battery_soc < 0.3",
                Mode::SafeLowPower,
                100,
            ),
            TransitionRule {
                name: "low-power-irq".into(),
                from: vec![Mode::Nominal, Mode::Imaging, Mode::Detumble],
                predicate: "battery_soc < 0.3".parse().unwrap(),
                to: Mode::SafeLowPower,
                trigger: Trigger::Interrupt(LineId(1)),
                priority: 100,
            },
            TransitionRule {
                name: "tumble-irq".into(),
                from: vec![Mode::Nominal, Mode::Imaging],
                predicate: "omega_mag > 0.2".parse().unwrap(),
                to: Mode::EmergencyDetumble,
                trigger: Trigger::Interrupt(LineId(2)),
                priority: 90,
            },
        ]
    }

    #[test]
    fn normal_and_emergency_sets_are_disjoint() {
        for m in Mode::NORMAL {
            assert!(!Mode::EMERGENCY.contains(&m));
            assert!(!m.is_emergency());
        }
        for m in Mode::EMERGENCY {
            assert!(m.is_emergency());
        }
        assert_eq!(Mode::NORMAL.len() + Mode::EMERGENCY.len(), Mode::ALL.len());
    }

    #[test]
    fn omega_mag_is_euclidean_norm() {
        let m = HealthMetrics::new(1.7, [0.1, -0.2, 0.2]);
        assert!((m.omega_mag - 0.3).abs() < 1e-9);
        assert_eq!(m.battery_soc, 1.0);
    }

    #[test]
    fn low_battery_in_nominal_goes_safe() {
        let m = HealthMetrics::new(0.25, [0.0, 0.0, 0.01]);
        assert_eq!(
            evaluate_polled_transitions(Mode::Nominal, &m, &default_like_table()),
            Some(Mode::SafeLowPower)
        );
    }

    #[test]
    fn slow_spin_exits_detumble() {
        let m = HealthMetrics::new(0.9, [0.0, 0.0, 0.01]);
        assert_eq!(
            evaluate_polled_transitions(Mode::Detumble, &m, &default_like_table()),
            Some(Mode::SunPointing)
        );
    }

    #[test]
    fn priority_beats_table_order() {
        // Both rules match from Detumble; low-power has the higher priority.
        let m = HealthMetrics::new(0.1, [0.0, 0.0, 0.001]);
        assert_eq!(
            evaluate_polled_transitions(Mode::Detumble, &m, &default_like_table()),
            Some(Mode::SafeLowPower)
        );
    }

    #[test]
    fn no_match_is_none() {
        let m = HealthMetrics::new(0.9, [0.0, 0.0, 0.1]);
        assert_eq!(evaluate_polled_transitions(Mode::Detumble, &m, &default_like_table()), None);
    }

    #[test]
    fn interrupt_bindings() {
        let t = default_like_table();
        assert_eq!(
            handle_emergency_interrupt(Mode::Nominal, LineId(1), &t),
            Ok(Mode::SafeLowPower)
        );
        assert_eq!(
            handle_emergency_interrupt(Mode::SafeLowPower, LineId(1), &t),
            Ok(Mode::SafeLowPower)
        );
        assert_eq!(
            handle_emergency_interrupt(Mode::Imaging, LineId(2), &t),
            Ok(Mode::EmergencyDetumble)
        );
        assert_eq!(
            handle_emergency_interrupt(Mode::Nominal, LineId(7), &t),
            Err(InterruptError::Unbound(LineId(7)))
        );
    }

    #[test]
    fn predicate_parse_round_trip() {
        let p: Predicate = "omega_mag >= 0.25".parse().unwrap();
        assert_eq!(p, Predicate::new(Metric::OmegaMag, Comparison::Ge, 0.25));
        assert_eq!(p.to_string(), "omega_mag >= 0.25");
        assert!("speed < 1".parse::<Predicate>().is_err());
        assert!("omega_mag ~ 1".parse::<Predicate>().is_err());
        assert!("omega_mag <".parse::<Predicate>().is_err());
    }

    #[test]
    fn mode_table_rejects_two_control_tasks() {
        let mut t = ModeTable::new();
        let mut a = TaskSpec::new("a", crate::tasks::TaskBody::Noop, 100, 10);
        a.is_control = true;
        let b = TaskSpec { name: "b".into(), ..a.clone() };
        assert_eq!(
            t.insert(Mode::Nominal, vec![a, b]),
            Err(ModeTableError::MultipleControlTasks { mode: Mode::Nominal, count: 2 })
        );
        assert_eq!(t.mode_tasks(Mode::Nominal), Err(ModeTableError::UnknownMode(Mode::Nominal)));
    }

    // Brute-force oracle: sort matching rules by priority descending (stable on
    // table order) and take the first.
    fn scan_oracle(current: Mode, m: &HealthMetrics, table: &[TransitionRule]) -> Option<Mode> {
        let mut matching: Vec<(usize, &TransitionRule)> = table
            .iter()
            .enumerate()
            .filter(|(_, r)| r.trigger == Trigger::Polled && r.from.contains(&current))
            .filter(|(_, r)| r.predicate.holds(m))
            .collect();
        matching.sort_by(|a, b| b.1.priority.cmp(&a.1.priority).then(a.0.cmp(&b.0)));
        matching.first().map(|(_, r)| r.to)
    }

    #[test]
    fn random_tables_match_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let metrics = [Metric::BatterySoc, Metric::OmegaMag, Metric::BusFaults];
        let ops = [Comparison::Lt, Comparison::Le, Comparison::Gt, Comparison::Ge];
        for _ in 0..50 {
            let n = rng.random_range(1..12);
            let mut prios: Vec<i32> = (0..n as i32).collect();
            for i in (1..prios.len()).rev() {
                prios.swap(i, rng.random_range(0..=i));
            }
            let table: Vec<TransitionRule> = (0..n)
                .map(|i| {
                    let from: Vec<Mode> =
                        Mode::ALL.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
                    TransitionRule {
                        name: format!("r{i}"),
                        from,
                        predicate: Predicate::new(
                            metrics[rng.random_range(0..3)],
                            ops[rng.random_range(0..4)],
                            rng.random_range(0.0..1.0),
                        ),
                        to: Mode::ALL[rng.random_range(0..8)],
                        trigger: if rng.random_bool(0.8) {
                            Trigger::Polled
                        } else {
                            Trigger::Interrupt(LineId(i as u8))
                        },
                        priority: prios[i],
                    }
                })
                .collect();
            for _ in 0..40 {
                let mut m = HealthMetrics::new(
                    rng.random_range(0.0..1.0),
                    [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.0],
                );
                m.bus_fault_flags = rng.random();
                let current = Mode::ALL[rng.random_range(0..8)];
                let got = evaluate_polled_transitions(current, &m, &table);
                assert_eq!(got, scan_oracle(current, &m, &table));
                // purity
                assert_eq!(got, evaluate_polled_transitions(current, &m, &table));
            }
        }
    }
}
