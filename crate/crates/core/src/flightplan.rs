//! The flightplan: the top-level scheduler that owns the mode's task list,
//! spawns activations, reaps them, switches modes through the check node,
//! and hosts the software watchdog.
//!
//! Activations are not real processes. A spawn hands the caller an
//! [`InstanceHandle`]; the caller later reports completion with
//! [`Flightplan::on_completion`]. Nothing here knows about the event queue.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::{evaluate_polled_transitions, HealthMetrics, Mode, ModeTable, TransitionRule};
use crate::simkernel::SimTime;
use crate::tasks::TaskBody;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub period_ms: u64,
    pub body: TaskBody,
    pub is_control: bool,
    pub nominal_duration_ms: u64,
    pub watchdog_grace_ms: u64,
}

impl TaskSpec {
    pub fn new(name: &str, body: TaskBody, period_ms: u64, nominal_duration_ms: u64) -> Self {
        TaskSpec {
            name: name.to_string(),
            period_ms,
            body,
            is_control: false,
            nominal_duration_ms,
            watchdog_grace_ms: period_ms,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.period_ms == 0 {
            return Err(format!("task `{}`: period must be positive", self.name));
        }
        if self.nominal_duration_ms >= self.period_ms {
            return Err(format!(
                "task `{}`: duration {} ms must be shorter than period {} ms",
                self.name, self.nominal_duration_ms, self.period_ms
            ));
        }
        Ok(())
    }
}

/// Stand-in for a child PID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceHandle(pub u64);

impl fmt::Display for InstanceHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskExit {
    Ok,
    Failed,
    Killed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub handle: InstanceHandle,
    pub started_at: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub spec: TaskSpec,
    pub next_exec: SimTime,
    pub instance: Option<Instance>,
    pub run_count: u64,
    pub last_exit: Option<TaskExit>,
    pub last_checkin: SimTime,
    pub overruns: u64,
}

impl TaskRecord {
    fn new(spec: TaskSpec, now: SimTime) -> Self {
        TaskRecord {
            spec,
            next_exec: now,
            instance: None,
            run_count: 0,
            last_exit: None,
            last_checkin: now,
            overruns: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckNode {
    pub next_exec: SimTime,
    pub poll_period_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeEntry {
    Task(Box<TaskRecord>),
    Check(CheckNode),
}

impl NodeEntry {
    pub fn next_exec(&self) -> SimTime {
        match self {
            NodeEntry::Task(t) => t.next_exec,
            NodeEntry::Check(c) => c.next_exec,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleNode {
    pub seq: u64,
    pub entry: NodeEntry,
}

/// Task records plus one check node, kept in `(next_exec, seq)` order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScheduleList {
    nodes: Vec<ScheduleNode>,
    next_seq: u64,
}

impl ScheduleList {
    pub fn insert(&mut self, entry: NodeEntry) {
        let seq = self.next_seq;
        self.next_seq += 1;
        let key = (entry.next_exec(), seq);
        let at = self
            .nodes
            .partition_point(|n| (n.entry.next_exec(), n.seq) <= key);
        self.nodes.insert(at, ScheduleNode { seq, entry });
    }

    pub fn front_time(&self) -> Option<SimTime> {
        self.nodes.first().map(|n| n.entry.next_exec())
    }

    pub fn pop_front(&mut self) -> Option<NodeEntry> {
        if self.nodes.is_empty() {
            None
        } else {
            Some(self.nodes.remove(0).entry)
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[ScheduleNode] {
        &self.nodes
    }

    pub fn check_node_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.entry, NodeEntry::Check(_)))
            .count()
    }

    pub fn is_sorted(&self) -> bool {
        self.nodes
            .windows(2)
            .all(|w| (w[0].entry.next_exec(), w[0].seq) < (w[1].entry.next_exec(), w[1].seq))
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskRecord> {
        self.nodes.iter().filter_map(|n| match &n.entry {
            NodeEntry::Task(t) => Some(t.as_ref()),
            NodeEntry::Check(_) => None,
        })
    }

    fn tasks_mut(&mut self) -> impl Iterator<Item = &mut TaskRecord> {
        self.nodes.iter_mut().filter_map(|n| match &mut n.entry {
            NodeEntry::Task(t) => Some(t.as_mut()),
            NodeEntry::Check(_) => None,
        })
    }

    pub fn task(&self, name: &str) -> Option<&TaskRecord> {
        self.tasks().find(|t| t.spec.name == name)
    }

    fn task_mut(&mut self, name: &str) -> Option<&mut TaskRecord> {
        self.tasks_mut().find(|t| t.spec.name == name)
    }

    fn by_handle_mut(&mut self, handle: InstanceHandle) -> Option<&mut TaskRecord> {
        self.tasks_mut()
            .find(|t| t.instance.map(|i| i.handle) == Some(handle))
    }
}

/// One record per task at phase 0, plus the check node one poll period out.
pub fn build_schedule(specs: &[TaskSpec], now: SimTime, poll_period_ms: u64) -> ScheduleList {
    let mut list = ScheduleList::default();
    for spec in specs {
        list.insert(NodeEntry::Task(Box::new(TaskRecord::new(spec.clone(), now))));
    }
    list.insert(NodeEntry::Check(CheckNode {
        next_exec: now + poll_period_ms,
        poll_period_ms,
    }));
    list
}

#[derive(Debug, Clone, PartialEq)]
pub struct WatchEntry {
    pub required_checkin_period_ms: u64,
    pub grace_ms: u64,
    pub last_checkin: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WatchdogLedger {
    pub entries: BTreeMap<String, WatchEntry>,
    pub hw_kick_period_ms: u64,
    pub last_hw_kick: Option<SimTime>,
    pub scans: u64,
}

impl WatchdogLedger {
    fn for_tasks(specs: &[TaskSpec], now: SimTime, hw_kick_period_ms: u64) -> Self {
        let entries = specs
            .iter()
            .map(|s| {
                (
                    s.name.clone(),
                    WatchEntry {
                        required_checkin_period_ms: s.period_ms,
                        grace_ms: s.watchdog_grace_ms,
                        last_checkin: now,
                    },
                )
            })
            .collect();
        WatchdogLedger {
            entries,
            hw_kick_period_ms,
            last_hw_kick: None,
            scans: 0,
        }
    }
}

/// Permission to kick the EPS hardware watchdog once. Only a healthy
/// software-watchdog scan can mint one.
#[derive(Debug)]
pub struct KickGrant {
    scan: u64,
}

impl KickGrant {
    pub fn scan(&self) -> u64 {
        self.scan
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Terminated {
    pub task: String,
    pub handle: InstanceHandle,
    pub started_at: SimTime,
}

#[derive(Debug, Default)]
pub struct ScanOutcome {
    pub terminated: Vec<Terminated>,
    pub kick: Option<KickGrant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchCause {
    Polled,
    Interrupt,
    Command,
    PowerCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingSwitch {
    pub from: Mode,
    pub target: Mode,
    pub cause: SwitchCause,
    pub requested_at: SimTime,
    pub drain_deadline: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompletedSwitch {
    pub from: Mode,
    pub to: Mode,
    pub cause: SwitchCause,
    pub requested_at: SimTime,
    pub completed_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchOutcome {
    Completed(CompletedSwitch),
    Draining(PendingSwitch),
    AlreadyInMode,
    AlreadyPending,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dispatch {
    /// Nothing due, or dispatch is frozen by a pending switch.
    Idle,
    Spawned {
        handle: InstanceHandle,
        spec: TaskSpec,
    },
    Deferred {
        task: String,
        overruns: u64,
    },
    /// The check node was due and has been reinserted; the caller should
    /// follow up with [`Flightplan::evaluate_check_node`].
    Check,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub task: String,
    pub run_count: u64,
    pub exit: TaskExit,
    pub started_at: SimTime,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlightplanError {
    #[error("no running activation has handle {0}")]
    UnknownHandle(InstanceHandle),
    #[error(transparent)]
    ModeTable(#[from] crate::fsm::ModeTableError),
}

#[derive(Debug, Clone)]
pub struct FlightplanConfig {
    pub poll_period_ms: u64,
    pub watchdog_period_ms: u64,
    /// `None` means twice the longest nominal duration of the outgoing mode.
    pub drain_timeout_ms: Option<u64>,
}

impl Default for FlightplanConfig {
    fn default() -> Self {
        FlightplanConfig {
            poll_period_ms: 500,
            watchdog_period_ms: 1000,
            drain_timeout_ms: None,
        }
    }
}

pub struct Flightplan {
    modes: ModeTable,
    mode: Mode,
    schedule: ScheduleList,
    ledger: WatchdogLedger,
    pending: Option<PendingSwitch>,
    config: FlightplanConfig,
    next_handle: u64,
    total_overruns: u64,
}

impl Flightplan {
    pub fn new(
        modes: ModeTable,
        initial: Mode,
        now: SimTime,
        config: FlightplanConfig,
    ) -> Result<Self, FlightplanError> {
        let specs = modes.mode_tasks(initial)?.to_vec();
        let schedule = build_schedule(&specs, now, config.poll_period_ms);
        let ledger = WatchdogLedger::for_tasks(&specs, now, config.watchdog_period_ms);
        Ok(Flightplan {
            modes,
            mode: initial,
            schedule,
            ledger,
            pending: None,
            config,
            next_handle: 1,
            total_overruns: 0,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn modes(&self) -> &ModeTable {
        &self.modes
    }

    pub fn config(&self) -> &FlightplanConfig {
        &self.config
    }

    pub fn schedule(&self) -> &ScheduleList {
        &self.schedule
    }

    pub fn ledger(&self) -> &WatchdogLedger {
        &self.ledger
    }

    pub fn pending_switch(&self) -> Option<&PendingSwitch> {
        self.pending.as_ref()
    }

    pub fn total_overruns(&self) -> u64 {
        self.total_overruns
    }

    pub fn running_count(&self) -> usize {
        self.schedule.tasks().filter(|t| t.instance.is_some()).count()
    }

    pub fn running(&self) -> Vec<(String, Instance)> {
        self.schedule
            .tasks()
            .filter_map(|t| t.instance.map(|i| (t.spec.name.clone(), i)))
            .collect()
    }

    /// Time at which the front node wants to run, or `None` while a mode
    /// switch is draining.
    pub fn next_due(&self) -> Option<SimTime> {
        if self.pending.is_some() {
            return None;
        }
        self.schedule.front_time()
    }

    pub fn dispatch_front(&mut self, now: SimTime) -> Dispatch {
        if self.pending.is_some() {
            return Dispatch::Idle;
        }
        match self.schedule.front_time() {
            Some(t) if t <= now => {}
            _ => return Dispatch::Idle,
        }
        let entry = self.schedule.pop_front().expect("front exists");
        match entry {
            NodeEntry::Check(mut check) => {
                check.next_exec = now + check.poll_period_ms;
                self.schedule.insert(NodeEntry::Check(check));
                Dispatch::Check
            }
            NodeEntry::Task(mut rec) => {
                rec.next_exec += rec.spec.period_ms;
                let outcome = if rec.instance.is_some() {
                    rec.overruns += 1;
                    self.total_overruns += 1;
                    Dispatch::Deferred {
                        task: rec.spec.name.clone(),
                        overruns: rec.overruns,
                    }
                } else {
                    let handle = InstanceHandle(self.next_handle);
                    self.next_handle += 1;
                    rec.instance = Some(Instance {
                        handle,
                        started_at: now,
                    });
                    Dispatch::Spawned {
                        handle,
                        spec: rec.spec.clone(),
                    }
                };
                self.schedule.insert(NodeEntry::Task(rec));
                outcome
            }
        }
    }

    /// Completion notification. Only the record is touched.
    pub fn on_completion(
        &mut self,
        handle: InstanceHandle,
        exit: TaskExit,
    ) -> Result<Completion, FlightplanError> {
        let rec = self
            .schedule
            .by_handle_mut(handle)
            .ok_or(FlightplanError::UnknownHandle(handle))?;
        let inst = rec.instance.take().expect("matched by handle");
        rec.run_count += 1;
        rec.last_exit = Some(exit);
        Ok(Completion {
            task: rec.spec.name.clone(),
            run_count: rec.run_count,
            exit,
            started_at: inst.started_at,
        })
    }

    /// Records a check-in from a task body. Returns `false` for tasks that are
    /// not part of the current schedule (late notifications across a switch).
    pub fn record_checkin(&mut self, task: &str, now: SimTime) -> bool {
        let Some(entry) = self.ledger.entries.get_mut(task) else {
            return false;
        };
        entry.last_checkin = now;
        if let Some(rec) = self.schedule.task_mut(task) {
            rec.last_checkin = now;
        }
        true
    }

    pub fn evaluate_check_node(
        &mut self,
        now: SimTime,
        metrics: &HealthMetrics,
        rules: &[TransitionRule],
    ) -> Option<SwitchOutcome> {
        if self.pending.is_some() {
            return None;
        }
        let target = evaluate_polled_transitions(self.mode, metrics, rules)?;
        if target == self.mode {
            return None;
        }
        Some(self.request_mode_switch(target, now, SwitchCause::Polled))
    }

    fn drain_timeout(&self) -> u64 {
        self.config.drain_timeout_ms.unwrap_or_else(|| {
            let longest = self
                .schedule
                .tasks()
                .map(|t| t.spec.nominal_duration_ms)
                .max()
                .unwrap_or(0);
            (2 * longest).max(1)
        })
    }

    /// Starts a switch. With nothing running it completes immediately;
    /// otherwise dispatch freezes until the running activations finish.
    pub fn request_mode_switch(
        &mut self,
        target: Mode,
        now: SimTime,
        cause: SwitchCause,
    ) -> SwitchOutcome {
        if self.pending.is_some() {
            return SwitchOutcome::AlreadyPending;
        }
        if target == self.mode {
            return SwitchOutcome::AlreadyInMode;
        }
        if !self.modes.contains(target) {
            // Validated at load; unreachable with a validated table.
            return SwitchOutcome::AlreadyInMode;
        }
        let pending = PendingSwitch {
            from: self.mode,
            target,
            cause,
            requested_at: now,
            drain_deadline: now + self.drain_timeout(),
        };
        self.pending = Some(pending);
        match self.try_complete_switch(now) {
            Some(done) => SwitchOutcome::Completed(done),
            None => SwitchOutcome::Draining(pending),
        }
    }

    /// Completes a pending switch once no activation is running.
    pub fn try_complete_switch(&mut self, now: SimTime) -> Option<CompletedSwitch> {
        let pending = self.pending?;
        if self.running_count() > 0 {
            return None;
        }
        self.pending = None;
        self.load_mode(pending.target, now);
        Some(CompletedSwitch {
            from: pending.from,
            to: pending.target,
            cause: pending.cause,
            requested_at: pending.requested_at,
            completed_at: now,
        })
    }

    /// Drain timeout: terminate whatever is still running and finish the switch.
    pub fn expire_drain(&mut self, now: SimTime) -> Option<(Vec<Terminated>, CompletedSwitch)> {
        let pending = self.pending?;
        if now < pending.drain_deadline {
            return None;
        }
        let killed = self.terminate_all();
        let done = self.try_complete_switch(now).expect("nothing running");
        Some((killed, done))
    }

    /// Immediate switch used for emergency interrupts: running activations
    /// are terminated instead of drained.
    pub fn force_switch(
        &mut self,
        target: Mode,
        now: SimTime,
        cause: SwitchCause,
    ) -> (Vec<Terminated>, Option<CompletedSwitch>) {
        if target == self.mode && self.pending.is_none() {
            return (Vec::new(), None);
        }
        let from = self.mode;
        let requested_at = now;
        self.pending = None;
        let killed = self.terminate_all();
        self.load_mode(target, now);
        (
            killed,
            Some(CompletedSwitch {
                from,
                to: target,
                cause,
                requested_at,
                completed_at: now,
            }),
        )
    }

    /// Power cycle: every activation is gone and the schedule restarts in `boot_mode`.
    pub fn reboot(&mut self, boot_mode: Mode, now: SimTime) -> Vec<Terminated> {
        self.pending = None;
        let lost = self.terminate_all();
        self.load_mode(boot_mode, now);
        lost
    }

    fn terminate_all(&mut self) -> Vec<Terminated> {
        let mut out = Vec::new();
        for rec in self.schedule.tasks_mut() {
            if let Some(inst) = rec.instance.take() {
                rec.last_exit = Some(TaskExit::Killed);
                out.push(Terminated {
                    task: rec.spec.name.clone(),
                    handle: inst.handle,
                    started_at: inst.started_at,
                });
            }
        }
        out
    }

    fn load_mode(&mut self, mode: Mode, now: SimTime) {
        let specs = self
            .modes
            .mode_tasks(mode)
            .expect("switch targets are validated against the mode table")
            .to_vec();
        self.schedule = build_schedule(&specs, now, self.config.poll_period_ms);
        let last_kick = self.ledger.last_hw_kick;
        let scans = self.ledger.scans;
        self.ledger = WatchdogLedger::for_tasks(&specs, now, self.config.watchdog_period_ms);
        self.ledger.last_hw_kick = last_kick;
        self.ledger.scans = scans;
        self.mode = mode;
    }

    /// One pass of the software watchdog. A task silent for longer than its
    /// period plus grace has its running activation terminated; the hardware
    /// kick is only granted when every watched task is healthy.
    pub fn software_watchdog_scan(&mut self, now: SimTime) -> ScanOutcome {
        self.ledger.scans += 1;
        let mut out = ScanOutcome::default();
        let mut healthy = true;
        let names: Vec<String> = self.ledger.entries.keys().cloned().collect();
        for name in names {
            let entry = &self.ledger.entries[&name];
            let silent = now.saturating_sub(entry.last_checkin);
            if silent <= entry.required_checkin_period_ms + entry.grace_ms {
                continue;
            }
            healthy = false;
            if let Some(rec) = self.schedule.task_mut(&name) {
                if let Some(inst) = rec.instance.take() {
                    rec.last_exit = Some(TaskExit::Killed);
                    out.terminated.push(Terminated {
                        task: name.clone(),
                        handle: inst.handle,
                        started_at: inst.started_at,
                    });
                }
                rec.last_checkin = now;
            }
            self.ledger
                .entries
                .get_mut(&name)
                .expect("iterating own keys")
                .last_checkin = now;
        }
        if healthy {
            self.ledger.last_hw_kick = Some(now);
            out.kick = Some(KickGrant {
                scan: self.ledger.scans,
            });
        }
        out
    }
}
