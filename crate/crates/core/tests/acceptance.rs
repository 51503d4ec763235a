//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use obcsim::compression::{decode, encode, CodecParams, HyperspectralCube};
use obcsim::faulttol::{ecc_decode, ecc_encode, CodeWord, EccStatus, FaultTarget, CODEWORD_BITS};
use obcsim::scenario::{Scenario, DEFAULT_SCENARIO};
use obcsim::sim::{Simulation, Summary};
use obcsim::tasks::TaskBody;
use obcsim::telemetry::{Record, Telemetry};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn run(sc: Scenario) -> (Simulation, Summary) {
    let mut sim = Simulation::new(sc).expect("scenario builds");
    let summary = sim.run();
    (sim, summary)
}

fn parse(src: &str) -> Scenario {
    Scenario::parse(src).unwrap_or_else(|e| panic!("{e}"))
}

fn default_with(extra: &str) -> Scenario {
    parse(&format!("{DEFAULT_SCENARIO}\n{extra}"))
}

fn kind<'a>(t: &'a Telemetry, k: &'a str) -> Vec<&'a Record> {
    t.of_kind(k).collect()
}

// 1. Scheduler

struct OracleTask {
    name: String,
    period: u64,
    duration: u64,
}

/// Millisecond-by-millisecond replay of periodic release with
/// skip-on-overrun, all phases at zero.
fn brute_force_timeline(tasks: &[OracleTask], horizon: u64) -> Vec<(u64, String)> {
    let mut busy_until = vec![0u64; tasks.len()];
    let mut out = Vec::new();
    for t in 0..horizon {
        for (i, task) in tasks.iter().enumerate() {
            if t % task.period == 0 && busy_until[i] <= t {
                busy_until[i] = t + task.duration;
                out.push((t, task.name.clone()));
            }
        }
    }
    out.sort();
    out
}

fn random_task_scenario(rng: &mut ChaCha8Rng, seed: u64) -> (String, Vec<OracleTask>) {
    let n = rng.random_range(3..=8);
    let mut src = format!(
        "name = \"sched-{seed}\"\n[run]\nduration_s = 60\nseed = {seed}\ninitial_mode = \"Nominal\"\n[seu]\nrate_per_mbit_s = 0.0\n"
    );
    let mut tasks = Vec::new();
    for i in 0..n {
        let period = rng.random_range(100..=5000u64);
        let duration = rng.random_range(1..period);
        let name = format!("t{i}");
        let _ = write!(
            src,
            "[[task]]\nname = \"{name}\"\nbody = \"noop\"\nperiod_ms = {period}\nduration_ms = {duration}\nmodes = [\"Nominal\", \"Recovery\"]\n"
        );
        tasks.push(OracleTask { name, period, duration });
    }
    (src, tasks)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut activations = 0;
    let mut overruns = 0;
    let mut slowest = Duration::ZERO;
    for seed in 0..20u64 {
        let (src, tasks) = random_task_scenario(&mut rng, seed);
        let start = Instant::now();
        let (sim, summary) = run(parse(&src));
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        ensure!(elapsed < Duration::from_secs(10), "scenario {seed} took {elapsed:?}");

        let mut got: Vec<(u64, String)> = kind(sim.telemetry(), "spawn")
            .iter()
            .map(|r| (r.t.ticks(), r.str("task").unwrap().to_string()))
            .collect();
        got.sort();
        let want = brute_force_timeline(&tasks, 60_000);
        if got != want {
            let first = got.iter().zip(&want).position(|(a, b)| a != b).unwrap_or(got.len().min(want.len()));
            return Err(format!(
                "scenario {seed}: timeline differs at entry {first} (got {:?}, oracle {:?})",
                got.get(first),
                want.get(first)
            ));
        }
        ensure!(summary.tasks_killed == 0, "scenario {seed}: unexpected watchdog kills");

        let mut intervals: BTreeMap<String, Vec<(u64, u64)>> = BTreeMap::new();
        let mut open: BTreeMap<u64, (String, u64)> = BTreeMap::new();
        for r in sim.telemetry().records() {
            match r.kind.as_str() {
                "spawn" => {
                    open.insert(r.u64("handle").unwrap(), (r.str("task").unwrap().into(), r.t.ticks()));
                }
                "complete" | "task_killed" => {
                    let (task, s) = open.remove(&r.u64("handle").unwrap()).expect("spawned before it ended");
                    intervals.entry(task).or_default().push((s, r.t.ticks()));
                }
                _ => {}
            }
        }
        for (task, started) in open.into_values() {
            intervals.entry(task).or_default().push((started, u64::MAX));
        }
        for (task, iv) in &intervals {
            for w in iv.windows(2) {
                ensure!(w[0].1 <= w[1].0, "scenario {seed}: {task} has overlapping instances {w:?}");
            }
        }
        activations += want.len();
        overruns += summary.overruns;
    }
    Ok(format!(
        "20 scenarios, {activations} activations and {overruns} overruns match the oracle; slowest run {:.2} s",
        slowest.as_secs_f64()
    ))
}

// 2. Check node vs interrupt latency

fn latency_scenario(seed: u64, at_ms: u64, interrupts: bool) -> Scenario {
    parse(&format!(
        r#"name = "latency"
[run]
duration_s = 12
seed = {seed}
initial_mode = "Nominal"
interrupts_enabled = {interrupts}
poll_period_ms = 500
[seu]
rate_per_mbit_s = 0.0
[[task]]
name = "idle"
body = "noop"
period_ms = 100
duration_ms = 1
modes = ["Nominal", "SafeLowPower", "Recovery"]
[[rule]]
name = "low-power"
when = "battery_soc < 0.3"
to = "SafeLowPower"
priority = 100
interrupt_line = 1
[[fault]]
kind = "set-soc"
at_ms = {at_ms}
soc = 0.25
"#
    ))
}

fn first_switch_to(t: &Telemetry, mode: &str) -> Option<u64> {
    t.of_kind("mode_switch").find(|r| r.str("to") == Some(mode)).map(|r| r.t.ticks())
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut report = Vec::new();
    for seed in 1..=5u64 {
        let at = rng.random_range(2_000..9_000u64);
        let poll = 500;
        let next_check = at.div_ceil(poll) * poll;
        let (on, _) = run(latency_scenario(seed, at, true));
        let (off, _) = run(latency_scenario(seed, at, false));
        let t_on = first_switch_to(on.telemetry(), "SafeLowPower");
        let t_off = first_switch_to(off.telemetry(), "SafeLowPower");
        ensure!(t_on == Some(at), "seed {seed}: interrupt run switched at {t_on:?}, expected {at}");
        ensure!(t_off == Some(next_check), "seed {seed}: polled run switched at {t_off:?}, expected {next_check}");
        ensure!(next_check - at <= poll, "oracle bound");
        let cause = on.telemetry().of_kind("mode_switch").find(|r| r.str("to") == Some("SafeLowPower")).unwrap();
        ensure!(cause.str("cause") == Some("interrupt"), "seed {seed}: interrupt run switched by {:?}", cause.str("cause"));
        report.push(format!("T={at}->{next_check}"));
    }
    Ok(format!("interrupt switch at T, polled at next check node: {}", report.join(" ")))
}

// 3. Watchdog hierarchy

fn kicks_originate_from_scans(t: &Telemetry, summary: &Summary) -> Result<usize, String> {
    let scans: BTreeMap<u64, &Record> = t.of_kind("watchdog_scan").map(|r| (r.u64("scan").unwrap(), r)).collect();
    let kicks = kind(t, "hw_kick");
    for k in &kicks {
        ensure!(k.str("origin") == Some("software_watchdog"), "kick at {} has origin {:?}", k.t, k.str("origin"));
        let scan = scans.get(&k.u64("scan").unwrap()).ok_or(format!("kick at {} names no scan", k.t))?;
        ensure!(scan.t == k.t, "kick at {} but its scan ran at {}", k.t, scan.t);
        ensure!(scan.get("healthy") == Some(&serde_json::Value::Bool(true)), "kick at {} follows an unhealthy scan", k.t);
    }
    ensure!(kicks.len() as u64 == summary.hw_kicks, "EPS saw {} kicks, trace has {}", summary.hw_kicks, kicks.len());
    Ok(kicks.len())
}

fn criterion_3() -> Outcome {
    let wd = 1000u64;
    let hang_at = 20_000u64;
    let sc = default_with(&format!("[[fault]]\nkind = \"hang\"\nat_ms = {hang_at}\ntask = \"housekeeping\"\n"));
    let spec = sc.tasks.iter().find(|(s, _)| s.name == "housekeeping").unwrap().0.clone();
    let (period, grace) = (spec.period_ms, spec.watchdog_grace_ms);
    let (sim, summary) = run(sc);
    let t = sim.telemetry();
    let hung = t.of_kind("task_hung").next().ok_or("no hang recorded")?;
    let hung_at = hung.t.ticks();
    let last_checkin = t
        .of_kind("spawn")
        .filter(|r| r.str("task") == Some("housekeeping") && r.t.ticks() < hung_at)
        .map(|r| r.t.ticks())
        .max()
        .unwrap();
    let expect_kill = ((last_checkin + period + grace) / wd + 1) * wd;
    let kill = t
        .of_kind("task_killed")
        .find(|r| r.str("task") == Some("housekeeping"))
        .ok_or("hung task never killed")?;
    ensure!(kill.t.ticks() == expect_kill, "killed at {}, expected {expect_kill}", kill.t);
    ensure!(kill.t.ticks() - hung_at <= period + grace, "kill {} ms after hang", kill.t.ticks() - hung_at);
    ensure!(kill.str("reason") == Some("watchdog"), "kill reason {:?}", kill.str("reason"));
    ensure!(summary.power_cycles == 0, "hang caused {} power cycles", summary.power_cycles);
    let resumed = t
        .of_kind("spawn")
        .find(|r| r.str("task") == Some("housekeeping") && r.t.ticks() >= kill.t.ticks())
        .ok_or("task never resumed")?;
    ensure!(resumed.t.ticks() <= kill.t.ticks() + period, "resumed at {}", resumed.t);
    let h = resumed.u64("handle").unwrap();
    ensure!(
        t.of_kind("complete").any(|r| r.u64("handle") == Some(h) && r.str("exit") == Some("ok")),
        "resumed instance did not complete"
    );
    let kicks_a = kicks_originate_from_scans(t, &summary)?;

    let stall_at = 30_000u64;
    let sc = default_with(&format!("[[fault]]\nkind = \"stall\"\nat_ms = {stall_at}\n"));
    let timeout = sc.hardware.hw_watchdog_timeout_ms;
    let (sim, summary) = run(sc);
    let t = sim.telemetry();
    let last_kick = t
        .of_kind("hw_kick")
        .filter(|r| r.t.ticks() <= stall_at)
        .map(|r| r.t.ticks())
        .max()
        .ok_or("no kick before stall")?;
    let pc = t.of_kind("power_cycle").next().ok_or("stall caused no power cycle")?;
    ensure!(pc.t.ticks() == last_kick + timeout, "power cycle at {}, last kick {last_kick}, timeout {timeout}", pc.t);
    ensure!(pc.u64("last_kick") == Some(last_kick), "power cycle names last kick {:?}", pc.u64("last_kick"));
    ensure!(
        !t.of_kind("hw_kick").any(|r| r.t.ticks() > last_kick && r.t < pc.t),
        "kick during stall"
    );
    let to_recovery = t
        .of_kind("mode_switch")
        .find(|r| r.t == pc.t && r.str("to") == Some("Recovery") && r.str("cause") == Some("power_cycle"));
    ensure!(to_recovery.is_some(), "power cycle did not land in Recovery");
    ensure!(t.of_kind("boot").any(|r| r.t == pc.t), "no boot selection logged at power cycle");
    let kicks_b = kicks_originate_from_scans(t, &summary)?;

    let (sim, summary) = run(Scenario::default_scenario());
    let kicks_c = kicks_originate_from_scans(sim.telemetry(), &summary)?;
    Ok(format!(
        "(a) hang at {hung_at} killed at {expect_kill}, resumed, 0 power cycles; (b) power cycle at {} = last kick {last_kick} + {timeout}, Recovery; (c) {} kicks all from healthy scans",
        pc.t.ticks(),
        kicks_a + kicks_b + kicks_c
    ))
}

// 4. ECC

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut singles = 0;
    for _ in 0..1000 {
        let data: u64 = rng.random();
        let cw = ecc_encode(data);
        for bit in 0..CODEWORD_BITS {
            let mut bad = cw;
            bad.flip(bit);
            let (got, status) = ecc_decode(bad);
            ensure!(got == data, "single flip {bit} of {data:#x} decoded to {got:#x}");
            ensure!(matches!(status, EccStatus::Corrected(_)), "single flip {bit} reported {status:?}");
            singles += 1;
        }
    }
    let mut doubles = 0;
    for _ in 0..100 {
        let data: u64 = rng.random();
        let cw: CodeWord = ecc_encode(data);
        for a in 0..CODEWORD_BITS {
            for b in a + 1..CODEWORD_BITS {
                let mut bad = cw;
                bad.flip(a);
                bad.flip(b);
                let (_, status) = ecc_decode(bad);
                ensure!(status == EccStatus::Uncorrectable, "double flip ({a},{b}) silently reported {status:?}");
                doubles += 1;
            }
        }
    }
    ensure!(doubles == 100 * 2556, "enumerated {doubles} double flips");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "{singles} single flips corrected, {doubles} double flips uncorrectable, 0 silent, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

// 5. Scrubbing

fn scrub_scenario(scrub: bool) -> Scenario {
    let mut sc = Scenario::default_scenario();
    sc.initial_mode = obcsim::fsm::Mode::Nominal;
    sc.faults.clear();
    sc.seu.rate_per_mbit_s = 2.0;
    sc.set_duration_s(3600.0).unwrap();
    if !scrub {
        sc.without_body(TaskBody::MemoryScrub);
        sc.without_body(TaskBody::ConfigScrub);
    }
    sc
}

fn criterion_5() -> Outcome {
    let (on, s_on) = run(scrub_scenario(true));
    let (off, s_off) = run(scrub_scenario(false));
    let (u_on, u_off) = (s_on.uncorrectable_words(), s_off.uncorrectable_words());
    ensure!(u_on <= u_off, "uncorrectable words with scrubbing {u_on} > without {u_off}");

    let passes = kind(on.telemetry(), "config_scrub");
    ensure!(!passes.is_empty(), "no config scrub passes ran");
    for p in &passes {
        ensure!(p.u64("divergence_after") == Some(0), "config divergence {:?} after pass at {}", p.u64("divergence_after"), p.t);
    }

    let sc = on.scenario();
    let ticks = (sc.duration_ms - 1) / sc.seu.tick_ms;
    let bits: u64 = on.hardware().upsettable_bits().iter().filter(|(t, _)| sc.seu.targets.contains(t)).map(|(_, b)| b).sum();
    let mean = sc.seu.rate_per_mbit_s * bits as f64 / 1e6 * ticks as f64 * sc.seu.tick_ms as f64 / 1000.0;
    let sigma = mean.sqrt();
    for (label, s, r) in [("on", &s_on, &on), ("off", &s_off, &off)] {
        let n = s.seu_injected as f64;
        ensure!((n - mean).abs() <= 3.0 * sigma, "scrub {label}: {n} flips vs Poisson mean {mean:.1} ± 3·{sigma:.1}");
        ensure!(r.telemetry().of_kind("seu").count() as u64 == s.seu_injected, "seu records disagree with count");
    }
    ensure!(s_on.seu_injected == s_off.seu_injected, "paired runs injected different flip counts");
    Ok(format!(
        "uncorrectable words {u_on} (scrub) <= {u_off} (no scrub); {} config passes at divergence 0; {} flips vs mean {mean:.1} ± {:.1}",
        passes.len(),
        s_on.seu_injected,
        3.0 * sigma
    ))
}

// 6. Compression

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut corpus = Vec::new();
    for &(w, h, b) in &[(8, 8, 4), (32, 32, 16), (64, 64, 32)] {
        corpus.push((format!("constant {w}x{h}x{b}"), HyperspectralCube::constant(w, h, b, 12, 1234)));
        corpus.push((format!("gradient {w}x{h}x{b}"), HyperspectralCube::gradient(w, h, b, 12)));
        corpus.push((format!("band-correlated {w}x{h}x{b}"), HyperspectralCube::band_correlated(w, h, b, 12, 7)));
        corpus.push((format!("uniform-random {w}x{h}x{b}"), HyperspectralCube::uniform_random(w, h, b, 12, 7)));
    }
    for (name, cube) in &corpus {
        let stream = encode(cube, CodecParams::default());
        let back = decode(&stream).map_err(|e| format!("{name}: {e}"))?;
        ensure!(back.samples() == cube.samples(), "{name}: round trip differs");
        let again = encode(cube, CodecParams::default());
        ensure!(again.to_bytes() == stream.to_bytes(), "{name}: encoder output not deterministic");
    }
    let gradient = HyperspectralCube::gradient(32, 32, 16, 12);
    let g_ratio = encode(&gradient, CodecParams::default()).ratio();
    ensure!(g_ratio > 1.5, "gradient ratio {g_ratio:.3}");
    let banded = HyperspectralCube::band_correlated(32, 32, 16, 12, 7);
    let r3 = encode(&banded, CodecParams::with_p(3)).ratio();
    let r0 = encode(&banded, CodecParams::with_p(0)).ratio();
    ensure!(r3 > r0, "band-correlated ratio P=3 {r3:.3} <= P=0 {r0:.3}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "{} cubes lossless and deterministic; gradient {g_ratio:.3}:1; band-correlated P=3 {r3:.3} > P=0 {r0:.3}; {:.2} s",
        corpus.len(),
        elapsed.as_secs_f64()
    ))
}

// 7. Detumble

fn criterion_7() -> Outcome {
    let (sim, summary) = run(Scenario::default_scenario());
    let t = sim.telemetry();
    let env = kind(t, "env");
    ensure!(!env.is_empty(), "no environment records");
    let w0 = env[0].f64("omega_mag").unwrap();
    let mut max_work = f64::NEG_INFINITY;
    for r in &env {
        let work = r.f64("work").unwrap();
        max_work = max_work.max(work);
        ensure!(work <= 1e-9, "positive magnetic work {work:e} at {}", r.t);
        let omega: Vec<f64> = r.get("omega").unwrap().as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let norm = omega.iter().map(|x| x * x).sum::<f64>().sqrt();
        ensure!((norm - r.f64("omega_mag").unwrap()).abs() <= 1e-9, "omega_mag is not the norm at {}", r.t);
    }
    let reached = env
        .iter()
        .find(|r| r.f64("omega_mag").unwrap() < 0.15)
        .map(|r| r.t.ticks())
        .ok_or("never reached 0.15 rad/s")?;
    ensure!(reached <= 600_000, "reached 0.15 rad/s at {reached} ms");
    let detumbled = summary
        .mode_timeline
        .iter()
        .find(|c| c.from.to_string() == "Detumble" && c.to.to_string() == "SunPointing")
        .ok_or("no Detumble -> SunPointing transition")?;
    ensure!(detumbled.t.ticks() > reached, "transition precedes detumbling");
    Ok(format!(
        "|w| {w0:.3} -> <0.15 at {:.1} s, Detumble->SunPointing at {:.1} s, max step work {max_work:.2e}",
        reached as f64 / 1000.0,
        detumbled.t.as_secs_f64()
    ))
}

// 8. Boot fallback

fn boot_at_power_cycle(sc: Scenario) -> Result<(String, String), String> {
    let (sim, _) = run(sc);
    let t = sim.telemetry();
    let pc = t.of_kind("power_cycle").next().ok_or("no power cycle")?;
    let boot = t
        .of_kind("boot")
        .find(|r| r.t == pc.t && r.str("reason") == Some("power_cycle"))
        .ok_or("no boot record at power cycle")?;
    let image = boot.get("selection").and_then(|s| s["image"].as_str()).ok_or("selection lacks image")?;
    let mode = t
        .of_kind("mode_switch")
        .find(|r| r.t == pc.t)
        .and_then(|r| r.str("to").map(str::to_string))
        .unwrap_or_default();
    Ok((image.to_string(), mode))
}

fn criterion_8() -> Outcome {
    let (image, mode) = boot_at_power_cycle(default_with(
        "[[fault]]\nkind = \"corrupt-boot-checksum\"\nat_ms = 10000\n[[fault]]\nkind = \"stall\"\nat_ms = 20000\n",
    ))?;
    ensure!(image == "fallback", "corrupted primary booted {image}");
    ensure!(mode == "Recovery", "landed in {mode}");
    let mut clean = 0;
    for seed in 1..=5 {
        let mut sc = default_with("[[fault]]\nkind = \"stall\"\nat_ms = 20000\n");
        sc.set_seed(seed);
        sc.seu.targets.retain(|t| *t != FaultTarget::BootPrimary);
        let (image, _) = boot_at_power_cycle(sc)?;
        ensure!(image == "primary", "seed {seed}: uncorrupted run booted {image}");
        clean += 1;
    }
    for seed in 1..=5 {
        let mut sc = Scenario::default_scenario();
        sc.set_seed(seed);
        let (sim, _) = run(sc);
        for b in sim.telemetry().of_kind("boot") {
            ensure!(b.get("selection").unwrap()["image"] == "primary", "seed {seed}: initial boot chose fallback");
        }
    }
    Ok(format!("corrupted checksum boots fallback into Recovery; {clean} uncorrupted power cycles and 5 clean runs boot primary"))
}

// 9. Determinism

fn criterion_9() -> Outcome {
    let faulted = || {
        default_with(
            "[[fault]]\nkind = \"hang\"\nat_ms = 15000\ntask = \"sensor-poll\"\n[[fault]]\nkind = \"spi-timeout\"\nat_ms = 1000\nburst = 3\n[[fault]]\nkind = \"stall\"\nat_ms = 500000\n",
        )
    };
    let mut lines = 0;
    for (name, make) in [
        ("default", Box::new(Scenario::default_scenario) as Box<dyn Fn() -> Scenario>),
        ("faulted", Box::new(faulted)),
    ] {
        let a = run(make()).0.telemetry().to_jsonl();
        let b = run(make()).0.telemetry().to_jsonl();
        ensure!(a == b, "{name}: telemetry differs between identical runs");
        lines += a.lines().count();
    }
    let mut other = Scenario::default_scenario();
    other.set_seed(7);
    let c = run(other).0.telemetry().to_jsonl();
    ensure!(c != run(Scenario::default_scenario()).0.telemetry().to_jsonl(), "seed has no effect");
    Ok(format!("{lines} telemetry lines byte-identical across repeated runs; a different seed changes the log"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 scheduler oracle equivalence", criterion_1),
        ("2 check-node vs interrupt latency", criterion_2),
        ("3 watchdog hierarchy", criterion_3),
        ("4 ECC exhaustive", criterion_4),
        ("5 scrubbing effectiveness", criterion_5),
        ("6 compression", criterion_6),
        ("7 detumble end-to-end", criterion_7),
        ("8 boot fallback", criterion_8),
        ("9 determinism", criterion_9),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1} s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1} s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 9 criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
