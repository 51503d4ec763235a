use obcsim::scenario::{Scenario, DEFAULT_SCENARIO};
use obcsim::sim::Simulation;
use obcsim::telemetry::Telemetry;

fn run(extra: &str) -> Simulation {
    let sc = Scenario::parse(&format!("{DEFAULT_SCENARIO}\n{extra}")).unwrap_or_else(|e| panic!("{e}"));
    let mut sim = Simulation::new(sc).unwrap();
    sim.run();
    sim
}

fn modes_after(t: &Telemetry, from: u64) -> Vec<String> {
    t.of_kind("mode_switch")
        .filter(|r| r.t.ticks() >= from)
        .map(|r| r.str("to").unwrap().to_string())
        .collect()
}

#[test]
fn seu_in_boot_primary_then_power_cycle_boots_fallback() {
    let sim = run(
        "[[fault]]\nkind = \"bit-flip\"\nat_ms = 5000\ntarget = \"boot-primary\"\nbit = 77\n\
         [[fault]]\nkind = \"stall\"\nat_ms = 10000\n",
    );
    let t = sim.telemetry();
    let pc = t.of_kind("power_cycle").next().expect("power cycle");
    let boot = t.of_kind("boot").find(|r| r.t == pc.t).unwrap();
    assert_eq!(boot.get("selection").unwrap()["image"], "fallback");
    assert_eq!(modes_after(t, pc.t.ticks()).first().map(String::as_str), Some("Recovery"));
}

#[test]
fn recovery_self_check_returns_to_detumble() {
    let sim = run("[[fault]]\nkind = \"stall\"\nat_ms = 10000\n");
    let t = sim.telemetry();
    let pc = t.of_kind("power_cycle").next().unwrap().t.ticks();
    let after = modes_after(t, pc);
    assert_eq!(&after[..2], ["Recovery", "Detumble"]);
    let check = t.of_kind("self_check").find(|r| r.t.ticks() >= pc).unwrap();
    assert_eq!(check.get("passed"), Some(&serde_json::Value::Bool(true)));
}

#[test]
fn spi_timeout_aborts_then_next_activation_stores_image() {
    let sim = run("[[fault]]\nkind = \"spi-timeout\"\nat_ms = 1000\nburst = 3\n");
    let t = sim.telemetry();
    let aborted = t.of_kind("imaging_aborted").next().expect("first transfer aborts");
    assert_eq!(aborted.u64("bytes_received"), Some(2 * 4096));
    let stored = t.of_kind("imaging_stored").next().expect("retry stores");
    assert!(stored.t > aborted.t);
    assert!(stored.f64("ratio").unwrap() > 1.0);
    // Other tasks keep completing while the transfer is in flight.
    let start = t.of_kind("imaging_started").next().unwrap().t;
    assert!(t
        .of_kind("complete")
        .any(|r| r.t > start && r.t < aborted.t && r.str("task") != Some("imaging-sequence")));
}

#[test]
fn magnetometer_nack_zeroes_the_command() {
    let sim = run("[[fault]]\nkind = \"i2c\"\nat_ms = 30000\ndevice = \"magnetometer\"\nfault = \"nack\"\n");
    let t = sim.telemetry();
    let after: Vec<_> = t.of_kind("bdot").filter(|r| r.t.ticks() > 30000).take(5).collect();
    assert!(!after.is_empty());
    for r in after {
        assert_eq!(r.get("mag_valid"), Some(&serde_json::Value::Bool(false)));
        assert_eq!(r.get("duty").unwrap(), &serde_json::json!([0.0, 0.0, 0.0]));
    }
    assert!(t.of_kind("sensor_poll").any(|r| r.t.ticks() > 30000 && r.u64("bus_fault_flags").unwrap() != 0));
}

#[test]
fn tumble_in_nominal_raises_emergency_detumble() {
    let sim = run("[[fault]]\nkind = \"set-omega\"\nat_ms = 380000\nomega = [0.0, 0.1, 0.25]\n");
    let t = sim.telemetry();
    let sw = t.of_kind("mode_switch").find(|r| r.t.ticks() >= 380000).unwrap();
    assert_eq!(sw.t.ticks(), 380000);
    assert_eq!(sw.str("to"), Some("EmergencyDetumble"));
    assert_eq!(sw.str("cause"), Some("interrupt"));
}
