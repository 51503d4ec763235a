use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use obcsim::compression::{decode_bytes, encode, CodecParams, HyperspectralCube};
use obcsim::faulttol::{BankLabel, MemoryBank, CODEWORD_BITS};
use obcsim::scenario::Scenario;
use obcsim::sim::Simulation;

#[derive(Parser)]
#[command(name = "obcsim", version, about = "Nanosatellite on-board computer simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write telemetry plus a summary.
    Run {
        scenario: PathBuf,
        /// Simulated seconds, overriding the scenario.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compress a raw cube (with its `.hdr` sidecar) into an encoded stream.
    Compress {
        input: PathBuf,
        output: PathBuf,
        /// Spectral prediction depth.
        #[arg(long, default_value_t = 3)]
        p: u8,
    },
    /// Decode a stream back into a raw cube and sidecar.
    Decompress { input: PathBuf, output: PathBuf },
    /// SEC-DED bank dump utilities.
    Ecc {
        #[command(subcommand)]
        cmd: EccCommand,
    },
    /// Write one of the synthetic corpus cubes.
    SynthCube {
        /// constant, gradient, band-correlated or uniform-random
        kind: String,
        output: PathBuf,
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 32)]
        height: usize,
        #[arg(long, default_value_t = 16)]
        bands: usize,
        #[arg(long, default_value_t = 12)]
        bit_depth: u8,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum EccCommand {
    /// Scrub a dump once and report.
    Check { dump: PathBuf },
    /// Flip codeword bits given as `word:bit[,word:bit...]` and rewrite the dump.
    Inject { dump: PathBuf, flips: String },
    /// Encode arbitrary bytes into a fresh bank dump.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "compressed-flash")]
        bank: String,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn run(scenario: &Path, duration: Option<f64>, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut sc = Scenario::load(scenario).map_err(|e| Failure::Validation(format!("{}: {e}", scenario.display())))?;
    if let Some(d) = duration {
        sc.set_duration_s(d).map_err(|e| Failure::Validation(format!("--duration: {e}")))?;
    }
    if let Some(s) = seed {
        sc.set_seed(s);
    }
    let out = out.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    let telemetry_path = out.join(&sc.output.telemetry);
    let summary_path = out.join(&sc.output.summary);

    let mut sim = Simulation::new(sc).map_err(|e| Failure::Validation(format!("{}: {e}", scenario.display())))?;
    let summary = sim.run();
    let text = summary.render();
    write(&telemetry_path, sim.telemetry().to_jsonl().as_bytes())?;
    write(&summary_path, text.as_bytes())?;
    print!("{text}");
    println!("telemetry written to {}", telemetry_path.display());
    Ok(())
}

fn compress(input: &Path, output: &Path, p: u8) -> Result<(), Failure> {
    let cube = HyperspectralCube::read_files(input).map_err(|e| Failure::Validation(format!("{}: {e}", input.display())))?;
    let params = CodecParams::with_p(p);
    params
        .predictor
        .validate()
        .map_err(|e| Failure::Validation(format!("--p: {e}")))?;
    let stream = encode(&cube, params);
    write(output, &stream.to_bytes())?;
    println!(
        "{}x{}x{} @{} bit: {} -> {} bytes, ratio {:.3}",
        cube.width,
        cube.height,
        cube.bands,
        cube.bit_depth,
        cube.raw_bits() / 8,
        stream.len_bits() / 8,
        stream.ratio()
    );
    Ok(())
}

fn decompress(input: &Path, output: &Path) -> Result<(), Failure> {
    let bytes = read(input)?;
    let cube = decode_bytes(&bytes).map_err(|e| Failure::Validation(format!("{}: {e}", input.display())))?;
    cube.write_files(output)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", output.display())))?;
    println!("{}x{}x{} @{} bit decoded", cube.width, cube.height, cube.bands, cube.bit_depth);
    Ok(())
}

fn load_bank(dump: &Path) -> Result<MemoryBank, Failure> {
    let bytes = read(dump)?;
    MemoryBank::from_dump(&bytes).map_err(|e| Failure::Validation(format!("{}: {e}", dump.display())))
}

fn parse_flips(spec: &str, words: usize) -> Result<Vec<(usize, u32)>, Failure> {
    let bad = |m: String| Failure::Validation(m);
    spec.split(',')
        .map(|item| {
            let (w, b) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| bad(format!("`{item}`: expected <word>:<bit>")))?;
            let w: usize = w.parse().map_err(|_| bad(format!("`{item}`: bad word index")))?;
            let b: u32 = b.parse().map_err(|_| bad(format!("`{item}`: bad bit index")))?;
            if w >= words {
                return Err(bad(format!("`{item}`: word {w} out of range (dump has {words} words)")));
            }
            if b >= CODEWORD_BITS {
                return Err(bad(format!("`{item}`: bit {b} out of range (0..{CODEWORD_BITS})")));
            }
            Ok((w, b))
        })
        .collect()
}

fn ecc(cmd: EccCommand) -> Result<(), Failure> {
    match cmd {
        EccCommand::Check { dump } => {
            let mut bank = load_bank(&dump)?;
            let r = bank.scrub();
            println!("corrected={} uncorrectable={}", r.corrected, r.uncorrectable);
            print!("{}", bank.bad_words_jsonl());
        }
        EccCommand::Inject { dump, flips } => {
            let mut bank = load_bank(&dump)?;
            let flips = parse_flips(&flips, bank.len_words())?;
            for &(w, b) in &flips {
                bank.word_mut(w).flip(b);
            }
            write(&dump, &bank.to_dump())?;
            println!("flipped {} bit(s)", flips.len());
        }
        EccCommand::Encode { input, output, bank } => {
            let label = bank.parse::<BankLabel>().map_err(Failure::Validation)?;
            let bytes = read(&input)?;
            let bank = MemoryBank::from_bytes(label, &bytes);
            write(&output, &bank.to_dump())?;
            println!("{} words", bank.len_words());
        }
    }
    Ok(())
}

fn synth(kind: &str, output: &Path, w: usize, h: usize, b: usize, depth: u8, seed: u64) -> Result<(), Failure> {
    let v = |m: String| Failure::Validation(m);
    if w == 0 || h == 0 || b == 0 || !(1..=16).contains(&depth) {
        return Err(v("dimensions must be positive and bit depth in 1..=16".into()));
    }
    let cube = match kind {
        "constant" => HyperspectralCube::constant(w, h, b, depth, 1 << (depth - 1)),
        "gradient" => HyperspectralCube::gradient(w, h, b, depth),
        "band-correlated" => HyperspectralCube::band_correlated(w, h, b, depth, seed),
        "uniform-random" => HyperspectralCube::uniform_random(w, h, b, depth, seed),
        other => return Err(v(format!("unknown cube kind `{other}`"))),
    };
    cube.write_files(output)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", output.display())))?;
    println!("{kind} cube {w}x{h}x{b} @{depth} bit written");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Command::Run {
            scenario,
            duration,
            seed,
            out,
        } => run(&scenario, duration, seed, out),
        Command::Compress { input, output, p } => compress(&input, &output, p),
        Command::Decompress { input, output } => decompress(&input, &output),
        Command::Ecc { cmd } => ecc(cmd),
        Command::SynthCube {
            kind,
            output,
            width,
            height,
            bands,
            bit_depth,
            seed,
        } => synth(&kind, &output, width, height, bands, bit_depth, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(match f {
                Failure::Validation(_) => 2,
                Failure::Runtime(_) => 3,
            })
        }
    }
}
