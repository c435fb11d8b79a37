//! Command-line interface: `verify`, `run`, `stats`, `eval-diagram` and
//! `dump-gate`. Batch use only; exit codes are 0 for success, 1 for a
//! failed check or protocol error, 2 for usage errors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::operators::{BraidWord, ForcedMode, RandomSource};
use crate::protocols::{controlled_rotation, ProtocolConfig, RunContext, RunStats};
use crate::qubit_codec::{decode, encode, extract_gate, format_complex, QubitRegister};
use crate::skein_dsl;
use crate::verify::{run_all, VerifyConfig};

#[derive(Parser)]
#[command(
    name = "fibsim",
    version,
    about = "Fibonacci-anyon simulator: braiding, charge measurement, fusion, and the measurement-assisted CR(2π/5) protocol"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum ModeArg {
    #[default]
    Literal,
    Strict,
}

impl From<ModeArg> for ForcedMode {
    fn from(mode: ModeArg) -> ForcedMode {
        match mode {
            ModeArg::Literal => ForcedMode::Literal,
            ModeArg::Strict => ForcedMode::Strict,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the acceptance suite and print one pass/fail line per check.
    Verify {
        /// Override every check's comparison tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Forced-measurement acceptance policy.
        #[arg(long, value_enum, default_value_t = ModeArg::Literal)]
        mode: ModeArg,
        /// Base seed for the suite's Monte Carlo streams.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Execute one seeded controlled-rotation run on a two-qubit input.
    Run {
        /// Seed of the run (or pass --entropy for a random one).
        #[arg(long)]
        seed: Option<u64>,
        /// Draw the seed from OS entropy (printed for reproduction).
        #[arg(long)]
        entropy: bool,
        /// Four comma-separated complex amplitudes, e.g. "1,0,0,0" or
        /// "0.5,0.5i,-0.5,0.5-0.1i".
        #[arg(long)]
        input: String,
        /// Write the event trace to this path as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Tolerance used when reporting the deviation verdict.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Literal)]
        mode: ModeArg,
    },
    /// Aggregate statistics over many seeded protocol runs.
    Stats {
        /// Number of runs.
        #[arg(long)]
        runs: u64,
        /// Base seed; run k uses stream k (or pass --entropy).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        entropy: bool,
        /// Also write a plot-ready tab-separated table to this path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Literal)]
        mode: ModeArg,
    },
    /// Parse and evaluate a planar-diagram source file.
    EvalDiagram {
        /// Diagram source (slices like "cup(1); cross(1,+); cap(1)").
        file: PathBuf,
    },
    /// Print the projective gate a braid word applies to encoded qubits.
    DumpGate {
        /// Number of encoded qubits (the braid acts on 4 anyons each).
        #[arg(long)]
        qubits: usize,
        /// Braid word, tokens sK or sK^P, applied left to right.
        #[arg(long)]
        braid: String,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn check(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> u8 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap exits with 2 on usage errors and 0 for --help/--version.
        Err(err) => err.exit(),
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Verify { tol, mode, seed } => cmd_verify(tol, mode.into(), seed),
        Command::Run {
            seed,
            entropy,
            input,
            trace,
            tol,
            mode,
        } => cmd_run(seed, entropy, &input, trace, tol, mode.into()),
        Command::Stats {
            runs,
            seed,
            entropy,
            out,
            mode,
        } => cmd_stats(runs, seed, entropy, out, mode.into()),
        Command::EvalDiagram { file } => cmd_eval_diagram(&file),
        Command::DumpGate { qubits, braid } => cmd_dump_gate(qubits, &braid),
    }
}

fn resolve_seed(seed: Option<u64>, entropy: bool) -> Result<u64, Failure> {
    match (seed, entropy) {
        (Some(s), _) => Ok(s),
        (None, true) => {
            let s: u64 = rand::random();
            println!("entropy seed       {s}");
            Ok(s)
        }
        (None, false) => Err(Failure::usage(
            "no --seed given; pass --entropy to allow a random seed",
        )),
    }
}

fn check_tolerance(tol: f64) -> Result<(), Failure> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Failure::usage("tolerance must be a positive number"))
    }
}

fn cmd_verify(tol: Option<f64>, mode: ForcedMode, seed: u64) -> Result<(), Failure> {
    if let Some(t) = tol {
        check_tolerance(t)?;
    }
    let cfg = VerifyConfig {
        seed,
        mode,
        tol_override: tol,
    };
    println!("fibsim verify (seed {seed}, {})", crate::verify::mode_note(mode));
    let reports = run_all(&cfg);
    let mut all_passed = true;
    for report in &reports {
        let tag = if report.passed { "PASS" } else { "FAIL" };
        println!("[{:>2}] {tag} {} — {}", report.id, report.name, report.detail);
        all_passed &= report.passed;
    }
    if all_passed {
        println!("all {} checks passed", reports.len());
        Ok(())
    } else {
        Err(Failure::check("one or more acceptance checks failed"))
    }
}

/// Parses one complex amplitude: "1", "-0.5", "0.3+0.2i", "1i", "-i".
pub fn parse_complex(text: &str) -> Result<Complex64, String> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err("empty amplitude".to_string());
    }
    let parse_real = |s: &str| -> Result<f64, String> {
        match s {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => s.parse::<f64>().map_err(|_| format!("bad number {s:?}")),
        }
    };
    if let Some(body) = t.strip_suffix('i') {
        // Find a +/- that separates real and imaginary parts (not leading,
        // not part of an exponent).
        let bytes = body.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            let b = bytes[idx];
            if (b == b'+' || b == b'-') && !matches!(bytes[idx - 1], b'e' | b'E') {
                split = Some(idx);
                break;
            }
        }
        match split {
            Some(idx) => {
                let re = parse_real(&body[..idx])?;
                let im = parse_real(&body[idx..])?;
                Ok(Complex64::new(re, im))
            }
            None => Ok(Complex64::new(0.0, parse_real(body)?)),
        }
    } else {
        Ok(Complex64::new(parse_real(&t)?, 0.0))
    }
}

fn parse_input_amplitudes(text: &str) -> Result<Vec<Complex64>, Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(Failure::usage(format!(
            "--input needs 4 comma-separated amplitudes, got {}",
            parts.len()
        )));
    }
    let amps: Result<Vec<Complex64>, String> = parts.iter().map(|p| parse_complex(p)).collect();
    let amps = amps.map_err(Failure::usage)?;
    if amps.iter().all(|a| a.norm_sqr() == 0.0) {
        return Err(Failure::usage("input amplitudes must not all be zero"));
    }
    Ok(amps)
}

fn cr_reference(input: &[Complex64]) -> Vec<Complex64> {
    let theta = 2.0 * std::f64::consts::PI / 5.0;
    let phase = Complex64::from_polar(1.0, theta);
    input
        .iter()
        .enumerate()
        .map(|(w, &a)| if w == 3 { phase * a } else { a })
        .collect()
}

fn cmd_run(
    seed: Option<u64>,
    entropy: bool,
    input: &str,
    trace_path: Option<PathBuf>,
    tol: f64,
    mode: ForcedMode,
) -> Result<(), Failure> {
    check_tolerance(tol)?;
    let seed = resolve_seed(seed, entropy)?;
    let amps = parse_input_amplitudes(input)?;
    let register = encode(&amps).map_err(|e| Failure::usage(e.to_string()))?;
    let (normalized_input, _) = decode(&register);

    let cfg = ProtocolConfig {
        forced_mode: mode,
        ..ProtocolConfig::default()
    };
    let mut ctx = RunContext::new(RandomSource::from_seed(seed), cfg).with_tracing();
    let (output, record) = controlled_rotation(&mut ctx, &register)
        .map_err(|e| Failure::check(format!("protocol failed at event {}: {e}", ctx.trace.len())))?;
    let (out_amps, leak) = decode(&output);
    let reference = cr_reference(&normalized_input);
    let deviation = crate::qubit_codec::projective_vec_deviation(&out_amps, &reference);
    let theta = 2.0 * std::f64::consts::PI / 5.0;
    ctx.trace.record(
        "cr_gate",
        format!(
            "diag=1,1,1,{} deviation={deviation:.3e} leak={leak:.3e}",
            format_complex(Complex64::from_polar(1.0, theta))
        ),
        None,
        None,
        output.state().space_dim(),
    );

    println!("seed               {seed}");
    for (w, amp) in normalized_input.iter().enumerate() {
        println!("input[{w:02b}]          {}", format_complex(*amp));
    }
    for (w, amp) in out_amps.iter().enumerate() {
        println!("output[{w:02b}]         {}", format_complex(*amp));
    }
    println!("leak               {leak}");
    println!("deviation          {deviation}   (projective, vs CR(2π/5)·input)");
    println!("within tolerance   {}", deviation <= tol);
    println!("walk steps         {}", record.steps());
    println!("gamma ancillas     {}", ctx.stats.gamma_preparations);
    println!("recoveries         {}", ctx.stats.recovered());
    if let Some(path) = trace_path {
        let file = File::create(&path)
            .map_err(|e| Failure::check(format!("cannot write trace {}: {e}", path.display())))?;
        ctx.trace
            .write_jsonl(BufWriter::new(file))
            .map_err(|e| Failure::check(format!("trace write failed: {e}")))?;
        println!("trace              {} ({} events)", path.display(), ctx.trace.len());
    }
    if deviation <= tol {
        Ok(())
    } else {
        Err(Failure::check(format!(
            "deviation {deviation:.3e} exceeds tolerance {tol:.1e}"
        )))
    }
}

fn quantile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

fn cmd_stats(
    runs: u64,
    seed: Option<u64>,
    entropy: bool,
    out: Option<PathBuf>,
    mode: ForcedMode,
) -> Result<(), Failure> {
    if runs == 0 {
        return Err(Failure::usage("--runs must be at least 1"));
    }
    let seed = resolve_seed(seed, entropy)?;
    // Fixed probe input: the uniform superposition over the four words.
    let probe = encode(&[
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, 0.0),
    ])
    .expect("probe encodes");

    let cfg = ProtocolConfig {
        forced_mode: mode,
        ..ProtocolConfig::default()
    };
    let merged: Result<(RunStats, u64), String> = (0..runs)
        .into_par_iter()
        .map(|run| -> Result<(RunStats, u64), String> {
            let mut ctx = RunContext::new(RandomSource::stream(seed, run), cfg);
            controlled_rotation(&mut ctx, &probe).map_err(|e| format!("run {run}: {e}"))?;
            Ok((ctx.stats, 1))
        })
        .try_reduce(
            || (RunStats::default(), 0),
            |mut acc, item| {
                acc.0.merge(&item.0);
                acc.1 += item.1;
                Ok(acc)
            },
        );
    let (stats, terminated) = merged.map_err(Failure::check)?;

    let mut walk_lengths = stats.walk_lengths.clone();
    walk_lengths.sort_unstable();
    let mut forced = stats.forced_iterations.clone();
    forced.sort_unstable();
    let mean = |v: &[u64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<u64>() as f64 / v.len() as f64
        }
    };
    let rate = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };

    let mut lines: Vec<(String, String)> = Vec::new();
    let mut push = |key: &str, value: String| lines.push((key.to_string(), value));
    push("runs", runs.to_string());
    push("terminated", terminated.to_string());
    push("termination_rate", format!("{}", rate(terminated, runs)));
    push("walk_len_mean", format!("{}", mean(&walk_lengths)));
    push("walk_len_p50", quantile(&walk_lengths, 0.5).to_string());
    push("walk_len_max", walk_lengths.last().copied().unwrap_or(0).to_string());
    push("fuse_attempts", stats.fuse_attempts.to_string());
    push("fused", stats.fused.to_string());
    push("recovered_left", stats.recovered_left.to_string());
    push("recovered_right", stats.recovered_right.to_string());
    push(
        "fused_rate",
        format!("{}", rate(stats.fused, stats.fuse_attempts)),
    );
    push(
        "recovered_rate",
        format!("{}", rate(stats.recovered(), stats.fuse_attempts)),
    );
    push("forced_fusions", stats.forced_fusions.to_string());
    push("forced_iter_mean", format!("{}", mean(&forced)));
    push("forced_iter_p50", quantile(&forced, 0.5).to_string());
    push("forced_iter_p90", quantile(&forced, 0.9).to_string());
    push("forced_iter_p99", quantile(&forced, 0.99).to_string());
    push("forced_iter_max", forced.last().copied().unwrap_or(0).to_string());
    push("gamma_preparations", stats.gamma_preparations.to_string());
    push("bell_attempts", stats.bell_attempts.to_string());
    push(
        "bell_success_rate",
        format!("{}", rate(stats.bell_successes, stats.bell_attempts)),
    );
    push("x_attempts", stats.x_attempts.to_string());
    push(
        "x_success_rate",
        format!("{}", rate(stats.x_successes, stats.x_attempts)),
    );
    for (idx, name) in ["d1", "d2", "d3", "d4"].iter().enumerate() {
        push(&format!("{name}_attempts"), stats.d_attempts[idx].to_string());
        push(
            &format!("{name}_success_rate"),
            format!("{}", rate(stats.d_successes[idx], stats.d_attempts[idx])),
        );
    }

    println!("fibsim stats (seed {seed}, probe input, {})", crate::verify::mode_note(mode));
    for (key, value) in &lines {
        println!("{key:<22} {value}");
    }
    // Walk-length histogram.
    let mut histogram: Vec<(u64, u64)> = Vec::new();
    for &len in &walk_lengths {
        match histogram.last_mut() {
            Some((l, count)) if *l == len => *count += 1,
            _ => histogram.push((len, 1)),
        }
    }
    println!("walk length histogram:");
    for &(len, count) in &histogram {
        println!("  {len:>4} {count}");
    }

    if let Some(path) = out {
        let file = File::create(&path)
            .map_err(|e| Failure::check(format!("cannot write {}: {e}", path.display())))?;
        let mut writer = BufWriter::new(file);
        let mut emit = |line: String| -> Result<(), Failure> {
            writeln!(writer, "{line}").map_err(|e| Failure::check(e.to_string()))
        };
        emit(format!("# fibsim stats\tseed={seed}\truns={runs}"))?;
        for (key, value) in &lines {
            emit(format!("{key}\t{value}"))?;
        }
        for &(len, count) in &histogram {
            emit(format!("hist_walk_len\t{len}\t{count}"))?;
        }
        println!("table written      {}", path.display());
    }
    Ok(())
}

fn cmd_eval_diagram(file: &PathBuf) -> Result<(), Failure> {
    let source = std::fs::read_to_string(file)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", file.display())))?;
    let term = skein_dsl::parse(&source).map_err(|e| Failure::check(e.to_string()))?;
    let value = skein_dsl::evaluate(&term);
    if let Some(scalar) = value.as_scalar() {
        println!("{}", format_complex(scalar));
    } else {
        for row in value.matrix.dense() {
            let cells: Vec<String> = row.into_iter().map(format_complex).collect();
            println!("{}", cells.join(" "));
        }
    }
    Ok(())
}

fn cmd_dump_gate(qubits: usize, braid: &str) -> Result<(), Failure> {
    if qubits == 0 || qubits > 3 {
        return Err(Failure::usage("--qubits must be between 1 and 3"));
    }
    let word = BraidWord::parse(braid).map_err(|e| Failure::usage(e.to_string()))?;
    let strands = 4 * qubits;
    for &(k, _) in &word.factors {
        if k >= strands {
            return Err(Failure::usage(format!(
                "strand index s{k} out of range for {strands} anyons"
            )));
        }
    }
    let gate = extract_gate(
        |reg: &QubitRegister| {
            let out = word.apply(reg.state())?;
            QubitRegister::from_state(out)
        },
        qubits,
        1e-9,
    )
    .map_err(|e| Failure::check(e.to_string()))?;
    print!("{gate}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("1").unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(parse_complex("-0.5").unwrap(), Complex64::new(-0.5, 0.0));
        assert_eq!(parse_complex("0.3+0.2i").unwrap(), Complex64::new(0.3, 0.2));
        assert_eq!(parse_complex("1i").unwrap(), Complex64::new(0.0, 1.0));
        assert_eq!(parse_complex("-i").unwrap(), Complex64::new(0.0, -1.0));
        assert_eq!(parse_complex("0.5-0.25i").unwrap(), Complex64::new(0.5, -0.25));
        assert_eq!(parse_complex("2e-3i").unwrap(), Complex64::new(0.0, 2e-3));
        assert_eq!(parse_complex("1e-2+3e-4i").unwrap(), Complex64::new(1e-2, 3e-4));
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn input_validation() {
        assert!(parse_input_amplitudes("1,0,0,0").is_ok());
        assert!(parse_input_amplitudes("1,0,0").is_err());
        assert!(parse_input_amplitudes("0,0,0,0").is_err());
    }

    #[test]
    fn complex_formatting() {
        assert_eq!(format_complex(Complex64::new(1.5, 0.0)), "1.5");
        assert_eq!(format_complex(Complex64::new(0.0, -2.0)), "0-2i");
        assert_eq!(format_complex(Complex64::new(-1.0, 0.25)), "-1+0.25i");
    }
}
