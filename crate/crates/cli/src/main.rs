mod bench;

use std::fmt::{self, Write as _};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use qcwm_core::metrics::compare_report;
use qcwm_core::pipeline::PipelineError;
use qcwm_core::verify::VerificationOutcome;
use qcwm_core::*;

/// Exit code for malformed input or usage errors.
const EXIT_INPUT: u8 = 64;
/// Exit code for failures inside the pipeline.
const EXIT_INTERNAL: u8 = 70;

#[derive(Parser)]
#[command(name = "qcwm", version, about = "Watermark quantum circuits and check ownership")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize, map and route a circuit with a signature embedded.
    Embed(EmbedArgs),
    /// Check a suspect circuit against a secret bundle.
    Verify {
        #[arg(short, long)]
        suspect: PathBuf,
        #[arg(short = 'k', long)]
        secret: PathBuf,
    },
    /// Sample random signatures over a directory of circuits.
    Bench(bench::BenchArgs),
    /// Print a report as a table.
    Report { report: PathBuf },
    /// Relative overheads of one report against another.
    Compare { baseline: PathBuf, watermarked: PathBuf },
}

#[derive(clap::Args)]
struct EmbedArgs {
    /// OpenQASM 2 file, or the name of a bundled benchmark.
    #[arg(short, long)]
    input: String,
    /// Device JSON file or preset name.
    #[arg(short, long, default_value = "fakelagos")]
    device: String,
    /// `stage1|stage2|stage3`, e.g. `ab|ccd|2`. Empty for the baseline flow.
    #[arg(long, default_value = "")]
    sig: String,
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    shots: usize,
    /// Watermarked QASM. Standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Secret bundle for later verification. Defaults to `<output>.secret.json`.
    #[arg(long)]
    secret: Option<PathBuf>,
    /// Write 0 for synthesis time so reports are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Skip the self-check that verifies the output against its own secret.
    #[arg(long)]
    no_check: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // wrapped errors often repeat their source in their own message
        let mut text = String::new();
        for cause in self.error.chain() {
            let msg = cause.to_string();
            if !text.contains(&msg) {
                if !text.is_empty() {
                    text.push_str(": ");
                }
                text.push_str(&msg);
            }
        }
        f.write_str(&text)
    }
}

fn input(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        error: error.into(),
    }
}

fn internal(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_INTERNAL,
        error: error.into(),
    }
}

/// Signature, circuit and device problems are the caller's to fix.
fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Synthesis { .. } | PipelineError::Noise(_) | PipelineError::Metrics(_) => internal(e),
        _ => input(e),
    }
}

/// Writes to standard output, ignoring a closed pipe.
pub(crate) fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(input)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(internal)
}

/// Circuit from a QASM path, or a bundled benchmark by name.
fn load_circuit(spec: &str) -> Result<Circuit, Failure> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(c) = benchmarks::load(spec) {
            return Ok(c);
        }
    }
    let text = read(path)?;
    let mut c = parse_qasm(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(input)?;
    if c.name.is_empty() {
        c.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(c)
}

fn load_device(spec: &str) -> Result<DeviceModel, Failure> {
    DeviceModel::load(spec)
        .with_context(|| format!("device `{spec}`"))
        .map_err(input)
}

fn cmd_embed(args: EmbedArgs) -> Result<(), Failure> {
    let circuit = load_circuit(&args.input)?;
    let device = load_device(&args.device)?;
    let sig: SignatureMessage = args
        .sig
        .parse()
        .with_context(|| format!("signature `{}`", args.sig))
        .map_err(input)?;
    let config = PipelineConfig::default()
        .with_epsilon(args.eps)
        .with_seed(args.seed)
        .with_shots(args.shots);
    let pipeline = Pipeline::new(&circuit, &device, config.clone()).map_err(pipeline_failure)?;
    let embedded = pipeline.embed(&sig).map_err(pipeline_failure)?;
    let mut report = embedded.report;
    if args.no_timing {
        report.synthesis_ms = 0;
    }
    let secret = Secret {
        original: circuit,
        signature: sig,
        device,
        config,
    };
    if !args.no_check {
        let outcome = verify(&embedded.circuit, &secret).map_err(internal)?;
        report.verification = Some(serde_json::to_value(&outcome).map_err(internal)?);
    }
    let qasm = emit_qasm(&embedded.circuit);
    match &args.output {
        Some(path) => write(path, &qasm)?,
        None => emit(&qasm),
    }
    let secret_path = args.secret.clone().or_else(|| {
        args.output.as_ref().map(|o| {
            let mut name = o.file_stem().unwrap_or_default().to_os_string();
            name.push(".secret.json");
            o.with_file_name(name)
        })
    });
    if let Some(path) = secret_path {
        write(&path, &SecretBundle::new(&secret).to_json())?;
    }
    match &args.report {
        Some(path) => write(path, &report.to_json())?,
        None if args.output.is_some() => emit(&format!("{}\n", report.to_json())),
        None => {}
    }
    Ok(())
}

fn cmd_verify(suspect: &Path, secret: &Path) -> Result<u8, Failure> {
    let text = read(suspect)?;
    let suspect = parse_qasm(&text)
        .with_context(|| format!("parsing {}", suspect.display()))
        .map_err(input)?;
    let bundle = SecretBundle::from_json(&read(secret)?)
        .with_context(|| format!("secret bundle {}", secret.display()))
        .map_err(input)?;
    let secret = bundle.secret().map_err(input)?;
    let outcome: VerificationOutcome = verify(&suspect, &secret).map_err(input)?;
    emit(&format!("{}\n", outcome.to_json()));
    Ok(match outcome.verdict {
        Verdict::Match => 0,
        Verdict::Partial => 1,
        Verdict::NoMatch => 2,
    })
}

fn load_report(path: &Path) -> Result<WatermarkReport, Failure> {
    serde_json::from_str(&read(path)?)
        .with_context(|| format!("report {}", path.display()))
        .map_err(input)
}

fn cmd_report(path: &Path) -> Result<(), Failure> {
    let r = load_report(path)?;
    let mut out = String::new();
    let _ = writeln!(out, "benchmark  {}", r.benchmark);
    let _ = writeln!(out, "device     {}", r.device);
    let _ = writeln!(out, "signature  {}", r.signature);
    let _ = writeln!(out, "mapping    {}", r.mapping_code);
    let _ = writeln!(out, "depth      {}", r.depth);
    let _ = writeln!(out, "cnot       {}", r.cnot);
    let _ = writeln!(out, "pst        {:.4}", r.pst);
    let _ = writeln!(out, "ppa        {:.6}", r.ppa);
    let _ = writeln!(out, "synthesis  {} ms", r.synthesis_ms);
    for (i, b) in r.blocks.iter().enumerate() {
        let sym = b.symbol.map(|s| s.as_char().to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "block {i:<4} Δ = {:.3e}  digit {}  {sym}", b.delta, b.digit);
    }
    if let Some(v) = &r.verification {
        let _ = writeln!(out, "verdict    {}", v["verdict"].as_str().unwrap_or("?"));
    }
    emit(&out);
    Ok(())
}

fn cmd_compare(baseline: &Path, watermarked: &Path) -> Result<(), Failure> {
    let d = compare_report(&load_report(baseline)?, &load_report(watermarked)?).map_err(input)?;
    emit(&format!("{}\n", serde_json::to_string_pretty(&d).map_err(internal)?));
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Embed(args) => cmd_embed(args).map(|_| 0),
        Command::Verify { suspect, secret } => cmd_verify(&suspect, &secret),
        Command::Bench(args) => bench::run(args).map(|_| 0),
        Command::Report { report } => cmd_report(&report).map(|_| 0),
        Command::Compare {
            baseline,
            watermarked,
        } => cmd_compare(&baseline, &watermarked).map(|_| 0),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
