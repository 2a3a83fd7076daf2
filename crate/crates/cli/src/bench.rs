//! `qcwm bench`: random signatures over a directory of circuits.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use qcwm_core::noise::thread_pool;
use qcwm_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::{emit, input, internal, load_device, write, Failure};

#[derive(clap::Args)]
pub struct BenchArgs {
    /// Directory of `.qasm` files.
    #[arg(short = 'D', long)]
    dir: PathBuf,
    #[arg(short, long, default_value = "fakelagos")]
    device: String,
    /// Signatures sampled per circuit.
    #[arg(short = 'n', long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    shots: usize,
    /// Use the empty signature for every sample.
    #[arg(long)]
    empty: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Add synthesis-time columns to the CSV. They vary between runs.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Spread {
    min: f64,
    mean: f64,
    max: f64,
}

impl Spread {
    fn of(v: &[f64]) -> Self {
        Self {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Row {
    benchmark: String,
    qubits: usize,
    blocks: usize,
    samples: usize,
    base_depth: usize,
    base_cnot: usize,
    base_pst: f64,
    depth: Spread,
    cnot: Spread,
    pst: Spread,
    synthesis_ms: Spread,
}

fn bench_one(
    name: &str,
    c: &Circuit,
    dev: &DeviceModel,
    args: &BenchArgs,
    stream: u64,
) -> anyhow::Result<Row> {
    let config = PipelineConfig::default()
        .with_epsilon(args.eps)
        .with_seed(args.seed)
        .with_shots(args.shots);
    let p = Pipeline::new(c, dev, config)?;
    let base = p.baseline()?.report;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    rng.set_stream(stream);
    let mut reports = Vec::with_capacity(args.samples);
    for _ in 0..args.samples {
        let out = if args.empty {
            p.embed(&SignatureMessage::empty())?
        } else {
            let (sig, prepared) = p.random_signature(&mut rng)?;
            p.finish(&prepared, sig.stage3_e)?
        };
        reports.push(out.report);
    }
    let col = |f: &dyn Fn(&WatermarkReport) -> f64| Spread::of(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(Row {
        benchmark: name.to_string(),
        qubits: c.num_qubits(),
        blocks: p.num_blocks(),
        samples: reports.len(),
        base_depth: base.depth,
        base_cnot: base.cnot,
        base_pst: base.pst,
        depth: col(&|r| r.depth as f64),
        cnot: col(&|r| r.cnot as f64),
        pst: col(&|r| r.pst),
        synthesis_ms: col(&|r| r.synthesis_ms as f64),
    })
}

fn csv(rows: &[Row], timing: bool) -> String {
    let mut out = String::from(
        "benchmark,qubits,blocks,samples,base_depth,base_cnot,base_pst,\
         depth_min,depth_mean,depth_max,cnot_min,cnot_mean,cnot_max,pst_min,pst_mean,pst_max",
    );
    if timing {
        out.push_str(",synthesis_ms_min,synthesis_ms_mean,synthesis_ms_max");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{:.6}",
            r.benchmark, r.qubits, r.blocks, r.samples, r.base_depth, r.base_cnot, r.base_pst
        );
        for (s, prec) in [(r.depth, 3), (r.cnot, 3), (r.pst, 6)] {
            let _ = write!(out, ",{:.p$},{:.p$},{:.p$}", s.min, s.mean, s.max, p = prec);
        }
        if timing {
            let s = r.synthesis_ms;
            let _ = write!(out, ",{:.1},{:.1},{:.1}", s.min, s.mean, s.max);
        }
        out.push('\n');
    }
    out
}

fn table(rows: &[Row]) -> String {
    let mut out = format!(
        "{:<16} {:>5} {:>17} {:>17} {:>23} {:>9}\n",
        "benchmark", "base", "depth min/mean/max", "cnot min/mean/max", "pst base | mean (min)", "synth ms"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:>2}/{:<2} {:>4}/{:>5.1}/{:<4} {:>4}/{:>5.1}/{:<4} {:.4} | {:.4} ({:.4}) {:>9.0}",
            r.benchmark,
            r.base_depth,
            r.base_cnot,
            r.depth.min,
            r.depth.mean,
            r.depth.max,
            r.cnot.min,
            r.cnot.mean,
            r.cnot.max,
            r.base_pst,
            r.pst.mean,
            r.pst.min,
            r.synthesis_ms.mean,
        );
    }
    if !rows.is_empty() {
        let n = rows.len() as f64;
        let depth = rows
            .iter()
            .map(|r| 100.0 * (r.depth.mean - r.base_depth as f64) / r.base_depth.max(1) as f64)
            .sum::<f64>()
            / n;
        let pst = rows.iter().map(|r| 100.0 * (r.base_pst - r.pst.mean)).sum::<f64>() / n;
        let _ = writeln!(out, "mean depth overhead {depth:+.2}%, mean PST drop {pst:.2} pt");
    }
    out
}

pub fn run(args: BenchArgs) -> Result<(), Failure> {
    let dev = load_device(&args.device)?;
    let mut files: Vec<PathBuf> = fs::read_dir(&args.dir)
        .with_context(|| format!("reading {}", args.dir.display()))
        .map_err(input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "qasm"))
        .collect();
    files.sort();
    let results: Vec<(String, anyhow::Result<Row>)> = thread_pool().install(|| {
        files
            .par_iter()
            .enumerate()
            .map(|(i, path)| {
                let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                let row = fs::read_to_string(path)
                    .map_err(anyhow::Error::from)
                    .and_then(|t| Ok(parse_qasm(&t)?))
                    .and_then(|c| bench_one(&name, &c, &dev, &args, i as u64));
                (name, row)
            })
            .collect()
    });
    let mut rows = Vec::new();
    for (name, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => eprintln!("{name}: {e:#}"),
        }
    }
    emit(&table(&rows));
    if let Some(path) = &args.csv {
        write(path, &csv(&rows, args.timing))?;
    }
    if let Some(path) = &args.json {
        write(path, &serde_json::to_string_pretty(&rows).map_err(internal)?)?;
    }
    Ok(())
}
