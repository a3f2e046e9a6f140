use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use domino::bench::{run_bench, BenchReport};
use domino::config::RunConfig;
use domino::pipeline::{Pipeline, Scheme};
use domino::trace::TraceFile;
use domino::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

/// Dominant-path compensation of CSI distortions, with simulation and
/// benchmarking tools.
#[derive(Parser)]
#[command(name = "domino", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize a breathing trace and write it in the binary trace format.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output trace path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the per-frame channel series of one scheme as CSV.
    Compensate {
        trace: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "domino")]
        scheme: Scheme,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the breathing rate of a trace.
    Respire {
        trace: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Repeatable; every scheme the trace supports when omitted.
        #[arg(long)]
        scheme: Vec<Scheme>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scenario grid and write errors.csv, cdf.csv, stats.csv and
    /// summary.txt.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Restricts the configured scheme list; repeatable.
        #[arg(long)]
        scheme: Vec<Scheme>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides sim.seed (simulate) or bench.seed (bench).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.sim.seed = s;
            cfg.bench.base_seed = s;
        }
        Ok(cfg)
    }
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        // a closed stdout (`| head`) is not a data error
        if e.kind() == io::ErrorKind::BrokenPipe {
            return Self { code: 0, msg: String::new() };
        }
        Self { code: EXIT_DATA, msg: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Err(f) = init_threads() {
        eprintln!("error: {}", f.msg);
        return ExitCode::from(f.code);
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) if f.code == 0 => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("DOMINO_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("DOMINO_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::usage(e.to_string()))
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Simulate { common, out } => simulate(&common.load()?, &out),
        Cmd::Compensate { trace, common, scheme, out } => compensate(&common.load()?, &trace, scheme, out.as_deref()),
        Cmd::Respire { trace, common, scheme, out } => respire(&common.load()?, &trace, &scheme, out.as_deref()),
        Cmd::Bench { common, scheme, out } => bench(common.load()?, &scheme, &out),
    }
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let scene = &cfg.scene;
    let setup = scene.setup(cfg.sim.rate_bpm, cfg.sim.snr_db, scene.ranges, cfg.sim.seed)?;
    let samples = setup.generate(&scene.frame_times())?;
    let trace = TraceFile::from_samples(&samples, scene.carrier_hz, cfg.sim.rate_bpm)?;
    trace.write_file(out)?;
    eprintln!("wrote {} frames x {} antennas to {}", trace.n_frames(), trace.n_antennas(), out.display());
    Ok(())
}

fn load_trace(path: &Path) -> Result<TraceFile, Failure> {
    TraceFile::read_file(path).map_err(|e| Failure { code: EXIT_DATA, msg: format!("{}: {e}", path.display()) })
}

/// Pipeline for a trace's own layout with the configured estimator settings.
fn pipeline_for(cfg: &RunConfig, trace: &TraceFile) -> Result<Pipeline, Failure> {
    let mut pcfg = cfg.pipeline.clone();
    let n = trace.layout.n_fft();
    if pcfg.tapset.n_fft() != n {
        let taps = pcfg.tapset.signed_taps();
        let before = taps.iter().map(|t| (-t).max(0)).max().unwrap_or(0) as usize;
        let after = taps.iter().copied().max().unwrap_or(0).max(0) as usize;
        pcfg.tapset = Arc::new(domino::TapSet::centered(n, before, after)?);
    }
    Ok(Pipeline::new(Arc::clone(&trace.layout), pcfg)?)
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn compensate(cfg: &RunConfig, path: &Path, scheme: Scheme, out: Option<&Path>) -> Result<(), Failure> {
    let trace = load_trace(path)?;
    let pipeline = pipeline_for(cfg, &trace)?;
    let series = pipeline.series(scheme, &trace.streams)?;
    let mut w = writer(out)?;
    writeln!(w, "time,channel,re,im,magnitude")?;
    for (f, t) in series.timestamps.iter().enumerate() {
        for (c, ch) in series.channels.iter().enumerate() {
            let v = ch[f];
            writeln!(w, "{t},{c},{},{},{}", v.re, v.im, v.norm())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn respire(cfg: &RunConfig, path: &Path, schemes: &[Scheme], out: Option<&Path>) -> Result<(), Failure> {
    let trace = load_trace(path)?;
    let fs_hz = trace
        .sample_rate_hz()
        .ok_or_else(|| Failure { code: EXIT_DATA, msg: "trace needs at least two distinct timestamps".into() })?;
    let pipeline = pipeline_for(cfg, &trace)?;
    let schemes: Vec<Scheme> = if schemes.is_empty() {
        Scheme::IMPLEMENTED.into_iter().filter(|s| s.min_antennas() <= trace.n_antennas()).collect()
    } else {
        schemes.to_vec()
    };
    let truth = trace.truth.as_ref().map(|t| t.rate_bpm.iter().sum::<f64>() / t.rate_bpm.len().max(1) as f64);
    let mut w = writer(out)?;
    writeln!(w, "scheme,antenna,channel,periodicity,bpm,confidence,status,true_bpm")?;
    for s in schemes {
        let r = pipeline.respire(s, &trace.streams, fs_hz)?;
        let (confidence, status) = match &r.rate {
            Ok(e) => (e.confidence.to_string(), "ok".to_string()),
            Err(Error::NoPeak { ratio, .. }) => (ratio.to_string(), "no-peak".to_string()),
            Err(e) => (String::new(), format!("\"{e}\"")),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            s,
            r.label.antenna,
            r.label.index,
            r.selection.periodicity_score,
            r.bpm().map(|b| b.to_string()).unwrap_or_default(),
            confidence,
            status,
            truth.map(|t| t.to_string()).unwrap_or_default()
        )?;
    }
    w.flush()?;
    Ok(())
}

fn bench(mut cfg: RunConfig, schemes: &[Scheme], out: &Path) -> Result<(), Failure> {
    if !schemes.is_empty() {
        cfg.bench.schemes.retain(|s| schemes.contains(s));
        if cfg.bench.schemes.is_empty() {
            return Err(Failure::usage("--scheme filter leaves no configured scheme"));
        }
    }
    cfg.bench.scenarios().map_err(|e| Failure::usage(e.to_string()))?;
    let report = run_bench(&cfg.scene, cfg.pipeline.clone(), &cfg.bench)?;
    write_report(&report, out)?;
    print!("{}", report.summary_table());
    let failures = report.check(&cfg.accept);
    if failures.is_empty() {
        println!("acceptance: pass");
        Ok(())
    } else {
        for f in &failures {
            println!("acceptance: FAIL {f}");
        }
        Err(Failure { code: EXIT_ACCEPTANCE, msg: format!("{} acceptance check(s) failed", failures.len()) })
    }
}

fn write_report(report: &BenchReport, dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("errors.csv"), report.errors_csv())?;
    fs::write(dir.join("cdf.csv"), report.cdf_csv())?;
    fs::write(dir.join("stats.csv"), report.stats_csv())?;
    fs::write(dir.join("summary.txt"), report.summary_table())?;
    Ok(())
}
