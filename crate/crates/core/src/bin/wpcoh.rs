use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use wpcoh::alloc::PeakAlloc;
use wpcoh::config::RunConfig;
use wpcoh::covariance::ScanAxis;
use wpcoh::pipeline::{self, AnalysisReport, Context, ScanChoice};
use wpcoh::{Error, Result};

#[global_allocator]
static ALLOC: PeakAlloc = PeakAlloc;

#[derive(Parser)]
#[command(name = "wpcoh", version, about = "Two-state wave-packet coherence simulator")]
struct Cli {
    /// Run configuration (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Skip SVG figures.
    #[arg(long, global = true)]
    no_plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Delay,
    Phase,
}

impl From<Axis> for ScanAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::Delay => ScanAxis::Delay,
            Axis::Phase => ScanAxis::Phase,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanArg {
    Delay,
    Phase,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the two-state packet and write snapshots, the phase
    /// difference and hockey-stick metrics.
    Propagate {
        /// Also run the perturbed-potential ensemble.
        #[arg(long)]
        ensemble: bool,
    },
    /// Compute model yield maps.
    Scan {
        #[arg(long, value_enum, default_value = "both")]
        axis: ScanArg,
    },
    /// Generate a synthetic event stream from a yield map.
    Synth {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Yield map to sample; computed from the model when omitted.
        #[arg(long = "yield")]
        yield_file: Option<PathBuf>,
    },
    /// Covariance map of an event file.
    Covmap {
        events: PathBuf,
        /// Scan axis; inferred from the file when omitted.
        #[arg(long, value_enum)]
        axis: Option<Axis>,
    },
    /// Fourier analysis of delay maps and cosine fits of phase maps.
    Analyze {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Run the whole chain and every acceptance check.
    Reproduce,
    /// Print the default configuration.
    DefaultConfig,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid("--threads", e.to_string()))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Command::DefaultConfig = cli.command {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let mut ctx = Context::new(cfg, &cli.out)?;
    ctx.plots = !cli.no_plots;
    info!("config hash {}", ctx.hash);
    match cli.command {
        Command::Propagate { ensemble } => {
            let s = pipeline::cmd_propagate(&ctx, ensemble)?;
            for (t, m) in &s.hockey {
                match m {
                    Some(m) => println!(
                        "t = {t:6.1} fs  R^2 = {:.5}  departure = {:.3} rad  {}",
                        m.line.r_squared,
                        m.departure,
                        if m.passes { "hockey stick" } else { "-" }
                    ),
                    None => println!("t = {t:6.1} fs  no fit"),
                }
            }
            if let Some(p) = s.persistence {
                println!("persistence {:.1}%", 100.0 * p);
            }
        }
        Command::Scan { axis } => {
            let choice = match axis {
                ScanArg::Delay => ScanChoice::Delay,
                ScanArg::Phase => ScanChoice::Phase,
                ScanArg::Both => ScanChoice::Both,
            };
            for s in pipeline::cmd_scan(&ctx, choice)? {
                println!("{}", ctx.path(&pipeline::yield_file_name(s.axis)).display());
            }
        }
        Command::Synth { axis, yield_file } => {
            let p = pipeline::cmd_synth(&ctx, axis.into(), yield_file.as_deref())?;
            println!("{}", p.display());
        }
        Command::Covmap { events, axis } => {
            let (p, map) = pipeline::cmd_covmap(&ctx, &events, axis.map(Into::into))?;
            println!("{} ({} points, {} shots)", p.display(), map.scan_values.len(), map.shots.iter().sum::<u64>());
        }
        Command::Analyze { inputs } => {
            for r in pipeline::cmd_analyze(&ctx, &inputs)? {
                match r {
                    AnalysisReport::Delay { source, spectrum } => match spectrum.dominant_period {
                        Some(p) => println!("{}: dominant period {p:.3} fs", source.display()),
                        None => println!("{}: no significant modulation", source.display()),
                    },
                    AnalysisReport::Phase { source, analysis } => println!(
                        "{}: {} of {} bins significant, {} modulation(s) per 2pi, hockey stick {}",
                        source.display(),
                        analysis.fits.iter().filter(|f| f.significant).count(),
                        analysis.fits.len(),
                        analysis.harmonic,
                        match analysis.hockey {
                            Some(h) if h.passes => "yes",
                            Some(_) => "no",
                            None => "n/a",
                        }
                    ),
                }
            }
        }
        Command::Reproduce => {
            let result = pipeline::cmd_reproduce(&ctx);
            if let Ok(text) = std::fs::read_to_string(ctx.path("summary.txt")) {
                print!("{text}");
            }
            result?;
        }
        Command::DefaultConfig => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
