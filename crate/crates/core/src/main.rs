use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use modgen::config::{parse_line_arg, ReferenceKind, RunConfig};
use modgen::export::{slice_csv, write_file};
use modgen::runner::{self, RunOptions};
use modgen::smearing::Part;
use modgen::{Error, Result};

#[derive(Parser)]
#[command(name = "modgen", version, about = "Modular generators of the free Majorana field in 1+1 dimensions")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output root, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cache directory, overriding the config and MODGEN_CACHE.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Working precision in decimal digits, overriding the config.
    #[arg(long)]
    digits: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute, smear, slice and compare every mass of a config.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Ignore cached matrices.
        #[arg(long)]
        force: bool,
    },
    /// Compare the slices of a run directory against a reference.
    Compare {
        /// A run directory or one of its mass directories.
        #[arg(long)]
        run: PathBuf,
        /// wedge, cylinder_cones, minkowski_cone or wedge_bound.
        #[arg(long)]
        reference: String,
    },
    /// Extract a slice from the smeared matrix of a mass directory.
    Slice {
        #[arg(long)]
        run: PathBuf,
        /// diagonal:<offset>, antidiagonal:<center> or cross:<offset>.
        #[arg(long)]
        line: String,
        #[arg(long, value_enum, default_value = "full")]
        part: PartArg,
        /// Output CSV (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the resolved settings of a config as JSON.
    Info {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PartArg {
    Full,
    Sym,
    Skew,
}

impl From<PartArg> for Part {
    fn from(p: PartArg) -> Self {
        match p {
            PartArg::Full => Part::Full,
            PartArg::Sym => Part::Sym,
            PartArg::Skew => Part::Skew,
        }
    }
}

fn load(args: &ConfigArgs) -> Result<RunConfig> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(cache) = &args.cache {
        config.cache_dir = cache.clone();
    }
    if let Some(d) = args.digits {
        if d == 0 {
            return Err(Error::Config("--digits must be positive".into()));
        }
        config.digits = Some(d);
    }
    Ok(config)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, force } => {
            let config = load(&config)?;
            let runs = runner::run(&config, &RunOptions { force })?;
            for r in &runs {
                let inv = &r.manifest.invariants;
                println!(
                    "mass {}: {} (cache {}, invariants {})",
                    r.mass,
                    r.dir.display(),
                    if r.manifest.cache_hit { "hit" } else { "miss" },
                    if inv.hold { "hold" } else { "FAIL" }
                );
            }
        }
        Command::Compare { run, reference } => {
            let kind = ReferenceKind::parse(&reference)?;
            print_json(&runner::compare(&run, kind)?);
        }
        Command::Slice { run, line, part, out } => {
            let s = runner::slice_from_run(&run, parse_line_arg(&line)?, part.into())?;
            let csv = slice_csv(&s);
            match out {
                Some(path) => write_file(&path, csv.as_bytes())?,
                None => print!("{csv}"),
            }
        }
        Command::Info { config } => print_json(&runner::info(&load(&config)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
