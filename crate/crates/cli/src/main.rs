use std::fs;
use std::io::{self as stdio, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relirate::reliability::{required_cases, required_cases_cv};
use relirate_cli::commands::{
    run_aggregate, run_assess, run_compare, run_info, run_merge_geojson, run_simulate, GeoSelection,
};
use relirate_cli::io::{self, SummaryRow};
use relirate_cli::{read_counts, run_fit, CliError, CliResult, FitOptions, ModelKind};

#[derive(Parser)]
#[command(name = "relirate", version, about = "Reliability of small-area event rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the spatial model to every stratum-year of a counts file.
    Fit(FitArgs),
    /// Conjugate assessment of each record under a fixed beta prior.
    Assess(AssessArgs),
    /// Smallest event count that makes a rate reliable.
    RequiredCases(RequiredArgs),
    /// Prior-case equivalent summary of a draws file.
    Info(InfoArgs),
    /// Join a summary onto GeoJSON features.
    MergeGeojson(MergeArgs),
    /// Write synthetic counts.
    Simulate(SimulateArgs),
    /// Reliable share of regions after pooling years.
    Aggregate(AggregateArgs),
    /// Side-by-side table of a standard and a restricted summary.
    Compare(CompareArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    counts: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    #[arg(long, value_enum, default_value = "standard")]
    model: ModelKind,
    #[arg(long, default_value_t = 5.0)]
    a0_max: f64,
    #[arg(long, default_value_t = 3)]
    m0: u32,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
    #[arg(long, default_value_t = 50_000)]
    burnin: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "RELIRATE_THREADS", default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
    /// Restrict to these strata (repeatable).
    #[arg(long = "stratum")]
    strata: Vec<String>,
    /// Restrict to these years (repeatable).
    #[arg(long = "year")]
    years: Vec<i32>,
    /// Skip the per-chain draw dumps.
    #[arg(long)]
    no_draws: bool,
    /// Keep the current value (and count a stall) when constrained rejection runs
    /// out of attempts, instead of drawing from the truncated conditional.
    #[arg(long)]
    no_exact_truncation: bool,
}

#[derive(Args)]
struct AssessArgs {
    #[arg(long)]
    counts: PathBuf,
    /// Prior cases.
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    /// Prior rate; defaults to each stratum's pooled crude rate.
    #[arg(long)]
    prior_rate: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RequiredArgs {
    #[arg(long)]
    pi0: f64,
    #[arg(long)]
    a: f64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Fixed number of trials; otherwise trials scale with the events.
    #[arg(long)]
    n: Option<u64>,
    /// Use the coefficient-of-variation rule.
    #[arg(long)]
    cv: bool,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    draws: PathBuf,
    #[arg(long, default_value_t = 3)]
    m0: u32,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(long)]
    summary: PathBuf,
    #[arg(long)]
    geojson: PathBuf,
    #[arg(long, default_value = "GEOID")]
    key: String,
    #[arg(long)]
    stratum: Option<String>,
    #[arg(long)]
    year: Option<i32>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    scenario: Option<PathBuf>,
    /// Graph for the scenario; defaults to the bundled county graph.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// The bundled four-stratum, ten-year county fixture.
    #[arg(long)]
    fixture: bool,
    #[arg(long, default_value_t = 2019)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    counts: PathBuf,
    /// Window length in years (repeatable).
    #[arg(long = "window", required = true)]
    windows: Vec<usize>,
    #[arg(long, default_value_t = 5.0)]
    a0: f64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    standard: PathBuf,
    #[arg(long)]
    restricted: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit<F: FnOnce(&mut dyn Write) -> CliResult<()>>(out: Option<&Path>, f: F) -> CliResult<()> {
    match out {
        Some(p) => {
            let mut buf = Vec::new();
            f(&mut buf)?;
            fs::write(p, buf).map_err(|e| CliError::io(p, e))
        }
        None => {
            let stdout = stdio::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => {
            let opts = FitOptions {
                counts: a.counts,
                edges: a.edges,
                model: a.model,
                a0_max: a.a0_max,
                m0: a.m0,
                level: a.level,
                iters: a.iters,
                burnin: a.burnin,
                thin: a.thin,
                seed: a.seed,
                threads: a.threads.max(1),
                out: a.out,
                strata: a.strata,
                years: a.years,
                write_draws: !a.no_draws,
                exact_truncation: !a.no_exact_truncation,
            };
            let outcome = run_fit(&opts)?;
            eprintln!(
                "fit: {} chains, {} rows -> {}",
                outcome.manifest.chains.len(),
                outcome.summary.len(),
                opts.out.display()
            );
            Ok(())
        }
        Command::Assess(a) => {
            let data = read_counts(&a.counts)?;
            let rows = run_assess(&data, a.a, a.prior_rate, a.level)?;
            emit(a.out.as_deref(), |w| io::write_rows(w, &rows))
        }
        Command::RequiredCases(a) => {
            let k = if a.cv { required_cases_cv(a.pi0, a.a, a.n)? } else { required_cases(a.pi0, a.a, a.level, a.n)? };
            match k {
                Some(k) => println!("{k}"),
                None => println!("none"),
            }
            Ok(())
        }
        Command::Info(a) => {
            let row = run_info(&a.draws, a.m0)?;
            emit(None, |w| io::write_rows(w, &[row]))
        }
        Command::MergeGeojson(a) => {
            let select = GeoSelection { stratum: a.stratum, year: a.year, model: a.model };
            let (merged, report) = run_merge_geojson(&a.summary, &a.geojson, &a.key, &select)?;
            let bytes = serde_json::to_vec_pretty(&merged).expect("geojson serializes");
            fs::write(&a.out, bytes).map_err(|e| CliError::io(&a.out, e))?;
            eprintln!("merged {} features", report.matched);
            if !report.unmatched_features.is_empty() {
                eprintln!("features without a summary row: {}", report.unmatched_features.join(", "));
            }
            if !report.unmatched_rows.is_empty() {
                eprintln!("summary rows without a feature: {}", report.unmatched_rows.join(", "));
            }
            Ok(())
        }
        Command::Simulate(a) => {
            let records = match &a.scenario {
                Some(s) => run_simulate(s, a.edges.as_deref())?,
                None => relirate_sim::pa::fixture(a.seed)?,
            };
            emit(Some(&a.out), |w| io::write_counts(w, &records))
        }
        Command::Aggregate(a) => {
            let data = read_counts(&a.counts)?;
            let rows = run_aggregate(&data, &a.windows, a.a0, a.level)?;
            emit(a.out.as_deref(), |w| io::write_rows(w, &rows))
        }
        Command::Compare(a) => {
            let s: Vec<SummaryRow> = io::read_rows(&a.standard)?;
            let r: Vec<SummaryRow> = io::read_rows(&a.restricted)?;
            let rows = run_compare(&s, &r)?;
            emit(a.out.as_deref(), |w| io::write_rows(w, &rows))
        }
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
