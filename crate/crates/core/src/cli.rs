//! Command-line entry point. Exit codes: 0 all passed, 1 test failures,
//! 2 test errors, 64 usage error, 70 internal fault.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::ci::{self, CiConfig, Daemon, RunState, Store};
use crate::coverage::CoverageSession;
use crate::report::{self, ResultsDocument};
use crate::results::{elapsed_ms, now};
use crate::rungen;
use crate::slrunner::{slunit_testrunner, RunnerConfig};
use crate::testdsl::Runtime;

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Debug, Parser)]
#[command(name = "heterotest", version, about = "Run model and DSL test suites, report results, poll repositories")]
struct Cli {
    /// More log output (repeat for debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Output file or directory, depending on the subcommand
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan DSL sources and write a runner manifest
    Gen {
        #[arg(long, required = true, num_args = 1..)]
        src: Vec<PathBuf>,
    },
    /// Generate DSL adapter suites for every model suite in a directory
    Adapt {
        #[arg(long)]
        models: PathBuf,
    },
    /// Execute a runner manifest and publish results
    Run(RunArgs),
    /// Execute a manifest with statement coverage enabled
    Cover(RunArgs),
    /// Run model suites directly
    Slrun {
        #[arg(long)]
        testpath: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        suites: Vec<String>,
        #[arg(long, default_value = "slunit")]
        report_name: String,
        #[arg(long, default_value_t = 1)]
        verbosity: u32,
    },
    /// Render the HTML report for an existing results file
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        verbosity: u32,
    },
    /// Poll the configured components and run the pipeline on change
    Ci {
        #[arg(long)]
        config: PathBuf,
        /// Single poll and run, then exit
        #[arg(long)]
        once: bool,
    },
    /// List virtual revisions and write the store index page
    History {
        #[arg(long, conflicts_with = "store", required_unless_present = "store")]
        config: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "heterotest")]
    report_name: String,
    #[arg(long, default_value_t = 1)]
    verbosity: u32,
    /// Measure statement coverage of DSL sources
    #[arg(long)]
    cover: bool,
}

struct Usage(String);

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    init_logging(cli.verbose);
    match execute(cli) {
        Ok(Ok(code)) => code,
        Ok(Err(Usage(msg))) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INTERNAL
        }
    }
}

fn need_out(out: Option<PathBuf>, what: &str) -> Result<PathBuf, Usage> {
    out.ok_or_else(|| Usage(format!("`{what}` requires --out")))
}

fn execute(cli: Cli) -> Result<Result<i32, Usage>> {
    let out = cli.out;
    Ok(Ok(match cli.command {
        Command::Gen { src } => {
            let out = match need_out(out, "gen") {
                Ok(o) => o,
                Err(u) => return Ok(Err(u)),
            };
            let m = rungen::scan(&src);
            for d in &m.diagnostics {
                eprintln!("warning: {}: {}", d.file.display(), d.message);
            }
            rungen::generate_runner(&m, &out).with_context(|| format!("cannot write {}", out.display()))?;
            log::info!("{} tests listed in {}", m.entries.len(), out.display());
            0
        }
        Command::Adapt { models } => {
            let out = match need_out(out, "adapt") {
                Ok(o) => o,
                Err(u) => return Ok(Err(u)),
            };
            if !models.is_dir() {
                return Ok(Err(Usage(format!("{} is not a directory", models.display()))));
            }
            let o = rungen::generate_adapters(&models, &out)?;
            for (f, msg) in &o.diagnostics {
                eprintln!("warning: skipped {}: {msg}", f.display());
            }
            log::info!("{} adapter files written", o.written.len());
            0
        }
        Command::Run(args) => match need_out(out, "run") {
            Ok(o) => run_manifest(&args, &o, args.cover)?,
            Err(u) => return Ok(Err(u)),
        },
        Command::Cover(args) => match need_out(out, "cover") {
            Ok(o) => run_manifest(&args, &o, true)?,
            Err(u) => return Ok(Err(u)),
        },
        Command::Slrun {
            testpath,
            suites,
            report_name,
            verbosity,
        } => {
            let summary = slunit_testrunner(&RunnerConfig {
                testpath,
                testsuites: suites,
                report_name,
                verbosity,
                out_dir: out,
            })?;
            summary.exit_code()
        }
        Command::Report { input, verbosity } => {
            let out = match need_out(out, "report") {
                Ok(o) => o,
                Err(u) => return Ok(Err(u)),
            };
            let doc = report::read_results_xml(&input)?;
            let name = report::report_name_from_results(&input);
            report::render_html(&doc, &name, verbosity, &out)?;
            0
        }
        Command::Ci { config, once } => {
            let cfg = CiConfig::load(&config)?;
            let daemon = Daemon::new(cfg)?;
            if once {
                for run in daemon.tick()?.runs {
                    log::info!("vid {} finished", run.vid);
                }
                0
            } else {
                daemon.run()?;
                0
            }
        }
        Command::History { config, store } => {
            let root = match (config, store) {
                (_, Some(s)) => s,
                (Some(c), None) => CiConfig::load(&c)?.store,
                (None, None) => return Ok(Err(Usage("history requires --config or --store".into()))),
            };
            let store = Store::open(&root)?;
            let rows = ci::history(&store)?;
            for r in &rows {
                let state = match (&r.state, &r.run) {
                    (RunState::Running, _) | (_, None) => "running".to_string(),
                    (RunState::Complete, Some(run)) => {
                        let c = run.counts.unwrap_or_default();
                        format!("{}/{}/{}", c.passed, c.failed, c.error)
                    }
                };
                println!("{}\t{}\t{state}", r.revision.vid, r.revision.tuple());
            }
            ci::write_index(&store)?;
            0
        }
    }))
}

fn run_manifest(args: &RunArgs, out: &Path, cover: bool) -> Result<i32> {
    let manifest = rungen::read_manifest(&args.manifest)?;
    let started = now();
    let start = Instant::now();
    let session = Arc::new(CoverageSession::new());
    let mut rt = if cover {
        Runtime::with_coverage(session.clone())
    } else {
        Runtime::new()
    };
    let suites = rungen::execute_manifest(&manifest, &mut rt);
    for d in session.diagnostics() {
        log::debug!("{d}");
    }
    let doc = ResultsDocument {
        revision: None,
        timestamp: started,
        duration_ms: elapsed_ms(start),
        suites,
        coverage: cover.then(|| session.summarize().map),
    };
    report::publish(&doc, &args.report_name, args.verbosity, out)
        .with_context(|| format!("cannot write report to {}", out.display()))?;
    Ok(doc.counts().exit_code())
}
