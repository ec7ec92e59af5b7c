//! Command-line front end: chain files, preset generation, and curvature and
//! bound reports as JSON or CSV.
//!
//! Exit codes: 0 when everything requested holds, 1 when a checked
//! inequality or hypothesis fails, 2 on input errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ricci_core::gallery::{generate_with, Graph, Preset};
use ricci_core::Chain;

pub mod chain_file;
pub mod commands;
pub mod report;

use commands::{CliError, Outcome, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "crc",
    version,
    about = "Coarse Ricci curvature of Markov chains on finite metric spaces"
)]
pub struct Cli {
    /// Worker threads (falls back to CRC_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Print the CSV column schema of the subcommand and exit.
    #[arg(long, global = true)]
    schema: bool,
    /// Write the report (or generated chain) here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a gallery chain and write it as a chain file.
    Gen(GenArgs),
    /// κ(x, y) for all pairs, or for pairs within the geodesic scale.
    Curvature {
        file: Option<PathBuf>,
        #[arg(long)]
        geodesic: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
    },
    /// Spectrum of the averaging operator and the Poincaré inequalities.
    Spectral { file: Option<PathBuf> },
    /// Diameter, mean-distance and variance bounds.
    Bounds { file: Option<PathBuf> },
    /// Exact tails of Lipschitz functions against the concentration bound.
    Concentration {
        file: Option<PathBuf>,
        /// Base point for the distance function (default: first point).
        #[arg(long)]
        origin: Option<String>,
    },
    /// Variance and entropy inequalities for the λ-range gradient.
    Logsobolev {
        file: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Exponential concentration around an attracting point.
    Expconc {
        file: Option<PathBuf>,
        #[arg(long)]
        origin: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        /// Laplace-transform scale (default 2σ∞).
        #[arg(long)]
        s: Option<f64>,
    },
    /// Run the checks and exit non-zero if any inequality fails.
    Verify {
        file: Option<PathBuf>,
        /// Include every bound, not only curvature and spectral checks.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        origin: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Every report and check in one document.
    Report {
        file: Option<PathBuf>,
        #[arg(long)]
        geodesic: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        origin: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct GenArgs {
    /// cube, discrete_ou, multinomial, binomial, glauber, geometric_reflect,
    /// geometric_reset, mm_infty, linear_rates, quadratic_rates, pow2_jump
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    h: f64,
    /// Graph for glauber: cycle:N, path:N, complete:N or star:N.
    #[arg(long)]
    graph: Option<String>,
    /// Truncation point for chains on ℕ.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    j: Option<u32>,
    #[arg(long)]
    dt: Option<f64>,
    /// Largest stationary mass allowed beyond the truncation point.
    #[arg(long)]
    tail_tol: Option<f64>,
}

fn need<T>(v: Option<T>, flag: &str, preset: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Input(format!("{preset} needs --{flag}")))
}

fn preset(g: &GenArgs) -> Result<Preset, CliError> {
    let name = g
        .preset
        .as_deref()
        .ok_or_else(|| CliError::Input("gen needs a preset name".into()))?;
    Ok(match name {
        "cube" => Preset::Cube {
            n: need(g.n, "n", name)?,
        },
        "discrete_ou" => Preset::DiscreteOu {
            n: need(g.n, "n", name)?,
        },
        "multinomial" => Preset::Multinomial {
            n: need(g.n, "n", name)?,
            d: need(g.d, "d", name)?,
        },
        "binomial" => {
            let n = need(g.n, "n", name)?;
            match (g.p, g.lambda) {
                (Some(p), None) => Preset::Binomial { n, p },
                (None, Some(l)) => Preset::binomial_lambda(n, l),
                _ => {
                    return Err(CliError::Input(
                        "binomial needs exactly one of --p and --lambda".into(),
                    ))
                }
            }
        }
        "glauber" => {
            let graph = Graph::parse(&need(g.graph.clone(), "graph", name)?)
                .map_err(|e| CliError::Input(e.to_string()))?;
            Preset::Glauber {
                graph,
                beta: need(g.beta, "beta", name)?,
                h: g.h,
            }
        }
        "geometric_reflect" => Preset::GeometricReflect {
            p: need(g.p, "p", name)?,
            k: need(g.k, "k", name)?,
        },
        "geometric_reset" => Preset::GeometricReset {
            alpha: need(g.alpha, "alpha", name)?,
            k: need(g.k, "k", name)?,
        },
        "mm_infty" => Preset::MmInfty {
            lambda: need(g.lambda, "lambda", name)?,
            mu: need(g.mu, "mu", name)?,
            dt: g.dt,
            k: need(g.k, "k", name)?,
        },
        "linear_rates" => Preset::LinearRates {
            alpha: need(g.alpha, "alpha", name)?,
            beta: need(g.beta, "beta", name)?,
            dt: g.dt,
            k: need(g.k, "k", name)?,
        },
        "quadratic_rates" => Preset::QuadraticRates {
            a: need(g.a, "a", name)?,
            b: need(g.b, "b", name)?,
            dt: g.dt,
            k: need(g.k, "k", name)?,
        },
        "pow2_jump" => Preset::Pow2Jump {
            j: need(g.j, "j", name)?,
        },
        other => return Err(CliError::Input(format!("unknown preset {other:?}"))),
    })
}

fn schema(command: &Command) -> &'static [&'static str] {
    match command {
        Command::Gen(_) => &[],
        Command::Curvature { .. } => commands::CURVATURE_COLUMNS,
        Command::Spectral { .. } => commands::SPECTRAL_COLUMNS,
        Command::Bounds { .. } => commands::BOUNDS_COLUMNS,
        Command::Concentration { .. } => commands::CONCENTRATION_COLUMNS,
        Command::Logsobolev { .. } => commands::LOG_SOBOLEV_COLUMNS,
        Command::Expconc { .. } => commands::EXPCONC_COLUMNS,
        Command::Verify { .. } | Command::Report { .. } => commands::CHECK_COLUMNS,
    }
}

fn load(file: &Option<PathBuf>) -> Result<Chain, CliError> {
    let path = file
        .as_deref()
        .ok_or_else(|| CliError::Input("missing chain file argument".into()))?;
    chain_file::read(path).map_err(|e| CliError::Input(e.to_string()))
}

fn origin_index(chain: &Chain, origin: &Option<String>) -> Result<Option<usize>, CliError> {
    origin
        .as_deref()
        .map(|o| commands::resolve_point(chain, o))
        .transpose()
}

enum Produced {
    Report(Outcome),
    ChainFile(String),
}

fn execute(cli: &Cli) -> Result<Produced, CliError> {
    let out = match &cli.command {
        Command::Gen(g) => {
            let p = preset(g)?;
            let generated =
                generate_with(&p, g.tail_tol).map_err(|e| CliError::Input(e.to_string()))?;
            return Ok(Produced::ChainFile(chain_file::to_string(&generated.chain)));
        }
        Command::Curvature {
            file,
            geodesic,
            delta,
        } => commands::curvature(&load(file)?, *geodesic, *delta)?,
        Command::Spectral { file } => {
            let c = load(file)?;
            commands::spectral(&commands::analysis(&c)?)?
        }
        Command::Bounds { file } => {
            let c = load(file)?;
            commands::bounds(&commands::analysis(&c)?)?
        }
        Command::Concentration { file, origin } => {
            let c = load(file)?;
            let o = origin_index(&c, origin)?.unwrap_or(0);
            commands::concentration(&commands::analysis(&c)?, o)?
        }
        Command::Logsobolev { file, lambda } => {
            let c = load(file)?;
            commands::log_sobolev(&commands::analysis(&c)?, *lambda)?
        }
        Command::Expconc {
            file,
            origin,
            radius,
            s,
        } => {
            let c = load(file)?;
            let o = origin_index(&c, origin)?
                .ok_or_else(|| CliError::Input("expconc needs --origin".into()))?;
            let r = radius.ok_or_else(|| CliError::Input("expconc needs --radius".into()))?;
            commands::expconc(&commands::analysis(&c)?, o, r, *s)?
        }
        Command::Verify {
            file,
            all,
            origin,
            radius,
            lambda,
        } => {
            let c = load(file)?;
            let opts = VerifyOptions {
                all: *all,
                origin: origin_index(&c, origin)?,
                radius: *radius,
                lambda: *lambda,
            };
            let a = commands::analysis(&c)?;
            commands::checks_outcome(&c, &commands::run_checks(&a, &opts))
        }
        Command::Report {
            file,
            geodesic,
            delta,
            origin,
            radius,
            lambda,
        } => {
            let c = load(file)?;
            let opts = VerifyOptions {
                all: true,
                origin: origin_index(&c, origin)?,
                radius: *radius,
                lambda: *lambda,
            };
            let a = commands::analysis(&c)?;
            commands::report(&c, &a, *geodesic, *delta, &opts)?
        }
    };
    Ok(Produced::Report(out))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Input(e.to_string()))
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("CRC_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Input(format!("CRC_THREADS={v:?} is not a thread count"))),
        _ => Ok(None),
    }
}

fn run_parsed(cli: Cli) -> i32 {
    if cli.schema {
        let columns = schema(&cli.command);
        if columns.is_empty() {
            eprintln!("error: gen writes chain files and has no CSV schema");
            return EXIT_INPUT;
        }
        println!("{}", columns.join(","));
        return EXIT_OK;
    }
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_INPUT;
        }
    };
    let result = pool.install(|| execute(&cli));
    let produced = match result {
        Ok(p) => p,
        Err(CliError::Input(e)) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
        Err(CliError::Check(e)) => {
            eprintln!("check failed: {e}");
            return EXIT_CHECK_FAILED;
        }
    };
    let (text, failures) = match produced {
        Produced::ChainFile(text) => (text, vec![]),
        Produced::Report(o) => {
            let text = match cli.format {
                Format::Json => report::to_json(&o.doc),
                Format::Csv => report::to_csv(&o.table),
            };
            (text, o.failures)
        }
    };
    if let Err(e) = emit(cli.output.as_deref(), &text) {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    if failures.is_empty() {
        EXIT_OK
    } else {
        for f in &failures {
            eprintln!("check failed: {f}");
        }
        EXIT_CHECK_FAILED
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run_parsed(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
