use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ncpop_ctp::cgal::CgalConfig;
use ncpop_ctp::ctp::CertifyOptions;
use ncpop_ctp::generator::{generate, GenKind, GenSpec};
use ncpop_ctp::instance::InstanceFile;
use ncpop_ctp::pipeline::{self, Mode, ReportRow, Sparsity};
use ncpop_ctp::standard_form;
use ncpop_ctp::{Error, Problem};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_UNCERTIFIED: u8 = 3;

#[derive(Parser)]
#[command(name = "ncpop", version, about = "Constant-trace moment relaxations for noncommutative polynomial optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance
    Gen(GenArgs),
    /// Compute and verify a constant-trace certificate
    Ctp(CtpArgs),
    /// Solve the relaxation with the conditional-gradient solver
    Solve(SolveArgs),
    /// Report SDP sizes without solving
    Count(CountArgs),
    /// Run the benchmark table configurations
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Ball,
    Polydisc,
    Sparse,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Eig,
    Trace,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Eig => Mode::Eig,
            ModeArg::Trace => Mode::Trace,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    /// Number of equalities (default: table rule)
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, value_enum, default_value = "ball")]
    kind: KindArg,
    /// Clique step for sparse instances
    #[arg(long)]
    u: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout if omitted)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RelaxArgs {
    /// Instance JSON file
    instance: PathBuf,
    #[arg(long = "order", short = 'k')]
    order: usize,
    #[arg(long, value_enum, default_value = "eig")]
    mode: ModeArg,
    /// Use cliques, detecting them if the instance has none
    #[arg(long, conflicts_with = "dense")]
    sparse: bool,
    /// Ignore cliques in the instance
    #[arg(long)]
    dense: bool,
    /// Prefer the closed-form certificate over the LP
    #[arg(long)]
    closed_form: bool,
}

impl RelaxArgs {
    fn load(&self) -> Result<Problem, Error> {
        let p = InstanceFile::read(&self.instance)?.to_problem()?;
        let s = if self.dense {
            Sparsity::Dense
        } else if self.sparse {
            Sparsity::Detect
        } else {
            Sparsity::AsGiven
        };
        pipeline::apply_sparsity(&p, s)
    }

    fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            prefer_lp: !self.closed_form,
            ..CertifyOptions::default()
        }
    }
}

#[derive(Args)]
struct CtpArgs {
    #[command(flatten)]
    relax: RelaxArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    relax: RelaxArgs,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Also write the report row (CSV if the extension is .csv, JSON otherwise)
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the standard-form SDP as text
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Args)]
struct CountArgs {
    #[command(flatten)]
    relax: RelaxArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the standard-form SDP as text
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    table: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest relaxation order to run
    #[arg(long, default_value_t = 2)]
    max_order: usize,
    /// Also solve each configuration
    #[arg(long)]
    solve: bool,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 200_000)]
    max_iters: usize,
    /// Write the rows as CSV
    #[arg(long)]
    report: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotCertified(_) | Error::PatternNotRecognized | Error::CertificateMismatch(_) => EXIT_UNCERTIFIED,
        Error::EigenNonConvergence(_) | Error::NonFiniteGradient(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn print_rows(rows: &[ReportRow], format: Format) -> Result<(), Error> {
    let stdout = std::io::stdout();
    match format {
        Format::Csv => pipeline::write_csv(rows, stdout.lock()),
        Format::Json => {
            let mut out = stdout.lock();
            for r in rows {
                writeln!(out, "{}", serde_json::to_string(r)?)?;
            }
            Ok(())
        }
    }
}

fn write_report(path: &Path, row: &ReportRow) -> Result<(), Error> {
    if path.extension().is_some_and(|e| e == "csv") {
        pipeline::write_csv(std::slice::from_ref(row), std::fs::File::create(path)?)
    } else {
        std::fs::write(path, serde_json::to_string_pretty(row)? + "\n")?;
        Ok(())
    }
}

fn export(path: &Path, prep: &pipeline::Prepared) -> Result<(), Error> {
    let sdp = prep.assemble()?;
    std::fs::write(path, standard_form::to_text(&sdp))?;
    Ok(())
}

fn cmd_gen(a: &GenArgs) -> Result<u8, Error> {
    let kind = match a.kind {
        KindArg::Ball => GenKind::Ball,
        KindArg::Polydisc => GenKind::Polydisc,
        KindArg::Sparse => GenKind::Sparse,
    };
    let g = generate(&GenSpec { n: a.n, l: a.l, kind, u: a.u, seed: a.seed })?;
    let file = InstanceFile::from_generated(&g);
    match &a.output {
        Some(path) => file.write(path)?,
        None => println!("{}", file.to_json()?),
    }
    Ok(0)
}

fn cmd_ctp(a: &CtpArgs) -> Result<u8, Error> {
    let p = a.relax.load()?;
    let prep = pipeline::prepare(&p, a.relax.order, a.relax.mode.into(), &a.relax.certify_options())?;
    let summary = pipeline::summarize_certificate(&prep, a.seed)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    let tol = a.relax.certify_options().tolerance;
    if summary.residual > tol || summary.sampled_residual.is_some_and(|s| s > tol) {
        eprintln!("CTP not certified: residual {:.3e} above {tol:e}", summary.residual);
        return Ok(EXIT_UNCERTIFIED);
    }
    Ok(0)
}

fn cmd_count(a: &CountArgs) -> Result<u8, Error> {
    let p = a.relax.load()?;
    let start = std::time::Instant::now();
    let prep = pipeline::prepare(&p, a.relax.order, a.relax.mode.into(), &a.relax.certify_options())?;
    let row = prep.row(None, None, start.elapsed().as_secs_f64());
    if let Some(path) = &a.export {
        export(path, &prep)?;
    }
    print_rows(&[row], a.format)?;
    Ok(0)
}

fn cmd_solve(a: &SolveArgs) -> Result<u8, Error> {
    let p = a.relax.load()?;
    let cfg = CgalConfig {
        eps: a.eps,
        max_iters: a.max_iters,
        seed: a.seed,
        ..CgalConfig::default()
    };
    let mode = a.relax.mode.into();
    if let Some(path) = &a.export {
        let prep = pipeline::prepare(&p, a.relax.order, mode, &a.relax.certify_options())?;
        export(path, &prep)?;
    }
    let out = pipeline::solve(&p, a.relax.order, mode, &cfg, &a.relax.certify_options())?;
    print_rows(std::slice::from_ref(&out.row), a.format)?;
    if let Some(path) = &a.report {
        write_report(path, &out.row)?;
    }
    log::info!(
        "{:?} after {} iterations, dual bound {:.6}",
        out.report.status,
        out.report.iterations,
        out.report.dual_bound
    );
    if out.converged() {
        Ok(0)
    } else {
        eprintln!(
            "solver stopped at the iteration limit ({} iterations, residual {:.3e})",
            out.report.iterations, out.report.residual
        );
        Ok(EXIT_NUMERICAL)
    }
}

fn cmd_bench(a: &BenchArgs) -> Result<u8, Error> {
    let opts = CertifyOptions::default();
    let mut rows = Vec::new();
    let mut code = 0;
    for config in pipeline::bench_configs(a.table, a.seed)? {
        if config.k > a.max_order {
            continue;
        }
        let eps = a.eps.unwrap_or(if a.table == 3 { 1e-3 } else { 1e-4 });
        let cfg = CgalConfig { eps, max_iters: a.max_iters, seed: a.seed, ..CgalConfig::default() };
        let res = pipeline::run_bench(&config, a.solve.then_some(&cfg), &opts)?;
        eprintln!(
            "n={} k={} smax={} (expected {}) zeta={} (expected {}) {}",
            res.row.n,
            res.row.k,
            res.row.smax,
            config.expected_smax,
            res.row.zeta,
            config.expected_zeta,
            if res.structure_matches { "match" } else { "MISMATCH" }
        );
        if !res.structure_matches {
            code = EXIT_NUMERICAL;
        }
        if res.converged == Some(false) {
            code = EXIT_NUMERICAL;
        }
        rows.push(res.row);
    }
    print_rows(&rows, Format::Csv)?;
    if let Some(path) = &a.report {
        pipeline::write_csv(&rows, std::fs::File::create(path)?)?;
    }
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Ctp(a) => cmd_ctp(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Count(a) => cmd_count(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
