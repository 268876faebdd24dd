#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metastable_core::metastable::metastable_all;
use metastable_core::verify::{compare_rows, TransientSolverConfig};
use metastable_core::{ChainSpec, Error, Hierarchy, Method, TimeScale};

const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;
const EXIT_CRITICAL: u8 = 4;
const EXIT_VERIFY: u8 = 5;

#[derive(Parser)]
#[command(name = "metastable", version, about = "Metastable distributions of exponentially perturbed Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the hierarchy of reduced chains.
    Hierarchy {
        #[command(flatten)]
        common: Common,
    },
    /// Compute the metastable distribution at a time scale.
    Metastable {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        query: Query,
    },
    /// Compare predictions with numerics along an epsilon ladder.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        query: Query,
        /// Comma-separated, strictly decreasing epsilon values.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, value_enum, default_value_t = MethodArg::Expm)]
        method: MethodArg,
        /// Monte Carlo paths per start state.
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maximum jumps per Monte Carlo path.
        #[arg(long, default_value_t = 10_000_000)]
        jump_cap: u64,
        /// Tolerance on the final-ladder max error.
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
}

#[derive(Args)]
struct Common {
    /// Chain file (JSON).
    spec: PathBuf,
    /// Fill missing rates with a negligible exponential rate.
    #[arg(long)]
    repair: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Query {
    /// Time scale `C,B,LAMBDA` meaning C·ε^B·e^(LAMBDA/ε).
    #[arg(long, allow_hyphen_values = true)]
    time: String,
    /// Start state label, or `all`.
    #[arg(long, default_value = "all")]
    from: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Expm,
    Mc,
}

enum Failure {
    Core(Error),
    Io(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::CriticalTimeScale(_) => EXIT_CRITICAL,
        Error::NonPositiveCoefficient(_)
        | Error::NonFinite
        | Error::Overflow { .. }
        | Error::Validation(_)
        | Error::Parse(_)
        | Error::LadderOutOfRange(_)
        | Error::ScalingOverflow(_)
        | Error::InvalidArgument(_) => EXIT_INPUT,
        _ => EXIT_INTERNAL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Hierarchy { common } => {
            let (h, _) = load(&common)?;
            let report = h.report();
            let body = match common.format {
                Format::Json => json(&report),
                Format::Text => report.render_text(),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["rank", "from", "to", "alpha", "beta", "gamma"])?;
                    for rk in &report.ranks {
                        for q in &rk.rates {
                            w.serialize((rk.rank, q.from, q.to, q.order.alpha, q.order.beta, q.order.gamma))?;
                        }
                    }
                    csv_string(w)?
                }
            };
            emit(&common, &body)
        }
        Command::Metastable { common, query } => {
            let (h, gamma) = load(&common)?;
            let t = time_scale(&query, gamma)?;
            let starts = starts(&h.spec, &query.from)?;
            let nu = metastable_all(&h, &t).map_err(|e| critical_table(&h, e))?;
            let report = nu.report(&h, Some(&starts));
            let body = match common.format {
                Format::Json => json(&report),
                Format::Text => report.render_text(),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["start", "state", "nu"])?;
                    for (start, row) in report.starts.iter().zip(&report.nu) {
                        for (state, p) in report.states.iter().zip(row) {
                            w.serialize((start, state, p))?;
                        }
                    }
                    csv_string(w)?
                }
            };
            emit(&common, &body)
        }
        Command::Verify {
            common,
            query,
            eps,
            method,
            paths,
            seed,
            jump_cap,
            tol,
        } => {
            let (h, gamma) = load(&common)?;
            let t = time_scale(&query, gamma)?;
            let starts = starts(&h.spec, &query.from)?;
            let nu = metastable_all(&h, &t).map_err(|e| critical_table(&h, e))?;
            let cfg = TransientSolverConfig {
                method: match method {
                    MethodArg::Expm => Method::Expm,
                    MethodArg::Mc => Method::MonteCarlo,
                },
                eps_ladder: eps,
                paths,
                jump_cap,
                rng_seed: seed,
            };
            let report = compare_rows(&h, &t, &nu, &cfg, &starts)?;
            for p in &report.points {
                if p.capped_paths > 0 {
                    eprintln!("warning: eps = {}: {} paths hit the jump cap", p.eps, p.capped_paths);
                }
                if p.underflow > 0 {
                    eprintln!("warning: eps = {}: {} rates underflow to zero", p.eps, p.underflow);
                }
            }
            let body = match common.format {
                Format::Json => json(&report),
                Format::Text => report.render_text(),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    for row in report.csv_rows() {
                        w.serialize(row)?;
                    }
                    csv_string(w)?
                }
            };
            emit(&common, &body)?;
            if !(report.final_max_error <= tol) {
                return Err(Failure::Verify(format!(
                    "final max error {:.3e} exceeds tolerance {tol}",
                    report.final_max_error
                )));
            }
            if !report.monotone {
                return Err(Failure::Verify("errors increase along the epsilon ladder".into()));
            }
            Ok(())
        }
    }
}

/// The hierarchy and, when rates were repaired, the repair exponent `Γ`.
fn load(common: &Common) -> Result<(Hierarchy, Option<f64>), Failure> {
    let text = fs::read_to_string(&common.spec)
        .map_err(|e| Failure::Io(format!("{}: {e}", common.spec.display())))?;
    let mut spec = ChainSpec::from_json(&text)?;
    let zeros = spec.zero_rates();
    let mut repaired = None;
    if common.repair && !zeros.is_empty() {
        let gamma = spec.repair_gamma();
        repaired = Some(gamma);
        spec = spec.repair_zero_rates();
        eprintln!(
            "repair: filled {} missing rate(s) with exp(-{gamma}/eps)",
            zeros.len()
        );
    }
    if !common.repair && !zeros.is_empty() {
        eprintln!("hint: pass --repair to fill missing rates with a negligible rate");
    }
    Ok((Hierarchy::build(&spec)?, repaired))
}

fn time_scale(query: &Query, repair_gamma: Option<f64>) -> Result<TimeScale, Failure> {
    let t: TimeScale = query.time.parse()?;
    if let Some(gamma) = repair_gamma {
        if t.lambda() >= gamma {
            eprintln!(
                "warning: time scale e^({}/eps) is not below the repair rate scale e^({gamma}/eps); \
                 repaired edges may influence the result",
                t.lambda()
            );
        }
    }
    Ok(t)
}

fn starts(spec: &ChainSpec, from: &str) -> Result<Vec<usize>, Failure> {
    if from == "all" {
        return Ok((0..spec.len()).collect());
    }
    spec.index_of(from)
        .map(|i| vec![i])
        .ok_or_else(|| Failure::Core(Error::InvalidArgument(format!("unknown state label {from:?}"))))
}

/// Prints the offending `(rank, cluster)` pairs before propagating.
fn critical_table(h: &Hierarchy, e: Error) -> Failure {
    if let Error::CriticalTimeScale(entries) = &e {
        eprintln!("critical time scale; commensurate with:");
        eprintln!("  rank  cluster  T");
        for c in entries {
            eprintln!(
                "  {:>4}  {{{}}}  {}",
                c.rank,
                h.cluster_labels(c.rank, c.cluster).join(","),
                c.inverse_rate
            );
        }
    }
    Failure::Core(e)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, Failure> {
    let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Io(e.to_string()))
}

fn emit(common: &Common, body: &str) -> Result<(), Failure> {
    match &common.output {
        Some(path) => fs::write(path, body)?,
        None => io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}
