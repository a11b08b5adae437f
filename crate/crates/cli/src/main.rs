//! `chanent`: batch front end for channel entropies, convex roofs, and the
//! invariant suite. Reads a JSON job, prints a JSON (or table) report.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 when `verify` finds a
//! failing criterion.

mod input;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use chanent::accinfo::{benatti_bracket, ensemble_from_subalgebra, holevo_check, BracketReport, HolevoReport};
use chanent::channel::block_entropy;
use chanent::ensemble::{mutual_entropy, mutual_entropy_relative};
use chanent::oracle::{
    block_example_analyze, block_example_decomposition, qubit_r, qubit_r_series, BlockDecomposition,
    BlockExampleData,
};
use chanent::roof::{affinity_certificate, solve_r, zero_entropy_structure, AffinityReport, ZeroEntropyReport};
use chanent::state::{relative_entropy, von_neumann_entropy};
use chanent::verify::{self, SuiteReport, VerifyConfig};
use chanent::{CMatrix, PureState, ReductionChannel, RoofResult, SolverConfig, Tolerances, C64};

use input::{AccinfoJob, BlockJob, EntropyJob, MutualJob, ReduceJob, RoofJob, Source};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),

    #[error("{origin}:{line}:{column}: invalid input at `{path}`: {message}")]
    Json {
        origin: String,
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(#[from] chanent::Error),

    #[error("{0}")]
    Usage(String),
}

#[derive(Parser, Debug)]
#[command(name = "chanent", version, about = "Channel entropy via convex roofs")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Validation tolerance for Hermiticity, trace, norm and positivity.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Solver restarts (overrides the job file).
    #[arg(long, global = true)]
    restarts: Option<usize>,

    /// Seed for random restarts and sampling (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Decomposition length; defaults to n² for input dimension n.
    #[arg(long, global = true)]
    max_length: Option<usize>,

    /// Sample count: affinity recombinations for `roof`, measurements for
    /// `accinfo` and `verify`.
    #[arg(long, global = true)]
    samples: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct JobInput {
    /// Job file (`-` reads standard input).
    #[arg(long, short)]
    input: Option<PathBuf>,

    /// Job JSON given inline.
    #[arg(long)]
    json: Option<String>,
}

impl JobInput {
    fn source(&self) -> Source {
        match (&self.input, &self.json) {
            (_, Some(text)) => Source::Inline(text.clone()),
            (Some(p), None) if p.as_os_str() == "-" => Source::Stdin,
            (Some(p), None) => Source::File(p.clone()),
            (None, None) => unreachable!("clap requires one input"),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Von Neumann entropy of a state, optionally relative to a reference state.
    Entropy(JobInput),
    /// Reduced density operator of a state under a channel.
    Reduce(JobInput),
    /// Mutual entropy of an ensemble through a channel.
    Mutual(JobInput),
    /// Convex roof R, channel entropy H, and their certificates.
    Roof {
        #[command(flatten)]
        job: JobInput,
        /// Write one JSON line per restart to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Closed-form roof of a qubit under the diagonal subalgebra.
    QubitOracle {
        /// Real part of the off-diagonal entry.
        #[arg(long, allow_negative_numbers = true)]
        z: f64,
        /// Imaginary part of the off-diagonal entry.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        z_im: f64,
        /// Also evaluate the series truncated after this many terms.
        #[arg(long)]
        terms: Option<usize>,
    },
    /// Explicit pure decomposition for a block compression M_{n+1} -> M_n + M_1.
    BlockOracle {
        #[command(flatten)]
        job: JobInput,
        /// Compare the candidate value with the solver.
        #[arg(long)]
        solve: bool,
    },
    /// Accessible-information bracket and Holevo bound for a commutative subalgebra.
    Accinfo(JobInput),
    /// Run the invariant suite.
    Verify {
        /// Optional suite configuration file.
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Cap every per-criterion instance count.
        #[arg(long)]
        cases: Option<usize>,
        /// Comma-separated criterion ids (default: all).
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

impl Global {
    fn tolerances(&self) -> Tolerances {
        self.tol.map_or_else(Tolerances::default, Tolerances::with_validation)
    }

    fn solver(&self, from_job: Option<SolverConfig>) -> SolverConfig {
        let mut cfg = from_job.unwrap_or_default();
        if let Some(r) = self.restarts {
            cfg.restarts = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.max_length.is_some() {
            cfg.max_length = self.max_length;
        }
        if let Some(t) = self.tol {
            cfg.tol = Tolerances::with_validation(t);
        }
        cfg
    }
}

#[derive(Serialize)]
struct RelativeReport {
    #[serde(with = "chanent::io::extended_real")]
    value: f64,
    reference_entropy: f64,
}

#[derive(Serialize)]
struct EntropyReport {
    entropy: f64,
    dim: usize,
    rank: usize,
    purity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative: Option<RelativeReport>,
}

#[derive(Serialize)]
struct ReduceReport {
    block_dims: Vec<usize>,
    #[serde(with = "chanent::io::matrix_list")]
    blocks: Vec<CMatrix>,
    entropy: f64,
}

#[derive(Serialize)]
struct MutualReport {
    mutual_entropy: f64,
    /// The same quantity as a weighted sum of relative entropies.
    relative_form: f64,
    reduced_entropy: f64,
    members: usize,
}

#[derive(Serialize)]
struct RoofReport {
    #[serde(flatten)]
    result: RoofResult,
    affinity: AffinityReport,
    zero_entropy: Option<ZeroEntropyReport>,
}

#[derive(Serialize)]
struct SeriesReport {
    terms: usize,
    value: f64,
    error: f64,
}

#[derive(Serialize)]
struct QubitReport {
    z: [f64; 2],
    modulus: f64,
    q: f64,
    #[serde(rename = "value_R")]
    value_r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    series: Option<SeriesReport>,
}

#[derive(Serialize)]
struct SolverComparison {
    #[serde(rename = "value_R")]
    value_r: f64,
    /// `candidate - solver R`.
    gap: f64,
}

#[derive(Serialize)]
struct BlockReport {
    data: BlockExampleData,
    invariant_violations: Vec<String>,
    decomposition: Option<BlockDecomposition>,
    construction_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolverComparison>,
}

#[derive(Serialize)]
struct AccinfoReport {
    #[serde(flatten)]
    bracket: BracketReport,
    holevo: HolevoReport,
    weights: Vec<f64>,
}

const ROOF_AFFINITY_SAMPLES: usize = 20;
const ACCINFO_SAMPLES: usize = 256;

/// A serialized report plus whether `verify` found failures.
struct Outcome {
    json: String,
    table: Option<String>,
    failed: bool,
}

fn report<T: Serialize>(value: &T) -> Result<Outcome, CliError> {
    Ok(Outcome {
        json: chanent::io::to_report_json(value)?,
        table: None,
        failed: false,
    })
}

fn write_trace(path: &std::path::Path, result: &RoofResult) -> Result<(), CliError> {
    let mut lines = String::new();
    for r in &result.restarts {
        lines.push_str(&serde_json::to_string(r).map_err(|e| CliError::Io(e.to_string()))?);
        lines.push('\n');
    }
    std::fs::write(path, lines).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let g = &cli.global;
    let tol = g.tolerances();
    match &cli.command {
        Command::Entropy(job) => {
            let src = job.source();
            let job: EntropyJob = input::parse(&src.read()?, &src)?;
            let rho = job.state.density(&tol)?;
            let relative = match job.reference {
                Some(r) => {
                    let sigma = r.density(&tol)?;
                    Some(RelativeReport {
                        value: relative_entropy(&rho, &sigma, &tol)?,
                        reference_entropy: von_neumann_entropy(&sigma, &tol)?,
                    })
                }
                None => None,
            };
            report(&EntropyReport {
                entropy: von_neumann_entropy(&rho, &tol)?,
                dim: rho.dim(),
                rank: rho.rank(tol.psd),
                purity: rho.purity(),
                relative,
            })
        }
        Command::Reduce(job) => {
            let src = job.source();
            let job: ReduceJob = input::parse(&src.read()?, &src)?;
            let rho = job.state.density(&tol)?;
            let reduced = job.channel.reduce(&rho)?;
            report(&ReduceReport {
                block_dims: reduced.block_dims(),
                entropy: block_entropy(&reduced, &tol)?,
                blocks: reduced.blocks().to_vec(),
            })
        }
        Command::Mutual(job) => {
            let src = job.source();
            let job: MutualJob = input::parse(&src.read()?, &src)?;
            let e = job.ensemble.build(&tol)?;
            let reduced = job.channel.reduce(&e.convex_sum())?;
            report(&MutualReport {
                mutual_entropy: mutual_entropy(&e, &job.channel, &tol)?,
                relative_form: mutual_entropy_relative(&e, &job.channel, &tol)?,
                reduced_entropy: block_entropy(&reduced, &tol)?,
                members: e.len(),
            })
        }
        Command::Roof { job, trace } => {
            let src = job.source();
            let job: RoofJob = input::parse(&src.read()?, &src)?;
            let cfg = g.solver(job.solver);
            let rho = job.state.density(&cfg.tol)?;
            let result = solve_r(&rho, &job.channel, &cfg)?;
            if let Some(path) = trace {
                write_trace(path, &result)?;
            }
            let samples = g.samples.unwrap_or(ROOF_AFFINITY_SAMPLES);
            let affinity = affinity_certificate(&result, &job.channel, samples, &cfg)?;
            let zero_entropy = match zero_entropy_structure(&rho, &job.channel, &result, &cfg.tol) {
                Ok(z) => Some(z),
                Err(chanent::Error::Precondition(_)) => None,
                Err(e) => return Err(e.into()),
            };
            report(&RoofReport {
                result,
                affinity,
                zero_entropy,
            })
        }
        Command::QubitOracle { z, z_im, terms } => {
            let zc = C64::new(*z, *z_im);
            let value_r = qubit_r(zc)?;
            let modulus = zc.norm();
            let series = match terms {
                Some(t) => {
                    let value = qubit_r_series(zc, *t)?;
                    Some(SeriesReport {
                        terms: *t,
                        value,
                        error: (value - value_r).abs(),
                    })
                }
                None => None,
            };
            report(&QubitReport {
                z: [*z, *z_im],
                modulus,
                q: 0.5 + 0.5 * (1.0 - 4.0 * modulus * modulus).max(0.0).sqrt(),
                value_r,
                series,
            })
        }
        Command::BlockOracle { job, solve } => {
            let src = job.source();
            let job: BlockJob = input::parse(&src.read()?, &src)?;
            let cfg = g.solver(job.solver);
            let rho = job.state.density(&cfg.tol)?;
            let psi = PureState::new(job.psi.into(), &cfg.tol)?;
            let data = block_example_analyze(&rho, &psi)?;
            let (decomposition, construction_error) = match block_example_decomposition(&data, &rho, &cfg.tol) {
                Ok(d) => (Some(d), None),
                Err(e @ (chanent::Error::ConstructionFailure(_) | chanent::Error::OutOfRange { .. })) => {
                    (None, Some(e.to_string()))
                }
                Err(e) => return Err(e.into()),
            };
            let solver = if *solve {
                let channel = ReductionChannel::block_compression(&psi)?;
                let value_r = solve_r(&rho, &channel, &cfg)?.value_r;
                decomposition.as_ref().map(|d| SolverComparison {
                    value_r,
                    gap: d.candidate - value_r,
                })
            } else {
                None
            };
            report(&BlockReport {
                invariant_violations: data.invariant_violations(),
                data,
                decomposition,
                construction_error,
                solver,
            })
        }
        Command::Accinfo(job) => {
            let src = job.source();
            let job: AccinfoJob = input::parse(&src.read()?, &src)?;
            let projections = job.projections()?;
            let cfg = g.solver(job.solver);
            let rho = job.state.density(&cfg.tol)?;
            let samples = g.samples.unwrap_or(ACCINFO_SAMPLES);
            let ensemble = ensemble_from_subalgebra(&rho, &projections, &cfg.tol)?;
            report(&AccinfoReport {
                bracket: benatti_bracket(&rho, &projections, &cfg, samples)?,
                holevo: holevo_check(&rho, &projections, &cfg)?,
                weights: ensemble.weights().to_vec(),
            })
        }
        Command::Verify { input, cases, criteria } => {
            let mut cfg: VerifyConfig = match input {
                Some(p) => {
                    let src = Source::File(p.clone());
                    input::parse(&src.read()?, &src)?
                }
                None => VerifyConfig::default(),
            };
            if let Some(c) = cases {
                cfg = cfg.capped(*c);
            }
            if let Some(r) = g.restarts {
                cfg.restarts = r;
            }
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            if let Some(s) = g.samples {
                cfg.measurement_samples = s;
            }
            if g.tol.is_some() || g.max_length.is_some() {
                return Err(CliError::Usage(
                    "--tol and --max-length do not apply to verify; its tolerances are fixed".into(),
                ));
            }
            if let Some(bad) = criteria.iter().find(|&&c| !(1..=10).contains(&c)) {
                return Err(CliError::Usage(format!("unknown criterion {bad}; ids run from 1 to 10")));
            }
            let suite: SuiteReport = verify::run_suite(&cfg, criteria);
            let table = suite
                .criteria
                .iter()
                .map(|c| c.summary_line() + "\n")
                .collect::<String>()
                + &format!(
                    "tests {}, failures {}, errors {}, skipped {}\n",
                    suite.summary.tests, suite.summary.failures, suite.summary.errors, suite.summary.skipped
                );
            Ok(Outcome {
                json: suite.to_json()?,
                table: Some(table),
                failed: !suite.passed(),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            match cli.global.format {
                Format::Json => println!("{}", out.json),
                Format::Table => {
                    let text = out.table.unwrap_or_else(|| {
                        let value: serde_json::Value =
                            serde_json::from_str(&out.json).expect("reports are valid JSON");
                        table::render(&value)
                    });
                    print!("{text}");
                }
            }
            if out.failed {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
