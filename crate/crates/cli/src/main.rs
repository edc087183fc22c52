use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use seqmod::frontend::{parse, run, RunFlags, TheoryChoice};
use seqmod::harness::{conformance, Axiom, HarnessConfig};
use seqmod::kernel::{BranchOrder, Calculus, SearchConfig};

#[derive(Parser)]
#[command(
    name = "seqmod",
    version,
    about = "Sequent proof search modulo theories"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalculusArg {
    Di,
    Sdi,
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoryArg {
    Fol,
    Enum,
    Lra,
}

impl From<TheoryArg> for TheoryChoice {
    fn from(t: TheoryArg) -> TheoryChoice {
        match t {
            TheoryArg::Fol => TheoryChoice::Fol,
            TheoryArg::Enum => TheoryChoice::Enum,
            TheoryArg::Lra => TheoryChoice::Lra,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Left,
    Right,
    Random,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Output {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Search for a proof of the goal in a problem file.
    Prove {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "sdi")]
        calculus: CalculusArg,
        #[arg(long, value_enum, default_value = "fol")]
        theory: TheoryArg,
        /// Which conjunct SDI explores first.
        #[arg(long, value_enum, default_value = "left")]
        order: OrderArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest number of expansions of one existential.
        #[arg(long, default_value_t = 4)]
        max_exists: usize,
        /// Pull budget per leaf stream.
        #[arg(long, default_value_t = 64)]
        pulls: usize,
        #[arg(long, default_value_t = 200_000)]
        nodes: usize,
        /// Term depth ceiling for the enumeration backend.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Audit the proof, fold the constraint and rebuild a ground proof.
        #[arg(long)]
        check: bool,
        /// Report wall-clock time.
        #[arg(long)]
        timing: bool,
        /// Enumeration tries terms already in the leaf first.
        #[arg(long)]
        present_first: bool,
        #[arg(long, value_enum, default_value = "text")]
        output: Output,
    },
    /// Check a backend against the axioms on a bounded universe.
    Conformance {
        #[arg(value_enum)]
        theory: TheoryArg,
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        pulls: usize,
        /// Worker threads (axioms are checked in parallel).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Only these axioms (repeatable), e.g. --axiom AX_meet.
        #[arg(long = "axiom")]
        axioms: Vec<String>,
        #[arg(long, value_enum, default_value = "text")]
        output: Output,
    },
}

fn input_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {}", msg);
    ExitCode::from(2)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SEQMOD_LOG"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Prove {
            file,
            calculus,
            theory,
            order,
            seed,
            max_exists,
            pulls,
            nodes,
            depth,
            check,
            timing,
            present_first,
            output,
        } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => return input_error(format!("{}: {}", file.display(), e)),
            };
            let problem = match parse(&text) {
                Ok(p) => p,
                Err(e) => return input_error(format!("{}:{}", file.display(), e)),
            };
            let cfg = SearchConfig {
                calculus: match calculus {
                    CalculusArg::Di => Calculus::Di,
                    CalculusArg::Sdi => Calculus::Sdi,
                },
                order: match order {
                    OrderArg::Left => BranchOrder::Left,
                    OrderArg::Right => BranchOrder::Right,
                    OrderArg::Random => BranchOrder::Random(seed),
                },
                max_exists,
                pulls,
                nodes,
                depth,
                ..SearchConfig::default()
            };
            let flags = RunFlags {
                theory: theory.into(),
                cfg,
                check,
                timing,
                present_first,
            };
            let report = match run(&problem, &flags) {
                Ok(r) => r,
                Err(e) => return input_error(e),
            };
            match output {
                Output::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serialises")
                ),
                Output::Text => print!("{}", report.to_text()),
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Cmd::Conformance {
            theory,
            cases,
            seed,
            pulls,
            jobs,
            axioms,
            output,
        } => {
            let mut cfg = HarnessConfig {
                cases,
                seed,
                pulls,
                jobs,
                ..HarnessConfig::default()
            };
            if !axioms.is_empty() {
                match axioms
                    .iter()
                    .map(|a| a.parse::<Axiom>())
                    .collect::<Result<Vec<_>, _>>()
                {
                    Ok(list) => cfg.axioms = list,
                    Err(e) => return input_error(e),
                }
            }
            if cases == 0 || pulls == 0 {
                return input_error("cases and pulls must be positive");
            }
            let report = conformance(theory.into(), &cfg);
            match output {
                Output::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serialises")
                ),
                Output::Text => print!("{}", report.to_text()),
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
