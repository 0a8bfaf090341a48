//! The `ocsp` command line.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::bonami::{verify_chain, DEFAULT_QUADRUPLE_BUDGET};
use crate::decider::{decide_with, kernelize, DecideConfig, Outcome, DEFAULT_BUDGET, DEFAULT_CAP};
use crate::efron_stein::decompose_instance;
use crate::error::{Error, Result};
use crate::exact::{parse_rational, Rational};
use crate::instance::{generate, parse_instance_with, GenParams, Instance, Model, DEFAULT_MAX_ARITY, HARD_MAX_ARITY};
use crate::oracle::{brute_force_opt, exact_central_moment, DEFAULT_MOMENT_BUDGET, DEFAULT_OPT_CAP};
use crate::report::{to_json, AnalyzeJson, BonamiJson, DecisionJson, KernelJson, OracleJson};

pub const EXIT_DECIDED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNDECIDED: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "ocsp", version, about = "Exact above-average decisions for ordering CSPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Instance file, or `-` for standard input.
    #[arg(long)]
    input: PathBuf,
    /// Largest constraint arity accepted by the parser.
    #[arg(long, default_value_t = DEFAULT_MAX_ARITY)]
    max_arity: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether some ordering satisfies at least AVG + t constraints.
    Decide {
        #[command(flatten)]
        input: InputArgs,
        /// Positive rational margin, `p/q` or an integer.
        #[arg(long, value_parser = parse_positive)]
        t: Rational,
        /// Largest kernel searched exhaustively.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        /// Search for an explicit ordering when the certificate fires.
        #[arg(long)]
        witness: bool,
        /// Restarts for the witness search.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the JSON report instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// Print the dependency set of the objective.
    Kernelize {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Print the decomposition with per-part moments.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        /// Include per-part fourth moments.
        #[arg(long)]
        m4: bool,
        /// Include the polynomial on every cell.
        #[arg(long)]
        pieces: bool,
    },
    /// Write a random instance in the text format.
    Gen {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Arity for the random-k model.
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Probability of allowing each ordering in the random-k model.
        #[arg(long, default_value_t = 0.5)]
        allowed_fraction: f64,
    },
    /// Exact OPT, AVG and central moments by enumeration.
    Oracle {
        #[command(flatten)]
        input: InputArgs,
        /// Compute only this central moment.
        #[arg(long, value_parser = parse_moment)]
        moment: Option<u32>,
        /// Largest number of variables enumerated for OPT.
        #[arg(long, default_value_t = DEFAULT_OPT_CAP)]
        cap: usize,
        /// Bound on (#predicates)^r for moments.
        #[arg(long, default_value_t = DEFAULT_MOMENT_BUDGET)]
        budget: u128,
    },
    /// Check the fourth-moment chain numerically.
    Bonami {
        #[command(flatten)]
        input: InputArgs,
        /// Bound on (#predicates)^4 for the exact fourth moment.
        #[arg(long, default_value_t = DEFAULT_MOMENT_BUDGET)]
        budget: u128,
    },
}

fn parse_positive(s: &str) -> std::result::Result<Rational, String> {
    let t = parse_rational(s).map_err(|e| e.to_string())?;
    if t > Rational::from_integer(0.into()) {
        Ok(t)
    } else {
        Err(format!("t must be positive, got {t}"))
    }
}

fn parse_moment(s: &str) -> std::result::Result<u32, String> {
    match s {
        "2" => Ok(2),
        "4" => Ok(4),
        _ => Err(format!("moment must be 2 or 4, got {s}")),
    }
}

fn load(args: &InputArgs, stdin: &mut dyn Read) -> Result<Instance> {
    if args.max_arity > HARD_MAX_ARITY {
        return Err(Error::InvalidParameter(format!(
            "--max-arity {} exceeds {HARD_MAX_ARITY}",
            args.max_arity
        )));
    }
    let mut text = Vec::new();
    let read = if args.input.as_os_str() == "-" {
        stdin.read_to_end(&mut text)
    } else {
        std::fs::File::open(&args.input).and_then(|mut f| f.read_to_end(&mut text))
    };
    read.map_err(|e| Error::InvalidParameter(format!("{}: {e}", args.input.display())))?;
    parse_instance_with(&text, args.max_arity)
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 when decided or on success, 2 when undecided, 1 on error.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_DECIDED
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_ERROR
                }
            };
        }
    };
    match execute(cli.command, stdin, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(command: Command, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<i32> {
    let mut emit = |s: String| {
        out.write_all(s.as_bytes())
            .map_err(|e| Error::InvalidParameter(format!("writing output: {e}")))
    };
    match command {
        Command::Decide { input, t, cap, witness, budget, seed, json } => {
            let inst = load(&input, stdin)?;
            let dec = Arc::new(decompose_instance(&inst));
            let config = DecideConfig { cap, budget, seed, witness };
            let report = decide_with(&inst, dec, &t, &config)?;
            if json {
                emit(to_json(&DecisionJson::from(&report)))?;
            } else {
                emit(summary(&report))?;
            }
            Ok(if report.outcome == Outcome::Undecided { EXIT_UNDECIDED } else { EXIT_DECIDED })
        }
        Command::Kernelize { input } => {
            let inst = load(&input, stdin)?;
            let kernel = kernelize(&inst, Arc::new(decompose_instance(&inst)));
            emit(to_json(&KernelJson::from(&kernel)))?;
            Ok(EXIT_DECIDED)
        }
        Command::Analyze { input, m4, pieces } => {
            let inst = load(&input, stdin)?;
            let dec = decompose_instance(&inst);
            emit(to_json(&AnalyzeJson::new(&inst, &dec, m4, pieces)))?;
            Ok(EXIT_DECIDED)
        }
        Command::Gen { model, n, m, k, seed, allowed_fraction } => {
            let inst = generate(model, &GenParams { n, m, k, allowed_fraction }, seed)?;
            emit(inst.to_text())?;
            Ok(EXIT_DECIDED)
        }
        Command::Oracle { input, moment, cap, budget } => {
            let inst = load(&input, stdin)?;
            let (opt, avg) = brute_force_opt(&inst, cap)?;
            let wanted = |r: u32| moment.is_none_or(|m| m == r);
            let central = |r: u32| -> Result<Option<String>> {
                if wanted(r) {
                    Ok(Some(exact_central_moment(&inst, r, budget)?.to_string()))
                } else {
                    Ok(None)
                }
            };
            let report = OracleJson { opt, avg: avg.to_string(), moment2: central(2)?, moment4: central(4)? };
            emit(to_json(&report))?;
            Ok(EXIT_DECIDED)
        }
        Command::Bonami { input, budget } => {
            let inst = load(&input, stdin)?;
            let dec = decompose_instance(&inst);
            let ef4 = exact_central_moment(&inst, 4, budget)?;
            let witness = verify_chain(&dec, &ef4, DEFAULT_QUADRUPLE_BUDGET)?;
            emit(to_json(&BonamiJson::from(&witness)))?;
            Ok(EXIT_DECIDED)
        }
    }
}

fn summary(r: &crate::decider::DecisionReport) -> String {
    let c = &r.certificate;
    let mut s = format!("outcome: {}\n", r.outcome.as_str());
    s += &format!("variance: {}\nC: {}\nb: {}\n", c.sigma2, c.c, c.b);
    s += &format!(
        "certificate: {} (needs variance >= {})\n",
        if c.fires { "fires" } else { "does not fire" },
        c.threshold()
    );
    if let Some(k) = &r.kernel {
        s += &format!("kernel: {} variables\n", k.len());
        if let Some(gap) = &k.opt_minus_avg {
            s += &format!("OPT - AVG: {gap}\n");
        }
    }
    if let Some(w) = &r.witness {
        let order: Vec<String> = w.ordering.as_slice().iter().map(|v| (v + 1).to_string()).collect();
        s += &format!("ordering: {}\nsatisfied: {}\n", order.join(" "), w.value);
    }
    s
}
