//! `bregkt` command-line driver.
//!
//! Exit codes: 0 converged (or oracle agreement for `verify`), 1 solver and
//! oracle disagree, 2 iteration limit reached, 3 input error, 4 numerical
//! failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use bregkt_core::instances::{random_affine, InstanceGeometry};
use bregkt_core::io::{self as pio, Problem, ProblemFile};
use bregkt_core::oracle::{best_approx_bruteforce, kt_set_affine};
use bregkt_core::prelude::{solve, Error, SolveOptions, StepSchedule, Termination};
use bregkt_core::product::solve_blocks;
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DISAGREE: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Agreement threshold for `verify`, in the max norm.
pub const VERIFY_TOL: f64 = 1e-5;

#[derive(Parser, Debug)]
#[command(
    name = "bregkt",
    version,
    about = "Best Bregman approximation of primal-dual Kuhn-Tucker points"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the solver and print the final point.
    Solve(RunArgs),
    /// Run the solver and compare with the brute-force oracle (affine problems).
    Verify(RunArgs),
    /// Run the solver and write the per-iteration trace as CSV.
    Trace(RunArgs),
    /// Print a random affine problem file.
    Generate {
        #[arg(long)]
        seed: u64,
        /// Use Boltzmann-Shannon kernels on a positive-orthant instance.
        #[arg(long)]
        positive: bool,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Problem file (JSON). Omit when using `--seed`.
    problem: Option<PathBuf>,
    /// Solve a random affine instance with this seed instead of a file.
    #[arg(long, conflicts_with = "problem")]
    seed: Option<u64>,
    /// With `--seed`: Boltzmann-Shannon kernels on a positive-orthant instance.
    #[arg(long, requires = "seed")]
    positive: bool,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Constant primal step size.
    #[arg(long)]
    gamma: Option<f64>,
    /// Constant dual step size.
    #[arg(long)]
    mu: Option<f64>,
    /// Write the trace CSV here (`trace` writes to stdout otherwise).
    #[arg(long = "trace-out")]
    trace_out: Option<PathBuf>,
    /// Include the iterates in the trace.
    #[arg(long = "full-vectors")]
    full_vectors: bool,
}

fn geometry(positive: bool) -> InstanceGeometry {
    if positive {
        InstanceGeometry::PositiveOrthant
    } else {
        InstanceGeometry::Euclidean
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<'a, I, T>(args: I, out: &'a mut dyn Write, err: &'a mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let sink = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match cli.command {
        Command::Generate { seed, positive } => {
            let inst = random_affine(seed, geometry(positive));
            let file = ProblemFile {
                problem: Problem::Composite(inst.problem),
                schedule: StepSchedule::default(),
                options: SolveOptions::default(),
            };
            let _ = writeln!(out, "{}", pio::emit(&file));
            EXIT_OK
        }
        Command::Solve(a) => execute(Verb::Solve, a, out, err),
        Command::Verify(a) => execute(Verb::Verify, a, out, err),
        Command::Trace(a) => execute(Verb::Trace, a, out, err),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Verb {
    Solve,
    Verify,
    Trace,
}

fn load(args: &RunArgs) -> Result<ProblemFile, String> {
    match (&args.problem, args.seed) {
        (Some(path), _) => pio::parse_problem(path).map_err(|e| e.to_string()),
        (None, Some(seed)) => Ok(ProblemFile {
            problem: Problem::Composite(random_affine(seed, geometry(args.positive)).problem),
            schedule: StepSchedule::default(),
            options: SolveOptions::default(),
        }),
        (None, None) => Err("a problem file or --seed is required".into()),
    }
}

fn execute(verb: Verb, args: RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut file = match load(&args) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    if let Some(n) = args.max_iter {
        file.options.max_iters = n;
    }
    if let Some(t) = args.tol {
        file.options.tol = t;
    }
    let want_trace = verb == Verb::Trace || args.trace_out.is_some();
    file.options.full_vectors |= args.full_vectors;
    if args.gamma.is_some() || args.mu.is_some() {
        let (g0, m0) = file.schedule.at(0);
        file.schedule = StepSchedule::Constant {
            gamma: args.gamma.unwrap_or(g0),
            mu: args.mu.unwrap_or(m0),
        };
    }

    let composite = match file.problem.composite() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    if let Err(e) = file
        .schedule
        .validate(composite.eps(), composite.delta(), composite.sigma())
    {
        let _ = writeln!(err, "error: {e}");
        return EXIT_INPUT;
    }
    let report = match &file.problem {
        Problem::Composite(p) => solve(p, &file.schedule, &file.options),
        Problem::Blocks(bp) => match solve_blocks(bp, &file.schedule, &file.options) {
            Ok(r) => r.report,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INPUT;
            }
        },
    };

    if want_trace {
        let dims = file
            .options
            .full_vectors
            .then(|| (composite.primal_dim(), composite.dual_dim()));
        let written = match &args.trace_out {
            Some(path) => File::create(path).and_then(|f| pio::write_trace(io::BufWriter::new(f), &report.trace, dims)),
            None => pio::write_trace(&mut *out, &report.trace, dims),
        };
        if let Err(e) = written {
            let _ = writeln!(err, "error: cannot write trace: {e}");
            return EXIT_INPUT;
        }
    }

    // `trace` to stdout keeps stdout pure CSV.
    let summary: &mut dyn Write = if verb == Verb::Trace && args.trace_out.is_none() {
        &mut *err
    } else {
        &mut *out
    };
    let _ = writeln!(
        summary,
        "termination: {}\niterations: {}\nx: {}\nystar: {}",
        report.termination.name(),
        report.iterations,
        join(report.point.x.iter()),
        join(report.point.y.iter()),
    );
    if let Some(e) = &report.failure {
        let _ = writeln!(err, "error: {e}");
    }
    let solver_code = match report.termination {
        Termination::NumericalFailure => EXIT_NUMERICAL,
        Termination::MaxIters => EXIT_MAX_ITERS,
        _ => EXIT_OK,
    };
    if verb != Verb::Verify || solver_code == EXIT_NUMERICAL {
        return solver_code;
    }

    let best = kt_set_affine(&composite)
        .and_then(|z| best_approx_bruteforce(composite.product_kernel().joint(), &z, &composite.start().packed()));
    match best {
        Ok(best) => {
            let gap = (report.point.packed() - best).amax();
            let _ = writeln!(out, "oracle_gap: {}", pio::fmt_float(gap));
            if gap <= VERIFY_TOL {
                EXIT_OK
            } else {
                let _ = writeln!(err, "solver and oracle differ by {gap:e} (> {VERIFY_TOL:e})");
                EXIT_DISAGREE
            }
        }
        Err(Error::UnsupportedOracle(msg)) => {
            let _ = writeln!(err, "error: no oracle for this problem: {msg}");
            EXIT_INPUT
        }
        Err(e) => {
            let _ = writeln!(err, "error: oracle failed: {e}");
            EXIT_NUMERICAL
        }
    }
}

fn join<'a>(v: impl Iterator<Item = &'a f64>) -> String {
    v.map(|&f| pio::fmt_float(f)).collect::<Vec<_>>().join(" ")
}
