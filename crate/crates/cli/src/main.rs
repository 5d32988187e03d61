//! `eprb`: behavior I/O, validation, solving, reference boxes, Hardy analysis,
//! optimization runs and Schmidt-angle scans.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 constraint violation,
//! 3 optimizer non-convergence.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use eprb_core::behavior::{chsh_delta, correlations, free_sum, validate, DEFAULT_TOL};
use eprb_core::boxes::{by_name, is_local, LocalityVerdict};
use eprb_core::hardy::{analyze_all, HardyReport};
use eprb_core::linsys::{build_matrix, check_feasible, rank, solve_dependent, FreeSet};
use eprb_core::optimizer::{
    ghz_impossibility, maximize_chsh, maximize_hardy, maximize_hardy_maxent, scan_theta,
    OptimizationConfig, OptimizationResult, ScanRow, StateClass,
};
use eprb_core::{Behavior, ConstraintReport, Error};

const EXIT_USAGE: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_NONCONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "eprb", version, about = "Joint-probability behaviors of two-setting, two-outcome Bell experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a behavior, test locality and analyze all eight Hardy sets
    Check {
        /// Behavior JSON file, or `-` for standard input
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Solve the dependent probabilities from the eight free ones
    Solve {
        /// Free-set JSON file, or `-` for standard input
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Emit a reference behavior: pr, pr:2, uniform, det:<a1a2b1b2>, qextremal, qextremal:2
    Box {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlations and the CHSH sum of a behavior
    Chsh {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Hardy reports for all eight sets
    Hardy {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Exact rank of the normalization and no-signaling system
    Rank,
    /// Search quantum models for an extremal value
    Optimize {
        #[arg(value_enum)]
        target: Target,
        #[arg(long, default_value = "any")]
        state_class: StateClass,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximize the Hardy witness at evenly spaced Schmidt angles
    Scan {
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = FRAC_PI_4)]
        to: f64,
        #[arg(long, default_value_t = 9)]
        steps: usize,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Chsh,
    Hardy,
    HardyMaxent,
    Ghz,
}

#[derive(Args)]
struct OptArgs {
    /// JSON config: {"restarts":n,"max_iters":n,"tol":x,"seed":n}
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl OptArgs {
    fn config(&self) -> Result<OptimizationConfig> {
        let mut cfg = match &self.config {
            Some(p) => OptimizationConfig::from_json_str(&read_input(p)?)
                .with_context(|| format!("reading config {}", p.display()))?,
            None => OptimizationConfig::default(),
        };
        if let Some(r) = self.restarts {
            cfg.restarts = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.max_iters {
            cfg.max_iters = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Check { path, tol, json } => cmd_check(&path, tol, json),
        Command::Solve { path, tol, json } => cmd_solve(&path, tol, json),
        Command::Box { name, out } => {
            let b = by_name(&name)?;
            emit(out.as_deref(), &format!("{}\n", b.to_json_string()))?;
            Ok(0)
        }
        Command::Chsh { path, tol, json } => cmd_chsh(&path, tol, json),
        Command::Hardy { path, tol, json } => cmd_hardy(&path, tol, json),
        Command::Rank => {
            println!("{}", rank(&build_matrix()));
            Ok(0)
        }
        Command::Optimize { target, state_class, opt, json, out } => {
            cmd_optimize(target, state_class, &opt.config()?, json, out.as_deref())
        }
        Command::Scan { from, to, steps, opt, csv, out } => {
            cmd_scan(from, to, steps, &opt.config()?, csv, out.as_deref())
        }
    }
}

fn read_input(path: &Path) -> Result<String> {
    let mut text = String::new();
    if path == Path::new("-") {
        io::stdin().read_to_string(&mut text).context("reading standard input")?;
    } else {
        text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    }
    Ok(text)
}

fn read_behavior(path: &Path) -> Result<Behavior> {
    Behavior::from_json_str(&read_input(path)?).with_context(|| format!("parsing behavior {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Validation report, or exit code 2 after printing it when a check fails.
fn validated(b: &Behavior, tol: f64, json: bool) -> Result<Option<ConstraintReport>> {
    let report = validate(b, tol)?;
    if report.all_passed() {
        return Ok(Some(report));
    }
    if json {
        print!("{}", to_json(&json!({ "valid": false, "report": report }))?);
    } else {
        print!("{report}");
        println!("behavior violates {} constraint(s)", report.failures().count());
    }
    Ok(None)
}

fn cmd_check(path: &Path, tol: f64, json: bool) -> Result<u8> {
    let b = read_behavior(path)?;
    let Some(report) = validated(&b, tol, json)? else {
        return Ok(EXIT_VIOLATION);
    };
    let locality = is_local(&b, tol)?;
    let hardy = analyze_all(&b, tol)?;
    if json {
        print!(
            "{}",
            to_json(&json!({ "valid": true, "report": report, "locality": locality, "hardy": hardy }))?
        );
    } else {
        print!("{report}");
        print_locality(&locality);
        println!();
        print_hardy(&hardy);
    }
    Ok(0)
}

fn print_locality(v: &LocalityVerdict) {
    if v.local {
        println!("local: yes (distance to local polytope {:.3e})", v.distance);
    } else {
        println!("local: no (distance to local polytope {:.6})", v.distance);
        if let Some(w) = &v.witness {
            println!("witness: {w}");
        }
    }
}

fn print_hardy(reports: &[HardyReport]) {
    for r in reports {
        println!("{r}");
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    free: &'a FreeSet,
    dependent: eprb_core::linsys::DependentSet,
    feasible: bool,
    report: &'a ConstraintReport,
}

fn cmd_solve(path: &Path, tol: f64, json: bool) -> Result<u8> {
    let text = read_input(path)?;
    let u: FreeSet = serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("parsing free set {}", path.display()))?;
    let report = match check_feasible(&u, tol) {
        Ok(r) => r,
        Err(Error::Precondition(msg)) => {
            eprintln!("infeasible input: {msg}");
            return Ok(EXIT_VIOLATION);
        }
        Err(e) => return Err(e.into()),
    };
    let dependent = solve_dependent(&u);
    let feasible = report.all_passed();
    if json {
        print!("{}", to_json(&SolveOutput { free: &u, dependent, feasible, report: &report })?);
    } else {
        for (name, value) in [
            ("p2", dependent.p2),
            ("p3", dependent.p3),
            ("p6", dependent.p6),
            ("p7", dependent.p7),
            ("p10", dependent.p10),
            ("p11", dependent.p11),
            ("p13", dependent.p13),
            ("p16", dependent.p16),
        ] {
            println!("{name:>4} = {value:.10}");
        }
        println!();
        print!("{report}");
    }
    Ok(if feasible { 0 } else { EXIT_VIOLATION })
}

fn cmd_chsh(path: &Path, tol: f64, json: bool) -> Result<u8> {
    let b = read_behavior(path)?;
    if validated(&b, tol, json)?.is_none() {
        return Ok(EXIT_VIOLATION);
    }
    let c = correlations(&b);
    let delta = chsh_delta(&b)?;
    if json {
        print!(
            "{}",
            to_json(&json!({ "correlations": c, "delta": delta, "free_sum": free_sum(&b) }))?
        );
    } else {
        println!("c11 = {:+.10}", c.c11);
        println!("c12 = {:+.10}", c.c12);
        println!("c21 = {:+.10}", c.c21);
        println!("c22 = {:+.10}", c.c22);
        println!("Δ   = {delta:+.10}");
    }
    Ok(0)
}

fn cmd_hardy(path: &Path, tol: f64, json: bool) -> Result<u8> {
    let b = read_behavior(path)?;
    if validated(&b, tol, json)?.is_none() {
        return Ok(EXIT_VIOLATION);
    }
    let reports = analyze_all(&b, tol)?;
    if json {
        print!("{}", to_json(&reports)?);
    } else {
        print_hardy(&reports);
    }
    Ok(0)
}

fn cmd_optimize(
    target: Target,
    state_class: StateClass,
    cfg: &OptimizationConfig,
    json: bool,
    out: Option<&Path>,
) -> Result<u8> {
    let (label, r) = match target {
        Target::Chsh => ("CHSH sum", maximize_chsh(state_class, cfg)?),
        Target::Hardy => ("p13", maximize_hardy(cfg)?),
        Target::HardyMaxent => ("p13", maximize_hardy_maxent(cfg)?),
        Target::Ghz => ("p14+p15", ghz_impossibility(cfg)?),
    };
    let text = if json { to_json(&r)? } else { format_result(label, &r) };
    emit(out, &text)?;
    Ok(if r.converged { 0 } else { EXIT_NONCONVERGED })
}

fn format_result(label: &str, r: &OptimizationResult) -> String {
    let p = &r.params;
    let mut s = String::new();
    s += &format!("maximum {label} = {:.10}\n", r.objective);
    s += &format!(
        "θ = {:.8}  a1 = {:.8}  a2 = {:.8}  b1 = {:.8}  b2 = {:.8}\n",
        p.theta, p.a1, p.a2, p.b1, p.b2
    );
    s += &format!("Δ = {:+.10}  Σ = {:.10}\n", r.delta, r.sigma);
    for c in &r.constraint_residuals {
        s += &format!("constraint {}: value {:.3e}, residual {:.3e}\n", c.name, c.value, c.residual);
    }
    s += "behavior:";
    for (i, x) in r.behavior.as_array().iter().enumerate() {
        s += &format!("{}p{} = {x:.8}", if i % 4 == 0 { "\n  " } else { "  " }, i + 1);
    }
    s += "\n";
    s += &format!(
        "restarts {} (converged {}), best restart {}, {} iterations, {} evaluations\n",
        r.stats.restarts, r.stats.converged_restarts, r.stats.best_restart, r.stats.iterations, r.stats.evaluations
    );
    s += if r.converged { "status: converged\n" } else { "status: NOT converged\n" };
    s
}

fn status(row: &ScanRow) -> &'static str {
    if row.converged {
        "ok"
    } else {
        "nonconverged"
    }
}

fn cmd_scan(
    from: f64,
    to: f64,
    steps: usize,
    cfg: &OptimizationConfig,
    csv: bool,
    out: Option<&Path>,
) -> Result<u8> {
    let rows = scan_theta(from, to, steps, cfg)?;
    let mut text = String::new();
    if csv {
        text += "theta,p13,delta,sigma,status\n";
        for r in &rows {
            text += &format!("{:?},{:?},{:?},{:?},{}\n", r.theta, r.p13, r.delta, r.sigma, status(r));
        }
    } else {
        text += &format!("{:>10}  {:>12}  {:>12}  {:>12}  status\n", "theta", "p13", "|Δ|", "Σ");
        for r in &rows {
            text += &format!(
                "{:>10.6}  {:>12.9}  {:>12.9}  {:>12.9}  {}\n",
                r.theta, r.p13, r.delta, r.sigma, status(r)
            );
        }
    }
    emit(out, &text)?;
    Ok(if rows.iter().all(|r| r.converged) { 0 } else { EXIT_NONCONVERGED })
}
