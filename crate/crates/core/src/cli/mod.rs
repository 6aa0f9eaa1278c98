//! Command-line front end.

mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{Axis, BisectSpec, FileConfig, FlagValues, GridSpec, RunConfig};
pub use output::{num, write_trajectory, TRAJECTORY_HEADER};

use crate::analyze::{classify_initial, locate_boundary, standard_family, Boundary, BoundaryOptions};
use crate::error::{Error, Result};
use crate::geometry::BianchiClass;
use crate::integrate::canonicalize_with;
use crate::parallel::par_map;
use crate::pipeline::{run, RunRequest, Summary};
use crate::verify::{run_suite, Fault};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_INTEGRATION_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bianchi-flow", version, about = "Ricci flow on Bianchi-class 3-geometries in a Milnor frame")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one initial metric and analyze the run.
    Simulate(CommonArgs),
    /// Run the built-in oracle and invariant suite.
    Verify(VerifyArgs),
    /// Label SL(2,R) initial data as Q1 or Q2, over a point, a grid or a bisection bracket.
    Classify(CommonArgs),
    /// Simulate every point of a grid.
    Sweep(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat JSON file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// su2, sl2r, e11, e2 or nil.
    #[arg(long)]
    pub class: Option<String>,
    /// forward or positive.
    #[arg(long)]
    pub direction: Option<String>,
    /// Initial coefficients a,b,c.
    #[arg(long, allow_hyphen_values = true)]
    pub initial: Option<String>,
    /// End time in the product-4 gauge.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Coefficient value at which a blow-up is declared.
    #[arg(long)]
    pub max_coeff: Option<f64>,
    /// CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary output.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Grid such as A=1:3:10,B=0.5:1.5:10 (third coefficient from ABC = 4) or x=0.5:2:17.
    #[arg(long)]
    pub grid: Option<String>,
    /// Bracket lo:hi[:width] on the family x -> (x, 2 sqrt(2/x), sqrt(2/x)).
    #[arg(long)]
    pub bisect: Option<String>,
    /// Reject data violating the class ordering instead of relabeling the frame.
    #[arg(long)]
    pub no_swap: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Inject a defect to check that the suite catches it.
    #[arg(long, hide = true, default_value = "none")]
    pub fault: String,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let file = self.config.as_deref().map(FileConfig::load).transpose()?;
        let flags = FlagValues {
            class: self.class.clone(),
            direction: self.direction.clone(),
            initial: self.initial.clone(),
            horizon: self.horizon,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_coeff: self.max_coeff,
            out: self.out.clone(),
            summary: self.summary.clone(),
            grid: self.grid.clone(),
            bisect: self.bisect.clone(),
            no_swap: self.no_swap,
        };
        RunConfig::resolve(flags, file)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::IntegrationFailure(_) => EXIT_INTEGRATION_FAILED,
        _ => EXIT_INVALID_INPUT,
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_INPUT } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => a.resolve().and_then(|c| cmd_simulate(&c)),
        Command::Verify(a) => a.common.resolve().and_then(|c| {
            let fault = a.fault.parse()?;
            cmd_verify(&c, fault)
        }),
        Command::Classify(a) => a.resolve().and_then(|c| cmd_classify(&c)),
        Command::Sweep(a) => a.resolve().and_then(|c| cmd_sweep(&c)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn request(cfg: &RunConfig, class: BianchiClass, initial: [f64; 3]) -> RunRequest {
    RunRequest {
        class,
        direction: cfg.direction,
        initial,
        horizon: cfg.horizon,
        controls: cfg.controls,
        allow_swap: cfg.allow_swap,
    }
}

fn exclusive(cfg: &RunConfig, allowed: &[&str]) -> Result<()> {
    let given = [("initial", cfg.initial.is_some()), ("grid", cfg.grid.is_some()), ("bisect", cfg.bisect.is_some())];
    for (name, present) in given {
        if present && !allowed.contains(&name) {
            return Err(Error::InvalidInput(format!("--{name} does not apply to this command")));
        }
    }
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<i32> {
    exclusive(cfg, &["initial"])?;
    let out = run(&request(cfg, cfg.require_class()?, cfg.require_initial()?))?;
    if let Some(path) = &cfg.out {
        write_trajectory(path, &out.trajectory)?;
    }
    if let Some(path) = &cfg.summary {
        output::write_json(path, &out.summary)?;
    }
    println!("{}", out.summary.verdict());
    Ok(EXIT_OK)
}

pub fn cmd_verify(cfg: &RunConfig, fault: Fault) -> Result<i32> {
    exclusive(cfg, &[])?;
    let report = run_suite(fault, &cfg.controls);
    print!("{}", report.table());
    if let Some(path) = &cfg.summary {
        output::write_json(path, &report)?;
    }
    if report.passed() {
        println!("all {} checks passed", report.checks.len());
        Ok(EXIT_OK)
    } else {
        let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        println!("failed: {}", names.join(", "));
        Ok(EXIT_VERIFY_FAILED)
    }
}

const CLASSIFY_HEADER: [&str; 6] = ["A0", "B0", "C0", "label", "trigger_time", "margin"];

fn classify_point(cfg: &RunConfig, x: [f64; 3]) -> Result<Vec<String>> {
    let canon = canonicalize_with(BianchiClass::Sl2r, x[0], x[1], x[2], cfg.allow_swap)?;
    let (_, c) = classify_initial(&canon.canonical_initial, &cfg.controls)?;
    Ok(vec![
        num(x[0]),
        num(x[1]),
        num(x[2]),
        c.label.tag().to_string(),
        output::opt_num(c.trigger_time.map(|t| t * canon.lambda)),
        num(c.margin),
    ])
}

#[derive(Serialize)]
struct BoundaryOut<'a> {
    family: &'static str,
    #[serde(flatten)]
    boundary: &'a Boundary,
}

pub fn cmd_classify(cfg: &RunConfig) -> Result<i32> {
    if let Some(class) = cfg.class {
        if class != BianchiClass::Sl2r {
            return Err(Error::InvalidInput(format!("classify applies to sl2r, not {class}")));
        }
    }
    let modes = [cfg.initial.is_some(), cfg.grid.is_some(), cfg.bisect.is_some()];
    if modes.iter().filter(|&&m| m).count() != 1 {
        return Err(Error::InvalidInput("classify needs exactly one of --initial, --grid, --bisect".into()));
    }

    if let Some(b) = cfg.bisect {
        let opts = BoundaryOptions { width: b.width, controls: cfg.controls, ..BoundaryOptions::default() };
        let boundary = locate_boundary(&standard_family, b.lo, b.hi, &opts)?;
        println!(
            "boundary in [{}, {}] width {:.3e} ({} -> {}); midpoint |A-B|/A = {:.3e}",
            num(boundary.lo),
            num(boundary.hi),
            boundary.width(),
            boundary.label_lo,
            boundary.label_hi,
            boundary.midpoint.ab_gap
        );
        if let Some(path) = &cfg.out {
            let row = vec![
                num(boundary.lo),
                num(boundary.hi),
                boundary.label_lo.tag().to_string(),
                boundary.label_hi.tag().to_string(),
                num(boundary.midpoint.ab_gap),
                output::opt_num(boundary.midpoint.c_exponent),
            ];
            output::write_rows(
                path,
                &["x_lo", "x_hi", "label_lo", "label_hi", "midpoint_ab_gap", "midpoint_c_exponent"],
                &[row],
            )?;
        }
        if let Some(path) = &cfg.summary {
            output::write_json(path, &BoundaryOut { family: "x -> (x, 2 sqrt(2/x), sqrt(2/x))", boundary: &boundary })?;
        }
        return Ok(EXIT_OK);
    }

    let points = match (&cfg.grid, cfg.initial) {
        (Some(g), _) => g.points(),
        (None, Some(x)) => vec![x],
        (None, None) => unreachable!("mode checked above"),
    };
    let rows: Vec<Vec<String>> = par_map(&points, |&x| classify_point(cfg, x)).into_iter().collect::<Result<_>>()?;
    for r in &rows {
        println!("{} {} {} {} t={} margin={}", r[0], r[1], r[2], r[3], if r[4].is_empty() { "-" } else { &r[4] }, r[5]);
    }
    if let Some(path) = &cfg.out {
        output::write_rows(path, &CLASSIFY_HEADER, &rows)?;
    }
    Ok(EXIT_OK)
}

const SWEEP_HEADER: [&str; 16] = [
    "index",
    "A0",
    "B0",
    "C0",
    "status",
    "case",
    "terminal",
    "t_plus",
    "exp_A",
    "exp_B",
    "exp_C",
    "eta1",
    "eta2",
    "sl2r_label",
    "invariants",
    "error",
];

fn sweep_row(index: usize, x: [f64; 3], r: &Result<Summary>) -> Vec<String> {
    let mut row = vec![index.to_string(), num(x[0]), num(x[1]), num(x[2])];
    match r {
        Ok(s) => {
            let e = s.exponents;
            row.extend([
                "ok".to_string(),
                s.case.clone().unwrap_or_default(),
                s.terminal.clone(),
                output::opt_num(s.t_plus),
                output::opt_num(e.map(|e| e.A)),
                output::opt_num(e.map(|e| e.B)),
                output::opt_num(e.map(|e| e.C)),
                output::opt_num(s.eta.as_ref().map(|e| e.eta1.value)),
                output::opt_num(s.eta.as_ref().map(|e| e.eta2.value)),
                s.sl2r_label.clone().unwrap_or_default(),
                if s.invariants_passed { "pass" } else { "fail" }.to_string(),
                String::new(),
            ]);
        }
        Err(err) => {
            row.push("error".to_string());
            row.extend(std::iter::repeat_n(String::new(), 10));
            row.push(err.to_string());
        }
    }
    row
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    exclusive(cfg, &["grid"])?;
    let class = cfg.require_class()?;
    let grid = cfg.grid.as_ref().ok_or_else(|| Error::InvalidInput("sweep needs --grid".into()))?;
    let points = grid.points();
    let results: Vec<Result<Summary>> = par_map(&points, |&x| run(&request(cfg, class, x)).map(|o| o.summary));
    let rows: Vec<Vec<String>> =
        points.iter().zip(&results).enumerate().map(|(i, (x, r))| sweep_row(i, *x, r)).collect();
    if let Some(path) = &cfg.out {
        output::write_rows(path, &SWEEP_HEADER, &rows)?;
    }
    if let Some(path) = &cfg.summary {
        let ok: Vec<&Summary> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        output::write_json(path, &ok)?;
    }
    let failed = results.iter().filter(|r| r.is_err()).count();
    println!("{} points, {} ok, {} failed", points.len(), points.len() - failed, failed);
    match results.iter().find_map(|r| r.as_ref().err()) {
        Some(e) if failed == points.len() => Err(e.clone()),
        _ => Ok(EXIT_OK),
    }
}
