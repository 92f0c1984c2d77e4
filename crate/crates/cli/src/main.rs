//! `shortpanel` command-line front end.
//!
//! Inputs are JSON, given either as a file path or inline (an argument
//! starting with `{` or `[`). Outcome distributions may also be a panel
//! CSV, which is turned into cell frequencies. Exit status is 0 on success,
//! 1 when an inequality fails or a table differs from its golden file, and
//! 2 on usage or input errors.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use shortpanel::distributions::{estimate_f, CondOutcomeDist, LatentDist, MeasureOptions, DEFAULT_SEED};
use shortpanel::identify::{
    check_structure, identified_set_scan, linear_panel_beta, outer_set_scan, profile_bounds_2p_binary, CheckOptions,
    GFamily, IdentifiedSetGrid, ProfileOptions, ThetaGrid,
};
use shortpanel::models::{CovariateCell, ModelSpec, Theta};
use shortpanel::randomsets::{core_determining_collection, ustar_numeric, CdcOptions, DEFAULT_CDC_CAP};
use shortpanel::simulate::{exact_f, linear_moments, simulate_panel, DgpSpec, DEFAULT_EXACT_DRAWS};
use shortpanel::tables::{diff_against_golden, render, render_numeric, TABLE_IDS};

#[derive(Parser)]
#[command(name = "shortpanel", version, about = "Sharp identified sets for short-panel models with fixed effects")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the main artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the symbolic U*, Y* and collection tables.
    Tables {
        /// Table id; repeat for several, omit for all.
        #[arg(long)]
        which: Vec<String>,
        /// Compare with the committed golden files instead of printing.
        #[arg(long)]
        check: bool,
    },
    /// U* sets at one cell and parameter value.
    Ustar(CellArgs),
    /// Core determining collection at one cell and parameter value.
    Cdc(CellArgs),
    /// Evaluate every collection inequality for one structure.
    Check {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        measure: Measure,
    },
    /// Identified set over a parameter grid, projected from a family of
    /// latent distributions.
    Identify {
        #[command(flatten)]
        scan: ScanArgs,
        /// Latent family JSON (`{"kind": "list", "dists": [...]}` or
        /// `{"kind": "piecewise_uniform"}`); piecewise uniform by default.
        #[arg(long)]
        gu: Option<String>,
        #[command(flatten)]
        measure: Measure,
    },
    /// Outer set over a parameter grid; needs no latent distribution.
    Outer {
        #[command(flatten)]
        scan: ScanArgs,
    },
    /// Envelope bounds for the two-period dynamic binary model.
    Profile {
        #[command(flatten)]
        scan: ScanArgs,
        /// Threshold grid as a JSON array; breakpoints and midpoints by default.
        #[arg(long)]
        w_grid: Option<String>,
    },
    /// Simulate a panel CSV, or with `--exact` the cell frequencies, from a DGP.
    Simulate {
        #[arg(long)]
        dgp: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = DEFAULT_EXACT_DRAWS)]
        draws: usize,
    },
    /// Slope of a linear panel DGP from its analytic moments.
    Linear {
        #[arg(long)]
        dgp: String,
    },
}

#[derive(Args)]
struct CellArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    /// Covariate cell JSON; the first DGP cell when omitted.
    #[arg(long)]
    cell: Option<String>,
    /// Supplies whichever of model, θ and cell are not given.
    #[arg(long)]
    dgp: Option<String>,
    /// Print the canonical text form instead of JSON.
    #[arg(long)]
    emit_table: bool,
    #[arg(long, default_value_t = DEFAULT_CDC_CAP)]
    cap: usize,
}

/// Model, θ, latent distribution and outcome distribution; any of the
/// first three may come from `--dgp`.
#[derive(Args)]
struct Inputs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    gu: Option<String>,
    /// Outcome distribution JSON, or a panel CSV.
    #[arg(long)]
    f: String,
    #[arg(long)]
    dgp: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    grid: String,
    #[arg(long)]
    f: String,
    #[arg(long)]
    tol: Option<f64>,
    /// Hull CSV path; next to `--out` by default.
    #[arg(long)]
    hull: Option<PathBuf>,
}

#[derive(Args)]
struct Measure {
    /// Seed for simulated measures.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = shortpanel::distributions::DEFAULT_DRAWS)]
    draws: usize,
    #[arg(long, default_value_t = DEFAULT_CDC_CAP)]
    cap: usize,
}

impl Measure {
    fn options(&self, tol: Option<f64>) -> CheckOptions {
        CheckOptions { measure: MeasureOptions { seed: self.seed, draws: self.draws }, tol, cap: self.cap }
    }
}

fn load<T: DeserializeOwned>(what: &str, arg: &str) -> Result<T> {
    let text = if arg.trim_start().starts_with(['{', '[']) {
        arg.to_owned()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {what} from {arg}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing {what}"))
}

fn load_f(model: &ModelSpec, arg: &str) -> Result<CondOutcomeDist> {
    if arg.ends_with(".csv") {
        let file = fs::File::open(arg).with_context(|| format!("opening {arg}"))?;
        return Ok(estimate_f(model, file, 1)?);
    }
    load("outcome distribution", arg)
}

fn pick<T: DeserializeOwned>(
    what: &str,
    arg: &Option<String>,
    dgp: Option<&DgpSpec>,
    from: impl Fn(&DgpSpec) -> T,
) -> Result<T> {
    match (arg, dgp) {
        (Some(a), _) => load(what, a),
        (None, Some(d)) => Ok(from(d)),
        (None, None) => bail!("--{what} is required (or --dgp)"),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn emit_grid(out: &Option<PathBuf>, hull: &Option<PathBuf>, grid: &IdentifiedSetGrid) -> Result<()> {
    emit(out, &json(grid)?)?;
    let hull = hull.clone().or_else(|| out.as_deref().map(|p| p.with_extension("csv")));
    if let Some(p) = hull {
        fs::write(&p, grid.hull_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    eprintln!("{} of {} grid points inside ({})", grid.n_inside(), grid.points.len(), grid.label);
    Ok(())
}

fn cell_inputs(a: &CellArgs) -> Result<(ModelSpec, Theta, CovariateCell)> {
    let dgp: Option<DgpSpec> = a.dgp.as_deref().map(|d| load("dgp", d)).transpose()?;
    let model = pick("model", &a.model, dgp.as_ref(), |d| d.model.clone())?;
    let theta = pick("theta", &a.theta, dgp.as_ref(), |d| d.theta.clone())?;
    let cell = match (&a.cell, &dgp) {
        (Some(c), _) => load("cell", c)?,
        (None, Some(d)) if !d.cells.is_empty() => d.cells[0].cell.clone(),
        _ => bail!("--cell is required (or --dgp)"),
    };
    Ok((model, theta, cell))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Tables { which, check } => {
            let ids: Vec<String> =
                if which.is_empty() { TABLE_IDS.iter().map(|s| s.to_string()).collect() } else { which };
            let mut text = String::new();
            let mut differs = false;
            for id in &ids {
                if check {
                    let d = diff_against_golden(id)?;
                    match &d.first_difference {
                        None => text += &format!("{id}: ok\n"),
                        Some((line, want, got)) => {
                            differs = true;
                            text += &format!("{id}: differs at line {line}\n  golden:   {want}\n  rendered: {got}\n");
                        }
                    }
                } else {
                    if ids.len() > 1 {
                        text += &format!("== {id}\n");
                    }
                    text += &render(id)?;
                }
            }
            emit(&cli.out, &text)?;
            return Ok(if differs { ExitCode::from(1) } else { ExitCode::SUCCESS });
        }
        Command::Ustar(a) => {
            let (model, theta, cell) = cell_inputs(&a)?;
            let text = if a.emit_table {
                render_numeric(&model, &theta, &cell, a.cap)?
            } else {
                let sets = ustar_numeric(&model, &theta, &cell)?;
                let rows: Vec<_> = sets
                    .iter()
                    .map(|s| serde_json::json!({"outcome": s.outcome.label(), "full": s.full, "region": s.region.to_text()}))
                    .collect();
                json(&rows)?
            };
            emit(&cli.out, &text)?;
        }
        Command::Cdc(a) => {
            let (model, theta, cell) = cell_inputs(&a)?;
            let text = if a.emit_table {
                render_numeric(&model, &theta, &cell, a.cap)?
            } else {
                let sets = ustar_numeric(&model, &theta, &cell)?;
                let cdc =
                    core_determining_collection(&model, &sets, &CdcOptions { cap: a.cap, ..CdcOptions::default() })?;
                let label = |idx: &[usize]| idx.iter().map(|i| cdc.outcomes[*i].label()).collect::<Vec<_>>();
                let items: Vec<_> = cdc
                    .items
                    .iter()
                    .map(|it| {
                        serde_json::json!({
                            "id": it.id,
                            "y_set": label(&it.y_set),
                            "t_set": label(&it.t_set),
                            "s_region": it.s_region.to_text(),
                        })
                    })
                    .collect();
                json(&serde_json::json!({
                    "distinct_sets": cdc.distinct.len(),
                    "candidate_unions": cdc.candidate_unions,
                    "items": items,
                }))?
            };
            emit(&cli.out, &text)?;
        }
        Command::Check { inputs, measure } => {
            let dgp: Option<DgpSpec> = inputs.dgp.as_deref().map(|d| load("dgp", d)).transpose()?;
            let model = pick("model", &inputs.model, dgp.as_ref(), |d| d.model.clone())?;
            let theta = pick("theta", &inputs.theta, dgp.as_ref(), |d| d.theta.clone())?;
            let g: LatentDist = pick("gu", &inputs.gu, dgp.as_ref(), |d| d.latent.clone())?;
            let f = load_f(&model, &inputs.f)?;
            let report = check_structure(&model, &theta, &g, &f, &measure.options(inputs.tol))?;
            emit(&cli.out, &json(&report)?)?;
            eprintln!(
                "{} (min slack {:.6}, tol {:.3e})",
                if report.pass { "pass" } else { "fail" },
                report.min_slack,
                report.tol
            );
            return Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Identify { scan, gu, measure } => {
            let model: ModelSpec = load("model", &scan.model)?;
            let grid: ThetaGrid = load("grid", &scan.grid)?;
            let family = match gu {
                Some(g) => load("gu", &g)?,
                None => GFamily::PiecewiseUniform,
            };
            let f = load_f(&model, &scan.f)?;
            let set = identified_set_scan(&model, &grid, &family, &f, &measure.options(scan.tol))?;
            emit_grid(&cli.out, &scan.hull, &set)?;
        }
        Command::Outer { scan } => {
            let model: ModelSpec = load("model", &scan.model)?;
            let grid: ThetaGrid = load("grid", &scan.grid)?;
            let f = load_f(&model, &scan.f)?;
            let opts = CheckOptions { tol: scan.tol, ..CheckOptions::default() };
            let set = outer_set_scan(&model, &grid, &f, &opts)?;
            emit_grid(&cli.out, &scan.hull, &set)?;
        }
        Command::Profile { scan, w_grid } => {
            let model: ModelSpec = load("model", &scan.model)?;
            let grid: ThetaGrid = load("grid", &scan.grid)?;
            let f = load_f(&model, &scan.f)?;
            let opts = ProfileOptions {
                w_grid: w_grid.as_deref().map(|w| load("w grid", w)).transpose()?,
                tol: scan.tol.unwrap_or(0.0),
            };
            let set = profile_bounds_2p_binary(&model, &grid, &f, &opts)?;
            emit_grid(&cli.out, &scan.hull, &set)?;
        }
        Command::Simulate { dgp, n, seed, exact, draws } => {
            let dgp: DgpSpec = load("dgp", &dgp)?;
            if exact {
                emit(&cli.out, &json(&exact_f(&dgp, draws, seed)?)?)?;
            } else {
                let mut buf = Vec::new();
                simulate_panel(&dgp, n, seed, &mut buf)?;
                emit(&cli.out, &String::from_utf8(buf)?)?;
            }
        }
        Command::Linear { dgp } => {
            let dgp: DgpSpec = load("dgp", &dgp)?;
            let beta = linear_panel_beta(&linear_moments(&dgp)?)?;
            emit(&cli.out, &format!("{beta}\n"))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
