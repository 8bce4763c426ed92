//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 when a verification fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds;
use crate::comparative;
use crate::consideration::ConsiderationStructure;
use crate::curvature::DemandSpec;
use crate::error::{Error, Result};
use crate::margin_game::{self, EquilibriumProfile, SolverTag};
use crate::oracle;
use crate::passthrough::{self, PassThroughReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pricedisp", version, about = "Pricing equilibria under consideration sets and cost pass-through")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Generator string (e.g. `binomial:n=2,lambda=0.5`) or path to a JSON structure.
    #[arg(long)]
    pub structure: String,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the margin game and print the equilibrium profile.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Quantile and transaction-weighted pass-through.
    Passthrough {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "unit")]
        demand: String,
        #[arg(long, default_value_t = 0.0)]
        cost: f64,
        /// Number of quantile grid points.
        #[arg(long, default_value_t = 101)]
        quantiles: usize,
        /// Report a single firm (1-based); all firms otherwise.
        #[arg(long)]
        firm: Option<usize>,
    },
    /// Pass-through envelope by demand family.
    Bounds {
        /// Marginal cost; 0.5 for the envelope and 0.25 with `--critical` when omitted.
        #[arg(long)]
        cost: Option<f64>,
        /// Number of margin grid points.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Demand rows; the standard families when omitted.
        #[arg(long)]
        demand: Vec<String>,
        /// Report the critical CES elasticity instead of the envelope.
        #[arg(long)]
        critical: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Check a profile for profitable deviations.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Profile JSON as written by `solve`; solved afresh when omitted.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Also check in price space under this demand.
        #[arg(long)]
        demand: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        cost: f64,
        #[arg(long, default_value_t = oracle::DEFAULT_PRICE_GRID)]
        grid: usize,
        #[arg(long, default_value_t = oracle::DEFAULT_GAP_TOL)]
        tol: f64,
    },
    /// Monte Carlo market simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "unit")]
        demand: String,
        #[arg(long, default_value_t = 0.0)]
        cost: f64,
        /// Second cost for a finite-difference pass-through estimate.
        #[arg(long)]
        cost_hi: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        consumers: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of price bins.
        #[arg(long, default_value_t = 20)]
        grid: usize,
    },
    /// Dominance verdicts and price changes between two structures.
    Compare {
        #[command(flatten)]
        common: Common,
        /// The second structure.
        #[arg(long)]
        against: String,
        #[arg(long, default_value = "unit")]
        demand: String,
        #[arg(long, default_value_t = 0.0)]
        cost: f64,
        #[arg(long, default_value_t = 101)]
        quantiles: usize,
        #[arg(long, default_value_t = comparative::DEFAULT_GRID)]
        grid: usize,
    },
}

fn load_structure(src: &str) -> Result<ConsiderationStructure> {
    let path = Path::new(src);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{src}: {e}")))?;
        ConsiderationStructure::from_json(&text)
    } else {
        src.parse()
    }
}

fn load_profile(path: &Path) -> Result<EquilibriumProfile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut v: Value = serde_json::from_str(&text)?;
    if let Some(inner) = v.get_mut("result") {
        v = inner.take();
    }
    Ok(serde_json::from_value(v)?)
}

fn envelope<T: Serialize>(command: &str, config: Value, result: &T) -> Result<String> {
    let doc = json!({ "command": command, "config": config, "result": result });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn firms_of(profile: &EquilibriumProfile, firm: Option<usize>) -> Result<Vec<usize>> {
    match firm {
        Some(i) => {
            profile.dist(i)?;
            Ok(vec![i])
        }
        None => Ok((1..=profile.n()).collect()),
    }
}

/// Runs a parsed command, returning its output and exit code.
pub fn execute(cli: Cli) -> Result<(String, i32, Option<PathBuf>)> {
    match cli.command {
        Command::Solve { common } => {
            let s = load_structure(&common.structure)?;
            let p = margin_game::solve(&s)?;
            let text = match common.format {
                Format::Json => envelope("solve", json!({ "structure": common.structure }), &p)?,
                Format::Csv => {
                    let mut out = String::from("firm,u,mu\n");
                    let grid = passthrough::uniform_grid(101);
                    for d in &p.distributions {
                        for &u in &grid {
                            out.push_str(&format!("{},{},{}\n", d.firm(), u, d.quantile_eval(u)));
                        }
                    }
                    out
                }
            };
            Ok((text, EXIT_OK, common.out))
        }
        Command::Passthrough { common, demand, cost, quantiles, firm } => {
            let s = load_structure(&common.structure)?;
            let spec: DemandSpec = demand.parse()?;
            let p = margin_game::solve(&s)?;
            let grid = passthrough::uniform_grid(quantiles);
            let reports = firms_of(&p, firm)?
                .into_iter()
                .map(|i| PassThroughReport::compute(&p, i, &spec, cost, &grid))
                .collect::<Result<Vec<_>>>()?;
            let text = match common.format {
                Format::Json => envelope(
                    "passthrough",
                    json!({ "structure": common.structure, "demand": spec, "cost": cost, "quantiles": quantiles }),
                    &reports,
                )?,
                Format::Csv => {
                    let mut out = String::from("firm,u,mu,price,tau_q\n");
                    for r in &reports {
                        for line in r.to_csv().lines().skip(1) {
                            out.push_str(&format!("{},{line}\n", r.firm));
                        }
                    }
                    out
                }
            };
            Ok((text, EXIT_OK, common.out))
        }
        Command::Bounds { cost, grid, demand, critical, out, format } => {
            if critical {
                let cost = cost.unwrap_or(bounds::CRITICAL_COST);
                let r = bounds::critical_elasticity(cost)?;
                let text = match format {
                    Format::Json => envelope("bounds", json!({ "cost": cost, "critical": true }), &r)?,
                    Format::Csv => format!("eta,cost,mu_points\n{},{},{}\n", r.eta, r.cost, r.mu_points),
                };
                return Ok((text, EXIT_OK, out));
            }
            let cost = cost.unwrap_or(0.5);
            let families = if demand.is_empty() {
                bounds::default_families(cost)
            } else {
                demand.iter().map(|d| d.parse()).collect::<Result<Vec<DemandSpec>>>()?
            };
            let mu_grid = passthrough::uniform_grid(grid);
            let pts = bounds::envelope_sweep(&families, cost, &mu_grid)?;
            let text = match format {
                Format::Csv => bounds::envelope_csv(&pts),
                Format::Json => envelope("bounds", json!({ "cost": cost, "grid": grid, "families": families }), &pts)?,
            };
            Ok((text, EXIT_OK, out))
        }
        Command::Verify { common, profile, demand, cost, grid, tol } => {
            let s = load_structure(&common.structure)?;
            let p = match &profile {
                Some(path) => load_profile(path)?,
                None => margin_game::solve(&s)?,
            };
            let margin = margin_game::verify_equilibrium(&s, &p, grid, tol.max(1e-12))?;
            let mut passed = margin.passed;
            let price = match &demand {
                Some(d) => {
                    let spec: DemandSpec = d.parse()?;
                    let r = oracle::price_game_deviation_gap(&s, &p, &spec, cost, grid)?;
                    passed &= r.passed(tol);
                    Some(r)
                }
                None => None,
            };
            let mut notes = p.warnings.clone();
            if p.solver_tag == SolverTag::PureBertrand {
                notes.push("no firm has captive consumers: pure Bertrand pricing at cost, trivially an equilibrium".into());
            }
            let result = json!({ "passed": passed, "solver": p.solver_tag, "margin": margin, "price": price, "notes": notes });
            let text = envelope(
                "verify",
                json!({ "structure": common.structure, "demand": demand, "cost": cost, "grid": grid, "tol": tol }),
                &result,
            )?;
            Ok((text, if passed { EXIT_OK } else { EXIT_VERIFY_FAILED }, common.out))
        }
        Command::Simulate { common, demand, cost, cost_hi, consumers, seed, grid } => {
            let s = load_structure(&common.structure)?;
            let spec: DemandSpec = demand.parse()?;
            let p = margin_game::solve(&s)?;
            let mut cfg = oracle::SimConfig::new(consumers, seed, cost, spec.clone());
            cfg.price_grid_size = grid;
            let sim = oracle::simulate(&s, &p, &cfg)?;
            let mc = match cost_hi {
                Some(hi) => Some(oracle::mc_passthrough(&s, &p, &cfg, cost, hi)?),
                None => None,
            };
            let text = match common.format {
                Format::Csv => sim.cdf_csv(),
                Format::Json => envelope(
                    "simulate",
                    json!({ "structure": common.structure, "demand": spec, "cost": cost, "cost_hi": cost_hi,
                            "consumers": consumers, "seed": seed, "grid": grid, "replicates": cfg.replicates }),
                    &json!({ "simulation": sim, "passthrough": mc }),
                )?,
            };
            Ok((text, EXIT_OK, common.out))
        }
        Command::Compare { common, against, demand, cost, quantiles, grid } => {
            let a = load_structure(&common.structure)?;
            let b = load_structure(&against)?;
            let spec: DemandSpec = demand.parse()?;
            let pa = margin_game::solve(&a)?;
            let pb = margin_game::solve(&b)?;
            let pgf = if a.is_symmetric() && b.is_symmetric() {
                Some(comparative::pgf_dominates(&a, &b, 1, grid)?)
            } else {
                None
            };
            let shared = pa.n().min(pb.n());
            let quantile: Vec<Value> = (1..=shared)
                .map(|i| {
                    let v = comparative::quantile_dominates(pa.dist(i)?, pb.dist(i)?, grid);
                    Ok(json!({ "firm": i, "verdict": v }))
                })
                .collect::<Result<_>>()?;
            let map: Vec<(usize, usize)> = (1..=shared).map(|i| (i, i)).collect();
            let merger = comparative::merger_delta(&pa, &pb, &map, &spec, cost, &passthrough::uniform_grid(quantiles))?;
            let text = match common.format {
                Format::Csv => merger.to_csv(),
                Format::Json => envelope(
                    "compare",
                    json!({ "structure": common.structure, "against": against, "demand": spec, "cost": cost,
                            "quantiles": quantiles, "grid": grid }),
                    &json!({ "pgf": pgf, "quantile": quantile, "merger": merger }),
                )?,
            };
            Ok((text, EXIT_OK, common.out))
        }
    }
}

/// Parses `args`, runs the command and writes its output; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli).and_then(|(text, code, out)| emit(&out, &text).map(|_| code)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
