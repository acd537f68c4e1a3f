//! Command-line front end: `synthesize`, `evaluate` and `verify`.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 solver ran out of
//! cycles before converging (results are still written), 3 verification
//! failure.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{ConfigDocument, CutSpec, RunMode};
use crate::error::{Error, Result};
use crate::io::{self, GridCut, Summary};
use crate::metrics::{evaluate_grid, npb, rse, NpbGrid};
use crate::operators::Operators;
use crate::pattern::build_desired;
use crate::scene::planar_element_grid;
use crate::solver::{self, BcdOutcome, PhaseVector};
use crate::verify;

#[derive(Parser)]
#[command(name = "risbeam", version, about = "Space-frequency beampattern synthesis for RIS-fed radar transmitters")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthesis described by a config document and write grids
    Synthesize(SynthesizeArgs),
    /// Recompute metrics from stored signals and phases
    Evaluate(EvaluateArgs),
    /// Cross-check the implementation against its slow-path oracles
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct SynthesizeArgs {
    /// Config document (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long)]
    pub out: PathBuf,
    /// Override the solver mode (ris | mimo)
    #[arg(long)]
    pub mode: Option<String>,
    /// Override the RNG seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the restart count
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Override the pattern height
    #[arg(long)]
    pub height: Option<f64>,
    /// Run the height calibration search before the final synthesis
    #[arg(long)]
    pub calibrate_height: bool,
    /// Additional NPB cut, e.g. `f=-25e6`, `el=-22.5`, `az=33.75` (repeatable)
    #[arg(long = "cut")]
    pub cuts: Vec<String>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Stored signal samples (signals.csv)
    #[arg(long)]
    pub signals: PathBuf,
    /// Stored RIS phases (phases.csv); not used in MIMO mode
    #[arg(long)]
    pub phases: Option<PathBuf>,
    /// Config document the run was made with
    #[arg(long)]
    pub config: PathBuf,
    /// Optional directory for recomputed NPB cuts
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Random trials per check; 0 is a vacuous pass
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// RNG seed for the generated scenes
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Flip the sign of the production propagation delays to prove the
    /// checks can fail
    #[arg(long)]
    pub inject_fault: bool,
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    run_from(std::env::args())
}

/// Parses the given arguments and dispatches; returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path too
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { 0 } else { 1 };
        }
    };
    let result = match cli.command {
        Command::Synthesize(a) => cmd_synthesize(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Verify(a) => cmd_verify(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Engine plus desired pattern assembled from a config document.
struct Assembled {
    ops: Operators,
    mode: RunMode,
}

fn assemble(doc: &ConfigDocument) -> Result<Assembled> {
    let cfg = doc.scene_config()?;
    let grid = doc.build_grid()?;
    let op_opts = doc.operator_options();
    let (ops, mode) = match doc.solver.mode {
        RunMode::Ris => {
            let geom = doc.build_geometry()?;
            (Operators::new_ris(&cfg, &geom, grid, &op_opts)?, RunMode::Ris)
        }
        RunMode::Mimo => {
            let elements = planar_element_grid(cfg.ris_rows, cfg.ris_cols, cfg.element_spacing_m)?;
            (Operators::new_mimo(&cfg, &elements, grid, &op_opts)?, RunMode::Mimo)
        }
    };
    Ok(Assembled { ops, mode })
}

pub fn cmd_synthesize(args: &SynthesizeArgs) -> Result<i32> {
    let mut doc = ConfigDocument::from_path(&args.config)?;
    // apply overrides so the echoed config reproduces this run
    if let Some(mode) = &args.mode {
        doc.solver.mode = mode.parse()?;
    }
    if let Some(seed) = args.seed {
        doc.solver.seed = seed;
    }
    if let Some(restarts) = args.restarts {
        doc.solver.restarts = restarts;
    }
    if let Some(height) = args.height {
        doc.pattern.height = Some(height);
        doc.pattern.calibrate = None;
    }
    if args.calibrate_height && doc.pattern.calibrate.is_none() {
        let h = doc.pattern.height.ok_or_else(|| {
            Error::Config("--calibrate-height needs a height or a calibrate range".into())
        })?;
        doc.pattern.calibrate = Some(crate::config::CalibrateSection { lo: h / 10.0, hi: h * 10.0 });
        doc.pattern.height = None;
    }
    doc.outputs.cuts.extend(args.cuts.iter().cloned());
    doc.validate()?;

    let started = Instant::now();
    let assembled = assemble(&doc)?;
    let ops = &assembled.ops;
    let opts = doc.solver_options();
    let boxes = doc.pattern_boxes();

    let (height, calibrated) = match (doc.pattern.height, doc.pattern.calibrate) {
        (Some(h), None) => (h, None),
        (None, Some(range)) => {
            eprintln!("calibrating pattern height over [{}, {}]…", range.lo, range.hi);
            let h = solver::calibrate_height(ops, &boxes, &opts, (range.lo, range.hi))?;
            eprintln!("calibrated height: {h}");
            (h, Some(h))
        }
        _ => unreachable!("validated"),
    };
    let desired = build_desired(&boxes, height, ops.grid())?;

    let outcome = match assembled.mode {
        RunMode::Ris => solver::run_bcd(ops, &desired, &opts)?,
        RunMode::Mimo => solver::run_mimo_baseline(ops, &desired, &opts)?,
    };

    std::fs::create_dir_all(&args.out)?;
    write_outputs(&args.out, &doc, ops, &outcome, assembled.mode, calibrated, started)?;

    match outcome.rse {
        Some(r) => println!("rse = {r:.6}, cycles = {}, converged = {}", outcome.cycles, outcome.converged),
        None => println!("cycles = {}, converged = {} (pattern has no energy; no RSE)", outcome.cycles, outcome.converged),
    }
    Ok(if outcome.converged { 0 } else { 2 })
}

fn write_outputs(
    out: &Path,
    doc: &ConfigDocument,
    ops: &Operators,
    outcome: &BcdOutcome,
    mode: RunMode,
    calibrated: Option<f64>,
    started: Instant,
) -> Result<()> {
    // echo the effective config; a calibrated height is pinned so the
    // echo re-runs deterministically
    let mut echo = doc.clone();
    if let Some(h) = calibrated {
        echo.pattern.height = Some(h);
        echo.pattern.calibrate = None;
    }
    let grid = evaluate_grid(ops, &outcome.phases, &outcome.signals)?;
    let summary = Summary {
        mode: match mode {
            RunMode::Ris => "ris".into(),
            RunMode::Mimo => "mimo".into(),
        },
        rse: outcome.rse,
        final_objective: outcome.matching_error,
        cycles: outcome.cycles,
        converged: outcome.converged,
        seed: outcome.seed,
        wall_seconds: started.elapsed().as_secs_f64(),
        scene_fingerprint: ops.fingerprint(),
        calibrated_height: calibrated,
        objective_history: outcome.objective_history.clone(),
        config: echo,
    };
    io::write_summary(&out.join("summary.toml"), &summary)?;
    io::write_signals(&out.join("signals.csv"), &outcome.signals)?;
    if mode == RunMode::Ris {
        io::write_phases(&out.join("phases.csv"), &outcome.phases)?;
    }
    match npb(&grid) {
        Ok(normalized) => write_cuts(out, doc, ops, &normalized)?,
        Err(Error::ZeroGrid) => eprintln!("warning: all-zero beampattern, skipping NPB cuts"),
        Err(e) => return Err(e),
    }
    Ok(())
}

fn nearest_index(axis: &[f64], target: f64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, &v) in axis.iter().enumerate() {
        let d = (v - target).abs();
        if d < best_dist {
            best_dist = d;
            best = i;
        }
    }
    best
}

fn write_cuts(out: &Path, doc: &ConfigDocument, ops: &Operators, normalized: &NpbGrid) -> Result<()> {
    let grid = ops.grid();
    let db = normalized.to_db();
    let nt = grid.thetas.len();
    let np = grid.phis.len();
    let l_count = nt * np;
    let thetas_deg: Vec<f64> = grid.thetas.iter().map(|t| t.to_degrees()).collect();
    let phis_deg: Vec<f64> = grid.phis.iter().map(|p| p.to_degrees()).collect();
    for spec in doc.cut_specs()? {
        let (name, cut) = match spec {
            CutSpec::Freq(f) => {
                let k = nearest_index(&grid.freqs, f);
                let mut values = Vec::with_capacity(l_count);
                for t in 0..nt {
                    for p in 0..np {
                        values.push(db[k * l_count + t * np + p]);
                    }
                }
                (
                    format!("npb_f_{:.0}Hz.csv", grid.freqs[k]),
                    GridCut {
                        row_label: "theta_deg".into(),
                        col_label: "phi_deg".into(),
                        row_axis: thetas_deg.clone(),
                        col_axis: phis_deg.clone(),
                        values,
                    },
                )
            }
            CutSpec::Elevation(deg) => {
                let t = nearest_index(&thetas_deg, deg);
                let mut values = Vec::with_capacity(grid.freq_count() * np);
                for k in 0..grid.freq_count() {
                    for p in 0..np {
                        values.push(db[k * l_count + t * np + p]);
                    }
                }
                (
                    format!("npb_el_{:.2}deg.csv", thetas_deg[t]),
                    GridCut {
                        row_label: "freq_hz".into(),
                        col_label: "phi_deg".into(),
                        row_axis: grid.freqs.clone(),
                        col_axis: phis_deg.clone(),
                        values,
                    },
                )
            }
            CutSpec::Azimuth(deg) => {
                let p = nearest_index(&phis_deg, deg);
                let mut values = Vec::with_capacity(grid.freq_count() * nt);
                for k in 0..grid.freq_count() {
                    for t in 0..nt {
                        values.push(db[k * l_count + t * np + p]);
                    }
                }
                (
                    format!("npb_az_{:.2}deg.csv", phis_deg[p]),
                    GridCut {
                        row_label: "freq_hz".into(),
                        col_label: "theta_deg".into(),
                        row_axis: grid.freqs.clone(),
                        col_axis: thetas_deg.clone(),
                        values,
                    },
                )
            }
        };
        io::write_grid_cut(&out.join(name), &cut)?;
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<i32> {
    let doc = ConfigDocument::from_path(&args.config)?;
    let assembled = assemble(&doc)?;
    let ops = &assembled.ops;
    let signals = io::read_signals(&args.signals)?;
    if signals.source_count() != ops.source_count()
        || signals.samples_per_source() != ops.sample_count()
    {
        return Err(Error::Dimension {
            what: "stored signal block",
            expected: ops.source_count() * ops.sample_count(),
            got: signals.source_count() * signals.samples_per_source(),
        });
    }
    signals.check_power(ops.power_budget())?;
    let phases = match (assembled.mode, &args.phases) {
        (RunMode::Mimo, _) => PhaseVector::all_ones(ops.element_count()),
        (RunMode::Ris, Some(path)) => {
            let x = io::read_phases(path)?;
            if x.len() != ops.element_count() {
                return Err(Error::Dimension {
                    what: "stored phase vector",
                    expected: ops.element_count(),
                    got: x.len(),
                });
            }
            x
        }
        (RunMode::Ris, None) => {
            return Err(Error::Config("--phases is required in RIS mode".into()))
        }
    };
    let height = doc
        .pattern
        .height
        .ok_or_else(|| Error::Config("evaluate needs a fixed pattern height".into()))?;
    let desired = build_desired(&doc.pattern_boxes(), height, ops.grid())?;
    let grid = evaluate_grid(ops, &phases, &signals)?;
    let error = rse(&grid, &desired, &ops.grid().weights)?;
    println!("rse = {error:.12}");
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        match npb(&grid) {
            Ok(normalized) => write_cuts(out, &doc, ops, &normalized)?,
            Err(Error::ZeroGrid) => eprintln!("warning: all-zero beampattern, skipping NPB cuts"),
            Err(e) => return Err(e),
        }
    }
    Ok(0)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    if args.trials == 0 {
        eprintln!("warning: --trials 0 runs no checks; reporting a vacuous pass");
    }
    let outcomes = verify::run_all(args.trials, args.seed, args.inject_fault)?;
    println!("{:<22} {:>7} {:>12} {:>11}  result", "check", "trials", "worst", "tolerance");
    let mut all_passed = true;
    for c in &outcomes {
        all_passed &= c.passed;
        println!(
            "{:<22} {:>7} {:>12.3e} {:>11.1e}  {}",
            c.name,
            c.trials,
            c.worst,
            c.tolerance,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    if !all_passed {
        for c in outcomes.iter().filter(|c| !c.passed) {
            eprintln!("failed: {} ({})", c.name, c.detail);
        }
        return Ok(3);
    }
    Ok(0)
}
