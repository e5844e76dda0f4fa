//! `she`: solve, sweep and inspect staircase SHE switching angles.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! run completes but at least one operating point is infeasible.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use she_core::report::{self, RunConfig, SolveRecord};
use she_core::strategy::{self, Method, OperatingPoint};
use she_core::{InverterConfig, SwitchingAngles};

const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "she",
    version,
    about = "Selective harmonic elimination for cascaded H-bridge inverters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one operating point and write `solve.json`.
    Solve(SolveArgs),
    /// Solve a per-unit grid for each method and write the CSV tables.
    Sweep(SweepArgs),
    /// Write one period of the waveform and its harmonic spectrum.
    Synth(SynthArgs),
    /// Build the THD comparison from a classic and a proposed sweep CSV.
    Compare(CompareArgs),
}

/// Settings shared by `solve` and `sweep`; each flag overrides the config file.
#[derive(Args)]
struct RunFlags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cells: Option<usize>,
    /// DC voltage of each cell, volts.
    #[arg(long)]
    vdc: Option<f64>,
    /// Base voltage for per-unit values (default cells·vdc).
    #[arg(long)]
    base: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    swarm: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Harmonic orders to eliminate, e.g. `3,5`.
    #[arg(long)]
    eliminate: Option<String>,
    #[arg(long)]
    thd_max_order: Option<u32>,
    /// Per-unit output at or below which the proposed method halves vdc.
    #[arg(long)]
    threshold: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats, e.g. `csv,json`.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    pu: f64,
    #[arg(long, default_value = "classic")]
    method: String,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct SweepArgs {
    /// Per-unit grid, e.g. `0.1,0.2,0.3`.
    #[arg(long)]
    pu: Option<String>,
    /// Methods to run, e.g. `classic,proposed`.
    #[arg(long)]
    method: Option<String>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct SynthArgs {
    /// Switching angles in degrees, e.g. `10,20,30`.
    #[arg(long, conflicts_with = "record", required_unless_present = "record")]
    angles: Option<String>,
    /// A `solve.json` record; its effective plant and angles are used.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long, default_value_t = 3, conflicts_with = "record")]
    cells: usize,
    #[arg(long, default_value_t = 100.0, conflicts_with = "record")]
    vdc: f64,
    #[arg(long, default_value_t = report::DEFAULT_SAMPLES)]
    samples: usize,
    /// Fundamental frequency, hertz.
    #[arg(long, default_value_t = report::DEFAULT_FREQUENCY_HZ)]
    freq: f64,
    /// Highest harmonic order in `spectrum.csv`.
    #[arg(long, default_value_t = 49)]
    max_order: u32,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Sweep CSV supplying the classic rows.
    classic: PathBuf,
    /// Sweep CSV supplying the proposed rows.
    proposed: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_list<T>(what: &str, text: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| anyhow::anyhow!("invalid {what} `{s}`: {e}"))
        })
        .collect()
}

fn run_config(flags: &RunFlags) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if flags.cells.is_some() || flags.vdc.is_some() {
        let cells = flags.cells.unwrap_or(cfg.plant.cells());
        let vdc = flags.vdc.unwrap_or(cfg.plant.vdc());
        cfg.plant = InverterConfig::new(cells, vdc)?;
    }
    if let Some(base) = flags.base {
        cfg.plant = cfg.plant.with_base_voltage(base)?;
    }
    if let Some(seed) = flags.seed {
        cfg.pso.seed = seed;
    }
    if let Some(n) = flags.swarm {
        cfg.pso.swarm_size = n;
    }
    if let Some(n) = flags.iters {
        cfg.pso.max_iterations = n;
    }
    if let Some(list) = &flags.eliminate {
        cfg.she.eliminate_orders = parse_list("harmonic order", list)?;
    }
    if let Some(n) = flags.thd_max_order {
        cfg.she.thd_max_order = n;
    }
    if let Some(t) = flags.threshold {
        cfg.threshold = t;
    }
    if let Some(dir) = &flags.out {
        cfg.output_dir.clone_from(dir);
    }
    if let Some(list) = &flags.format {
        cfg.formats = parse_list("format", list)?;
    }
    Ok(cfg)
}

fn solve(args: &SolveArgs) -> Result<u8> {
    let mut cfg = run_config(&args.run)?;
    let method: Method = args.method.parse()?;
    cfg.pu_grid = vec![args.pu];
    cfg.methods = vec![method];
    cfg.validate()?;
    let point = OperatingPoint::new(args.pu, method)?;
    let solution = strategy::solve_point(&cfg.plant, &point, &cfg.pso, &cfg.she, cfg.threshold)?;
    let record = SolveRecord::new(&cfg.plant, cfg.threshold, &solution, &cfg.pso, &cfg.she);
    let path = cfg.output_dir.join("solve.json");
    report::write_atomic(&path, record.to_json()?.as_bytes())?;

    let deg: Vec<String> = record
        .angles_deg
        .iter()
        .map(|a| format!("{a:.4}"))
        .collect();
    println!(
        "pu {} {}: vdc_eff {} V, angles [{}] deg",
        record.v_out_pu,
        record.method,
        record.effective_vdc,
        deg.join(", ")
    );
    println!(
        "v1 {:.4} V (target {:.4} V), THD total {:.2}%, spectral {:.2}%",
        record.achieved_v1, record.target_v1, record.thd_total_pct, record.thd_spectral_pct
    );
    for h in &record.harmonics {
        println!("  v{}: {:.3e} pu", h.order, h.per_unit);
    }
    println!(
        "{} -> {}",
        if record.feasible {
            "feasible"
        } else {
            "infeasible"
        },
        path.display()
    );
    Ok(if record.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn sweep(args: &SweepArgs) -> Result<u8> {
    let mut cfg = run_config(&args.run)?;
    if let Some(list) = &args.pu {
        cfg.pu_grid = parse_list("per-unit value", list)?;
    }
    if let Some(list) = &args.method {
        cfg.methods = parse_list("method", list)?;
    }
    cfg.validate()?;
    let table = strategy::sweep(
        &cfg.plant,
        &cfg.pu_grid,
        &cfg.methods,
        &cfg.pso,
        &cfg.she,
        cfg.threshold,
    )?;
    let written = report::write_sweep_outputs(&table, &cfg.output_dir, &cfg.formats)?;
    println!(
        "{:>6} {:>9} {:>8} {:>10} {:>9}",
        "pu", "method", "vdc_eff", "THD%", "feasible"
    );
    for r in &table.rows {
        println!(
            "{:>6.3} {:>9} {:>8.1} {:>10.2} {:>9}",
            r.v_out_pu, r.method, r.effective_vdc, r.thd_total_pct, r.feasible
        );
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(if table.infeasible_count() > 0 {
        EXIT_INFEASIBLE
    } else {
        0
    })
}

fn synth(args: &SynthArgs) -> Result<u8> {
    let (plant, angles) = match (&args.record, &args.angles) {
        (Some(path), _) => {
            let rec = SolveRecord::load(path)?;
            (rec.effective_plant, rec.angles()?)
        }
        (None, Some(list)) => {
            let deg: Vec<f64> = parse_list("angle", list)?;
            let plant = InverterConfig::new(args.cells, args.vdc)?;
            if deg.len() != plant.cells() {
                bail!("{} angles given for {} cells", deg.len(), plant.cells());
            }
            (plant, SwitchingAngles::from_degrees(&deg)?)
        }
        (None, None) => bail!("either --angles or --record is required"),
    };
    let wave = report::waveform_csv(&plant, &angles, args.samples, args.freq)?;
    let spec = report::spectrum_csv(&plant, &angles, args.max_order)?;
    for (name, body) in [("waveform.csv", wave), ("spectrum.csv", spec)] {
        let path = args.out.join(name);
        report::write_atomic(&path, body.as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn load_sweep(path: &Path) -> Result<she_core::SweepTable> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    report::parse_sweep_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

fn compare(args: &CompareArgs) -> Result<u8> {
    let classic = load_sweep(&args.classic)?;
    let proposed = load_sweep(&args.proposed)?;
    let rows = classic
        .rows
        .into_iter()
        .filter(|r| r.method == Method::Classic)
        .chain(
            proposed
                .rows
                .into_iter()
                .filter(|r| r.method == Method::Proposed),
        )
        .collect();
    let table = she_core::SweepTable { rows };
    let cmp = strategy::compare_methods(&table)?;
    let path = args.out.join("comparison.csv");
    report::write_atomic(&path, report::comparison_csv(&cmp)?.as_bytes())?;
    println!(
        "{:>6} {:>10} {:>10} {:>12}",
        "pu", "classic%", "proposed%", "improvement%"
    );
    for r in &cmp {
        println!(
            "{:>6.3} {:>10.2} {:>10.2} {:>12.2}",
            r.v_out_pu, r.thd_classic_pct, r.thd_proposed_pct, r.improvement_pct
        );
    }
    println!("wrote {}", path.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Synth(a) => synth(a),
        Command::Compare(a) => compare(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use she_core::report::Format;

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list::<u32>("order", "3, 5,").unwrap(), vec![3, 5]);
        assert!(parse_list::<u32>("order", "").unwrap().is_empty());
        assert!(parse_list::<f64>("pu", "0.1,x").is_err());
        assert_eq!(
            parse_list::<Format>("format", "csv,json").unwrap(),
            vec![Format::Csv, Format::Json]
        );
    }

    #[test]
    fn flags_override_plant() {
        let cli = Cli::try_parse_from([
            "she", "solve", "--pu", "0.5", "--vdc", "50", "--base", "300",
        ])
        .unwrap();
        let Command::Solve(a) = cli.command else {
            panic!()
        };
        let cfg = run_config(&a.run).unwrap();
        assert_eq!(cfg.plant.vdc(), 50.0);
        assert_eq!(cfg.plant.cells(), 3);
        assert_eq!(cfg.plant.base_voltage(), 300.0);
    }
}
