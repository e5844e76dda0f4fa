//! Acceptance checks on the reference plant (S = 3, vdc = 100 V, base 300 V).
//!
//! Runs as a plain binary so that every criterion prints its own PASS/FAIL
//! line; the process fails if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use she_core::problem::{thd_spectral, thd_total, HarmonicWeighting, SheOptions, SheProblem};
use she_core::report::{self, Format, RunConfig};
use she_core::solver::grid_oracle;
use she_core::strategy::{resolve_plant, solve_point, sweep, Method, OperatingPoint, SweepTable};
use she_core::waveform::{self, InverterConfig, SwitchingAngles};

const TABLE_PU: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const REFERENCE_CLASSIC: [f64; 5] = [158.62, 84.66, 47.29, 31.29, 30.41];
const REFERENCE_PROPOSED: [f64; 5] = [87.94, 33.23, 29.59, 18.66, 20.61];

const SWEEP_TIME_LIMIT: Duration = Duration::from_secs(120);
const THD_REL_TOL: f64 = 0.15;
const ELIMINATION_TOL: f64 = 1e-3;
const EXISTENCE_GRID_DEG: f64 = 0.5;
const GRID_TIME_LIMIT: Duration = Duration::from_secs(60);
const PARSEVAL_ABS_TOL: f64 = 0.005;
const PARSEVAL_ORDER: u32 = 10_001;
const SQUARE_WAVE_TOL: f64 = 1e-6;
const TRACKING_REL_TOL: f64 = 0.01;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    details: Vec<String>,
}

fn row_thd(table: &SweepTable, pu: f64, m: Method) -> f64 {
    table
        .rows
        .iter()
        .find(|r| r.v_out_pu == pu && r.method == m)
        .expect("row present")
        .thd_total_pct
}

fn directional(table: &SweepTable, elapsed: Duration) -> Outcome {
    let mut pass = elapsed < SWEEP_TIME_LIMIT;
    let mut details = vec![format!(
        "10-solve sweep took {:.1} s",
        elapsed.as_secs_f64()
    )];
    for pu in TABLE_PU {
        let (c, p) = (
            row_thd(table, pu, Method::Classic),
            row_thd(table, pu, Method::Proposed),
        );
        let ok = p < c;
        pass &= ok;
        details.push(format!(
            "pu {pu}: classic {c:.2}%  proposed {p:.2}%  {}",
            if ok { "ok" } else { "NOT LOWER" }
        ));
    }
    Outcome {
        id: "1",
        title: "proposed thd_total below classic at every tabulated pu",
        pass,
        details,
    }
}

fn quantitative(table: &SweepTable) -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for (i, pu) in TABLE_PU.into_iter().enumerate() {
        for (m, reference) in [
            (Method::Classic, REFERENCE_CLASSIC[i]),
            (Method::Proposed, REFERENCE_PROPOSED[i]),
        ] {
            let got = row_thd(table, pu, m);
            let rel = (got - reference) / reference;
            let ok = rel.abs() <= THD_REL_TOL;
            pass &= ok;
            details.push(format!(
                "pu {pu} {m:<8}: achieved {got:6.2}%  reference {reference:6.2}%  rel {:+6.1}%  {}",
                100.0 * rel,
                if ok { "ok" } else { "OUT OF BAND" }
            ));
        }
    }
    Outcome {
        id: "2",
        title: "thd_total within ±15% of the reference THD values",
        pass,
        details,
    }
}

fn elimination() -> Outcome {
    let cfg = InverterConfig::reference();
    let cfg_run = RunConfig::default();
    let mut pass = true;
    let mut details = Vec::new();
    for (pu, m) in [(0.8, Method::Classic), (0.3, Method::Proposed)] {
        let point = OperatingPoint::new(pu, m).unwrap();
        let resolved = resolve_plant(&cfg, &point, cfg_run.threshold).unwrap();
        let plant = resolved.plant;
        let ratios = |a: &SwitchingAngles| {
            let v1 = waveform::fundamental(&plant, a);
            let h = |n| (waveform::harmonic_amplitude(&plant, a, n) / v1).abs();
            (h(3), h(5))
        };

        // Existence: if an exact root exists, the grid tuple nearest to it has
        // every angle within half a step, so each of the three residuals is
        // at most (4·vdc/π)·S·step/2 and their sum at most three times that.
        // The unweighted grid minimum of that sum must then be below it too.
        let step = EXISTENCE_GRID_DEG.to_radians();
        let per_residual = 4.0 * plant.vdc() / PI * plant.cells() as f64 * step / 2.0;
        let bound = 3.0 * per_residual;
        let l1 = SheOptions {
            weight_fundamental: 1.0,
            weight_harmonics: 1.0,
            harmonic_weighting: HarmonicWeighting::Uniform,
            ..SheOptions::default()
        };
        let l1_problem = SheProblem::new(plant, resolved.effective_target_pu, l1).unwrap();
        let grid = grid_oracle(&l1_problem, step).unwrap();
        let worst = grid.residuals.max_abs();
        let exists = worst <= bound;
        let (g3, g5) = ratios(&grid.angles);

        let sol = solve_point(&cfg, &point, &cfg_run.pso, &cfg_run.she, cfg_run.threshold).unwrap();
        let (s3, s5) = ratios(&sol.row.angles);
        let ok = exists && s3 < ELIMINATION_TOL && s5 < ELIMINATION_TOL;
        pass &= ok;
        details.push(format!(
            "pu {pu} {m} (effective {:.1} pu): grid 0.5° max residual {worst:.3} V (bound {bound:.3} V), \
             |v3|/v1 {g3:.2e} |v5|/v1 {g5:.2e} -> root {}; PSO |v3|/v1 {s3:.2e} |v5|/v1 {s5:.2e}  {}",
            resolved.effective_target_pu,
            if exists { "confirmed" } else { "NOT FOUND" },
            if ok { "ok" } else { "FAIL" }
        ));
    }
    Outcome {
        id: "3",
        title: "3rd and 5th eliminated below 1e-3 of v1 at feasible points",
        pass,
        details,
    }
}

fn oracle_dominance(table: &SweepTable, run: &RunConfig) -> Outcome {
    let cfg = InverterConfig::reference();
    let mut pass = true;
    let mut details = Vec::new();
    for r in &table.rows {
        let point = OperatingPoint::new(r.v_out_pu, r.method).unwrap();
        let resolved = resolve_plant(&cfg, &point, run.threshold).unwrap();
        let problem = SheProblem::new(
            resolved.plant,
            resolved.effective_target_pu,
            run.she.clone(),
        )
        .unwrap();
        let start = Instant::now();
        let grid = grid_oracle(&problem, 1f64.to_radians()).unwrap();
        let took = start.elapsed();
        let ok = r.best_cost <= grid.best_cost && took < GRID_TIME_LIMIT;
        pass &= ok;
        details.push(format!(
            "pu {} {:<8}: PSO {:.6e}  grid(1°) {:.6e}  grid time {:.2} s  {}",
            r.v_out_pu,
            r.method,
            r.best_cost,
            grid.best_cost,
            took.as_secs_f64(),
            if ok { "ok" } else { "FAIL" }
        ));
    }
    Outcome {
        id: "4",
        title: "PSO cost never above the 1° grid optimum",
        pass,
        details,
    }
}

fn identities(table: &SweepTable) -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();

    let mut even_ok = true;
    for r in &table.rows {
        let plant = InverterConfig::new(3, r.effective_vdc).unwrap();
        for n in (2..=200).step_by(2) {
            even_ok &= waveform::harmonic_amplitude(&plant, &r.angles, n) == 0.0;
        }
    }
    pass &= even_ok;
    details.push(format!(
        "even harmonics 2..200 exactly zero on all solved rows: {even_ok}"
    ));

    let mut vmax_ok = true;
    for (s, vdc) in [(3usize, 100.0), (3, 50.0), (1, 1.0), (7, 48.0)] {
        let cfg = InverterConfig::new(s, vdc).unwrap();
        let want = 4.0 * s as f64 * vdc / PI;
        vmax_ok &= (cfg.v1_max() - want).abs() <= f64::EPSILON * want;
    }
    pass &= vmax_ok;
    details.push(format!(
        "v1_max = 4·S·vdc/π to machine precision: {vmax_ok}"
    ));

    let cfg = InverterConfig::reference();
    let mut preserve_ok = true;
    for pu in TABLE_PU {
        let r = resolve_plant(
            &cfg,
            &OperatingPoint::new(pu, Method::Proposed).unwrap(),
            0.5,
        )
        .unwrap();
        let lhs = 3.0 * r.effective_vdc * r.effective_target_pu;
        let rhs = 3.0 * cfg.vdc() * pu;
        preserve_ok &= (lhs - rhs).abs() <= f64::EPSILON * rhs;
    }
    pass &= preserve_ok;
    details.push(format!(
        "S·vdc_eff·pu_eff = S·vdc·pu to machine precision: {preserve_ok}"
    ));

    let mut worst: f64 = 0.0;
    for r in &table.rows {
        let plant = InverterConfig::new(3, r.effective_vdc).unwrap();
        let spec = thd_spectral(&plant, &r.angles, PARSEVAL_ORDER).unwrap();
        let total = thd_total(&plant, &r.angles).unwrap();
        worst = worst.max((spec - total).abs());
    }
    let parseval_ok = worst <= PARSEVAL_ABS_TOL;
    pass &= parseval_ok;
    details.push(format!(
        "max |thd_spectral(10001) - thd_total| over solved rows: {worst:.2e} (limit {PARSEVAL_ABS_TOL})"
    ));

    let one = InverterConfig::new(1, 100.0).unwrap();
    let square = SwitchingAngles::new(vec![1e-12]).unwrap();
    let thd = thd_total(&one, &square).unwrap();
    let want = (PI * PI / 8.0 - 1.0).sqrt();
    let sq_ok = (thd - want).abs() <= SQUARE_WAVE_TOL;
    pass &= sq_ok;
    details.push(format!(
        "square-wave THD {thd:.9} vs sqrt(π²/8 - 1) = {want:.9}"
    ));

    Outcome {
        id: "5",
        title: "analytic identities",
        pass,
        details,
    }
}

fn determinism(first: &SweepTable, run: &RunConfig) -> Outcome {
    let second = sweep(
        &run.plant,
        &run.pu_grid,
        &run.methods,
        &run.pso,
        &run.she,
        run.threshold,
    )
    .unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = report::write_sweep_outputs(first, a.path(), &[Format::Csv, Format::Json]).unwrap();
    let fb = report::write_sweep_outputs(&second, b.path(), &[Format::Csv, Format::Json]).unwrap();
    let mut pass = fa.len() == fb.len();
    let mut details = Vec::new();
    for (x, y) in fa.iter().zip(&fb) {
        let same = std::fs::read(x).unwrap() == std::fs::read(y).unwrap();
        pass &= same;
        details.push(format!(
            "{}: {}",
            x.file_name().unwrap().to_string_lossy(),
            if same { "identical" } else { "DIFFERS" }
        ));
    }
    Outcome {
        id: "6",
        title: "repeated sweeps give byte-identical outputs",
        pass,
        details,
    }
}

fn tracking(table: &SweepTable, run: &RunConfig) -> Outcome {
    // Table grid plus a denser grid over the whole range.
    let dense: Vec<f64> = (1..=20).map(|k| k as f64 * 0.05).collect();
    let wide = sweep(
        &run.plant,
        &dense,
        &Method::ALL,
        &run.pso,
        &run.she,
        run.threshold,
    )
    .unwrap();
    let mut feasible = 0;
    let mut worst: f64 = 0.0;
    for r in table.rows.iter().chain(&wide.rows).filter(|r| r.feasible) {
        feasible += 1;
        let want = r.v_out_pu * 300.0;
        worst = worst.max(((r.achieved_v1 - want) / want).abs());
    }
    let pass = feasible > 0 && worst < TRACKING_REL_TOL;
    let details = vec![format!(
        "{feasible} feasible rows (of {}), worst |v1 - pu·300 V|/(pu·300 V) = {worst:.2e}",
        table.rows.len() + wide.rows.len()
    )];
    Outcome {
        id: "7",
        title: "achieved fundamental within 1% of pu·300 V on feasible rows",
        pass,
        details,
    }
}

fn main() -> ExitCode {
    let run = RunConfig::default();
    let start = Instant::now();
    let table = sweep(
        &run.plant,
        &run.pu_grid,
        &run.methods,
        &run.pso,
        &run.she,
        run.threshold,
    )
    .unwrap();
    let elapsed = start.elapsed();

    let outcomes = [
        directional(&table, elapsed),
        quantitative(&table),
        elimination(),
        oracle_dominance(&table, &run),
        identities(&table),
        determinism(&table, &run),
        tracking(&table, &run),
    ];

    let mut failed = 0;
    for o in &outcomes {
        println!(
            "[{}] criterion {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.title
        );
        for d in &o.details {
            println!("       {d}");
        }
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        outcomes.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
