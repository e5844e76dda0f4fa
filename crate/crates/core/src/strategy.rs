//! Fixed-DC ("classic") operation versus halved-DC ("proposed") operation.
//!
//! Below the threshold the proposed method halves every cell's DC link and
//! doubles the per-unit demand handed to the SHE problem, so that
//! `S·(vdc/2)·(2·pu) = S·vdc·pu` and the output fundamental is unchanged
//! while the staircase steps shrink.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{thd_spectral, thd_total, SheOptions, SheProblem};
use crate::solver::{solve, splitmix64, PsoParams, SolveResult};
use crate::waveform::{self, InverterConfig, SwitchingAngles};

/// Per-unit output at or below which the proposed method halves the DC links.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

const TARGET_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Classic,
    Proposed,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Classic, Method::Proposed];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Classic => "classic",
            Method::Proposed => "proposed",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(Method::Classic),
            "proposed" => Ok(Method::Proposed),
            other => Err(Error::Parse {
                what: "method".into(),
                detail: format!("expected `classic` or `proposed`, got `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    v_out_pu: f64,
    method: Method,
}

impl OperatingPoint {
    pub fn new(v_out_pu: f64, method: Method) -> Result<Self> {
        check_pu(v_out_pu)?;
        Ok(Self { v_out_pu, method })
    }

    pub fn v_out_pu(&self) -> f64 {
        self.v_out_pu
    }

    pub fn method(&self) -> Method {
        self.method
    }
}

fn check_pu(pu: f64) -> Result<()> {
    if !(pu > 0.0 && pu <= 1.0) {
        return Err(Error::InvalidProblem(format!(
            "per-unit output must lie in (0, 1], got {pu}"
        )));
    }
    Ok(())
}

/// The plant and demand actually handed to the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPlant {
    /// Plant at the effective DC voltage. Its base voltage is scaled with
    /// `vdc` so that per-unit values stay relative to `S·effective_vdc`.
    pub plant: InverterConfig,
    pub effective_vdc: f64,
    pub effective_target_pu: f64,
    pub halved: bool,
}

pub fn resolve_plant(
    cfg: &InverterConfig,
    point: &OperatingPoint,
    threshold: f64,
) -> Result<ResolvedPlant> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let halved = point.method == Method::Proposed && point.v_out_pu <= threshold;
    if !halved {
        return Ok(ResolvedPlant {
            plant: *cfg,
            effective_vdc: cfg.vdc(),
            effective_target_pu: point.v_out_pu,
            halved,
        });
    }
    let effective_vdc = cfg.vdc() / 2.0;
    let effective_target_pu = 2.0 * point.v_out_pu;
    if effective_target_pu > 1.0 + TARGET_TOLERANCE {
        return Err(Error::InfeasibleDemand(effective_target_pu));
    }
    let plant = cfg
        .with_vdc(effective_vdc)?
        .with_base_voltage(cfg.base_voltage() / 2.0)?;
    Ok(ResolvedPlant {
        plant,
        effective_vdc,
        effective_target_pu: effective_target_pu.min(1.0),
        halved,
    })
}

/// One solved operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub v_out_pu: f64,
    pub method: Method,
    pub effective_vdc: f64,
    pub effective_target_pu: f64,
    pub angles: SwitchingAngles,
    /// `v_out_pu` times the original base voltage.
    pub target_v1: f64,
    pub achieved_v1: f64,
    /// Achieved fundamental over the original base voltage.
    pub achieved_pu: f64,
    pub thd_spectral_pct: f64,
    pub thd_total_pct: f64,
    pub feasible: bool,
    pub best_cost: f64,
    pub seed: u64,
}

/// Everything produced by one operating-point solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSolution {
    pub resolved: ResolvedPlant,
    pub result: SolveResult,
    pub row: SweepRow,
}

/// Resolves the plant, solves the SHE problem there and grades the result
/// on the effective (physical) waveform.
pub fn solve_point(
    cfg: &InverterConfig,
    point: &OperatingPoint,
    pso: &PsoParams,
    she: &SheOptions,
    threshold: f64,
) -> Result<PointSolution> {
    let resolved = resolve_plant(cfg, point, threshold)?;
    let problem = SheProblem::new(resolved.plant, resolved.effective_target_pu, she.clone())?;
    let result = solve(&problem, pso)?;
    let plant = &resolved.plant;
    let achieved_v1 = waveform::fundamental(plant, &result.angles);
    let row = SweepRow {
        v_out_pu: point.v_out_pu,
        method: point.method,
        effective_vdc: resolved.effective_vdc,
        effective_target_pu: resolved.effective_target_pu,
        target_v1: point.v_out_pu * cfg.base_voltage(),
        achieved_v1,
        achieved_pu: cfg.per_unit_voltage(achieved_v1),
        thd_spectral_pct: 100.0 * thd_spectral(plant, &result.angles, she.thd_max_order)?,
        thd_total_pct: 100.0 * thd_total(plant, &result.angles)?,
        feasible: result.feasible,
        best_cost: result.best_cost,
        seed: pso.seed,
        angles: result.angles.clone(),
    };
    Ok(PointSolution {
        resolved,
        result,
        row,
    })
}

pub fn solve_operating_point(
    cfg: &InverterConfig,
    point: &OperatingPoint,
    pso: &PsoParams,
    she: &SheOptions,
    threshold: f64,
) -> Result<SweepRow> {
    solve_point(cfg, point, pso, she, threshold).map(|s| s.row)
}

/// Seed for a sweep row. Rows that resolve to the same plant regime at the
/// same grid index share a seed, so classic and proposed coincide above the
/// threshold.
pub fn row_seed(base_seed: u64, pu_index: usize, halved: bool) -> u64 {
    let a = splitmix64(base_seed ^ (pu_index as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(a ^ u64::from(halved).wrapping_mul(0x8CB9_2BA7_2F3D_8DD7))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// `(pu, angles in degrees)` for one method, in grid order.
    pub fn trajectory(&self, method: Method) -> Vec<(f64, Vec<f64>)> {
        self.rows_for(method)
            .map(|r| (r.v_out_pu, r.angles.to_degrees()))
            .collect()
    }

    pub fn infeasible_count(&self) -> usize {
        self.rows.iter().filter(|r| !r.feasible).count()
    }
}

pub fn validate_grid(pu_grid: &[f64]) -> Result<()> {
    if pu_grid.is_empty() {
        return Err(Error::InvalidConfig("per-unit grid is empty".into()));
    }
    for &pu in pu_grid {
        check_pu(pu)?;
    }
    if pu_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "per-unit grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Solves every `(pu, method)` pair. Rows run in parallel and are assembled
/// sorted by pu, then method.
pub fn sweep(
    cfg: &InverterConfig,
    pu_grid: &[f64],
    methods: &[Method],
    pso: &PsoParams,
    she: &SheOptions,
    threshold: f64,
) -> Result<SweepTable> {
    validate_grid(pu_grid)?;
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no method selected".into()));
    }
    let jobs: Vec<(usize, f64, Method)> = pu_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &pu)| methods.iter().map(move |&m| (i, pu, m)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, pu, method)| {
            let point = OperatingPoint::new(pu, method)?;
            let halved = resolve_plant(cfg, &point, threshold)?.halved;
            let params = pso.clone().with_seed(row_seed(pso.seed, i, halved));
            solve_operating_point(cfg, &point, &params, she, threshold)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

/// One line of the classic-versus-proposed THD table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub v_out_pu: f64,
    pub thd_classic_pct: f64,
    pub thd_proposed_pct: f64,
    pub improvement_pct: f64,
}

/// Relative THD reduction, in percent of the classic figure.
pub fn improvement_pct(thd_classic: f64, thd_proposed: f64) -> f64 {
    if thd_classic == 0.0 {
        return 0.0;
    }
    (thd_classic - thd_proposed) / thd_classic * 100.0
}

/// Pairs classic and proposed rows per pu (total THD) and computes the
/// improvement.
pub fn compare_methods(table: &SweepTable) -> Result<Vec<ComparisonRow>> {
    let mut pus: Vec<f64> = table.rows.iter().map(|r| r.v_out_pu).collect();
    pus.sort_by(f64::total_cmp);
    pus.dedup();
    pus.into_iter()
        .map(|pu| {
            let find = |m: Method| {
                table
                    .rows
                    .iter()
                    .find(|r| r.v_out_pu == pu && r.method == m)
                    .ok_or(Error::MissingMethod {
                        pu,
                        method: m.as_str(),
                    })
            };
            let c = find(Method::Classic)?.thd_total_pct;
            let p = find(Method::Proposed)?.thd_total_pct;
            Ok(ComparisonRow {
                v_out_pu: pu,
                thd_classic_pct: c,
                thd_proposed_pct: p,
                improvement_pct: improvement_pct(c, p),
            })
        })
        .collect()
}
