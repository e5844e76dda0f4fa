//! Seeded particle swarm optimisation over ordered switching-angle vectors,
//! and an exhaustive grid search used to validate it.

mod grid;
mod swarm;

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Residuals, SheProblem};
use crate::waveform::SwitchingAngles;

pub use grid::{grid_oracle, grid_oracle_with_budget, grid_size, DEFAULT_GRID_BUDGET};
pub use swarm::{Particle, Swarm};

/// Margin kept between angles, and from 0 and π/2, by the repair pass.
pub const REPAIR_EPS: f64 = 1e-4;

/// Weight on constraint violation under [`BoundPolicy::Penalty`].
pub const PENALTY_WEIGHT: f64 = 1e4;

/// How particles that leave the ordered region are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundPolicy {
    /// Sort, clamp into `[ε, π/2 − ε]`, split ties by `ε`.
    #[default]
    RepairSortClamp,
    /// Leave positions alone and add a violation penalty to the cost.
    Penalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InertiaSchedule {
    #[default]
    Constant,
    /// Linear ramp from `inertia` at the first step to `final_inertia` at
    /// `max_iterations`.
    LinearDecay { final_inertia: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
    /// Max |velocity| per dimension, radians.
    pub velocity_clamp: f64,
    pub bound_policy: BoundPolicy,
    pub convergence_tol: f64,
    pub stall_iterations: usize,
    pub inertia_schedule: InertiaSchedule,
    /// Independent swarms per solve; the best one wins.
    pub restarts: usize,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            swarm_size: 100,
            max_iterations: 2000,
            inertia: 0.72,
            cognitive: 1.49,
            social: 1.49,
            seed: 0,
            velocity_clamp: std::f64::consts::FRAC_PI_4,
            bound_policy: BoundPolicy::RepairSortClamp,
            convergence_tol: 1e-6,
            stall_iterations: 300,
            inertia_schedule: InertiaSchedule::Constant,
            restarts: 8,
        }
    }
}

impl PsoParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.swarm_size < 2 {
            return bad(format!("swarm_size must be >= 2, got {}", self.swarm_size));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1".into());
        }
        if self.restarts == 0 {
            return bad("restarts must be >= 1".into());
        }
        if self.stall_iterations == 0 {
            return bad("stall_iterations must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.inertia) {
            return bad(format!("inertia must lie in [0, 1], got {}", self.inertia));
        }
        if let InertiaSchedule::LinearDecay { final_inertia } = self.inertia_schedule {
            if !(0.0..=1.0).contains(&final_inertia) {
                return bad(format!(
                    "final inertia must lie in [0, 1], got {final_inertia}"
                ));
            }
        }
        if !(self.cognitive >= 0.0 && self.cognitive.is_finite()) {
            return bad(format!("cognitive must be >= 0, got {}", self.cognitive));
        }
        if !(self.social >= 0.0 && self.social.is_finite()) {
            return bad(format!("social must be >= 0, got {}", self.social));
        }
        if !(self.velocity_clamp > 0.0 && self.velocity_clamp.is_finite()) {
            return bad(format!(
                "velocity_clamp must be > 0, got {}",
                self.velocity_clamp
            ));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol < 0.0 {
            return bad(format!(
                "convergence_tol must be >= 0, got {}",
                self.convergence_tol
            ));
        }
        Ok(())
    }

    /// Seed of restart `r`. Restart 0 uses the configured seed itself.
    pub fn restart_seed(&self, r: usize) -> u64 {
        if r == 0 {
            self.seed
        } else {
            splitmix64(self.seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        }
    }

    /// Inertia applied on step `iteration` (1-based).
    pub fn inertia_at(&self, iteration: usize) -> f64 {
        match self.inertia_schedule {
            InertiaSchedule::Constant => self.inertia,
            InertiaSchedule::LinearDecay { final_inertia } => {
                let span = self.max_iterations.saturating_sub(1).max(1) as f64;
                let t = (iteration.saturating_sub(1) as f64 / span).min(1.0);
                self.inertia + (final_inertia - self.inertia) * t
            }
        }
    }
}

/// SplitMix64 finaliser, used to derive independent seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub best_cost: f64,
}

/// Outcome of a PSO run or a grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub angles: SwitchingAngles,
    pub best_cost: f64,
    pub residuals: Residuals,
    pub feasible: bool,
    pub iterations_used: usize,
    pub evaluations: u64,
    pub convergence_trace: Vec<TracePoint>,
    /// `None` for the grid oracle.
    pub seed: Option<u64>,
    pub params: Option<PsoParams>,
}

impl SolveResult {
    pub(crate) fn finish(
        problem: &SheProblem,
        angles: SwitchingAngles,
        iterations_used: usize,
        evaluations: u64,
        convergence_trace: Vec<TracePoint>,
        params: Option<PsoParams>,
    ) -> Result<Self> {
        let best_cost = problem.cost(&angles)?;
        let residuals = problem.residuals(&angles)?;
        Ok(Self {
            feasible: problem.is_feasible(&residuals),
            angles,
            best_cost,
            residuals,
            iterations_used,
            evaluations,
            convergence_trace,
            seed: params.as_ref().map(|p| p.seed),
            params,
        })
    }
}

/// Sort, clamp into `[ε, π/2 − ε]` and split ties by `ε`, in place.
pub fn repair_in_place(x: &mut [f64]) {
    const LO: f64 = REPAIR_EPS;
    const HI: f64 = FRAC_PI_2 - REPAIR_EPS;
    for v in x.iter_mut() {
        // NaN cannot come out of the update rule, but never let one through
        *v = if v.is_nan() { LO } else { v.clamp(LO, HI) };
    }
    x.sort_by(f64::total_cmp);
    for k in 1..x.len() {
        if x[k] <= x[k - 1] {
            x[k] = x[k - 1] + REPAIR_EPS;
        }
    }
    let n = x.len();
    if n > 0 && x[n - 1] > HI {
        x[n - 1] = HI;
    }
    for k in (0..n.saturating_sub(1)).rev() {
        if x[k] >= x[k + 1] {
            x[k] = x[k + 1] - REPAIR_EPS;
        }
    }
}

/// Repaired copy of an arbitrary position as valid switching angles.
pub fn repair(x: &[f64]) -> Result<SwitchingAngles> {
    let mut v = x.to_vec();
    repair_in_place(&mut v);
    SwitchingAngles::new(v)
}

/// Constraint violation measured against the ε-shrunk ordered region.
pub(crate) fn violation(x: &[f64]) -> f64 {
    let mut v = 0.0;
    if let Some(&first) = x.first() {
        v += (REPAIR_EPS - first).max(0.0);
    }
    if let Some(&last) = x.last() {
        v += (last - (FRAC_PI_2 - REPAIR_EPS)).max(0.0);
    }
    v += x
        .windows(2)
        .map(|w| (w[0] + REPAIR_EPS - w[1]).max(0.0))
        .sum::<f64>();
    v
}

fn check_problem(problem: &SheProblem) -> Result<()> {
    let s = problem.cfg().cells() as f64;
    if (s + 1.0) * REPAIR_EPS >= FRAC_PI_2 {
        return Err(Error::InvalidProblem(format!(
            "{s} cells cannot be separated by the {REPAIR_EPS} rad repair margin"
        )));
    }
    Ok(())
}

struct Run {
    angles: SwitchingAngles,
    cost: f64,
    iterations: usize,
    trace: Vec<TracePoint>,
}

fn run_swarm(problem: &SheProblem, params: &PsoParams, seed: u64) -> Result<Run> {
    let params = PsoParams {
        seed,
        ..params.clone()
    };
    let mut swarm = Swarm::init(problem, &params);
    let mut trace = vec![TracePoint {
        iteration: 0,
        best_cost: swarm.global_best_cost(),
    }];
    let mut stall = 0;
    while swarm.iteration() < params.max_iterations
        && swarm.global_best_cost() >= params.convergence_tol
        && stall < params.stall_iterations
    {
        let before = swarm.global_best_cost();
        swarm.step(problem, &params);
        if swarm.global_best_cost() < before {
            stall = 0;
        } else {
            stall += 1;
        }
        trace.push(TracePoint {
            iteration: swarm.iteration(),
            best_cost: swarm.global_best_cost(),
        });
    }
    let angles = repair(swarm.global_best())?;
    Ok(Run {
        cost: problem.cost(&angles)?,
        angles,
        iterations: swarm.iteration(),
        trace,
    })
}

/// Runs `restarts` independent swarms. Each one steps until
/// `max_iterations`, `best < convergence_tol`, or `stall_iterations` steps
/// without a global-best improvement. The lowest final cost wins, ties going
/// to the lower restart index, so the result does not depend on scheduling.
pub fn solve(problem: &SheProblem, params: &PsoParams) -> Result<SolveResult> {
    params.validate()?;
    check_problem(problem)?;
    let runs: Vec<Run> = (0..params.restarts)
        .into_par_iter()
        .map(|r| run_swarm(problem, params, params.restart_seed(r)))
        .collect::<Result<_>>()?;
    let evaluations = runs
        .iter()
        .map(|r| (params.swarm_size * (r.iterations + 1)) as u64)
        .sum();
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.cost < best.cost { r } else { best })
        .expect("restarts >= 1");
    SolveResult::finish(
        problem,
        best.angles,
        best.iterations,
        evaluations,
        best.trace,
        Some(params.clone()),
    )
}
