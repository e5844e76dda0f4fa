use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use super::SolveResult;
use crate::error::{Error, Result};
use crate::problem::SheProblem;
use crate::waveform::SwitchingAngles;

/// Default cap on cost evaluations for [`grid_oracle`].
pub const DEFAULT_GRID_BUDGET: u128 = 100_000_000;

const MAX_CELLS: usize = 4;
const MIN_RESOLUTION: f64 = 0.1 * std::f64::consts::PI / 180.0;

/// Number of grid points `k·resolution` strictly below π/2.
pub fn grid_size(resolution: f64) -> usize {
    // relative slack so that e.g. 90·1° does not sneak under π/2 by rounding
    let ratio = FRAC_PI_2 / resolution;
    let r = ratio.round();
    if (ratio - r).abs() <= 1e-9 * ratio {
        r as usize - 1
    } else {
        ratio.floor() as usize
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exhaustive search over strictly increasing tuples from the grid
/// `{r, 2r, …} ∩ (0, π/2)`, with the default budget.
pub fn grid_oracle(problem: &SheProblem, resolution: f64) -> Result<SolveResult> {
    grid_oracle_with_budget(problem, resolution, DEFAULT_GRID_BUDGET)
}

pub fn grid_oracle_with_budget(
    problem: &SheProblem,
    resolution: f64,
    budget: u128,
) -> Result<SolveResult> {
    let s = problem.cfg().cells();
    if s > MAX_CELLS {
        return Err(Error::InvalidProblem(format!(
            "grid search is limited to {MAX_CELLS} cells, got {s}"
        )));
    }
    if !(resolution.is_finite() && resolution >= MIN_RESOLUTION * (1.0 - 1e-12)) {
        return Err(Error::InvalidParams(format!(
            "grid resolution must be at least 0.1°, got {resolution} rad"
        )));
    }
    let m = grid_size(resolution);
    let needed = binomial(m, s);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    if needed == 0 {
        return Err(Error::InvalidParams(format!(
            "grid of {m} points cannot hold {s} distinct angles"
        )));
    }
    let grid: Vec<f64> = (1..=m).map(|k| k as f64 * resolution).collect();

    // Split on the first index; each chunk scans its tuples in lexicographic
    // order and the chunks are merged in index order, so ties resolve to the
    // lexicographically first tuple regardless of scheduling.
    let per_first: Vec<(f64, Vec<usize>, u64)> = (0..=m - s)
        .into_par_iter()
        .map(|first| {
            let mut idx: Vec<usize> = (first..first + s).collect();
            let mut x = vec![0.0; s];
            let mut best = (f64::INFINITY, idx.clone());
            let mut count = 0u64;
            loop {
                for (xi, &i) in x.iter_mut().zip(&idx) {
                    *xi = grid[i];
                }
                let c = problem.cost_raw(&x);
                count += 1;
                if c < best.0 {
                    best = (c, idx.clone());
                }
                // advance positions 1..s like an odometer
                let mut j = s;
                loop {
                    if j <= 1 {
                        return (best.0, best.1, count);
                    }
                    j -= 1;
                    if idx[j] < m - (s - j) {
                        idx[j] += 1;
                        for t in j + 1..s {
                            idx[t] = idx[t - 1] + 1;
                        }
                        break;
                    }
                }
            }
        })
        .collect();

    let mut evaluations = 0u64;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (c, idx, n) in per_first {
        evaluations += n;
        if best.as_ref().is_none_or(|b| c < b.0) {
            best = Some((c, idx));
        }
    }
    let (_, idx) = best.expect("at least one tuple evaluated");
    let angles = SwitchingAngles::new(idx.iter().map(|&i| grid[i]).collect())?;
    SolveResult::finish(problem, angles, 0, evaluations, Vec::new(), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::SheOptions;
    use crate::waveform::InverterConfig;

    #[test]
    fn grid_sizes() {
        assert_eq!(grid_size(1f64.to_radians()), 89);
        assert_eq!(grid_size(0.5f64.to_radians()), 179);
        assert_eq!(grid_size(0.7f64.to_radians()), 128);
        assert_eq!(binomial(89, 3), 113_564);
        assert_eq!(binomial(179, 3), 939_929);
    }

    #[test]
    fn counts_every_tuple() {
        let p = SheProblem::new(InverterConfig::reference(), 0.5, SheOptions::default()).unwrap();
        let r = grid_oracle(&p, 1f64.to_radians()).unwrap();
        assert_eq!(r.evaluations, 113_564);
        assert!(r.angles.as_slice().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(r.best_cost, p.cost(&r.angles).unwrap());
        assert!(r.seed.is_none());
    }

    #[test]
    fn guards() {
        let p = SheProblem::new(InverterConfig::reference(), 0.5, SheOptions::default()).unwrap();
        assert!(matches!(
            grid_oracle(&p, 0.1f64.to_radians()),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(grid_oracle(&p, 0.05f64.to_radians()).is_err());
        assert!(grid_oracle_with_budget(&p, 1f64.to_radians(), 1000).is_err());
        let five = InverterConfig::new(5, 100.0).unwrap();
        let opts = SheOptions {
            eliminate_orders: vec![3, 5, 7, 11],
            ..SheOptions::default()
        };
        let p5 = SheProblem::new(five, 0.5, opts).unwrap();
        assert!(grid_oracle(&p5, 10f64.to_radians()).is_err());
    }

    #[test]
    fn planted_single_angle() {
        let cfg = InverterConfig::new(1, 100.0).unwrap();
        let res = 1f64.to_radians();
        let alpha = 60.0 * res;
        let target = alpha.cos() * 4.0 * 100.0 / (std::f64::consts::PI * cfg.base_voltage());
        let opts = SheOptions {
            eliminate_orders: vec![],
            ..SheOptions::default()
        };
        let p = SheProblem::new(cfg, target, opts).unwrap();
        let r = grid_oracle(&p, res).unwrap();
        assert_eq!(r.angles.as_slice(), &[alpha]);
        assert!(r.residuals.fundamental_error.abs() < 1e-9);
        assert_eq!(r.evaluations, 89);
    }
}
