use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{repair_in_place, violation, BoundPolicy, PsoParams, PENALTY_WEIGHT};
use crate::problem::SheProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_cost: f64,
}

/// Complete optimiser state. Every random draw comes from the one seeded
/// stream held here, in particle-major, dimension-minor order.
#[derive(Debug, Clone)]
pub struct Swarm {
    particles: Vec<Particle>,
    global_best: Vec<f64>,
    global_best_cost: f64,
    iteration: usize,
    rng: ChaCha8Rng,
}

fn fitness(problem: &SheProblem, policy: BoundPolicy, x: &[f64]) -> f64 {
    match policy {
        BoundPolicy::RepairSortClamp => problem.cost_raw(x),
        BoundPolicy::Penalty => problem.cost_raw(x) + PENALTY_WEIGHT * violation(x),
    }
}

impl Swarm {
    pub fn init(problem: &SheProblem, params: &PsoParams) -> Self {
        let dim = problem.cfg().cells();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let vmax = params.velocity_clamp;
        let particles: Vec<Particle> = (0..params.swarm_size)
            .map(|_| {
                let mut position: Vec<f64> =
                    (0..dim).map(|_| rng.random_range(0.0..FRAC_PI_2)).collect();
                position.sort_by(f64::total_cmp);
                if params.bound_policy == BoundPolicy::RepairSortClamp {
                    repair_in_place(&mut position);
                }
                let velocity = (0..dim).map(|_| rng.random_range(-vmax..=vmax)).collect();
                let best_cost = fitness(problem, params.bound_policy, &position);
                Particle {
                    best_position: position.clone(),
                    position,
                    velocity,
                    best_cost,
                }
            })
            .collect();
        let mut swarm = Self {
            global_best: particles[0].best_position.clone(),
            global_best_cost: particles[0].best_cost,
            particles,
            iteration: 0,
            rng,
        };
        swarm.update_global_best();
        swarm
    }

    /// Assemble a swarm from explicit particles, e.g. to replay a state.
    pub fn from_particles(particles: Vec<Particle>, seed: u64) -> Self {
        assert!(!particles.is_empty(), "swarm needs at least one particle");
        let mut swarm = Self {
            global_best: particles[0].best_position.clone(),
            global_best_cost: particles[0].best_cost,
            particles,
            iteration: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        swarm.update_global_best();
        swarm
    }

    // Index order with strict improvement keeps the first-found incumbent on ties.
    fn update_global_best(&mut self) {
        for p in &self.particles {
            if p.best_cost < self.global_best_cost {
                self.global_best_cost = p.best_cost;
                self.global_best.clone_from(&p.best_position);
            }
        }
    }

    /// One synchronous velocity/position update of every particle.
    pub fn step(&mut self, problem: &SheProblem, params: &PsoParams) {
        self.iteration += 1;
        let w = params.inertia_at(self.iteration);
        let vmax = params.velocity_clamp;
        let gbest = &self.global_best;
        for p in &mut self.particles {
            #[allow(clippy::needless_range_loop)]
            for d in 0..p.position.len() {
                let r1: f64 = self.rng.random();
                let r2: f64 = self.rng.random();
                let x = p.position[d];
                let v = w * p.velocity[d]
                    + params.cognitive * r1 * (p.best_position[d] - x)
                    + params.social * r2 * (gbest[d] - x);
                let v = v.clamp(-vmax, vmax);
                p.velocity[d] = v;
                p.position[d] = x + v;
            }
            if params.bound_policy == BoundPolicy::RepairSortClamp {
                repair_in_place(&mut p.position);
            }
        }
        for p in &mut self.particles {
            let c = fitness(problem, params.bound_policy, &p.position);
            if c < p.best_cost {
                p.best_cost = c;
                p.best_position.clone_from(&p.position);
            }
        }
        self.update_global_best();
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn global_best(&self) -> &[f64] {
        &self.global_best
    }

    pub fn global_best_cost(&self) -> f64 {
        self.global_best_cost
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::SheOptions;
    use crate::waveform::InverterConfig;

    fn problem() -> SheProblem {
        SheProblem::new(InverterConfig::reference(), 0.6, SheOptions::default()).unwrap()
    }

    #[test]
    fn init_shape_order_and_determinism() {
        let params = PsoParams::default().with_seed(99);
        let a = Swarm::init(&problem(), &params);
        let b = Swarm::init(&problem(), &params);
        assert_eq!(a.particles(), b.particles());
        assert_eq!(a.particles().len(), params.swarm_size);
        for p in a.particles() {
            assert_eq!(p.position.len(), 3);
            assert!(p.position.windows(2).all(|w| w[0] < w[1]));
            assert!(p.position[0] > 0.0 && p.position[2] < FRAC_PI_2);
            assert!(p.velocity.iter().all(|v| v.abs() <= params.velocity_clamp));
            assert_eq!(p.best_position, p.position);
        }
        let best = a
            .particles()
            .iter()
            .map(|p| p.best_cost)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(a.global_best_cost(), best);
        let c = Swarm::init(&problem(), &params.clone().with_seed(100));
        assert_ne!(a.particles(), c.particles());
    }

    #[test]
    fn zero_coefficients_freeze_the_swarm() {
        let params = PsoParams {
            inertia: 0.0,
            cognitive: 0.0,
            social: 0.0,
            ..Default::default()
        };
        let mut s = Swarm::init(&problem(), &params);
        let start: Vec<_> = s.particles().iter().map(|p| p.position.clone()).collect();
        s.step(&problem(), &params);
        for (p, x0) in s.particles().iter().zip(&start) {
            assert!(p.velocity.iter().all(|&v| v == 0.0));
            assert_eq!(&p.position, x0);
        }
        s.step(&problem(), &params);
        for (p, x0) in s.particles().iter().zip(&start) {
            assert_eq!(&p.position, x0);
        }
    }

    #[test]
    fn particle_at_both_bests_keeps_inertial_velocity() {
        let prob = problem();
        let x = vec![0.3, 0.8, 1.2];
        let cost = prob.cost_raw(&x);
        let p = Particle {
            position: x.clone(),
            velocity: vec![0.01, -0.02, 0.03],
            best_position: x.clone(),
            best_cost: cost,
        };
        let mut s = Swarm::from_particles(vec![p], 7);
        let params = PsoParams {
            inertia: 0.5,
            ..Default::default()
        };
        s.step(&prob, &params);
        let v = &s.particles()[0].velocity;
        for (got, want) in v.iter().zip([0.005, -0.01, 0.015]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn global_best_never_worsens() {
        let params = PsoParams::default().with_seed(3);
        let prob = problem();
        let mut s = Swarm::init(&prob, &params);
        for _ in 0..100 {
            let before = s.global_best_cost();
            s.step(&prob, &params);
            assert!(s.global_best_cost() <= before);
            for p in s.particles() {
                assert!(p.position.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
