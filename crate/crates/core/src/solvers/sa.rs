//! Simulated annealing with zero-initialized reads and a geometric
//! inverse-temperature schedule.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CompiledQubo, FlipState, ReadRunner, Sample, SaConfig, SolveResult};
use crate::matching::Qubo;

pub(crate) struct SaRunner {
    compiled: CompiledQubo,
    cfg: SaConfig,
    rng: ChaCha8Rng,
    order: Vec<usize>,
}

impl SaRunner {
    pub fn new(q: &Qubo, cfg: SaConfig, seed: u64) -> Self {
        let compiled = CompiledQubo::compile(q);
        let order: Vec<usize> = (0..compiled.n).collect();
        SaRunner {
            compiled,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            order,
        }
    }
}

impl ReadRunner for SaRunner {
    fn run_read(&mut self, started: Instant) -> Sample {
        let mut state = FlipState::zeros(&self.compiled);
        anneal_read(&mut state, &self.cfg, &mut self.rng, &mut self.order);
        // Emit the canonical objective value, not the incremental tracker.
        let cost = self.compiled.objective(&state.x);
        Sample {
            x: state.x,
            cost,
            elapsed: started.elapsed().as_secs_f64(),
        }
    }
}

/// One anneal: starts from all-zeros and proposes a flip of every bit in a
/// fresh random order each sweep. Downhill moves are always accepted, uphill
/// moves with probability `exp(-beta * delta)`.
pub(crate) fn anneal_read(
    state: &mut FlipState<'_>,
    cfg: &SaConfig,
    rng: &mut ChaCha8Rng,
    order: &mut [usize],
) {
    state.reset();
    for sweep in 0..cfg.num_sweeps {
        let beta = cfg.beta_at(sweep);
        order.shuffle(rng);
        for &i in order.iter() {
            let delta = state.delta(i);
            let accept = delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp();
            if accept {
                state.flip(i);
            }
        }
    }
}

/// Runs `num_reads` zero-initialized anneals (or fewer if the wall-clock
/// budget expires; the first read always completes).
pub fn simulated_annealing(
    q: &Qubo,
    cfg: &SaConfig,
    num_reads: usize,
    budget: Option<Duration>,
    seed: u64,
) -> SolveResult {
    let started = Instant::now();
    let compiled = CompiledQubo::compile(q);
    let mut state = FlipState::zeros(&compiled);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..compiled.n).collect();
    let mut samples = Vec::new();
    let mut timed_out = false;
    for read in 0..num_reads {
        if read > 0 {
            if let Some(budget) = budget {
                if started.elapsed() >= budget {
                    timed_out = true;
                    break;
                }
            }
        }
        anneal_read(&mut state, cfg, &mut rng, &mut order);
        samples.push(Sample {
            x: state.x.clone(),
            cost: compiled.objective(&state.x),
            elapsed: started.elapsed().as_secs_f64(),
        });
    }
    let reads = samples.len();
    SolveResult::from_samples(samples, reads, false, timed_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::tests::random_qubo;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn positive_diagonal_keeps_zero_init_optimal() {
        let mut q = Qubo::new(6, 2.5);
        for i in 0..6 {
            q.set(i, i, 1.0);
        }
        let result = simulated_annealing(&q, &SaConfig::default(), 5, None, 1);
        for sample in &result.samples {
            assert_eq!(sample.cost, 2.5);
            assert!(sample.x.iter().all(|&b| !b));
        }
    }

    #[test]
    fn single_negative_bit_is_found() {
        let mut q = Qubo::new(1, 0.25);
        q.set(0, 0, -1.0);
        let cfg = SaConfig {
            num_sweeps: 100,
            beta_start: 0.2,
            beta_end: 1000.0,
        };
        let result = simulated_annealing(&q, &cfg, 3, None, 7);
        assert_eq!(result.best.x, vec![true]);
        assert!((result.best.cost - (-0.75)).abs() < 1e-12);
    }

    #[test]
    fn identical_seeds_give_identical_sample_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_qubo(&mut rng, 15, 0.5);
        let cfg = SaConfig {
            num_sweeps: 50,
            ..SaConfig::default()
        };
        let a = simulated_annealing(&q, &cfg, 10, None, 99);
        let b = simulated_annealing(&q, &cfg, 10, None, 99);
        let xs: Vec<_> = a.samples.iter().map(|s| (&s.x, s.cost)).collect();
        let ys: Vec<_> = b.samples.iter().map(|s| (&s.x, s.cost)).collect();
        assert_eq!(xs, ys);
        let c = simulated_annealing(&q, &cfg, 10, None, 100);
        let zs: Vec<_> = c.samples.iter().map(|s| (&s.x, s.cost)).collect();
        assert_ne!(xs, zs);
    }

    #[test]
    fn schedule_interpolates_geometrically() {
        let cfg = SaConfig {
            num_sweeps: 3,
            beta_start: 0.2,
            beta_end: 1000.0,
        };
        assert!((cfg.beta_at(0) - 0.2).abs() < 1e-12);
        assert!((cfg.beta_at(2) - 1000.0).abs() < 1e-9);
        // Geometric midpoint of 0.2 and 1000.
        assert!((cfg.beta_at(1) - 200f64.sqrt()).abs() < 1e-9);
        let single = SaConfig {
            num_sweeps: 1,
            ..cfg
        };
        assert_eq!(single.beta_at(0), 0.2);
    }
}
