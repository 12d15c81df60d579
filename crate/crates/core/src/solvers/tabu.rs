//! Tabu search over single-bit-flip neighborhoods with aspiration and
//! seeded random restarts.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CompiledQubo, FlipState, ReadRunner, Sample, SolveResult, TabuConfig};
use crate::matching::Qubo;

/// Search state that persists across epochs: the global best carries over so
/// aspiration and the stall counter see the whole run.
struct TabuSearch {
    compiled: CompiledQubo,
    tenure: usize,
    max_stall: usize,
    rng: ChaCha8Rng,
    /// Iteration index after which a variable becomes admissible again.
    tabu_until: Vec<u64>,
    iteration: u64,
    global_best_cost: f64,
    epochs_run: usize,
}

struct Epoch {
    best_x: Vec<bool>,
    best_cost: f64,
}

impl TabuSearch {
    fn new(q: &Qubo, cfg: &TabuConfig, seed: u64) -> Self {
        let compiled = CompiledQubo::compile(q);
        let n = compiled.n;
        TabuSearch {
            compiled,
            tenure: cfg.tenure_for(n),
            max_stall: cfg.max_stall_for(n),
            rng: ChaCha8Rng::seed_from_u64(seed),
            tabu_until: vec![0; n],
            iteration: 0,
            global_best_cost: f64::INFINITY,
            epochs_run: 0,
        }
    }

    /// Runs one epoch: from all-zeros on the first call, from a seeded random
    /// assignment afterwards, until `max_stall` iterations pass without a
    /// global improvement (or no admissible move exists). Returns the best
    /// assignment seen during the epoch.
    fn run_epoch(&mut self) -> Epoch {
        let n = self.compiled.n;
        let mut state = FlipState::zeros(&self.compiled);
        if self.epochs_run > 0 {
            let x: Vec<bool> = (0..n).map(|_| self.rng.gen_bool(0.5)).collect();
            state.assign(&x);
        }
        self.epochs_run += 1;
        self.tabu_until.fill(0);
        self.iteration = 0;

        let mut epoch = Epoch {
            best_x: state.x.clone(),
            best_cost: state.cost,
        };
        self.global_best_cost = self.global_best_cost.min(state.cost);
        let mut stall = 0usize;
        while stall < self.max_stall && n > 0 {
            self.iteration += 1;
            // Best admissible single-bit flip; tabu moves are admissible only
            // when they would improve the global best (aspiration).
            let mut chosen: Option<(usize, f64)> = None;
            for i in 0..n {
                let delta = state.delta(i);
                let is_tabu = self.tabu_until[i] >= self.iteration;
                if is_tabu && state.cost + delta >= self.global_best_cost {
                    continue;
                }
                match chosen {
                    Some((_, best_delta)) if delta >= best_delta => {}
                    _ => chosen = Some((i, delta)),
                }
            }
            let Some((var, _)) = chosen else {
                break; // everything tabu and nothing aspirates: force restart
            };
            state.flip(var);
            self.tabu_until[var] = self.iteration + self.tenure as u64;

            if state.cost < epoch.best_cost {
                epoch.best_cost = state.cost;
                epoch.best_x.copy_from_slice(&state.x);
            }
            if state.cost < self.global_best_cost {
                self.global_best_cost = state.cost;
                stall = 0;
            } else {
                stall += 1;
            }
        }
        epoch
    }
}

pub(crate) struct TabuRunner {
    search: TabuSearch,
}

impl TabuRunner {
    pub fn new(q: &Qubo, cfg: TabuConfig, seed: u64) -> Self {
        TabuRunner {
            search: TabuSearch::new(q, &cfg, seed),
        }
    }
}

impl ReadRunner for TabuRunner {
    fn run_read(&mut self, started: Instant) -> Sample {
        let epoch = self.search.run_epoch();
        // Emit the canonical objective value, not the incremental tracker.
        let cost = self.search.compiled.objective(&epoch.best_x);
        Sample {
            x: epoch.best_x,
            cost,
            elapsed: started.elapsed().as_secs_f64(),
        }
    }
}

/// Runs tabu-search epochs, emitting the best-of-epoch at each restart, until
/// `num_reads` epochs or the wall-clock budget are exhausted.
pub fn tabu_search(
    q: &Qubo,
    cfg: &TabuConfig,
    num_reads: usize,
    budget: Option<Duration>,
    seed: u64,
) -> SolveResult {
    let started = Instant::now();
    let mut search = TabuSearch::new(q, cfg, seed);
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
        let epoch = search.run_epoch();
        let cost = search.compiled.objective(&epoch.best_x);
        samples.push(Sample {
            x: epoch.best_x,
            cost,
            elapsed: started.elapsed().as_secs_f64(),
        });
    }
    let reads = samples.len();
    SolveResult::from_samples(samples, reads, false, timed_out)
}
