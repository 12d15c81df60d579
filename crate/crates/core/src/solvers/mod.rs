//! QUBO minimizers with a uniform sampling interface.
//!
//! All solvers are deterministic per seed. Wall-clock budgets are enforced
//! cooperatively: reads are atomic, so the sample sequence for a given
//! `(qubo, config, seed)` is a prefix-stable function of the seed and only
//! the number of completed reads depends on timing. The first read always
//! completes, guaranteeing at least one sample.

mod exact;
mod sa;
mod tabu;

pub use exact::{exact_solve, exact_solve_with, ConvexSplit, ExactConfig};
pub use sa::simulated_annealing;
pub use tabu::tabu_search;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{bits_from_str, bits_to_string, Qubo};

/// One solver draw: an assignment, its objective value and the wall-clock
/// offset from solver start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    #[serde(
        rename = "x",
        serialize_with = "serialize_bits",
        deserialize_with = "deserialize_bits"
    )]
    pub x: Vec<bool>,
    #[serde(rename = "cost_ct")]
    pub cost: f64,
    #[serde(rename = "elapsed_s")]
    pub elapsed: f64,
}

fn serialize_bits<S: serde::Serializer>(x: &[bool], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&bits_to_string(x))
}

fn deserialize_bits<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Vec<bool>, D::Error> {
    let text = String::deserialize(d)?;
    bits_from_str(&text).map_err(serde::de::Error::custom)
}

// Re-exported for other serde types that encode assignments as 0/1 strings.
pub fn serialize_bits_pub<S: serde::Serializer>(
    x: &[bool],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    serialize_bits(x, s)
}

pub fn deserialize_bits_pub<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Vec<bool>, D::Error> {
    deserialize_bits(d)
}

/// Simulated-annealing parameters: geometric inverse-temperature schedule
/// from `beta_start` to `beta_end` over `num_sweeps` sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    pub num_sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            num_sweeps: 1000,
            beta_start: 0.2,
            beta_end: 1000.0,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sweeps < 1 {
            return Err(Error::InvalidParameter("num_sweeps must be >= 1".into()));
        }
        if !(self.beta_start > 0.0 && self.beta_start < self.beta_end) {
            return Err(Error::InvalidParameter(
                "annealing schedule requires 0 < beta_start < beta_end".into(),
            ));
        }
        Ok(())
    }

    /// Inverse temperature for sweep `t` of `num_sweeps`.
    pub fn beta_at(&self, t: usize) -> f64 {
        if self.num_sweeps <= 1 {
            return self.beta_start;
        }
        let fraction = t as f64 / (self.num_sweeps - 1) as f64;
        self.beta_start * (self.beta_end / self.beta_start).powf(fraction)
    }
}

/// Tabu-search parameters. `None` fields derive robust defaults from the
/// problem size: tenure `max(10, n/10)` and restart stall `5n`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TabuConfig {
    pub tenure: Option<usize>,
    pub max_stall_iterations: Option<usize>,
}

impl TabuConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tenure == Some(0) {
            return Err(Error::InvalidParameter("tenure must be >= 1".into()));
        }
        if self.max_stall_iterations == Some(0) {
            return Err(Error::InvalidParameter("max_stall must be >= 1".into()));
        }
        Ok(())
    }

    pub fn tenure_for(&self, n: usize) -> usize {
        self.tenure.unwrap_or_else(|| 10.max(n / 10))
    }

    pub fn max_stall_for(&self, n: usize) -> usize {
        self.max_stall_iterations.unwrap_or(5 * n.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverKind {
    Sa(SaConfig),
    Tabu(TabuConfig),
    Exact(ExactConfig),
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Sa(_) => "sa",
            SolverKind::Tabu(_) => "tabu",
            SolverKind::Exact(_) => "exact",
        }
    }
}

/// A complete solver run configuration. `budget` caps the run: no new read
/// starts once it is exhausted (for the exact solver a read is a full solve
/// and the budget applies inside the read).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub num_reads: usize,
    pub budget: Option<Duration>,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(kind: SolverKind) -> Self {
        SolverConfig {
            kind,
            num_reads: 1,
            budget: None,
            seed: 0,
        }
    }

    pub fn with_reads(mut self, num_reads: usize) -> Self {
        self.num_reads = num_reads;
        self
    }

    pub fn with_budget(mut self, budget: Option<Duration>) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 {
            return Err(Error::InvalidParameter("num_reads must be >= 1".into()));
        }
        match &self.kind {
            SolverKind::Sa(sa) => sa.validate(),
            SolverKind::Tabu(tabu) => tabu.validate(),
            SolverKind::Exact(_) => Ok(()),
        }
    }
}

/// Outcome of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub best: Sample,
    pub samples: Vec<Sample>,
    pub reads_completed: usize,
    pub proven_optimal: bool,
    pub timed_out: bool,
}

impl SolveResult {
    pub(crate) fn from_samples(
        samples: Vec<Sample>,
        reads_completed: usize,
        proven_optimal: bool,
        timed_out: bool,
    ) -> Self {
        let best = samples
            .iter()
            .min_by(|a, b| a.cost.total_cmp(&b.cost))
            .expect("a solver run emits at least one sample")
            .clone();
        SolveResult {
            best,
            samples,
            reads_completed,
            proven_optimal,
            timed_out,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Adjacency-compiled QUBO for O(degree) incremental flip evaluation.
pub(crate) struct CompiledQubo {
    pub n: usize,
    pub diag: Vec<f64>,
    /// Symmetric off-diagonal adjacency: for each variable, its coupled
    /// partners with the (upper-triangular) coefficient.
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub offset: f64,
}

impl CompiledQubo {
    pub fn compile(q: &Qubo) -> Self {
        let n = q.num_variables();
        let mut diag = vec![0.0; n];
        let mut neighbors = vec![Vec::new(); n];
        for (i, j, v) in q.entries() {
            if i == j {
                diag[i] = v;
            } else {
                neighbors[i].push((j, v));
                neighbors[j].push((i, v));
            }
        }
        CompiledQubo {
            n,
            diag,
            neighbors,
            offset: q.offset(),
        }
    }

    pub fn objective(&self, x: &[bool]) -> f64 {
        let mut total = self.offset;
        for i in 0..self.n {
            if !x[i] {
                continue;
            }
            total += self.diag[i];
            for &(j, v) in &self.neighbors[i] {
                if j > i && x[j] {
                    total += v;
                }
            }
        }
        total
    }
}

/// Mutable assignment with an incrementally maintained local field:
/// `field[i] = diag[i] + sum_{j != i} Q_ij x_j`, so the cost delta of
/// flipping bit `i` is `field[i]` (off) or `-field[i]` (on). The state
/// refreshes itself from scratch every [`REFRESH_INTERVAL`] flips, which
/// bounds accumulated rounding drift independently of run length.
pub(crate) struct FlipState<'a> {
    pub q: &'a CompiledQubo,
    pub x: Vec<bool>,
    pub field: Vec<f64>,
    pub cost: f64,
    flips_since_refresh: usize,
}

const REFRESH_INTERVAL: usize = 8192;

impl<'a> FlipState<'a> {
    pub fn zeros(q: &'a CompiledQubo) -> Self {
        FlipState {
            q,
            x: vec![false; q.n],
            field: q.diag.clone(),
            cost: q.offset,
            flips_since_refresh: 0,
        }
    }

    pub fn reset(&mut self) {
        self.x.fill(false);
        self.field.copy_from_slice(&self.q.diag);
        self.cost = self.q.offset;
        self.flips_since_refresh = 0;
    }

    pub fn delta(&self, i: usize) -> f64 {
        if self.x[i] {
            -self.field[i]
        } else {
            self.field[i]
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.cost += self.delta(i);
        self.x[i] = !self.x[i];
        let sign = if self.x[i] { 1.0 } else { -1.0 };
        for &(j, v) in &self.q.neighbors[i] {
            self.field[j] += sign * v;
        }
        #[cfg(debug_assertions)]
        {
            if self.q.n <= 64 {
                let full = self.q.objective(&self.x);
                debug_assert!(
                    (self.cost - full).abs() <= 1e-9 * (1.0 + full.abs()),
                    "incremental cost {} drifted from full evaluation {}",
                    self.cost,
                    full
                );
            }
        }
        self.flips_since_refresh += 1;
        if self.flips_since_refresh >= REFRESH_INTERVAL {
            self.recompute();
        }
    }

    /// Assigns arbitrary bits and recomputes field and cost from scratch.
    pub fn assign(&mut self, x: &[bool]) {
        self.x.copy_from_slice(x);
        self.recompute();
    }

    fn recompute(&mut self) {
        self.field.copy_from_slice(&self.q.diag);
        for i in 0..self.q.n {
            if self.x[i] {
                for &(j, v) in &self.q.neighbors[i] {
                    self.field[j] += v;
                }
            }
        }
        self.cost = self.q.objective(&self.x);
        self.flips_since_refresh = 0;
    }
}

/// Lazily produces one [`Sample`] per completed read of the configured
/// solver, stamping wall-clock offsets from stream creation. The stream
/// stops after `num_reads` reads or, for heuristics, once the budget is
/// exhausted; the in-flight read always completes, so at least one sample is
/// produced even with a zero budget.
pub struct Reads<'a> {
    runner: Box<dyn ReadRunner + 'a>,
    started: Instant,
    reads_done: usize,
    num_reads: usize,
    budget: Option<Duration>,
    budget_applies_between_reads: bool,
}

pub(crate) trait ReadRunner {
    fn run_read(&mut self, started: Instant) -> Sample;
}

impl<'a> Iterator for Reads<'a> {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        if self.reads_done >= self.num_reads {
            return None;
        }
        if self.reads_done > 0 && self.budget_applies_between_reads {
            if let Some(budget) = self.budget {
                if self.started.elapsed() >= budget {
                    return None;
                }
            }
        }
        self.reads_done += 1;
        Some(self.runner.run_read(self.started))
    }
}

/// Builds the sample stream for a configuration. For the exact solver every
/// read is a full solve (the budget applies inside each read); for SA and
/// tabu search the budget stops new reads.
pub fn run_reads<'a>(q: &'a Qubo, cfg: &SolverConfig) -> Result<Reads<'a>> {
    run_reads_with_split(q, cfg, None)
}

/// [`run_reads`] with the convex-structure hint for the exact solver.
pub fn run_reads_with_split<'a>(
    q: &'a Qubo,
    cfg: &SolverConfig,
    split: Option<&'a ConvexSplit>,
) -> Result<Reads<'a>> {
    cfg.validate()?;
    let (runner, between_reads): (Box<dyn ReadRunner + 'a>, bool) = match &cfg.kind {
        SolverKind::Sa(sa_cfg) => (
            Box::new(sa::SaRunner::new(q, sa_cfg.clone(), cfg.seed)),
            true,
        ),
        SolverKind::Tabu(tabu_cfg) => (
            Box::new(tabu::TabuRunner::new(q, tabu_cfg.clone(), cfg.seed)),
            true,
        ),
        SolverKind::Exact(exact_cfg) => (
            Box::new(exact::ExactRunner::new(
                q,
                exact_cfg.clone(),
                split,
                cfg.budget,
            )),
            false,
        ),
    };
    Ok(Reads {
        runner,
        started: Instant::now(),
        reads_done: 0,
        num_reads: cfg.num_reads,
        budget: cfg.budget,
        budget_applies_between_reads: between_reads,
    })
}

/// Runs the configured solver to completion and collects the result.
pub fn solve(q: &Qubo, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_with_split(q, cfg, None)
}

/// [`solve`] with the convex-structure hint for the exact solver.
pub fn solve_with_split(
    q: &Qubo,
    cfg: &SolverConfig,
    split: Option<&ConvexSplit>,
) -> Result<SolveResult> {
    cfg.validate()?;
    match &cfg.kind {
        SolverKind::Sa(sa_cfg) => Ok(simulated_annealing(
            q,
            sa_cfg,
            cfg.num_reads,
            cfg.budget,
            cfg.seed,
        )),
        SolverKind::Tabu(tabu_cfg) => Ok(tabu_search(
            q,
            tabu_cfg,
            cfg.num_reads,
            cfg.budget,
            cfg.seed,
        )),
        SolverKind::Exact(exact_cfg) => {
            Ok(exact_solve_with(q, split, cfg.budget, exact_cfg))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_qubo(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Qubo {
        let mut q = Qubo::new(n, rng.gen_range(-1.0..1.0));
        for i in 0..n {
            for j in i..n {
                if rng.gen_bool(density) {
                    q.set(i, j, rng.gen_range(-2.0..2.0));
                }
            }
        }
        q
    }

    pub(crate) fn brute_force(q: &Qubo) -> (Vec<bool>, f64) {
        let n = q.num_variables();
        assert!(n <= 24);
        let mut best_x = vec![false; n];
        let mut best = q.objective(&best_x).unwrap();
        for state in 1u64..(1 << n) {
            let x: Vec<bool> = (0..n).map(|i| state >> i & 1 == 1).collect();
            let cost = q.objective(&x).unwrap();
            if cost < best || (cost == best && x < best_x) {
                best = cost;
                best_x = x;
            }
        }
        (best_x, best)
    }

    #[test]
    fn flip_state_tracks_cost_incrementally() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let q = random_qubo(&mut rng, 12, 0.6);
        let compiled = CompiledQubo::compile(&q);
        let mut state = FlipState::zeros(&compiled);
        assert_eq!(state.cost, q.offset());
        for _ in 0..200 {
            let i = rng.gen_range(0..12);
            let predicted = state.cost + state.delta(i);
            state.flip(i);
            assert!((state.cost - predicted).abs() < 1e-12);
            let full = q.objective(&state.x).unwrap();
            assert!((state.cost - full).abs() <= 1e-9 * (1.0 + full.abs()));
        }
    }

    #[test]
    fn assign_matches_scratch_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = random_qubo(&mut rng, 10, 0.5);
        let compiled = CompiledQubo::compile(&q);
        let mut state = FlipState::zeros(&compiled);
        let x: Vec<bool> = (0..10).map(|_| rng.gen_bool(0.5)).collect();
        state.assign(&x);
        for i in 0..10 {
            let mut flipped = x.clone();
            flipped[i] = !flipped[i];
            let expected = q.objective(&flipped).unwrap() - q.objective(&x).unwrap();
            assert!((state.delta(i) - expected).abs() <= 1e-9);
        }
    }

    #[test]
    fn run_reads_honors_read_count_and_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_qubo(&mut rng, 8, 0.5);
        let cfg = SolverConfig::new(SolverKind::Sa(SaConfig {
            num_sweeps: 5,
            ..SaConfig::default()
        }))
        .with_reads(50);
        let samples: Vec<Sample> = run_reads(&q, &cfg).unwrap().collect();
        assert_eq!(samples.len(), 50);
        for pair in samples.windows(2) {
            assert!(pair[0].elapsed <= pair[1].elapsed);
        }

        let tiny = cfg.clone().with_budget(Some(Duration::ZERO));
        let samples: Vec<Sample> = run_reads(&q, &tiny).unwrap().collect();
        assert_eq!(samples.len(), 1);
    }

    #[test]
    fn sample_costs_reevaluate_against_the_qubo() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_qubo(&mut rng, 10, 0.6);
        for kind in [
            SolverKind::Sa(SaConfig {
                num_sweeps: 20,
                ..SaConfig::default()
            }),
            SolverKind::Tabu(TabuConfig::default()),
            SolverKind::Exact(ExactConfig::default()),
        ] {
            let cfg = SolverConfig::new(kind).with_reads(5).with_seed(3);
            let result = solve(&q, &cfg).unwrap();
            for sample in &result.samples {
                let cost = q.objective(&sample.x).unwrap();
                assert!((sample.cost - cost).abs() <= 1e-9 * (1.0 + cost.abs()));
            }
            let min = result
                .samples
                .iter()
                .map(|s| s.cost)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(result.best.cost, min);
        }
    }

    #[test]
    fn result_json_round_trips_bitstrings() {
        let result = SolveResult::from_samples(
            vec![Sample {
                x: vec![true, false, true],
                cost: -1.5,
                elapsed: 0.25,
            }],
            1,
            true,
            false,
        );
        let text = serde_json::to_string(&result).unwrap();
        assert!(text.contains("\"x\":\"101\""));
        assert!(text.contains("\"cost_ct\""));
        assert!(text.contains("\"elapsed_s\""));
        let back: SolveResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, result);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(SaConfig {
            num_sweeps: 0,
            ..SaConfig::default()
        }
        .validate()
        .is_err());
        assert!(SaConfig {
            beta_start: 5.0,
            beta_end: 1.0,
            num_sweeps: 10,
        }
        .validate()
        .is_err());
        assert!(TabuConfig {
            tenure: Some(0),
            ..TabuConfig::default()
        }
        .validate()
        .is_err());
    }
}
