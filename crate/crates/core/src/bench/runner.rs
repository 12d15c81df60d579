//! Benchmark execution: reference solutions, the fixed-timeout protocol and
//! the time-to-solution protocol, scheduled over a worker pool.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{relative_error, time_to_solution, BenchRecord, MetricKind, MAX_STORED_EPSILONS};
use crate::error::{Error, Result};
use crate::instance::{derive_seed, generate, CaseSpec};
use crate::matching::{build_qubo_with, Allocation, Qubo};
use crate::solvers::{
    exact_solve_with, run_reads_with_split, ConvexSplit, ExactConfig, SaConfig, SolverConfig,
    SolverKind, TabuConfig,
};

/// Solver selection for benchmark runs. Unset SA sweeps fall back to the
/// per-case tuned value.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverSpec {
    Sa {
        sweeps: Option<usize>,
        beta_start: f64,
        beta_end: f64,
    },
    Tabu {
        tenure: Option<usize>,
        max_stall: Option<usize>,
    },
    Exact,
}

impl SolverSpec {
    pub fn sa_default() -> Self {
        SolverSpec::Sa {
            sweeps: None,
            beta_start: 0.2,
            beta_end: 1000.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverSpec::Sa { .. } => "sa",
            SolverSpec::Tabu { .. } => "tabu",
            SolverSpec::Exact => "exact",
        }
    }

    fn kind_for(&self, case: &CaseSpec, options: &RunnerOptions) -> SolverKind {
        match self {
            SolverSpec::Sa {
                sweeps,
                beta_start,
                beta_end,
            } => SolverKind::Sa(SaConfig {
                num_sweeps: sweeps.unwrap_or(case.sa_sweeps),
                beta_start: *beta_start,
                beta_end: *beta_end,
            }),
            SolverSpec::Tabu { tenure, max_stall } => SolverKind::Tabu(TabuConfig {
                tenure: *tenure,
                max_stall_iterations: *max_stall,
            }),
            SolverSpec::Exact => SolverKind::Exact(ExactConfig {
                max_nodes: if options.deterministic {
                    Some(options.deterministic_max_nodes)
                } else {
                    None
                },
                ..ExactConfig::default()
            }),
        }
    }
}

/// Shared run options. In deterministic mode wall-clock budgets are replaced
/// by count budgets (reads for heuristics, nodes for the exact solver, draws
/// for the TTS protocol), which makes record contents machine-independent.
#[derive(Debug, Clone)]
pub struct RunnerOptions {
    pub alpha: f64,
    pub workers: usize,
    pub deterministic: bool,
    pub deterministic_reads: usize,
    pub deterministic_max_nodes: u64,
    pub deterministic_max_draws: u64,
    /// Budget for reference solves (the default mirrors a one-hour run).
    pub reference_budget: Option<Duration>,
}

impl Default for RunnerOptions {
    fn default() -> Self {
        RunnerOptions {
            alpha: crate::instance::DEFAULT_ALPHA,
            workers: default_workers(),
            deterministic: false,
            deterministic_reads: 50,
            deterministic_max_nodes: 200_000,
            deterministic_max_draws: 200,
            reference_budget: Some(Duration::from_secs(3600)),
        }
    }
}

/// Default worker count: available cores minus one, at least one.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|p| p.get().saturating_sub(1).max(1))
        .unwrap_or(1)
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("worker pool")
}

/// Reference solution of one instance, produced by the exact solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub case: String,
    pub seed: u64,
    #[serde(
        rename = "x",
        serialize_with = "crate::solvers::serialize_bits_pub",
        deserialize_with = "crate::solvers::deserialize_bits_pub"
    )]
    pub x: Vec<bool>,
    pub cost_ct: f64,
    pub proven_optimal: bool,
}

/// References keyed by (case, seed).
#[derive(Debug, Default, Clone)]
pub struct ReferenceStore {
    map: BTreeMap<(String, u64), ReferenceSolution>,
}

impl ReferenceStore {
    pub fn get(&self, case: &str, seed: u64) -> Option<&ReferenceSolution> {
        self.map.get(&(case.to_string(), seed))
    }

    pub fn require(&self, case: &str, seed: u64) -> Result<&ReferenceSolution> {
        self.get(case, seed).ok_or_else(|| Error::MissingReference {
            case: case.to_string(),
            seed,
        })
    }

    pub fn insert(&mut self, reference: ReferenceSolution) {
        self.map
            .insert((reference.case.clone(), reference.seed), reference);
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReferenceSolution> {
        self.map.values()
    }
}

/// The model a benchmark job minimizes, built once per instance.
pub(crate) struct Prepared {
    pub(crate) qubo: Qubo,
    pub(crate) split: ConvexSplit,
}

pub(crate) fn prepare(case: &CaseSpec, seed: u64, alpha: f64) -> Result<Prepared> {
    let instance = generate(case, seed, alpha)?;
    let pf = crate::matching::pair_flows(&instance)?;
    let allocation = Allocation::compute(&instance, &pf)?;
    let qubo = build_qubo_with(&instance, &pf, &allocation)?;
    let split = ConvexSplit::from_pair_flows(&instance, &pf);
    Ok(Prepared { qubo, split })
}

fn reference_path(dir: &Path, case: &str, seed: u64) -> PathBuf {
    dir.join(format!("ref-{case}-s{seed}.json"))
}

/// Computes (or loads from `cache_dir`) the reference solution of every
/// (case, seed) instance by running the exact solver with the reference
/// budget.
pub fn compute_references(
    cases: &[CaseSpec],
    seeds: &[u64],
    options: &RunnerOptions,
    cache_dir: Option<&Path>,
) -> Result<ReferenceStore> {
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir)?;
    }
    let jobs: Vec<(CaseSpec, u64)> = cases
        .iter()
        .flat_map(|case| seeds.iter().map(move |&seed| (case.clone(), seed)))
        .collect();
    let results: Vec<Result<ReferenceSolution>> = pool(options.workers).install(|| {
        jobs.par_iter()
            .map(|(case, seed)| -> Result<ReferenceSolution> {
                if let Some(dir) = cache_dir {
                    let path = reference_path(dir, &case.name, *seed);
                    if path.exists() {
                        let text = std::fs::read_to_string(&path)?;
                        if let Ok(reference) = serde_json::from_str::<ReferenceSolution>(&text) {
                            return Ok(reference);
                        }
                    }
                }
                let prepared = prepare(case, *seed, options.alpha)?;
                let cfg = ExactConfig {
                    max_nodes: if options.deterministic {
                        Some(options.deterministic_max_nodes)
                    } else {
                        None
                    },
                    ..ExactConfig::default()
                };
                let budget = if options.deterministic {
                    None
                } else {
                    options.reference_budget
                };
                let result =
                    exact_solve_with(&prepared.qubo, Some(&prepared.split), budget, &cfg);
                let reference = ReferenceSolution {
                    case: case.name.clone(),
                    seed: *seed,
                    x: result.best.x,
                    cost_ct: result.best.cost,
                    proven_optimal: result.proven_optimal,
                };
                if let Some(dir) = cache_dir {
                    let path = reference_path(dir, &case.name, *seed);
                    std::fs::write(path, serde_json::to_string(&reference)? + "\n")?;
                }
                Ok(reference)
            })
            .collect()
    });
    let mut store = ReferenceStore::default();
    for result in results {
        store.insert(result?);
    }
    Ok(store)
}

/// Fixed-timeout protocol: each solver runs on each instance with the
/// case-specific budget; the record carries the best relative error of the
/// run. Errors upfront if any reference is missing.
pub fn timeout_benchmark(
    cases: &[CaseSpec],
    solvers: &[SolverSpec],
    seeds: &[u64],
    refs: &ReferenceStore,
    options: &RunnerOptions,
    out_dir: &Path,
) -> Result<Vec<BenchRecord>> {
    for case in cases {
        for &seed in seeds {
            refs.require(&case.name, seed)?;
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let jobs: Vec<(CaseSpec, u64, SolverSpec)> = cases
        .iter()
        .flat_map(|case| {
            seeds.iter().flat_map(move |&seed| {
                solvers
                    .iter()
                    .map(move |solver| (case.clone(), seed, solver.clone()))
            })
        })
        .collect();
    let records: Vec<Result<BenchRecord>> = pool(options.workers).install(|| {
        jobs.par_iter()
            .map(|(case, seed, solver)| -> Result<BenchRecord> {
                let reference = refs.require(&case.name, *seed)?;
                let prepared = prepare(case, *seed, options.alpha)?;
                let budget = Duration::from_secs_f64(case.timeout_s);
                let cfg = SolverConfig {
                    kind: solver.kind_for(case, options),
                    num_reads: if options.deterministic {
                        options.deterministic_reads
                    } else {
                        usize::MAX
                    },
                    budget: if options.deterministic {
                        None
                    } else {
                        Some(budget)
                    },
                    seed: derive_seed(*seed, &format!("solver/{}/{}", solver.name(), case.name)),
                };
                let started = Instant::now();
                let result =
                    crate::solvers::solve_with_split(&prepared.qubo, &cfg, Some(&prepared.split))?;
                let wall = started.elapsed().as_secs_f64();
                let epsilon = relative_error(result.best.cost, reference.cost_ct);
                let record = BenchRecord {
                    case: case.name.clone(),
                    seed: *seed,
                    solver: solver.name().to_string(),
                    metric: MetricKind::Timeout,
                    epsilons: vec![epsilon],
                    best_epsilon: Some(epsilon),
                    tts_seconds: None,
                    p_eps: None,
                    hits: 0,
                    draws: result.samples.len() as u64,
                    samples_found: result.samples.len() as u64,
                    wall_time_s: wall,
                };
                record.save(out_dir)?;
                Ok(record)
            })
            .collect()
    });
    records.into_iter().collect()
}

/// Time-to-solution protocol parameters.
#[derive(Debug, Clone)]
pub struct TtsProtocol {
    pub eps_threshold: f64,
    pub target_hits: u64,
    pub min_hits: u64,
    pub wall_cap: Duration,
}

impl Default for TtsProtocol {
    /// Draw until 50 samples land within 5% of the optimum, cap at 1000 s,
    /// and require at least 10 acceptable samples for a valid estimate.
    fn default() -> Self {
        TtsProtocol {
            eps_threshold: 0.05,
            target_hits: 50,
            min_hits: 10,
            wall_cap: Duration::from_secs(1000),
        }
    }
}

/// Time-to-solution protocol: draws samples per (instance, solver) until the
/// target number of acceptable samples or the wall cap, estimates the
/// per-draw success probability and converts it to an expected runtime.
/// Instances whose reference is not proven optimal are skipped; their ids
/// are returned alongside the records.
pub fn tts_benchmark(
    cases: &[CaseSpec],
    solvers: &[SolverSpec],
    seeds: &[u64],
    refs: &ReferenceStore,
    protocol: &TtsProtocol,
    options: &RunnerOptions,
    out_dir: &Path,
) -> Result<(Vec<BenchRecord>, Vec<String>)> {
    std::fs::create_dir_all(out_dir)?;
    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    for case in cases {
        for &seed in seeds {
            let reference = refs.require(&case.name, seed)?;
            if !reference.proven_optimal {
                skipped.push(format!("{}-s{}", case.name, seed));
                continue;
            }
            for solver in solvers {
                jobs.push((case.clone(), seed, solver.clone()));
            }
        }
    }
    let records: Vec<Result<BenchRecord>> = pool(options.workers).install(|| {
        jobs.par_iter()
            .map(|(case, seed, solver)| -> Result<BenchRecord> {
                let reference = refs.require(&case.name, *seed)?;
                let prepared = prepare(case, *seed, options.alpha)?;
                let record = tts_single(
                    case,
                    *seed,
                    solver,
                    &prepared,
                    reference.cost_ct,
                    protocol,
                    options,
                )?;
                record.save(out_dir)?;
                Ok(record)
            })
            .collect()
    });
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((records, skipped))
}

pub(crate) fn tts_single(
    case: &CaseSpec,
    seed: u64,
    solver: &SolverSpec,
    prepared: &Prepared,
    reference_cost: f64,
    protocol: &TtsProtocol,
    options: &RunnerOptions,
) -> Result<BenchRecord> {
    // Per-draw budget: heuristics draw unconstrained reads; the exact solver
    // gets the case timeout per full solve.
    let per_read_budget = match solver {
        SolverSpec::Exact => Some(Duration::from_secs_f64(case.timeout_s)),
        _ => None,
    };
    let cfg = SolverConfig {
        kind: solver.kind_for(case, options),
        num_reads: usize::MAX,
        budget: per_read_budget,
        seed: derive_seed(seed, &format!("tts/{}/{}", solver.name(), case.name)),
    };
    let mut reads = run_reads_with_split(&prepared.qubo, &cfg, Some(&prepared.split))?;

    let started = Instant::now();
    let mut epsilons = Vec::new();
    let mut hits = 0u64;
    let mut draws = 0u64;
    let max_draws = if options.deterministic {
        Some(options.deterministic_max_draws)
    } else {
        None
    };
    loop {
        if hits >= protocol.target_hits {
            break;
        }
        if let Some(max_draws) = max_draws {
            if draws >= max_draws {
                break;
            }
        }
        if !options.deterministic && draws > 0 && started.elapsed() >= protocol.wall_cap {
            break;
        }
        let Some(sample) = reads.next() else { break };
        draws += 1;
        let epsilon = relative_error(sample.cost, reference_cost);
        if epsilon <= protocol.eps_threshold {
            hits += 1;
        }
        if epsilons.len() < MAX_STORED_EPSILONS {
            epsilons.push(epsilon);
        }
    }
    let wall = started.elapsed().as_secs_f64();
    let p_eps = if draws > 0 {
        hits as f64 / draws as f64
    } else {
        0.0
    };
    let t_s = if draws > 0 { wall / draws as f64 } else { wall };
    let tts_seconds = if hits >= protocol.min_hits && t_s > 0.0 {
        time_to_solution(t_s, p_eps)
    } else {
        None
    };
    Ok(BenchRecord {
        case: case.name.clone(),
        seed,
        solver: solver.name().to_string(),
        metric: MetricKind::Tts,
        epsilons,
        best_epsilon: None,
        tts_seconds,
        p_eps: Some(p_eps),
        hits,
        draws,
        samples_found: draws,
        wall_time_s: wall,
    })
}
