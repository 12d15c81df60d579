use flowmatch_core::bench::relative_error;
use flowmatch_core::instance::{case_by_name, generate};
use flowmatch_core::matching::{build_qubo, pair_flows, Qubo};
use flowmatch_core::solvers::{exact_solve, ConvexSplit};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Dense {
    n: usize,
    diag: Vec<f64>,
    couple: Vec<Vec<(usize, f64)>>,
    offset: f64,
}

impl Dense {
    fn new(q: &Qubo) -> Self {
        let n = q.num_variables();
        let mut diag = vec![0.0; n];
        let mut couple = vec![Vec::new(); n];
        for (i, j, v) in q.entries() {
            if i == j {
                diag[i] = v;
            } else {
                couple[i].push((j, v));
                couple[j].push((i, v));
            }
        }
        Dense { n, diag, couple, offset: q.offset() }
    }
}

// SA read that returns (final_cost, best_visited_cost).
fn read(d: &Dense, sweeps: usize, bs: f64, be: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let mut x = vec![false; d.n];
    let mut field = d.diag.clone();
    let mut cost = d.offset;
    let mut best = cost;
    let mut order: Vec<usize> = (0..d.n).collect();
    for t in 0..sweeps {
        let beta = bs * (be / bs).powf(t as f64 / (sweeps - 1) as f64);
        order.shuffle(rng);
        for &i in &order {
            let delta = if x[i] { -field[i] } else { field[i] };
            if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                cost += delta;
                x[i] = !x[i];
                let s = if x[i] { 1.0 } else { -1.0 };
                for &(j, v) in &d.couple[i] {
                    field[j] += s * v;
                }
                if cost < best {
                    best = cost;
                }
            }
        }
    }
    (cost, best)
}

fn main() {
    for (bs, be) in [(0.2, 1000.0), (0.02, 1000.0)] {
        let case = case_by_name("case9").unwrap();
        let (mut hits_final, mut hits_best, mut reads) = (0u64, 0u64, 0u64);
        for seed in 0..20u64 {
            let instance = generate(&case, seed, 100.0).unwrap();
            let pf = pair_flows(&instance).unwrap();
            let q = build_qubo(&instance, &pf).unwrap();
            let split = ConvexSplit::from_pair_flows(&instance, &pf);
            let reference = exact_solve(&q, Some(&split), None).best.cost;
            let d = Dense::new(&q);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
            for _ in 0..200 {
                let (final_cost, best_cost) = read(&d, 100, bs, be, &mut rng);
                reads += 1;
                if relative_error(final_cost, reference) <= 0.05 {
                    hits_final += 1;
                }
                if relative_error(best_cost, reference) <= 0.05 {
                    hits_best += 1;
                }
            }
        }
        println!(
            "schedule ({bs}, {be}): p_final = {:.3}  p_best_visited = {:.3} ({} reads)",
            hits_final as f64 / reads as f64,
            hits_best as f64 / reads as f64,
            reads
        );
    }
}
