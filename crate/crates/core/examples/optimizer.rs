//! Greedy selection with random restarts against exhaustive search on
//! random pairwise objectives.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use structrack::optimize::{greedy_optimize, SelectionObjective, TableObjective};

fn exhaustive(obj: &TableObjective) -> f64 {
    let counts = obj.option_counts();
    let mut sel = vec![0; counts.len()];
    let mut best = f64::NEG_INFINITY;
    'outer: loop {
        best = best.max(obj.score(&sel));
        for k in 0..sel.len() {
            sel[k] += 1;
            if sel[k] < counts[k] {
                continue 'outer;
            }
            sel[k] = 0;
        }
        return best;
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let counts = [3, 4, 2, 3, 4];
    let order: Vec<usize> = (0..counts.len()).collect();
    for restarts in [0, 2, 10] {
        let mut hits = 0;
        for _ in 0..200 {
            let obj = TableObjective::random(&counts, &mut rng);
            let out = greedy_optimize(&obj, vec![0; counts.len()], &order, 10, restarts, &mut rng);
            if (out.best.score - exhaustive(&obj)).abs() < 1e-12 {
                hits += 1;
            }
        }
        println!("{restarts:2} restarts: optimum found on {hits}/200 objectives");
    }
}
