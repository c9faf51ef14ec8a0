//! Greedy coordinate-wise maximization over per-object choices, with one
//! score-guided run and a number of random restarts.

use rand::seq::SliceRandom;
use rand::Rng;

/// A score over selections, where a selection picks one option per object.
pub trait SelectionObjective {
    /// Number of options available to each object.
    fn option_counts(&self) -> Vec<usize>;
    fn score(&self, selection: &[usize]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub selection: Vec<usize>,
    pub score: f64,
    /// Full sweeps performed, including the final one that changed nothing.
    pub sweeps: usize,
    /// Incumbent score after each accepted move, starting with the initial one.
    pub trajectory: Vec<f64>,
}

/// One greedy run: sweeps objects in `order`, trying every option of the
/// active object with the others fixed and keeping strict improvements.
/// Stops after a sweep without change or after `max_sweeps` sweeps.
pub fn greedy_run<O: SelectionObjective + ?Sized>(
    objective: &O,
    initial: Vec<usize>,
    order: &[usize],
    max_sweeps: usize,
) -> RunOutcome {
    let counts = objective.option_counts();
    let mut selection = initial;
    let mut score = objective.score(&selection);
    let mut trajectory = vec![score];
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut changed = false;
        for &object in order {
            let incumbent = selection[object];
            let mut best = incumbent;
            for option in 0..counts[object] {
                if option == best {
                    continue;
                }
                selection[object] = option;
                let s = objective.score(&selection);
                if s > score {
                    score = s;
                    best = option;
                    trajectory.push(s);
                }
                selection[object] = best;
            }
            changed |= best != incumbent;
        }
        if !changed {
            break;
        }
    }
    RunOutcome {
        selection,
        score,
        sweeps,
        trajectory,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub best: RunOutcome,
    /// The score-guided run first, then the random restarts.
    pub runs: Vec<RunOutcome>,
}

/// Best of one score-guided run (from `initial`, objects in `guided_order`)
/// and `restarts` runs from random selections in random object orders.
pub fn greedy_optimize<O: SelectionObjective + ?Sized, R: Rng + ?Sized>(
    objective: &O,
    initial: Vec<usize>,
    guided_order: &[usize],
    max_sweeps: usize,
    restarts: usize,
    rng: &mut R,
) -> OptimizeOutcome {
    let counts = objective.option_counts();
    let mut runs = Vec::with_capacity(restarts + 1);
    runs.push(greedy_run(objective, initial, guided_order, max_sweeps));
    let mut order: Vec<usize> = (0..counts.len()).collect();
    for _ in 0..restarts {
        let start: Vec<usize> = counts.iter().map(|&c| rng.random_range(0..c)).collect();
        order.shuffle(rng);
        runs.push(greedy_run(objective, start, &order, max_sweeps));
    }
    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.score > runs[best].score {
            best = k;
        }
    }
    OptimizeOutcome {
        best: runs[best].clone(),
        runs,
    }
}

/// Objective defined by unary and pairwise score tables; used to check the
/// optimizer against exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct TableObjective {
    pub unary: Vec<Vec<f64>>,
    /// `pairwise[i][j][a][b]` for `i < j`.
    pub pairwise: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TableObjective {
    pub fn random<R: Rng + ?Sized>(counts: &[usize], rng: &mut R) -> Self {
        let n = counts.len();
        let unary = counts
            .iter()
            .map(|&c| (0..c).map(|_| rng.random::<f64>()).collect())
            .collect();
        let pairwise = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i < j {
                            (0..counts[i])
                                .map(|_| (0..counts[j]).map(|_| rng.random::<f64>()).collect())
                                .collect()
                        } else {
                            Vec::new()
                        }
                    })
                    .collect()
            })
            .collect();
        Self { unary, pairwise }
    }
}

impl SelectionObjective for TableObjective {
    fn option_counts(&self) -> Vec<usize> {
        self.unary.iter().map(Vec::len).collect()
    }

    fn score(&self, s: &[usize]) -> f64 {
        let n = s.len();
        let mut total: f64 = (0..n).map(|i| self.unary[i][s[i]]).sum();
        for i in 0..n {
            for j in i + 1..n {
                total += self.pairwise[i][j][s[i]][s[j]];
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exhaustive(obj: &TableObjective) -> f64 {
        let counts = obj.option_counts();
        let mut best = f64::NEG_INFINITY;
        let mut sel = vec![0; counts.len()];
        loop {
            best = best.max(obj.score(&sel));
            let mut k = 0;
            loop {
                if k == sel.len() {
                    return best;
                }
                sel[k] += 1;
                if sel[k] < counts[k] {
                    break;
                }
                sel[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn single_option_converges_in_one_sweep() {
        let obj = TableObjective {
            unary: vec![vec![0.3], vec![0.1], vec![0.5]],
            pairwise: TableObjective::random(&[1, 1, 1], &mut ChaCha8Rng::seed_from_u64(0)).pairwise,
        };
        let r = greedy_run(&obj, vec![0, 0, 0], &[0, 1, 2], 10);
        assert_eq!(r.selection, vec![0, 0, 0]);
        assert_eq!(r.sweeps, 1);
    }

    #[test]
    fn two_by_two_matches_enumeration() {
        let obj = TableObjective {
            unary: vec![vec![0.0, 0.1], vec![0.0, 0.1]],
            pairwise: vec![vec![vec![], vec![vec![1.0, 0.0], vec![0.0, 0.5]]], vec![vec![], vec![]]],
        };
        let out = greedy_optimize(&obj, vec![1, 1], &[0, 1], 10, 10, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(out.best.score, exhaustive(&obj));
        assert_eq!(out.best.selection, vec![0, 0]);
        assert_eq!(out.runs.len(), 11);
    }

    #[test]
    fn trajectories_non_decreasing_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let obj = TableObjective::random(&[3, 3, 3], &mut rng);
            let out = greedy_optimize(&obj, vec![0, 0, 0], &[0, 1, 2], 4, 10, &mut rng);
            for r in &out.runs {
                assert!(r.trajectory.windows(2).all(|w| w[1] > w[0]));
                assert!(r.sweeps <= 4);
                assert_eq!(*r.trajectory.last().unwrap(), r.score);
            }
            assert!(out.best.score >= out.runs[0].trajectory[0]);
        }
    }

    #[test]
    fn finds_global_optimum_usually() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let hits = (0..100)
            .filter(|_| {
                let counts: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=3)).collect();
                let obj = TableObjective::random(&counts, &mut rng);
                let init = vec![0; counts.len()];
                let order: Vec<usize> = (0..counts.len()).collect();
                let out = greedy_optimize(&obj, init, &order, 10, 10, &mut rng);
                (out.best.score - exhaustive(&obj)).abs() < 1e-12
            })
            .count();
        assert!(hits >= 95, "{hits}");
    }
}
