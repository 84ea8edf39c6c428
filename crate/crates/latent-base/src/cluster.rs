//! k-means++ seeding and Lloyd iterations, used to initialize the mixture
//! and HMM fitters.

use crate::numerics::{squared_distance, SeededRng};

/// k-means++ initial centers.
pub fn kmeans_pp_init(data: &[Vec<f64>], k: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    assert!(k >= 1 && data.len() >= k);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(data[rng.next_index(data.len())].clone());
    let mut dist2: Vec<f64> = data
        .iter()
        .map(|p| squared_distance(p, &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            rng.next_weighted_index(&dist2)
        } else {
            rng.next_index(data.len())
        };
        centers.push(data[next].clone());
        let c = centers.last().unwrap();
        for (d, p) in dist2.iter_mut().zip(data) {
            *d = d.min(squared_distance(p, c));
        }
    }
    centers
}

/// Fixed number of Lloyd iterations; returns centers and final assignments.
pub fn lloyd(
    data: &[Vec<f64>],
    mut centers: Vec<Vec<f64>>,
    iters: usize,
    rng: &mut SeededRng,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let k = centers.len();
    let dim = data[0].len();
    let mut assign = vec![0usize; data.len()];
    for _ in 0..iters {
        for (a, p) in assign.iter_mut().zip(data) {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = squared_distance(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            *a = best;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assign.iter().zip(data) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // dead center: restart it on a random point
                centers[c] = data[rng.next_index(data.len())].clone();
            } else {
                for (ctr, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *ctr = s / counts[c] as f64;
                }
            }
        }
    }
    for (a, p) in assign.iter_mut().zip(data) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, center) in centers.iter().enumerate() {
            let d = squared_distance(p, center);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *a = best;
    }
    (centers, assign)
}
