use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numeric::{squared_euclidean, Matrix, Scalar};
use crate::rng;

pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const CENTER_SHIFT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    pub labels: Vec<usize>,
    pub centers: Matrix<T>,
    pub inertia: T,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_history: Vec<T>,
}

/// k-means++ seeding followed by Lloyd iterations; best inertia over
/// `restarts` independently seeded runs.
pub fn kmeans_pp<T: Scalar>(x: &Matrix<T>, k: usize, seed: u64, restarts: usize) -> Result<KMeansResult<T>> {
    if k == 0 || k > x.rows() {
        return Err(Error::Precondition(format!("k = {k} must lie in 1..={}", x.rows())));
    }
    let mut best: Option<KMeansResult<T>> = None;
    for r in 0..restarts.max(1) {
        let run = lloyd(x, seed_centers(x, k, &mut rng::stream(seed, r as u64)));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn seed_centers<T: Scalar>(x: &Matrix<T>, k: usize, rng: &mut rng::Rng) -> Matrix<T> {
    let n = x.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut closest: Vec<f64> = (0..n).map(|i| squared_euclidean(x.row(i), x.row(chosen[0])).as_f64()).collect();
    while chosen.len() < k {
        let total: f64 = closest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            while closest[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            // Every point coincides with a chosen center.
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, c) in closest.iter_mut().enumerate() {
            *c = c.min(squared_euclidean(x.row(i), x.row(next)).as_f64());
        }
    }
    x.select_rows(&chosen)
}

fn assign<T: Scalar>(x: &Matrix<T>, centers: &Matrix<T>, labels: &mut [usize]) -> T {
    let mut inertia = T::zero();
    for (i, label) in labels.iter_mut().enumerate() {
        let row = x.row(i);
        let (mut best, mut best_d) = (0, T::infinity());
        for c in 0..centers.rows() {
            let d = squared_euclidean(row, centers.row(c));
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        *label = best;
        inertia += best_d;
    }
    inertia
}

fn lloyd<T: Scalar>(x: &Matrix<T>, mut centers: Matrix<T>) -> KMeansResult<T> {
    let (n, d) = x.shape();
    let k = centers.rows();
    let mut labels = vec![0; n];
    let mut history = Vec::new();
    let tol = T::lit(CENTER_SHIFT_TOLERANCE);
    let mut inertia = assign(x, &centers, &mut labels);
    history.push(inertia);
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = Matrix::<T>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &v) in sums.row_mut(l).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut shift = T::zero();
        for c in 0..k {
            // An emptied cluster keeps its previous center.
            if counts[c] == 0 {
                continue;
            }
            let inv = T::one() / T::from_usize_lossy(counts[c]);
            let new: Vec<T> = sums.row(c).iter().map(|&s| s * inv).collect();
            shift = shift.max(squared_euclidean(&new, centers.row(c)).sqrt());
            centers.row_mut(c).copy_from_slice(&new);
        }
        inertia = assign(x, &centers, &mut labels);
        history.push(inertia);
        if shift < tol {
            break;
        }
    }
    KMeansResult {
        labels,
        centers,
        inertia,
        inertia_history: history,
    }
}
