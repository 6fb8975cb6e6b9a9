//! Independent reference implementations shared by the integration tests and
//! the acceptance runner. Nothing here calls into the code it checks except
//! to obtain the value under test.
#![allow(dead_code)]

use circle::dataset::MultiViewDataset;
use circle::loss::{contrastive_loss, BatchBundle, NeighborReps, Objective, WeightProfile};
use circle::trainer::{batch_objective, build_graph};
use circle::{Matrix, SynthSpec, ViewAutoencoder};
use rand::Rng;

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                prefix.push(j);
                go(prefix, used, out);
                prefix.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    permutations(cost.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Best accuracy over injective maps from predicted to true labels,
/// enumerated exhaustively.
pub fn brute_force_acc(pred: &[usize], truth: &[usize]) -> f64 {
    let kp = pred.iter().max().map_or(0, |m| m + 1);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let size = kp.max(kt);
    let mut best = 0;
    for perm in permutations(size) {
        let hits = pred.iter().zip(truth).filter(|(p, t)| perm[**p] == **t).count();
        best = best.max(hits);
    }
    best as f64 / pred.len() as f64
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut a = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

pub fn sample_covariance(x: &Matrix<f64>) -> Vec<Vec<f64>> {
    let (n, d) = x.shape();
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| (0..n).map(|i| (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect()
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    ab / (aa.sqrt() * bb.sqrt())
}

/// The contrastive objective written out term by term with scalar loops:
/// for every anchor `(v, n)` and every `(i, r)`,
/// `−log e^{s(z_n, q)} / Σ_m (e^{s(z_n, z_m)} + e^{s(z_n, q_m)})`,
/// weighted by `w_r / V` and averaged over all `V·M` anchors.
///
/// `reps[v][n]` is a vector, `neighbors[v][i][r][n]` the neighbor vector.
pub fn scalar_contrastive(reps: &[Vec<Vec<f64>>], neighbors: &[Vec<Vec<Vec<Vec<f64>>>>], w: &[f64]) -> f64 {
    let views = reps.len();
    let m = reps[0].len();
    let mut total = 0.0;
    for v in 0..views {
        for n in 0..m {
            let mut anchor = 0.0;
            for i in 0..views {
                for (r, wr) in w.iter().enumerate() {
                    let q = &neighbors[v][i][r];
                    let num = cos(&reps[v][n], &q[n]).exp();
                    let mut den = 0.0;
                    for mm in 0..m {
                        den += cos(&reps[v][n], &reps[v][mm]).exp();
                        den += cos(&reps[v][n], &q[mm]).exp();
                    }
                    anchor += wr * -(num / den).ln();
                }
            }
            total += anchor / views as f64;
        }
    }
    total / (views * m) as f64
}

/// Hand-sized bundle: M = 2, V = 2, K = 1, d_z = 2.
pub fn hand_bundle() -> (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<Vec<Vec<f64>>>>>) {
    let reps = vec![
        vec![vec![1.0, 0.0], vec![0.6, 0.8]],
        vec![vec![0.0, 2.0], vec![-1.0, 1.0]],
    ];
    // neighbors[v][i][0][n]
    let neighbors = vec![
        vec![vec![vec![vec![1.0, 1.0], vec![0.5, -0.5]]], vec![vec![vec![2.0, 0.5], vec![-0.3, 0.9]]]],
        vec![vec![vec![vec![0.2, 1.0], vec![1.0, -2.0]]], vec![vec![vec![-1.5, 0.5], vec![0.7, 0.7]]]],
    ];
    (reps, neighbors)
}

pub fn to_bundle(reps: &[Vec<Vec<f64>>], neighbors: &[Vec<Vec<Vec<Vec<f64>>>>]) -> BatchBundle<f64> {
    let views = reps.len();
    let k = neighbors[0][0].len();
    let mat = |rows: &Vec<Vec<f64>>| Matrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let m = reps[0].len();
    BatchBundle {
        positions: (0..m).collect(),
        inputs: Vec::new(),
        reps: reps.iter().map(mat).collect(),
        recons: Vec::new(),
        neighbors: neighbors
            .iter()
            .map(|per_view| {
                let mats = per_view.iter().flat_map(|per_i| per_i.iter().map(mat)).collect();
                NeighborReps::new(views, k, mats).unwrap()
            })
            .collect(),
    }
}

/// Largest relative deviation between analytic contrastive gradients and
/// central differences on every coordinate of the hand bundle.
pub fn hand_bundle_gradient_error(h: f64) -> f64 {
    let (reps, neighbors) = hand_bundle();
    let w = WeightProfile::<f64>::harmonic(1).unwrap();
    let (_, grads) = contrastive_loss(&to_bundle(&reps, &neighbors), &w, 1.0).unwrap();
    let eval = |r: &Vec<Vec<Vec<f64>>>, nb: &Vec<Vec<Vec<Vec<Vec<f64>>>>>| scalar_contrastive(r, nb, &[1.0]);
    let mut worst: f64 = 0.0;
    for v in 0..2 {
        for n in 0..2 {
            for c in 0..2 {
                let mut plus = reps.clone();
                let mut minus = reps.clone();
                plus[v][n][c] += h;
                minus[v][n][c] -= h;
                let fd = (eval(&plus, &neighbors) - eval(&minus, &neighbors)) / (2.0 * h);
                worst = worst.max(rel_err(grads.reps[v][(n, c)], fd));
            }
        }
    }
    for v in 0..2 {
        for i in 0..2 {
            for n in 0..2 {
                for c in 0..2 {
                    let mut plus = neighbors.clone();
                    let mut minus = neighbors.clone();
                    plus[v][i][0][n][c] += h;
                    minus[v][i][0][n][c] -= h;
                    let fd = (eval(&reps, &plus) - eval(&reps, &minus)) / (2.0 * h);
                    worst = worst.max(rel_err(grads.neighbors[v].get(i, 0)[(n, c)], fd));
                }
            }
        }
    }
    worst
}

/// `|a − b| / max(|a|, |b|, 1e-6)`; the floor keeps vanishing gradients from
/// turning round-off into huge ratios.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub struct GradientCheck {
    pub parameters: usize,
    pub max_rel_err: f64,
}

/// Every parameter gradient of the full objective against central
/// differences, on a 5-7-6-4 network with d_z = 3, V = 3, K = 2, M = 4.
pub fn network_gradient_check(seed: u64, lambda: f64, h: f64) -> GradientCheck {
    let spec = SynthSpec {
        num_views: 3,
        num_clusters: 2,
        samples_per_cluster: 6,
        latent_dim: 3,
        dims: vec![5, 5, 5],
        noise_std: 0.1,
        unaligned_fraction: 0.5,
        seed,
    };
    let data: MultiViewDataset<f64> = circle::synthesize(&spec).unwrap();
    let graph = build_graph(&data, 2).unwrap();
    let arch = circle::Architecture {
        hidden: [7, 6, 4],
        latent_dim: 3,
    };
    let mut model = ViewAutoencoder::<f64>::init(&[5, 5, 5], arch, seed).unwrap();
    // Random non-zero biases so every layer's bias gradient is exercised.
    let mut rng = circle::rng::seeded(seed ^ 0xB1A5);
    for p in model.parameters_mut() {
        for x in p.iter_mut() {
            if *x == 0.0 {
                *x = rng.random_range(-0.1..0.1);
            }
        }
    }
    let positions = [0, 3, 7, 10];
    let obj = Objective::new(lambda);
    let weights = WeightProfile::harmonic(2).unwrap();
    let loss = |m: &ViewAutoencoder<f64>| batch_objective(m, &data, &graph, &positions, &obj, &weights).unwrap().0.total;
    let (_, grads) = batch_objective(&model, &data, &graph, &positions, &obj, &weights).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();

    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (t, g) in analytic.iter().enumerate() {
        for (j, &ga) in g.iter().enumerate() {
            let original = model.parameters()[t][j];
            model.parameters_mut()[t][j] = original + h;
            let up = loss(&model);
            model.parameters_mut()[t][j] = original - h;
            let down = loss(&model);
            model.parameters_mut()[t][j] = original;
            worst = worst.max(rel_err(ga, (up - down) / (2.0 * h)));
            count += 1;
        }
    }
    GradientCheck {
        parameters: count,
        max_rel_err: worst,
    }
}

/// K nearest aligned rows (cosine distance, self excluded) by sorting every
/// candidate; ties broken by index.
pub fn knn_by_full_sort(x: &Matrix<f64>, aligned: &[bool], k: usize) -> Vec<Vec<usize>> {
    let n = x.rows();
    (0..n)
        .map(|i| {
            let mut cands: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i && aligned[j])
                .map(|j| (1.0 - cos(x.row(i), x.row(j)), j))
                .collect();
            cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            cands.iter().take(k).map(|c| c.1).collect()
        })
        .collect()
}
