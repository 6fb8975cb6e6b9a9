mod common;

use circle::alignment::{align_representations, AlignMode};
use circle::evaluation::{ari, cluster_acc, nmi};
use circle::loss::{contrastive_loss, reconstruction_loss, total_loss, BatchBundle, WeightProfile};
use circle::numeric::cosine_distance_matrix;
use circle::{cluster_rate, instance_rate, load_dataset, save_dataset, Matrix, MultiViewDataset, SynthSpec, ViewFormat};
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_bundle(seed: u64, views: usize, m: usize, k: usize, d: usize) -> BatchBundle<f64> {
    let mut rng = circle::rng::seeded(seed);
    let mut vecs = |count: usize| -> Vec<Vec<f64>> { (0..count).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect() };
    let reps: Vec<_> = (0..views).map(|_| vecs(m)).collect();
    let neighbors: Vec<Vec<Vec<Vec<Vec<f64>>>>> =
        (0..views).map(|_| (0..views).map(|_| (0..k).map(|_| vecs(m)).collect()).collect()).collect();
    let mut b = to_bundle(&reps, &neighbors);
    b.inputs = (0..views).map(|_| Matrix::from_fn(m, 3, |_, _| rng.random_range(-1.0..1.0))).collect();
    b.recons = (0..views).map(|_| Matrix::from_fn(m, 3, |_, _| rng.random_range(-1.0..1.0))).collect();
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn contrastive_is_scale_invariant(seed in 0u64..1000, scale in 0.01f64..100.0) {
        let b = random_bundle(seed, 2, 4, 2, 3);
        let w = WeightProfile::harmonic(2).unwrap();
        let (base, _) = contrastive_loss(&b, &w, 1.0).unwrap();
        let mut scaled = b.clone();
        for z in &mut scaled.reps {
            *z = z.scale(scale);
        }
        for nb in &mut scaled.neighbors {
            for i in 0..2 {
                for r in 0..2 {
                    let m = nb.get(i, r).scale(scale * 0.5);
                    *nb.get_mut(i, r) = m;
                }
            }
        }
        let (value, _) = contrastive_loss(&scaled, &w, 1.0).unwrap();
        prop_assert!((value - base).abs() <= 1e-9);
        prop_assert!(base > 0.0);
    }

    #[test]
    fn contrastive_gradient_is_radial_free(seed in 0u64..1000) {
        let b = random_bundle(seed, 3, 3, 2, 4);
        let (_, g) = contrastive_loss(&b, &WeightProfile::harmonic(2).unwrap(), 1.0).unwrap();
        for (z, gz) in b.reps.iter().zip(&g.reps) {
            for n in 0..z.rows() {
                let d: f64 = z.row(n).iter().zip(gz.row(n)).map(|(a, b)| a * b).sum();
                prop_assert!(d.abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn cosine_distance_is_scale_invariant(seed in 0u64..1000, s in 0.001f64..1000.0) {
        let mut rng = circle::rng::seeded(seed);
        let a = Matrix::from_fn(6, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = Matrix::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0));
        let d1 = cosine_distance_matrix(&a, &b).unwrap();
        let d2 = cosine_distance_matrix(&a.scale(s), &b.scale(1.0 / s)).unwrap();
        for (x, y) in d1.as_slice().iter().zip(d2.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-9);
            prop_assert!((0.0..=2.0).contains(x));
        }
    }

    #[test]
    fn metrics_ignore_relabeling(seed in 0u64..1000) {
        let mut rng = circle::rng::seeded(seed);
        let truth: Vec<usize> = (0..40).map(|_| rng.random_range(0..4)).collect();
        let pred: Vec<usize> = (0..40).map(|_| rng.random_range(0..5)).collect();
        let mut relabel: Vec<usize> = (0..5).map(|i| i * 3 + 7).collect();
        relabel.shuffle(&mut rng);
        let renamed: Vec<usize> = pred.iter().map(|&p| relabel[p]).collect();
        prop_assert_eq!(cluster_acc(&pred, &truth).unwrap(), cluster_acc(&renamed, &truth).unwrap());
        prop_assert!((nmi(&pred, &truth).unwrap() - nmi(&renamed, &truth).unwrap()).abs() <= 1e-12);
        prop_assert!((ari(&pred, &truth).unwrap() - ari(&renamed, &truth).unwrap()).abs() <= 1e-12);
        let n = nmi(&pred, &truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&n));
        prop_assert!(ari(&pred, &truth).unwrap() <= 1.0);
    }

    #[test]
    fn acc_at_least_chance_on_balanced_classes(seed in 0u64..1000, c in 2usize..6) {
        let mut rng = circle::rng::seeded(seed);
        let truth: Vec<usize> = (0..c * 8).map(|i| i % c).collect();
        let pred: Vec<usize> = (0..c * 8).map(|_| rng.random_range(0..c)).collect();
        prop_assert!(cluster_acc(&pred, &truth).unwrap() >= 1.0 / c as f64 - 1e-12);
    }

    #[test]
    fn reconstruction_is_nonnegative_and_zero_only_at_identity(seed in 0u64..1000) {
        let b = random_bundle(seed, 2, 3, 1, 2);
        let (v, _) = reconstruction_loss(&b).unwrap();
        prop_assert!(v > 0.0);
        let mut exact = b.clone();
        exact.recons = exact.inputs.clone();
        let (v0, g0) = reconstruction_loss(&exact).unwrap();
        prop_assert_eq!(v0, 0.0);
        prop_assert!(g0.iter().all(|g| g.as_slice().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn total_is_sum_of_parts(seed in 0u64..1000) {
        let b = random_bundle(seed, 2, 4, 2, 3);
        let w = WeightProfile::harmonic(2).unwrap();
        let out = total_loss(&b, 0.01, &w).unwrap();
        let (rec, _) = reconstruction_loss(&b).unwrap();
        let (cgc, _) = contrastive_loss(&b, &w, 1.0).unwrap();
        prop_assert!((out.total - (rec + 0.01 * cgc)).abs() <= 1e-12);
        prop_assert_eq!(total_loss(&b, 0.0, &w).unwrap().total, rec);
    }

    #[test]
    fn uniform_weights_equal_plain_double_average(seed in 0u64..1000) {
        let b = random_bundle(seed, 2, 3, 3, 2);
        let (value, _) = contrastive_loss(&b, &WeightProfile::uniform(3).unwrap(), 1.0).unwrap();
        let reps: Vec<Vec<Vec<f64>>> = b.reps.iter().map(|z| z.row_iter().map(<[f64]>::to_vec).collect()).collect();
        let nb: Vec<Vec<Vec<Vec<Vec<f64>>>>> = b.neighbors.iter().map(|n| {
            (0..2).map(|i| (0..3).map(|r| n.get(i, r).row_iter().map(<[f64]>::to_vec).collect()).collect()).collect()
        }).collect();
        prop_assert!((value - scalar_contrastive(&reps, &nb, &[1.0 / 3.0; 3])).abs() <= 1e-12);
    }

    #[test]
    fn misalignment_preserves_row_multisets(seed in 0u64..500, frac in 0.0f64..0.95) {
        let spec = SynthSpec { num_clusters: 3, samples_per_cluster: 10, dims: vec![4, 3, 5], latent_dim: 3, noise_std: 0.1, ..SynthSpec::default() };
        let d = circle::generate_synthetic::<f64>(&spec).unwrap();
        let m = d.apply_misalignment(frac, seed).unwrap();
        prop_assert_eq!(m.view(0), d.view(0));
        for v in 0..3 {
            let key = |x: &Matrix<f64>| {
                let mut rows: Vec<Vec<u64>> = x.row_iter().map(|r| r.iter().map(|f| f.to_bits()).collect()).collect();
                rows.sort();
                rows
            };
            prop_assert_eq!(key(m.view(v)), key(d.view(v)));
            for i in m.aligned_indices() {
                prop_assert_eq!(m.view(v).row(i), d.view(v).row(i));
            }
            // Content round trip through the recorded correspondence.
            for row in 0..m.num_samples() {
                prop_assert_eq!(m.view(v).row(row), d.view(v).row(m.true_correspondence()[v][row]));
            }
        }
        prop_assert_eq!(m.num_samples() - m.aligned_indices().len(), (frac * 30.0).floor() as usize);
        prop_assert_eq!(&m.restore_alignment(), &d);
    }

    #[test]
    fn dataset_round_trips_through_files(seed in 0u64..200, binary in any::<bool>()) {
        let spec = SynthSpec { num_clusters: 2, samples_per_cluster: 5, dims: vec![3, 2], num_views: 2, latent_dim: 2, noise_std: 0.1, unaligned_fraction: 0.4, seed };
        let d = circle::synthesize::<f64>(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let fmt = if binary { ViewFormat::Binary } else { ViewFormat::Csv };
        save_dataset(dir.path(), &d, fmt).unwrap();
        let back: MultiViewDataset<f64> = load_dataset(dir.path()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn cluster_rate_dominates_instance_rate(seed in 0u64..500, greedy in any::<bool>(), keep in any::<bool>()) {
        let spec = SynthSpec { num_clusters: 3, samples_per_cluster: 8, dims: vec![4, 3], num_views: 2, latent_dim: 3, noise_std: 0.2, unaligned_fraction: 0.5, seed };
        let d = circle::synthesize::<f64>(&spec).unwrap();
        let mode = if greedy { AlignMode::Greedy } else { AlignMode::Bijective };
        let mut rng = circle::rng::seeded(seed);
        let reps: Vec<Matrix<f64>> = (0..2).map(|_| Matrix::from_fn(24, 2, |_, _| rng.random_range(-1.0..1.0))).collect();
        let res = align_representations(&reps, d.aligned_mask(), mode, keep).unwrap();
        prop_assert!(cluster_rate(&res, &d).unwrap() >= instance_rate(&res, &d).unwrap());
        if !greedy {
            let mut sorted = res.maps[1].clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..24).collect::<Vec<_>>());
        }
        if keep {
            for i in d.aligned_indices() {
                prop_assert_eq!(res.maps[1][i], i);
            }
        }
    }
}

#[test]
fn ari_of_independent_partitions_averages_to_zero() {
    let mut rng = circle::rng::seeded(21);
    let mut total = 0.0;
    for _ in 0..100 {
        let a: Vec<usize> = (0..200).map(|_| rng.random_range(0..5)).collect();
        let b: Vec<usize> = (0..200).map(|_| rng.random_range(0..5)).collect();
        total += ari(&a, &b).unwrap();
    }
    assert!((total / 100.0).abs() <= 0.05);
}

#[test]
fn weight_profiles() {
    let w = WeightProfile::<f64>::harmonic(3).unwrap();
    for (a, b) in w.weights().iter().zip([6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]) {
        assert!((a - b).abs() <= 1e-12);
    }
    for k in 1..=10 {
        let w = WeightProfile::<f64>::harmonic(k).unwrap();
        assert!((w.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn greedy_cost_never_beats_hungarian() {
    let mut rng = circle::rng::seeded(3);
    for _ in 0..50 {
        let reps: Vec<Matrix<f64>> = (0..2).map(|_| Matrix::from_fn(12, 3, |_, _| rng.random_range(-1.0..1.0))).collect();
        let mask = vec![0u8; 12];
        let g = align_representations(&reps, &mask, AlignMode::Greedy, false).unwrap();
        let h = align_representations(&reps, &mask, AlignMode::Bijective, false).unwrap();
        let cost = |d: &Vec<f64>| d.iter().sum::<f64>();
        assert!(cost(&h.distances[1]) >= cost(&g.distances[1]) - 1e-12);
        // Greedy picks the row minimum, so it lower-bounds any assignment.
        // Against a one-to-one greedy (repeatedly take the cheapest free
        // pair) the bijective solver is never worse.
        let c = circle::numeric::euclidean_distance_matrix(&reps[0], &reps[1]).unwrap();
        let (mut rows, mut cols) = (vec![false; 12], vec![false; 12]);
        let mut seq = 0.0;
        for _ in 0..12 {
            let mut best = (0, 0, f64::INFINITY);
            for i in (0..12).filter(|&i| !rows[i]) {
                for j in (0..12).filter(|&j| !cols[j]) {
                    if c[(i, j)] < best.2 {
                        best = (i, j, c[(i, j)]);
                    }
                }
            }
            rows[best.0] = true;
            cols[best.1] = true;
            seq += best.2;
        }
        assert!(cost(&h.distances[1]) <= seq + 1e-12);
        let mut inv = vec![0; 12];
        for (a, &b) in h.maps[1].iter().enumerate() {
            inv[b] = a;
        }
        assert!(h.maps[1].iter().enumerate().all(|(a, &b)| inv[b] == a));
    }
}
