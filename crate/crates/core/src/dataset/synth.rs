use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::numeric::{Matrix, Scalar};
use crate::rng;

const MAX_CENTER_DRAWS: usize = 100;
const MIN_SEPARATION_IN_NOISE_UNITS: f64 = 6.0;

/// Gaussian-cluster multi-view generator settings.
///
/// Cluster centers are standard normal in a `latent_dim` space. Each sample is
/// its cluster center plus isotropic latent noise; view `v` observes
/// `W_v · latent + noise` with `W_v` drawn standard normal and scaled by
/// `1/√latent_dim`. Both noise terms use `noise_std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_views: usize,
    pub num_clusters: usize,
    pub samples_per_cluster: usize,
    pub latent_dim: usize,
    pub dims: Vec<usize>,
    pub noise_std: f64,
    pub unaligned_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_views: 3,
            num_clusters: 5,
            samples_per_cluster: 200,
            latent_dim: 8,
            dims: vec![64, 32, 48],
            noise_std: 0.3,
            unaligned_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Precondition(m));
        if self.num_views < 2 {
            return bad(format!("need at least 2 views, got {}", self.num_views));
        }
        if self.num_clusters < 2 {
            return bad(format!("need at least 2 clusters, got {}", self.num_clusters));
        }
        if self.dims.len() != self.num_views {
            return bad(format!("{} view dims given for {} views", self.dims.len(), self.num_views));
        }
        if self.dims.iter().any(|&d| d == 0) || self.latent_dim == 0 || self.samples_per_cluster == 0 {
            return bad("dimensions and cluster sizes must be positive".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std {} must be finite and non-negative", self.noise_std));
        }
        if !(0.0..1.0).contains(&self.unaligned_fraction) {
            return bad(format!("unaligned fraction {} must lie in [0, 1)", self.unaligned_fraction));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        self.num_clusters * self.samples_per_cluster
    }
}

fn normal(rng: &mut rng::Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Fully aligned synthetic dataset; samples are grouped by cluster in row order.
pub fn generate_synthetic<T: Scalar>(spec: &SynthSpec) -> Result<MultiViewDataset<T>> {
    spec.validate()?;
    let latent = spec.latent_dim;
    let min_sep = MIN_SEPARATION_IN_NOISE_UNITS * spec.noise_std;

    let mut center_rng = rng::stream(spec.seed, 0);
    let mut centers = None;
    for _ in 0..MAX_CENTER_DRAWS {
        let c: Vec<Vec<f64>> = (0..spec.num_clusters)
            .map(|_| (0..latent).map(|_| normal(&mut center_rng)).collect())
            .collect();
        let closest = (0..c.len())
            .flat_map(|a| (a + 1..c.len()).map(move |b| (a, b)))
            .map(|(a, b)| c[a].iter().zip(&c[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        if closest >= min_sep {
            centers = Some(c);
            break;
        }
    }
    let centers = centers.ok_or_else(|| {
        Error::Generation(format!(
            "no center draw reached separation {min_sep} in {MAX_CENTER_DRAWS} attempts"
        ))
    })?;

    let n = spec.num_samples();
    let mut sample_rng = rng::stream(spec.seed, 1);
    let mut labels = Vec::with_capacity(n);
    let mut latents = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..spec.samples_per_cluster {
            labels.push(c);
            latents.push(
                center
                    .iter()
                    .map(|&m| m + spec.noise_std * normal(&mut sample_rng))
                    .collect::<Vec<f64>>(),
            );
        }
    }

    let scale = 1.0 / (latent as f64).sqrt();
    let mut views = Vec::with_capacity(spec.num_views);
    for (v, &dim) in spec.dims.iter().enumerate() {
        let mut map_rng = rng::stream(spec.seed, 100 + v as u64);
        let map: Vec<f64> = (0..latent * dim).map(|_| normal(&mut map_rng) * scale).collect();
        let mut noise_rng = rng::stream(spec.seed, 200 + v as u64);
        let view = Matrix::from_fn(n, dim, |i, j| {
            let projected: f64 = (0..latent).map(|l| latents[i][l] * map[l * dim + j]).sum();
            T::lit(projected + spec.noise_std * normal(&mut noise_rng))
        });
        views.push(view);
    }
    MultiViewDataset::aligned(views, Some(labels))
}

/// [`generate_synthetic`] followed by misalignment at `spec.unaligned_fraction`.
pub fn synthesize<T: Scalar>(spec: &SynthSpec) -> Result<MultiViewDataset<T>> {
    generate_synthetic::<T>(spec)?.apply_misalignment(spec.unaligned_fraction, rng::derive_seed(spec.seed, 300))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_contract() {
        let spec = SynthSpec {
            noise_std: 0.1,
            ..SynthSpec::default()
        };
        let d: MultiViewDataset<f64> = generate_synthetic(&spec).unwrap();
        assert_eq!(d.num_samples(), 1000);
        assert_eq!(d.view_dims(), vec![64, 32, 48]);
        assert!(d.is_fully_aligned());
        let mut hist = vec![0; 5];
        for &l in d.labels().unwrap() {
            hist[l] += 1;
        }
        assert_eq!(hist, vec![200; 5]);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec {
            samples_per_cluster: 20,
            ..SynthSpec::default()
        };
        let a: MultiViewDataset<f64> = synthesize(&spec).unwrap();
        let b: MultiViewDataset<f64> = synthesize(&spec).unwrap();
        assert_eq!(a, b);
        let c: MultiViewDataset<f64> = synthesize(&SynthSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn infeasible_separation_fails() {
        let spec = SynthSpec {
            noise_std: 100.0,
            samples_per_cluster: 2,
            ..SynthSpec::default()
        };
        assert!(matches!(generate_synthetic::<f64>(&spec), Err(Error::Generation(_))));
    }

    #[test]
    fn invalid_specs_rejected() {
        for bad in [
            SynthSpec { num_views: 1, dims: vec![3], ..SynthSpec::default() },
            SynthSpec { num_clusters: 1, ..SynthSpec::default() },
            SynthSpec { unaligned_fraction: 1.0, ..SynthSpec::default() },
            SynthSpec { dims: vec![3, 3], ..SynthSpec::default() },
        ] {
            assert!(generate_synthetic::<f64>(&bad).is_err());
        }
    }
}
