//! Reconstruction and cross-view graph contrastive objectives with exact
//! gradients with respect to representations and reconstructions.

use crate::error::{Error, Result};
use crate::numeric::{dot, norm, Matrix, Scalar};

/// Per-neighbor weights `w_r = r⁻¹ / Σ_{r'} r'⁻¹` for neighbor ranks `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile<T> {
    weights: Vec<T>,
}

impl<T: Scalar> WeightProfile<T> {
    /// Distance-index (harmonic) weighting: closer neighbors weigh more.
    pub fn harmonic(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Precondition("weight profile needs K >= 1".into()));
        }
        let total: T = (1..=k).map(|r| T::one() / T::from_usize_lossy(r)).sum();
        Ok(Self {
            weights: (1..=k).map(|r| T::one() / T::from_usize_lossy(r) / total).collect(),
        })
    }

    /// Every neighbor weighs `1/K`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Precondition("weight profile needs K >= 1".into()));
        }
        Ok(Self {
            weights: vec![T::one() / T::from_usize_lossy(k); k],
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

/// Representations of each anchor's cross-view neighbors, for one anchor view.
///
/// `get(i, r)` is an `M × d_z` matrix whose row `m` is the view-`i`
/// representation of the `r`-th neighbor of batch slot `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborReps<T> {
    views: usize,
    k: usize,
    mats: Vec<Matrix<T>>,
}

impl<T: Scalar> NeighborReps<T> {
    pub fn new(views: usize, k: usize, mats: Vec<Matrix<T>>) -> Result<Self> {
        if mats.len() != views * k {
            return Err(Error::Dimension {
                op: "NeighborReps::new",
                detail: format!("{} matrices for {views} views x {k} neighbors", mats.len()),
            });
        }
        if let Some(first) = mats.first() {
            if let Some(bad) = mats.iter().find(|m| m.shape() != first.shape()) {
                return Err(Error::Shape {
                    op: "NeighborReps::new",
                    left: first.shape(),
                    right: bad.shape(),
                });
            }
        }
        Ok(Self { views, k, mats })
    }

    pub fn zeros(views: usize, k: usize, m: usize, d: usize) -> Self {
        Self {
            views,
            k,
            mats: vec![Matrix::zeros(m, d); views * k],
        }
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, r: usize) -> &Matrix<T> {
        &self.mats[i * self.k + r]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, r: usize) -> &mut Matrix<T> {
        &mut self.mats[i * self.k + r]
    }
}

/// One mini-batch worth of inputs, representations, reconstructions and
/// neighbor representations, indexed by view.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchBundle<T> {
    /// Dataset positions of the batch slots.
    pub positions: Vec<usize>,
    pub inputs: Vec<Matrix<T>>,
    pub reps: Vec<Matrix<T>>,
    pub recons: Vec<Matrix<T>>,
    /// Indexed by anchor view.
    pub neighbors: Vec<NeighborReps<T>>,
}

impl<T: Scalar> BatchBundle<T> {
    pub fn batch_size(&self) -> usize {
        self.reps.first().map_or(0, Matrix::rows)
    }

    pub fn num_views(&self) -> usize {
        self.reps.len()
    }

    fn check_reconstruction(&self) -> Result<()> {
        if self.inputs.len() != self.recons.len() {
            return Err(Error::Dimension {
                op: "reconstruction_loss",
                detail: format!("{} input views, {} reconstructions", self.inputs.len(), self.recons.len()),
            });
        }
        let m = self.inputs.first().map_or(0, Matrix::rows);
        for (x, xh) in self.inputs.iter().zip(&self.recons) {
            if x.shape() != xh.shape() || x.rows() != m {
                return Err(Error::Shape {
                    op: "reconstruction_loss",
                    left: x.shape(),
                    right: xh.shape(),
                });
            }
        }
        Ok(())
    }

    fn check_contrastive(&self, k: usize) -> Result<()> {
        let views = self.reps.len();
        if views == 0 {
            return Err(Error::Precondition("bundle has no views".into()));
        }
        if self.neighbors.len() != views {
            return Err(Error::Dimension {
                op: "contrastive_loss",
                detail: format!("{} neighbor sets for {views} views", self.neighbors.len()),
            });
        }
        let shape = self.reps[0].shape();
        for (z, nb) in self.reps.iter().zip(&self.neighbors) {
            if z.shape() != shape {
                return Err(Error::Shape {
                    op: "contrastive_loss",
                    left: shape,
                    right: z.shape(),
                });
            }
            if nb.views != views || nb.k != k {
                return Err(Error::Dimension {
                    op: "contrastive_loss",
                    detail: format!("neighbor tensor is {}x{}, expected {views}x{k}", nb.views, nb.k),
                });
            }
            if let Some(bad) = nb.mats.iter().find(|m| m.shape() != shape) {
                return Err(Error::Shape {
                    op: "contrastive_loss",
                    left: shape,
                    right: bad.shape(),
                });
            }
        }
        Ok(())
    }
}

/// `Σ_v Σ_n ‖x̂ − x‖² / (M·V)` and its gradient with respect to every `x̂`.
pub fn reconstruction_loss<T: Scalar>(bundle: &BatchBundle<T>) -> Result<(T, Vec<Matrix<T>>)> {
    bundle.check_reconstruction()?;
    let m = bundle.inputs.first().map_or(0, Matrix::rows);
    let denom = T::from_usize_lossy((m * bundle.inputs.len()).max(1));
    let two = T::lit(2.0);
    let mut value = T::zero();
    let mut grads = Vec::with_capacity(bundle.inputs.len());
    for (x, xh) in bundle.inputs.iter().zip(&bundle.recons) {
        let diff = xh.sub(x)?;
        value += diff.frobenius_sq();
        grads.push(diff.scale(two / denom));
    }
    Ok((value / denom, grads))
}

/// Cosine similarity `a·b / (‖a‖‖b‖)`.
pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            op: "cosine_similarity",
            left: (1, a.len()),
            right: (1, b.len()),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if !(na > T::zero() && nb > T::zero()) {
        return Err(Error::Degenerate {
            op: "cosine_similarity",
            detail: "zero vector".into(),
        });
    }
    Ok((dot(a, b) / (na * nb)).max(-T::one()).min(T::one()))
}

/// Gradients of the contrastive loss with respect to every representation in
/// the bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveGradients<T> {
    pub reps: Vec<Matrix<T>>,
    pub neighbors: Vec<NeighborReps<T>>,
}

/// Row-normalized copy plus the original norms.
fn unit_rows<T: Scalar>(m: &Matrix<T>, what: impl Fn(usize) -> String) -> Result<(Matrix<T>, Vec<T>)> {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let n = norm(m.row(i));
        if !(n > T::zero() && n.is_finite()) {
            return Err(Error::Degenerate {
                op: "contrastive_loss",
                detail: format!("{} has norm {n}", what(i)),
            });
        }
        out.row_mut(i).iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    Ok((out, norms))
}

/// Maps a gradient with respect to unit vectors `û = z/‖z‖` back to `z`:
/// `(g − (g·û)û) / ‖z‖`.
fn project_to_raw<T: Scalar>(grad_unit: &Matrix<T>, unit: &Matrix<T>, norms: &[T]) -> Matrix<T> {
    let mut out = grad_unit.clone();
    for i in 0..out.rows() {
        let u = unit.row(i);
        let radial = dot(grad_unit.row(i), u);
        for (g, &uj) in out.row_mut(i).iter_mut().zip(u) {
            *g = (*g - radial * uj) / norms[i];
        }
    }
    out
}

/// Distance-weighted cross-view graph contrastive loss averaged over all
/// `V·M` anchors of the batch.
///
/// For anchor `(v, n)`, neighbor view `i` and rank `r` the term is
/// `−log( e^{s(z_n, p)} / Σ_m [e^{s(z_n, z_m)} + e^{s(z_n, q_m)}] )` where `p`
/// is the anchor's own rank-`r` neighbor in view `i`, `z_m` ranges over the
/// anchor view's batch (including `n` itself) and `q_m` over every batch
/// member's rank-`r` neighbor in view `i`. The anchor loss is
/// `(1/V) Σ_i Σ_r w_r · term`. Similarities are divided by `temperature`.
pub fn contrastive_loss<T: Scalar>(
    bundle: &BatchBundle<T>,
    weights: &WeightProfile<T>,
    temperature: T,
) -> Result<(T, ContrastiveGradients<T>)> {
    let k = weights.k();
    bundle.check_contrastive(k)?;
    if !(temperature > T::zero()) {
        return Err(Error::Precondition(format!("temperature {temperature} must be positive")));
    }
    let views = bundle.num_views();
    let (m, d) = bundle.reps[0].shape();
    let inv_tau = T::one() / temperature;
    let shift = inv_tau;
    let anchors = T::from_usize_lossy(views * m);
    let views_t = T::from_usize_lossy(views);

    let mut units = Vec::with_capacity(views);
    let mut norms = Vec::with_capacity(views);
    for (v, z) in bundle.reps.iter().enumerate() {
        let (u, n) = unit_rows(z, |slot| format!("representation (view {v}, slot {slot})"))?;
        units.push(u);
        norms.push(n);
    }

    let mut value = T::zero();
    let mut grad_reps = Vec::with_capacity(views);
    let mut grad_neighbors = Vec::with_capacity(views);

    for v in 0..views {
        let a = &units[v];
        let nb = &bundle.neighbors[v];

        // exp(S - shift) for same-view similarities; shared across all (i, r).
        let mut same = a.matmul_t(a)?;
        same.as_mut_slice().iter_mut().for_each(|s| *s = (*s * inv_tau - shift).exp());
        let same_sums: Vec<T> = same.row_iter().map(|r| r.iter().copied().sum()).collect();

        let mut g_same = Matrix::<T>::zeros(m, m);
        let mut g_anchor = Matrix::<T>::zeros(m, d);
        let mut g_nb = NeighborReps::zeros(views, k, m, d);

        for i in 0..views {
            for r in 0..k {
                let (q, q_norms) = unit_rows(nb.get(i, r), |slot| {
                    format!("neighbor rank {r} in view {i} of (view {v}, slot {slot})")
                })?;
                let alpha = weights.weights()[r] / (views_t * anchors);
                let mut cross = a.matmul_t(&q)?;
                let positives: Vec<T> = (0..m).map(|n| cross[(n, n)] * inv_tau).collect();
                cross.as_mut_slice().iter_mut().for_each(|s| *s = (*s * inv_tau - shift).exp());

                // Gradient with respect to the scaled similarities, per row n.
                let mut g_cross = Matrix::<T>::zeros(m, m);
                for n in 0..m {
                    let denom = same_sums[n] + cross.row(n).iter().copied().sum::<T>();
                    value += alpha * (shift + denom.ln() - positives[n]);
                    let coef = alpha / denom;
                    for (g, &e) in g_same.row_mut(n).iter_mut().zip(same.row(n)) {
                        *g += coef * e;
                    }
                    for (g, &e) in g_cross.row_mut(n).iter_mut().zip(cross.row(n)) {
                        *g = coef * e;
                    }
                    g_cross[(n, n)] -= alpha;
                }
                // C = A·Qᵀ/τ  ⇒  ∂A += G·Q/τ,  ∂Q = Gᵀ·A/τ.
                g_anchor.axpy(inv_tau, &g_cross.matmul(&q)?)?;
                let g_q_unit = g_cross.t_matmul(a)?.scale(inv_tau);
                *g_nb.get_mut(i, r) = project_to_raw(&g_q_unit, &q, &q_norms);
            }
        }
        // S = A·Aᵀ/τ  ⇒  ∂A += (G + Gᵀ)·A/τ.
        let g_sym = {
            let mut s = g_same.transpose();
            s.axpy(T::one(), &g_same)?;
            s
        };
        g_anchor.axpy(inv_tau, &g_sym.matmul(a)?)?;
        grad_reps.push(project_to_raw(&g_anchor, a, &norms[v]));
        grad_neighbors.push(g_nb);
    }

    Ok((
        value,
        ContrastiveGradients {
            reps: grad_reps,
            neighbors: grad_neighbors,
        },
    ))
}

/// How the two objective terms are combined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective<T> {
    /// Weight on the contrastive term.
    pub lambda: T,
    /// When false the reconstruction term is still evaluated but contributes
    /// neither to the total nor to the gradients.
    pub reconstruction: bool,
    pub temperature: T,
}

impl<T: Scalar> Objective<T> {
    pub fn new(lambda: T) -> Self {
        Self {
            lambda,
            reconstruction: true,
            temperature: T::one(),
        }
    }
}

/// Objective value, its parts, and gradients of the total.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub reconstruction: T,
    pub contrastive: T,
    pub total: T,
    /// ∂total/∂x̂ per view; `None` when the reconstruction term is disabled.
    pub grad_recons: Option<Vec<Matrix<T>>>,
    /// ∂total/∂(representations); `None` when `lambda` is zero.
    pub grad_contrastive: Option<ContrastiveGradients<T>>,
}

/// `reconstruction + λ·contrastive` with the gradients of both parts.
pub fn total_loss<T: Scalar>(bundle: &BatchBundle<T>, lambda: T, weights: &WeightProfile<T>) -> Result<LossOutput<T>> {
    objective(bundle, &Objective::new(lambda), weights)
}

pub fn objective<T: Scalar>(bundle: &BatchBundle<T>, obj: &Objective<T>, weights: &WeightProfile<T>) -> Result<LossOutput<T>> {
    if !(obj.lambda >= T::zero()) {
        return Err(Error::Precondition(format!("lambda {} must be non-negative", obj.lambda)));
    }
    let (rec, grad_rec) = reconstruction_loss(bundle)?;
    let (cgc, grad_cgc) = contrastive_loss(bundle, weights, obj.temperature)?;
    let mut total = obj.lambda * cgc;
    if obj.reconstruction {
        total += rec;
    }
    let grad_contrastive = if obj.lambda > T::zero() {
        let scale = |ms: Vec<Matrix<T>>| ms.into_iter().map(|g| g.scale(obj.lambda)).collect::<Vec<_>>();
        Some(ContrastiveGradients {
            reps: scale(grad_cgc.reps),
            neighbors: grad_cgc
                .neighbors
                .into_iter()
                .map(|nb| NeighborReps {
                    views: nb.views,
                    k: nb.k,
                    mats: scale(nb.mats),
                })
                .collect(),
        })
    } else {
        None
    };
    Ok(LossOutput {
        reconstruction: rec,
        contrastive: cgc,
        total,
        grad_recons: obj.reconstruction.then_some(grad_rec),
        grad_contrastive,
    })
}
