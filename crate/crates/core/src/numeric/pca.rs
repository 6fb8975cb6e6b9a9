use crate::error::{Error, Result};
use crate::numeric::matrix::{dot, norm};
use crate::numeric::{Matrix, Scalar};

pub const PCA_MAX_ITERATIONS: usize = 1000;
pub const PCA_TOLERANCE: f64 = 1e-10;

/// Principal axes of a sample matrix.
#[derive(Debug, Clone)]
pub struct Pca<T> {
    pub mean: Vec<T>,
    /// Column `j` is the `j`-th principal axis (unit length).
    pub components: Matrix<T>,
    /// Covariance eigenvalues, descending.
    pub eigenvalues: Vec<T>,
}

impl<T: Scalar> Pca<T> {
    /// Fits the top `target_dim` axes of the sample covariance by power
    /// iteration with deflation.
    pub fn fit(x: &Matrix<T>, target_dim: usize) -> Result<Self> {
        let (n, d) = x.shape();
        if n < 2 {
            return Err(Error::Dimension {
                op: "pca",
                detail: format!("need at least 2 samples, got {n}"),
            });
        }
        if target_dim == 0 || target_dim > n.min(d) {
            return Err(Error::Dimension {
                op: "pca",
                detail: format!("target_dim {target_dim} exceeds min(rows, cols) = {}", n.min(d)),
            });
        }

        let mean = x.column_means();
        let mut centered = x.clone();
        for i in 0..n {
            for (v, &m) in centered.row_mut(i).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let mut cov = centered.t_matmul(&centered)?.scale(T::one() / T::from_usize_lossy(n - 1));
        let scale = cov.frobenius_sq().sqrt().max(T::min_positive_value());
        let tol = T::lit(PCA_TOLERANCE) * scale;

        let mut axes: Vec<Vec<T>> = Vec::with_capacity(target_dim);
        let mut eigenvalues = Vec::with_capacity(target_dim);
        for _ in 0..target_dim {
            let (lambda, v) = dominant_pair(&cov, &axes, tol)?;
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] -= lambda * v[i] * v[j];
                }
            }
            eigenvalues.push(lambda);
            axes.push(v);
        }

        let mut order: Vec<usize> = (0..target_dim).collect();
        order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
        let eigenvalues: Vec<T> = order.iter().map(|&j| eigenvalues[j]).collect();
        let components = Matrix::from_fn(d, target_dim, |i, j| axes[order[j]][i]);
        Ok(Self {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn transform(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut centered = x.clone();
        if x.cols() != self.mean.len() {
            return Err(Error::Shape {
                op: "pca transform",
                left: x.shape(),
                right: self.components.shape(),
            });
        }
        for i in 0..x.rows() {
            for (v, &m) in centered.row_mut(i).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        centered.matmul(&self.components)
    }
}

/// Mean-centered projection onto the top `target_dim` principal components.
pub fn pca_project<T: Scalar>(x: &Matrix<T>, target_dim: usize) -> Result<Matrix<T>> {
    Pca::fit(x, target_dim)?.transform(x)
}

fn orthogonalize<T: Scalar>(v: &mut [T], against: &[Vec<T>]) {
    for a in against {
        let p = dot(v, a);
        for (x, &y) in v.iter_mut().zip(a) {
            *x -= p * y;
        }
    }
}

fn normalize<T: Scalar>(v: &mut [T]) -> bool {
    let n = norm(v);
    if n <= T::min_positive_value() || !n.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    true
}

/// Start vector: the column of the (deflated) matrix with largest norm, or a
/// coordinate axis outside the span of `found` when the matrix has vanished.
fn start_vector<T: Scalar>(cov: &Matrix<T>, found: &[Vec<T>]) -> Vec<T> {
    let d = cov.rows();
    let mut candidates: Vec<(T, usize)> = (0..d)
        .map(|j| ((0..d).map(|i| cov[(i, j)] * cov[(i, j)]).sum::<T>(), j))
        .collect();
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    for &(_, j) in &candidates {
        let mut v: Vec<T> = (0..d).map(|i| cov[(i, j)]).collect();
        orthogonalize(&mut v, found);
        if normalize(&mut v) {
            return v;
        }
    }
    for j in 0..d {
        let mut v = vec![T::zero(); d];
        v[j] = T::one();
        orthogonalize(&mut v, found);
        if normalize(&mut v) {
            return v;
        }
    }
    unreachable!("the span of fewer than d vectors cannot contain every axis")
}

fn dominant_pair<T: Scalar>(cov: &Matrix<T>, found: &[Vec<T>], tol: T) -> Result<(T, Vec<T>)> {
    let d = cov.rows();
    let mut v = start_vector(cov, found);
    let mut w = vec![T::zero(); d];
    let mut residual = T::infinity();
    for it in 0..PCA_MAX_ITERATIONS {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = dot(cov.row(i), &v);
        }
        let lambda = dot(&v, &w);
        residual = w
            .iter()
            .zip(&v)
            .fold(T::zero(), |acc, (&a, &b)| {
                let r = a - lambda * b;
                acc + r * r
            })
            .sqrt();
        if residual <= tol {
            return Ok((lambda.max(T::zero()), v));
        }
        if it >= POWER_STEPS {
            // Power iteration stalls on near-equal eigenvalues; finish with
            // Rayleigh-quotient (shifted inverse) iteration.
            if let Some(y) = shifted_solve(cov, lambda, &v, tol) {
                w = y;
            }
        }
        orthogonalize(&mut w, found);
        if !normalize(&mut w) {
            // Remaining spectrum is numerically zero; `v` already spans it.
            return Ok((T::zero(), v));
        }
        std::mem::swap(&mut v, &mut w);
    }
    Err(Error::Convergence {
        op: "pca",
        iterations: PCA_MAX_ITERATIONS,
        residual: residual.as_f64(),
    })
}

const POWER_STEPS: usize = 200;

/// Solves `(cov − shift·I) y = rhs` by Gaussian elimination with partial
/// pivoting. A numerically singular pivot is nudged by `tiny`.
fn shifted_solve<T: Scalar>(cov: &Matrix<T>, shift: T, rhs: &[T], tiny: T) -> Option<Vec<T>> {
    let d = cov.rows();
    let mut a = cov.clone();
    for i in 0..d {
        a[(i, i)] -= shift;
    }
    let mut b = rhs.to_vec();
    let tiny = tiny.max(T::epsilon());
    for col in 0..d {
        let pivot = (col..d).max_by(|&x, &y| a[(x, col)].abs().partial_cmp(&a[(y, col)].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if pivot != col {
            for j in 0..d {
                let t = a[(col, j)];
                a[(col, j)] = a[(pivot, j)];
                a[(pivot, j)] = t;
            }
            b.swap(col, pivot);
        }
        if a[(col, col)].abs() < tiny {
            a[(col, col)] = if a[(col, col)] < T::zero() { -tiny } else { tiny };
        }
        let p = a[(col, col)];
        for r in col + 1..d {
            let f = a[(r, col)] / p;
            if f != T::zero() {
                for j in col..d {
                    let t = a[(col, j)];
                    a[(r, j)] -= f * t;
                }
                let t = b[col];
                b[r] -= f * t;
            }
        }
    }
    for col in (0..d).rev() {
        let mut s = b[col];
        for j in col + 1..d {
            s -= a[(col, j)] * b[j];
        }
        b[col] = s / a[(col, col)];
    }
    b.iter().all(|x| x.is_finite()).then_some(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn axis_aligned_top_component() {
        // Columns with variances proportional to 4, 1, 0.
        let rows: Vec<[f64; 3]> = (0..40)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                let t = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
                [2.0 * s, t, 0.0]
            })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = pca_project(&x, 1).unwrap();
        for i in 0..40 {
            assert!((p[(i, 0)].abs() - 2.0).abs() < 1e-9);
            assert_eq!(p[(i, 0)].signum() * p[(0, 0)].signum(), x[(i, 0)].signum() * x[(0, 0)].signum());
        }
    }

    #[test]
    fn full_rank_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::from_fn(30, 5, |_, j| rng.random_range(-1.0..1.0) * (j + 1) as f64);
        let pca = Pca::fit(&x, 5).unwrap();
        let p = pca.transform(&x).unwrap();
        let back = p.matmul(&pca.components.transpose()).unwrap();
        for i in 0..30 {
            for j in 0..5 {
                assert!((back[(i, j)] + pca.mean[j] - x[(i, j)]).abs() < 1e-8);
            }
        }
        let gram = pca.components.t_matmul(&pca.components).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert!(gram[(i, j)].abs() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn rejects_oversized_target() {
        let x = Matrix::<f64>::from_fn(4, 3, |i, j| (i * j) as f64);
        assert!(matches!(pca_project(&x, 4), Err(Error::Dimension { .. })));
        let one = Matrix::<f64>::zeros(1, 3);
        assert!(pca_project(&one, 1).is_err());
    }

    #[test]
    fn rank_deficient_data_still_orthonormal() {
        let x = Matrix::from_fn(10, 4, |i, j| if j == 0 { i as f64 } else { 0.0 });
        let pca = Pca::fit(&x, 4).unwrap();
        let gram = pca.components.t_matmul(&pca.components).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-10);
            }
        }
    }
}
