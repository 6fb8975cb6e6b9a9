use crate::error::{Error, Result};
use crate::numeric::matrix::{dot, norm};
use crate::numeric::{Matrix, Scalar};

fn check_cols<T: Scalar>(op: &'static str, a: &Matrix<T>, b: &Matrix<T>) -> Result<()> {
    if a.cols() != b.cols() {
        return Err(Error::Shape {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// Euclidean norm of every row; a zero row is rejected with its index.
pub fn row_norms<T: Scalar>(op: &'static str, side: &str, m: &Matrix<T>) -> Result<Vec<T>> {
    m.row_iter()
        .enumerate()
        .map(|(i, r)| {
            let n = norm(r);
            if n > T::zero() && n.is_finite() {
                Ok(n)
            } else {
                Err(Error::Degenerate {
                    op,
                    detail: format!("{side} row {i} has norm {n}"),
                })
            }
        })
        .collect()
}

/// Pairwise cosine distances `1 - cos(a_i, b_j)`, clamped into `[0, 2]`.
pub fn cosine_distance_matrix<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    const OP: &str = "cosine_distance_matrix";
    check_cols(OP, a, b)?;
    let na = row_norms(OP, "left", a)?;
    let nb = row_norms(OP, "right", b)?;
    let two = T::lit(2.0);
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let ai = a.row(i);
        let out_row = out.row_mut(i);
        for (j, o) in out_row.iter_mut().enumerate() {
            let d = T::one() - dot(ai, b.row(j)) / (na[i] * nb[j]);
            *o = d.max(T::zero()).min(two);
        }
    }
    Ok(out)
}

/// Pairwise Euclidean distances `‖a_i - b_j‖₂`.
pub fn euclidean_distance_matrix<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    check_cols("euclidean_distance_matrix", a, b)?;
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let ai = a.row(i);
        let out_row = out.row_mut(i);
        for (j, o) in out_row.iter_mut().enumerate() {
            *o = squared_euclidean(ai, b.row(j)).sqrt();
        }
    }
    Ok(out)
}

#[inline]
pub fn squared_euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cosine_examples() {
        let a = Matrix::<f64>::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let d = cosine_distance_matrix(&a, &a).unwrap();
        for i in 0..3 {
            assert!(d[(i, i)].abs() < 1e-15);
        }
        assert!((d[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((d[(0, 2)] - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
        assert!((d[(0, 2)] - 0.29289).abs() < 1e-5);
    }

    #[test]
    fn cosine_rejects_zero_row() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let err = cosine_distance_matrix(&a, &a).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn euclidean_examples() {
        let a = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(euclidean_distance_matrix(&a, &b).unwrap()[(0, 0)], 5.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::<f64>::from_fn(10, 4, |_, _| rng.random_range(-2.0..2.0));
        let y = Matrix::from_fn(10, 4, |_, _| rng.random_range(-2.0..2.0));
        let d = euclidean_distance_matrix(&x, &y).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let mut s = 0.0f64;
                for k in 0..4 {
                    s += (x[(i, k)] - y[(j, k)]).powi(2);
                }
                assert!((d[(i, j)] - s.sqrt()).abs() <= 1e-12);
            }
        }
        let dxx = euclidean_distance_matrix(&x, &x).unwrap();
        for i in 0..10 {
            assert_eq!(dxx[(i, i)], 0.0);
            for j in 0..10 {
                assert_eq!(dxx[(i, j)], dxx[(j, i)]);
            }
        }
    }

    #[test]
    fn euclidean_shape_error() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(2, 2);
        assert!(matches!(euclidean_distance_matrix(&a, &b), Err(Error::Shape { .. })));
    }

    proptest! {
        #[test]
        fn cosine_scale_invariant(
            seed in 0u64..1000,
            alpha in 0.01f64..100.0,
            beta in 0.01f64..100.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Matrix::from_fn(6, 5, |_, _| rng.random_range(0.1..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 });
            let b = Matrix::from_fn(4, 5, |_, _| rng.random_range(-1.0..1.0) + 0.05);
            let d0 = cosine_distance_matrix(&a, &b).unwrap();
            let d1 = cosine_distance_matrix(&a.scale(alpha), &b.scale(beta)).unwrap();
            for (x, y) in d0.as_slice().iter().zip(d1.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12);
                prop_assert!((0.0..=2.0).contains(x));
            }
        }
    }
}
