use crate::error::{Error, Result};
use crate::numeric::{Matrix, Scalar};

/// Minimum-cost perfect assignment on a square cost matrix.
///
/// Returns `assignment` with row `i` matched to column `assignment[i]`.
/// Shortest augmenting paths with row/column potentials, `O(n³)`.
pub fn hungarian<T: Scalar>(cost: &Matrix<T>) -> Result<Vec<usize>> {
    let (n, cols) = cost.shape();
    if n != cols {
        return Err(Error::Shape {
            op: "hungarian",
            left: cost.shape(),
            right: (cols, cols),
        });
    }
    if !cost.is_finite() {
        return Err(Error::Degenerate {
            op: "hungarian",
            detail: "cost matrix has non-finite entries".into(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    // 1-based internally; index 0 is the virtual root of each augmenting tree.
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_slack = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0;
        min_slack.iter_mut().for_each(|s| *s = inf);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let cost_row = cost.row(i0 - 1);
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost_row[j - 1] - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[col_owner[j] - 1] = j - 1;
    }
    Ok(assignment)
}

pub fn assignment_cost<T: Scalar>(cost: &Matrix<T>, assignment: &[usize]) -> T {
    assignment.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_dominant() {
        let c = Matrix::<f64>::from_fn(5, 5, |i, j| if i == j { 0.0 } else { 1.0 });
        assert_eq!(hungarian(&c).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn three_by_three() {
        let c = Matrix::from_rows(&[[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]).unwrap();
        let a = hungarian(&c).unwrap();
        // Permutations of 3: min is 1 + 2 + 2 = 5 via (0→1, 1→0, 2→2).
        assert_eq!(assignment_cost(&c, &a), 5.0);
        assert_eq!(a, vec![1, 0, 2]);
    }

    #[test]
    fn rejects_non_square() {
        let c = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(hungarian(&c), Err(Error::Shape { .. })));
    }

    #[test]
    fn handles_negative_costs_and_empty() {
        let c = Matrix::from_rows(&[[-5.0, -1.0], [-1.0, -5.0]]).unwrap();
        assert_eq!(hungarian(&c).unwrap(), vec![0, 1]);
        assert!(hungarian(&Matrix::<f64>::zeros(0, 0)).unwrap().is_empty());
    }
}
