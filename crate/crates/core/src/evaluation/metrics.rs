use crate::alignment::hungarian;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Maps arbitrary label values onto `0..k` in order of first appearance.
fn densify(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen: Vec<usize> = Vec::new();
    let out = labels
        .iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(i) => i,
            None => {
                seen.push(*l);
                seen.len() - 1
            }
        })
        .collect();
    (out, seen.len())
}

/// Counts `table[p][t]` of samples predicted `p` with true class `t`.
pub fn contingency(pred: &[usize], truth: &[usize]) -> Result<Vec<Vec<usize>>> {
    if pred.len() != truth.len() {
        return Err(Error::Shape {
            op: "contingency",
            left: (pred.len(), 1),
            right: (truth.len(), 1),
        });
    }
    let (p, kp) = densify(pred);
    let (t, kt) = densify(truth);
    let mut table = vec![vec![0; kt]; kp];
    for (&a, &b) in p.iter().zip(&t) {
        table[a][b] += 1;
    }
    Ok(table)
}

/// Best matched fraction over cluster-to-class bijections.
pub fn cluster_acc(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let size = table.len().max(table[0].len());
    let cost = Matrix::<f64>::from_fn(size, size, |i, j| {
        -(table.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0) as f64)
    });
    let assignment = hungarian(&cost)?;
    let matched: f64 = assignment.iter().enumerate().map(|(i, &j)| -cost[(i, j)]).sum();
    Ok(matched / pred.len() as f64)
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the arithmetic mean of the two entropies.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let n = pred.len() as f64;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let rows: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..table[0].len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let h_pred = entropy(rows.iter().copied(), n);
    let h_true = entropy(cols.iter().copied(), n);
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    let denom = (h_pred + h_true) / 2.0;
    if denom <= 0.0 {
        // Both partitions are a single block.
        return Ok(1.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

fn pairs(c: usize) -> f64 {
    let c = c as f64;
    c * (c - 1.0) / 2.0
}

/// Adjusted Rand index by pair counting.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    if pred.len() < 2 {
        return Ok(1.0);
    }
    let index: f64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let a: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let b: f64 = (0..table[0].len()).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let expected = a * b / pairs(pred.len());
    let max = (a + b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
