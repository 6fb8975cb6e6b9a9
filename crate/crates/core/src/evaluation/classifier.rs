use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Matrix, Scalar};
use crate::rng;

/// One-vs-rest linear hinge classifier trained by stochastic subgradient
/// descent with L2 regularization on standardized features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub regularization: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            regularization: 1e-4,
            learning_rate: 0.1,
            epochs: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    classes: Vec<usize>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// One row of weights per class, bias stored last.
    weights: Vec<Vec<f64>>,
}

impl LinearClassifier {
    pub fn fit<T: Scalar>(x: &Matrix<T>, y: &[usize], seed: u64, config: &ClassifierConfig) -> Result<Self> {
        let (n, d) = x.shape();
        if y.len() != n {
            return Err(Error::Shape {
                op: "linear_classifier",
                left: x.shape(),
                right: (y.len(), 1),
            });
        }
        let mut classes = y.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::Precondition(format!(
                "training set needs at least 2 classes, found {}",
                classes.len()
            )));
        }
        let mut mean = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v.as_f64() / n as f64;
            }
        }
        for i in 0..n {
            for ((s, m), v) in scale.iter_mut().zip(&mean).zip(x.row(i)) {
                *s += (v.as_f64() - m).powi(2) / n as f64;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { 1.0 / s.sqrt() } else { 1.0 };
        }
        let mut model = LinearClassifier {
            weights: vec![vec![0.0; d + 1]; classes.len()],
            classes,
            mean,
            scale,
        };
        let xs: Vec<Vec<f64>> = (0..n).map(|i| model.standardize(x.row(i))).collect();
        let targets: Vec<usize> = y.iter().map(|l| model.classes.binary_search(l).expect("seen class")).collect();

        let mut order: Vec<usize> = (0..n).collect();
        let mut r = rng::seeded(seed);
        let (lambda, eta0) = (config.regularization, config.learning_rate);
        let mut t = 0usize;
        for _ in 0..config.epochs {
            order.shuffle(&mut r);
            for &i in &order {
                let eta = eta0 / (1.0 + eta0 * lambda * t as f64);
                t += 1;
                for (c, w) in model.weights.iter_mut().enumerate() {
                    let sign = if targets[i] == c { 1.0 } else { -1.0 };
                    let margin = sign * score(w, &xs[i]);
                    let shrink = 1.0 - eta * lambda;
                    for wj in &mut w[..d] {
                        *wj *= shrink;
                    }
                    if margin < 1.0 {
                        for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                            *wj += eta * sign * xj;
                        }
                        w[d] += eta * sign;
                    }
                }
            }
        }
        Ok(model)
    }

    fn standardize<T: Scalar>(&self, row: &[T]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v.as_f64() - m) * s)
            .collect()
    }

    pub fn predict<T: Scalar>(&self, x: &Matrix<T>) -> Result<Vec<usize>> {
        if x.cols() != self.mean.len() {
            return Err(Error::Shape {
                op: "linear_classifier",
                left: x.shape(),
                right: (self.mean.len(), self.classes.len()),
            });
        }
        Ok(x.row_iter()
            .map(|row| {
                let z = self.standardize(row);
                let mut best = (0, f64::NEG_INFINITY);
                for (c, w) in self.weights.iter().enumerate() {
                    let s = score(w, &z);
                    if s > best.1 {
                        best = (c, s);
                    }
                }
                self.classes[best.0]
            })
            .collect())
    }
}

fn score(w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d]
}

/// Trains on one split and returns accuracy on the other.
pub fn linear_classifier<T: Scalar>(
    train_x: &Matrix<T>,
    train_y: &[usize],
    test_x: &Matrix<T>,
    test_y: &[usize],
    seed: u64,
    config: &ClassifierConfig,
) -> Result<f64> {
    if test_x.rows() != test_y.len() {
        return Err(Error::Shape {
            op: "linear_classifier",
            left: test_x.shape(),
            right: (test_y.len(), 1),
        });
    }
    let model = LinearClassifier::fit(train_x, train_y, seed, config)?;
    let pred = model.predict(test_x)?;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let hits = pred.iter().zip(test_y).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}
