//! Linear discriminant analysis and multinomial logistic regression.

use super::ModelError;
use crate::track::{Action, FeatureVector, FEATURE_COUNT};

const D: usize = FEATURE_COUNT;
const K: usize = Action::COUNT;

/// Shrinkage weight: `Σ + λI` with `λ = SHRINKAGE * trace(Σ) / D`.
pub const SHRINKAGE: f64 = 1e-3;
/// Lower bound on `λ`, used when every feature is constant.
pub const MIN_RIDGE: f64 = 1e-9;
pub const LR_EPOCHS: usize = 200;
pub const LR_STEP_SIZE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearKind {
    Lda,
    LogisticRegression,
}

impl LinearKind {
    pub fn tag(self) -> &'static str {
        match self {
            LinearKind::Lda => "lda",
            LinearKind::LogisticRegression => "logreg",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinearModel {
    Lda {
        means: Vec<[f64; D]>,
        cov_inv: Vec<[f64; D]>,
        priors: [f64; K],
    },
    LogisticRegression {
        weights: Vec<[f64; D]>,
        bias: [f64; K],
        /// Classes seen during fitting; the others are never predicted.
        present: [bool; K],
    },
}

/// Inverse of a symmetric positive definite matrix via Cholesky; `None` if not SPD.
fn spd_inverse(a: &[[f64; D]]) -> Option<Vec<[f64; D]>> {
    let mut l = vec![[0.0; D]; D];
    for i in 0..D {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    // solve L L^T X = I column by column
    let mut inv = vec![[0.0; D]; D];
    for c in 0..D {
        let mut y = [0.0; D];
        for i in 0..D {
            let rhs = if i == c { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
            y[i] = (rhs - s) / l[i][i];
        }
        for i in (0..D).rev() {
            let s: f64 = (i + 1..D).map(|k| l[k][i] * inv[k][c]).sum();
            inv[i][c] = (y[i] - s) / l[i][i];
        }
    }
    Some(inv)
}

fn class_counts(samples: &[(FeatureVector, usize)]) -> [usize; K] {
    let mut counts = [0usize; K];
    for (_, c) in samples {
        counts[*c] += 1;
    }
    counts
}

fn fit_lda(samples: &[(FeatureVector, usize)], counts: &[usize; K]) -> Result<LinearModel, ModelError> {
    let n = samples.len();
    let mut means = vec![[0.0; D]; K];
    for (x, c) in samples {
        for (m, v) in means[*c].iter_mut().zip(&x.0) {
            *m += v;
        }
    }
    for (m, &cnt) in means.iter_mut().zip(counts) {
        if cnt > 0 {
            m.iter_mut().for_each(|v| *v /= cnt as f64);
        }
    }
    let mut cov = vec![[0.0; D]; D];
    for (x, c) in samples {
        let d: Vec<f64> = x.0.iter().zip(&means[*c]).map(|(v, m)| v - m).collect();
        for i in 0..D {
            for j in 0..D {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    let dof = if n > present { n - present } else { n };
    let trace: f64 = (0..D).map(|i| cov[i][i] / dof as f64).sum();
    let ridge = (SHRINKAGE * trace / D as f64).max(MIN_RIDGE);
    for (i, row) in cov.iter_mut().enumerate() {
        row.iter_mut().for_each(|v| *v /= dof as f64);
        row[i] += ridge;
    }
    let cov_inv = spd_inverse(&cov).ok_or(ModelError::SingularCovariance)?;
    let mut priors = [0.0; K];
    for (p, &c) in priors.iter_mut().zip(counts) {
        *p = c as f64 / n as f64;
    }
    Ok(LinearModel::Lda {
        means,
        cov_inv,
        priors,
    })
}

fn softmax(logits: &mut [f64; K], present: &[bool; K]) {
    let max = logits
        .iter()
        .zip(present)
        .filter(|(_, &p)| p)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (v, &p) in logits.iter_mut().zip(present) {
        *v = if p { (*v - max).exp() } else { 0.0 };
        sum += *v;
    }
    logits.iter_mut().for_each(|v| *v /= sum);
}

/// Batch gradient descent on mean cross-entropy. Optimization runs on
/// standardized features and the result is folded back into raw-feature
/// weights, so the model itself is a plain affine map.
fn fit_logreg(samples: &[(FeatureVector, usize)], counts: &[usize; K]) -> LinearModel {
    let n = samples.len() as f64;
    let mut mean = [0.0; D];
    for (x, _) in samples {
        for (m, v) in mean.iter_mut().zip(&x.0) {
            *m += v / n;
        }
    }
    let mut scale = [0.0; D];
    for (x, _) in samples {
        for i in 0..D {
            scale[i] += (x.0[i] - mean[i]).powi(2) / n;
        }
    }
    let scale = scale.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
    let z: Vec<[f64; D]> = samples
        .iter()
        .map(|(x, _)| std::array::from_fn(|i| (x.0[i] - mean[i]) / scale[i]))
        .collect();
    let present: [bool; K] = std::array::from_fn(|k| counts[k] > 0);

    let mut w = vec![[0.0; D]; K];
    let mut b = [0.0; K];
    for _ in 0..LR_EPOCHS {
        let mut gw = vec![[0.0; D]; K];
        let mut gb = [0.0; K];
        for (zx, (_, c)) in z.iter().zip(samples) {
            let mut p: [f64; K] = std::array::from_fn(|k| {
                b[k] + w[k].iter().zip(zx).map(|(a, v)| a * v).sum::<f64>()
            });
            softmax(&mut p, &present);
            for k in 0..K {
                let e = p[k] - if k == *c { 1.0 } else { 0.0 };
                if e == 0.0 {
                    continue;
                }
                gb[k] += e / n;
                for i in 0..D {
                    gw[k][i] += e * zx[i] / n;
                }
            }
        }
        for k in 0..K {
            b[k] -= LR_STEP_SIZE * gb[k];
            for i in 0..D {
                w[k][i] -= LR_STEP_SIZE * gw[k][i];
            }
        }
    }

    let mut weights = vec![[0.0; D]; K];
    let mut bias = [0.0; K];
    for k in 0..K {
        bias[k] = b[k];
        for i in 0..D {
            weights[k][i] = w[k][i] / scale[i];
            bias[k] -= w[k][i] * mean[i] / scale[i];
        }
    }
    LinearModel::LogisticRegression {
        weights,
        bias,
        present,
    }
}

/// Fits a linear classifier on `(features, class index)` pairs.
pub fn fit_linear(kind: LinearKind, samples: &[(FeatureVector, usize)]) -> Result<LinearModel, ModelError> {
    let counts = class_counts(samples);
    let distinct = counts.iter().filter(|&&c| c > 0).count();
    if distinct < 2 {
        return Err(ModelError::InsufficientClasses(distinct));
    }
    match kind {
        LinearKind::Lda => fit_lda(samples, &counts),
        LinearKind::LogisticRegression => Ok(fit_logreg(samples, &counts)),
    }
}

impl LinearModel {
    pub fn kind(&self) -> LinearKind {
        match self {
            LinearModel::Lda { .. } => LinearKind::Lda,
            LinearModel::LogisticRegression { .. } => LinearKind::LogisticRegression,
        }
    }

    /// Per-class decision values; absent classes score `-inf`.
    pub fn scores(&self, features: &FeatureVector) -> [f64; K] {
        let x = &features.0;
        match self {
            LinearModel::Lda {
                means,
                cov_inv,
                priors,
            } => std::array::from_fn(|k| {
                if priors[k] <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                // x^T S^-1 mu - mu^T S^-1 mu / 2 + ln prior
                let s_mu: Vec<f64> = cov_inv
                    .iter()
                    .map(|row| row.iter().zip(&means[k]).map(|(a, m)| a * m).sum())
                    .collect();
                let lin: f64 = x.iter().zip(&s_mu).map(|(a, b)| a * b).sum();
                let quad: f64 = means[k].iter().zip(&s_mu).map(|(a, b)| a * b).sum();
                lin - 0.5 * quad + priors[k].ln()
            }),
            LinearModel::LogisticRegression {
                weights,
                bias,
                present,
            } => std::array::from_fn(|k| {
                if !present[k] {
                    return f64::NEG_INFINITY;
                }
                bias[k] + weights[k].iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            }),
        }
    }

    pub fn predict(&self, features: &FeatureVector) -> Action {
        Action::from_index(super::greedy_index(&self.scores(features)))
    }

    pub fn is_finite(&self) -> bool {
        match self {
            LinearModel::Lda {
                means,
                cov_inv,
                priors,
            } => means
                .iter()
                .chain(cov_inv)
                .flatten()
                .chain(priors)
                .all(|v| v.is_finite()),
            LinearModel::LogisticRegression { weights, bias, .. } => {
                weights.iter().flatten().chain(bias).all(|v| v.is_finite())
            }
        }
    }
}
