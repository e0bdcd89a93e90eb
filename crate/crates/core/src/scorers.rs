//! Converts raw model evidence into scalar uncertainty scores.
//!
//! Entropy scorers cover the closed-ended (option-probability) and
//! open-domain (semantic-cluster) settings in both white-box and black-box
//! variants. The spectral scorers derive agreement measures from a pairwise
//! response-similarity matrix via the symmetric normalized Laplacian.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::PROB_SUM_TOLERANCE;

/// Off-diagonal Frobenius norm at which the Jacobi iteration stops.
const JACOBI_TOLERANCE: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Laplacian eigenvalues below this mark an informative embedding dimension
/// (a direction separating response clusters); eigenvalues near or above 1
/// carry no cluster structure.
const INFORMATIVE_EIGENVALUE_CUTOFF: f64 = 0.9;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("probability vector is empty")]
    EmptyProbabilities,
    #[error("probability entry {0} is negative or not finite")]
    BadProbability(f64),
    #[error("probability vector sums to {0}, not 1")]
    ProbabilitySum(f64),
    #[error("sample list is empty")]
    EmptySamples,
    #[error("option id {id} out of range for {options} options")]
    OptionOutOfRange { id: u32, options: u32 },
    #[error("cluster_labels length {labels} != sequence_probs length {probs}")]
    LengthMismatch { labels: usize, probs: usize },
    #[error("sequence probability {0} outside (0, 1]")]
    BadSequenceProbability(f64),
    #[error("similarity matrix is not square: row {row} has length {len}, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("similarity matrix is empty")]
    EmptyMatrix,
    #[error("similarity entry at ({row}, {col}) is not finite")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("embedding dimension must be at least 1")]
    ZeroEmbeddingDim,
}

/// Shannon entropy -sum p ln p with 0 ln 0 := 0.
///
/// Rejects vectors with negative or non-finite entries or a sum off 1 beyond
/// tolerance. The result lies in [0, ln k].
pub fn shannon_entropy(probs: &[f64]) -> Result<f64, ScoreError> {
    if probs.is_empty() {
        return Err(ScoreError::EmptyProbabilities);
    }
    for &p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(ScoreError::BadProbability(p));
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(ScoreError::ProbabilitySum(sum));
    }
    let entropy: f64 = probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    Ok(entropy.max(0.0))
}

/// Predictive entropy from a white-box option-probability vector.
pub fn predictive_entropy_white(option_probs: &[f64]) -> Result<f64, ScoreError> {
    shannon_entropy(option_probs)
}

/// Predictive entropy from black-box option samples: entropy of the
/// empirical frequency vector over `options` options.
pub fn predictive_entropy_black(
    sampled_option_ids: &[u32],
    options: u32,
) -> Result<f64, ScoreError> {
    if sampled_option_ids.is_empty() {
        return Err(ScoreError::EmptySamples);
    }
    if options == 0 {
        return Err(ScoreError::OptionOutOfRange { id: 0, options });
    }
    let mut counts = vec![0u64; options as usize];
    for &id in sampled_option_ids {
        if id >= options {
            return Err(ScoreError::OptionOutOfRange { id, options });
        }
        counts[id as usize] += 1;
    }
    let n = sampled_option_ids.len() as f64;
    let freqs: Vec<f64> = counts.iter().map(|c| *c as f64 / n).collect();
    shannon_entropy(&freqs)
}

/// Semantic entropy from black-box cluster labels: entropy of
/// cluster-size / sample-count probabilities.
pub fn semantic_entropy_black(cluster_labels: &[u32]) -> Result<f64, ScoreError> {
    if cluster_labels.is_empty() {
        return Err(ScoreError::EmptySamples);
    }
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for &label in cluster_labels {
        *counts.entry(label).or_insert(0) += 1;
    }
    let n = cluster_labels.len() as f64;
    let probs: Vec<f64> = counts.values().map(|c| *c as f64 / n).collect();
    shannon_entropy(&probs)
}

/// Semantic entropy from white-box sequence probabilities: cluster mass is
/// the sum of member generative probabilities, normalized across clusters to
/// a distribution before taking the entropy.
pub fn semantic_entropy_white(
    cluster_labels: &[u32],
    sequence_probs: &[f64],
) -> Result<f64, ScoreError> {
    if cluster_labels.len() != sequence_probs.len() {
        return Err(ScoreError::LengthMismatch {
            labels: cluster_labels.len(),
            probs: sequence_probs.len(),
        });
    }
    if cluster_labels.is_empty() {
        return Err(ScoreError::EmptySamples);
    }
    for &p in sequence_probs {
        if !p.is_finite() || p <= 0.0 || p > 1.0 {
            return Err(ScoreError::BadSequenceProbability(p));
        }
    }
    let mut masses: BTreeMap<u32, f64> = BTreeMap::new();
    for (&label, &p) in cluster_labels.iter().zip(sequence_probs) {
        *masses.entry(label).or_insert(0.0) += p;
    }
    let total: f64 = masses.values().sum();
    let probs: Vec<f64> = masses.values().map(|m| m / total).collect();
    shannon_entropy(&probs)
}

/// Symmetric response-similarity matrix with entries in [0, 1] and unit
/// diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }
}

/// Normalizes a raw square matrix into a `SimilarityMatrix`:
/// symmetrize by averaging with the transpose, clamp entries to [0, 1], and
/// force the diagonal to 1.
pub fn normalize(raw: &[Vec<f64>]) -> Result<SimilarityMatrix, ScoreError> {
    let n = raw.len();
    if n == 0 {
        return Err(ScoreError::EmptyMatrix);
    }
    for (row, r) in raw.iter().enumerate() {
        if r.len() != n {
            return Err(ScoreError::NotSquare { row, len: r.len(), n });
        }
        for (col, v) in r.iter().enumerate() {
            if !v.is_finite() {
                return Err(ScoreError::NonFiniteEntry { row, col });
            }
        }
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = if i == j {
                1.0
            } else {
                (0.5 * (raw[i][j] + raw[j][i])).clamp(0.0, 1.0)
            };
            data[i * n + j] = v;
        }
    }
    Ok(SimilarityMatrix { n, data })
}

/// Eigenvalues of the symmetric normalized Laplacian, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major,
/// length n*n). Returns eigenvalues ascending and the matching eigenvectors
/// as columns.
fn jacobi_symmetric_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[i * n + j] * a[i * n + j];
            }
        }
        (2.0 * s).sqrt()
    };

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&a) <= JACOBI_TOLERANCE {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    if i != p && i != q {
                        let aip = a[i * n + p];
                        let aiq = a[i * n + q];
                        a[i * n + p] = c * aip - s * aiq;
                        a[p * n + i] = a[i * n + p];
                        a[i * n + q] = s * aip + c * aiq;
                        a[q * n + i] = a[i * n + q];
                    }
                }
                a[p * n + p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                a[q * n + q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (out_col, &src_col) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + out_col] = v[i * n + src_col];
        }
    }
    (eigenvalues, vectors)
}

fn laplacian(w: &SimilarityMatrix) -> Vec<f64> {
    let n = w.n;
    // Row sums are >= 1 thanks to the unit diagonal, so D^(-1/2) is defined.
    let inv_sqrt_degree: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = (0..n).map(|j| w.get(i, j)).sum();
            1.0 / d.sqrt()
        })
        .collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let identity = if i == j { 1.0 } else { 0.0 };
            l[i * n + j] = identity - inv_sqrt_degree[i] * w.get(i, j) * inv_sqrt_degree[j];
        }
    }
    l
}

fn laplacian_eigen(w: &SimilarityMatrix) -> (Vec<f64>, Vec<f64>) {
    jacobi_symmetric_eigen(laplacian(w), w.n)
}

/// Eigenvalues of an arbitrary symmetric matrix, ascending. Asymmetry within
/// rounding noise is averaged away; rows must be square and finite.
pub fn symmetric_spectrum(rows: &[Vec<f64>]) -> Result<Vec<f64>, ScoreError> {
    let n = rows.len();
    if n == 0 {
        return Err(ScoreError::EmptyMatrix);
    }
    for (row, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(ScoreError::NotSquare { row, len: r.len(), n });
        }
        for (col, v) in r.iter().enumerate() {
            if !v.is_finite() {
                return Err(ScoreError::NonFiniteEntry { row, col });
            }
        }
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = 0.5 * (rows[i][j] + rows[j][i]);
        }
    }
    Ok(jacobi_symmetric_eigen(data, n).0)
}

/// Eigenvalues of L = I - D^(-1/2) W D^(-1/2), ascending; for a normalized
/// similarity matrix they lie in [0, 2].
pub fn laplacian_spectrum(w: &SimilarityMatrix) -> Spectrum {
    Spectrum { eigenvalues: laplacian_eigen(w).0 }
}

/// Continuous relaxation of the response-cluster count:
/// sum of max(0, 1 - lambda) over the Laplacian spectrum.
pub fn eigenvalue_score(w: &SimilarityMatrix) -> f64 {
    laplacian_spectrum(w)
        .eigenvalues
        .iter()
        .map(|l| (1.0 - l).max(0.0))
        .sum()
}

/// Degree-based disagreement: 1 - mean pairwise similarity.
pub fn degree_score(w: &SimilarityMatrix) -> f64 {
    let n = w.n;
    let total: f64 = (0..n).map(|i| (0..n).map(|j| w.get(i, j)).sum::<f64>()).sum();
    1.0 - total / (n * n) as f64
}

/// Eccentricity of the spectral embedding: responses are embedded with the
/// eigenvectors of the smallest Laplacian eigenvalues, and the score is the
/// Euclidean norm of the embeddings' offsets from their mean.
///
/// Only informative dimensions enter the embedding (eigenvalues below the
/// cluster-structure cutoff, at least one), capped by `dim` and by n. Each
/// eigenvector's sign is fixed so its largest-magnitude component is
/// positive; rotations inside degenerate eigenspaces remain a tolerance
/// source.
pub fn eccentricity_score(w: &SimilarityMatrix, dim: usize) -> Result<f64, ScoreError> {
    if dim == 0 {
        return Err(ScoreError::ZeroEmbeddingDim);
    }
    let n = w.n;
    let (values, mut vectors) = laplacian_eigen(w);
    let informative = values
        .iter()
        .take_while(|l| **l < INFORMATIVE_EIGENVALUE_CUTOFF)
        .count()
        .max(1);
    let k = dim.min(informative).min(n);

    for col in 0..k {
        let mut max_abs = 0.0;
        let mut max_val = 0.0;
        for i in 0..n {
            let x = vectors[i * n + col];
            if x.abs() > max_abs {
                max_abs = x.abs();
                max_val = x;
            }
        }
        if max_val < 0.0 {
            for i in 0..n {
                vectors[i * n + col] = -vectors[i * n + col];
            }
        }
    }

    let mut sum_sq = 0.0;
    for col in 0..k {
        let mean: f64 = (0..n).map(|i| vectors[i * n + col]).sum::<f64>() / n as f64;
        sum_sq += (0..n)
            .map(|i| {
                let d = vectors[i * n + col] - mean;
                d * d
            })
            .sum::<f64>();
    }
    Ok(sum_sq.sqrt())
}
