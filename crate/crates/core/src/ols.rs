//! Least squares with an intercept via Householder QR.
//!
//! Columns are triangularized in the order given. A column whose remaining
//! norm after the earlier reflections falls below a relative tolerance is
//! linearly dependent on the columns before it and is dropped; its
//! coefficient is reported as zero and its index listed in `dropped`.

use crate::error::{Error, Result};
use crate::features::DesignMatrix;

/// Relative norm below which a column counts as a linear combination of earlier ones.
pub const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// One coefficient per input column; dropped columns carry 0.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub rss: f64,
    /// Indices of columns dropped as rank deficient.
    pub dropped: Vec<usize>,
}

impl OlsFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(row)
            .fold(self.intercept, |acc, (b, x)| acc + b * x)
    }
}

pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<OlsFit> {
    let columns: Vec<&[f64]> = x.columns.iter().map(Vec::as_slice).collect();
    least_squares(&columns, y)
}

/// Fits `y ≈ intercept + Σ b_j · column_j`.
pub fn least_squares(columns: &[&[f64]], y: &[f64]) -> Result<OlsFit> {
    let n = y.len();
    let p = columns.len();
    if n < p + 1 {
        return Err(Error::InsufficientData {
            rows: n,
            columns: p,
        });
    }
    if let Some(j) = columns.iter().position(|c| c.len() != n) {
        return Err(Error::Alignment(format!(
            "column {j} has {} rows, response has {n}",
            columns[j].len()
        )));
    }

    // Work matrix: intercept followed by the regressors.
    let mut work: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    work.push(vec![1.0; n]);
    work.extend(columns.iter().map(|c| c.to_vec()));
    let norms: Vec<f64> = work.iter().map(|c| norm(c)).collect();
    let mut rhs = y.to_vec();

    let mut kept: Vec<usize> = Vec::with_capacity(p + 1);
    let mut r_cols: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    let mut dropped = Vec::new();
    for j in 0..=p {
        let k = kept.len();
        let tail_norm = norm(&work[j][k..]);
        if tail_norm <= RANK_TOLERANCE * norms[j] || tail_norm == 0.0 {
            if j > 0 {
                dropped.push(j - 1);
            }
            continue;
        }
        // Householder vector v with v[0] = x0 + sign(x0)·‖x‖.
        let alpha = if work[j][k] >= 0.0 {
            -tail_norm
        } else {
            tail_norm
        };
        let mut v = work[j][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        let (head, rest) = work.split_at_mut(j + 1);
        head[j][k] = alpha;
        for e in head[j][k + 1..].iter_mut() {
            *e = 0.0;
        }
        for col in rest.iter_mut() {
            reflect(&v, vnorm2, &mut col[k..]);
        }
        reflect(&v, vnorm2, &mut rhs[k..]);
        r_cols.push(work[j][..=k].to_vec());
        kept.push(j);
    }

    // Back substitution on the k×k upper triangle.
    let k = kept.len();
    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for (jj, b) in beta.iter().enumerate().skip(i + 1) {
            s -= r_cols[jj][i] * b;
        }
        beta[i] = s / r_cols[i][i];
    }
    let rss: f64 = rhs[k..].iter().map(|e| e * e).sum();

    let mut coefficients = vec![0.0; p];
    let mut intercept = 0.0;
    for (slot, &j) in kept.iter().enumerate() {
        if j == 0 {
            intercept = beta[slot];
        } else {
            coefficients[j - 1] = beta[slot];
        }
    }
    if coefficients.iter().any(|c| !c.is_finite()) || !intercept.is_finite() {
        return Err(Error::Domain(
            "least squares produced non-finite coefficients".into(),
        ));
    }
    Ok(OlsFit {
        coefficients,
        intercept,
        rss,
        dropped,
    })
}

fn norm(v: &[f64]) -> f64 {
    // Scaled to avoid overflow on cubic temperature terms.
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

fn reflect(v: &[f64], vnorm2: f64, x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * dot / vnorm2;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}
