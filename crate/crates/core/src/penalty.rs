//! Banded difference operators used as trend-filtering penalties.
//!
//! Row `ℓ` of an operator of order `k` touches columns `ℓ ..= ℓ + k`. For
//! unevenly spaced points each level of the recursion rescales by
//! `k / (x_{i+k} - x_i)`, so the order-`k` operator is `k!` times the
//! `k`-th divided difference. On evenly spaced points with gap `h` this
//! reduces to `h^{-k}` times the plain integer difference matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceOperator {
    order: usize,
    ncols: usize,
    /// Row-major band: row `ℓ` stores `order + 1` coefficients.
    band: Vec<f64>,
    weighted: bool,
}

impl DifferenceOperator {
    /// Difference order `q + 1`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nrows(&self) -> usize {
        self.ncols - self.order
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    /// Band width `order + 1` (nonzeros per row).
    pub fn width(&self) -> usize {
        self.order + 1
    }

    /// Coefficients of row `l`, for columns `l ..= l + order`.
    pub fn row(&self, l: usize) -> &[f64] {
        let w = self.width();
        &self.band[l * w..(l + 1) * w]
    }

    /// `D β`.
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.ncols, "operator applied to a vector of the wrong length");
        (0..self.nrows())
            .map(|l| self.row(l).iter().zip(&beta[l..]).map(|(d, b)| d * b).sum())
            .collect()
    }

    /// `Dᵀ u`.
    pub fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.nrows(), "transpose applied to a vector of the wrong length");
        let mut out = vec![0.0; self.ncols];
        for (l, &ul) in u.iter().enumerate() {
            if ul == 0.0 {
                continue;
            }
            for (t, d) in self.row(l).iter().enumerate() {
                out[l + t] += d * ul;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols);
        for l in 0..self.nrows() {
            for (t, &d) in self.row(l).iter().enumerate() {
                m[(l, l + t)] = d;
            }
        }
        m
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows())
            .map(|l| self.row(l).iter().map(|d| d.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn identity(n: usize) -> Self {
        Self { order: 0, ncols: n, band: vec![1.0; n], weighted: false }
    }

    /// One level of the recursion: `diag(weights) · D0 · self`.
    fn difference(&self, weights: Option<&[f64]>) -> Self {
        let w_old = self.width();
        let w_new = w_old + 1;
        let rows = self.nrows() - 1;
        let mut band = vec![0.0; rows * w_new];
        for i in 0..rows {
            let lo = self.row(i);
            let hi = self.row(i + 1);
            let scale = weights.map_or(1.0, |w| w[i]);
            let out = &mut band[i * w_new..(i + 1) * w_new];
            for t in 0..w_old {
                out[t] -= lo[t];
                out[t + 1] += hi[t];
            }
            for v in out.iter_mut() {
                *v *= scale;
            }
        }
        Self { order: self.order + 1, ncols: self.ncols, band, weighted: weights.is_some() || self.weighted }
    }
}

/// First-difference matrix with rows `(-1, 1)`.
pub fn fused_difference(n: usize) -> Result<DifferenceOperator> {
    if n < 2 {
        return Err(Error::InsufficientData(format!("fused difference needs n >= 2, got {n}")));
    }
    Ok(DifferenceOperator::identity(n).difference(None))
}

/// Unweighted integer difference matrix of order `q + 1` (for evenly spaced data).
pub fn tf_difference(n: usize, q: usize) -> Result<DifferenceOperator> {
    if n < q + 2 {
        return Err(Error::InsufficientData(format!("order {} differences need n >= {}, got {n}", q + 1, q + 2)));
    }
    let mut op = DifferenceOperator::identity(n);
    for _ in 0..=q {
        op = op.difference(None);
    }
    Ok(op)
}

/// Trend-filtering operator of order `q + 1` on arbitrary increasing points.
pub fn trend_operator(points: &[f64], q: usize) -> Result<DifferenceOperator> {
    let n = points.len();
    if n < q + 2 {
        return Err(Error::InsufficientData(format!("order {} differences need n >= {}, got {n}", q + 1, q + 2)));
    }
    for (i, w) in points.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonIncreasingPoints { index: i + 1, value: w[1], previous: w[0] });
        }
    }
    let mut op = DifferenceOperator::identity(n);
    for k in 1..=q + 1 {
        let weights: Vec<f64> = (0..n - k).map(|i| k as f64 / (points[i + k] - points[i])).collect();
        op = op.difference(Some(&weights));
    }
    Ok(op)
}
