//! Knot-set distances and prediction error on a reference grid.

use crate::error::{Error, Result};

/// Reference points with the true function values on them.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationGrid {
    pub points: Vec<Vec<f64>>,
    pub truth: Vec<f64>,
    pub f_min: f64,
    pub f_max: f64,
}

impl EvaluationGrid {
    pub fn new(points: Vec<Vec<f64>>, truth: Vec<f64>) -> Result<Self> {
        if points.len() != truth.len() {
            return Err(Error::DimensionMismatch(format!("{} points for {} values", points.len(), truth.len())));
        }
        if truth.is_empty() {
            return Err(Error::EmptySet);
        }
        let f_min = truth.iter().copied().fold(f64::INFINITY, f64::min);
        let f_max = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { points, truth, f_min, f_max })
    }

    /// Evaluates `f` at every point.
    pub fn from_fn(points: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let truth = points.iter().map(|p| f(p)).collect();
        Self::new(points, truth)
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn range(&self) -> f64 {
        self.f_max - self.f_min
    }
}

/// `n` evenly spaced values on `[0, 1]`, endpoints included.
pub fn unit_axis(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Cartesian product of axes, last axis varying fastest.
pub fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// `sup_{b ∈ v} inf_{a ∈ u} |a - b|`: how far the worst element of `v` is
/// from `u`.
pub fn directed_hausdorff(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(v.iter()
        .map(|b| u.iter().map(|a| (a - b).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}

pub fn hausdorff(u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(directed_hausdorff(u, v)?.max(directed_hausdorff(v, u)?))
}

/// `max_k |f(x_k) - f̂(x_k)| / (f_max - f_min)`.
pub fn normalized_sup_norm(model_values: &[f64], grid: &EvaluationGrid) -> Result<f64> {
    if model_values.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} grid points",
            model_values.len(),
            grid.len()
        )));
    }
    let range = grid.range();
    if !(range > 0.0) {
        return Err(Error::ConstantTruth);
    }
    let worst = model_values
        .iter()
        .zip(&grid.truth)
        .map(|(m, t)| (m - t).abs())
        .fold(0.0, f64::max);
    Ok(worst / range)
}

/// Index of the model with the smallest normalized sup norm. Models are
/// expected in descending-penalty order, so ties go to the larger penalty.
pub fn lambda_opt(model_values: &[Vec<f64>], grid: &EvaluationGrid) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, values) in model_values.iter().enumerate() {
        let s = normalized_sup_norm(values, grid)?;
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptySet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn directed_examples() {
        let t = [0.1, 0.27, 0.745];
        assert_eq!(directed_hausdorff(&t, &t).unwrap(), 0.0);
        assert_abs_diff_eq!(directed_hausdorff(&[0.5], &[0.4, 0.6]).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(directed_hausdorff(&[0.4, 0.6], &[0.5]).unwrap(), 0.1, epsilon = 1e-15);
        assert_eq!(directed_hausdorff(&[0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(directed_hausdorff(&[0.0, 1.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(hausdorff(&[0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(directed_hausdorff(&[], &[1.0]), Err(Error::EmptySet));
    }

    #[test]
    fn sup_norm_examples() {
        let grid = EvaluationGrid::new(vec![vec![0.0], vec![0.5], vec![1.0]], vec![-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(normalized_sup_norm(&grid.truth.clone(), &grid).unwrap(), 0.0);
        assert_abs_diff_eq!(normalized_sup_norm(&[-1.0, 0.04, 1.0], &grid).unwrap(), 0.02, epsilon = 1e-15);
        let flat = EvaluationGrid::new(vec![vec![0.0], vec![1.0]], vec![2.0, 2.0]).unwrap();
        assert_eq!(normalized_sup_norm(&[2.0, 2.0], &flat), Err(Error::ConstantTruth));
    }

    #[test]
    fn lambda_opt_prefers_earlier_on_ties() {
        let grid = EvaluationGrid::new(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        let models = vec![vec![0.5, 0.5], vec![0.0, 1.1], vec![0.0, 0.9], vec![0.0, 1.0]];
        assert_eq!(lambda_opt(&models, &grid).unwrap(), 3);
        let tied = vec![vec![0.5, 1.0], vec![0.0, 0.5]];
        assert_eq!(lambda_opt(&tied, &grid).unwrap(), 0);
    }

    #[test]
    fn cartesian_order() {
        let pts = cartesian(&[vec![0.0, 1.0], vec![5.0, 6.0, 7.0]]);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], vec![0.0, 6.0]);
        assert_eq!(pts[3], vec![1.0, 5.0]);
        assert_eq!(unit_axis(201)[100], 0.5);
    }
}
