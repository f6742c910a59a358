//! One-dimensional knot selection.
//!
//! A trend-filtering path proposes knot sets: wherever the `(q+1)`-th
//! difference of the fitted signal is nonzero, the observation point one step
//! to the right becomes a knot. Each candidate set is turned into a clamped
//! B-spline least-squares fit and scored by EBIC; the best score wins, with
//! ties going to the larger penalty.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::genlasso::{solve_path_truncated, LassoPath, LassoSolution, PathConfig};
use crate::linalg::{lstsq, RANK_RCOND};
use crate::penalty::trend_operator;
use crate::splinekit::{design_matrix, AugmentedKnotVector};

/// Relative zero test for `a`: `|a_ℓ| > threshold · max(1, max|a|)`.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-6;
/// Knots closer than this fraction of the data range are merged.
pub const MIN_GAP_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedKnots {
    pub lambda: f64,
    /// Zero-based indices into the observation points.
    pub indices: Vec<usize>,
    pub knots: Vec<f64>,
}

impl SelectedKnots {
    pub fn count(&self) -> usize {
        self.knots.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSplineModel {
    pub knots: AugmentedKnotVector,
    pub gamma: Vec<f64>,
    pub q: usize,
    pub lambda: f64,
    pub ebic: f64,
    /// Residual sum of squares.
    pub ss: f64,
    /// Set when the design was rank deficient and a minimum-norm fit was used.
    pub rank_deficient: bool,
}

impl FittedSplineModel {
    pub fn num_knots(&self) -> usize {
        self.knots.num_interior()
    }

    pub fn predict(&self, x: f64) -> Result<f64> {
        self.knots.combine(&self.gamma, x)
    }
}

/// Goodness-of-fit term of the EBIC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EbicForm {
    /// The residual sum of squares itself. Depends on the units of `Y`.
    Raw,
    /// Gaussian deviance `n ln(SS / n)`; invariant to rescaling `Y`.
    #[default]
    Gaussian,
}

impl EbicForm {
    pub fn as_str(self) -> &'static str {
        match self {
            EbicForm::Raw => "raw",
            EbicForm::Gaussian => "gaussian",
        }
    }

    /// `tss` (the sum of squared responses) sets a floor for `SS` so that
    /// exact fits do not score `-∞`.
    pub fn fit_term(self, ss: f64, n: usize, tss: f64) -> f64 {
        match self {
            EbicForm::Raw => ss,
            EbicForm::Gaussian => {
                let floor = (1e-24 * tss).max(f64::MIN_POSITIVE);
                n as f64 * (ss.max(floor) / n as f64).ln()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Spline degree; the basis order is `q + 1`.
    pub q: usize,
    pub path: PathConfig,
    pub zero_threshold: f64,
    /// Model-space size in the EBIC binomial term; `None` means `n`.
    pub k_max: Option<usize>,
    /// Spline domain per axis; `None` means the data range.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub ebic_form: EbicForm,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { q: 2, path: PathConfig::default(), zero_threshold: DEFAULT_ZERO_THRESHOLD, k_max: None, bounds: None, ebic_form: EbicForm::default() }
    }
}

impl FitConfig {
    pub fn with_degree(q: usize) -> Self {
        Self { q, ..Self::default() }
    }

    pub fn axis_bounds(&self, axis: usize) -> Option<(f64, f64)> {
        self.bounds.as_ref().and_then(|b| b.get(axis).copied())
    }

    /// Configured bounds for `axis` after checking they cover `points`,
    /// otherwise the range of `points`.
    pub fn resolve_bounds(&self, axis: usize, points: &[f64]) -> Result<(f64, f64)> {
        match self.axis_bounds(axis) {
            Some((lo, hi)) => {
                if !(lo < hi) {
                    return Err(Error::InvalidBounds(lo, hi));
                }
                if let Some(&x) = points.iter().find(|&&x| x < lo || x > hi) {
                    return Err(Error::OutOfDomain { value: x, lower: lo, upper: hi });
                }
                Ok((lo, hi))
            }
            None => data_range(points),
        }
    }
}

/// Every candidate model along the path together with the EBIC choice.
#[derive(Debug, Clone)]
pub struct SplinePath {
    pub path: LassoPath,
    pub selections: Vec<SelectedKnots>,
    pub models: Vec<FittedSplineModel>,
    pub best: usize,
}

impl SplinePath {
    pub fn selected(&self) -> &FittedSplineModel {
        &self.models[self.best]
    }
}

/// Sorts candidate `(location, weight)` pairs, drops those outside the open
/// interval `(lower, upper)` and merges neighbours closer than `min_gap`,
/// keeping the heavier one.
pub fn merge_knots(candidates: &mut Vec<(f64, f64)>, min_gap: f64, lower: f64, upper: f64) -> Vec<f64> {
    candidates.retain(|(t, _)| *t > lower && *t < upper);
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(candidates.len());
    for &(t, w) in candidates.iter() {
        match kept.last_mut() {
            Some(last) if t - last.0 < min_gap => {
                if w > last.1 {
                    *last = (t, w);
                }
            }
            _ => kept.push((t, w)),
        }
    }
    kept.into_iter().map(|(t, _)| t).collect()
}

/// Knot locations where `a` is nonzero under the relative zero test, each
/// placed at the observation point right after the difference's left end.
pub fn extract_knots(sol: &LassoSolution, points: &[f64], threshold: f64) -> Result<SelectedKnots> {
    let m = sol.a.len();
    if points.len() < m + 1 || points.is_empty() {
        return Err(Error::DimensionMismatch(format!("{} points for {} differences", points.len(), m)));
    }
    let scale = sol.a.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let cut = threshold * scale;
    let first = points[0];
    let last = points[points.len() - 1];
    let mut candidates: Vec<(f64, f64)> = sol
        .a
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > cut)
        .map(|(l, v)| (points[l + 1], v.abs()))
        .collect();
    let knots = merge_knots(&mut candidates, (last - first) * MIN_GAP_FRACTION, first, last);
    let indices = knots
        .iter()
        .map(|t| points.partition_point(|p| p < t))
        .collect();
    Ok(SelectedKnots { lambda: sol.lambda, indices, knots })
}

/// `ln C(n, k)` through log-gamma.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `SS + (q+K+1) ln n + 2 ln C(q+K_max+1, q+K+1)`.
pub fn ebic_score(ss: f64, q: usize, k: usize, n: usize, k_max: usize) -> Result<f64> {
    ebic_with(EbicForm::Raw, ss, 0.0, q, k, n, k_max)
}

/// EBIC with a chosen fit term; `tss` is only used by [`EbicForm::Gaussian`].
pub fn ebic_with(form: EbicForm, ss: f64, tss: f64, q: usize, k: usize, n: usize, k_max: usize) -> Result<f64> {
    if k > k_max {
        return Err(Error::KnotCountExceedsMax { count: k, max: k_max });
    }
    if n == 0 {
        return Err(Error::InsufficientData("EBIC needs n >= 1".into()));
    }
    let dim = q + k + 1;
    Ok(form.fit_term(ss, n, tss) + dim as f64 * (n as f64).ln() + 2.0 * ln_binomial(q + k_max + 1, dim))
}

pub fn ebic(model: &FittedSplineModel, n: usize, k_max: usize) -> Result<f64> {
    ebic_score(model.ss, model.q, model.num_knots(), n, k_max)
}

/// Least-squares spline fit with the data range as domain.
pub fn fit_spline(y: &[f64], points: &[f64], knots: &SelectedKnots, q: usize) -> Result<FittedSplineModel> {
    let (lo, hi) = data_range(points)?;
    fit_spline_in(y, points, knots, q, (lo, hi))
}

pub fn fit_spline_in(
    y: &[f64],
    points: &[f64],
    knots: &SelectedKnots,
    q: usize,
    bounds: (f64, f64),
) -> Result<FittedSplineModel> {
    if y.len() != points.len() {
        return Err(Error::DimensionMismatch(format!("{} responses for {} points", y.len(), points.len())));
    }
    let basis = AugmentedKnotVector::new(&knots.knots, q + 1, bounds.0, bounds.1)?;
    let b = design_matrix(&basis, points)?;
    let rhs = DMatrix::from_column_slice(y.len(), 1, y);
    let sol = lstsq(b.values(), &rhs);
    let gamma: Vec<f64> = sol.x.column(0).iter().copied().collect();
    let fitted = b.values() * &sol.x;
    let ss: f64 = y.iter().zip(fitted.iter()).map(|(a, f)| (a - f) * (a - f)).sum();
    let rank_deficient = sol.rank_deficient();
    if rank_deficient {
        log::warn!(
            "spline design with {} knots is rank deficient (rank {} of {}, rcond {RANK_RCOND:e}); using the minimum-norm fit",
            knots.count(),
            sol.rank,
            gamma.len()
        );
    }
    let n = y.len();
    let ebic = ebic_score(ss, q, knots.count(), n, n.max(knots.count())).unwrap_or(f64::INFINITY);
    Ok(FittedSplineModel { knots: basis, gamma, q, lambda: knots.lambda, ebic, ss, rank_deficient })
}

pub(crate) fn data_range(points: &[f64]) -> Result<(f64, f64)> {
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        return Err(Error::InsufficientData("need at least two distinct points".into()));
    }
    Ok((lo, hi))
}

/// Sorts `(points, y)` by point, rejecting duplicates and non-finite values.
pub fn sort_observations(points: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if points.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} responses for {} points", y.len(), points.len())));
    }
    if points.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("points and responses must be finite".into()));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    let xs: Vec<f64> = order.iter().map(|&i| points[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    if let Some(w) = xs.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicatePoint(format!("{}", w[0])));
    }
    Ok((xs, ys))
}

fn knot_key(knots: &[f64]) -> Vec<u64> {
    knots.iter().map(|t| t.to_bits()).collect()
}

/// Runs the path and scores every candidate. Points must be strictly
/// increasing.
pub fn fit_1d_path(y: &[f64], points: &[f64], config: &FitConfig) -> Result<SplinePath> {
    let q = config.q;
    let n = points.len();
    if n < q + 2 {
        return Err(Error::InsufficientData(format!("degree {q} needs at least {} points, got {n}", q + 2)));
    }
    let bounds = config.resolve_bounds(0, points)?;
    let k_max = config.k_max.unwrap_or(n);
    let tss: f64 = y.iter().map(|v| v * v).sum();
    let op = trend_operator(points, q)?;
    let path = solve_path_truncated(y, &op, &config.path)?;
    let selections = path
        .solutions
        .iter()
        .map(|s| extract_knots(s, points, config.zero_threshold))
        .collect::<Result<Vec<_>>>()?;

    // Neighbouring penalties often share a knot set; fit each set once.
    let mut unique: Vec<&SelectedKnots> = Vec::new();
    let mut slot_of: HashMap<Vec<u64>, usize> = HashMap::new();
    let slots: Vec<usize> = selections
        .iter()
        .map(|s| {
            *slot_of.entry(knot_key(&s.knots)).or_insert_with(|| {
                unique.push(s);
                unique.len() - 1
            })
        })
        .collect();
    let fits = unique
        .par_iter()
        .map(|s| fit_spline_in(y, points, s, q, bounds))
        .collect::<Result<Vec<_>>>()?;

    let models: Vec<FittedSplineModel> = selections
        .iter()
        .zip(&slots)
        .map(|(s, &slot)| {
            let mut m = fits[slot].clone();
            m.lambda = s.lambda;
            m.ebic = match ebic_with(config.ebic_form, m.ss, tss, q, m.num_knots(), n, k_max) {
                Ok(v) => v,
                Err(e) => {
                    log::debug!("lambda {}: {e}", s.lambda);
                    f64::INFINITY
                }
            };
            m
        })
        .collect();
    let best = argmin_first(models.iter().map(|m| m.ebic))
        .ok_or_else(|| Error::InsufficientData("no candidate model has a finite EBIC".into()))?;
    Ok(SplinePath { path, selections, models, best })
}

/// Index of the smallest finite value; the earliest index wins ties.
pub(crate) fn argmin_first(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// EBIC-selected spline fit. Points need not be sorted.
pub fn fit_1d(y: &[f64], points: &[f64], config: &FitConfig) -> Result<FittedSplineModel> {
    let (xs, ys) = sort_observations(points, y)?;
    let fit = fit_1d_path(&ys, &xs, config)?;
    Ok(fit.models[fit.best].clone())
}

pub fn predict(model: &FittedSplineModel, x: f64) -> Result<f64> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genlasso::PathState;
    use approx::assert_abs_diff_eq;

    fn solution_with(a: Vec<f64>) -> LassoSolution {
        LassoSolution {
            lambda: 1.0,
            beta: vec![],
            dual: vec![0.0; a.len()],
            a,
            kkt_residual: 0.0,
            iterations: 0,
            state: PathState::default(),
        }
    }

    #[test]
    fn knots_follow_nonzero_differences() {
        let pts: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
        let sel = extract_knots(&solution_with(vec![0.0, 0.5, 0.0, -0.2, 0.0]), &pts, 1e-6).unwrap();
        assert_eq!(sel.indices, vec![2, 4]);
        assert_eq!(sel.knots, vec![pts[2], pts[4]]);
        assert_eq!(sel.count(), 2);
        let none = extract_knots(&solution_with(vec![0.0; 5]), &pts, 1e-6).unwrap();
        assert_eq!(none.count(), 0);
    }

    #[test]
    fn last_point_is_never_a_knot() {
        let pts = [0.0, 0.5, 1.0];
        let sel = extract_knots(&solution_with(vec![1.0, 1.0]), &pts, 1e-6).unwrap();
        assert_eq!(sel.knots, vec![0.5]);
    }

    #[test]
    fn merge_keeps_heavier() {
        let mut c = vec![(0.5, 1.0), (0.5 + 1e-12, 3.0), (0.2, 1.0), (1.0, 9.0)];
        assert_eq!(merge_knots(&mut c, 1e-9, 0.0, 1.0), vec![0.2, 0.5 + 1e-12]);
    }

    #[test]
    fn ebic_arithmetic() {
        let v = ebic_score(1.0, 2, 2, 10, 10).unwrap();
        let direct = 1.0 + 5.0 * 10f64.ln() + 2.0 * 1287f64.ln();
        assert_abs_diff_eq!(v, direct, epsilon = 1e-10);
        assert_abs_diff_eq!(v, 26.833, epsilon = 1e-3);
        let full = ebic_score(0.0, 1, 7, 9, 7).unwrap();
        assert_abs_diff_eq!(full, 9.0 * 9f64.ln(), epsilon = 1e-12);
        assert!(matches!(ebic_score(0.0, 1, 8, 9, 7), Err(Error::KnotCountExceedsMax { .. })));
    }

    #[test]
    fn constant_basis_gives_mean() {
        let pts = [0.0, 0.3, 0.6, 1.0];
        let y = [1.0, 2.0, 4.0, 5.0];
        let sel = SelectedKnots { lambda: 0.0, indices: vec![], knots: vec![] };
        let m = fit_spline(&y, &pts, &sel, 0).unwrap();
        assert_eq!(m.gamma.len(), 1);
        assert_abs_diff_eq!(m.gamma[0], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn duplicates_rejected() {
        let cfg = FitConfig::with_degree(1);
        let r = fit_1d(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.5, 0.5, 1.0], &cfg);
        assert!(matches!(r, Err(Error::DuplicatePoint(_))));
    }

    #[test]
    fn polynomial_data_selects_no_knots() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 / 29.0).powf(1.3)).collect();
        let y: Vec<f64> = x.iter().map(|t| 1.0 + t - 2.0 * t * t).collect();
        let m = fit_1d(&y, &x, &FitConfig::with_degree(2)).unwrap();
        assert_eq!(m.num_knots(), 0);
        assert!(m.ss < 1e-20);
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let x: Vec<f64> = (0..25).map(|i| i as f64 / 24.0).collect();
        let y: Vec<f64> = x.iter().map(|t| (4.0 * t).sin()).collect();
        let a = fit_1d(&y, &x, &FitConfig::with_degree(1)).unwrap();
        let mut xr = x.clone();
        let mut yr = y.clone();
        xr.reverse();
        yr.reverse();
        let b = fit_1d(&yr, &xr, &FitConfig::with_degree(1)).unwrap();
        assert_eq!(a, b);
    }
}
