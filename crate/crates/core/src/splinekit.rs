//! Clamped B-spline bases.
//!
//! Basis functions are indexed from zero: with `K` interior knots and order
//! `M` there are `K + M` order-`M` functions `B_0 .. B_{K+M-1}`. The lowest
//! order functions are half-open indicators `[τ_i, τ_{i+1})`, except that the
//! last non-degenerate interval is closed at the upper bound so every point of
//! `[lower, upper]` is covered.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::kron;

/// Knot sequence with the domain bounds repeated `order` times at each end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KnotFields")]
pub struct AugmentedKnotVector {
    interior: Vec<f64>,
    order: usize,
    lower: f64,
    upper: f64,
    #[serde(skip)]
    augmented: Vec<f64>,
}

#[derive(Deserialize)]
struct KnotFields {
    interior: Vec<f64>,
    order: usize,
    lower: f64,
    upper: f64,
}

impl TryFrom<KnotFields> for AugmentedKnotVector {
    type Error = Error;

    fn try_from(f: KnotFields) -> Result<Self> {
        Self::new(&f.interior, f.order, f.lower, f.upper)
    }
}

impl AugmentedKnotVector {
    pub fn new(interior: &[f64], order: usize, lower: f64, upper: f64) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidOrder(order));
        }
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidBounds(lower, upper));
        }
        for (index, w) in interior.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::NonIncreasingKnots { index: index + 1, value: w[1], previous: w[0] });
            }
        }
        if let Some(&value) = interior.iter().find(|&&t| !(t > lower && t < upper)) {
            return Err(Error::KnotOutsideDomain { value, lower, upper });
        }
        let mut augmented = Vec::with_capacity(interior.len() + 2 * order);
        augmented.extend(std::iter::repeat_n(lower, order));
        augmented.extend_from_slice(interior);
        augmented.extend(std::iter::repeat_n(upper, order));
        Ok(Self { interior: interior.to_vec(), order, lower, upper, augmented })
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn augmented(&self) -> &[f64] {
        &self.augmented
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Polynomial degree `order - 1`.
    pub fn degree(&self) -> usize {
        self.order - 1
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    /// Number of order-`M` basis functions, `K + M`.
    pub fn num_basis(&self) -> usize {
        self.interior.len() + self.order
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { value: x, lower: self.lower, upper: self.upper })
        }
    }

    /// Index `s` of the knot span with `τ_s <= x < τ_{s+1}`; the upper bound
    /// maps onto the last non-degenerate span.
    fn span(&self, x: f64) -> usize {
        let m = self.order;
        let last = self.interior.len() + m - 1;
        if x >= self.upper {
            return last;
        }
        // First index in [m, last] whose knot exceeds x, minus one.
        let t = &self.augmented[m..=last];
        m - 1 + t.partition_point(|&k| k <= x)
    }

    /// Order-1 indicator with the closed upper interval.
    fn indicator(&self, i: usize, x: f64) -> f64 {
        let tau = &self.augmented;
        if x == self.upper {
            return if i == self.interior.len() + self.order - 1 { 1.0 } else { 0.0 };
        }
        if tau[i] <= x && x < tau[i + 1] {
            1.0
        } else {
            0.0
        }
    }

    fn recurse(&self, i: usize, m: usize, x: f64) -> f64 {
        if m == 1 {
            return self.indicator(i, x);
        }
        let tau = &self.augmented;
        let d1 = tau[i + m - 1] - tau[i];
        let d2 = tau[i + m] - tau[i + 1];
        let left = if d1 > 0.0 { (x - tau[i]) / d1 * self.recurse(i, m - 1, x) } else { 0.0 };
        let right = if d2 > 0.0 { (tau[i + m] - x) / d2 * self.recurse(i + 1, m - 1, x) } else { 0.0 };
        left + right
    }

    /// `B_{i,m}(x)` by the Cox–de Boor recursion, for `1 <= m <= order`.
    pub fn eval(&self, i: usize, m: usize, x: f64) -> Result<f64> {
        if m < 1 || m > self.order {
            return Err(Error::InvalidOrder(m));
        }
        let count = self.augmented.len() - m;
        if i >= count {
            return Err(Error::IndexOutOfRange { index: i, order: m, count });
        }
        self.check_domain(x)?;
        Ok(self.recurse(i, m, x))
    }

    /// The `order` possibly-nonzero order-`M` values at `x` and the index of
    /// the first one (de Boor's triangular scheme).
    pub fn nonzero_basis(&self, x: f64) -> Result<(usize, Vec<f64>)> {
        self.check_domain(x)?;
        Ok(self.nonzero_basis_unchecked(x))
    }

    pub(crate) fn nonzero_basis_unchecked(&self, x: f64) -> (usize, Vec<f64>) {
        let m = self.order;
        let tau = &self.augmented;
        let s = self.span(x);
        let mut n = vec![0.0; m];
        let mut left = vec![0.0; m];
        let mut right = vec![0.0; m];
        n[0] = 1.0;
        for j in 1..m {
            left[j] = x - tau[s + 1 - j];
            right[j] = tau[s + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        (s + 1 - m, n)
    }

    /// All `K + M` order-`M` values at `x`.
    pub fn eval_all(&self, x: f64) -> Result<Vec<f64>> {
        let (first, vals) = self.nonzero_basis(x)?;
        let mut out = vec![0.0; self.num_basis()];
        out[first..first + vals.len()].copy_from_slice(&vals);
        Ok(out)
    }

    /// Evaluates `Σ coef_i B_i(x)`.
    pub fn combine(&self, coef: &[f64], x: f64) -> Result<f64> {
        if coef.len() != self.num_basis() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} basis functions",
                coef.len(),
                self.num_basis()
            )));
        }
        let (first, vals) = self.nonzero_basis(x)?;
        Ok(vals.iter().zip(&coef[first..]).map(|(b, c)| b * c).sum())
    }
}

/// Builds `τ = (lower × M, interior, upper × M)`.
pub fn build_augmented_knots(interior: &[f64], order: usize, bounds: (f64, f64)) -> Result<AugmentedKnotVector> {
    AugmentedKnotVector::new(interior, order, bounds.0, bounds.1)
}

/// `B_{i,m}(x)` for the given knot vector.
pub fn eval_bspline(knots: &AugmentedKnotVector, i: usize, m: usize, x: f64) -> Result<f64> {
    knots.eval(i, m, x)
}

/// Dense `n × (K + M)` matrix of order-`M` basis values at the given points.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn from_matrix(values: DMatrix<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

pub fn design_matrix(knots: &AugmentedKnotVector, points: &[f64]) -> Result<DesignMatrix> {
    let mut values = DMatrix::zeros(points.len(), knots.num_basis());
    for (r, &x) in points.iter().enumerate() {
        let (first, vals) = knots.nonzero_basis(x)?;
        for (t, v) in vals.into_iter().enumerate() {
            values[(r, first + t)] = v;
        }
    }
    Ok(DesignMatrix { values })
}

/// Kronecker product of two design matrices; row `k * n2 + l` pairs row `k`
/// of the first factor with row `l` of the second.
pub fn tensor_design_matrix(b1: &DesignMatrix, b2: &DesignMatrix) -> DesignMatrix {
    DesignMatrix { values: kron(&b1.values, &b2.values) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn f1_knots() -> AugmentedKnotVector {
        build_augmented_knots(&[0.1, 0.27, 0.745], 3, (0.0, 1.0)).unwrap()
    }

    #[test]
    fn augmented_sequences() {
        assert_eq!(f1_knots().augmented(), &[0.0, 0.0, 0.0, 0.1, 0.27, 0.745, 1.0, 1.0, 1.0]);
        assert_eq!(build_augmented_knots(&[], 1, (0.0, 1.0)).unwrap().augmented(), &[0.0, 1.0]);
        assert_eq!(
            build_augmented_knots(&[0.5], 2, (0.0, 1.0)).unwrap().augmented(),
            &[0.0, 0.0, 0.5, 1.0, 1.0]
        );
    }

    #[test]
    fn validation_errors_are_distinct() {
        assert!(matches!(
            build_augmented_knots(&[0.5, 0.4], 3, (0.0, 1.0)),
            Err(Error::NonIncreasingKnots { .. })
        ));
        assert!(matches!(
            build_augmented_knots(&[0.5, 0.5], 3, (0.0, 1.0)),
            Err(Error::NonIncreasingKnots { .. })
        ));
        assert!(matches!(build_augmented_knots(&[1.0], 3, (0.0, 1.0)), Err(Error::KnotOutsideDomain { .. })));
        assert!(matches!(build_augmented_knots(&[0.5], 0, (0.0, 1.0)), Err(Error::InvalidOrder(0))));
        assert!(matches!(build_augmented_knots(&[], 2, (1.0, 1.0)), Err(Error::InvalidBounds(..))));
    }

    #[test]
    fn order_one_indicator() {
        let k = build_augmented_knots(&[], 1, (0.0, 1.0)).unwrap();
        assert_eq!(eval_bspline(&k, 0, 1, 0.3).unwrap(), 1.0);
        assert!(matches!(eval_bspline(&k, 0, 1, 1.2), Err(Error::OutOfDomain { .. })));
        assert!(matches!(eval_bspline(&k, 1, 1, 0.3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn clamped_endpoints() {
        let k = f1_knots();
        for j in 0..6 {
            let at0 = eval_bspline(&k, j, 3, 0.0).unwrap();
            let at1 = eval_bspline(&k, j, 3, 1.0).unwrap();
            assert_eq!(at0, if j == 0 { 1.0 } else { 0.0 });
            assert_eq!(at1, if j == 5 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn triangle_matches_recursion() {
        let k = f1_knots();
        for step in 0..=200 {
            let x = step as f64 / 200.0;
            let all = k.eval_all(x).unwrap();
            let sum: f64 = all.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            for (j, v) in all.iter().enumerate() {
                assert_abs_diff_eq!(*v, eval_bspline(&k, j, 3, x).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn design_shapes() {
        let k = build_augmented_knots(&[], 1, (0.0, 1.0)).unwrap();
        let pts = [0.0, 0.25, 0.5, 0.75, 1.0];
        let d = design_matrix(&k, &pts).unwrap();
        assert_eq!(d.values(), &DMatrix::from_element(5, 1, 1.0));

        let grid: Vec<f64> = (0..201).map(|i| i as f64 / 200.0).collect();
        let d = design_matrix(&f1_knots(), &grid).unwrap();
        assert_eq!((d.nrows(), d.ncols()), (201, 6));
        for r in 0..201 {
            assert_abs_diff_eq!(d.values().row(r).sum(), 1.0, epsilon = 1e-12);
        }
        assert!(design_matrix(&f1_knots(), &[1.5]).is_err());
    }

    #[test]
    fn tensor_design_dimensions() {
        let a = DesignMatrix::from_matrix(DMatrix::from_element(3, 2, 0.5));
        let b = DesignMatrix::from_matrix(DMatrix::from_element(4, 3, 1.0 / 3.0));
        let t = tensor_design_matrix(&a, &b);
        assert_eq!((t.nrows(), t.ncols()), (12, 6));
        for r in 0..12 {
            assert_abs_diff_eq!(t.values().row(r).sum(), 1.0, epsilon = 1e-12);
        }
        let id = DesignMatrix::from_matrix(DMatrix::identity(2, 2));
        let t = tensor_design_matrix(&id, &b);
        assert_eq!(t.values().view((0, 0), (4, 3)), b.values().view((0, 0), (4, 3)));
        assert_eq!(t.values().view((4, 3), (4, 3)), b.values().view((0, 0), (4, 3)));
        assert!(t.values().view((0, 3), (4, 3)).iter().all(|&v| v == 0.0));
    }
}
