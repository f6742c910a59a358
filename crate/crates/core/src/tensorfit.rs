//! Tensor-product splines on full grids.
//!
//! Fixing one coordinate turns each grid line into a 1D problem. Every line
//! gets its own penalty path; the `k`-th penalties across lines form the
//! `k`-th equivalent penalty, and the union of their knots is that entry's
//! candidate set for the axis. The pair of entries with the best 2D EBIC
//! wins. Least squares factor through the Kronecker structure:
//! `Γ = B₁⁺ Y (B₂⁺)ᵀ`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genlasso::solve_path_truncated;
use crate::knotsel1d::{extract_knots, EbicForm, ln_binomial, merge_knots, FitConfig, MIN_GAP_FRACTION};
use crate::linalg::lstsq;
use crate::penalty::trend_operator;
use crate::splinekit::{design_matrix, AugmentedKnotVector};

/// Responses on the product of two strictly increasing axes, stored with the
/// second index varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDataset {
    axis1: Vec<f64>,
    axis2: Vec<f64>,
    responses: Vec<f64>,
}

impl GridDataset {
    pub fn new(axis1: Vec<f64>, axis2: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        for axis in [&axis1, &axis2] {
            if axis.len() < 2 {
                return Err(Error::InsufficientData("each grid axis needs at least two values".into()));
            }
            for (i, w) in axis.windows(2).enumerate() {
                if !(w[1] > w[0]) {
                    return Err(Error::NonIncreasingPoints { index: i + 1, value: w[1], previous: w[0] });
                }
            }
        }
        if responses.len() != axis1.len() * axis2.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for a {}x{} grid",
                responses.len(),
                axis1.len(),
                axis2.len()
            )));
        }
        if responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("responses must be finite".into()));
        }
        Ok(Self { axis1, axis2, responses })
    }

    /// Recognises a full grid in scattered records: every combination of the
    /// distinct coordinate values present exactly once (exact matching).
    pub fn from_points(points: &[[f64; 2]], responses: &[f64]) -> Option<Self> {
        if points.len() != responses.len() {
            return None;
        }
        let axis = |j: usize| {
            let mut v: Vec<f64> = points.iter().map(|p| p[j]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (a1, a2) = (axis(0), axis(1));
        if a1.len() * a2.len() != points.len() {
            return None;
        }
        let mut y = vec![f64::NAN; points.len()];
        for (p, &r) in points.iter().zip(responses) {
            let k = a1.binary_search_by(|v| v.total_cmp(&p[0])).ok()?;
            let l = a2.binary_search_by(|v| v.total_cmp(&p[1])).ok()?;
            let slot = &mut y[k * a2.len() + l];
            if !slot.is_nan() {
                return None;
            }
            *slot = r;
        }
        Self::new(a1, a2, y).ok()
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        if axis == 0 {
            &self.axis1
        } else {
            &self.axis2
        }
    }

    pub fn axis1(&self) -> &[f64] {
        &self.axis1
    }

    pub fn axis2(&self) -> &[f64] {
        &self.axis2
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn value(&self, k: usize, l: usize) -> f64 {
        self.responses[k * self.axis2.len() + l]
    }

    /// Responses as an `n1 × n2` matrix.
    pub fn response_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.axis1.len(), self.axis2.len(), &self.responses)
    }

    /// Responses along `axis` with the other index fixed at `fixed`.
    pub fn slice(&self, axis: usize, fixed: usize) -> Vec<f64> {
        if axis == 0 {
            (0..self.axis1.len()).map(|k| self.value(k, fixed)).collect()
        } else {
            (0..self.axis2.len()).map(|l| self.value(fixed, l)).collect()
        }
    }

    /// Swaps the roles of the axes.
    pub fn transpose(&self) -> Self {
        let (n1, n2) = (self.axis1.len(), self.axis2.len());
        let mut y = Vec::with_capacity(self.responses.len());
        for l in 0..n2 {
            for k in 0..n1 {
                y.push(self.value(k, l));
            }
        }
        Self { axis1: self.axis2.clone(), axis2: self.axis1.clone(), responses: y }
    }
}

/// Candidate knot sets for one axis, one per equivalent penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalentLambdaSet {
    /// Zero-based axis.
    pub axis: usize,
    pub s_min: usize,
    /// Entry `k` holds the `k`-th penalty of every line.
    pub tilde_lambdas: Vec<Vec<f64>>,
    pub pooled_knots: Vec<Vec<f64>>,
}

impl EquivalentLambdaSet {
    /// Groups per-line knot sets into entries. `lines[i][k]` is line `i`'s
    /// `(λ, knots)` at its `k`-th penalty, strongest first; every line is
    /// truncated to the shortest one.
    pub fn pool(axis: usize, lines: &[Vec<(f64, Vec<f64>)>], lower: f64, upper: f64) -> Self {
        let s_min = lines.iter().map(Vec::len).min().unwrap_or(0);
        let min_gap = (upper - lower) * MIN_GAP_FRACTION;
        let mut tilde_lambdas = Vec::with_capacity(s_min);
        let mut pooled_knots = Vec::with_capacity(s_min);
        for k in 0..s_min {
            tilde_lambdas.push(lines.iter().map(|l| l[k].0).collect());
            let mut cand: Vec<(f64, f64)> =
                lines.iter().flat_map(|l| l[k].1.iter().map(|&t| (t, 1.0))).collect();
            pooled_knots.push(merge_knots(&mut cand, min_gap, lower, upper));
        }
        Self { axis, s_min, tilde_lambdas, pooled_knots }
    }
}

/// Tensor-product spline in any number of dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTensorModel {
    pub knots: Vec<AugmentedKnotVector>,
    /// Coefficients in row-major order, last dimension fastest.
    pub gamma: Vec<f64>,
    pub q: usize,
    pub ebic: f64,
    pub ss: f64,
    /// Chosen equivalent-penalty entry per dimension.
    pub selected: Vec<usize>,
    pub rank_deficient: bool,
}

impl FittedTensorModel {
    pub fn dims(&self) -> usize {
        self.knots.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.knots.iter().map(|k| k.num_basis()).collect()
    }

    pub fn knot_counts(&self) -> Vec<usize> {
        self.knots.iter().map(|k| k.num_interior()).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dims() {
            return Err(Error::DimensionMismatch(format!("{}-d point for a {}-d model", x.len(), self.dims())));
        }
        let local: Vec<(usize, Vec<f64>)> =
            self.knots.iter().zip(x).map(|(k, &v)| k.nonzero_basis(v)).collect::<Result<_>>()?;
        let shape = self.shape();
        let mut strides = vec![1usize; shape.len()];
        for j in (0..shape.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * shape[j + 1];
        }
        // Sum over the product of local supports.
        let mut total = 0.0;
        let mut idx = vec![0usize; local.len()];
        loop {
            let mut w = 1.0;
            let mut flat = 0;
            for (j, (first, vals)) in local.iter().enumerate() {
                w *= vals[idx[j]];
                flat += (first + idx[j]) * strides[j];
            }
            total += w * self.gamma[flat];
            let mut j = local.len();
            loop {
                if j == 0 {
                    return Ok(total);
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < local[j].1.len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    }
}

pub fn predict_2d(model: &FittedTensorModel, x1: f64, x2: f64) -> Result<f64> {
    model.predict(&[x1, x2])
}

/// Score and coefficients of one knot-set pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFit {
    pub ebic: f64,
    pub ss: f64,
    /// `Q₁ × Q₂` coefficients.
    pub gamma: DMatrix<f64>,
    pub rank_deficient: bool,
}

/// `SS + Q₁Q₂ ln n + 2 ln C((q+n₁+1)(q+n₂+1), Q₁Q₂)` for the factored least
/// squares fit on the given knot vectors.
pub fn ebic_2d(
    data: &GridDataset,
    knots1: &AugmentedKnotVector,
    knots2: &AugmentedKnotVector,
    q: usize,
) -> Result<CellFit> {
    ebic_2d_with(EbicForm::Raw, data, knots1, knots2, q)
}

pub fn ebic_2d_with(
    form: EbicForm,
    data: &GridDataset,
    knots1: &AugmentedKnotVector,
    knots2: &AugmentedKnotVector,
    q: usize,
) -> Result<CellFit> {
    let (n1, n2) = (data.axis1.len(), data.axis2.len());
    let n = n1 * n2;
    let params = knots1.num_basis() * knots2.num_basis();
    if params > n {
        return Err(Error::Overparameterized { params, n });
    }
    let b1 = design_matrix(knots1, &data.axis1)?;
    let b2 = design_matrix(knots2, &data.axis2)?;
    let y = data.response_matrix();
    let (gamma, rank_deficient) = kron_lstsq(b1.values(), b2.values(), &y);
    let fitted = b1.values() * &gamma * b2.values().transpose();
    let ss = (&y - fitted).norm_squared();
    let space = (q + n1 + 1) * (q + n2 + 1);
    let tss = data.responses.iter().map(|v| v * v).sum();
    let ebic = form.fit_term(ss, n, tss) + params as f64 * (n as f64).ln() + 2.0 * ln_binomial(space, params);
    Ok(CellFit { ebic, ss, gamma, rank_deficient })
}

/// Least squares for `(B₁ ⊗ B₂) vec(Γ) = vec(Y)` without forming the
/// Kronecker product (`Y` is `n₁ × n₂`, `Γ` is `Q₁ × Q₂`).
pub fn kron_lstsq(b1: &DMatrix<f64>, b2: &DMatrix<f64>, y: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let s1 = lstsq(b1, y);
    let s2 = lstsq(b2, &s1.x.transpose());
    (s2.x.transpose(), s1.rank_deficient() || s2.rank_deficient())
}

/// Runs a path along every line parallel to `axis` and pools their knots.
pub fn per_dimension_paths(data: &GridDataset, axis: usize, config: &FitConfig) -> Result<EquivalentLambdaSet> {
    let q = config.q;
    let pts = data.axis(axis);
    if pts.len() < q + 2 {
        return Err(Error::InsufficientData(format!(
            "axis {} has {} values; degree {q} needs {}",
            axis + 1,
            pts.len(),
            q + 2
        )));
    }
    let (lower, upper) = config.resolve_bounds(axis, pts)?;
    let op = trend_operator(pts, q)?;
    let others = data.axis(1 - axis).len();
    let lines = (0..others)
        .into_par_iter()
        .map(|i| {
            let y = data.slice(axis, i);
            let path = solve_path_truncated(&y, &op, &config.path)?;
            path.solutions
                .iter()
                .map(|s| extract_knots(s, pts, config.zero_threshold).map(|k| (s.lambda, k.knots)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquivalentLambdaSet::pool(axis, &lines, lower, upper))
}

fn knot_key(knots: &[f64]) -> Vec<u64> {
    knots.iter().map(|t| t.to_bits()).collect()
}

/// Maps each entry to a distinct knot set; returns `(slot per entry, sets)`.
pub(crate) fn distinct_sets(sets: &[Vec<f64>]) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut unique: Vec<Vec<f64>> = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let slots = sets
        .iter()
        .map(|s| {
            *seen.entry(knot_key(s)).or_insert_with(|| {
                unique.push(s.clone());
                unique.len() - 1
            })
        })
        .collect();
    (slots, unique)
}

/// Every distinct combination of per-dimension knot sets, scored.
///
/// Entries are equivalent-penalty indices, strongest first; several entries
/// of one dimension may share a knot set, so models are stored per distinct
/// combination and looked up through `slots`.
#[derive(Debug, Clone)]
pub struct KnotSetSearch {
    /// `slots[j][e]`: distinct-set index of entry `e` in dimension `j`.
    pub slots: Vec<Vec<usize>>,
    set_counts: Vec<usize>,
    /// Indexed by distinct-set combination, last dimension fastest. `None`
    /// marks a combination with more coefficients than observations.
    models: Vec<Option<FittedTensorModel>>,
}

impl KnotSetSearch {
    /// Scores every combination of `bases` (one list of distinct knot
    /// vectors per dimension) concurrently.
    pub fn run<F>(slots: Vec<Vec<usize>>, bases: &[Vec<AugmentedKnotVector>], score: F) -> Result<Self>
    where
        F: Fn(&[AugmentedKnotVector]) -> Result<Option<FittedTensorModel>> + Sync,
    {
        let set_counts: Vec<usize> = bases.iter().map(Vec::len).collect();
        let total: usize = set_counts.iter().product();
        let models = (0..total)
            .into_par_iter()
            .map(|c| {
                let chosen: Vec<AugmentedKnotVector> =
                    unflatten(c, &set_counts).iter().zip(bases).map(|(&i, b)| b[i].clone()).collect();
                score(&chosen)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { slots, set_counts, models })
    }

    pub fn entry_counts(&self) -> Vec<usize> {
        self.slots.iter().map(Vec::len).collect()
    }

    pub fn distinct_counts(&self) -> &[usize] {
        &self.set_counts
    }

    pub fn skipped(&self) -> usize {
        self.models.iter().filter(|m| m.is_none()).count()
    }

    /// Scored models, one per distinct combination.
    pub fn scored(&self) -> impl Iterator<Item = &FittedTensorModel> {
        self.models.iter().flatten()
    }

    pub fn model_at(&self, entries: &[usize]) -> Option<&FittedTensorModel> {
        let mut c = 0;
        for ((&e, slot), &n) in entries.iter().zip(&self.slots).zip(&self.set_counts) {
            c = c * n + slot[e];
        }
        self.models[c].as_ref()
    }

    /// Lowest EBIC over all entry combinations. Ties go to fewer
    /// coefficients, then to stronger penalties, earlier dimensions first.
    pub fn best(&self) -> Result<FittedTensorModel> {
        let counts = self.entry_counts();
        let total: usize = counts.iter().product();
        let mut best: Option<(usize, f64, usize)> = None;
        for e in 0..total {
            let entries = unflatten(e, &counts);
            let Some(m) = self.model_at(&entries) else { continue };
            if !m.ebic.is_finite() {
                continue;
            }
            let params = m.gamma.len();
            let better = match best {
                None => true,
                Some((_, b, p)) => m.ebic < b || (m.ebic == b && params < p),
            };
            if better {
                best = Some((e, m.ebic, params));
            }
        }
        let (e, _, _) = best.ok_or(Error::AllOverparameterized(self.skipped()))?;
        let entries = unflatten(e, &counts);
        let mut model = self.model_at(&entries).expect("selected combination was scored").clone();
        model.selected = entries;
        Ok(model)
    }
}

/// Mixed-radix digits of `index`, last digit fastest.
fn unflatten(mut index: usize, radix: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radix.len()];
    for (o, &r) in out.iter_mut().zip(radix).rev() {
        *o = index % r;
        index /= r;
    }
    out
}

/// Candidate knot sets for both axes, with every pair scored.
pub fn grid_search(data: &GridDataset, config: &FitConfig) -> Result<KnotSetSearch> {
    let q = config.q;
    let mut slots = Vec::with_capacity(2);
    let mut bases = Vec::with_capacity(2);
    for axis in 0..2 {
        let set = per_dimension_paths(data, axis, config)?;
        let (lo, hi) = config.resolve_bounds(axis, data.axis(axis))?;
        let (slot, uniq) = distinct_sets(&set.pooled_knots);
        bases.push(
            uniq.iter()
                .map(|k| AugmentedKnotVector::new(k, q + 1, lo, hi))
                .collect::<Result<Vec<_>>>()?,
        );
        slots.push(slot);
    }
    let search = KnotSetSearch::run(slots, &bases, |b| match ebic_2d_with(config.ebic_form, data, &b[0], &b[1], q) {
        Ok(c) => Ok(Some(FittedTensorModel {
            knots: b.to_vec(),
            gamma: c.gamma.transpose().iter().copied().collect(),
            q,
            ebic: c.ebic,
            ss: c.ss,
            selected: vec![],
            rank_deficient: c.rank_deficient,
        })),
        Err(Error::Overparameterized { .. }) => Ok(None),
        Err(e) => Err(e),
    })?;
    let skipped = search.skipped();
    if skipped > 0 {
        log::info!("skipped {skipped} knot-set pairs with more coefficients than observations");
    }
    log::debug!(
        "grid fit: {:?} entries, {:?} distinct knot sets; entries ordered strongest penalty first",
        search.entry_counts(),
        search.distinct_counts()
    );
    Ok(search)
}

/// Full 2D fit: per-axis candidate sets, then the best EBIC over all pairs.
///
/// Ties go to fewer coefficients, then the stronger first-axis penalty, then
/// the stronger second-axis penalty.
pub fn fit_2d(data: &GridDataset, config: &FitConfig) -> Result<FittedTensorModel> {
    grid_search(data, config)?.best()
}
