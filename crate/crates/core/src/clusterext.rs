//! Knot selection for scattered observations.
//!
//! For each dimension `j`, points are grouped by k-means on their other
//! coordinates (`k = ⌊n/25⌋`). Inside a group the points roughly form a line
//! along `j`, so the 1D path applies. Knots from all groups at the same
//! equivalent penalty are pooled, clustered in 1D with the cluster count
//! picked at the elbow of the within-cluster sum of squares, and replaced by
//! the cluster medians. The final knot sets come from an EBIC search over
//! entry combinations, fitted with point-wise tensor design rows.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genlasso::solve_path_truncated;
use crate::knotsel1d::{extract_knots, ln_binomial, merge_knots, FitConfig, MIN_GAP_FRACTION};
use crate::linalg::lstsq;
use crate::penalty::trend_operator;
use crate::splinekit::AugmentedKnotVector;
use crate::tensorfit::{distinct_sets, FittedTensorModel, KnotSetSearch};

/// Points per k-means cluster used for the default cluster count.
pub const POINTS_PER_CLUSTER: usize = 25;
pub const KMEANS_MAX_ITER: usize = 100;
/// Largest knot-cluster count tried for the elbow.
pub const MAX_KNOT_CLUSTERS: usize = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteredDataset {
    points: Vec<Vec<f64>>,
    responses: Vec<f64>,
    dims: usize,
}

impl ScatteredDataset {
    pub fn new(points: Vec<Vec<f64>>, responses: Vec<f64>) -> Result<Self> {
        if points.len() != responses.len() {
            return Err(Error::DimensionMismatch(format!("{} points for {} responses", points.len(), responses.len())));
        }
        let dims = points.first().map_or(0, Vec::len);
        if dims < 2 {
            return Err(Error::InvalidArgument(format!("scattered data needs d >= 2, got {dims}")));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dims) {
            return Err(Error::DimensionMismatch(format!("point with {} coordinates in {dims}-d data", p.len())));
        }
        if points.iter().flatten().chain(&responses).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("coordinates and responses must be finite".into()));
        }
        if points.len() < POINTS_PER_CLUSTER {
            return Err(Error::InsufficientData(format!(
                "scattered data needs at least {POINTS_PER_CLUSTER} points, got {}",
                points.len()
            )));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
        if let Some(w) = order.windows(2).find(|w| points[w[0]] == points[w[1]]) {
            return Err(Error::DuplicatePoint(format!("{:?}", points[w[0]])));
        }
        Ok(Self { points, responses, dims })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[j]).collect()
    }

    /// Number of distinct values of coordinate `j`.
    pub fn distinct_values(&self, j: usize) -> usize {
        let mut v = self.coordinate(j);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `⌊n / 25⌋`, at least one.
pub fn default_cluster_count(n: usize) -> usize {
    (n / POINTS_PER_CLUSTER).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Within-cluster sum of squares.
    pub wss: f64,
    pub iterations: usize,
}

/// Lloyd's algorithm with farthest-point seeding. The first center is drawn
/// with `seed`; each further one is the point farthest from those chosen.
/// A cluster that empties is re-seeded with the point farthest from its
/// current center.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k-means needs 1 <= k <= n, got k={k}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let far = argmax(&nearest);
        centers.push(points[far].clone());
        let c = centers.last().unwrap();
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }

    let mut labels = vec![usize::MAX; n];
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = nearest_center(p, &centers);
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        iterations += 1;
        // Re-seed empty clusters before recomputing means.
        loop {
            let mut counts = vec![0usize; k];
            for &l in &labels {
                counts[l] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
            let dists: Vec<f64> = points.iter().zip(&labels).map(|(p, &l)| dist2(p, &centers[l])).collect();
            let far = argmax(&dists);
            centers[empty] = points[far].clone();
            labels[far] = empty;
            changed = true;
        }
        let dims = points[0].len();
        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, (s, &m)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            *c = s.iter().map(|v| v / m as f64).collect();
        }
        if !changed || iterations >= KMEANS_MAX_ITER {
            break;
        }
    }
    let wss = points.iter().zip(&labels).map(|(p, &l)| dist2(p, &centers[l])).sum();
    Ok(KMeans { labels, centers, wss, iterations })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn nearest_center(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (c, ctr) in centers.iter().enumerate() {
        let d = dist2(p, ctr);
        if d < bd {
            bd = d;
            best = c;
        }
    }
    best
}

/// Optimal 1D k-means by dynamic programming over sorted values. Returns the
/// cluster boundaries (`starts[c]` is the first index of cluster `c`) and the
/// within-cluster sum of squares.
pub fn kmeans_1d(sorted: &[f64], k: usize) -> (Vec<usize>, f64) {
    let n = sorted.len();
    assert!(k >= 1 && k <= n, "1 <= k <= n required");
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    let origin = sorted[n / 2];
    for (i, &v) in sorted.iter().enumerate() {
        let v = v - origin;
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    // Sum of squares of sorted[a..b] about its mean.
    let cost = |a: usize, b: usize| {
        let m = (b - a) as f64;
        let s = s1[b] - s1[a];
        (s2[b] - s2[a] - s * s / m).max(0.0)
    };
    let mut dp = vec![vec![f64::INFINITY; n + 1]; k + 1];
    let mut cut = vec![vec![0usize; n + 1]; k + 1];
    dp[0][0] = 0.0;
    for c in 1..=k {
        for b in c..=n {
            for a in (c - 1)..b {
                let v = dp[c - 1][a] + cost(a, b);
                if v < dp[c][b] {
                    dp[c][b] = v;
                    cut[c][b] = a;
                }
            }
        }
    }
    let mut starts = vec![0; k];
    let mut b = n;
    for c in (1..=k).rev() {
        starts[c - 1] = cut[c][b];
        b = cut[c][b];
    }
    // The prefix-sum costs cancel badly on tight clusters; report the
    // two-pass sum of squares of the chosen segments instead.
    let wss = (0..k)
        .map(|c| {
            let seg = &sorted[starts[c]..starts.get(c + 1).copied().unwrap_or(n)];
            let mean = seg.iter().sum::<f64>() / seg.len() as f64;
            seg.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        })
        .sum();
    (starts, wss)
}

/// Position (1-based cluster count) of the largest second difference of a
/// within-sum-of-squares curve; ties go to the smaller count. Curves shorter
/// than three give 1.
pub fn elbow(wss_curve: &[f64]) -> usize {
    if wss_curve.len() < 3 {
        return 1;
    }
    let mut best = 2;
    let mut best_v = f64::NEG_INFINITY;
    for c in 2..wss_curve.len() {
        let v = wss_curve[c - 2] - 2.0 * wss_curve[c - 1] + wss_curve[c];
        if v > best_v {
            best_v = v;
            best = c;
        }
    }
    best
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Knot clustering for one dimension at one equivalent penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotClusterSummary {
    pub dimension: usize,
    /// Pooled knots across groups, with repeats, sorted.
    pub raw_knots: Vec<f64>,
    pub cluster_count: usize,
    pub representatives: Vec<f64>,
    pub wss_curve: Vec<f64>,
}

impl KnotClusterSummary {
    /// Clusters `raw_knots` and keeps the medians.
    pub fn from_raw(dimension: usize, mut raw_knots: Vec<f64>, lower: f64, upper: f64) -> Self {
        raw_knots.sort_by(f64::total_cmp);
        if raw_knots.is_empty() {
            return Self { dimension, raw_knots, cluster_count: 0, representatives: vec![], wss_curve: vec![] };
        }
        let max_c = MAX_KNOT_CLUSTERS.min(raw_knots.len());
        let wss_curve: Vec<f64> = (1..=max_c).map(|c| kmeans_1d(&raw_knots, c).1).collect();
        let cluster_count = elbow(&wss_curve);
        let (starts, _) = kmeans_1d(&raw_knots, cluster_count);
        let mut cand: Vec<(f64, f64)> = (0..cluster_count)
            .map(|c| {
                let end = starts.get(c + 1).copied().unwrap_or(raw_knots.len());
                let members = &raw_knots[starts[c]..end];
                (median(members), members.len() as f64)
            })
            .collect();
        let representatives = merge_knots(&mut cand, (upper - lower) * MIN_GAP_FRACTION, lower, upper);
        Self { dimension, raw_knots, cluster_count, representatives, wss_curve }
    }
}

/// Candidate knot sets for one dimension, one summary per equivalent penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionKnots {
    pub dimension: usize,
    pub s_min: usize,
    pub entries: Vec<KnotClusterSummary>,
    pub groups: usize,
    pub skipped_groups: usize,
}

/// Knots per penalty along one group's path.
type GroupPath = Vec<(f64, Vec<f64>)>;

/// Sorted distinct `x_j` values of a group with the responses at equal
/// `x_j` averaged.
fn collapse(mut pairs: Vec<(f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut xs: Vec<f64> = Vec::with_capacity(pairs.len());
    let mut ys: Vec<f64> = Vec::with_capacity(pairs.len());
    let mut count = 0usize;
    for (x, y) in pairs {
        if xs.last() == Some(&x) {
            count += 1;
            let last = ys.last_mut().unwrap();
            *last += (y - *last) / count as f64;
        } else {
            xs.push(x);
            ys.push(y);
            count = 1;
        }
    }
    (xs, ys)
}

pub fn knots_per_dimension(data: &ScatteredDataset, j: usize, config: &FitConfig, seed: u64) -> Result<DimensionKnots> {
    let d = data.dims();
    if j >= d {
        return Err(Error::InvalidArgument(format!("dimension {j} out of range for {d}-d data")));
    }
    let q = config.q;
    let coord = data.coordinate(j);
    let (lower, upper) = config.resolve_bounds(j, &coord)?;
    let others: Vec<Vec<f64>> =
        data.points().iter().map(|p| p.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, v)| *v).collect()).collect();
    let k = default_cluster_count(data.len());
    let km = kmeans(&others, k, seed)?;
    let mut groups: Vec<Vec<(f64, f64)>> = vec![Vec::new(); k];
    for ((&l, &x), &y) in km.labels.iter().zip(&coord).zip(data.responses()) {
        groups[l].push((x, y));
    }
    let results: Vec<Option<GroupPath>> = groups
        .into_par_iter()
        .enumerate()
        .map(|(g, pairs)| {
            let (xs, ys) = collapse(pairs);
            if xs.len() < q + 2 {
                log::info!("dimension {}: group {g} has {} distinct values, needs {}; skipped", j + 1, xs.len(), q + 2);
                return Ok(None);
            }
            let op = trend_operator(&xs, q)?;
            let path = solve_path_truncated(&ys, &op, &config.path)?;
            let line = path
                .solutions
                .iter()
                .map(|s| extract_knots(s, &xs, config.zero_threshold).map(|sel| (s.lambda, sel.knots)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Some(line))
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped_groups = results.iter().filter(|r| r.is_none()).count();
    let lines: Vec<Vec<(f64, Vec<f64>)>> = results.into_iter().flatten().collect();
    if lines.is_empty() {
        return Err(Error::InsufficientData(format!(
            "every group is too small along dimension {} (degree {q} needs {} distinct values)",
            j + 1,
            q + 2
        )));
    }
    let s_min = lines.iter().map(Vec::len).min().unwrap_or(0);
    let entries = (0..s_min)
        .into_par_iter()
        .map(|e| {
            let raw: Vec<f64> = lines
                .iter()
                .flat_map(|l| l[e].1.iter().copied())
                .filter(|t| *t > lower && *t < upper)
                .collect();
            KnotClusterSummary::from_raw(j, raw, lower, upper)
        })
        .collect();
    Ok(DimensionKnots { dimension: j, s_min, entries, groups: k, skipped_groups })
}

/// Normal-equations accumulator for point-wise tensor design rows, falling
/// back to a dense orthogonal solve when the Gram matrix is ill-conditioned.
struct TensorDesign<'a> {
    bases: &'a [AugmentedKnotVector],
    shape: Vec<usize>,
    strides: Vec<usize>,
}

impl<'a> TensorDesign<'a> {
    fn new(bases: &'a [AugmentedKnotVector]) -> Self {
        let shape: Vec<usize> = bases.iter().map(|b| b.num_basis()).collect();
        let mut strides = vec![1usize; shape.len()];
        for j in (0..shape.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * shape[j + 1];
        }
        Self { bases, shape, strides }
    }

    fn params(&self) -> usize {
        self.shape.iter().product()
    }

    /// Nonzero `(column, value)` pairs of the design row at `x`.
    fn row(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        let mut out: Vec<(usize, f64)> = vec![(0, 1.0)];
        for (j, (b, &v)) in self.bases.iter().zip(x).enumerate() {
            let (first, vals) = b.nonzero_basis(v)?;
            out = out
                .iter()
                .flat_map(|&(c, w)| vals.iter().enumerate().map(move |(t, &bv)| (c + (first + t) * self.strides[j], w * bv)))
                .collect();
        }
        Ok(out)
    }

    fn dense(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(points.len(), self.params());
        for (i, p) in points.iter().enumerate() {
            for (c, v) in self.row(p)? {
                m[(i, c)] += v;
            }
        }
        Ok(m)
    }

    /// Least-squares coefficients, residual sum of squares and a rank flag.
    fn solve(&self, points: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64, bool)> {
        let p = self.params();
        let rows = points.iter().map(|x| self.row(x)).collect::<Result<Vec<_>>>()?;
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        for (row, &yi) in rows.iter().zip(y) {
            for &(a, va) in row {
                rhs[a] += va * yi;
                for &(b, vb) in row {
                    gram[(a, b)] += va * vb;
                }
            }
        }
        let chol = gram.clone().cholesky().filter(|c| {
            let diag = c.l_dirty().diagonal();
            let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
            lo > 1e-6 * hi
        });
        let (gamma, rank_deficient) = match chol {
            Some(c) => (c.solve(&rhs).iter().copied().collect::<Vec<_>>(), false),
            None => {
                let b = self.dense(points)?;
                let sol = lstsq(&b, &DMatrix::from_column_slice(y.len(), 1, y));
                (sol.x.column(0).iter().copied().collect(), sol.rank_deficient())
            }
        };
        let ss = rows
            .iter()
            .zip(y)
            .map(|(row, &yi)| {
                let f: f64 = row.iter().map(|&(c, v)| v * gamma[c]).sum();
                (yi - f) * (yi - f)
            })
            .sum();
        Ok((gamma, ss, rank_deficient))
    }
}

/// Least-squares tensor spline on given knot vectors, scored by the
/// d-dimensional EBIC. `None` when there are more coefficients than points.
pub fn fit_tensor_scattered(
    data: &ScatteredDataset,
    bases: &[AugmentedKnotVector],
    config: &FitConfig,
) -> Result<Option<FittedTensorModel>> {
    let design = TensorDesign::new(bases);
    let params = design.params();
    let n = data.len();
    if params > n {
        return Ok(None);
    }
    let (gamma, ss, rank_deficient) = design.solve(data.points(), data.responses())?;
    let q = config.q;
    let space: usize = (0..data.dims()).map(|j| q + data.distinct_values(j) + 1).product();
    let tss: f64 = data.responses().iter().map(|v| v * v).sum();
    let ebic = config.ebic_form.fit_term(ss, n, tss) + params as f64 * (n as f64).ln() + 2.0 * ln_binomial(space, params);
    Ok(Some(FittedTensorModel { knots: bases.to_vec(), gamma, q, ebic, ss, selected: vec![], rank_deficient }))
}

/// Per-dimension candidates with every combination of knot sets scored.
pub fn scattered_search(data: &ScatteredDataset, config: &FitConfig, seed: u64) -> Result<KnotSetSearch> {
    let q = config.q;
    let mut slots = Vec::with_capacity(data.dims());
    let mut bases = Vec::with_capacity(data.dims());
    for j in 0..data.dims() {
        let dk = knots_per_dimension(data, j, config, seed)?;
        let sets: Vec<Vec<f64>> = dk.entries.iter().map(|e| e.representatives.clone()).collect();
        let (slot, uniq) = distinct_sets(&sets);
        let (lo, hi) = config.resolve_bounds(j, &data.coordinate(j))?;
        let b = uniq
            .iter()
            .map(|k| AugmentedKnotVector::new(k, q + 1, lo, hi))
            .collect::<Result<Vec<_>>>()?;
        log::info!(
            "dimension {}: {} groups ({} skipped), {} entries, {} distinct knot sets",
            j + 1,
            dk.groups,
            dk.skipped_groups,
            dk.s_min,
            b.len()
        );
        slots.push(slot);
        bases.push(b);
    }
    let search = KnotSetSearch::run(slots, &bases, |b| fit_tensor_scattered(data, b, config))?;
    let skipped = search.skipped();
    if skipped > 0 {
        log::info!("skipped {skipped} knot-set combinations with more coefficients than points");
    }
    Ok(search)
}

/// Full scattered fit: per-dimension candidates, then the best EBIC over all
/// entry combinations. Ties go to fewer coefficients, then to stronger
/// penalties, earlier dimensions first.
pub fn fit_nd(data: &ScatteredDataset, config: &FitConfig, seed: u64) -> Result<FittedTensorModel> {
    scattered_search(data, config, seed)?.best()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn elbow_examples() {
        assert_eq!(elbow(&[100.0, 10.0, 9.0, 8.5]), 2);
        assert_eq!(elbow(&[5.0, 4.0, 3.0, 2.0, 1.0]), 2);
        assert_eq!(elbow(&[50.0, 40.0, 5.0, 4.0, 3.8]), 3);
        assert_eq!(elbow(&[3.0, 1.0]), 1);
    }

    #[test]
    fn medians_of_obvious_clusters() {
        let mut raw = vec![0.49, 0.50, 0.51, 0.90];
        let (starts, _) = kmeans_1d(&raw, 2);
        assert_eq!(starts, vec![0, 3]);
        raw.reverse();
        let s = KnotClusterSummary::from_raw(0, raw, 0.0, 1.0);
        assert_eq!(s.wss_curve.len(), 4);
        let s2 = KnotClusterSummary { cluster_count: 2, ..s.clone() };
        assert_eq!(s2.cluster_count, 2);
        let (starts, _) = kmeans_1d(&s.raw_knots, 2);
        let med: Vec<f64> = vec![median(&s.raw_knots[starts[0]..starts[1]]), median(&s.raw_knots[starts[1]..])];
        assert_eq!(med, vec![0.50, 0.90]);
    }

    #[test]
    fn dp_wss_is_non_increasing() {
        let v = [0.1, 0.12, 0.3, 0.31, 0.33, 0.7, 0.71, 0.9];
        let curve: Vec<f64> = (1..=v.len()).map(|c| kmeans_1d(&v, c).1).collect();
        assert!(curve.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert_abs_diff_eq!(curve[v.len() - 1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kmeans_separates_clouds() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(vec![0.0 + 0.01 * i as f64, 0.0]);
            pts.push(vec![5.0 + 0.01 * i as f64, 5.0]);
        }
        let km = kmeans(&pts, 2, 3).unwrap();
        for i in 0..10 {
            assert_eq!(km.labels[2 * i], km.labels[0]);
            assert_eq!(km.labels[2 * i + 1], km.labels[1]);
        }
        assert_ne!(km.labels[0], km.labels[1]);
        assert!(kmeans(&pts, 1, 0).unwrap().labels.iter().all(|&l| l == 0));
        assert!(kmeans(&pts, 0, 0).is_err());
    }

    #[test]
    fn default_k() {
        assert_eq!(default_cluster_count(1600), 64);
        assert_eq!(default_cluster_count(30), 1);
    }

    #[test]
    fn duplicates_are_averaged() {
        let (x, y) = collapse(vec![(0.5, 1.0), (0.1, 2.0), (0.5, 3.0)]);
        assert_eq!(x, vec![0.1, 0.5]);
        assert_eq!(y, vec![2.0, 2.0]);
    }

    #[test]
    fn rejects_duplicate_points() {
        let mut pts: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, 0.0]).collect();
        pts[5] = pts[4].clone();
        assert!(matches!(ScatteredDataset::new(pts, vec![0.0; 30]), Err(Error::DuplicatePoint(_))));
    }
}
