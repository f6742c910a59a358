//! Synthetic benchmarks: ground-truth functions, nested noisy samples and a
//! replication harness that writes one CSV row per (n, replication) cell.
//!
//! Every replication owns one random stream. Sample points are drawn once in
//! a fixed random order and each point keeps the same noise draw, so the
//! sample at a larger `n` always contains the sample at a smaller one.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clusterext::{scattered_search, ScatteredDataset};
use crate::error::{Error, Result};
use crate::knotsel1d::{fit_1d_path, FitConfig};
use crate::metrics::{cartesian, directed_hausdorff, normalized_sup_norm, unit_axis, EvaluationGrid};
use crate::splinekit::{design_matrix, AugmentedKnotVector};
use crate::tensorfit::{grid_search, FittedTensorModel, GridDataset, KnotSetSearch};

/// Reference-grid points per axis.
pub const REFERENCE_RESOLUTION: usize = 201;

pub const F1_KNOTS: [f64; 3] = [0.1, 0.27, 0.745];
pub const F2_KNOTS_1: [f64; 2] = [0.24, 0.545];
pub const F2_KNOTS_2: [f64; 2] = [0.395, 0.645];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionName {
    F1,
    F2,
    /// Smooth 2D surface without knots; not a spline.
    Smooth2d,
    /// Smooth 3D surface without knots; not a spline.
    Smooth3d,
}

impl FunctionName {
    pub const ALL: [FunctionName; 4] = [Self::F1, Self::F2, Self::Smooth2d, Self::Smooth3d];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::F1 => "f1",
            Self::F2 => "f2",
            Self::Smooth2d => "smooth2d",
            Self::Smooth3d => "smooth3d",
        }
    }
}

impl fmt::Display for FunctionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown function '{s}' (expected f1, f2, smooth2d or smooth3d)")))
    }
}

/// A known function on `[0, 1]^d`.
#[derive(Debug, Clone)]
pub struct SyntheticFunction {
    name: FunctionName,
    true_knots: Vec<Vec<f64>>,
    bases: Vec<AugmentedKnotVector>,
}

impl SyntheticFunction {
    pub fn new(name: FunctionName) -> Self {
        let quadratic = |k: &[f64]| AugmentedKnotVector::new(k, 3, 0.0, 1.0).expect("valid built-in knots");
        let (true_knots, bases) = match name {
            FunctionName::F1 => (vec![F1_KNOTS.to_vec()], vec![quadratic(&F1_KNOTS)]),
            FunctionName::F2 => (
                vec![F2_KNOTS_1.to_vec(), F2_KNOTS_2.to_vec()],
                vec![quadratic(&F2_KNOTS_1), quadratic(&F2_KNOTS_2)],
            ),
            FunctionName::Smooth2d => (vec![vec![]; 2], vec![]),
            FunctionName::Smooth3d => (vec![vec![]; 3], vec![]),
        };
        Self { name, true_knots, bases }
    }

    pub fn name(&self) -> FunctionName {
        self.name
    }

    pub fn dims(&self) -> usize {
        self.true_knots.len()
    }

    /// Knot locations per dimension; empty for the smooth functions.
    pub fn true_knots(&self) -> &[Vec<f64>] {
        &self.true_knots
    }

    /// Value at `x ∈ [0, 1]^d`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dims(), "{} takes {} coordinates", self.name, self.dims());
        match self.name {
            // -2.5 B_1 + 4.3 B_4 (quadratic, 0-based)
            FunctionName::F1 => {
                let (first, b) = self.bases[0].nonzero_basis(x[0]).expect("x in [0, 1]");
                let at = |i: usize| if (first..first + b.len()).contains(&i) { b[i - first] } else { 0.0 };
                -2.5 * at(1) + 4.3 * at(4)
            }
            // 2.3 B1_2 B2_2 - 1.5 B1_3 B2_4
            FunctionName::F2 => {
                let b1 = self.bases[0].eval_all(x[0]).expect("x1 in [0, 1]");
                let b2 = self.bases[1].eval_all(x[1]).expect("x2 in [0, 1]");
                2.3 * b1[2] * b2[2] - 1.5 * b1[3] * b2[4]
            }
            // Saturating rise along x1, decay along x2.
            FunctionName::Smooth2d => (1.0 - (-4.0 * x[0]).exp()) * (-1.5 * x[1]).exp() + 0.3 * x[0] * x[1],
            FunctionName::Smooth3d => {
                (1.0 - (-4.0 * x[0]).exp()) * (-1.5 * x[1]).exp() * (1.0 + 0.5 * (1.0 - (-3.0 * x[2]).exp()))
            }
        }
    }
}

/// How observation locations are drawn from the reference grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Per axis: the true knots, then uniformly drawn reference values.
    KnotsInSample,
    /// Per axis: uniformly drawn reference values.
    UniformRandom,
    /// Points drawn uniformly from the full reference grid, no grid structure.
    Scattered,
}

impl SamplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::KnotsInSample => "knots-in-sample",
            Self::UniformRandom => "uniform-random",
            Self::Scattered => "scattered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub function: FunctionName,
    pub sigma: f64,
    pub replications: usize,
    /// Points per axis for per-axis modes, total points for scattered mode.
    pub schedule: Vec<usize>,
    pub mode: SamplingMode,
    /// Fit settings; the bounds are always replaced by `[0, 1]` per axis.
    pub fit: FitConfig,
    pub seed: u64,
    pub resolution: usize,
    /// Fill the `wall_ms` column. Off by default so that reruns are
    /// byte-identical.
    pub record_timings: bool,
}

pub const EXPERIMENTS: [&str; 5] = ["f1-noise", "f1-sampling", "f2-noise", "f2-sampling", "f2-cluster"];

impl ExperimentConfig {
    /// Named protocols. `sigma` defaults to 0.1 (`f1-noise`), 0.05
    /// (`f1-sampling`) or 0.01 (the `f2` ones).
    pub fn preset(name: &str, sigma: Option<f64>, replications: usize, seed: u64) -> Result<Self> {
        let line: Vec<usize> = [7, 10].into_iter().chain((2..=10).map(|k| 10 * k)).collect();
        let axis = vec![7, 10, 20, 30, 40];
        let (function, mode, schedule, default_sigma) = match name {
            "f1-noise" => (FunctionName::F1, SamplingMode::KnotsInSample, line, 0.1),
            "f1-sampling" => (FunctionName::F1, SamplingMode::UniformRandom, line, 0.05),
            "f2-noise" => (FunctionName::F2, SamplingMode::KnotsInSample, axis, 0.01),
            "f2-sampling" => (FunctionName::F2, SamplingMode::UniformRandom, axis, 0.01),
            "f2-cluster" => (FunctionName::F2, SamplingMode::Scattered, vec![400, 900, 1600], 0.01),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown experiment '{name}'; valid names: {}",
                    EXPERIMENTS.join(", ")
                )))
            }
        };
        let config = Self {
            function,
            sigma: sigma.unwrap_or(default_sigma),
            replications,
            schedule,
            mode,
            fit: FitConfig::default(),
            seed,
            resolution: REFERENCE_RESOLUTION,
            record_timings: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("at least one replication is required".into()));
        }
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!("schedule must be non-empty and increasing: {:?}", self.schedule)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if self.resolution < 2 {
            return Err(Error::InvalidArgument("reference resolution must be at least 2".into()));
        }
        let dims = SyntheticFunction::new(self.function).dims();
        if dims == 1 && self.mode == SamplingMode::Scattered {
            return Err(Error::InvalidArgument("scattered sampling needs at least two dimensions".into()));
        }
        if dims > 2 && self.mode != SamplingMode::Scattered {
            return Err(Error::InvalidArgument(format!("{dims}-d functions support scattered sampling only")));
        }
        let limit = match self.mode {
            SamplingMode::Scattered => self.resolution.pow(dims as u32),
            _ => self.resolution,
        };
        let largest = *self.schedule.last().unwrap();
        if largest > limit {
            return Err(Error::InvalidArgument(format!("n = {largest} exceeds the {limit} reference points")));
        }
        Ok(())
    }

    /// Effective configuration as `key=value` pairs, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let schedule: Vec<String> = self.schedule.iter().map(usize::to_string).collect();
        vec![
            ("function".into(), self.function.to_string()),
            ("mode".into(), self.mode.as_str().into()),
            ("sigma".into(), self.sigma.to_string()),
            ("replications".into(), self.replications.to_string()),
            ("schedule".into(), schedule.join(";")),
            ("q".into(), self.fit.q.to_string()),
            ("grid_size".into(), self.fit.path.grid_size.to_string()),
            ("lambda_min_ratio".into(), self.fit.path.lambda_min_ratio.to_string()),
            ("tol".into(), self.fit.path.tol.to_string()),
            ("max_steps".into(), self.fit.path.max_steps.to_string()),
            ("zero_threshold".into(), self.fit.zero_threshold.to_string()),
            ("ebic_form".into(), self.fit.ebic_form.as_str().into()),
            ("k_max".into(), self.fit.k_max.map(|k| k.to_string()).unwrap_or_else(|| "n".into())),
            ("seed".into(), self.seed.to_string()),
            ("resolution".into(), self.resolution.to_string()),
            ("generator".into(), "chacha8".into()),
        ]
    }

    fn fit_config(&self, dims: usize) -> FitConfig {
        FitConfig { bounds: Some(vec![(0.0, 1.0); dims]), ..self.fit.clone() }
    }
}

/// One sample, in the layout its fitting method expects.
#[derive(Debug, Clone, PartialEq)]
pub enum Observations {
    Line { points: Vec<f64>, responses: Vec<f64> },
    Grid(GridDataset),
    Scattered(ScatteredDataset),
}

fn replication_rng(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

/// Reference indices for one axis in draw order: the forced ones first, then
/// a uniform random order of the rest.
fn axis_order(rng: &mut ChaCha8Rng, resolution: usize, forced: &[usize], count: usize) -> Vec<usize> {
    let mut order = forced.to_vec();
    let pool: Vec<usize> = (0..resolution).filter(|i| !forced.contains(i)).collect();
    let take = count.saturating_sub(forced.len()).min(pool.len());
    order.extend(index::sample(rng, pool.len(), take).into_iter().map(|k| pool[k]));
    order
}

fn knot_indices(knots: &[f64], axis: &[f64]) -> Result<Vec<usize>> {
    knots
        .iter()
        .map(|&t| {
            let i = (t * (axis.len() - 1) as f64).round() as usize;
            if axis.get(i).is_some_and(|&a| (a - t).abs() < 1e-12) {
                Ok(i)
            } else {
                Err(Error::InvalidArgument(format!("knot {t} is not on the {}-point reference grid", axis.len())))
            }
        })
        .collect()
}

/// Draws for one replication; samples for every `n` are prefixes.
struct ReplicationDraw {
    /// Reference indices per axis (or flat indices when scattered), in draw order.
    orders: Vec<Vec<usize>>,
    /// Noise per drawn position; a `n₁ × n₂` matrix for grids.
    noise: Vec<f64>,
    stride: usize,
}

impl ReplicationDraw {
    fn new(config: &ExperimentConfig, f: &SyntheticFunction, replication: usize) -> Result<Self> {
        let mut rng = replication_rng(config.seed, replication);
        let n_max = *config.schedule.last().expect("validated schedule");
        let axis = unit_axis(config.resolution);
        let orders = match config.mode {
            SamplingMode::Scattered => {
                let total = config.resolution.pow(f.dims() as u32);
                vec![index::sample(&mut rng, total, n_max).into_vec()]
            }
            mode => (0..f.dims())
                .map(|j| {
                    let forced = match mode {
                        SamplingMode::KnotsInSample => knot_indices(&f.true_knots()[j], &axis)?,
                        _ => vec![],
                    };
                    if forced.len() > config.schedule[0] {
                        return Err(Error::InvalidArgument(format!(
                            "n = {} cannot hold the {} true knots",
                            config.schedule[0],
                            forced.len()
                        )));
                    }
                    Ok(axis_order(&mut rng, config.resolution, &forced, n_max))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let count: usize = orders.iter().map(Vec::len).product();
        let normal = Normal::new(0.0, config.sigma.max(0.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let noise = (0..count)
            .map(|_| if config.sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 })
            .collect();
        let stride = orders.last().map_or(0, Vec::len);
        Ok(Self { orders, noise, stride })
    }
}

fn scattered_point(mut flat: usize, resolution: usize, dims: usize, axis: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; dims];
    for c in p.iter_mut().rev() {
        *c = axis[flat % resolution];
        flat /= resolution;
    }
    p
}

/// The sample of size `n` for `replication`.
pub fn sample_observations(config: &ExperimentConfig, n: usize, replication: usize) -> Result<Observations> {
    config.validate()?;
    let f = SyntheticFunction::new(config.function);
    let draw = ReplicationDraw::new(config, &f, replication)?;
    observations_from(config, &f, &draw, n)
}

fn observations_from(config: &ExperimentConfig, f: &SyntheticFunction, draw: &ReplicationDraw, n: usize) -> Result<Observations> {
    let axis = unit_axis(config.resolution);
    if draw.orders.iter().any(|o| n > o.len()) {
        return Err(Error::InvalidArgument(format!("n = {n} exceeds the drawn sample")));
    }
    match (config.mode, f.dims()) {
        (SamplingMode::Scattered, d) => {
            let points: Vec<Vec<f64>> =
                draw.orders[0][..n].iter().map(|&k| scattered_point(k, config.resolution, d, &axis)).collect();
            let responses = points.iter().zip(&draw.noise).map(|(p, e)| f.evaluate(p) + e).collect();
            Ok(Observations::Scattered(ScatteredDataset::new(points, responses)?))
        }
        (_, 1) => {
            let mut pairs: Vec<(f64, f64)> = draw.orders[0][..n]
                .iter()
                .zip(&draw.noise)
                .map(|(&i, e)| (axis[i], f.evaluate(&[axis[i]]) + e))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (points, responses) = pairs.into_iter().unzip();
            Ok(Observations::Line { points, responses })
        }
        (_, 2) => {
            // Sort each axis but keep each point's draw position for its noise.
            let sorted = |o: &[usize]| {
                let mut v: Vec<(usize, usize)> = o[..n].iter().enumerate().map(|(pos, &i)| (i, pos)).collect();
                v.sort_unstable();
                v
            };
            let (a1, a2) = (sorted(&draw.orders[0]), sorted(&draw.orders[1]));
            let mut responses = Vec::with_capacity(n * n);
            for &(i, p) in &a1 {
                for &(j, r) in &a2 {
                    responses.push(f.evaluate(&[axis[i], axis[j]]) + draw.noise[p * draw.stride + r]);
                }
            }
            let x1 = a1.iter().map(|&(i, _)| axis[i]).collect();
            let x2 = a2.iter().map(|&(j, _)| axis[j]).collect();
            Ok(Observations::Grid(GridDataset::new(x1, x2, responses)?))
        }
        (_, d) => Err(Error::InvalidArgument(format!("per-axis sampling is not available for {d}-d functions"))),
    }
}

/// Metrics for one (n, replication) cell. `None` prints as an empty field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub function: FunctionName,
    pub n: usize,
    pub replication: usize,
    pub sigma: f64,
    pub q: usize,
    /// The selected penalty in 1D; the selected equivalent-penalty entry
    /// per dimension otherwise.
    pub lambda_ebic: Vec<f64>,
    /// Selected knot count per dimension.
    pub k_lambda: Vec<usize>,
    /// `sup_{t̂} inf_{t} |t - t̂|`, worst dimension.
    pub d1: Option<f64>,
    /// `sup_{t} inf_{t̂} |t - t̂|`, worst dimension.
    pub d2: Option<f64>,
    pub supnorm_ebic: Option<f64>,
    pub supnorm_opt: Option<f64>,
    pub wall_ms: Option<f64>,
    pub error: Option<String>,
}

pub const CSV_HEADER: [&str; 12] =
    ["function", "n", "replication", "sigma", "q", "lambda_ebic", "k_lambda", "d1", "d2", "supnorm_ebic", "supnorm_opt", "wall_ms"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn joined<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

impl CellResult {
    fn record(&self) -> [String; 12] {
        [
            self.function.to_string(),
            self.n.to_string(),
            self.replication.to_string(),
            self.sigma.to_string(),
            self.q.to_string(),
            joined(&self.lambda_ebic),
            joined(&self.k_lambda),
            opt(self.d1),
            opt(self.d2),
            opt(self.supnorm_ebic),
            opt(self.supnorm_opt),
            opt(self.wall_ms),
        ]
    }
}

/// Worst directed distance over dimensions; undefined when either set is
/// empty in any dimension.
fn knot_distances(truth: &[Vec<f64>], estimate: &[&[f64]]) -> (Option<f64>, Option<f64>) {
    let mut d1 = Some(0.0_f64);
    let mut d2 = Some(0.0_f64);
    for (t, e) in truth.iter().zip(estimate) {
        let a = directed_hausdorff(t, e).ok();
        let b = directed_hausdorff(e, t).ok();
        d1 = d1.zip(a).map(|(x, y)| x.max(y));
        d2 = d2.zip(b).map(|(x, y)| x.max(y));
    }
    (d1, d2)
}

/// Values of a tensor model on the cartesian product of `axes`, last axis
/// fastest.
pub fn evaluate_on_grid(model: &FittedTensorModel, axes: &[Vec<f64>]) -> Result<Vec<f64>> {
    if model.dims() == 2 && axes.len() == 2 {
        let b1 = design_matrix(&model.knots[0], &axes[0])?;
        let b2 = design_matrix(&model.knots[1], &axes[1])?;
        let shape = model.shape();
        let gamma = DMatrix::from_row_slice(shape[0], shape[1], &model.gamma);
        let v = b1.values() * gamma * b2.values().transpose();
        return Ok(v.transpose().iter().copied().collect());
    }
    cartesian(axes).iter().map(|p| model.predict(p)).collect()
}

struct Truth {
    f: SyntheticFunction,
    axes: Vec<Vec<f64>>,
    grid: EvaluationGrid,
}

impl Truth {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let f = SyntheticFunction::new(config.function);
        let axes = vec![unit_axis(config.resolution); f.dims()];
        let grid = EvaluationGrid::from_fn(cartesian(&axes), |p| f.evaluate(p))?;
        Ok(Self { f, axes, grid })
    }
}

fn tensor_metrics(search: &KnotSetSearch, truth: &Truth, timing: Option<f64>, row: &mut CellResult) -> Result<()> {
    let best = search.best()?;
    let sup = |m: &FittedTensorModel| normalized_sup_norm(&evaluate_on_grid(m, &truth.axes)?, &truth.grid);
    let s_ebic = sup(&best)?;
    let mut s_opt = s_ebic;
    for m in search.scored() {
        s_opt = s_opt.min(sup(m)?);
    }
    let est: Vec<&[f64]> = best.knots.iter().map(|k| k.interior()).collect();
    (row.d1, row.d2) = knot_distances(truth.f.true_knots(), &est);
    row.lambda_ebic = best.selected.iter().map(|&e| e as f64).collect();
    row.k_lambda = best.knot_counts();
    row.supnorm_ebic = Some(s_ebic);
    row.supnorm_opt = Some(s_opt);
    row.wall_ms = timing;
    Ok(())
}

fn run_cell(config: &ExperimentConfig, truth: &Truth, draw: &ReplicationDraw, n: usize, replication: usize) -> CellResult {
    let mut row = CellResult {
        function: config.function,
        n,
        replication,
        sigma: config.sigma,
        q: config.fit.q,
        lambda_ebic: vec![],
        k_lambda: vec![],
        d1: None,
        d2: None,
        supnorm_ebic: None,
        supnorm_opt: None,
        wall_ms: None,
        error: None,
    };
    if let Err(e) = fill_cell(config, truth, draw, &mut row) {
        log::warn!("{} n={n} replication={replication}: {e}", config.function);
        row.error = Some(e.to_string());
    }
    row
}

fn fill_cell(config: &ExperimentConfig, truth: &Truth, draw: &ReplicationDraw, row: &mut CellResult) -> Result<()> {
    let dims = truth.f.dims();
    let fit = config.fit_config(dims);
    let obs = observations_from(config, &truth.f, draw, row.n)?;
    let start = Instant::now();
    let elapsed = |s: Instant| config.record_timings.then(|| s.elapsed().as_secs_f64() * 1e3);
    match obs {
        Observations::Line { points, responses } => {
            let path = fit_1d_path(&responses, &points, &fit)?;
            let timing = elapsed(start);
            let x = &truth.axes[0];
            let values = |m: &crate::knotsel1d::FittedSplineModel| -> Result<Vec<f64>> {
                x.iter().map(|&v| m.predict(v)).collect()
            };
            let best = path.selected();
            let s_ebic = normalized_sup_norm(&values(best)?, &truth.grid)?;
            let mut s_opt = f64::INFINITY;
            for m in &path.models {
                s_opt = s_opt.min(normalized_sup_norm(&values(m)?, &truth.grid)?);
            }
            (row.d1, row.d2) = knot_distances(truth.f.true_knots(), &[best.knots.interior()]);
            row.lambda_ebic = vec![best.lambda];
            row.k_lambda = vec![best.num_knots()];
            row.supnorm_ebic = Some(s_ebic);
            row.supnorm_opt = Some(s_opt);
            row.wall_ms = timing;
        }
        Observations::Grid(data) => {
            let search = grid_search(&data, &fit)?;
            let timing = elapsed(start);
            tensor_metrics(&search, truth, timing, row)?;
        }
        Observations::Scattered(data) => {
            let search = scattered_search(&data, &fit, config.seed)?;
            let timing = elapsed(start);
            tensor_metrics(&search, truth, timing, row)?;
        }
    }
    Ok(())
}

/// Per-`n` aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub function: FunctionName,
    pub n: usize,
    pub replications: usize,
    pub failed: usize,
    /// Median knot count per dimension.
    pub median_k: Vec<f64>,
    pub median_d1: Option<f64>,
    pub median_d2: Option<f64>,
    pub mean_supnorm_ebic: Option<f64>,
    pub mean_supnorm_opt: Option<f64>,
    pub median_wall_ms: Option<f64>,
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "function",
    "n",
    "replications",
    "failed",
    "median_k",
    "median_d1",
    "median_d2",
    "mean_supnorm_ebic",
    "mean_supnorm_opt",
    "median_wall_ms",
];

/// Median of the finite values; `None` if there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    Some(if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) })
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: ExperimentConfig,
    /// Ordered by `n`, then replication.
    pub rows: Vec<CellResult>,
}

impl Report {
    pub fn rows_at(&self, n: usize) -> impl Iterator<Item = &CellResult> {
        self.rows.iter().filter(move |r| r.n == n)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        self.config
            .schedule
            .iter()
            .map(|&n| {
                let rows: Vec<&CellResult> = self.rows_at(n).collect();
                let ok: Vec<&&CellResult> = rows.iter().filter(|r| r.error.is_none()).collect();
                let dims = ok.first().map_or(0, |r| r.k_lambda.len());
                SummaryRow {
                    function: self.config.function,
                    n,
                    replications: rows.len(),
                    failed: rows.len() - ok.len(),
                    median_k: (0..dims)
                        .filter_map(|j| median(ok.iter().map(|r| r.k_lambda[j] as f64)))
                        .collect(),
                    median_d1: median(ok.iter().filter_map(|r| r.d1)),
                    median_d2: median(ok.iter().filter_map(|r| r.d2)),
                    mean_supnorm_ebic: mean(ok.iter().filter_map(|r| r.supnorm_ebic)),
                    mean_supnorm_opt: mean(ok.iter().filter_map(|r| r.supnorm_opt)),
                    median_wall_ms: median(ok.iter().filter_map(|r| r.wall_ms)),
                }
            })
            .collect()
    }

    fn write_echo(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "# knotfit {}", env!("CARGO_PKG_VERSION"))?;
        for (k, v) in self.config.echo() {
            writeln!(out, "# {k}={v}")?;
        }
        Ok(())
    }

    /// Configuration comment lines, header, then one row per cell.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        self.write_echo(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record(r.record())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary(&self, mut out: impl Write) -> Result<()> {
        self.write_echo(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_HEADER)?;
        for s in self.summary() {
            w.write_record([
                s.function.to_string(),
                s.n.to_string(),
                s.replications.to_string(),
                s.failed.to_string(),
                joined(&s.median_k),
                opt(s.median_d1),
                opt(s.median_d2),
                opt(s.mean_supnorm_ebic),
                opt(s.mean_supnorm_opt),
                opt(s.median_wall_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every (n, replication) cell concurrently. A failing cell is logged
/// and reported with empty metrics; it does not stop the sweep.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let truth = Truth::new(config)?;
    let draws = (0..config.replications)
        .into_par_iter()
        .map(|r| ReplicationDraw::new(config, &truth.f, r))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> =
        config.schedule.iter().flat_map(|&n| (0..config.replications).map(move |r| (n, r))).collect();
    let rows = cells.par_iter().map(|&(n, r)| run_cell(config, &truth, &draws[r], n, r)).collect();
    Ok(Report { config: config.clone(), rows })
}
