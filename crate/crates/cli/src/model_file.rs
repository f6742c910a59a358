//! Versioned JSON model files.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use knotfit::knotsel1d::{FitConfig, FittedSplineModel};
use knotfit::splinekit::AugmentedKnotVector;
use knotfit::tensorfit::FittedTensorModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::write_atomic;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    /// One-dimensional path.
    Line,
    /// Tensor fit on a full grid.
    Grid,
    /// Clustered fit on scattered points.
    Cluster,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Line => "line",
            Self::Grid => "grid",
            Self::Cluster => "cluster",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    /// Basis order (degree + 1).
    pub order: usize,
    pub lower: f64,
    pub upper: f64,
    /// Interior knots.
    pub knots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub method: FitMethod,
    pub observations: usize,
    /// Selected penalty, 1D only.
    pub lambda: Option<f64>,
    /// Selected equivalent-penalty entry per dimension, multi-d only.
    pub selected_entries: Vec<usize>,
    pub ebic: f64,
    pub ss: f64,
    pub rank_deficient: bool,
    pub seed: Option<u64>,
    pub config: FitConfig,
    /// SHA-256 of the JSON-encoded `config`.
    pub config_hash: String,
}

impl Provenance {
    pub fn new(method: FitMethod, observations: usize, config: &FitConfig, seed: Option<u64>) -> Result<Self> {
        Ok(Self {
            tool: "knotfit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            method,
            observations,
            lambda: None,
            selected_entries: vec![],
            ebic: f64::NAN,
            ss: f64::NAN,
            rank_deficient: false,
            seed,
            config: config.clone(),
            config_hash: config_hash(config)?,
        })
    }
}

pub fn config_hash(config: &FitConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Tensor-product spline with its knot vectors and coefficients
/// (row-major, last dimension fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub dimension: usize,
    pub axes: Vec<AxisSpec>,
    pub shape: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub provenance: Provenance,
}

impl ModelFile {
    pub fn from_tensor(model: &FittedTensorModel, mut provenance: Provenance) -> Self {
        provenance.selected_entries = model.selected.clone();
        provenance.ebic = model.ebic;
        provenance.ss = model.ss;
        provenance.rank_deficient = model.rank_deficient;
        Self {
            schema_version: SCHEMA_VERSION,
            dimension: model.dims(),
            axes: model.knots.iter().map(axis_spec).collect(),
            shape: model.shape(),
            coefficients: model.gamma.clone(),
            provenance,
        }
    }

    pub fn from_spline(model: &FittedSplineModel, mut provenance: Provenance) -> Self {
        provenance.lambda = Some(model.lambda);
        provenance.ebic = model.ebic;
        provenance.ss = model.ss;
        provenance.rank_deficient = model.rank_deficient;
        Self {
            schema_version: SCHEMA_VERSION,
            dimension: 1,
            axes: vec![axis_spec(&model.knots)],
            shape: vec![model.knots.num_basis()],
            coefficients: model.gamma.clone(),
            provenance,
        }
    }

    /// Rebuilds and validates the spline.
    pub fn to_model(&self) -> Result<FittedTensorModel> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "unsupported model schema version {} (this build reads version {SCHEMA_VERSION})",
            self.schema_version
        );
        ensure!(self.dimension >= 1 && self.axes.len() == self.dimension, "model lists {} axes for dimension {}", self.axes.len(), self.dimension);
        let knots = self
            .axes
            .iter()
            .enumerate()
            .map(|(j, a)| AugmentedKnotVector::new(&a.knots, a.order, a.lower, a.upper).with_context(|| format!("axis {}", j + 1)))
            .collect::<Result<Vec<_>>>()?;
        let shape: Vec<usize> = knots.iter().map(|k| k.num_basis()).collect();
        ensure!(shape == self.shape, "shape {:?} does not match the knot vectors ({shape:?})", self.shape);
        let expected: usize = shape.iter().product();
        ensure!(
            self.coefficients.len() == expected,
            "{} coefficients for shape {shape:?} (expected {expected})",
            self.coefficients.len()
        );
        let orders: Vec<usize> = knots.iter().map(|k| k.order()).collect();
        if orders.windows(2).any(|w| w[0] != w[1]) {
            bail!("axes have different orders {orders:?}");
        }
        Ok(FittedTensorModel {
            knots,
            gamma: self.coefficients.clone(),
            q: orders[0] - 1,
            ebic: self.provenance.ebic,
            ss: self.provenance.ss,
            selected: self.provenance.selected_entries.clone(),
            rank_deficient: self.provenance.rank_deficient,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: Self = serde_json::from_str(&text).with_context(|| format!("parsing model file {}", path.display()))?;
        file.to_model()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

fn axis_spec(k: &AugmentedKnotVector) -> AxisSpec {
    AxisSpec { order: k.order(), lower: k.lower(), upper: k.upper(), knots: k.interior().to_vec() }
}
