use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use knotfit::clusterext::{fit_nd, ScatteredDataset};
use knotfit::evalbench::{run_experiment, ExperimentConfig};
use knotfit::genlasso::PathConfig;
use knotfit::knotsel1d::{fit_1d, FitConfig};
use knotfit::tensorfit::{fit_2d, GridDataset};

use crate::io::{commit, read_table, staged};
use crate::model_file::{FitMethod, ModelFile, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Grid fit when every coordinate combination appears exactly once,
    /// clustered fit otherwise.
    Auto,
    Grid,
    Cluster,
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LOWER:UPPER, got '{s}'"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound '{lo}'"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound '{hi}'"))?;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(format!("bounds must be finite with {lo} below {hi}"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with a header: coordinate columns, then the response.
    pub input: PathBuf,
    /// Number of coordinate columns.
    #[arg(long, default_value_t = 1)]
    pub dims: usize,
    /// Spline degree.
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    /// Penalty values per path.
    #[arg(long, default_value_t = knotfit::genlasso::DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    /// Smallest penalty as a fraction of the largest.
    #[arg(long, default_value_t = knotfit::genlasso::DEFAULT_LAMBDA_MIN_RATIO)]
    pub lambda_min_ratio: f64,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    pub mode: Mode,
    /// Seed for the k-means grouping of scattered data.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spline domain per axis as LOWER:UPPER, in coordinate order
    /// (default: data range).
    #[arg(long, value_parser = parse_bounds, num_args = 1..)]
    pub bounds: Vec<(f64, f64)>,
    #[arg(long)]
    pub out: PathBuf,
}

/// What `fit` prints on success.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub method: FitMethod,
    pub observations: usize,
    pub knot_counts: Vec<usize>,
    pub ebic: f64,
    pub seconds: f64,
}

impl std::fmt::Display for FitSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let k: Vec<String> = self.knot_counts.iter().map(usize::to_string).collect();
        write!(
            f,
            "mode={} n={} knots={} ebic={:.6} wall={:.3}s",
            self.method.as_str(),
            self.observations,
            k.join(","),
            self.ebic,
            self.seconds
        )
    }
}

pub fn fit(args: &FitArgs) -> Result<FitSummary> {
    let d = args.dims;
    if d == 0 {
        bail!("--dims must be at least 1");
    }
    if !args.bounds.is_empty() && args.bounds.len() != d {
        bail!("--bounds lists {} axes for {d} dimensions", args.bounds.len());
    }
    let table = read_table(&args.input, d + 1)?;
    if table.rows.is_empty() {
        bail!("{}: no observations", args.input.display());
    }
    let config = FitConfig {
        q: args.degree,
        path: PathConfig { grid_size: args.grid_size, lambda_min_ratio: args.lambda_min_ratio, ..PathConfig::default() },
        bounds: (!args.bounds.is_empty()).then(|| args.bounds.clone()),
        ..FitConfig::default()
    };
    config.path.validate()?;
    let n = table.rows.len();
    let y: Vec<f64> = table.rows.iter().map(|r| r[d]).collect();
    let start = Instant::now();

    let (file, method) = if d == 1 {
        if args.mode != Mode::Auto {
            log::info!("--mode is ignored for one-dimensional data");
        }
        let x: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
        let model = fit_1d(&y, &x, &config)?;
        (ModelFile::from_spline(&model, Provenance::new(FitMethod::Line, n, &config, None)?), FitMethod::Line)
    } else {
        let grid = if d == 2 && args.mode != Mode::Cluster {
            let pts: Vec<[f64; 2]> = table.rows.iter().map(|r| [r[0], r[1]]).collect();
            GridDataset::from_points(&pts, &y)
        } else {
            None
        };
        match (args.mode, grid) {
            (Mode::Grid, None) => bail!(
                "--mode grid needs two coordinates with every combination present exactly once; use --mode cluster"
            ),
            (_, Some(data)) => {
                log::info!("input forms a full {} x {} grid; using the grid fit", data.axis1().len(), data.axis2().len());
                let model = fit_2d(&data, &config)?;
                (ModelFile::from_tensor(&model, Provenance::new(FitMethod::Grid, n, &config, None)?), FitMethod::Grid)
            }
            (_, None) => {
                log::info!("using the clustered fit for {d}-d scattered data");
                let points: Vec<Vec<f64>> = table.rows.iter().map(|r| r[..d].to_vec()).collect();
                let data = ScatteredDataset::new(points, y)?;
                let model = fit_nd(&data, &config, args.seed)?;
                let prov = Provenance::new(FitMethod::Cluster, n, &config, Some(args.seed))?;
                (ModelFile::from_tensor(&model, prov), FitMethod::Cluster)
            }
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    if file.provenance.rank_deficient {
        log::warn!("the selected design was rank deficient; coefficients are the minimum-norm solution");
    }
    file.save(&args.out)?;
    Ok(FitSummary {
        method,
        observations: n,
        knot_counts: file.axes.iter().map(|a| a.knots.len()).collect(),
        ebic: file.provenance.ebic,
        seconds,
    })
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Model file written by `fit`.
    pub model: PathBuf,
    /// CSV with a header whose first columns are the coordinates.
    pub points: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes the input rows with a `prediction` column appended; returns the
/// number of rows.
pub fn predict(args: &PredictArgs) -> Result<usize> {
    let file = ModelFile::load(&args.model)?;
    let model = file.to_model()?;
    let d = file.dimension;
    let table = read_table(&args.points, d)?;

    let outside: Vec<usize> = table
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.iter().zip(&file.axes).any(|(v, a)| *v < a.lower || *v > a.upper))
        .map(|(i, _)| i + 1)
        .collect();
    if !outside.is_empty() {
        let listed: Vec<String> = outside.iter().take(20).map(usize::to_string).collect();
        let more = if outside.len() > 20 { format!(" and {} more", outside.len() - 20) } else { String::new() };
        bail!("{} point(s) outside the model domain at rows {}{more}", outside.len(), listed.join(", "));
    }
    let predictions = table.rows.iter().map(|r| model.predict(&r[..d])).collect::<knotfit::Result<Vec<_>>>()?;

    let header = if table.header.is_empty() {
        (1..=d).map(|j| format!("x{j}")).collect()
    } else {
        table.header.clone()
    };
    let mut tmp = staged(&args.out)?;
    writeln!(tmp, "# model={}", args.model.display())?;
    writeln!(tmp, "# config_hash={}", file.provenance.config_hash)?;
    {
        let mut w = csv::Writer::from_writer(tmp.as_file_mut());
        w.write_record(header.iter().map(String::as_str).chain(["prediction"]))?;
        for (raw, p) in table.raw.iter().zip(&predictions) {
            let p = p.to_string();
            w.write_record(raw.iter().map(String::as_str).chain([p.as_str()]))?;
        }
        w.flush()?;
    }
    commit(tmp, &args.out)?;
    Ok(predictions.len())
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// One of f1-noise, f1-sampling, f2-noise, f2-sampling, f2-cluster.
    #[arg(long)]
    pub experiment: String,
    /// Noise standard deviation (default depends on the experiment).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the sample-size schedule.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Vec<usize>,
    /// Record fit times in `wall_ms` (outputs then differ between runs).
    #[arg(long)]
    pub timings: bool,
    /// Output directory for `results.csv` and `summary.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

pub fn bench(args: &BenchArgs) -> Result<PathBuf> {
    let mut config = ExperimentConfig::preset(&args.experiment, args.sigma, args.reps, args.seed)?;
    if !args.schedule.is_empty() {
        config.schedule = args.schedule.clone();
    }
    config.record_timings = args.timings;
    config.validate()?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let report = run_experiment(&config)?;
    let failed = report.failures().count();
    if failed > 0 {
        log::warn!("{failed} of {} cells failed; their metrics are left empty", report.rows.len());
    }

    let results = args.out.join(RESULTS_FILE);
    let summary = args.out.join(SUMMARY_FILE);
    let mut a = staged(&results)?;
    report.write_csv(a.as_file_mut())?;
    let mut b = staged(&summary)?;
    report.write_summary(b.as_file_mut())?;
    commit(a, &results)?;
    if let Err(e) = commit(b, &summary) {
        let _ = std::fs::remove_file(&results);
        return Err(e);
    }
    Ok(results)
}

/// Sets the global worker count; `None` keeps the default.
pub fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        if !dir.is_dir() {
            bail!("output directory {} does not exist", dir.display());
        }
    }
    Ok(())
}
