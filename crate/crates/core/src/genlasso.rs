//! Generalized lasso `min_β ||Y - β||² + λ ||Dβ||₁` for trend-filtering
//! operators.
//!
//! The solver follows the dual solution path. With `μ = λ / 2` the dual is
//! `min_v ½||Y - Dᵀv||²` subject to `||v||∞ <= μ`, and `β = Y - Dᵀv`. As `μ`
//! decreases from `||(DDᵀ)⁻¹DY||∞`, dual coordinates hit the box boundary or
//! leave it at discrete event values; between events the dual is affine in `μ`.
//! Because `D` has full row rank, each segment only needs a least-squares
//! solve against the interior rows, done here with a banded Givens QR.
//!
//! Solutions are exact up to rounding, so the KKT certificate is computed
//! explicitly rather than used as a stopping rule. Warm starts resume the
//! path from the boundary set of an earlier solution at a larger `λ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::StaircaseQr;
use crate::penalty::DifferenceOperator;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_STEPS: usize = 100_000;
pub const DEFAULT_GRID_SIZE: usize = 50;
pub const DEFAULT_LAMBDA_MIN_RATIO: f64 = 1e-4;

/// Relative slack when comparing event values against the current `μ`.
const EVENT_SLACK: f64 = 1e-10;

/// Regularisation grid and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub grid_size: usize,
    /// Smallest grid value as a fraction of `λ_max`.
    pub lambda_min_ratio: f64,
    /// Bound on the relative KKT residual of every solution.
    pub tol: f64,
    /// Cap on path events per solve.
    pub max_steps: usize,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            grid_size: DEFAULT_GRID_SIZE,
            lambda_min_ratio: DEFAULT_LAMBDA_MIN_RATIO,
            tol: DEFAULT_TOL,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::InvalidArgument(format!("grid size must be >= 2, got {}", self.grid_size)));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda min ratio must lie in (0, 1), got {}",
                self.lambda_min_ratio
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    /// Log-spaced descending grid from `lambda_max` to `lambda_max * lambda_min_ratio`.
    pub fn grid(&self, lambda_max: f64) -> Vec<f64> {
        let top = if lambda_max > 1e-300 { lambda_max } else { 1.0 };
        let k = self.grid_size;
        let log_ratio = self.lambda_min_ratio.ln();
        (0..k)
            .map(|i| top * (log_ratio * i as f64 / (k - 1) as f64).exp())
            .collect()
    }
}

/// Boundary set of the dual: `signs[ℓ]` is `±1` when `|u_ℓ| = 1`, else `0`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathState {
    signs: Vec<i8>,
}

impl PathState {
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn boundary_size(&self) -> usize {
        self.signs.iter().filter(|s| **s != 0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub lambda: f64,
    pub beta: Vec<f64>,
    /// `D β̂`.
    pub a: Vec<f64>,
    /// Dual certificate `u` with `2(β - Y) + λ Dᵀu = 0` and `||u||∞ <= 1`.
    pub dual: Vec<f64>,
    pub kkt_residual: f64,
    /// Path events traversed by this call.
    pub iterations: usize,
    pub state: PathState,
}

impl LassoSolution {
    /// Number of entries of `a` above `threshold` in absolute value.
    pub fn support_size(&self, threshold: f64) -> usize {
        self.a.iter().filter(|v| v.abs() > threshold).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub grid: Vec<f64>,
    pub solutions: Vec<LassoSolution>,
    pub lambda_max: f64,
}

impl LassoPath {
    pub fn total_iterations(&self) -> usize {
        self.solutions.iter().map(|s| s.iterations).sum()
    }
}

/// `||Y - β||² + λ||Dβ||₁`.
pub fn objective(y: &[f64], op: &DifferenceOperator, lambda: f64, beta: &[f64]) -> f64 {
    let fit: f64 = y.iter().zip(beta).map(|(a, b)| (a - b) * (a - b)).sum();
    let pen: f64 = op.apply(beta).iter().map(|v| v.abs()).sum();
    fit + lambda * pen
}

/// Relative KKT residual of `(β, u)`.
///
/// The maximum of three scaled violations: stationarity
/// `||2(β - Y) + λDᵀu||∞ / (s + λ||D||∞)`, dual infeasibility
/// `max(||u||∞ - 1, 0)`, and complementarity
/// `max_ℓ |a_ℓ| (1 - sign(a_ℓ) u_ℓ) / (||D||∞ s)`, where `s = max(1, ||Y||∞)`.
pub fn kkt_residual(y: &[f64], op: &DifferenceOperator, lambda: f64, beta: &[f64], dual: &[f64]) -> f64 {
    let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let dnorm = op.norm_inf().max(f64::MIN_POSITIVE);
    let dtu = op.apply_transpose(dual);
    let stat = y
        .iter()
        .zip(beta)
        .zip(&dtu)
        .map(|((yi, bi), gi)| (2.0 * (bi - yi) + lambda * gi).abs())
        .fold(0.0, f64::max)
        / (scale + lambda * dnorm);
    let feas = dual.iter().fold(0.0_f64, |m, u| m.max(u.abs() - 1.0));
    let a = op.apply(beta);
    let comp = a
        .iter()
        .zip(dual)
        .map(|(al, ul)| al.abs() * (1.0 - al.signum() * ul))
        .fold(0.0, f64::max)
        / (dnorm * scale);
    stat.max(feas).max(comp)
}

/// Dual quantities on one path segment: `v_I(μ) = A - μ B` on the interior.
struct Segment {
    interior: Vec<usize>,
    a_int: Vec<f64>,
    b_int: Vec<f64>,
    /// `D_B (Y - D_Iᵀ A)` and `D_B (D_Bᵀ s - D_Iᵀ B)`, indexed like `D`.
    c_bnd: Vec<f64>,
    d_bnd: Vec<f64>,
    /// `Y - D_Iᵀ A` and `D_Bᵀ s - D_Iᵀ B`.
    r_const: Vec<f64>,
    r_slope: Vec<f64>,
}

struct DualPath<'a> {
    y: &'a [f64],
    op: &'a DifferenceOperator,
    signs: Vec<i8>,
    mu: f64,
    last_changed: Option<usize>,
    /// `μ` of the last overdue correction; at most one per `μ` so that
    /// paths made only of rounding noise cannot cycle.
    overdue_mu: f64,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Hit { index: usize, sign: i8 },
    Leave { index: usize },
}

impl<'a> DualPath<'a> {
    fn cold(y: &'a [f64], op: &'a DifferenceOperator) -> Self {
        Self { y, op, signs: vec![0; op.nrows()], mu: f64::INFINITY, last_changed: None, overdue_mu: f64::NAN }
    }

    fn segment(&self) -> Result<Segment> {
        let op = self.op;
        let n = op.ncols();
        let m = op.nrows();
        let order = op.order();
        let interior: Vec<usize> = (0..m).filter(|&l| self.signs[l] == 0).collect();

        // D_Bᵀ s
        let s_full: Vec<f64> = self.signs.iter().map(|&s| s as f64).collect();
        let dbt_s = op.apply_transpose(&s_full);

        let (a_int, b_int, r_const, r_slope) = if interior.is_empty() {
            (Vec::new(), Vec::new(), self.y.to_vec(), dbt_s)
        } else {
            // Least squares against D_Iᵀ, one row of D_Iᵀ per coordinate of β.
            let p = interior.len();
            let mut qr = StaircaseQr::new(p, order + 1, 2);
            let mut lo = 0usize;
            let mut vals = Vec::with_capacity(order + 1);
            for r in 0..n {
                while lo < p && interior[lo] + order < r {
                    lo += 1;
                }
                vals.clear();
                let mut hi = lo;
                while hi < p && interior[hi] <= r {
                    vals.push(op.row(interior[hi])[r - interior[hi]]);
                    hi += 1;
                }
                qr.add_row(lo.min(p - 1), &vals, &[self.y[r], dbt_s[r]]);
            }
            let sol = qr
                .solve()
                .ok_or_else(|| Error::RankDeficient("interior rows of the difference operator".into()))?;
            // Residuals via the orthogonal factor keep D_I β at rounding level.
            let r_const = qr.project_out(self.y);
            let r_slope = qr.project_out(&dbt_s);
            let mut it = sol.into_iter();
            (it.next().unwrap(), it.next().unwrap(), r_const, r_slope)
        };

        let mut c_bnd = op.apply(&r_const);
        let mut d_bnd = op.apply(&r_slope);
        for l in 0..m {
            if self.signs[l] == 0 {
                c_bnd[l] = 0.0;
                d_bnd[l] = 0.0;
            }
        }
        Ok(Segment { interior, a_int, b_int, c_bnd, d_bnd, r_const, r_slope })
    }

    /// Largest event value not above the current `μ`, if positive.
    fn next_event(&self, seg: &Segment) -> Option<(f64, Event, bool)> {
        let cap = if self.mu.is_finite() { self.mu * (1.0 + EVENT_SLACK) } else { f64::INFINITY };
        let near = |t: f64| self.mu.is_finite() && t >= self.mu * (1.0 - EVENT_SLACK);
        let allow_overdue = self.mu.is_finite() && self.overdue_mu != self.mu;
        let mut best: Option<(f64, Event, bool)> = None;
        let mut consider = |t: f64, ev: Event, overdue: bool| {
            if t > 0.0 && t <= cap && best.is_none_or(|(bt, _, _)| t > bt) {
                best = Some((t, ev, overdue));
            }
        };
        for (j, &l) in seg.interior.iter().enumerate() {
            if self.last_changed == Some(l) && self.mu.is_finite() {
                // Just left the boundary: it may not re-enter at the same μ.
                let a = seg.a_int[j];
                let b = seg.b_int[j];
                for sign in [1i8, -1] {
                    let den = b + sign as f64;
                    if den != 0.0 {
                        let t = a / den;
                        if !near(t) {
                            consider(t, Event::Hit { index: l, sign }, false);
                        }
                    }
                }
                continue;
            }
            let a = seg.a_int[j];
            let b = seg.b_int[j];
            if allow_overdue {
                // Overdue after rounding in an earlier segment: hit now.
                let v = a - self.mu * b;
                if v.abs() > self.mu * (1.0 + EVENT_SLACK) {
                    consider(self.mu, Event::Hit { index: l, sign: if v > 0.0 { 1 } else { -1 } }, true);
                    continue;
                }
            }
            for sign in [1i8, -1] {
                let den = b + sign as f64;
                if den != 0.0 {
                    consider(a / den, Event::Hit { index: l, sign }, false);
                }
            }
        }
        for (l, &s) in self.signs.iter().enumerate() {
            if s == 0 {
                continue;
            }
            let c = s as f64 * seg.c_bnd[l];
            let d = s as f64 * seg.d_bnd[l];
            if allow_overdue && self.last_changed != Some(l) {
                // Sign already wrong at the current μ (rounding on badly
                // scaled operators): leave now rather than never.
                let val = c - self.mu * d;
                if val < -EVENT_SLACK * (c.abs() + self.mu * d.abs()) {
                    consider(self.mu, Event::Leave { index: l }, true);
                    continue;
                }
            }
            if c < 0.0 && d < 0.0 {
                let t = c / d;
                if self.last_changed == Some(l) && near(t) {
                    continue;
                }
                consider(t, Event::Leave { index: l }, false);
            }
        }
        best.map(|(t, ev, overdue)| (t.min(self.mu), ev, overdue))
    }

    /// Moves along the path until the segment containing `target` (a value of
    /// `μ`) is reached. Returns the segment and the number of events.
    fn advance(&mut self, target: f64, max_steps: usize) -> Result<(Segment, usize)> {
        let mut steps = 0;
        loop {
            let seg = self.segment()?;
            match self.next_event(&seg) {
                Some((t, ev, overdue)) if t > target => {
                    if steps >= max_steps {
                        let best = self.solution(&seg, 2.0 * target, steps);
                        return Err(Error::NonConvergence {
                            lambda: best.lambda,
                            iterations: steps,
                            residual: best.kkt_residual,
                            best_beta: best.beta,
                        });
                    }
                    match ev {
                        Event::Hit { index, sign } => {
                            self.signs[index] = sign;
                            self.last_changed = Some(index);
                        }
                        Event::Leave { index } => {
                            self.signs[index] = 0;
                            self.last_changed = Some(index);
                        }
                    }
                    if overdue {
                        self.overdue_mu = t;
                    }
                    self.mu = t;
                    steps += 1;
                }
                _ => return Ok((seg, steps)),
            }
        }
    }

    fn solution(&self, seg: &Segment, lambda: f64, steps: usize) -> LassoSolution {
        let mu = lambda / 2.0;
        let beta: Vec<f64> = seg.r_const.iter().zip(&seg.r_slope).map(|(c, s)| c - mu * s).collect();
        let mut dual: Vec<f64> = self.signs.iter().map(|&s| s as f64).collect();
        if mu > 0.0 {
            for (j, &l) in seg.interior.iter().enumerate() {
                // Both sides are roundoff when λ is itself at roundoff level
                // (data already polynomial); keep the reported dual feasible.
                dual[l] = ((seg.a_int[j] - mu * seg.b_int[j]) / mu).clamp(-1.0, 1.0);
            }
        }
        let a = self.op.apply(&beta);
        let kkt = kkt_residual(self.y, self.op, lambda, &beta, &dual);
        LassoSolution {
            lambda,
            beta,
            a,
            dual,
            kkt_residual: kkt,
            iterations: steps,
            state: PathState { signs: self.signs.clone() },
        }
    }
}

fn check_dims(y: &[f64], op: &DifferenceOperator) -> Result<()> {
    if y.len() != op.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "response has length {} but the operator has {} columns",
            y.len(),
            op.ncols()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("responses must be finite".into()));
    }
    Ok(())
}

/// Smallest `λ` at which the penalised term vanishes: `2 ||(DDᵀ)⁻¹ D Y||∞`.
pub fn compute_lambda_max(y: &[f64], op: &DifferenceOperator) -> Result<f64> {
    check_dims(y, op)?;
    let path = DualPath::cold(y, op);
    let seg = path.segment()?;
    Ok(2.0 * seg.a_int.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// Solves at a single `λ`, resuming from `warm_start` when it was computed at
/// a larger or equal `λ` for the same problem size.
pub fn solve(
    y: &[f64],
    op: &DifferenceOperator,
    lambda: f64,
    warm_start: Option<&LassoSolution>,
    tol: f64,
) -> Result<LassoSolution> {
    solve_with_cap(y, op, lambda, warm_start, tol, DEFAULT_MAX_STEPS)
}

pub fn solve_with_cap(
    y: &[f64],
    op: &DifferenceOperator,
    lambda: f64,
    warm_start: Option<&LassoSolution>,
    tol: f64,
    max_steps: usize,
) -> Result<LassoSolution> {
    check_dims(y, op)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if lambda == 0.0 {
        let beta = y.to_vec();
        let a = op.apply(&beta);
        let dual: Vec<f64> = a.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
        let kkt = kkt_residual(y, op, 0.0, &beta, &dual);
        return Ok(LassoSolution {
            lambda,
            beta,
            a,
            dual,
            kkt_residual: kkt,
            iterations: 0,
            state: PathState { signs: vec![0; op.nrows()] },
        });
    }

    let mut path = match warm_start {
        Some(w) if w.lambda >= lambda && w.lambda > 0.0 && w.state.signs.len() == op.nrows() => DualPath {
            y,
            op,
            signs: w.state.signs.clone(),
            mu: w.lambda / 2.0,
            last_changed: None,
            overdue_mu: f64::NAN,
        },
        _ => DualPath::cold(y, op),
    };
    let (seg, steps) = path.advance(lambda / 2.0, max_steps)?;
    let sol = path.solution(&seg, lambda, steps);
    if sol.kkt_residual > tol {
        log::debug!("lambda {lambda}: KKT residual {:e} above {tol:e}", sol.kkt_residual);
        return Err(Error::NonConvergence {
            lambda,
            iterations: steps,
            residual: sol.kkt_residual,
            best_beta: sol.beta,
        });
    }
    Ok(sol)
}

/// Solves along the descending log grid, warm-starting each point from its
/// predecessor.
pub fn solve_path(y: &[f64], op: &DifferenceOperator, grid_size: usize, tol: f64) -> Result<LassoPath> {
    let cfg = PathConfig { grid_size, tol, ..PathConfig::default() };
    solve_path_with(y, op, &cfg)
}

pub fn solve_path_with(y: &[f64], op: &DifferenceOperator, cfg: &PathConfig) -> Result<LassoPath> {
    cfg.validate()?;
    let lambda_max = compute_lambda_max(y, op)?;
    let grid = cfg.grid(lambda_max);
    let mut solutions: Vec<LassoSolution> = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let sol = solve_with_cap(y, op, lambda, solutions.last(), cfg.tol, cfg.max_steps)?;
        solutions.push(sol);
    }
    Ok(LassoPath { grid, solutions, lambda_max })
}

/// Like [`solve_path_with`], but a point whose KKT residual misses the
/// tolerance ends the path instead of failing it: the certified prefix is
/// returned (with a warning). Only a failure at the first point is an error.
/// Badly spaced points can put the smallest penalties at the rounding floor.
pub fn solve_path_truncated(y: &[f64], op: &DifferenceOperator, cfg: &PathConfig) -> Result<LassoPath> {
    cfg.validate()?;
    let lambda_max = compute_lambda_max(y, op)?;
    let mut grid = cfg.grid(lambda_max);
    let mut solutions: Vec<LassoSolution> = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        match solve_with_cap(y, op, lambda, solutions.last(), cfg.tol, cfg.max_steps) {
            Ok(sol) => solutions.push(sol),
            Err(Error::NonConvergence { residual, .. }) if !solutions.is_empty() => {
                log::warn!(
                    "path stopped at lambda {lambda:e} (KKT residual {residual:e}); keeping {} of {} penalties",
                    solutions.len(),
                    grid.len()
                );
                break;
            }
            Err(e) => return Err(e),
        }
    }
    grid.truncate(solutions.len());
    Ok(LassoPath { grid, solutions, lambda_max })
}

/// Same grid as [`solve_path_with`] but every point solved from scratch.
pub fn solve_path_cold(y: &[f64], op: &DifferenceOperator, cfg: &PathConfig) -> Result<LassoPath> {
    cfg.validate()?;
    let lambda_max = compute_lambda_max(y, op)?;
    let grid = cfg.grid(lambda_max);
    let solutions = grid
        .iter()
        .map(|&lambda| solve_with_cap(y, op, lambda, None, cfg.tol, cfg.max_steps))
        .collect::<Result<Vec<_>>>()?;
    Ok(LassoPath { grid, solutions, lambda_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::{fused_difference, trend_operator};
    use approx::assert_abs_diff_eq;

    fn even(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn zero_lambda_returns_data() {
        let y = [0.3, -1.0, 2.0, 0.5, 0.1];
        let op = trend_operator(&even(5), 1).unwrap();
        let sol = solve(&y, &op, 0.0, None, 1e-8).unwrap();
        assert_eq!(sol.beta, y.to_vec());
    }

    #[test]
    fn large_lambda_gives_polynomial_fit() {
        let x = even(9);
        let y: Vec<f64> = x.iter().map(|v| (3.0 * v).sin() + 0.1 * v).collect();
        let op = trend_operator(&x, 1).unwrap();
        let lmax = compute_lambda_max(&y, &op).unwrap();
        let sol = solve(&y, &op, lmax * 1.5, None, 1e-8).unwrap();
        assert!(sol.a.iter().all(|v| v.abs() < 1e-9));
        // Least-squares line through the data.
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        for (xi, bi) in x.iter().zip(&sol.beta) {
            assert_abs_diff_eq!(*bi, my + slope * (xi - mx), epsilon = 1e-10);
        }
    }

    #[test]
    fn lambda_max_is_tight() {
        let x = even(8);
        let y = [0.2, 1.3, -0.4, 0.8, 2.1, -1.0, 0.5, 0.9];
        let op = trend_operator(&x, 1).unwrap();
        let lmax = compute_lambda_max(&y, &op).unwrap();
        let at = solve(&y, &op, lmax, None, 1e-8).unwrap();
        assert!(at.a.iter().all(|v| v.abs() < 1e-9 * op.norm_inf()));
        let below = solve(&y, &op, 0.99 * lmax, None, 1e-8).unwrap();
        assert!(below.a.iter().any(|v| v.abs() > 1e-6));
    }

    #[test]
    fn constant_and_polynomial_have_zero_lambda_max() {
        let x = even(10);
        let op = trend_operator(&x, 2).unwrap();
        assert!(compute_lambda_max(&[4.0; 10], &op).unwrap() < 1e-10);
        let quad: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v + 3.0 * v * v).collect();
        assert!(compute_lambda_max(&quad, &op).unwrap() < 1e-10);
    }

    #[test]
    fn step_signal_fused() {
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let op = fused_difference(6).unwrap();
        let sol = solve(&y, &op, 0.3, None, 1e-8).unwrap();
        // Two plateaus shrunk towards each other by λ / (2 * 3).
        for i in 0..3 {
            assert_abs_diff_eq!(sol.beta[i], 0.05, epsilon = 1e-12);
            assert_abs_diff_eq!(sol.beta[i + 3], 0.95, epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let op = fused_difference(4).unwrap();
        assert!(matches!(solve(&[1.0, 2.0], &op, 1.0, None, 1e-8), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn grid_is_descending_log_spaced() {
        let cfg = PathConfig::default();
        let g = cfg.grid(2.0);
        assert_eq!(g.len(), 50);
        assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[49], 2.0e-4, epsilon = 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }
}
