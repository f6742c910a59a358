//! Reference computations shared by the test targets.
#![allow(dead_code)]

use knotfit::clusterext::{fit_tensor_scattered, ScatteredDataset};
use knotfit::evalbench::{FunctionName, SyntheticFunction, F1_KNOTS, F2_KNOTS_1, F2_KNOTS_2};
use knotfit::genlasso::{compute_lambda_max, objective, solve, solve_path_with, PathConfig};
use knotfit::knotsel1d::{fit_spline_in, FitConfig, SelectedKnots};
use knotfit::linalg::{kron, lstsq};
use knotfit::penalty::{fused_difference, trend_operator};
use knotfit::splinekit::{design_matrix, AugmentedKnotVector};
use knotfit::tensorfit::{ebic_2d, kron_lstsq, GridDataset};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Closed-form B-spline of order 1, 2 or 3 on the interval containing `x`
/// (last non-empty interval closed on the right).
pub fn bspline_closed_form(t: &[f64], i: usize, order: usize, x: f64) -> f64 {
    let upper = *t.last().unwrap();
    let inside = |a: f64, b: f64| a < b && ((a <= x && x < b) || (x == upper && b == upper));
    match order {
        1 => f64::from(inside(t[i], t[i + 1])),
        2 => {
            if inside(t[i], t[i + 1]) {
                (x - t[i]) / (t[i + 1] - t[i])
            } else if inside(t[i + 1], t[i + 2]) {
                (t[i + 2] - x) / (t[i + 2] - t[i + 1])
            } else {
                0.0
            }
        }
        3 => {
            let (a, b, c, d) = (t[i], t[i + 1], t[i + 2], t[i + 3]);
            if inside(a, b) {
                (x - a).powi(2) / ((c - a) * (b - a))
            } else if inside(b, c) {
                (x - a) * (c - x) / ((c - a) * (c - b)) + (d - x) * (x - b) / ((d - b) * (c - b))
            } else if inside(c, d) {
                (d - x).powi(2) / ((d - b) * (d - c))
            } else {
                0.0
            }
        }
        _ => unreachable!(),
    }
}

pub fn random_knots(rng: &mut ChaCha8Rng, max: usize) -> Vec<f64> {
    let k = rng.random_range(0..=max);
    let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..0.99)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    v
}

pub fn f1_closed_form(x: f64) -> f64 {
    let t = [0.0, 0.0, 0.0, F1_KNOTS[0], F1_KNOTS[1], F1_KNOTS[2], 1.0, 1.0, 1.0];
    -2.5 * bspline_closed_form(&t, 1, 3, x) + 4.3 * bspline_closed_form(&t, 4, 3, x)
}

pub fn f2_closed_form(x1: f64, x2: f64) -> f64 {
    let t1 = [0.0, 0.0, 0.0, F2_KNOTS_1[0], F2_KNOTS_1[1], 1.0, 1.0, 1.0];
    let t2 = [0.0, 0.0, 0.0, F2_KNOTS_2[0], F2_KNOTS_2[1], 1.0, 1.0, 1.0];
    let b = |t: &[f64], i: usize, x: f64| bspline_closed_form(t, i, 3, x);
    2.3 * b(&t1, 2, x1) * b(&t2, 2, x2) - 1.5 * b(&t1, 3, x1) * b(&t2, 4, x2)
}

/// Exact minimiser by enumerating sign patterns of `Dβ`: for pattern `s`
/// with zero set `Z`, the candidate is the minimiser of
/// `‖Y − β‖² + λ sᵀDβ` over `{D_Z β = 0}`. The true minimiser is the
/// candidate of its own pattern, so the smallest true objective wins.
pub fn sign_pattern_minimum(y: &[f64], d: &DMatrix<f64>, lambda: f64) -> f64 {
    let (m, n) = d.shape();
    let yv = DVector::from_column_slice(y);
    let mut best = f64::INFINITY;
    let mut pattern = vec![-1i32; m];
    loop {
        let s = DVector::from_iterator(m, pattern.iter().map(|&p| p as f64));
        let target = &yv - d.transpose() * &s * (lambda / 2.0);
        let zero: Vec<usize> = (0..m).filter(|&l| pattern[l] == 0).collect();
        let beta = if zero.is_empty() {
            target
        } else {
            // Project onto the null space of D_Z.
            let dz = DMatrix::from_fn(zero.len(), n, |r, c| d[(zero[r], c)]);
            let svd = dz.svd(false, true);
            let vt = svd.v_t.unwrap();
            let rank = svd.singular_values.iter().filter(|&&v| v > 1e-12).count();
            let mut b = target.clone();
            for r in 0..rank {
                let row = vt.row(r).transpose();
                b -= &row * row.dot(&target);
            }
            b
        };
        let fit = (&yv - &beta).norm_squared();
        let pen: f64 = (d * &beta).iter().map(|v| v.abs()).sum();
        best = best.min(fit + lambda * pen);

        let mut k = 0;
        while k < m && pattern[k] == 1 {
            pattern[k] = -1;
            k += 1;
        }
        if k == m {
            return best;
        }
        pattern[k] += 1;
    }
}

/// Largest gap between the recursion and the closed forms (orders 1 to 3),
/// over random knot vectors, random points, the bounds and the knots.
pub fn worst_closed_form_gap(seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let knots = random_knots(&mut rng, 6);
        for order in 1..=3 {
            let kv = AugmentedKnotVector::new(&knots, order, 0.0, 1.0).unwrap();
            let mut xs: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
            xs.extend([0.0, 1.0]);
            xs.extend(knots.iter().copied());
            for &x in &xs {
                for i in 0..kv.num_basis() {
                    let want = bspline_closed_form(kv.augmented(), i, order, x);
                    worst = worst.max((want - kv.eval(i, order, x).unwrap()).abs());
                }
            }
        }
    }
    worst
}

/// Largest `|Σ_i B_i(x) - 1|` over `points` random points, each on a fresh
/// random knot vector and order 1 to 4.
pub fn worst_partition_gap(seed: u64, points: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..points {
        let knots = random_knots(&mut rng, 10);
        let order = rng.random_range(1..=4);
        let kv = AugmentedKnotVector::new(&knots, order, 0.0, 1.0).unwrap();
        let x = if rng.random_bool(0.05) { 1.0 } else { rng.random::<f64>() };
        let total: f64 = kv.eval_all(x).unwrap().iter().sum();
        worst = worst.max((total - 1.0).abs());
    }
    worst
}

/// Largest gap between the library's f1/f2 and the closed forms.
pub fn worst_function_gap(seed: u64, points: usize) -> f64 {
    let f1 = SyntheticFunction::new(FunctionName::F1);
    let f2 = SyntheticFunction::new(FunctionName::F2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..points {
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        worst = worst.max((f1.evaluate(&[u]) - f1_closed_form(u)).abs());
        worst = worst.max((f2.evaluate(&[u, v]) - f2_closed_form(u, v)).abs());
    }
    worst
}

/// Largest relative objective gap between the solver and the sign-pattern
/// enumeration on fused-lasso instances with `n <= 8`.
pub fn worst_enumeration_gap(seed: u64, instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..instances {
        let n = rng.random_range(3..=8);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let op = fused_difference(n).unwrap();
        let lambda = compute_lambda_max(&y, &op).unwrap() * rng.random_range(0.02..1.2);
        let sol = solve(&y, &op, lambda, None, 1e-8).unwrap();
        let got = objective(&y, &op, lambda, &sol.beta);
        let want = sign_pattern_minimum(&y, &op.to_dense(), lambda);
        worst = worst.max((got - want).abs() / want.max(1.0));
    }
    worst
}

/// Largest KKT residual along paths on random instances (`n <= 50`,
/// `q` in 0..=2, jittered integer positions).
pub fn worst_kkt_residual(seed: u64, instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..instances {
        let q = rng.random_range(0..=2);
        let n = rng.random_range(q + 3..=50);
        let x: Vec<f64> = (0..n).map(|i| i as f64 + rng.random_range(-0.4..0.4)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let op = trend_operator(&x, q).unwrap();
        let cfg = PathConfig { grid_size: 10, tol: f64::INFINITY, ..PathConfig::default() };
        let path = solve_path_with(&y, &op, &cfg).unwrap();
        for s in &path.solutions {
            worst = worst.max(s.kkt_residual);
        }
    }
    worst
}

/// Largest coefficient gap between the factored 2D least squares and a
/// solve with the materialised Kronecker product.
pub fn worst_kronecker_gap(seed: u64, instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let axis = |n: usize, rng: &mut ChaCha8Rng| {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        v.extend([0.0, 1.0]);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    for _ in 0..instances {
        let (n1, n2) = (rng.random_range(6..14), rng.random_range(6..14));
        let (x1, x2) = (axis(n1, &mut rng), axis(n2, &mut rng));
        let k1 = AugmentedKnotVector::new(&random_knots(&mut rng, 2), 3, 0.0, 1.0).unwrap();
        let k2 = AugmentedKnotVector::new(&random_knots(&mut rng, 2), 3, 0.0, 1.0).unwrap();
        let b1 = design_matrix(&k1, &x1).unwrap().into_inner();
        let b2 = design_matrix(&k2, &x2).unwrap().into_inner();
        let y = DMatrix::from_fn(x1.len(), x2.len(), |_, _| rng.random_range(-1.0..1.0));
        let (gamma, _) = kron_lstsq(&b1, &b2, &y);

        // vec(Y) with the second index fastest pairs with B1 ⊗ B2.
        let yvec = DMatrix::from_iterator(y.len(), 1, y.transpose().iter().copied());
        let direct = lstsq(&kron(&b1, &b2), &yvec).x;
        for (a, b) in gamma.transpose().iter().zip(direct.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// `SS / ||Y||²` for noiseless samples of random splines refitted on their
/// own knots: one line, one grid and one 3-d scattered instance per trial.
/// Returns the worst ratio per mode.
pub fn exact_recovery_ratios(seed: u64, trials: usize) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0_f64; 3];
    let q = 2;
    let basis = |rng: &mut ChaCha8Rng| AugmentedKnotVector::new(&random_knots(rng, 4), q + 1, 0.0, 1.0).unwrap();
    let coefs = |len: usize, rng: &mut ChaCha8Rng| -> Vec<f64> { (0..len).map(|_| rng.random_range(-2.0..2.0)).collect() };
    let sorted = |n: usize, rng: &mut ChaCha8Rng| {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let norm2 = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>();
    for _ in 0..trials {
        // Line.
        let kv = basis(&mut rng);
        let gamma = coefs(kv.num_basis(), &mut rng);
        let x = sorted(60, &mut rng);
        let y: Vec<f64> = x.iter().map(|&v| kv.combine(&gamma, v).unwrap()).collect();
        let knots = SelectedKnots { lambda: 0.0, indices: vec![], knots: kv.interior().to_vec() };
        let m = fit_spline_in(&y, &x, &knots, q, (0.0, 1.0)).unwrap();
        worst[0] = worst[0].max(m.ss / norm2(&y));

        // Grid.
        let (k1, k2) = (basis(&mut rng), basis(&mut rng));
        let g = DMatrix::from_column_slice(k1.num_basis(), k2.num_basis(), &coefs(k1.num_basis() * k2.num_basis(), &mut rng));
        let (a1, a2) = (sorted(25, &mut rng), sorted(30, &mut rng));
        let mut y = Vec::with_capacity(a1.len() * a2.len());
        for &u in &a1 {
            let bu = DVector::from_vec(k1.eval_all(u).unwrap());
            for &v in &a2 {
                let bv = DVector::from_vec(k2.eval_all(v).unwrap());
                y.push((bu.transpose() * &g * bv)[0]);
            }
        }
        let data = GridDataset::new(a1, a2, y.clone()).unwrap();
        let cell = ebic_2d(&data, &k1, &k2, q).unwrap();
        worst[1] = worst[1].max(cell.ss / norm2(&y));

        // Scattered, three dimensions.
        let bases = [basis(&mut rng), basis(&mut rng), basis(&mut rng)];
        let shape: Vec<usize> = bases.iter().map(|b| b.num_basis()).collect();
        let gamma = coefs(shape.iter().product(), &mut rng);
        let points: Vec<Vec<f64>> = (0..600).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<f64> = points
            .iter()
            .map(|p| {
                let b: Vec<Vec<f64>> = bases.iter().zip(p).map(|(kv, &v)| kv.eval_all(v).unwrap()).collect();
                let mut total = 0.0;
                for i in 0..shape[0] {
                    for j in 0..shape[1] {
                        for k in 0..shape[2] {
                            total += gamma[(i * shape[1] + j) * shape[2] + k] * b[0][i] * b[1][j] * b[2][k];
                        }
                    }
                }
                total
            })
            .collect();
        let data = ScatteredDataset::new(points, y.clone()).unwrap();
        let config = FitConfig { q, bounds: Some(vec![(0.0, 1.0); 3]), ..FitConfig::default() };
        let m = fit_tensor_scattered(&data, &bases, &config).unwrap().expect("fewer coefficients than points");
        worst[2] = worst[2].max(m.ss / norm2(&y));
    }
    worst
}
