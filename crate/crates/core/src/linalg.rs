//! Small dense and banded least-squares kernels.
//!
//! Dense problems go through a Householder QR with column pivoting; when the
//! pivoted diagonal reveals a numerically rank-deficient design the minimum-norm
//! solution is taken from an SVD instead. Banded problems (the trend-filtering
//! dual) use a row-sequential Givens QR whose triangular factor keeps the band.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on the pivoted `R` diagonal below which a column is
/// treated as linearly dependent.
pub const RANK_RCOND: f64 = 1e-10;

/// Result of a dense least-squares solve.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    /// Coefficients, one column per right-hand side.
    pub x: DMatrix<f64>,
    /// Numerical rank of the design.
    pub rank: usize,
}

impl LstsqSolution {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.x.nrows()
    }
}

/// Minimises `||b - a x||_2` column by column.
///
/// Full-rank designs are solved by pivoted QR. Rank-deficient designs get the
/// minimum-norm solution.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> LstsqSolution {
    assert_eq!(a.nrows(), b.nrows(), "lstsq: row count mismatch");
    let (n, p) = a.shape();
    let k = b.ncols();
    if p == 0 {
        return LstsqSolution { x: DMatrix::zeros(0, k), rank: 0 };
    }

    let mut r = a.clone();
    let mut rhs = b.clone();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut norms: Vec<f64> = (0..p).map(|j| r.column(j).norm_squared()).collect();    let steps = n.min(p);
    let mut diag = vec![0.0; steps];

    for i in 0..steps {
        // Bring the column with the largest remaining norm forward.
        let (piv, _) = norms[i..]
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
        let piv = piv + i;
        if piv != i {
            r.swap_columns(i, piv);
            norms.swap(i, piv);
            perm.swap(i, piv);
        }

        let alpha = r.view((i, i), (n - i, 1)).norm();
        if alpha == 0.0 {
            diag[i] = 0.0;
            continue;
        }
        let x0 = r[(i, i)];
        let beta = if x0 >= 0.0 { -alpha } else { alpha };
        // v = x - beta e1, stored in place below the diagonal.
        let v0 = x0 - beta;
        let mut v = DVector::zeros(n - i);
        v[0] = v0;
        for row in (i + 1)..n {
            v[row - i] = r[(row, i)];
        }
        let vnorm2 = v.norm_squared();
        diag[i] = beta;
        r[(i, i)] = beta;
        for row in (i + 1)..n {
            r[(row, i)] = 0.0;
        }
        if vnorm2 > 0.0 {
            for j in (i + 1)..p {
                let dot: f64 = (0..n - i).map(|t| v[t] * r[(i + t, j)]).sum();
                let f = 2.0 * dot / vnorm2;
                for t in 0..n - i {
                    r[(i + t, j)] -= f * v[t];
                }
            }
            for j in 0..k {
                let dot: f64 = (0..n - i).map(|t| v[t] * rhs[(i + t, j)]).sum();
                let f = 2.0 * dot / vnorm2;
                for t in 0..n - i {
                    rhs[(i + t, j)] -= f * v[t];
                }
            }
        }
        // Recomputed rather than downdated; same order of work as the reflections.
        for j in (i + 1)..p {
            norms[j] = r.view((i + 1, j), (n - i - 1, 1)).norm_squared();
        }
    }

    let lead = diag.first().map(|d| d.abs()).unwrap_or(0.0);
    let rank = diag
        .iter()
        .take_while(|d| d.abs() > RANK_RCOND * lead && lead > 0.0)
        .count();

    if rank < p {
        return LstsqSolution { x: min_norm_svd(a, b), rank };
    }

    let mut x = DMatrix::zeros(p, k);
    for col in 0..k {
        let mut z = vec![0.0; p];
        for i in (0..p).rev() {
            let mut s = rhs[(i, col)];
            for j in (i + 1)..p {
                s -= r[(i, j)] * z[j];
            }
            z[i] = s / r[(i, i)];
        }
        for (j, &orig) in perm.iter().enumerate() {
            x[(orig, col)] = z[j];
        }
    }
    LstsqSolution { x, rank }
}

fn min_norm_svd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (RANK_RCOND * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("SVD computed with both factors")
}

/// Convenience wrapper for a single right-hand side.
pub fn lstsq_vec(a: &DMatrix<f64>, b: &[f64]) -> (Vec<f64>, usize) {
    let rhs = DMatrix::from_column_slice(b.len(), 1, b);
    let sol = lstsq(a, &rhs);
    (sol.x.column(0).iter().copied().collect(), sol.rank)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Row-sequential Givens QR for tall matrices whose rows have a contiguous
/// window of at most `width` nonzero columns, with window starts
/// non-decreasing from row to row.
///
/// The triangular factor then keeps an upper bandwidth of `width - 1`, so a
/// factorisation costs `O(rows * width^2)`.
#[derive(Debug, Clone)]
pub struct StaircaseQr {
    cols: usize,
    width: usize,
    nrhs: usize,
    /// Row `j` holds `R[j, j..j + width]`.
    r: Vec<f64>,
    z: Vec<f64>,
    filled: Vec<bool>,
    /// Input row currently holding `R` row `j`.
    slot: Vec<usize>,
    rows: usize,
    /// Givens rotations `(slot_a, slot_b, c, s)` in application order.
    rotations: Vec<(usize, usize, f64, f64)>,
}

impl StaircaseQr {
    pub fn new(cols: usize, width: usize, nrhs: usize) -> Self {
        Self {
            cols,
            width,
            nrhs,
            r: vec![0.0; cols * width],
            z: vec![0.0; cols * nrhs],
            filled: vec![false; cols],
            slot: vec![0; cols],
            rows: 0,
            rotations: Vec::new(),
        }
    }

    /// Folds one matrix row into the factorisation. `values[t]` is the entry in
    /// column `first + t`; `rhs[c]` the row's entry in right-hand side `c`.
    pub fn add_row(&mut self, first: usize, values: &[f64], rhs: &[f64]) {
        let w = self.width;
        debug_assert!(values.len() <= w);
        let id = self.rows;
        self.rows += 1;
        if values.iter().all(|v| *v == 0.0) {
            return;
        }
        let mut row = vec![0.0; w + 1];
        row[..values.len()].copy_from_slice(values);
        let mut rr = rhs.to_vec();
        let mut start = first;
        while start < self.cols {
            if row[0] == 0.0 {
                row.rotate_left(1);
                row[w] = 0.0;
                start += 1;
                continue;
            }
            let j = start;
            if !self.filled[j] {
                let base = j * w;
                let len = w.min(self.cols - j);
                self.r[base..base + len].copy_from_slice(&row[..len]);
                self.z[j * self.nrhs..(j + 1) * self.nrhs].copy_from_slice(&rr);
                self.filled[j] = true;
                self.slot[j] = id;
                return;
            }
            let base = j * w;
            let a = self.r[base];
            let b = row[0];
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            self.rotations.push((self.slot[j], id, c, s));
            let len = w.min(self.cols - j);
            for t in 0..len {
                let rt = self.r[base + t];
                let wt = row[t];
                self.r[base + t] = c * rt + s * wt;
                row[t] = -s * rt + c * wt;
            }
            for (cidx, rv) in rr.iter_mut().enumerate() {
                let zt = self.z[j * self.nrhs + cidx];
                self.z[j * self.nrhs + cidx] = c * zt + s * *rv;
                *rv = -s * zt + c * *rv;
            }
            row[0] = 0.0;
            row.rotate_left(1);
            row[w] = 0.0;
            start += 1;
        }
    }

    /// Residual of projecting `b` onto the column space: `(I - Q Qᵀ) b`,
    /// computed through the stored rotations. Unlike `b - A x`, its error does
    /// not scale with `||A|| ||x||`.
    pub fn project_out(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.rows, "vector length must match the number of rows added");
        let mut z = b.to_vec();
        for &(i, k, c, s) in &self.rotations {
            let (zi, zk) = (z[i], z[k]);
            z[i] = c * zi + s * zk;
            z[k] = -s * zi + c * zk;
        }
        for (j, &f) in self.filled.iter().enumerate() {
            if f {
                z[self.slot[j]] = 0.0;
            }
        }
        for &(i, k, c, s) in self.rotations.iter().rev() {
            let (zi, zk) = (z[i], z[k]);
            z[i] = c * zi - s * zk;
            z[k] = s * zi + c * zk;
        }
        z
    }

    /// Back-substitutes; returns one solution vector per right-hand side, or
    /// `None` when a column never received a pivot.
    pub fn solve(&self) -> Option<Vec<Vec<f64>>> {
        if self.filled.iter().any(|f| !f) {
            return None;
        }
        let w = self.width;
        let mut out = vec![vec![0.0; self.cols]; self.nrhs];
        for (cidx, x) in out.iter_mut().enumerate() {
            for j in (0..self.cols).rev() {
                let base = j * w;
                let mut s = self.z[j * self.nrhs + cidx];
                for t in 1..w.min(self.cols - j) {
                    s -= self.r[base + t] * x[j + t];
                }
                let d = self.r[base];
                if d == 0.0 {
                    return None;
                }
                x[j] = s / d;
            }
        }
        Some(out)
    }
}
