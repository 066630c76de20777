//! Synthetic low-rank-plus-sparse problems and checkers for incoherence,
//! sparsity and exact CUR reconstruction.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{RcurcError, Result};
use crate::linalg::{numerical_rank, pinv_rank_r, submatrix, truncated_svd, DenseMatrix, Sel};
use crate::sampling::{floor_count, IndexSet};

/// Relative singular-value cutoff used when counting numerical rank.
pub const RANK_RTOL: f64 = 1e-10;

/// Tolerance under which a CUR reconstruction counts as exact.
pub const CUR_EXACT_TOL: f64 = 1e-8;

/// `Y = X + S` with its generating parameters.
#[derive(Clone, Debug)]
pub struct SyntheticProblem {
    pub x_true: DenseMatrix,
    pub s_true: DenseMatrix,
    pub y: DenseMatrix,
    pub rank: usize,
    pub alpha: f64,
    pub amp: f64,
}

impl SyntheticProblem {
    /// Draws `X = W V^T`, then the outliers, from `rng` in that order.
    pub fn generate<R: Rng + ?Sized>(
        n1: usize,
        n2: usize,
        rank: usize,
        alpha: f64,
        amp: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let x_true = gen_low_rank(n1, n2, rank, rng)?;
        let s_true = gen_sparse_outliers(&x_true, alpha, amp, rng)?;
        let y = x_true.add(&s_true)?;
        Ok(Self {
            x_true,
            s_true,
            y,
            rank,
            alpha,
            amp,
        })
    }
}

/// `W V^T` with `W` (`n1 x r`) and `V` (`n2 x r`) filled with independent
/// standard normals, `W` drawn first.
pub fn gen_low_rank<R: Rng + ?Sized>(n1: usize, n2: usize, r: usize, rng: &mut R) -> Result<DenseMatrix> {
    if r == 0 || r > n1.min(n2) {
        return Err(RcurcError::arg(format!("rank {r} out of range for {n1}x{n2}")));
    }
    let mut normal = || -> f64 { StandardNormal.sample(rng) };
    let w = DenseMatrix::from_fn(n1, r, |_, _| normal());
    let v = DenseMatrix::from_fn(n2, r, |_, _| normal());
    Ok(w.matmul(&v.transpose()))
}

/// Sparse outliers for `x`.
///
/// Each row receives `floor(alpha * n2)` distinct columns, chosen uniformly
/// among columns that still hold fewer than `floor(alpha * n1)` outliers. A
/// row that finds too few open columns takes all of them. Values are uniform
/// on `[-amp * m, amp * m]` with `m` the mean absolute entry of `x`.
pub fn gen_sparse_outliers<R: Rng + ?Sized>(
    x: &DenseMatrix,
    alpha: f64,
    amp: f64,
    rng: &mut R,
) -> Result<DenseMatrix> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(RcurcError::arg(format!("alpha = {alpha} must lie in [0, 0.5)")));
    }
    if !(amp > 0.0 && amp.is_finite()) {
        return Err(RcurcError::arg(format!("amplification {amp} must be positive")));
    }
    let (n1, n2) = x.shape();
    let mut s = DenseMatrix::zeros(n1, n2);
    let per_row = floor_count(alpha * n2 as f64);
    let col_cap = floor_count(alpha * n1 as f64);
    if per_row == 0 || col_cap == 0 {
        return Ok(s);
    }

    let mut col_hits = vec![0usize; n2];
    let mut support: Vec<Vec<usize>> = Vec::with_capacity(n1);
    let mut open: Vec<usize> = Vec::with_capacity(n2);
    for _ in 0..n1 {
        open.clear();
        open.extend((0..n2).filter(|&j| col_hits[j] < col_cap));
        let take = per_row.min(open.len());
        for t in 0..take {
            let pick = rng.random_range(t..open.len());
            open.swap(t, pick);
        }
        let mut cols = open[..take].to_vec();
        cols.sort_unstable();
        for &j in &cols {
            col_hits[j] += 1;
        }
        support.push(cols);
    }

    let mean_abs = x.data().iter().map(|v| v.abs()).sum::<f64>() / (n1 * n2) as f64;
    let bound = amp * mean_abs;
    if bound == 0.0 {
        return Ok(s);
    }
    let dist =
        Uniform::new_inclusive(-bound, bound).map_err(|e| RcurcError::arg(format!("outlier range: {e}")))?;
    for (i, cols) in support.iter().enumerate() {
        for &j in cols {
            s.set(i, j, dist.sample(rng));
        }
    }
    Ok(s)
}

/// Smallest `mu` for which the rank-`r` compact SVD of `x` is
/// `mu`-incoherent: `max(n1/r * ||U||_{2,inf}^2, n2/r * ||V||_{2,inf}^2)`.
pub fn incoherence_mu(x: &DenseMatrix, r: usize) -> Result<f64> {
    let f = truncated_svd(x, r)?;
    let (n1, n2) = x.shape();
    let max_row_sq = |m: &DenseMatrix| {
        (0..m.rows())
            .map(|i| m.row(i).iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mu_u = n1 as f64 / r as f64 * max_row_sq(&f.u);
    let mu_v = n2 as f64 / r as f64 * max_row_sq(&f.v);
    Ok(mu_u.max(mu_v))
}

/// Smallest `alpha` for which `s` is `alpha`-sparse: the largest fraction of
/// nonzeros in any row or column.
pub fn sparsity_alpha(s: &DenseMatrix) -> f64 {
    let (n1, n2) = s.shape();
    if n1 == 0 || n2 == 0 {
        return 0.0;
    }
    let mut col_nnz = vec![0usize; n2];
    let mut max_row = 0usize;
    for i in 0..n1 {
        let mut nnz = 0;
        for (j, &v) in s.row(i).iter().enumerate() {
            if v != 0.0 {
                nnz += 1;
                col_nnz[j] += 1;
            }
        }
        max_row = max_row.max(nnz);
    }
    let max_col = col_nnz.into_iter().max().unwrap_or(0);
    (max_row as f64 / n2 as f64).max(max_col as f64 / n1 as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurCheck {
    pub ok: bool,
    /// `||X - C U^+ R||_F / ||X||_F`, or the absolute error when `X = 0`.
    pub rel_err: f64,
}

/// Reconstructs `x` from its skeleton on rows `I` and columns `J` and reports
/// how close `C U^+ R` comes to `x`.
pub fn cur_exact_check(x: &DenseMatrix, row_idx: &IndexSet, col_idx: &IndexSet) -> Result<CurCheck> {
    if row_idx.universe() != x.rows() || col_idx.universe() != x.cols() {
        return Err(RcurcError::arg("index sets do not match matrix shape"));
    }
    if row_idx.is_empty() || col_idx.is_empty() {
        return Err(RcurcError::arg("empty index set"));
    }
    let rows = Sel::Idx(row_idx.values());
    let cols = Sel::Idx(col_idx.values());
    let c = submatrix(x, Sel::All, cols)?;
    let u = submatrix(x, rows, cols)?;
    let r = submatrix(x, rows, Sel::All)?;
    let full = truncated_svd(&u, u.rows().min(u.cols()))?;
    let approx = c.matmul(&pinv_rank_r(&full)).matmul(&r);
    let err = x.sub(&approx)?.frob_norm();
    let norm = x.frob_norm();
    let rel_err = if norm > 0.0 { err / norm } else { err };
    Ok(CurCheck {
        ok: rel_err <= CUR_EXACT_TOL,
        rel_err,
    })
}

/// Numerical rank of the intersection block `[x]_{I,J}`.
pub fn core_rank(x: &DenseMatrix, row_idx: &IndexSet, col_idx: &IndexSet) -> Result<usize> {
    let u = submatrix(x, Sel::Idx(row_idx.values()), Sel::Idx(col_idx.values()))?;
    numerical_rank(&u, RANK_RTOL)
}
