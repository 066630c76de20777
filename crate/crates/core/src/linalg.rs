//! Dense kernels: a row-major matrix type, truncated SVD, rank-r projection,
//! Moore–Penrose pseudoinverse and index-based submatrix extraction.
//!
//! Small matrices, and truncations that keep a large share of the spectrum,
//! go through a full thin SVD (faer, single-threaded so results are
//! reproducible bit for bit) followed by truncation. Otherwise the top `r`
//! triplets come from a block Krylov iteration with full
//! reorthogonalization, which touches the matrix only through products with
//! vectors and keeps `O((rows + cols) k)` working memory for a basis of `k`
//! vectors. It stops once every kept triplet has a residual near roundoff
//! and hands over to the full SVD if the basis outgrows half the dimension.

use std::fmt;

use faer::MatRef;

use crate::error::{RcurcError, Result};

/// Singular values at or below `PINV_RTOL * sigma_max` are treated as zero
/// by the pseudoinverse.
pub const PINV_RTOL: f64 = 1e-12;

/// Row-major dense real matrix. All entries are finite.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(i)[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(RcurcError::arg(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(RcurcError::arg(format!(
                "non-finite value at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds a matrix from nested rows. Panics on ragged input or non-finite
    /// values; meant for literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), n_cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::new(n_rows, n_cols, data).expect("invalid matrix literal")
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    /// `self * x`.
    pub(crate) fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T * y`.
    pub(crate) fn mul_t_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &w) in y.iter().enumerate() {
            if w != 0.0 {
                axpy(w, self.row(i), &mut out);
            }
        }
        out
    }

    pub(crate) fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self * other`. Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (p, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(p)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_same_shape(self, other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn check_same_shape(a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(RcurcError::arg(format!(
            "shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Rank-r singular triplets `u * diag(sigma) * v^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdR {
    /// `n1 x r`, orthonormal columns.
    pub u: DenseMatrix,
    /// Nonincreasing, nonnegative.
    pub sigma: Vec<f64>,
    /// `n2 x r`, orthonormal columns.
    pub v: DenseMatrix,
}

impl SvdR {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let (n1, n2) = (self.u.rows(), self.v.rows());
        let mut out = DenseMatrix::zeros(n1, n2);
        for i in 0..n1 {
            let ui = self.u.row(i);
            let row = out.row_mut(i);
            for (t, (&s, &uit)) in self.sigma.iter().zip(ui).enumerate() {
                let w = s * uit;
                if w == 0.0 {
                    continue;
                }
                for (j, o) in row.iter_mut().enumerate() {
                    *o += w * self.v.get(j, t);
                }
            }
        }
        out
    }

    /// Reciprocals of the singular values above the pseudoinverse cutoff;
    /// zero for the rest.
    pub fn inv_sigma(&self) -> Vec<f64> {
        let tol = PINV_RTOL * self.sigma.first().copied().unwrap_or(0.0);
        self.sigma
            .iter()
            .map(|&s| if s > tol && s > 0.0 { 1.0 / s } else { 0.0 })
            .collect()
    }

    /// Number of singular values above the pseudoinverse cutoff.
    pub fn numerical_rank(&self) -> usize {
        self.inv_sigma().iter().filter(|&&s| s != 0.0).count()
    }
}

/// Top-`r` singular triplets of `m`.
pub fn truncated_svd(m: &DenseMatrix, r: usize) -> Result<SvdR> {
    truncated_svd_owned(m.clone(), r)
}

/// As [`truncated_svd`], consuming the input.
pub fn truncated_svd_owned(m: DenseMatrix, r: usize) -> Result<SvdR> {
    let (rows, cols) = m.shape();
    if r == 0 || r > rows.min(cols) {
        return Err(RcurcError::arg(format!(
            "rank {r} out of range for {rows}x{cols} matrix"
        )));
    }
    if rows.min(cols) >= KRYLOV_MIN_DIM && 4 * r <= rows.min(cols) {
        if let Some(svd) = block_krylov_svd(&m, r)? {
            return Ok(svd);
        }
    }
    full_svd_truncated(m, r)
}

/// Smallest dimension routed to [`block_krylov_svd`].
const KRYLOV_MIN_DIM: usize = 64;

/// Extra block columns beyond `r`; they speed up convergence.
const KRYLOV_OVERSAMPLE: usize = 5;

/// Basis size, in blocks, that triggers a restart.
const KRYLOV_RESTART_BLOCKS: usize = 8;

const KRYLOV_MAX_RESTARTS: usize = 100;

/// Ritz residual, relative to the largest Ritz value, below which a
/// triplet counts as converged.
const KRYLOV_RTOL: f64 = 1e-12;

fn full_svd_truncated(m: DenseMatrix, r: usize) -> Result<SvdR> {
    let (rows, cols) = m.shape();
    let svd = MatRef::from_row_major_slice(&m.data, rows, cols)
        .thin_svd()
        .map_err(|e| RcurcError::Numeric(format!("SVD failed on {rows}x{cols}: {e:?}")))?;
    drop(m);
    let (u_all, s_all, v_all) = (svd.U(), svd.S().column_vector(), svd.V());

    let mut order: Vec<usize> = (0..s_all.nrows()).collect();
    order.sort_by(|&a, &b| s_all[b].total_cmp(&s_all[a]).then(a.cmp(&b)));
    order.truncate(r);

    let u = DenseMatrix::from_fn(rows, r, |i, t| u_all[(i, order[t])]);
    let v = DenseMatrix::from_fn(cols, r, |j, t| v_all[(j, order[t])]);
    let sigma = order.iter().map(|&k| s_all[k].max(0.0)).collect();
    Ok(SvdR { u, sigma, v })
}

/// Top-`r` triplets by block Krylov iteration on the left: `Q` is an
/// orthonormal basis of `span{A W, (A A^T) A W, ...}` for a fixed block `W`
/// of `r + KRYLOV_OVERSAMPLE` columns, and the triplets are those of
/// `Q Q^T A`, read off the SVD of the short matrix `Q^T A`. With
/// `(theta, u, v)` such a triplet, `A^T u = theta v` holds exactly and the
/// residual is `||(I - Q Q^T) A v||`. A block of at least `r` columns finds
/// every copy of a repeated singular value among the top `r`.
///
/// When `Q` reaches `KRYLOV_RESTART_BLOCKS` blocks it is replaced by its
/// leading block of Ritz vectors and the iteration resumes from there.
/// `None` when the restart budget runs out or the range of `A` has fewer
/// than `r` dimensions.
fn block_krylov_svd(a: &DenseMatrix, r: usize) -> Result<Option<SvdR>> {
    let (rows, cols) = a.shape();
    let scale = a.frob_norm();
    if scale == 0.0 {
        return Ok(None);
    }
    let negligible = 1e-12 * scale;
    let block = r + KRYLOV_OVERSAMPLE;
    let cap = (KRYLOV_RESTART_BLOCKS * block).min(rows.min(cols) / 2);
    if cap < block {
        return Ok(None);
    }
    let mut probe = ProbeVectors::new();

    // Columns of Q and, aligned with them, A^T q.
    let mut qs: Vec<Vec<f64>> = Vec::with_capacity(cap);
    let mut ats: Vec<Vec<f64>> = Vec::with_capacity(cap);
    let mut next: Vec<Vec<f64>> = (0..block).map(|_| a.mul_vec(&probe.vector(cols))).collect();
    let mut restarts = 0;
    loop {
        let before = qs.len();
        for mut z in next.drain(..) {
            if qs.len() >= cap {
                break;
            }
            reorthogonalize(&mut z, &qs);
            let len = norm(&z);
            if len <= negligible {
                continue;
            }
            scale_in_place(&mut z, 1.0 / len);
            ats.push(a.mul_t_vec(&z));
            qs.push(z);
        }
        let grown = qs.len() > before;
        let full = qs.len() >= cap;
        if qs.len() < r {
            if !grown {
                return Ok(None);
            }
        } else {
            let keep = if full { block.min(qs.len()) } else { r };
            let short = DenseMatrix::from_fn(qs.len(), cols, |t, j| ats[t][j]);
            let small = full_svd_truncated(short, keep)?;
            let ritz: Vec<Vec<f64>> = (0..keep)
                .map(|c| {
                    let mut u = vec![0.0; rows];
                    for (t, q) in qs.iter().enumerate() {
                        axpy(small.u.get(t, c), q, &mut u);
                    }
                    u
                })
                .collect();
            let tol = KRYLOV_RTOL * small.sigma[0];
            let converged = (0..r).all(|c| {
                let v: Vec<f64> = (0..cols).map(|j| small.v.get(j, c)).collect();
                let mut res = a.mul_vec(&v);
                reorthogonalize(&mut res, &qs);
                norm(&res) <= tol
            });
            // An exhausted basis spans the range of A, so Q Q^T A = A.
            if converged || !grown {
                return Ok(Some(SvdR {
                    u: DenseMatrix::from_fn(rows, r, |i, c| ritz[c][i]),
                    sigma: small.sigma[..r].to_vec(),
                    v: DenseMatrix::from_fn(cols, r, |j, c| small.v.get(j, c)),
                }));
            }
            if full {
                restarts += 1;
                if restarts > KRYLOV_MAX_RESTARTS {
                    return Ok(None);
                }
                qs = ritz;
                ats = qs.iter().map(|u| a.mul_t_vec(u)).collect();
                next = ats.iter().map(|y| a.mul_vec(y)).collect();
                continue;
            }
        }
        next = ats[before..].iter().map(|y| a.mul_vec(y)).collect();
    }
}

/// Deterministic pseudo-random directions (SplitMix64).
struct ProbeVectors {
    state: u64,
}

impl ProbeVectors {
    fn new() -> Self {
        Self {
            state: 0x9E37_79B9_7F4A_7C15,
        }
    }

    fn next_unit_interval(&mut self) -> f64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    fn vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_unit_interval()).collect()
    }
}

/// Two passes of classical Gram-Schmidt against orthonormal `basis`.
fn reorthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, x);
            axpy(-c, q, x);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (o, &v) in y.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

fn scale_in_place(x: &mut [f64], s: f64) {
    for v in x {
        *v *= s;
    }
}

/// All singular values of `m`, nonincreasing.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    let mut sv = MatRef::from_row_major_slice(&m.data, rows, cols)
        .singular_values()
        .map_err(|e| RcurcError::Numeric(format!("SVD failed on {rows}x{cols}: {e:?}")))?;
    for s in &mut sv {
        *s = s.max(0.0);
    }
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Number of singular values above `rtol * sigma_max`.
pub fn numerical_rank(m: &DenseMatrix, rtol: f64) -> Result<usize> {
    let sv = singular_values(m)?;
    let Some(&max) = sv.first() else {
        return Ok(0);
    };
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rtol * max).count())
}

/// Best rank-`r` approximation of `m` in Frobenius norm.
pub fn rank_r_project(m: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    Ok(truncated_svd(m, r)?.reconstruct())
}

/// `v * diag(1/sigma) * u^T`, zero-filling singular values at or below
/// `PINV_RTOL * sigma_max`.
pub fn pinv_rank_r(f: &SvdR) -> DenseMatrix {
    let inv = f.inv_sigma();
    let (n2, n1) = (f.v.rows(), f.u.rows());
    let mut out = DenseMatrix::zeros(n2, n1);
    for j in 0..n2 {
        let row = out.row_mut(j);
        for (t, &s) in inv.iter().enumerate() {
            let w = s * f.v.get(j, t);
            if w == 0.0 {
                continue;
            }
            for (i, o) in row.iter_mut().enumerate() {
                *o += w * f.u.get(i, t);
            }
        }
    }
    out
}

/// Row or column selector for [`submatrix`].
#[derive(Clone, Copy, Debug)]
pub enum Sel<'a> {
    All,
    Idx(&'a [usize]),
}

impl Sel<'_> {
    fn resolve(self, n: usize, axis: &str) -> Result<Vec<usize>> {
        match self {
            Sel::All => Ok((0..n).collect()),
            Sel::Idx(idx) => {
                if let Some(&bad) = idx.iter().find(|&&k| k >= n) {
                    return Err(RcurcError::arg(format!(
                        "{axis} index {bad} out of range (dimension {n})"
                    )));
                }
                Ok(idx.to_vec())
            }
        }
    }
}

pub fn submatrix(m: &DenseMatrix, rows: Sel<'_>, cols: Sel<'_>) -> Result<DenseMatrix> {
    let ri = rows.resolve(m.rows(), "row")?;
    let ci = cols.resolve(m.cols(), "column")?;
    Ok(DenseMatrix::from_fn(ri.len(), ci.len(), |a, b| {
        m.get(ri[a], ci[b])
    }))
}

pub fn frob_inner(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    check_same_shape(a, b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) {
        let diff = a.sub(b).unwrap().frob_norm();
        assert!(diff <= tol, "diff {diff} > {tol}\n{a:?}\n{b:?}");
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn svd_of_diagonal_truncates() {
        let m = DenseMatrix::from_diag(&[3.0, 2.0, 1.0]);
        let f = truncated_svd(&m, 2).unwrap();
        assert!((f.sigma[0] - 3.0).abs() < 1e-14);
        assert!((f.sigma[1] - 2.0).abs() < 1e-14);
        assert_close(&f.reconstruct(), &DenseMatrix::from_diag(&[3.0, 2.0, 0.0]), 1e-13);
    }

    #[test]
    fn full_rank_identity_is_reproduced() {
        let id = DenseMatrix::identity(4);
        assert_close(&rank_r_project(&id, 4).unwrap(), &id, 1e-13);
    }

    #[test]
    fn rank_out_of_range() {
        let m = DenseMatrix::zeros(3, 2);
        assert!(matches!(truncated_svd(&m, 0), Err(RcurcError::Argument(_))));
        assert!(matches!(truncated_svd(&m, 3), Err(RcurcError::Argument(_))));
    }

    #[test]
    fn rank_one_projection_of_diagonal() {
        let m = DenseMatrix::from_diag(&[3.0, 2.0, 1.0]);
        let p = rank_r_project(&m, 1).unwrap();
        assert_close(&p, &DenseMatrix::from_diag(&[3.0, 0.0, 0.0]), 1e-13);
    }

    #[test]
    fn zero_matrix_is_fixed() {
        let z = DenseMatrix::zeros(4, 3);
        for r in 1..=3 {
            assert_close(&rank_r_project(&z, r).unwrap(), &z, 0.0);
        }
    }

    #[test]
    fn rank_two_matrix_unchanged() {
        let a = DenseMatrix::from_rows(&[[1.0], [2.0], [-1.0], [0.5]]);
        let b = DenseMatrix::from_rows(&[[1.0, 0.0, 3.0]]);
        let c = DenseMatrix::from_rows(&[[0.0], [1.0], [4.0], [-2.0]]);
        let d = DenseMatrix::from_rows(&[[2.0, -1.0, 1.0]]);
        let m = a.matmul(&b).add(&c.matmul(&d)).unwrap();
        let p = rank_r_project(&m, 2).unwrap();
        assert!(p.sub(&m).unwrap().frob_norm() <= 1e-10 * m.frob_norm());
    }

    #[test]
    fn pinv_scalar() {
        let f = truncated_svd(&DenseMatrix::from_rows(&[[2.0]]), 1).unwrap();
        assert_close(&pinv_rank_r(&f), &DenseMatrix::from_rows(&[[0.5]]), 1e-15);
    }

    #[test]
    fn pinv_zero_fills_null_directions() {
        let f = truncated_svd(&DenseMatrix::from_diag(&[4.0, 0.0]), 2).unwrap();
        assert_close(&pinv_rank_r(&f), &DenseMatrix::from_diag(&[0.25, 0.0]), 1e-15);
    }

    #[test]
    fn pinv_of_orthogonal_is_transpose() {
        let (c, s) = (0.6_f64, 0.8_f64);
        let q = DenseMatrix::from_rows(&[[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]);
        let f = truncated_svd(&q, 3).unwrap();
        assert_close(&pinv_rank_r(&f), &q.transpose(), 1e-13);
    }

    #[test]
    fn pinv_of_wide_and_tall() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let f = truncated_svd(&m, 2).unwrap();
        let p = pinv_rank_r(&f);
        assert_eq!(p.shape(), (3, 2));
        assert_close(&m.matmul(&p).matmul(&m), &m, 1e-10);
        let mt = m.transpose();
        let ft = truncated_svd(&mt, 2).unwrap();
        assert_close(&pinv_rank_r(&ft), &p.transpose(), 1e-12);
    }

    #[test]
    fn submatrix_examples() {
        let magic = DenseMatrix::from_rows(&[[8.0, 1.0, 6.0], [3.0, 5.0, 7.0], [4.0, 9.0, 2.0]]);
        let first = submatrix(&magic, Sel::Idx(&[0]), Sel::All).unwrap();
        assert_eq!(first.data(), &[8.0, 1.0, 6.0]);

        let id = DenseMatrix::identity(3);
        let s = submatrix(&id, Sel::Idx(&[0, 2]), Sel::Idx(&[0, 2])).unwrap();
        assert_eq!(s, DenseMatrix::identity(2));

        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let s = submatrix(&m, Sel::Idx(&[1]), Sel::Idx(&[1])).unwrap();
        assert_eq!(s.data(), &[4.0]);

        assert!(submatrix(&m, Sel::Idx(&[2]), Sel::All).is_err());
        assert!(submatrix(&m, Sel::All, Sel::Idx(&[0, 5])).is_err());
    }

    #[test]
    fn frob_inner_examples() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(frob_inner(&a, &a).unwrap(), 30.0);
        assert_eq!(frob_inner(&a, &DenseMatrix::zeros(2, 2)).unwrap(), 0.0);
        let id = DenseMatrix::identity(2);
        let swap = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(frob_inner(&id, &swap).unwrap(), 0.0);
        assert!(frob_inner(&a, &DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn numerical_rank_counts() {
        let m = DenseMatrix::from_diag(&[5.0, 1.0, 1e-14, 0.0]);
        assert_eq!(numerical_rank(&m, 1e-10).unwrap(), 2);
        assert_eq!(numerical_rank(&DenseMatrix::zeros(3, 3), 1e-10).unwrap(), 0);
    }
}
