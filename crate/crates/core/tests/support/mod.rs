//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's linear algebra.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use rcurc::{CcsObservation, DenseMatrix};

/// Thin SVD by one-sided Jacobi rotations: `(u, sigma, v)` with `u` as
/// column vectors of length `rows`, `v` of length `cols`, `sigma`
/// nonincreasing, `min(rows, cols)` triplets.
pub struct Oracle {
    pub u: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

pub fn jacobi_svd(m: &DenseMatrix) -> Oracle {
    let (rows, cols) = m.shape();
    if rows < cols {
        let t = jacobi_svd(&transpose(m));
        return Oracle {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    // Columns of `a` converge to u_k sigma_k; `v` accumulates the rotations.
    let mut a: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| m.get(i, j)).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = a[p].iter().map(|x| x * x).sum();
                let beta: f64 = a[q].iter().map(|x| x * x).sum();
                let gamma: f64 = a[p].iter().zip(&a[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for (x, y) in rotate(&mut a, p, q) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
                for (x, y) in rotate(&mut v, p, q) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut triplets: Vec<(f64, Vec<f64>, Vec<f64>)> = a
        .into_iter()
        .zip(v)
        .map(|(col, vcol)| {
            let s = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u = if s > 0.0 {
                col.iter().map(|x| x / s).collect()
            } else {
                vec![0.0; rows]
            };
            (s, u, vcol)
        })
        .collect();
    triplets.sort_by(|x, y| y.0.total_cmp(&x.0));
    Oracle {
        sigma: triplets.iter().map(|t| t.0).collect(),
        u: triplets.iter().map(|t| t.1.clone()).collect(),
        v: triplets.into_iter().map(|t| t.2).collect(),
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize) -> impl Iterator<Item = (&mut f64, &mut f64)> {
    let (left, right) = cols.split_at_mut(q);
    left[p].iter_mut().zip(right[0].iter_mut())
}

pub fn transpose(m: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(m.cols(), m.rows(), |i, j| m.get(j, i))
}

pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows());
    DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
    })
}

pub fn frob_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn frob(a: &DenseMatrix) -> f64 {
    a.data().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Best rank-r approximation by truncating the full oracle SVD.
pub fn brute_rank_r(m: &DenseMatrix, r: usize) -> DenseMatrix {
    let svd = jacobi_svd(m);
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        (0..r.min(svd.sigma.len()))
            .map(|t| svd.u[t][i] * svd.sigma[t] * svd.v[t][j])
            .sum()
    })
}

/// Moore-Penrose pseudoinverse from the oracle SVD, dropping singular
/// values at or below `rtol * sigma_max`.
pub fn brute_pinv(m: &DenseMatrix, rtol: f64) -> DenseMatrix {
    let svd = jacobi_svd(m);
    let cut = svd.sigma.first().copied().unwrap_or(0.0) * rtol;
    DenseMatrix::from_fn(m.cols(), m.rows(), |i, j| {
        (0..svd.sigma.len())
            .filter(|&t| svd.sigma[t] > cut)
            .map(|t| svd.v[t][i] * svd.u[t][j] / svd.sigma[t])
            .sum()
    })
}

pub fn numerical_rank(m: &DenseMatrix, rtol: f64) -> usize {
    let svd = jacobi_svd(m);
    let cut = svd.sigma.first().copied().unwrap_or(0.0) * rtol;
    svd.sigma.iter().filter(|&&s| s > cut).count()
}

pub fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn low_rank<R: Rng>(rows: usize, cols: usize, r: usize, rng: &mut R) -> DenseMatrix {
    matmul(&gaussian(rows, r, rng), &gaussian(r, cols, rng))
}

/// One iteration of the algorithm on dense matrices, written directly from
/// its definition: threshold the observed residual, gradient steps on both
/// panels, union sum on the intersection block (unobserved block entries
/// keep `X_k`), rank-r truncation, write-back, and `X = C U^+ R`.
pub fn dense_step(
    obs: &CcsObservation,
    x: &DenseMatrix,
    rank: usize,
    eta_r: f64,
    eta_c: f64,
    zeta: f64,
) -> DenseMatrix {
    let (n1, n2) = obs.shape();
    let rows = obs.row_idx().values();
    let cols = obs.col_idx().values();
    let pos_r = |i: usize| rows.iter().position(|&v| v == i).unwrap();
    let pos_c = |j: usize| cols.iter().position(|&v| v == j).unwrap();
    let step = |y: f64, xv: f64| {
        let res = y - xv;
        let s = if res.abs() >= zeta { res } else { 0.0 };
        res - s
    };
    let mut r_panel = DenseMatrix::from_fn(rows.len(), n2, |a, j| x.get(rows[a], j));
    let mut c_panel = DenseMatrix::from_fn(n1, cols.len(), |i, b| x.get(i, cols[b]));
    for (&(i, j), &y) in obs.omega_r().entries().iter().zip(obs.values_r()) {
        let a = pos_r(i);
        r_panel.set(a, j, r_panel.get(a, j) + eta_r * step(y, x.get(i, j)));
    }
    for (&(i, j), &y) in obs.omega_c().entries().iter().zip(obs.values_c()) {
        let b = pos_c(j);
        c_panel.set(i, b, c_panel.get(i, b) + eta_c * step(y, x.get(i, j)));
    }
    let core = DenseMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        let (i, j) = (rows[a], cols[b]);
        let (rv, cv) = (r_panel.get(a, j), c_panel.get(i, b));
        match (obs.omega_r().contains(i, j), obs.omega_c().contains(i, j)) {
            (true, true) => eta_r * eta_c / (eta_r + eta_c) * (rv / eta_r + cv / eta_c),
            (true, false) => rv,
            (false, true) => cv,
            (false, false) => x.get(i, j),
        }
    });
    let core = brute_rank_r(&core, rank);
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            r_panel.set(a, j, core.get(a, b));
            c_panel.set(i, b, core.get(a, b));
        }
    }
    matmul(&matmul(&c_panel, &brute_pinv(&core, 1e-12)), &r_panel)
}
