//! Robust CUR completion.
//!
//! Each iteration thresholds the observed residual to update the outlier
//! estimate, takes gradient steps on the row panel `R` and column panel `C`,
//! merges the two updates of the intersection block with the union sum,
//! truncates that block to rank `r`, and writes it back into both panels.
//!
//! The low-rank estimate `X = C U^+ R` is never formed. Only two products
//! are kept between iterations: `C V_r` (`n1 x r`) and `R^T U_r`
//! (`n2 x r`), where `U_r diag(sigma) V_r^T` is the truncated core. They
//! reproduce `X` exactly, as `X = (C V_r) diag(sigma^+) (R^T U_r)^T`, and
//! every panel and entry of `X` the algorithm needs is read off them.
//! Working memory is O((n1 + n2) r + |I||J|) plus the observation itself.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{RcurcError, Result};
use crate::linalg::{truncated_svd_owned, DenseMatrix, SvdR};
use crate::sampling::{observation_rates, CcsObservation, IndexSet, Mask};

pub const DEFAULT_GAMMA: f64 = 0.65;
pub const DEFAULT_EPS: f64 = 1e-4;
pub const DEFAULT_MAX_ITERS: usize = 500;

/// Consecutive non-improving iterations before the solve is declared
/// stagnated.
pub const STAGNATION_WINDOW: usize = 10;
/// Minimum relative decrease of `e_k` that counts as improvement.
pub const STAGNATION_RTOL: f64 = 1e-12;

/// A parameter that is either given or derived from the observation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Setting {
    #[default]
    Auto,
    Value(f64),
}

impl Setting {
    fn or(self, auto: f64) -> f64 {
        match self {
            Setting::Auto => auto,
            Setting::Value(v) => v,
        }
    }
}

impl Serialize for Setting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Setting::Auto => s.serialize_str("auto"),
            Setting::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Setting::Value(v)),
            Raw::Text(t) if t == "auto" => Ok(Setting::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"auto\", got {t:?}"
            ))),
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Setting::Auto);
        }
        s.parse::<f64>()
            .map(Setting::Value)
            .map_err(|e| format!("{s:?}: {e}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub rank: usize,
    /// Row-panel step size; `Auto` is `1 / p_R`.
    #[serde(default)]
    pub eta_r: Setting,
    /// Column-panel step size; `Auto` is `1 / p_C`.
    #[serde(default)]
    pub eta_c: Setting,
    /// Initial threshold; `Auto` is the largest observed magnitude.
    #[serde(default)]
    pub zeta0: Setting,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// When false every `wall_ms` in the trace is 0, making traces
    /// reproducible byte for byte.
    #[serde(default = "default_true")]
    pub record_time: bool,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_eps() -> f64 {
    DEFAULT_EPS
}
fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}
fn default_true() -> bool {
    true
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            eta_r: Setting::Auto,
            eta_c: Setting::Auto,
            zeta0: Setting::Auto,
            gamma: DEFAULT_GAMMA,
            eps: DEFAULT_EPS,
            max_iters: DEFAULT_MAX_ITERS,
            record_time: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(RcurcError::arg("rank must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(RcurcError::arg(format!(
                "gamma = {} must lie in (0, 1)",
                self.gamma
            )));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(RcurcError::arg(format!("eps = {} must be positive", self.eps)));
        }
        if self.max_iters == 0 {
            return Err(RcurcError::arg("max_iters must be at least 1"));
        }
        for (name, s) in [("eta_r", self.eta_r), ("eta_c", self.eta_c)] {
            if let Setting::Value(v) = s {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(RcurcError::arg(format!("{name} = {v} must be positive")));
                }
            }
        }
        if let Setting::Value(v) = self.zeta0 {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(RcurcError::arg(format!("zeta0 = {v} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// Fills in the `Auto` settings from `obs`.
    pub fn resolve(&self, obs: &CcsObservation) -> Result<Params> {
        self.validate()?;
        let (p_r, p_c) = observation_rates(obs);
        let max_obs = obs
            .values_r()
            .iter()
            .chain(obs.values_c())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let auto_eta = |p: f64, name: &str| {
            if p > 0.0 {
                Ok(1.0 / p)
            } else {
                Err(RcurcError::arg(format!("{name} panel has no observations")))
            }
        };
        let eta_r = match self.eta_r {
            Setting::Auto => auto_eta(p_r, "row")?,
            Setting::Value(v) => v,
        };
        let eta_c = match self.eta_c {
            Setting::Auto => auto_eta(p_c, "column")?,
            Setting::Value(v) => v,
        };
        Ok(Params {
            eta_r,
            eta_c,
            zeta0: self.zeta0.or(max_obs),
            gamma: self.gamma,
        })
    }
}

/// Step sizes and threshold schedule with every `Auto` resolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub eta_r: f64,
    pub eta_c: f64,
    pub zeta0: f64,
    pub gamma: f64,
}

impl Params {
    pub fn zeta_at(&self, k: usize) -> f64 {
        zeta_at(self.zeta0, self.gamma, k)
    }
}

/// Threshold used while producing `S_{k+1}`: `gamma^k * zeta0`. The first
/// iteration (`k = 0`) uses `zeta0` undecayed.
pub fn zeta_at(zeta0: f64, gamma: f64, k: usize) -> f64 {
    gamma.powi(k as i32) * zeta0
}

/// Keeps `v` when `|v| >= zeta`, zero otherwise.
#[inline]
pub fn threshold(v: f64, zeta: f64) -> f64 {
    if v.abs() < zeta {
        0.0
    } else {
        v
    }
}

/// Entrywise [`threshold`].
pub fn hard_threshold(m: &DenseMatrix, zeta: f64) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| threshold(m.get(i, j), zeta))
}

/// Merges the row-panel and column-panel updates of the intersection block.
///
/// Entries observed only in the row panel take `r_blk`, only in the column
/// panel take `c_blk`, in both take `(eta_c * r + eta_r * c) / (eta_r + eta_c)`,
/// and unobserved entries are zero. Masks are in block coordinates.
pub fn union_sum(
    r_blk: &DenseMatrix,
    c_blk: &DenseMatrix,
    omega_r_core: &Mask,
    omega_c_core: &Mask,
    eta_r: f64,
    eta_c: f64,
) -> Result<DenseMatrix> {
    let shape = r_blk.shape();
    if c_blk.shape() != shape || omega_r_core.shape() != shape || omega_c_core.shape() != shape {
        return Err(RcurcError::arg("union_sum operands must share one shape"));
    }
    let denom = eta_r + eta_c;
    if denom == 0.0 || !denom.is_finite() {
        return Err(RcurcError::arg(format!(
            "step sizes {eta_r} + {eta_c} cannot weight the overlap"
        )));
    }
    let mut out = DenseMatrix::zeros(shape.0, shape.1);
    for &(i, j) in omega_r_core.entries() {
        let v = if omega_c_core.contains(i, j) {
            (eta_c * r_blk.get(i, j) + eta_r * c_blk.get(i, j)) / denom
        } else {
            r_blk.get(i, j)
        };
        out.set(i, j, v);
    }
    for &(i, j) in omega_c_core.entries() {
        if !omega_r_core.contains(i, j) {
            out.set(i, j, c_blk.get(i, j));
        }
    }
    Ok(out)
}

/// Implicit low-rank estimate `X = C U^+ R` on rows `I` and columns `J`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurFactors {
    row_idx: IndexSet,
    col_idx: IndexSet,
    rank: usize,
    core: SvdR,
    inv_sigma: Vec<f64>,
    /// `C V_r`, `n1 x r`.
    cv: DenseMatrix,
    /// `R^T U_r`, `n2 x r`.
    rt: DenseMatrix,
}

impl CurFactors {
    /// The estimate `X = 0`.
    pub fn zeros(row_idx: IndexSet, col_idx: IndexSet, rank: usize) -> Result<Self> {
        let (ni, nj) = (row_idx.len(), col_idx.len());
        if rank == 0 || rank > ni.min(nj) {
            return Err(RcurcError::arg(format!(
                "rank {rank} exceeds the {ni}x{nj} intersection block"
            )));
        }
        let basis = |n: usize| DenseMatrix::from_fn(n, rank, |i, t| if i == t { 1.0 } else { 0.0 });
        let core = SvdR {
            u: basis(ni),
            sigma: vec![0.0; rank],
            v: basis(nj),
        };
        Ok(Self {
            cv: DenseMatrix::zeros(row_idx.universe(), rank),
            rt: DenseMatrix::zeros(col_idx.universe(), rank),
            inv_sigma: vec![0.0; rank],
            core,
            row_idx,
            col_idx,
            rank,
        })
    }

    /// Builds factors from explicit panels `c = [X]_{:,J}`, `r_mat = [X]_{I,:}`
    /// and the (truncated) SVD `u` of the intersection block.
    pub fn from_panels(
        c: &DenseMatrix,
        u: SvdR,
        r_mat: &DenseMatrix,
        row_idx: IndexSet,
        col_idx: IndexSet,
        rank: usize,
    ) -> Result<Self> {
        let (n1, n2) = (row_idx.universe(), col_idx.universe());
        let (ni, nj) = (row_idx.len(), col_idx.len());
        if c.shape() != (n1, nj) || r_mat.shape() != (ni, n2) {
            return Err(RcurcError::arg(format!(
                "panel shapes {:?}, {:?} do not match I ({ni} of {n1}) and J ({nj} of {n2})",
                c.shape(),
                r_mat.shape()
            )));
        }
        if u.u.rows() != ni || u.v.rows() != nj || u.u.cols() != u.rank() || u.v.cols() != u.rank() {
            return Err(RcurcError::arg("core SVD does not match the intersection block"));
        }
        if u.rank() > rank {
            return Err(RcurcError::arg(format!(
                "core SVD has {} triplets, more than rank {rank}",
                u.rank()
            )));
        }
        let cv = c.matmul(&u.v);
        let rt = r_mat.transpose().matmul(&u.u);
        Ok(Self {
            inv_sigma: u.inv_sigma(),
            core: u,
            cv,
            rt,
            row_idx,
            col_idx,
            rank,
        })
    }

    pub fn row_idx(&self) -> &IndexSet {
        &self.row_idx
    }

    pub fn col_idx(&self) -> &IndexSet {
        &self.col_idx
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `(n1, n2)` of the implicit estimate.
    pub fn shape(&self) -> (usize, usize) {
        (self.row_idx.universe(), self.col_idx.universe())
    }

    /// Truncated SVD of the intersection block `U`.
    pub fn core(&self) -> &SvdR {
        &self.core
    }

    /// `U` as a dense `|I| x |J|` block.
    pub fn core_dense(&self) -> DenseMatrix {
        self.core.reconstruct()
    }

    /// Column panel `C V_r V_r^T` (`n1 x |J|`): the part of `C` that
    /// reaches the estimate, equal to `[X]_{:,J}`.
    pub fn c(&self) -> DenseMatrix {
        self.cv.matmul(&self.core.v.transpose())
    }

    /// Row panel `U_r U_r^T R` (`|I| x n2`): the part of `R` that reaches
    /// the estimate, equal to `[X]_{I,:}`.
    pub fn r_mat(&self) -> DenseMatrix {
        self.core.u.matmul(&self.rt.transpose())
    }

    /// `[X]_{i,j}` in O(r).
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let a = self.cv.row(i);
        let b = self.rt.row(j);
        let mut acc = 0.0;
        for t in 0..a.len() {
            acc += a[t] * self.inv_sigma[t] * b[t];
        }
        acc
    }

    /// `(L, M)` with `X = L M^T`, `L` of shape `n1 x r` and `M` of shape
    /// `n2 x r`.
    pub fn low_rank_factors(&self) -> (DenseMatrix, DenseMatrix) {
        let left = DenseMatrix::from_fn(self.cv.rows(), self.rank, |i, t| {
            self.cv.get(i, t) * self.inv_sigma[t]
        });
        (left, self.rt.clone())
    }

    /// Materializes the full `n1 x n2` estimate. For evaluation only; the
    /// solver never calls this.
    pub fn to_dense(&self) -> DenseMatrix {
        let (n1, n2) = self.shape();
        DenseMatrix::from_fn(n1, n2, |i, j| self.entry(i, j))
    }

    /// `[C]_{I,:} diag(sigma^+)`, the left factor of `[X]_{I,:}` against `rt`.
    fn left_on_rows(&self) -> DenseMatrix {
        let rows = self.row_idx.values();
        DenseMatrix::from_fn(rows.len(), self.inv_sigma.len(), |a, t| {
            self.cv.get(rows[a], t) * self.inv_sigma[t]
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Panel {
    /// `[X]_{I,:}`, `|I| x n2`.
    Rows,
    /// `[X]_{:,J}`, `n1 x |J|`.
    Cols,
}

/// Row or column panel of `X = C U^+ R` without forming `X`.
pub fn restricted_reconstruct(f: &CurFactors, which: Panel) -> DenseMatrix {
    let (n1, n2) = f.shape();
    match which {
        Panel::Rows => {
            let rows = f.row_idx.values();
            DenseMatrix::from_fn(rows.len(), n2, |a, j| f.entry(rows[a], j))
        }
        Panel::Cols => {
            let cols = f.col_idx.values();
            DenseMatrix::from_fn(n1, cols.len(), |i, b| f.entry(i, cols[b]))
        }
    }
}

/// Outlier estimate, supported on observed entries of the panels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseCross {
    shape: (usize, usize),
    entries: BTreeMap<(usize, usize), f64>,
}

impl SparseCross {
    pub fn new(shape: (usize, usize)) -> Self {
        Self {
            shape,
            entries: BTreeMap::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Stores `v` at `(i, j)`; zeros are not stored.
    pub fn insert(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.insert((i, j), v);
        } else {
            self.entries.remove(&(i, j));
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.shape.0, self.shape.1);
        for (&(i, j), &v) in &self.entries {
            m.set(i, j, v);
        }
        m
    }
}

/// `sum_Omega (s + x - y)^2 / sum_Omega y^2` over `Omega = Omega_R ∪ Omega_C`.
pub fn compute_error(obs: &CcsObservation, f: &CurFactors, s: &SparseCross) -> Result<f64> {
    check_compatible(obs, f)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, j, y) in obs.union_entries() {
        let d = s.get(i, j) + f.entry(i, j) - y;
        num += d * d;
        den += y * y;
    }
    if den == 0.0 {
        return Err(RcurcError::arg(
            "relative error undefined: every observed entry is zero",
        ));
    }
    Ok(num / den)
}

fn check_compatible(obs: &CcsObservation, f: &CurFactors) -> Result<()> {
    if obs.row_idx() != f.row_idx() || obs.col_idx() != f.col_idx() {
        return Err(RcurcError::arg(
            "factors and observation use different index sets",
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    Stagnated,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
            Termination::Stagnated => "stagnated",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 1-based count of completed iterations.
    pub iter: usize,
    pub e_k: f64,
    /// Threshold used during this iteration.
    pub zeta_k: f64,
    /// Milliseconds since the solve started.
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub trace: Vec<TraceRow>,
    pub termination: Termination,
    pub factors: CurFactors,
    pub sparse: SparseCross,
    pub params: Params,
    /// Iterations whose truncated core had fewer than `rank` singular values
    /// above the pseudoinverse cutoff.
    pub rank_deficient_steps: usize,
}

impl SolveReport {
    pub fn final_error(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.e_k)
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

const IN_R: u8 = 1;
const IN_C: u8 = 2;

/// Position tables and overlap flags shared by every iteration.
struct Layout {
    row_pos: Vec<u32>,
    col_pos: Vec<u32>,
    /// Mask membership of each intersection-block entry, row-major.
    core_flags: Vec<u8>,
    nj: usize,
    y_energy: f64,
}

impl Layout {
    fn new(obs: &CcsObservation) -> Result<Self> {
        let row_pos = obs.row_idx().position_table();
        let col_pos = obs.col_idx().position_table();
        let nj = obs.col_idx().len();
        let mut core_flags = vec![0u8; obs.row_idx().len() * nj];
        for &(i, j) in obs.omega_r().entries() {
            let b = col_pos[j];
            if b != u32::MAX {
                core_flags[row_pos[i] as usize * nj + b as usize] |= IN_R;
            }
        }
        for &(i, j) in obs.omega_c().entries() {
            let a = row_pos[i];
            if a != u32::MAX {
                core_flags[a as usize * nj + col_pos[j] as usize] |= IN_C;
            }
        }
        let mut layout = Self {
            row_pos,
            col_pos,
            core_flags,
            nj,
            y_energy: 0.0,
        };
        let mut energy = 0.0;
        layout.for_each_observed(obs, |_, _, y| energy += y * y);
        if energy == 0.0 {
            return Err(RcurcError::arg(
                "relative error undefined: every observed entry is zero",
            ));
        }
        layout.y_energy = energy;
        Ok(layout)
    }

    #[inline]
    fn flags(&self, i: usize, j: usize) -> u8 {
        let (a, b) = (self.row_pos[i], self.col_pos[j]);
        if a == u32::MAX || b == u32::MAX {
            0
        } else {
            self.core_flags[a as usize * self.nj + b as usize]
        }
    }

    /// Visits each entry of `Omega_R ∪ Omega_C` once.
    fn for_each_observed(&self, obs: &CcsObservation, mut visit: impl FnMut(usize, usize, f64)) {
        for (&(i, j), &y) in obs.omega_r().entries().iter().zip(obs.values_r()) {
            visit(i, j, y);
        }
        for (&(i, j), &y) in obs.omega_c().entries().iter().zip(obs.values_c()) {
            if self.flags(i, j) & IN_R == 0 {
                visit(i, j, y);
            }
        }
    }
}

/// Gradient term `[Y - X_k - S_{k+1}]_{ij}` at an observed entry: the
/// residual itself when it falls below the threshold, zero when it is
/// absorbed by the outlier estimate.
#[inline]
fn inlier_residual(y: f64, x: f64, zeta: f64) -> f64 {
    let res = y - x;
    res - threshold(res, zeta)
}

/// One iteration on the low-rank part. Returns the new factors.
fn advance(
    obs: &CcsObservation,
    layout: &Layout,
    f: &CurFactors,
    params: &Params,
    k: usize,
) -> Result<CurFactors> {
    let zeta = params.zeta_at(k);
    let (eta_r, eta_c) = (params.eta_r, params.eta_c);
    let overlap_eta = 2.0 * eta_r * eta_c / (eta_r + eta_c);
    let rows = f.row_idx.values();
    let cols = f.col_idx.values();
    let nj = cols.len();
    let r = f.rank;

    // Intersection block: [X_k]_{I,J} plus the union sum of the two
    // gradient increments. Unobserved block entries keep [X_k]_{I,J}.
    let left = f.left_on_rows();
    let rt_j = DenseMatrix::from_fn(nj, r, |b, t| f.rt.get(cols[b], t));
    let mut core = left.matmul(&rt_j.transpose());
    for (&(i, j), &y) in obs.omega_r().entries().iter().zip(obs.values_r()) {
        let b = layout.col_pos[j];
        if b == u32::MAX {
            continue;
        }
        let a = layout.row_pos[i] as usize;
        let g = inlier_residual(y, f.entry(i, j), zeta);
        let step = if layout.core_flags[a * nj + b as usize] & IN_C != 0 {
            overlap_eta
        } else {
            eta_r
        };
        core.add_at(a, b as usize, step * g);
    }
    for (&(i, j), &y) in obs.omega_c().entries().iter().zip(obs.values_c()) {
        let a = layout.row_pos[i];
        if a == u32::MAX {
            continue;
        }
        let b = layout.col_pos[j] as usize;
        if layout.core_flags[a as usize * nj + b] & IN_R != 0 {
            continue;
        }
        let g = inlier_residual(y, f.entry(i, j), zeta);
        core.add_at(a as usize, b, eta_c * g);
    }
    drop(rt_j);

    let new_core = truncated_svd_owned(core, r)?;
    let (u_new, v_new, sigma_new) = (&new_core.u, &new_core.v, &new_core.sigma);

    // R_{k+1}^T U_new. Columns outside J: the old row panel projected onto
    // U_new plus the gradient step; columns in J: the new core itself.
    let t_rows = u_new.transpose().matmul(&left);
    let mut rt = f.rt.matmul(&t_rows.transpose());
    drop(left);
    for (&(i, j), &y) in obs.omega_r().entries().iter().zip(obs.values_r()) {
        if layout.col_pos[j] != u32::MAX {
            continue;
        }
        let g = inlier_residual(y, f.entry(i, j), zeta);
        if g == 0.0 {
            continue;
        }
        let ua = u_new.row(layout.row_pos[i] as usize);
        for (o, &w) in rt.row_mut(j).iter_mut().zip(ua) {
            *o += eta_r * g * w;
        }
    }
    for (b, &j) in cols.iter().enumerate() {
        for (t, o) in rt.row_mut(j).iter_mut().enumerate() {
            *o = sigma_new[t] * v_new.get(b, t);
        }
    }

    // C_{k+1} V_new, symmetrically.
    let m_cols = DenseMatrix::from_fn(r, r, |s, t| {
        let mut acc = 0.0;
        for (b, &j) in cols.iter().enumerate() {
            acc += f.rt.get(j, s) * v_new.get(b, t);
        }
        acc * f.inv_sigma[s]
    });
    let mut cv = f.cv.matmul(&m_cols);
    for (&(i, j), &y) in obs.omega_c().entries().iter().zip(obs.values_c()) {
        if layout.row_pos[i] != u32::MAX {
            continue;
        }
        let g = inlier_residual(y, f.entry(i, j), zeta);
        if g == 0.0 {
            continue;
        }
        let vb = v_new.row(layout.col_pos[j] as usize);
        for (o, &w) in cv.row_mut(i).iter_mut().zip(vb) {
            *o += eta_c * g * w;
        }
    }
    for (a, &i) in rows.iter().enumerate() {
        for (t, o) in cv.row_mut(i).iter_mut().enumerate() {
            *o = u_new.get(a, t) * sigma_new[t];
        }
    }

    if rt.data().iter().chain(cv.data()).any(|v| !v.is_finite()) {
        return Err(RcurcError::Numeric("non-finite panel update".into()));
    }

    Ok(CurFactors {
        row_idx: f.row_idx.clone(),
        col_idx: f.col_idx.clone(),
        rank: r,
        inv_sigma: new_core.inv_sigma(),
        core: new_core,
        cv,
        rt,
    })
}

/// `e_{k+1}`: residual energy of `S_{k+1} + X_{k+1} - Y` on the observed
/// entries, where `S_{k+1}` is thresholded from `Y - X_k`.
fn error_after(
    obs: &CcsObservation,
    layout: &Layout,
    prev: &CurFactors,
    next: &CurFactors,
    zeta: f64,
) -> f64 {
    let mut num = 0.0;
    layout.for_each_observed(obs, |i, j, y| {
        let s = threshold(y - prev.entry(i, j), zeta);
        let d = s + next.entry(i, j) - y;
        num += d * d;
    });
    num / layout.y_energy
}

/// `S_{k+1}`: the thresholded residual `Y - X_k` on observed entries.
fn outliers_from(obs: &CcsObservation, layout: &Layout, f: &CurFactors, zeta: f64) -> SparseCross {
    let mut s = SparseCross::new(obs.shape());
    layout.for_each_observed(obs, |i, j, y| {
        s.insert(i, j, threshold(y - f.entry(i, j), zeta));
    });
    s
}

fn check_rank(obs: &CcsObservation, rank: usize) -> Result<()> {
    let (ni, nj) = (obs.row_idx().len(), obs.col_idx().len());
    if rank > ni.min(nj) {
        return Err(RcurcError::arg(format!(
            "rank {rank} exceeds the {ni}x{nj} intersection block"
        )));
    }
    Ok(())
}

/// A single iteration from `f_k` (iteration index `k`, zero-based).
/// Returns `(X_{k+1} factors, S_{k+1})`.
pub fn rcurc_step(
    obs: &CcsObservation,
    f_k: &CurFactors,
    cfg: &SolverConfig,
    k: usize,
) -> Result<(CurFactors, SparseCross)> {
    check_rank(obs, cfg.rank)?;
    check_compatible(obs, f_k)?;
    if f_k.rank != cfg.rank {
        return Err(RcurcError::arg(format!(
            "factor rank {} differs from configured rank {}",
            f_k.rank, cfg.rank
        )));
    }
    let params = cfg.resolve(obs)?;
    let layout = Layout::new(obs)?;
    let next = advance(obs, &layout, f_k, &params, k).map_err(|e| RcurcError::Solve {
        iteration: k + 1,
        message: e.to_string(),
        partial: None,
    })?;
    let s = outliers_from(obs, &layout, f_k, params.zeta_at(k));
    Ok((next, s))
}

/// Runs robust CUR completion from `X_0 = 0` until `e_k <= eps`, the
/// iteration cap, or stagnation.
pub fn solve(obs: &CcsObservation, cfg: &SolverConfig) -> Result<SolveReport> {
    check_rank(obs, cfg.rank)?;
    let params = cfg.resolve(obs)?;
    let layout = Layout::new(obs)?;
    let start = Instant::now();

    let mut current = CurFactors::zeros(obs.row_idx().clone(), obs.col_idx().clone(), cfg.rank)?;
    // Factors and threshold that produced `current`, for S of the last step.
    let mut previous: Option<(CurFactors, f64)> = None;
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut rank_deficient_steps = 0;
    let mut best = f64::INFINITY;
    let mut stalled = 0;

    for k in 0..cfg.max_iters {
        let zeta = params.zeta_at(k);
        let next = match advance(obs, &layout, &current, &params, k) {
            Ok(next) => next,
            Err(e) => {
                let partial = previous.map(|(prev, z)| {
                    Box::new(SolveReport {
                        sparse: outliers_from(obs, &layout, &prev, z),
                        trace: trace.clone(),
                        termination: Termination::MaxIters,
                        factors: current.clone(),
                        params,
                        rank_deficient_steps,
                    })
                });
                return Err(RcurcError::Solve {
                    iteration: k + 1,
                    message: e.to_string(),
                    partial,
                });
            }
        };
        if next.core.numerical_rank() < cfg.rank {
            rank_deficient_steps += 1;
        }
        let e_k = error_after(obs, &layout, &current, &next, zeta);
        let wall_ms = if cfg.record_time {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        trace.push(TraceRow {
            iter: k + 1,
            e_k,
            zeta_k: zeta,
            wall_ms,
        });
        previous = Some((std::mem::replace(&mut current, next), zeta));

        if !e_k.is_finite() {
            return Err(RcurcError::Solve {
                iteration: k + 1,
                message: format!("e_k is {e_k}"),
                partial: None,
            });
        }
        if e_k <= cfg.eps {
            termination = Termination::Converged;
            break;
        }
        if e_k < best * (1.0 - STAGNATION_RTOL) {
            best = e_k;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STAGNATION_WINDOW {
                termination = Termination::Stagnated;
                break;
            }
        }
    }

    let (prev, zeta) = previous.expect("max_iters >= 1");
    let sparse = outliers_from(obs, &layout, &prev, zeta);
    Ok(SolveReport {
        trace,
        termination,
        factors: current,
        sparse,
        params,
        rank_deficient_steps,
    })
}
