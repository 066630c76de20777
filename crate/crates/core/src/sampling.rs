//! Cross-concentrated sampling: pick row and column panels uniformly, then
//! sample entries uniformly inside each panel.
//!
//! Draws are with replacement and repeat until the requested number of
//! distinct items is reached, so panel and mask sizes are exact. All draws
//! come from one caller-supplied generator in a fixed order: rows `I`,
//! columns `J`, row-panel mask, column-panel mask.

use rand::Rng;

use crate::error::{RcurcError, Result};
use crate::linalg::DenseMatrix;

/// `ceil(x)`, forgiving floating-point noise just above an integer
/// (`0.3 * 500` is `150.00000000000003`).
pub(crate) fn ceil_count(x: f64) -> usize {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

/// `floor(x)` with the same tolerance as [`ceil_count`].
pub(crate) fn floor_count(x: f64) -> usize {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest as usize
    } else {
        x.floor() as usize
    }
}

/// Sorted, duplicate-free indices into `0..universe`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    values: Vec<usize>,
    universe: usize,
}

impl IndexSet {
    pub fn new(mut values: Vec<usize>, universe: usize) -> Result<Self> {
        values.sort_unstable();
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(RcurcError::arg("index set contains duplicates"));
        }
        if let Some(&last) = values.last() {
            if last >= universe {
                return Err(RcurcError::arg(format!(
                    "index {last} out of range for universe {universe}"
                )));
            }
        }
        Ok(Self { values, universe })
    }

    pub fn full(universe: usize) -> Self {
        Self {
            values: (0..universe).collect(),
            universe,
        }
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.values.binary_search(&k).is_ok()
    }

    /// Position of `k` within the set.
    pub fn position(&self, k: usize) -> Option<usize> {
        self.values.binary_search(&k).ok()
    }

    /// Dense lookup table of length `universe`: position in the set, or
    /// `u32::MAX` for indices outside it.
    pub(crate) fn position_table(&self) -> Vec<u32> {
        let mut table = vec![u32::MAX; self.universe];
        for (pos, &k) in self.values.iter().enumerate() {
            table[k] = pos as u32;
        }
        table
    }
}

/// A set of observed `(row, col)` locations, kept sorted row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    entries: Vec<(usize, usize)>,
    shape: (usize, usize),
}

impl Mask {
    pub fn new(mut entries: Vec<(usize, usize)>, shape: (usize, usize)) -> Result<Self> {
        entries.sort_unstable();
        if entries.windows(2).any(|w| w[0] == w[1]) {
            return Err(RcurcError::arg("mask contains duplicate entries"));
        }
        if let Some(&(i, j)) = entries.iter().find(|&&(i, j)| i >= shape.0 || j >= shape.1) {
            return Err(RcurcError::arg(format!(
                "mask entry ({i}, {j}) outside shape {shape:?}"
            )));
        }
        Ok(Self { entries, shape })
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.entries.binary_search(&(i, j)).is_ok()
    }

    pub fn intersection(&self, other: &Mask) -> Mask {
        let (mut a, mut b) = (0, 0);
        let mut out = Vec::new();
        while a < self.entries.len() && b < other.entries.len() {
            match self.entries[a].cmp(&other.entries[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.entries[a]);
                    a += 1;
                    b += 1;
                }
            }
        }
        Mask {
            entries: out,
            shape: self.shape,
        }
    }

    pub fn union(&self, other: &Mask) -> Mask {
        let mut entries = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (0, 0);
        while a < self.entries.len() || b < other.entries.len() {
            let next = match (self.entries.get(a), other.entries.get(b)) {
                (Some(x), Some(y)) if x < y => {
                    a += 1;
                    *x
                }
                (Some(x), Some(y)) if x > y => {
                    b += 1;
                    *y
                }
                (Some(x), Some(_)) => {
                    a += 1;
                    b += 1;
                    *x
                }
                (Some(x), None) => {
                    a += 1;
                    *x
                }
                (None, Some(y)) => {
                    b += 1;
                    *y
                }
                (None, None) => unreachable!(),
            };
            entries.push(next);
        }
        Mask {
            entries,
            shape: self.shape,
        }
    }
}

/// Observed entries of `Y` on the two panel masks, with the panel indices.
///
/// Values are stored aligned with each mask; entries in both masks carry the
/// same value in both arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct CcsObservation {
    shape: (usize, usize),
    row_idx: IndexSet,
    col_idx: IndexSet,
    omega_r: Mask,
    omega_c: Mask,
    values_r: Vec<f64>,
    values_c: Vec<f64>,
}

impl CcsObservation {
    /// Assembles an observation from masks and the values observed on them,
    /// checking every structural invariant.
    pub fn new(
        row_idx: IndexSet,
        col_idx: IndexSet,
        omega_r: Mask,
        values_r: Vec<f64>,
        omega_c: Mask,
        values_c: Vec<f64>,
    ) -> Result<Self> {
        let shape = (row_idx.universe(), col_idx.universe());
        if omega_r.shape() != shape || omega_c.shape() != shape {
            return Err(RcurcError::arg(format!(
                "mask shapes {:?}/{:?} disagree with index universes {shape:?}",
                omega_r.shape(),
                omega_c.shape()
            )));
        }
        if values_r.len() != omega_r.len() || values_c.len() != omega_c.len() {
            return Err(RcurcError::arg("value count does not match mask size"));
        }
        if values_r.iter().chain(&values_c).any(|v| !v.is_finite()) {
            return Err(RcurcError::arg("non-finite observed value"));
        }
        if let Some(&(i, j)) = omega_r.entries().iter().find(|(i, _)| !row_idx.contains(*i)) {
            return Err(RcurcError::arg(format!(
                "row-panel entry ({i}, {j}) is not in a selected row"
            )));
        }
        if let Some(&(i, j)) = omega_c.entries().iter().find(|(_, j)| !col_idx.contains(*j)) {
            return Err(RcurcError::arg(format!(
                "column-panel entry ({i}, {j}) is not in a selected column"
            )));
        }
        let obs = Self {
            shape,
            row_idx,
            col_idx,
            omega_r,
            omega_c,
            values_r,
            values_c,
        };
        for (k, &(i, j)) in obs.omega_c.entries().iter().enumerate() {
            if let Ok(p) = obs.omega_r.entries().binary_search(&(i, j)) {
                if obs.values_r[p].to_bits() != obs.values_c[k].to_bits() {
                    return Err(RcurcError::arg(format!(
                        "conflicting values at overlap entry ({i}, {j})"
                    )));
                }
            }
        }
        Ok(obs)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn row_idx(&self) -> &IndexSet {
        &self.row_idx
    }

    pub fn col_idx(&self) -> &IndexSet {
        &self.col_idx
    }

    pub fn omega_r(&self) -> &Mask {
        &self.omega_r
    }

    pub fn omega_c(&self) -> &Mask {
        &self.omega_c
    }

    pub fn values_r(&self) -> &[f64] {
        &self.values_r
    }

    pub fn values_c(&self) -> &[f64] {
        &self.values_c
    }

    /// Observed value at `(i, j)`, if `(i, j)` is in either mask.
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        if let Ok(p) = self.omega_r.entries().binary_search(&(i, j)) {
            return Some(self.values_r[p]);
        }
        self.omega_c
            .entries()
            .binary_search(&(i, j))
            .ok()
            .map(|p| self.values_c[p])
    }

    /// Every observed entry exactly once: the row panel first, then the
    /// column-panel entries that are not also in the row panel.
    pub fn union_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let r = self
            .omega_r
            .entries()
            .iter()
            .zip(&self.values_r)
            .map(|(&(i, j), &v)| (i, j, v));
        let c = self
            .omega_c
            .entries()
            .iter()
            .zip(&self.values_c)
            .filter(|(&(i, j), _)| !(self.row_idx.contains(i) && self.omega_r.contains(i, j)))
            .map(|(&(i, j), &v)| (i, j, v));
        r.chain(c)
    }

    pub fn union_len(&self) -> usize {
        self.omega_r.len() + self.omega_c.len() - overlap(self).len()
    }
}

/// Draws uniformly with replacement from `0..universe` until `target`
/// distinct indices are collected.
pub fn sample_unique_indices<R: Rng + ?Sized>(
    universe: usize,
    target: usize,
    rng: &mut R,
) -> Result<IndexSet> {
    if target == 0 || target > universe {
        return Err(RcurcError::arg(format!(
            "cannot draw {target} distinct indices from {universe}"
        )));
    }
    let picked = draw_distinct(universe, target, rng);
    Ok(IndexSet {
        values: picked,
        universe,
    })
}

/// Sorted distinct draws from `0..universe`. Taking everything consumes no
/// randomness.
fn draw_distinct<R: Rng + ?Sized>(universe: usize, target: usize, rng: &mut R) -> Vec<usize> {
    if target == universe {
        return (0..universe).collect();
    }
    let mut seen = vec![false; universe];
    let mut count = 0;
    while count < target {
        let k = rng.random_range(0..universe);
        if !seen[k] {
            seen[k] = true;
            count += 1;
        }
    }
    seen.iter()
        .enumerate()
        .filter_map(|(k, &s)| s.then_some(k))
        .collect()
}

/// Cross-concentrated sampling of `y`.
///
/// `|I| = ceil(row_frac * n1)`, `|J| = ceil(col_frac * n2)`,
/// `|Omega_R| = ceil(p_row * |I| * n2)`, `|Omega_C| = ceil(p_col * |J| * n1)`.
pub fn ccs_sample<R: Rng + ?Sized>(
    y: &DenseMatrix,
    row_frac: f64,
    col_frac: f64,
    p_row: f64,
    p_col: f64,
    rng: &mut R,
) -> Result<CcsObservation> {
    let (n1, n2) = y.shape();
    if n1 == 0 || n2 == 0 {
        return Err(RcurcError::arg("cannot sample an empty matrix"));
    }
    for (name, v) in [
        ("row_frac", row_frac),
        ("col_frac", col_frac),
        ("p_row", p_row),
        ("p_col", p_col),
    ] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(RcurcError::arg(format!("{name} = {v} must lie in (0, 1]")));
        }
    }
    let row_idx = sample_unique_indices(n1, ceil_count(row_frac * n1 as f64).min(n1), rng)?;
    let col_idx = sample_unique_indices(n2, ceil_count(col_frac * n2 as f64).min(n2), rng)?;
    let (ni, nj) = (row_idx.len(), col_idx.len());

    let r_total = ni * n2;
    let r_target = ceil_count(p_row * r_total as f64).min(r_total);
    let omega_r: Vec<(usize, usize)> = draw_distinct(r_total, r_target, rng)
        .into_iter()
        .map(|k| (row_idx.values[k / n2], k % n2))
        .collect();

    let c_total = n1 * nj;
    let c_target = ceil_count(p_col * c_total as f64).min(c_total);
    let omega_c: Vec<(usize, usize)> = draw_distinct(c_total, c_target, rng)
        .into_iter()
        .map(|k| (k / nj, col_idx.values[k % nj]))
        .collect();

    let values_r = omega_r.iter().map(|&(i, j)| y.get(i, j)).collect();
    let values_c = omega_c.iter().map(|&(i, j)| y.get(i, j)).collect();
    // Linear ids were visited in increasing order and I, J are sorted, so
    // both masks are already row-major sorted.
    let shape = (n1, n2);
    Ok(CcsObservation {
        shape,
        row_idx,
        col_idx,
        omega_r: Mask {
            entries: omega_r,
            shape,
        },
        omega_c: Mask {
            entries: omega_c,
            shape,
        },
        values_r,
        values_c,
    })
}

/// Empirical observation rates `(p_R, p_C)` of the two panels.
pub fn observation_rates(obs: &CcsObservation) -> (f64, f64) {
    let (n1, n2) = obs.shape;
    let p_r = obs.omega_r.len() as f64 / (obs.row_idx.len() * n2) as f64;
    let p_c = obs.omega_c.len() as f64 / (obs.col_idx.len() * n1) as f64;
    (p_r, p_c)
}

/// Entries observed in both panels.
pub fn overlap(obs: &CcsObservation) -> Mask {
    obs.omega_r.intersection(&obs.omega_c)
}
