//! Sparse binary indicator matrix and functional vector built from sampled
//! path pairs.
//!
//! Each column records, for one pair, which grid cells `(y, x, z)` the
//! composed process passes under: entry 1 iff the realized `(y, x)` at the
//! cell's `z` is dominated by the cell corner. Within a z-block the ones
//! therefore form an upper-right orthant in the `(y, x)` indices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::paths::{compose, PathPair};

/// Sparse binary matrix, stored column-wise as sorted row-index lists.
/// Rows are grid cells ordered z-major, then x, then y; one column per
/// path pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorMatrix {
    nrows: usize,
    grid_len: usize,
    columns: Vec<Vec<u32>>,
    ids: Vec<u64>,
}

impl IndicatorMatrix {
    /// Build all columns; parallel over pairs with output independent of
    /// the thread count.
    pub fn build(pairs: &[PathPair], grid: &Grid) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::validation("no pairs to assemble"));
        }
        Self::check_grid(pairs, grid)?;
        let columns: Vec<Vec<u32>> = pairs
            .par_iter()
            .map(|pair| Self::column_for(pair, grid))
            .collect();
        Ok(IndicatorMatrix {
            nrows: grid.cube_len(),
            grid_len: grid.len(),
            columns,
            ids: pairs.iter().map(|p| p.id).collect(),
        })
    }

    pub fn empty(grid: &Grid) -> Self {
        IndicatorMatrix {
            nrows: grid.cube_len(),
            grid_len: grid.len(),
            columns: Vec::new(),
            ids: Vec::new(),
        }
    }

    /// Assemble directly from row-index lists (diagnostics and tests).
    pub fn from_raw_columns(
        grid: &Grid,
        columns: Vec<Vec<u32>>,
        ids: Vec<u64>,
    ) -> Result<Self> {
        if columns.len() != ids.len() {
            return Err(Error::validation("one id per column required"));
        }
        let nrows = grid.cube_len();
        for col in &columns {
            if col.iter().any(|&r| r as usize >= nrows) {
                return Err(Error::validation("row index out of range"));
            }
            if col.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation("column rows must be strictly ascending"));
            }
        }
        Ok(IndicatorMatrix {
            nrows,
            grid_len: grid.len(),
            columns,
            ids,
        })
    }

    fn check_grid(pairs: &[PathPair], grid: &Grid) -> Result<()> {
        for pair in pairs {
            if pair.grid_len() != grid.len() {
                return Err(Error::validation(format!(
                    "pair {} was sampled on a {}-point grid, expected {}",
                    pair.id,
                    pair.grid_len(),
                    grid.len()
                )));
            }
        }
        Ok(())
    }

    fn column_for(pair: &PathPair, grid: &Grid) -> Vec<u32> {
        let len = grid.len();
        let mut rows = Vec::new();
        for (iz, &z) in grid.points().iter().enumerate() {
            let (y, x) = compose(pair, z);
            let iy0 = grid.first_at_or_above(y);
            let ix0 = grid.first_at_or_above(x);
            for ix in ix0..len {
                for iy in iy0..len {
                    rows.push(grid.cell_index(iy, ix, iz) as u32);
                }
            }
        }
        rows
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(|c| c.len()).sum()
    }

    /// Append freshly built columns for `new_pairs`; existing columns are
    /// not recomputed. Ids must not collide with live ones.
    pub fn append(&mut self, new_pairs: &[PathPair], grid: &Grid) -> Result<()> {
        if grid.cube_len() != self.nrows {
            return Err(Error::validation("append grid differs from matrix grid"));
        }
        Self::check_grid(new_pairs, grid)?;
        for pair in new_pairs {
            if self.ids.contains(&pair.id) {
                return Err(Error::validation(format!("duplicate column id {}", pair.id)));
            }
        }
        let fresh: Vec<Vec<u32>> = new_pairs
            .par_iter()
            .map(|pair| Self::column_for(pair, grid))
            .collect();
        self.columns.extend(fresh);
        self.ids.extend(new_pairs.iter().map(|p| p.id));
        Ok(())
    }

    /// Keep only the columns at `kept` positions (ascending).
    pub fn retain(&mut self, kept: &[usize]) {
        let mut idx = 0usize;
        let mut keep_iter = kept.iter().peekable();
        self.columns.retain(|_| {
            let keep = keep_iter.peek() == Some(&&idx);
            if keep {
                keep_iter.next();
            }
            idx += 1;
            keep
        });
        let mut idx = 0usize;
        let mut keep_iter = kept.iter().peekable();
        self.ids.retain(|_| {
            let keep = keep_iter.peek() == Some(&&idx);
            if keep {
                keep_iter.next();
            }
            idx += 1;
            keep
        });
    }

    /// `out = M * w`. Columns are processed in fixed-size chunks whose
    /// partial sums are combined in chunk order, so the result is
    /// bit-identical under any thread count.
    pub fn mul_vec(&self, w: &[f64], out: &mut [f64]) {
        assert_eq!(w.len(), self.ncols());
        assert_eq!(out.len(), self.nrows);
        const CHUNK: usize = 64;
        let partials: Vec<Vec<f64>> = self
            .columns
            .par_chunks(CHUNK)
            .zip(w.par_chunks(CHUNK))
            .map(|(cols, ws)| {
                let mut acc = vec![0.0f64; self.nrows];
                for (col, &wj) in cols.iter().zip(ws) {
                    if wj != 0.0 {
                        for &r in col {
                            acc[r as usize] += wj;
                        }
                    }
                }
                acc
            })
            .collect();
        out.fill(0.0);
        for part in partials {
            for (o, p) in out.iter_mut().zip(part) {
                *o += p;
            }
        }
    }

    /// Debug dump as `row column` coordinate lines.
    pub fn to_coordinate_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for (j, col) in self.columns.iter().enumerate() {
            for &r in col {
                let _ = writeln!(out, "{r} {j}");
            }
        }
        out
    }

    /// `out = M' * v`, one exact dot product per column.
    pub fn tr_mul_vec(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.nrows);
        assert_eq!(out.len(), self.ncols());
        let results: Vec<f64> = self
            .columns
            .par_iter()
            .map(|col| col.iter().map(|&r| v[r as usize]).sum())
            .collect();
        out.copy_from_slice(&results);
    }
}

/// Which scalar the objective reads off each second-stage path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FunctionalKind {
    /// `E[Y(x0)]`
    Level { x0: f64 },
    /// `E[Y(x1) - Y(x0)]`
    Ate { x0: f64, x1: f64 },
    /// `P(Y(x1) <= y_star) - P(Y(x0) <= y_star)`
    CdfDiff { y_star: f64, x0: f64, x1: f64 },
    /// `P(Y(x0) <= y_star)`
    CdfLevel { y_star: f64, x0: f64 },
    /// Mean slope of the second stage across grid cells.
    AvgDerivative,
}

/// Functional plus the optional logistic smoothing of its indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    /// Logistic steepness replacing the sharp indicator in the CDF kinds.
    pub smoothing: Option<f64>,
}

impl FunctionalSpec {
    pub fn new(kind: FunctionalKind) -> Result<Self> {
        let spec = FunctionalSpec {
            kind,
            smoothing: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_smoothing(mut self, steepness: f64) -> Result<Self> {
        if steepness <= 0.0 || !steepness.is_finite() {
            return Err(Error::validation("logistic steepness must be positive"));
        }
        self.smoothing = Some(steepness);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let unit = |v: f64, name: &str| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("{name} = {v} outside [0, 1]")));
            }
            Ok(())
        };
        match self.kind {
            FunctionalKind::Level { x0 } => unit(x0, "x0"),
            FunctionalKind::Ate { x0, x1 } => unit(x0, "x0").and(unit(x1, "x1")),
            FunctionalKind::CdfDiff { y_star, x0, x1 } => unit(y_star, "y_star")
                .and(unit(x0, "x0"))
                .and(unit(x1, "x1")),
            FunctionalKind::CdfLevel { y_star, x0 } => unit(y_star, "y_star").and(unit(x0, "x0")),
            FunctionalKind::AvgDerivative => Ok(()),
        }
    }

    fn threshold(&self, v: f64, y_star: f64) -> f64 {
        match self.smoothing {
            None => (v <= y_star) as u8 as f64,
            Some(eta) => logistic_indicator(v, y_star, eta),
        }
    }

    /// Value of the functional kernel on one pair.
    pub fn value(&self, pair: &PathPair, grid: &Grid) -> f64 {
        match self.kind {
            FunctionalKind::Level { x0 } => pair.y_path.eval(x0),
            FunctionalKind::Ate { x0, x1 } => pair.y_path.eval(x1) - pair.y_path.eval(x0),
            FunctionalKind::CdfDiff { y_star, x0, x1 } => {
                self.threshold(pair.y_path.eval(x1), y_star)
                    - self.threshold(pair.y_path.eval(x0), y_star)
            }
            FunctionalKind::CdfLevel { y_star, x0 } => {
                self.threshold(pair.y_path.eval(x0), y_star)
            }
            FunctionalKind::AvgDerivative => {
                let vals = pair.y_path.cached_values();
                let pts = grid.points();
                let cells = pts.len() - 1;
                (0..cells)
                    .map(|i| (vals[i + 1] - vals[i]) / (pts[i + 1] - pts[i]))
                    .sum::<f64>()
                    / cells as f64
            }
        }
    }
}

/// Smooth surrogate `1 / (1 + exp(-eta * (y_star - v)))` for the indicator
/// `1{v <= y_star}`.
pub fn logistic_indicator(v: f64, y_star: f64, eta: f64) -> f64 {
    1.0 / (1.0 + (-eta * (y_star - v)).exp())
}

/// Objective vector aligned with the matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalVector {
    values: Vec<f64>,
}

impl FunctionalVector {
    pub fn build(pairs: &[PathPair], spec: &FunctionalSpec, grid: &Grid) -> Result<Self> {
        spec.validate()?;
        let values: Vec<f64> = pairs.iter().map(|p| spec.value(p, grid)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite functional value"));
        }
        Ok(FunctionalVector { values })
    }

    pub fn empty() -> Self {
        FunctionalVector { values: Vec::new() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn append(&mut self, other: FunctionalVector) {
        self.values.extend(other.values);
    }

    pub fn retain(&mut self, kept: &[usize]) {
        let mut idx = 0usize;
        let mut keep_iter = kept.iter().peekable();
        self.values.retain(|_| {
            let keep = keep_iter.peek() == Some(&&idx);
            if keep {
                keep_iter.next();
            }
            idx += 1;
            keep
        });
    }
}

/// Column-wise concatenation of fresh columns for `new_pairs` onto an
/// existing pool.
pub fn append_columns(
    matrix: &mut IndicatorMatrix,
    functional: &mut FunctionalVector,
    new_pairs: &[PathPair],
    spec: &FunctionalSpec,
    grid: &Grid,
) -> Result<()> {
    if new_pairs.is_empty() {
        return Ok(());
    }
    matrix.append(new_pairs, grid)?;
    functional.append(FunctionalVector::build(new_pairs, spec, grid)?);
    Ok(())
}

/// Remove columns whose solved weight fell below `threshold`; returns the
/// kept positions (ascending) and their ids. An empty result signals a
/// fully discarded pool.
pub fn drop_zero_columns(
    matrix: &mut IndicatorMatrix,
    functional: &mut FunctionalVector,
    weights: &[f64],
    threshold: f64,
) -> Result<(Vec<usize>, Vec<u64>)> {
    if weights.len() != matrix.ncols() {
        return Err(Error::validation(format!(
            "{} weights for {} columns",
            weights.len(),
            matrix.ncols()
        )));
    }
    if threshold < 0.0 {
        return Err(Error::validation("discard threshold must be >= 0"));
    }
    let kept: Vec<usize> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w >= threshold)
        .map(|(i, _)| i)
        .collect();
    if kept.len() == weights.len() {
        return Ok((kept, matrix.ids().to_vec()));
    }
    matrix.retain(&kept);
    functional.retain(&kept);
    Ok((kept, matrix.ids().to_vec()))
}

/// All stage-by-stage combinations of the pairs' paths, for the
/// cross-product pairing mode. Ids pack the source ids into the two
/// halves of a `u64`.
pub fn cross_pairs(pairs: &[PathPair]) -> Result<Vec<PathPair>> {
    let mut out = Vec::with_capacity(pairs.len() * pairs.len());
    for py in pairs {
        for px in pairs {
            if py.id > u32::MAX as u64 || px.id > u32::MAX as u64 {
                return Err(Error::validation(
                    "cross pairing exhausted the id space",
                ));
            }
            out.push(PathPair::new(
                py.y_path.clone(),
                px.x_path.clone(),
                (py.id << 32) | px.id,
            )?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{BasisSpec, CoefficientLaw, Path, PathPair};

    fn grid() -> Grid {
        Grid::dyadic(2).unwrap()
    }

    fn random_pairs(n: usize, seed: u64, g: &Grid) -> Vec<PathPair> {
        let spec = BasisSpec::new([1, 2, 3], CoefficientLaw::uniform(0.4)).unwrap();
        crate::paths::sample_paths(&spec, g, n, None, seed).unwrap()
    }

    /// Naive triple-loop oracle over every (cell, pair) combination.
    fn oracle_matrix(pairs: &[PathPair], g: &Grid) -> Vec<Vec<u32>> {
        pairs
            .iter()
            .map(|pair| {
                let mut rows = Vec::new();
                for iz in 0..g.len() {
                    for ix in 0..g.len() {
                        for iy in 0..g.len() {
                            let (y, x) = compose(pair, g.points()[iz]);
                            if y <= g.points()[iy] && x <= g.points()[ix] {
                                rows.push(g.cell_index(iy, ix, iz) as u32);
                            }
                        }
                    }
                }
                rows.sort_unstable();
                rows
            })
            .collect()
    }

    #[test]
    fn zero_paths_give_all_ones_column() {
        let g = grid();
        let pair = PathPair::new(Path::constant(0.0, &g), Path::constant(0.0, &g), 0).unwrap();
        let m = IndicatorMatrix::build(&[pair], &g).unwrap();
        assert_eq!(m.column(0).len(), g.cube_len());
    }

    #[test]
    fn one_paths_hit_only_top_corner() {
        let g = grid();
        let pair = PathPair::new(Path::constant(1.0, &g), Path::constant(1.0, &g), 0).unwrap();
        let m = IndicatorMatrix::build(&[pair], &g).unwrap();
        let last = g.len() - 1;
        let expect: Vec<u32> = (0..g.len())
            .map(|iz| g.cell_index(last, last, iz) as u32)
            .collect();
        assert_eq!(m.column(0), expect.as_slice());
    }

    #[test]
    fn matches_triple_loop_oracle() {
        let g = grid();
        let pairs = random_pairs(5, 31, &g);
        let m = IndicatorMatrix::build(&pairs, &g).unwrap();
        let oracle = oracle_matrix(&pairs, &g);
        for j in 0..pairs.len() {
            assert_eq!(m.column(j), oracle[j].as_slice(), "column {j}");
        }
    }

    #[test]
    fn orthant_structure_within_z_blocks() {
        let g = grid();
        let pairs = random_pairs(8, 77, &g);
        let m = IndicatorMatrix::build(&pairs, &g).unwrap();
        let len = g.len();
        for j in 0..m.ncols() {
            let mut dense = vec![false; g.cube_len()];
            for &r in m.column(j) {
                dense[r as usize] = true;
            }
            for iz in 0..len {
                for ix in 0..len {
                    for iy in 0..len {
                        if dense[g.cell_index(iy, ix, iz)] {
                            for ix2 in ix..len {
                                for iy2 in iy..len {
                                    assert!(dense[g.cell_index(iy2, ix2, iz)]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn assembly_is_thread_count_invariant() {
        let g = grid();
        let pairs = random_pairs(12, 5, &g);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| IndicatorMatrix::build(&pairs, &g).unwrap());
        let dual = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap()
            .install(|| IndicatorMatrix::build(&pairs, &g).unwrap());
        let ambient = IndicatorMatrix::build(&pairs, &g).unwrap();
        assert_eq!(single, dual);
        assert_eq!(single, ambient);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g = grid();
        let other = Grid::dyadic(3).unwrap();
        let pairs = random_pairs(2, 1, &other);
        assert!(IndicatorMatrix::build(&pairs, &g).is_err());
    }

    #[test]
    fn append_matches_from_scratch() {
        let g = grid();
        let all = random_pairs(9, 13, &g);
        let spec = FunctionalSpec::new(FunctionalKind::Level { x0: 0.5 }).unwrap();
        let mut m = IndicatorMatrix::build(&all[..4], &g).unwrap();
        let mut f = FunctionalVector::build(&all[..4], &spec, &g).unwrap();
        append_columns(&mut m, &mut f, &all[4..], &spec, &g).unwrap();
        let scratch_m = IndicatorMatrix::build(&all, &g).unwrap();
        let scratch_f = FunctionalVector::build(&all, &spec, &g).unwrap();
        assert_eq!(m, scratch_m);
        assert_eq!(f, scratch_f);
    }

    #[test]
    fn append_nothing_is_identity() {
        let g = grid();
        let pairs = random_pairs(3, 2, &g);
        let spec = FunctionalSpec::new(FunctionalKind::Level { x0: 0.5 }).unwrap();
        let mut m = IndicatorMatrix::build(&pairs, &g).unwrap();
        let mut f = FunctionalVector::build(&pairs, &spec, &g).unwrap();
        let before = m.clone();
        append_columns(&mut m, &mut f, &[], &spec, &g).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn append_duplicate_id_rejected() {
        let g = grid();
        let pairs = random_pairs(3, 2, &g);
        let spec = FunctionalSpec::new(FunctionalKind::Level { x0: 0.5 }).unwrap();
        let mut m = IndicatorMatrix::build(&pairs, &g).unwrap();
        let mut f = FunctionalVector::build(&pairs, &spec, &g).unwrap();
        let dup = vec![pairs[0].clone()];
        assert!(append_columns(&mut m, &mut f, &dup, &spec, &g).is_err());
    }

    #[test]
    fn drop_none_all_and_mixed() {
        let g = grid();
        let pairs = random_pairs(3, 4, &g);
        let spec = FunctionalSpec::new(FunctionalKind::Level { x0: 0.5 }).unwrap();

        let mut m = IndicatorMatrix::build(&pairs, &g).unwrap();
        let mut f = FunctionalVector::build(&pairs, &spec, &g).unwrap();
        let (kept, ids) =
            drop_zero_columns(&mut m, &mut f, &[0.5, 0.3, 0.2], 1e-8).unwrap();
        assert_eq!(kept, vec![0, 1, 2]);
        assert_eq!(ids.len(), 3);

        let (kept, _) = drop_zero_columns(&mut m, &mut f, &[0.0, 0.0, 0.0], 1e-8).unwrap();
        assert!(kept.is_empty());
        assert_eq!(m.ncols(), 0);
        assert!(f.is_empty());

        let mut m = IndicatorMatrix::build(&pairs, &g).unwrap();
        let mut f = FunctionalVector::build(&pairs, &spec, &g).unwrap();
        let (kept, ids) =
            drop_zero_columns(&mut m, &mut f, &[0.0, 1e-12, 0.3], 1e-8).unwrap();
        assert_eq!(kept, vec![2]);
        assert_eq!(m.ncols(), 1);
        assert_eq!(ids, vec![pairs[2].id]);
    }

    #[test]
    fn level_and_ate_on_constant_paths() {
        let g = grid();
        let pair = PathPair::new(Path::constant(0.5, &g), Path::identity(&g), 0).unwrap();
        let level = FunctionalSpec::new(FunctionalKind::Level { x0: 0.5 }).unwrap();
        let ate = FunctionalSpec::new(FunctionalKind::Ate { x0: 0.25, x1: 0.75 }).unwrap();
        assert!((level.value(&pair, &g) - 0.5).abs() < 1e-12);
        assert!(ate.value(&pair, &g).abs() < 1e-12);
    }

    #[test]
    fn avg_derivative_telescopes_on_uniform_grid() {
        let g = grid();
        let pair = PathPair::new(Path::identity(&g), Path::identity(&g), 0).unwrap();
        let spec = FunctionalSpec::new(FunctionalKind::AvgDerivative).unwrap();
        assert!((spec.value(&pair, &g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_converges_monotonically_to_indicator() {
        let g = Grid::dyadic(3).unwrap();
        let pairs = random_pairs(100, 50, &g);
        let y_star = 0.4;
        let sharp = FunctionalSpec::new(FunctionalKind::CdfLevel { y_star, x0: 0.3 }).unwrap();
        let mut prev_worst = f64::INFINITY;
        for k in 1..=4 {
            let eta = 10f64.powi(k);
            let smooth = sharp.with_smoothing(eta).unwrap();
            let mut worst: f64 = 0.0;
            for pair in &pairs {
                let v = pair.y_path.eval(0.3);
                if (v - y_star).abs() < 0.05 {
                    continue; // convergence is only uniform away from the threshold
                }
                let gap = (smooth.value(pair, &g) - sharp.value(pair, &g)).abs();
                worst = worst.max(gap);
            }
            assert!(worst <= prev_worst + 1e-15, "eta={eta}");
            assert!(worst <= 1.0 / (1.0 + (eta * 0.05).exp()) + 1e-12, "eta={eta}");
            prev_worst = worst;
        }
        assert!(prev_worst < 1e-3);
    }

    #[test]
    fn logistic_gap_bound_at_distance() {
        // graph distance to the indicator shrinks like 1/(1 + e^{eta d})
        for k in 1..=4 {
            let eta = 10f64.powi(k);
            let bound = 1.0 / (1.0 + (0.05 * eta).exp());
            for &d in &[0.05, 0.06, 0.1, 0.3, 0.9] {
                for sign in [-1.0, 1.0] {
                    let v = 0.4 + sign * d;
                    if !(0.0..=1.0).contains(&v) {
                        continue;
                    }
                    let ind = (v <= 0.4) as u8 as f64;
                    let gap = (logistic_indicator(v, 0.4, eta) - ind).abs();
                    assert!(gap <= bound + 1e-15, "eta={eta} d={d}");
                }
            }
        }
    }

    #[test]
    fn functional_spec_validation() {
        assert!(FunctionalSpec::new(FunctionalKind::Level { x0: 1.5 }).is_err());
        assert!(FunctionalSpec::new(FunctionalKind::CdfDiff {
            y_star: -0.1,
            x0: 0.2,
            x1: 0.8
        })
        .is_err());
        assert!(FunctionalSpec::new(FunctionalKind::Level { x0: 0.5 })
            .unwrap()
            .with_smoothing(-3.0)
            .is_err());
    }

    #[test]
    fn cross_pairs_materializes_all_combinations() {
        let g = grid();
        let pairs = random_pairs(3, 21, &g);
        let crossed = cross_pairs(&pairs).unwrap();
        assert_eq!(crossed.len(), 9);
        let mut ids: Vec<u64> = crossed.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 9);
        assert_eq!(crossed[1].y_path, pairs[0].y_path);
        assert_eq!(crossed[1].x_path, pairs[1].x_path);
    }

    #[test]
    fn coordinate_dump_lists_every_entry() {
        let g = grid();
        let pair = PathPair::new(Path::constant(1.0, &g), Path::constant(1.0, &g), 0).unwrap();
        let m = IndicatorMatrix::build(&[pair], &g).unwrap();
        let text = m.to_coordinate_text();
        assert_eq!(text.lines().count(), m.nnz());
        let last = g.len() - 1;
        assert!(text.contains(&format!("{} 0", g.cell_index(last, last, 0))));
    }

    #[test]
    fn mul_vec_is_thread_count_invariant() {
        let g = Grid::dyadic(3).unwrap();
        let pairs = random_pairs(150, 8, &g);
        let m = IndicatorMatrix::build(&pairs, &g).unwrap();
        let w: Vec<f64> = (0..m.ncols()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut a = vec![0.0; m.nrows()];
        let mut b = vec![0.0; m.nrows()];
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| m.mul_vec(&w, &mut a));
        rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap()
            .install(|| m.mul_vec(&w, &mut b));
        assert_eq!(a, b);
    }
}
