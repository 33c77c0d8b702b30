//! Smoothed conditional empirical CDF on the grid cube.
//!
//! The conditioning variable is smoothed with a Gaussian kernel; the
//! outcome/treatment arguments stay as exact indicators, which keeps the
//! field monotone along both of those axes up to the kernel weighting.

use std::path::Path as FsPath;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Dataset, Grid};

fn gaussian(t: f64) -> f64 {
    (-0.5 * t * t).exp()
}

/// Smoothed conditional CDF estimate at one point, with the fallback flag
/// set when the kernel mass at `z` underflowed and the unconditional
/// empirical CDF was used instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondCdf {
    pub value: f64,
    pub fallback: bool,
}

/// `P(Y <= y, X <= x | Z = z)` smoothed with bandwidth `h`.
pub fn cond_cdf(data: &Dataset, y: f64, x: f64, z: f64, h: f64) -> Result<f64> {
    cond_cdf_detailed(data, y, x, z, h).map(|c| c.value)
}

pub fn cond_cdf_detailed(data: &Dataset, y: f64, x: f64, z: f64, h: f64) -> Result<CondCdf> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::validation(format!(
            "bandwidth must be strictly positive, got {h}"
        )));
    }
    if data.is_empty() {
        return Err(Error::validation("empty dataset"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut hits = 0usize;
    for rec in data.records() {
        let w = gaussian((z - rec[2]) / h);
        let ind = rec[0] <= y && rec[1] <= x;
        den += w;
        if ind {
            num += w;
            hits += 1;
        }
    }
    if den > 0.0 {
        Ok(CondCdf {
            value: (num / den).clamp(0.0, 1.0),
            fallback: false,
        })
    } else {
        Ok(CondCdf {
            value: hits as f64 / data.len() as f64,
            fallback: true,
        })
    }
}

/// The smoothed conditional CDF tabulated over the whole grid cube.
///
/// `values` is flattened z-major, then x, then y, matching
/// [`Grid::cell_index`] and therefore the constraint-matrix row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfField {
    grid: Grid,
    values: Vec<f64>,
    bandwidth: f64,
    /// z-slices whose kernel mass underflowed to the unconditional ECDF.
    fallback_slices: usize,
    /// Largest raise applied by the monotonicity cleanup; anything above
    /// 1e-8 indicates a real estimator violation rather than rounding.
    cleanup_deviation: f64,
}

impl CdfField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn fallback_slices(&self) -> usize {
        self.fallback_slices
    }

    pub fn cleanup_deviation(&self) -> f64 {
        self.cleanup_deviation
    }

    pub fn at(&self, iy: usize, ix: usize, iz: usize) -> f64 {
        self.values[self.grid.cell_index(iy, ix, iz)]
    }

    pub fn save(&self, path: &FsPath) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let file =
            std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let field: CdfField = serde_json::from_reader(std::io::BufReader::new(file))?;
        Ok(field)
    }
}

/// Tabulate the estimator on the full cube. Work is per z-slice: records
/// are bucketed into the first grid cell dominating them and accumulated
/// with a two-dimensional prefix sum, so a slice costs `O(n + len^2)`.
pub fn cdf_field(data: &Dataset, grid: &Grid, h: f64) -> Result<CdfField> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::validation(format!(
            "bandwidth must be strictly positive, got {h}"
        )));
    }
    if data.is_empty() {
        return Err(Error::validation("empty dataset"));
    }
    let len = grid.len();
    let slices: Vec<(Vec<f64>, bool, f64)> = grid
        .points()
        .par_iter()
        .map(|&z| {
            let weights: Vec<f64> = data
                .records()
                .iter()
                .map(|rec| gaussian((z - rec[2]) / h))
                .collect();
            let total: f64 = weights.iter().sum();
            let fallback = total <= 0.0;
            let mut bins = vec![0.0f64; len * len];
            let mut mass = 0.0;
            for (rec, &w) in data.records().iter().zip(&weights) {
                let w = if fallback { 1.0 } else { w };
                let iy = grid.first_at_or_above(rec[0]);
                let ix = grid.first_at_or_above(rec[1]);
                bins[ix * len + iy] += w;
                mass += w;
            }
            // suffix of bins along both axes via prefix of the cumulative:
            // cell (iy, ix) needs every record with bucket <= (iy, ix)
            for ix in 0..len {
                for iy in 1..len {
                    bins[ix * len + iy] += bins[ix * len + iy - 1];
                }
            }
            for ix in 1..len {
                for iy in 0..len {
                    bins[ix * len + iy] += bins[(ix - 1) * len + iy];
                }
            }
            let mut deviation = 0.0f64;
            let mut values = vec![0.0f64; len * len];
            for ix in 0..len {
                for iy in 0..len {
                    let raw = (bins[ix * len + iy] / mass).clamp(0.0, 1.0);
                    let mut v = raw;
                    if iy > 0 {
                        v = v.max(values[ix * len + iy - 1]);
                    }
                    if ix > 0 {
                        v = v.max(values[(ix - 1) * len + iy]);
                    }
                    deviation = deviation.max(v - raw);
                    values[ix * len + iy] = v;
                }
            }
            (values, fallback, deviation)
        })
        .collect();

    let mut values = Vec::with_capacity(len * len * len);
    let mut fallback_slices = 0;
    let mut cleanup_deviation = 0.0f64;
    for (slice, fallback, dev) in slices {
        values.extend(slice);
        fallback_slices += fallback as usize;
        cleanup_deviation = cleanup_deviation.max(dev);
    }
    Ok(CdfField {
        grid: grid.clone(),
        values,
        bandwidth: h,
        fallback_slices,
        cleanup_deviation,
    })
}

/// Pick the bandwidth minimizing leave-one-out squared error of the
/// smoothed indicator regression, averaged over the grid's `(y, x)` points
/// and held-out records. Ties break toward the larger bandwidth.
pub fn cv_bandwidth(data: &Dataset, grid: &Grid, candidates: &[f64]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::validation("no bandwidth candidates"));
    }
    if data.len() < 10 {
        return Err(Error::validation(format!(
            "cross-validation needs at least 10 records, got {}",
            data.len()
        )));
    }
    for &h in candidates {
        if h <= 0.0 || !h.is_finite() {
            return Err(Error::validation(format!("invalid candidate {h}")));
        }
    }
    let len = grid.len();
    let n = data.len();
    let records = data.records();
    let buckets: Vec<(usize, usize)> = records
        .iter()
        .map(|rec| (grid.first_at_or_above(rec[0]), grid.first_at_or_above(rec[1])))
        .collect();

    let mut best: Option<(f64, f64)> = None; // (score, h)
    let mut degenerate_reasons = Vec::new();
    for &h in candidates {
        let scores: Vec<Option<f64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let zk = records[k][2];
                let mut bins = vec![0.0f64; len * len];
                let mut mass = 0.0;
                for i in 0..n {
                    if i == k {
                        continue;
                    }
                    let w = gaussian((zk - records[i][2]) / h);
                    bins[buckets[i].1 * len + buckets[i].0] += w;
                    mass += w;
                }
                if mass <= 0.0 {
                    return None;
                }
                for ix in 0..len {
                    for iy in 1..len {
                        bins[ix * len + iy] += bins[ix * len + iy - 1];
                    }
                }
                for ix in 1..len {
                    for iy in 0..len {
                        bins[ix * len + iy] += bins[(ix - 1) * len + iy];
                    }
                }
                let (ky, kx) = buckets[k];
                let mut err = 0.0;
                for ix in 0..len {
                    for iy in 0..len {
                        let pred = bins[ix * len + iy] / mass;
                        let truth = (iy >= ky && ix >= kx) as u8 as f64;
                        let d = truth - pred;
                        err += d * d;
                    }
                }
                Some(err)
            })
            .collect();
        if scores.iter().any(|s| s.is_none()) {
            degenerate_reasons.push(format!("h={h}: zero kernel mass at a held-out point"));
            continue;
        }
        let score =
            scores.iter().map(|s| s.unwrap()).sum::<f64>() / (n as f64 * (len * len) as f64);
        let better = match best {
            None => true,
            Some((s, bh)) => score < s || (score == s && h > bh),
        };
        if better {
            best = Some((score, h));
        }
    }
    match best {
        Some((_, h)) => Ok(h),
        None => Err(Error::BandwidthSelection(degenerate_reasons.join("; "))),
    }
}
