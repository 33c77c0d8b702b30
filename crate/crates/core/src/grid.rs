//! Dyadic grids on the unit interval and affine rescaling of raw data
//! into the unit cube.
//!
//! A single [`Grid`] serves all three axes (outcome, treatment, instrument):
//! the unit cube is decomposed the same way in every direction, so the grid
//! order is the only resolution parameter.

use std::io::Write as _;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum dyadic order. Above this the `(2^j + 1)^3` constraint rows no
/// longer fit in memory for any realistic solve.
pub const MAX_GRID_ORDER: u32 = 16;

/// Partition of `[0, 1]` into ordered points shared by all three axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    order: u32,
    points: Vec<f64>,
    custom: bool,
}

impl Grid {
    /// Uniform dyadic grid `{ k / 2^order : k = 0..=2^order }`.
    pub fn dyadic(order: u32) -> Result<Self> {
        if order > MAX_GRID_ORDER {
            let n = (1u128 << order) + 1;
            return Err(Error::Capacity {
                order,
                cap: MAX_GRID_ORDER,
                rows: n * n * n,
            });
        }
        let n = 1usize << order;
        let points = (0..=n).map(|k| k as f64 / n as f64).collect();
        Ok(Grid {
            order,
            points,
            custom: false,
        })
    }

    /// User-supplied grid. Only the endpoint and ordering invariants are
    /// enforced; spacing may be non-uniform (useful when the data is skewed
    /// toward one end of the interval).
    pub fn custom(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::validation("custom grid needs at least 2 points"));
        }
        if points[0] != 0.0 || *points.last().unwrap() != 1.0 {
            return Err(Error::validation(
                "custom grid must start at 0.0 and end at 1.0",
            ));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("custom grid must be strictly ascending"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("custom grid contains non-finite points"));
        }
        let order = (points.len() as f64 - 1.0).log2().ceil() as u32;
        Ok(Grid {
            order,
            points,
            custom: true,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_custom(&self) -> bool {
        self.custom
    }

    /// Number of cells in the full cube, i.e. the row count of the
    /// constraint matrix built on this grid.
    pub fn cube_len(&self) -> usize {
        self.points.len().pow(3)
    }

    /// Row index of the cube cell `(iy, ix, iz)`, ordered z-major, then x,
    /// then y (y fastest).
    pub fn cell_index(&self, iy: usize, ix: usize, iz: usize) -> usize {
        (iz * self.len() + ix) * self.len() + iy
    }

    /// Smallest index `i` with `points[i] >= v`, or `len()` when `v`
    /// exceeds every point.
    pub fn first_at_or_above(&self, v: f64) -> usize {
        self.points.partition_point(|&p| p < v)
    }
}

/// Per-axis affine map retained so unit-cube results can be translated back
/// to raw data units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisScale {
    pub min: f64,
    pub max: f64,
}

impl AxisScale {
    pub fn to_unit(&self, raw: f64) -> f64 {
        (raw - self.min) / (self.max - self.min)
    }

    pub fn from_unit(&self, unit: f64) -> f64 {
        self.min + unit * (self.max - self.min)
    }
}

/// Observations `(y, x, z)` rescaled into the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<[f64; 3]>,
    rescale_params: [AxisScale; 3],
}

const AXIS_NAMES: [&str; 3] = ["y", "x", "z"];

impl Dataset {
    /// Rescale raw `(y, x, z)` triples so each axis spans exactly `[0, 1]`.
    ///
    /// A constant axis cannot be mapped onto the unit interval and is
    /// rejected; so is any non-finite coordinate.
    pub fn rescale(raw: &[[f64; 3]]) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::validation(format!(
                "need at least 2 records, got {}",
                raw.len()
            )));
        }
        let mut params = [AxisScale { min: 0.0, max: 1.0 }; 3];
        for axis in 0..3 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (i, rec) in raw.iter().enumerate() {
                let v = rec[axis];
                if !v.is_finite() {
                    return Err(Error::validation(format!(
                        "non-finite value on axis '{}' at record {i}",
                        AXIS_NAMES[axis]
                    )));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if lo == hi {
                return Err(Error::DegenerateAxis {
                    axis: AXIS_NAMES[axis],
                    value: lo,
                    count: raw.len(),
                });
            }
            params[axis] = AxisScale { min: lo, max: hi };
        }
        let records = raw
            .iter()
            .map(|rec| {
                [
                    params[0].to_unit(rec[0]),
                    params[1].to_unit(rec[1]),
                    params[2].to_unit(rec[2]),
                ]
            })
            .collect();
        Ok(Dataset {
            records,
            rescale_params: params,
        })
    }

    /// Wrap records already known to lie in the unit cube.
    pub fn from_unit_records(records: Vec<[f64; 3]>) -> Result<Self> {
        for (i, rec) in records.iter().enumerate() {
            for (axis, &v) in rec.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::validation(format!(
                        "record {i} axis '{}' value {v} outside [0, 1]",
                        AXIS_NAMES[axis]
                    )));
                }
            }
        }
        if records.is_empty() {
            return Err(Error::validation("empty dataset"));
        }
        Ok(Dataset {
            records,
            rescale_params: [AxisScale { min: 0.0, max: 1.0 }; 3],
        })
    }

    pub fn records(&self) -> &[[f64; 3]] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rescale_params(&self) -> &[AxisScale; 3] {
        &self.rescale_params
    }

    /// Read a delimited file with a header row. `columns` names the
    /// outcome/treatment/instrument columns. Raw values are rescaled;
    /// data already spanning `[0, 1]` passes through unchanged.
    pub fn from_csv(path: &FsPath, columns: &ColumnMap) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        let headers = reader.headers()?.clone();
        let idx_of = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::validation(format!("missing column '{name}' in header")))
        };
        let (iy, ix, iz) = (
            idx_of(&columns.outcome)?,
            idx_of(&columns.treatment)?,
            idx_of(&columns.instrument)?,
        );
        let mut raw = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse {
                        line: line + 2,
                        message: "short record".into(),
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse {
                        line: line + 2,
                        message: e.to_string(),
                    })
            };
            raw.push([parse(iy)?, parse(ix)?, parse(iz)?]);
        }
        Dataset::rescale(&raw)
    }

    /// Write the unit-cube records with the canonical `y,x,z` header.
    pub fn to_csv(&self, path: &FsPath) -> Result<()> {
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        writeln!(out, "y,x,z").map_err(|e| Error::io(path.display().to_string(), e))?;
        for rec in &self.records {
            writeln!(out, "{:.17},{:.17},{:.17}", rec[0], rec[1], rec[2])
                .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        Ok(())
    }
}

/// Names of the raw data columns in an ingested CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub outcome: String,
    pub treatment: String,
    pub instrument: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            outcome: "y".into(),
            treatment: "x".into(),
            instrument: "z".into(),
        }
    }
}
