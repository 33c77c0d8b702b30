//! Piecewise-linear paths over the unit interval, built from summed
//! hat-basis levels, and the joint second-stage/first-stage pair.

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::paths::basis::{scaled_hat, shifts_at, Direction};

/// Coefficients for one dilation level; `coeffs[j]` multiplies the hat
/// at shift `j`, `j = 0..=2^level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCoeffs {
    pub level: u32,
    pub coeffs: Vec<f64>,
}

/// Affine map plus optional truncation applied to the summed basis value.
/// Renormalization into the unit interval lives here so the coefficients
/// stay exactly as drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub scale: f64,
    pub offset: f64,
    pub clamp: bool,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        scale: 1.0,
        offset: 0.0,
        clamp: false,
    };

    fn apply(&self, v: f64) -> f64 {
        let v = self.scale * v + self.offset;
        if self.clamp {
            v.clamp(0.0, 1.0)
        } else {
            v
        }
    }
}

/// One sampled path: continuous and piecewise linear with knots at the
/// finest dilation level.
///
/// Serializes to a self-describing JSON layout: per-level coefficient
/// arrays, the affine transform, the cached grid evaluation, and the
/// optional monotonicity certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    levels: Vec<LevelCoeffs>,
    transform: Transform,
    cached_values: Vec<f64>,
    monotone_tag: Option<Direction>,
}

impl Path {
    pub fn from_coefficients(
        levels: Vec<LevelCoeffs>,
        transform: Transform,
        monotone_tag: Option<Direction>,
        grid: &Grid,
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::validation("path needs at least one level"));
        }
        for lc in &levels {
            if lc.coeffs.len() != shifts_at(lc.level) {
                return Err(Error::validation(format!(
                    "level {} expects {} coefficients, got {}",
                    lc.level,
                    shifts_at(lc.level),
                    lc.coeffs.len()
                )));
            }
            if lc.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::validation("non-finite coefficient"));
            }
        }
        let mut path = Path {
            levels,
            transform,
            cached_values: Vec::new(),
            monotone_tag,
        };
        path.cached_values = grid.points().iter().map(|&p| path.eval(p)).collect();
        Ok(path)
    }

    /// Single-level path interpolating `values` at the knots `k / 2^level`.
    pub fn from_knot_values(
        level: u32,
        values: &[f64],
        transform: Transform,
        monotone_tag: Option<Direction>,
        grid: &Grid,
    ) -> Result<Self> {
        if values.len() != shifts_at(level) {
            return Err(Error::validation(format!(
                "level {} expects {} knot values, got {}",
                level,
                shifts_at(level),
                values.len()
            )));
        }
        let norm = ((1u64 << level) as f64).sqrt();
        let coeffs = values.iter().map(|v| v / norm).collect();
        Path::from_coefficients(vec![LevelCoeffs { level, coeffs }], transform, monotone_tag, grid)
    }

    /// Constant path `value` everywhere, represented at level 1.
    pub fn constant(value: f64, grid: &Grid) -> Self {
        Path::from_knot_values(1, &[value; 3], Transform::IDENTITY, None, grid)
            .expect("constant path is always valid")
    }

    /// Identity path interpolating `f(t) = t`, represented at level 1.
    pub fn identity(grid: &Grid) -> Self {
        Path::from_knot_values(1, &[0.0, 0.5, 1.0], Transform::IDENTITY, None, grid)
            .expect("identity path is always valid")
    }

    fn raw_eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for lc in &self.levels {
            let n = 1i64 << lc.level;
            let u = (n as f64) * t;
            // only the two hats around floor(u) can be non-zero
            let j0 = u.floor() as i64;
            for j in j0..=j0 + 1 {
                if (0..=n).contains(&j) {
                    acc += lc.coeffs[j as usize] * scaled_hat(lc.level, j, t);
                }
            }
        }
        acc
    }

    /// Path value at `t`. Piecewise linear; continuous everywhere.
    pub fn eval(&self, t: f64) -> f64 {
        self.transform.apply(self.raw_eval(t))
    }

    pub fn cached_values(&self) -> &[f64] {
        &self.cached_values
    }

    pub fn monotone_tag(&self) -> Option<Direction> {
        self.monotone_tag
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    pub fn levels(&self) -> &[LevelCoeffs] {
        &self.levels
    }

    pub fn finest_level(&self) -> u32 {
        self.levels.iter().map(|lc| lc.level).max().unwrap()
    }

    /// Values at the knots of the finest level. Min/max and monotonicity
    /// of the whole path are exactly determined here.
    pub fn finest_knot_values(&self) -> Vec<f64> {
        let n = 1usize << self.finest_level();
        (0..=n).map(|k| self.eval(k as f64 / n as f64)).collect()
    }

    /// Check monotonicity from the finest knot values.
    pub fn verify_monotone(&self, direction: Direction) -> bool {
        let vals = self.finest_knot_values();
        match direction {
            Direction::NonDecreasing => vals.windows(2).all(|w| w[1] >= w[0]),
            Direction::NonIncreasing => vals.windows(2).all(|w| w[1] <= w[0]),
        }
    }

    /// Hash of the coefficients and transform, quantized at 1e-12, used to
    /// deduplicate sampled paths.
    pub fn quantized_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        let q = |v: f64| (v / 1e-12).round() as i128;
        for lc in &self.levels {
            lc.level.hash(&mut h);
            for &c in &lc.coeffs {
                q(c).hash(&mut h);
            }
        }
        q(self.transform.scale).hash(&mut h);
        q(self.transform.offset).hash(&mut h);
        self.transform.clamp.hash(&mut h);
        h.finish()
    }
}

/// One sampled hypothetical unit: a second-stage path indexed by the
/// treatment and a first-stage path indexed by the instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPair {
    pub y_path: Path,
    pub x_path: Path,
    pub id: u64,
}

impl PathPair {
    pub fn new(y_path: Path, x_path: Path, id: u64) -> Result<Self> {
        if y_path.cached_values.len() != x_path.cached_values.len() {
            return Err(Error::validation(
                "path pair stages evaluated on different grids",
            ));
        }
        Ok(PathPair { y_path, x_path, id })
    }

    pub fn grid_len(&self) -> usize {
        self.y_path.cached_values.len()
    }

    /// Joint hash of both stages, for pool uniqueness.
    pub fn quantized_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.y_path.quantized_hash().hash(&mut h);
        self.x_path.quantized_hash().hash(&mut h);
        h.finish()
    }
}

/// Evaluate the joint process at instrument level `z`: the first stage
/// picks the realized treatment, the second stage reads only that
/// treatment (the exclusion restriction: `y` never sees `z` directly).
pub fn compose(pair: &PathPair, z: f64) -> (f64, f64) {
    let x = pair.x_path.eval(z);
    let y = pair.y_path.eval(x);
    (y, x)
}
