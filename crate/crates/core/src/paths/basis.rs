//! Hat-function basis and the sampling law for path coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Triangular bump: `x + 1` on `[-1, 0]`, `1 - x` on `(0, 1]`, zero outside.
pub fn hat(x: f64) -> f64 {
    if (-1.0..=0.0).contains(&x) {
        x + 1.0
    } else if x > 0.0 && x <= 1.0 {
        1.0 - x
    } else {
        0.0
    }
}

/// Dilated and translated hat `2^{level/2} * hat(2^level * x - shift)`.
///
/// Support is `[(shift - 1) / 2^level, (shift + 1) / 2^level]`.
pub fn scaled_hat(level: u32, shift: i64, x: f64) -> f64 {
    let scale = (1u64 << level) as f64;
    scale.sqrt() * hat(scale * x - shift as f64)
}

/// Number of basis shifts at `level` whose support intersects `[0, 1]`,
/// i.e. `shift = 0..=2^level`.
pub fn shifts_at(level: u32) -> usize {
    (1usize << level) + 1
}

/// Monotonicity direction certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
}

/// How coefficients are drawn for one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CoefficientLaw {
    /// Independent uniform draws on `[-c, c]` per coefficient, with the
    /// per-level half-width `c = scale * 2^{-level/2}` so every level
    /// contributes comparably to the summed path.
    UniformBox { scale: f64 },
    /// Piecewise-linear knot values built from independent nonnegative
    /// (or nonpositive) uniform increments, yielding a certified monotone
    /// path without rejection.
    MonotoneIncrements { direction: Direction, scale: f64 },
}

impl CoefficientLaw {
    pub fn uniform(scale: f64) -> Self {
        CoefficientLaw::UniformBox { scale }
    }

    pub fn monotone(direction: Direction, scale: f64) -> Self {
        CoefficientLaw::MonotoneIncrements { direction, scale }
    }

    pub fn scale(&self) -> f64 {
        match self {
            CoefficientLaw::UniformBox { scale } => *scale,
            CoefficientLaw::MonotoneIncrements { scale, .. } => *scale,
        }
    }
}

/// How a sampled path is brought into the unit interval when `clip` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ClipMode {
    /// Affine renormalization: paths wider than the unit interval are
    /// mapped exactly onto `[0, 1]`; narrower paths are translated to a
    /// uniformly random feasible offset. Shape certificates survive.
    #[default]
    Renormalize,
    /// Hard truncation of values into `[0, 1]`.
    Truncate,
}

/// Basis configuration: which dilation levels are summed and how the
/// coefficients are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    /// Dilation levels summed over; must be non-empty, kept sorted and
    /// deduplicated.
    pub levels: Vec<u32>,
    pub coefficient_law: CoefficientLaw,
    /// Constrain path values into `[0, 1]`.
    pub clip: bool,
    pub clip_mode: ClipMode,
}

impl BasisSpec {
    pub fn new(levels: impl IntoIterator<Item = u32>, law: CoefficientLaw) -> Result<Self> {
        let mut levels: Vec<u32> = levels.into_iter().collect();
        levels.sort_unstable();
        levels.dedup();
        if levels.is_empty() {
            return Err(Error::validation("basis needs at least one level"));
        }
        if levels.iter().any(|&l| l == 0 || l > 20) {
            return Err(Error::validation("basis levels must lie in 1..=20"));
        }
        if law.scale() <= 0.0 || !law.scale().is_finite() {
            return Err(Error::validation("coefficient scale must be positive"));
        }
        Ok(BasisSpec {
            levels,
            coefficient_law: law,
            clip: true,
            clip_mode: ClipMode::Renormalize,
        })
    }

    pub fn with_clip(mut self, clip: bool) -> Self {
        self.clip = clip;
        self
    }

    pub fn with_clip_mode(mut self, mode: ClipMode) -> Self {
        self.clip_mode = mode;
        self
    }

    pub fn max_level(&self) -> u32 {
        *self.levels.last().unwrap()
    }

    /// Total coefficient count across all levels.
    pub fn coefficient_count(&self) -> usize {
        self.levels.iter().map(|&l| shifts_at(l)).sum()
    }
}
