//! Randomized path sampling under the representative law.
//!
//! Every pair is generated from an independent counter-derived RNG stream,
//! so a batch can be produced in parallel with output that depends only on
//! `(seed, index)`, never on thread count.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::paths::basis::{shifts_at, BasisSpec, ClipMode, CoefficientLaw, Direction};
use crate::paths::path::{LevelCoeffs, Path, PathPair, Transform};

/// Shape predicate on a pair: optional monotonicity per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ShapeFilter {
    pub y: Option<Direction>,
    pub x: Option<Direction>,
}

impl ShapeFilter {
    pub fn y_monotone(direction: Direction) -> Self {
        ShapeFilter {
            y: Some(direction),
            x: None,
        }
    }

    pub fn x_monotone(direction: Direction) -> Self {
        ShapeFilter {
            y: None,
            x: Some(direction),
        }
    }

    pub fn both(y: Direction, x: Direction) -> Self {
        ShapeFilter {
            y: Some(y),
            x: Some(x),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.y.is_none() && self.x.is_none()
    }

    /// A construction certificate short-circuits the numeric check.
    pub fn accepts(&self, pair: &PathPair) -> bool {
        let stage_ok = |path: &Path, want: Option<Direction>| match want {
            None => true,
            Some(dir) => path.monotone_tag() == Some(dir) || path.verify_monotone(dir),
        };
        stage_ok(&pair.y_path, self.y) && stage_ok(&pair.x_path, self.x)
    }
}

/// Deterministic pair generator. The sampler owns the running index, so
/// successive batches never collide and a run can be checkpointed by
/// recording `next_index`.
#[derive(Debug, Clone)]
pub struct PathSampler {
    spec: BasisSpec,
    grid: Grid,
    seed: u64,
    next_index: u64,
    /// Rejection sampling gives up when fewer than this fraction of
    /// attempts pass the filter...
    pub acceptance_floor: f64,
    /// ...once at least this many attempts were made.
    pub attempt_cap: usize,
}

impl PathSampler {
    pub fn new(spec: BasisSpec, grid: Grid, seed: u64) -> Self {
        PathSampler {
            spec,
            grid,
            seed,
            next_index: 0,
            acceptance_floor: 1e-3,
            attempt_cap: 10_000,
        }
    }

    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    /// Restore the running index (checkpoint resume).
    pub fn set_next_index(&mut self, index: u64) {
        self.next_index = index;
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    fn stream_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    fn draw_path(&self, rng: &mut ChaCha8Rng, law: &CoefficientLaw) -> Path {
        match law {
            CoefficientLaw::UniformBox { scale } => {
                let mut levels = Vec::with_capacity(self.spec.levels.len());
                for &level in &self.spec.levels {
                    let half = scale * ((1u64 << level) as f64).sqrt().recip();
                    let dist = Uniform::new_inclusive(-half, half);
                    let coeffs = (0..shifts_at(level)).map(|_| dist.sample(rng)).collect();
                    levels.push(LevelCoeffs { level, coeffs });
                }
                self.finish_path(rng, levels, None)
            }
            CoefficientLaw::MonotoneIncrements { direction, scale } => {
                let level = self.spec.max_level();
                let n = 1usize << level;
                // expected total rise equals `scale`
                let step = Uniform::new(0.0, 2.0 * scale / n as f64);
                let sign = match direction {
                    Direction::NonDecreasing => 1.0,
                    Direction::NonIncreasing => -1.0,
                };
                let mut values = Vec::with_capacity(n + 1);
                let mut acc = 0.0;
                values.push(acc);
                for _ in 0..n {
                    acc += sign * step.sample(rng);
                    values.push(acc);
                }
                let norm = ((1u64 << level) as f64).sqrt();
                let coeffs = values.iter().map(|v| v / norm).collect();
                self.finish_path(rng, vec![LevelCoeffs { level, coeffs }], Some(*direction))
            }
        }
    }

    /// Attach the unit-range transform. Renormalization maps a too-wide
    /// path exactly onto `[0, 1]` and translates a narrower one to a
    /// uniformly drawn feasible offset, so nearly-flat paths land anywhere
    /// in the interval instead of piling up at one end.
    fn finish_path(
        &self,
        rng: &mut ChaCha8Rng,
        levels: Vec<LevelCoeffs>,
        monotone: Option<Direction>,
    ) -> Path {
        let transform = if !self.spec.clip {
            Transform::IDENTITY
        } else {
            match self.spec.clip_mode {
                ClipMode::Truncate => Transform {
                    scale: 1.0,
                    offset: 0.0,
                    clamp: true,
                },
                ClipMode::Renormalize => {
                    let probe = Path::from_coefficients(
                        levels.clone(),
                        Transform::IDENTITY,
                        None,
                        &self.grid,
                    )
                    .expect("sampled coefficients are well-formed");
                    let knots = probe.finest_knot_values();
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for &v in &knots {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    let range = hi - lo;
                    // the clamp never moves a value beyond rounding noise
                    // here; it only stops ulp overshoot past the endpoints
                    if lo >= 0.0 && hi <= 1.0 {
                        Transform::IDENTITY
                    } else if range > 1.0 {
                        let scale = 1.0 / range;
                        Transform {
                            scale,
                            offset: -lo * scale,
                            clamp: true,
                        }
                    } else {
                        let offset = Uniform::new_inclusive(-lo, 1.0 - hi).sample(rng);
                        Transform {
                            scale: 1.0,
                            offset,
                            clamp: true,
                        }
                    }
                }
            }
        };
        Path::from_coefficients(levels, transform, monotone, &self.grid)
            .expect("sampled coefficients are well-formed")
    }

    /// Generate the pair for an explicit stream index.
    fn pair_at(&self, index: u64, y_law: &CoefficientLaw, x_law: &CoefficientLaw) -> PathPair {
        let mut rng = self.stream_rng(index);
        let y_path = self.draw_path(&mut rng, y_law);
        let x_path = self.draw_path(&mut rng, x_law);
        PathPair::new(y_path, x_path, index).expect("stages share the sampler grid")
    }

    /// Draw `count` pairs under the spec law, optionally rejection-sampled
    /// against `filter`.
    pub fn sample_pairs(
        &mut self,
        count: usize,
        filter: Option<&ShapeFilter>,
    ) -> Result<Vec<PathPair>> {
        if count == 0 {
            return Err(Error::validation("count must be at least 1"));
        }
        let law = self.spec.coefficient_law.clone();
        match filter {
            None | Some(&ShapeFilter { y: None, x: None }) => {
                Ok(self.batch(count, &law, &law))
            }
            Some(filter) => {
                let mut accepted = Vec::with_capacity(count);
                let mut attempts = 0usize;
                while accepted.len() < count {
                    let batch = self.batch(count.max(16), &law, &law);
                    attempts += batch.len();
                    accepted.extend(batch.into_iter().filter(|p| filter.accepts(p)));
                    if attempts >= self.attempt_cap {
                        let rate = accepted.len() as f64 / attempts as f64;
                        if rate < self.acceptance_floor {
                            return Err(Error::FilterInfeasible {
                                acceptance_rate: rate,
                                attempts,
                            });
                        }
                    }
                }
                accepted.truncate(count);
                Ok(accepted)
            }
        }
    }

    /// Draw `count` pairs whose stages are constructed monotone per the
    /// filter's directions (no rejection); stages without a direction fall
    /// back to the spec law.
    pub fn sample_shaped_pairs(&mut self, count: usize, filter: &ShapeFilter) -> Vec<PathPair> {
        let base = self.spec.coefficient_law.clone();
        let shaped = |dir: Option<Direction>| match dir {
            Some(d) => CoefficientLaw::monotone(d, base.scale()),
            None => base.clone(),
        };
        self.batch(count, &shaped(filter.y), &shaped(filter.x))
    }

    fn batch(&mut self, count: usize, y_law: &CoefficientLaw, x_law: &CoefficientLaw) -> Vec<PathPair> {
        let start = self.next_index;
        self.next_index += count as u64;
        (start..start + count as u64)
            .into_par_iter()
            .map(|i| self.pair_at(i, y_law, x_law))
            .collect()
    }
}

/// One-shot sampling under a fresh sampler; deterministic in `seed`.
pub fn sample_paths(
    spec: &BasisSpec,
    grid: &Grid,
    count: usize,
    filter: Option<&ShapeFilter>,
    seed: u64,
) -> Result<Vec<PathPair>> {
    PathSampler::new(spec.clone(), grid.clone(), seed).sample_pairs(count, filter)
}
