//! The iterative bounds loop: sample new path pairs, append their columns,
//! solve both penalized programs warm-started, discard zero-weight columns,
//! and stop once the min and max solution paths are both stable.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    append_columns, cross_pairs, drop_zero_columns, FunctionalSpec, FunctionalVector,
    IndicatorMatrix,
};
use crate::cdf::CdfField;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::paths::{BasisSpec, PathPair, PathSampler, ShapeFilter};
use crate::qp::{solve, AdmmParams, QpProblem, Sense, WarmStart};

/// How sampled stages combine into columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PairingMode {
    /// One column per sampled pair.
    #[default]
    Paired,
    /// Every second stage crossed with every first stage within a batch.
    CrossProduct,
}

/// Everything one bounds run needs besides the CDF field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub lambda: f64,
    /// Initial pool size shared by both senses.
    pub l_init: usize,
    /// Pairs appended per iteration.
    pub l_add: usize,
    /// Moving window length for the convergence test and trailing averages.
    pub window: usize,
    /// Convergence threshold on both moving standard deviations.
    pub delta: f64,
    pub max_iterations: usize,
    /// Columns with solved weight below this are discarded each iteration.
    pub discard_threshold: f64,
    pub functional: FunctionalSpec,
    pub basis: BasisSpec,
    /// Shape restriction used for the constructed fraction of each batch
    /// and by the nested-restriction report.
    pub filter: Option<ShapeFilter>,
    /// Fraction of each batch drawn with the shape construction.
    pub filter_mix: f64,
    pub pairing: PairingMode,
    pub rng_seed: u64,
    pub qp: AdmmParams,
}

impl SolveConfig {
    pub fn new(lambda: f64, functional: FunctionalSpec, basis: BasisSpec) -> Self {
        SolveConfig {
            lambda,
            l_init: 50,
            l_add: 10,
            window: 200,
            delta: 5e-3,
            max_iterations: 3000,
            discard_threshold: 1e-8,
            functional,
            basis,
            filter: None,
            filter_mix: 0.0,
            pairing: PairingMode::Paired,
            rng_seed: 0,
            qp: AdmmParams::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 || !self.lambda.is_finite() {
            return Err(Error::validation("lambda must be strictly positive"));
        }
        if self.l_init == 0 || self.l_add == 0 {
            return Err(Error::validation("l_init and l_add must be at least 1"));
        }
        if self.window < 2 {
            return Err(Error::validation("window must be at least 2"));
        }
        if self.delta <= 0.0 {
            return Err(Error::validation("delta must be strictly positive"));
        }
        if !(0.0..=1.0).contains(&self.filter_mix) {
            return Err(Error::validation("filter_mix must lie in [0, 1]"));
        }
        if self.filter_mix > 0.0 && self.filter.is_none() {
            return Err(Error::validation("filter_mix set without a filter"));
        }
        if self.discard_threshold < 0.0 {
            return Err(Error::validation("discard threshold must be >= 0"));
        }
        Ok(())
    }
}

/// One iteration of the solution path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub v_min: f64,
    pub v_max: f64,
    /// Live pool sizes after the append that fed these solves.
    pub pool_min: usize,
    pub pool_max: usize,
    pub resid_min: f64,
    pub resid_max: f64,
    pub discarded_min: usize,
    pub discarded_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    InfeasibleFilter,
}

/// The recorded solution path plus terminal diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsTrace {
    pub records: Vec<IterationRecord>,
    pub status: Status,
    pub window: usize,
}

impl BoundsTrace {
    /// Mean of the last `window` recorded values (or all, when shorter).
    pub fn trailing_average(&self, window: usize) -> Option<(f64, f64)> {
        if self.records.is_empty() {
            return None;
        }
        let tail = &self.records[self.records.len().saturating_sub(window)..];
        let n = tail.len() as f64;
        Some((
            tail.iter().map(|r| r.v_min).sum::<f64>() / n,
            tail.iter().map(|r| r.v_max).sum::<f64>() / n,
        ))
    }

    pub fn write_csv(&self, path: &FsPath) -> Result<()> {
        let mut out = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        writeln!(out, "iter,v_min,v_max,pool_min,pool_max,resid_min,resid_max")
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:.12},{:.12},{},{},{:.3e},{:.3e}",
                r.iteration, r.v_min, r.v_max, r.pool_min, r.pool_max, r.resid_min, r.resid_max
            )
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        Ok(())
    }

    /// Parse the CSV schema written by [`BoundsTrace::write_csv`].
    pub fn read_csv(path: &FsPath) -> Result<Self> {
        let file =
            std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let reader = std::io::BufReader::new(file);
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            if idx == 0 {
                if !line.starts_with("iter,") {
                    return Err(Error::Parse {
                        line: 1,
                        message: "missing trace header".into(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected 7 fields, got {}", fields.len()),
                });
            }
            let parse_f = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: format!("{e}"),
                })
            };
            let parse_u = |s: &str| -> Result<usize> {
                s.trim().parse().map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: format!("{e}"),
                })
            };
            records.push(IterationRecord {
                iteration: parse_u(fields[0])?,
                v_min: parse_f(fields[1])?,
                v_max: parse_f(fields[2])?,
                pool_min: parse_u(fields[3])?,
                pool_max: parse_u(fields[4])?,
                resid_min: parse_f(fields[5])?,
                resid_max: parse_f(fields[6])?,
                discarded_min: 0,
                discarded_max: 0,
            });
        }
        Ok(BoundsTrace {
            records,
            status: Status::MaxIterations,
            window: 0,
        })
    }

    /// Records as JSON lines followed by one status object.
    pub fn write_jsonl(&self, path: &FsPath) -> Result<()> {
        let mut out = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        for r in &self.records {
            let line = serde_json::to_string(r)?;
            writeln!(out, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        let tail = serde_json::json!({ "status": self.status, "window": self.window });
        writeln!(out, "{tail}").map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }
}

fn moving_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// One sense's live column pool.
#[derive(Debug, Clone)]
struct Pool {
    matrix: IndicatorMatrix,
    functional: FunctionalVector,
    pairs: Vec<PathPair>,
    warm: WarmStart,
}

impl Pool {
    fn from_pairs(
        pairs: Vec<PathPair>,
        spec: &FunctionalSpec,
        grid: &Grid,
    ) -> Result<Self> {
        let matrix = IndicatorMatrix::build(&pairs, grid)?;
        let functional = FunctionalVector::build(&pairs, spec, grid)?;
        let mut warm = WarmStart::default();
        warm.pad_to(pairs.len());
        Ok(Pool {
            matrix,
            functional,
            pairs,
            warm,
        })
    }

    fn empty(grid: &Grid) -> Self {
        Pool {
            matrix: IndicatorMatrix::empty(grid),
            functional: FunctionalVector::empty(),
            pairs: Vec::new(),
            warm: WarmStart::default(),
        }
    }

    fn append(
        &mut self,
        fresh: &[PathPair],
        spec: &FunctionalSpec,
        grid: &Grid,
    ) -> Result<()> {
        append_columns(&mut self.matrix, &mut self.functional, fresh, spec, grid)?;
        self.pairs.extend_from_slice(fresh);
        self.warm.pad_to(self.pairs.len());
        Ok(())
    }

    fn size(&self) -> usize {
        self.pairs.len()
    }

    fn discard(&mut self, weights: &[f64], threshold: f64) -> Result<usize> {
        let before = self.size();
        let (kept, _) =
            drop_zero_columns(&mut self.matrix, &mut self.functional, weights, threshold)?;
        if kept.len() != before {
            self.pairs = kept.iter().map(|&i| self.pairs[i].clone()).collect();
            self.warm.retain(&kept);
        }
        Ok(before - kept.len())
    }

    fn hashes(&self) -> impl Iterator<Item = u64> + '_ {
        self.pairs.iter().map(|p| p.quantized_hash())
    }
}

/// Serializable snapshot of a run: live pools, warm starts, the sampler
/// counter, and the recorded solution path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub next_sample_index: u64,
    pub min_pairs: Vec<PathPair>,
    pub max_pairs: Vec<PathPair>,
    pub min_warm: WarmStart,
    pub max_warm: WarmStart,
    pub records: Vec<IterationRecord>,
}

impl Checkpoint {
    pub fn save(&self, path: &FsPath) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let file =
            std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Drives one bounds run; owns the sampler and both pools so a run can be
/// checkpointed and resumed deterministically.
pub struct Runner<'a> {
    config: SolveConfig,
    cdf: &'a CdfField,
    grid: Grid,
    sampler: PathSampler,
    min_pool: Pool,
    max_pool: Pool,
    records: Vec<IterationRecord>,
    iteration: usize,
    /// Checkpoint sink: write a snapshot every `checkpoint_every`
    /// iterations when set.
    pub checkpoint_path: Option<std::path::PathBuf>,
    pub checkpoint_every: usize,
}

impl<'a> Runner<'a> {
    pub fn new(config: SolveConfig, cdf: &'a CdfField) -> Result<Self> {
        config.validate()?;
        let grid = cdf.grid().clone();
        let sampler = PathSampler::new(config.basis.clone(), grid.clone(), config.rng_seed);
        let mut runner = Runner {
            min_pool: Pool::empty(&grid),
            max_pool: Pool::empty(&grid),
            records: Vec::new(),
            iteration: 0,
            checkpoint_path: None,
            checkpoint_every: 200,
            sampler,
            config,
            cdf,
            grid,
        };
        let initial = runner.draw_batch(runner.config.l_init)?;
        runner.min_pool =
            Pool::from_pairs(initial.clone(), &runner.config.functional, &runner.grid)?;
        runner.max_pool = Pool::from_pairs(initial, &runner.config.functional, &runner.grid)?;
        Ok(runner)
    }

    /// Rebuild a run from a snapshot; matrices are reassembled from the
    /// stored pairs.
    pub fn from_checkpoint(
        config: SolveConfig,
        cdf: &'a CdfField,
        ckpt: Checkpoint,
    ) -> Result<Self> {
        config.validate()?;
        let grid = cdf.grid().clone();
        let mut sampler = PathSampler::new(config.basis.clone(), grid.clone(), config.rng_seed);
        sampler.set_next_index(ckpt.next_sample_index);
        let mut min_pool = Pool::from_pairs(ckpt.min_pairs, &config.functional, &grid)?;
        let mut max_pool = Pool::from_pairs(ckpt.max_pairs, &config.functional, &grid)?;
        min_pool.warm = ckpt.min_warm;
        max_pool.warm = ckpt.max_warm;
        min_pool.warm.pad_to(min_pool.size());
        max_pool.warm.pad_to(max_pool.size());
        Ok(Runner {
            config,
            cdf,
            grid,
            sampler,
            min_pool,
            max_pool,
            records: ckpt.records,
            iteration: ckpt.iteration,
            checkpoint_path: None,
            checkpoint_every: 200,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            iteration: self.iteration,
            next_sample_index: self.sampler.next_index(),
            min_pairs: self.min_pool.pairs.clone(),
            max_pairs: self.max_pool.pairs.clone(),
            min_warm: self.min_pool.warm.clone(),
            max_warm: self.max_pool.warm.clone(),
            records: self.records.clone(),
        }
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    /// Draw `count` pairs not colliding with the live pools, honoring the
    /// configured shape mixture and pairing mode.
    fn draw_batch(&mut self, count: usize) -> Result<Vec<PathPair>> {
        let mut live: HashSet<u64> = self
            .min_pool
            .hashes()
            .chain(self.max_pool.hashes())
            .collect();
        let shaped_goal = match (&self.config.filter, self.config.filter_mix) {
            (Some(_), mix) if mix > 0.0 => ((count as f64) * mix).round() as usize,
            _ => 0,
        };
        let mut batch: Vec<PathPair> = Vec::with_capacity(count);
        let mut attempts = 0usize;
        let cap = 200 * count.max(8);
        while batch.len() < count {
            let need = count - batch.len();
            let shaped_need = shaped_goal.saturating_sub(
                batch
                    .iter()
                    .filter(|p| {
                        self.config
                            .filter
                            .as_ref()
                            .map(|f| f.accepts(p))
                            .unwrap_or(false)
                    })
                    .count(),
            );
            let fresh = if shaped_need > 0 {
                let filter = self.config.filter.unwrap();
                self.sampler.sample_shaped_pairs(shaped_need.min(need), &filter)
            } else {
                self.sampler.sample_pairs(need, None)?
            };
            attempts += fresh.len();
            for pair in fresh {
                let h = pair.quantized_hash();
                if live.insert(h) {
                    batch.push(pair);
                }
            }
            if attempts > cap {
                return Err(Error::validation(format!(
                    "could not draw {count} unique pairs after {attempts} attempts"
                )));
            }
        }
        if self.config.pairing == PairingMode::CrossProduct {
            return cross_pairs(&batch);
        }
        Ok(batch)
    }

    fn solve_both(&self) -> Result<(crate::qp::QpSolution, crate::qp::QpSolution)> {
        let target = self.cdf.values();
        let min_problem = QpProblem {
            matrix: &self.min_pool.matrix,
            target,
            objective: self.min_pool.functional.values(),
            penalty: self.config.lambda,
            sense: Sense::Lower,
        };
        let max_problem = QpProblem {
            matrix: &self.max_pool.matrix,
            target,
            objective: self.max_pool.functional.values(),
            penalty: self.config.lambda,
            sense: Sense::Upper,
        };
        let params = self.config.qp;
        let (min_sol, max_sol) = rayon::join(
            || solve(&min_problem, &params, Some(&self.min_pool.warm)),
            || solve(&max_problem, &params, Some(&self.max_pool.warm)),
        );
        Ok((min_sol?, max_sol?))
    }

    fn converged(&self) -> bool {
        // the window covers the values strictly before the current record
        if self.records.len() < self.config.window + 1 {
            return false;
        }
        let end = self.records.len() - 1;
        let start = end - self.config.window;
        let mins: Vec<f64> = self.records[start..end].iter().map(|r| r.v_min).collect();
        let maxs: Vec<f64> = self.records[start..end].iter().map(|r| r.v_max).collect();
        moving_sd(&mins) <= self.config.delta && moving_sd(&maxs) <= self.config.delta
    }

    /// Run until convergence, the iteration cap, or filter starvation.
    pub fn run(&mut self) -> Result<BoundsTrace> {
        let mut status = Status::MaxIterations;
        while self.iteration < self.config.max_iterations {
            self.iteration += 1;
            let batch = match self.draw_batch(self.config.l_add) {
                Ok(batch) => batch,
                Err(Error::FilterInfeasible { .. }) => {
                    status = Status::InfeasibleFilter;
                    break;
                }
                Err(e) => return Err(e),
            };
            self.min_pool.append(&batch, &self.config.functional, &self.grid)?;
            self.max_pool.append(&batch, &self.config.functional, &self.grid)?;

            let (min_sol, max_sol) = self.solve_both()?;
            let pool_min = self.min_pool.size();
            let pool_max = self.max_pool.size();
            self.min_pool.warm = WarmStart::from_solution(&min_sol);
            self.max_pool.warm = WarmStart::from_solution(&max_sol);
            let discarded_min = self
                .min_pool
                .discard(&min_sol.weights, self.config.discard_threshold)?;
            let discarded_max = self
                .max_pool
                .discard(&max_sol.weights, self.config.discard_threshold)?;

            self.records.push(IterationRecord {
                iteration: self.iteration,
                v_min: min_sol.functional_value,
                v_max: max_sol.functional_value,
                pool_min,
                pool_max,
                resid_min: min_sol.primal_residual,
                resid_max: max_sol.primal_residual,
                discarded_min,
                discarded_max,
            });

            if let Some(path) = &self.checkpoint_path {
                if self.checkpoint_every > 0 && self.iteration % self.checkpoint_every == 0 {
                    self.checkpoint().save(path)?;
                }
            }

            if self.converged() {
                status = Status::Converged;
                break;
            }
        }
        Ok(BoundsTrace {
            records: self.records.clone(),
            status,
            window: self.config.window,
        })
    }
}

/// Run a fresh bounds loop against an estimated CDF field.
pub fn run(config: &SolveConfig, cdf: &CdfField) -> Result<BoundsTrace> {
    Runner::new(config.clone(), cdf)?.run()
}

/// Both programs solved over one column set: the minimized penalized
/// objectives and the functional read at each optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedValues {
    /// Optimal value of the minimized lower-bound program.
    pub lower_objective: f64,
    /// Optimal value of the minimized upper-bound program.
    pub upper_objective: f64,
    pub lower_functional: f64,
    pub upper_functional: f64,
}

/// Optima from one fixed sampled pool and its shape-filtered subset.
///
/// Dropping columns shrinks the feasible set, so each minimized program's
/// optimal value can only rise: `subset.lower_objective >=
/// full.lower_objective` and likewise for the upper program. That is the
/// testable fixed-pool form of "restrictions tighten bounds". The
/// functionals at the optimizers are reported alongside; they are what the
/// bounds loop plots, but they trade off against the fit term and carry no
/// one-sided guarantee on a poorly fitting subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedReport {
    pub pool_size: usize,
    pub subset_size: usize,
    pub full: NestedValues,
    pub subset: Option<NestedValues>,
}

/// Solve min/max over a fixed pool of `l_init` pairs, then over the subset
/// passing the configured filter. An empty subset is reported, not fatal.
pub fn nested_restriction_check(config: &SolveConfig, cdf: &CdfField) -> Result<NestedReport> {
    config.validate()?;
    let grid = cdf.grid().clone();
    let mut sampler = PathSampler::new(config.basis.clone(), grid.clone(), config.rng_seed);
    let mut pairs = sampler.sample_pairs(config.l_init, None)?;
    if let (Some(filter), true) = (&config.filter, config.filter_mix > 0.0) {
        let shaped = ((config.l_init as f64) * config.filter_mix).round() as usize;
        let extra = sampler.sample_shaped_pairs(shaped, filter);
        pairs.extend(extra);
    }

    let solve_pair = |subset: &[PathPair]| -> Result<NestedValues> {
        let matrix = IndicatorMatrix::build(subset, &grid)?;
        let functional = FunctionalVector::build(subset, &config.functional, &grid)?;
        let lower = solve(
            &QpProblem {
                matrix: &matrix,
                target: cdf.values(),
                objective: functional.values(),
                penalty: config.lambda,
                sense: Sense::Lower,
            },
            &config.qp,
            None,
        )?;
        let upper = solve(
            &QpProblem {
                matrix: &matrix,
                target: cdf.values(),
                objective: functional.values(),
                penalty: config.lambda,
                sense: Sense::Upper,
            },
            &config.qp,
            None,
        )?;
        Ok(NestedValues {
            lower_objective: lower.objective_value,
            upper_objective: upper.objective_value,
            lower_functional: lower.functional_value,
            upper_functional: upper.functional_value,
        })
    };

    let full = solve_pair(&pairs)?;
    let subset: Vec<PathPair> = match &config.filter {
        Some(filter) => pairs.iter().filter(|p| filter.accepts(p)).cloned().collect(),
        None => pairs.clone(),
    };
    let subset_values = if subset.is_empty() {
        None
    } else {
        Some(solve_pair(&subset)?)
    };
    Ok(NestedReport {
        pool_size: pairs.len(),
        subset_size: subset.len(),
        full,
        subset: subset_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::FunctionalKind;
    use crate::cdf::cdf_field;
    use crate::grid::Dataset;
    use crate::paths::CoefficientLaw;

    fn small_setup() -> (CdfField, SolveConfig) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let recs: Vec<[f64; 3]> = (0..80).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let data = Dataset::from_unit_records(recs).unwrap();
        let grid = Grid::dyadic(2).unwrap();
        let cdf = cdf_field(&data, &grid, 0.2).unwrap();
        let functional = FunctionalSpec::new(FunctionalKind::Level { x0: 0.5 }).unwrap();
        let basis = BasisSpec::new(1..=3, CoefficientLaw::uniform(0.35)).unwrap();
        let mut config = SolveConfig::new(5.0, functional, basis);
        config.l_init = 10;
        config.l_add = 5;
        config.window = 5;
        config.delta = 1e-3;
        config.max_iterations = 12;
        config.rng_seed = 21;
        (cdf, config)
    }

    #[test]
    fn single_iteration_cap_yields_one_record() {
        let (cdf, mut config) = small_setup();
        config.max_iterations = 1;
        let trace = run(&config, &cdf).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.status, Status::MaxIterations);
    }

    #[test]
    fn identical_seeds_give_bit_identical_traces() {
        let (cdf, config) = small_setup();
        let a = run(&config, &cdf).unwrap();
        let b = run(&config, &cdf).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn min_below_max_and_pool_growth_bounded() {
        let (cdf, config) = small_setup();
        let trace = run(&config, &cdf).unwrap();
        for r in &trace.records {
            assert!(r.v_min <= r.v_max + 1e-6, "iter {}", r.iteration);
            assert!(r.pool_min <= config.l_init + r.iteration * config.l_add);
            assert!(r.pool_max <= config.l_init + r.iteration * config.l_add);
        }
    }

    #[test]
    fn discard_then_resolve_is_stable() {
        // re-solving immediately after a discard (no fresh columns) must
        // reproduce the functional value
        let (cdf, config) = small_setup();
        let grid = cdf.grid().clone();
        let mut sampler = PathSampler::new(config.basis.clone(), grid.clone(), 77);
        let pairs = sampler.sample_pairs(30, None).unwrap();
        let mut matrix = IndicatorMatrix::build(&pairs, &grid).unwrap();
        let mut functional =
            FunctionalVector::build(&pairs, &config.functional, &grid).unwrap();
        let problem = QpProblem {
            matrix: &matrix,
            target: cdf.values(),
            objective: functional.values(),
            penalty: config.lambda,
            sense: Sense::Lower,
        };
        let sol = solve(&problem, &config.qp, None).unwrap();
        let before = sol.functional_value;
        let (kept, _) =
            drop_zero_columns(&mut matrix, &mut functional, &sol.weights, 1e-8).unwrap();
        assert!(!kept.is_empty());
        let again = solve(
            &QpProblem {
                matrix: &matrix,
                target: cdf.values(),
                objective: functional.values(),
                penalty: config.lambda,
                sense: Sense::Lower,
            },
            &config.qp,
            None,
        )
        .unwrap();
        assert!((again.functional_value - before).abs() < 1e-6);
    }

    #[test]
    fn checkpoint_resume_matches_uninterrupted_run() {
        let (cdf, config) = small_setup();
        let full = run(&config, &cdf).unwrap();

        let mut cfg_short = config.clone();
        cfg_short.max_iterations = 5;
        let mut short_runner = Runner::new(cfg_short, &cdf).unwrap();
        short_runner.run().unwrap();
        let ckpt = short_runner.checkpoint();

        // snapshot survives serialization
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();

        let mut resumed = Runner::from_checkpoint(config.clone(), &cdf, loaded).unwrap();
        let tail = resumed.run().unwrap();
        assert_eq!(full, tail);
    }

    #[test]
    fn trace_csv_round_trip() {
        let (cdf, mut config) = small_setup();
        config.max_iterations = 3;
        let trace = run(&config, &cdf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        trace.write_csv(&path).unwrap();
        let back = BoundsTrace::read_csv(&path).unwrap();
        assert_eq!(back.records.len(), trace.records.len());
        for (a, b) in trace.records.iter().zip(&back.records) {
            assert_eq!(a.iteration, b.iteration);
            assert!((a.v_min - b.v_min).abs() < 1e-9);
            assert!((a.v_max - b.v_max).abs() < 1e-9);
        }
        let jsonl = dir.path().join("trace.jsonl");
        trace.write_jsonl(&jsonl).unwrap();
        let text = std::fs::read_to_string(&jsonl).unwrap();
        assert_eq!(text.lines().count(), trace.records.len() + 1);
    }

    #[test]
    fn cross_product_mode_squares_each_batch() {
        let (cdf, mut config) = small_setup();
        config.pairing = PairingMode::CrossProduct;
        config.l_init = 4;
        config.l_add = 3;
        config.max_iterations = 2;
        config.discard_threshold = 0.0; // keep every column countable
        let trace = run(&config, &cdf).unwrap();
        // 16 initial columns plus 9 per iteration
        assert_eq!(trace.records[0].pool_min, 16 + 9);
        assert_eq!(trace.records[1].pool_min, 16 + 18);
    }

    #[test]
    fn nested_check_trivial_filter_keeps_values() {
        let (cdf, mut config) = small_setup();
        config.filter = None;
        let report = nested_restriction_check(&config, &cdf).unwrap();
        assert_eq!(report.pool_size, report.subset_size);
        assert_eq!(report.subset, Some(report.full));
    }

    #[test]
    fn nested_check_reports_empty_subset() {
        use crate::paths::Direction;
        let (cdf, mut config) = small_setup();
        // five summed levels make spontaneous joint monotonicity absurdly
        // unlikely, so the filtered subset is empty
        config.basis = BasisSpec::new(1..=5, CoefficientLaw::uniform(0.35)).unwrap();
        config.filter = Some(ShapeFilter::both(
            Direction::NonDecreasing,
            Direction::NonDecreasing,
        ));
        config.filter_mix = 0.0;
        let report = nested_restriction_check(&config, &cdf).unwrap();
        assert_eq!(report.subset_size, 0);
        assert_eq!(report.subset, None);
    }

    #[test]
    fn nested_check_program_values_never_improve() {
        use crate::paths::Direction;
        let (cdf, mut config) = small_setup();
        config.l_init = 16;
        config.filter = Some(ShapeFilter::both(
            Direction::NonIncreasing,
            Direction::NonDecreasing,
        ));
        config.filter_mix = 0.5;
        let report = nested_restriction_check(&config, &cdf).unwrap();
        let subset = report.subset.expect("shaped mixture keeps subset non-empty");
        assert!(subset.lower_objective >= report.full.lower_objective - 1e-6);
        assert!(subset.upper_objective >= report.full.upper_objective - 1e-6);
    }
}
