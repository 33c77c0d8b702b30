//! The run-configuration file: one TOML document describing the data
//! source, grid, CDF estimation, functional, basis, and solver knobs.
//!
//! Every section except `[functional]` has workable defaults. Command-line
//! flags (`--seed`, `--lambda`, `--grid-order`, `--out`) override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pathbounds::assembly::{FunctionalKind, FunctionalSpec};
use pathbounds::bounds::{PairingMode, SolveConfig};
use pathbounds::error::{Error, Result};
use pathbounds::grid::{ColumnMap, Grid};
use pathbounds::paths::{BasisSpec, ClipMode, CoefficientLaw, Direction, ShapeFilter};
use pathbounds::qp::AdmmParams;
use pathbounds::sim::{GpSpec, Pairing, SimSpec};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub cdf: CdfSection,
    pub functional: Option<FunctionalSection>,
    #[serde(default)]
    pub basis: BasisSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        toml::from_str(&text).map_err(|e| Error::validation(format!(
            "{}: {e}",
            path.display()
        )))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// CSV file with a header row.
    pub csv: Option<PathBuf>,
    /// Column names; default `y`, `x`, `z`.
    pub outcome: Option<String>,
    pub treatment: Option<String>,
    pub instrument: Option<String>,
    /// Synthetic source used when no CSV is given.
    pub simulate: Option<SimulateSection>,
}

impl DataSection {
    pub fn columns(&self) -> ColumnMap {
        let default = ColumnMap::default();
        ColumnMap {
            outcome: self.outcome.clone().unwrap_or(default.outcome),
            treatment: self.treatment.clone().unwrap_or(default.treatment),
            instrument: self.instrument.clone().unwrap_or(default.instrument),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "default_sim_paths")]
    pub n_paths: usize,
    #[serde(default = "default_sim_obs")]
    pub n_obs: usize,
    #[serde(default = "default_grid_order")]
    pub grid_order: u32,
    #[serde(default)]
    pub independent_pairing: bool,
    pub y_process: Option<ProcessSection>,
    pub x_process: Option<ProcessSection>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            n_paths: default_sim_paths(),
            n_obs: default_sim_obs(),
            grid_order: default_grid_order(),
            independent_pairing: false,
            y_process: None,
            x_process: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    pub mean: f64,
    pub sigma2: f64,
    pub length: f64,
}

fn default_sim_paths() -> usize {
    2500
}

fn default_sim_obs() -> usize {
    5000
}

fn default_grid_order() -> u32 {
    3
}

impl SimulateSection {
    pub fn to_spec(&self) -> Result<SimSpec> {
        let benchmark = SimSpec::benchmark();
        let proc = |s: &Option<ProcessSection>, fallback: GpSpec| -> Result<GpSpec> {
            match s {
                Some(p) => GpSpec::new(p.mean, p.sigma2, p.length),
                None => Ok(fallback),
            }
        };
        Ok(SimSpec {
            y_process: proc(&self.y_process, benchmark.y_process)?,
            x_process: proc(&self.x_process, benchmark.x_process)?,
            n_paths: self.n_paths,
            n_obs: self.n_obs,
            grid_order: self.grid_order,
            pairing: if self.independent_pairing {
                Pairing::Independent
            } else {
                Pairing::IndexMatched
            },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub order: u32,
    /// Custom ascending points overriding the dyadic grid.
    pub points: Option<Vec<f64>>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            order: default_grid_order(),
            points: None,
        }
    }
}

impl GridSection {
    pub fn build(&self, override_order: Option<u32>) -> Result<Grid> {
        match (&self.points, override_order) {
            (Some(points), None) => Grid::custom(points.clone()),
            _ => Grid::dyadic(override_order.unwrap_or(self.order)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdfSection {
    /// Fixed bandwidth; mutually exclusive with `candidates`.
    pub bandwidth: Option<f64>,
    /// Cross-validation candidates.
    pub candidates: Option<Vec<f64>>,
    /// Where the tabulated field is cached between runs.
    pub cache: Option<PathBuf>,
}

impl Default for CdfSection {
    fn default() -> Self {
        CdfSection {
            bandwidth: Some(0.1),
            candidates: None,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSection {
    pub kind: String,
    pub x0: Option<f64>,
    pub x1: Option<f64>,
    pub y_star: Option<f64>,
    /// Logistic steepness replacing the sharp indicator.
    pub logistic: Option<f64>,
}

impl FunctionalSection {
    pub fn to_spec(&self) -> Result<FunctionalSpec> {
        let need = |v: Option<f64>, name: &str| -> Result<f64> {
            v.ok_or_else(|| {
                Error::validation(format!("functional kind '{}' needs {name}", self.kind))
            })
        };
        let kind = match self.kind.as_str() {
            "level" => FunctionalKind::Level {
                x0: need(self.x0, "x0")?,
            },
            "ate" => FunctionalKind::Ate {
                x0: need(self.x0, "x0")?,
                x1: need(self.x1, "x1")?,
            },
            "cdf_diff" => FunctionalKind::CdfDiff {
                y_star: need(self.y_star, "y_star")?,
                x0: need(self.x0, "x0")?,
                x1: need(self.x1, "x1")?,
            },
            "cdf_level" => FunctionalKind::CdfLevel {
                y_star: need(self.y_star, "y_star")?,
                x0: need(self.x0, "x0")?,
            },
            "avg_derivative" => FunctionalKind::AvgDerivative,
            other => {
                return Err(Error::validation(format!(
                    "unknown functional kind '{other}'"
                )))
            }
        };
        let spec = FunctionalSpec::new(kind)?;
        match self.logistic {
            Some(eta) => spec.with_smoothing(eta),
            None => Ok(spec),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    pub levels: Vec<u32>,
    /// `uniform`, `monotone_up`, or `monotone_down`.
    pub law: String,
    pub scale: f64,
    pub clip: bool,
    /// `renormalize` or `truncate`.
    pub clip_mode: String,
}

impl Default for BasisSection {
    fn default() -> Self {
        BasisSection {
            levels: vec![1, 2, 3, 4, 5],
            law: "uniform".into(),
            scale: 0.35,
            clip: true,
            clip_mode: "renormalize".into(),
        }
    }
}

impl BasisSection {
    pub fn to_spec(&self) -> Result<BasisSpec> {
        let law = match self.law.as_str() {
            "uniform" => CoefficientLaw::uniform(self.scale),
            "monotone_up" => CoefficientLaw::monotone(Direction::NonDecreasing, self.scale),
            "monotone_down" => CoefficientLaw::monotone(Direction::NonIncreasing, self.scale),
            other => return Err(Error::validation(format!("unknown basis law '{other}'"))),
        };
        let mode = match self.clip_mode.as_str() {
            "renormalize" => ClipMode::Renormalize,
            "truncate" => ClipMode::Truncate,
            other => return Err(Error::validation(format!("unknown clip mode '{other}'"))),
        };
        Ok(BasisSpec::new(self.levels.iter().copied(), law)?
            .with_clip(self.clip)
            .with_clip_mode(mode))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub lambda: f64,
    pub l_init: usize,
    pub l_add: usize,
    pub window: usize,
    pub delta: f64,
    pub max_iterations: usize,
    pub discard_threshold: f64,
    pub filter_mix: f64,
    /// `none`, `up`, or `down`.
    pub y_monotone: String,
    pub x_monotone: String,
    /// `paired` or `cross_product`.
    pub pairing: String,
    pub seed: u64,
    pub rho: f64,
    pub over_relax: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub qp_max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let qp = AdmmParams::default();
        SolverSection {
            lambda: 5.0,
            l_init: 50,
            l_add: 10,
            window: 200,
            delta: 5e-3,
            max_iterations: 3000,
            discard_threshold: 1e-8,
            filter_mix: 0.0,
            y_monotone: "none".into(),
            x_monotone: "none".into(),
            pairing: "paired".into(),
            seed: 0,
            rho: qp.rho,
            over_relax: qp.over_relax,
            tol_primal: qp.tol_primal,
            tol_dual: qp.tol_dual,
            qp_max_iter: qp.max_iter,
        }
    }
}

fn parse_direction(s: &str, field: &str) -> Result<Option<Direction>> {
    match s {
        "none" => Ok(None),
        "up" => Ok(Some(Direction::NonDecreasing)),
        "down" => Ok(Some(Direction::NonIncreasing)),
        other => Err(Error::validation(format!(
            "{field} must be none/up/down, got '{other}'"
        ))),
    }
}

impl RunConfig {
    /// Assemble the solver configuration, applying flag overrides.
    pub fn solve_config(
        &self,
        seed_override: Option<u64>,
        lambda_override: Option<f64>,
    ) -> Result<SolveConfig> {
        let functional = self
            .functional
            .as_ref()
            .ok_or_else(|| Error::validation("missing [functional] section"))?
            .to_spec()?;
        let basis = self.basis.to_spec()?;
        let s = &self.solver;
        let filter = match (
            parse_direction(&s.y_monotone, "y_monotone")?,
            parse_direction(&s.x_monotone, "x_monotone")?,
        ) {
            (None, None) => None,
            (y, x) => Some(ShapeFilter { y, x }),
        };
        let pairing = match s.pairing.as_str() {
            "paired" => PairingMode::Paired,
            "cross_product" => PairingMode::CrossProduct,
            other => return Err(Error::validation(format!("unknown pairing '{other}'"))),
        };
        let mut config = SolveConfig::new(
            lambda_override.unwrap_or(s.lambda),
            functional,
            basis,
        );
        config.l_init = s.l_init;
        config.l_add = s.l_add;
        config.window = s.window;
        config.delta = s.delta;
        config.max_iterations = s.max_iterations;
        config.discard_threshold = s.discard_threshold;
        config.filter = filter;
        config.filter_mix = s.filter_mix;
        config.pairing = pairing;
        config.rng_seed = seed_override.unwrap_or(s.seed);
        config.qp = AdmmParams {
            rho: s.rho,
            over_relax: s.over_relax,
            tol_primal: s.tol_primal,
            tol_dual: s.tol_dual,
            max_iter: s.qp_max_iter,
            ..AdmmParams::default()
        };
        Ok(config)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub emit_plots: bool,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            emit_plots: false,
            checkpoint: None,
            checkpoint_every: 200,
        }
    }
}
