//! Experiment configuration: one JSON file per experiment, with relative
//! paths resolved against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stgp_core::active::{ALConfig, Strategy};
use stgp_core::gp::FitConfig;
use stgp_core::kernels::KernelKind;
use stgp_core::mesh::{load_mesh, shapes, TriMesh};
use stgp_core::optim::NelderMeadConfig;
use stgp_core::simulate::APParams;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// OFF file path, or `builtin:<name>[:<arg>]`.
    pub mesh: String,
    pub eigenpairs: usize,
    pub kernel: KernelKind,
    /// Root seed: training design, noise and random selections derive from it.
    pub seed: u64,
    pub training: TrainingConfig,
    /// Noise level `σ_ξ`.
    pub noise: f64,
    pub simulation: SimulationConfig,
    /// Ground-truth signals CSV to use instead of simulating.
    pub signals: Option<String>,
    pub fit: FitSettings,
    pub active_learning: ActiveConfig,
    pub benchmark: BenchmarkConfig,
    pub output: String,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mesh: "builtin:desk_band".into(),
            eigenpairs: 256,
            kernel: KernelKind::Laplacian,
            seed: 0,
            training: TrainingConfig::default(),
            noise: 0.01,
            simulation: SimulationConfig::default(),
            signals: None,
            fit: FitSettings::default(),
            active_learning: ActiveConfig::default(),
            benchmark: BenchmarkConfig::default(),
            output: "out".into(),
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Number of training locations; 0 means every vertex.
    pub count: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig { count: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub params: APParams,
    /// Two-source pacing; combined with any explicit `stimuli`.
    pub pacing: Option<Pacing>,
    pub stimuli: Vec<StimulusSpec>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            params: APParams::default(),
            pacing: Some(Pacing::default()),
            stimuli: Vec::new(),
        }
    }
}

/// A regular source at `primary` with period `period` and a faster one at
/// `secondary` (default: the vertex geodesically farthest from `primary`)
/// with period `0.6 · period`. Each fires on the geodesic ball of `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pacing {
    pub primary: usize,
    pub secondary: Option<usize>,
    pub radius: f64,
    pub period: f64,
    pub amplitude: f64,
}

impl Default for Pacing {
    fn default() -> Self {
        Pacing {
            primary: 0,
            secondary: None,
            radius: 0.6,
            period: 60.0,
            amplitude: 0.3,
        }
    }
}

/// A stimulus on explicit `vertices`, or on the geodesic ball of `radius`
/// around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSpec {
    #[serde(default)]
    pub vertices: Vec<usize>,
    #[serde(default)]
    pub center: Option<usize>,
    #[serde(default)]
    pub radius: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub period: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub grid_starts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub initial_step: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        let nm = NelderMeadConfig::default();
        FitSettings {
            grid_starts: FitConfig::default().grid_starts,
            max_iter: nm.max_iter,
            rel_tol: nm.rel_tol,
            initial_step: nm.initial_step,
        }
    }
}

impl FitSettings {
    pub fn to_fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            starts: Vec::new(),
            grid_starts: self.grid_starts,
            seed,
            optimizer: NelderMeadConfig {
                max_iter: self.max_iter,
                rel_tol: self.rel_tol,
                initial_step: self.initial_step,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveConfig {
    pub strategy: Strategy,
    /// Run each of these instead of `strategy` and write a comparison.
    pub strategies: Vec<Strategy>,
    pub batch_size: usize,
    pub rounds: usize,
    pub initial_count: usize,
    pub refit_each_round: bool,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        let al = ALConfig::default();
        ActiveConfig {
            strategy: al.strategy,
            strategies: Vec::new(),
            batch_size: al.batch_size,
            rounds: al.rounds,
            initial_count: al.initial_count,
            refit_each_round: al.refit_each_round,
        }
    }
}

impl ActiveConfig {
    pub fn strategies(&self) -> Vec<Strategy> {
        if self.strategies.is_empty() {
            vec![self.strategy]
        } else {
            self.strategies.clone()
        }
    }

    pub fn to_al_config(&self, strategy: Strategy, seed: u64) -> ALConfig {
        ALConfig {
            strategy,
            batch_size: self.batch_size,
            rounds: self.rounds,
            initial_count: self.initial_count,
            seed,
            refit_each_round: self.refit_each_round,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Eigenpair counts; values above the vertex count are dropped.
    pub eigen_sweep: Vec<usize>,
    pub sweep_training: usize,
    pub sweep_noise: f64,
    pub sweep_replications: usize,
    pub sizes: Vec<usize>,
    pub noises: Vec<f64>,
    pub kernels: Vec<KernelKind>,
    pub replications: usize,
    pub al_strategies: Vec<Strategy>,
    pub al_seeds: usize,
    pub al_noise: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            eigen_sweep: vec![32, 64, 128, 256, 512],
            sweep_training: 100,
            sweep_noise: 0.01,
            sweep_replications: 3,
            sizes: vec![50, 100],
            noises: vec![0.01, 0.05, 0.1],
            kernels: vec![KernelKind::Laplacian, KernelKind::Euclidean],
            replications: 5,
            al_strategies: Strategy::ALL.to_vec(),
            al_seeds: 3,
            al_noise: 0.01,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    pub fn load_mesh(&self) -> Result<TriMesh> {
        match self.mesh.strip_prefix("builtin:") {
            Some(spec) => builtin_mesh(spec),
            None => {
                let path = self.resolve(&self.mesh);
                if !path.exists() {
                    return Err(CliError::Config(format!("mesh file {} not found", path.display())));
                }
                Ok(load_mesh(&path)?)
            }
        }
    }

    pub fn fit_config(&self, seed: u64) -> FitConfig {
        self.fit.to_fit_config(seed)
    }
}

/// `desk_band`, `tetrahedron`, `icosphere:<subdivisions>`,
/// `square:<cells>`, `horseshoe:<subdivisions>`.
pub fn builtin_mesh(spec: &str) -> Result<TriMesh> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let number = |default: usize, max: usize| -> Result<usize> {
        let n = match arg {
            None => default,
            Some(a) => a
                .parse()
                .map_err(|_| CliError::Config(format!("bad builtin mesh argument {a:?}")))?,
        };
        if n > max {
            return Err(CliError::Config(format!("builtin mesh argument {n} exceeds {max}")));
        }
        Ok(n)
    };
    Ok(match name {
        "desk_band" => shapes::desk_band(),
        "tetrahedron" => shapes::tetrahedron(),
        "icosphere" => shapes::icosphere(number(3, 5)?),
        "horseshoe" => shapes::horseshoe(number(3, 5)?),
        "square" => shapes::unit_square_grid(number(40, 200)?.max(1)),
        _ => return Err(CliError::Config(format!("unknown builtin mesh {spec:?}"))),
    })
}
