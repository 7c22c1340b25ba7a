//! A loaded experiment: configuration plus the mesh and its Laplacian,
//! with helpers to build the spatial model, the stimuli and the ground truth.

use std::sync::Arc;

use stgp_core::gp::SpatialModel;
use stgp_core::kernels::KernelKind;
use stgp_core::mesh::{cotan_laplacian, geodesic_distances, spectral_basis, LaplaceOperator, SpectralBasis, TriMesh};
use stgp_core::simulate::{paced_protocol, simulate_aliev_panfilov, SimulationResult, StimulusProtocol};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::io::{hash_bytes, read_signals};

pub struct Experiment {
    pub config: ExperimentConfig,
    pub mesh: TriMesh,
    pub laplacian: LaplaceOperator,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let mesh = config.load_mesh()?;
        let laplacian = cotan_laplacian(&mesh)?;
        Ok(Experiment {
            config,
            mesh,
            laplacian,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn all_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).collect()
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn config_hash(&self) -> String {
        hash_bytes(serde_json::to_string(&self.config).expect("serializable").as_bytes())
    }

    pub fn basis(&self, num_eigenpairs: usize) -> Result<Arc<SpectralBasis>> {
        let n = self.num_vertices();
        if num_eigenpairs == 0 || num_eigenpairs > n {
            return Err(CliError::Config(format!(
                "eigenpairs must be in 1..={n} for this mesh, got {num_eigenpairs}"
            )));
        }
        Ok(Arc::new(spectral_basis(&self.laplacian, num_eigenpairs)?))
    }

    /// The spatial model for `kind`; `basis` is reused for the Laplacian
    /// kernel when given.
    pub fn spatial_model(&self, kind: KernelKind, basis: Option<Arc<SpectralBasis>>) -> Result<SpatialModel> {
        Ok(match kind {
            KernelKind::Laplacian => SpatialModel::Laplacian(match basis {
                Some(b) => b,
                None => self.basis(self.config.eigenpairs)?,
            }),
            KernelKind::Euclidean => SpatialModel::Euclidean(Arc::new(self.mesh.vertices().to_vec())),
        })
    }

    /// Vertices within geodesic distance `radius` of `center`.
    pub fn ball(&self, center: usize, radius: f64) -> Result<Vec<usize>> {
        let field = geodesic_distances(&self.mesh, center)?;
        Ok((0..self.num_vertices())
            .filter(|&i| field.distances[i] <= radius)
            .collect())
    }

    /// The vertex geodesically farthest from `source` (lowest index on ties).
    pub fn farthest_vertex(&self, source: usize) -> Result<usize> {
        let field = geodesic_distances(&self.mesh, source)?;
        let mut best = source;
        for (i, &d) in field.distances.iter().enumerate() {
            if d.is_finite() && d > field.distances[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn stimuli(&self) -> Result<Vec<StimulusProtocol>> {
        let sim = &self.config.simulation;
        let mut out = Vec::new();
        if let Some(p) = &sim.pacing {
            self.mesh.check_vertex(p.primary)?;
            let secondary = match p.secondary {
                Some(s) => s,
                None => self.farthest_vertex(p.primary)?,
            };
            self.mesh.check_vertex(secondary)?;
            out.extend(paced_protocol(
                &self.ball(p.primary, p.radius)?,
                &self.ball(secondary, p.radius)?,
                p.period,
                p.amplitude,
            ));
        }
        for spec in &sim.stimuli {
            let mut vertices = spec.vertices.clone();
            if let Some(c) = spec.center {
                vertices.extend(self.ball(c, spec.radius)?);
            }
            vertices.sort_unstable();
            vertices.dedup();
            out.push(StimulusProtocol {
                vertices,
                amplitude: spec.amplitude,
                start: spec.start,
                period: spec.period,
                duration: spec.duration,
            });
        }
        if out.is_empty() {
            return Err(CliError::Config(
                "simulation needs pacing or at least one stimulus".into(),
            ));
        }
        for s in &out {
            s.validate(self.num_vertices())
                .map_err(|e| CliError::Config(format!("stimulus: {e}")))?;
        }
        Ok(out)
    }

    pub fn simulate(&self) -> Result<SimulationResult> {
        let stimuli = self.stimuli()?;
        Ok(simulate_aliev_panfilov(
            &self.laplacian,
            &self.config.simulation.params,
            &stimuli,
        )?)
    }

    /// Ground truth: the configured signals file when present (it must
    /// cover every vertex in order), otherwise a fresh simulation.
    pub fn truth(&self) -> Result<SimulationResult> {
        let Some(path) = &self.config.signals else {
            return self.simulate();
        };
        let path = self.config.resolve(path);
        let s = read_signals(&path)?;
        if s.vertices != self.all_vertices() {
            return Err(CliError::Csv {
                path,
                msg: format!("ground truth must have columns v0..v{}", self.num_vertices() - 1),
            });
        }
        Ok(SimulationResult {
            u: s.values,
            times: s.times,
        })
    }
}
