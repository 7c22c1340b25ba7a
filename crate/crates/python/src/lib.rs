//! Python bindings. Matrices cross the boundary as lists of rows; fields
//! are `times × vertices`, matching the CSV layout of the command-line tool.

use std::sync::Arc;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use stgp_core::active::{self, ALConfig, Strategy};
use stgp_core::gp::{self, FitConfig, FittedModel, SpatialModel, TrainingSet};
use stgp_core::kernels::KernelKind;
use stgp_core::mesh::{self as core_mesh, shapes, LaplaceOperator, SpectralBasis, TriMesh};
use stgp_core::simulate::{self, APParams, SimulationResult, StimulusProtocol};
use stgp_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Factorization { .. } | Error::Numerical(_) | Error::Unstable { .. } | Error::OutOfRange { .. } => {
            PyArithmeticError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

type Rows = Vec<Vec<f64>>;

fn to_rows(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// A triangle mesh with its cotangent Laplacian.
#[pyclass(module = "stgp", frozen)]
struct Mesh {
    mesh: TriMesh,
    laplacian: LaplaceOperator,
}

impl Mesh {
    fn wrap(mesh: TriMesh) -> PyResult<Self> {
        let laplacian = core_mesh::cotan_laplacian(&mesh).map_err(py_err)?;
        Ok(Mesh { mesh, laplacian })
    }

    fn basis(&self, eigenpairs: usize) -> PyResult<Arc<SpectralBasis>> {
        Ok(Arc::new(
            core_mesh::spectral_basis(&self.laplacian, eigenpairs).map_err(py_err)?,
        ))
    }
}

#[pymethods]
impl Mesh {
    #[new]
    fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> PyResult<Self> {
        Self::wrap(TriMesh::new(vertices, faces).map_err(py_err)?)
    }

    /// `desk_band`, `tetrahedron`, `icosphere`, `horseshoe` or `square`.
    #[staticmethod]
    #[pyo3(signature = (name, size=3))]
    fn builtin(name: &str, size: usize) -> PyResult<Self> {
        let mesh = match name {
            "desk_band" => shapes::desk_band(),
            "tetrahedron" => shapes::tetrahedron(),
            "icosphere" => shapes::icosphere(size.min(5)),
            "horseshoe" => shapes::horseshoe(size.min(5)),
            "square" => shapes::unit_square_grid(size.max(1)),
            _ => return Err(PyValueError::new_err(format!("unknown builtin mesh {name:?}"))),
        };
        Self::wrap(mesh)
    }

    #[staticmethod]
    fn from_off(path: &str) -> PyResult<Self> {
        Self::wrap(core_mesh::load_mesh(path).map_err(py_err)?)
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.mesh.num_vertices()
    }

    #[getter]
    fn num_faces(&self) -> usize {
        self.mesh.num_faces()
    }

    fn total_area(&self) -> f64 {
        self.mesh.total_area()
    }

    fn vertices(&self) -> Vec<[f64; 3]> {
        self.mesh.vertices().to_vec()
    }

    fn geodesic_distances(&self, source: usize) -> PyResult<Vec<f64>> {
        Ok(core_mesh::geodesic_distances(&self.mesh, source)
            .map_err(py_err)?
            .distances)
    }

    /// `(eigenvalues, eigenvectors)`, the latter one row per vertex.
    fn eigenpairs(&self, count: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let b = self.basis(count)?;
        Ok((b.eigenvalues.iter().copied().collect(), to_rows(&b.eigenvectors)))
    }

    /// Vertices within geodesic distance `radius` of `center`.
    fn ball(&self, center: usize, radius: f64) -> PyResult<Vec<usize>> {
        let d = self.geodesic_distances(center)?;
        Ok((0..d.len()).filter(|&i| d[i] <= radius).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(num_vertices={}, num_faces={})",
            self.mesh.num_vertices(),
            self.mesh.num_faces()
        )
    }
}

/// An external current on a set of vertices.
#[pyclass(module = "stgp", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct Stimulus {
    vertices: Vec<usize>,
    amplitude: f64,
    start: f64,
    period: f64,
    duration: f64,
}

#[pymethods]
impl Stimulus {
    #[new]
    #[pyo3(signature = (vertices, amplitude, start=0.0, period=0.0, duration=1.0))]
    fn new(vertices: Vec<usize>, amplitude: f64, start: f64, period: f64, duration: f64) -> Self {
        Stimulus {
            vertices,
            amplitude,
            start,
            period,
            duration,
        }
    }
}

impl From<&Stimulus> for StimulusProtocol {
    fn from(s: &Stimulus) -> Self {
        StimulusProtocol {
            vertices: s.vertices.clone(),
            amplitude: s.amplitude,
            start: s.start,
            period: s.period,
            duration: s.duration,
        }
    }
}

/// Explicit Aliev-Panfilov integration; returns `(times, u)` with `u`
/// one row per recorded time.
#[pyfunction]
#[pyo3(signature = (mesh, stimuli, diffusion=None, dt=None, steps=None, record_every=None))]
fn simulate_aliev_panfilov(
    mesh: &Mesh,
    stimuli: Vec<Stimulus>,
    diffusion: Option<f64>,
    dt: Option<f64>,
    steps: Option<usize>,
    record_every: Option<usize>,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let d = APParams::default();
    let params = APParams {
        diffusion: diffusion.unwrap_or(d.diffusion),
        dt: dt.unwrap_or(d.dt),
        steps: steps.unwrap_or(d.steps),
        record_every: record_every.unwrap_or(d.record_every),
        ..d
    };
    let stimuli: Vec<StimulusProtocol> = stimuli.iter().map(Into::into).collect();
    let r = simulate::simulate_aliev_panfilov(&mesh.laplacian, &params, &stimuli).map_err(py_err)?;
    Ok((r.times, to_rows(&r.u)))
}

#[pyfunction]
fn add_noise(field: Vec<Vec<f64>>, sigma: f64, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let m = simulate::add_noise(&to_matrix(&field)?, sigma, seed).map_err(py_err)?;
    Ok(to_rows(&m))
}

#[pyfunction]
fn relative_error(predicted: Vec<Vec<f64>>, reference: Vec<Vec<f64>>) -> PyResult<f64> {
    stgp_core::metrics::relative_error(&to_matrix(&predicted)?, &to_matrix(&reference)?).map_err(py_err)
}

fn spatial_model(mesh: &Mesh, kernel: &str, eigenpairs: usize) -> PyResult<SpatialModel> {
    let kind: KernelKind = kernel.parse().map_err(py_err)?;
    Ok(match kind {
        KernelKind::Laplacian => SpatialModel::Laplacian(mesh.basis(eigenpairs)?),
        KernelKind::Euclidean => SpatialModel::Euclidean(Arc::new(mesh.mesh.vertices().to_vec())),
    })
}

/// A fitted spatiotemporal GP.
#[pyclass(module = "stgp", frozen)]
struct GP {
    model: FittedModel,
}

#[pymethods]
impl GP {
    /// Maximum-likelihood fit on `observations` (`times × locations`).
    #[staticmethod]
    #[pyo3(signature = (mesh, observations, times, locations, kernel="laplacian", eigenpairs=256, seed=0))]
    fn fit(
        mesh: &Mesh,
        observations: Vec<Vec<f64>>,
        times: Vec<f64>,
        locations: Vec<usize>,
        kernel: &str,
        eigenpairs: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let spatial = spatial_model(mesh, kernel, eigenpairs)?;
        let data = TrainingSet::new(locations, times, to_matrix(&observations)?).map_err(py_err)?;
        let config = FitConfig {
            seed,
            ..FitConfig::default()
        };
        Ok(GP {
            model: gp::fit(&data, &spatial, &config).map_err(py_err)?,
        })
    }

    /// Posterior `(mean, std)`, each `times × vertices`.
    fn predict(&self, vertices: Vec<usize>, times: Vec<f64>) -> PyResult<(Rows, Rows)> {
        let p = self.model.predict(&vertices, &times).map_err(py_err)?;
        Ok((to_rows(&p.mean), to_rows(&p.std)))
    }

    #[getter]
    fn nll(&self) -> f64 {
        self.model.nll()
    }

    #[getter]
    fn kernel(&self) -> String {
        self.model.kind().to_string()
    }

    #[getter]
    fn theta<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let t = self.model.theta();
        let d = PyDict::new(py);
        d.set_item("length_space", t.length_space)?;
        d.set_item("sigma_m", t.sigma_m)?;
        d.set_item("nugget_space", t.nugget_space)?;
        d.set_item("length_time", t.length_time)?;
        d.set_item("sigma_a", t.sigma_a)?;
        d.set_item("nugget_time", t.nugget_time)?;
        Ok(d)
    }

    /// Leave-one-location-out `(tau2, residuals)`.
    fn loo(&self) -> PyResult<(f64, Vec<Vec<f64>>)> {
        let l = active::loo_cv_error(&self.model).map_err(py_err)?;
        Ok((l.tau2, to_rows(&l.residuals)))
    }
}

/// Runs the active-learning protocol against a known field and returns the
/// history as a dict.
#[pyfunction]
#[pyo3(signature = (mesh, truth, times, strategy="a-al", noise=0.01, rounds=30, batch_size=3,
                    initial_count=50, seed=0, kernel="laplacian", eigenpairs=256))]
#[allow(clippy::too_many_arguments)]
fn active_learning<'py>(
    py: Python<'py>,
    mesh: &Mesh,
    truth: Vec<Vec<f64>>,
    times: Vec<f64>,
    strategy: &str,
    noise: f64,
    rounds: usize,
    batch_size: usize,
    initial_count: usize,
    seed: u64,
    kernel: &str,
    eigenpairs: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let strategy: Strategy = strategy.parse().map_err(py_err)?;
    let truth = SimulationResult {
        u: to_matrix(&truth)?,
        times,
    };
    let spatial = spatial_model(mesh, kernel, eigenpairs)?;
    let config = ALConfig {
        strategy,
        batch_size,
        rounds,
        initial_count,
        seed,
        refit_each_round: true,
    };
    let fit = FitConfig {
        seed,
        ..FitConfig::default()
    };
    let h = active::run_active_learning(&truth, noise, &mesh.mesh, &spatial, &config, &fit).map_err(py_err)?;

    let out = PyDict::new(py);
    out.set_item("strategy", h.strategy.to_string())?;
    out.set_item("initial", h.initial.clone())?;
    out.set_item("initial_re", h.initial_re)?;
    out.set_item("final_re", h.final_re())?;
    let mut records = Vec::with_capacity(h.rounds.len());
    for r in &h.rounds {
        let d = PyDict::new(py);
        d.set_item("round", r.round)?;
        d.set_item("n_plus", r.n_plus)?;
        d.set_item("re", r.re)?;
        d.set_item("tau2", r.tau2)?;
        d.set_item("sigma2_eps_s", r.sigma2_eps_s)?;
        d.set_item("weights", r.weights.map(|w| (w.alpha1, w.alpha2)))?;
        d.set_item("picked", r.picked.clone())?;
        records.push(d);
    }
    out.set_item("rounds", records)?;
    Ok(out)
}

#[pymodule]
fn stgp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Mesh>()?;
    m.add_class::<Stimulus>()?;
    m.add_class::<GP>()?;
    m.add_function(wrap_pyfunction!(simulate_aliev_panfilov, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(active_learning, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
