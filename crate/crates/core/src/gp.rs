//! Kronecker-structured spatiotemporal GP.
//!
//! Observations at `N_s` locations and `N_t` times are stored as an
//! `N_t × N_s` matrix `Y`; the stacked vector is `vec(Y)` (column-major, time
//! fastest), so the covariance is `Σ_s ⊗ Σ_t` and
//! `(Σ_s ⊗ Σ_t)⁻¹ vec(Y) = vec(Σ_t⁻¹ Y Σ_s⁻¹)`. Nothing of size
//! `N_s N_t × N_s N_t` is ever formed.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    check_indices, euclidean_spatial_kernel, matern32, select_rows, spatial_kernel, spectral_weights, temporal_kernel,
    weighted_gram, HyperParams, KernelKind,
};
use crate::mesh::{distance, Point3, SpectralBasis};
use crate::optim::{nelder_mead, NelderMeadConfig};

/// Relative jitter ladder tried when a Cholesky factorization fails.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Clamp threshold separating round-off from genuinely negative variance.
pub const VARIANCE_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone)]
pub struct TrainingSet {
    locations: Vec<usize>,
    times: Vec<f64>,
    observations: DMatrix<f64>,
}

impl TrainingSet {
    /// `observations` is `N_t × N_s`: column `i` is the series at `locations[i]`.
    pub fn new(locations: Vec<usize>, times: Vec<f64>, observations: DMatrix<f64>) -> Result<Self> {
        if locations.is_empty() || times.is_empty() {
            return Err(Error::InvalidArgument(
                "training set needs at least one location and one time".into(),
            ));
        }
        if observations.nrows() != times.len() || observations.ncols() != locations.len() {
            return Err(Error::DimensionMismatch(format!(
                "observations are {}x{}, expected {}x{} (times x locations)",
                observations.nrows(),
                observations.ncols(),
                times.len(),
                locations.len()
            )));
        }
        let mut sorted = locations.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate training location {}", w[0])));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "training times must be finite and strictly increasing".into(),
            ));
        }
        if observations.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidArgument("observations must be finite".into()));
        }
        Ok(TrainingSet {
            locations,
            times,
            observations,
        })
    }

    /// Gathers the columns `locations` of a full `N_t × N` field.
    pub fn from_field(field: &DMatrix<f64>, times: &[f64], locations: &[usize]) -> Result<Self> {
        check_indices(locations, field.ncols())?;
        let y = DMatrix::from_fn(field.nrows(), locations.len(), |t, i| field[(t, locations[i])]);
        TrainingSet::new(locations.to_vec(), times.to_vec(), y)
    }

    pub fn locations(&self) -> &[usize] {
        &self.locations
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn observations(&self) -> &DMatrix<f64> {
        &self.observations
    }

    pub fn num_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn num_times(&self) -> usize {
        self.times.len()
    }

    /// Reorders locations (and the matching columns).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let locs = order.iter().map(|&i| self.locations[i]).collect();
        let y = DMatrix::from_fn(self.num_times(), order.len(), |t, i| self.observations[(t, order[i])]);
        TrainingSet::new(locs, self.times.clone(), y)
    }
}

/// The spatial covariance family together with the geometry it needs.
#[derive(Debug, Clone)]
pub enum SpatialModel {
    Laplacian(Arc<SpectralBasis>),
    Euclidean(Arc<Vec<Point3>>),
}

impl SpatialModel {
    pub fn kind(&self) -> KernelKind {
        match self {
            SpatialModel::Laplacian(_) => KernelKind::Laplacian,
            SpatialModel::Euclidean(_) => KernelKind::Euclidean,
        }
    }

    pub fn num_vertices(&self) -> usize {
        match self {
            SpatialModel::Laplacian(b) => b.num_vertices(),
            SpatialModel::Euclidean(p) => p.len(),
        }
    }

    /// Number of eigenpairs for the Laplacian kernel, `None` otherwise.
    pub fn num_eigenpairs(&self) -> Option<usize> {
        match self {
            SpatialModel::Laplacian(b) => Some(b.len()),
            SpatialModel::Euclidean(_) => None,
        }
    }

    pub fn kernel(&self, theta: &HyperParams, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
        match self {
            SpatialModel::Laplacian(b) => spatial_kernel(b, theta, rows, cols),
            SpatialModel::Euclidean(p) => euclidean_spatial_kernel(p, theta, rows, cols),
        }
    }

    /// Prior variances `K_s(x, x)`.
    pub fn prior_variance(&self, theta: &HyperParams, rows: &[usize]) -> Result<Vec<f64>> {
        check_indices(rows, self.num_vertices())?;
        Ok(match self {
            SpatialModel::Laplacian(b) => {
                let w = spectral_weights(b.eigenvalues.as_slice(), theta);
                rows.iter()
                    .map(|&r| b.eigenvectors.row(r).iter().zip(&w).map(|(p, w)| w * p * p).sum())
                    .collect()
            }
            SpatialModel::Euclidean(_) => vec![theta.sigma_m; rows.len()],
        })
    }

    /// Length scale used to seed the optimizer: the half-wavelength of the
    /// first non-constant eigenmode, or the mean pairwise distance of `rows`.
    fn characteristic_length(&self, rows: &[usize]) -> f64 {
        match self {
            SpatialModel::Laplacian(b) => {
                let lam = b.eigenvalues.iter().copied().find(|&l| l > 1e-10).unwrap_or(1.0);
                PI / lam.sqrt()
            }
            SpatialModel::Euclidean(p) => {
                let mut sum = 0.0;
                let mut count = 0usize;
                for (a, &i) in rows.iter().enumerate() {
                    for &j in &rows[a + 1..] {
                        sum += distance(&p[i], &p[j]);
                        count += 1;
                    }
                }
                if count == 0 {
                    1.0
                } else {
                    sum / count as f64
                }
            }
        }
    }
}

/// Spatial Gram matrix on a fixed row set, re-evaluated cheaply per `θ`.
enum SpatialCache {
    Laplacian { phi: DMatrix<f64>, eigenvalues: Vec<f64> },
    Euclidean { dist: DMatrix<f64> },
}

impl SpatialCache {
    fn new(model: &SpatialModel, rows: &[usize]) -> Result<Self> {
        check_indices(rows, model.num_vertices())?;
        Ok(match model {
            SpatialModel::Laplacian(b) => SpatialCache::Laplacian {
                phi: select_rows(&b.eigenvectors, rows),
                eigenvalues: b.eigenvalues.iter().copied().collect(),
            },
            SpatialModel::Euclidean(p) => SpatialCache::Euclidean {
                dist: DMatrix::from_fn(rows.len(), rows.len(), |i, j| distance(&p[rows[i]], &p[rows[j]])),
            },
        })
    }

    fn gram(&self, theta: &HyperParams) -> DMatrix<f64> {
        match self {
            SpatialCache::Laplacian { phi, eigenvalues } => {
                let w = spectral_weights(eigenvalues, theta);
                weighted_gram(phi, &w, phi)
            }
            SpatialCache::Euclidean { dist } => dist.map(|r| matern32(r, theta.length_space, theta.sigma_m)),
        }
    }
}

/// Cholesky factor of a symmetric positive-definite matrix, with the jitter
/// (absolute) that had to be added to the diagonal.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl SpdFactor {
    pub fn new(matrix: DMatrix<f64>, theta: &HyperParams) -> Result<Self> {
        let n = matrix.nrows();
        let mean_diag = matrix.diagonal().mean().abs().max(f64::MIN_POSITIVE);
        for rel in JITTER_LADDER {
            let jitter = rel * mean_diag;
            let mut m = matrix.clone();
            if jitter > 0.0 {
                for i in 0..n {
                    m[(i, i)] += jitter;
                }
            }
            if let Some(chol) = Cholesky::new(m) {
                if chol.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                    return Ok(SpdFactor { chol, jitter });
                }
            }
        }
        Err(Error::Factorization { theta: *theta })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// The three NLL terms: data fit, complexity penalty and normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllTerms {
    pub data_fit: f64,
    pub complexity: f64,
    pub normalization: f64,
}

impl NllTerms {
    pub fn total(&self) -> f64 {
        self.data_fit + self.complexity + self.normalization
    }
}

struct Factored {
    spatial: SpdFactor,
    temporal: SpdFactor,
    /// `Σ_t⁻¹ Y Σ_s⁻¹`
    alpha: DMatrix<f64>,
    terms: NllTerms,
}

fn factor_and_score(
    theta: &HyperParams,
    data: &TrainingSet,
    scache: &SpatialCache,
    lags: &DMatrix<f64>,
) -> Result<Factored> {
    let mut sigma_s = scache.gram(theta);
    for i in 0..sigma_s.nrows() {
        sigma_s[(i, i)] += theta.nugget_space;
    }
    let mut sigma_t = lags.map(|r| matern32(r, theta.length_time, theta.sigma_a));
    for i in 0..sigma_t.nrows() {
        sigma_t[(i, i)] += theta.nugget_time;
    }
    let spatial = SpdFactor::new(sigma_s, theta)?;
    let temporal = SpdFactor::new(sigma_t, theta)?;

    let y = &data.observations;
    let z = temporal.solve(y);
    let alpha = spatial.solve(&z.transpose()).transpose();
    let (ns, nt) = (data.num_locations() as f64, data.num_times() as f64);
    let terms = NllTerms {
        data_fit: 0.5 * y.dot(&alpha),
        complexity: 0.5 * (nt * spatial.log_det() + ns * temporal.log_det()),
        normalization: 0.5 * ns * nt * (2.0 * PI).ln(),
    };
    if !terms.total().is_finite() {
        return Err(Error::Factorization { theta: *theta });
    }
    Ok(Factored {
        spatial,
        temporal,
        alpha,
        terms,
    })
}

fn lag_matrix(times: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(times.len(), times.len(), |i, j| (times[i] - times[j]).abs())
}

pub fn nll_terms(theta: &HyperParams, data: &TrainingSet, spatial: &SpatialModel) -> Result<NllTerms> {
    theta.validate()?;
    let scache = SpatialCache::new(spatial, &data.locations)?;
    Ok(factor_and_score(theta, data, &scache, &lag_matrix(&data.times))?.terms)
}

/// Negative log marginal likelihood of the training data under `θ`.
pub fn nll(theta: &HyperParams, data: &TrainingSet, spatial: &SpatialModel) -> Result<f64> {
    nll_terms(theta, data, spatial).map(|t| t.total())
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Caller-supplied start points, tried in addition to the grid starts.
    pub starts: Vec<HyperParams>,
    /// Heuristic centre plus seeded draws from the coarse log-grid.
    pub grid_starts: usize,
    pub seed: u64,
    pub optimizer: NelderMeadConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            starts: Vec::new(),
            grid_starts: 8,
            seed: 0,
            optimizer: NelderMeadConfig::default(),
        }
    }
}

impl FitConfig {
    /// A single local refinement from `theta`.
    pub fn warm_start(theta: HyperParams, optimizer: NelderMeadConfig) -> Self {
        FitConfig {
            starts: vec![theta],
            grid_starts: 0,
            seed: 0,
            optimizer,
        }
    }
}

// Free parameters in log space, σ_m pinned at 1.
fn to_free(theta: &HyperParams) -> [f64; 5] {
    let t = theta.with_unit_sigma_m();
    let floor = |v: f64| v.max(1e-300).ln();
    [
        t.length_space.ln(),
        floor(t.nugget_space),
        t.length_time.ln(),
        t.sigma_a.ln(),
        floor(t.nugget_time),
    ]
}

fn from_free(x: &[f64]) -> HyperParams {
    HyperParams {
        length_space: x[0].exp(),
        sigma_m: 1.0,
        nugget_space: x[1].exp(),
        length_time: x[2].exp(),
        sigma_a: x[3].exp(),
        nugget_time: x[4].exp(),
    }
}

const LOG_BOUND: f64 = 60.0;

fn grid_starts(data: &TrainingSet, spatial: &SpatialModel, count: usize, seed: u64) -> Result<Vec<HyperParams>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let y = &data.observations;
    let second_moment = (y.norm_squared() / y.len() as f64).max(1e-12);
    let span = data.times.last().unwrap() - data.times[0];
    let length_time0 = if span > 0.0 { 0.1 * span } else { 1.0 };
    let length_space0 = 0.3 * spatial.characteristic_length(&data.locations);

    let make = |m: [f64; 5]| -> Result<HyperParams> {
        let ls = length_space0 * m[0];
        let probe = HyperParams {
            length_space: ls,
            sigma_m: 1.0,
            nugget_space: 0.0,
            length_time: 1.0,
            sigma_a: 1.0,
            nugget_time: 0.0,
        };
        let prior = spatial.prior_variance(&probe, &data.locations)?;
        let s_bar = (prior.iter().sum::<f64>() / prior.len() as f64).max(1e-300);
        let sigma_a = second_moment / s_bar * m[3];
        Ok(HyperParams {
            length_space: ls,
            sigma_m: 1.0,
            nugget_space: 0.1 * s_bar * m[1],
            length_time: length_time0 * m[2],
            sigma_a,
            nugget_time: 0.1 * sigma_a * m[4],
        })
    };

    let levels = [0.1, 1.0, 10.0];
    let mut combos: Vec<[f64; 5]> = Vec::with_capacity(243);
    for a in levels {
        for b in levels {
            for c in levels {
                for d in levels {
                    for e in levels {
                        let m = [a, b, c, d, e];
                        if m != [1.0; 5] {
                            combos.push(m);
                        }
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![make([1.0; 5])?];
    for m in combos.choose_multiple(&mut rng, count - 1) {
        out.push(make(*m)?);
    }
    Ok(out)
}

/// Maximum-likelihood fit over the positive orthant, `σ_m` fixed at 1,
/// Nelder–Mead in log space from every start; the best result wins.
pub fn fit(data: &TrainingSet, spatial: &SpatialModel, config: &FitConfig) -> Result<FittedModel> {
    let scache = SpatialCache::new(spatial, &data.locations)?;
    let lags = lag_matrix(&data.times);
    let mut starts: Vec<HyperParams> = config.starts.iter().map(|t| t.with_unit_sigma_m()).collect();
    starts.extend(grid_starts(data, spatial, config.grid_starts, config.seed)?);
    if starts.is_empty() {
        return Err(Error::InvalidArgument("fit needs at least one start point".into()));
    }

    let objective = |x: &[f64]| -> f64 {
        if x.iter().any(|v| v.abs() > LOG_BOUND) {
            return f64::INFINITY;
        }
        factor_and_score(&from_free(x), data, &scache, &lags)
            .map(|f| f.terms.total())
            .unwrap_or(f64::INFINITY)
    };

    let mut best: Option<(f64, HyperParams)> = None;
    for start in &starts {
        let x0 = to_free(start);
        let m = nelder_mead(objective, &x0, &config.optimizer);
        if m.value.is_finite() && best.is_none_or(|(v, _)| m.value < v) {
            best = Some((m.value, from_free(&m.x)));
        }
    }
    let (_, theta) = best.ok_or(Error::Factorization { theta: starts[0] })?;
    FittedModel::build(theta, data.clone(), spatial.clone(), &scache, &lags)
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    theta: HyperParams,
    spatial: SpatialModel,
    data: TrainingSet,
    factor_s: SpdFactor,
    factor_t: SpdFactor,
    alpha: DMatrix<f64>,
    terms: NllTerms,
}

/// Posterior mean and standard deviation, both `|T*| × |X*|`.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub mean: DMatrix<f64>,
    pub std: DMatrix<f64>,
}

impl FittedModel {
    /// Conditions on `data` at fixed `θ` without optimizing.
    pub fn condition(theta: HyperParams, data: TrainingSet, spatial: SpatialModel) -> Result<Self> {
        theta.validate()?;
        let scache = SpatialCache::new(&spatial, &data.locations)?;
        let lags = lag_matrix(&data.times);
        FittedModel::build(theta, data, spatial, &scache, &lags)
    }

    fn build(
        theta: HyperParams,
        data: TrainingSet,
        spatial: SpatialModel,
        scache: &SpatialCache,
        lags: &DMatrix<f64>,
    ) -> Result<Self> {
        let f = factor_and_score(&theta, &data, scache, lags)?;
        Ok(FittedModel {
            theta,
            spatial,
            data,
            factor_s: f.spatial,
            factor_t: f.temporal,
            alpha: f.alpha,
            terms: f.terms,
        })
    }

    pub fn theta(&self) -> &HyperParams {
        &self.theta
    }

    pub fn spatial(&self) -> &SpatialModel {
        &self.spatial
    }

    pub fn kind(&self) -> KernelKind {
        self.spatial.kind()
    }

    pub fn data(&self) -> &TrainingSet {
        &self.data
    }

    pub fn nll(&self) -> f64 {
        self.terms.total()
    }

    pub fn nll_terms(&self) -> NllTerms {
        self.terms
    }

    pub fn spatial_factor(&self) -> &SpdFactor {
        &self.factor_s
    }

    pub fn temporal_factor(&self) -> &SpdFactor {
        &self.factor_t
    }

    /// `Σ_t⁻¹ Y Σ_s⁻¹`.
    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn posterior_mean(&self, vertices: &[usize], times: &[f64]) -> Result<DMatrix<f64>> {
        let ks = self.spatial.kernel(&self.theta, vertices, &self.data.locations)?;
        let kt = temporal_kernel(times, &self.data.times, &self.theta);
        Ok(kt * &self.alpha * ks.transpose())
    }

    /// Spatial part of the variance: `(K_s(x,x), k_*ᵀ Σ_s⁻¹ k_*)` per vertex.
    pub fn spatial_variance_terms(&self, vertices: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
        let prior = self.spatial.prior_variance(&self.theta, vertices)?;
        let ks = self.spatial.kernel(&self.theta, vertices, &self.data.locations)?;
        let solved = self.factor_s.solve(&ks.transpose());
        let explained = (0..vertices.len())
            .map(|i| ks.row(i).transpose().dot(&solved.column(i)))
            .collect();
        Ok((prior, explained))
    }

    /// Temporal part of the variance: `(K_t(t,t), k_*ᵀ Σ_t⁻¹ k_*)` per time.
    pub fn temporal_variance_terms(&self, times: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let kt = temporal_kernel(times, &self.data.times, &self.theta);
        let solved = self.factor_t.solve(&kt.transpose());
        let explained = (0..times.len())
            .map(|i| kt.row(i).transpose().dot(&solved.column(i)))
            .collect();
        (vec![self.theta.sigma_a; times.len()], explained)
    }

    pub fn posterior_variance(&self, vertices: &[usize], times: &[f64]) -> Result<DMatrix<f64>> {
        let (ps, qs) = self.spatial_variance_terms(vertices)?;
        let (pt, qt) = self.temporal_variance_terms(times);
        let mut var = DMatrix::zeros(times.len(), vertices.len());
        for i in 0..vertices.len() {
            for j in 0..times.len() {
                let v = ps[i] * pt[j] - qs[i] * qt[j];
                let scale = (ps[i] * pt[j]).abs().max(1.0);
                if v < VARIANCE_FLOOR * scale {
                    return Err(Error::Numerical(format!(
                        "negative posterior variance {v:e} at vertex {} time {}",
                        vertices[i], times[j]
                    )));
                }
                var[(j, i)] = v.max(0.0);
            }
        }
        Ok(var)
    }

    pub fn posterior_std(&self, vertices: &[usize], times: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.posterior_variance(vertices, times)?.map(f64::sqrt))
    }

    pub fn predict(&self, vertices: &[usize], times: &[f64]) -> Result<Prediction> {
        Ok(Prediction {
            mean: self.posterior_mean(vertices, times)?,
            std: self.posterior_std(vertices, times)?,
        })
    }

    /// Same `θ` and geometry, new observations.
    pub fn recondition(&self, data: TrainingSet) -> Result<Self> {
        FittedModel::condition(self.theta, data, self.spatial.clone())
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            theta: self.theta,
            kind: self.kind(),
            num_eigenpairs: self.spatial.num_eigenpairs(),
            num_locations: self.data.num_locations(),
            num_times: self.data.num_times(),
            nll: self.nll(),
            jitter_space: self.factor_s.jitter(),
            jitter_time: self.factor_t.jitter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub theta: HyperParams,
    pub kind: KernelKind,
    pub num_eigenpairs: Option<usize>,
    pub num_locations: usize,
    pub num_times: usize,
    pub nll: f64,
    pub jitter_space: f64,
    pub jitter_time: f64,
}
