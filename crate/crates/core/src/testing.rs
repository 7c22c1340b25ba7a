//! Dense reference implementations used as test oracles.
//!
//! Everything here builds the full `N_s N_t × N_s N_t` covariance explicitly
//! and uses LU inverses and determinants, so it shares no code path with the
//! Kronecker/Cholesky implementation it checks. Only compiled for tests or
//! with the `oracles` feature.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::gp::{SpatialModel, TrainingSet};
use crate::kernels::{temporal_kernel, HyperParams};
use crate::mesh::{cotan_laplacian, shapes, spectral_basis};

pub struct Instance {
    pub theta: HyperParams,
    pub data: TrainingSet,
    pub model: SpatialModel,
    pub query_vertices: Vec<usize>,
    pub query_times: Vec<f64>,
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

pub fn random_theta<R: Rng>(rng: &mut R) -> HyperParams {
    HyperParams {
        length_space: log_uniform(rng, 0.2, 2.0),
        sigma_m: log_uniform(rng, 0.3, 3.0),
        nugget_space: log_uniform(rng, 1e-3, 0.5),
        length_time: log_uniform(rng, 0.3, 3.0),
        sigma_a: log_uniform(rng, 0.3, 3.0),
        nugget_time: log_uniform(rng, 1e-3, 0.5),
    }
}

/// Random small problem on a 42-vertex icosphere, alternating kernel kinds.
pub fn random_instance<R: Rng>(rng: &mut R, ns: usize, nt: usize) -> Instance {
    let mesh = shapes::icosphere(1);
    let model = if rng.gen_bool(0.5) {
        let lap = cotan_laplacian(&mesh).expect("valid mesh");
        SpatialModel::Laplacian(Arc::new(spectral_basis(&lap, 24).expect("J <= N")))
    } else {
        SpatialModel::Euclidean(Arc::new(mesh.vertices().to_vec()))
    };
    let n = mesh.num_vertices();
    let locations = rand::seq::index::sample(rng, n, ns).into_vec();
    let mut t = rng.gen_range(-1.0..1.0);
    let times: Vec<f64> = (0..nt)
        .map(|_| {
            t += rng.gen_range(0.1..1.0);
            t
        })
        .collect();
    let y = DMatrix::from_fn(nt, ns, |_, _| rng.gen_range(-2.0..2.0));
    let data = TrainingSet::new(locations, times, y).expect("valid instance");
    let query_vertices = rand::seq::index::sample(rng, n, 3).into_vec();
    let query_times = vec![rng.gen_range(-1.0..3.0), rng.gen_range(-1.0..3.0)];
    Instance {
        theta: random_theta(rng),
        data,
        model,
        query_vertices,
        query_times,
    }
}

/// Draw from the Kronecker prior, `Y = L_t Z L_sᵀ`.
pub fn sample_from_prior<R: Rng>(
    rng: &mut R,
    model: &SpatialModel,
    theta: &HyperParams,
    ns: usize,
    nt: usize,
) -> TrainingSet {
    let locations = rand::seq::index::sample(rng, model.num_vertices(), ns).into_vec();
    let times: Vec<f64> = (0..nt).map(|t| t as f64 * 0.5).collect();
    let (ss, st) = dense_factors(theta, model, &locations, &times);
    let ls = ss.cholesky().expect("spd").l();
    let lt = st.cholesky().expect("spd").l();
    let z = DMatrix::from_fn(nt, ns, |_, _| rng.sample::<f64, _>(StandardNormal));
    TrainingSet::new(locations, times, lt * z * ls.transpose()).expect("valid sample")
}

/// `(Σ_s, Σ_t)` with nuggets on the diagonals.
pub fn dense_factors(
    theta: &HyperParams,
    model: &SpatialModel,
    locations: &[usize],
    times: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut ss = model.kernel(theta, locations, locations).expect("indices");
    for i in 0..ss.nrows() {
        ss[(i, i)] += theta.nugget_space;
    }
    let mut st = temporal_kernel(times, times, theta);
    for i in 0..st.nrows() {
        st[(i, i)] += theta.nugget_time;
    }
    (ss, st)
}

pub fn dense_covariance(theta: &HyperParams, data: &TrainingSet, model: &SpatialModel) -> DMatrix<f64> {
    let (ss, st) = dense_factors(theta, model, data.locations(), data.times());
    ss.kronecker(&st)
}

fn vec_of(y: &DMatrix<f64>) -> DVector<f64> {
    // nalgebra storage is column-major: time index runs fastest
    DVector::from_column_slice(y.as_slice())
}

pub fn dense_nll(theta: &HyperParams, data: &TrainingSet, model: &SpatialModel) -> f64 {
    let sigma = dense_covariance(theta, data, model);
    let y = vec_of(data.observations());
    let n = y.len() as f64;
    let det = sigma.clone().lu().determinant();
    let inv = sigma.try_inverse().expect("invertible");
    0.5 * y.dot(&(inv * &y)) + 0.5 * det.ln() + 0.5 * n * (2.0 * PI).ln()
}

/// Dense posterior mean and variance, each `|T*| × |X*|`.
pub fn dense_posterior(
    theta: &HyperParams,
    data: &TrainingSet,
    model: &SpatialModel,
    vertices: &[usize],
    times: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let sigma = dense_covariance(theta, data, model);
    let inv = sigma.try_inverse().expect("invertible");
    let ks = model.kernel(theta, vertices, data.locations()).unwrap();
    let kt = temporal_kernel(times, data.times(), theta);
    let kstar = ks.kronecker(&kt);
    let kss = model.kernel(theta, vertices, vertices).unwrap();
    let ktt = temporal_kernel(times, times, theta);
    let kstarstar = kss.kronecker(&ktt);
    let y = vec_of(data.observations());
    let mean = &kstar * &inv * y;
    let cov = kstarstar - &kstar * &inv * kstar.transpose();
    let (nq, nt) = (vertices.len(), times.len());
    let mean = DMatrix::from_column_slice(nt, nq, mean.as_slice());
    let var = DMatrix::from_fn(nt, nq, |j, i| cov[(i * nt + j, i * nt + j)]);
    (mean, var)
}

/// LOO residuals from the block formula on the explicit dense inverse:
/// residual block `i = [(Σ⁻¹)_{ii}]⁻¹ (Σ⁻¹ y)_i`.
pub fn dense_block_loo(theta: &HyperParams, data: &TrainingSet, model: &SpatialModel) -> DMatrix<f64> {
    let sigma = dense_covariance(theta, data, model);
    let inv = sigma.try_inverse().expect("invertible");
    let y = vec_of(data.observations());
    let iy = &inv * y;
    let (n, nt) = (data.num_locations(), data.num_times());
    let mut res = DMatrix::zeros(nt, n);
    for i in 0..n {
        let block = inv.view((i * nt, i * nt), (nt, nt)).into_owned();
        let rhs = iy.rows(i * nt, nt).into_owned();
        let r = block.try_inverse().expect("invertible block") * rhs;
        res.set_column(i, &r);
    }
    res
}

/// LOO residuals by refitting with each location removed and conditioning
/// the held-out block on the rest with the dense covariance.
pub fn naive_loo(theta: &HyperParams, data: &TrainingSet, model: &SpatialModel) -> DMatrix<f64> {
    let (n, nt) = (data.num_locations(), data.num_times());
    let mut res = DMatrix::zeros(nt, n);
    for i in 0..n {
        let rest: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        let locs: Vec<usize> = rest.iter().map(|&k| data.locations()[k]).collect();
        let y_rest = DMatrix::from_fn(nt, rest.len(), |t, c| data.observations()[(t, rest[c])]);
        let reduced = TrainingSet::new(locs.clone(), data.times().to_vec(), y_rest.clone()).unwrap();
        let inv = dense_covariance(theta, &reduced, model).try_inverse().unwrap();
        // cross-covariance of location i's observations with the rest
        let mut st = temporal_kernel(data.times(), data.times(), theta);
        for d in 0..nt {
            st[(d, d)] += theta.nugget_time;
        }
        let k_i = model.kernel(theta, &[data.locations()[i]], &locs).unwrap();
        let cross = k_i.kronecker(&st);
        let pred = cross * inv * vec_of(&y_rest);
        let obs = data.observations().column(i);
        res.set_column(i, &(obs - pred));
    }
    res
}

/// LOO residuals with the temporal cross-covariance `K_t(t_j, T)` instead of
/// `Σ_t` (the literal per-location refit prediction). Coincides with
/// [`naive_loo`] when the temporal nugget is zero.
pub fn naive_loo_latent_time(theta: &HyperParams, data: &TrainingSet, model: &SpatialModel) -> DMatrix<f64> {
    let (n, nt) = (data.num_locations(), data.num_times());
    let mut res = DMatrix::zeros(nt, n);
    let kt = temporal_kernel(data.times(), data.times(), theta);
    for i in 0..n {
        let rest: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        let locs: Vec<usize> = rest.iter().map(|&k| data.locations()[k]).collect();
        let y_rest = DMatrix::from_fn(nt, rest.len(), |t, c| data.observations()[(t, rest[c])]);
        let reduced = TrainingSet::new(locs.clone(), data.times().to_vec(), y_rest.clone()).unwrap();
        let inv = dense_covariance(theta, &reduced, model).try_inverse().unwrap();
        let k_i = model.kernel(theta, &[data.locations()[i]], &locs).unwrap();
        let pred = k_i.kronecker(&kt) * inv * vec_of(&y_rest);
        res.set_column(i, &(data.observations().column(i) - pred));
    }
    res
}
