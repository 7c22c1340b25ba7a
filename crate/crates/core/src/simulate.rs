//! Aliev–Panfilov reaction–diffusion on a mesh, explicit Euler in time.
//!
//! The spatial operator is the cotangent Laplacian `Δ = −M⁻¹C`. Stimuli are
//! currents added to `du/dt` on their vertex sets while active.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::LaplaceOperator;

/// Accepted range for `u`; `v` must stay above the lower bound.
pub const U_RANGE: (f64, f64) = (-0.05, 1.05);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct APParams {
    pub k: f64,
    pub a: f64,
    pub eps0: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// Diffusion coefficient.
    pub diffusion: f64,
    pub dt: f64,
    pub steps: usize,
    /// Record the state every `record_every` steps, starting at step 0.
    pub record_every: usize,
}

impl Default for APParams {
    fn default() -> Self {
        APParams {
            k: 8.0,
            a: 0.15,
            eps0: 0.002,
            mu1: 0.2,
            mu2: 0.3,
            diffusion: 0.04,
            dt: 0.02,
            steps: 2500,
            record_every: 25,
        }
    }
}

impl APParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.diffusion.is_finite() && self.diffusion >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "diffusion must be nonnegative, got {}",
                self.diffusion
            )));
        }
        if self.steps == 0 || self.record_every == 0 {
            return Err(Error::InvalidArgument(
                "steps and record_every must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("k", self.k),
            ("a", self.a),
            ("eps0", self.eps0),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Reaction terms `(du/dt, dv/dt)` of a single cell, without diffusion.
    pub fn reaction(&self, u: f64, v: f64) -> (f64, f64) {
        let du = -self.k * u * (u - self.a) * (u - 1.0) - u * v;
        let dv = (self.eps0 + self.mu1 * v / (u + self.mu2)) * (-v - self.k * u * (u - self.a - 1.0));
        (du, dv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusProtocol {
    pub vertices: Vec<usize>,
    pub amplitude: f64,
    pub start: f64,
    /// Repetition period; 0 fires once.
    pub period: f64,
    pub duration: f64,
}

impl StimulusProtocol {
    pub fn validate(&self, num_vertices: usize) -> Result<()> {
        if self.vertices.is_empty() {
            return Err(Error::InvalidArgument("stimulus needs at least one vertex".into()));
        }
        if let Some(&index) = self.vertices.iter().find(|&&v| v >= num_vertices) {
            return Err(Error::VertexOutOfRange {
                index,
                count: num_vertices,
            });
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "stimulus duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.period.is_finite() && self.period >= 0.0) || !self.start.is_finite() || !self.amplitude.is_finite() {
            return Err(Error::InvalidArgument(
                "stimulus start, period and amplitude must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn is_active(&self, t: f64) -> bool {
        if t < self.start {
            return false;
        }
        let since = t - self.start;
        if self.period > 0.0 {
            since % self.period < self.duration
        } else {
            since < self.duration
        }
    }
}

/// Recorded field `u`, one row per recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub u: DMatrix<f64>,
    pub times: Vec<f64>,
}

impl SimulationResult {
    pub fn num_times(&self) -> usize {
        self.times.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.u.ncols()
    }
}

/// `dt · D · λ_max` with the Gershgorin bound for `λ_max`; must not exceed 2.
pub fn stability_number(lap: &LaplaceOperator, params: &APParams) -> f64 {
    params.dt * params.diffusion * lap.max_eigenvalue_bound()
}

pub fn simulate_aliev_panfilov(
    lap: &LaplaceOperator,
    params: &APParams,
    stimuli: &[StimulusProtocol],
) -> Result<SimulationResult> {
    params.validate()?;
    let n = lap.dim();
    for s in stimuli {
        s.validate(n)?;
    }
    let guard = stability_number(lap, params);
    if guard > 2.0 {
        return Err(Error::StabilityGuard { value: guard });
    }

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut current = vec![0.0; n];
    let mut diffusion = vec![0.0; n];
    let recorded = params.steps / params.record_every + 1;
    let mut out = DMatrix::zeros(recorded, n);
    let mut times = Vec::with_capacity(recorded);
    times.push(0.0);

    for step in 0..params.steps {
        let t = step as f64 * params.dt;
        current.iter_mut().for_each(|c| *c = 0.0);
        for s in stimuli.iter().filter(|s| s.is_active(t)) {
            for &i in &s.vertices {
                current[i] += s.amplitude;
            }
        }
        if params.diffusion > 0.0 {
            // Δu = −M⁻¹Cu
            lap.stiffness.mul_vec_into(&u, &mut diffusion);
            for (d, m) in diffusion.iter_mut().zip(&lap.mass) {
                *d = -*d / m;
            }
        }
        for i in 0..n {
            let (ru, rv) = params.reaction(u[i], v[i]);
            u[i] += params.dt * (params.diffusion * diffusion[i] + ru + current[i]);
            v[i] += params.dt * rv;
        }

        let done = step + 1;
        for i in 0..n {
            if !(u[i].is_finite() && v[i].is_finite()) {
                return Err(Error::Unstable { step: done });
            }
            if u[i] < U_RANGE.0 || u[i] > U_RANGE.1 {
                return Err(Error::OutOfRange {
                    step: done,
                    value: u[i],
                });
            }
            if v[i] < U_RANGE.0 {
                return Err(Error::OutOfRange {
                    step: done,
                    value: v[i],
                });
            }
        }
        if done % params.record_every == 0 {
            let row = done / params.record_every;
            for i in 0..n {
                out[(row, i)] = u[i];
            }
            times.push(done as f64 * params.dt);
        }
    }
    Ok(SimulationResult { u: out, times })
}

/// `U + σ_ξ · N(0, 1)`, drawn in column-major order from a seeded generator.
pub fn add_noise(u: &DMatrix<f64>, sigma: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(u.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = u.clone();
    for value in y.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *value += sigma * z;
    }
    Ok(y)
}

/// Two-source pacing: a regular source with period `period` and a faster
/// one with period `0.6 · period`, both firing from `t = 0`.
pub fn paced_protocol(primary: &[usize], secondary: &[usize], period: f64, amplitude: f64) -> Vec<StimulusProtocol> {
    vec![
        StimulusProtocol {
            vertices: primary.to_vec(),
            amplitude,
            start: 0.0,
            period,
            duration: 1.0,
        },
        StimulusProtocol {
            vertices: secondary.to_vec(),
            amplitude,
            start: 0.3 * period,
            period: 0.6 * period,
            duration: 1.0,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cotan_laplacian, geodesic_distances, shapes};

    /// Single-cell RK4 reference, no diffusion.
    fn single_cell_rk4(params: &APParams, stim: &StimulusProtocol, dt: f64, t_end: f64) -> Vec<f64> {
        let f = |t: f64, u: f64, v: f64| {
            let (du, dv) = params.reaction(u, v);
            let i = if stim.is_active(t) { stim.amplitude } else { 0.0 };
            (du + i, dv)
        };
        let (mut u, mut v) = (0.0, 0.0);
        let mut trace = vec![u];
        let steps = (t_end / dt).round() as usize;
        for s in 0..steps {
            let t = s as f64 * dt;
            let (k1u, k1v) = f(t, u, v);
            let (k2u, k2v) = f(t + dt / 2.0, u + dt / 2.0 * k1u, v + dt / 2.0 * k1v);
            let (k3u, k3v) = f(t + dt / 2.0, u + dt / 2.0 * k2u, v + dt / 2.0 * k2v);
            let (k4u, k4v) = f(t + dt, u + dt * k3u, v + dt * k3v);
            u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            trace.push(u);
        }
        trace
    }

    fn one_shot(vertices: Vec<usize>) -> StimulusProtocol {
        StimulusProtocol {
            vertices,
            amplitude: 0.3,
            start: 0.0,
            period: 0.0,
            duration: 1.0,
        }
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let lap = cotan_laplacian(&shapes::icosphere(2)).unwrap();
        let params = APParams {
            steps: 500,
            record_every: 10,
            ..Default::default()
        };
        let r = simulate_aliev_panfilov(&lap, &params, &[]).unwrap();
        assert_eq!(r.num_times(), 51);
        assert!(r.u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn excitation_and_recovery_match_single_cell() {
        let lap = cotan_laplacian(&shapes::icosphere(1)).unwrap();
        let params = APParams {
            diffusion: 0.01,
            dt: 0.01,
            steps: 6000,
            record_every: 1,
            ..Default::default()
        };
        let stim = one_shot((0..lap.dim()).collect());
        let r = simulate_aliev_panfilov(&lap, &params, std::slice::from_ref(&stim)).unwrap();
        let reference = single_cell_rk4(&params, &stim, 0.001, 60.0);
        let ref_peak = reference.iter().copied().fold(f64::MIN, f64::max);
        let col = r.u.column(5);
        let peak = col.iter().copied().fold(f64::MIN, f64::max);
        assert!(peak > 0.8 && col[col.len() - 1] < 0.1, "peak {peak}");
        assert!((peak - ref_peak).abs() <= 0.05 * ref_peak, "{peak} vs {ref_peak}");
    }

    #[test]
    fn wave_propagates_from_a_local_stimulus() {
        let mesh = shapes::desk_band();
        let lap = cotan_laplacian(&mesh).unwrap();
        let params = APParams {
            diffusion: 0.01,
            steps: 3000,
            record_every: 100,
            ..Default::default()
        };
        let g = geodesic_distances(&mesh, 0).unwrap();
        let ball = (0..mesh.num_vertices()).filter(|&i| g.distances[i] <= 0.3).collect();
        let r = simulate_aliev_panfilov(&lap, &params, &[one_shot(ball)]).unwrap();
        let excited = (0..r.num_vertices())
            .filter(|&i| r.u.column(i).iter().any(|&x| x > 0.5))
            .count();
        assert!(excited > r.num_vertices() / 4, "{excited}");
        assert!(r.u.min() >= 0.0);
    }

    #[test]
    fn deterministic_and_subsampling_consistent() {
        let lap = cotan_laplacian(&shapes::horseshoe(1)).unwrap();
        let base = APParams {
            steps: 600,
            record_every: 1,
            ..Default::default()
        };
        let stimuli = paced_protocol(&[0], &[7], 20.0, 0.3);
        let full = simulate_aliev_panfilov(&lap, &base, &stimuli).unwrap();
        let again = simulate_aliev_panfilov(&lap, &base, &stimuli).unwrap();
        assert_eq!(full, again);
        let strided = simulate_aliev_panfilov(
            &lap,
            &APParams {
                record_every: 7,
                ..base
            },
            &stimuli,
        )
        .unwrap();
        for (row, t) in strided.times.iter().enumerate() {
            assert_eq!(strided.u.row(row), full.u.row(row * 7));
            assert_eq!(*t, full.times[row * 7]);
        }
    }

    #[test]
    fn stability_guard_rejects_large_steps() {
        let lap = cotan_laplacian(&shapes::icosphere(3)).unwrap();
        let params = APParams {
            diffusion: 10.0,
            dt: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            simulate_aliev_panfilov(&lap, &params, &[]),
            Err(Error::StabilityGuard { .. })
        ));
    }

    #[test]
    fn overdriven_stimulus_is_out_of_range() {
        let lap = cotan_laplacian(&shapes::icosphere(1)).unwrap();
        let params = APParams {
            steps: 400,
            ..Default::default()
        };
        let stim = StimulusProtocol {
            amplitude: 5.0,
            ..one_shot(vec![0])
        };
        assert!(matches!(
            simulate_aliev_panfilov(&lap, &params, &[stim]),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn invalid_stimulus() {
        let lap = cotan_laplacian(&shapes::tetrahedron()).unwrap();
        let p = APParams::default();
        assert!(simulate_aliev_panfilov(&lap, &p, &[one_shot(vec![])]).is_err());
        assert!(simulate_aliev_panfilov(&lap, &p, &[one_shot(vec![4])]).is_err());
        let zero = StimulusProtocol {
            duration: 0.0,
            ..one_shot(vec![0])
        };
        assert!(simulate_aliev_panfilov(&lap, &p, &[zero]).is_err());
    }

    #[test]
    fn stimulus_windows() {
        let s = StimulusProtocol {
            vertices: vec![0],
            amplitude: 1.0,
            start: 2.0,
            period: 10.0,
            duration: 1.0,
        };
        assert!(!s.is_active(1.9));
        assert!(s.is_active(2.0) && s.is_active(2.9) && !s.is_active(3.0));
        assert!(s.is_active(12.5) && !s.is_active(13.5));
        let once = StimulusProtocol { period: 0.0, ..s };
        assert!(!once.is_active(12.5));
    }

    #[test]
    fn noise_statistics() {
        let u = DMatrix::from_fn(400, 300, |i, j| (i as f64 * 0.01).sin() * j as f64 * 1e-3);
        assert_eq!(add_noise(&u, 0.0, 1).unwrap(), u);
        let y = add_noise(&u, 0.05, 9).unwrap();
        assert_eq!(y, add_noise(&u, 0.05, 9).unwrap());
        assert_ne!(y, add_noise(&u, 0.05, 10).unwrap());
        let d = &y - &u;
        let n = d.len() as f64;
        let mean = d.sum() / n;
        let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 0.05).abs() <= 0.02 * 0.05, "{std}");
        assert!(add_noise(&u, -1.0, 0).is_err());
    }
}
