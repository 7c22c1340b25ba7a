//! Active learning of sensor locations.
//!
//! Each round scores the unmeasured vertices by a blend of normalized
//! predictive uncertainty and normalized geodesic distance to the measured
//! set, picks a batch greedily, reveals the (noisy) signals there and refits.
//! The adaptive strategy sets the blend from the leave-one-location-out
//! error of the current model and its estimated spatial nugget.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{fit, FitConfig, FittedModel, SpatialModel, TrainingSet};
use crate::kernels::HyperParams;
use crate::mesh::{geodesic_distances, min_geodesic_distances, TriMesh};
use crate::metrics::relative_error;
use crate::simulate::{add_noise, SimulationResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    /// A-AL: weights from the LOO error and the spatial nugget.
    Adaptive,
    /// F-AL: fixed ratio `γ = α₁ / α₂`.
    Fixed { gamma: f64 },
    /// U-AL (also called V-AL): uncertainty only.
    Uncertainty,
    /// S-AL: geodesic maximin only.
    SpaceFilling,
    /// R-AL: uniform random.
    Random,
}

impl Strategy {
    /// The four named baselines plus A-AL, with F-AL at `γ = 1`.
    pub const ALL: [Strategy; 5] = [
        Strategy::Adaptive,
        Strategy::Fixed { gamma: 1.0 },
        Strategy::Uncertainty,
        Strategy::SpaceFilling,
        Strategy::Random,
    ];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Adaptive => write!(f, "a-al"),
            Strategy::Fixed { gamma } => write!(f, "f-al:{gamma}"),
            Strategy::Uncertainty => write!(f, "u-al"),
            Strategy::SpaceFilling => write!(f, "s-al"),
            Strategy::Random => write!(f, "r-al"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (lower.as_str(), None),
        };
        let strategy = match (name, arg) {
            ("a-al", None) => Strategy::Adaptive,
            ("u-al" | "v-al", None) => Strategy::Uncertainty,
            ("s-al", None) => Strategy::SpaceFilling,
            ("r-al", None) => Strategy::Random,
            ("f-al", None) => Strategy::Fixed { gamma: 1.0 },
            ("f-al", Some(a)) => {
                let gamma: f64 = a
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad F-AL ratio {a:?}")))?;
                if !(gamma.is_finite() && gamma >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "F-AL ratio must be nonnegative, got {gamma}"
                    )));
                }
                Strategy::Fixed { gamma }
            }
            _ => return Err(Error::InvalidArgument(format!("unknown strategy {s:?}"))),
        };
        Ok(strategy)
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ALConfig {
    pub strategy: Strategy,
    pub batch_size: usize,
    pub rounds: usize,
    pub initial_count: usize,
    pub seed: u64,
    /// Re-estimate `θ` after every batch (warm-started); otherwise keep the
    /// initial estimate and only recondition.
    pub refit_each_round: bool,
}

impl Default for ALConfig {
    fn default() -> Self {
        ALConfig {
            strategy: Strategy::Adaptive,
            batch_size: 3,
            rounds: 30,
            initial_count: 50,
            seed: 0,
            refit_each_round: true,
        }
    }
}

impl ALConfig {
    pub fn validate(&self, num_vertices: usize) -> Result<()> {
        if self.batch_size == 0 || self.rounds == 0 || self.initial_count == 0 {
            return Err(Error::InvalidArgument(
                "batch_size, rounds and initial_count must be positive".into(),
            ));
        }
        if self.initial_count < 2 {
            return Err(Error::InvalidArgument("need at least 2 initial locations".into()));
        }
        let total = self.initial_count + self.rounds * self.batch_size;
        if total > num_vertices {
            return Err(Error::InvalidArgument(format!(
                "initial_count + rounds * batch_size = {total} exceeds {num_vertices} vertices"
            )));
        }
        Ok(())
    }
}

/// `(α₁, α₂)`: weights of the space-filling and uncertainty terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Weights {
    pub const SPACE_FILLING: Weights = Weights {
        alpha1: 1.0,
        alpha2: 0.0,
    };
    pub const UNCERTAINTY: Weights = Weights {
        alpha1: 0.0,
        alpha2: 1.0,
    };

    /// Weights with `α₁ / α₂ = γ`.
    pub fn from_ratio(gamma: f64) -> Weights {
        split(gamma, 1.0)
    }
}

// a / (a + b) and b / (a + b), with the larger share taken as the complement
// of the smaller so that the pair sums to exactly one.
fn split(a: f64, b: f64) -> Weights {
    let total = a + b;
    if a <= b {
        let alpha1 = a / total;
        Weights {
            alpha1,
            alpha2: 1.0 - alpha1,
        }
    } else {
        let alpha2 = b / total;
        Weights {
            alpha1: 1.0 - alpha2,
            alpha2,
        }
    }
}

/// `α₁ = τ² / (τ² + σ²)`, `α₂ = σ² / (τ² + σ²)`.
pub fn adaptive_weights(tau2: f64, sigma2: f64) -> Result<Weights> {
    if !(tau2.is_finite() && sigma2.is_finite() && tau2 >= 0.0 && sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "weights need finite nonnegative inputs, got tau2={tau2}, sigma2={sigma2}"
        )));
    }
    if tau2 + sigma2 == 0.0 {
        return Err(Error::InvalidArgument("tau2 and sigma2 are both zero".into()));
    }
    Ok(split(tau2, sigma2))
}

#[derive(Debug, Clone)]
pub struct LooCv {
    /// `(1/n) Σ_i Σ_j r_ij²`.
    pub tau2: f64,
    /// `N_t × n`; column `i` holds the residuals with location `i` left out.
    pub residuals: DMatrix<f64>,
}

/// Leave-one-location-out residuals without refitting. With the Kronecker
/// covariance the block formula collapses to
/// `r_i = (Y Σ_s⁻¹)_{:,i} / (Σ_s⁻¹)_{ii}`.
pub fn loo_cv_error(model: &FittedModel) -> Result<LooCv> {
    let n = model.data().num_locations();
    if n < 2 {
        return Err(Error::InvalidArgument("LOO needs at least 2 training locations".into()));
    }
    let inv = model.spatial_factor().inverse();
    let mut residuals = model.data().observations() * &inv;
    for i in 0..n {
        let d = inv[(i, i)];
        residuals.column_mut(i).iter_mut().for_each(|r| *r /= d);
    }
    let tau2 = residuals.norm_squared() / n as f64;
    Ok(LooCv { tau2, residuals })
}

/// Mean predictive standard deviation over the training times, per candidate.
pub fn uncertainty_score(model: &FittedModel, candidates: &[usize]) -> Result<Vec<f64>> {
    let std = model.posterior_std(candidates, model.data().times())?;
    let nt = std.nrows() as f64;
    Ok(std.column_iter().map(|c| c.sum() / nt).collect())
}

/// Minimum geodesic distance from each candidate to the measured set.
pub fn space_filling_score(mesh: &TriMesh, measured: &[usize], candidates: &[usize]) -> Result<Vec<f64>> {
    let d = min_geodesic_distances(mesh, measured)?;
    candidates
        .iter()
        .map(|&c| {
            mesh.check_vertex(c)?;
            Ok(d[c])
        })
        .collect()
}

fn normalize_into(scores: &[f64], active: &[bool], out: &mut [f64]) {
    let max = scores
        .iter()
        .zip(active)
        .filter(|(_, &a)| a)
        .map(|(s, _)| *s)
        .fold(0.0, f64::max);
    for ((o, s), &a) in out.iter_mut().zip(scores).zip(active) {
        *o = if a && max > 0.0 { s / max } else { 0.0 };
    }
}

/// Greedy batch under the blended criterion. `uncertainty[k]` belongs to
/// `candidates[k]` and stays fixed within the batch; the distance term is
/// updated after every pick. Each term is divided by its maximum over the
/// remaining candidates, and ties go to the lowest vertex id.
pub fn select_batch(
    mesh: &TriMesh,
    measured: &[usize],
    candidates: &[usize],
    uncertainty: &[f64],
    weights: Weights,
    batch_size: usize,
) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate vertices".into()));
    }
    if candidates.len() != uncertainty.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} candidates but {} uncertainty scores",
            candidates.len(),
            uncertainty.len()
        )));
    }
    if batch_size > candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "batch of {batch_size} from {} candidates",
            candidates.len()
        )));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by_key(|&k| candidates[k]);
    let cand: Vec<usize> = order.iter().map(|&k| candidates[k]).collect();
    let unc: Vec<f64> = order.iter().map(|&k| uncertainty[k]).collect();

    let need_distance = weights.alpha1 > 0.0;
    let mut dist = if need_distance {
        let d = min_geodesic_distances(mesh, measured)?;
        cand.iter().map(|&c| d[c]).collect()
    } else {
        vec![0.0; cand.len()]
    };

    let mut active = vec![true; cand.len()];
    let (mut nd, mut nu) = (vec![0.0; cand.len()], vec![0.0; cand.len()]);
    let mut picked = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        normalize_into(&dist, &active, &mut nd);
        normalize_into(&unc, &active, &mut nu);
        let mut best: Option<(usize, f64)> = None;
        for k in (0..cand.len()).filter(|&k| active[k]) {
            let score = weights.alpha1 * nd[k] + weights.alpha2 * nu[k];
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((k, score));
            }
        }
        let (k, _) = best.expect("batch_size <= candidates");
        active[k] = false;
        picked.push(cand[k]);
        if need_distance {
            let from_pick = geodesic_distances(mesh, cand[k])?.distances;
            for (d, &c) in dist.iter_mut().zip(&cand) {
                *d = d.min(from_pick[c]);
            }
        }
    }
    Ok(picked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Locations added so far, `round × batch_size`.
    pub n_plus: usize,
    /// RE of the full-field posterior mean after this round's batch.
    pub re: f64,
    /// LOO error of the model the batch was selected with.
    pub tau2: f64,
    pub sigma2_eps_s: f64,
    /// `None` for R-AL.
    pub weights: Option<Weights>,
    pub picked: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ALHistory {
    pub strategy: Strategy,
    pub initial: Vec<usize>,
    pub initial_re: f64,
    pub rounds: Vec<RoundRecord>,
    pub final_theta: HyperParams,
}

impl ALHistory {
    pub fn final_re(&self) -> f64 {
        self.rounds.last().map_or(self.initial_re, |r| r.re)
    }

    pub fn measured(&self) -> Vec<usize> {
        let mut m = self.initial.clone();
        for r in &self.rounds {
            m.extend(&r.picked);
        }
        m
    }
}

/// Measured/candidate split, the current model and the last weights.
#[derive(Debug, Clone)]
pub struct ALState {
    measured: Vec<usize>,
    /// Sorted ascending.
    candidates: Vec<usize>,
    model: FittedModel,
    weights: Option<Weights>,
    rng: ChaCha8Rng,
}

/// What a round's selection was based on.
#[derive(Debug, Clone)]
pub struct Selection {
    pub picked: Vec<usize>,
    pub tau2: f64,
    pub sigma2_eps_s: f64,
    pub weights: Option<Weights>,
}

impl ALState {
    pub fn new(model: FittedModel, num_vertices: usize, seed: u64) -> Result<Self> {
        let measured = model.data().locations().to_vec();
        if let Some(&index) = measured.iter().find(|&&v| v >= num_vertices) {
            return Err(Error::VertexOutOfRange {
                index,
                count: num_vertices,
            });
        }
        let mut is_measured = vec![false; num_vertices];
        measured.iter().for_each(|&v| is_measured[v] = true);
        let candidates = (0..num_vertices).filter(|&v| !is_measured[v]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        Ok(ALState {
            measured,
            candidates,
            model,
            weights: None,
            rng,
        })
    }

    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn model(&self) -> &FittedModel {
        &self.model
    }

    pub fn weights(&self) -> Option<Weights> {
        self.weights
    }

    /// Weights the strategy would use with the current model.
    pub fn strategy_weights(&self, strategy: Strategy, loo: &LooCv) -> Result<Option<Weights>> {
        Ok(match strategy {
            Strategy::Adaptive => Some(adaptive_weights(loo.tau2, self.model.theta().nugget_space)?),
            Strategy::Fixed { gamma } => Some(Weights::from_ratio(gamma)),
            Strategy::Uncertainty => Some(Weights::UNCERTAINTY),
            Strategy::SpaceFilling => Some(Weights::SPACE_FILLING),
            Strategy::Random => None,
        })
    }

    /// Chooses the next batch without changing the measured set.
    pub fn select_next(&mut self, mesh: &TriMesh, strategy: Strategy, batch_size: usize) -> Result<Selection> {
        if self.candidates.len() < batch_size {
            return Err(Error::InvalidArgument(format!(
                "{} candidates left, batch of {batch_size} requested",
                self.candidates.len()
            )));
        }
        let loo = loo_cv_error(&self.model)?;
        let weights = self.strategy_weights(strategy, &loo)?;
        let picked = match weights {
            None => sample(&mut self.rng, self.candidates.len(), batch_size)
                .into_iter()
                .map(|k| self.candidates[k])
                .collect(),
            Some(w) => {
                let uncertainty = if w.alpha2 > 0.0 {
                    uncertainty_score(&self.model, &self.candidates)?
                } else {
                    vec![0.0; self.candidates.len()]
                };
                select_batch(mesh, &self.measured, &self.candidates, &uncertainty, w, batch_size)?
            }
        };
        self.weights = weights;
        Ok(Selection {
            picked,
            tau2: loo.tau2,
            sigma2_eps_s: self.model.theta().nugget_space,
            weights,
        })
    }

    /// Adds `picked` to the measured set and installs the model trained on it.
    pub fn commit(&mut self, picked: &[usize], model: FittedModel) -> Result<()> {
        for &p in picked {
            match self.candidates.binary_search(&p) {
                Ok(k) => {
                    self.candidates.remove(k);
                }
                Err(_) => return Err(Error::InvalidArgument(format!("vertex {p} is not a candidate"))),
            }
            self.measured.push(p);
        }
        if model.data().locations() != self.measured.as_slice() {
            return Err(Error::InvalidArgument(
                "model locations do not match the measured set".into(),
            ));
        }
        self.model = model;
        Ok(())
    }
}

/// `count` distinct vertices drawn uniformly from `0..n` (stream 1 of
/// `seed`). Shared by every strategy and by plain fitting, so the same seed
/// always yields the same design.
pub fn initial_design(n: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!("cannot draw {count} of {n} vertices")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    Ok(sample(&mut rng, n, count).into_vec())
}

/// The full protocol: seeded initial design, then `rounds` batches. Noisy
/// observations `U + σ_ξ ξ` are drawn once from `config.seed`, so every
/// strategy sees the same data and the same initial design for a given seed.
pub fn run_active_learning(
    truth: &SimulationResult,
    noise: f64,
    mesh: &TriMesh,
    spatial: &SpatialModel,
    config: &ALConfig,
    fit_config: &FitConfig,
) -> Result<ALHistory> {
    let n = mesh.num_vertices();
    if truth.num_vertices() != n || spatial.num_vertices() != n {
        return Err(Error::DimensionMismatch(format!(
            "mesh has {n} vertices, truth {} and spatial model {}",
            truth.num_vertices(),
            spatial.num_vertices()
        )));
    }
    config.validate(n)?;
    let observed = add_noise(&truth.u, noise, config.seed)?;
    let all: Vec<usize> = (0..n).collect();

    let initial = initial_design(n, config.initial_count, config.seed)?;
    let data = TrainingSet::from_field(&observed, &truth.times, &initial)?;
    let model = fit(&data, spatial, fit_config)?;
    let initial_re = relative_error(&model.posterior_mean(&all, &truth.times)?, &truth.u)?;

    let mut state = ALState::new(model, n, config.seed)?;
    let mut rounds = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        let sel = state.select_next(mesh, config.strategy, config.batch_size)?;
        let mut locations = state.measured().to_vec();
        locations.extend(&sel.picked);
        let data = TrainingSet::from_field(&observed, &truth.times, &locations)?;
        let model = if config.refit_each_round {
            let warm = FitConfig::warm_start(*state.model().theta(), fit_config.optimizer);
            fit(&data, spatial, &warm)?
        } else {
            state.model().recondition(data)?
        };
        let re = relative_error(&model.posterior_mean(&all, &truth.times)?, &truth.u)?;
        state.commit(&sel.picked, model)?;
        rounds.push(RoundRecord {
            round,
            n_plus: round * config.batch_size,
            re,
            tau2: sel.tau2,
            sigma2_eps_s: sel.sigma2_eps_s,
            weights: sel.weights,
            picked: sel.picked,
        });
    }
    Ok(ALHistory {
        strategy: config.strategy,
        initial,
        initial_re,
        rounds,
        final_theta: *state.model().theta(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::FittedModel;
    use crate::mesh::{cotan_laplacian, shapes, spectral_basis};
    use crate::optim::NelderMeadConfig;
    use crate::simulate::{paced_protocol, simulate_aliev_panfilov, APParams};
    use crate::testing::{dense_block_loo, naive_loo, naive_loo_latent_time, random_instance};
    use proptest::{prop_assert, prop_assert_eq, proptest};
    use rand::Rng;
    use std::sync::Arc;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, rel: f64) -> bool {
        (a - b).amax() <= rel * b.amax().max(1e-300)
    }

    fn condition(seed: u64, ns: usize, nt: usize) -> (FittedModel, crate::testing::Instance) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, ns, nt);
        let model = FittedModel::condition(inst.theta, inst.data.clone(), inst.model.clone()).unwrap();
        (model, inst)
    }

    #[test]
    fn loo_matches_dense_block_and_naive_refits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..20 {
            let (ns, nt) = (rng.gen_range(2..=6), rng.gen_range(1..=5));
            let (model, inst) = condition(seed, ns, nt);
            let loo = loo_cv_error(&model).unwrap();
            let block = dense_block_loo(&inst.theta, &inst.data, &inst.model);
            let naive = naive_loo(&inst.theta, &inst.data, &inst.model);
            assert!(close(&loo.residuals, &block, 1e-8), "seed {seed}");
            assert!(close(&loo.residuals, &naive, 1e-6), "seed {seed}");
            let tau2 = naive.norm_squared() / ns as f64;
            assert!((loo.tau2 - tau2).abs() <= 1e-6 * tau2);
        }
    }

    #[test]
    fn two_locations_three_times() {
        let (model, inst) = condition(77, 2, 3);
        let loo = loo_cv_error(&model).unwrap();
        assert!(close(
            &loo.residuals,
            &naive_loo(&inst.theta, &inst.data, &inst.model),
            1e-6
        ));
    }

    #[test]
    fn latent_time_refit_agrees_without_temporal_nugget() {
        let (_, mut inst) = condition(3, 5, 4);
        inst.theta.nugget_time = 0.0;
        let model = FittedModel::condition(inst.theta, inst.data.clone(), inst.model.clone()).unwrap();
        let loo = loo_cv_error(&model).unwrap();
        let latent = naive_loo_latent_time(&inst.theta, &inst.data, &inst.model);
        assert!(close(&loo.residuals, &latent, 1e-6));
    }

    #[test]
    fn huge_nugget_residuals_are_the_data() {
        let (_, mut inst) = condition(11, 5, 4);
        inst.theta.nugget_space = 1e12;
        let model = FittedModel::condition(inst.theta, inst.data.clone(), inst.model.clone()).unwrap();
        let loo = loo_cv_error(&model).unwrap();
        assert!(close(&loo.residuals, inst.data.observations(), 1e-6));
    }

    #[test]
    fn loo_needs_two_locations() {
        let (model, _) = condition(1, 1, 3);
        assert!(loo_cv_error(&model).is_err());
    }

    #[test]
    fn weight_examples() {
        assert_eq!(
            adaptive_weights(2.0, 2.0).unwrap(),
            Weights {
                alpha1: 0.5,
                alpha2: 0.5
            }
        );
        assert_eq!(
            adaptive_weights(3.0, 1.0).unwrap(),
            Weights {
                alpha1: 0.75,
                alpha2: 0.25
            }
        );
        assert_eq!(adaptive_weights(0.0, 1.0).unwrap(), Weights::UNCERTAINTY);
        assert!(adaptive_weights(0.0, 0.0).is_err());
        assert!(adaptive_weights(-1.0, 1.0).is_err());
        assert_eq!(
            Weights::from_ratio(1.0),
            Weights {
                alpha1: 0.5,
                alpha2: 0.5
            }
        );
    }

    proptest! {
        #[test]
        fn weights_partition_unity(tau2 in 0.0f64..1e6, sigma2 in 1e-12f64..1e6) {
            let w = adaptive_weights(tau2, sigma2).unwrap();
            prop_assert_eq!(w.alpha1 + w.alpha2, 1.0);
            prop_assert!((0.0..=1.0).contains(&w.alpha1) && (0.0..=1.0).contains(&w.alpha2));
            let g = Weights::from_ratio(tau2);
            prop_assert_eq!(g.alpha1 + g.alpha2, 1.0);
        }
    }

    #[test]
    fn uncertainty_matches_posterior_std_average() {
        let (model, _) = condition(21, 5, 4);
        let cands = [0, 9, 17, 30, 41];
        let scores = uncertainty_score(&model, &cands).unwrap();
        let std = model.posterior_std(&cands, model.data().times()).unwrap();
        for (k, s) in scores.iter().enumerate() {
            let direct: f64 = (0..std.nrows()).map(|j| std[(j, k)]).sum::<f64>() / std.nrows() as f64;
            assert!((s - direct).abs() <= 1e-14 * direct.max(1.0));
            assert!(*s >= 0.0);
        }
    }

    #[test]
    fn uncertainty_vanishes_at_measured_vertex_without_nuggets() {
        let (_, mut inst) = condition(8, 5, 4);
        inst.theta.nugget_space = 0.0;
        inst.theta.nugget_time = 0.0;
        let model = FittedModel::condition(inst.theta, inst.data.clone(), inst.model.clone()).unwrap();
        let v = inst.data.locations()[2];
        let s = uncertainty_score(&model, &[v]).unwrap()[0];
        let prior = (model.spatial().prior_variance(&inst.theta, &[v]).unwrap()[0] * inst.theta.sigma_a).sqrt();
        assert!(s <= 1e-3 * prior, "{s} vs {prior}");
    }

    #[test]
    fn space_filling_examples() {
        let mesh = shapes::unit_square_grid(4);
        // vertex 1 sits one 0.25 edge away from 0, 2 and 6
        let scores = space_filling_score(&mesh, &[0, 2, 6, 5], &[1, 0]).unwrap();
        assert_eq!(scores, vec![0.25, 0.0]);
        let mesh = shapes::horseshoe(2);
        let measured = [4, 60, 99];
        let cands: Vec<usize> = (0..mesh.num_vertices()).collect();
        let scores = space_filling_score(&mesh, &measured, &cands).unwrap();
        let fields: Vec<Vec<f64>> = measured
            .iter()
            .map(|&m| geodesic_distances(&mesh, m).unwrap().distances)
            .collect();
        for c in cands {
            let brute = fields.iter().map(|f| f[c]).fold(f64::INFINITY, f64::min);
            assert_eq!(scores[c], brute);
        }
    }

    fn brute_force_maximin(mesh: &TriMesh, measured: &[usize], cands: &[usize], k: usize) -> Vec<usize> {
        let mut m = measured.to_vec();
        let mut left = cands.to_vec();
        left.sort_unstable();
        let mut out = Vec::new();
        for _ in 0..k {
            let fields: Vec<Vec<f64>> = m
                .iter()
                .map(|&s| geodesic_distances(mesh, s).unwrap().distances)
                .collect();
            let score = |c: usize| fields.iter().map(|f| f[c]).fold(f64::INFINITY, f64::min);
            let mut best = left[0];
            for &c in &left {
                if score(c) > score(best) {
                    best = c;
                }
            }
            out.push(best);
            m.push(best);
            left.retain(|&c| c != best);
        }
        out
    }

    #[test]
    fn boundary_weights_reduce_to_pure_criteria() {
        let mesh = shapes::horseshoe(2);
        let measured = [0, 50, 100];
        let cands: Vec<usize> = (0..mesh.num_vertices()).filter(|v| !measured.contains(v)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let unc: Vec<f64> = cands.iter().map(|_| rng.gen_range(0.0..1.0)).collect();

        let s = select_batch(&mesh, &measured, &cands, &unc, Weights::SPACE_FILLING, 4).unwrap();
        assert_eq!(s, brute_force_maximin(&mesh, &measured, &cands, 4));

        let u = select_batch(&mesh, &measured, &cands, &unc, Weights::UNCERTAINTY, 4).unwrap();
        let mut ranked: Vec<usize> = (0..cands.len()).collect();
        ranked.sort_by(|&a, &b| unc[b].total_cmp(&unc[a]).then(cands[a].cmp(&cands[b])));
        let top: Vec<usize> = ranked[..4].iter().map(|&k| cands[k]).collect();
        assert_eq!(u, top);

        // candidate order does not matter
        let mut rev_c = cands.clone();
        let mut rev_u = unc.clone();
        rev_c.reverse();
        rev_u.reverse();
        let w = Weights {
            alpha1: 0.4,
            alpha2: 0.6,
        };
        assert_eq!(
            select_batch(&mesh, &measured, &rev_c, &rev_u, w, 5).unwrap(),
            select_batch(&mesh, &measured, &cands, &unc, w, 5).unwrap()
        );
    }

    #[test]
    fn ties_break_to_lowest_id() {
        let mesh = shapes::unit_square_grid(3);
        let cands = [9, 3, 7, 5];
        let picked = select_batch(&mesh, &[0], &cands, &[1.0; 4], Weights::UNCERTAINTY, 2).unwrap();
        assert_eq!(picked, vec![3, 5]);
    }

    #[test]
    fn select_batch_errors() {
        let mesh = shapes::tetrahedron();
        assert!(select_batch(&mesh, &[0], &[], &[], Weights::UNCERTAINTY, 1).is_err());
        assert!(select_batch(&mesh, &[0], &[1, 2], &[0.5], Weights::UNCERTAINTY, 1).is_err());
        assert!(select_batch(&mesh, &[0], &[1, 2], &[0.5, 0.1], Weights::UNCERTAINTY, 3).is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL.into_iter().chain([Strategy::Fixed { gamma: 0.5 }]) {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("V-AL".parse::<Strategy>().unwrap(), Strategy::Uncertainty);
        assert!("x-al".parse::<Strategy>().is_err());
        assert!("f-al:-1".parse::<Strategy>().is_err());
        assert_eq!(String::from(Strategy::Fixed { gamma: 1.5 }), "f-al:1.5");
    }

    #[test]
    fn config_validation() {
        let c = ALConfig::default();
        assert!(c.validate(140).is_ok());
        assert!(c.validate(139).is_err());
        assert!(ALConfig {
            batch_size: 0,
            ..c.clone()
        }
        .validate(1000)
        .is_err());
    }

    fn small_problem() -> (TriMesh, SpatialModel, SimulationResult) {
        let mesh = shapes::slit_band(20, 6, 1.0, 0.7);
        let lap = cotan_laplacian(&mesh).unwrap();
        let basis = spectral_basis(&lap, 40).unwrap();
        let params = APParams {
            diffusion: 0.01,
            steps: 1500,
            record_every: 100,
            ..Default::default()
        };
        let truth =
            simulate_aliev_panfilov(&lap, &params, &paced_protocol(&[0, 1, 21], &[20, 19, 41], 20.0, 0.3)).unwrap();
        (mesh, SpatialModel::Laplacian(Arc::new(basis)), truth)
    }

    fn quick_fit() -> FitConfig {
        FitConfig {
            grid_starts: 2,
            optimizer: NelderMeadConfig {
                max_iter: 60,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn protocol_bookkeeping_and_determinism() {
        let (mesh, spatial, truth) = small_problem();
        for strategy in Strategy::ALL {
            let config = ALConfig {
                strategy,
                batch_size: 2,
                rounds: 3,
                initial_count: 10,
                seed: 6,
                refit_each_round: strategy != Strategy::Random,
            };
            let h = run_active_learning(&truth, 0.01, &mesh, &spatial, &config, &quick_fit()).unwrap();
            assert_eq!(h.rounds.len(), 3);
            for (k, r) in h.rounds.iter().enumerate() {
                assert_eq!(r.round, k + 1);
                assert_eq!(r.n_plus, (k + 1) * 2);
                assert_eq!(r.picked.len(), 2);
                assert!(r.re >= 0.0 && r.tau2 >= 0.0);
                if let Some(w) = r.weights {
                    assert_eq!(w.alpha1 + w.alpha2, 1.0);
                }
            }
            let mut all = h.measured();
            assert_eq!(all.len(), 16);
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), 16, "duplicate picks under {strategy}");
            let again = run_active_learning(&truth, 0.01, &mesh, &spatial, &config, &quick_fit()).unwrap();
            assert_eq!(h, again);
        }
    }

    #[test]
    fn strategies_share_initial_design() {
        let (mesh, spatial, truth) = small_problem();
        let run = |strategy| {
            let config = ALConfig {
                strategy,
                batch_size: 1,
                rounds: 1,
                initial_count: 8,
                seed: 2,
                refit_each_round: false,
            };
            run_active_learning(&truth, 0.0, &mesh, &spatial, &config, &quick_fit()).unwrap()
        };
        let (a, r) = (run(Strategy::Adaptive), run(Strategy::Random));
        assert_eq!(a.initial, r.initial);
        assert_eq!(a.initial_re, r.initial_re);
    }

    #[test]
    fn commit_rejects_non_candidates() {
        let (model, inst) = condition(2, 3, 2);
        let mut state = ALState::new(model.clone(), 42, 0).unwrap();
        let taken = inst.data.locations()[0];
        assert!(state.commit(&[taken], model).is_err());
    }
}
