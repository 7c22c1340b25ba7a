//! The `eigs`, `simulate`, `fit-predict` and `active-learn` verbs. Each
//! writes its files under `out` and returns a JSON summary for stdout.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use stgp_core::active::{initial_design, run_active_learning, ALHistory, Strategy};
use stgp_core::gp::{fit, ModelSummary, TrainingSet};
use stgp_core::metrics::relative_error;
use stgp_core::simulate::{add_noise, stability_number};

use crate::error::Result;
use crate::experiment::Experiment;
use crate::io::{
    eigenvalues_csv, eigenvectors_csv, hash_f64, hash_usize, write_json, write_signals, write_text, Signals,
};

pub fn eigs(exp: &Experiment, out: &Path) -> Result<Value> {
    let start = Instant::now();
    let basis = exp.basis(exp.config.eigenpairs)?;
    write_text(&out.join("eigenvalues.csv"), &eigenvalues_csv(&basis))?;
    write_text(&out.join("eigenvectors.csv"), &eigenvectors_csv(&basis))?;
    let summary = json!({
        "num_vertices": exp.num_vertices(),
        "eigenpairs": basis.len(),
        "lambda_min": basis.eigenvalues[0],
        "lambda_max": basis.eigenvalues[basis.len() - 1],
        "eigenvalues_sha256": hash_f64(basis.eigenvalues.iter().copied()),
        "wall_seconds": start.elapsed().as_secs_f64(),
    });
    write_json(&out.join("eigs.json"), &summary)?;
    Ok(summary)
}

pub fn simulate(exp: &Experiment, out: &Path) -> Result<Value> {
    let start = Instant::now();
    let stimuli = exp.stimuli()?;
    let truth = exp.simulate()?;
    let observed = add_noise(&truth.u, exp.config.noise, exp.config.seed)?;
    write_signals(
        &out.join("truth.csv"),
        &Signals::full_field(truth.times.clone(), truth.u.clone()),
    )?;
    write_signals(
        &out.join("observed.csv"),
        &Signals::full_field(truth.times.clone(), observed.clone()),
    )?;
    let summary = json!({
        "num_vertices": truth.num_vertices(),
        "num_times": truth.num_times(),
        "params": exp.config.simulation.params,
        "stimuli": stimuli,
        "stability_number": stability_number(&exp.laplacian, &exp.config.simulation.params),
        "u_min": truth.u.min(),
        "u_max": truth.u.max(),
        "noise": exp.config.noise,
        "seed": exp.config.seed,
        "truth_sha256": hash_f64(truth.u.iter().copied()),
        "observed_sha256": hash_f64(observed.iter().copied()),
        "wall_seconds": start.elapsed().as_secs_f64(),
    });
    write_json(&out.join("simulation.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct ModelReport<'a> {
    model: ModelSummary,
    seed: u64,
    noise: f64,
    training_locations: &'a [usize],
    training_sha256: String,
    observations_sha256: String,
    prediction_sha256: String,
    config_sha256: String,
    version: &'static str,
}

pub fn fit_predict(exp: &Experiment, out: &Path) -> Result<Value> {
    let start = Instant::now();
    let c = &exp.config;
    let n = exp.num_vertices();
    let truth = exp.truth()?;
    let observed = add_noise(&truth.u, c.noise, c.seed)?;
    let locations = if c.training.count == 0 {
        exp.all_vertices()
    } else {
        initial_design(n, c.training.count, c.seed)?
    };
    let data = TrainingSet::from_field(&observed, &truth.times, &locations)?;
    let spatial = exp.spatial_model(c.kernel, None)?;
    let model = fit(&data, &spatial, &c.fit_config(c.seed))?;
    let all = exp.all_vertices();
    let pred = model.predict(&all, &truth.times)?;
    let re = relative_error(&pred.mean, &truth.u)?;

    write_signals(
        &out.join("training.csv"),
        &Signals {
            times: truth.times.clone(),
            vertices: locations.clone(),
            values: data.observations().clone(),
        },
    )?;
    write_signals(
        &out.join("prediction.csv"),
        &Signals::full_field(truth.times.clone(), pred.mean.clone()),
    )?;
    write_signals(
        &out.join("prediction_std.csv"),
        &Signals::full_field(truth.times.clone(), pred.std.clone()),
    )?;
    write_json(
        &out.join("model.json"),
        &ModelReport {
            model: model.summary(),
            seed: c.seed,
            noise: c.noise,
            training_locations: &locations,
            training_sha256: hash_usize(&locations),
            observations_sha256: hash_f64(data.observations().iter().copied()),
            prediction_sha256: hash_f64(pred.mean.iter().copied()),
            config_sha256: exp.config_hash(),
            version: env!("CARGO_PKG_VERSION"),
        },
    )?;
    let metrics = json!({
        "relative_error": re,
        "kernel": c.kernel,
        "num_training": locations.len(),
        "num_times": truth.num_times(),
        "nll": model.nll(),
        "wall_seconds": start.elapsed().as_secs_f64(),
    });
    write_json(&out.join("metrics.json"), &metrics)?;
    Ok(metrics)
}

/// `f-al:1` becomes `f-al_1` so it can live in a file name.
pub fn strategy_slug(s: Strategy) -> String {
    s.to_string().replace(':', "_")
}

/// `round,N_plus,RE,tau2,sigma2_eps_s,alpha1,alpha2,picked_ids`; picked ids
/// are `;`-separated and the weights are empty for R-AL.
pub fn history_csv(h: &ALHistory) -> String {
    let mut out = String::from("round,N_plus,RE,tau2,sigma2_eps_s,alpha1,alpha2,picked_ids\n");
    for r in &h.rounds {
        let (a1, a2) = match r.weights {
            Some(w) => (format!("{:?}", w.alpha1), format!("{:?}", w.alpha2)),
            None => (String::new(), String::new()),
        };
        let picked: Vec<String> = r.picked.iter().map(usize::to_string).collect();
        out.push_str(&format!(
            "{},{},{:?},{:?},{:?},{a1},{a2},{}\n",
            r.round,
            r.n_plus,
            r.re,
            r.tau2,
            r.sigma2_eps_s,
            picked.join(";")
        ));
    }
    out
}

pub fn active_learn(exp: &Experiment, out: &Path) -> Result<Value> {
    let c = &exp.config;
    let truth = exp.truth()?;
    let spatial = exp.spatial_model(c.kernel, None)?;
    let mut rows = Vec::new();
    let mut comparison = String::from("strategy,initial_RE,final_RE\n");
    for strategy in c.active_learning.strategies() {
        let start = Instant::now();
        let al = c.active_learning.to_al_config(strategy, c.seed);
        let history = run_active_learning(&truth, c.noise, &exp.mesh, &spatial, &al, &c.fit_config(c.seed))?;
        let slug = strategy_slug(strategy);
        write_text(&out.join(format!("history_{slug}.csv")), &history_csv(&history))?;
        write_json(&out.join(format!("history_{slug}.json")), &history)?;
        comparison.push_str(&format!(
            "{strategy},{:?},{:?}\n",
            history.initial_re,
            history.final_re()
        ));
        rows.push(json!({
            "strategy": strategy,
            "initial_re": history.initial_re,
            "final_re": history.final_re(),
            "wall_seconds": start.elapsed().as_secs_f64(),
        }));
    }
    write_text(&out.join("comparison.csv"), &comparison)?;
    let summary = json!({ "seed": c.seed, "noise": c.noise, "kernel": c.kernel, "runs": rows });
    write_json(&out.join("active_learning.json"), &summary)?;
    Ok(summary)
}
