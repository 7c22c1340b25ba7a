//! Benchmark suite: eigenpair sweep, geometry-aware vs Euclidean kernel grid,
//! and the active-learning strategy comparison. Replication `r` uses seed
//! `config.seed + r` for both the training design and the noise draw, so
//! every cell is reproducible on its own.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use stgp_core::active::{initial_design, run_active_learning, ALHistory, Strategy};
use stgp_core::gp::{fit, TrainingSet};
use stgp_core::kernels::KernelKind;
use stgp_core::metrics::relative_error;
use stgp_core::simulate::{add_noise, SimulationResult};

use crate::commands::strategy_slug;
use crate::error::{CliError, Result};
use crate::experiment::Experiment;
use crate::io::{write_json, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Sweep,
    Kernels,
    Al,
}

pub const ALL_SECTIONS: [Section; 3] = [Section::Sweep, Section::Kernels, Section::Al];

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// RE of a fit on `count` noisy locations drawn with `seed`.
pub fn fit_re(
    exp: &Experiment,
    truth: &SimulationResult,
    spatial: &stgp_core::gp::SpatialModel,
    count: usize,
    noise: f64,
    seed: u64,
) -> Result<f64> {
    let observed = add_noise(&truth.u, noise, seed)?;
    let locations = initial_design(exp.num_vertices(), count, seed)?;
    let data = TrainingSet::from_field(&observed, &truth.times, &locations)?;
    let model = fit(&data, spatial, &exp.config.fit_config(seed))?;
    let mean = model.posterior_mean(&exp.all_vertices(), &truth.times)?;
    Ok(relative_error(&mean, &truth.u)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eigenpairs: usize,
    pub replication: usize,
    pub seed: u64,
    pub re: f64,
}

pub fn eigen_sweep(exp: &Experiment, truth: &SimulationResult) -> Result<Vec<SweepRow>> {
    let b = &exp.config.benchmark;
    let mut js: Vec<usize> = b
        .eigen_sweep
        .iter()
        .copied()
        .filter(|&j| j >= 1 && j <= exp.num_vertices())
        .collect();
    js.sort_unstable();
    js.dedup();
    let Some(&jmax) = js.last() else {
        return Err(CliError::Config("eigen_sweep has no usable eigenpair counts".into()));
    };
    let full = exp.basis(jmax)?;
    let mut rows = Vec::new();
    for &j in &js {
        let spatial = exp.spatial_model(KernelKind::Laplacian, Some(std::sync::Arc::new(full.truncated(j)?)))?;
        for replication in 0..b.sweep_replications {
            let seed = exp.config.seed + replication as u64;
            let re = fit_re(exp, truth, &spatial, b.sweep_training, b.sweep_noise, seed)?;
            rows.push(SweepRow {
                eigenpairs: j,
                replication,
                seed,
                re,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepShape {
    /// `(J, median RE)` in increasing `J`.
    pub medians: Vec<(usize, f64)>,
    /// Median RE at the smallest `J` exceeds that at the first `J ≥ 4·J_min`.
    pub decreasing: bool,
    /// The two largest `J` differ by at most 5% of the second largest.
    pub plateau: bool,
    pub monotone_then_plateau: bool,
}

pub fn sweep_shape(rows: &[SweepRow]) -> SweepShape {
    let mut by_j: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_j.entry(r.eigenpairs).or_default().push(r.re);
    }
    let medians: Vec<(usize, f64)> = by_j.iter().map(|(&j, v)| (j, median(v))).collect();
    let decreasing = match medians.first() {
        Some(&(j0, re0)) => medians
            .iter()
            .find(|&&(j, _)| j >= 4 * j0)
            .is_some_and(|&(_, re)| re0 > re),
        None => false,
    };
    let plateau = medians.len() >= 2 && {
        let (_, a) = medians[medians.len() - 2];
        let (_, b) = medians[medians.len() - 1];
        (a - b).abs() <= 0.05 * a
    };
    SweepShape {
        medians,
        decreasing,
        plateau,
        monotone_then_plateau: decreasing && plateau,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRow {
    pub kernel: KernelKind,
    pub size: usize,
    pub noise: f64,
    pub replication: usize,
    pub seed: u64,
    pub re: f64,
}

pub fn kernel_grid(exp: &Experiment, truth: &SimulationResult) -> Result<Vec<KernelRow>> {
    let b = &exp.config.benchmark;
    let mut models = Vec::new();
    for &kind in &b.kernels {
        models.push((kind, exp.spatial_model(kind, None)?));
    }
    let mut rows = Vec::new();
    for &size in &b.sizes {
        for &noise in &b.noises {
            for replication in 0..b.replications {
                let seed = exp.config.seed + replication as u64;
                for (kind, spatial) in &models {
                    rows.push(KernelRow {
                        kernel: *kind,
                        size,
                        noise,
                        replication,
                        seed,
                        re: fit_re(exp, truth, spatial, size, noise, seed)?,
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCell {
    pub size: usize,
    pub noise: f64,
    pub median_re_laplacian: Option<f64>,
    pub median_re_euclidean: Option<f64>,
    pub laplacian_better: Option<bool>,
}

pub fn kernel_summary(rows: &[KernelRow]) -> Vec<KernelCell> {
    let mut cells: Vec<(usize, f64)> = Vec::new();
    for r in rows {
        if !cells.contains(&(r.size, r.noise)) {
            cells.push((r.size, r.noise));
        }
    }
    cells
        .into_iter()
        .map(|(size, noise)| {
            let med = |kind: KernelKind| {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.size == size && r.noise == noise && r.kernel == kind)
                    .map(|r| r.re)
                    .collect();
                (!v.is_empty()).then(|| median(&v))
            };
            let g = med(KernelKind::Laplacian);
            let e = med(KernelKind::Euclidean);
            KernelCell {
                size,
                noise,
                median_re_laplacian: g,
                median_re_euclidean: e,
                laplacian_better: g.zip(e).map(|(g, e)| g < e),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlRun {
    pub seed: u64,
    pub history: ALHistory,
}

pub fn al_comparison(exp: &Experiment, truth: &SimulationResult) -> Result<Vec<AlRun>> {
    let c = &exp.config;
    let b = &c.benchmark;
    let spatial = exp.spatial_model(c.kernel, None)?;
    let mut runs = Vec::new();
    for k in 0..b.al_seeds {
        let seed = c.seed + k as u64;
        for &strategy in &b.al_strategies {
            let al = c.active_learning.to_al_config(strategy, seed);
            let history = run_active_learning(truth, b.al_noise, &exp.mesh, &spatial, &al, &c.fit_config(seed))?;
            runs.push(AlRun { seed, history });
        }
    }
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlSummary {
    /// Median final RE per strategy.
    pub medians: BTreeMap<String, f64>,
    pub adaptive_beats_random: Option<bool>,
    /// A-AL within 0.02 of the better of U-AL and S-AL.
    pub adaptive_within_margin: Option<bool>,
}

pub fn al_summary(runs: &[AlRun]) -> AlSummary {
    let mut finals: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in runs {
        finals
            .entry(r.history.strategy.to_string())
            .or_default()
            .push(r.history.final_re());
    }
    let medians: BTreeMap<String, f64> = finals.iter().map(|(k, v)| (k.clone(), median(v))).collect();
    let get = |s: Strategy| medians.get(&s.to_string()).copied();
    let a = get(Strategy::Adaptive);
    let best_other = match (get(Strategy::Uncertainty), get(Strategy::SpaceFilling)) {
        (Some(u), Some(s)) => Some(u.min(s)),
        (u, s) => u.or(s),
    };
    AlSummary {
        adaptive_beats_random: a.zip(get(Strategy::Random)).map(|(a, r)| a < r),
        adaptive_within_margin: a.zip(best_other).map(|(a, o)| a <= o + 0.02),
        medians,
    }
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("eigenpairs,replication,seed,RE\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{:?}\n", r.eigenpairs, r.replication, r.seed, r.re));
    }
    out
}

fn kernel_csv(rows: &[KernelRow]) -> String {
    let mut out = String::from("kernel,size,noise,replication,seed,RE\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:?},{},{},{:?}\n",
            r.kernel, r.size, r.noise, r.replication, r.seed, r.re
        ));
    }
    out
}

fn al_csvs(runs: &[AlRun]) -> (String, String) {
    let mut finals = String::from("strategy,seed,initial_RE,final_RE\n");
    let mut curves = String::from("strategy,seed,round,N_plus,RE\n");
    for r in runs {
        let h = &r.history;
        finals.push_str(&format!(
            "{},{},{:?},{:?}\n",
            h.strategy,
            r.seed,
            h.initial_re,
            h.final_re()
        ));
        curves.push_str(&format!("{},{},0,0,{:?}\n", h.strategy, r.seed, h.initial_re));
        for rec in &h.rounds {
            curves.push_str(&format!(
                "{},{},{},{},{:?}\n",
                h.strategy, r.seed, rec.round, rec.n_plus, rec.re
            ));
        }
    }
    (finals, curves)
}

/// Runs the requested sections and writes their CSVs plus `report.json`.
/// CSVs hold only deterministic quantities; wall times go to the report.
pub fn run(exp: &Experiment, out: &Path, sections: &[Section]) -> Result<serde_json::Value> {
    let total = Instant::now();
    let truth = exp.truth()?;
    let mut report = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": exp.config_hash(),
        "mesh": exp.config.mesh,
        "num_vertices": exp.num_vertices(),
        "num_times": truth.num_times(),
        "seed": exp.config.seed,
    });
    let mut wall = serde_json::Map::new();

    if sections.contains(&Section::Sweep) {
        let start = Instant::now();
        let rows = eigen_sweep(exp, &truth)?;
        write_text(&out.join("eigen_sweep.csv"), &sweep_csv(&rows))?;
        report["eigen_sweep"] = json!(sweep_shape(&rows));
        wall.insert("eigen_sweep".into(), json!(start.elapsed().as_secs_f64()));
    }
    if sections.contains(&Section::Kernels) {
        let start = Instant::now();
        let rows = kernel_grid(exp, &truth)?;
        write_text(&out.join("kernel_grid.csv"), &kernel_csv(&rows))?;
        report["kernel_comparison"] = json!(kernel_summary(&rows));
        wall.insert("kernel_comparison".into(), json!(start.elapsed().as_secs_f64()));
    }
    if sections.contains(&Section::Al) {
        let start = Instant::now();
        let runs = al_comparison(exp, &truth)?;
        let (finals, curves) = al_csvs(&runs);
        write_text(&out.join("al_final.csv"), &finals)?;
        write_text(&out.join("al_curves.csv"), &curves)?;
        for r in &runs {
            let name = format!("al_history_{}_seed{}.csv", strategy_slug(r.history.strategy), r.seed);
            write_text(&out.join(name), &crate::commands::history_csv(&r.history))?;
        }
        report["active_learning"] = json!(al_summary(&runs));
        wall.insert("active_learning".into(), json!(start.elapsed().as_secs_f64()));
    }
    wall.insert("total".into(), json!(total.elapsed().as_secs_f64()));
    report["wall_seconds"] = serde_json::Value::Object(wall);
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}
