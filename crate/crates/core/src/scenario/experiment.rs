//! Latency against the number of control nodes and against workflow size.
//!
//! A trial draws one network, master, workflow, offer set and control-node
//! permutation. Control sets are prefixes of that permutation, so the sets of
//! one trial are nested. "Latency" here is the end-to-end runtime of the
//! selected composition; its network share is reported alongside.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_offers, generate_workflow, OfferGenConfig, WorkflowGenConfig};
use crate::error::{Error, Result};
use crate::network::{control_permutation, generate_network, LocationId, NetworkParams};
use crate::optimize::{Algorithm, GaConfig};
use crate::problem::{ControlPlan, Problem};
use crate::rng;
use crate::utility::UtilitySpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub locations: usize,
    pub network: NetworkParams,
    pub workflow: WorkflowGenConfig,
    pub offers: OfferGenConfig,
    #[serde(rename = "inputMB")]
    pub input_mb: f64,
    /// Any of `brute`, `dijkstra`, `ga`, `netga`.
    pub algorithms: Vec<String>,
    /// Also run every algorithm with a control node at every location ("[o]").
    pub unlimited: bool,
    pub ga: GaConfig,
    /// Latency-vs-controls: fixed workflow size and the slave counts to sweep.
    pub workflow_size: usize,
    pub control_counts: Vec<usize>,
    /// Latency-vs-size: sizes to sweep at a fixed slave count.
    pub sizes: Vec<usize>,
    pub size_control_count: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            trials: 20,
            locations: 1000,
            network: NetworkParams::default(),
            workflow: WorkflowGenConfig::sequential(),
            offers: OfferGenConfig::default(),
            input_mb: 0.5,
            algorithms: vec!["dijkstra".into(), "ga".into(), "netga".into()],
            unlimited: true,
            ga: GaConfig::default(),
            workflow_size: 10,
            control_counts: vec![0, 8, 64, 256],
            sizes: vec![10, 20, 40, 80],
            size_control_count: 64,
        }
    }
}

impl ExperimentConfig {
    fn algorithms(&self) -> Result<Vec<Algorithm>> {
        self.algorithms
            .iter()
            .map(|a| Algorithm::parse(a).ok_or_else(|| Error::Config(format!("unknown algorithm {a:?}"))))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.locations == 0 {
            return Err(Error::Parameter("need at least one trial and one location".into()));
        }
        let max_k = self.control_counts.iter().chain([&self.size_control_count]).max().copied().unwrap_or(0);
        if max_k >= self.locations {
            return Err(Error::Parameter(format!("{max_k} slaves need more than {} locations", self.locations)));
        }
        Ok(())
    }
}

/// One CSV row: mean over trials at one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub algo: String,
    /// Slave count or workflow size.
    pub x: usize,
    pub trials: usize,
    pub mean_latency: f64,
    pub stdev: f64,
    pub mean_network_ms: f64,
}

/// The random instance of one trial, with a centralized plan.
pub struct Trial {
    pub problem: Problem,
    /// Candidate slaves in deployment order (the master excluded).
    pub permutation: Vec<LocationId>,
    pub seed: u64,
}

impl Trial {
    pub fn with_slaves(&self, k: usize) -> Result<Problem> {
        let slaves = self.permutation[..k].to_vec();
        self.problem.with_plan(ControlPlan { master: self.problem.plan.master, slaves })
    }
}

pub fn build_trial(cfg: &ExperimentConfig, trial: usize, size: usize) -> Result<Trial> {
    let s = rng::derive_seed(cfg.seed, &[trial as u64]);
    let net = generate_network(cfg.locations, rng::derive_seed(s, &[1]), &cfg.network)?;
    let master = net.locations()[rng::stream(s, &[2]).gen_range(0..net.len())].id;
    let wf = generate_workflow(size, rng::derive_seed(s, &[3, size as u64]), &cfg.workflow)?;
    let offers = generate_offers(&wf, &net, &cfg.offers, rng::derive_seed(s, &[4, size as u64]))?;
    let permutation =
        control_permutation(&net, rng::derive_seed(s, &[5])).into_iter().filter(|&l| l != master).collect();
    let problem = Problem::new(
        &wf,
        Arc::new(net),
        offers,
        ControlPlan::centralized(master),
        cfg.input_mb,
        UtilitySpec::runtime_only(),
    )?;
    Ok(Trial { problem, permutation, seed: s })
}

/// (runtime, network share) of the algorithm's pick.
fn solve(algo: Algorithm, p: &Problem, cfg: &ExperimentConfig, seed: u64) -> Result<(f64, f64)> {
    let ga = GaConfig { seed, ..cfg.ga.clone() };
    let q = *algo.run(p, &ga)?.qos();
    Ok((q.runtime_ms, q.latency_ms))
}

fn label(algo: Algorithm, unlimited: bool) -> String {
    if unlimited {
        format!("{}[o]", algo.name())
    } else {
        algo.name().to_owned()
    }
}

/// Sweep points of one trial, in row order: per algorithm, the `xs` then "[o]".
fn points(cfg: &ExperimentConfig, algos: &[Algorithm], xs: &[usize]) -> Vec<(Algorithm, Option<usize>)> {
    let mut out = Vec::new();
    for &a in algos {
        out.extend(xs.iter().map(|&x| (a, Some(x))));
        if cfg.unlimited {
            out.push((a, None));
        }
    }
    out
}

fn summarize(algo: String, x: usize, samples: &[(f64, f64)]) -> ExperimentRow {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let var =
        if samples.len() > 1 { samples.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let net = samples.iter().map(|s| s.1).sum::<f64>() / n;
    ExperimentRow { algo, x, trials: samples.len(), mean_latency: mean, stdev: var.sqrt(), mean_network_ms: net }
}

/// Mean best latency per algorithm and slave count `k`. "[o]" rows carry
/// `k = locations - 1`.
pub fn experiment_latency_vs_controls(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let algos = cfg.algorithms()?;
    let pts = points(cfg, &algos, &cfg.control_counts);
    let per_trial: Vec<Vec<(f64, f64)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let trial = build_trial(cfg, t, cfg.workflow_size)?;
            let unlimited = trial.problem.unlimited_control_variant();
            pts.iter()
                .map(|&(a, k)| {
                    let seed = rng::derive_seed(trial.seed, &[6, k.map_or(u64::MAX, |k| k as u64)]);
                    match k {
                        Some(k) => solve(a, &trial.with_slaves(k)?, cfg, seed),
                        None => solve(a, &unlimited, cfg, seed),
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows(&pts, &per_trial, cfg.locations - 1))
}

/// Mean best latency per algorithm and workflow size at
/// `size_control_count` slaves. "[o]" rows use every location.
pub fn experiment_latency_vs_size(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let algos = cfg.algorithms()?;
    let mut out = Vec::new();
    let pts = points(cfg, &algos, &[cfg.size_control_count]);
    for &size in &cfg.sizes {
        let per_trial: Vec<Vec<(f64, f64)>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let trial = build_trial(cfg, t, size)?;
                let unlimited = trial.problem.unlimited_control_variant();
                let limited = trial.with_slaves(cfg.size_control_count)?;
                pts.iter()
                    .map(|&(a, k)| {
                        let seed = rng::derive_seed(trial.seed, &[7, size as u64, k.is_some() as u64]);
                        solve(a, if k.is_some() { &limited } else { &unlimited }, cfg, seed)
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let labelled: Vec<(Algorithm, Option<usize>)> = pts.iter().map(|&(a, k)| (a, k.map(|_| size))).collect();
        out.extend(rows(&labelled, &per_trial, size));
    }
    // group rows by algorithm, sizes ascending
    out.sort_by(|a, b| a.algo.cmp(&b.algo).then(a.x.cmp(&b.x)));
    Ok(out)
}

fn rows(pts: &[(Algorithm, Option<usize>)], per_trial: &[Vec<(f64, f64)>], unlimited_x: usize) -> Vec<ExperimentRow> {
    pts.iter()
        .enumerate()
        .map(|(i, &(a, x))| {
            let samples: Vec<(f64, f64)> = per_trial.iter().map(|t| t[i]).collect();
            summarize(label(a, x.is_none()), x.unwrap_or(unlimited_x), &samples)
        })
        .collect()
}

/// Writes rows with columns `algo, <x_column>, trials, meanLatency, stdev, meanNetworkMs`.
pub fn write_csv<W: Write>(out: W, x_column: &str, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algo", x_column, "trials", "meanLatency", "stdev", "meanNetworkMs"])?;
    for r in rows {
        w.write_record([
            r.algo.clone(),
            r.x.to_string(),
            r.trials.to_string(),
            r.mean_latency.to_string(),
            r.stdev.to_string(),
            r.mean_network_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            trials: 3,
            locations: 40,
            control_counts: vec![0, 4, 16],
            sizes: vec![3, 5],
            size_control_count: 8,
            ga: GaConfig { generations: 10, population_size: 20, ..GaConfig::default() },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn controls_rows_and_nesting() {
        let rows = experiment_latency_vs_controls(&tiny()).unwrap();
        assert_eq!(rows.len(), 3 * 4);
        assert!(rows.iter().any(|r| r.algo == "dijkstra" && r.x == 0));
        let d: Vec<f64> = rows.iter().filter(|r| r.algo.starts_with("dijkstra")).map(|r| r.mean_latency).collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{d:?}");
    }

    #[test]
    fn csv_is_reproducible() {
        let cfg = tiny();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&mut a, "size", &experiment_latency_vs_size(&cfg).unwrap()).unwrap();
        write_csv(&mut b, "size", &experiment_latency_vs_size(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("algo,size,trials,meanLatency,stdev,meanNetworkMs\n"));
        assert!(text.contains("netga-like,5,3,"));
    }
}
