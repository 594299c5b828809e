//! Random scenarios and the experiment drivers.
//!
//! Every generator is a pure function of its seed and configuration.
//! Defaults are desk-scale choices, not values taken from any measurement.

mod experiment;

use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use experiment::{
    build_trial, experiment_latency_vs_controls, experiment_latency_vs_size, write_csv, ExperimentConfig,
    ExperimentRow, Trial,
};

use crate::error::{Error, Result};
use crate::network::{control_permutation, generate_network, NetworkModel, NetworkParams};
use crate::problem::{ControlPlan, Problem};
use crate::rng;
use crate::sla::{OfferCatalog, PiecewiseLinear, ServiceOffer, SlaProfile};
use crate::utility::UtilitySpec;
use crate::workflow::{PatternKind, TaskId, WorkflowExpr};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct WorkflowGenConfig {
    /// Relative weights of the patterns used to split a group of tasks.
    pub seq_weight: f64,
    pub and_weight: f64,
    pub xor_weight: f64,
    pub or_weight: f64,
    /// Chance that a block is wrapped in a loop; loops are never nested.
    pub loop_probability: f64,
    pub loop_count: u32,
    pub max_branches: usize,
    /// Generate a flat sequence instead.
    pub sequential: bool,
}

impl Default for WorkflowGenConfig {
    fn default() -> Self {
        WorkflowGenConfig {
            seq_weight: 4.0,
            and_weight: 2.0,
            xor_weight: 1.0,
            or_weight: 1.0,
            loop_probability: 0.1,
            loop_count: 2,
            max_branches: 3,
            sequential: false,
        }
    }
}

impl WorkflowGenConfig {
    pub fn sequential() -> Self {
        WorkflowGenConfig { sequential: true, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let w = [self.seq_weight, self.and_weight, self.xor_weight, self.or_weight];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Parameter("pattern weights must be >= 0 with a positive sum".into()));
        }
        if !(0.0..=1.0).contains(&self.loop_probability) || self.loop_count == 0 || self.max_branches < 2 {
            return Err(Error::Parameter("need loop probability in [0, 1], loop count >= 1, max branches >= 2".into()));
        }
        Ok(())
    }
}

/// Task ids `t1..tn`.
pub fn task_names(n: usize) -> Vec<TaskId> {
    (1..=n).map(|i| TaskId::new(format!("t{i}"))).collect()
}

/// Random workflow over `size` distinct tasks.
///
/// A group of tasks is either a single service or split at random cut points
/// into 2..=`max_branches` parts combined by a randomly chosen pattern.
pub fn generate_workflow(size: usize, seed: u64, cfg: &WorkflowGenConfig) -> Result<WorkflowExpr> {
    if size == 0 {
        return Err(Error::Parameter("workflow size must be at least 1".into()));
    }
    cfg.validate()?;
    let tasks = task_names(size);
    if cfg.sequential {
        return Ok(WorkflowExpr::seq(tasks.iter().map(|t| WorkflowExpr::service(t.as_str())).collect()));
    }
    let mut r = rng::stream(seed, &[0x7766]);
    let kinds = WeightedIndex::new([cfg.seq_weight, cfg.and_weight, cfg.xor_weight, cfg.or_weight])
        .map_err(|e| Error::Parameter(e.to_string()))?;
    Ok(build(&tasks, &mut r, cfg, &kinds, false))
}

fn build(
    tasks: &[TaskId],
    r: &mut ChaCha8Rng,
    cfg: &WorkflowGenConfig,
    kinds: &WeightedIndex<f64>,
    in_loop: bool,
) -> WorkflowExpr {
    let wrap = !in_loop && cfg.loop_probability > 0.0 && r.gen_bool(cfg.loop_probability);
    let n = tasks.len();
    let body = if n == 1 {
        WorkflowExpr::service(tasks[0].as_str())
    } else {
        let kind = [PatternKind::Seq, PatternKind::And, PatternKind::Xor, PatternKind::Or][kinds.sample(r)];
        let parts = r.gen_range(2..=n.min(cfg.max_branches));
        let mut cuts: Vec<usize> = sample(r, n - 1, parts - 1).into_iter().map(|c| c + 1).collect();
        cuts.sort_unstable();
        cuts.push(n);
        let mut children = Vec::with_capacity(parts);
        let mut lo = 0;
        for hi in cuts {
            let child = build(&tasks[lo..hi], r, cfg, kinds, in_loop || wrap);
            match child {
                // flatten directly nested sequences
                WorkflowExpr::Pattern(p) if kind == PatternKind::Seq && p.kind == PatternKind::Seq => {
                    children.extend(p.children)
                }
                c => children.push(c),
            }
            lo = hi;
        }
        WorkflowExpr::pattern(kind, children)
    };
    if wrap {
        WorkflowExpr::repeat(vec![body], cfg.loop_count)
    } else {
        body
    }
}

/// Inclusive range `[min, max]` sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Span(pub f64, pub f64);

impl Span {
    fn validate(&self, what: &str) -> Result<()> {
        if !(self.0.is_finite() && self.1.is_finite() && self.0 <= self.1) {
            return Err(Error::Parameter(format!("{what}: need finite min <= max, got [{}, {}]", self.0, self.1)));
        }
        Ok(())
    }

    fn sample(&self, r: &mut ChaCha8Rng) -> f64 {
        if self.0 == self.1 {
            self.0
        } else {
            r.gen_range(self.0..=self.1)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct OfferGenConfig {
    pub min_candidates: usize,
    pub max_candidates: usize,
    pub exec_base_ms: Span,
    #[serde(rename = "execMsPerMB")]
    pub exec_ms_per_mb: Span,
    /// Output/input size ratio, drawn once per task and shared by its offers.
    pub output_ratio: Span,
    pub cost: Span,
    pub availability: Span,
}

impl Default for OfferGenConfig {
    fn default() -> Self {
        OfferGenConfig {
            min_candidates: 2,
            max_candidates: 5,
            exec_base_ms: Span(20.0, 200.0),
            exec_ms_per_mb: Span(0.0, 20.0),
            output_ratio: Span(0.8, 1.25),
            cost: Span(1.0, 10.0),
            availability: Span(0.95, 1.0),
        }
    }
}

impl OfferGenConfig {
    fn validate(&self) -> Result<()> {
        if self.min_candidates == 0 || self.min_candidates > self.max_candidates {
            return Err(Error::Parameter("need 1 <= min candidates <= max candidates".into()));
        }
        self.exec_base_ms.validate("execBaseMs")?;
        self.exec_ms_per_mb.validate("execMsPerMB")?;
        self.output_ratio.validate("outputRatio")?;
        self.cost.validate("cost")?;
        self.availability.validate("availability")?;
        if self.exec_base_ms.0 < 0.0 || self.exec_ms_per_mb.0 < 0.0 || self.output_ratio.0 < 0.0 || self.cost.0 < 0.0 {
            return Err(Error::Parameter("SLA ranges must be non-negative".into()));
        }
        if self.availability.0 < 0.0 || self.availability.1 > 1.0 {
            return Err(Error::Parameter("availability must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Random offers for every task of `wf` at uniformly chosen locations.
/// Offer ids are `<task>.s<j>`.
pub fn generate_offers(wf: &WorkflowExpr, net: &NetworkModel, cfg: &OfferGenConfig, seed: u64) -> Result<OfferCatalog> {
    cfg.validate()?;
    let mut r = rng::stream(seed, &[0x6f66]);
    let locations = net.locations();
    let mut offers = Vec::new();
    for task in wf.tasks() {
        let count = r.gen_range(cfg.min_candidates..=cfg.max_candidates);
        let ratio = cfg.output_ratio.sample(&mut r);
        for j in 1..=count {
            let location = locations[r.gen_range(0..locations.len())].id;
            let sla = SlaProfile {
                exec: PiecewiseLinear::linear(cfg.exec_base_ms.sample(&mut r), cfg.exec_ms_per_mb.sample(&mut r)),
                output: PiecewiseLinear::linear(0.0, ratio),
                cost: cfg.cost.sample(&mut r),
                availability: cfg.availability.sample(&mut r),
            };
            offers.push(ServiceOffer { id: format!("{task}.s{j}").as_str().into(), task: task.clone(), location, sla });
        }
    }
    OfferCatalog::new(offers)
}

/// Bounds for [`small_problem`].
#[derive(Clone, Debug, PartialEq)]
pub struct SmallProblemSpec {
    pub max_tasks: usize,
    pub max_candidates: usize,
    /// Master included.
    pub max_controls: usize,
    pub locations: usize,
    pub sequential: bool,
    /// Limit on execution-graph nodes (start and end included).
    pub max_nodes: usize,
    pub max_search_space: f64,
    pub input_mb: f64,
}

impl Default for SmallProblemSpec {
    fn default() -> Self {
        SmallProblemSpec {
            max_tasks: 4,
            max_candidates: 4,
            max_controls: 3,
            locations: 12,
            sequential: false,
            max_nodes: 20,
            max_search_space: 1e6,
            input_mb: 0.5,
        }
    }
}

/// A random runtime-only problem within `spec`. Task count, candidates per
/// task and control-node count are drawn uniformly from `1..=max`; draws that
/// exceed the node or search-space limit are redrawn from a derived seed.
pub fn small_problem(spec: &SmallProblemSpec, seed: u64) -> Result<Problem> {
    if spec.max_tasks == 0 || spec.max_candidates == 0 || spec.max_controls == 0 || spec.locations == 0 {
        return Err(Error::Parameter("small problem bounds must be >= 1".into()));
    }
    let wf_cfg = if spec.sequential { WorkflowGenConfig::sequential() } else { WorkflowGenConfig::default() };
    for attempt in 0..1000u64 {
        let s = rng::derive_seed(seed, &[attempt]);
        let mut r = rng::stream(s, &[0]);
        let net = generate_network(spec.locations, rng::derive_seed(s, &[1]), &NetworkParams::default())?;
        let tasks = r.gen_range(1..=spec.max_tasks);
        let wf = generate_workflow(tasks, rng::derive_seed(s, &[2]), &wf_cfg)?;
        let offer_cfg = OfferGenConfig { min_candidates: 1, max_candidates: spec.max_candidates, ..Default::default() };
        let offers = generate_offers(&wf, &net, &offer_cfg, rng::derive_seed(s, &[3]))?;
        let n_controls = r.gen_range(1..=spec.max_controls.min(net.len()));
        let perm = control_permutation(&net, rng::derive_seed(s, &[4]));
        let plan = ControlPlan { master: perm[0], slaves: perm[1..n_controls].to_vec() };
        let p = Problem::new(&wf, Arc::new(net), offers, plan, spec.input_mb, UtilitySpec::runtime_only())?;
        if p.graph.len() <= spec.max_nodes && p.search_space_size() <= spec.max_search_space {
            return Ok(p);
        }
    }
    Err(Error::Parameter("no instance within the bounds after 1000 draws".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::ExecGraph;

    #[test]
    fn small_problems_respect_bounds() {
        let spec = SmallProblemSpec::default();
        for seed in 0..20 {
            let p = small_problem(&spec, seed).unwrap();
            assert!(p.tasks().len() <= 4 && p.controls().len() <= 3 && p.graph.len() <= 20);
            assert!((0..p.tasks().len()).all(|t| (1..=4).contains(&p.candidates(t).len())));
        }
    }

    #[test]
    fn workflow_size_and_determinism() {
        let cfg = WorkflowGenConfig::default();
        for seed in 0..50 {
            let a = generate_workflow(10, seed, &cfg).unwrap();
            assert_eq!(a, generate_workflow(10, seed, &cfg).unwrap());
            assert_eq!(a.service_count(), 10);
            assert_eq!(a.tasks().len(), 10);
            a.validate_source().unwrap();
        }
        assert!(generate_workflow(0, 1, &cfg).is_err());
    }

    #[test]
    fn size_80_normalizes() {
        let wf = generate_workflow(80, 5, &WorkflowGenConfig::default()).unwrap();
        let g = ExecGraph::from_normalized(&wf.normalize().unwrap()).unwrap();
        assert!(g.topological_order().is_ok());
    }

    #[test]
    fn offers_reference_network() {
        let net = generate_network(30, 2, &NetworkParams::default()).unwrap();
        let wf = generate_workflow(8, 3, &WorkflowGenConfig::default()).unwrap();
        let cfg = OfferGenConfig { min_candidates: 1, max_candidates: 1, ..Default::default() };
        let offers = generate_offers(&wf, &net, &cfg, 4).unwrap();
        assert_eq!(offers.len(), 8);
        assert!(offers.offers().all(|o| net.contains(o.location)));
        let again = generate_offers(&wf, &net, &cfg, 4).unwrap();
        assert_eq!(serde_json::to_string(&offers).unwrap(), serde_json::to_string(&again).unwrap());
    }
}
