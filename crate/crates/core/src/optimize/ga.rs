//! Genetic algorithms over [`Genome`]s.
//!
//! The chromosome is the service genes (one per task) followed by the
//! control genes (one per free node). Both variants share tournament
//! selection, one-point crossover, per-gene mutation and elitism; they differ
//! in initialization and in how a mutated gene is redrawn.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Solution;
use crate::error::{Error, Result};
use crate::network::LocationId;
use crate::problem::{Evaluation, Genome, Problem};
use crate::rng;
use crate::sla::evaluate_qos;
use crate::workflow::AtomicKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability; `None` means 1 / chromosome length.
    pub mutation_rate: Option<f64>,
    pub tournament_size: usize,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 100,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: None,
            tournament_size: 2,
            elitism: 1,
            seed: 0,
        }
    }
}

impl GaConfig {
    fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Parameter("population size must be at least 2".into()));
        }
        if self.tournament_size == 0 || self.elitism > self.population_size {
            return Err(Error::Parameter("tournament size must be >= 1 and elitism <= population".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || self.mutation_rate.is_some_and(|m| !(0.0..=1.0).contains(&m))
        {
            return Err(Error::Parameter("rates must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GaRun {
    pub best: Solution,
    /// Best utility seen after each generation (index 0 is the initial population).
    pub trace: Vec<f64>,
}

pub fn ga_standard(p: &Problem, cfg: &GaConfig) -> Result<GaRun> {
    run(p, cfg, &Uniform::new(p), 0x6761)
}

pub fn ga_network_aware(p: &Problem, cfg: &GaConfig) -> Result<GaRun> {
    run(p, cfg, &Local::new(p)?, 0x6e67)
}

trait Operators: Sync {
    fn init(&self, p: &Problem, r: &mut ChaCha8Rng) -> Vec<u32>;
    fn mutate(&self, p: &Problem, genes: &mut [u32], gene: usize, r: &mut ChaCha8Rng);
}

fn split(p: &Problem, genes: &[u32]) -> Genome {
    let (s, c) = genes.split_at(p.tasks().len());
    Genome { services: s.to_vec(), controls: c.to_vec() }
}

fn radix(p: &Problem) -> Vec<u32> {
    let mut r: Vec<u32> = (0..p.tasks().len()).map(|t| p.candidates(t).len() as u32).collect();
    r.extend(std::iter::repeat_n(p.controls().len() as u32, p.free_nodes().len()));
    r
}

struct Uniform {
    radix: Vec<u32>,
}

impl Uniform {
    fn new(p: &Problem) -> Self {
        Uniform { radix: radix(p) }
    }
}

impl Operators for Uniform {
    fn init(&self, _p: &Problem, r: &mut ChaCha8Rng) -> Vec<u32> {
        self.radix.iter().map(|&d| r.gen_range(0..d)).collect()
    }

    fn mutate(&self, _p: &Problem, genes: &mut [u32], gene: usize, r: &mut ChaCha8Rng) {
        genes[gene] = r.gen_range(0..self.radix[gene]);
    }
}

/// Locality-biased operators.
///
/// * Service genes are drawn with probability proportional to
///   `1 / (mean exec time + network delay)`, the delay summed to the master
///   and to the services picked for neighboring tasks in the data flow.
/// * Control genes start at the deployed control node nearest to the node's
///   anchor (its service location; for logical nodes the nearest upstream
///   service, or the master). Mutation redraws among the few nearest ones
///   or, half of the time, among all of them.
/// * When a service gene changes, the control genes of that task's nodes
///   follow the new location.
struct Local {
    n_tasks: usize,
    /// Tasks whose services are the closest data-flow neighbors of each task.
    neighbors: Vec<Vec<usize>>,
    /// Whether a task is directly fed by (or feeds) the master's start/end nodes.
    touches_master: Vec<bool>,
    /// Per free node: the task whose service anchors it, if any.
    anchor_task: Vec<Option<usize>>,
    /// Control genes belonging to each task's nodes.
    task_controls: Vec<Vec<usize>>,
    /// Ascending-delay control indices, per anchor location.
    near_controls: HashMap<LocationId, Vec<u32>>,
    /// Smoothing term of the service weights: the task's mean execution time
    /// at the workflow input size (at least 1 ms).
    offset_ms: Vec<f64>,
}

const NEAR: usize = 4;

impl Local {
    fn new(p: &Problem) -> Result<Self> {
        let g = &p.graph;
        let n_tasks = p.tasks().len();
        // nearest service tasks reachable across logical nodes, upstream or downstream
        let reach = |start: usize, forward: bool| -> (Vec<usize>, bool) {
            let mut tasks = Vec::new();
            let mut master = false;
            let mut stack: Vec<usize> =
                if forward { g.node(start).outgoing.clone() } else { g.node(start).incoming.clone() };
            let mut seen = vec![false; g.len()];
            while let Some(v) = stack.pop() {
                if std::mem::replace(&mut seen[v], true) {
                    continue;
                }
                match p.task_of_node(v) {
                    Some(t) => tasks.push(t),
                    None if v == g.start() || v == g.end() => master = true,
                    None => stack.extend(if forward { &g.node(v).outgoing } else { &g.node(v).incoming }),
                }
            }
            (tasks, master)
        };

        let mut neighbors = vec![Vec::new(); n_tasks];
        let mut touches_master = vec![false; n_tasks];
        for v in 0..g.len() {
            if let Some(t) = p.task_of_node(v) {
                for forward in [false, true] {
                    let (ts, m) = reach(v, forward);
                    neighbors[t].extend(ts.into_iter().filter(|&u| u != t));
                    touches_master[t] |= m;
                }
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }

        let mut anchor_task = Vec::with_capacity(p.free_nodes().len());
        let mut task_controls = vec![Vec::new(); n_tasks];
        for (j, &v) in p.free_nodes().iter().enumerate() {
            let t = match &g.node(v).kind {
                AtomicKind::Service { .. } => p.task_of_node(v),
                AtomicKind::Logic { .. } => reach(v, false).0.first().copied(),
            };
            if let Some(t) = t {
                task_controls[t].push(n_tasks + j);
            }
            anchor_task.push(t);
        }

        let mut anchors: Vec<LocationId> = vec![p.plan.master];
        anchors.extend(p.catalog.offers().map(|o| o.location));
        anchors.sort_unstable();
        anchors.dedup();
        let net = &p.network;
        let controls = p.controls();
        let mut near_controls = HashMap::with_capacity(anchors.len());
        for a in anchors {
            let mut ds: Vec<(f64, u32)> = controls
                .iter()
                .enumerate()
                .map(|(i, &c)| Ok((net.get_network_qos(a, c)?.delay_ms, i as u32)))
                .collect::<Result<_>>()?;
            let keep = NEAR.min(ds.len());
            ds.select_nth_unstable_by(keep - 1, |x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            ds.truncate(keep);
            ds.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            near_controls.insert(a, ds.into_iter().map(|(_, i)| i).collect());
        }
        let offset_ms = (0..n_tasks)
            .map(|t| {
                let c = p.candidates(t);
                let mean = c.iter().map(|o| evaluate_qos(o, p.input_mb).exec_ms).sum::<f64>() / c.len() as f64;
                mean.max(1.0)
            })
            .collect();
        Ok(Local { n_tasks, neighbors, touches_master, anchor_task, task_controls, near_controls, offset_ms })
    }

    fn location(p: &Problem, genes: &[u32], t: usize) -> LocationId {
        p.candidates(t)[genes[t] as usize].location
    }

    /// Draws a service for task `t`; `picked[u]` tells whether task `u` already has a gene.
    fn draw_service(&self, p: &Problem, genes: &[u32], picked: &[bool], t: usize, r: &mut ChaCha8Rng) -> u32 {
        let net = &p.network;
        let weights: Vec<f64> = p
            .candidates(t)
            .iter()
            .map(|o| {
                let mut time = 0.0;
                if self.touches_master[t] {
                    time += net.get_network_qos(p.plan.master, o.location).map_or(0.0, |q| q.delay_ms);
                }
                for &u in self.neighbors[t].iter().filter(|&&u| picked[u]) {
                    let loc = Self::location(p, genes, u);
                    time += net.get_network_qos(loc, o.location).map_or(0.0, |q| q.delay_ms);
                }
                1.0 / (self.offset_ms[t] + time)
            })
            .collect();
        WeightedIndex::new(&weights).map(|w| w.sample(r) as u32).unwrap_or(0)
    }

    fn anchor(&self, p: &Problem, genes: &[u32], j: usize) -> LocationId {
        match self.anchor_task[j] {
            Some(t) => Self::location(p, genes, t),
            None => p.plan.master,
        }
    }

    fn nearest(&self, p: &Problem, genes: &[u32], j: usize) -> &[u32] {
        &self.near_controls[&self.anchor(p, genes, j)]
    }
}

impl Operators for Local {
    fn init(&self, p: &Problem, r: &mut ChaCha8Rng) -> Vec<u32> {
        let mut genes = vec![0u32; self.n_tasks + p.free_nodes().len()];
        let mut picked = vec![false; self.n_tasks];
        // tasks in graph order so neighbors upstream are picked first
        for v in 0..p.graph.len() {
            if let Some(t) = p.task_of_node(v) {
                if !picked[t] {
                    genes[t] = self.draw_service(p, &genes, &picked, t, r);
                    picked[t] = true;
                }
            }
        }
        for j in 0..p.free_nodes().len() {
            genes[self.n_tasks + j] = self.nearest(p, &genes, j)[0];
        }
        genes
    }

    fn mutate(&self, p: &Problem, genes: &mut [u32], gene: usize, r: &mut ChaCha8Rng) {
        if gene < self.n_tasks {
            let all = vec![true; self.n_tasks];
            genes[gene] = self.draw_service(p, genes, &all, gene, r);
            for &cg in &self.task_controls[gene] {
                genes[cg] = self.nearest(p, genes, cg - self.n_tasks)[0];
            }
        } else if r.gen_bool(0.5) {
            let near = self.nearest(p, genes, gene - self.n_tasks);
            genes[gene] = near[r.gen_range(0..near.len())];
        } else {
            genes[gene] = r.gen_range(0..p.controls().len() as u32);
        }
    }
}

fn evaluate_all(p: &Problem, pop: &[Vec<u32>]) -> Result<Vec<Evaluation>> {
    pop.par_iter().map(|g| p.evaluate(&split(p, g))).collect()
}

fn tournament(fit: &[Evaluation], size: usize, r: &mut ChaCha8Rng) -> usize {
    let mut best = r.gen_range(0..fit.len());
    for _ in 1..size {
        let c = r.gen_range(0..fit.len());
        if fit[c].utility > fit[best].utility || (fit[c].utility == fit[best].utility && c < best) {
            best = c;
        }
    }
    best
}

fn run(p: &Problem, cfg: &GaConfig, ops: &dyn Operators, tag: u64) -> Result<GaRun> {
    cfg.validate()?;
    let mut r = rng::stream(cfg.seed, &[tag]);
    let len = p.tasks().len() + p.free_nodes().len();
    let mutation = cfg.mutation_rate.unwrap_or(if len == 0 { 0.0 } else { 1.0 / len as f64 });
    let n = cfg.population_size;

    let mut pop: Vec<Vec<u32>> = (0..n).map(|_| ops.init(p, &mut r)).collect();
    let mut fit = evaluate_all(p, &pop)?;
    let mut evaluations = n as u64;

    let mut best = (pop[0].clone(), fit[0]);
    let update_best = |best: &mut (Vec<u32>, Evaluation), pop: &[Vec<u32>], fit: &[Evaluation]| {
        for (g, e) in pop.iter().zip(fit) {
            if e.utility > best.1.utility {
                *best = (g.clone(), *e);
            }
        }
    };
    update_best(&mut best, &pop, &fit);
    let mut trace = vec![best.1.utility];

    for _ in 0..cfg.generations {
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.sort_by(|&a, &b| fit[b].utility.total_cmp(&fit[a].utility).then(a.cmp(&b)));
        let mut next: Vec<Vec<u32>> = ranked[..cfg.elitism].iter().map(|&i| pop[i].clone()).collect();
        let mut next_fit: Vec<Evaluation> = ranked[..cfg.elitism].iter().map(|&i| fit[i]).collect();

        let mut children = Vec::with_capacity(n - next.len());
        while next.len() + children.len() < n {
            let a = &pop[tournament(&fit, cfg.tournament_size, &mut r)];
            let b = &pop[tournament(&fit, cfg.tournament_size, &mut r)];
            let (mut c1, mut c2) = (a.clone(), b.clone());
            if len > 1 && r.gen::<f64>() < cfg.crossover_rate {
                let cut = r.gen_range(1..len);
                c1[cut..].copy_from_slice(&b[cut..]);
                c2[cut..].copy_from_slice(&a[cut..]);
            }
            for c in [&mut c1, &mut c2] {
                for i in 0..len {
                    if r.gen::<f64>() < mutation {
                        ops.mutate(p, c, i, &mut r);
                    }
                }
            }
            children.push(c1);
            if next.len() + children.len() < n {
                children.push(c2);
            }
        }
        let child_fit = evaluate_all(p, &children)?;
        evaluations += children.len() as u64;
        next.extend(children);
        next_fit.extend(child_fit);
        pop = next;
        fit = next_fit;
        update_best(&mut best, &pop, &fit);
        trace.push(best.1.utility);
    }

    let genome = split(p, &best.0);
    Ok(GaRun { best: Solution::new(p, genome, best.1, evaluations), trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::problem::ControlPlan;

    #[test]
    fn degenerate_space_found_immediately() {
        let p = fixtures::fig3_problem(100.0);
        let single = crate::OfferCatalog::new(vec![p.catalog.find(&"M1".into()).unwrap().clone()]).unwrap();
        let p = Problem::new(
            &crate::WorkflowExpr::service("encode"),
            p.network.clone(),
            single,
            p.plan.clone(),
            100.0,
            Default::default(),
        )
        .unwrap();
        let run = ga_standard(&p, &GaConfig { generations: 3, ..GaConfig::default() }).unwrap();
        assert_eq!(run.trace[0], run.trace[3]);
        assert_eq!(run.best.assignment.services[&"encode".into()].0, "M1");
    }

    #[test]
    fn seeded_runs_repeat() {
        let p = fixtures::fig1_problem(
            ControlPlan { master: fixtures::FRANCE_USER, slaves: vec![fixtures::JAPAN, fixtures::USA] },
            false,
        );
        let cfg = GaConfig { generations: 30, seed: 17, ..GaConfig::default() };
        for f in [ga_standard, ga_network_aware] {
            let a = f(&p, &cfg).unwrap();
            let b = f(&p, &cfg).unwrap();
            assert_eq!(a.trace, b.trace);
            assert_eq!(a.best.assignment, b.best.assignment);
        }
    }

    #[test]
    fn trace_is_monotone() {
        let p = fixtures::fig1_problem(
            ControlPlan { master: fixtures::FRANCE_USER, slaves: vec![fixtures::JAPAN, fixtures::FRANCE_DC] },
            false,
        );
        let run = ga_network_aware(&p, &GaConfig { generations: 20, seed: 3, ..GaConfig::default() }).unwrap();
        assert!(run.trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(run.best.evaluations, 100 + 20 * 99);
    }

    #[test]
    fn bad_config_rejected() {
        let p = fixtures::fig3_problem(1.0);
        assert!(ga_standard(&p, &GaConfig { population_size: 1, ..GaConfig::default() }).is_err());
    }
}
