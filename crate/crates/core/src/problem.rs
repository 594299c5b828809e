//! A composition problem: workflow, network, offers, deployed control nodes
//! and the utility to maximize. Optimizers search over [`Genome`]s, the
//! index form of an [`Assignment`].

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{self, aggregate_tree, Behavior, Binding, NodeBinding, Simulation};
use crate::error::{Error, Result};
use crate::network::{LocationId, NetworkModel};
use crate::sla::{OfferCatalog, QosVector, ServiceId, ServiceOffer};
use crate::utility::{utility, QosBounds, UtilitySpec};
use crate::workflow::{AtomicKind, ExecGraph, NodeRef, TaskId, WorkflowExpr};

/// The master plus the deployed slave control nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlPlan {
    pub master: LocationId,
    #[serde(default)]
    pub slaves: Vec<LocationId>,
}

impl ControlPlan {
    /// Standard architecture: everything goes through the master.
    pub fn centralized(master: LocationId) -> Self {
        ControlPlan { master, slaves: Vec::new() }
    }

    /// Master first, then the slaves in order, without duplicates.
    pub fn controls(&self) -> Vec<LocationId> {
        let mut out = vec![self.master];
        for &s in &self.slaves {
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }

    pub fn allows(&self, loc: LocationId) -> bool {
        loc == self.master || self.slaves.contains(&loc)
    }
}

/// Chosen service per task and control node per atomic node.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assignment {
    pub services: BTreeMap<TaskId, ServiceId>,
    /// May omit the start and end nodes, which always use the master.
    pub controls: BTreeMap<NodeRef, LocationId>,
}

/// Resolves an assignment into per-node bindings for the engine.
pub fn resolve_binding<'a>(
    graph: &ExecGraph,
    plan: &ControlPlan,
    catalog: &'a OfferCatalog,
    assignment: &Assignment,
) -> Result<Binding<'a>> {
    let mut nodes = Vec::with_capacity(graph.len());
    for (i, node) in graph.nodes().iter().enumerate() {
        let pinned = i == graph.start() || i == graph.end();
        let control = match assignment.controls.get(&node.id) {
            Some(&c) if pinned && c != plan.master => {
                return Err(Error::Config(format!("{} must be controlled by the master {}", node.id, plan.master)))
            }
            Some(&c) => c,
            None if pinned => plan.master,
            None => return Err(Error::Config(format!("no control node assigned to {}", node.id))),
        };
        if !plan.allows(control) {
            return Err(Error::Config(format!("{control} is not a deployed control node (node {})", node.id)));
        }
        let b = match &node.kind {
            AtomicKind::Service { task } => {
                let sid = assignment
                    .services
                    .get(task)
                    .ok_or_else(|| Error::Config(format!("no service selected for task {task}")))?;
                let offer = catalog
                    .for_task(task)
                    .iter()
                    .find(|o| &o.id == sid)
                    .ok_or_else(|| Error::Config(format!("service {sid} does not implement task {task}")))?;
                NodeBinding { location: offer.location, control, behavior: Behavior::Service(offer) }
            }
            AtomicKind::Logic { exec_ms, .. } => {
                NodeBinding { location: control, control, behavior: Behavior::Logic { exec_ms: *exec_ms } }
            }
        };
        nodes.push(b);
    }
    Ok(Binding { nodes })
}

/// Index form of an assignment: `services[t]` indexes the candidates of the
/// t-th task (sorted by id), `controls[j]` indexes [`Problem::controls`] for
/// the j-th free node (every node but start and end, in graph order).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Genome {
    pub services: Vec<u32>,
    pub controls: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub qos: QosVector,
    pub utility: f64,
}

#[derive(Clone, Debug)]
pub struct Problem {
    /// Normalized workflow.
    pub workflow: WorkflowExpr,
    pub graph: ExecGraph,
    pub network: Arc<NetworkModel>,
    pub catalog: OfferCatalog,
    pub plan: ControlPlan,
    /// Size of the workflow input handed to the start node.
    pub input_mb: f64,
    pub utility: UtilitySpec,
    pub bounds: QosBounds,
    tasks: Vec<TaskId>,
    task_of_node: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
    controls: Vec<LocationId>,
}

impl Problem {
    /// Builds a problem from a source (not yet normalized) workflow.
    pub fn new(
        source: &WorkflowExpr,
        network: Arc<NetworkModel>,
        catalog: OfferCatalog,
        plan: ControlPlan,
        input_mb: f64,
        utility: UtilitySpec,
    ) -> Result<Self> {
        let workflow = source.normalize()?;
        let graph = ExecGraph::from_normalized(&workflow)?;
        let tasks: Vec<TaskId> = workflow.tasks().into_iter().collect();
        catalog.check_references(&tasks, |l| network.contains(l))?;
        if let Some(t) = tasks.iter().find(|t| catalog.for_task(t).is_empty()) {
            return Err(Error::Config(format!("task {t} has no service offers")));
        }
        for loc in plan.controls() {
            if !network.contains(loc) {
                return Err(Error::Config(format!("control node {loc} is not a network location")));
            }
        }
        if !(input_mb.is_finite() && input_mb >= 0.0) {
            return Err(Error::Parameter(format!("input size must be finite and >= 0, got {input_mb}")));
        }
        utility.validate()?;

        let task_of_node =
            graph.nodes().iter().map(|n| n.task().map(|t| tasks.binary_search(t).expect("task listed"))).collect();
        let free_nodes = (0..graph.len()).filter(|&i| i != graph.start() && i != graph.end()).collect();
        let controls = plan.controls();
        let mut p = Problem {
            workflow,
            graph,
            network,
            catalog,
            plan,
            input_mb,
            utility,
            bounds: QosBounds { lo: [0.0; 4], hi: [0.0; 4] },
            tasks,
            task_of_node,
            free_nodes,
            controls,
        };
        p.bounds = p.estimate_bounds();
        Ok(p)
    }

    pub fn tasks(&self) -> &[TaskId] {
        &self.tasks
    }

    pub fn candidates(&self, task: usize) -> &[ServiceOffer] {
        self.catalog.for_task(&self.tasks[task])
    }

    pub fn task_of_node(&self, node: usize) -> Option<usize> {
        self.task_of_node[node]
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn controls(&self) -> &[LocationId] {
        &self.controls
    }

    /// Same problem with a different set of deployed control nodes.
    pub fn with_plan(&self, plan: ControlPlan) -> Result<Self> {
        for loc in plan.controls() {
            if !self.network.contains(loc) {
                return Err(Error::Config(format!("control node {loc} is not a network location")));
            }
        }
        let mut p = self.clone();
        p.controls = plan.controls();
        p.plan = plan;
        Ok(p)
    }

    /// The same problem where a control node may be deployed at every
    /// network location.
    pub fn unlimited_control_variant(&self) -> Self {
        let master = self.plan.master;
        let slaves = self.network.ids().filter(|&l| l != master).collect();
        self.with_plan(ControlPlan { master, slaves }).expect("all locations exist")
    }

    /// Number of distinct assignments.
    pub fn search_space_size(&self) -> f64 {
        let services: f64 = (0..self.tasks.len()).map(|t| self.candidates(t).len() as f64).product();
        services * (self.controls.len() as f64).powi(self.free_nodes.len() as i32)
    }

    pub fn binding(&self, g: &Genome) -> Binding<'_> {
        let mut controls = vec![self.plan.master; self.graph.len()];
        for (j, &node) in self.free_nodes.iter().enumerate() {
            controls[node] = self.controls[g.controls[j] as usize];
        }
        let nodes = self
            .graph
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let control = controls[i];
                match (&n.kind, self.task_of_node[i]) {
                    (AtomicKind::Service { .. }, Some(t)) => {
                        let offer = &self.candidates(t)[g.services[t] as usize];
                        NodeBinding { location: offer.location, control, behavior: Behavior::Service(offer) }
                    }
                    (AtomicKind::Logic { exec_ms, .. }, _) => {
                        NodeBinding { location: control, control, behavior: Behavior::Logic { exec_ms: *exec_ms } }
                    }
                    (AtomicKind::Service { .. }, None) => unreachable!("service nodes have a task"),
                }
            })
            .collect();
        Binding { nodes }
    }

    pub fn evaluate(&self, g: &Genome) -> Result<Evaluation> {
        let (qos, _) = engine::compute_qos(&self.graph, &self.network, &self.binding(g), self.input_mb)?;
        Ok(Evaluation { qos, utility: self.score(&qos) })
    }

    pub fn simulate(&self, g: &Genome) -> Result<(QosVector, Simulation)> {
        engine::compute_qos(&self.graph, &self.network, &self.binding(g), self.input_mb)
    }

    pub fn score(&self, q: &QosVector) -> f64 {
        utility(q, &self.utility, &self.bounds)
    }

    pub fn evaluate_assignment(&self, a: &Assignment) -> Result<(QosVector, Simulation)> {
        let binding = resolve_binding(&self.graph, &self.plan, &self.catalog, a)?;
        engine::compute_qos(&self.graph, &self.network, &binding, self.input_mb)
    }

    pub fn assignment(&self, g: &Genome) -> Assignment {
        let services = (0..self.tasks.len())
            .map(|t| (self.tasks[t].clone(), self.candidates(t)[g.services[t] as usize].id.clone()))
            .collect();
        let mut controls: BTreeMap<NodeRef, LocationId> = self
            .free_nodes
            .iter()
            .enumerate()
            .map(|(j, &n)| (self.graph.node(n).id.clone(), self.controls[g.controls[j] as usize]))
            .collect();
        for pinned in [self.graph.start(), self.graph.end()] {
            controls.insert(self.graph.node(pinned).id.clone(), self.plan.master);
        }
        Assignment { services, controls }
    }

    pub fn genome(&self, a: &Assignment) -> Result<Genome> {
        let services =
            (0..self.tasks.len())
                .map(|t| {
                    let sid = a
                        .services
                        .get(&self.tasks[t])
                        .ok_or_else(|| Error::Config(format!("no service selected for task {}", self.tasks[t])))?;
                    self.candidates(t).iter().position(|o| &o.id == sid).map(|i| i as u32).ok_or_else(|| {
                        Error::Config(format!("service {sid} does not implement task {}", self.tasks[t]))
                    })
                })
                .collect::<Result<_>>()?;
        let controls = self
            .free_nodes
            .iter()
            .map(|&n| {
                let id = &self.graph.node(n).id;
                let loc = a.controls.get(id).ok_or_else(|| Error::Config(format!("no control node for {id}")))?;
                self.controls
                    .iter()
                    .position(|c| c == loc)
                    .map(|i| i as u32)
                    .ok_or_else(|| Error::Config(format!("{loc} is not a deployed control node")))
            })
            .collect::<Result<_>>()?;
        Ok(Genome { services, controls })
    }

    /// Normalization ranges that contain the QoS of every assignment.
    ///
    /// Cost and availability use the tree aggregation of the per-task
    /// extremes. Runtime and latency are bounded by the sum over all nodes
    /// and edges of the worst execution time and the worst three-leg network
    /// time at the largest reachable data size.
    fn estimate_bounds(&self) -> QosBounds {
        let g = &self.graph;
        let order = g.topological_order().expect("validated DAG");
        let mut max_in = vec![0.0f64; g.len()];
        let mut max_out = vec![0.0f64; g.len()];
        let mut max_exec = vec![0.0f64; g.len()];
        max_in[g.start()] = self.input_mb;
        for &v in &order {
            match (self.task_of_node[v], &g.node(v).kind) {
                (Some(t), _) => {
                    for o in self.candidates(t) {
                        max_out[v] = max_out[v].max(o.sla.output.max_on(max_in[v]));
                        max_exec[v] = max_exec[v].max(o.sla.exec.max_on(max_in[v]));
                    }
                }
                (None, AtomicKind::Logic { exec_ms, .. }) => {
                    max_out[v] = max_in[v];
                    max_exec[v] = *exec_ms;
                }
                (None, AtomicKind::Service { .. }) => unreachable!(),
            }
            for &w in &g.node(v).outgoing {
                max_in[w] += max_out[v];
            }
        }
        let max_delay = self.network.max_delay_bound();
        let min_rate = self.network.min_rate_bound();
        let leg = |size: f64| if min_rate.is_finite() { max_delay + size * 1000.0 / min_rate } else { max_delay };
        let net_hi: f64 = g.edges().map(|(v, _)| 3.0 * leg(max_out[v])).sum();
        let runtime_hi = max_exec.iter().sum::<f64>() + net_hi;

        let extremes = |pick_max: bool| -> Vec<QosVector> {
            (0..g.len())
                .map(|v| match self.task_of_node[v] {
                    Some(t) => {
                        let c = self.candidates(t);
                        let fold = |f: fn(&ServiceOffer) -> f64| {
                            let it = c.iter().map(f);
                            if pick_max {
                                it.fold(f64::NEG_INFINITY, f64::max)
                            } else {
                                it.fold(f64::INFINITY, f64::min)
                            }
                        };
                        QosVector {
                            cost: fold(|o| o.sla.cost),
                            availability: fold(|o| o.sla.availability),
                            ..QosVector::NEUTRAL
                        }
                    }
                    None => QosVector::NEUTRAL,
                })
                .collect()
        };
        let lo = aggregate_tree(g.tree(), &extremes(false));
        let hi = aggregate_tree(g.tree(), &extremes(true));
        QosBounds::new(
            QosVector { runtime_ms: 0.0, cost: lo.cost, availability: lo.availability, latency_ms: 0.0 },
            QosVector { runtime_ms: runtime_hi, cost: hi.cost, availability: hi.availability, latency_ms: net_hi },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn assignment_round_trip() {
        let p = fixtures::fig1_problem(ControlPlan::centralized(fixtures::FRANCE_USER), false);
        let g = Genome { services: vec![1, 0, 1], controls: vec![0; p.free_nodes().len()] };
        let a = p.assignment(&g);
        assert_eq!(p.genome(&a).unwrap(), g);
        let (q1, _) = p.evaluate_assignment(&a).unwrap();
        assert_eq!(q1, p.evaluate(&g).unwrap().qos);
    }

    #[test]
    fn missing_pick_is_config_error() {
        let p = fixtures::fig1_problem(ControlPlan::centralized(fixtures::FRANCE_USER), false);
        let mut a = p.assignment(&Genome { services: vec![0, 0, 0], controls: vec![0; p.free_nodes().len()] });
        a.controls.remove(&NodeRef::new("A"));
        assert!(matches!(p.evaluate_assignment(&a), Err(Error::Config(_))));
        let mut b = p.assignment(&Genome { services: vec![0, 0, 0], controls: vec![0; p.free_nodes().len()] });
        b.services.remove(&TaskId::new("X"));
        assert!(matches!(p.evaluate_assignment(&b), Err(Error::Config(_))));
    }

    #[test]
    fn undeployed_control_rejected() {
        let p = fixtures::fig1_problem(ControlPlan::centralized(fixtures::FRANCE_USER), false);
        let mut a = p.assignment(&Genome { services: vec![0, 0, 0], controls: vec![0; p.free_nodes().len()] });
        a.controls.insert(NodeRef::new("A"), fixtures::JAPAN);
        assert!(matches!(p.evaluate_assignment(&a), Err(Error::Config(_))));
        a.controls.insert(NodeRef::new("A"), fixtures::FRANCE_USER);
        a.controls.insert(NodeRef::new(crate::workflow::END), fixtures::JAPAN);
        assert!(matches!(p.evaluate_assignment(&a), Err(Error::Config(_))));
    }

    #[test]
    fn bounds_contain_every_assignment() {
        let p = fixtures::fig1_problem(
            ControlPlan { master: fixtures::FRANCE_USER, slaves: vec![fixtures::JAPAN, fixtures::FRANCE_DC] },
            false,
        );
        let b = p.bounds;
        crate::optimize::enumerate(&p, |_, e| {
            for a in crate::utility::Attribute::ALL {
                let (lo, hi) = b.range(a);
                let v = a.of(&e.qos);
                assert!(lo <= v && v <= hi, "{a:?}: {v} not in [{lo}, {hi}]");
            }
        })
        .unwrap();
    }

    #[test]
    fn unlimited_variant_covers_every_location() {
        let p = fixtures::fig1_problem(ControlPlan::centralized(fixtures::FRANCE_USER), false);
        let u = p.unlimited_control_variant();
        assert_eq!(u.controls().len(), p.network.len());
    }
}
