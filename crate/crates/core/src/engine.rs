//! Two-phase QoS computation.
//!
//! Phase 1 ([`simulate_execution`]) walks the execution graph in ready order
//! and propagates start times across edges. Each edge `v -> w` costs the
//! delay and transfer time of three legs: `v` to its control node `cv`, `cv`
//! to `cw`, and `cw` to `w`. Phase 2 ([`aggregate_tree`]) folds the per-node
//! cost and availability along the workflow tree. The runtime and network
//! latency of the composition always come from phase 1.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{LocationId, NetworkModel};
use crate::rng;
use crate::sla::{evaluate_qos, QosVector, ServiceOffer};
use crate::workflow::{ExecGraph, IndexTree, NodeRef, PatternKind, WorkflowExpr};

#[derive(Clone, Copy, Debug)]
pub enum Behavior<'a> {
    Service(&'a ServiceOffer),
    /// Logical node: fixed processing time, result passes its input through.
    Logic {
        exec_ms: f64,
    },
}

/// Where and how one graph node runs.
#[derive(Clone, Copy, Debug)]
pub struct NodeBinding<'a> {
    /// Location of the node itself: the service's deployment location, or the
    /// control node for logical nodes.
    pub location: LocationId,
    pub control: LocationId,
    pub behavior: Behavior<'a>,
}

/// Per-node bindings, indexed like the graph's nodes.
#[derive(Clone, Debug)]
pub struct Binding<'a> {
    pub nodes: Vec<NodeBinding<'a>>,
}

impl<'a> Binding<'a> {
    pub fn node(&self, i: usize) -> &NodeBinding<'a> {
        &self.nodes[i]
    }
}

/// Result of executing one node for a given input size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeRun {
    pub exec_ms: f64,
    pub output_mb: f64,
    pub cost: f64,
    pub availability: f64,
}

pub fn run_node(b: &NodeBinding<'_>, input_mb: f64) -> NodeRun {
    match b.behavior {
        Behavior::Service(offer) => {
            let inv = evaluate_qos(offer, input_mb);
            NodeRun { exec_ms: inv.exec_ms, output_mb: inv.output_mb, cost: inv.cost, availability: inv.availability }
        }
        Behavior::Logic { exec_ms } => NodeRun { exec_ms, output_mb: input_mb, cost: 0.0, availability: 1.0 },
    }
}

/// Network time of sending `size_mb` along `v -> cv -> cw -> w`, split into
/// (transfer, delay) sums over the three legs.
pub fn edge_network(net: &NetworkModel, v: &NodeBinding<'_>, w: &NodeBinding<'_>, size_mb: f64) -> Result<(f64, f64)> {
    let legs = [
        net.get_network_qos(v.location, v.control)?,
        net.get_network_qos(v.control, w.control)?,
        net.get_network_qos(w.control, w.location)?,
    ];
    let trans = legs.iter().map(|l| l.transfer_ms(size_mb)).sum();
    let delay = legs.iter().map(|l| l.delay_ms).sum();
    Ok((trans, delay))
}

/// How the simulation picks the next node among those that are ready.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VisitOrder {
    AscendingId,
    /// Uniformly random choice; the result must not depend on it.
    Shuffled(u64),
}

/// Timing state of every node after phase 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub exec_start: Vec<f64>,
    pub exec_end: Vec<f64>,
    pub input_mb: Vec<f64>,
    pub result_mb: Vec<f64>,
    /// Execution QoS of each node; `latency_ms` is the network time of the
    /// incoming edge that determined the node's start.
    pub node_qos: Vec<QosVector>,
    /// Network time accumulated on the critical path up to each node's start.
    pub path_network_ms: Vec<f64>,
    pub visit_order: Vec<usize>,
    pub runtime_ms: f64,
    pub latency_ms: f64,
}

/// Phase 1: simulates the execution of `graph` and records when every node
/// starts and ends. The start node receives `input_mb` of workflow input.
pub fn simulate_execution(
    graph: &ExecGraph,
    net: &NetworkModel,
    binding: &Binding<'_>,
    input_mb: f64,
    order: VisitOrder,
) -> Result<Simulation> {
    let n = graph.len();
    if binding.nodes.len() != n {
        return Err(Error::Config(format!("binding covers {} of {n} nodes", binding.nodes.len())));
    }
    let mut exec_start = vec![0.0; n];
    let mut exec_end = vec![0.0; n];
    let mut inputs = vec![0.0; n];
    let mut result = vec![0.0; n];
    let mut path_net = vec![0.0; n];
    let mut in_net = vec![0.0; n];
    let mut node_qos = vec![QosVector::NEUTRAL; n];
    let mut req_in: Vec<usize> = graph.nodes().iter().map(|v| v.incoming.len()).collect();
    let mut visit_order = Vec::with_capacity(n);
    inputs[graph.start()] = input_mb;

    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| req_in[i] == 0).collect();
    let mut shuffle = match order {
        VisitOrder::Shuffled(seed) => Some(rng::stream(seed, &[0x7669_7369])),
        VisitOrder::AscendingId => None,
    };

    while !ready.is_empty() {
        let v = match shuffle.as_mut() {
            None => ready.pop_first().expect("non-empty"),
            Some(r) => {
                let k = r.gen_range(0..ready.len());
                let v = *ready.iter().nth(k).expect("in range");
                ready.remove(&v);
                v
            }
        };
        visit_order.push(v);
        let bv = binding.node(v);
        let run = run_node(bv, inputs[v]);
        exec_end[v] = exec_start[v] + run.exec_ms;
        result[v] = run.output_mb;
        node_qos[v] = QosVector {
            runtime_ms: run.exec_ms,
            cost: run.cost,
            availability: run.availability,
            latency_ms: in_net[v],
        };

        for &w in &graph.node(v).outgoing {
            let (trans, delay) = edge_network(net, bv, binding.node(w), result[v])?;
            let end = exec_end[v] + trans + delay;
            let through = path_net[v] + trans + delay;
            if end > exec_start[w] {
                exec_start[w] = end;
                path_net[w] = through;
                in_net[w] = trans + delay;
            } else if end == exec_start[w] && through > path_net[w] {
                path_net[w] = through;
                in_net[w] = trans + delay;
            }
            req_in[w] -= 1;
            if req_in[w] == 0 {
                // summed in predecessor order so rounding does not depend on the visit order
                inputs[w] = graph.node(w).incoming.iter().map(|&u| result[u]).sum();
                ready.insert(w);
            }
        }
    }

    if visit_order.len() != n {
        let stuck = (0..n).filter(|&i| req_in[i] > 0).map(|i| graph.node(i).id.0.clone()).collect();
        return Err(Error::Cycle(stuck));
    }
    let end = graph.end();
    Ok(Simulation {
        runtime_ms: exec_end[end],
        latency_ms: path_net[end],
        exec_start,
        exec_end,
        input_mb: inputs,
        result_mb: result,
        node_qos,
        path_network_ms: path_net,
        visit_order,
    })
}

/// Phase-2 attributes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    /// Execution time only: sums along sequences, the slowest branch
    /// elsewhere. Equals the simulated runtime when the network is free.
    pub runtime_ms: f64,
    pub cost: f64,
    pub availability: f64,
    /// Hierarchically aggregated network latency. Overestimates on graphs
    /// where parallel branches have unequal in/out delays; the composition's
    /// latency is taken from phase 1 instead.
    pub latency_ms: f64,
}

fn combine(kind: PatternKind, parts: impl Iterator<Item = Aggregate>) -> Aggregate {
    let mut acc: Option<Aggregate> = None;
    for p in parts {
        acc = Some(match acc {
            None => p,
            Some(a) => match kind {
                PatternKind::Seq | PatternKind::Loop => Aggregate {
                    runtime_ms: a.runtime_ms + p.runtime_ms,
                    cost: a.cost + p.cost,
                    availability: a.availability * p.availability,
                    latency_ms: a.latency_ms + p.latency_ms,
                },
                PatternKind::And => Aggregate {
                    runtime_ms: a.runtime_ms.max(p.runtime_ms),
                    cost: a.cost + p.cost,
                    availability: a.availability * p.availability,
                    latency_ms: a.latency_ms.max(p.latency_ms),
                },
                // alternatives: the worst branch
                PatternKind::Xor | PatternKind::Or => Aggregate {
                    runtime_ms: a.runtime_ms.max(p.runtime_ms),
                    cost: a.cost.max(p.cost),
                    availability: a.availability.min(p.availability),
                    latency_ms: a.latency_ms.max(p.latency_ms),
                },
            },
        });
    }
    acc.unwrap_or(Aggregate { runtime_ms: 0.0, cost: 0.0, availability: 1.0, latency_ms: 0.0 })
}

fn leaf(q: &QosVector) -> Aggregate {
    Aggregate { runtime_ms: q.runtime_ms, cost: q.cost, availability: q.availability, latency_ms: q.latency_ms }
}

/// Phase 2 over the graph's index tree.
pub fn aggregate_tree(tree: &IndexTree, per_node: &[QosVector]) -> Aggregate {
    match tree {
        IndexTree::Leaf(i) => leaf(&per_node[*i]),
        IndexTree::Node { kind, children } => combine(*kind, children.iter().map(|c| aggregate_tree(c, per_node))),
    }
}

/// Phase 2 over a workflow tree with per-node QoS given by node name.
pub fn aggregate_hierarchical(wf: &WorkflowExpr, per_node: &BTreeMap<NodeRef, QosVector>) -> Result<Aggregate> {
    match wf {
        WorkflowExpr::Pattern(p) => {
            let parts = p.children.iter().map(|c| aggregate_hierarchical(c, per_node)).collect::<Result<Vec<_>>>()?;
            Ok(combine(p.kind, parts.into_iter()))
        }
        atomic => {
            let id = atomic.atomic_id().expect("atomic");
            per_node.get(id).map(leaf).ok_or_else(|| Error::Config(format!("no QoS for node {id}")))
        }
    }
}

/// Both phases: runtime and latency from the simulation, cost and
/// availability from the hierarchical aggregation.
pub fn compute_qos(
    graph: &ExecGraph,
    net: &NetworkModel,
    binding: &Binding<'_>,
    input_mb: f64,
) -> Result<(QosVector, Simulation)> {
    let sim = simulate_execution(graph, net, binding, input_mb, VisitOrder::AscendingId)?;
    let agg = aggregate_tree(graph.tree(), &sim.node_qos);
    let q = QosVector {
        runtime_ms: sim.runtime_ms,
        cost: agg.cost,
        availability: agg.availability,
        latency_ms: sim.latency_ms,
    };
    Ok((q, sim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sla::SlaProfile;
    use crate::workflow::WorkflowExpr as W;

    fn offer(id: &str, exec: f64, cost: f64, avail: f64) -> ServiceOffer {
        ServiceOffer {
            id: id.into(),
            task: id.into(),
            location: LocationId(0),
            sla: SlaProfile { cost, availability: avail, ..SlaProfile::fixed(exec) },
        }
    }

    fn bind<'a>(graph: &ExecGraph, offers: &'a [ServiceOffer]) -> Binding<'a> {
        let nodes = graph
            .nodes()
            .iter()
            .map(|n| NodeBinding {
                location: LocationId(0),
                control: LocationId(0),
                behavior: match n.task() {
                    Some(t) => Behavior::Service(offers.iter().find(|o| &o.task == t).unwrap()),
                    None => Behavior::Logic { exec_ms: 0.0 },
                },
            })
            .collect();
        Binding { nodes }
    }

    #[test]
    fn degenerate_network_single_service() {
        let g = ExecGraph::from_normalized(&W::service("X").normalize().unwrap()).unwrap();
        let offers = [offer("X", 255.0, 1.0, 1.0)];
        let net = NetworkModel::zero(1);
        let (q, _) = compute_qos(&g, &net, &bind(&g, &offers), 0.0).unwrap();
        assert_eq!(q.runtime_ms, 255.0);
        assert_eq!(q.latency_ms, 0.0);
    }

    #[test]
    fn aggregation_rules() {
        let q = |c: f64, a: f64| QosVector { runtime_ms: 0.0, cost: c, availability: a, latency_ms: 0.0 };
        let per: BTreeMap<NodeRef, QosVector> = [
            ("a".into(), q(1.0, 0.9)),
            ("b".into(), q(2.0, 0.9)),
            ("x".into(), q(5.0, 1.0)),
            ("y".into(), q(7.0, 0.8)),
        ]
        .into_iter()
        .collect();
        let seq = aggregate_hierarchical(&W::seq(vec![W::service("a"), W::service("b")]), &per).unwrap();
        assert_eq!(seq.cost, 3.0);
        let and = aggregate_hierarchical(&W::and(vec![W::service("a"), W::service("b")]), &per).unwrap();
        assert!((and.availability - 0.81).abs() < 1e-15);
        let xor = aggregate_hierarchical(&W::xor(vec![W::service("x"), W::service("y")]), &per).unwrap();
        // brute-force worst branch
        let worst_cost = [5.0f64, 7.0].into_iter().fold(f64::MIN, f64::max);
        assert_eq!(xor.cost, worst_cost);
        assert_eq!(xor.availability, 0.8);
        assert!(aggregate_hierarchical(&W::service("zz"), &per).is_err());
    }

    #[test]
    fn binding_size_mismatch_is_config_error() {
        let g = ExecGraph::from_normalized(&W::service("X").normalize().unwrap()).unwrap();
        let b = Binding { nodes: Vec::new() };
        assert!(matches!(
            simulate_execution(&g, &NetworkModel::zero(1), &b, 0.0, VisitOrder::AscendingId),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn colocated_edge_costs_nothing() {
        let net = crate::network::generate_network(4, 1, &Default::default()).unwrap();
        let o = offer("s", 1.0, 0.0, 1.0);
        let b = NodeBinding { location: LocationId(2), control: LocationId(2), behavior: Behavior::Service(&o) };
        assert_eq!(edge_network(&net, &b, &b, 10.0).unwrap(), (0.0, 0.0));
    }
}
