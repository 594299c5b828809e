//! Exact selection for pure sequences as a shortest path.
//!
//! Layer `i` of the chain contributes two vertex sets indexed by control
//! node and data size: `hub(i, c, x)`, an input of `x` MB for step `i` has
//! reached control node `c`, and `out(i, c, y)`, step `i` has run under `c`
//! and its `y` MB result is back at `c`. `hub -> out` has one edge per
//! candidate service `s`, weighted `leg(c, s) + exec(s) + leg(s, c)`;
//! `out(i, c, y) -> hub(i + 1, c', y)` is the control-to-control leg.
//! Splitting the three-leg edge this way keeps the graph at
//! `O(L * K^2 * X)` edges for `K` control nodes and `X` distinct sizes.
//!
//! Keeping the size in the state makes the search exact when result sizes
//! depend on the picked services, as long as few distinct sizes are reachable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Solution;
use crate::error::{Error, Result};
use crate::network::LocationId;
use crate::problem::{Genome, Problem};
use crate::sla::evaluate_sla;
use crate::utility::Attribute;
use crate::workflow::AtomicKind;

/// Upper limit on distinct data sizes reachable at one position of the chain.
pub const MAX_SIZES_PER_LAYER: usize = 256;

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One step of the chain.
struct Step {
    node: usize,
    task: Option<usize>,
    logic_exec_ms: f64,
}

fn chain(p: &Problem) -> Result<Vec<Step>> {
    let g = &p.graph;
    if !g.is_chain() {
        return Err(Error::Unsupported("shortest-path selection needs a pure sequence".into()));
    }
    let mut seen_tasks = vec![false; p.tasks().len()];
    let mut out = Vec::with_capacity(g.len());
    let mut v = g.start();
    loop {
        let task = p.task_of_node(v);
        if let Some(t) = task {
            if std::mem::replace(&mut seen_tasks[t], true) {
                return Err(Error::Unsupported(format!(
                    "task {} occurs more than once in the sequence (unrolled loop)",
                    p.tasks()[t]
                )));
            }
        }
        let logic_exec_ms = match &g.node(v).kind {
            AtomicKind::Logic { exec_ms, .. } => *exec_ms,
            AtomicKind::Service { .. } => 0.0,
        };
        out.push(Step { node: v, task, logic_exec_ms });
        match g.node(v).outgoing.as_slice() {
            [] => break,
            [w] => v = *w,
            _ => unreachable!("chain"),
        }
    }
    Ok(out)
}

fn dedup_sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn size_index(sizes: &[f64], x: f64) -> usize {
    sizes.binary_search_by(|s| s.total_cmp(&x)).expect("size was enumerated")
}

/// Distinct input sizes per position; entry `len` holds the end node's outputs.
fn reachable_sizes(p: &Problem, steps: &[Step]) -> Result<Vec<Vec<f64>>> {
    let mut sizes = vec![vec![p.input_mb]];
    for step in steps {
        let cur = sizes.last().expect("non-empty");
        let next = match step.task {
            None => cur.clone(),
            Some(t) => dedup_sorted(
                cur.iter()
                    .flat_map(|&x| p.candidates(t).iter().map(move |o| evaluate_sla(&o.sla, x).output_mb))
                    .collect(),
            ),
        };
        if next.len() > MAX_SIZES_PER_LAYER {
            return Err(Error::Unsupported(format!(
                "more than {MAX_SIZES_PER_LAYER} distinct data sizes reachable after {}",
                p.graph.node(step.node).id
            )));
        }
        sizes.push(next);
    }
    Ok(sizes)
}

/// Optimal selection for a sequential workflow whose only objective is
/// runtime (or network latency).
pub fn dijkstra_sequential(p: &Problem) -> Result<Solution> {
    let objective =
        p.utility.sole_minimized().filter(|a| matches!(a, Attribute::Runtime | Attribute::Latency)).ok_or_else(
            || Error::Unsupported("shortest-path selection needs a single runtime or latency objective".into()),
        )?;
    let with_exec = objective == Attribute::Runtime;
    let steps = chain(p)?;
    let sizes = reachable_sizes(p, &steps)?;
    let controls: &[LocationId] = p.controls();
    let k = controls.len();
    let layers = steps.len();
    let last = layers - 1;
    let net = &*p.network;

    // hub(i, c, a) at hub_base[i] + c*|sizes[i]| + a; out(i, c, b) at
    // out_base[i] + c*|sizes[i+1]| + b
    let mut hub_base = Vec::with_capacity(layers);
    let mut out_base = Vec::with_capacity(layers);
    let mut n_vertices = 0;
    for i in 0..layers {
        hub_base.push(n_vertices);
        n_vertices += k * sizes[i].len();
        out_base.push(n_vertices);
        n_vertices += k * sizes[i + 1].len();
    }
    let hub = |i: usize, c: usize, a: usize| hub_base[i] + c * sizes[i].len() + a;
    let out = |i: usize, c: usize, b: usize| out_base[i] + c * sizes[i + 1].len() + b;
    // block starts in vertex order: hub 0, out 0, hub 1, out 1, ...
    let bases: Vec<usize> = hub_base.iter().zip(&out_base).flat_map(|(&h, &o)| [h, o]).collect();
    // (layer, is_out, control, size index) of a vertex
    let decode = |v: usize| -> (usize, bool, usize, usize) {
        let block = bases.partition_point(|&b| b <= v) - 1;
        let (i, is_out) = (block / 2, block % 2 == 1);
        let w = sizes[i + is_out as usize].len();
        (i, is_out, (v - bases[block]) / w, (v - bases[block]) % w)
    };

    let mut dist = vec![f64::INFINITY; n_vertices];
    let mut done = vec![false; n_vertices];
    let mut pred = vec![usize::MAX; n_vertices];
    let mut pred_choice = vec![0u32; n_vertices];
    let mut heap = BinaryHeap::new();
    let mut relaxed = 0u64;

    // the start step runs at the master (control index 0) on the workflow input
    let start_exec = if with_exec { steps[0].logic_exec_ms } else { 0.0 };
    let first = out(0, 0, 0);
    dist[hub(0, 0, 0)] = 0.0;
    done[hub(0, 0, 0)] = true;
    dist[first] = start_exec;
    pred[first] = hub(0, 0, 0);
    heap.push(Entry { dist: start_exec, vertex: first });
    let mut goal = None;

    while let Some(Entry { dist: d, vertex }) = heap.pop() {
        if done[vertex] {
            continue;
        }
        done[vertex] = true;
        let (i, is_out, c, x) = decode(vertex);
        let mut relax = |to: usize, cost: f64, choice: u32| {
            relaxed += 1;
            let nd = d + cost;
            if nd < dist[to] {
                dist[to] = nd;
                pred[to] = vertex;
                pred_choice[to] = choice;
                heap.push(Entry { dist: nd, vertex: to });
            }
        };
        if is_out {
            // ship the result to the next step's control node
            if i == last {
                goal = Some(vertex);
                break;
            }
            let size = sizes[i + 1][x];
            let targets = if i + 1 == last { 0..1 } else { 0..k };
            for c2 in targets {
                relax(hub(i + 1, c2, x), net.leg_ms(controls[c], controls[c2], size)?, 0);
            }
        } else {
            // run step i under control node c
            let step = &steps[i];
            let input = sizes[i][x];
            let ctrl = controls[c];
            match step.task {
                None => {
                    let b = size_index(&sizes[i + 1], input);
                    relax(out(i, c, b), if with_exec { step.logic_exec_ms } else { 0.0 }, 0);
                }
                Some(t) => {
                    for (s, offer) in p.candidates(t).iter().enumerate() {
                        let inv = evaluate_sla(&offer.sla, input);
                        let exec = if with_exec { inv.exec_ms } else { 0.0 };
                        let cost = net.leg_ms(ctrl, offer.location, input)?
                            + exec
                            + net.leg_ms(offer.location, ctrl, inv.output_mb)?;
                        relax(out(i, c, size_index(&sizes[i + 1], inv.output_mb)), cost, s as u32);
                    }
                }
            }
        }
    }

    let goal = goal.ok_or_else(|| Error::Config("no path through the layered graph".into()))?;

    // walk back: out(i) <- hub(i) <- out(i - 1)
    let mut genome = Genome { services: vec![0; p.tasks().len()], controls: vec![0; p.free_nodes().len()] };
    let mut v = goal;
    for i in (1..layers).rev() {
        let (_, _, c, _) = decode(v);
        if let Some(t) = steps[i].task {
            genome.services[t] = pred_choice[v];
        }
        if let Ok(j) = p.free_nodes().binary_search(&steps[i].node) {
            genome.controls[j] = c as u32;
        }
        v = pred[pred[v]];
    }

    let evaluation = p.evaluate(&genome)?;
    Ok(Solution::new(p, genome, evaluation, relaxed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::optimize::{brute_force, DEFAULT_EVALUATION_CAP};
    use crate::problem::ControlPlan;

    #[test]
    fn rejects_parallel_workflows() {
        let p = fixtures::fig1_problem(ControlPlan::centralized(fixtures::FRANCE_USER), false);
        assert!(matches!(dijkstra_sequential(&p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn single_task_matches_brute_force() {
        for x in [50.0, 200.0, 300.0] {
            let p = fixtures::fig3_problem(x);
            let d = dijkstra_sequential(&p).unwrap();
            let b = brute_force(&p, DEFAULT_EVALUATION_CAP).unwrap();
            assert_eq!(d.qos().runtime_ms, b.qos().runtime_ms);
        }
    }
}
