use proptest::prelude::*;

use netqos::engine::{edge_network, run_node, simulate_execution, Simulation, VisitOrder};
use netqos::fixtures;
use netqos::problem::Genome;
use netqos::scenario::{small_problem, SmallProblemSpec};
use netqos::{NodeRef, Problem};

fn genome(p: &Problem, picks: &[u32]) -> Genome {
    let mut it = picks.iter().cycle().copied();
    Genome {
        services: (0..p.tasks().len()).map(|t| it.next().unwrap() % p.candidates(t).len() as u32).collect(),
        controls: p.free_nodes().iter().map(|_| it.next().unwrap() % p.controls().len() as u32).collect(),
    }
}

/// Start times by recursion over predecessors: the latest arrival of any input.
fn longest_path_starts(p: &Problem, g: &Genome) -> Vec<f64> {
    let b = p.binding(g);
    let n = p.graph.len();
    let mut start: Vec<Option<f64>> = vec![None; n];
    let mut input = vec![0.0; n];
    let mut output = vec![0.0; n];
    fn visit(
        v: usize,
        p: &Problem,
        b: &netqos::engine::Binding<'_>,
        start: &mut Vec<Option<f64>>,
        input: &mut Vec<f64>,
        output: &mut Vec<f64>,
    ) -> f64 {
        if let Some(s) = start[v] {
            return s;
        }
        let node = p.graph.node(v);
        let mut s: f64 = 0.0;
        let mut size = if v == p.graph.start() { p.input_mb } else { 0.0 };
        for &u in &node.incoming {
            let su = visit(u, p, b, start, input, output);
            let end_u = su + run_node(b.node(u), input[u]).exec_ms;
            let (t, d) = edge_network(&p.network, b.node(u), b.node(v), output[u]).unwrap();
            s = s.max(end_u + t + d);
            size += output[u];
        }
        input[v] = size;
        output[v] = run_node(b.node(v), size).output_mb;
        start[v] = Some(s);
        s
    }
    for v in 0..n {
        visit(v, p, &b, &mut start, &mut input, &mut output);
    }
    start.into_iter().map(Option::unwrap).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn visiting_order_does_not_matter(seed in any::<u64>(), order_seed in any::<u64>(), picks in prop::collection::vec(0u32..64, 1..16)) {
        let spec = SmallProblemSpec { max_tasks: 8, max_nodes: 40, max_search_space: f64::INFINITY, ..Default::default() };
        let p = small_problem(&spec, seed).unwrap();
        let g = genome(&p, &picks);
        let b = p.binding(&g);
        let a = simulate_execution(&p.graph, &p.network, &b, p.input_mb, VisitOrder::AscendingId).unwrap();
        let s = simulate_execution(&p.graph, &p.network, &b, p.input_mb, VisitOrder::Shuffled(order_seed)).unwrap();
        prop_assert_eq!(&a.exec_start, &s.exec_start);
        prop_assert_eq!(&a.exec_end, &s.exec_end);
        prop_assert_eq!(a.runtime_ms, s.runtime_ms);
    }

    #[test]
    fn start_times_are_longest_paths(seed in any::<u64>(), picks in prop::collection::vec(0u32..64, 1..16)) {
        let spec = SmallProblemSpec { max_tasks: 8, max_nodes: 40, max_search_space: f64::INFINITY, ..Default::default() };
        let p = small_problem(&spec, seed).unwrap();
        let g = genome(&p, &picks);
        let (_, sim) = p.simulate(&g).unwrap();
        let oracle = longest_path_starts(&p, &g);
        for (i, (x, y)) in sim.exec_start.iter().zip(&oracle).enumerate() {
            prop_assert!((x - y).abs() <= 1e-9 * y.max(1.0), "node {}: {} vs {}", p.graph.node(i).id, x, y);
        }
    }
}

#[test]
fn diamond_join_waits_for_the_slower_branch() {
    let p = fixtures::diamond_problem();
    let (q, sim) = p.evaluate_assignment(&fixtures::diamond_assignment()).unwrap();
    let at = |n: &str| p.graph.index_of(&NodeRef::new(n)).unwrap();
    // A: 20 ms to reach, 10 ms to run, 5 ms to the join; B: 5 + 10 + 20
    assert_eq!(sim.exec_start[at("A")], 20.0);
    assert_eq!(sim.exec_start[at("B")], 5.0);
    assert_eq!(sim.exec_start[at("@join1")], 35.0);
    assert_eq!(q.runtime_ms, 60.0);
    assert_eq!(q.latency_ms, 50.0);
}

#[test]
fn free_network_gives_pure_execution_time() {
    let p = fixtures::fig1_problem(netqos::ControlPlan::centralized(fixtures::FRANCE_USER), true);
    let a = fixtures::fig1_assignment(&p, "X1", "A1", "B1");
    let (q, _) = p.evaluate_assignment(&a).unwrap();
    assert_eq!(q.latency_ms, 0.0);
    assert_eq!(q.runtime_ms, 100.0 + 200.0);
}

#[test]
fn join_inputs_sum_identically_in_any_order() {
    let spec = SmallProblemSpec { max_tasks: 8, max_nodes: 40, max_search_space: f64::INFINITY, ..Default::default() };
    let p = small_problem(&spec, 3677408868352634617).unwrap();
    let g = genome(&p, &[2, 32, 21, 0, 0]);
    let b = p.binding(&g);
    let a = simulate_execution(&p.graph, &p.network, &b, p.input_mb, VisitOrder::AscendingId).unwrap();
    for order_seed in [313823047582285, 0, 1, 2, 3] {
        let s = simulate_execution(&p.graph, &p.network, &b, p.input_mb, VisitOrder::Shuffled(order_seed)).unwrap();
        assert_eq!(a, Simulation { visit_order: a.visit_order.clone(), ..s });
    }
}
