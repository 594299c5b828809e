use netqos::optimize::{
    brute_force, dijkstra_sequential, ga_network_aware, ga_standard, GaConfig, DEFAULT_EVALUATION_CAP,
};
use netqos::scenario::{build_trial, small_problem, ExperimentConfig, SmallProblemSpec};
use netqos::ControlPlan;

#[test]
fn dijkstra_matches_brute_force_on_chains() {
    let spec = SmallProblemSpec { sequential: true, max_tasks: 4, max_controls: 4, ..Default::default() };
    for seed in 0..40 {
        let p = small_problem(&spec, seed).unwrap();
        let b = brute_force(&p, DEFAULT_EVALUATION_CAP).unwrap();
        let d = dijkstra_sequential(&p).unwrap();
        let (x, y) = (b.qos().runtime_ms, d.qos().runtime_ms);
        assert!((x - y).abs() <= 1e-9 * x, "seed {seed}: brute {x} vs dijkstra {y}");
    }
}

#[test]
fn more_control_nodes_never_hurt() {
    let spec = SmallProblemSpec { sequential: true, max_tasks: 3, max_controls: 1, ..Default::default() };
    for seed in 0..10 {
        let p = small_problem(&spec, seed).unwrap();
        let others: Vec<_> = p.network.ids().filter(|&l| l != p.plan.master).collect();
        let mut last = f64::INFINITY;
        for k in [0, 2, 5, others.len()] {
            let pk = p.with_plan(ControlPlan { master: p.plan.master, slaves: others[..k].to_vec() }).unwrap();
            let r = dijkstra_sequential(&pk).unwrap().qos().runtime_ms;
            assert!(r <= last + 1e-9, "seed {seed}, k={k}: {r} > {last}");
            last = r;
        }
    }
}

#[test]
fn unlimited_variant_is_a_lower_bound_for_the_gas() {
    let cfg = ExperimentConfig { locations: 200, ..Default::default() };
    let trial = build_trial(&cfg, 0, 6).unwrap();
    let p = trial.with_slaves(8).unwrap();
    let opt = dijkstra_sequential(&p.unlimited_control_variant()).unwrap().qos().runtime_ms;
    let ga = GaConfig { generations: 60, seed: 3, ..GaConfig::default() };
    for run in [ga_standard(&p, &ga).unwrap(), ga_network_aware(&p, &ga).unwrap()] {
        assert!(run.best.qos().runtime_ms >= opt - 1e-9);
        assert!(run.trace.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn gas_reach_the_optimum_of_small_spaces() {
    let spec = SmallProblemSpec { max_tasks: 3, max_candidates: 3, max_controls: 2, ..Default::default() };
    for seed in 0..10 {
        let p = small_problem(&spec, seed).unwrap();
        let best = brute_force(&p, DEFAULT_EVALUATION_CAP).unwrap().evaluation.utility;
        let ga = GaConfig { population_size: 40, generations: 60, seed, ..GaConfig::default() };
        assert!((ga_standard(&p, &ga).unwrap().best.evaluation.utility - best).abs() < 1e-9);
        assert!((ga_network_aware(&p, &ga).unwrap().best.evaluation.utility - best).abs() < 1e-9);
    }
}
