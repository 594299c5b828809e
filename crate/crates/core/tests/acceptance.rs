//! Acceptance checks. Prints one line per criterion and exits non-zero if
//! any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netqos::engine::aggregate_hierarchical;
use netqos::execsim::run_protocol;
use netqos::fixtures;
use netqos::optimize::{
    brute_force, dijkstra_sequential, ga_network_aware, ga_standard, GaConfig, DEFAULT_EVALUATION_CAP,
};
use netqos::problem::Genome;
use netqos::scenario::{
    experiment_latency_vs_controls, generate_workflow, small_problem, ExperimentConfig, ExperimentRow,
    SmallProblemSpec, WorkflowGenConfig,
};
use netqos::utility::UtilitySpec;
use netqos::workflow::AtomicKind;
use netqos::{
    Assignment, ControlPlan, LocationId, NetworkModel, NodeRef, OfferCatalog, Problem, ServiceOffer, SlaProfile,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn picks(a: &Assignment) -> Vec<String> {
    a.services.values().map(|s| s.0.clone()).collect()
}

fn criterion_1() -> Outcome {
    let blind = fixtures::fig1_problem(ControlPlan::centralized(fixtures::FRANCE_USER), true);
    let b = brute_force(&blind, DEFAULT_EVALUATION_CAP).map_err(|e| e.to_string())?;
    // services are keyed by task: A, B, X
    ensure(picks(&b.assignment) == ["A2", "B3", "X2"], format!("network-blind picked {:?}", picks(&b.assignment)))?;
    ensure(b.qos().runtime_ms == 255.0, format!("network-blind runtime {}", b.qos().runtime_ms))?;

    let aware = fixtures::fig1_problem(ControlPlan::centralized(fixtures::FRANCE_USER), false);
    let s = brute_force(&aware, DEFAULT_EVALUATION_CAP).map_err(|e| e.to_string())?;
    ensure(picks(&s.assignment) == ["A1", "B1", "X1"], format!("network-aware picked {:?}", picks(&s.assignment)))?;
    // four edges each cross the local link once: 0.25 ms delay + 0.25 MB at 1000 MB/s
    let local_leg = 0.25 + 0.25 * 1000.0 / 1000.0;
    ensure(local_leg < 1.0, "local leg is not sub-millisecond")?;
    let expected = 300.0 + 4.0 * local_leg;
    ensure(s.qos().runtime_ms == expected, format!("X1/A1/B1 runtime {} != {expected}", s.qos().runtime_ms))?;

    let far = fixtures::fig1_assignment(&aware, "X2", "A2", "B3");
    let (q, _) = aware.evaluate_assignment(&far).map_err(|e| e.to_string())?;
    ensure(q.runtime_ms > 555.0, format!("X2/A2/B3 from France only {}", q.runtime_ms))?;
    Ok(format!(
        "blind X2/A2/B3 = {} ms, aware X1/A1/B1 = {} ms, X2/A2/B3 from France = {} ms",
        b.qos().runtime_ms,
        s.qos().runtime_ms,
        q.runtime_ms
    ))
}

fn criterion_2() -> Outcome {
    let total = |x: f64, svc: &str| -> Result<f64, String> {
        let p = fixtures::fig3_problem(x);
        let a = Assignment {
            services: [("encode".into(), svc.into())].into_iter().collect(),
            controls: [(NodeRef::new("encode"), fixtures::FIG3_USER)].into_iter().collect(),
        };
        Ok(p.evaluate_assignment(&a).map_err(|e| e.to_string())?.0.runtime_ms)
    };
    for x in (10..=400).step_by(10) {
        let (m1, m2) = (total(x as f64, "M1")?, total(x as f64, "M2")?);
        let ok = match x {
            ..200 => m1 < m2,
            200 => (m1 - m2).abs() <= 1e-9,
            _ => m1 > m2,
        };
        ensure(ok, format!("at {x} MB: M1 {m1} ms, M2 {m2} ms"))?;
    }
    Ok(format!("both take {} ms at 200 MB", total(200.0, "M1")?))
}

/// Runtime-only problem on a free network; each task has one offer with a
/// whole-millisecond execution time.
fn zero_network_problem(wf: &netqos::WorkflowExpr, r: &mut ChaCha8Rng) -> Problem {
    let offers = wf
        .tasks()
        .into_iter()
        .map(|t| ServiceOffer {
            id: t.as_str().into(),
            task: t.clone(),
            location: LocationId(0),
            sla: SlaProfile::fixed(r.gen_range(1..=500) as f64),
        })
        .collect();
    Problem::new(
        wf,
        Arc::new(NetworkModel::zero(1)),
        OfferCatalog::new(offers).unwrap(),
        ControlPlan::centralized(LocationId(0)),
        1.0,
        UtilitySpec::runtime_only(),
    )
    .unwrap()
}

fn criterion_3() -> Outcome {
    let mut worst = 0usize;
    for seed in 0..200u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let size = r.gen_range(1..=15);
        let wf = generate_workflow(size, seed, &WorkflowGenConfig::default()).map_err(|e| e.to_string())?;
        let p = zero_network_problem(&wf, &mut r);
        let g = Genome { services: vec![0; p.tasks().len()], controls: vec![0; p.free_nodes().len()] };
        let (q, sim) = p.simulate(&g).map_err(|e| e.to_string())?;
        let per_node: BTreeMap<NodeRef, _> =
            p.graph.nodes().iter().zip(&sim.node_qos).map(|(n, q)| (n.id.clone(), *q)).collect();
        let agg = aggregate_hierarchical(&p.workflow, &per_node).map_err(|e| e.to_string())?;
        ensure(
            agg.runtime_ms == q.runtime_ms,
            format!("seed {seed}: simulated {} vs aggregated {} for {}", q.runtime_ms, agg.runtime_ms, wf),
        )?;
        worst = worst.max(p.graph.len());
    }
    Ok(format!("200 workflows agree exactly (largest graph {worst} nodes)"))
}

/// Naive hierarchical runtime: each node costs its execution time plus the
/// slowest incoming three-leg network time, folded along the tree.
fn naive_runtime(p: &Problem, a: &Assignment) -> f64 {
    let net = &p.network;
    let g = &p.graph;
    let place = |i: usize| -> (LocationId, LocationId) {
        let n = g.node(i);
        let ctrl = a.controls.get(&n.id).copied().unwrap_or(p.plan.master);
        match n.task() {
            Some(t) => (p.catalog.find(&a.services[t]).unwrap().location, ctrl),
            None => (ctrl, ctrl),
        }
    };
    let hop = |x: LocationId, y: LocationId| net.get_network_qos(x, y).unwrap().delay_ms;
    let mut per_node = BTreeMap::new();
    for (i, n) in g.nodes().iter().enumerate() {
        let exec = match (&n.kind, n.task()) {
            (AtomicKind::Logic { exec_ms, .. }, _) => *exec_ms,
            (_, Some(t)) => p.catalog.find(&a.services[t]).unwrap().sla.exec.eval(0.0),
            _ => unreachable!(),
        };
        let (w, cw) = place(i);
        let incoming = n
            .incoming
            .iter()
            .map(|&v| {
                let (v, cv) = place(v);
                hop(v, cv) + hop(cv, cw) + hop(cw, w)
            })
            .fold(0.0, f64::max);
        let q = netqos::QosVector { runtime_ms: exec + incoming, ..netqos::QosVector::NEUTRAL };
        per_node.insert(n.id.clone(), q);
    }
    aggregate_hierarchical(&p.workflow, &per_node).unwrap().runtime_ms
}

fn criterion_4() -> Outcome {
    let p = fixtures::diamond_problem();
    let a = fixtures::diamond_assignment();
    let (q, _) = p.evaluate_assignment(&a).map_err(|e| e.to_string())?;
    let naive = naive_runtime(&p, &a);
    ensure(naive > q.runtime_ms, format!("naive {naive} ms does not exceed simulated {} ms", q.runtime_ms))?;
    Ok(format!("naive aggregation {naive} ms > simulated {} ms", q.runtime_ms))
}

fn random_genome(p: &Problem, r: &mut ChaCha8Rng) -> Genome {
    Genome {
        services: (0..p.tasks().len()).map(|t| r.gen_range(0..p.candidates(t).len() as u32)).collect(),
        controls: p.free_nodes().iter().map(|_| r.gen_range(0..p.controls().len() as u32)).collect(),
    }
}

fn criterion_5() -> Outcome {
    let spec = SmallProblemSpec {
        max_tasks: 12,
        max_candidates: 4,
        max_controls: 8,
        locations: 30,
        max_nodes: 20,
        max_search_space: f64::INFINITY,
        ..SmallProblemSpec::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let p = small_problem(&spec, seed).map_err(|e| e.to_string())?;
        let g = random_genome(&p, &mut ChaCha8Rng::seed_from_u64(seed));
        let (q, _) = p.simulate(&g).map_err(|e| e.to_string())?;
        let trace = run_protocol(&p, &p.assignment(&g), &[]).map_err(|e| e.to_string())?;
        let m = trace.makespan_ms.ok_or(format!("seed {seed}: no makespan"))?;
        worst = worst.max((m - q.runtime_ms).abs());
        ensure((m - q.runtime_ms).abs() <= 1e-9, format!("seed {seed}: makespan {m} vs runtime {}", q.runtime_ms))?;
    }
    Ok(format!("100 instances, max |makespan - runtime| = {worst:e} ms"))
}

fn criterion_6() -> Outcome {
    let spec = SmallProblemSpec {
        max_tasks: 5,
        max_candidates: 6,
        max_controls: 4,
        sequential: true,
        max_search_space: DEFAULT_EVALUATION_CAP,
        ..SmallProblemSpec::default()
    };
    for seed in 0..100u64 {
        let p = small_problem(&spec, seed).map_err(|e| e.to_string())?;
        let d = dijkstra_sequential(&p).map_err(|e| e.to_string())?;
        let b = brute_force(&p, DEFAULT_EVALUATION_CAP).map_err(|e| e.to_string())?;
        let (dr, br) = (d.qos().runtime_ms, b.qos().runtime_ms);
        ensure((dr - br).abs() <= 1e-9 * br.max(1.0), format!("seed {seed}: dijkstra {dr} vs brute {br}"))?;
    }
    Ok("100 sequential instances agree".into())
}

fn mean_of(rows: &[ExperimentRow], algo: &str, k: usize) -> Result<f64, String> {
    rows.iter()
        .find(|r| r.algo == algo && r.x == k)
        .map(|r| r.mean_latency)
        .ok_or(format!("no row for {algo} at k={k}"))
}

fn criterion_7() -> Outcome {
    let cfg = ExperimentConfig { algorithms: vec!["dijkstra".into()], ..ExperimentConfig::default() };
    let rows = experiment_latency_vs_controls(&cfg).map_err(|e| e.to_string())?;
    let at = |k| mean_of(&rows, "dijkstra", k);
    let (k0, k8, k64, k256) = (at(0)?, at(8)?, at(64)?, at(256)?);
    let full = mean_of(&rows, "dijkstra[o]", cfg.locations - 1)?;
    let summary = format!("k=0 {k0:.1}, k=8 {k8:.1}, k=64 {k64:.1}, k=256 {k256:.1}, [o] {full:.1} ms");
    ensure(k0 > k8 && k8 > k64, format!("not strictly decreasing: {summary}"))?;
    let ratio = k256 / full - 1.0;
    ensure(ratio <= 0.05, format!("k=256 is {:.2}% above [o]: {summary}", ratio * 100.0))?;
    Ok(format!("{summary}; k=256 within {:.2}% of [o]", ratio * 100.0))
}

fn criterion_8() -> Outcome {
    let spec = SmallProblemSpec::default();
    let (mut ga_hits, mut net_hits) = (0, 0);
    for seed in 0..100u64 {
        let p = small_problem(&spec, seed).map_err(|e| e.to_string())?;
        let best = brute_force(&p, DEFAULT_EVALUATION_CAP).map_err(|e| e.to_string())?.evaluation.utility;
        let cfg = GaConfig { seed, ..GaConfig::default() };
        let reached = |u: f64| u >= best - 1e-9;
        ga_hits += reached(ga_standard(&p, &cfg).map_err(|e| e.to_string())?.best.evaluation.utility) as usize;
        net_hits += reached(ga_network_aware(&p, &cfg).map_err(|e| e.to_string())?.best.evaluation.utility) as usize;
    }
    let hits = format!("optimum reached: GA {ga_hits}/100, NetGA-like {net_hits}/100");
    ensure(ga_hits >= 95 && net_hits >= 95, hits.clone())?;

    let cfg = ExperimentConfig {
        algorithms: vec!["ga".into(), "netga".into()],
        unlimited: false,
        ..ExperimentConfig::default()
    };
    let rows = experiment_latency_vs_controls(&cfg).map_err(|e| e.to_string())?;
    let mut sweep = Vec::new();
    for &k in &cfg.control_counts {
        let (ga, net) = (mean_of(&rows, "ga", k)?, mean_of(&rows, "netga-like", k)?);
        sweep.push(format!("k={k} {ga:.1}/{net:.1}"));
        ensure(net <= ga, format!("{hits}; NetGA-like worse at k={k}: {}", sweep.join(", ")))?;
    }
    Ok(format!("{hits}; mean latency GA/NetGA-like: {}", sweep.join(", ")))
}

fn run_cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out =
        Command::new(env!("CARGO_BIN_EXE_netqos")).args(args).current_dir(dir).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), format!("netqos {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
}

fn criterion_9() -> Outcome {
    let problem = ["--network", "net.json", "--workflow", "wf.json", "--offers", "offers.json", "--master", "0"];
    let with = |extra: &[&'static str]| -> Vec<&'static str> {
        problem.iter().copied().chain(extra.iter().copied()).collect()
    };
    let exp = r#"{"trials": 2, "locations": 40, "controlCounts": [0, 4], "sizes": [3, 5], "sizeControlCount": 4,
                  "ga": {"generations": 10, "populationSize": 20}}"#;
    let steps: Vec<(Vec<&str>, &str)> = vec![
        (vec!["gen-net", "--size", "40", "--seed", "7", "--out", "net.json"], "net.json"),
        (vec!["gen-wf", "--size", "5", "--seed", "8", "--out", "wf.json"], "wf.json"),
        (
            vec!["gen-offers", "--network", "net.json", "--workflow", "wf.json", "--seed", "9", "--out", "offers.json"],
            "offers.json",
        ),
        ([vec!["solve"], with(&["--controls", "2", "--algo", "brute", "--out", "brute.json"])].concat(), "brute.json"),
        (
            [vec!["solve"], with(&["--controls", "6", "--algo", "ga", "--seed", "3", "--out", "ga.json"])].concat(),
            "ga.json",
        ),
        (
            [vec!["solve"], with(&["--controls", "6", "--algo", "netga", "--seed", "3", "--out", "netga.json"])]
                .concat(),
            "netga.json",
        ),
        (
            [
                vec!["solve"],
                with(&["--unlimited-controls", "--algo", "netga", "--generations", "20", "--out", "o.json"]),
            ]
            .concat(),
            "o.json",
        ),
        (
            [vec!["simulate"], with(&["--controls", "6", "--assignment", "a.json", "--out", "sim.json"])].concat(),
            "sim.json",
        ),
        (
            [
                vec!["execute"],
                with(&["--controls", "6", "--assignment", "a.json", "--faults", "f.json", "--out", "t.json"]),
            ]
            .concat(),
            "t.json",
        ),
        (vec!["experiment", "--config", "exp.json", "--seed", "4", "--out", "exp"], "exp/controls.csv"),
        (vec!["experiment", "--config", "exp.json", "--seed", "4", "--out", "exp", "--which", "size"], "exp/size.csv"),
    ];
    let seq_wf =
        r#"{"type": "seq", "children": [{"type": "service", "task": "t1"}, {"type": "service", "task": "t2"}]}"#;

    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for d in &dirs {
        std::fs::write(d.path().join("exp.json"), exp).map_err(|e| e.to_string())?;
        for (args, _) in &steps {
            if args[0] == "simulate" {
                // reuse the GA's pick as the assignment to simulate and execute
                let sol: serde_json::Value =
                    serde_json::from_slice(&std::fs::read(d.path().join("ga.json")).map_err(|e| e.to_string())?)
                        .map_err(|e| e.to_string())?;
                std::fs::write(d.path().join("a.json"), sol["assignment"].to_string()).map_err(|e| e.to_string())?;
                // fail the first service node one millisecond into its run
                let node = sol["assignment"]["controls"]
                    .as_object()
                    .and_then(|m| m.keys().find(|k| !k.starts_with('@')).cloned())
                    .ok_or("assignment without service nodes")?;
                let faults = serde_json::json!([{ "node": node, "afterMs": 1.0 }]);
                std::fs::write(d.path().join("f.json"), faults.to_string()).map_err(|e| e.to_string())?;
            }
            run_cli(args, d.path())?;
        }
        // dijkstra needs a sequence
        std::fs::write(d.path().join("seq.json"), seq_wf).map_err(|e| e.to_string())?;
        run_cli(
            &["gen-offers", "--network", "net.json", "--workflow", "seq.json", "--seed", "2", "--out", "so.json"],
            d.path(),
        )?;
        run_cli(
            &[
                "solve",
                "--network",
                "net.json",
                "--workflow",
                "seq.json",
                "--offers",
                "so.json",
                "--master",
                "0",
                "--controls",
                "5",
                "--algo",
                "dijkstra",
                "--out",
                "dijkstra.json",
            ],
            d.path(),
        )?;
    }
    let mut files: Vec<&str> = steps.iter().map(|(_, f)| *f).collect();
    files.push("dijkstra.json");
    for f in &files {
        let a = std::fs::read(dirs[0].path().join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(f)).map_err(|e| e.to_string())?;
        ensure(!a.is_empty() && a == b, format!("{f} differs between runs"))?;
    }
    Ok(format!("{} outputs byte-identical across two runs", files.len()))
}

/// Number, check and time limit.
type Criterion = (u32, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, criterion_1, Duration::from_secs(1)),
        (2, criterion_2, Duration::from_secs(1)),
        (3, criterion_3, Duration::from_secs(10)),
        (4, criterion_4, Duration::MAX),
        (5, criterion_5, Duration::from_secs(30)),
        (6, criterion_6, Duration::from_secs(60)),
        (7, criterion_7, Duration::from_secs(600)),
        (8, criterion_8, Duration::from_secs(600)),
        (9, criterion_9, Duration::MAX),
    ];
    let only: Option<u32> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let mut failed = 0;
    for (n, check, limit) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let t0 = Instant::now();
        let result = check();
        let took = t0.elapsed();
        let result = match result {
            Ok(msg) if took > limit => Err(format!("{msg}; took {took:.2?}, limit {limit:.0?}")),
            r => r,
        };
        match result {
            Ok(msg) => println!("criterion {n}: PASS ({took:.2?}) {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n}: FAIL ({took:.2?}) {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
