//! Small hand-built scenarios with known answers.
//!
//! * `fig1`: workflow `X; AND(A, B)` with local providers next to a user in
//!   France and faster providers in Japan, 75 ms away.
//! * `fig3`: two audio encoders, one faster, one compressing better, reached
//!   over a 100 Mbit/s link; their total times cross at 200 MB of input.
//! * `diamond`: a fork/join where one branch has a slow incoming and fast
//!   outgoing link and the other the reverse.

use std::sync::Arc;

use crate::network::{Location, LocationId, NetworkModel};
use crate::problem::{Assignment, ControlPlan, Problem};
use crate::sla::{OfferCatalog, PiecewiseLinear, ServiceOffer, SlaProfile};
use crate::utility::UtilitySpec;
use crate::workflow::{NodeRef, WorkflowExpr};

pub const FRANCE_USER: LocationId = LocationId(0);
pub const FRANCE_DC: LocationId = LocationId(1);
pub const JAPAN: LocationId = LocationId(2);
pub const USA: LocationId = LocationId(3);

/// One-way delay between France and Japan.
pub const FRANCE_JAPAN_DELAY_MS: f64 = 75.0;
/// Workflow input; every service passes its input size through.
pub const FIG1_INPUT_MB: f64 = 0.25;

fn loc(id: u32, x: f64, y: f64, name: &str) -> Location {
    Location { id: LocationId(id), x, y, name: Some(name.to_owned()) }
}

fn offer(id: &str, task: &str, location: LocationId, exec_ms: f64) -> ServiceOffer {
    ServiceOffer { id: id.into(), task: task.into(), location, sla: SlaProfile::fixed(exec_ms) }
}

pub fn fig1_network() -> NetworkModel {
    let locations = vec![
        loc(0, 0.0, 0.0, "France (user)"),
        loc(1, 1.0, 0.0, "France (providers)"),
        loc(2, 750.0, 0.0, "Japan"),
        loc(3, -400.0, 0.0, "USA"),
    ];
    let m = NetworkModel::new(locations, 0.0, Vec::new(), 0).expect("valid");
    // local link: 0.25 ms delay, 1 GB/s
    m.with_link(FRANCE_USER, FRANCE_DC, 0.25, 1000.0)
        .and_then(|m| m.with_link(FRANCE_USER, JAPAN, FRANCE_JAPAN_DELAY_MS, 12.5))
        .and_then(|m| m.with_link(FRANCE_DC, JAPAN, FRANCE_JAPAN_DELAY_MS, 12.5))
        .and_then(|m| m.with_link(FRANCE_USER, USA, 40.0, 12.5))
        .and_then(|m| m.with_link(FRANCE_DC, USA, 40.0, 12.5))
        .and_then(|m| m.with_link(JAPAN, USA, 55.0, 12.5))
        .expect("valid links")
}

pub fn fig1_workflow() -> WorkflowExpr {
    WorkflowExpr::seq(vec![
        WorkflowExpr::service("X"),
        WorkflowExpr::and(vec![WorkflowExpr::service("A"), WorkflowExpr::service("B")]),
    ])
}

/// Offers: X1/A1/B1 in France (100/200/180 ms), X2/A2/B3 in Japan
/// (80/150/175 ms), B2 in the USA (190 ms).
pub fn fig1_offers() -> OfferCatalog {
    OfferCatalog::new(vec![
        offer("X1", "X", FRANCE_DC, 100.0),
        offer("X2", "X", JAPAN, 80.0),
        offer("A1", "A", FRANCE_DC, 200.0),
        offer("A2", "A", JAPAN, 150.0),
        offer("B1", "B", FRANCE_DC, 180.0),
        offer("B2", "B", USA, 190.0),
        offer("B3", "B", JAPAN, 175.0),
    ])
    .expect("valid offers")
}

/// The deployment example; with `network_blind` every link is free.
pub fn fig1_problem(plan: ControlPlan, network_blind: bool) -> Problem {
    let mut net = fig1_network();
    if network_blind {
        net = net.without_network_costs();
    }
    Problem::new(&fig1_workflow(), Arc::new(net), fig1_offers(), plan, FIG1_INPUT_MB, UtilitySpec::runtime_only())
        .expect("valid fixture")
}

/// Assignment picking the given X/A/B services with every node controlled by the master.
pub fn fig1_assignment(p: &Problem, x: &str, a: &str, b: &str) -> Assignment {
    let services = [("X", x), ("A", a), ("B", b)].into_iter().map(|(t, s)| (t.into(), s.into())).collect();
    let controls = p.graph.nodes().iter().map(|n| (n.id.clone(), p.plan.master)).collect();
    Assignment { services, controls }
}

pub const FIG3_USER: LocationId = LocationId(0);
pub const FIG3_SITE: LocationId = LocationId(1);

/// Encoders: M1 runs at 20 ms/MB and halves the data, M2 takes 2 s plus
/// 30 ms/MB and quarters it. Over 12.5 MB/s each returned MB costs 80 ms.
pub fn fig3_offers() -> OfferCatalog {
    let m1 = SlaProfile {
        exec: PiecewiseLinear::linear(0.0, 20.0),
        output: PiecewiseLinear::linear(0.0, 0.5),
        cost: 0.0,
        availability: 1.0,
    };
    let m2 = SlaProfile {
        exec: PiecewiseLinear::linear(2000.0, 30.0),
        output: PiecewiseLinear::linear(0.0, 0.25),
        cost: 0.0,
        availability: 1.0,
    };
    OfferCatalog::new(vec![
        ServiceOffer { id: "M1".into(), task: "encode".into(), location: FIG3_SITE, sla: m1 },
        ServiceOffer { id: "M2".into(), task: "encode".into(), location: FIG3_SITE, sla: m2 },
    ])
    .expect("valid offers")
}

pub fn fig3_network() -> NetworkModel {
    let locations = vec![loc(0, 0.0, 0.0, "user"), loc(1, 1.0, 0.0, "encoder site")];
    NetworkModel::new(locations, 0.0, Vec::new(), 0)
        .and_then(|m| m.with_link(FIG3_USER, FIG3_SITE, 0.0, 12.5))
        .expect("valid")
}

pub fn fig3_problem(input_mb: f64) -> Problem {
    Problem::new(
        &WorkflowExpr::service("encode"),
        Arc::new(fig3_network()),
        fig3_offers(),
        ControlPlan::centralized(FIG3_USER),
        input_mb,
        UtilitySpec::runtime_only(),
    )
    .expect("valid fixture")
}

pub const DIAMOND_MASTER: LocationId = LocationId(0);
pub const DIAMOND_A: LocationId = LocationId(1);
pub const DIAMOND_B: LocationId = LocationId(2);
pub const DIAMOND_JOIN: LocationId = LocationId(3);

/// Delays: master-a 20, a-join 5, master-b 5, b-join 20, join-master 25.
pub fn diamond_network() -> NetworkModel {
    let locations = vec![loc(0, 0.0, 0.0, "m"), loc(1, 1.0, 1.0, "a"), loc(2, 1.0, -1.0, "b"), loc(3, 2.0, 0.0, "j")];
    let inf = f64::INFINITY;
    NetworkModel::new(locations, 0.0, Vec::new(), 0)
        .and_then(|m| m.with_link(DIAMOND_MASTER, DIAMOND_A, 20.0, inf))
        .and_then(|m| m.with_link(DIAMOND_A, DIAMOND_JOIN, 5.0, inf))
        .and_then(|m| m.with_link(DIAMOND_MASTER, DIAMOND_B, 5.0, inf))
        .and_then(|m| m.with_link(DIAMOND_B, DIAMOND_JOIN, 20.0, inf))
        .and_then(|m| m.with_link(DIAMOND_MASTER, DIAMOND_JOIN, 25.0, inf))
        .and_then(|m| m.with_link(DIAMOND_A, DIAMOND_B, 25.0, inf))
        .expect("valid")
}

pub fn diamond_problem() -> Problem {
    let catalog = OfferCatalog::new(vec![offer("A1", "A", DIAMOND_A, 10.0), offer("B1", "B", DIAMOND_B, 10.0)])
        .expect("valid offers");
    Problem::new(
        &WorkflowExpr::and(vec![WorkflowExpr::service("A"), WorkflowExpr::service("B")]),
        Arc::new(diamond_network()),
        catalog,
        ControlPlan { master: DIAMOND_MASTER, slaves: vec![DIAMOND_A, DIAMOND_B, DIAMOND_JOIN] },
        0.0,
        UtilitySpec::runtime_only(),
    )
    .expect("valid fixture")
}

/// Fork at the master, each service controlled at its own site, join at the join site.
pub fn diamond_assignment() -> Assignment {
    let services = [("A", "A1"), ("B", "B1")].into_iter().map(|(t, s)| (t.into(), s.into())).collect();
    let controls = [("@fork1", DIAMOND_MASTER), ("A", DIAMOND_A), ("B", DIAMOND_B), ("@join1", DIAMOND_JOIN)]
        .into_iter()
        .map(|(n, l)| (NodeRef::new(n), l))
        .collect();
    Assignment { services, controls }
}
