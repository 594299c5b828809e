//! Discrete-event simulation of the master/slave execution protocol.
//!
//! The master turns an assignment into one [`WorkPackage`] per atomic node
//! and hands each to the node's control node. A control node only sees its
//! packages: who feeds each node and where results go next. Results travel
//! `v -> cv -> cw -> w`; the last leg is taken per input as soon as that
//! input reaches `cw`, and a node runs once all of its inputs reached it.
//!
//! Package distribution happens before the clock starts, so the fault-free
//! makespan equals the simulated runtime of the QoS engine.
//!
//! When a service fails, its control node reports to the master, which picks
//! a replacement for that task only (the best remaining offer by utility, the
//! other picks fixed) and ships updated packages. Inputs already buffered at
//! the control node are re-forwarded to the new service; completed nodes are
//! not re-run and control nodes stay where they were.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::engine::Behavior;
use crate::error::{Error, Result};
use crate::network::LocationId;
use crate::problem::{resolve_binding, Assignment, Problem};
use crate::sla::{evaluate_qos, ServiceId, ServiceOffer};
use crate::workflow::{AtomicKind, LogicKind, NodeRef, TaskId};

/// Another node a package talks to, with the control node in charge of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peer {
    pub node: NodeRef,
    pub control: LocationId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum PackageWork {
    Service {
        offer: ServiceOffer,
    },
    #[serde(rename_all = "camelCase")]
    Logic {
        kind: LogicKind,
        exec_ms: f64,
    },
}

/// Everything a control node knows about one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkPackage {
    pub node: NodeRef,
    pub control: LocationId,
    /// Where the node runs: the service's site, or the control node itself.
    pub location: LocationId,
    pub work: PackageWork,
    pub predecessors: Vec<Peer>,
    pub successors: Vec<Peer>,
    pub return_to_master: bool,
}

impl WorkPackage {
    pub fn service(&self) -> Option<&ServiceOffer> {
        match &self.work {
            PackageWork::Service { offer } => Some(offer),
            PackageWork::Logic { .. } => None,
        }
    }
}

/// Packages per control node, each list in graph order.
pub type Distribution = BTreeMap<LocationId, Vec<WorkPackage>>;

/// Builds one package per atomic node and groups them by control node.
pub fn plan_and_distribute(p: &Problem, assignment: &Assignment) -> Result<Distribution> {
    let g = &p.graph;
    let binding = resolve_binding(g, &p.plan, &p.catalog, assignment)?;
    let peer = |i: usize| Peer { node: g.node(i).id.clone(), control: binding.node(i).control };
    let mut out: Distribution = BTreeMap::new();
    for (i, node) in g.nodes().iter().enumerate() {
        let b = binding.node(i);
        let work = match (&node.kind, b.behavior) {
            (AtomicKind::Service { .. }, Behavior::Service(offer)) => PackageWork::Service { offer: offer.clone() },
            (AtomicKind::Logic { kind, exec_ms }, _) => PackageWork::Logic { kind: *kind, exec_ms: *exec_ms },
            (AtomicKind::Service { .. }, Behavior::Logic { .. }) => unreachable!("services bind to offers"),
        };
        out.entry(b.control).or_default().push(WorkPackage {
            node: node.id.clone(),
            control: b.control,
            location: b.location,
            work,
            predecessors: node.incoming.iter().map(|&v| peer(v)).collect(),
            successors: node.outgoing.iter().map(|&w| peer(w)).collect(),
            return_to_master: i == g.end(),
        });
    }
    Ok(out)
}

/// A service stops `after_ms` after its execution started. With `service`
/// set, only a run on that offer fails. Each fault fires at most once; a
/// fault at or past the execution time has no effect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Fault {
    pub node: NodeRef,
    #[serde(default)]
    pub after_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<ServiceId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Leg {
    pub from: LocationId,
    pub to: LocationId,
    pub delay_ms: f64,
    pub transfer_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum EventKind {
    PackageDelivered {
        node: NodeRef,
        #[serde(skip_serializing_if = "Option::is_none")]
        service: Option<ServiceId>,
    },
    #[serde(rename_all = "camelCase")]
    ExecStarted {
        node: NodeRef,
        location: LocationId,
        input_mb: f64,
    },
    #[serde(rename_all = "camelCase")]
    ExecFinished {
        node: NodeRef,
        location: LocationId,
        output_mb: f64,
    },
    /// A result leaves `from` for `to`; the legs are `v -> cv -> cw -> w`.
    #[serde(rename_all = "camelCase")]
    ResultSent {
        from: NodeRef,
        to: NodeRef,
        size_mb: f64,
        legs: Vec<Leg>,
    },
    /// The result of `from` reached the control node of `node`.
    InputArrived {
        node: NodeRef,
        from: NodeRef,
    },
    /// ... and was forwarded to where `node` runs.
    InputDelivered {
        node: NodeRef,
        from: NodeRef,
    },
    ServiceFailed {
        node: NodeRef,
        service: ServiceId,
    },
    /// The slave's report: which service failed and which inputs it holds.
    #[serde(rename_all = "camelCase")]
    FailureReported {
        node: NodeRef,
        service: ServiceId,
        failed_at_ms: f64,
        buffered_inputs: Vec<NodeRef>,
    },
    Rescheduled {
        task: TaskId,
        from: ServiceId,
        to: ServiceId,
        nodes: Vec<NodeRef>,
    },
    Unrecoverable {
        task: TaskId,
        node: NodeRef,
    },
    #[serde(rename_all = "camelCase")]
    FinalResult {
        size_mb: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimEvent {
    pub seq: u64,
    pub time_ms: f64,
    /// The control node handling the event.
    pub control: LocationId,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum Outcome {
    Completed,
    Unrecoverable { task: TaskId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trace {
    pub outcome: Outcome,
    /// Time at which the master holds the final result.
    pub makespan_ms: Option<f64>,
    /// The assignment in force at the end, after any rescheduling.
    pub assignment: Assignment,
    pub events: Vec<SimEvent>,
}

impl Trace {
    pub fn starts(&self) -> impl Iterator<Item = (&NodeRef, f64)> {
        self.events.iter().filter_map(|e| match &e.kind {
            EventKind::ExecStarted { node, .. } => Some((node, e.time_ms)),
            _ => None,
        })
    }
}

/// Runs the protocol for a fresh distribution of `assignment`.
pub fn run_protocol(p: &Problem, assignment: &Assignment, faults: &[Fault]) -> Result<Trace> {
    let packages = plan_and_distribute(p, assignment)?;
    run_packages(p, assignment, &packages, faults)
}

#[derive(Clone, Debug)]
enum Msg {
    Deliver { node: usize, package: Box<WorkPackage> },
    Arrive { node: usize, from: usize, size: f64, control: LocationId },
    Reach { node: usize, from: usize, size: f64, epoch: u32 },
    Finish { node: usize, epoch: u32, output: f64 },
    Fail { node: usize, epoch: u32, service: ServiceId },
    Report { node: usize, service: ServiceId, failed_at: f64 },
}

struct Queued {
    time: f64,
    seq: u64,
    msg: Msg,
}

impl PartialEq for Queued {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Queued {
    // min-heap on (time, seq)
    fn cmp(&self, o: &Self) -> Ordering {
        o.time.total_cmp(&self.time).then(o.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct Slot {
    package: Option<WorkPackage>,
    epoch: u32,
    /// Inputs held at the control node, by producer.
    buffered: BTreeMap<usize, f64>,
    /// Inputs that reached the node in the current epoch.
    reached: BTreeMap<usize, f64>,
    running: bool,
    done: bool,
}

struct Sim<'a> {
    p: &'a Problem,
    index: BTreeMap<NodeRef, usize>,
    slots: Vec<Slot>,
    queue: BinaryHeap<Queued>,
    next_seq: u64,
    events: Vec<SimEvent>,
    faults: Vec<(Fault, bool)>,
    assignment: Assignment,
    excluded: BTreeSet<ServiceId>,
    outcome: Option<Outcome>,
    makespan: Option<f64>,
}

impl<'a> Sim<'a> {
    fn push(&mut self, time: f64, msg: Msg) {
        self.queue.push(Queued { time, seq: self.next_seq, msg });
        self.next_seq += 1;
    }

    fn log(&mut self, time_ms: f64, control: LocationId, kind: EventKind) {
        let seq = self.events.len() as u64;
        self.events.push(SimEvent { seq, time_ms, control, kind });
    }

    fn id(&self, i: usize) -> NodeRef {
        self.p.graph.node(i).id.clone()
    }

    fn lookup(&self, n: &NodeRef) -> Result<usize> {
        self.index.get(n).copied().ok_or_else(|| Error::Protocol(format!("package refers to unknown node {n}")))
    }

    fn package(&self, i: usize) -> Result<&WorkPackage> {
        self.slots[i].package.as_ref().ok_or_else(|| Error::Protocol(format!("no package for node {}", self.id(i))))
    }

    fn leg(&self, from: LocationId, to: LocationId, size: f64) -> Result<Leg> {
        let q = self.p.network.get_network_qos(from, to)?;
        Ok(Leg { from, to, delay_ms: q.delay_ms, transfer_ms: q.transfer_ms(size) })
    }

    fn handle(&mut self, now: f64, msg: Msg) -> Result<()> {
        match msg {
            Msg::Deliver { node, package } => {
                let control = package.control;
                let service = package.service().map(|o| o.id.clone());
                let location = package.location;
                let slot = &mut self.slots[node];
                slot.epoch += 1;
                slot.reached.clear();
                slot.package = Some(*package);
                let epoch = slot.epoch;
                let held: Vec<(usize, f64)> = slot.buffered.iter().map(|(&k, &v)| (k, v)).collect();
                self.log(now, control, EventKind::PackageDelivered { node: self.id(node), service });
                for (from, size) in held {
                    let l = self.leg(control, location, size)?;
                    self.push(now + l.delay_ms + l.transfer_ms, Msg::Reach { node, from, size, epoch });
                }
                self.try_start(now, node)?;
            }
            Msg::Arrive { node, from, size, control } => {
                self.slots[node].buffered.insert(from, size);
                self.log(now, control, EventKind::InputArrived { node: self.id(node), from: self.id(from) });
                // inputs for a node without a package stay buffered
                if let Some(loc) = self.slots[node].package.as_ref().map(|pk| pk.location) {
                    let l = self.leg(control, loc, size)?;
                    let epoch = self.slots[node].epoch;
                    self.push(now + l.delay_ms + l.transfer_ms, Msg::Reach { node, from, size, epoch });
                }
            }
            Msg::Reach { node, from, size, epoch } => {
                if epoch != self.slots[node].epoch {
                    return Ok(());
                }
                self.slots[node].reached.insert(from, size);
                let control = self.package(node)?.control;
                self.log(now, control, EventKind::InputDelivered { node: self.id(node), from: self.id(from) });
                self.try_start(now, node)?;
            }
            Msg::Finish { node, epoch, output } => {
                if epoch != self.slots[node].epoch {
                    return Ok(());
                }
                let pk = self.package(node)?.clone();
                let slot = &mut self.slots[node];
                slot.running = false;
                slot.done = true;
                self.log(
                    now,
                    pk.control,
                    EventKind::ExecFinished { node: pk.node.clone(), location: pk.location, output_mb: output },
                );
                if pk.return_to_master {
                    self.makespan = Some(now);
                    self.outcome = Some(Outcome::Completed);
                    self.log(now, self.p.plan.master, EventKind::FinalResult { size_mb: output });
                    return Ok(());
                }
                for succ in &pk.successors {
                    let w = self.lookup(&succ.node)?;
                    let legs =
                        vec![self.leg(pk.location, pk.control, output)?, self.leg(pk.control, succ.control, output)?];
                    let t = legs.iter().fold(now, |t, l| t + l.delay_ms + l.transfer_ms);
                    let mut shown = legs;
                    // the last leg as planned; it is taken from cw on arrival
                    if let Some(wp) = &self.slots[w].package {
                        shown.push(self.leg(succ.control, wp.location, output)?);
                    }
                    self.log(
                        now,
                        pk.control,
                        EventKind::ResultSent {
                            from: pk.node.clone(),
                            to: succ.node.clone(),
                            size_mb: output,
                            legs: shown,
                        },
                    );
                    self.push(t, Msg::Arrive { node: w, from: node, size: output, control: succ.control });
                }
            }
            Msg::Fail { node, epoch, service } => {
                if epoch != self.slots[node].epoch {
                    return Ok(());
                }
                self.slots[node].running = false;
                let pk = self.package(node)?.clone();
                self.log(now, pk.control, EventKind::ServiceFailed { node: pk.node.clone(), service: service.clone() });
                let detect = self.p.network.get_network_qos(pk.location, pk.control)?.delay_ms;
                let report = self.p.network.get_network_qos(pk.control, self.p.plan.master)?.delay_ms;
                self.push(now + detect + report, Msg::Report { node, service, failed_at: now });
            }
            Msg::Report { node, service, failed_at } => {
                let buffered_inputs = self.slots[node].buffered.keys().map(|&v| self.id(v)).collect();
                let master = self.p.plan.master;
                self.log(
                    now,
                    master,
                    EventKind::FailureReported {
                        node: self.id(node),
                        service: service.clone(),
                        failed_at_ms: failed_at,
                        buffered_inputs,
                    },
                );
                self.reschedule(now, node, service)?;
            }
        }
        Ok(())
    }

    fn try_start(&mut self, now: f64, node: usize) -> Result<()> {
        let pk = self.package(node)?;
        let slot = &self.slots[node];
        if slot.running || slot.done || slot.reached.len() < pk.predecessors.len() {
            return Ok(());
        }
        // same summation order as the engine
        let input = if node == self.p.graph.start() {
            self.p.input_mb
        } else {
            self.p.graph.node(node).incoming.iter().map(|u| slot.reached.get(u).copied().unwrap_or(0.0)).sum()
        };
        let (exec_ms, output, service) = match &pk.work {
            PackageWork::Service { offer } => {
                let inv = evaluate_qos(offer, input);
                (inv.exec_ms, inv.output_mb, Some(offer.id.clone()))
            }
            PackageWork::Logic { exec_ms, .. } => (*exec_ms, input, None),
        };
        let (control, location, id) = (pk.control, pk.location, pk.node.clone());
        let epoch = slot.epoch;
        self.slots[node].running = true;
        self.log(now, control, EventKind::ExecStarted { node: id.clone(), location, input_mb: input });

        let fault = self.faults.iter_mut().find(|(f, used)| {
            !*used && f.node == id && (f.service.is_none() || f.service == service) && f.after_ms < exec_ms
        });
        match (fault, service) {
            (Some((f, used)), Some(service)) => {
                *used = true;
                let t = now + f.after_ms.max(0.0);
                self.push(t, Msg::Fail { node, epoch, service });
            }
            _ => self.push(now + exec_ms, Msg::Finish { node, epoch, output }),
        }
        Ok(())
    }

    fn reschedule(&mut self, now: f64, node: usize, failed: ServiceId) -> Result<()> {
        let master = self.p.plan.master;
        let task = match &self.p.graph.node(node).kind {
            AtomicKind::Service { task } => task.clone(),
            AtomicKind::Logic { .. } => return Err(Error::Protocol("logical nodes cannot fail".into())),
        };
        self.excluded.insert(failed.clone());
        let mut best: Option<(f64, &ServiceOffer)> = None;
        for offer in self.p.catalog.for_task(&task).iter().filter(|o| !self.excluded.contains(&o.id)) {
            let mut trial = self.assignment.clone();
            trial.services.insert(task.clone(), offer.id.clone());
            let (q, _) = self.p.evaluate_assignment(&trial)?;
            let u = self.p.score(&q);
            if best.is_none_or(|(bu, _)| u > bu) {
                best = Some((u, offer));
            }
        }
        let Some((_, offer)) = best else {
            self.log(now, master, EventKind::Unrecoverable { task: task.clone(), node: self.id(node) });
            self.outcome = Some(Outcome::Unrecoverable { task });
            return Ok(());
        };
        let offer = offer.clone();
        self.assignment.services.insert(task.clone(), offer.id.clone());

        // every node of the task that has not started yet, plus the failed one
        let affected: Vec<usize> = (0..self.slots.len())
            .filter(|&i| self.p.graph.node(i).task() == Some(&task))
            .filter(|&i| i == node || (!self.slots[i].running && !self.slots[i].done))
            .collect();
        let nodes = affected.iter().map(|&i| self.id(i)).collect();
        self.log(now, master, EventKind::Rescheduled { task, from: failed, to: offer.id.clone(), nodes });
        for i in affected {
            let mut pk = self.package(i)?.clone();
            pk.location = offer.location;
            pk.work = PackageWork::Service { offer: offer.clone() };
            let delay = self.p.network.get_network_qos(master, pk.control)?.delay_ms;
            self.push(now + delay, Msg::Deliver { node: i, package: Box::new(pk) });
        }
        Ok(())
    }
}

/// Runs the protocol on an explicit distribution. Every package must sit at
/// the control node it names; a node whose package is missing starves.
pub fn run_packages(p: &Problem, assignment: &Assignment, packages: &Distribution, faults: &[Fault]) -> Result<Trace> {
    let g = &p.graph;
    let index: BTreeMap<NodeRef, usize> = g.nodes().iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
    for f in faults {
        if !index.contains_key(&f.node) {
            return Err(Error::Config(format!("fault names unknown node {}", f.node)));
        }
    }
    let mut sim = Sim {
        p,
        slots: (0..g.len()).map(|_| Slot::default()).collect(),
        index,
        queue: BinaryHeap::new(),
        next_seq: 0,
        events: Vec::new(),
        faults: faults.iter().map(|f| (f.clone(), false)).collect(),
        assignment: assignment.clone(),
        excluded: BTreeSet::new(),
        outcome: None,
        makespan: None,
    };
    // order deliveries by node so equal-time events follow graph order
    let mut initial = Vec::new();
    for (&control, list) in packages {
        for pk in list {
            if pk.control != control {
                return Err(Error::Protocol(format!(
                    "package for {} delivered to {control}, names {}",
                    pk.node, pk.control
                )));
            }
            initial.push((sim.lookup(&pk.node)?, pk.clone()));
        }
    }
    initial.sort_by_key(|(i, _)| *i);
    for (i, pk) in initial {
        sim.push(0.0, Msg::Deliver { node: i, package: Box::new(pk) });
    }

    while let Some(Queued { time, msg, .. }) = sim.queue.pop() {
        sim.handle(time, msg)?;
        if sim.outcome.is_some() {
            break;
        }
    }
    let outcome = match sim.outcome.take() {
        Some(o) => o,
        None => {
            let starved: Vec<String> =
                (0..g.len()).filter(|&i| !sim.slots[i].done).map(|i| g.node(i).id.0.clone()).collect();
            return Err(Error::Protocol(format!("deadlock: nodes never ran: {}", starved.join(", "))));
        }
    };
    Ok(Trace { outcome, makespan_ms: sim.makespan, assignment: sim.assignment, events: sim.events })
}
