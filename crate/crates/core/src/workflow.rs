//! Hierarchical workflows and their execution graphs.
//!
//! A [`WorkflowExpr`] is a tree of service nodes, logical nodes and patterns.
//! [`WorkflowExpr::normalize`] adds the explicit start/end nodes, wraps every
//! parallel pattern in fork/join (or decision/merge) nodes and unrolls loops.
//! [`ExecGraph::from_normalized`] then maps the normalized tree onto a DAG with
//! [`map_to_graph`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of an atomic node (service or logical) in a workflow.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeRef(pub String);

impl NodeRef {
    pub fn new(s: impl Into<String>) -> Self {
        NodeRef(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeRef {
    fn from(s: &str) -> Self {
        NodeRef(s.to_owned())
    }
}

/// Abstract task implemented by one or more concrete services.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub String);

impl TaskId {
    pub fn new(s: impl Into<String>) -> Self {
        TaskId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TaskId {
    fn from(s: &str) -> Self {
        TaskId(s.to_owned())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogicKind {
    Start,
    End,
    Fork,
    Join,
    Decision,
    Merge,
    LoopHead,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PatternKind {
    Seq,
    And,
    Xor,
    Or,
    Loop,
}

impl PatternKind {
    fn name(self) -> &'static str {
        match self {
            PatternKind::Seq => "seq",
            PatternKind::And => "and",
            PatternKind::Xor => "xor",
            PatternKind::Or => "or",
            PatternKind::Loop => "loop",
        }
    }

    pub fn is_parallel(self) -> bool {
        matches!(self, PatternKind::And | PatternKind::Xor | PatternKind::Or)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServiceNode {
    pub id: NodeRef,
    pub task: TaskId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogicNode {
    pub id: NodeRef,
    pub kind: LogicKind,
    /// Processing time of the business logic itself.
    pub exec_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pattern {
    pub kind: PatternKind,
    pub children: Vec<WorkflowExpr>,
    /// Iteration count; only meaningful for [`PatternKind::Loop`], 1 otherwise.
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExprFile", into = "ExprFile")]
pub enum WorkflowExpr {
    Service(ServiceNode),
    Logic(LogicNode),
    Pattern(Pattern),
}

/// What an atomic node does when it executes.
#[derive(Clone, Debug, PartialEq)]
pub enum AtomicKind {
    Service { task: TaskId },
    Logic { kind: LogicKind, exec_ms: f64 },
}

pub const START: &str = "@start";
pub const END: &str = "@end";

impl WorkflowExpr {
    /// Service node whose node id equals its task id.
    pub fn service(task: &str) -> Self {
        WorkflowExpr::Service(ServiceNode { id: NodeRef::new(task), task: TaskId::new(task) })
    }

    pub fn logic(id: &str, kind: LogicKind) -> Self {
        WorkflowExpr::Logic(LogicNode { id: NodeRef::new(id), kind, exec_ms: 0.0 })
    }

    pub fn pattern(kind: PatternKind, children: Vec<WorkflowExpr>) -> Self {
        WorkflowExpr::Pattern(Pattern { kind, children, count: 1 })
    }

    pub fn seq(children: Vec<WorkflowExpr>) -> Self {
        Self::pattern(PatternKind::Seq, children)
    }

    pub fn and(children: Vec<WorkflowExpr>) -> Self {
        Self::pattern(PatternKind::And, children)
    }

    pub fn xor(children: Vec<WorkflowExpr>) -> Self {
        Self::pattern(PatternKind::Xor, children)
    }

    pub fn or(children: Vec<WorkflowExpr>) -> Self {
        Self::pattern(PatternKind::Or, children)
    }

    pub fn repeat(children: Vec<WorkflowExpr>, count: u32) -> Self {
        WorkflowExpr::Pattern(Pattern { kind: PatternKind::Loop, children, count })
    }

    /// Id of an atomic expression.
    pub fn atomic_id(&self) -> Option<&NodeRef> {
        match self {
            WorkflowExpr::Service(s) => Some(&s.id),
            WorkflowExpr::Logic(l) => Some(&l.id),
            WorkflowExpr::Pattern(_) => None,
        }
    }

    fn atomic_kind(&self) -> Option<AtomicKind> {
        match self {
            WorkflowExpr::Service(s) => Some(AtomicKind::Service { task: s.task.clone() }),
            WorkflowExpr::Logic(l) => Some(AtomicKind::Logic { kind: l.kind, exec_ms: l.exec_ms }),
            WorkflowExpr::Pattern(_) => None,
        }
    }

    /// Atomic nodes in depth-first, left-to-right order.
    pub fn atomic_nodes(&self) -> Vec<&WorkflowExpr> {
        let mut out = Vec::new();
        self.collect_atomic(&mut out);
        out
    }

    fn collect_atomic<'a>(&'a self, out: &mut Vec<&'a WorkflowExpr>) {
        match self {
            WorkflowExpr::Pattern(p) => p.children.iter().for_each(|c| c.collect_atomic(out)),
            atomic => out.push(atomic),
        }
    }

    pub fn service_count(&self) -> usize {
        self.atomic_nodes().iter().filter(|n| matches!(n, WorkflowExpr::Service(_))).count()
    }

    pub fn tasks(&self) -> BTreeSet<TaskId> {
        self.atomic_nodes()
            .into_iter()
            .filter_map(|n| match n {
                WorkflowExpr::Service(s) => Some(s.task.clone()),
                _ => None,
            })
            .collect()
    }

    /// Checks pattern arity, loop counts and node-id uniqueness.
    pub fn validate(&self) -> Result<()> {
        self.validate_patterns()?;
        let mut seen = HashSet::new();
        for node in self.atomic_nodes() {
            let id = node.atomic_id().expect("atomic");
            if !seen.insert(id) {
                return Err(Error::Structure(format!("duplicate node id {id}")));
            }
        }
        Ok(())
    }

    fn validate_patterns(&self) -> Result<()> {
        match self {
            WorkflowExpr::Service(_) => Ok(()),
            WorkflowExpr::Logic(l) => {
                if !(l.exec_ms.is_finite() && l.exec_ms >= 0.0) {
                    return Err(Error::Structure(format!("logical node {} has invalid exec time", l.id)));
                }
                Ok(())
            }
            WorkflowExpr::Pattern(p) => {
                if p.children.is_empty() {
                    return Err(Error::Structure(format!("empty {} pattern", p.kind.name())));
                }
                if p.count == 0 {
                    return Err(Error::Structure("loop count must be at least 1".into()));
                }
                if p.kind != PatternKind::Loop && p.count != 1 {
                    return Err(Error::Structure(format!("count given on a {} pattern", p.kind.name())));
                }
                p.children.iter().try_for_each(|c| c.validate_patterns())
            }
        }
    }

    /// Validation of a user-supplied (not yet normalized) workflow: task ids
    /// are unique and reserved `@` names are not used.
    pub fn validate_source(&self) -> Result<()> {
        self.validate()?;
        let mut tasks = HashSet::new();
        for node in self.atomic_nodes() {
            let id = node.atomic_id().expect("atomic");
            if id.as_str().starts_with('@') {
                return Err(Error::Structure(format!("node id {id} uses the reserved '@' prefix")));
            }
            match node {
                WorkflowExpr::Service(s) => {
                    if !tasks.insert(&s.task) {
                        return Err(Error::Structure(format!("task {} appears twice", s.task)));
                    }
                }
                WorkflowExpr::Logic(l) if matches!(l.kind, LogicKind::Start | LogicKind::End) => {
                    return Err(Error::Structure("start/end nodes are added by normalization".into()));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Atomic nodes executed first within this (sub)workflow. Parallel
    /// patterns contribute the union over all their branches.
    pub fn first(&self) -> Result<BTreeSet<NodeRef>> {
        self.boundary(true)
    }

    /// Atomic nodes executed last within this (sub)workflow.
    pub fn last(&self) -> Result<BTreeSet<NodeRef>> {
        self.boundary(false)
    }

    fn boundary(&self, first: bool) -> Result<BTreeSet<NodeRef>> {
        match self {
            WorkflowExpr::Service(_) | WorkflowExpr::Logic(_) => {
                Ok(BTreeSet::from([self.atomic_id().expect("atomic").clone()]))
            }
            WorkflowExpr::Pattern(p) => {
                if p.children.is_empty() {
                    return Err(Error::Structure(format!("empty {} pattern", p.kind.name())));
                }
                match p.kind {
                    PatternKind::Seq | PatternKind::Loop => {
                        let child = if first { p.children.first() } else { p.children.last() };
                        child.expect("non-empty").boundary(first)
                    }
                    PatternKind::And | PatternKind::Xor | PatternKind::Or => {
                        let mut set = BTreeSet::new();
                        for c in &p.children {
                            set.extend(c.boundary(first)?);
                        }
                        Ok(set)
                    }
                }
            }
        }
    }

    /// Returns `Seq(start, wf', end)` where `wf'` has explicit fork/join nodes
    /// around every AND pattern (decision/merge around XOR and OR) and every
    /// loop unrolled. Copies of unrolled nodes get a `#i` suffix.
    pub fn normalize(&self) -> Result<WorkflowExpr> {
        self.validate_source()?;
        let mut counter = 0usize;
        let mut items = vec![WorkflowExpr::logic(START, LogicKind::Start)];
        push_flat(&mut items, normalize_rec(self, "", &mut counter));
        items.push(WorkflowExpr::logic(END, LogicKind::End));
        let out = WorkflowExpr::seq(items);
        out.validate()?;
        Ok(out)
    }

    fn suffixed(&self, suffix: &str) -> WorkflowExpr {
        match self {
            WorkflowExpr::Service(s) => {
                WorkflowExpr::Service(ServiceNode { id: NodeRef(format!("{}{}", s.id, suffix)), task: s.task.clone() })
            }
            WorkflowExpr::Logic(l) => WorkflowExpr::Logic(LogicNode {
                id: NodeRef(format!("{}{}", l.id, suffix)),
                kind: l.kind,
                exec_ms: l.exec_ms,
            }),
            WorkflowExpr::Pattern(_) => unreachable!("only atomic nodes are renamed"),
        }
    }
}

fn push_flat(items: &mut Vec<WorkflowExpr>, expr: WorkflowExpr) {
    match expr {
        WorkflowExpr::Pattern(Pattern { kind: PatternKind::Seq, children, .. }) => items.extend(children),
        other => items.push(other),
    }
}

fn normalize_rec(expr: &WorkflowExpr, suffix: &str, counter: &mut usize) -> WorkflowExpr {
    match expr {
        WorkflowExpr::Service(_) | WorkflowExpr::Logic(_) => expr.suffixed(suffix),
        WorkflowExpr::Pattern(p) => match p.kind {
            PatternKind::Seq => {
                let mut items = Vec::new();
                for c in &p.children {
                    push_flat(&mut items, normalize_rec(c, suffix, counter));
                }
                WorkflowExpr::seq(items)
            }
            PatternKind::Loop => {
                let mut items = Vec::new();
                for i in 1..=p.count {
                    let copy_suffix = if p.count == 1 { suffix.to_owned() } else { format!("{suffix}#{i}") };
                    for c in &p.children {
                        push_flat(&mut items, normalize_rec(c, &copy_suffix, counter));
                    }
                }
                WorkflowExpr::seq(items)
            }
            PatternKind::And | PatternKind::Xor | PatternKind::Or => {
                *counter += 1;
                let n = *counter;
                let (open, close, open_name, close_name) = if p.kind == PatternKind::And {
                    (LogicKind::Fork, LogicKind::Join, "fork", "join")
                } else {
                    (LogicKind::Decision, LogicKind::Merge, "decision", "merge")
                };
                let branches = p.children.iter().map(|c| normalize_rec(c, suffix, counter)).collect();
                WorkflowExpr::seq(vec![
                    WorkflowExpr::logic(&format!("@{open_name}{n}"), open),
                    WorkflowExpr::pattern(p.kind, branches),
                    WorkflowExpr::logic(&format!("@{close_name}{n}"), close),
                ])
            }
        },
    }
}

impl fmt::Display for WorkflowExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkflowExpr::Service(s) => write!(f, "{}", s.id),
            WorkflowExpr::Logic(l) => write!(f, "{}", l.id),
            WorkflowExpr::Pattern(p) => {
                let name = match p.kind {
                    PatternKind::Seq => "Seq",
                    PatternKind::And => "AND",
                    PatternKind::Xor => "XOR",
                    PatternKind::Or => "OR",
                    PatternKind::Loop => "Loop",
                };
                write!(f, "{name}(")?;
                for (i, c) in p.children.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                if p.kind == PatternKind::Loop {
                    write!(f, "; count={}", p.count)?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Edge accumulator used by [`map_to_graph`]. Vertices are kept in the order
/// they are first visited, edges are deduplicated.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<(NodeRef, AtomicKind)>,
    index: HashMap<NodeRef, usize>,
    edges: Vec<(NodeRef, NodeRef)>,
    edge_set: HashSet<(NodeRef, NodeRef)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_vertex(&mut self, id: &NodeRef, kind: AtomicKind) {
        if !self.index.contains_key(id) {
            self.index.insert(id.clone(), self.nodes.len());
            self.nodes.push((id.clone(), kind));
        }
    }

    pub fn add_edge(&mut self, from: &NodeRef, to: &NodeRef) {
        let e = (from.clone(), to.clone());
        if self.edge_set.insert(e.clone()) {
            self.edges.push(e);
        }
    }

    pub fn edges(&self) -> &[(NodeRef, NodeRef)] {
        &self.edges
    }
}

/// Connects `wf` into `g`: every node in `fs` gets an edge to the entry nodes
/// of `wf` and the exit nodes of `wf` get an edge to every node in `ls`.
pub fn map_to_graph(
    fs: &BTreeSet<NodeRef>,
    wf: &WorkflowExpr,
    ls: &BTreeSet<NodeRef>,
    g: &mut GraphBuilder,
) -> Result<()> {
    match wf {
        WorkflowExpr::Service(_) | WorkflowExpr::Logic(_) => {
            let id = wf.atomic_id().expect("atomic");
            g.add_vertex(id, wf.atomic_kind().expect("atomic"));
            for f in fs {
                g.add_edge(f, id);
            }
            for l in ls {
                g.add_edge(id, l);
            }
            Ok(())
        }
        WorkflowExpr::Pattern(p) => match p.kind {
            PatternKind::Seq | PatternKind::Loop => match p.children.as_slice() {
                [] => Err(Error::Structure("empty sequence".into())),
                [only] => map_to_graph(fs, only, ls, g),
                [head, tail @ ..] => {
                    let tail = WorkflowExpr::pattern(PatternKind::Seq, tail.to_vec());
                    map_to_graph(fs, head, &tail.first()?, g)?;
                    map_to_graph(&head.last()?, &tail, ls, g)
                }
            },
            PatternKind::And | PatternKind::Xor | PatternKind::Or => {
                if p.children.is_empty() {
                    return Err(Error::Structure(format!("empty {} pattern", p.kind.name())));
                }
                p.children.iter().try_for_each(|c| map_to_graph(fs, c, ls, g))
            }
        },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphNode {
    pub id: NodeRef,
    pub kind: AtomicKind,
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
}

impl GraphNode {
    pub fn task(&self) -> Option<&TaskId> {
        match &self.kind {
            AtomicKind::Service { task } => Some(task),
            AtomicKind::Logic { .. } => None,
        }
    }

    pub fn is_service(&self) -> bool {
        matches!(self.kind, AtomicKind::Service { .. })
    }
}

/// The normalized tree with leaves replaced by graph vertex indices; used by
/// the hierarchical aggregation.
#[derive(Clone, Debug, PartialEq)]
pub enum IndexTree {
    Leaf(usize),
    Node { kind: PatternKind, children: Vec<IndexTree> },
}

/// Directed acyclic graph of atomic nodes with a single start and end node.
#[derive(Clone, Debug)]
pub struct ExecGraph {
    nodes: Vec<GraphNode>,
    index: HashMap<NodeRef, usize>,
    start: usize,
    end: usize,
    tree: IndexTree,
    edge_count: usize,
}

impl ExecGraph {
    /// Builds the graph of a normalized workflow.
    pub fn from_normalized(wf: &WorkflowExpr) -> Result<Self> {
        wf.validate()?;
        let mut b = GraphBuilder::new();
        map_to_graph(&BTreeSet::new(), wf, &BTreeSet::new(), &mut b)?;
        let GraphBuilder { nodes, index, edges, .. } = b;

        let mut gnodes: Vec<GraphNode> = nodes
            .into_iter()
            .map(|(id, kind)| GraphNode { id, kind, incoming: Vec::new(), outgoing: Vec::new() })
            .collect();
        for (from, to) in &edges {
            let (Some(&a), Some(&z)) = (index.get(from), index.get(to)) else {
                return Err(Error::Structure(format!("edge {from} -> {to} references an unknown node")));
            };
            gnodes[a].outgoing.push(z);
            gnodes[z].incoming.push(a);
        }

        let sources: Vec<usize> = (0..gnodes.len()).filter(|&i| gnodes[i].incoming.is_empty()).collect();
        let sinks: Vec<usize> = (0..gnodes.len()).filter(|&i| gnodes[i].outgoing.is_empty()).collect();
        let (&[start], &[end]) = (sources.as_slice(), sinks.as_slice()) else {
            return Err(Error::Structure(format!(
                "expected one source and one sink, found {} and {}",
                sources.len(),
                sinks.len()
            )));
        };
        for (i, want) in [(start, LogicKind::Start), (end, LogicKind::End)] {
            match gnodes[i].kind {
                AtomicKind::Logic { kind, .. } if kind == want => {}
                _ => {
                    return Err(Error::Structure(format!(
                        "node {} must be a {:?} logical node; normalize the workflow first",
                        gnodes[i].id, want
                    )))
                }
            }
        }

        let tree = index_tree(wf, &index);
        let graph = ExecGraph { nodes: gnodes, index, start, end, tree, edge_count: edges.len() };
        graph.topological_order()?;
        Ok(graph)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &GraphNode {
        &self.nodes[i]
    }

    pub fn index_of(&self, id: &NodeRef) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn tree(&self) -> &IndexTree {
        &self.tree
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.iter().enumerate().flat_map(|(v, n)| n.outgoing.iter().map(move |&w| (v, w)))
    }

    /// True if the graph is a single chain start → ... → end.
    pub fn is_chain(&self) -> bool {
        self.nodes.iter().all(|n| n.incoming.len() <= 1 && n.outgoing.len() <= 1)
    }

    /// Kahn ordering with ascending-index tie-breaking.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let mut req: Vec<usize> = self.nodes.iter().map(|n| n.incoming.len()).collect();
        let mut ready: BTreeSet<usize> = (0..self.nodes.len()).filter(|&i| req[i] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &w in &self.nodes[v].outgoing {
                req[w] -= 1;
                if req[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        if order.len() != self.nodes.len() {
            let stuck = (0..self.nodes.len()).filter(|&i| req[i] > 0).map(|i| self.nodes[i].id.0.clone()).collect();
            return Err(Error::Cycle(stuck));
        }
        Ok(order)
    }
}

fn index_tree(wf: &WorkflowExpr, index: &HashMap<NodeRef, usize>) -> IndexTree {
    match wf {
        WorkflowExpr::Pattern(p) => {
            IndexTree::Node { kind: p.kind, children: p.children.iter().map(|c| index_tree(c, index)).collect() }
        }
        atomic => IndexTree::Leaf(index[atomic.atomic_id().expect("atomic")]),
    }
}

/// On-disk form of a workflow node.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ExprFile {
    #[serde(rename = "type")]
    ty: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<LogicKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exec_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<ExprFile>>,
}

impl TryFrom<ExprFile> for WorkflowExpr {
    type Error = String;

    fn try_from(f: ExprFile) -> std::result::Result<Self, String> {
        let kind = match f.ty.as_str() {
            "service" => {
                let task = f.task.ok_or("service node without \"task\"")?;
                let id = f.id.unwrap_or_else(|| task.clone());
                return Ok(WorkflowExpr::Service(ServiceNode { id: NodeRef(id), task: TaskId(task) }));
            }
            "logic" => {
                let id = f.id.or(f.task).ok_or("logic node without \"id\"")?;
                let kind = f.kind.ok_or("logic node without \"kind\"")?;
                return Ok(WorkflowExpr::Logic(LogicNode { id: NodeRef(id), kind, exec_ms: f.exec_ms.unwrap_or(0.0) }));
            }
            "seq" => PatternKind::Seq,
            "and" => PatternKind::And,
            "xor" => PatternKind::Xor,
            "or" => PatternKind::Or,
            "loop" => PatternKind::Loop,
            other => return Err(format!("unknown node type {other:?}")),
        };
        let children = f
            .children
            .unwrap_or_default()
            .into_iter()
            .map(WorkflowExpr::try_from)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let count = match (kind, f.count) {
            (PatternKind::Loop, Some(c)) => c,
            (PatternKind::Loop, None) => return Err("loop without \"count\"".into()),
            (_, Some(_)) => return Err(format!("\"count\" is only valid on loops, not {}", f.ty)),
            (_, None) => 1,
        };
        Ok(WorkflowExpr::Pattern(Pattern { kind, children, count }))
    }
}

impl From<WorkflowExpr> for ExprFile {
    fn from(e: WorkflowExpr) -> Self {
        let empty = ExprFile {
            ty: String::new(),
            task: None,
            id: None,
            kind: None,
            exec_ms: None,
            count: None,
            children: None,
        };
        match e {
            WorkflowExpr::Service(s) => ExprFile {
                ty: "service".into(),
                id: (s.id.0 != s.task.0).then(|| s.id.0.clone()),
                task: Some(s.task.0),
                ..empty
            },
            WorkflowExpr::Logic(l) => ExprFile {
                ty: "logic".into(),
                id: Some(l.id.0),
                kind: Some(l.kind),
                exec_ms: (l.exec_ms != 0.0).then_some(l.exec_ms),
                ..empty
            },
            WorkflowExpr::Pattern(p) => ExprFile {
                ty: p.kind.name().into(),
                count: (p.kind == PatternKind::Loop).then_some(p.count),
                children: Some(p.children.into_iter().map(ExprFile::from).collect()),
                ..empty
            },
        }
    }
}
