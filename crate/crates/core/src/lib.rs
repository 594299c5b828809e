//! Network- and QoS-aware service composition.
//!
//! Workflows are hierarchical trees of service and logical nodes. They are
//! normalized (explicit start/end and fork/join nodes, unrolled loops) and
//! mapped onto an execution graph. Every atomic node is invoked by a control
//! node: the master or one of the deployed slaves. Results travel over three
//! legs, node to its control node, control node to the successor's control
//! node, and finally to the successor itself.
//!
//! The QoS of a composition is computed in two phases. The execution is
//! simulated on the graph to obtain start/end times (runtime and network
//! latency), then the remaining attributes are aggregated along the tree.

pub mod engine;
pub mod error;
pub mod execsim;
pub mod fixtures;
pub mod network;
pub mod optimize;
pub mod problem;
pub mod rng;
pub mod scenario;
pub mod sla;
pub mod utility;
pub mod workflow;

pub use error::{Error, Result};
pub use network::{LinkQos, LocationId, NetworkModel};
pub use problem::{Assignment, ControlPlan, Problem};
pub use sla::{OfferCatalog, QosVector, ServiceOffer, SlaProfile};
pub use workflow::{ExecGraph, NodeRef, TaskId, WorkflowExpr};
