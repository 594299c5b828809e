//! Service and control-node selection.
//!
//! * [`brute_force`]: exhaustive oracle for small problems.
//! * [`dijkstra_sequential`]: exact shortest path for pure sequences.
//! * [`ga_standard`]: plain genetic algorithm.
//! * [`ga_network_aware`]: genetic algorithm with locality-biased operators
//!   (a NetGA-like stand-in).
//!
//! The unlimited-control ("[o]") variants run the same algorithms on
//! [`Problem::unlimited_control_variant`].

mod brute;
mod dijkstra;
mod ga;

use serde::Serialize;

pub use brute::{brute_force, enumerate, DEFAULT_EVALUATION_CAP};
pub use dijkstra::dijkstra_sequential;
pub use ga::{ga_network_aware, ga_standard, GaConfig, GaRun};

use crate::problem::{Assignment, Evaluation, Genome, Problem};
use crate::sla::QosVector;

/// Best assignment found by an optimizer.
#[derive(Clone, Debug)]
pub struct Solution {
    pub genome: Genome,
    pub assignment: Assignment,
    pub evaluation: Evaluation,
    /// Number of full QoS evaluations (or relaxed edges, for Dijkstra).
    pub evaluations: u64,
}

impl Solution {
    pub(crate) fn new(p: &Problem, genome: Genome, evaluation: Evaluation, evaluations: u64) -> Self {
        Solution { assignment: p.assignment(&genome), genome, evaluation, evaluations }
    }

    pub fn qos(&self) -> &QosVector {
        &self.evaluation.qos
    }
}

/// Serialized result of a solver run.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveReport {
    pub algorithm: String,
    pub assignment: Assignment,
    pub qos: QosVector,
    pub utility: f64,
    pub evaluations: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    BruteForce,
    Dijkstra,
    Ga,
    NetGa,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::BruteForce => "brute",
            Algorithm::Dijkstra => "dijkstra",
            Algorithm::Ga => "ga",
            Algorithm::NetGa => "netga-like",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "brute" => Some(Algorithm::BruteForce),
            "dijkstra" => Some(Algorithm::Dijkstra),
            "ga" => Some(Algorithm::Ga),
            "netga" | "netga-like" => Some(Algorithm::NetGa),
            _ => None,
        }
    }

    pub fn run(self, p: &Problem, cfg: &GaConfig) -> crate::Result<Solution> {
        match self {
            Algorithm::BruteForce => brute_force(p, DEFAULT_EVALUATION_CAP),
            Algorithm::Dijkstra => dijkstra_sequential(p),
            Algorithm::Ga => Ok(ga_standard(p, cfg)?.best),
            Algorithm::NetGa => Ok(ga_network_aware(p, cfg)?.best),
        }
    }
}
