//! Weighted-sum utility over min-max normalized QoS attributes, with hard
//! constraints handled as a negative score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sla::QosVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Attribute {
    Runtime,
    Cost,
    Availability,
    Latency,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [Attribute::Runtime, Attribute::Cost, Attribute::Availability, Attribute::Latency];

    pub fn of(self, q: &QosVector) -> f64 {
        match self {
            Attribute::Runtime => q.runtime_ms,
            Attribute::Cost => q.cost,
            Attribute::Availability => q.availability,
            Attribute::Latency => q.latency_ms,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn default_direction(self) -> Direction {
        match self {
            Attribute::Availability => Direction::Maximize,
            _ => Direction::Minimize,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Constraint {
    pub attribute: Attribute,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub runtime: f64,
    pub cost: f64,
    pub availability: f64,
    pub latency: f64,
}

impl Weights {
    fn get(&self, a: Attribute) -> f64 {
        match a {
            Attribute::Runtime => self.runtime,
            Attribute::Cost => self.cost,
            Attribute::Availability => self.availability,
            Attribute::Latency => self.latency,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct UtilitySpec {
    pub weights: Weights,
    /// Per-attribute overrides of the default directions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub directions: Vec<(Attribute, Direction)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<Constraint>,
}

impl Default for UtilitySpec {
    fn default() -> Self {
        UtilitySpec::runtime_only()
    }
}

impl UtilitySpec {
    /// Minimize end-to-end runtime only.
    pub fn runtime_only() -> Self {
        UtilitySpec {
            weights: Weights { runtime: 1.0, ..Weights::default() },
            directions: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ws = Attribute::ALL.map(|a| self.weights.get(a));
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Parameter("utility weights must be finite and >= 0".into()));
        }
        let sum: f64 = ws.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("utility weights must sum to 1, got {sum}")));
        }
        Ok(())
    }

    pub fn direction(&self, a: Attribute) -> Direction {
        self.directions.iter().rev().find(|(x, _)| *x == a).map(|(_, d)| *d).unwrap_or(a.default_direction())
    }

    /// The single attribute this spec minimizes, if it weighs only one
    /// minimized attribute and has no constraints.
    pub fn sole_minimized(&self) -> Option<Attribute> {
        if !self.constraints.is_empty() {
            return None;
        }
        let nonzero: Vec<_> = Attribute::ALL.into_iter().filter(|&a| self.weights.get(a) > 0.0).collect();
        match nonzero.as_slice() {
            [a] if self.direction(*a) == Direction::Minimize => Some(*a),
            _ => None,
        }
    }
}

/// Per-attribute normalization range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QosBounds {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl QosBounds {
    pub fn new(lo: QosVector, hi: QosVector) -> Self {
        QosBounds { lo: Attribute::ALL.map(|a| a.of(&lo)), hi: Attribute::ALL.map(|a| a.of(&hi)) }
    }

    /// Min and max of every attribute over a candidate set.
    pub fn from_candidates(qs: &[QosVector]) -> Self {
        let mut b = QosBounds { lo: [f64::INFINITY; 4], hi: [f64::NEG_INFINITY; 4] };
        for q in qs {
            for a in Attribute::ALL {
                let v = a.of(q);
                b.lo[a.index()] = b.lo[a.index()].min(v);
                b.hi[a.index()] = b.hi[a.index()].max(v);
            }
        }
        b
    }

    pub fn range(&self, a: Attribute) -> (f64, f64) {
        (self.lo[a.index()], self.hi[a.index()])
    }
}

/// Score in `[0, 1]` (1 is best) for feasible vectors; a negative score equal
/// to the total normalized constraint violation otherwise. An attribute with
/// a degenerate range contributes its full weight.
pub fn utility(q: &QosVector, spec: &UtilitySpec, bounds: &QosBounds) -> f64 {
    let mut violation = 0.0;
    for c in &spec.constraints {
        let v = c.attribute.of(q);
        let (lo, hi) = bounds.range(c.attribute);
        let scale = if hi > lo { hi - lo } else { 1.0 };
        if let Some(max) = c.max {
            if v > max {
                violation += (v - max) / scale;
            }
        }
        if let Some(min) = c.min {
            if v < min {
                violation += (min - v) / scale;
            }
        }
    }
    if violation > 0.0 {
        return -violation;
    }

    let mut score = 0.0;
    for a in Attribute::ALL {
        let w = spec.weights.get(a);
        if w == 0.0 {
            continue;
        }
        let (lo, hi) = bounds.range(a);
        let norm = if hi > lo {
            let v = a.of(q);
            let n = match spec.direction(a) {
                Direction::Minimize => (hi - v) / (hi - lo),
                Direction::Maximize => (v - lo) / (hi - lo),
            };
            n.clamp(0.0, 1.0)
        } else {
            1.0
        };
        score += w * norm;
    }
    score
}
