//! Service level agreements with input-size-dependent QoS.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::LocationId;
use crate::workflow::TaskId;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Piece {
    /// Inclusive upper end of the piece; infinite for the last one.
    upto: f64,
    slope: f64,
    intercept: f64,
}

impl Piece {
    fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Piecewise-linear function on `[0, inf)`. Piece `i` covers
/// `(upto[i-1], upto[i]]` and evaluates `intercept + slope * x`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    pieces: Vec<Piece>,
}

impl PiecewiseLinear {
    pub fn constant(c: f64) -> Self {
        Self::linear(c, 0.0)
    }

    pub fn linear(intercept: f64, slope: f64) -> Self {
        PiecewiseLinear { pieces: vec![Piece { upto: f64::INFINITY, slope, intercept }] }
    }

    /// Builds from `(upto, intercept, slope)` triples; the last `upto` must be `None`.
    pub fn from_pieces(pieces: &[(Option<f64>, f64, f64)]) -> Result<Self> {
        let pieces = pieces
            .iter()
            .map(|&(upto, intercept, slope)| Piece { upto: upto.unwrap_or(f64::INFINITY), slope, intercept })
            .collect();
        let f = PiecewiseLinear { pieces };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let Some(last) = self.pieces.last() else {
            return Err(Error::Parameter("piecewise function without pieces".into()));
        };
        if last.upto.is_finite() {
            return Err(Error::Parameter("last piece must extend to infinity (omit uptoMB)".into()));
        }
        let mut start = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            if !(p.slope.is_finite() && p.intercept.is_finite()) {
                return Err(Error::Parameter("piece coefficients must be finite".into()));
            }
            if i + 1 < self.pieces.len() && !(p.upto > start && p.upto.is_finite()) {
                return Err(Error::Parameter(format!("piece bounds must increase, got {} after {start}", p.upto)));
            }
            let end_ok = if p.upto.is_finite() { p.at(p.upto) >= 0.0 } else { p.slope >= 0.0 };
            if p.at(start) < 0.0 || !end_ok {
                return Err(Error::Parameter("piecewise function must be non-negative".into()));
            }
            start = p.upto;
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = self.pieces.iter().find(|p| x <= p.upto).unwrap_or_else(|| self.pieces.last().expect("non-empty"));
        p.at(x)
    }

    /// Supremum of the function over `[0, x_max]`.
    pub fn max_on(&self, x_max: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut start = 0.0;
        for p in &self.pieces {
            if start > x_max {
                break;
            }
            best = best.max(p.at(start)).max(p.at(p.upto.min(x_max)));
            start = p.upto;
        }
        best
    }
}

/// Service identifier, unique across an offer catalog.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ServiceId(pub String);

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ServiceId {
    fn from(s: &str) -> Self {
        ServiceId(s.to_owned())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlaProfile {
    /// Execution time (ms) as a function of input size (MB).
    pub exec: PiecewiseLinear,
    /// Result size (MB) as a function of input size (MB).
    pub output: PiecewiseLinear,
    pub cost: f64,
    pub availability: f64,
}

impl SlaProfile {
    /// Constant execution time, output equal to input.
    pub fn fixed(exec_ms: f64) -> Self {
        SlaProfile {
            exec: PiecewiseLinear::constant(exec_ms),
            output: PiecewiseLinear::linear(0.0, 1.0),
            cost: 0.0,
            availability: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        self.exec.validate()?;
        self.output.validate()?;
        if !(self.cost.is_finite() && self.cost >= 0.0) {
            return Err(Error::Parameter(format!("cost must be finite and >= 0, got {}", self.cost)));
        }
        if !(0.0..=1.0).contains(&self.availability) {
            return Err(Error::Parameter(format!("availability must be in [0, 1], got {}", self.availability)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SlaFile", into = "SlaFile")]
pub struct ServiceOffer {
    pub id: ServiceId,
    pub task: TaskId,
    pub location: LocationId,
    pub sla: SlaProfile,
}

/// SLA values of one invocation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Invocation {
    pub exec_ms: f64,
    pub output_mb: f64,
    pub cost: f64,
    pub availability: f64,
}

/// Evaluates the SLA of `offer` for an input of `input_mb`.
pub fn evaluate_qos(offer: &ServiceOffer, input_mb: f64) -> Invocation {
    evaluate_sla(&offer.sla, input_mb)
}

pub fn evaluate_sla(sla: &SlaProfile, input_mb: f64) -> Invocation {
    Invocation {
        exec_ms: sla.exec.eval(input_mb),
        output_mb: sla.output.eval(input_mb),
        cost: sla.cost,
        availability: sla.availability,
    }
}

/// QoS attributes of a node or a whole composition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QosVector {
    /// End-to-end (or node execution) time, ms.
    #[serde(rename = "runtime")]
    pub runtime_ms: f64,
    pub cost: f64,
    pub availability: f64,
    /// Network share of the runtime (delays and transfers), ms.
    #[serde(rename = "latency")]
    pub latency_ms: f64,
}

impl QosVector {
    pub const NEUTRAL: QosVector = QosVector { runtime_ms: 0.0, cost: 0.0, availability: 1.0, latency_ms: 0.0 };
}

/// All service offers grouped by task, in catalog order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OfferCatalog {
    by_task: BTreeMap<TaskId, Vec<ServiceOffer>>,
}

impl OfferCatalog {
    pub fn new(offers: Vec<ServiceOffer>) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut by_task: BTreeMap<TaskId, Vec<ServiceOffer>> = BTreeMap::new();
        for o in offers {
            if !ids.insert(o.id.clone()) {
                return Err(Error::Config(format!("duplicate service id {}", o.id)));
            }
            o.sla.validate()?;
            by_task.entry(o.task.clone()).or_default().push(o);
        }
        Ok(OfferCatalog { by_task })
    }

    pub fn for_task(&self, task: &TaskId) -> &[ServiceOffer] {
        self.by_task.get(task).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn find(&self, id: &ServiceId) -> Option<&ServiceOffer> {
        self.by_task.values().flatten().find(|o| &o.id == id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskId> {
        self.by_task.keys()
    }

    pub fn offers(&self) -> impl Iterator<Item = &ServiceOffer> {
        self.by_task.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.by_task.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that every offer's task belongs to `tasks` and location exists.
    pub fn check_references<'a>(
        &self,
        tasks: impl IntoIterator<Item = &'a TaskId>,
        has_location: impl Fn(LocationId) -> bool,
    ) -> Result<()> {
        let known: HashSet<&TaskId> = tasks.into_iter().collect();
        for o in self.offers() {
            if !known.contains(&o.task) {
                return Err(Error::Config(format!("offer {} implements unknown task {}", o.id, o.task)));
            }
            if !has_location(o.location) {
                return Err(Error::Config(format!("offer {} is deployed at unknown location {}", o.id, o.location)));
            }
        }
        Ok(())
    }
}

impl Serialize for OfferCatalog {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.offers())
    }
}

impl<'de> Deserialize<'de> for OfferCatalog {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        OfferCatalog::new(Vec::<ServiceOffer>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ExecPieceFile {
    #[serde(rename = "uptoMB", default, skip_serializing_if = "Option::is_none")]
    upto_mb: Option<f64>,
    #[serde(rename = "msPerMB", default)]
    ms_per_mb: f64,
    #[serde(default)]
    ms_base: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct OutPieceFile {
    #[serde(rename = "uptoMB", default, skip_serializing_if = "Option::is_none")]
    upto_mb: Option<f64>,
    ratio: f64,
    #[serde(rename = "baseMB", default, skip_serializing_if = "is_zero")]
    base_mb: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// On-disk SLA of one service offer.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlaFile {
    service: ServiceId,
    task: TaskId,
    location: LocationId,
    exec: Vec<ExecPieceFile>,
    out: Vec<OutPieceFile>,
    cost: f64,
    availability: f64,
}

fn upto(p: &Piece) -> Option<f64> {
    p.upto.is_finite().then_some(p.upto)
}

impl From<ServiceOffer> for SlaFile {
    fn from(o: ServiceOffer) -> Self {
        SlaFile {
            service: o.id,
            task: o.task,
            location: o.location,
            exec: o
                .sla
                .exec
                .pieces
                .iter()
                .map(|p| ExecPieceFile { upto_mb: upto(p), ms_per_mb: p.slope, ms_base: p.intercept })
                .collect(),
            out: o
                .sla
                .output
                .pieces
                .iter()
                .map(|p| OutPieceFile { upto_mb: upto(p), ratio: p.slope, base_mb: p.intercept })
                .collect(),
            cost: o.sla.cost,
            availability: o.sla.availability,
        }
    }
}

impl TryFrom<SlaFile> for ServiceOffer {
    type Error = Error;

    fn try_from(f: SlaFile) -> Result<Self> {
        let exec: Vec<_> = f.exec.iter().map(|p| (p.upto_mb, p.ms_base, p.ms_per_mb)).collect();
        let out: Vec<_> = f.out.iter().map(|p| (p.upto_mb, p.base_mb, p.ratio)).collect();
        let sla = SlaProfile {
            exec: PiecewiseLinear::from_pieces(&exec)?,
            output: PiecewiseLinear::from_pieces(&out)?,
            cost: f.cost,
            availability: f.availability,
        };
        sla.validate()?;
        Ok(ServiceOffer { id: f.service, task: f.task, location: f.location, sla })
    }
}
