//! Network locations and pairwise link QoS.
//!
//! Delays come from Euclidean distance between 2-D coordinates scaled by
//! `delay_per_unit`. Transfer rates are picked per unordered location pair
//! from a small set of link classes by hashing the pair, so a model of any
//! size needs no per-pair storage. Explicit per-pair overrides are used for
//! hand-built fixtures.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationId(pub u32);

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: LocationId,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// One-way QoS of a link. An infinite rate means transfers are free.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkQos {
    pub delay_ms: f64,
    pub rate_mbps: f64,
}

impl LinkQos {
    pub const FREE: LinkQos = LinkQos { delay_ms: 0.0, rate_mbps: f64::INFINITY };

    pub fn transfer_ms(&self, size_mb: f64) -> f64 {
        if self.rate_mbps.is_infinite() || size_mb == 0.0 {
            0.0
        } else {
            size_mb * 1000.0 / self.rate_mbps
        }
    }

    /// Delay plus transfer time of `size_mb` over this link.
    pub fn leg_ms(&self, size_mb: f64) -> f64 {
        self.delay_ms + self.transfer_ms(size_mb)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct NetworkParams {
    pub width: f64,
    pub height: f64,
    pub delay_per_unit: f64,
    /// Transfer rates in MB/s; 12.5 MB/s is a 100 Mbit/s link.
    #[serde(rename = "linkClassesMBps")]
    pub link_classes: Vec<f64>,
}

impl Default for NetworkParams {
    fn default() -> Self {
        // 1000x1000 square at 0.1 ms per unit: one-way delays up to ~141 ms.
        NetworkParams { width: 1000.0, height: 1000.0, delay_per_unit: 0.1, link_classes: vec![12.5, 125.0, 1250.0] }
    }
}

#[derive(Clone, Debug)]
enum Slots {
    /// ids are exactly 0..n in order
    Dense,
    Map(HashMap<LocationId, usize>),
}

#[derive(Clone, Debug)]
pub struct NetworkModel {
    locations: Vec<Location>,
    slots: Slots,
    delay_per_unit: f64,
    link_classes: Vec<f64>,
    link_seed: u64,
    overrides: HashMap<(LocationId, LocationId), LinkQos>,
}

fn pair_key(a: LocationId, b: LocationId) -> (LocationId, LocationId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl NetworkModel {
    pub fn new(locations: Vec<Location>, delay_per_unit: f64, link_classes: Vec<f64>, link_seed: u64) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::Parameter("a network needs at least one location".into()));
        }
        if !(delay_per_unit.is_finite() && delay_per_unit >= 0.0) {
            return Err(Error::Parameter(format!("delay per unit must be finite and >= 0, got {delay_per_unit}")));
        }
        if let Some(r) = link_classes.iter().find(|r| r.is_nan() || **r <= 0.0) {
            return Err(Error::Parameter(format!("link class rate must be > 0, got {r}")));
        }
        if let Some(l) = locations.iter().find(|l| !(l.x.is_finite() && l.y.is_finite())) {
            return Err(Error::Parameter(format!("location {} has non-finite coordinates", l.id)));
        }
        let dense = locations.iter().enumerate().all(|(i, l)| l.id.0 as usize == i);
        let slots = if dense {
            Slots::Dense
        } else {
            let mut map = HashMap::with_capacity(locations.len());
            for (i, l) in locations.iter().enumerate() {
                if map.insert(l.id, i).is_some() {
                    return Err(Error::Parameter(format!("duplicate location id {}", l.id)));
                }
            }
            Slots::Map(map)
        };
        Ok(NetworkModel { locations, slots, delay_per_unit, link_classes, link_seed, overrides: HashMap::new() })
    }

    /// Locations 0..n without any network cost: zero delays, free transfers.
    pub fn zero(n: usize) -> Self {
        let locations = (0..n as u32).map(|i| Location { id: LocationId(i), x: 0.0, y: 0.0, name: None }).collect();
        NetworkModel::new(locations, 0.0, Vec::new(), 0).expect("valid")
    }

    /// Sets the QoS of one (symmetric) link, replacing the coordinate model for that pair.
    pub fn with_link(mut self, a: LocationId, b: LocationId, delay_ms: f64, rate_mbps: f64) -> Result<Self> {
        self.set_link(a, b, LinkQos { delay_ms, rate_mbps })?;
        Ok(self)
    }

    pub fn set_link(&mut self, a: LocationId, b: LocationId, q: LinkQos) -> Result<()> {
        self.slot(a)?;
        self.slot(b)?;
        if a == b {
            return Err(Error::Parameter(format!("self-link of {a} cannot be overridden")));
        }
        if !(q.delay_ms.is_finite() && q.delay_ms >= 0.0) || q.rate_mbps.is_nan() || q.rate_mbps <= 0.0 {
            return Err(Error::Parameter(format!("invalid link {a}-{b}: {q:?}")));
        }
        self.overrides.insert(pair_key(a, b), q);
        Ok(())
    }

    /// Copy of this model where every link is free.
    pub fn without_network_costs(&self) -> Self {
        NetworkModel {
            locations: self.locations.clone(),
            slots: self.slots.clone(),
            delay_per_unit: 0.0,
            link_classes: Vec::new(),
            link_seed: self.link_seed,
            overrides: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn ids(&self) -> impl Iterator<Item = LocationId> + '_ {
        self.locations.iter().map(|l| l.id)
    }

    pub fn contains(&self, id: LocationId) -> bool {
        self.slot(id).is_ok()
    }

    pub fn location(&self, id: LocationId) -> Result<&Location> {
        Ok(&self.locations[self.slot(id)?])
    }

    /// Looks a location up by its optional name.
    pub fn by_name(&self, name: &str) -> Option<LocationId> {
        self.locations.iter().find(|l| l.name.as_deref() == Some(name)).map(|l| l.id)
    }

    fn slot(&self, id: LocationId) -> Result<usize> {
        match &self.slots {
            Slots::Dense if (id.0 as usize) < self.locations.len() => Ok(id.0 as usize),
            Slots::Dense => Err(Error::UnknownLocation(id.0)),
            Slots::Map(m) => m.get(&id).copied().ok_or(Error::UnknownLocation(id.0)),
        }
    }

    /// Symmetric QoS of the link between `a` and `b`.
    pub fn get_network_qos(&self, a: LocationId, b: LocationId) -> Result<LinkQos> {
        let sa = self.slot(a)?;
        let sb = self.slot(b)?;
        if a == b {
            return Ok(LinkQos::FREE);
        }
        if !self.overrides.is_empty() {
            if let Some(q) = self.overrides.get(&pair_key(a, b)) {
                return Ok(*q);
            }
        }
        let (la, lb) = (&self.locations[sa], &self.locations[sb]);
        let dist = (la.x - lb.x).hypot(la.y - lb.y);
        Ok(LinkQos { delay_ms: self.delay_per_unit * dist, rate_mbps: self.pair_rate(a, b) })
    }

    /// Network time of sending `size_mb` from `a` to `b`.
    pub fn leg_ms(&self, a: LocationId, b: LocationId, size_mb: f64) -> Result<f64> {
        Ok(self.get_network_qos(a, b)?.leg_ms(size_mb))
    }

    fn pair_rate(&self, a: LocationId, b: LocationId) -> f64 {
        if self.link_classes.is_empty() {
            return f64::INFINITY;
        }
        let (lo, hi) = pair_key(a, b);
        let h = rng::splitmix64(self.link_seed ^ ((lo.0 as u64) << 32 | hi.0 as u64));
        self.link_classes[(h % self.link_classes.len() as u64) as usize]
    }

    /// Upper bound on the one-way delay of any link.
    pub fn max_delay_bound(&self) -> f64 {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for l in &self.locations {
            x0 = x0.min(l.x);
            x1 = x1.max(l.x);
            y0 = y0.min(l.y);
            y1 = y1.max(l.y);
        }
        let coord = self.delay_per_unit * (x1 - x0).hypot(y1 - y0);
        self.overrides.values().map(|q| q.delay_ms).fold(coord, f64::max)
    }

    /// Lower bound on the transfer rate of any non-self link.
    pub fn min_rate_bound(&self) -> f64 {
        let classes = self.link_classes.iter().copied().fold(f64::INFINITY, f64::min);
        self.overrides.values().map(|q| q.rate_mbps).fold(classes, f64::min)
    }

    /// Location in `candidates` with the smallest one-way delay to `from`;
    /// ties go to the earlier candidate.
    pub fn nearest(&self, from: LocationId, candidates: &[LocationId]) -> Result<usize> {
        let mut best = (f64::INFINITY, 0);
        for (i, &c) in candidates.iter().enumerate() {
            let d = self.get_network_qos(from, c)?.delay_ms;
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(best.1)
    }
}

/// Generates `n` locations with ids 0..n and uniform coordinates.
pub fn generate_network(n: usize, seed: u64, params: &NetworkParams) -> Result<NetworkModel> {
    if n == 0 {
        return Err(Error::Parameter("network size must be at least 1".into()));
    }
    if !(params.width >= 0.0 && params.height >= 0.0) {
        return Err(Error::Parameter("network extent must be non-negative".into()));
    }
    let mut r = rng::stream(seed, &[0x6e65_7477]);
    let locations = (0..n as u32)
        .map(|i| Location {
            id: LocationId(i),
            x: r.gen::<f64>() * params.width,
            y: r.gen::<f64>() * params.height,
            name: None,
        })
        .collect();
    NetworkModel::new(locations, params.delay_per_unit, params.link_classes.clone(), rng::derive_seed(seed, &[1]))
}

/// Seeded permutation of all location ids; prefixes of it are nested
/// control-node sets.
pub fn control_permutation(model: &NetworkModel, seed: u64) -> Vec<LocationId> {
    let mut ids: Vec<LocationId> = model.ids().collect();
    ids.shuffle(&mut rng::stream(seed, &[0x6374_726c]));
    ids
}

/// Uniformly random `k`-subset of the locations, as the prefix of
/// [`control_permutation`]. `k = 0` is the centralized architecture.
pub fn choose_control_nodes(model: &NetworkModel, k: usize, seed: u64) -> Result<Vec<LocationId>> {
    if k > model.len() {
        return Err(Error::Parameter(format!("cannot choose {k} control nodes from {} locations", model.len())));
    }
    let mut perm = control_permutation(model, seed);
    perm.truncate(k);
    Ok(perm)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LinkClassFile {
    #[serde(rename = "rateMBps")]
    pub rate_mbps: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LinkFile {
    pub a: LocationId,
    pub b: LocationId,
    pub delay_ms: f64,
    /// `null` means transfers over this link are free.
    #[serde(rename = "rateMBps")]
    pub rate_mbps: Option<f64>,
}

/// On-disk form of a [`NetworkModel`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NetworkFile {
    pub locations: Vec<Location>,
    #[serde(default)]
    pub link_classes: Vec<LinkClassFile>,
    pub delay_per_unit: f64,
    #[serde(default)]
    pub link_seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkFile>,
}

impl From<&NetworkModel> for NetworkFile {
    fn from(m: &NetworkModel) -> Self {
        let mut links: Vec<LinkFile> = m
            .overrides
            .iter()
            .map(|(&(a, b), q)| LinkFile {
                a,
                b,
                delay_ms: q.delay_ms,
                rate_mbps: q.rate_mbps.is_finite().then_some(q.rate_mbps),
            })
            .collect();
        links.sort_by_key(|l| (l.a, l.b));
        NetworkFile {
            locations: m.locations.clone(),
            link_classes: m.link_classes.iter().map(|&rate_mbps| LinkClassFile { rate_mbps }).collect(),
            delay_per_unit: m.delay_per_unit,
            link_seed: m.link_seed,
            links,
        }
    }
}

impl TryFrom<NetworkFile> for NetworkModel {
    type Error = Error;

    fn try_from(f: NetworkFile) -> Result<Self> {
        let mut m = NetworkModel::new(
            f.locations,
            f.delay_per_unit,
            f.link_classes.into_iter().map(|c| c.rate_mbps).collect(),
            f.link_seed,
        )?;
        let mut seen = BTreeSet::new();
        for l in f.links {
            if !seen.insert(pair_key(l.a, l.b)) {
                return Err(Error::Parameter(format!("link {}-{} given twice", l.a, l.b)));
            }
            m.set_link(l.a, l.b, LinkQos { delay_ms: l.delay_ms, rate_mbps: l.rate_mbps.unwrap_or(f64::INFINITY) })?;
        }
        Ok(m)
    }
}

impl Serialize for NetworkModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NetworkFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for NetworkModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        NetworkModel::try_from(NetworkFile::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_link_is_free() {
        let m = generate_network(10, 3, &NetworkParams::default()).unwrap();
        let q = m.get_network_qos(LocationId(4), LocationId(4)).unwrap();
        assert_eq!(q.delay_ms, 0.0);
        assert_eq!(q.transfer_ms(100.0), 0.0);
    }

    #[test]
    fn symmetric_links() {
        let m = generate_network(30, 11, &NetworkParams::default()).unwrap();
        for a in m.ids() {
            for b in m.ids() {
                assert_eq!(m.get_network_qos(a, b).unwrap(), m.get_network_qos(b, a).unwrap());
            }
        }
    }

    #[test]
    fn unknown_location() {
        let m = generate_network(3, 1, &NetworkParams::default()).unwrap();
        assert!(matches!(m.get_network_qos(LocationId(0), LocationId(3)), Err(Error::UnknownLocation(3))));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_network(1000, 42, &NetworkParams::default()).unwrap();
        let b = generate_network(1000, 42, &NetworkParams::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = generate_network(1000, 43, &NetworkParams::default()).unwrap();
        assert_ne!(a.locations()[0], c.locations()[0]);
    }

    #[test]
    fn large_network_ids_unique() {
        let m = generate_network(100_000, 7, &NetworkParams::default()).unwrap();
        let ids: BTreeSet<LocationId> = m.ids().collect();
        assert_eq!(ids.len(), 100_000);
    }

    #[test]
    fn small_network_pairs_have_positive_delay() {
        let m = generate_network(5, 1, &NetworkParams::default()).unwrap();
        let mut pairs = 0;
        for a in 0..5 {
            for b in a + 1..5 {
                assert!(m.get_network_qos(LocationId(a), LocationId(b)).unwrap().delay_ms > 0.0);
                pairs += 1;
            }
        }
        assert_eq!(pairs, 10);
    }

    #[test]
    fn zero_size_is_parameter_error() {
        assert!(matches!(generate_network(0, 1, &NetworkParams::default()), Err(Error::Parameter(_))));
    }

    #[test]
    fn control_node_selection() {
        let m = generate_network(200, 5, &NetworkParams::default()).unwrap();
        assert!(choose_control_nodes(&m, 0, 9).unwrap().is_empty());
        let all: BTreeSet<_> = choose_control_nodes(&m, 200, 9).unwrap().into_iter().collect();
        assert_eq!(all.len(), 200);
        let k32: BTreeSet<_> = choose_control_nodes(&m, 32, 9).unwrap().into_iter().collect();
        let k64: BTreeSet<_> = choose_control_nodes(&m, 64, 9).unwrap().into_iter().collect();
        assert!(k32.is_subset(&k64));
        assert!(matches!(choose_control_nodes(&m, 201, 9), Err(Error::Parameter(_))));
    }

    #[test]
    fn overrides_and_file_form() {
        let locs = vec![
            Location { id: LocationId(10), x: 0.0, y: 0.0, name: Some("France".into()) },
            Location { id: LocationId(20), x: 3.0, y: 4.0, name: Some("Japan".into()) },
        ];
        let m = NetworkModel::new(locs, 2.0, vec![12.5], 0).unwrap();
        assert_eq!(m.get_network_qos(LocationId(10), LocationId(20)).unwrap().delay_ms, 10.0);
        let m = m.with_link(LocationId(20), LocationId(10), 75.0, 12.5).unwrap();
        assert_eq!(m.get_network_qos(LocationId(10), LocationId(20)).unwrap().delay_ms, 75.0);
        assert_eq!(m.by_name("Japan"), Some(LocationId(20)));
        let text = serde_json::to_string(&m).unwrap();
        let back: NetworkModel = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn hundred_mbit_link() {
        // 100 MB over 100 Mbit/s takes 8 s.
        let q = LinkQos { delay_ms: 0.0, rate_mbps: 12.5 };
        assert_eq!(q.transfer_ms(100.0), 8000.0);
    }
}
