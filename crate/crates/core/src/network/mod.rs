//! Road network model: nodes, directed links, traffic-analysis zones and
//! centroid connectors.
//!
//! Internal units are kilometres, km/h, minutes and vehicles per hour. Mile
//! based inputs are converted once at ingestion with [`KM_PER_MILE`].

mod connectors;
mod io;
pub(crate) mod shortest_path;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use connectors::{ZoneCentroid, CONNECTOR_CAPACITY, CONNECTOR_MIN_LENGTH_KM, CONNECTOR_SPEED_KMH};
pub use io::{
    load_network, load_zones, write_links_csv, write_nodes_csv, write_zones_csv, HierarchyDefaults,
    LengthUnit, RoadClass, SpeedUnit,
};
pub use shortest_path::{shortest_path, ShortestPathTree};

/// Kilometres per mile (the cost tables' distance conversion factor).
pub const KM_PER_MILE: f64 = 1.609;

const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hierarchy {
    Expressway,
    Highway,
    Local,
    Connector,
}

impl fmt::Display for Hierarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hierarchy::Expressway => "expressway",
            Hierarchy::Highway => "highway",
            Hierarchy::Local => "local",
            Hierarchy::Connector => "connector",
        };
        f.write_str(s)
    }
}

/// How node and zone coordinates are to be interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordSystem {
    /// Longitude/latitude in degrees.
    Lonlat,
    /// Planar kilometres.
    #[default]
    Km,
}

impl fmt::Display for CoordSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoordSystem::Lonlat => "lonlat",
            CoordSystem::Km => "km",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

/// A directed road segment. `from`/`to` are indices into [`Network::nodes`].
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub id: String,
    pub from: usize,
    pub to: usize,
    /// km
    pub length: f64,
    /// veh/h
    pub capacity: f64,
    /// km/h
    pub free_flow_speed: f64,
    pub hierarchy: Hierarchy,
    /// minutes, always `60 * length / free_flow_speed`
    pub free_flow_time: f64,
}

impl Link {
    pub fn is_connector(&self) -> bool {
        self.hierarchy == Hierarchy::Connector
    }
}

/// A traffic-analysis zone attached to the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Zone {
    pub id: String,
    pub x: f64,
    pub y: f64,
    /// Nearest road node (index).
    pub attached_node: usize,
    /// Centroid node created by connector generation, if any.
    pub centroid_node: Option<usize>,
}

impl Zone {
    /// Node where trips of this zone enter and leave the network.
    pub fn access_node(&self) -> usize {
        self.centroid_node.unwrap_or(self.attached_node)
    }
}

/// Distance in km between two points (equirectangular approximation for
/// lon/lat coordinates).
pub fn distance_km(coord_system: CoordSystem, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    match coord_system {
        CoordSystem::Km => (ax - bx).hypot(ay - by),
        CoordSystem::Lonlat => {
            let mean_lat = ((ay + by) / 2.0).to_radians();
            let dx = (ax - bx).to_radians() * mean_lat.cos();
            let dy = (ay - by).to_radians();
            EARTH_RADIUS_KM * dx.hypot(dy)
        }
    }
}

/// Link description used while building a network; endpoints are node ids.
#[derive(Clone, Debug)]
pub struct LinkSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_km: f64,
    pub capacity: f64,
    pub speed_kmh: f64,
    pub hierarchy: Hierarchy,
}

/// Immutable directed road graph with a CSR outgoing-link index.
#[derive(Clone, Debug)]
pub struct Network {
    coord_system: CoordSystem,
    nodes: Vec<Node>,
    links: Vec<Link>,
    zones: Vec<Zone>,
    node_index: HashMap<String, usize>,
    link_index: HashMap<String, usize>,
    zone_index: HashMap<String, usize>,
    out_offsets: Vec<usize>,
    out_links: Vec<usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.coord_system == other.coord_system
            && self.nodes == other.nodes
            && self.links == other.links
            && self.zones == other.zones
    }
}

/// Incremental, validating constructor for [`Network`].
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    coord_system: CoordSystem,
    nodes: Vec<Node>,
    node_index: HashMap<String, usize>,
    links: Vec<Link>,
    link_index: HashMap<String, usize>,
}

impl NetworkBuilder {
    pub fn new(coord_system: CoordSystem) -> Self {
        Self {
            coord_system,
            ..Default::default()
        }
    }

    pub fn add_node(&mut self, id: impl Into<String>, x: f64, y: f64) -> Result<usize> {
        let id = id.into();
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Validation(format!("node {id} has non-finite coordinates")));
        }
        if self.node_index.contains_key(&id) {
            return Err(Error::Validation(format!("duplicate node id {id}")));
        }
        let idx = self.nodes.len();
        self.node_index.insert(id.clone(), idx);
        self.nodes.push(Node { id, x, y });
        Ok(idx)
    }

    pub fn add_link(&mut self, spec: LinkSpec) -> Result<usize> {
        let from = *self.node_index.get(&spec.from).ok_or_else(|| {
            Error::Referential(format!("link {} references missing node {}", spec.id, spec.from))
        })?;
        let to = *self.node_index.get(&spec.to).ok_or_else(|| {
            Error::Referential(format!("link {} references missing node {}", spec.id, spec.to))
        })?;
        self.push_link(spec.id, from, to, spec.length_km, spec.capacity, spec.speed_kmh, spec.hierarchy)
    }

    #[allow(clippy::too_many_arguments)]
    fn push_link(
        &mut self,
        id: String,
        from: usize,
        to: usize,
        length: f64,
        capacity: f64,
        speed: f64,
        hierarchy: Hierarchy,
    ) -> Result<usize> {
        if self.link_index.contains_key(&id) {
            return Err(Error::Validation(format!("duplicate link id {id}")));
        }
        if from == to {
            return Err(Error::Validation(format!("link {id} is a self-loop")));
        }
        for (name, v) in [("length", length), ("capacity", capacity), ("free_flow_speed", speed)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("link {id} has non-positive {name} {v}")));
            }
        }
        let idx = self.links.len();
        self.link_index.insert(id.clone(), idx);
        self.links.push(Link {
            id,
            from,
            to,
            length,
            capacity,
            free_flow_speed: speed,
            hierarchy,
            free_flow_time: 60.0 * length / speed,
        });
        Ok(idx)
    }

    pub fn build(self) -> Network {
        Network::assemble(self.coord_system, self.nodes, self.links, Vec::new())
    }
}

impl Network {
    fn assemble(coord_system: CoordSystem, nodes: Vec<Node>, links: Vec<Link>, zones: Vec<Zone>) -> Self {
        let node_index = nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        let link_index = links.iter().enumerate().map(|(i, l)| (l.id.clone(), i)).collect();
        let zone_index = zones.iter().enumerate().map(|(i, z)| (z.id.clone(), i)).collect();
        let mut counts = vec![0usize; nodes.len() + 1];
        for l in &links {
            counts[l.from + 1] += 1;
        }
        for i in 0..nodes.len() {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut out_links = vec![0usize; links.len()];
        for (i, l) in links.iter().enumerate() {
            out_links[fill[l.from]] = i;
            fill[l.from] += 1;
        }
        Network {
            coord_system,
            nodes,
            links,
            zones,
            node_index,
            link_index,
            zone_index,
            out_offsets: counts,
            out_links,
        }
    }

    pub fn coord_system(&self) -> CoordSystem {
        self.coord_system
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn link_idx(&self, id: &str) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub fn zone(&self, id: &str) -> Option<&Zone> {
        self.zone_index.get(id).map(|&i| &self.zones[i])
    }

    /// Outgoing link indices of `node`, in ascending link order.
    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.out_links[self.out_offsets[node]..self.out_offsets[node + 1]]
    }

    /// Distance in km between two points expressed in this network's
    /// coordinate system.
    pub fn distance_km(&self, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
        distance_km(self.coord_system, ax, ay, bx, by)
    }

    /// Attaches zones to their nearest node without adding connector links.
    /// Zones whose centroid coincides with a node therefore load that node
    /// directly.
    pub fn with_zones(self, centroids: &[ZoneCentroid]) -> Result<Network> {
        let mut zones = Vec::with_capacity(centroids.len());
        let mut missing = Vec::new();
        let mut seen = HashMap::new();
        for c in centroids {
            if seen.insert(c.id.clone(), ()).is_some() {
                return Err(Error::Validation(format!("duplicate zone id {}", c.id)));
            }
            match self.nearest_node(c.x, c.y, |_| true) {
                Some(n) => zones.push(Zone {
                    id: c.id.clone(),
                    x: c.x,
                    y: c.y,
                    attached_node: n,
                    centroid_node: None,
                }),
                None => missing.push(c.id.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::UnattachedZones(missing));
        }
        let Network {
            coord_system,
            nodes,
            links,
            ..
        } = self;
        Ok(Network::assemble(coord_system, nodes, links, zones))
    }

    /// Nearest node by Euclidean distance on stored coordinates, ties broken
    /// by smallest node id.
    fn nearest_node(&self, x: f64, y: f64, eligible: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, n) in self.nodes.iter().enumerate() {
            if !eligible(i) {
                continue;
            }
            let d = (n.x - x).hypot(n.y - y);
            best = match best {
                None => Some((d, i)),
                Some((bd, bi)) => {
                    if d < bd || (d == bd && n.id < self.nodes[bi].id) {
                        Some((d, i))
                    } else {
                        Some((bd, bi))
                    }
                }
            };
        }
        best.map(|(_, i)| i)
    }

    /// Rebuilds a network from parts, re-running every invariant check.
    pub fn from_parts(
        coord_system: CoordSystem,
        nodes: Vec<Node>,
        links: Vec<Link>,
        zones: Vec<Zone>,
    ) -> Result<Network> {
        let mut b = NetworkBuilder::new(coord_system);
        for n in nodes {
            b.add_node(n.id, n.x, n.y)?;
        }
        let node_count = b.nodes.len();
        for l in links {
            if l.from >= node_count || l.to >= node_count {
                return Err(Error::Referential(format!("link {} has a dangling endpoint", l.id)));
            }
            b.push_link(l.id, l.from, l.to, l.length, l.capacity, l.free_flow_speed, l.hierarchy)?;
        }
        for z in &zones {
            if z.attached_node >= node_count || z.centroid_node.is_some_and(|c| c >= node_count) {
                return Err(Error::Referential(format!("zone {} is attached to a missing node", z.id)));
            }
        }
        Ok(Network::assemble(b.coord_system, b.nodes, b.links, zones))
    }
}
