use std::collections::HashSet;

use super::{Hierarchy, Network, NetworkBuilder, Zone};
use crate::error::{Error, Result};

/// Capacity given to generated connector links (veh/h).
pub const CONNECTOR_CAPACITY: f64 = 1e6;
/// Free-flow speed of generated connector links (km/h).
pub const CONNECTOR_SPEED_KMH: f64 = 40.0;
/// Connectors shorter than this are clamped to it (km).
pub const CONNECTOR_MIN_LENGTH_KM: f64 = 1e-6;

/// Zone centroid as read from a zones file.
#[derive(Clone, Debug, PartialEq)]
pub struct ZoneCentroid {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

impl Network {
    /// Adds one centroid node per zone and connects it with a bidirectional
    /// connector pair to the nearest non-connector node. Existing nodes and
    /// links are left untouched; new ones are appended.
    ///
    /// Centroid nodes are named `zone:<id>` and connector links
    /// `conn:<id>:in` / `conn:<id>:out`.
    pub fn generate_connectors(&self, centroids: &[ZoneCentroid]) -> Result<Network> {
        if self.nodes.is_empty() {
            return Err(Error::Validation("cannot attach zones to an empty network".into()));
        }
        let generated: HashSet<usize> = self.zones.iter().filter_map(|z| z.centroid_node).collect();
        let mut b = NetworkBuilder::new(self.coord_system);
        for n in &self.nodes {
            b.add_node(n.id.clone(), n.x, n.y)?;
        }
        for l in &self.links {
            b.push_link(l.id.clone(), l.from, l.to, l.length, l.capacity, l.free_flow_speed, l.hierarchy)?;
        }
        let mut zones = self.zones.clone();
        let mut missing = Vec::new();
        let mut seen: HashSet<String> = self.zones.iter().map(|z| z.id.clone()).collect();
        for c in centroids {
            if !c.x.is_finite() || !c.y.is_finite() {
                return Err(Error::Validation(format!("zone {} has a non-finite centroid", c.id)));
            }
            if !seen.insert(c.id.clone()) {
                return Err(Error::Validation(format!("duplicate zone id {}", c.id)));
            }
            let Some(target) = self.nearest_node(c.x, c.y, |i| !generated.contains(&i)) else {
                missing.push(c.id.clone());
                continue;
            };
            let t = &self.nodes[target];
            let length = self.distance_km(c.x, c.y, t.x, t.y).max(CONNECTOR_MIN_LENGTH_KM);
            let centroid = b.add_node(format!("zone:{}", c.id), c.x, c.y)?;
            b.push_link(
                format!("conn:{}:out", c.id),
                centroid,
                target,
                length,
                CONNECTOR_CAPACITY,
                CONNECTOR_SPEED_KMH,
                Hierarchy::Connector,
            )?;
            b.push_link(
                format!("conn:{}:in", c.id),
                target,
                centroid,
                length,
                CONNECTOR_CAPACITY,
                CONNECTOR_SPEED_KMH,
                Hierarchy::Connector,
            )?;
            zones.push(Zone {
                id: c.id.clone(),
                x: c.x,
                y: c.y,
                attached_node: target,
                centroid_node: Some(centroid),
            });
        }
        if !missing.is_empty() {
            return Err(Error::UnattachedZones(missing));
        }
        Ok(Network::assemble(self.coord_system, b.nodes, b.links, zones))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CoordSystem, LinkSpec};

    fn line() -> Network {
        let mut b = NetworkBuilder::new(CoordSystem::Km);
        b.add_node("n1", 1.0, 0.0).unwrap();
        b.add_node("n3", 3.0, 0.0).unwrap();
        b.add_link(LinkSpec {
            id: "l".into(),
            from: "n1".into(),
            to: "n3".into(),
            length_km: 2.0,
            capacity: 1000.0,
            speed_kmh: 50.0,
            hierarchy: Hierarchy::Local,
        })
        .unwrap();
        b.build()
    }

    fn centroid(id: &str, x: f64, y: f64) -> ZoneCentroid {
        ZoneCentroid { id: id.into(), x, y }
    }

    #[test]
    fn attaches_to_nearest_node() {
        let net = line().generate_connectors(&[centroid("z", 0.0, 0.0)]).unwrap();
        let z = net.zone("z").unwrap();
        assert_eq!(net.nodes()[z.attached_node].id, "n1");
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.link_count(), 3);
        let out = &net.links()[1];
        assert!(out.is_connector());
        assert_eq!(out.capacity, CONNECTOR_CAPACITY);
        assert!((out.length - 1.0).abs() < 1e-12);
        assert!((out.free_flow_time - 1.5).abs() < 1e-12);
    }

    #[test]
    fn coincident_centroid_is_clamped() {
        let net = line().generate_connectors(&[centroid("z", 3.0, 0.0)]).unwrap();
        let c = &net.links()[1];
        assert_eq!(c.length, CONNECTOR_MIN_LENGTH_KM);
        assert_eq!(net.nodes()[c.to].id, "n3");
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let net = line().generate_connectors(&[centroid("z", 2.0, 0.0)]).unwrap();
        assert_eq!(net.nodes()[net.zone("z").unwrap().attached_node].id, "n1");
    }

    #[test]
    fn never_mutates_existing_elements() {
        let base = line();
        let net = base.generate_connectors(&[centroid("a", 0.0, 1.0), centroid("b", 4.0, 0.0)]).unwrap();
        assert_eq!(&net.nodes()[..base.node_count()], base.nodes());
        assert_eq!(&net.links()[..base.link_count()], base.links());
        // centroid nodes only touch connectors
        for z in net.zones() {
            let c = z.centroid_node.unwrap();
            for l in net.links().iter().filter(|l| l.from == c || l.to == c) {
                assert!(l.is_connector());
            }
        }
    }

    #[test]
    fn empty_network_is_rejected() {
        let net = NetworkBuilder::new(CoordSystem::Km).build();
        assert!(net.generate_connectors(&[centroid("z", 0.0, 0.0)]).is_err());
    }
}
