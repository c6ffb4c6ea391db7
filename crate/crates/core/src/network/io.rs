use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{
    CoordSystem, Hierarchy, LinkSpec, Network, NetworkBuilder, ZoneCentroid, CONNECTOR_CAPACITY,
    CONNECTOR_SPEED_KMH, KM_PER_MILE,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Km,
    Mi,
}

impl LengthUnit {
    fn to_km(self, v: f64) -> f64 {
        match self {
            LengthUnit::Km => v,
            LengthUnit::Mi => v * KM_PER_MILE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedUnit {
    Kmh,
    Mph,
}

impl SpeedUnit {
    fn to_kmh(self, v: f64) -> f64 {
        match self {
            SpeedUnit::Kmh => v,
            SpeedUnit::Mph => v * KM_PER_MILE,
        }
    }
}

/// Capacity (veh/h) and free-flow speed (km/h) of one road class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadClass {
    pub capacity: f64,
    pub free_flow_speed: f64,
}

/// Per-hierarchy defaults applied to links with empty capacity or speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyDefaults {
    pub expressway: RoadClass,
    pub highway: RoadClass,
    pub local: RoadClass,
}

impl Default for HierarchyDefaults {
    fn default() -> Self {
        Self {
            expressway: RoadClass {
                capacity: 2200.0,
                free_flow_speed: 90.0,
            },
            highway: RoadClass {
                capacity: 2000.0,
                free_flow_speed: 60.0,
            },
            local: RoadClass {
                capacity: 1400.0,
                free_flow_speed: 40.0,
            },
        }
    }
}

impl HierarchyDefaults {
    pub fn get(&self, h: Hierarchy) -> RoadClass {
        match h {
            Hierarchy::Expressway => self.expressway,
            Hierarchy::Highway => self.highway,
            Hierarchy::Local => self.local,
            Hierarchy::Connector => RoadClass {
                capacity: CONNECTOR_CAPACITY,
                free_flow_speed: CONNECTOR_SPEED_KMH,
            },
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct NodeRow {
    node_id: String,
    x: f64,
    y: f64,
    coord_system: CoordSystem,
}

#[derive(Debug, Deserialize, Serialize)]
struct LinkRow {
    link_id: String,
    from: String,
    to: String,
    length: f64,
    length_unit: LengthUnit,
    capacity: Option<f64>,
    free_flow_speed: Option<f64>,
    speed_unit: SpeedUnit,
    hierarchy: Hierarchy,
}

#[derive(Debug, Deserialize, Serialize)]
struct ZoneRow {
    zone_id: String,
    x: f64,
    y: f64,
}

fn schema(row: usize, e: impl std::fmt::Display) -> Error {
    Error::Schema {
        row,
        message: e.to_string(),
    }
}

/// Retags an id/attribute error from the builder with the CSV row it came from.
fn at_row(row: usize, e: Error) -> Error {
    match e {
        Error::Validation(m) => Error::Schema { row, message: m },
        other => other,
    }
}

/// Loads a network from a nodes CSV (`node_id,x,y,coord_system`) and a links
/// CSV (`link_id,from,to,length,length_unit,capacity,free_flow_speed,speed_unit,hierarchy`).
///
/// Rows are numbered from 1 (the first data row). Duplicate ids and invalid
/// attributes are reported as schema errors naming the row; links to unknown
/// nodes are referential errors.
pub fn load_network<N: Read, L: Read>(nodes: N, links: L, defaults: &HierarchyDefaults) -> Result<Network> {
    let mut node_rows = Vec::new();
    for (i, rec) in csv::Reader::from_reader(nodes).deserialize::<NodeRow>().enumerate() {
        node_rows.push(rec.map_err(|e| schema(i + 1, e))?);
    }
    let coord_system = match node_rows.first() {
        Some(r) => r.coord_system,
        None => CoordSystem::Km,
    };
    let mut b = NetworkBuilder::new(coord_system);
    for (i, r) in node_rows.into_iter().enumerate() {
        if r.coord_system != coord_system {
            return Err(schema(i + 1, format!("mixed coordinate systems ({} vs {coord_system})", r.coord_system)));
        }
        if b.add_node(r.node_id, r.x, r.y).is_err() {
            return Err(schema(i + 1, "duplicate or invalid node"));
        }
    }
    for (i, rec) in csv::Reader::from_reader(links).deserialize::<LinkRow>().enumerate() {
        let row = i + 1;
        let r = rec.map_err(|e| schema(row, e))?;
        let class = defaults.get(r.hierarchy);
        let capacity = r.capacity.unwrap_or(class.capacity);
        let speed = r.free_flow_speed.map(|s| r.speed_unit.to_kmh(s)).unwrap_or(class.free_flow_speed);
        b.add_link(LinkSpec {
            id: r.link_id,
            from: r.from,
            to: r.to,
            length_km: r.length_unit.to_km(r.length),
            capacity,
            speed_kmh: speed,
            hierarchy: r.hierarchy,
        })
        .map_err(|e| at_row(row, e))?;
    }
    Ok(b.build())
}

/// Reads a zones CSV (`zone_id,x,y`).
pub fn load_zones<R: Read>(reader: R) -> Result<Vec<ZoneCentroid>> {
    let mut out = Vec::new();
    for (i, rec) in csv::Reader::from_reader(reader).deserialize::<ZoneRow>().enumerate() {
        let r = rec.map_err(|e| schema(i + 1, e))?;
        if !r.x.is_finite() || !r.y.is_finite() {
            return Err(schema(i + 1, "non-finite zone centroid"));
        }
        out.push(ZoneCentroid {
            id: r.zone_id,
            x: r.x,
            y: r.y,
        });
    }
    Ok(out)
}

pub fn write_nodes_csv<W: Write>(network: &Network, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for n in network.nodes() {
        w.serialize(NodeRow {
            node_id: n.id.clone(),
            x: n.x,
            y: n.y,
            coord_system: network.coord_system(),
        })?;
    }
    if network.nodes().is_empty() {
        w.write_record(["node_id", "x", "y", "coord_system"])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes links in internal units (km, km/h) with explicit capacity and speed.
pub fn write_links_csv<W: Write>(network: &Network, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let nodes = network.nodes();
    for l in network.links() {
        w.serialize(LinkRow {
            link_id: l.id.clone(),
            from: nodes[l.from].id.clone(),
            to: nodes[l.to].id.clone(),
            length: l.length,
            length_unit: LengthUnit::Km,
            capacity: Some(l.capacity),
            free_flow_speed: Some(l.free_flow_speed),
            speed_unit: SpeedUnit::Kmh,
            hierarchy: l.hierarchy,
        })?;
    }
    if network.links().is_empty() {
        w.write_record([
            "link_id",
            "from",
            "to",
            "length",
            "length_unit",
            "capacity",
            "free_flow_speed",
            "speed_unit",
            "hierarchy",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_zones_csv<W: Write>(zones: &[ZoneCentroid], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for z in zones {
        w.serialize(ZoneRow {
            zone_id: z.id.clone(),
            x: z.x,
            y: z.y,
        })?;
    }
    if zones.is_empty() {
        w.write_record(["zone_id", "x", "y"])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const NODES: &str = "node_id,x,y,coord_system\nh,0,0,km\nw,1,0,km\n";

    #[test]
    fn dual_route_link_is_converted_from_miles() {
        let links = "link_id,from,to,length,length_unit,capacity,free_flow_speed,speed_unit,hierarchy\n\
                     a,h,w,6,mi,120,30,mph,local\n";
        let net = load_network(NODES.as_bytes(), links.as_bytes(), &HierarchyDefaults::default()).unwrap();
        assert_eq!(net.link_count(), 1);
        let l = &net.links()[0];
        assert!((l.length - 9.654).abs() < 1e-12);
        assert!((l.free_flow_speed - 48.27).abs() < 1e-12);
        assert!((l.free_flow_time - 12.0).abs() < 1e-9);
    }

    #[test]
    fn empty_links_stream_is_valid() {
        let links = "link_id,from,to,length,length_unit,capacity,free_flow_speed,speed_unit,hierarchy\n";
        let net = load_network(NODES.as_bytes(), links.as_bytes(), &HierarchyDefaults::default()).unwrap();
        assert_eq!(net.link_count(), 0);
        assert_eq!(net.node_count(), 2);
    }

    #[test]
    fn missing_capacity_uses_hierarchy_default() {
        let links = "link_id,from,to,length,length_unit,capacity,free_flow_speed,speed_unit,hierarchy\n\
                     a,h,w,2,km,,,kmh,highway\n";
        let net = load_network(NODES.as_bytes(), links.as_bytes(), &HierarchyDefaults::default()).unwrap();
        let l = &net.links()[0];
        assert_eq!(l.capacity, 2000.0);
        assert_eq!(l.free_flow_speed, 60.0);
        assert!((l.free_flow_time - 2.0).abs() < 1e-12);
    }

    #[test]
    fn errors_name_rows() {
        let d = HierarchyDefaults::default();
        let dangling = "link_id,from,to,length,length_unit,capacity,free_flow_speed,speed_unit,hierarchy\n\
                        a,h,nowhere,2,km,100,50,kmh,local\n";
        assert!(matches!(load_network(NODES.as_bytes(), dangling.as_bytes(), &d), Err(Error::Referential(_))));

        let dup = "link_id,from,to,length,length_unit,capacity,free_flow_speed,speed_unit,hierarchy\n\
                   a,h,w,2,km,100,50,kmh,local\na,w,h,2,km,100,50,kmh,local\n";
        match load_network(NODES.as_bytes(), dup.as_bytes(), &d) {
            Err(Error::Schema { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }

        let neg = "link_id,from,to,length,length_unit,capacity,free_flow_speed,speed_unit,hierarchy\n\
                   a,h,w,-2,km,100,50,kmh,local\n";
        assert!(matches!(load_network(NODES.as_bytes(), neg.as_bytes(), &d), Err(Error::Schema { row: 1, .. })));

        let dup_nodes = "node_id,x,y,coord_system\nh,0,0,km\nh,1,0,km\n";
        let empty = "link_id,from,to,length,length_unit,capacity,free_flow_speed,speed_unit,hierarchy\n";
        assert!(matches!(
            load_network(dup_nodes.as_bytes(), empty.as_bytes(), &d),
            Err(Error::Schema { row: 2, .. })
        ));
    }

    #[test]
    fn round_trip_is_identical() {
        let links = "link_id,from,to,length,length_unit,capacity,free_flow_speed,speed_unit,hierarchy\n\
                     a,h,w,6,mi,120,30,mph,local\nb,h,w,7.5,mi,200,40,mph,highway\nc,w,h,1.3,km,,,kmh,expressway\n";
        let d = HierarchyDefaults::default();
        let net = load_network(NODES.as_bytes(), links.as_bytes(), &d).unwrap();
        let mut n_buf = Vec::new();
        let mut l_buf = Vec::new();
        write_nodes_csv(&net, &mut n_buf).unwrap();
        write_links_csv(&net, &mut l_buf).unwrap();
        let again = load_network(n_buf.as_slice(), l_buf.as_slice(), &d).unwrap();
        assert_eq!(net, again);
    }
}
