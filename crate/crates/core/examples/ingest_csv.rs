//! Load a network from CSV files, attach zone connectors and route one
//! shortest path on free-flow times.

use std::fs::File;
use std::path::Path;

use mue::network::{load_network, load_zones, shortest_path, HierarchyDefaults};

fn main() -> mue::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/dual_route");
    let base = load_network(
        File::open(dir.join("nodes.csv"))?,
        File::open(dir.join("links.csv"))?,
        &HierarchyDefaults::default(),
    )?;
    let zones = load_zones(File::open(dir.join("zones.csv"))?)?;
    let net = base.generate_connectors(&zones)?;
    println!("{} nodes, {} links after connectors", net.node_count(), net.link_count());
    for l in net.links() {
        println!("  {:<12} {:>6.2} km {:>7.1} veh/h {:>6.2} min", l.id, l.length, l.capacity, l.free_flow_time);
    }

    let times: Vec<f64> = net.links().iter().map(|l| l.free_flow_time).collect();
    let (o, d) = (net.zone("o").unwrap().access_node(), net.zone("d").unwrap().access_node());
    let tree = shortest_path(&net, &times, o)?;
    let path: Vec<&str> = tree.path_to(&net, d).unwrap_or_default().iter().map(|&a| net.links()[a].id.as_str()).collect();
    println!("fastest o -> d: {} ({:.2} min)", path.join(" "), tree.cost[d]);
    Ok(())
}
