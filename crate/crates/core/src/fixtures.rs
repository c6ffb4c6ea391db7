//! Small deterministic networks used by the tests, examples and the CLI.
//!
//! Each fixture carries its base network, zone centroids, the network with
//! generated connectors, an OD matrix and a cost configuration.

use std::fs::{self, File};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{Bpr, CostConfig, EvComponents, GeneralizedCost, GvComponents};
use crate::demand::{split_demand, ClassDemand, OdEntry, OdMatrix};
use crate::error::Result;
use crate::network::{
    write_links_csv, write_nodes_csv, write_zones_csv, CoordSystem, Hierarchy, LinkSpec, Network, NetworkBuilder,
    ZoneCentroid, KM_PER_MILE,
};

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    /// Road network without zone connectors.
    pub base: Network,
    pub zones: Vec<ZoneCentroid>,
    /// `base` with generated connectors.
    pub network: Network,
    pub od: OdMatrix,
    pub cost_config: CostConfig,
}

/// Counts written next to fixture files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub nodes: usize,
    pub links: usize,
    pub zones: usize,
    pub od_pairs: usize,
    pub total_demand: f64,
}

impl Fixture {
    fn new(name: &str, base: Network, zones: Vec<ZoneCentroid>, od: Vec<OdEntry>, cost_config: CostConfig) -> Self {
        let network = base.generate_connectors(&zones).expect("fixture zones attach");
        Self {
            name: name.to_string(),
            base,
            zones,
            network,
            od: OdMatrix::new(od).expect("fixture OD is valid"),
            cost_config,
        }
    }

    pub fn cost(&self) -> GeneralizedCost {
        GeneralizedCost::from_config(&self.cost_config).expect("fixture cost config is valid")
    }

    pub fn demand(&self, penetration: f64) -> Result<ClassDemand> {
        split_demand(&self.od, penetration)
    }

    /// Same fixture with a different BPR exponent.
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.cost_config.bpr_beta = beta;
        self
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            name: self.name.clone(),
            nodes: self.network.node_count(),
            links: self.network.link_count(),
            zones: self.zones.len(),
            od_pairs: self.od.len(),
            total_demand: self.od.total_demand(),
        }
    }

    /// Writes `nodes.csv`, `links.csv`, `zones.csv`, `od.csv`, `cost.json`
    /// and `manifest.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Manifest> {
        fs::create_dir_all(dir)?;
        write_nodes_csv(&self.base, File::create(dir.join("nodes.csv"))?)?;
        write_links_csv(&self.base, File::create(dir.join("links.csv"))?)?;
        write_zones_csv(&self.zones, File::create(dir.join("zones.csv"))?)?;
        self.od.write_csv(File::create(dir.join("od.csv"))?)?;
        fs::write(dir.join("cost.json"), self.cost_config.to_json_pretty()?)?;
        let manifest = self.manifest();
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }
}

fn zone(id: &str, x: f64, y: f64) -> ZoneCentroid {
    ZoneCentroid {
        id: id.to_string(),
        x,
        y,
    }
}

fn od(o: &str, d: &str, demand: f64) -> OdEntry {
    OdEntry {
        origin: o.to_string(),
        destination: d.to_string(),
        demand,
    }
}

fn link(b: &mut NetworkBuilder, id: &str, from: &str, to: &str, length_km: f64, speed_kmh: f64, capacity: f64) {
    let hierarchy = if speed_kmh >= 80.0 {
        Hierarchy::Expressway
    } else if speed_kmh >= 55.0 {
        Hierarchy::Highway
    } else {
        Hierarchy::Local
    };
    b.add_link(LinkSpec {
        id: id.to_string(),
        from: from.to_string(),
        to: to.to_string(),
        length_km,
        capacity,
        speed_kmh,
        hierarchy,
    })
    .expect("fixture link is valid");
}

/// Cost config with fixed per-mile class costs and no fuel term.
pub fn flat_cost_config(gv_per_mile: f64, ev_per_mile: f64, vot: f64, alpha: f64, beta: f64) -> CostConfig {
    CostConfig {
        name: None,
        p_gas: 0.0,
        p_ele: 0.0,
        mpg_gv: 25.0,
        mpge_ev: 110.0,
        kappa_gal: 33.7,
        gv_components: GvComponents {
            maint: gv_per_mile,
            ..Default::default()
        },
        ev_components: EvComponents {
            maint: ev_per_mile,
            ..Default::default()
        },
        r_dis: KM_PER_MILE,
        vot,
        bpr_alpha: alpha,
        bpr_beta: beta,
        road_classes: None,
    }
}

fn city_with_bpr(city: &str, alpha: f64, beta: f64) -> CostConfig {
    let mut c = CostConfig::city(city).expect("bundled city");
    c.bpr_alpha = alpha;
    c.bpr_beta = beta;
    c
}

/// Two parallel routes between one origin and one destination.
///
/// Route `a`: 6 mi at 30 mph, 120 veh/h. Route `b`: 7.5 mi at 40 mph,
/// 200 veh/h. BPR α = β = 1, 100 veh/h from zone `o` to zone `d`.
/// The cost config prices GV at 0.6 $/mi and EV at 0.316 $/mi with
/// γ = 0.3 $/min.
pub fn dual_route() -> Fixture {
    let mut b = NetworkBuilder::new(CoordSystem::Km);
    b.add_node("O", 0.0, 0.0).unwrap();
    b.add_node("D", 9.0, 0.0).unwrap();
    link(&mut b, "a", "O", "D", 6.0 * KM_PER_MILE, 30.0 * KM_PER_MILE, 120.0);
    link(&mut b, "b", "O", "D", 7.5 * KM_PER_MILE, 40.0 * KM_PER_MILE, 200.0);
    Fixture::new(
        "dual_route",
        b.build(),
        vec![zone("o", 0.0, 0.0), zone("d", 9.0, 0.0)],
        vec![od("o", "d", 100.0)],
        flat_cost_config(0.6, 0.316, 0.3, 1.0, 1.0),
    )
}

/// Dual-route pricing with the given per-mile class costs.
pub fn dual_route_cost(gv_per_mile: f64, ev_per_mile: f64) -> GeneralizedCost {
    GeneralizedCost::from_config(&flat_cost_config(gv_per_mile, ev_per_mile, 0.3, 1.0, 1.0))
        .expect("non-negative costs")
}

/// Dual-route pricing with a city's vehicle costs; the route BPR (α = β = 1)
/// and γ = 0.3 $/min are kept.
pub fn dual_route_city_cost(config: &CostConfig) -> Result<GeneralizedCost> {
    let cc = crate::cost::vehicle_costs(config)?;
    GeneralizedCost::new(0.3, Bpr::new(1.0, 1.0)?, cc.per_km)
}

/// Pure travel-time pricing on the dual route.
pub fn dual_route_time_only() -> GeneralizedCost {
    GeneralizedCost::time_only(Bpr { alpha: 1.0, beta: 1.0 })
}

fn grid_node(r: usize, c: usize) -> String {
    format!("n{r}_{c}")
}

/// 3×3 grid with right/down links and two OD pairs whose routes share the
/// link `n0_1 -> n1_1`. Each class has two routes per pair, one shorter and
/// one faster.
pub fn grid3x3() -> Fixture {
    let mut b = NetworkBuilder::new(CoordSystem::Km);
    for r in 0..3 {
        for c in 0..3 {
            b.add_node(grid_node(r, c), c as f64, -(r as f64)).unwrap();
        }
    }
    // (id, from, to, length, speed, capacity)
    let special: &[(&str, (usize, usize), (usize, usize), f64, f64, f64)] = &[
        ("h0_0", (0, 0), (0, 1), 1.0, 30.0, 60.0),
        ("v0_1", (0, 1), (1, 1), 1.0, 30.0, 80.0),
        ("v0_0", (0, 0), (1, 0), 2.0, 60.0, 80.0),
        ("h1_0", (1, 0), (1, 1), 1.5, 60.0, 60.0),
        ("h0_1", (0, 1), (0, 2), 1.5, 45.0, 60.0),
        ("v0_2", (0, 2), (1, 2), 1.5, 45.0, 60.0),
        ("h1_1", (1, 1), (1, 2), 1.2, 36.0, 60.0),
    ];
    for (id, f, t, len, speed, cap) in special {
        link(&mut b, id, &grid_node(f.0, f.1), &grid_node(t.0, t.1), *len, *speed, *cap);
    }
    for (id, f, t) in [
        ("h2_0", (2, 0), (2, 1)),
        ("h2_1", (2, 1), (2, 2)),
        ("v1_0", (1, 0), (2, 0)),
        ("v1_1", (1, 1), (2, 1)),
        ("v1_2", (1, 2), (2, 2)),
    ] {
        link(&mut b, id, &grid_node(f.0, f.1), &grid_node(t.0, t.1), 1.0, 40.0, 100.0);
    }
    Fixture::new(
        "grid3x3",
        b.build(),
        vec![
            zone("z00", 0.0, 0.0),
            zone("z01", 1.0, 0.0),
            zone("z11", 1.0, -1.0),
            zone("z12", 2.0, -1.0),
        ],
        vec![od("z00", "z11", 100.0), od("z01", "z12", 80.0)],
        city_with_bpr("san_francisco", 1.0, 2.0),
    )
}

/// Four-node Braess network: two long routes joined by a short cross link.
pub fn braess() -> Fixture {
    let mut b = NetworkBuilder::new(CoordSystem::Km);
    b.add_node("s", 0.0, 0.0).unwrap();
    b.add_node("a", 1.0, 1.0).unwrap();
    b.add_node("b", 1.0, -1.0).unwrap();
    b.add_node("t", 2.0, 0.0).unwrap();
    link(&mut b, "sa", "s", "a", 1.0, 60.0, 5.0);
    link(&mut b, "at", "a", "t", 10.0, 40.0, 10_000.0);
    link(&mut b, "sb", "s", "b", 10.0, 40.0, 10_000.0);
    link(&mut b, "bt", "b", "t", 1.0, 60.0, 5.0);
    link(&mut b, "ab", "a", "b", 0.5, 60.0, 10_000.0);
    Fixture::new(
        "braess",
        b.build(),
        vec![zone("zs", 0.0, 0.0), zone("zt", 2.0, 0.0)],
        vec![od("zs", "zt", 100.0)],
        city_with_bpr("san_francisco", 1.0, 1.0),
    )
}

/// Bidirectional square grid with faster arterials on every `arterial`-th
/// row and column and jittered link lengths.
fn square_grid(b: &mut NetworkBuilder, n: usize, spacing: f64, rng: &mut ChaCha8Rng, arterial: usize) {
    for r in 0..n {
        for c in 0..n {
            b.add_node(grid_node(r, c), c as f64 * spacing, -(r as f64) * spacing).unwrap();
        }
    }
    let attrs = |line: usize| -> (f64, f64) {
        if line.is_multiple_of(2 * arterial) {
            (90.0, 2200.0)
        } else if line.is_multiple_of(arterial) {
            (60.0, 2000.0)
        } else {
            (40.0, 1400.0)
        }
    };
    for r in 0..n {
        for c in 0..n {
            let here = grid_node(r, c);
            if c + 1 < n {
                let (speed, cap) = attrs(r);
                let len = spacing * rng.gen_range(1.0..1.25);
                let there = grid_node(r, c + 1);
                link(b, &format!("{here}>{there}"), &here, &there, len, speed, cap);
                link(b, &format!("{there}>{here}"), &there, &here, len, speed, cap);
            }
            if r + 1 < n {
                let (speed, cap) = attrs(c);
                let len = spacing * rng.gen_range(1.0..1.25);
                let there = grid_node(r + 1, c);
                link(b, &format!("{here}>{there}"), &here, &there, len, speed, cap);
                link(b, &format!("{there}>{here}"), &there, &here, len, speed, cap);
            }
        }
    }
}

/// 10×10 bidirectional grid (360 links), 20 zones on grid nodes and 50
/// seeded OD pairs.
pub fn grid10x10(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = NetworkBuilder::new(CoordSystem::Km);
    square_grid(&mut b, 10, 1.0, &mut rng, 3);
    let mut cells: Vec<(usize, usize)> = Vec::new();
    while cells.len() < 20 {
        let cell = (rng.gen_range(0..10), rng.gen_range(0..10));
        if !cells.contains(&cell) {
            cells.push(cell);
        }
    }
    let zones: Vec<ZoneCentroid> = cells
        .iter()
        .enumerate()
        .map(|(i, &(r, c))| zone(&format!("z{i}"), c as f64, -(r as f64)))
        .collect();
    let mut pairs = Vec::new();
    while pairs.len() < 50 {
        let (o, d) = (rng.gen_range(0..20), rng.gen_range(0..20));
        if o != d && !pairs.iter().any(|&(a, b, _)| (a, b) == (o, d)) {
            pairs.push((o, d, rng.gen_range(200.0..800.0_f64).round()));
        }
    }
    let od_entries = pairs
        .into_iter()
        .map(|(o, d, q)| od(&zones[o].id, &zones[d].id, q))
        .collect();
    Fixture::new(
        "grid10x10",
        b.build(),
        zones,
        od_entries,
        city_with_bpr("san_francisco", 0.15, 4.0),
    )
}

/// Synthetic city of about 2,000 links: a 23×23 grid of local streets with
/// highway and expressway arterials, 100 zones at seeded positions and ten
/// destinations per origin zone.
pub fn mini_city(seed: u64) -> Fixture {
    let n = 23;
    let spacing = 0.8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = NetworkBuilder::new(CoordSystem::Km);
    square_grid(&mut b, n, spacing, &mut rng, 4);
    let extent = (n - 1) as f64 * spacing;
    let zones: Vec<ZoneCentroid> = (0..100)
        .map(|i| {
            zone(
                &format!("taz{i:03}"),
                rng.gen_range(0.0..extent),
                -rng.gen_range(0.0..extent),
            )
        })
        .collect();
    let mut entries = Vec::new();
    for o in 0..zones.len() {
        let mut dests: Vec<usize> = Vec::new();
        while dests.len() < 10 {
            let d = rng.gen_range(0..zones.len());
            if d != o && !dests.contains(&d) {
                dests.push(d);
            }
        }
        dests.sort_unstable();
        for d in dests {
            entries.push(od(&zones[o].id, &zones[d].id, rng.gen_range(20.0..120.0_f64).round()));
        }
    }
    let mut config = CostConfig::city("dallas").expect("bundled city");
    config.name = Some("mini_city".into());
    Fixture::new("mini_city", b.build(), zones, entries, config)
}

/// Every fixture used by the solver property suite.
pub fn small_fixtures() -> Vec<Fixture> {
    vec![dual_route(), grid3x3(), braess(), grid10x10(7)]
}
